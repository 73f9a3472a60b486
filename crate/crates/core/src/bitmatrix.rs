/// Dense square boolean matrix stored as packed 64-bit rows.
#[derive(Clone, PartialEq, Eq)]
pub struct BitMatrix {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl BitMatrix {
    pub fn new(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        BitMatrix { n, words, bits: vec![0; n * words] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::new(n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::new(n);
        for i in 0..n {
            for j in 0..n {
                if f(i, j) {
                    m.set(i, j, true);
                }
            }
        }
        m
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        debug_assert!(i < self.n && j < self.n);
        self.bits[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        debug_assert!(i < self.n && j < self.n);
        let w = &mut self.bits[i * self.words + j / 64];
        if value {
            *w |= 1 << (j % 64);
        } else {
            *w &= !(1 << (j % 64));
        }
    }

    pub(crate) fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    /// Indices of set bits in row `i`.
    pub fn row_iter(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(i).iter().enumerate().flat_map(|(w, &word)| {
            let mut word = word;
            std::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let b = word.trailing_zeros() as usize;
                word &= word - 1;
                Some(w * 64 + b)
            })
        })
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::new(self.n);
        for i in 0..self.n {
            for j in self.row_iter(i) {
                t.set(j, i, true);
            }
        }
        t
    }

    /// `self[i][j] => other[i][j]` for all entries.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.n == other.n && self.bits.iter().zip(&other.bits).all(|(a, b)| a & !b == 0)
    }

    /// Reflexive-transitive closure (Warshall over packed rows).
    pub fn closure(&self) -> Self {
        let mut c = self.clone();
        for i in 0..self.n {
            c.set(i, i, true);
        }
        let mut pivot = vec![0u64; self.words];
        for k in 0..self.n {
            pivot.copy_from_slice(c.row(k));
            for i in 0..self.n {
                if c.get(i, k) {
                    let row = &mut c.bits[i * self.words..(i + 1) * self.words];
                    for (r, p) in row.iter_mut().zip(&pivot) {
                        *r |= p;
                    }
                }
            }
        }
        c
    }

    /// First `(i, j)` with `i != j` set in both `self` and `other`.
    pub(crate) fn first_common_off_diagonal(&self, other: &Self) -> Option<(usize, usize)> {
        for i in 0..self.n {
            for (w, (a, b)) in self.row(i).iter().zip(other.row(i)).enumerate() {
                let mut both = a & b;
                if w == i / 64 {
                    both &= !(1u64 << (i % 64));
                }
                if both != 0 {
                    return Some((i, w * 64 + both.trailing_zeros() as usize));
                }
            }
        }
        None
    }
}

impl std::fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in 0..self.n {
            let line: String = (0..self.n).map(|j| if self.get(i, j) { '1' } else { '.' }).collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}
