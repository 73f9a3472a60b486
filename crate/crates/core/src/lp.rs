//! Thin wrapper over the HiGHS solver.

use std::sync::Mutex;

use highs::{HighsModelStatus, RowProblem, Sense};

// HiGHS keeps process-wide scheduler state; solves are serialized.
static HIGHS_LOCK: Mutex<()> = Mutex::new(());

pub(crate) enum LpOutcome {
    Optimal(Vec<f64>),
    Infeasible,
    Other(HighsModelStatus),
}

pub(crate) fn solve(problem: RowProblem, sense: Sense, tight: bool) -> LpOutcome {
    let _guard = HIGHS_LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let mut model = problem.optimise(sense);
    model.make_quiet();
    model.set_option("threads", 1i32);
    if tight {
        model.set_option("primal_feasibility_tolerance", 1e-10);
        model.set_option("dual_feasibility_tolerance", 1e-10);
    }
    let solved = model.solve();
    match solved.status() {
        HighsModelStatus::Optimal => LpOutcome::Optimal(solved.get_solution().columns().to_vec()),
        // every problem built here has a bounded objective
        HighsModelStatus::Infeasible | HighsModelStatus::UnboundedOrInfeasible => LpOutcome::Infeasible,
        other => LpOutcome::Other(other),
    }
}
