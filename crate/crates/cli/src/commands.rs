use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use psm_core::design::{generate_design, Answer, DesignConfig, OptionMode};
use psm_core::heterogeneity::{
    network_metrics, partition_models, permutation_similarity, threshold_network, JointDataset, SimilarityConfig,
    SimilarityMatrix,
};
use psm_core::par;
use psm_core::rationality::{rationality_test, Support, TestConfig, TestResult};
use psm_core::report::{self, Header};
use psm_core::revealed::{ccei, efficiency_from_f64};
use psm_core::survey::{
    run_adaptive_session, run_session, AgentKind, AgentSpec, HttpResponder, JsonlWriter, ProviderConfig, Responder,
    SessionLog, SurveyError, SyntheticAgent,
};
use psm_core::utility::{fit_nlls, FitConfig, FitResult};
use psm_core::Design;

use crate::config::{load_session, read_design, sha256_file, Loaded, PipelineConfig, SessionEntry};
use crate::{AgentArgs, Cli, CliError, Command, DesignArgs, ProviderArgs, SessionArgs};

pub fn run(cli: Cli) -> Result<(), CliError> {
    let (cfg, mut inputs) = match &cli.config {
        Some(path) => (PipelineConfig::load(path)?, vec![input(path)?]),
        None => (PipelineConfig::default(), Vec::new()),
    };
    let jobs = cli.jobs.or(cfg.jobs);
    par::with_jobs(jobs, move || dispatch(cli.command, cfg, &mut inputs))
}

fn input(path: &Path) -> Result<(String, String), CliError> {
    Ok((path.display().to_string(), sha256_file(path)?))
}

fn header(command: &str, seed: u64, inputs: &[(String, String)]) -> Header {
    Header {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: Some(seed),
        inputs: inputs.to_vec(),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn write_text(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(io_err(path)),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string())),
    }
}

/// JSON document with a `header` member next to the payload's own fields.
fn json_with_header<T: serde::Serialize>(h: &Header, payload: &T) -> String {
    let mut v = serde_json::to_value(payload).expect("serializable");
    if let serde_json::Value::Object(map) = &mut v {
        map.insert("header".into(), serde_json::to_value(h).expect("serializable"));
    }
    let mut s = serde_json::to_string(&v).expect("serializable");
    s.push('\n');
    s
}

fn design_config(args: &DesignArgs, seed: u64) -> Result<DesignConfig, CliError> {
    let option_mode = match (args.full_budget, args.comprehensive) {
        (true, _) => OptionMode::FullBudget,
        (_, true) => OptionMode::FullComprehensive,
        _ => OptionMode::Sampled,
    };
    let cfg = DesignConfig { option_mode, options_per_round: args.options, budget: args.budget, ..DesignConfig::with_seed(seed) };
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

fn parse_q0(text: &str) -> Result<Answer, CliError> {
    let values: Vec<i64> = text
        .split(',')
        .map(|v| v.trim().parse::<i64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Config(format!("q0 {text:?} is not a comma-separated list of integers")))?;
    Answer::try_from(values).map_err(|e| CliError::Config(format!("q0 {text:?}: {e}")))
}

fn write_design(path: &Path, design: &Design, h: &Header) -> Result<(), CliError> {
    fs::write(path, json_with_header(h, design)).map_err(io_err(path))
}

/// Sessions from the flags, or the config's when none are given; the inputs
/// list gains every file read.
fn load_sessions(
    cfg: &mut PipelineConfig,
    args: &SessionArgs,
    inputs: &mut Vec<(String, String)>,
) -> Result<Vec<Loaded>, CliError> {
    if !args.session.is_empty() {
        cfg.sessions = args
            .session
            .chunks(2)
            .map(|p| SessionEntry { design: p[0].clone(), log: p[1].clone(), model_id: None, provider: None })
            .collect();
    }
    if cfg.sessions.is_empty() {
        return Err(CliError::Config("no sessions given (use --session DESIGN LOG or a config file)".into()));
    }
    cfg.validate()?;
    let mut out = Vec::new();
    for s in &cfg.sessions {
        inputs.push(input(&s.design)?);
        inputs.push(input(&s.log)?);
        out.push(load_session(s)?);
    }
    Ok(out)
}

fn analysis<E: std::fmt::Display>(model: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Analysis(format!("{model}: {e}"))
}

fn test_rows(loaded: &[Loaded], cfg: &PipelineConfig, design_support: bool) -> Result<Vec<(String, TestResult)>, CliError> {
    loaded
        .iter()
        .map(|l| {
            let support = if design_support { Support::Rounds(l.design.shared_rounds()) } else { Support::Observed };
            let tc = TestConfig { n_draws: cfg.n_draws, seed: cfg.seed, support };
            let r = rationality_test(&l.dataset, &tc).map_err(analysis(&l.dataset.model_id))?;
            Ok((l.entry.provider.clone().unwrap_or_default(), r))
        })
        .collect()
}

fn fit_rows(loaded: &[Loaded], cfg: &PipelineConfig) -> Result<Vec<(String, FitResult)>, CliError> {
    let fc = FitConfig { demand_mode: cfg.demand_mode, n_restarts: cfg.restarts, seed: cfg.seed, ..FitConfig::default() };
    loaded
        .iter()
        .map(|l| Ok((l.dataset.model_id.clone(), fit_nlls(&l.dataset, &fc).map_err(analysis(&l.dataset.model_id))?)))
        .collect()
}

fn similarity(loaded: &[Loaded], cfg: &PipelineConfig) -> Result<SimilarityMatrix, CliError> {
    let e = efficiency_from_f64(cfg.e).map_err(|e| CliError::Config(e.to_string()))?;
    let sc = SimilarityConfig { rho: cfg.rho, draws: cfg.permutation_draws, e, seed: cfg.seed };
    let models: Vec<_> = loaded.iter().map(|l| l.dataset.clone()).collect();
    permutation_similarity(&models, &sc).map_err(|e| CliError::Analysis(e.to_string()))
}

/// DOT, adjacency and metrics files for each alpha.
fn write_networks(
    dir: &Path,
    g: &SimilarityMatrix,
    alphas: &[f64],
    h: &Header,
    with_tables: bool,
) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    for &alpha in alphas {
        let net = threshold_network(g, alpha).map_err(|e| CliError::Config(e.to_string()))?;
        let dot = dir.join(format!("network_{alpha:.2}.dot"));
        fs::write(&dot, report::network_dot(h, &net)).map_err(io_err(&dot))?;
        written.push(dot);
        if with_tables {
            let adj = dir.join(format!("adjacency_{alpha:.2}.csv"));
            fs::write(&adj, report::adjacency_csv(h, &net)).map_err(io_err(&adj))?;
            let met = dir.join(format!("metrics_{alpha:.2}.csv"));
            fs::write(&met, report::metrics_csv(h, &net.model_ids, &network_metrics(&net))).map_err(io_err(&met))?;
            written.extend([adj, met]);
        }
    }
    Ok(written)
}

fn responder(agent: &AgentArgs, provider: &ProviderArgs, model_id: &str) -> Result<Box<dyn Responder>, CliError> {
    let spec = if let Some(path) = &agent.agent {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Some(serde_json::from_str::<AgentSpec>(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?)
    } else if let Some(kind) = &agent.agent_kind {
        let kind: AgentKind = serde_json::from_value(serde_json::Value::String(kind.clone()))
            .map_err(|_| CliError::Config(format!("unknown agent kind {kind:?}")))?;
        Some(AgentSpec { kind, params: None, fixed_index: agent.fixed_index, seed: agent.agent_seed })
    } else {
        None
    };
    if let Some(spec) = spec {
        return Ok(Box::new(SyntheticAgent::new(spec).map_err(|e| CliError::Config(e.to_string()))?));
    }

    let mut pc = match &provider.provider {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<ProviderConfig>(&text)
                .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?
        }
        None => {
            let url = provider
                .endpoint_url
                .as_deref()
                .ok_or_else(|| CliError::Config("need --agent, --agent-kind, --provider or --endpoint-url".into()))?;
            ProviderConfig::new("custom", url, model_id)
        }
    };
    let p = provider.clone();
    if let Some(v) = p.provider_name {
        pc.provider_name = v;
    }
    if let Some(v) = p.endpoint_url {
        pc.endpoint_url = v;
    }
    if let Some(v) = p.model_name {
        pc.model_name = v;
    }
    if let Some(v) = p.auth_env_var {
        pc.auth_env_var = v;
    }
    if let Some(v) = p.max_in_flight {
        pc.max_in_flight = v;
    }
    if let Some(v) = p.timeout_secs {
        pc.timeout_secs = v;
    }
    if let Some(v) = p.retry_limit {
        pc.retry_limit = v;
    }
    if let Some(v) = p.requests_per_minute {
        pc.requests_per_minute = Some(v);
    }
    if let Some(path) = p.body_template {
        let text = fs::read_to_string(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        pc.body_template =
            Some(serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?);
    }
    if let Some(v) = p.response_pointer {
        pc.response_pointer = v;
    }
    Ok(Box::new(HttpResponder::new(pc).map_err(|e| CliError::Config(e.to_string()))?))
}

fn survey_err(e: SurveyError) -> CliError {
    match e {
        SurveyError::Fatal(m) => CliError::Transport(m),
        SurveyError::Io(e) => CliError::Io(e.to_string()),
        other => CliError::Analysis(other.to_string()),
    }
}

fn summarize(log: &SessionLog, rounds: usize) {
    eprintln!("{}: {} of {rounds} rounds answered", log.model_id, log.ok_count());
}

fn dispatch(command: Command, mut cfg: PipelineConfig, inputs: &mut Vec<(String, String)>) -> Result<(), CliError> {
    match command {
        Command::GenDesign { q0, seed, out, design } => {
            let seed = seed.unwrap_or(cfg.seed);
            let d = generate_design(parse_q0(&q0)?, &design_config(&design, seed)?)
                .map_err(|e| CliError::Config(e.to_string()))?;
            write_design(&out, &d, &header("gen-design", seed, inputs))
        }
        Command::Run { design, adaptive, design_out, seed, design_args, model_id, log, agent, provider } => {
            let seed = seed.unwrap_or(cfg.seed);
            let responder = responder(&agent, &provider, &model_id)?;
            let file = fs::File::create(&log).map_err(io_err(&log))?;
            let mut writer = JsonlWriter::new(std::io::BufWriter::new(file));
            let mut sink = |r: &psm_core::survey::AttemptRecord| writer.append(r);
            if adaptive {
                let dc = design_config(&design_args, seed)?;
                let (d, session) = run_adaptive_session(responder.as_ref(), &model_id, &dc, &mut sink)
                    .map_err(|(partial, e)| {
                        summarize(&partial, 161);
                        survey_err(e)
                    })?;
                let out = design_out.expect("clap requires --design-out with --adaptive");
                write_design(&out, &d, &header("run", seed, inputs))?;
                summarize(&session, d.rounds.len());
            } else {
                let path = design.expect("clap requires --design without --adaptive");
                inputs.push(input(&path)?);
                let d = read_design(&path)?;
                let session = run_session(responder.as_ref(), &model_id, &d, &mut sink).map_err(|(partial, e)| {
                    summarize(&partial, d.rounds.len());
                    survey_err(e)
                })?;
                summarize(&session, d.rounds.len());
            }
            Ok(())
        }
        Command::Ccei { sessions } => {
            let loaded = load_sessions(&mut cfg, &sessions, inputs)?;
            let rows = loaded
                .iter()
                .map(|l| {
                    let c = ccei(&l.dataset).map_err(analysis(&l.dataset.model_id))?;
                    Ok((l.dataset.model_id.clone(), l.dataset.len(), c))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            write_text(sessions.out.as_deref(), &report::ccei_csv(&header("ccei", cfg.seed, inputs), &rows))
        }
        Command::Test { sessions, draws, seed, design_support } => {
            cfg.n_draws = draws.unwrap_or(cfg.n_draws);
            cfg.seed = seed.unwrap_or(cfg.seed);
            let loaded = load_sessions(&mut cfg, &sessions, inputs)?;
            let rows = test_rows(&loaded, &cfg, design_support)?;
            write_text(sessions.out.as_deref(), &report::test_csv(&header("test", cfg.seed, inputs), &rows))
        }
        Command::Fit { sessions, demand_mode, restarts, seed } => {
            if let Some(m) = demand_mode {
                cfg.demand_mode = m.parse().map_err(CliError::Config)?;
            }
            cfg.restarts = restarts.unwrap_or(cfg.restarts);
            cfg.seed = seed.unwrap_or(cfg.seed);
            let loaded = load_sessions(&mut cfg, &sessions, inputs)?;
            let rows = fit_rows(&loaded, &cfg)?;
            write_text(sessions.out.as_deref(), &report::fit_csv(&header("fit", cfg.seed, inputs), &rows))
        }
        Command::Partition { sessions, e } => {
            cfg.e = e.unwrap_or(cfg.e);
            let loaded = load_sessions(&mut cfg, &sessions, inputs)?;
            let e = efficiency_from_f64(cfg.e).map_err(|e| CliError::Config(e.to_string()))?;
            let models: Vec<_> = loaded.iter().map(|l| l.dataset.clone()).collect();
            let p = partition_models(&JointDataset::from_datasets(&models), e)
                .map_err(|e| CliError::Analysis(e.to_string()))?;
            write_text(sessions.out.as_deref(), &report::partition_csv(&header("partition", cfg.seed, inputs), &p))
        }
        Command::Permute { sessions, rho, draws, e, seed, json } => {
            cfg.rho = rho.unwrap_or(cfg.rho);
            cfg.permutation_draws = draws.unwrap_or(cfg.permutation_draws);
            cfg.e = e.unwrap_or(cfg.e);
            cfg.seed = seed.unwrap_or(cfg.seed);
            let loaded = load_sessions(&mut cfg, &sessions, inputs)?;
            let g = similarity(&loaded, &cfg)?;
            let h = header("permute", cfg.seed, inputs);
            if let Some(path) = json {
                fs::write(&path, json_with_header(&h, &g)).map_err(io_err(&path))?;
            }
            write_text(sessions.out.as_deref(), &report::similarity_csv(&h, &g))
        }
        Command::Network { similarity, alpha, out_dir } => {
            let alphas = if alpha.is_empty() { cfg.alphas.clone() } else { alpha };
            inputs.push(input(&similarity)?);
            let text = fs::read_to_string(&similarity).map_err(io_err(&similarity))?;
            let g: SimilarityMatrix = serde_json::from_str(&text)
                .map_err(|e| CliError::Parse(format!("{}: {e}", similarity.display())))?;
            write_networks(&out_dir, &g, &alphas, &header("network", g.seed, inputs), true)?;
            Ok(())
        }
        Command::Report { sessions } => {
            let dir = sessions
                .out
                .clone()
                .or(cfg.out_dir.clone())
                .ok_or_else(|| CliError::Config("report needs --out or out_dir in the config".into()))?;
            let loaded = load_sessions(&mut cfg, &sessions, inputs)?;
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
            let h = header("report", cfg.seed, inputs);
            let tests = test_rows(&loaded, &cfg, false)?;
            let fits = fit_rows(&loaded, &cfg)?;
            let g = similarity(&loaded, &cfg)?;
            for (name, text) in [
                ("rationality.csv", report::test_csv(&h, &tests)),
                ("utility.csv", report::fit_csv(&h, &fits)),
                ("similarity.csv", report::similarity_csv(&h, &g)),
            ] {
                let path = dir.join(name);
                fs::write(&path, text).map_err(io_err(&path))?;
            }
            write_networks(&dir, &g, &cfg.alphas, &h, false)?;
            Ok(())
        }
    }
}
