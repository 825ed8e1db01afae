use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trustcal_core::data::{synthetic_study, Dataset, StudyDesign};
use trustcal_core::docs::{ModelDoc, PolicyDoc, Provenance};
use trustcal_core::estimation::{multi_restart_fit_report, FitConfig};
use trustcal_core::selection::{enumerate_structures, select_among, SelectionConfig, Stratify};
use trustcal_core::simulation::{
    run_closed_loop, step_response, trace_csv, ClosedLoopConfig, FixedTransparency, Scenario, TransparencyPolicy,
};
use trustcal_core::solver::{policy_grid, policy_grid_csv, value_iteration, SolverConfig};
use trustcal_core::{
    ActionStructure, ActionTuple, Context, DimSet, EpisodeMode, RewardSpec, Transparency, TrustWorkloadModel,
    N_CONTEXTS,
};
use trustcal_service::AppState;

use crate::args::*;
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// FPS used to convert `--seconds` to frames.
const FRAMES_PER_SECOND: f64 = trustcal_core::data::FPS;

fn invocation() -> String {
    let mut parts = vec!["trustcal".to_string()];
    parts.extend(std::env::args().skip(1));
    parts.join(" ")
}

fn header(schema: &str) -> Vec<String> {
    let p = Provenance::new(invocation());
    vec![format!("schema: {schema}"), format!("generator: {}", p.generator), format!("invocation: {}", p.invocation)]
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn with_path<T>(path: &Path, r: trustcal_core::Result<T>) -> Result<T> {
    r.map_err(|e| {
        let numerical = e.is_numerical();
        let msg = format!("{}: {e}", path.display());
        if numerical {
            CliError::Numerical(msg)
        } else {
            CliError::Input(msg)
        }
    })
}

fn load_model(path: &Path) -> Result<TrustWorkloadModel> {
    let text = read(path)?;
    with_path(path, ModelDoc::from_json(&text).and_then(|d| d.to_model()))
}

fn load_policy(path: &Path) -> Result<trustcal_core::solver::QmdpPolicy> {
    let text = read(path)?;
    with_path(path, PolicyDoc::from_json(&text).and_then(|d| d.to_policy()))
}

fn load_reward(path: Option<&Path>) -> Result<RewardSpec> {
    match path {
        None => Ok(RewardSpec::default()),
        Some(p) => with_path(p, RewardSpec::read_csv(read(p)?.as_bytes())),
    }
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    with_path(path, Dataset::read_csv(read(path)?.as_bytes()))
}

fn resolve_structure(args: &StructureArgs) -> Result<ActionStructure> {
    Ok(match (&args.structure, &args.trust_dims, &args.workload_dims) {
        (_, Some(t), Some(w)) => ActionStructure::new(DimSet::parse_label(t)?, DimSet::parse_label(w)?)?,
        (Some(NamedStructure::Minimal), ..) => ActionStructure::minimal(),
        (Some(NamedStructure::Full), ..) => ActionStructure::full(),
        _ => ActionStructure::paper(),
    })
}

fn configure_jobs(jobs: Option<usize>) -> Result<()> {
    if let Some(n) = jobs {
        if n == 0 {
            return Err(CliError::Input("--jobs must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    configure_jobs(cli.jobs)?;
    eprintln!("trustcal {}: {:?}", env!("CARGO_PKG_VERSION"), cli.command);
    match cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Select(a) => select(a),
        Command::Solve(a) => solve(a),
        Command::StepResponse(a) => step_responses(a),
        Command::Simulate(a) => simulate(a),
        Command::Serve(a) => serve(a),
        Command::Generate(a) => generate(a),
    }
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let structure = resolve_structure(&a.structure)?;
    let data = load_dataset(&a.data)?;
    let config =
        FitConfig { tol: a.tol, max_iter: a.max_iter, n_restarts: a.restarts, rng_seed: a.seed, prob_floor: a.prob_floor };
    eprintln!("resolved: structure=[{structure}] seed={} config={config:?}", a.seed);
    let fit = multi_restart_fit_report(&data, &structure, &config)?;
    let mut doc = ModelDoc::from_model(&fit.best.model, Provenance::new(invocation()));
    doc.notes = vec![
        format!("total_log_likelihood: {}", fit.best.total_log_likelihood),
        format!("restart: {}", fit.best.restart_index),
        format!("iterations: {}", fit.best.iterations),
        format!("converged: {}", fit.best.converged),
        format!("sequences: {}", data.len()),
        format!("frames: {}", data.n_frames()),
    ];
    let json = doc.to_json();

    let mut report = String::new();
    for line in header("twfitreport/1") {
        report.push_str(&format!("# {line}\n"));
    }
    report.push_str(&format!("# best restart {} log-likelihood {}\n", fit.best.restart_index, fit.best.total_log_likelihood));
    report.push_str(&fit.report_table());
    report.push_str("\n# model\n");
    report.push_str(&json);
    write(&a.out, &json)?;
    write(&a.report, &report)?;
    eprintln!("best log-likelihood {} (restart {})", fit.best.total_log_likelihood, fit.best.restart_index);
    Ok(())
}

fn parse_candidate(s: &str) -> Result<ActionStructure> {
    let (t, w) = s
        .split_once(':')
        .ok_or_else(|| CliError::Input(format!("candidate `{s}` must be `trust_dims:workload_dims`")))?;
    Ok(ActionStructure::new(DimSet::parse_label(t)?, DimSet::parse_label(w)?)?)
}

fn select(a: SelectArgs) -> Result<()> {
    let data = load_dataset(&a.data)?;
    let candidates = if a.candidates.is_empty() {
        enumerate_structures()
    } else {
        a.candidates.iter().map(|c| parse_candidate(c)).collect::<Result<Vec<_>>>()?
    };
    let config = SelectionConfig {
        k_folds: a.folds,
        n_repeats: a.repeats,
        restarts_per_fit: a.restarts,
        rng_seed: a.seed,
        stratify_by: match a.stratify {
            StratifyArg::ParticipantCondition => Stratify::ParticipantCondition,
            StratifyArg::Condition => Stratify::Condition,
        },
        fit: FitConfig { tol: a.tol, max_iter: a.max_iter, ..FitConfig::default() },
    };
    eprintln!("resolved: seed={} candidates={} config={config:?}", a.seed, candidates.len());
    let report = select_among(&data, &candidates, &config)?;
    let mut comments = header("twselection/1");
    comments.push(format!("chosen: {}", report.chosen));
    write(&a.out, &report.to_csv(&comments))?;
    eprintln!("chosen structure: {}", report.chosen);
    Ok(())
}

fn load_context_dist(path: Option<&Path>) -> Result<[f64; N_CONTEXTS]> {
    let Some(path) = path else {
        return Ok([1.0 / N_CONTEXTS as f64; N_CONTEXTS]);
    };
    let text = read(path)?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let bad = |m: String| CliError::Input(format!("{}: {m}", path.display()));
    let mut dist = [0.0; N_CONTEXTS];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != 2 {
            return Err(bad("expected `context,probability` rows".into()));
        }
        let u = Context::parse_label(&rec[0])?;
        dist[u.index()] = rec[1].trim().parse().map_err(|e| bad(format!("`{}`: {e}", &rec[1])))?;
    }
    Ok(dist)
}

fn solve(a: SolveArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let reward = load_reward(a.reward.as_deref())?;
    let config = SolverConfig { gamma: a.gamma, vi_tol: a.vi_tol, context_dist: load_context_dist(a.context_dist.as_deref())? };
    eprintln!("resolved: gamma={:?} vi_tol={:e} reward={:?}", a.gamma, a.vi_tol, reward.table());
    let policy = value_iteration(&model, &reward, &config)?;
    write(&a.out, &PolicyDoc::from_policy(&policy, Provenance::new(invocation())).to_json())?;
    let cells = policy_grid(&policy, a.grid_resolution)?;
    write(&a.grid, &policy_grid_csv(&cells, &header("twgrid/1")))?;
    Ok(())
}

fn parse_initial(s: &str) -> Result<[f64; 4]> {
    let v = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| CliError::Input(format!("--initial `{x}`: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    v.try_into().map_err(|_| CliError::Input("--initial needs 4 comma-separated probabilities".into()))
}

fn step_responses(a: StepResponseArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let horizon = match a.frames {
        Some(f) => f,
        None if a.seconds >= 0.0 && a.seconds.is_finite() => (a.seconds * FRAMES_PER_SECOND).round() as usize,
        None => return Err(CliError::Input("--seconds must be a nonnegative number".into())),
    };
    let actions = if a.actions.is_empty() {
        ActionTuple::all().collect()
    } else {
        a.actions.iter().map(|s| ActionTuple::parse_label(s)).collect::<trustcal_core::Result<Vec<_>>>()?
    };
    let initial = a.initial.as_deref().map(parse_initial).transpose()?;
    eprintln!("resolved: horizon={horizon} frames actions={} initial={initial:?}", actions.len());
    let comments = header("twstep/1");
    for act in actions {
        let sr = step_response(&model, &act, horizon, initial)?;
        write(&a.out_dir.join(format!("{}.csv", act.label())), &sr.to_csv(&comments))?;
    }
    Ok(())
}

fn load_scenario(a: &SimulateArgs) -> Result<Scenario> {
    let Some(path) = &a.scenario else {
        return Ok(Scenario::random(a.episodes, a.episode_frames, &[1.0 / N_CONTEXTS as f64; N_CONTEXTS], a.seed)?);
    };
    let text = read(path)?;
    let bad = |m: String| CliError::Input(format!("{}: {m}", path.display()));
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut spec = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != 2 {
            return Err(bad("expected `context,duration_frames` rows".into()));
        }
        let d: usize = rec[1].trim().parse().map_err(|e| bad(format!("`{}`: {e}", &rec[1])))?;
        spec.push((Context::parse_label(&rec[0])?, d));
    }
    with_path(path, Scenario::from_segments(&spec))
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let truth = load_model(&a.model)?;
    let belief_model = match &a.belief_model {
        Some(p) => load_model(p)?,
        None => truth.clone(),
    };
    let scenario = load_scenario(&a)?;
    let qmdp;
    let fixed;
    let (policy, gamma, default_reward): (&dyn TransparencyPolicy, f64, RewardSpec) = match (&a.policy, &a.fixed) {
        (Some(p), _) => {
            qmdp = load_policy(p)?;
            (&qmdp, qmdp.config().gamma, *qmdp.reward())
        }
        (None, Some(t)) => {
            fixed = FixedTransparency(t.parse::<Transparency>()?);
            (&fixed, trustcal_core::solver::DEFAULT_GAMMA, RewardSpec::default())
        }
        (None, None) => return Err(CliError::Input("either --policy or --fixed is required".into())),
    };
    let reward = match &a.reward {
        Some(_) => load_reward(a.reward.as_deref())?,
        None => default_reward,
    };
    let config = ClosedLoopConfig {
        episode_mode: if a.carry_belief { EpisodeMode::Carry } else { EpisodeMode::Reset },
        min_dwell: a.min_dwell,
        gamma,
    };
    eprintln!("resolved: seed={} frames={} config={config:?}", a.seed, scenario.len());
    let (metrics, trace) = run_closed_loop(&truth, &belief_model, policy, &reward, &scenario, a.seed, &config)?;

    let p = Provenance::new(invocation());
    let mut doc = serde_json::Map::new();
    doc.insert("schema".into(), "twmetrics/1".into());
    doc.insert("generator".into(), p.generator.into());
    doc.insert("invocation".into(), p.invocation.into());
    doc.insert("seed".into(), a.seed.into());
    doc.insert("metrics".into(), serde_json::to_value(metrics).expect("metrics serialize"));
    let mut json = serde_json::to_string_pretty(&doc).expect("metrics serialize");
    json.push('\n');
    write(&a.metrics, &json)?;
    write(&a.trace, &trace_csv(&trace, &header("twtrace/1")))?;
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let state = match &a.journal {
        Some(dir) => {
            let s = AppState::with_journal(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
            let ids = s.recover().map_err(|e| CliError::Input(e.to_string()))?;
            eprintln!("recovered {} session(s)", ids.len());
            s
        }
        None => AppState::new(),
    };
    eprintln!("resolved: addr={} journal={:?}", a.addr, a.journal);
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Input(e.to_string()))?;
    rt.block_on(trustcal_service::serve(a.addr, state))
        .map_err(|e| CliError::Input(format!("{}: {e}", a.addr)))
}

fn generate(a: GenerateArgs) -> Result<()> {
    let model = match &a.model {
        Some(p) => load_model(p)?,
        None => {
            let structure = resolve_structure(&a.structure)?;
            TrustWorkloadModel::random(structure, &mut ChaCha8Rng::seed_from_u64(a.seed))
        }
    };
    let design = StudyDesign {
        participants: a.participants,
        intersections_per_condition: a.intersections,
        frames_per_sequence: a.frames,
    };
    eprintln!("resolved: seed={} design={design:?} structure=[{}]", a.seed, model.structure());
    let mut data = synthetic_study(&model, design, a.seed)?;
    let mut notes = header("twsequences/1");
    notes.append(&mut data.notes);
    data.notes = notes;
    let mut buf = Vec::new();
    data.write_csv(&mut buf)?;
    write(&a.out, &String::from_utf8(buf).expect("csv is utf-8"))?;
    if let Some(p) = &a.truth_out {
        write(p, &ModelDoc::from_model(&model, Provenance::new(invocation())).to_json())?;
    }
    Ok(())
}
