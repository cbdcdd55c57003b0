//! `rsa`: query speaker and listener agents, fit parameters and reproduce
//! the reference-game figure from the command line.

mod output;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rsa_core::analysis::{self, BehavioralDataset, ModelSet, ParamGrid, INFO_EPSILON};
use rsa_core::inference::{self, Query, QueryResult, DEFAULT_BUDGET};
use rsa_core::{builtin, report, Assignment, ErrorClass, RsaError, Scenario};

use output::{exact, json_array, json_num, json_object, json_prob_map, json_str, sig6, Format};

#[derive(Parser, Debug)]
#[command(
    name = "rsa",
    version,
    about = "Rational Speech Act models of pragmatic reasoning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Posterior of a listener over states (and latents) given an utterance.
    Listener(ListenerArgs),
    /// Utterance distribution of a speaker for a state or observation.
    Speaker(SpeakerArgs),
    /// Pragmatic minus literal posterior for each state.
    Info(InfoArgs),
    /// Grid posterior over parameters given behavioral data.
    Fit(FitArgs),
    /// Bayes factor between two (scenario, grid) models on the same data.
    Compare(CompareArgs),
    /// Check a scenario and print its diagnostics.
    Validate(ValidateArgs),
    /// Names of the scenarios compiled into the binary.
    ListBuiltin,
    /// Panels B, C and D of the reference-game figure.
    Figure1(Figure1Args),
}

#[derive(Args, Debug)]
struct ScenarioArg {
    /// Scenario file, or the name of a built-in scenario.
    #[arg(long)]
    scenario: String,
    /// Directory searched for `<name>.json` before the built-ins.
    #[arg(long, env = "RSA_SCENARIO_DIR", hide_env_values = true)]
    scenario_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Common {
    /// Override the speaker rationality.
    #[arg(long)]
    alpha: Option<f64>,
    /// Latent bindings, `name=value;name=value`.
    #[arg(long, default_value = "")]
    assign: String,
    #[arg(long, value_enum, default_value_t = Backend::Enumerate)]
    backend: Backend,
    /// Sample count for the sampling backend.
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    /// RNG seed; 0 draws one from the operating system.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Largest product space enumeration may touch.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u128,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Write the result here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Backend {
    Enumerate,
    Sample,
}

#[derive(Args, Debug)]
struct ListenerArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    #[arg(long)]
    utterance: String,
    /// Listener level; 0 is the literal listener. Defaults to the scenario's.
    #[arg(long)]
    depth: Option<usize>,
    /// Print the joint posterior over states and inferred latents.
    #[arg(long)]
    joint: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct SpeakerArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    #[arg(long, conflicts_with = "observation", required_unless_present = "observation")]
    state: Option<String>,
    /// Observation value, for epistemic speakers.
    #[arg(long)]
    observation: Option<String>,
    /// Speaker level.
    #[arg(long, default_value_t = 1)]
    depth: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct InfoArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    #[arg(long)]
    utterance: String,
    #[arg(long)]
    depth: Option<usize>,
    /// Tolerance below which an information difference counts as zero.
    #[arg(long, default_value_t = INFO_EPSILON)]
    epsilon: f64,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Scenarios the dataset refers to; a file is keyed by its stem.
    #[arg(long, required = true)]
    scenario: Vec<String>,
    #[arg(long, env = "RSA_SCENARIO_DIR", hide_env_values = true)]
    scenario_dir: Option<PathBuf>,
    /// Behavioral data CSV.
    #[arg(long)]
    data: PathBuf,
    /// Grid axis, `alpha=0:20:0.5` or `cost:u=0,1,2`; repeatable.
    #[arg(long, required = true)]
    grid: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Write the posterior CSV here, with a `.json` sidecar.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Scenarios of model A.
    #[arg(long, required = true)]
    scenario: Vec<String>,
    /// Scenarios of model B; defaults to those of model A.
    #[arg(long)]
    scenario_b: Vec<String>,
    #[arg(long, env = "RSA_SCENARIO_DIR", hide_env_values = true)]
    scenario_dir: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, required = true)]
    grid_a: Vec<String>,
    #[arg(long, required = true)]
    grid_b: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
}

#[derive(Args, Debug)]
struct Figure1Args {
    /// Directory receiving `panel_b.csv`, `panel_c.csv` and `panel_d.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

/// Failure of a command, already classified by exit status.
enum Failure {
    Engine(RsaError),
    /// Validation found errors; the diagnostics were already printed.
    Invalid,
}

impl From<RsaError> for Failure {
    fn from(e: RsaError) -> Self {
        Failure::Engine(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid) => ExitCode::from(2),
        Err(Failure::Engine(e)) => {
            report_error(&e);
            match e.class() {
                ErrorClass::Input => ExitCode::from(2),
                ErrorClass::Inference => ExitCode::from(3),
            }
        }
    }
}

fn report_error(e: &RsaError) {
    let mut err = std::io::stderr().lock();
    if let RsaError::Validation(diags) = e {
        for d in diags {
            let _ = writeln!(err, "{d:#}");
        }
    }
    let _ = writeln!(err, "error[{}]: {e}", e.code());
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Listener(args) => listener(args),
        Command::Speaker(args) => speaker(args),
        Command::Info(args) => info(args),
        Command::Fit(args) => fit(args),
        Command::Compare(args) => compare(args),
        Command::Validate(args) => validate(args),
        Command::ListBuiltin => {
            let names: Vec<&str> = builtin::names().collect();
            emit(&(names.join("\n") + "\n"), None)
        }
        Command::Figure1(args) => figure1(args),
    }
}

/// Raw document text and the key it is known by.
fn resolve(name: &str, dir: Option<&Path>) -> Result<(String, String), RsaError> {
    let path = Path::new(name);
    let stem = |p: &Path| {
        p.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| name.to_string())
    };
    if path.is_file() {
        return Ok((stem(path), std::fs::read_to_string(path)?));
    }
    if let Some(dir) = dir {
        for candidate in [dir.join(name), dir.join(format!("{name}.json"))] {
            if candidate.is_file() {
                return Ok((stem(&candidate), std::fs::read_to_string(&candidate)?));
            }
        }
    }
    match builtin::source(name) {
        Some(text) => Ok((name.to_string(), text.to_string())),
        None => Err(RsaError::Io(format!(
            "`{name}` is neither a readable file nor a built-in scenario"
        ))),
    }
}

fn load(arg: &ScenarioArg) -> Result<Scenario, RsaError> {
    let (_, text) = resolve(&arg.scenario, arg.scenario_dir.as_deref())?;
    rsa_core::load_scenario(&text)
}

fn load_models(names: &[String], dir: Option<&Path>) -> Result<ModelSet, RsaError> {
    let mut models = BTreeMap::new();
    for name in names {
        let (key, text) = resolve(name, dir)?;
        models.insert(key, rsa_core::load_scenario(&text)?);
    }
    Ok(models)
}

fn with_alpha(scn: Scenario, alpha: Option<f64>) -> Result<Scenario, RsaError> {
    match alpha {
        Some(a) => scn.with_alpha(a),
        None => Ok(scn),
    }
}

fn emit(text: &str, out: Option<&Path>) -> Outcome {
    match out {
        Some(path) => std::fs::write(path, text).map_err(RsaError::from)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            // A closed pipe is not an error worth reporting.
            let _ = stdout.write_all(text.as_bytes());
        }
    }
    Ok(())
}

fn run_query(scn: &Scenario, query: &Query, common: &Common) -> Result<Answer, RsaError> {
    match common.backend {
        Backend::Enumerate => Ok(Answer::Exact(inference::enumerate(scn, query, common.budget)?)),
        Backend::Sample => Ok(Answer::Sampled(inference::sample(
            scn,
            query,
            common.n,
            common.seed,
        )?)),
    }
}

enum Answer {
    Exact(QueryResult),
    Sampled(inference::SampleEstimate),
}

fn render_answer(answer: &Answer, joint: bool, format: Format, corner: &str) -> String {
    match answer {
        Answer::Exact(result) => {
            let dist = match (result, joint) {
                (QueryResult::Joint(j), true) => j.to_categorical(),
                _ => result.distribution(),
            };
            let labels = dist.labels().to_vec();
            let probs = dist.probs();
            match format {
                Format::Json => json_prob_map(&labels, probs) + "\n",
                Format::Csv => output::csv_rows(
                    &[corner, "probability"],
                    &labels
                        .iter()
                        .zip(probs)
                        .map(|(l, p)| (l.clone(), vec![exact(*p)]))
                        .collect::<Vec<_>>(),
                ),
                Format::Table => output::text_table(
                    &[corner, "probability"],
                    &labels
                        .iter()
                        .zip(probs)
                        .map(|(l, p)| (l.clone(), vec![sig6(*p)]))
                        .collect::<Vec<_>>(),
                ),
            }
        }
        Answer::Sampled(est) => {
            let labels = est.estimate.labels().to_vec();
            let probs = est.estimate.probs();
            match format {
                Format::Json => {
                    json_object(&[
                        ("estimate".into(), json_prob_map(&labels, probs)),
                        ("stderr".into(), json_prob_map(&labels, &est.stderr)),
                        ("n".into(), est.n.to_string()),
                        ("seed".into(), est.seed.to_string()),
                    ]) + "\n"
                }
                Format::Csv | Format::Table => {
                    let fmt: fn(f64) -> String = if format == Format::Csv { exact } else { sig6 };
                    let rows: Vec<(String, Vec<String>)> = labels
                        .iter()
                        .zip(probs)
                        .zip(&est.stderr)
                        .map(|((l, p), s)| (l.clone(), vec![fmt(*p), fmt(*s)]))
                        .collect();
                    let header = [corner, "probability", "stderr"];
                    if format == Format::Csv {
                        output::csv_rows(&header, &rows)
                    } else {
                        output::text_table(&header, &rows) + &format!("n = {}, seed = {}\n", est.n, est.seed)
                    }
                }
            }
        }
    }
}

fn listener(args: ListenerArgs) -> Outcome {
    let scn = with_alpha(load(&args.scenario)?, args.common.alpha)?;
    let assignment = Assignment::parse(&scn, &args.common.assign)?;
    let depth = args.depth.unwrap_or(scn.listener_depth());
    let query = if depth == 0 {
        Query::Literal {
            utterance: args.utterance,
            assignment,
        }
    } else {
        Query::Listener {
            utterance: args.utterance,
            depth,
            condition: assignment,
        }
    };
    if args.joint && args.common.backend == Backend::Sample {
        return Err(RsaError::InvalidArgument("--joint needs the enumerate backend".into()).into());
    }
    let answer = run_query(&scn, &query, &args.common)?;
    let corner = if args.joint { "state|latents" } else { "state" };
    emit(
        &render_answer(&answer, args.joint, args.common.format, corner),
        args.common.out.as_deref(),
    )
}

fn speaker(args: SpeakerArgs) -> Outcome {
    let scn = with_alpha(load(&args.scenario)?, args.common.alpha)?;
    let assignment = Assignment::parse(&scn, &args.common.assign)?;
    let input = match (args.state, args.observation) {
        (Some(s), None) if !scn.speaker().is_epistemic() => s,
        (None, Some(o)) if scn.speaker().is_epistemic() => o,
        (Some(_), _) => {
            return Err(RsaError::InvalidArgument(format!(
                "the {} speaker conditions on an observation; pass --observation",
                scn.speaker().as_str()
            ))
            .into())
        }
        _ => {
            return Err(RsaError::InvalidArgument(format!(
                "the {} speaker conditions on a state; pass --state",
                scn.speaker().as_str()
            ))
            .into())
        }
    };
    let query = Query::Speaker {
        input,
        assignment,
        level: args.depth,
    };
    let answer = run_query(&scn, &query, &args.common)?;
    emit(
        &render_answer(&answer, false, args.common.format, "utterance"),
        args.common.out.as_deref(),
    )
}

fn info(args: InfoArgs) -> Outcome {
    let scn = with_alpha(load(&args.scenario)?, args.alpha)?;
    let depth = args.depth.unwrap_or(scn.listener_depth()).max(1);
    let p = analysis::info_profile(&scn, &args.utterance, depth, args.epsilon)?;
    let text = match args.format {
        Format::Json => {
            let strings = |v: &[String]| json_array(&v.iter().map(|s| json_str(s)).collect::<Vec<_>>());
            json_object(&[
                ("utterance".into(), json_str(&p.utterance)),
                ("info".into(), json_prob_map(&p.states, &p.info)),
                ("pragmatic_content".into(), strings(&p.pragmatic_content)),
                ("implicated_false".into(), strings(&p.implicated_false)),
            ]) + "\n"
        }
        Format::Csv => output::csv_rows(
            &["state", "info"],
            &p.states
                .iter()
                .zip(&p.info)
                .map(|(s, i)| (s.clone(), vec![exact(*i)]))
                .collect::<Vec<_>>(),
        ),
        Format::Table => {
            let rows: Vec<(String, Vec<String>)> = p
                .states
                .iter()
                .zip(&p.info)
                .map(|(s, i)| (s.clone(), vec![sig6(*i)]))
                .collect();
            format!(
                "{}pragmatic content: {}\nimplicated false: {}\n",
                output::text_table(&["state", "info"], &rows),
                set(&p.pragmatic_content),
                set(&p.implicated_false)
            )
        }
    };
    emit(&text, args.out.as_deref())
}

fn set(items: &[String]) -> String {
    format!("{{{}}}", items.join(", "))
}

fn parse_grid(axes: &[String]) -> Result<ParamGrid, RsaError> {
    let axes = axes
        .iter()
        .map(|a| ParamGrid::parse_axis(a))
        .collect::<Result<Vec<_>, _>>()?;
    ParamGrid::new(axes)
}

fn fit(args: FitArgs) -> Outcome {
    let models = load_models(&args.scenario, args.scenario_dir.as_deref())?;
    let data = BehavioralDataset::read(&args.data)?;
    let grid = parse_grid(&args.grid)?;
    let post = analysis::grid_posterior(&models, &data, &grid)?;
    if let Some(path) = &args.out {
        post.export(grid.axes(), path)?;
    }
    let names: Vec<String> = post.params.iter().map(|p| p.to_string()).collect();
    let mode = post.mode();
    let text = match args.format {
        Format::Json => {
            let marginals: Vec<(String, String)> = post
                .params
                .iter()
                .map(|p| {
                    let m = post.marginal(p).expect("parameter on the grid");
                    let pairs: Vec<String> = m
                        .iter()
                        .map(|(v, q)| json_array(&[json_num(*v), json_num(*q)]))
                        .collect();
                    (p.to_string(), json_array(&pairs))
                })
                .collect();
            json_object(&[
                (
                    "mode".into(),
                    json_object(
                        &names
                            .iter()
                            .zip(mode)
                            .map(|(n, v)| (n.clone(), json_num(*v)))
                            .collect::<Vec<_>>(),
                    ),
                ),
                ("log_marginal_likelihood".into(), json_num(post.log_marginal)),
                ("points".into(), post.points.len().to_string()),
                ("marginals".into(), json_object(&marginals)),
            ]) + "\n"
        }
        Format::Csv => post.to_csv(),
        Format::Table => {
            let mut s = String::new();
            for (n, v) in names.iter().zip(mode) {
                s.push_str(&format!("mode {n} = {}\n", sig6(*v)));
            }
            s.push_str(&format!(
                "log marginal likelihood = {}\n",
                sig6(post.log_marginal)
            ));
            for p in &post.params {
                let rows: Vec<(String, Vec<String>)> = post
                    .marginal(p)
                    .expect("parameter on the grid")
                    .iter()
                    .map(|(v, q)| (sig6(*v), vec![sig6(*q)]))
                    .collect();
                s.push('\n');
                s.push_str(&output::text_table(&[&p.to_string(), "posterior"], &rows));
            }
            s
        }
    };
    // With --out the posterior went to files; the summary still goes to stdout.
    emit(&text, None)
}

fn compare(args: CompareArgs) -> Outcome {
    let dir = args.scenario_dir.as_deref();
    let models_a = load_models(&args.scenario, dir)?;
    let models_b = if args.scenario_b.is_empty() {
        models_a.clone()
    } else {
        load_models(&args.scenario_b, dir)?
    };
    let data = BehavioralDataset::read(&args.data)?;
    let grid_a = parse_grid(&args.grid_a)?;
    let grid_b = parse_grid(&args.grid_b)?;
    let bf = analysis::bayes_factor((&models_a, &grid_a), (&models_b, &grid_b), &data)?;
    let text = match args.format {
        Format::Json => {
            json_object(&[
                ("bayes_factor".into(), json_num(bf.bf)),
                ("log_bayes_factor".into(), json_num(bf.log_bf)),
                ("log_marginal_a".into(), json_num(bf.log_z_a)),
                ("log_marginal_b".into(), json_num(bf.log_z_b)),
            ]) + "\n"
        }
        Format::Csv => output::csv_rows(
            &["quantity", "value"],
            &[
                ("bayes_factor".to_string(), vec![exact(bf.bf)]),
                ("log_bayes_factor".to_string(), vec![exact(bf.log_bf)]),
                ("log_marginal_a".to_string(), vec![exact(bf.log_z_a)]),
                ("log_marginal_b".to_string(), vec![exact(bf.log_z_b)]),
            ],
        ),
        Format::Table => format!(
            "bayes factor (A : B) = {}\nlog bayes factor = {}\nlog marginal A = {}\nlog marginal B = {}\n",
            sig6(bf.bf),
            sig6(bf.log_bf),
            sig6(bf.log_z_a),
            sig6(bf.log_z_b)
        ),
    };
    emit(&text, args.out.as_deref())
}

fn validate(args: ValidateArgs) -> Outcome {
    let (_, text) = resolve(&args.scenario.scenario, args.scenario.scenario_dir.as_deref())?;
    let scn = rsa_core::parse_scenario(&text)?;
    let diags = rsa_core::validate_scenario(&scn);
    let mut err = std::io::stderr().lock();
    for d in &diags {
        let _ = writeln!(err, "{d:#}");
    }
    if diags.iter().any(|d| d.is_error()) {
        return Err(Failure::Invalid);
    }
    emit(
        &format!(
            "ok: {}, {}, {} ({})\n",
            count(scn.states().len(), "state"),
            count(scn.utterances().len(), "utterance"),
            count(scn.latents().len(), "latent"),
            count(diags.len(), "warning")
        ),
        None,
    )
}

fn figure1(args: Figure1Args) -> Outcome {
    let fig = report::reproduce_figure1()?;
    match &args.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(RsaError::from)?;
            for (name, table) in fig.panels() {
                let path = dir.join(format!("panel_{}.csv", name.to_lowercase()));
                std::fs::write(path, table.to_csv()).map_err(RsaError::from)?;
            }
            Ok(())
        }
        None if args.format == Format::Json => {
            let panels: Vec<(String, String)> = fig
                .panels()
                .into_iter()
                .map(|(name, table)| {
                    let body = output::render_table(table, Format::Json);
                    (name.to_string(), body.trim_end().to_string())
                })
                .collect();
            emit(&(json_object(&panels) + "\n"), None)
        }
        None => {
            let mut text = String::new();
            for (i, (name, table)) in fig.panels().into_iter().enumerate() {
                if i > 0 {
                    text.push('\n');
                }
                if args.format == Format::Table {
                    text.push_str(&format!("panel {name}\n"));
                }
                text.push_str(&output::render_table(table, args.format));
            }
            emit(&text, None)
        }
    }
}

fn count(n: usize, noun: &str) -> String {
    if n == 1 {
        format!("1 {noun}")
    } else {
        format!("{n} {noun}s")
    }
}
