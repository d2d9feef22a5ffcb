//! `rlnc`: analyze multicast coding networks, evaluate success-probability
//! bounds, and run seeded Monte Carlo experiments with plot-ready output.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 infeasible network,
//! 4 internal error. Worker count follows rayon's `RAYON_NUM_THREADS`;
//! results are byte-identical for a fixed seed regardless of workers.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use rlnc_core::bounds::{
    first_primes, first_primes_above, new_bound_tighter, pi_inf, pi_inf_lower, pi_m, to_f64,
    z_ratio, BoundReport,
};
use rlnc_core::code::{certify_solvable, random_positions};
use rlnc_core::experiment::{
    compare_bounds, full_matrix_exhaustive, full_matrix_experiment, sparse_matrix_experiment,
    threshold_rho, trial_rng, CERTIFY_BUDGET, COMPARE_CSV_HEADER, RNG_ID,
};
use rlnc_core::network::{normalize_network, parse_network};
use rlnc_core::{butterfly, CodingError, Field, NetworkError, NetworkSpec, SamplingMode};
use rlnc_core::{ExperimentError, SparseMatrixConfig};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "rlnc",
    version,
    about = "Random linear network coding: bounds and experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    IncludeZero,
    NonzeroOnly,
}

impl From<Mode> for SamplingMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::IncludeZero => SamplingMode::IncludeZero,
            Mode::NonzeroOnly => SamplingMode::NonZeroOnly,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Report structural parameters of a network and optionally certify
    /// solvability over one field.
    Analyze {
        /// Builtin name ("butterfly") or path to a network JSON file.
        #[arg(long)]
        network: String,
        /// Field size to certify solvability over.
        #[arg(long)]
        field: Option<u64>,
        /// Assignment budget for the solvability search.
        #[arg(long, default_value_t = CERTIFY_BUDGET)]
        budget: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the found coefficient assignment as JSON (needs --field).
        #[arg(long)]
        dump_code: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Monte Carlo decoding-success estimation versus all bounds, one row per
    /// field size.
    Simulate {
        #[arg(long)]
        network: String,
        /// "first10primes", "first20primes", or a comma list like "2,3,5".
        #[arg(long, default_value = "first10primes")]
        fields: String,
        #[arg(long)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Mode::IncludeZero)]
        mode: Mode,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Evaluate the closed-form bounds and the tightness predicate.
    Bounds {
        #[arg(long)]
        d: u64,
        #[arg(long)]
        nu: u32,
        #[arg(long)]
        eta: u32,
        /// Field sizes: "first10primes", "first20primes", or a comma list.
        #[arg(long)]
        q: String,
        /// Total edge count; enables the product-form column.
        #[arg(long)]
        edges: Option<u32>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Random-matrix nonsingularity experiments and reference products.
    Randmat {
        /// Emit the lower-bound versus infinite-product table for the first
        /// 20 primes above 3.
        #[arg(long)]
        figure4: bool,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        q: Option<u64>,
        /// Sparse density: a float, or "auto<K>x" for K times the threshold
        /// density of m.
        #[arg(long)]
        rho: Option<String>,
        /// Condition sparse sampling on no all-zero rows or columns.
        #[arg(long)]
        conditioned: bool,
        /// Enumerate the whole matrix space instead of sampling.
        #[arg(long)]
        exhaustive: bool,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Truncation tolerance for the infinite product.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

enum CliError {
    Usage(String),
    Infeasible(String),
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Infeasible(m) | CliError::Internal(m) => m,
        }
    }
}

impl From<NetworkError> for CliError {
    fn from(e: NetworkError) -> Self {
        match e {
            NetworkError::NoFlow { .. } | NetworkError::InfeasibleDegrees(_) => {
                CliError::Infeasible(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<CodingError> for CliError {
    fn from(e: CodingError) -> Self {
        match e {
            CodingError::Network(n) => n.into(),
            CodingError::UnsolvableOverField { .. } => CliError::Infeasible(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Network(n) => n.into(),
            ExperimentError::Coding(c) => c.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<rlnc_core::LinalgError> for CliError {
    fn from(e: rlnc_core::LinalgError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn load_network(spec: &str) -> Result<NetworkSpec, CliError> {
    let raw = if spec == "butterfly" {
        butterfly()
    } else {
        let text = fs::read_to_string(spec)
            .map_err(|e| CliError::Usage(format!("cannot read network file {spec:?}: {e}")))?;
        parse_network(&text)?
    };
    Ok(normalize_network(&raw)?)
}

fn parse_field_list(spec: &str) -> Result<Vec<u64>, CliError> {
    match spec {
        "first10primes" => Ok(first_primes(10)),
        "first20primes" => Ok(first_primes(20)),
        list => list
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<u64>()
                    .map_err(|_| CliError::Usage(format!("bad field size {tok:?}")))
            })
            .collect(),
    }
}

fn artifact_comment(config: &serde_json::Value, seed: Option<u64>) -> String {
    let mut s = format!("# rlnc {VERSION}\n# config: {config}\n");
    if let Some(seed) = seed {
        let _ = writeln!(s, "# seed: {seed}");
        let _ = writeln!(s, "# rng: {RNG_ID}");
    }
    s
}

fn emit(output: Option<&PathBuf>, content: &str) -> Result<(), CliError> {
    match output {
        Some(path) => fs::write(path, content)
            .map_err(|e| CliError::Internal(format!("cannot write {path:?}: {e}"))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn json_artifact(
    config: serde_json::Value,
    seed: Option<u64>,
    rows: serde_json::Value,
) -> serde_json::Value {
    let mut meta = json!({
        "tool": "rlnc",
        "version": VERSION,
        "config": config,
    });
    if let Some(seed) = seed {
        meta["seed"] = json!(seed);
        meta["rng"] = json!(RNG_ID);
    }
    json!({ "meta": meta, "rows": rows })
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Analyze {
            network,
            field,
            budget,
            seed,
            dump_code,
            format,
        } => analyze(network, field, budget, seed, dump_code, format),
        Command::Simulate {
            network,
            fields,
            trials,
            seed,
            mode,
            format,
            output,
        } => simulate(network, fields, trials, seed, mode, format, output),
        Command::Bounds {
            d,
            nu,
            eta,
            q,
            edges,
            format,
            output,
        } => bounds_table(d, nu, eta, q, edges, format, output),
        Command::Randmat {
            figure4,
            m,
            q,
            rho,
            conditioned,
            exhaustive,
            trials,
            seed,
            tol,
            format,
            output,
        } => randmat(
            figure4,
            m,
            q,
            rho,
            conditioned,
            exhaustive,
            trials,
            seed,
            tol,
            format,
            output,
        ),
    }
}

fn analyze(
    network: String,
    field: Option<u64>,
    budget: u64,
    seed: u64,
    dump_code: Option<PathBuf>,
    format: Format,
) -> Result<(), CliError> {
    let net = load_network(&network)?;
    let params = net.compute_parameters()?;
    let min_cuts: Vec<usize> = (0..net.d()).map(|b| net.min_cut(b)).collect();
    let positions = random_positions(&net).len();

    let mut cert_status = "not requested".to_string();
    let mut certificate = None;
    if let Some(q) = field {
        let f = Field::new(q)?;
        let mut rng = trial_rng(seed, u64::MAX);
        match certify_solvable(&net, f, budget, &mut rng) {
            Ok(Some(code)) => {
                cert_status = format!("solvable over F_{q} (certificate found)");
                certificate = Some(code);
            }
            Ok(None) => {
                cert_status =
                    format!("not certified over F_{q} within budget {budget} (not a refutation)")
            }
            Err(CodingError::UnsolvableOverField { .. }) => {
                cert_status = format!("unsolvable over F_{q} (exhaustive search)")
            }
            Err(e) => return Err(e.into()),
        }
    }
    if let Some(path) = &dump_code {
        match &certificate {
            Some(code) => {
                let text = serde_json::to_string_pretty(code)
                    .map_err(|e| CliError::Internal(e.to_string()))?;
                fs::write(path, text)
                    .map_err(|e| CliError::Internal(format!("cannot write {path:?}: {e}")))?;
            }
            None => {
                return Err(CliError::Usage(
                    "--dump-code needs --field and a found certificate".into(),
                ))
            }
        }
    }

    match format {
        Format::Json => {
            let value = json!({
                "tool": "rlnc",
                "version": VERSION,
                "network": network,
                "nodes": net.num_nodes(),
                "edges": net.num_edges(),
                "r": net.r(),
                "d": net.d(),
                "min_cut_per_sink": min_cuts,
                "nu": params.nu,
                "nu_note": "per sink, fewest random edges over its flow solutions; maximum across sinks",
                "eta": params.eta,
                "eta_per_sink": params.eta_per_sink,
                "sigma": params.sigma,
                "rho": params.rho,
                "random_positions": positions,
                "solvability": cert_status,
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&value)
                    .map_err(|e| CliError::Internal(e.to_string()))?
            );
        }
        _ => {
            println!("network: {network}");
            println!(
                "nodes: {}  edges: {}  r: {}  d: {}",
                net.num_nodes(),
                net.num_edges(),
                net.r(),
                net.d()
            );
            println!("min-cut per sink: {min_cuts:?}");
            println!(
                "eta: {}  eta per sink: {:?}",
                params.eta, params.eta_per_sink
            );
            println!(
                "nu: {} (per sink, fewest random edges over its flow solutions; maximum across sinks)",
                params.nu
            );
            println!("sigma: {}  rho: {}", params.sigma, params.rho);
            println!("random coefficient positions: {positions}");
            println!("solvability: {cert_status}");
        }
    }
    Ok(())
}

fn simulate(
    network: String,
    fields: String,
    trials: u64,
    seed: u64,
    mode: Mode,
    format: Format,
    output: Option<PathBuf>,
) -> Result<(), CliError> {
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let net = load_network(&network)?;
    let q_list = parse_field_list(&fields)?;
    let rows = compare_bounds(&net, &q_list, trials, seed, mode.into())?;
    let config = json!({
        "command": "simulate",
        "network": network,
        "fields": q_list,
        "trials": trials,
        "mode": match mode { Mode::IncludeZero => "include-zero", Mode::NonzeroOnly => "nonzero-only" },
    });
    match format {
        Format::Json => {
            let value = json_artifact(
                config,
                Some(seed),
                serde_json::to_value(&rows).map_err(|e| CliError::Internal(e.to_string()))?,
            );
            emit(
                output.as_ref(),
                &format!(
                    "{}\n",
                    serde_json::to_string_pretty(&value)
                        .map_err(|e| CliError::Internal(e.to_string()))?
                ),
            )
        }
        Format::Csv => {
            let mut text = artifact_comment(&config, Some(seed));
            text.push_str(COMPARE_CSV_HEADER);
            text.push('\n');
            for row in &rows {
                text.push_str(&row.to_csv_row());
                text.push('\n');
            }
            emit(output.as_ref(), &text)
        }
        Format::Text => Err(CliError::Usage("simulate emits csv or json".into())),
    }
}

fn bounds_table(
    d: u64,
    nu: u32,
    eta: u32,
    q: String,
    edges: Option<u32>,
    format: Format,
    output: Option<PathBuf>,
) -> Result<(), CliError> {
    if d == 0 {
        return Err(CliError::Usage("--d must be at least 1".into()));
    }
    let q_list = parse_field_list(&q)?;
    if let Some(&bad) = q_list.iter().find(|&&q| q < 2) {
        return Err(CliError::Usage(format!("field size {bad} is below 2")));
    }
    let mut reports = Vec::with_capacity(q_list.len());
    for &q in &q_list {
        let report = BoundReport::new(q, d, nu as usize, eta as usize, edges.map(|e| e as usize));
        let tighter = new_bound_tighter(eta, nu, d, q).ok();
        let z = z_ratio(d, q).ok();
        reports.push((report, tighter, z));
    }
    let config = json!({
        "command": "bounds",
        "d": d, "nu": nu, "eta": eta, "q": q_list, "edges": edges,
    });
    match format {
        Format::Json => {
            let rows: Vec<serde_json::Value> = reports
                .iter()
                .map(|(r, tighter, z)| {
                    let mut v = serde_json::to_value(r).expect("serializable");
                    v["tighter"] = json!(tighter);
                    v["z_ratio"] = json!(z);
                    v
                })
                .collect();
            let value = json_artifact(config, None, json!(rows));
            emit(
                output.as_ref(),
                &format!(
                    "{}\n",
                    serde_json::to_string_pretty(&value)
                        .map_err(|e| CliError::Internal(e.to_string()))?
                ),
            )
        }
        Format::Csv => {
            let mut text = artifact_comment(&config, None);
            text.push_str(BoundReport::CSV_HEADER);
            text.push_str(",tighter,z_ratio\n");
            for (report, tighter, z) in &reports {
                let opt_b = |v: Option<bool>| v.map(|x| x.to_string()).unwrap_or_default();
                let opt_f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                text.push_str(&report.to_csv_row());
                let _ = writeln!(text, ",{},{}", opt_b(*tighter), opt_f(*z));
            }
            emit(output.as_ref(), &text)
        }
        Format::Text => Err(CliError::Usage("bounds emits csv or json".into())),
    }
}

#[allow(clippy::too_many_arguments)]
fn randmat(
    figure4: bool,
    m: Option<usize>,
    q: Option<u64>,
    rho: Option<String>,
    conditioned: bool,
    exhaustive: bool,
    trials: Option<u64>,
    seed: u64,
    tol: f64,
    format: Format,
    output: Option<PathBuf>,
) -> Result<(), CliError> {
    if tol <= 0.0 {
        return Err(CliError::Usage("--tol must be positive".into()));
    }
    if figure4 {
        let config = json!({ "command": "randmat", "figure4": true, "tol": tol });
        let rows: Vec<serde_json::Value> = first_primes_above(20, 3)
            .into_iter()
            .map(|q| {
                let pi = pi_inf(q, tol);
                let lower = pi_inf_lower(q).expect("q > 3");
                json!({ "q": q, "pi_inf": pi.value, "lower_bound": lower, "terms": pi.terms })
            })
            .collect();
        return match format {
            Format::Json => emit(
                output.as_ref(),
                &format!(
                    "{}\n",
                    serde_json::to_string_pretty(&json_artifact(config, None, json!(rows)))
                        .map_err(|e| CliError::Internal(e.to_string()))?
                ),
            ),
            Format::Csv => {
                let mut text = artifact_comment(&config, None);
                text.push_str("q,pi_inf,lower_bound,terms\n");
                for row in &rows {
                    let _ = writeln!(
                        text,
                        "{},{},{},{}",
                        row["q"], row["pi_inf"], row["lower_bound"], row["terms"]
                    );
                }
                emit(output.as_ref(), &text)
            }
            Format::Text => Err(CliError::Usage("randmat emits csv or json".into())),
        };
    }

    let m = m.ok_or_else(|| CliError::Usage("--m is required without --figure4".into()))?;
    let q = q.ok_or_else(|| CliError::Usage("--q is required without --figure4".into()))?;
    if m == 0 {
        return Err(CliError::Usage("--m must be at least 1".into()));
    }

    if exhaustive {
        let (nonsingular, total) = full_matrix_exhaustive(m, q)?;
        let config = json!({ "command": "randmat", "m": m, "q": q, "exhaustive": true });
        let p = nonsingular as f64 / total as f64;
        return match format {
            Format::Json => {
                let rows = json!([{ "m": m, "q": q, "total": total, "nonsingular": nonsingular, "p_exact": p }]);
                emit(
                    output.as_ref(),
                    &format!(
                        "{}\n",
                        serde_json::to_string_pretty(&json_artifact(config, None, rows))
                            .map_err(|e| CliError::Internal(e.to_string()))?
                    ),
                )
            }
            Format::Csv => {
                let mut text = artifact_comment(&config, None);
                text.push_str("m,q,total,nonsingular,p_exact\n");
                let _ = writeln!(text, "{m},{q},{total},{nonsingular},{p}");
                emit(output.as_ref(), &text)
            }
            Format::Text => Err(CliError::Usage("randmat emits csv or json".into())),
        };
    }

    let trials =
        trials.ok_or_else(|| CliError::Usage("--trials is required for sampling".into()))?;
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let rho_value = match &rho {
        None => None,
        Some(text) => Some(parse_rho(text, m)?),
    };
    let est = match rho_value {
        None => full_matrix_experiment(m, q, trials, seed)?,
        Some(rho) => sparse_matrix_experiment(
            SparseMatrixConfig {
                m,
                q,
                rho,
                condition_no_zero_lines: conditioned,
            },
            trials,
            seed,
        )?,
    };
    let pi_m_val = to_f64(&pi_m(m as u32, q));
    let pi = pi_inf(q, tol);
    let lower = pi_inf_lower(q).ok();
    let config = json!({
        "command": "randmat",
        "m": m, "q": q,
        "rho": rho_value,
        "conditioned": conditioned,
        "trials": trials,
        "tol": tol,
    });
    match format {
        Format::Json => {
            let mut row =
                serde_json::to_value(&est).map_err(|e| CliError::Internal(e.to_string()))?;
            row["pi_m"] = json!(pi_m_val);
            row["pi_inf"] = json!(pi.value);
            row["lower_bound"] = json!(lower);
            let value = json_artifact(config, Some(seed), json!([row]));
            emit(
                output.as_ref(),
                &format!(
                    "{}\n",
                    serde_json::to_string_pretty(&value)
                        .map_err(|e| CliError::Internal(e.to_string()))?
                ),
            )
        }
        Format::Csv => {
            let mut text = artifact_comment(&config, Some(seed));
            text.push_str(
                "m,q,rho,trials,successes,p_hat,ci_low,ci_high,rejection_rate,pi_m,pi_inf,lower_bound\n",
            );
            let rho_cell = rho_value.map(|r| r.to_string()).unwrap_or_default();
            let lower_cell = lower.map(|l| l.to_string()).unwrap_or_default();
            let _ = writeln!(
                text,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                m,
                q,
                rho_cell,
                trials,
                est.successes,
                est.p_hat,
                est.ci_low,
                est.ci_high,
                est.rejection_rate,
                pi_m_val,
                pi.value,
                lower_cell
            );
            emit(output.as_ref(), &text)
        }
        Format::Text => Err(CliError::Usage("randmat emits csv or json".into())),
    }
}

fn parse_rho(text: &str, m: usize) -> Result<f64, CliError> {
    let rho = if let Some(factor) = text.strip_prefix("auto").and_then(|t| t.strip_suffix('x')) {
        let k: f64 = factor
            .parse()
            .map_err(|_| CliError::Usage(format!("bad density multiplier {text:?}")))?;
        k * threshold_rho(m)?
    } else {
        text.parse::<f64>()
            .map_err(|_| CliError::Usage(format!("bad density {text:?}")))?
    };
    if !(0.0..=1.0).contains(&rho) {
        return Err(CliError::Usage(format!("density {rho} outside [0, 1]")));
    }
    Ok(rho)
}
