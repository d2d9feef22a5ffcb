//! Seeded Monte Carlo engines: network decoding-success estimation, full and
//! sparse random-matrix singularity experiments, and comparison tables
//! against the closed-form bounds.
//!
//! Every experiment derives one independent ChaCha8 stream per trial index
//! from the master seed, so results are bit-identical for a fixed seed no
//! matter how many worker threads run the trials.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bounds::{bound_edges, bound_flow, bound_new, pi_m, to_f64};
use crate::code::{certify_solvable, CodeSampler, CodingError, SamplingMode};
use crate::linalg::{Field, LinalgError, Matrix};
use crate::network::{NetworkError, NetworkSpec};

/// Recorded in output metadata so runs can be reproduced.
pub const RNG_ID: &str = "chacha8(seed_from_u64(seed), stream = trial index)";

/// Randomized-search budget used when certifying solvability before a
/// comparison run.
pub const CERTIFY_BUDGET: u64 = 1_000_000;

const Z95: f64 = 1.959963984540054;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExperimentError {
    #[error("trial count must be at least 1")]
    InvalidTrials,
    #[error("density 0 with zero-line conditioning can never produce a sample")]
    DegenerateDensity,
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Field(#[from] LinalgError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Coding(#[from] CodingError),
}

/// The per-trial random stream: independent across trial indices.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

// Streams for auxiliary draws (e.g. solvability certification) live at the
// top of the stream space, away from trial indices.
fn aux_rng(seed: u64, slot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX - slot);
    rng
}

/// 95% Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // The score interval hits the boundary exactly at 0 and n successes.
    let lo = if successes == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

/// Tallies from one decoding-success estimation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub trials: u64,
    pub successes_all: u64,
    /// Marginal decode counts per sink.
    pub successes_per_sink: Vec<u64>,
    /// (numerator, denominator) tallies of Pr(E_m | E_1 .. E_{m-1}): the
    /// numerator counts trials where the first m sinks all decode, the
    /// denominator trials where the first m-1 do.
    pub conditional_counts: Vec<(u64, u64)>,
    pub q: u64,
    pub seed: u64,
    pub mode: SamplingMode,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl TrialSummary {
    pub fn p_hat(&self) -> f64 {
        self.successes_all as f64 / self.trials as f64
    }

    /// The chain-rule tally identity, exact on counts: the conditional
    /// fractions telescope to successes_all / trials.
    pub fn chain_rule_holds(&self) -> bool {
        let mut prev = self.trials;
        for &(num, den) in &self.conditional_counts {
            if den != prev || num > den {
                return false;
            }
            prev = num;
        }
        prev == self.successes_all
    }
}

#[derive(Clone)]
struct DecodeCounts {
    all_prefix: Vec<u64>,
    per_sink: Vec<u64>,
}

impl DecodeCounts {
    fn new(d: usize) -> Self {
        DecodeCounts {
            all_prefix: vec![0; d],
            per_sink: vec![0; d],
        }
    }

    fn record(&mut self, flags: &[bool]) {
        let mut prefix = true;
        for (beta, &ok) in flags.iter().enumerate() {
            if ok {
                self.per_sink[beta] += 1;
            }
            prefix &= ok;
            if prefix {
                self.all_prefix[beta] += 1;
            }
        }
    }

    fn merge(mut self, other: DecodeCounts) -> DecodeCounts {
        for (a, b) in self.all_prefix.iter_mut().zip(other.all_prefix) {
            *a += b;
        }
        for (a, b) in self.per_sink.iter_mut().zip(other.per_sink) {
            *a += b;
        }
        self
    }
}

/// Estimates the probability that every sink decodes under i.i.d. random
/// coefficients, one ChaCha8 substream per trial. Deterministic for a fixed
/// (seed, trials) regardless of worker count.
pub fn estimate_success(
    net: &NetworkSpec,
    q: u64,
    trials: u64,
    seed: u64,
    mode: SamplingMode,
) -> Result<TrialSummary, ExperimentError> {
    if trials == 0 {
        return Err(ExperimentError::InvalidTrials);
    }
    let field = Field::new(q)?;
    let sampler = CodeSampler::new(net, field, mode)?;
    let d = net.d();
    let counts = (0..trials)
        .into_par_iter()
        .fold(
            || DecodeCounts::new(d),
            |mut acc, trial| {
                let mut rng = trial_rng(seed, trial);
                let code = sampler.sample(&mut rng);
                acc.record(&code.decode_flags());
                acc
            },
        )
        .reduce(|| DecodeCounts::new(d), DecodeCounts::merge);

    let successes_all = counts.all_prefix[d - 1];
    let mut conditional_counts = Vec::with_capacity(d);
    let mut prev = trials;
    for &num in &counts.all_prefix {
        conditional_counts.push((num, prev));
        prev = num;
    }
    let (ci_low, ci_high) = wilson_interval(successes_all, trials);
    let summary = TrialSummary {
        trials,
        successes_all,
        successes_per_sink: counts.per_sink,
        conditional_counts,
        q,
        seed,
        mode,
        ci_low,
        ci_high,
    };
    debug_assert!(summary.chain_rule_holds());
    Ok(summary)
}

/// A binomial estimate of Pr(det != 0) for one matrix ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixEstimate {
    pub m: usize,
    pub q: u64,
    pub trials: u64,
    pub successes: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Fraction of sampled matrices that initially had an all-zero row or
    /// column (only populated by the conditioned sparse experiment).
    pub rejection_rate: f64,
}

/// Fraction of i.i.d.-uniform m-by-m matrices over F_q that are nonsingular.
pub fn full_matrix_experiment(
    m: usize,
    q: u64,
    trials: u64,
    seed: u64,
) -> Result<MatrixEstimate, ExperimentError> {
    if trials == 0 {
        return Err(ExperimentError::InvalidTrials);
    }
    let field = Field::new(q)?;
    let successes: u64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let mut mat = Matrix::zero(field, m, m);
            for i in 0..m {
                for j in 0..m {
                    mat.set(i, j, rng.random_range(0..q));
                }
            }
            u64::from(mat.det().expect("square") != 0)
        })
        .sum();
    let (ci_low, ci_high) = wilson_interval(successes, trials);
    Ok(MatrixEstimate {
        m,
        q,
        trials,
        successes,
        p_hat: successes as f64 / trials as f64,
        ci_low,
        ci_high,
        rejection_rate: 0.0,
    })
}

/// Exact Pr(det != 0) by enumerating all q^(m^2) matrices. Returns
/// (nonsingular, total). Limited to spaces of at most 2^24 matrices.
pub fn full_matrix_exhaustive(m: usize, q: u64) -> Result<(u64, u64), ExperimentError> {
    let field = Field::new(q)?;
    let cells = m * m;
    let total = (q as u128).checked_pow(cells as u32);
    let total = match total {
        Some(t) if t <= 1 << 24 => t as u64,
        _ => {
            return Err(ExperimentError::Domain(format!(
                "enumeration space q^(m^2) = {q}^{cells} is too large"
            )))
        }
    };
    let mut values = vec![0u64; cells];
    let mut mat = Matrix::zero(field, m, m);
    let mut nonsingular = 0u64;
    for _ in 0..total {
        for (idx, &v) in values.iter().enumerate() {
            mat.set(idx / m, idx % m, v);
        }
        if mat.det().expect("square") != 0 {
            nonsingular += 1;
        }
        let mut pos = 0;
        while pos < cells {
            values[pos] += 1;
            if values[pos] < q {
                break;
            }
            values[pos] = 0;
            pos += 1;
        }
    }
    Ok((nonsingular, total))
}

/// Entry law for the sparse ensemble: zero with probability 1 - rho, each
/// nonzero value with probability rho / (q - 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SparseMatrixConfig {
    pub m: usize,
    pub q: u64,
    pub rho: f64,
    pub condition_no_zero_lines: bool,
}

/// Density threshold (1/m)(ln(m)/2 + ln ln m) above which the conditioned
/// sparse ensemble behaves like the uniform one.
pub fn threshold_rho(m: usize) -> Result<f64, ExperimentError> {
    if m < 3 {
        return Err(ExperimentError::Domain(
            "threshold needs m >= 3 so log log m is positive".into(),
        ));
    }
    let mf = m as f64;
    Ok((0.5 * mf.ln() + mf.ln().ln()) / mf)
}

// One sparse trial over F_2 with bitset rows. Returns (nonsingular,
// initially_violating).
fn sparse_trial_f2(m: usize, rho: f64, condition: bool, rng: &mut ChaCha8Rng) -> (bool, bool) {
    let words = m.div_ceil(64);
    let mut rows = vec![0u64; m * words];
    for i in 0..m {
        for j in 0..m {
            if rng.random::<f64>() < rho {
                rows[i * words + j / 64] |= 1 << (j % 64);
            }
        }
    }
    let row_zero =
        |rows: &[u64], i: usize| rows[i * words..(i + 1) * words].iter().all(|&w| w == 0);
    let col_zero =
        |rows: &[u64], j: usize| (0..m).all(|i| rows[i * words + j / 64] >> (j % 64) & 1 == 0);
    let violating = (0..m).any(|i| row_zero(&rows, i)) || (0..m).any(|j| col_zero(&rows, j));
    if condition && violating {
        // Redraw all-zero lines until none remain. A redrawn line only writes
        // into cells that are currently zero, so no other line can lose its
        // nonzero entries and the loop terminates.
        loop {
            if let Some(i) = (0..m).find(|&i| row_zero(&rows, i)) {
                loop {
                    let mut any = false;
                    for j in 0..m {
                        if rng.random::<f64>() < rho {
                            rows[i * words + j / 64] |= 1 << (j % 64);
                            any = true;
                        }
                    }
                    if any {
                        break;
                    }
                }
            } else if let Some(j) = (0..m).find(|&j| col_zero(&rows, j)) {
                loop {
                    let mut any = false;
                    for i in 0..m {
                        if rng.random::<f64>() < rho {
                            rows[i * words + j / 64] |= 1 << (j % 64);
                            any = true;
                        }
                    }
                    if any {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }
    // Forward elimination over F_2; nonsingular iff every column has a pivot
    // (so the pivot row index always equals the column index).
    for col in 0..m {
        let (w, b) = (col / 64, col % 64);
        let pivot = (col..m).find(|&r| rows[r * words + w] >> b & 1 == 1);
        let pivot = match pivot {
            Some(p) => p,
            None => return (false, violating),
        };
        if pivot != col {
            for k in 0..words {
                rows.swap(pivot * words + k, col * words + k);
            }
        }
        for r in (col + 1)..m {
            if rows[r * words + w] >> b & 1 == 1 {
                for k in 0..words {
                    rows[r * words + k] ^= rows[col * words + k];
                }
            }
        }
    }
    (true, violating)
}

// One sparse trial for general q via dense elimination.
fn sparse_trial_generic(
    field: Field,
    m: usize,
    rho: f64,
    condition: bool,
    rng: &mut ChaCha8Rng,
) -> (bool, bool) {
    let q = field.order();
    let draw = |rng: &mut ChaCha8Rng| -> u64 {
        if rng.random::<f64>() < rho {
            if q == 2 {
                1
            } else {
                rng.random_range(1..q)
            }
        } else {
            0
        }
    };
    let mut mat = Matrix::zero(field, m, m);
    for i in 0..m {
        for j in 0..m {
            let v = draw(rng);
            mat.set(i, j, v);
        }
    }
    let row_zero = |mat: &Matrix, i: usize| (0..m).all(|j| mat.get(i, j) == 0);
    let col_zero = |mat: &Matrix, j: usize| (0..m).all(|i| mat.get(i, j) == 0);
    let violating = (0..m).any(|i| row_zero(&mat, i)) || (0..m).any(|j| col_zero(&mat, j));
    if condition && violating {
        loop {
            if let Some(i) = (0..m).find(|&i| row_zero(&mat, i)) {
                loop {
                    let mut any = false;
                    for j in 0..m {
                        let v = draw(rng);
                        if v != 0 {
                            mat.set(i, j, v);
                            any = true;
                        }
                    }
                    if any {
                        break;
                    }
                }
            } else if let Some(j) = (0..m).find(|&j| col_zero(&mat, j)) {
                loop {
                    let mut any = false;
                    for i in 0..m {
                        let v = draw(rng);
                        if v != 0 {
                            mat.set(i, j, v);
                            any = true;
                        }
                    }
                    if any {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }
    (mat.det().expect("square") != 0, violating)
}

/// Estimates Pr(det != 0) for the sparse ensemble. With conditioning, all-zero
/// lines are redrawn from the entry law restricted to nonzero lines (whole-
/// matrix rejection cannot terminate below the density threshold); the
/// reported rejection rate is the fraction of matrices that initially had a
/// zero line.
pub fn sparse_matrix_experiment(
    cfg: SparseMatrixConfig,
    trials: u64,
    seed: u64,
) -> Result<MatrixEstimate, ExperimentError> {
    if trials == 0 {
        return Err(ExperimentError::InvalidTrials);
    }
    if !(0.0..=1.0).contains(&cfg.rho) {
        return Err(ExperimentError::Domain(format!(
            "density {} outside [0, 1]",
            cfg.rho
        )));
    }
    if cfg.condition_no_zero_lines && cfg.rho == 0.0 {
        return Err(ExperimentError::DegenerateDensity);
    }
    let field = Field::new(cfg.q)?;
    let (successes, violations) = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let (ok, violated) = if cfg.q == 2 {
                sparse_trial_f2(cfg.m, cfg.rho, cfg.condition_no_zero_lines, &mut rng)
            } else {
                sparse_trial_generic(field, cfg.m, cfg.rho, cfg.condition_no_zero_lines, &mut rng)
            };
            (u64::from(ok), u64::from(violated))
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let (ci_low, ci_high) = wilson_interval(successes, trials);
    Ok(MatrixEstimate {
        m: cfg.m,
        q: cfg.q,
        trials,
        successes,
        p_hat: successes as f64 / trials as f64,
        ci_low,
        ci_high,
        rejection_rate: violations as f64 / trials as f64,
    })
}

/// One row of the empirical-versus-bounds comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub q: u64,
    pub trials: u64,
    pub successes: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub bound_flow: Option<f64>,
    pub bound_edges: Option<f64>,
    pub bound_new: f64,
    /// pi_E(q) for the network's total edge count E.
    pub conjecture: f64,
    pub solvable_certified: bool,
}

pub const COMPARE_CSV_HEADER: &str =
    "q,trials,successes,p_hat,ci_low,ci_high,bound_flow,bound_edges,bound_new,conjecture,solvable_certified";

impl CompareRow {
    pub fn to_csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.q,
            self.trials,
            self.successes,
            self.p_hat,
            self.ci_low,
            self.ci_high,
            opt(self.bound_flow),
            opt(self.bound_edges),
            self.bound_new,
            self.conjecture,
            self.solvable_certified
        )
    }
}

pub fn compare_rows_to_csv(rows: &[CompareRow]) -> String {
    let mut out = String::from(COMPARE_CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_row());
        out.push('\n');
    }
    out
}

/// Runs the success estimation for each field size and lines the estimate up
/// against every bound. Solvability is certified per field (randomized budget
/// [`CERTIFY_BUDGET`]) before the bounds are trusted; rows are emitted either
/// way with the flag set accordingly.
pub fn compare_bounds(
    net: &NetworkSpec,
    q_list: &[u64],
    trials: u64,
    seed: u64,
    mode: SamplingMode,
) -> Result<Vec<CompareRow>, ExperimentError> {
    if trials == 0 {
        return Err(ExperimentError::InvalidTrials);
    }
    let params = net.compute_parameters()?;
    let edges = net.num_edges();
    let mut rows = Vec::with_capacity(q_list.len());
    for (slot, &q) in q_list.iter().enumerate() {
        let field = Field::new(q)?;
        let mut cert_rng = aux_rng(seed, slot as u64);
        let certified = match certify_solvable(net, field, CERTIFY_BUDGET, &mut cert_rng) {
            Ok(found) => found.is_some(),
            Err(CodingError::UnsolvableOverField { .. }) => false,
            Err(e) => return Err(e.into()),
        };
        let summary = estimate_success(net, q, trials, seed, mode)?;
        rows.push(CompareRow {
            q,
            trials,
            successes: summary.successes_all,
            p_hat: summary.p_hat(),
            ci_low: summary.ci_low,
            ci_high: summary.ci_high,
            bound_flow: bound_flow(net.d() as u64, q, params.nu as u32)
                .ok()
                .as_ref()
                .map(to_f64),
            bound_edges: bound_edges(net.d() as u64, q, params.eta as u32)
                .ok()
                .as_ref()
                .map(to_f64),
            bound_new: to_f64(&bound_new(q, params.eta as u32).expect("q >= 2")),
            conjecture: to_f64(&pi_m(edges as u32, q)),
            solvable_certified: certified,
        });
    }
    Ok(rows)
}
