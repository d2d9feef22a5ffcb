//! Closed-form success-probability bounds, the nonsingularity products
//! pi_m(q) and pi_inf(q), the tightness ratio z(d,q), and the minimal
//! field-size formulas.
//!
//! Probability-valued bounds are computed as exact rationals; floats are
//! derived from those. Only the infinite product and the tightness ratio are
//! floating point by nature.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, ToPrimitive};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoundError {
    #[error("field size {q} is too small for d = {d} receivers")]
    FieldTooSmall { d: u64, q: u64 },
    #[error("domain error: {0}")]
    Domain(String),
}

fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn rational_pow(base: &BigRational, exp: u32) -> BigRational {
    BigRational::new(base.numer().clone().pow(exp), base.denom().clone().pow(exp))
}

pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().expect("bound values fit in f64")
}

/// (1 - d/q)^nu, the flow-solution bound. Requires q > d >= 1.
pub fn bound_flow(d: u64, q: u64, nu: u32) -> Result<BigRational, BoundError> {
    if d == 0 {
        return Err(BoundError::Domain("d must be at least 1".into()));
    }
    if q <= d {
        return Err(BoundError::FieldTooSmall { d, q });
    }
    Ok(rational_pow(&ratio(q - d, q), nu))
}

/// (1 - d/q)^eta, the looser all-edges variant of the flow bound.
pub fn bound_edges(d: u64, q: u64, eta: u32) -> Result<BigRational, BoundError> {
    bound_flow(d, q, eta)
}

/// (1 - 1/q)^eta, the sink-count-free bound.
pub fn bound_new(q: u64, eta: u32) -> Result<BigRational, BoundError> {
    if q < 2 {
        return Err(BoundError::Domain("q must be at least 2".into()));
    }
    Ok(rational_pow(&ratio(q - 1, q), eta))
}

/// Probability that an m-by-m matrix with i.i.d. uniform F_q entries is
/// nonsingular: the product of (1 - q^-i) for i = 1..m.
pub fn pi_m(m: u32, q: u64) -> BigRational {
    assert!(q >= 2, "pi_m requires q >= 2");
    let mut acc = BigRational::one();
    let q_big = BigInt::from(q);
    let mut q_pow = BigInt::one();
    for _ in 0..m {
        q_pow *= &q_big;
        acc *= BigRational::new(&q_pow - 1, q_pow.clone());
    }
    acc
}

/// Truncated evaluation of pi_inf(q) = lim_m pi_m(q).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PiInf {
    pub value: f64,
    /// Number of product terms taken before the tail bound dropped below tol.
    pub terms: u32,
}

/// The infinite product truncated once the geometric tail sum
/// q^-n / (q - 1) falls below `tol`.
pub fn pi_inf(q: u64, tol: f64) -> PiInf {
    assert!(q >= 2, "pi_inf requires q >= 2");
    assert!(tol > 0.0, "tolerance must be positive");
    let qf = q as f64;
    let mut value = 1.0f64;
    let mut q_pow_inv = 1.0f64;
    let mut terms = 0u32;
    loop {
        q_pow_inv /= qf;
        terms += 1;
        value *= 1.0 - q_pow_inv;
        if q_pow_inv / (qf - 1.0) < tol {
            return PiInf { value, terms };
        }
    }
}

/// The truncation lower bound (1 - 3/q)^(1/3) on pi_inf(q). Requires q > 3.
pub fn pi_inf_lower(q: u64) -> Result<f64, BoundError> {
    if q <= 3 {
        return Err(BoundError::Domain(format!(
            "lower bound needs q > 3, got {q}"
        )));
    }
    Ok((1.0 - 3.0 / q as f64).cbrt())
}

/// z(d,q) = log(1 - d/q) / log(1 - 1/q); satisfies z > d for q > d.
pub fn z_ratio(d: u64, q: u64) -> Result<f64, BoundError> {
    if d == 0 {
        return Err(BoundError::Domain("d must be at least 1".into()));
    }
    if q <= d {
        return Err(BoundError::FieldTooSmall { d, q });
    }
    let num = (1.0 - d as f64 / q as f64).ln();
    let den = (1.0 - 1.0 / q as f64).ln();
    Ok(num / den)
}

/// True iff eta < nu * z(d,q), i.e. the sink-count-free bound beats the
/// flow-solution bound. Decided exactly by cross-multiplied integer powers of
/// the two bound values, so it always agrees with comparing them directly.
pub fn new_bound_tighter(eta: u32, nu: u32, d: u64, q: u64) -> Result<bool, BoundError> {
    if d == 0 {
        return Err(BoundError::Domain("d must be at least 1".into()));
    }
    if q <= d {
        return Err(BoundError::FieldTooSmall { d, q });
    }
    // (1 - 1/q)^eta > (1 - d/q)^nu  <=>  (q-1)^eta q^nu > (q-d)^nu q^eta
    let q_big = BigInt::from(q);
    let lhs = BigInt::from(q - 1).pow(eta) * q_big.clone().pow(nu);
    let rhs = BigInt::from(q - d).pow(nu) * q_big.pow(eta);
    Ok(lhs > rhs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinFieldUniform {
    /// Smallest integer q >= 2 with (1 - 1/q)^m >= p.
    pub q: u64,
    /// First-order expansion of the exact threshold 1/(1 - p^(1/m)):
    /// m / log(1/p) + 1/2.
    pub asymptotic: f64,
}

/// Inverts (1 - 1/q)^m >= p for q by exact integer search.
pub fn min_field_uniform(p: f64, m: u32) -> MinFieldUniform {
    assert!(p > 0.0 && p < 1.0, "target probability must be in (0, 1)");
    assert!(m >= 1);
    let p_exact = BigRational::from_float(p).expect("p is finite");
    let ok = |q: u64| -> bool {
        // (q-1)^m / q^m >= p_num / p_den
        let lhs = BigInt::from(q - 1).pow(m) * p_exact.denom();
        let rhs = p_exact.numer() * BigInt::from(q).pow(m);
        lhs >= rhs
    };
    let q = if ok(2) {
        2
    } else {
        let mut hi = 4u64;
        while !ok(hi) {
            hi *= 2;
        }
        let mut lo = hi / 2; // ok(lo) is false
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if ok(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let asymptotic = m as f64 / (1.0 / p).ln() + 0.5;
    MinFieldUniform { q, asymptotic }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MinFieldPi {
    /// ceil(3 / (1 - p^3)): sufficient via the truncation lower bound.
    pub closed_form: u64,
    /// Smallest q >= 2 with pi_inf(q) >= p.
    pub searched: u64,
}

/// Field size needed for pi_inf(q) >= p, via both the closed form and direct
/// search. The closed form is an upper bound on the searched value; both grow
/// without bound as p approaches 1.
pub fn min_field_pi(p: f64) -> MinFieldPi {
    assert!(p > 0.0 && p < 1.0, "target probability must be in (0, 1)");
    let p_exact = BigRational::from_float(p).expect("p is finite");
    let p_cubed = rational_pow(&p_exact, 3);
    let threshold = ratio(3, 1) / (BigRational::one() - p_cubed);
    let closed_form = threshold
        .ceil()
        .to_integer()
        .to_u64()
        .expect("closed-form field size fits in u64");
    let mut searched = 2u64;
    while pi_inf(searched, 1e-12).value < p {
        searched += 1;
        debug_assert!(
            searched <= closed_form,
            "search must stop by the closed form"
        );
    }
    MinFieldPi {
        closed_form,
        searched,
    }
}

/// Evaluated bound values for one (network, field) configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub q: u64,
    pub d: u64,
    pub nu: usize,
    pub eta: usize,
    /// None when q <= d (the bound is undefined there).
    pub bound_flow: Option<f64>,
    pub bound_edges: Option<f64>,
    pub bound_new: f64,
    /// pi_E(q) where E is the total edge count; None when E is unknown.
    pub conjecture: Option<f64>,
    /// Whether q > d, i.e. whether the flow-style bounds apply.
    pub applicable: bool,
}

impl BoundReport {
    pub fn new(q: u64, d: u64, nu: usize, eta: usize, edges: Option<usize>) -> Self {
        let applicable = q > d;
        let bound_flow = bound_flow(d, q, nu as u32).ok().as_ref().map(to_f64);
        let bound_edges = bound_edges(d, q, eta as u32).ok().as_ref().map(to_f64);
        let bnd_new = to_f64(&bound_new(q, eta as u32).expect("q >= 2"));
        let conjecture = edges.map(|e| to_f64(&pi_m(e as u32, q)));
        if let (Some(be), bn) = (bound_edges, bnd_new) {
            debug_assert!(be <= bn);
        }
        BoundReport {
            q,
            d,
            nu,
            eta,
            bound_flow,
            bound_edges,
            bound_new: bnd_new,
            conjecture,
            applicable,
        }
    }

    pub const CSV_HEADER: &'static str = "q,d,nu,eta,bound_flow,bound_edges,bound_new,conjecture";

    pub fn to_csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.q,
            self.d,
            self.nu,
            self.eta,
            opt(self.bound_flow),
            opt(self.bound_edges),
            self.bound_new,
            opt(self.conjecture)
        )
    }
}

/// The first `n` primes, in order.
pub fn first_primes(n: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(n);
    let mut candidate = 2u64;
    while primes.len() < n {
        if crate::linalg::Field::new(candidate).is_ok() {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

/// The first `n` primes strictly greater than `above`.
pub fn first_primes_above(n: usize, above: u64) -> Vec<u64> {
    let mut primes = Vec::with_capacity(n);
    let mut candidate = above + 1;
    while primes.len() < n {
        if crate::linalg::Field::new(candidate).is_ok() {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}
