//! Scalar linear network codes over a canonical network: coefficient
//! sampling, the transfer and Edmonds matrices, critical matrices, and the
//! decodability predicates.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{Field, Matrix};
use crate::network::{NetworkError, NetworkSpec};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodingError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("network is unsolvable over F_{q}: exhaustive search found no decoding assignment")]
    UnsolvableOverField { q: u64 },
}

/// How random coefficients are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SamplingMode {
    /// Uniform on all of F_q.
    IncludeZero,
    /// Uniform on the nonzero elements of F_q.
    NonZeroOnly,
}

/// The topology-allowed random coefficient positions of the encoding matrix:
/// pairs (in_edge, out_edge) where the out-edge is random and the in-edge
/// feeds its tail. Ordered by out-edge, then in-edge.
pub fn random_positions(net: &NetworkSpec) -> Vec<(usize, usize)> {
    let mut positions = Vec::new();
    for &j in net.random_edges() {
        for i in net.in_edges(net.edges()[j].tail) {
            positions.push((i, j));
        }
    }
    positions.sort_by_key(|&(i, j)| (j, i));
    positions
}

/// One concrete coefficient assignment: the matrices A, F, and B_beta.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CodeInstance<'n> {
    #[serde(skip)]
    net: &'n NetworkSpec,
    field: Field,
    a: Matrix,
    f: Matrix,
    b: Vec<Matrix>,
}

/// The critical matrix of one sink together with the index sets it was cut
/// from. Rows are edges 1..k-r, columns are edges r+1..k (1-based labels).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CriticalView {
    pub sink: usize,
    pub row_edges: std::ops::Range<usize>,
    pub col_edges: std::ops::Range<usize>,
    pub matrix: Matrix,
    pub eta_beta: usize,
}

/// Prepares repeated code sampling over one network and field: the canonical
/// check, the position list, and the deterministic part of F are computed
/// once.
pub struct CodeSampler<'n> {
    net: &'n NetworkSpec,
    field: Field,
    mode: SamplingMode,
    positions: Vec<(usize, usize)>,
    base_f: Matrix,
    a: Matrix,
    b: Vec<Matrix>,
}

impl<'n> CodeSampler<'n> {
    pub fn new(
        net: &'n NetworkSpec,
        field: Field,
        mode: SamplingMode,
    ) -> Result<Self, CodingError> {
        net.validate_canonical()?;
        let e = net.num_edges();
        let r = net.r();
        let mut base_f = Matrix::zero(field, e, e);
        for (&(i, j), &v) in net.fixed_coefficients() {
            base_f.set(i, j, field.reduce(v));
        }
        let mut a = Matrix::zero(field, r, e);
        for alpha in 0..r {
            a.set(alpha, alpha, 1);
        }
        let mut b = Vec::with_capacity(net.d());
        for beta in 0..net.d() {
            let k = net.sink_offsets()[beta];
            let mut bb = Matrix::zero(field, r, e);
            for alpha in 0..r {
                bb.set(alpha, k - r + alpha, 1);
            }
            b.push(bb);
        }
        Ok(CodeSampler {
            net,
            field,
            mode,
            positions: random_positions(net),
            base_f,
            a,
            b,
        })
    }

    #[inline]
    pub fn positions(&self) -> &[(usize, usize)] {
        &self.positions
    }

    /// Builds the code with explicit values for the random positions.
    pub fn instantiate(&self, values: &[u64]) -> CodeInstance<'n> {
        assert_eq!(values.len(), self.positions.len());
        let mut f = self.base_f.clone();
        for (&(i, j), &v) in self.positions.iter().zip(values) {
            f.set(i, j, v);
        }
        CodeInstance {
            net: self.net,
            field: self.field,
            a: self.a.clone(),
            f,
            b: self.b.clone(),
        }
    }

    /// Draws every random position i.i.d. according to the sampling mode.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CodeInstance<'n> {
        let q = self.field.order();
        let mut f = self.base_f.clone();
        for &(i, j) in &self.positions {
            let v = match self.mode {
                SamplingMode::IncludeZero => rng.random_range(0..q),
                SamplingMode::NonZeroOnly => rng.random_range(1..q),
            };
            f.set(i, j, v);
        }
        CodeInstance {
            net: self.net,
            field: self.field,
            a: self.a.clone(),
            f,
            b: self.b.clone(),
        }
    }
}

/// Samples one code instance. For repeated sampling over the same network,
/// build a [`CodeSampler`] once instead.
pub fn sample_code<'n, R: Rng + ?Sized>(
    net: &'n NetworkSpec,
    field: Field,
    rng: &mut R,
    mode: SamplingMode,
) -> Result<CodeInstance<'n>, CodingError> {
    Ok(CodeSampler::new(net, field, mode)?.sample(rng))
}

impl<'n> CodeInstance<'n> {
    #[inline]
    pub fn network(&self) -> &'n NetworkSpec {
        self.net
    }

    #[inline]
    pub fn field(&self) -> Field {
        self.field
    }

    #[inline]
    pub fn a(&self) -> &Matrix {
        &self.a
    }

    #[inline]
    pub fn f(&self) -> &Matrix {
        &self.f
    }

    #[inline]
    pub fn b(&self, beta: usize) -> &Matrix {
        &self.b[beta]
    }

    /// I - F; unit upper triangular because edge labels are ancestral.
    fn i_minus_f(&self) -> Matrix {
        let e = self.net.num_edges();
        let field = self.field;
        let mut n = Matrix::zero(field, e, e);
        for i in 0..e {
            for j in 0..e {
                let v = if i == j {
                    1
                } else {
                    field.neg(self.f.get(i, j))
                };
                n.set(i, j, v);
            }
        }
        n
    }

    /// The r-by-r transfer matrix A (I-F)^-1 B_beta^T. The sink decodes iff
    /// this is nonsingular.
    pub fn transfer_matrix(&self, beta: usize) -> Matrix {
        let g = self
            .i_minus_f()
            .inverse()
            .expect("I - F is unit upper triangular, always invertible");
        self.a.mat_mul(&g).mat_mul(&self.b[beta].transpose())
    }

    /// The (E+r)-by-(E+r) Edmonds matrix [[A, 0], [I-F, B_beta^T]].
    pub fn edmonds_matrix(&self, beta: usize) -> Matrix {
        let e = self.net.num_edges();
        let r = self.net.r();
        let field = self.field;
        let n = self.i_minus_f();
        let bt = self.b[beta].transpose();
        let mut z = Matrix::zero(field, e + r, e + r);
        for i in 0..r {
            for j in 0..e {
                z.set(i, j, self.a.get(i, j));
            }
        }
        for i in 0..e {
            for j in 0..e {
                z.set(r + i, j, n.get(i, j));
            }
            for j in 0..r {
                z.set(r + i, e + j, bt.get(i, j));
            }
        }
        z
    }

    /// The critical matrix for a sink: rows 1..k-r and columns r+1..k of
    /// I - F, where k is the label of the sink's last observed edge.
    pub fn critical_matrix(&self, beta: usize) -> CriticalView {
        let r = self.net.r();
        let k = self.net.sink_offsets()[beta];
        let size = k - r;
        let field = self.field;
        let mut c = Matrix::zero(field, size, size);
        for i in 0..size {
            for j in 0..size {
                let col = r + j;
                let v = if i == col {
                    1
                } else {
                    field.neg(self.f.get(i, col))
                };
                c.set(i, j, v);
            }
        }
        let eta_beta = self
            .net
            .random_edges()
            .iter()
            .filter(|&&e| e >= r && e < k)
            .count();
        CriticalView {
            sink: beta,
            row_edges: 0..size,
            col_edges: r..k,
            matrix: c,
            eta_beta,
        }
    }

    /// True iff sink `beta` can decode: det C_beta != 0, which coincides with
    /// det Z_beta != 0 and det M_beta != 0.
    pub fn decode_ok(&self, beta: usize) -> bool {
        self.critical_matrix(beta)
            .matrix
            .det()
            .expect("critical matrix is square")
            != 0
    }

    /// Per-sink decode predicate for all sinks.
    pub fn decode_flags(&self) -> Vec<bool> {
        (0..self.net.d()).map(|beta| self.decode_ok(beta)).collect()
    }

    pub fn all_decode(&self) -> bool {
        (0..self.net.d()).all(|beta| self.decode_ok(beta))
    }
}

/// Exhaustive search is only attempted when the assignment space is at most
/// this large (and within the caller's budget).
pub const EXHAUSTIVE_LIMIT: u128 = 1 << 20;

/// Searches for a coefficient assignment under which every sink decodes.
///
/// Returns `Ok(Some(code))` when one is found, `Ok(None)` when the randomized
/// search budget ran out without a certificate, and
/// `Err(UnsolvableOverField)` only when the whole assignment space was
/// enumerated without success.
pub fn certify_solvable<'n, R: Rng + ?Sized>(
    net: &'n NetworkSpec,
    field: Field,
    budget: u64,
    rng: &mut R,
) -> Result<Option<CodeInstance<'n>>, CodingError> {
    let sampler = CodeSampler::new(net, field, SamplingMode::IncludeZero)?;
    let q = field.order();
    let n = sampler.positions().len();
    let space = (q as u128).checked_pow(n as u32);
    let exhaustive = match space {
        Some(s) => s <= EXHAUSTIVE_LIMIT && s <= budget as u128,
        None => false,
    };
    if exhaustive {
        let mut values = vec![0u64; n];
        loop {
            let code = sampler.instantiate(&values);
            if code.all_decode() {
                return Ok(Some(code));
            }
            // Odometer increment over the assignment space.
            let mut pos = 0;
            loop {
                if pos == n {
                    return Err(CodingError::UnsolvableOverField { q });
                }
                values[pos] += 1;
                if values[pos] < q {
                    break;
                }
                values[pos] = 0;
                pos += 1;
            }
        }
    }
    for _ in 0..budget {
        let code = sampler.sample(rng);
        if code.all_decode() {
            return Ok(Some(code));
        }
    }
    Ok(None)
}
