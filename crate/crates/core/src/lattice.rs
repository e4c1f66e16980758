//! Real-valued lattice model of a spatial-multiplexing MIMO link.
//!
//! A complex system `r = H x + v` with `n_rx` receive and `n_tx` transmit
//! antennas is rewritten over the reals by stacking real parts above
//! imaginary parts:
//!
//! ```text
//! [Re r]   [Re H  -Im H] [Re x]   [Re v]
//! [Im r] = [Im H   Re H] [Im x] + [Im v]
//! ```
//!
//! The real channel is then QR-factorized so that detection can run on the
//! triangular system `y = R x + n` with `y = Qᵀ r`. Because `Q` has
//! orthonormal columns, `‖R x − y‖²` differs from `‖H x − r‖²` only by a
//! constant that does not depend on `x` (zero in the square case), so every
//! detector can work on the triangular form.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative singular-value threshold below which a channel counts as singular.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Complex channel matrix, `n_rx` rows by `n_tx` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexChannel {
    entries: DMatrix<Complex64>,
}

impl ComplexChannel {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        let (n_rx, n_tx) = entries.shape();
        if n_tx == 0 {
            return Err(Error::DimensionMismatch {
                what: "transmit antennas must be at least 1",
                expected: 1,
                got: 0,
            });
        }
        if n_rx < n_tx {
            return Err(Error::DimensionMismatch {
                what: "receive antennas must be >= transmit antennas",
                expected: n_tx,
                got: n_rx,
            });
        }
        if entries.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("channel"));
        }
        Ok(Self { entries })
    }

    /// Builds a channel from row-major entries.
    pub fn from_row_slice(n_rx: usize, n_tx: usize, entries: &[Complex64]) -> Result<Self> {
        if entries.len() != n_rx * n_tx {
            return Err(Error::DimensionMismatch {
                what: "channel entry count",
                expected: n_rx * n_tx,
                got: entries.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n_rx, n_tx, entries))
    }

    pub fn n_rx(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    /// `H x` in complex arithmetic.
    pub fn apply(&self, x: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        if x.len() != self.n_tx() {
            return Err(Error::DimensionMismatch {
                what: "transmit vector length",
                expected: self.n_tx(),
                got: x.len(),
            });
        }
        Ok(&self.entries * x)
    }
}

/// Stacks `[Re v; Im v]`.
pub fn real_stack(v: &DVector<Complex64>) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

/// Real-valued lattice system: `h_real` is `2 n_rx × 2 n_tx`, `r_real` has length `2 n_rx`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSystem {
    pub h_real: DMatrix<f64>,
    pub r_real: DVector<f64>,
}

impl RealSystem {
    /// Wraps an already-real system. Rows must be at least columns and both even.
    pub fn from_real(h_real: DMatrix<f64>, r_real: DVector<f64>) -> Result<Self> {
        let (rows, cols) = h_real.shape();
        if r_real.len() != rows {
            return Err(Error::DimensionMismatch {
                what: "received vector length",
                expected: rows,
                got: r_real.len(),
            });
        }
        if cols == 0 || cols % 2 != 0 || rows < cols {
            return Err(Error::DimensionMismatch {
                what: "real channel must be tall with an even, nonzero column count",
                expected: cols.max(2),
                got: rows,
            });
        }
        if h_real.iter().chain(r_real.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("real system"));
        }
        Ok(Self { h_real, r_real })
    }

    /// Real dimension of the search space, `2 n_tx`.
    pub fn n_s(&self) -> usize {
        self.h_real.ncols()
    }

    /// `‖h_real x − r_real‖²`.
    pub fn residual_sq(&self, x: &DVector<f64>) -> f64 {
        (&self.h_real * x - &self.r_real).norm_squared()
    }
}

/// Maps a complex system onto the reals with `[real parts; imaginary parts]` stacking.
pub fn complex_to_real_system(
    channel: &ComplexChannel,
    received: &DVector<Complex64>,
) -> Result<RealSystem> {
    let (n_rx, n_tx) = (channel.n_rx(), channel.n_tx());
    if received.len() != n_rx {
        return Err(Error::DimensionMismatch {
            what: "received vector length",
            expected: n_rx,
            got: received.len(),
        });
    }
    if received.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::NonFinite("received vector"));
    }
    let h = channel.entries();
    let h_real = DMatrix::from_fn(2 * n_rx, 2 * n_tx, |i, j| {
        let (row, lower) = if i < n_rx { (i, false) } else { (i - n_rx, true) };
        let (col, right) = if j < n_tx { (j, false) } else { (j - n_tx, true) };
        let g = h[(row, col)];
        match (lower, right) {
            (false, false) | (true, true) => g.re,
            (false, true) => -g.im,
            (true, false) => g.im,
        }
    });
    Ok(RealSystem {
        h_real,
        r_real: real_stack(received),
    })
}

/// `h_real[:, perm] = q · r_upper`, with `r_upper` upper triangular and a
/// strictly positive diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct QrFactorization {
    pub q: DMatrix<f64>,
    pub r_upper: DMatrix<f64>,
    /// `perm[k]` is the original column placed at position `k`.
    pub perm: Vec<usize>,
}

impl QrFactorization {
    pub fn n_s(&self) -> usize {
        self.r_upper.ncols()
    }

    /// Maps a vector in factor (column-permuted) order back to the original order.
    pub fn unpermute<T: Copy>(&self, permuted: &[T]) -> Vec<T> {
        let mut out = permuted.to_vec();
        for (k, &orig) in self.perm.iter().enumerate() {
            out[orig] = permuted[k];
        }
        out
    }

    /// Maps a vector in original order into factor order.
    pub fn permute<T: Copy>(&self, original: &[T]) -> Vec<T> {
        self.perm.iter().map(|&orig| original[orig]).collect()
    }
}

fn check_rank(h: &DMatrix<f64>) -> Result<()> {
    let sv = h.clone().singular_values();
    let largest = sv.max();
    let smallest = sv.min();
    if !(smallest > RANK_TOLERANCE * largest) {
        return Err(Error::SingularChannel {
            smallest,
            tolerance: RANK_TOLERANCE,
        });
    }
    Ok(())
}

/// Householder QR of `h`, then sign-normalized so `diag(r) > 0`.
fn householder_positive(h: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = h.qr();
    let mut q = qr.q();
    let mut r = qr.r();
    let n = r.ncols();
    for k in 0..n {
        if r[(k, k)] < 0.0 {
            r.row_mut(k).neg_mut();
            q.column_mut(k).neg_mut();
        }
        for i in (k + 1)..r.nrows() {
            r[(i, k)] = 0.0;
        }
    }
    (q, r)
}

/// Plain QR factorization with identity permutation.
pub fn qr_decompose(system: &RealSystem) -> Result<QrFactorization> {
    check_rank(&system.h_real)?;
    let (q, r_upper) = householder_positive(system.h_real.clone());
    Ok(QrFactorization {
        q,
        r_upper,
        perm: (0..system.n_s()).collect(),
    })
}

/// Sorted QR: at every Gram–Schmidt step the remaining column with the
/// smallest residual norm is processed next, so the strongest layers end up
/// at the bottom of `R`, where detection starts.
///
/// The ordering comes from a modified Gram–Schmidt sweep; the factors are
/// then recomputed with Householder reflections on the permuted matrix.
pub fn sorted_qr_decompose(system: &RealSystem) -> Result<QrFactorization> {
    check_rank(&system.h_real)?;
    let n = system.n_s();
    let mut cols: Vec<DVector<f64>> = (0..n)
        .map(|j| system.h_real.column(j).into_owned())
        .collect();
    let mut perm: Vec<usize> = (0..n).collect();

    for i in 0..n {
        let mut best = i;
        let mut best_norm = cols[i].norm_squared();
        for (l, col) in cols.iter().enumerate().skip(i + 1) {
            let norm = col.norm_squared();
            if norm < best_norm {
                best = l;
                best_norm = norm;
            }
        }
        cols.swap(i, best);
        perm.swap(i, best);

        let pivot = cols[i].norm();
        let unit = &cols[i] / pivot;
        for col in cols.iter_mut().skip(i + 1) {
            let proj = unit.dot(col);
            col.axpy(-proj, &unit, 1.0);
        }
    }

    let permuted = DMatrix::from_fn(system.h_real.nrows(), n, |i, k| system.h_real[(i, perm[k])]);
    let (q, r_upper) = householder_positive(permuted);
    Ok(QrFactorization { q, r_upper, perm })
}

/// `y = qᵀ · received`.
pub fn apply_qt(factors: &QrFactorization, received: &DVector<f64>) -> Result<DVector<f64>> {
    if received.len() != factors.q.nrows() {
        return Err(Error::DimensionMismatch {
            what: "received vector length",
            expected: factors.q.nrows(),
            got: received.len(),
        });
    }
    Ok(factors.q.tr_mul(received))
}

/// Ratio of largest to smallest singular value of `h_real`; `+inf` when singular.
pub fn condition_number(system: &RealSystem) -> f64 {
    let sv = system.h_real.clone().singular_values();
    let (largest, smallest) = (sv.max(), sv.min());
    if !(smallest > RANK_TOLERANCE * largest) {
        return f64::INFINITY;
    }
    largest / smallest
}
