//! Tree-search detectors over the triangular system `y = R x + n`.
//!
//! Rows of `R` are indexed `0..n_s`; detection starts at the bottom row
//! `n_s − 1` and moves up, so "stage `k`" in detection order is row
//! `n_s − 1 − k`. The accumulative metric of a partial vector is the sum of
//! per-row squared residuals
//!
//! ```text
//! (y_i − R_ii x_i − Σ_{j>i} R_ij x_j)²
//! ```
//!
//! over the rows already decided, and a full vector's metric is
//! `‖R x − y‖²`.
//!
//! Complexity is measured in visited nodes: one node is one evaluation of a
//! single-row squared residual for one candidate symbol. Every detector
//! reports the nodes it visited and all of them share [`row_interference`]
//! so that metrics of the same path are bit-identical across detectors.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::constellation::{PamAlphabet, SymbolVector};
use crate::error::{Error, Result};
use crate::lattice::{apply_qt, QrFactorization, RealSystem};

/// Default cap on the number of hypotheses the exhaustive oracle will visit.
pub const ML_ENUMERATION_CAP: u128 = 10_000_000;

/// Upper-triangular system with strictly positive diagonal and its target `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangularSystem {
    r: DMatrix<f64>,
    y: DVector<f64>,
}

impl TriangularSystem {
    pub fn new(r: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let n = r.ncols();
        if r.nrows() != n || n == 0 {
            return Err(Error::DimensionMismatch {
                what: "R must be square and nonempty",
                expected: n.max(1),
                got: r.nrows(),
            });
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                what: "y length",
                expected: n,
                got: y.len(),
            });
        }
        if r.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("triangular system"));
        }
        for i in 0..n {
            if !(r[(i, i)] > 0.0) {
                return Err(Error::Config(format!("R diagonal entry {i} is not strictly positive")));
            }
            if (0..i).any(|j| r[(i, j)] != 0.0) {
                return Err(Error::Config(format!("R row {i} has entries below the diagonal")));
            }
        }
        Ok(Self { r, y })
    }

    /// Builds `(R, Qᵀ r)` from a factorization of `system`.
    pub fn from_factors(factors: &QrFactorization, system: &RealSystem) -> Result<Self> {
        let y = apply_qt(factors, &system.r_real)?;
        Self::new(factors.r_upper.clone(), y)
    }

    pub fn n_s(&self) -> usize {
        self.r.ncols()
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// `‖R x − y‖²` evaluated directly.
    pub fn distance_sq(&self, values: &[f64]) -> f64 {
        let x = DVector::from_column_slice(values);
        (&self.r * x - &self.y).norm_squared()
    }
}

/// `y_row − Σ_{j>row} R_{row,j} x_j`, summed in ascending `j`.
#[inline]
pub fn row_interference(sys: &TriangularSystem, row: usize, level_at: impl Fn(usize) -> f64) -> f64 {
    let mut acc = sys.y[row];
    for j in (row + 1)..sys.n_s() {
        acc -= sys.r[(row, j)] * level_at(j);
    }
    acc
}

#[inline]
fn row_term(sys: &TriangularSystem, row: usize, interference: f64, level: f64) -> f64 {
    let e = interference - sys.r[(row, row)] * level;
    e * e
}

/// Per-stage beam widths in detection order (bottom row first).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MSchedule(Vec<usize>);

impl MSchedule {
    pub fn new(widths: Vec<usize>, n_s: usize) -> Result<Self> {
        if widths.len() != n_s {
            return Err(Error::InvalidSchedule(format!(
                "length {} does not match real dimension {n_s}",
                widths.len()
            )));
        }
        if widths.contains(&0) {
            return Err(Error::InvalidSchedule("every stage width must be >= 1".into()));
        }
        Ok(Self(widths))
    }

    /// `[q, q², q³, q³, …]` of length `n_s`.
    pub fn geometric(n_s: usize, q: usize) -> Self {
        Self((1..=n_s).map(|k| q.pow(k.min(3) as u32)).collect())
    }

    /// A width that never truncates: `q^{n_s}` at every stage, saturating.
    pub fn unbounded(n_s: usize, q: usize) -> Self {
        let full = (q as u128).checked_pow(n_s as u32).map_or(usize::MAX, |v| v.min(usize::MAX as u128) as usize);
        Self(vec![full; n_s])
    }

    pub fn widths(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for MSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|m| m.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    /// Symbol indices in row order of `R`.
    pub solution: SymbolVector,
    /// `‖R x − y‖²` of the solution.
    pub metric: f64,
    pub nodes_visited: u64,
    pub terminated_early: bool,
}

/// A partial path from the root: `symbols[k]` is the index chosen at
/// detection stage `k` (row `n_s − 1 − k`).
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub symbols: Vec<usize>,
    pub metric: f64,
}

impl Branch {
    pub fn root() -> Self {
        Self {
            symbols: Vec::new(),
            metric: 0.0,
        }
    }

    pub fn depth(&self) -> usize {
        self.symbols.len()
    }

    /// Row that the next extension of this branch decides.
    pub fn next_row(&self, n_s: usize) -> usize {
        n_s - 1 - self.depth()
    }

    fn level_at(&self, n_s: usize, alphabet: &PamAlphabet, row: usize) -> f64 {
        alphabet.level(self.symbols[n_s - 1 - row])
    }

    fn into_solution(self, alphabet: &PamAlphabet) -> SymbolVector {
        let mut indices = self.symbols;
        indices.reverse();
        SymbolVector::from_indices(indices, alphabet)
    }
}

/// Metric of `branch` extended by `candidate` at its next row. Adds one visited node.
pub fn branch_metric(
    sys: &TriangularSystem,
    alphabet: &PamAlphabet,
    branch: &Branch,
    candidate: usize,
    nodes: &mut u64,
) -> f64 {
    let n = sys.n_s();
    let row = branch.next_row(n);
    let interference = row_interference(sys, row, |j| branch.level_at(n, alphabet, j));
    *nodes += 1;
    branch.metric + row_term(sys, row, interference, alphabet.level(candidate))
}

/// Successive interference cancellation from the bottom row up, slicing each
/// row's interference-cancelled estimate. Visits exactly `n_s` nodes.
pub fn babai_point(sys: &TriangularSystem, alphabet: &PamAlphabet) -> DetectionResult {
    let n = sys.n_s();
    let mut indices = vec![0usize; n];
    let mut values = vec![0.0f64; n];
    let mut metric = 0.0;
    for row in (0..n).rev() {
        let interference = row_interference(sys, row, |j| values[j]);
        let k = alphabet.slice(interference / sys.r[(row, row)]);
        indices[row] = k;
        values[row] = alphabet.level(k);
        metric += row_term(sys, row, interference, values[row]);
    }
    DetectionResult {
        solution: SymbolVector { indices, values },
        metric,
        nodes_visited: n as u64,
        terminated_early: false,
    }
}

/// Depth-first Schnorr–Euchner sphere decoder.
///
/// With `initial_radius_sq = f64::INFINITY` this returns the exact ML point.
/// With a finite radius and no lattice point inside, returns
/// [`Error::EmptySphere`].
pub fn sphere_decode(
    sys: &TriangularSystem,
    alphabet: &PamAlphabet,
    initial_radius_sq: f64,
) -> Result<DetectionResult> {
    struct Search<'a> {
        sys: &'a TriangularSystem,
        alphabet: &'a PamAlphabet,
        radius_sq: f64,
        indices: Vec<usize>,
        values: Vec<f64>,
        best: Option<(f64, Vec<usize>)>,
        nodes: u64,
    }

    impl Search<'_> {
        fn descend(&mut self, row: usize, partial: f64) {
            let r_ii = self.sys.r[(row, row)];
            let values = &self.values;
            let interference = row_interference(self.sys, row, |j| values[j]);
            let center = interference / r_ii;
            for k in self.alphabet.se_children(center) {
                self.nodes += 1;
                let level = self.alphabet.level(k);
                let metric = partial + row_term(self.sys, row, interference, level);
                // children come in nondecreasing term order
                if metric > self.radius_sq {
                    break;
                }
                self.indices[row] = k;
                self.values[row] = level;
                if row == 0 {
                    if self.best.as_ref().is_none_or(|(m, _)| metric < *m) {
                        self.best = Some((metric, self.indices.clone()));
                        self.radius_sq = metric;
                    }
                } else {
                    self.descend(row - 1, metric);
                }
            }
        }
    }

    let n = sys.n_s();
    let mut search = Search {
        sys,
        alphabet,
        radius_sq: initial_radius_sq,
        indices: vec![0; n],
        values: vec![0.0; n],
        best: None,
        nodes: 0,
    };
    search.descend(n - 1, 0.0);
    let (metric, indices) = search.best.ok_or(Error::EmptySphere)?;
    Ok(DetectionResult {
        solution: SymbolVector::from_indices(indices, alphabet),
        metric,
        nodes_visited: search.nodes,
        terminated_early: false,
    })
}

/// Candidate produced while extending a beam: (metric, child index, parent position).
#[derive(Debug, Clone, Copy)]
struct Candidate {
    metric: f64,
    child: usize,
    parent: usize,
}

fn candidate_order(a: &Candidate, b: &Candidate) -> Ordering {
    a.metric
        .total_cmp(&b.metric)
        .then(a.child.cmp(&b.child))
        .then(a.parent.cmp(&b.parent))
}

/// Extends every survivor by every symbol, sorts, and keeps the best `width`.
fn extend_and_select(
    sys: &TriangularSystem,
    alphabet: &PamAlphabet,
    survivors: &[Branch],
    width: usize,
    nodes: &mut u64,
) -> Vec<Branch> {
    let n = sys.n_s();
    let q = alphabet.q();
    let mut candidates = Vec::with_capacity(survivors.len() * q);
    for (parent, branch) in survivors.iter().enumerate() {
        let row = branch.next_row(n);
        let interference = row_interference(sys, row, |j| branch.level_at(n, alphabet, j));
        for child in 0..q {
            *nodes += 1;
            let metric = branch.metric + row_term(sys, row, interference, alphabet.level(child));
            candidates.push(Candidate { metric, child, parent });
        }
    }
    if candidates.len() > width {
        candidates.select_nth_unstable_by(width - 1, candidate_order);
        candidates.truncate(width);
    }
    candidates.sort_unstable_by(candidate_order);
    candidates
        .into_iter()
        .map(|c| {
            let mut symbols = Vec::with_capacity(survivors[c.parent].depth() + 1);
            symbols.extend_from_slice(&survivors[c.parent].symbols);
            symbols.push(c.child);
            Branch {
                symbols,
                metric: c.metric,
            }
        })
        .collect()
}

/// Survivor lists after each stage, in detection order.
pub type BeamTrace = Vec<Vec<Branch>>;

fn run_qrd_m(
    sys: &TriangularSystem,
    alphabet: &PamAlphabet,
    schedule: &MSchedule,
    mut trace: Option<&mut BeamTrace>,
) -> DetectionResult {
    assert_eq!(schedule.len(), sys.n_s(), "schedule length must equal n_s");
    let mut nodes = 0;
    let mut survivors = vec![Branch::root()];
    for &width in schedule.widths() {
        survivors = extend_and_select(sys, alphabet, &survivors, width, &mut nodes);
        if let Some(t) = trace.as_deref_mut() {
            t.push(survivors.clone());
        }
    }
    let best = survivors.swap_remove(0);
    DetectionResult {
        metric: best.metric,
        solution: best.into_solution(alphabet),
        nodes_visited: nodes,
        terminated_early: false,
    }
}

/// Conventional QRD-M (K-best) breadth-first search.
///
/// Ties are broken by child index, then parent position. Visited nodes are
/// fixed for a given `(n_s, q, schedule)`.
pub fn qrd_m(sys: &TriangularSystem, alphabet: &PamAlphabet, schedule: &MSchedule) -> DetectionResult {
    run_qrd_m(sys, alphabet, schedule, None)
}

/// [`qrd_m`] that also returns the survivor list after each stage.
pub fn qrd_m_traced(
    sys: &TriangularSystem,
    alphabet: &PamAlphabet,
    schedule: &MSchedule,
) -> (DetectionResult, BeamTrace) {
    let mut trace = Vec::with_capacity(schedule.len());
    let result = run_qrd_m(sys, alphabet, schedule, Some(&mut trace));
    (result, trace)
}

/// Early-exit behaviour of [`ulbc_qrd_m`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UlbcMode {
    /// Stop after the first stage when a single branch survives the Babai
    /// threshold, returning the Babai point.
    Paper,
    /// Never exit on a single survivor; only an empty survivor set stops the
    /// search early.
    Strict,
}

fn run_ulbc(
    sys: &TriangularSystem,
    alphabet: &PamAlphabet,
    schedule: &MSchedule,
    mode: UlbcMode,
    mut trace: Option<&mut BeamTrace>,
) -> DetectionResult {
    assert_eq!(schedule.len(), sys.n_s(), "schedule length must equal n_s");
    let babai = babai_point(sys, alphabet);
    let threshold = babai.metric;
    let mut nodes = babai.nodes_visited;
    let fallback = |nodes: u64| DetectionResult {
        nodes_visited: nodes,
        terminated_early: true,
        ..babai.clone()
    };

    let mut survivors = vec![Branch::root()];
    for (stage, &width) in schedule.widths().iter().enumerate() {
        survivors = extend_and_select(sys, alphabet, &survivors, width, &mut nodes);
        survivors.retain(|b| b.metric <= threshold);
        if let Some(t) = trace.as_deref_mut() {
            t.push(survivors.clone());
        }
        if survivors.is_empty() || (mode == UlbcMode::Paper && stage == 0 && survivors.len() == 1) {
            return fallback(nodes);
        }
    }

    let best = survivors.swap_remove(0);
    if best.metric < threshold {
        DetectionResult {
            metric: best.metric,
            solution: best.into_solution(alphabet),
            nodes_visited: nodes,
            terminated_early: false,
        }
    } else {
        DetectionResult {
            nodes_visited: nodes,
            ..babai
        }
    }
}

/// Upper-lower bounded-complexity QRD-M.
///
/// Computes the Babai point first and uses its distance as a pruning
/// threshold on top of the QRD-M beam: after each stage's selection every
/// branch whose metric exceeds the threshold is cancelled (ties survive).
/// The answer is the better of the best final survivor and the Babai point,
/// ties going to the Babai point.
pub fn ulbc_qrd_m(
    sys: &TriangularSystem,
    alphabet: &PamAlphabet,
    schedule: &MSchedule,
    mode: UlbcMode,
) -> DetectionResult {
    run_ulbc(sys, alphabet, schedule, mode, None)
}

/// [`ulbc_qrd_m`] that also returns the post-cancellation survivors of every
/// stage that was run.
pub fn ulbc_qrd_m_traced(
    sys: &TriangularSystem,
    alphabet: &PamAlphabet,
    schedule: &MSchedule,
    mode: UlbcMode,
) -> (DetectionResult, BeamTrace) {
    let mut trace = Vec::with_capacity(schedule.len());
    let result = run_ulbc(sys, alphabet, schedule, mode, Some(&mut trace));
    (result, trace)
}

/// Number of hypotheses `q^{n_s}`, saturating.
pub fn hypothesis_count(n_s: usize, q: usize) -> u128 {
    (q as u128).checked_pow(n_s as u32).unwrap_or(u128::MAX)
}

/// Nodes of the full search tree, `Σ_{d=1}^{n_s} q^d`.
pub fn full_tree_nodes(n_s: usize, q: usize) -> u128 {
    (1..=n_s as u32).fold(0u128, |acc, d| acc.saturating_add((q as u128).saturating_pow(d)))
}

/// Exhaustive ML search with the default enumeration cap.
pub fn ml_bruteforce(sys: &TriangularSystem, alphabet: &PamAlphabet) -> Result<DetectionResult> {
    ml_bruteforce_capped(sys, alphabet, ML_ENUMERATION_CAP)
}

/// Exhaustive ML search over all `q^{n_s}` vectors. Equal metrics are
/// resolved toward the lexicographically smallest index vector.
pub fn ml_bruteforce_capped(sys: &TriangularSystem, alphabet: &PamAlphabet, cap: u128) -> Result<DetectionResult> {
    let n = sys.n_s();
    let q = alphabet.q();
    let size = hypothesis_count(n, q);
    if size > cap {
        return Err(Error::EnumerationCap { size, cap });
    }

    struct Enumeration<'a> {
        sys: &'a TriangularSystem,
        alphabet: &'a PamAlphabet,
        indices: Vec<usize>,
        values: Vec<f64>,
        best: Option<(f64, Vec<usize>)>,
        nodes: u64,
    }

    impl Enumeration<'_> {
        fn descend(&mut self, row: usize, partial: f64) {
            let values = &self.values;
            let interference = row_interference(self.sys, row, |j| values[j]);
            for k in 0..self.alphabet.q() {
                self.nodes += 1;
                let level = self.alphabet.level(k);
                let metric = partial + row_term(self.sys, row, interference, level);
                self.indices[row] = k;
                self.values[row] = level;
                if row == 0 {
                    let better = match &self.best {
                        None => true,
                        Some((m, idx)) => match metric.total_cmp(m) {
                            Ordering::Less => true,
                            Ordering::Equal => self.indices < *idx,
                            Ordering::Greater => false,
                        },
                    };
                    if better {
                        self.best = Some((metric, self.indices.clone()));
                    }
                } else {
                    self.descend(row - 1, metric);
                }
            }
        }
    }

    let mut e = Enumeration {
        sys,
        alphabet,
        indices: vec![0; n],
        values: vec![0.0; n],
        best: None,
        nodes: 0,
    };
    e.descend(n - 1, 0.0);
    let (metric, indices) = e.best.expect("alphabet is nonempty");
    Ok(DetectionResult {
        solution: SymbolVector::from_indices(indices, alphabet),
        metric,
        nodes_visited: e.nodes,
        terminated_early: false,
    })
}

/// Visited-node bounds for a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexityBounds {
    /// ULBC best case: Babai point plus one expansion of the root.
    pub lower: u64,
    /// Conventional QRD-M, fixed.
    pub qrdm: u64,
    /// ULBC worst case: QRD-M plus the Babai point.
    pub upper: u64,
}

pub fn complexity_bounds(schedule: &MSchedule, n_s: usize, alphabet: &PamAlphabet) -> ComplexityBounds {
    let q = alphabet.q() as u64;
    let mut parents = 1u64;
    let mut qrdm = 0u64;
    for &width in schedule.widths() {
        let expanded = parents.saturating_mul(q);
        qrdm = qrdm.saturating_add(expanded);
        parents = expanded.min(width as u64);
    }
    ComplexityBounds {
        lower: n_s as u64 + q,
        qrdm,
        upper: qrdm.saturating_add(n_s as u64),
    }
}

/// Detector selector used by the simulation harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Detector {
    Babai,
    Ml,
    Qrdm,
    Sd,
    UlbcPaper,
    UlbcStrict,
}

impl Detector {
    pub const ALL: [Detector; 6] = [
        Detector::Babai,
        Detector::Ml,
        Detector::Qrdm,
        Detector::Sd,
        Detector::UlbcPaper,
        Detector::UlbcStrict,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Detector::Babai => "babai",
            Detector::Ml => "ml",
            Detector::Qrdm => "qrdm",
            Detector::Sd => "sd",
            Detector::UlbcPaper => "ulbc_paper",
            Detector::UlbcStrict => "ulbc_strict",
        }
    }

    pub fn is_ulbc(self) -> bool {
        matches!(self, Detector::UlbcPaper | Detector::UlbcStrict)
    }

    /// Runs this detector on `sys`.
    pub fn detect(self, sys: &TriangularSystem, alphabet: &PamAlphabet, schedule: &MSchedule) -> Result<DetectionResult> {
        Ok(match self {
            Detector::Babai => babai_point(sys, alphabet),
            Detector::Ml => ml_bruteforce(sys, alphabet)?,
            Detector::Qrdm => qrd_m(sys, alphabet, schedule),
            Detector::Sd => sphere_decode(sys, alphabet, f64::INFINITY)?,
            Detector::UlbcPaper => ulbc_qrd_m(sys, alphabet, schedule, UlbcMode::Paper),
            Detector::UlbcStrict => ulbc_qrd_m(sys, alphabet, schedule, UlbcMode::Strict),
        })
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Detector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Detector::ALL
            .into_iter()
            .find(|d| d.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown detector '{s}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(rng: &mut ChaCha8Rng, n: usize, alphabet: &PamAlphabet, noise: f64) -> (TriangularSystem, Vec<usize>) {
        let mut r = DMatrix::zeros(n, n);
        for i in 0..n {
            r[(i, i)] = rng.gen_range(0.3..2.0);
            for j in (i + 1)..n {
                r[(i, j)] = rng.gen_range(-1.0..1.0);
            }
        }
        let truth: Vec<usize> = (0..n).map(|_| rng.gen_range(0..alphabet.q())).collect();
        let x = DVector::from_iterator(n, truth.iter().map(|&k| alphabet.level(k)));
        let y = if noise > 0.0 {
            &r * x + DVector::from_fn(n, |_, _| rng.gen_range(-noise..noise))
        } else {
            &r * x
        };
        (TriangularSystem::new(r, y).unwrap(), truth)
    }

    #[test]
    fn rejects_non_triangular_systems() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 1.0]);
        assert!(TriangularSystem::new(bad, DVector::zeros(2)).is_err());
        let neg = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        assert!(TriangularSystem::new(neg, DVector::zeros(2)).is_err());
        assert!(TriangularSystem::new(DMatrix::identity(2, 2), DVector::zeros(3)).is_err());
    }

    #[test]
    fn first_stage_metric_is_bottom_row_residual() {
        let a = PamAlphabet::new(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (sys, _) = random_instance(&mut rng, 8, &a, 0.3);
        let mut nodes = 0;
        for k in 0..a.q() {
            let m = branch_metric(&sys, &a, &Branch::root(), k, &mut nodes);
            let want = (sys.y()[7] - sys.r()[(7, 7)] * a.level(k)).powi(2);
            assert_eq!(m, want);
        }
        assert_eq!(nodes, 4);
    }

    #[test]
    fn accumulated_metric_matches_direct_distance() {
        let a = PamAlphabet::new(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let (sys, _) = random_instance(&mut rng, 8, &a, 1.0);
            let path: Vec<usize> = (0..8).map(|_| rng.gen_range(0..4)).collect();
            let mut branch = Branch::root();
            let mut nodes = 0;
            for &k in &path {
                let m = branch_metric(&sys, &a, &branch, k, &mut nodes);
                assert!(m >= branch.metric);
                branch.symbols.push(k);
                branch.metric = m;
            }
            assert_eq!(nodes, 8);
            let accumulated = branch.metric;
            let solution = branch.into_solution(&a);
            let direct = sys.distance_sq(&solution.values);
            assert!((accumulated - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_noise_true_symbols_have_zero_terms() {
        let a = PamAlphabet::new(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (sys, truth) = random_instance(&mut rng, 8, &a, 0.0);
        let mut branch = Branch::root();
        let mut nodes = 0;
        for k in truth.iter().rev() {
            let m = branch_metric(&sys, &a, &branch, *k, &mut nodes);
            assert!(m < 1e-24);
            branch.symbols.push(*k);
            branch.metric = m;
        }
        let b = babai_point(&sys, &a);
        assert_eq!(b.solution.indices, truth);
        assert!(b.metric < 1e-24);
        assert_eq!(b.nodes_visited, 8);
    }

    #[test]
    fn babai_never_beats_ml() {
        let a = PamAlphabet::new(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let (sys, _) = random_instance(&mut rng, 4, &a, 0.8);
            let b = babai_point(&sys, &a);
            let ml = ml_bruteforce(&sys, &a).unwrap();
            assert!(b.metric >= ml.metric);
            assert!((b.metric - sys.distance_sq(&b.solution.values)).abs() < 1e-9);
        }
    }

    #[test]
    fn sphere_decoder_matches_ml() {
        let a = PamAlphabet::new(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let (sys, _) = random_instance(&mut rng, 4, &a, 1.0);
            let sd = sphere_decode(&sys, &a, f64::INFINITY).unwrap();
            let ml = ml_bruteforce(&sys, &a).unwrap();
            assert!((sd.metric - ml.metric).abs() < 1e-9);
            assert_eq!(sd.solution.indices, ml.solution.indices);
            assert!(u128::from(sd.nodes_visited) <= full_tree_nodes(4, 4));
            assert_eq!(u128::from(ml.nodes_visited), full_tree_nodes(4, 4));
        }
    }

    #[test]
    fn sphere_decoder_tiny_exhaustive() {
        let a = PamAlphabet::new(4).unwrap();
        let sys = TriangularSystem::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.0, 0.7]),
            DVector::from_vec(vec![0.1, -0.2]),
        )
        .unwrap();
        let sd = sphere_decode(&sys, &a, f64::INFINITY).unwrap();
        let ml = ml_bruteforce(&sys, &a).unwrap();
        assert_eq!(sd.solution, ml.solution);
        // exhaustive check by hand over all four hypotheses
        let mut best = (f64::INFINITY, vec![]);
        for i in 0..2 {
            for j in 0..2 {
                let d = sys.distance_sq(&[a.level(i), a.level(j)]);
                if d < best.0 {
                    best = (d, vec![i, j]);
                }
            }
        }
        assert_eq!(ml.solution.indices, best.1);
    }

    #[test]
    fn sphere_decoder_empty_sphere() {
        let a = PamAlphabet::new(4).unwrap();
        let sys = TriangularSystem::new(DMatrix::identity(2, 2), DVector::from_vec(vec![10.0, 10.0])).unwrap();
        assert_eq!(sphere_decode(&sys, &a, 1.0), Err(Error::EmptySphere));
        assert!(sphere_decode(&sys, &a, 1000.0).is_ok());
    }

    #[test]
    fn qrdm_fixed_node_count() {
        let a = PamAlphabet::new(16).unwrap();
        let schedule = MSchedule::geometric(8, 4);
        assert_eq!(schedule.widths(), &[4, 16, 64, 64, 64, 64, 64, 64]);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let (sys, _) = random_instance(&mut rng, 8, &a, 1.0);
            assert_eq!(qrd_m(&sys, &a, &schedule).nodes_visited, 1364);
        }
    }

    #[test]
    fn qrdm_unbounded_is_ml_and_width_one_is_babai() {
        let a = PamAlphabet::new(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let (sys, _) = random_instance(&mut rng, 4, &a, 1.0);
            let full = qrd_m(&sys, &a, &MSchedule::unbounded(4, 4));
            let ml = ml_bruteforce(&sys, &a).unwrap();
            assert_eq!(full.metric, ml.metric);
            assert_eq!(full.solution, ml.solution);

            let narrow = qrd_m(&sys, &a, &MSchedule::new(vec![1; 4], 4).unwrap());
            let b = babai_point(&sys, &a);
            assert_eq!(narrow.solution, b.solution);
            assert_eq!(narrow.metric, b.metric);
            assert_eq!(narrow.nodes_visited, 16);
        }
    }

    #[test]
    fn ulbc_zero_noise_returns_truth() {
        let a = PamAlphabet::new(16).unwrap();
        let schedule = MSchedule::geometric(8, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let (sys, truth) = random_instance(&mut rng, 8, &a, 0.0);
            for mode in [UlbcMode::Paper, UlbcMode::Strict] {
                let u = ulbc_qrd_m(&sys, &a, &schedule, mode);
                assert_eq!(u.solution.indices, truth);
                assert!(u.metric < 1e-24);
            }
        }
    }

    #[test]
    fn ulbc_strict_equivalence_and_bounds() {
        let a = PamAlphabet::new(16).unwrap();
        let schedule = MSchedule::geometric(8, 4);
        let bounds = complexity_bounds(&schedule, 8, &a);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..2000 {
            let noise = rng.gen_range(0.01..1.5);
            let (sys, _) = random_instance(&mut rng, 8, &a, noise);
            let q = qrd_m(&sys, &a, &schedule);
            let b = babai_point(&sys, &a);
            let u = ulbc_qrd_m(&sys, &a, &schedule, UlbcMode::Strict);
            assert_eq!(u.metric, q.metric.min(b.metric));
            if q.metric < b.metric {
                assert_eq!(u.solution, q.solution);
            } else {
                assert_eq!(u.solution, b.solution);
            }
            for mode in [UlbcMode::Paper, UlbcMode::Strict] {
                let u = ulbc_qrd_m(&sys, &a, &schedule, mode);
                assert!(bounds.lower <= u.nodes_visited && u.nodes_visited <= bounds.upper);
                assert!(u.metric <= b.metric);
                assert!((u.metric - sys.distance_sq(&u.solution.values)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn beam_subset_lemma() {
        let a = PamAlphabet::new(16).unwrap();
        let schedule = MSchedule::geometric(8, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..1000 {
            let noise = rng.gen_range(0.05..1.5);
            let (sys, _) = random_instance(&mut rng, 8, &a, noise);
            let threshold = babai_point(&sys, &a).metric;
            let (_, full) = qrd_m_traced(&sys, &a, &schedule);
            let (_, pruned) = ulbc_qrd_m_traced(&sys, &a, &schedule, UlbcMode::Strict);
            for (stage, kept) in pruned.iter().enumerate() {
                let expected: Vec<Branch> = full[stage].iter().filter(|b| b.metric <= threshold).cloned().collect();
                assert_eq!(kept, &expected, "stage {stage}");
            }
        }
    }

    #[test]
    fn paper_mode_reaches_lower_bound() {
        // well-separated diagonal system with tiny noise: one first-stage survivor
        let a = PamAlphabet::new(16).unwrap();
        let mut r = DMatrix::identity(8, 8) * 3.0;
        r[(0, 7)] = 0.2;
        let x = DVector::from_iterator(8, (0..8).map(|i| a.level(i % 4)));
        let y = &r * &x + DVector::from_element(8, 0.01);
        let sys = TriangularSystem::new(r, y).unwrap();
        let schedule = MSchedule::geometric(8, 4);
        let u = ulbc_qrd_m(&sys, &a, &schedule, UlbcMode::Paper);
        assert_eq!(u.nodes_visited, 12);
        assert!(u.terminated_early);
        let s = ulbc_qrd_m(&sys, &a, &schedule, UlbcMode::Strict);
        assert!(!s.terminated_early || s.nodes_visited > 12);
        assert_eq!(s.solution, u.solution);
    }

    #[test]
    fn bounds_examples() {
        let a16 = PamAlphabet::new(16).unwrap();
        let b = complexity_bounds(&MSchedule::geometric(8, 4), 8, &a16);
        assert_eq!((b.lower, b.qrdm, b.upper), (12, 1364, 1372));

        let a4 = PamAlphabet::new(4).unwrap();
        let b = complexity_bounds(&MSchedule::new(vec![1, 1], 2).unwrap(), 2, &a4);
        assert_eq!((b.lower, b.qrdm, b.upper), (4, 4, 6));

        let b = complexity_bounds(&MSchedule::unbounded(8, 4), 8, &a16);
        assert_eq!(u128::from(b.qrdm), full_tree_nodes(8, 4));
    }

    #[test]
    fn ml_cap_refuses_large_instances() {
        let a = PamAlphabet::new(16).unwrap();
        let sys = TriangularSystem::new(DMatrix::identity(12, 12), DVector::zeros(12)).unwrap();
        assert!(matches!(ml_bruteforce(&sys, &a), Err(Error::EnumerationCap { .. })));
    }

    #[test]
    fn schedule_validation() {
        assert!(MSchedule::new(vec![4, 16], 3).is_err());
        assert!(MSchedule::new(vec![4, 0, 4], 3).is_err());
        assert_eq!(MSchedule::geometric(2, 2).widths(), &[2, 4]);
    }

    #[test]
    fn detector_names_round_trip() {
        for d in Detector::ALL {
            assert_eq!(d.name().parse::<Detector>().unwrap(), d);
        }
        assert!("kbest".parse::<Detector>().is_err());
    }
}
