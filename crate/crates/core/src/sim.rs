//! Monte Carlo link simulation over flat i.i.d. Rayleigh MIMO channels.
//!
//! Each trial draws its own random stream from `(master_seed, snr, index)`,
//! so results do not depend on how trials are scheduled across workers.
//! Aggregation uses integer counts only and is done in trial order.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::constellation::{PamAlphabet, SymbolVector};
use crate::detectors::{complexity_bounds, hypothesis_count, ComplexityBounds, DetectionResult, Detector, MSchedule, TriangularSystem, ML_ENUMERATION_CAP};
use crate::error::{Error, Result};
use crate::lattice::{complex_to_real_system, qr_decompose, sorted_qr_decompose, ComplexChannel, QrFactorization};

/// Redraw limit for channels failing the rank check.
const MAX_REDRAWS: u32 = 1000;

/// Number of equal-width histogram buckets between the ULBC bounds.
pub const HISTOGRAM_BINS: usize = 32;

/// Column ordering used by the shared QR factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QrOrdering {
    Plain,
    Sorted,
}

impl QrOrdering {
    pub fn name(self) -> &'static str {
        match self {
            QrOrdering::Plain => "plain",
            QrOrdering::Sorted => "sorted",
        }
    }

    pub fn factorize(self, system: &crate::lattice::RealSystem) -> Result<QrFactorization> {
        match self {
            QrOrdering::Plain => qr_decompose(system),
            QrOrdering::Sorted => sorted_qr_decompose(system),
        }
    }
}

impl fmt::Display for QrOrdering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QrOrdering {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "plain" | "plain_qr" => Ok(QrOrdering::Plain),
            "sorted" | "sorted_qr" => Ok(QrOrdering::Sorted),
            other => Err(Error::Config(format!("unknown ordering '{other}' (expected plain or sorted)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    pub constellation_size: usize,
    pub schedule: MSchedule,
    /// SNR points in dB; `f64::INFINITY` means noiseless.
    pub snr_grid: Vec<f64>,
    pub trials_per_snr: usize,
    pub master_seed: u64,
    /// Sorted, without duplicates.
    pub detectors: Vec<Detector>,
    pub ordering: QrOrdering,
    /// Worker threads; 0 uses rayon's default.
    pub workers: usize,
}

impl Default for SimConfig {
    /// 4×4, 16-QAM, `[q, q², q³, …]`, 0–24 dB in 4 dB steps, 10⁴ trials per point.
    fn default() -> Self {
        Self {
            n_tx: 4,
            n_rx: 4,
            constellation_size: 16,
            schedule: MSchedule::geometric(8, 4),
            snr_grid: (0..=6).map(|k| 4.0 * k as f64).collect(),
            trials_per_snr: 10_000,
            master_seed: 0x5eed_0001,
            detectors: vec![
                Detector::Babai,
                Detector::Qrdm,
                Detector::Sd,
                Detector::UlbcPaper,
                Detector::UlbcStrict,
            ],
            ordering: QrOrdering::Sorted,
            workers: 0,
        }
    }
}

impl SimConfig {
    pub fn n_s(&self) -> usize {
        2 * self.n_tx
    }

    pub fn alphabet(&self) -> Result<PamAlphabet> {
        PamAlphabet::new(self.constellation_size)
    }

    pub fn bounds(&self) -> Result<ComplexityBounds> {
        Ok(complexity_bounds(&self.schedule, self.n_s(), &self.alphabet()?))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tx == 0 || self.n_rx < self.n_tx {
            return Err(Error::Config(format!(
                "n_tx/n_rx: need n_rx >= n_tx >= 1 (got n_tx={}, n_rx={})",
                self.n_tx, self.n_rx
            )));
        }
        let alphabet = self.alphabet()?;
        if self.schedule.len() != self.n_s() {
            return Err(Error::InvalidSchedule(format!(
                "schedule has {} stages but n_s = {}",
                self.schedule.len(),
                self.n_s()
            )));
        }
        if self.trials_per_snr == 0 {
            return Err(Error::Config("trials: must be at least 1".into()));
        }
        if self.snr_grid.is_empty() {
            return Err(Error::Config("snr: grid must not be empty".into()));
        }
        if self.snr_grid.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return Err(Error::Config("snr: values must be numbers or +inf".into()));
        }
        if self.detectors.is_empty() {
            return Err(Error::Config("detectors: at least one detector is required".into()));
        }
        if self.detectors.contains(&Detector::Ml) {
            let size = hypothesis_count(self.n_s(), alphabet.q());
            if size > ML_ENUMERATION_CAP {
                return Err(Error::EnumerationCap {
                    size,
                    cap: ML_ENUMERATION_CAP,
                });
            }
        }
        Ok(())
    }
}

/// Independent stream for one trial, keyed by seed, SNR and trial index.
pub fn trial_rng(master_seed: u64, snr_db: f64, trial_index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&snr_db.to_bits().to_le_bytes());
    key[16..24].copy_from_slice(&trial_index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// I.i.d. circularly-symmetric complex Gaussian entries with unit variance.
pub fn gen_channel<R: Rng + ?Sized>(n_rx: usize, n_tx: usize, rng: &mut R) -> Result<ComplexChannel> {
    let entries = DMatrix::from_fn(n_rx, n_tx, |_, _| complex_gaussian(rng, 1.0));
    ComplexChannel::new(entries)
}

/// Per-entry complex noise variance `n_tx / 10^(snr/10)`.
pub fn noise_variance(snr_db: f64, n_tx: usize) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        n_tx as f64 / 10f64.powf(snr_db / 10.0)
    }
}

/// Adds complex AWGN. SNR is total received signal power per receive
/// antenna (`n_tx` for unit-energy symbols and unit-variance gains) over
/// noise power per receive antenna.
pub fn add_noise<R: Rng + ?Sized>(clean: &DVector<Complex64>, snr_db: f64, n_tx: usize, rng: &mut R) -> DVector<Complex64> {
    let variance = noise_variance(snr_db, n_tx);
    if variance == 0.0 {
        return clean.clone();
    }
    clean.map(|c| c + complex_gaussian(rng, variance))
}

/// Complex transmit vector from real-domain symbols `[Re; Im]`.
pub fn complex_symbols(real: &SymbolVector) -> DVector<Complex64> {
    let n = real.len() / 2;
    DVector::from_fn(n, |j, _| Complex64::new(real.values[j], real.values[j + n]))
}

/// One Monte Carlo realization.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub truth: SymbolVector,
    /// Results with solutions mapped back to the original column order.
    pub results: Vec<(Detector, DetectionResult)>,
    pub redraws: u32,
}

impl TrialOutcome {
    pub fn result(&self, detector: Detector) -> Option<&DetectionResult> {
        self.results.iter().find(|(d, _)| *d == detector).map(|(_, r)| r)
    }
}

pub fn run_trial(config: &SimConfig, snr_db: f64, trial_index: u64) -> Result<TrialOutcome> {
    let alphabet = config.alphabet()?;
    let mut rng = trial_rng(config.master_seed, snr_db, trial_index);

    let mut redraws = 0;
    let channel = loop {
        let channel = gen_channel(config.n_rx, config.n_tx, &mut rng)?;
        let probe = complex_to_real_system(&channel, &DVector::zeros(config.n_rx))?;
        match config.ordering.factorize(&probe) {
            Ok(_) => break channel,
            Err(Error::SingularChannel { .. }) if redraws < MAX_REDRAWS => redraws += 1,
            Err(e) => return Err(e),
        }
    };

    let truth = alphabet.random_symbol_vector(config.n_s(), &mut rng)?;
    let clean = channel.apply(&complex_symbols(&truth))?;
    let received = add_noise(&clean, snr_db, config.n_tx, &mut rng);

    let system = complex_to_real_system(&channel, &received)?;
    let factors = config.ordering.factorize(&system)?;
    let tri = TriangularSystem::from_factors(&factors, &system)?;

    let results = config
        .detectors
        .iter()
        .map(|&d| {
            let mut result = d.detect(&tri, &alphabet, &config.schedule)?;
            let indices = factors.unpermute(&result.solution.indices);
            result.solution = SymbolVector::from_indices(indices, &alphabet);
            Ok((d, result))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(TrialOutcome {
        truth,
        results,
        redraws,
    })
}

/// Node-count histogram: an underflow bucket below `lower`, `HISTOGRAM_BINS`
/// equal buckets over `[lower, upper]`, and an overflow bucket above `upper`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub lower: u64,
    pub upper: u64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(lower: u64, upper: u64) -> Self {
        Self {
            lower,
            upper: upper.max(lower),
            counts: vec![0; HISTOGRAM_BINS + 2],
        }
    }

    pub fn bucket(&self, value: u64) -> usize {
        if value < self.lower {
            0
        } else if value > self.upper {
            HISTOGRAM_BINS + 1
        } else {
            let span = (self.upper - self.lower + 1) as u128;
            1 + ((value - self.lower) as u128 * HISTOGRAM_BINS as u128 / span) as usize
        }
    }

    pub fn record(&mut self, value: u64) {
        let b = self.bucket(value);
        self.counts[b] += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectorStats {
    pub trials: u64,
    pub vector_errors: u64,
    /// Complex-symbol errors (either real component wrong).
    pub symbol_errors: u64,
    pub node_sum: u128,
    pub node_min: u64,
    pub node_max: u64,
    pub histogram: Histogram,
    /// ULBC detectors only: trials whose solution equals QRD-M's.
    pub equals_qrdm: u64,
    pub early_terminations: u64,
}

impl DetectorStats {
    fn new(bounds: &ComplexityBounds) -> Self {
        Self {
            trials: 0,
            vector_errors: 0,
            symbol_errors: 0,
            node_sum: 0,
            node_min: u64::MAX,
            node_max: 0,
            histogram: Histogram::new(bounds.lower, bounds.upper),
            equals_qrdm: 0,
            early_terminations: 0,
        }
    }

    pub fn nodes_mean(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.node_sum as f64 / self.trials as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnrStats {
    pub snr_db: f64,
    pub detectors: BTreeMap<Detector, DetectorStats>,
    pub redraws: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialStats {
    pub bounds: ComplexityBounds,
    pub n_tx: usize,
    /// One entry per SNR point, in grid order.
    pub per_snr: Vec<SnrStats>,
}

impl TrialStats {
    pub fn get(&self, snr_db: f64, detector: Detector) -> Option<&DetectorStats> {
        self.per_snr
            .iter()
            .find(|s| s.snr_db == snr_db)
            .and_then(|s| s.detectors.get(&detector))
    }
}

/// Folds trial outcomes into per-detector statistics.
pub fn aggregate(snr_db: f64, n_tx: usize, bounds: &ComplexityBounds, outcomes: &[TrialOutcome]) -> SnrStats {
    let mut detectors: BTreeMap<Detector, DetectorStats> = BTreeMap::new();
    let mut redraws = 0u64;
    for outcome in outcomes {
        redraws += u64::from(outcome.redraws);
        let qrdm = outcome.result(Detector::Qrdm);
        for (d, result) in &outcome.results {
            let stats = detectors.entry(*d).or_insert_with(|| DetectorStats::new(bounds));
            stats.trials += 1;
            let got = &result.solution.indices;
            let want = &outcome.truth.indices;
            if got != want {
                stats.vector_errors += 1;
            }
            stats.symbol_errors += (0..n_tx)
                .filter(|&j| got[j] != want[j] || got[j + n_tx] != want[j + n_tx])
                .count() as u64;
            let nodes = result.nodes_visited;
            stats.node_sum += u128::from(nodes);
            stats.node_min = stats.node_min.min(nodes);
            stats.node_max = stats.node_max.max(nodes);
            stats.histogram.record(nodes);
            if d.is_ulbc() {
                if result.terminated_early {
                    stats.early_terminations += 1;
                }
                if qrdm.is_some_and(|q| q.solution.indices == *got) {
                    stats.equals_qrdm += 1;
                }
            }
        }
    }
    SnrStats {
        snr_db,
        detectors,
        redraws,
    }
}

/// Runs every trial at one SNR; returns outcomes in trial order.
pub fn run_snr_point(config: &SimConfig, snr_db: f64) -> Result<Vec<TrialOutcome>> {
    let trials = config.trials_per_snr as u64;
    let job = || {
        (0..trials)
            .into_par_iter()
            .map(|t| run_trial(config, snr_db, t))
            .collect::<Result<Vec<_>>>()
    };
    if config.workers == 0 {
        job()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::Config(format!("workers: {e}")))?;
        pool.install(job)
    }
}

pub fn run_experiment(config: &SimConfig) -> Result<TrialStats> {
    config.validate()?;
    let bounds = config.bounds()?;
    let per_snr = config
        .snr_grid
        .iter()
        .map(|&snr| {
            let outcomes = run_snr_point(config, snr)?;
            Ok(aggregate(snr, config.n_tx, &bounds, &outcomes))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialStats {
        bounds,
        n_tx: config.n_tx,
        per_snr,
    })
}
