//! Effect of sorted QR ordering on the Babai point and on ULBC complexity.
//!
//! ```bash
//! cargo run --release -p ulbc-qrdm --example qr_ordering
//! ```

use ulbc_qrdm::detectors::Detector;
use ulbc_qrdm::sim::{run_experiment, QrOrdering, SimConfig};

fn main() -> ulbc_qrdm::Result<()> {
    for ordering in [QrOrdering::Plain, QrOrdering::Sorted] {
        let config = SimConfig {
            trials_per_snr: 2000,
            snr_grid: vec![8.0, 16.0, 24.0],
            detectors: vec![Detector::Babai, Detector::Qrdm, Detector::UlbcPaper],
            ordering,
            ..SimConfig::default()
        };
        let stats = run_experiment(&config)?;
        println!("ordering = {ordering}");
        for point in &stats.per_snr {
            let babai = &point.detectors[&Detector::Babai];
            let qrdm = &point.detectors[&Detector::Qrdm];
            let ulbc = &point.detectors[&Detector::UlbcPaper];
            let n = babai.trials as f64;
            println!(
                "  {:>4} dB  babai VER {:.4}  qrdm VER {:.4}  ulbc nodes {:>7.1} ({:.1}% of QRD-M)",
                point.snr_db,
                babai.vector_errors as f64 / n,
                qrdm.vector_errors as f64 / n,
                ulbc.nodes_mean(),
                100.0 * ulbc.nodes_mean() / stats.bounds.qrdm as f64,
            );
        }
    }
    Ok(())
}
