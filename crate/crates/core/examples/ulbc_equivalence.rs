//! Runs QRD-M next to both ULBC variants on the same channel uses and counts
//! how often their decisions differ.
//!
//! The strict variant only ever differs from QRD-M when the Babai point is
//! strictly closer than QRD-M's answer. The paper variant may also stop
//! after the first stage with the Babai point while QRD-M keeps searching
//! under the surviving prefix.
//!
//! ```bash
//! cargo run --release -p ulbc-qrdm --example ulbc_equivalence -- 2000
//! ```

use ulbc_qrdm::detectors::Detector;
use ulbc_qrdm::sim::{run_snr_point, SimConfig};

fn main() -> ulbc_qrdm::Result<()> {
    let trials = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let config = SimConfig {
        trials_per_snr: trials,
        detectors: vec![Detector::Babai, Detector::Qrdm, Detector::UlbcPaper, Detector::UlbcStrict],
        ..SimConfig::default()
    };
    println!(
        "{:>6} {:>14} {:>14} {:>14} {:>14}",
        "snr_db", "strict!=qrdm", "strict better", "paper!=qrdm", "paper worse"
    );
    for &snr in &config.snr_grid {
        let outcomes = run_snr_point(&config, snr)?;
        let (mut strict_diff, mut strict_better, mut paper_diff, mut paper_worse) = (0, 0, 0, 0);
        for o in &outcomes {
            let q = o.result(Detector::Qrdm).unwrap();
            let s = o.result(Detector::UlbcStrict).unwrap();
            let p = o.result(Detector::UlbcPaper).unwrap();
            if s.solution != q.solution {
                strict_diff += 1;
                if s.metric < q.metric {
                    strict_better += 1;
                }
            }
            if p.solution != q.solution {
                paper_diff += 1;
                if p.metric > q.metric {
                    paper_worse += 1;
                }
            }
        }
        println!("{snr:>6} {strict_diff:>14} {strict_better:>14} {paper_diff:>14} {paper_worse:>14}");
    }
    Ok(())
}
