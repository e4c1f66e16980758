//! Runs every detector on one random 4×4 16-QAM channel use and prints the
//! decisions, metrics and visited-node counts side by side.
//!
//! ```bash
//! cargo run -p ulbc-qrdm --example detect_one -- 12
//! ```

use ulbc_qrdm::constellation::PamAlphabet;
use ulbc_qrdm::detectors::{complexity_bounds, Detector, MSchedule, TriangularSystem};
use ulbc_qrdm::lattice::{complex_to_real_system, condition_number, sorted_qr_decompose};
use ulbc_qrdm::sim::{add_noise, complex_symbols, gen_channel, trial_rng};

fn main() -> ulbc_qrdm::Result<()> {
    let snr_db: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10.0);
    let (n_tx, n_rx) = (4, 4);
    let alphabet = PamAlphabet::new(16)?;
    let schedule = MSchedule::geometric(2 * n_tx, alphabet.q());
    let mut rng = trial_rng(2024, snr_db, 0);

    let channel = gen_channel(n_rx, n_tx, &mut rng)?;
    let truth = alphabet.random_symbol_vector(2 * n_tx, &mut rng)?;
    let received = add_noise(&channel.apply(&complex_symbols(&truth))?, snr_db, n_tx, &mut rng);

    let system = complex_to_real_system(&channel, &received)?;
    let factors = sorted_qr_decompose(&system)?;
    let tri = TriangularSystem::from_factors(&factors, &system)?;
    let bounds = complexity_bounds(&schedule, tri.n_s(), &alphabet);

    println!("SNR {snr_db} dB, condition number {:.2}", condition_number(&system));
    println!("detection order (columns): {:?}", factors.perm.iter().rev().collect::<Vec<_>>());
    println!("bounds: ULBC >= {}, QRD-M = {}, ULBC <= {}", bounds.lower, bounds.qrdm, bounds.upper);
    println!("truth        {:?}", truth.indices);
    for d in Detector::ALL {
        let r = d.detect(&tri, &alphabet, &schedule)?;
        let decided = factors.unpermute(&r.solution.indices);
        println!(
            "{:<12} {:?} metric {:>9.5} nodes {:>6}{}{}",
            d.name(),
            decided,
            r.metric,
            r.nodes_visited,
            if decided == truth.indices { "" } else { "  (error)" },
            if r.terminated_early { "  [early exit]" } else { "" },
        );
    }
    Ok(())
}
