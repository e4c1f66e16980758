//! Distribution of sphere-decoder visited nodes at low SNR and how the
//! worst cases line up with channel conditioning.
//!
//! ```bash
//! cargo run --release -p ulbc-qrdm --example sphere_decoder_tail -- 0
//! ```

use ulbc_qrdm::constellation::PamAlphabet;
use ulbc_qrdm::detectors::{full_tree_nodes, sphere_decode, TriangularSystem};
use ulbc_qrdm::lattice::{complex_to_real_system, condition_number, sorted_qr_decompose};
use ulbc_qrdm::sim::{add_noise, complex_symbols, gen_channel, trial_rng};

fn main() -> ulbc_qrdm::Result<()> {
    let snr_db: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let alphabet = PamAlphabet::new(16)?;
    let trials = 5000;
    let mut samples = Vec::with_capacity(trials);
    for t in 0..trials as u64 {
        let mut rng = trial_rng(7, snr_db, t);
        let channel = gen_channel(4, 4, &mut rng)?;
        let x = alphabet.random_symbol_vector(8, &mut rng)?;
        let received = add_noise(&channel.apply(&complex_symbols(&x))?, snr_db, 4, &mut rng);
        let system = complex_to_real_system(&channel, &received)?;
        let tri = TriangularSystem::from_factors(&sorted_qr_decompose(&system)?, &system)?;
        let nodes = sphere_decode(&tri, &alphabet, f64::INFINITY)?.nodes_visited;
        samples.push((nodes, condition_number(&system)));
    }
    samples.sort_by_key(|s| s.0);
    let full = full_tree_nodes(8, 4) as f64;
    let mean = samples.iter().map(|s| s.0 as f64).sum::<f64>() / trials as f64;
    println!("SNR {snr_db} dB, {trials} trials, full tree {full} nodes, mean {mean:.1}");
    for p in [0.5, 0.9, 0.99, 0.999, 1.0] {
        let idx = ((trials as f64 * p) as usize).min(trials - 1);
        let (n, _) = samples[idx];
        println!("  p{:<6} {:>7} nodes ({:.3}% of full tree)", p * 100.0, n, 100.0 * n as f64 / full);
    }
    let median_cond = {
        let mut c: Vec<f64> = samples.iter().map(|s| s.1).collect();
        c.sort_by(f64::total_cmp);
        c[c.len() / 2]
    };
    let worst_cond = samples[samples.len() - 50..].iter().map(|s| s.1).sum::<f64>() / 50.0;
    println!("  median condition number {median_cond:.1}; mean over the 50 costliest trials {worst_cond:.1}");
    Ok(())
}
