//! Visited-node bounds for a few antenna/constellation/schedule choices.
//!
//! ```bash
//! cargo run -p ulbc-qrdm --example complexity_bounds
//! ```

use ulbc_qrdm::constellation::PamAlphabet;
use ulbc_qrdm::detectors::{complexity_bounds, full_tree_nodes, MSchedule};

fn main() -> ulbc_qrdm::Result<()> {
    println!("{:>5} {:>5} {:<32} {:>6} {:>8} {:>8} {:>12}", "n_tx", "C", "schedule", "f_lb", "f_qrdm", "f_ub", "full tree");
    for (n_tx, c) in [(2, 4), (2, 16), (4, 4), (4, 16), (4, 64), (8, 16)] {
        let alphabet = PamAlphabet::new(c)?;
        let n_s = 2 * n_tx;
        for schedule in [
            MSchedule::geometric(n_s, alphabet.q()),
            MSchedule::new(vec![alphabet.q(); n_s], n_s)?,
        ] {
            let b = complexity_bounds(&schedule, n_s, &alphabet);
            println!(
                "{:>5} {:>5} {:<32} {:>6} {:>8} {:>8} {:>12}",
                n_tx,
                c,
                schedule.to_string(),
                b.lower,
                b.qrdm,
                b.upper,
                full_tree_nodes(n_s, alphabet.q())
            );
        }
    }
    Ok(())
}
