//! Default 4×4 16-QAM sweep over 0–24 dB; prints the summary table and
//! writes the CSV to stdout when `--csv` is given.
//!
//! ```bash
//! cargo run --release -p ulbc-qrdm --example snr_sweep -- 2000
//! cargo run --release -p ulbc-qrdm --example snr_sweep -- 2000 --csv > sweep.csv
//! ```

use ulbc_qrdm::cli::{summary_table, write_csv};
use ulbc_qrdm::sim::{run_experiment, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let trials = args.iter().find_map(|a| a.parse().ok()).unwrap_or(1000);
    let config = SimConfig {
        trials_per_snr: trials,
        ..SimConfig::default()
    };
    let stats = run_experiment(&config)?;
    if args.iter().any(|a| a == "--csv") {
        write_csv(&mut std::io::stdout().lock(), &config, &stats)?;
    } else {
        print!("{}", summary_table(&config, &stats));
    }
    Ok(())
}
