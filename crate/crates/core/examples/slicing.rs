//! PAM levels, hard slicing and Schnorr–Euchner child order for square QAM.
//!
//! ```bash
//! cargo run -p ulbc-qrdm --example slicing
//! ```

use ulbc_qrdm::constellation::PamAlphabet;

fn main() -> ulbc_qrdm::Result<()> {
    for c in [4, 16, 64] {
        let a = PamAlphabet::new(c)?;
        let levels: Vec<String> = a.levels().iter().map(|l| format!("{l:+.4}")).collect();
        println!("{c}-QAM: q = {}, scale = {:.5}, levels [{}]", a.q(), a.scale(), levels.join(", "));
    }
    let a = PamAlphabet::new(16)?;
    for center in [-1.5, -0.35, 0.0, 0.12, 0.7, 2.0] {
        let order: Vec<usize> = a.se_children(center).collect();
        println!("center {center:+.2}: slice -> {}, enumeration order {order:?}", a.slice(center));
    }
    Ok(())
}
