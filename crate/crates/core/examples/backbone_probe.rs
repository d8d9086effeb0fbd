//! Dev probe: backbone physics and continuation reach.
use damprel_core::model::assemble_system;
use damprel_core::nma::{slip_onset_energy, solve_backbone, NmaOptions};
use damprel_core::presets::nominal_config;

fn main() {
    let model = assemble_system(&nominal_config()).unwrap();
    let q_slip = slip_onset_energy(&model, 0).unwrap();
    println!("slip onset energy: {q_slip:.4e} J");
    let n = 25;
    let (lo, hi) = (q_slip * 1e-2, q_slip * 1e4);
    let grid: Vec<f64> = (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect();
    match solve_backbone(&model, 0, &grid, 7, &NmaOptions { max_iter: 300, ..NmaOptions::default() }) {
        Ok(b) => {
            for i in 0..b.q.len() {
                println!(
                    "q/q_slip {:9.3e}  w {:7.1}  delta {:9.5}  peak {:8.3e}",
                    b.q[i] / q_slip,
                    b.omega[i],
                    b.delta[i],
                    b.response_peak[i]
                );
            }
            for w in &b.warnings {
                println!("warning: {w}");
            }
        }
        Err(e) => println!("failed: {e}"),
    }
}
