//! Dev probe: kinetic-energy profile anatomy at a microslip backbone state.
use damprel_core::fourier::HarmonicCoeffs;
use damprel_core::model::assemble_system;
use damprel_core::nma::{modal_amplitude, slip_onset_energy, solve_backbone, NmaOptions};
use damprel_core::presets::nominal_config;
use nalgebra::DVector;

fn main() {
    let model = assemble_system(&nominal_config()).unwrap();
    let q_slip = slip_onset_energy(&model, 0).unwrap();
    let grid = vec![q_slip * 0.01, q_slip * 0.1, q_slip * 0.3, q_slip];
    let b = solve_backbone(&model, 0, &grid, 5, &NmaOptions::default()).unwrap();
    let i = 3;
    let motion = &b.motions[i];
    let omega = b.omega[i];

    // KE(phi) profile
    let n_dof = motion.n_dof();
    let mut kvals = Vec::new();
    for k in 0..256 {
        let phi = 2.0 * std::f64::consts::PI * k as f64 / 256.0;
        let mut v = DVector::zeros(n_dof);
        for d in 0..n_dof {
            v[d] = motion.sample_velocity_dof(d, phi, omega);
        }
        kvals.push(0.5 * (v.transpose() * &model.mass * &v)[(0, 0)]);
    }
    let kmin = kvals.iter().cloned().fold(f64::INFINITY, f64::min);
    let kmax = kvals.iter().cloned().fold(0.0f64, f64::max);
    println!("KE profile: min {kmin:.8e} max {kmax:.8e} ripple {:.3e}", (kmax - kmin) / kmax);

    // direct q sensitivity to Re u5[tip]
    let scale_x = 1e-6;
    for delta in [1e-3, 1e-2, 0.1] {
        let mut pert = motion.clone();
        // reduced Re u5[tip] perturbation corresponds to perturbing every
        // sector's harmonic 5 with the traveling phase; perturb the full
        // coeffs directly to match the reduced column
        let phase_step = 2.0 * std::f64::consts::PI * 2.0 / 8.0;
        for s in 0..8 {
            let g = s * 5 + 0;
            let rot = num_complex::Complex64::from_polar(1.0, 5.0 * phase_step * s as f64);
            let old = pert.get(5, g);
            pert.set(5, g, old + rot * (delta * scale_x));
        }
        let q0 = modal_amplitude(motion, &model.mass, omega);
        let q1 = modal_amplitude(&pert, &model.mass, omega);
        println!("delta {delta:.0e}: dq/dx = {:.6e}", (q1 - q0) / (delta * scale_x));
    }
    let _ = HarmonicCoeffs::zeros(1, 1);
}
