//! Dev probe: per-patch DC force anatomy at the stuck-linear state.
use damprel_core::contact::{aft_patch_forces, PatchCoeffs};
use damprel_core::fourier::SampleGrid;
use damprel_core::hbm::linear_stuck_solution;
use damprel_core::model::{assemble_system, ModelConfig};

fn desk_config(level: f64) -> ModelConfig {
    serde_json::from_value(serde_json::json!({
        "sectors": 8,
        "engine_order": 2,
        "sector": {
            "mass_tip": 0.08, "mass_root": 0.4, "mass_platform": 0.15,
            "k_blade": 3.0e5, "k_ground": 3.0e6, "k_platform": 1.2e6,
            "k_coupling": 8.0e5
        },
        "damper": {
            "mass": 0.015, "mass_ref": 0.015, "cg_radius": 0.04,
            "ref_speed": 850.0, "kn": 5.0e10, "kt": 2.5e10, "mu": 0.3,
            "contact_area": 2.0e-4, "wedge_angle_deg": 45.0,
            "k_retention": 1.0e3
        },
        "damping": { "eta": 0.0015 },
        "excitation": { "force_tip": 30.0, "level": level }
    }))
    .unwrap()
}

fn main() {
    let model = assemble_system(&desk_config(0.05)).unwrap();
    let omega = 1868.87;
    let coeffs = linear_stuck_solution(&model, omega, 7).unwrap();
    let grid = SampleGrid::new(7, 128);
    let p0a = model.contacts[0].p0 * model.contacts[0].area_weight;
    println!("p0*A = {p0a:.4}");
    for (i, elem) in model.contacts.iter().enumerate().take(4) {
        let rel = PatchCoeffs {
            normal: elem.normal.eval_coeffs(&coeffs),
            tangential: elem.tangential.eval_coeffs(&coeffs),
        };
        let (f, cycle) = aft_patch_forces(elem, &rel, &grid).unwrap();
        let sticks = cycle.regimes.iter().filter(|r| **r == damprel_core::Regime::Stick).count();
        println!(
            "patch {i}: |u_n1| = {:.3e}  |u_t1| = {:.3e}  DC f_n = {:.4}  DC f_t = {:.4}  stick {}/{}",
            rel.normal[1].norm(),
            rel.tangential[1].norm(),
            f.normal[0].re,
            f.tangential[0].re,
            sticks,
            grid.n_t,
        );
        let un_amp = rel.normal[1].norm();
        println!("   kn*un = {:.4e} vs p0 = {:.4e}", elem.kn * un_amp, elem.p0);
    }
}
