//! Dev probe: bucket depth for tuned geometry.
use damprel_core::hbm::{max_response, solve_frf, HbmOptions};
use damprel_core::model::{assemble_system, ModelConfig};

fn config(kg: f64, kp: f64, mr: f64, mp: f64, kc: f64) -> ModelConfig {
    serde_json::from_value(serde_json::json!({
        "sectors": 8,
        "engine_order": 2,
        "sector": {
            "mass_tip": 0.08, "mass_root": mr, "mass_platform": mp,
            "k_blade": 3.0e5, "k_ground": kg, "k_platform": kp,
            "k_coupling": kc
        },
        "damper": {
            "mass": 0.015, "mass_ref": 0.015, "cg_radius": 0.04,
            "ref_speed": 850.0, "kn": 5.0e10, "kt": 2.5e10, "mu": 0.3,
            "contact_area": 2.0e-4, "wedge_angle_deg": 30.0,
            "k_retention": 1.0e3
        },
        "damping": { "eta": 0.0015 },
        "excitation": { "force_tip": 30.0, "level": 1.0 }
    }))
    .unwrap()
}

fn main() {
    for (kg, kp, mr, mp, kc) in [
        (6.0e5, 2.0e6, 0.3, 0.15, 4.0e5),
        (4.0e5, 2.5e6, 0.25, 0.2, 4.0e5),
    ] {
        let c = config(kg, kp, mr, mp, kc);
        let mut lin = c.clone();
        lin.damper = None;
        let nd = assemble_system(&lin).unwrap();
        let w_nd = nd.stuck_cyclic_modes(2).unwrap().frequencies[0];
        let lo = HbmOptions { n_h: 1, n_t: 16, ..HbmOptions::default() };
        let frf = solve_frf(&nd, (0.97 * w_nd, 1.03 * w_nd), &lo).unwrap();
        let (_, a_no) = max_response(&frf, nd.excitation.response_dof);

        let model = assemble_system(&c).unwrap();
        let w0 = model.stuck_cyclic_modes(2).unwrap().frequencies[0];
        print!("kg {kg:.1e}: a_no {a_no:.3e} | a* =");
        for nu in [0.35, 0.5, 0.7, 1.0, 1.5, 2.0] {
            let m = model.scaled_preload(nu);
            let opts = HbmOptions { allow_partial: true, ..HbmOptions::default() };
            match solve_frf(&m, (0.82 * w0, 1.03 * w0), &opts) {
                Ok(frf) => {
                    let (_, a) = max_response(&frf, m.excitation.response_dof);
                    print!(" {:.4}", a / a_no);
                }
                Err(_) => print!(" (x)"),
            }
        }
        println!();
    }
}
