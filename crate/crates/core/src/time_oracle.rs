//! Direct time integration of the assembled equation of motion.
//!
//! Serves as the independent reference for the harmonic-balance solver and
//! as the executable check of the preload/forcing scale invariance. The
//! integrator is a fixed-step Heun scheme with the contact state marched
//! incrementally once per step, which keeps trajectories deterministic and
//! step-by-step comparable between scaled runs.

use nalgebra::{DMatrix, DVector};

use crate::contact::{normal_pressure, tangential_step, ContactState, Regime};
use crate::error::{CoreError, Result};
use crate::model::{excitation_vector, DampingModel, SystemModel};

/// External forcing selection for a simulation run. The static seating
/// loads (preload reactions) are always applied.
#[derive(Debug, Clone, Copy)]
pub enum TimeForcing {
    /// Static loads only (free vibration about the preloaded equilibrium).
    StaticOnly,
    /// Static loads plus the traveling-wave excitation at frequency
    /// `omega` (rad/s).
    TravelingWave { omega: f64 },
}

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Store every `sample_stride`-th step in the trajectory.
    pub sample_stride: usize,
    /// Frequency at which the equivalent viscous matrix replacing the
    /// hysteretic damping is calibrated; `None` uses the first stuck mode
    /// of the excited spatial harmonic family.
    pub calibration_omega: Option<f64>,
    /// Displacement norm beyond which the run is declared diverged.
    pub blowup_limit: f64,
}

impl SimulateOptions {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            sample_stride: 1,
            calibration_omega: None,
            blowup_limit: 1.0,
        }
    }
}

/// Stored samples of a simulation run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub displacements: Vec<DVector<f64>>,
    pub velocities: Vec<DVector<f64>>,
    /// Per stored sample and contact element.
    pub regimes: Vec<Vec<Regime>>,
    pub normal_pressures: Vec<Vec<f64>>,
    pub tangential_tractions: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Peak-to-peak half amplitude of one DOF over the trailing window.
    pub fn steady_amplitude(&self, dof: usize, window: f64) -> f64 {
        let t_last = *self.times.last().unwrap();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (t, u) in self.times.iter().zip(self.displacements.iter()) {
            if *t >= t_last - window {
                lo = lo.min(u[dof]);
                hi = hi.max(u[dof]);
            }
        }
        0.5 * (hi - lo)
    }

    /// Peak absolute deviation from the trailing-window mean.
    pub fn steady_peak(&self, dof: usize, window: f64) -> f64 {
        let t_last = *self.times.last().unwrap();
        let vals: Vec<f64> = self
            .times
            .iter()
            .zip(self.displacements.iter())
            .filter(|(t, _)| **t >= t_last - window)
            .map(|(_, u)| u[dof])
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        vals.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max)
    }
}

/// Viscous matrix standing in for the hysteretic damping `i eta K`,
/// calibrated at `omega_cal` so both dissipate equally near resonance.
pub fn equivalent_viscous(model: &SystemModel, omega_cal: f64) -> DMatrix<f64> {
    match &model.damping {
        DampingModel::Hysteretic(eta) => &model.stiffness * (*eta / omega_cal),
        DampingModel::Viscous(c) => c.clone(),
    }
}

/// First stuck eigenfrequency of the excited spatial-harmonic family;
/// the default calibration frequency for the equivalent viscous damping.
pub fn default_calibration_omega(model: &SystemModel) -> Result<f64> {
    if model.layout.sectors >= 3 {
        let modal = model.stuck_cyclic_modes(model.excitation.engine_order)?;
        Ok(modal.frequencies[0])
    } else {
        let modal = model.stuck_modes()?;
        modal
            .frequencies
            .iter()
            .copied()
            .find(|f| *f > 0.0)
            .ok_or_else(|| CoreError::Linalg("no positive stuck eigenfrequency".into()))
    }
}

struct Integrator<'a> {
    model: &'a SystemModel,
    mass_inv: DMatrix<f64>,
    damping: DMatrix<f64>,
    f_static: DVector<f64>,
    f_harm_re: DVector<f64>,
    f_harm_im: DVector<f64>,
    omega: f64,
    states: Vec<ContactState>,
}

impl<'a> Integrator<'a> {
    fn new(model: &'a SystemModel, forcing: TimeForcing, omega_cal: f64) -> Result<Self> {
        let mass_inv = model
            .mass
            .clone()
            .cholesky()
            .ok_or_else(|| CoreError::Linalg("mass matrix not positive definite".into()))?
            .inverse();
        let damping = equivalent_viscous(model, omega_cal);
        let f_static = model.static_load_vector();
        let (f_harm_re, f_harm_im, omega) = match forcing {
            TimeForcing::StaticOnly => (
                DVector::zeros(model.n_dof()),
                DVector::zeros(model.n_dof()),
                0.0,
            ),
            TimeForcing::TravelingWave { omega } => {
                let f = excitation_vector(&model.excitation, 1);
                (f.map(|c| c.re), f.map(|c| c.im), omega)
            }
        };
        let states = vec![ContactState::virgin(); model.contacts.len()];
        Ok(Self {
            model,
            mass_inv,
            damping,
            f_static,
            f_harm_re,
            f_harm_im,
            omega,
            states,
        })
    }

    fn external_force(&self, t: f64) -> DVector<f64> {
        // f_e(t) = f_static + Re( F exp(i omega t) )
        let (c, s) = ((self.omega * t).cos(), (self.omega * t).sin());
        &self.f_static + &self.f_harm_re * c - &self.f_harm_im * s
    }

    /// Raw contact forces at (u, v). When `commit` is set the hysteresis
    /// memory advances; the corrector stage evaluates with frozen state.
    fn contact_force(
        &mut self,
        u: &DVector<f64>,
        v: &DVector<f64>,
        commit: bool,
        record: Option<(&mut Vec<Regime>, &mut Vec<f64>, &mut Vec<f64>)>,
    ) -> DVector<f64> {
        let mut f = DVector::zeros(self.model.n_dof());
        let mut rec = record;
        for (e, elem) in self.model.contacts.iter().enumerate() {
            let u_n = elem.normal.eval(u);
            let u_t = elem.tangential.eval(u);
            let du_t = elem.tangential.eval(v);
            let p_n = normal_pressure(u_n, elem);
            let (p_t, next) = tangential_step(&self.states[e], u_t, du_t, p_n, elem);
            elem.normal.scatter(p_n * elem.area_weight, &mut f);
            elem.tangential.scatter(p_t * elem.area_weight, &mut f);
            if commit {
                self.states[e] = next;
            }
            if let Some((regimes, pns, pts)) = rec.as_mut() {
                regimes.push(next.regime);
                pns.push(p_n);
                pts.push(p_t);
            }
        }
        f
    }

    fn acceleration(
        &self,
        t: f64,
        u: &DVector<f64>,
        v: &DVector<f64>,
        f_contact: &DVector<f64>,
    ) -> DVector<f64> {
        let rhs = self.external_force(t)
            - &self.damping * v
            - &self.model.stiffness * u
            - f_contact;
        &self.mass_inv * rhs
    }
}

/// Fixed-step integration of the equation of motion. `y0` is the initial
/// `(displacement, velocity)` pair about the preloaded equilibrium.
pub fn simulate(
    model: &SystemModel,
    y0: (DVector<f64>, DVector<f64>),
    forcing: TimeForcing,
    opts: &SimulateOptions,
) -> Result<Trajectory> {
    validate_step(model, opts.dt)?;
    let omega_cal = match opts.calibration_omega {
        Some(w) => w,
        None => default_calibration_omega(model)?,
    };
    let mut integ = Integrator::new(model, forcing, omega_cal)?;
    let n_steps = (opts.t_end / opts.dt).round() as usize;
    let (mut u, mut v) = y0;
    assert_eq!(u.len(), model.n_dof());
    assert_eq!(v.len(), model.n_dof());

    let mut traj = Trajectory {
        times: Vec::new(),
        displacements: Vec::new(),
        velocities: Vec::new(),
        regimes: Vec::new(),
        normal_pressures: Vec::new(),
        tangential_tractions: Vec::new(),
    };

    for step in 0..=n_steps {
        let t = step as f64 * opts.dt;
        if step % opts.sample_stride == 0 || step == n_steps {
            traj.times.push(t);
            traj.displacements.push(u.clone());
            traj.velocities.push(v.clone());
        }
        if step == n_steps {
            break;
        }
        let record = step % opts.sample_stride == 0;
        let mut regimes = Vec::new();
        let mut pns = Vec::new();
        let mut pts = Vec::new();
        let f1 = integ.contact_force(
            &u,
            &v,
            true,
            if record {
                Some((&mut regimes, &mut pns, &mut pts))
            } else {
                None
            },
        );
        if record {
            traj.regimes.push(regimes);
            traj.normal_pressures.push(pns);
            traj.tangential_tractions.push(pts);
        }
        let a1 = integ.acceleration(t, &u, &v, &f1);
        let dt = opts.dt;
        let u_p = &u + &v * dt + &a1 * (0.5 * dt * dt);
        let v_p = &v + &a1 * dt;
        let f2 = integ.contact_force(&u_p, &v_p, false, None);
        let a2 = integ.acceleration(t + dt, &u_p, &v_p, &f2);
        u = u_p;
        v = &v + (&a1 + &a2) * (0.5 * dt);

        let norm = u.amax();
        if !norm.is_finite() || norm > opts.blowup_limit {
            return Err(CoreError::Diverged {
                time: t + dt,
                norm,
            });
        }
    }
    // Regime history of the final stored state reuses the last evaluation.
    while traj.regimes.len() < traj.times.len() {
        traj.regimes.push(
            traj.regimes
                .last()
                .cloned()
                .unwrap_or_else(|| vec![Regime::Stick; model.contacts.len()]),
        );
        traj.normal_pressures
            .push(traj.normal_pressures.last().cloned().unwrap_or_default());
        traj.tangential_tractions
            .push(traj.tangential_tractions.last().cloned().unwrap_or_default());
    }
    Ok(traj)
}

fn validate_step(model: &SystemModel, dt: f64) -> Result<()> {
    let modal = model.stuck_modes()?;
    let omega_max = modal
        .frequencies
        .last()
        .copied()
        .unwrap_or(0.0)
        .max(f64::MIN_POSITIVE);
    let dt_max = 2.0 * std::f64::consts::PI / (50.0 * omega_max);
    if dt > dt_max {
        return Err(CoreError::InvalidConfig(format!(
            "dt = {dt:.3e} too coarse: highest stuck eigenfrequency {omega_max:.3e} rad/s needs dt <= {dt_max:.3e}"
        )));
    }
    Ok(())
}

/// Run the nominal and the `nu`-scaled problem on an identical step
/// sequence and return the maximum relative trajectory deviation
/// `max_t ||y2 - nu y1|| / max_t ||nu y1||`.
pub fn verify_scale_invariance(
    model: &SystemModel,
    y0: (DVector<f64>, DVector<f64>),
    forcing: TimeForcing,
    nu: f64,
    t_end: f64,
    dt: f64,
) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(CoreError::InvalidConfig(format!(
            "scale factor must be positive, got {nu}"
        )));
    }
    validate_step(model, dt)?;
    let omega_cal = default_calibration_omega(model)?;

    let mut scaled_model = model.scaled_preload(nu);
    scaled_model.excitation.level *= nu;

    let mut a = Integrator::new(model, forcing, omega_cal)?;
    let mut b = Integrator::new(&scaled_model, forcing, omega_cal)?;

    let (mut u1, mut v1) = (y0.0.clone(), y0.1.clone());
    let (mut u2, mut v2) = (&y0.0 * nu, &y0.1 * nu);
    let n_steps = (t_end / dt).round() as usize;
    let mut max_dev = 0.0f64;
    let mut max_ref = 0.0f64;
    for step in 0..n_steps {
        let t = step as f64 * dt;
        for (integ, u, v) in [(&mut a, &mut u1, &mut v1), (&mut b, &mut u2, &mut v2)] {
            let f1 = integ.contact_force(u, v, true, None);
            let a1 = integ.acceleration(t, u, v, &f1);
            let u_p = &*u + &*v * dt + &a1 * (0.5 * dt * dt);
            let v_p = &*v + &a1 * dt;
            let f2 = integ.contact_force(&u_p, &v_p, false, None);
            let a2 = integ.acceleration(t + dt, &u_p, &v_p, &f2);
            *u = u_p;
            *v = &*v + (&a1 + &a2) * (0.5 * dt);
        }
        let mut dev = 0.0f64;
        let mut reference = 0.0f64;
        for i in 0..u1.len() {
            dev = dev.max((u2[i] - nu * u1[i]).abs());
            dev = dev.max((v2[i] - nu * v1[i]).abs());
            reference = reference.max((nu * u1[i]).abs());
            reference = reference.max((nu * v1[i]).abs());
        }
        max_dev = max_dev.max(dev);
        max_ref = max_ref.max(reference);
        let norm = u1.amax().max(u2.amax());
        if !norm.is_finite() || norm > 1.0 {
            return Err(CoreError::Diverged { time: t + dt, norm });
        }
    }
    if max_ref == 0.0 {
        return Ok(0.0);
    }
    Ok(max_dev / max_ref)
}

/// Mechanical energy about the preloaded equilibrium: kinetic plus
/// structural strain energy (with the static-load potential) plus the
/// elastic energy stored in the contact springs.
pub fn mechanical_energy(
    model: &SystemModel,
    u: &DVector<f64>,
    v: &DVector<f64>,
    tangential_tractions: &[f64],
) -> f64 {
    let kinetic = 0.5 * (v.transpose() * &model.mass * v)[(0, 0)];
    let strain = 0.5 * (u.transpose() * &model.stiffness * u)[(0, 0)];
    let static_pot = -(model.static_load_vector().dot(u));
    let mut contact = 0.0;
    for (e, elem) in model.contacts.iter().enumerate() {
        let u_n = elem.normal.eval(u);
        let p_n = normal_pressure(u_n, elem);
        contact += elem.area_weight * (p_n * p_n - elem.p0.max(0.0).powi(2)) / (2.0 * elem.kn);
        let p_t = tangential_tractions[e];
        contact += elem.area_weight * p_t * p_t / (2.0 * elem.kt);
    }
    kinetic + strain + static_pot + contact
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{assemble_system, DamperConfig, ModelConfig};
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn desk_config() -> ModelConfig {
        // Mirrors the nominal desk assembly used across the test suite.
        ModelConfig {
            sectors: 8,
            engine_order: 2,
            sector: crate::model::SectorConfig {
                mass_tip: 0.08,
                mass_root: 0.4,
                mass_platform: 0.15,
                k_blade: 3.0e5,
                k_ground: 3.0e6,
                k_platform: 1.2e6,
                k_coupling: 8.0e5,
            },
            damper: Some(DamperConfig {
                mass: 0.015,
                mass_ref: 0.015,
                cg_radius: 0.04,
                ref_speed: 850.0,
                kn: 5.0e10,
                kt: 2.5e10,
                mu: 0.3,
                contact_area: 2.0e-4,
                wedge_angle_deg: 45.0,
                split_factor: None,
                k_retention: 1.0e3,
            }),
            damping: crate::model::DampingConfig { eta: 0.0015 },
            excitation: crate::model::ExcitationConfig {
                force_tip: 30.0,
                level: 1.0,
            },
        }
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let model = assemble_system(&desk_config()).unwrap();
        let n = model.n_dof();
        let opts = SimulateOptions {
            sample_stride: 10,
            ..SimulateOptions::new(2e-6, 2e-3)
        };
        let traj = simulate(
            &model,
            (DVector::zeros(n), DVector::zeros(n)),
            TimeForcing::StaticOnly,
            &opts,
        )
        .unwrap();
        for u in &traj.displacements {
            assert_eq!(u.amax(), 0.0);
        }
    }

    #[test]
    fn linear_steady_state_matches_analytic_frf() {
        let mut config = desk_config();
        config.damper = None;
        config.damping.eta = 0.05; // heavy damping for fast settling
        let model = assemble_system(&config).unwrap();
        let omega_cal = default_calibration_omega(&model).unwrap();
        let omega = 0.9 * omega_cal;

        let n = model.n_dof();
        let opts = SimulateOptions {
            sample_stride: 5,
            calibration_omega: Some(omega_cal),
            ..SimulateOptions::new(4e-6, 0.6)
        };
        let traj = simulate(
            &model,
            (DVector::zeros(n), DVector::zeros(n)),
            TimeForcing::TravelingWave { omega },
            &opts,
        )
        .unwrap();

        // analytic steady state with the same equivalent viscous damping
        let c = equivalent_viscous(&model, omega_cal);
        let f = excitation_vector(&model.excitation, 1);
        let a_mat = model.stiffness.map(|k| Complex64::new(k, 0.0))
            + c.map(|ci| Complex64::new(0.0, omega * ci))
            + model.mass.map(|m| Complex64::new(-omega * omega * m, 0.0));
        let u = a_mat.lu().solve(&f).unwrap();
        let expected = u[model.excitation.response_dof].norm();

        let period = 2.0 * std::f64::consts::PI / omega;
        let measured = traj.steady_amplitude(model.excitation.response_dof, period);
        assert_relative_eq!(measured, expected, max_relative = 0.01);
    }

    #[test]
    fn free_decay_dissipates_energy() {
        let model = assemble_system(&desk_config()).unwrap();
        let n = model.n_dof();
        // Displace along the first stuck mode, scaled into the slipping range.
        let modal = model.stuck_modes().unwrap();
        let mode = &modal.shapes[0];
        let u0 = mode * 2e-4;
        let opts = SimulateOptions {
            sample_stride: 20,
            ..SimulateOptions::new(2e-6, 0.05)
        };
        let traj = simulate(
            &model,
            (u0, DVector::zeros(n)),
            TimeForcing::StaticOnly,
            &opts,
        )
        .unwrap();
        let energies: Vec<f64> = traj
            .times
            .iter()
            .enumerate()
            .map(|(i, _)| {
                mechanical_energy(
                    &model,
                    &traj.displacements[i],
                    &traj.velocities[i],
                    &traj.tangential_tractions[i],
                )
            })
            .collect();
        let e0 = energies[0];
        assert!(e0 > 0.0);
        for w in energies.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-5 * e0,
                "energy increased: {} -> {}",
                w[0],
                w[1]
            );
        }
        // and it actually decays
        assert!(*energies.last().unwrap() < 0.9 * e0);
    }

    #[test]
    fn scale_invariance_identity() {
        let model = assemble_system(&desk_config()).unwrap();
        let n = model.n_dof();
        let dev = verify_scale_invariance(
            &model,
            (DVector::zeros(n), DVector::zeros(n)),
            TimeForcing::TravelingWave { omega: 1700.0 },
            1.0,
            5e-3,
            2e-6,
        )
        .unwrap();
        assert_eq!(dev, 0.0);
    }

    #[test]
    fn scale_invariance_linear_model() {
        let mut config = desk_config();
        config.damper = None;
        let model = assemble_system(&config).unwrap();
        let n = model.n_dof();
        for nu in [0.5, 2.0, 7.3] {
            let dev = verify_scale_invariance(
                &model,
                (DVector::zeros(n), DVector::zeros(n)),
                TimeForcing::TravelingWave { omega: 1500.0 },
                nu,
                5e-3,
                4e-6,
            )
            .unwrap();
            assert!(dev < 1e-12, "nu = {nu}: deviation {dev:.3e}");
        }
    }
}
