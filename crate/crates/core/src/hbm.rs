//! Direct high-order harmonic-balance forced-response solver.
//!
//! The periodic response is expanded in harmonics `0..=n_h`; contact
//! forces are evaluated per patch by the alternating frequency-time scheme
//! and the resulting algebraic system is solved by Newton iteration with
//! sequential frequency continuation (secant predictor, adaptive step).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::contact::{aft_patch_forces, aft_patch_jacobian, PatchCoeffs, Regime};
use crate::error::{CoreError, Result};
use crate::fourier::{refined_periodic_max, HarmonicCoeffs, SampleGrid};
use crate::linalg::lu_solve_complex;
use crate::model::{excitation_vector, DampingModel, SystemModel};

/// One converged harmonic-balance solution point.
#[derive(Debug, Clone)]
pub struct HarmonicSolution {
    pub omega: f64,
    pub coeffs: HarmonicCoeffs,
    pub residual_norm: f64,
}

/// Swept forced response along a frequency range.
#[derive(Debug, Clone)]
pub struct FrequencyResponse {
    pub points: Vec<HarmonicSolution>,
    pub response_dof: usize,
}

/// How the contact preload follows the sweep frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreloadMode {
    /// Preload frozen at the value assembled for the reference speed.
    Fixed,
    /// Preload scaled with `(omega_r / omega_r_ref)^2` along the sweep.
    SpeedDependent,
}

/// Direction of the frequency sweep. Friction softening bends resonances
/// toward lower frequencies, so a downward sweep reaches the peak before
/// any turning point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepDirection {
    Up,
    Down,
}

#[derive(Debug, Clone)]
pub struct HbmOptions {
    pub n_h: usize,
    pub n_t: usize,
    /// Newton tolerance on the scaled residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial number of continuation steps across the sweep range.
    pub target_points: usize,
    /// Largest admissible amplitude change between accepted points,
    /// relative to the running maximum (drives step refinement near
    /// resonance).
    pub max_amplitude_step: f64,
    /// Additional peak-polish solves after the sweep.
    pub refine_peak: usize,
    pub preload_mode: PreloadMode,
    pub sweep: SweepDirection,
    /// Accept a stalled trace when the response peak lies strictly inside
    /// the traced portion (the branch beyond a fold cannot raise the
    /// maximum).
    pub allow_partial: bool,
}

impl Default for HbmOptions {
    fn default() -> Self {
        Self {
            n_h: 7,
            n_t: 128,
            tol: 1e-8,
            max_iter: 30,
            target_points: 60,
            max_amplitude_step: 0.08,
            refine_peak: 3,
            preload_mode: PreloadMode::Fixed,
            sweep: SweepDirection::Down,
            allow_partial: false,
        }
    }
}

/// Frequency-domain operator context at one frequency.
pub struct HbmContext<'a> {
    pub model: &'a SystemModel,
    pub n_h: usize,
    pub grid: SampleGrid,
    pub f_ext: Vec<DVector<Complex64>>,
}

impl<'a> HbmContext<'a> {
    pub fn new(model: &'a SystemModel, n_h: usize, n_t: usize) -> Self {
        let n = model.n_dof();
        let mut f_ext = vec![DVector::from_element(n, Complex64::new(0.0, 0.0)); n_h + 1];
        f_ext[0] = model.static_load_vector().map(|x| Complex64::new(x, 0.0));
        if n_h >= 1 {
            f_ext[1] = excitation_vector(&model.excitation, 1);
        }
        Self {
            model,
            n_h,
            grid: SampleGrid::new(n_h, n_t),
            f_ext,
        }
    }

    /// Complex dynamic stiffness of harmonic `n` (without contacts).
    pub fn dynamic_stiffness(&self, n: usize, omega: f64) -> DMatrix<Complex64> {
        let w = n as f64 * omega;
        let mut s = self.model.stiffness.map(|k| Complex64::new(k, 0.0));
        match &self.model.damping {
            DampingModel::Hysteretic(eta) => {
                if n > 0 {
                    let factor = Complex64::new(0.0, *eta);
                    s += self.model.stiffness.map(|k| factor * k);
                }
            }
            DampingModel::Viscous(c) => {
                s += c.map(|ci| Complex64::new(0.0, w * ci));
            }
        }
        s += self.model.mass.map(|m| Complex64::new(-w * w * m, 0.0));
        s
    }

    /// Contact force coefficients for all patches plus the steady cycles.
    fn contact_forces(
        &self,
        u: &HarmonicCoeffs,
    ) -> Result<Vec<(PatchCoeffs, crate::contact::PatchCycle)>> {
        self.model
            .contacts
            .iter()
            .map(|elem| {
                let rel = PatchCoeffs {
                    normal: elem.normal.eval_coeffs(u),
                    tangential: elem.tangential.eval_coeffs(u),
                };
                aft_patch_forces(elem, &rel, &self.grid)
            })
            .collect()
    }

    /// Residual of the stacked real system together with the scale of its
    /// balancing terms (for the convergence test).
    pub fn residual(&self, x: &DVector<f64>, omega: f64) -> Result<(DVector<f64>, f64)> {
        let n = self.model.n_dof();
        let u = HarmonicCoeffs::from_real_vector(x, n, self.n_h);
        let forces = self.contact_forces(&u)?;

        let mut residual_c: Vec<DVector<Complex64>> = Vec::with_capacity(self.n_h + 1);
        let mut scale = 0.0f64;
        for h in 0..=self.n_h {
            let s = self.dynamic_stiffness(h, omega);
            let u_h = DVector::from_iterator(n, (0..n).map(|d| u.get(h, d)));
            let lin = &s * &u_h;
            let mut r = lin.clone() - &self.f_ext[h];
            for (elem, (f, _)) in self.model.contacts.iter().zip(forces.iter()) {
                for &(d, c) in &elem.normal.entries {
                    r[d] += f.normal[h] * c;
                }
                for &(d, c) in &elem.tangential.entries {
                    r[d] += f.tangential[h] * c;
                }
            }
            for d in 0..n {
                scale = scale
                    .max(lin[d].norm())
                    .max(self.f_ext[h][d].norm());
            }
            residual_c.push(r);
        }
        // preload reaction participates in the force balance scale
        for (f, _) in &forces {
            scale = scale.max(f.normal[0].norm());
        }

        let mut r = DVector::zeros(x.len());
        for d in 0..n {
            r[d] = residual_c[0][d].re;
        }
        for h in 1..=self.n_h {
            let base = n * (2 * h - 1);
            for d in 0..n {
                r[base + d] = residual_c[h][d].re;
                r[base + n + d] = residual_c[h][d].im;
            }
        }
        Ok((r, scale.max(1e-300)))
    }

    /// Analytic Jacobian of the stacked residual.
    pub fn jacobian(&self, x: &DVector<f64>, omega: f64) -> Result<DMatrix<f64>> {
        let n = self.model.n_dof();
        let n_c = 2 * self.n_h + 1;
        let u = HarmonicCoeffs::from_real_vector(x, n, self.n_h);
        let mut jac = DMatrix::zeros(x.len(), x.len());

        // Linear blocks: harmonic 0 is real; harmonics >= 1 get the
        // [Re -Im; Im Re] embedding.
        let s0 = self.dynamic_stiffness(0, omega);
        for i in 0..n {
            for j in 0..n {
                jac[(i, j)] = s0[(i, j)].re;
            }
        }
        for h in 1..=self.n_h {
            let s = self.dynamic_stiffness(h, omega);
            let base = n * (2 * h - 1);
            for i in 0..n {
                for j in 0..n {
                    let c = s[(i, j)];
                    jac[(base + i, base + j)] = c.re;
                    jac[(base + i, base + n + j)] = -c.im;
                    jac[(base + n + i, base + j)] = c.im;
                    jac[(base + n + i, base + n + j)] = c.re;
                }
            }
        }

        // Contact contributions through the AFT patch Jacobians.
        for elem in &self.model.contacts {
            let rel = PatchCoeffs {
                normal: elem.normal.eval_coeffs(&u),
                tangential: elem.tangential.eval_coeffs(&u),
            };
            let (_, cycle) = aft_patch_forces(elem, &rel, &self.grid)?;
            let pj = aft_patch_jacobian(elem, &cycle, &self.grid);
            // Output rows through the normal selector come from f_n, rows
            // through the tangential selector from f_t; input columns
            // likewise. Coefficient blocks align with the real stacking.
            for (sel_out, mats) in [
                (&elem.normal, [Some(&pj.d_fn_d_un), None]),
                (&elem.tangential, [Some(&pj.d_ft_d_un), Some(&pj.d_ft_d_ut)]),
            ] {
                for (sel_in, mat) in [(&elem.normal, mats[0]), (&elem.tangential, mats[1])] {
                    let Some(mat) = mat else { continue };
                    for r in 0..n_c {
                        for c in 0..n_c {
                            let v = mat[(r, c)];
                            if v == 0.0 {
                                continue;
                            }
                            for &(di, ci) in &sel_out.entries {
                                for &(dj, cj) in &sel_in.entries {
                                    jac[(r * n + di, c * n + dj)] += ci * v * cj;
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(jac)
    }
}

/// Context constructor exposed for diagnostics and examples.
pub fn debug_context(model: &SystemModel, n_h: usize, n_t: usize) -> HbmContext<'_> {
    HbmContext::new(model, n_h, n_t)
}

/// Residual of the harmonic-balance system for stacked coefficients `x`.
pub fn hbm_residual(x: &DVector<f64>, omega: f64, model: &SystemModel) -> Result<DVector<f64>> {
    let n = model.n_dof();
    let n_h = (x.len() / n - 1) / 2;
    let ctx = HbmContext::new(model, n_h, HbmOptions::default().n_t.max(4 * n_h + 1));
    Ok(ctx.residual(x, omega)?.0)
}

/// Newton solve at a fixed frequency; returns the converged point.
pub(crate) fn newton_solve(
    ctx: &HbmContext,
    x0: DVector<f64>,
    omega: f64,
    tol: f64,
    max_iter: usize,
) -> Result<HarmonicSolution> {
    let mut x = x0;
    let (mut r, mut scale) = ctx.residual(&x, omega)?;
    let mut r_norm = r.amax();
    for _iter in 0..max_iter {
        if r_norm <= tol * scale {
            return Ok(HarmonicSolution {
                omega,
                coeffs: HarmonicCoeffs::from_real_vector(&x, ctx.model.n_dof(), ctx.n_h),
                residual_norm: r_norm / scale,
            });
        }
        let jac = ctx.jacobian(&x, omega)?;
        let dx = jac
            .lu()
            .solve(&(-&r))
            .ok_or_else(|| CoreError::Linalg("singular HBM Jacobian".into()))?;
        // Damped update: halve the step while the residual grows.
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..6 {
            let x_try = &x + &dx * lambda;
            match ctx.residual(&x_try, omega) {
                Ok((r_try, s_try)) => {
                    let n_try = r_try.amax();
                    if n_try < r_norm || lambda < 0.2 {
                        x = x_try;
                        r = r_try;
                        scale = s_try;
                        r_norm = n_try;
                        accepted = true;
                        break;
                    }
                }
                Err(_) => {}
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if r_norm <= tol * scale {
        return Ok(HarmonicSolution {
            omega,
            coeffs: HarmonicCoeffs::from_real_vector(&x, ctx.model.n_dof(), ctx.n_h),
            residual_norm: r_norm / scale,
        });
    }
    Err(CoreError::NoConvergence {
        context: format!("HBM Newton at omega = {omega:.6e}"),
        residual: r_norm / scale,
        iterations: max_iter,
    })
}

/// Linear response of the fully stuck system at one frequency; the
/// standard initial guess and the stuck-limit oracle.
pub fn linear_stuck_solution(model: &SystemModel, omega: f64, n_h: usize) -> Result<HarmonicCoeffs> {
    let n = model.n_dof();
    let k_stuck = model.stuck_stiffness();
    let mut s = k_stuck.map(|k| Complex64::new(k, 0.0));
    match &model.damping {
        DampingModel::Hysteretic(eta) => {
            // structural damping acts on the structural stiffness
            s += model.stiffness.map(|k| Complex64::new(0.0, *eta * k));
        }
        DampingModel::Viscous(c) => {
            s += c.map(|ci| Complex64::new(0.0, omega * ci));
        }
    }
    s += model.mass.map(|m| Complex64::new(-omega * omega * m, 0.0));
    let f = excitation_vector(&model.excitation, 1);
    let u1 = lu_solve_complex(s, &f)?;
    let mut coeffs = HarmonicCoeffs::zeros(n, n_h);
    for d in 0..n {
        coeffs.set(1, d, u1[d]);
    }
    Ok(coeffs)
}

/// Vibration amplitude: maximum over one period of the reconstructed
/// signal's deviation from its mean, at one DOF.
pub fn periodic_peak_amplitude(coeffs: &HarmonicCoeffs, dof: usize) -> f64 {
    let n_h = coeffs.n_harmonics();
    let n_t = (8 * n_h.max(1)).next_power_of_two().max(64);
    let grid = SampleGrid::new(n_h, n_t);
    let series: Vec<Complex64> = (0..=n_h).map(|h| coeffs.get(h, dof)).collect();
    let mut samples = vec![0.0; n_t];
    grid.synthesize(&series, &mut samples);
    let mean = coeffs.get(0, dof).re;
    let dev: Vec<f64> = samples.iter().map(|s| (s - mean).abs()).collect();
    refined_periodic_max(&dev, |phi| (coeffs.sample_dof(dof, phi) - mean).abs())
}

impl FrequencyResponse {
    pub fn amplitudes(&self) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| periodic_peak_amplitude(&p.coeffs, self.response_dof))
            .collect()
    }
}

/// Resonance extraction: frequency and amplitude of the largest response
/// along the branch.
pub fn max_response(frf: &FrequencyResponse, dof: usize) -> (f64, f64) {
    assert!(!frf.points.is_empty(), "empty frequency response");
    let mut best = (frf.points[0].omega, f64::NEG_INFINITY);
    for p in &frf.points {
        let a = periodic_peak_amplitude(&p.coeffs, dof);
        if a > best.1 {
            best = (p.omega, a);
        }
    }
    best
}

fn model_at_omega(model: &SystemModel, omega: f64, mode: PreloadMode) -> Result<SystemModel> {
    match mode {
        PreloadMode::Fixed => Ok(model.clone()),
        PreloadMode::SpeedDependent => {
            let scale = model.speed_preload_scale(omega)?;
            Ok(model.scaled_preload(scale))
        }
    }
}

/// Ramp the excitation level up to its target when the stuck-linear
/// initial guess is too far from the strongly slipping solution.
fn first_point_homotopy(
    model: &SystemModel,
    omega: f64,
    opts: &HbmOptions,
) -> Result<HarmonicSolution> {
    let mut x = linear_stuck_solution(model, omega, opts.n_h)?.to_real_vector();
    let mut sol = None;
    for factor in [0.02, 0.1, 0.3, 0.6, 1.0] {
        let mut scaled = model.clone();
        scaled.excitation.level *= factor;
        let ctx = HbmContext::new(&scaled, opts.n_h, opts.n_t);
        let guess = if sol.is_none() { &x * factor } else { x.clone() };
        let s = newton_solve(&ctx, guess, omega, opts.tol, opts.max_iter)?;
        x = s.coeffs.to_real_vector();
        sol = Some(s);
    }
    Ok(sol.unwrap())
}

/// Trace the forced response over `omega_range` by predictor-corrector
/// continuation. Reports the last good point inside the failure when the
/// trace cannot be completed.
pub fn solve_frf(
    model: &SystemModel,
    omega_range: (f64, f64),
    opts: &HbmOptions,
) -> Result<FrequencyResponse> {
    let (omega_lo, omega_hi) = omega_range;
    if !(omega_hi > omega_lo) || omega_lo <= 0.0 {
        return Err(CoreError::InvalidConfig(format!(
            "bad frequency range [{omega_lo}, {omega_hi}]"
        )));
    }
    let span = omega_hi - omega_lo;
    let step0 = span / opts.target_points as f64;
    let min_step = span / 5000.0;
    let (start, end, dir) = match opts.sweep {
        SweepDirection::Up => (omega_lo, omega_hi, 1.0),
        SweepDirection::Down => (omega_hi, omega_lo, -1.0),
    };

    let mut points: Vec<HarmonicSolution> = Vec::new();
    let mut running_max = 0.0f64;

    let mut omega = start;
    let mut step = step0;
    let mut consecutive_failures = 0usize;
    loop {
        let local_model = model_at_omega(model, omega, opts.preload_mode)?;
        let ctx = HbmContext::new(&local_model, opts.n_h, opts.n_t);
        // Predictor: secant through the last two points, else stuck linear.
        let x0 = match points.len() {
            0 => linear_stuck_solution(&local_model, omega, opts.n_h)?.to_real_vector(),
            1 => points[0].coeffs.to_real_vector(),
            _ => {
                let xa = points[points.len() - 2].coeffs.to_real_vector();
                let xb = points[points.len() - 1].coeffs.to_real_vector();
                let da = points[points.len() - 1].omega - points[points.len() - 2].omega;
                let ratio = if da.abs() > 0.0 {
                    (omega - points[points.len() - 1].omega) / da
                } else {
                    0.0
                };
                &xb + (&xb - &xa) * ratio
            }
        };
        match newton_solve(&ctx, x0, omega, opts.tol, opts.max_iter) {
            Ok(sol) => {
                let a = periodic_peak_amplitude(&sol.coeffs, model.excitation.response_dof);
                let last_a = points
                    .last()
                    .map(|p| periodic_peak_amplitude(&p.coeffs, model.excitation.response_dof));
                let too_steep = match last_a {
                    Some(prev) => {
                        (a - prev).abs() > opts.max_amplitude_step * running_max.max(a)
                            && step > min_step * 2.0
                    }
                    None => false,
                };
                if too_steep {
                    // re-approach with a finer step for peak resolution
                    omega -= dir * step;
                    step *= 0.5;
                    omega += dir * step;
                    continue;
                }
                running_max = running_max.max(a);
                points.push(sol);
                consecutive_failures = 0;
                if dir * (end - omega) <= 1e-12 * span {
                    break;
                }
                step = (step * 1.3).min(step0);
                omega += dir * step;
                if dir * (omega - end) > 0.0 {
                    omega = end;
                }
            }
            Err(e) => {
                if points.is_empty() {
                    // level homotopy rescues strongly slipping sweep starts
                    match first_point_homotopy(&local_model, omega, opts) {
                        Ok(sol) => {
                            running_max =
                                periodic_peak_amplitude(&sol.coeffs, model.excitation.response_dof);
                            points.push(sol);
                            consecutive_failures = 0;
                            if dir * (end - omega) <= 1e-12 * span {
                                break;
                            }
                            omega += dir * step;
                            if dir * (omega - end) > 0.0 {
                                omega = end;
                            }
                            continue;
                        }
                        Err(_) => return Err(e),
                    }
                }
                consecutive_failures += 1;
                if step <= min_step || consecutive_failures > 40 {
                    if points.is_empty() {
                        return Err(e);
                    }
                    let last_amp = periodic_peak_amplitude(
                        &points.last().unwrap().coeffs,
                        model.excitation.response_dof,
                    );
                    let peak_interior = last_amp < 0.95 * running_max;
                    if opts.allow_partial && peak_interior {
                        break;
                    }
                    return Err(CoreError::NoConvergence {
                        context: format!(
                            "continuation stalled at omega = {omega:.6e}; last good point {:.6e}",
                            points.last().unwrap().omega
                        ),
                        residual: f64::NAN,
                        iterations: consecutive_failures,
                    });
                }
                omega -= dir * step;
                step = (step * 0.5).max(min_step);
                omega += dir * step;
            }
        }
    }
    points.sort_by(|a, b| a.omega.total_cmp(&b.omega));

    // Parabolic polish around the discrete peak.
    for _ in 0..opts.refine_peak {
        if points.len() < 3 {
            break;
        }
        let amps: Vec<f64> = points
            .iter()
            .map(|p| periodic_peak_amplitude(&p.coeffs, model.excitation.response_dof))
            .collect();
        let k = amps
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        if k == 0 || k + 1 == points.len() {
            break;
        }
        let (w0, w1, w2) = (points[k - 1].omega, points[k].omega, points[k + 1].omega);
        let (a0, a1, a2) = (amps[k - 1], amps[k], amps[k + 1]);
        // vertex of the parabola through the three (omega, a) samples
        let denom = a0 * (w1 - w2) + a1 * (w2 - w0) + a2 * (w0 - w1);
        if denom.abs() < 1e-300 {
            break;
        }
        let w_star = 0.5
            * (a0 * (w1 * w1 - w2 * w2) + a1 * (w2 * w2 - w0 * w0) + a2 * (w0 * w0 - w1 * w1))
            / denom;
        if !w_star.is_finite() || w_star <= w0 || w_star >= w2 {
            break;
        }
        if points.iter().any(|p| (p.omega - w_star).abs() < 1e-9 * span) {
            break;
        }
        let local_model = model_at_omega(model, w_star, opts.preload_mode)?;
        let ctx = HbmContext::new(&local_model, opts.n_h, opts.n_t);
        let x0 = points[k].coeffs.to_real_vector();
        if let Ok(sol) = newton_solve(&ctx, x0, w_star, opts.tol, opts.max_iter) {
            let pos = points.partition_point(|p| p.omega < w_star);
            points.insert(pos, sol);
        } else {
            break;
        }
    }

    Ok(FrequencyResponse {
        points,
        response_dof: model.excitation.response_dof,
    })
}

/// Fully stuck check: true when no patch slipped or lifted off at the
/// solution (used by validation code).
pub fn solution_fully_stuck(model: &SystemModel, sol: &HarmonicSolution, n_t: usize) -> bool {
    let grid = SampleGrid::new(sol.coeffs.n_harmonics(), n_t);
    model.contacts.iter().all(|elem| {
        let rel = PatchCoeffs {
            normal: elem.normal.eval_coeffs(&sol.coeffs),
            tangential: elem.tangential.eval_coeffs(&sol.coeffs),
        };
        match aft_patch_forces(elem, &rel, &grid) {
            Ok((_, cycle)) => cycle.regimes.iter().all(|r| *r == Regime::Stick),
            Err(_) => false,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{assemble_system, ModelConfig};
    use approx::assert_relative_eq;

    fn desk_config() -> ModelConfig {
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
            "excitation": { "force_tip": 30.0, "level": 1.0 }
        }))
        .unwrap()
    }

    #[test]
    fn trivial_equilibrium_zero_residual() {
        let mut config = desk_config();
        config.excitation.level = 0.0;
        let model = assemble_system(&config).unwrap();
        let x = DVector::zeros(model.n_dof() * (2 * 3 + 1));
        let r = hbm_residual(&x, 1500.0, &model).unwrap();
        // zero up to rounding of the preload force summation
        let scale = model.static_load_vector().amax();
        assert!(r.amax() <= 1e-13 * scale, "residual {:.3e}", r.amax());
    }

    #[test]
    fn stuck_linear_solution_satisfies_residual() {
        // Preload high enough that the contacts never slip or open.
        let mut config = desk_config();
        config.damper.as_mut().unwrap().ref_speed = 8500.0; // 100x preload
        let model = assemble_system(&config).unwrap();
        let n_h = 5;
        let omega = 1500.0;
        let coeffs = linear_stuck_solution(&model, omega, n_h).unwrap();
        let ctx = HbmContext::new(&model, n_h, 64);
        let (r, scale) = ctx.residual(&coeffs.to_real_vector(), omega).unwrap();
        assert!(
            r.amax() <= 1e-10 * scale,
            "residual {:.3e} vs scale {:.3e}",
            r.amax(),
            scale
        );
    }

    #[test]
    fn residual_scales_with_nu() {
        let model = assemble_system(&desk_config()).unwrap();
        let n_h = 5;
        let omega = 1600.0;
        // a generic (non-converged) state exercises the nonlinear terms
        let coeffs = linear_stuck_solution(&model, omega, n_h)
            .unwrap()
            .scaled(40.0);
        let x = coeffs.to_real_vector();
        let ctx = HbmContext::new(&model, n_h, 64);
        let (r1, _) = ctx.residual(&x, omega).unwrap();

        let nu = 2.0;
        let mut scaled = model.scaled_preload(nu);
        scaled.excitation.level *= nu;
        let ctx2 = HbmContext::new(&scaled, n_h, 64);
        let (r2, _) = ctx2.residual(&(&x * nu), omega).unwrap();
        let scale = r1.amax() * nu;
        assert!((&r2 - &r1 * nu).amax() <= 1e-12 * scale);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut config = desk_config();
        config.sectors = 3;
        config.engine_order = 1;
        let model = assemble_system(&config).unwrap();
        let n_h = 3;
        let omega = 1600.0;
        let ctx = HbmContext::new(&model, n_h, 64);
        // operating point with active nonlinearity
        let coeffs = linear_stuck_solution(&model, omega, n_h)
            .unwrap()
            .scaled(30.0);
        let x = coeffs.to_real_vector();
        let jac = ctx.jacobian(&x, omega).unwrap();

        let (r0, _) = ctx.residual(&x, omega).unwrap();
        let scale = jac.amax();
        let h = 1e-7 * x.amax().max(1e-9);
        for probe in [0usize, 7, x.len() / 2, x.len() - 3] {
            let mut xp = x.clone();
            xp[probe] += h;
            let (rp, _) = ctx.residual(&xp, omega).unwrap();
            let fd = (&rp - &r0) / h;
            for i in 0..x.len() {
                let diff = (jac[(i, probe)] - fd[i]).abs();
                assert!(
                    diff <= 5e-4 * scale,
                    "J[{i},{probe}] = {} vs fd {}",
                    jac[(i, probe)],
                    fd[i]
                );
            }
        }
    }

    #[test]
    fn linear_frf_peak_matches_analytic() {
        let mut config = desk_config();
        config.damper = None;
        let model = assemble_system(&config).unwrap();
        // analytic peak by dense scan of the linear FRF
        let modal = model.stuck_cyclic_modes(2).unwrap();
        let w0 = modal.frequencies[0];
        let mut best = (0.0, 0.0f64);
        let n_scan = 4000;
        for i in 0..=n_scan {
            let w = w0 * (0.97 + 0.06 * i as f64 / n_scan as f64);
            let u = linear_stuck_solution(&model, w, 1).unwrap();
            let a = u.get(1, model.excitation.response_dof).norm();
            if a > best.1 {
                best = (w, a);
            }
        }

        let opts = HbmOptions {
            n_h: 1,
            n_t: 16,
            target_points: 40,
            ..HbmOptions::default()
        };
        let frf = solve_frf(&model, (0.97 * w0, 1.03 * w0), &opts).unwrap();
        let (w_res, a_res) = max_response(&frf, model.excitation.response_dof);
        assert_relative_eq!(a_res, best.1, max_relative = 0.005);
        assert_relative_eq!(w_res, best.0, max_relative = 0.005);
    }

    #[test]
    fn pure_sinusoid_amplitude_is_coefficient_magnitude() {
        let mut coeffs = HarmonicCoeffs::zeros(1, 3);
        coeffs.set(1, 0, Complex64::new(3.0, -4.0)); // magnitude 5
        assert_relative_eq!(periodic_peak_amplitude(&coeffs, 0), 5.0, epsilon = 1e-9);
        // a DC offset does not change the vibration amplitude
        coeffs.set(0, 0, Complex64::new(2.0, 0.0));
        assert_relative_eq!(periodic_peak_amplitude(&coeffs, 0), 5.0, epsilon = 1e-9);
    }

    #[test]
    fn stuck_limit_recovers_linear_frf() {
        let mut config = desk_config();
        config.damper.as_mut().unwrap().ref_speed = 8500.0;
        let model = assemble_system(&config).unwrap();
        let modal = model.stuck_cyclic_modes(2).unwrap();
        let w0 = modal.frequencies[0];
        let opts = HbmOptions {
            n_h: 5,
            target_points: 25,
            refine_peak: 0,
            ..HbmOptions::default()
        };
        let frf = solve_frf(&model, (0.98 * w0, 1.02 * w0), &opts).unwrap();
        for p in frf.points.iter().step_by(5) {
            assert!(solution_fully_stuck(&model, p, 128));
            let lin = linear_stuck_solution(&model, p.omega, 5).unwrap();
            let a_lin = periodic_peak_amplitude(&lin, model.excitation.response_dof);
            let a = periodic_peak_amplitude(&p.coeffs, model.excitation.response_dof);
            assert_relative_eq!(a, a_lin, max_relative = 1e-6);
        }
    }
}
