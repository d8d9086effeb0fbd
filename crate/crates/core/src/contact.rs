//! Penalty contact laws and their harmonic-domain evaluation.
//!
//! Normal direction: unilateral spring with preload,
//! `p_n = (k_n u_n + p_0)_+`. Tangential direction: elastic Coulomb
//! (Jenkins) law with stick, slip and lift-off states. Harmonic force
//! coefficients are obtained by alternating frequency-time evaluation:
//! synthesize relative-displacement histories over one period, march the
//! hysteresis to a steady cycle, transform the pressures back.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::fourier::{HarmonicCoeffs, SampleGrid};

/// Sparse linear map from global DOFs to a scalar relative displacement.
#[derive(Debug, Clone, PartialEq)]
pub struct DofSelector {
    pub entries: Vec<(usize, f64)>,
}

impl DofSelector {
    pub fn new(entries: Vec<(usize, f64)>) -> Self {
        Self { entries }
    }

    pub fn eval(&self, u: &DVector<f64>) -> f64 {
        self.entries.iter().map(|&(d, c)| c * u[d]).sum()
    }

    /// Relative-displacement coefficients for every harmonic.
    pub fn eval_coeffs(&self, u: &HarmonicCoeffs) -> Vec<Complex64> {
        (0..=u.n_harmonics())
            .map(|n| {
                self.entries
                    .iter()
                    .map(|&(d, c)| u.get(n, d) * c)
                    .sum::<Complex64>()
            })
            .collect()
    }

    /// Scatter a scalar generalized force into the global vector.
    pub fn scatter(&self, value: f64, f: &mut DVector<f64>) {
        for &(d, c) in &self.entries {
            f[d] += c * value;
        }
    }

    pub fn max_dof(&self) -> usize {
        self.entries.iter().map(|&(d, _)| d).max().unwrap_or(0)
    }
}

/// One contact patch: penalty parameters plus the relative-displacement
/// selectors binding it to the assembled DOFs. Pressures act over
/// `area_weight` (node-to-node integration).
#[derive(Debug, Clone)]
pub struct ContactElement {
    /// Normal penalty stiffness (Pa/m).
    pub kn: f64,
    /// Tangential penalty stiffness (Pa/m).
    pub kt: f64,
    /// Friction coefficient.
    pub mu: f64,
    /// Initial normal pressure (Pa); negative values model clearance.
    pub p0: f64,
    /// Integration weight (m^2).
    pub area_weight: f64,
    pub normal: DofSelector,
    pub tangential: DofSelector,
}

impl ContactElement {
    pub fn validate(&self) -> Result<()> {
        if !(self.kn > 0.0) || !(self.kt > 0.0) {
            return Err(CoreError::InvalidConfig(format!(
                "contact stiffness must be positive (kn = {}, kt = {})",
                self.kn, self.kt
            )));
        }
        if self.mu < 0.0 {
            return Err(CoreError::InvalidConfig(format!(
                "friction coefficient must be non-negative (mu = {})",
                self.mu
            )));
        }
        if !(self.area_weight > 0.0) {
            return Err(CoreError::InvalidConfig(format!(
                "area weight must be positive ({})",
                self.area_weight
            )));
        }
        Ok(())
    }

    /// Fully stuck linearization: both penalty springs active.
    pub fn stuck_stiffness_into(&self, k: &mut DMatrix<f64>) {
        for (sel, stiff) in [(&self.normal, self.kn), (&self.tangential, self.kt)] {
            for &(di, ci) in &sel.entries {
                for &(dj, cj) in &sel.entries {
                    k[(di, dj)] += self.area_weight * stiff * ci * cj;
                }
            }
        }
    }

    /// Static contact force at the reference configuration (`u = 0`): the
    /// preload reaction that the static external load balances.
    pub fn reference_force_into(&self, f: &mut DVector<f64>) {
        self.normal
            .scatter(self.p0.max(0.0) * self.area_weight, f);
    }
}

/// Stick/slip/lift-off regime of a contact patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Stick,
    Slip,
    LiftOff,
}

/// Memory of the tangential law: the displacement/traction pair recorded
/// when the current stick phase began (updated continuously while slipping
/// or lifted off).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactState {
    pub regime: Regime,
    pub anchor_u: f64,
    pub anchor_p: f64,
}

impl ContactState {
    /// Virgin state: zero traction anchored at the reference configuration.
    pub fn virgin() -> Self {
        Self {
            regime: Regime::Stick,
            anchor_u: 0.0,
            anchor_p: 0.0,
        }
    }

    fn close_to(&self, other: &Self, scale: f64) -> bool {
        self.regime == other.regime
            && (self.anchor_u - other.anchor_u).abs() <= 1e-10 * scale.max(self.anchor_u.abs())
            && (self.anchor_p - other.anchor_p).abs()
                <= 1e-10 * scale.max(self.anchor_p.abs())
    }
}

/// Unilateral normal pressure `p_n = (k_n u_n + p_0)_+`.
#[inline]
pub fn normal_pressure(u_n: f64, elem: &ContactElement) -> f64 {
    (elem.kn * u_n + elem.p0).max(0.0)
}

/// One increment of the tangential law. `p_n` must come from
/// [`normal_pressure`] at the same instant. Returns the tangential
/// traction and the updated state.
///
/// The slip branch is the return map: the trial traction is clamped to
/// the Coulomb bound. During sustained sliding the resulting direction
/// coincides with the sliding velocity (the direction of the continuous
/// law); at the sampling level the return map stays continuous in its
/// inputs where a velocity-sign rule would jump at slip onsets. `du_t`
/// parameterizes the continuous law and is kept in the signature.
pub fn tangential_step(
    state: &ContactState,
    u_t: f64,
    du_t: f64,
    p_n: f64,
    elem: &ContactElement,
) -> (f64, ContactState) {
    let _ = du_t;
    if p_n <= 0.0 {
        return (
            0.0,
            ContactState {
                regime: Regime::LiftOff,
                anchor_u: u_t,
                anchor_p: 0.0,
            },
        );
    }
    let trial = elem.kt * (u_t - state.anchor_u) + state.anchor_p;
    let limit = elem.mu * p_n;
    if trial.abs() <= limit {
        return (
            trial,
            ContactState {
                regime: Regime::Stick,
                anchor_u: state.anchor_u,
                anchor_p: state.anchor_p,
            },
        );
    }
    let p_t = trial.clamp(-limit, limit);
    (
        p_t,
        ContactState {
            regime: Regime::Slip,
            anchor_u: u_t,
            anchor_p: p_t,
        },
    )
}

/// Last non-stick event seen while marching to the steady cycle. When the
/// steady cycle itself is fully stuck, this event pins its anchors (the
/// element "shook down" after transient slip), which matters for the
/// Jacobian.
#[derive(Debug, Clone, Copy)]
pub struct AnchorEvent {
    /// Sample index (period phase) of the event.
    pub sample: usize,
    pub regime: Regime,
    /// Slip direction sign; zero for lift-off.
    pub direction: f64,
}

/// Sampled pressures and regimes of one steady hysteresis cycle.
#[derive(Debug, Clone)]
pub struct PatchCycle {
    pub p_n: Vec<f64>,
    pub p_t: Vec<f64>,
    pub regimes: Vec<Regime>,
    pub anchor_event: Option<AnchorEvent>,
}

/// Patch-level relative displacement (or force) coefficients.
#[derive(Debug, Clone)]
pub struct PatchCoeffs {
    pub normal: Vec<Complex64>,
    pub tangential: Vec<Complex64>,
}

impl PatchCoeffs {
    pub fn zeros(n_h: usize) -> Self {
        Self {
            normal: vec![Complex64::new(0.0, 0.0); n_h + 1],
            tangential: vec![Complex64::new(0.0, 0.0); n_h + 1],
        }
    }
}

const MAX_MARCH_PERIODS: usize = 4;

/// March the hysteresis over repeated identical periods until the contact
/// state is period-periodic, then return the last cycle.
pub fn march_hysteresis(
    elem: &ContactElement,
    u_n: &[f64],
    u_t: &[f64],
    du_t: &[f64],
) -> Result<PatchCycle> {
    let n_t = u_n.len();
    let scale = u_t
        .iter()
        .map(|x| x.abs())
        .fold(elem.mu * elem.p0.abs() / elem.kt.max(1.0), f64::max)
        .max(1e-300);
    let mut state = ContactState::virgin();
    let mut cycle = PatchCycle {
        p_n: vec![0.0; n_t],
        p_t: vec![0.0; n_t],
        regimes: vec![Regime::Stick; n_t],
        anchor_event: None,
    };
    let mut residual = f64::INFINITY;
    for _period in 0..MAX_MARCH_PERIODS {
        let start = state;
        for k in 0..n_t {
            let pn = normal_pressure(u_n[k], elem);
            let (pt, next) = tangential_step(&state, u_t[k], du_t[k], pn, elem);
            cycle.p_n[k] = pn;
            cycle.p_t[k] = pt;
            cycle.regimes[k] = next.regime;
            if next.regime != Regime::Stick {
                cycle.anchor_event = Some(AnchorEvent {
                    sample: k,
                    regime: next.regime,
                    direction: if next.regime == Regime::Slip {
                        pt.signum()
                    } else {
                        0.0
                    },
                });
            }
            state = next;
        }
        residual = (state.anchor_u - start.anchor_u).abs() / scale
            + (state.anchor_p - start.anchor_p).abs() / (elem.kt * scale);
        if state.close_to(&start, scale) {
            return Ok(cycle);
        }
    }
    Err(CoreError::NonConvergentHysteresis {
        periods: MAX_MARCH_PERIODS,
        residual,
    })
}

/// AFT evaluation for one patch: relative-displacement coefficients in,
/// contact-force coefficients out (pressure times area weight, preload
/// included in the zeroth normal harmonic). Also returns the steady cycle
/// for Jacobian assembly and diagnostics.
pub fn aft_patch_forces(
    elem: &ContactElement,
    u: &PatchCoeffs,
    grid: &SampleGrid,
) -> Result<(PatchCoeffs, PatchCycle)> {
    let n_t = grid.n_t;
    let mut u_n = vec![0.0; n_t];
    let mut u_t = vec![0.0; n_t];
    let mut du_t = vec![0.0; n_t];
    grid.synthesize(&u.normal, &mut u_n);
    grid.synthesize(&u.tangential, &mut u_t);
    // Only the sign of the sliding velocity enters the law, so the
    // fundamental frequency can be normalized to one here.
    grid.synthesize_velocity(&u.tangential, 1.0, &mut du_t);

    let cycle = march_hysteresis(elem, &u_n, &u_t, &du_t)?;

    let mut forces = PatchCoeffs::zeros(grid.n_h);
    let scaled: Vec<f64> = cycle.p_n.iter().map(|p| p * elem.area_weight).collect();
    grid.analyze(&scaled, &mut forces.normal);
    let scaled: Vec<f64> = cycle.p_t.iter().map(|p| p * elem.area_weight).collect();
    grid.analyze(&scaled, &mut forces.tangential);
    Ok((forces, cycle))
}

/// Set-level AFT: evaluate every element of `elems` for its own
/// relative-displacement coefficients.
pub fn aft_forces(
    u: &[PatchCoeffs],
    elems: &[ContactElement],
    n_h: usize,
    n_t: usize,
) -> Result<Vec<PatchCoeffs>> {
    assert_eq!(u.len(), elems.len());
    let grid = SampleGrid::new(n_h, n_t);
    u.iter()
        .zip(elems.iter())
        .map(|(ui, elem)| aft_patch_forces(elem, ui, &grid).map(|(f, _)| f))
        .collect()
}

/// Derivatives of the patch force coefficients with respect to the patch
/// displacement coefficients (real-stacked: `[c0, Re c1, Im c1, ...]`).
#[derive(Debug, Clone)]
pub struct PatchJacobian {
    pub d_fn_d_un: DMatrix<f64>,
    pub d_ft_d_ut: DMatrix<f64>,
    pub d_ft_d_un: DMatrix<f64>,
}

fn synthesis_row(grid: &SampleGrid, k: usize, n_c: usize) -> Vec<f64> {
    let mut w = vec![0.0; n_c];
    w[0] = 1.0;
    for n in 1..=grid.n_h {
        w[2 * n - 1] = grid.cos(n, k);
        w[2 * n] = -grid.sin(n, k);
    }
    w
}

/// Analytic AFT Jacobian: differentiate the marching law along the steady
/// cycle with the regime sequence frozen.
pub fn aft_patch_jacobian(
    elem: &ContactElement,
    cycle: &PatchCycle,
    grid: &SampleGrid,
) -> PatchJacobian {
    let n_t = grid.n_t;
    let n_c = 2 * grid.n_h + 1;
    let w: Vec<Vec<f64>> = (0..n_t).map(|k| synthesis_row(grid, k, n_c)).collect();

    // Sample-space sensitivity rows of p_t w.r.t. the coefficient vectors.
    let mut g_ut = vec![vec![0.0; n_c]; n_t];
    let mut g_un = vec![vec![0.0; n_c]; n_t];

    let reset = cycle.regimes.iter().position(|r| *r != Regime::Stick);
    match reset {
        None => match cycle.anchor_event {
            None => {
                // Truly virgin stuck cycle: p_t(k) = kt u_t(k).
                for k in 0..n_t {
                    for c in 0..n_c {
                        g_ut[k][c] = elem.kt * w[k][c];
                    }
                }
            }
            Some(event) => {
                // Shakedown: the cycle sticks throughout, but its anchors
                // were pinned by the last transient event at sample `j`,
                // p_t(k) = kt (u_t(k) - u_t(j)) + p_t(j).
                let j = event.sample;
                for k in 0..n_t {
                    for c in 0..n_c {
                        g_ut[k][c] = elem.kt * (w[k][c] - w[j][c]);
                        if event.regime == Regime::Slip {
                            g_un[k][c] = event.direction * elem.mu * elem.kn * w[j][c];
                        }
                    }
                }
            }
        },
        Some(r) => {
            let emit = |k: usize, g_ut: &mut Vec<Vec<f64>>, g_un: &mut Vec<Vec<f64>>| {
                let prev = (k + n_t - 1) % n_t;
                match cycle.regimes[k] {
                    Regime::LiftOff => {
                        g_ut[k].iter_mut().for_each(|v| *v = 0.0);
                        g_un[k].iter_mut().for_each(|v| *v = 0.0);
                    }
                    Regime::Slip => {
                        let dir = cycle.p_t[k].signum();
                        for c in 0..n_c {
                            g_ut[k][c] = 0.0;
                            g_un[k][c] = dir * elem.mu * elem.kn * w[k][c];
                        }
                    }
                    Regime::Stick => {
                        for c in 0..n_c {
                            g_ut[k][c] = g_ut[prev][c] + elem.kt * (w[k][c] - w[prev][c]);
                            g_un[k][c] = g_un[prev][c];
                        }
                    }
                }
            };
            // The reset sample is memoryless, so one wrap-around pass
            // starting there is exact.
            emit(r, &mut g_ut, &mut g_un);
            for off in 1..n_t {
                emit((r + off) % n_t, &mut g_ut, &mut g_un);
            }
        }
    }

    // Normal law is instantaneous: dp_n(k)/du_n(k) = kn when in contact.
    let mut d_fn_d_un = DMatrix::zeros(n_c, n_c);
    let mut d_ft_d_ut = DMatrix::zeros(n_c, n_c);
    let mut d_ft_d_un = DMatrix::zeros(n_c, n_c);
    let inv = 1.0 / n_t as f64;
    for k in 0..n_t {
        let active = if cycle.p_n[k] > 0.0 { elem.kn } else { 0.0 };
        for row in 0..n_c {
            // Analysis weights mirror `SampleGrid::analyze`.
            let a = if row == 0 {
                inv
            } else if row % 2 == 1 {
                2.0 * grid.cos(row.div_ceil(2), k) * inv
            } else {
                -2.0 * grid.sin(row / 2, k) * inv
            };
            let aw = a * elem.area_weight;
            if active != 0.0 {
                for c in 0..n_c {
                    d_fn_d_un[(row, c)] += aw * active * w[k][c];
                }
            }
            for c in 0..n_c {
                d_ft_d_ut[(row, c)] += aw * g_ut[k][c];
                d_ft_d_un[(row, c)] += aw * g_un[k][c];
            }
        }
    }
    PatchJacobian {
        d_fn_d_un,
        d_ft_d_ut,
        d_ft_d_un,
    }
}

/// Finite-difference fallback for the patch Jacobian.
pub fn aft_patch_jacobian_fd(
    elem: &ContactElement,
    u: &PatchCoeffs,
    grid: &SampleGrid,
    step: f64,
) -> Result<PatchJacobian> {
    let n_c = 2 * grid.n_h + 1;
    let pack = |coeffs: &[Complex64]| {
        let mut v = vec![0.0; n_c];
        v[0] = coeffs[0].re;
        for n in 1..=grid.n_h {
            v[2 * n - 1] = coeffs[n].re;
            v[2 * n] = coeffs[n].im;
        }
        v
    };
    let unpack = |v: &[f64]| {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.n_h + 1];
        coeffs[0] = Complex64::new(v[0], 0.0);
        for n in 1..=grid.n_h {
            coeffs[n] = Complex64::new(v[2 * n - 1], v[2 * n]);
        }
        coeffs
    };
    let eval = |un: &[f64], ut: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        let coeffs = PatchCoeffs {
            normal: unpack(un),
            tangential: unpack(ut),
        };
        let (f, _) = aft_patch_forces(elem, &coeffs, grid)?;
        Ok((pack(&f.normal), pack(&f.tangential)))
    };

    let un0 = pack(&u.normal);
    let ut0 = pack(&u.tangential);
    let mut d_fn_d_un = DMatrix::zeros(n_c, n_c);
    let mut d_ft_d_ut = DMatrix::zeros(n_c, n_c);
    let mut d_ft_d_un = DMatrix::zeros(n_c, n_c);
    for c in 0..n_c {
        let mut up = un0.clone();
        let mut dn = un0.clone();
        up[c] += step;
        dn[c] -= step;
        let (fn_p, ft_p) = eval(&up, &ut0)?;
        let (fn_m, ft_m) = eval(&dn, &ut0)?;
        for r in 0..n_c {
            d_fn_d_un[(r, c)] = (fn_p[r] - fn_m[r]) / (2.0 * step);
            d_ft_d_un[(r, c)] = (ft_p[r] - ft_m[r]) / (2.0 * step);
        }
        let mut up = ut0.clone();
        let mut dn = ut0.clone();
        up[c] += step;
        dn[c] -= step;
        let (_, ft_p) = eval(&un0, &up)?;
        let (_, ft_m) = eval(&un0, &dn)?;
        for r in 0..n_c {
            d_ft_d_ut[(r, c)] = (ft_p[r] - ft_m[r]) / (2.0 * step);
        }
    }
    Ok(PatchJacobian {
        d_fn_d_un,
        d_ft_d_ut,
        d_ft_d_un,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn test_element(mu: f64, p0: f64) -> ContactElement {
        ContactElement {
            kn: 2.0e6,
            kt: 1.0e6,
            mu,
            p0,
            area_weight: 1.0,
            normal: DofSelector::new(vec![(0, 1.0)]),
            tangential: DofSelector::new(vec![(1, 1.0)]),
        }
    }

    #[test]
    fn normal_pressure_clamps_at_zero() {
        let mut e = test_element(0.3, 1.0);
        e.kn = 2.0;
        assert_eq!(normal_pressure(-1.0, &e), 0.0);
        assert_eq!(normal_pressure(0.0, &e), 1.0);
        assert_eq!(normal_pressure(0.5, &e), 2.0);
    }

    #[test]
    fn normal_pressure_scale_invariant() {
        let mut e = test_element(0.3, 1.0);
        e.kn = 2.0;
        let nu = 3.0;
        let mut scaled = e.clone();
        scaled.p0 *= nu;
        for u in [-0.6, -0.2, 0.0, 0.4] {
            assert_eq!(
                normal_pressure(nu * u, &scaled),
                nu * normal_pressure(u, &e)
            );
        }
    }

    #[test]
    fn tangential_liftoff_zeroes_traction() {
        let e = test_element(0.3, 1.0e5);
        let s = ContactState::virgin();
        let (p_t, next) = tangential_step(&s, 0.7, 0.1, 0.0, &e);
        assert_eq!(p_t, 0.0);
        assert_eq!(next.regime, Regime::LiftOff);
        assert_eq!(next.anchor_p, 0.0);
    }

    #[test]
    fn tangential_virgin_stick_is_elastic() {
        let e = test_element(0.3, 1.0e5);
        let s = ContactState::virgin();
        let p_n = e.p0;
        let u_t = 0.5 * e.mu * p_n / e.kt;
        let (p_t, next) = tangential_step(&s, u_t, 1.0, p_n, &e);
        assert_relative_eq!(p_t, e.kt * u_t, epsilon = 1e-12);
        assert_eq!(next.regime, Regime::Stick);
    }

    /// Oracle: for a monotone ramp from the virgin state under constant
    /// normal pressure, the Jenkins element responds with
    /// `p_t(u) = min(kt u, mu p_n)` in closed form.
    #[test]
    fn tangential_ramp_saturates_at_coulomb_limit() {
        let e = test_element(0.3, 2.0e5);
        let p_n = e.p0;
        let u_slip = e.mu * p_n / e.kt; // 0.06
        let mut state = ContactState::virgin();
        let n_steps = 400;
        let u_final = 5.0 * u_slip;
        let mut prev_u = 0.0;
        for k in 1..=n_steps {
            let u = u_final * k as f64 / n_steps as f64;
            let (p_t, next) = tangential_step(&state, u, u - prev_u, p_n, &e);
            let expected = (e.kt * u).min(e.mu * p_n);
            assert_relative_eq!(p_t, expected, max_relative = 1e-12);
            state = next;
            prev_u = u;
        }
        assert_eq!(state.regime, Regime::Slip);
    }

    fn patch_coeffs(n_h: usize, entries_n: &[(usize, f64, f64)], entries_t: &[(usize, f64, f64)]) -> PatchCoeffs {
        let mut u = PatchCoeffs::zeros(n_h);
        for &(n, re, im) in entries_n {
            u.normal[n] = Complex64::new(re, im);
        }
        for &(n, re, im) in entries_t {
            u.tangential[n] = Complex64::new(re, im);
        }
        u
    }

    #[test]
    fn aft_static_preloaded_contact() {
        let e = test_element(0.3, 5.0e4);
        let u = PatchCoeffs::zeros(5);
        let f = aft_forces(&[u], &[e.clone()], 5, 64).unwrap();
        let scale = e.p0 * e.area_weight;
        assert_relative_eq!(f[0].normal[0].re, scale, max_relative = 1e-13);
        for n in 1..=5 {
            assert!(f[0].normal[n].norm() < 1e-13 * scale);
        }
        for n in 0..=5 {
            assert!(f[0].tangential[n].norm() < 1e-13 * scale);
        }
    }

    #[test]
    fn aft_stuck_contact_is_linear() {
        let e = test_element(1.0e9, 1.0e8); // effectively no slip, no lift-off
        let n_h = 5;
        let u = patch_coeffs(
            n_h,
            &[(1, 1e-4, -2e-5), (3, 2e-5, 1e-5)],
            &[(0, 3e-5, 0.0), (1, -1e-4, 4e-5), (2, 1e-5, 1e-5)],
        );
        let f = aft_forces(&[u.clone()], &[e.clone()], n_h, 64).unwrap();
        // Fourier analysis rounds at the level of the dominant (preload)
        // signal magnitude.
        let scale = e.p0 * e.area_weight;
        // normal: kn * coeffs + p0 offset at DC
        assert_relative_eq!(
            f[0].normal[0].re,
            (e.kn * u.normal[0].re + e.p0) * e.area_weight,
            max_relative = 1e-12
        );
        for n in 1..=n_h {
            let expect = u.normal[n] * e.kn * e.area_weight;
            assert!((f[0].normal[n] - expect).norm() <= 1e-13 * scale);
        }
        // tangential: virgin anchors make the stuck response a plain spring
        for n in 0..=n_h {
            let expect = u.tangential[n] * e.kt * e.area_weight;
            let t_scale = (e.kt * 1e-4 * e.area_weight).max(expect.norm());
            assert!((f[0].tangential[n] - expect).norm() <= 1e-12 * t_scale);
        }
    }

    /// Exercises all three regimes; used by several property tests below.
    fn mixed_regime_case() -> (ContactElement, PatchCoeffs) {
        let e = test_element(0.3, 1.0e5);
        // Amplitudes chosen so the cycle features lift-off (normal swing
        // beyond p0/kn = 0.05), slip and re-stick phases.
        let u = patch_coeffs(
            7,
            &[(1, 0.04, 0.02), (2, 0.015, -0.01)],
            &[(1, 0.06, -0.03), (3, 0.01, 0.005)],
        );
        (e, u)
    }

    #[test]
    fn mixed_case_truly_mixes_regimes() {
        let (e, u) = mixed_regime_case();
        let grid = SampleGrid::new(7, 128);
        let (_, cycle) = aft_patch_forces(&e, &u, &grid).unwrap();
        assert!(cycle.regimes.contains(&Regime::Stick));
        assert!(cycle.regimes.contains(&Regime::Slip));
        assert!(cycle.regimes.contains(&Regime::LiftOff));
    }

    #[test]
    fn regime_flags_satisfy_complementarity() {
        let (e, u) = mixed_regime_case();
        let grid = SampleGrid::new(7, 128);
        let (_, cycle) = aft_patch_forces(&e, &u, &grid).unwrap();
        for k in 0..grid.n_t {
            match cycle.regimes[k] {
                Regime::Stick => {
                    assert!(cycle.p_t[k].abs() <= e.mu * cycle.p_n[k] * (1.0 + 1e-12))
                }
                Regime::Slip => assert_relative_eq!(
                    cycle.p_t[k].abs(),
                    e.mu * cycle.p_n[k],
                    max_relative = 1e-12
                ),
                Regime::LiftOff => {
                    assert_eq!(cycle.p_n[k], 0.0);
                    assert_eq!(cycle.p_t[k], 0.0);
                }
            }
        }
    }

    #[test]
    fn hysteresis_dissipates_over_steady_cycle() {
        let (e, u) = mixed_regime_case();
        let grid = SampleGrid::new(7, 128);
        let (_, cycle) = aft_patch_forces(&e, &u, &grid).unwrap();
        let mut u_t = vec![0.0; grid.n_t];
        grid.synthesize(&u.tangential, &mut u_t);
        let mut work = 0.0;
        for k in 0..grid.n_t {
            let prev = (k + grid.n_t - 1) % grid.n_t;
            work += cycle.p_t[k] * (u_t[k] - u_t[prev]);
        }
        let scale: f64 = cycle.p_t.iter().map(|p| p.abs()).fold(0.0, f64::max)
            * u_t.iter().map(|x| x.abs()).fold(0.0, f64::max);
        assert!(work >= -1e-10 * scale, "friction generated energy: {work}");
    }

    #[test]
    fn aft_jacobian_matches_finite_differences() {
        let (e, u) = mixed_regime_case();
        let grid = SampleGrid::new(7, 128);
        let (_, cycle) = aft_patch_forces(&e, &u, &grid).unwrap();
        let analytic = aft_patch_jacobian(&e, &cycle, &grid);
        let fd = aft_patch_jacobian_fd(&e, &u, &grid, 1e-7).unwrap();
        for (a, f, name) in [
            (&analytic.d_fn_d_un, &fd.d_fn_d_un, "fn/un"),
            (&analytic.d_ft_d_ut, &fd.d_ft_d_ut, "ft/ut"),
            (&analytic.d_ft_d_un, &fd.d_ft_d_un, "ft/un"),
        ] {
            let scale = a.amax().max(f.amax()).max(1.0);
            let diff = (a - f).amax() / scale;
            assert!(diff < 2e-4, "{name} mismatch {diff:.3e}");
        }
    }

    /// A biased tangential motion slips transiently from the virgin state,
    /// then shakes down to a fully stuck steady cycle with offset anchors.
    #[test]
    fn shakedown_jacobian_matches_finite_differences() {
        let e = test_element(0.3, 1.0e5); // limit = 3e4 Pa, kt = 1e6
        let u = patch_coeffs(5, &[], &[(0, 0.02, 0.0), (1, 0.02, 0.0)]);
        let grid = SampleGrid::new(5, 64);
        let (f, cycle) = aft_patch_forces(&e, &u, &grid).unwrap();
        assert!(cycle.regimes.iter().all(|r| *r == Regime::Stick));
        assert!(cycle.anchor_event.is_some(), "expected transient slip");
        // the shakedown offset shows up as a DC traction below kt * DC(u_t)
        assert!(f.tangential[0].re < e.kt * 0.02 * e.area_weight * 0.9);

        let analytic = aft_patch_jacobian(&e, &cycle, &grid);
        let fd = aft_patch_jacobian_fd(&e, &u, &grid, 1e-8).unwrap();
        for (a, f, name) in [
            (&analytic.d_ft_d_ut, &fd.d_ft_d_ut, "ft/ut"),
            (&analytic.d_ft_d_un, &fd.d_ft_d_un, "ft/un"),
        ] {
            let scale = a.amax().max(f.amax()).max(1.0);
            let diff = (a - f).amax() / scale;
            assert!(diff < 2e-4, "{name} mismatch {diff:.3e}");
        }
    }

    proptest! {
        /// Scale invariance of the force law, element-wise: scaling the
        /// displacement history and the preload by nu scales the force
        /// coefficients by nu.
        #[test]
        fn aft_scale_invariance(
            nu in prop_oneof![Just(0.5), Just(2.0), Just(10.0), 0.3f64..30.0],
            a_re in -0.05f64..0.05,
            a_im in -0.05f64..0.05,
            t_re in -0.08f64..0.08,
            t_im in -0.08f64..0.08,
            t3 in -0.02f64..0.02,
        ) {
            let e = test_element(0.3, 1.0e5);
            let u = patch_coeffs(5, &[(1, a_re, a_im)], &[(1, t_re, t_im), (3, t3, -t3)]);
            let mut u_scaled = u.clone();
            for c in u_scaled.normal.iter_mut().chain(u_scaled.tangential.iter_mut()) {
                *c *= nu;
            }
            let mut e_scaled = e.clone();
            e_scaled.p0 *= nu;

            let f_base = aft_forces(&[u], &[e], 5, 64).unwrap();
            let f_scaled = aft_forces(&[u_scaled], &[e_scaled], 5, 64).unwrap();
            let scale = f_base[0].normal.iter().chain(f_base[0].tangential.iter())
                .map(|c| c.norm()).fold(0.0, f64::max) * nu;
            for n in 0..=5 {
                prop_assert!((f_scaled[0].normal[n] - f_base[0].normal[n] * nu).norm() <= 1e-12 * scale);
                prop_assert!((f_scaled[0].tangential[n] - f_base[0].tangential[n] * nu).norm() <= 1e-12 * scale);
            }
        }

        /// The marched cycle never violates the Coulomb bound.
        #[test]
        fn coulomb_bound_holds(
            a1 in -0.06f64..0.06,
            t1 in -0.1f64..0.1,
            t2 in -0.03f64..0.03,
        ) {
            let e = test_element(0.3, 1.0e5);
            let u = patch_coeffs(5, &[(1, a1, -a1 * 0.4)], &[(1, t1, t1 * 0.2), (2, t2, 0.0)]);
            let grid = SampleGrid::new(5, 64);
            let (_, cycle) = aft_patch_forces(&e, &u, &grid).unwrap();
            for k in 0..grid.n_t {
                prop_assert!(cycle.p_t[k].abs() <= e.mu * cycle.p_n[k] * (1.0 + 1e-12) + 1e-30);
            }
        }
    }
}
