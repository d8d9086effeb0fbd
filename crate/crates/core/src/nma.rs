//! Nonlinear modal analysis: amplitude-dependent eigenfrequency, modal
//! damping ratio and periodic mode shapes of the friction-damped assembly.
//!
//! The solver seeks periodic motions of the surrogate system (no linear
//! damping, no forcing) that satisfy
//!
//! ```text
//! M u'' + K u + f_nl(u, u') - 2 delta omega M u' = 0
//! ```
//!
//! where the artificial negative mass-proportional damping balances the
//! friction dissipation so a periodic orbit exists. Unknowns per amplitude
//! level are the harmonic coefficients plus `(omega, delta)`, closed by an
//! amplitude constraint (maximum kinetic energy equals the target) and a
//! phase anchor.
//!
//! The tuned assembly responds in the traveling-wave symmetric regime, so
//! the solve is performed on one sector cell with inter-sector phase
//! `exp(i n EO 2 pi / N_s)` per harmonic. This removes the degeneracy of
//! the cyclic mode pairs; the expanded solution satisfies the full-assembly
//! equations, which the tests verify explicitly.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::contact::{aft_patch_forces, aft_patch_jacobian, ContactElement, PatchCoeffs};
use crate::error::{CoreError, Result};
use crate::fourier::{refined_periodic_max, HarmonicCoeffs, SampleGrid};
use crate::interp::CubicSpline;
use crate::model::{excitation_vector, SystemModel};

/// Amplitude-dependent modal properties of one nonlinear mode.
#[derive(Debug, Clone)]
pub struct ModalBackbone {
    /// Modal amplitude grid: maximum kinetic energy over one period (J).
    pub q: Vec<f64>,
    /// Eigenfrequency (rad/s) per grid point.
    pub omega: Vec<f64>,
    /// Modal damping ratio per grid point.
    pub delta: Vec<f64>,
    /// Full-assembly periodic motion at each grid point, normalized so its
    /// maximum kinetic energy equals `q`.
    pub motions: Vec<HarmonicCoeffs>,
    /// Modal coordinate magnitude `sqrt(U_1^H M U_1)` per grid point; the
    /// fundamental mode shape is `U_1 / gamma` (mass normalized).
    pub gamma: Vec<f64>,
    /// Projection of the unit-level excitation onto the mass-normalized
    /// fundamental mode shape.
    pub forcing_projection: Vec<Complex64>,
    /// Peak vibration amplitude of the response DOF per grid point.
    pub response_peak: Vec<f64>,
    /// Friction coefficient the backbone was computed for.
    pub mu: f64,
    /// Preload scale relative to the assembled reference preload.
    pub preload_scale: f64,
    pub mode_index: usize,
    pub n_h: usize,
    /// Global index of the performance DOF the peaks were extracted at.
    pub response_dof: usize,
    /// Mode-veering or clamping notes from the continuation.
    pub warnings: Vec<String>,
}

impl ModalBackbone {
    /// Complex eigenvalue `lambda = -delta omega + i omega sqrt(1 - delta^2)`.
    pub fn eigenvalue(&self, i: usize) -> Complex64 {
        let (w, d) = (self.omega[i], self.delta[i]);
        Complex64::new(-d * w, w * (1.0 - d * d).max(0.0).sqrt())
    }
}

#[derive(Debug, Clone)]
pub struct NmaOptions {
    pub n_t: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Warn when the modal assurance correlation between neighboring grid
    /// points drops below this value.
    pub mac_warning: f64,
}

impl Default for NmaOptions {
    fn default() -> Self {
        Self {
            n_t: 128,
            tol: 1e-8,
            max_iter: 40,
            mac_warning: 0.9,
        }
    }
}

/// Modal amplitude: maximum over one period of the total kinetic energy of
/// the reconstructed velocity signal.
pub fn modal_amplitude(coeffs: &HarmonicCoeffs, mass: &DMatrix<f64>, omega: f64) -> f64 {
    kinetic_energy_peak(coeffs, mass, omega).0
}

/// Kinetic energy of the reconstructed velocity signal at one phase.
fn kinetic_energy_at(
    coeffs: &HarmonicCoeffs,
    mass: &DMatrix<f64>,
    omega: f64,
    phi: f64,
) -> f64 {
    let n_dof = coeffs.n_dof();
    let mut v = DVector::zeros(n_dof);
    for d in 0..n_dof {
        v[d] = coeffs.sample_velocity_dof(d, phi, omega);
    }
    0.5 * (v.transpose() * mass * &v)[(0, 0)]
}

/// Kinetic-energy peak and the phase at which it occurs.
fn kinetic_energy_peak(coeffs: &HarmonicCoeffs, mass: &DMatrix<f64>, omega: f64) -> (f64, f64) {
    let (q, phi, _) = kinetic_energy_profile(coeffs, mass, omega);
    (q, phi)
}

/// Kinetic-energy peak, its phase, and the profile minimum (flatness
/// indicator).
fn kinetic_energy_profile(
    coeffs: &HarmonicCoeffs,
    mass: &DMatrix<f64>,
    omega: f64,
) -> (f64, f64, f64) {
    let n_dof = coeffs.n_dof();
    let n_h = coeffs.n_harmonics();
    let n_t = (16 * n_h.max(1)).next_power_of_two().max(64);
    let grid = SampleGrid::new(n_h, n_t);
    let mut velocities = vec![vec![0.0; n_t]; n_dof];
    let mut series = vec![Complex64::new(0.0, 0.0); n_h + 1];
    for d in 0..n_dof {
        for h in 0..=n_h {
            series[h] = coeffs.get(h, d);
        }
        grid.synthesize_velocity(&series, omega, &mut velocities[d]);
    }
    let mut ke = vec![0.0; n_t];
    let mut v = DVector::zeros(n_dof);
    for k in 0..n_t {
        for d in 0..n_dof {
            v[d] = velocities[d][k];
        }
        ke[k] = 0.5 * (v.transpose() * mass * &v)[(0, 0)];
    }
    let eval = |phi: f64| {
        let mut vv = DVector::zeros(n_dof);
        for d in 0..n_dof {
            vv[d] = coeffs.sample_velocity_dof(d, phi, omega);
        }
        0.5 * (vv.transpose() * mass * &vv)[(0, 0)]
    };
    // locate the sampled max, then refine
    let (mut k_max, mut best) = (0, f64::NEG_INFINITY);
    let mut q_min = f64::INFINITY;
    for (k, &val) in ke.iter().enumerate() {
        if val > best {
            best = val;
            k_max = k;
        }
        q_min = q_min.min(val);
    }
    let q = refined_periodic_max(&ke, eval);
    let phi_max = 2.0 * std::f64::consts::PI * k_max as f64 / n_t as f64;
    (q, phi_max, q_min)
}

/// Expand traveling-wave sector-cell coefficients to the full assembly:
/// harmonic `n` of sector `s` carries the phase `exp(i n s phi)`.
pub fn expand_traveling(
    cell: &HarmonicCoeffs,
    sectors: usize,
    phase_step: f64,
) -> HarmonicCoeffs {
    let n_c = cell.n_dof();
    let n_h = cell.n_harmonics();
    let mut full = HarmonicCoeffs::zeros(n_c * sectors, n_h);
    for s in 0..sectors {
        for n in 0..=n_h {
            let phase = Complex64::from_polar(1.0, n as f64 * phase_step * s as f64);
            for j in 0..n_c {
                full.set(n, s * n_c + j, cell.get(n, j) * phase);
            }
        }
    }
    full
}

/// Patch selector entry in the reduced cell space: `(cell dof, coefficient,
/// sector offset)`; higher harmonics of offset entries rotate by
/// `exp(i n offset phi)`.
#[derive(Debug, Clone)]
struct ReducedSelector {
    entries: Vec<(usize, f64, usize)>,
}

impl ReducedSelector {
    fn from_global(sel: &crate::contact::DofSelector, n_c: usize, sectors: usize) -> Self {
        let entries = sel
            .entries
            .iter()
            .map(|&(g, c)| {
                let sector = g / n_c;
                debug_assert!(sector < sectors);
                (g % n_c, c, sector)
            })
            .collect();
        Self { entries }
    }

    fn eval_coeffs(&self, u: &HarmonicCoeffs, phase_step: f64) -> Vec<Complex64> {
        (0..=u.n_harmonics())
            .map(|n| {
                self.entries
                    .iter()
                    .map(|&(j, c, off)| {
                        u.get(n, j)
                            * Complex64::from_polar(c, n as f64 * phase_step * off as f64)
                    })
                    .sum()
            })
            .collect()
    }

    /// Real-linear map from stacked reduced coefficients to the stacked
    /// scalar relative-displacement coefficients.
    fn to_matrix(&self, n_c: usize, n_h: usize, phase_step: f64) -> DMatrix<f64> {
        let n_rows = 2 * n_h + 1;
        let n_cols = n_c * (2 * n_h + 1);
        let mut t = DMatrix::zeros(n_rows, n_cols);
        for &(j, c, off) in &self.entries {
            t[(0, j)] += c;
            for n in 1..=n_h {
                let a = n as f64 * phase_step * off as f64;
                let (sin_a, cos_a) = a.sin_cos();
                let col_re = n_c * (2 * n - 1) + j;
                let col_im = n_c * (2 * n - 1) + n_c + j;
                t[(2 * n - 1, col_re)] += c * cos_a;
                t[(2 * n - 1, col_im)] -= c * sin_a;
                t[(2 * n, col_re)] += c * sin_a;
                t[(2 * n, col_im)] += c * cos_a;
            }
        }
        t
    }
}

struct ReducedPatch {
    elem: ContactElement,
    normal: ReducedSelector,
    tangential: ReducedSelector,
    t_normal: DMatrix<f64>,
    t_tangential: DMatrix<f64>,
}

/// Sector-cell formulation of the extended periodic-motion eigenproblem.
struct ReducedEpmc<'a> {
    model: &'a SystemModel,
    n_c: usize,
    n_h: usize,
    phase_step: f64,
    grid: SampleGrid,
    m0: DMatrix<f64>,
    k0: DMatrix<f64>,
    k1: DMatrix<f64>,
    f_static: DVector<f64>,
    patches: Vec<ReducedPatch>,
    anchor_dof: usize,
    q_target: f64,
    /// Phase at which the kinetic-energy amplitude constraint is
    /// evaluated; frozen during a Newton solve and relocated to the
    /// profile maximum between solves (keeps the constraint smooth).
    constraint_phase: f64,
}

impl<'a> ReducedEpmc<'a> {
    fn new(model: &'a SystemModel, n_h: usize, n_t: usize, anchor_dof: usize) -> Result<Self> {
        let layout = model.layout;
        if layout.sectors < 3 {
            return Err(CoreError::InvalidConfig(
                "modal analysis needs at least 3 sectors".into(),
            ));
        }
        let n_c = layout.cell_dofs;
        let phase_step = 2.0 * std::f64::consts::PI * model.excitation.engine_order as f64
            / layout.sectors as f64;
        let m0 = model.mass.view((0, 0), (n_c, n_c)).into_owned();
        let k0 = model.stiffness.view((0, 0), (n_c, n_c)).into_owned();
        let k1 = model.stiffness.view((0, n_c), (n_c, n_c)).into_owned();
        let f_static = model.static_load_vector().rows(0, n_c).into_owned();

        // Patches of damper 0 bind cell 0 and (through the right platform)
        // cell 1; every other damper is a phase-shifted copy.
        let mut patches = Vec::new();
        for elem in model.contacts.iter().take(2) {
            let normal = ReducedSelector::from_global(&elem.normal, n_c, layout.sectors);
            let tangential = ReducedSelector::from_global(&elem.tangential, n_c, layout.sectors);
            let t_normal = normal.to_matrix(n_c, n_h, phase_step);
            let t_tangential = tangential.to_matrix(n_c, n_h, phase_step);
            patches.push(ReducedPatch {
                elem: elem.clone(),
                normal,
                tangential,
                t_normal,
                t_tangential,
            });
        }
        Ok(Self {
            model,
            n_c,
            n_h,
            phase_step,
            grid: SampleGrid::new(n_h, n_t),
            m0,
            k0,
            k1,
            f_static,
            patches,
            anchor_dof,
            q_target: 0.0,
            constraint_phase: 0.0,
        })
    }

    fn n_red(&self) -> usize {
        self.n_c * (2 * self.n_h + 1)
    }

    /// Dynamic stiffness of harmonic `n` with the EPMC damping term.
    fn dynamic_stiffness(&self, n: usize, omega: f64, delta: f64) -> DMatrix<Complex64> {
        let nf = n as f64;
        let phase = Complex64::from_polar(1.0, nf * self.phase_step);
        let mut s = DMatrix::from_element(self.n_c, self.n_c, Complex64::new(0.0, 0.0));
        for i in 0..self.n_c {
            for j in 0..self.n_c {
                s[(i, j)] = Complex64::new(self.k0[(i, j)], 0.0)
                    + phase * self.k1[(i, j)]
                    + phase.conj() * self.k1[(j, i)]
                    + Complex64::new(
                        -(nf * omega).powi(2) * self.m0[(i, j)],
                        -2.0 * delta * nf * omega * omega * self.m0[(i, j)],
                    );
            }
        }
        s
    }

    fn unpack(&self, z: &DVector<f64>) -> (HarmonicCoeffs, f64, f64) {
        let x = z.rows(0, self.n_red()).into_owned();
        let u = HarmonicCoeffs::from_real_vector(&x, self.n_c, self.n_h);
        (u, z[self.n_red()], z[self.n_red() + 1])
    }

    /// Full extended residual; also returns the force scale of the dynamic
    /// rows for the convergence test.
    fn residual(&self, z: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
        let (u, omega, delta) = self.unpack(z);
        let n_c = self.n_c;

        let mut residual_c = Vec::with_capacity(self.n_h + 1);
        let mut scale = self.f_static.amax();
        for h in 0..=self.n_h {
            let s = self.dynamic_stiffness(h, omega, delta);
            let u_h = DVector::from_iterator(n_c, (0..n_c).map(|d| u.get(h, d)));
            let lin = &s * &u_h;
            let mut r = lin.clone();
            if h == 0 {
                for d in 0..n_c {
                    r[d] -= self.f_static[d];
                }
            }
            for d in 0..n_c {
                scale = scale.max(lin[d].norm());
            }
            residual_c.push(r);
        }
        for patch in &self.patches {
            let rel = PatchCoeffs {
                normal: patch.normal.eval_coeffs(&u, self.phase_step),
                tangential: patch.tangential.eval_coeffs(&u, self.phase_step),
            };
            let (f, _) = aft_patch_forces(&patch.elem, &rel, &self.grid)?;
            for h in 0..=self.n_h {
                for (sel, force) in [(&patch.normal, f.normal[h]), (&patch.tangential, f.tangential[h])]
                {
                    for &(j, c, off) in &sel.entries {
                        let phase = Complex64::from_polar(
                            c,
                            -(h as f64) * self.phase_step * off as f64,
                        );
                        residual_c[h][j] += phase * force;
                    }
                }
            }
        }

        let n_red = self.n_red();
        let mut r = DVector::zeros(n_red + 2);
        for d in 0..n_c {
            r[d] = residual_c[0][d].re;
        }
        for h in 1..=self.n_h {
            let base = n_c * (2 * h - 1);
            for d in 0..n_c {
                r[base + d] = residual_c[h][d].re;
                r[base + n_c + d] = residual_c[h][d].im;
            }
        }
        // amplitude constraint (kinetic energy at the frozen phase) and
        // phase anchor
        let full = expand_traveling(&u, self.model.layout.sectors, self.phase_step);
        let q = kinetic_energy_at(&full, &self.model.mass, omega, self.constraint_phase);
        r[n_red] = q - self.q_target;
        r[n_red + 1] = u.get(1, self.anchor_dof).im;
        Ok((r, scale.max(1e-300)))
    }

    fn jacobian(&self, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        let (u, omega, delta) = self.unpack(z);
        let n_c = self.n_c;
        let n_red = self.n_red();
        let mut jac = DMatrix::zeros(n_red + 2, n_red + 2);

        // linear blocks and the (omega, delta) columns
        let col_w = n_red;
        let col_d = n_red + 1;
        for h in 0..=self.n_h {
            let s = self.dynamic_stiffness(h, omega, delta);
            let nf = h as f64;
            let u_h = DVector::from_iterator(n_c, (0..n_c).map(|d| u.get(h, d)));
            let factor_w = Complex64::new(-2.0 * nf * nf * omega, -4.0 * delta * nf * omega);
            let factor_d = Complex64::new(0.0, -2.0 * nf * omega * omega);
            let m0_u = DVector::from_iterator(
                n_c,
                (0..n_c).map(|i| {
                    (0..n_c)
                        .map(|j| self.m0[(i, j)] * u_h[j])
                        .sum::<Complex64>()
                }),
            );
            let dw = &m0_u * factor_w;
            let dd = &m0_u * factor_d;
            if h == 0 {
                for i in 0..n_c {
                    for j in 0..n_c {
                        jac[(i, j)] = s[(i, j)].re;
                    }
                    jac[(i, col_w)] = dw[i].re;
                    jac[(i, col_d)] = dd[i].re;
                }
            } else {
                let base = n_c * (2 * h - 1);
                for i in 0..n_c {
                    for j in 0..n_c {
                        let c = s[(i, j)];
                        jac[(base + i, base + j)] = c.re;
                        jac[(base + i, base + n_c + j)] = -c.im;
                        jac[(base + n_c + i, base + j)] = c.im;
                        jac[(base + n_c + i, base + n_c + j)] = c.re;
                    }
                    jac[(base + i, col_w)] = dw[i].re;
                    jac[(base + n_c + i, col_w)] = dw[i].im;
                    jac[(base + i, col_d)] = dd[i].re;
                    jac[(base + n_c + i, col_d)] = dd[i].im;
                }
            }
        }

        // contact patches
        let n_sc = 2 * self.n_h + 1;
        for patch in &self.patches {
            let rel = PatchCoeffs {
                normal: patch.normal.eval_coeffs(&u, self.phase_step),
                tangential: patch.tangential.eval_coeffs(&u, self.phase_step),
            };
            let (_, cycle) = aft_patch_forces(&patch.elem, &rel, &self.grid)?;
            let pj = aft_patch_jacobian(&patch.elem, &cycle, &self.grid);
            for (t_out, mats) in [
                (&patch.t_normal, [Some(&pj.d_fn_d_un), None]),
                (
                    &patch.t_tangential,
                    [Some(&pj.d_ft_d_un), Some(&pj.d_ft_d_ut)],
                ),
            ] {
                for (t_in, mat) in [(&patch.t_normal, mats[0]), (&patch.t_tangential, mats[1])] {
                    let Some(mat) = mat else { continue };
                    // J += T_out^T * mat * T_in
                    let mt = mat * t_in;
                    for r in 0..n_sc {
                        for cc in 0..n_red {
                            let v = mt[(r, cc)];
                            if v == 0.0 {
                                continue;
                            }
                            for rr in 0..n_red {
                                let w = t_out[(r, rr)];
                                if w != 0.0 {
                                    jac[(rr, cc)] += w * v;
                                }
                            }
                        }
                    }
                }
            }
        }

        // Amplitude row: exact derivative of the kinetic energy at the
        // frozen constraint phase.
        let full = expand_traveling(&u, self.model.layout.sectors, self.phase_step);
        let phi_star = self.constraint_phase;
        let q = kinetic_energy_at(&full, &self.model.mass, omega, phi_star);
        let row = n_red;
        let sectors = self.model.layout.sectors;
        let n_dof = full.n_dof();
        let mut v_star = DVector::zeros(n_dof);
        for d in 0..n_dof {
            v_star[d] = full.sample_velocity_dof(d, phi_star, omega);
        }
        let mv = &self.model.mass * &v_star;
        for s in 0..sectors {
            for j in 0..n_c {
                let g = s * n_c + j;
                for n in 1..=self.n_h {
                    let a = n as f64 * (self.phase_step * s as f64 + phi_star);
                    let nf = n as f64;
                    let d_re = -nf * omega * a.sin();
                    let d_im = -nf * omega * a.cos();
                    let col_re = n_c * (2 * n - 1) + j;
                    let col_im = n_c * (2 * n - 1) + n_c + j;
                    jac[(row, col_re)] += mv[g] * d_re;
                    jac[(row, col_im)] += mv[g] * d_im;
                }
            }
        }
        jac[(row, col_w)] = 2.0 * q / omega;

        // anchor row
        jac[(n_red + 1, 2 * n_c + self.anchor_dof)] = 1.0;
        Ok(jac)
    }
}


impl<'a> ReducedEpmc<'a> {
    /// Phase-aligned linear-mode seed at amplitude level `q_target`.
    fn linear_seed(&self, omega_lin: f64, shape: &DVector<Complex64>, q_target: f64) -> DVector<f64> {
        let n_c = self.n_c;
        let anchor_phase = shape[self.anchor_dof].arg();
        let aligned: DVector<Complex64> = shape * Complex64::from_polar(1.0, -anchor_phase);
        let mut cell = HarmonicCoeffs::zeros(n_c, self.n_h);
        for j in 0..n_c {
            cell.set(1, j, aligned[j]);
        }
        let full = expand_traveling(&cell, self.model.layout.sectors, self.phase_step);
        let q_unit = modal_amplitude(&full, &self.model.mass, omega_lin);
        let x = cell.scaled((q_target / q_unit).sqrt()).to_real_vector();
        let mut z = DVector::zeros(self.n_red() + 2);
        z.rows_mut(0, self.n_red()).copy_from(&x);
        z[self.n_red()] = omega_lin;
        z
    }
}

fn refine_peak_phase(
    coeffs: &HarmonicCoeffs,
    mass: &DMatrix<f64>,
    omega: f64,
    phi0: f64,
) -> f64 {
    // golden-section polish of the kinetic-energy peak phase
    let ke = |phi: f64| {
        let n_dof = coeffs.n_dof();
        let mut v = DVector::zeros(n_dof);
        for d in 0..n_dof {
            v[d] = coeffs.sample_velocity_dof(d, phi, omega);
        }
        0.5 * (v.transpose() * mass * &v)[(0, 0)]
    };
    let h = 2.0 * std::f64::consts::PI / 64.0;
    let (mut a, mut b) = (phi0 - h, phi0 + h);
    let g = 0.618_033_988_749_895;
    let (mut x1, mut x2) = (b - g * (b - a), a + g * (b - a));
    let (mut f1, mut f2) = (ke(x1), ke(x2));
    for _ in 0..40 {
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = ke(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = ke(x2);
        }
    }
    0.5 * (a + b)
}

/// Modal assurance correlation of two complex shapes under the mass inner
/// product.
fn mac(a: &DVector<Complex64>, b: &DVector<Complex64>, mass: &DMatrix<f64>) -> f64 {
    let m = mass.map(|x| Complex64::new(x, 0.0));
    let num = (a.adjoint() * &m * b)[(0, 0)].norm_sqr();
    let da = (a.adjoint() * &m * a)[(0, 0)].re;
    let db = (b.adjoint() * &m * b)[(0, 0)].re;
    num / (da * db).max(1e-300)
}

/// Trace the nonlinear mode of the excited spatial-harmonic family along
/// an ascending amplitude grid. Damping and excitation of the passed model
/// are ignored (the modal surrogate has neither).
pub fn solve_backbone(
    model: &SystemModel,
    mode_index: usize,
    q_grid: &[f64],
    n_h: usize,
    opts: &NmaOptions,
) -> Result<ModalBackbone> {
    if q_grid.is_empty() || q_grid.windows(2).any(|w| w[1] <= w[0]) || q_grid[0] <= 0.0 {
        return Err(CoreError::InvalidConfig(
            "amplitude grid must be positive and ascending".into(),
        ));
    }
    let surrogate = model.modal_surrogate();
    let engine_order = surrogate.excitation.engine_order;
    let layout = surrogate.layout;
    let n_c = layout.cell_dofs;

    // linear stuck mode of the excited family initializes the continuation
    let stuck = surrogate.stuck_cyclic_modes(engine_order)?;
    if mode_index >= stuck.frequencies.len() {
        return Err(CoreError::InvalidConfig(format!(
            "mode index {mode_index} out of range ({} modes)",
            stuck.frequencies.len()
        )));
    }
    let omega_lin = stuck.frequencies[mode_index];
    let shape_red = &stuck.shapes[mode_index];
    let anchor_dof = (0..n_c)
        .max_by(|&i, &j| shape_red[i].norm().total_cmp(&shape_red[j].norm()))
        .unwrap();

    let mut epmc = ReducedEpmc::new(&surrogate, n_h, opts.n_t, anchor_dof)?;

    let mut backbone = ModalBackbone {
        q: Vec::new(),
        omega: Vec::new(),
        delta: Vec::new(),
        motions: Vec::new(),
        gamma: Vec::new(),
        forcing_projection: Vec::new(),
        response_peak: Vec::new(),
        mu: surrogate.contacts.first().map(|e| e.mu).unwrap_or(0.0),
        preload_scale: 1.0,
        mode_index,
        n_h,
        response_dof: surrogate.excitation.response_dof,
        warnings: Vec::new(),
    };

    let mut unit_excitation = surrogate.excitation.clone();
    unit_excitation.level = 1.0;
    let f_unit = excitation_vector(&unit_excitation, 1);

    let mut z = DVector::zeros(epmc.n_red() + 2);
    let mut prev_shape: Option<DVector<Complex64>> = None;
    for (gi, &q_target) in q_grid.iter().enumerate() {
        let attempt = if gi == 0 {
            // seed with the stuck mode scaled to the first amplitude level;
            // ramp up through sub-levels when the first level is already
            // nonlinear
            let q_seed = q_target * 1e-3;
            epmc.q_target = q_seed;
            let seed = epmc.linear_seed(omega_lin, shape_red, q_seed);
            solve_level(&mut epmc, seed, q_seed, opts)
                .and_then(|z0| continue_to(&mut epmc, &z0, q_seed, q_target, 6, opts))
        } else {
            continue_to(&mut epmc, &z, q_grid[gi - 1], q_target, 6, opts)
        };
        z = attempt.map_err(|e| match e {
            CoreError::NoConvergence {
                context,
                residual,
                iterations,
            } => CoreError::NoConvergence {
                context: format!(
                    "modal continuation at q = {q_target:.6e} (last converged q = {}): {context}",
                    backbone
                        .q
                        .last()
                        .map(|v| format!("{v:.6e}"))
                        .unwrap_or_else(|| "none".into())
                ),
                residual,
                iterations,
            },
            other => other,
        })?;

        let (u, omega, mut delta) = epmc.unpack(&z);
        if delta < 0.0 {
            if delta < -1e-8 {
                return Err(CoreError::NoConvergence {
                    context: format!("negative modal damping {delta:.3e} at q = {q_target:.3e}"),
                    residual: delta.abs(),
                    iterations: 0,
                });
            }
            delta = 0.0;
        }
        let full = expand_traveling(&u, layout.sectors, epmc.phase_step);
        let n_dof = full.n_dof();
        let u1 = DVector::from_iterator(n_dof, (0..n_dof).map(|d| full.get(1, d)));
        let m_c = surrogate.mass.map(|x| Complex64::new(x, 0.0));
        let gamma = (u1.adjoint() * &m_c * &u1)[(0, 0)].re.max(0.0).sqrt();

        if let Some(prev) = &prev_shape {
            let correlation = mac(prev, &u1, &surrogate.mass);
            if correlation < opts.mac_warning {
                backbone.warnings.push(format!(
                    "mode veering at q = {q_target:.3e}: MAC = {correlation:.3}"
                ));
            }
        }
        prev_shape = Some(u1.clone());

        let projection = (u1.adjoint() * &f_unit)[(0, 0)] / gamma;
        backbone.q.push(q_target);
        backbone.omega.push(omega);
        backbone.delta.push(delta);
        backbone.gamma.push(gamma);
        backbone.forcing_projection.push(projection);
        backbone
            .response_peak
            .push(crate::hbm::periodic_peak_amplitude(
                &full,
                surrogate.excitation.response_dof,
            ));
        backbone.motions.push(full);
    }
    Ok(backbone)
}

fn newton_epmc(
    epmc: &ReducedEpmc,
    z0: DVector<f64>,
    q_target: f64,
    opts: &NmaOptions,
) -> Result<DVector<f64>> {
    let n_red = epmc.n_red();
    let coeff_scale = |z: &DVector<f64>| z.rows(0, n_red).amax().max(1e-18);
    let converged = |r: &DVector<f64>, scale: f64, z: &DVector<f64>| {
        let dyn_ok = r.rows(0, n_red).amax() <= opts.tol * scale;
        let amp_ok = r[n_red].abs() <= opts.tol * q_target;
        let anchor_ok = r[n_red + 1].abs() <= opts.tol * coeff_scale(z);
        dyn_ok && amp_ok && anchor_ok
    };

    let mut z = z0;
    let (mut r, mut scale) = epmc.residual(&z)?;
    // Line-search metric with scales frozen at the start of the solve;
    // the convergence test below keeps the honest state-dependent scale.
    let scale_ref = scale;
    let coeff_ref = coeff_scale(&z);
    let merit = |r: &DVector<f64>| {
        r.rows(0, n_red).norm() / scale_ref
            + r[n_red].abs() / q_target
            + r[n_red + 1].abs() / coeff_ref
    };
    let mut m = merit(&r);
    for _ in 0..opts.max_iter {
        if converged(&r, scale, &z) {
            return Ok(z);
        }
        let jac = epmc.jacobian(&z)?;
        // Row/column equilibration: the rows mix forces, energies and a
        // displacement; the columns mix coefficients with (omega, delta).
        let n = jac.nrows();
        let mut row_scale = DVector::from_element(n, 1.0);
        for i in 0..n {
            let m_row = jac.row(i).amax();
            if m_row > 0.0 {
                row_scale[i] = 1.0 / m_row;
            }
        }
        let mut scaled = jac.clone();
        for i in 0..n {
            for j in 0..n {
                scaled[(i, j)] *= row_scale[i];
            }
        }
        let mut col_scale = DVector::from_element(n, 1.0);
        for j in 0..n {
            let m_col = scaled.column(j).amax();
            if m_col > 0.0 {
                col_scale[j] = 1.0 / m_col;
            }
        }
        for i in 0..n {
            for j in 0..n {
                scaled[(i, j)] *= col_scale[j];
            }
        }
        let rhs = DVector::from_iterator(n, (0..n).map(|i| -r[i] * row_scale[i]));
        let y = scaled
            .lu()
            .solve(&rhs)
            .ok_or_else(|| CoreError::Linalg("singular EPMC Jacobian".into()))?;
        let dz = DVector::from_iterator(n, (0..n).map(|i| y[i] * col_scale[i]));

        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..8 {
            let z_try = &z + &dz * lambda;
            if let Ok((r_try, s_try)) = epmc.residual(&z_try) {
                let m_try = merit(&r_try);
                if m_try < m * (1.0 - 1e-4 * lambda) {
                    z = z_try;
                    r = r_try;
                    scale = s_try;
                    m = m_try;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if converged(&r, scale, &z) {
        return Ok(z);
    }
    Err(CoreError::NoConvergence {
        context: format!(
            "EPMC Newton (dyn {:.2e}, amp {:.2e}, anchor {:.2e})",
            r.rows(0, n_red).amax() / scale,
            r[n_red].abs() / q_target,
            r[n_red + 1].abs() / coeff_scale(&z)
        ),
        residual: m,
        iterations: opts.max_iter,
    })
}

/// Solve one amplitude level: relocate the constraint phase to the
/// kinetic-energy maximum, run the Newton iteration with the phase frozen,
/// and repeat until the converged motion's true maximum matches the
/// target.
fn solve_level(
    epmc: &mut ReducedEpmc,
    z0: DVector<f64>,
    q_target: f64,
    opts: &NmaOptions,
) -> Result<DVector<f64>> {
    let mut z = z0;
    for _round in 0..6 {
        let (u, omega, _) = epmc.unpack(&z);
        let full = expand_traveling(&u, epmc.model.layout.sectors, epmc.phase_step);
        let (_, phi_coarse) = kinetic_energy_peak(&full, &epmc.model.mass, omega);
        epmc.constraint_phase =
            refine_peak_phase(&full, &epmc.model.mass, omega, phi_coarse);
        z = newton_epmc(epmc, z, q_target, opts)?;

        let (u, omega, _) = epmc.unpack(&z);
        let full = expand_traveling(&u, epmc.model.layout.sectors, epmc.phase_step);
        let q_max = modal_amplitude(&full, &epmc.model.mass, omega);
        if (q_max - q_target).abs() <= 10.0 * opts.tol * q_target {
            return Ok(z);
        }
    }
    Err(CoreError::NoConvergence {
        context: "constraint-phase relocation".into(),
        residual: f64::NAN,
        iterations: 6,
    })
}

/// Continue the solution from one converged amplitude level to the next,
/// recursively bisecting the step in log amplitude when Newton fails.
fn continue_to(
    epmc: &mut ReducedEpmc,
    z: &DVector<f64>,
    q_from: f64,
    q_to: f64,
    depth: usize,
    opts: &NmaOptions,
) -> Result<DVector<f64>> {
    let n_red = epmc.n_red();
    let mut z_try = z.clone();
    let rescale = (q_to / q_from).sqrt();
    for i in 0..n_red {
        z_try[i] *= rescale;
    }
    epmc.q_target = q_to;
    match solve_level(epmc, z_try, q_to, opts) {
        Ok(solution) => Ok(solution),
        Err(e) => {
            if depth == 0 {
                return Err(e);
            }
            let q_mid = (q_from * q_to).sqrt();
            let z_mid = continue_to(epmc, z, q_from, q_mid, depth - 1, opts)?;
            continue_to(epmc, &z_mid, q_mid, q_to, depth - 1, opts)
        }
    }
}

/// Default logarithmic amplitude grid spanning the fully stuck regime to
/// deep lift-off. The anchor is the slip-onset energy predicted from the
/// stuck linear mode: the grid starts two decades below it (so the stuck
/// limit is resolved) and ends four decades above (amplitudes two orders
/// past the onset, well into the quasi-linear lift-off regime).
pub fn default_q_grid(model: &SystemModel, mode_index: usize, points: usize) -> Result<Vec<f64>> {
    let q_slip = slip_onset_energy(model, mode_index)?;
    let (q_min, q_max) = (q_slip * 1e-2, q_slip * 1e4);
    let n = points.max(2);
    Ok((0..n)
        .map(|i| q_min * (q_max / q_min).powf(i as f64 / (n - 1) as f64))
        .collect())
}

/// Kinetic-energy level at which the first contact patch starts to slip,
/// estimated from the stuck linear mode of the excited spatial family.
pub fn slip_onset_energy(model: &SystemModel, mode_index: usize) -> Result<f64> {
    if model.contacts.is_empty() {
        return Err(CoreError::InvalidConfig(
            "amplitude grid needs contact elements".into(),
        ));
    }
    let engine_order = model.excitation.engine_order;
    let stuck = model.stuck_cyclic_modes(engine_order)?;
    if mode_index >= stuck.frequencies.len() {
        return Err(CoreError::InvalidConfig(format!(
            "mode index {mode_index} out of range"
        )));
    }
    let omega_lin = stuck.frequencies[mode_index];
    let shape = &stuck.shapes[mode_index];
    let n_c = model.layout.cell_dofs;
    let phase_step = 2.0 * std::f64::consts::PI * engine_order as f64
        / model.layout.sectors as f64;
    let mut cell = HarmonicCoeffs::zeros(n_c, 1);
    for j in 0..n_c {
        cell.set(1, j, shape[j]);
    }
    let full = expand_traveling(&cell, model.layout.sectors, phase_step);
    let ke_unit = modal_amplitude(&full, &model.mass, omega_lin);

    // smallest modal coordinate at which |kt u_t| reaches mu (p0 - kn |u_n|)
    let mut c_slip = f64::INFINITY;
    for elem in &model.contacts {
        let t_amp = elem.tangential.eval_coeffs(&full)[1].norm();
        let n_amp = elem.normal.eval_coeffs(&full)[1].norm();
        let demand = elem.kt * t_amp + elem.mu * elem.kn * n_amp;
        if demand > 0.0 && elem.mu > 0.0 && elem.p0 > 0.0 {
            c_slip = c_slip.min(elem.mu * elem.p0 / demand);
        }
    }
    if !c_slip.is_finite() {
        return Err(CoreError::InvalidConfig(
            "no slipping patch found; check friction parameters".into(),
        ));
    }
    Ok(ke_unit * c_slip * c_slip)
}

/// Backbone for a scaled preload `nu * p0`: amplitudes remap as `nu^2 q`,
/// motions scale linearly, eigenfrequency and damping carry over.
pub fn scale_backbone(b: &ModalBackbone, nu: f64) -> ModalBackbone {
    assert!(nu > 0.0, "preload scale must be positive");
    let mut out = b.clone();
    out.preload_scale = b.preload_scale * nu;
    for q in &mut out.q {
        *q *= nu * nu;
    }
    for m in &mut out.motions {
        m.scale(nu);
    }
    for g in &mut out.gamma {
        *g *= nu;
    }
    for p in &mut out.response_peak {
        *p *= nu;
    }
    // mass-normalized shapes are unchanged, so the projections carry over
    out
}

/// Family of backbones over friction-coefficient samples with cubic
/// interpolation of the modal quantities at a query coefficient.
pub struct MuBackboneFamily {
    pub mu_samples: Vec<f64>,
    pub backbones: Vec<ModalBackbone>,
}

impl MuBackboneFamily {
    pub fn new(mut entries: Vec<(f64, ModalBackbone)>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(CoreError::InvalidConfig(
                "friction interpolation needs at least 2 samples".into(),
            ));
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        let q0 = entries[0].1.q.clone();
        for (_, b) in &entries {
            if b.q.len() != q0.len()
                || b.q
                    .iter()
                    .zip(q0.iter())
                    .any(|(a, b)| (a - b).abs() > 1e-9 * b.abs())
            {
                return Err(CoreError::InvalidConfig(
                    "friction samples must share the amplitude grid".into(),
                ));
            }
        }
        Ok(Self {
            mu_samples: entries.iter().map(|(m, _)| *m).collect(),
            backbones: entries.into_iter().map(|(_, b)| b).collect(),
        })
    }

    pub fn mu_range(&self) -> (f64, f64) {
        (self.mu_samples[0], *self.mu_samples.last().unwrap())
    }

    fn check_range(&self, mu: f64) -> Result<()> {
        let (lo, hi) = self.mu_range();
        if mu < lo - 1e-12 || mu > hi + 1e-12 {
            return Err(CoreError::ExtrapolationRefused {
                value: mu,
                min: lo,
                max: hi,
            });
        }
        Ok(())
    }

    fn spline_at(&self, values: impl Fn(&ModalBackbone) -> f64) -> Result<CubicSpline> {
        CubicSpline::new(
            self.mu_samples.clone(),
            self.backbones.iter().map(values).collect(),
        )
    }

    /// Interpolated scalar backbone quantities at one grid index.
    fn interp_grid_point(&self, i: usize, mu: f64) -> Result<(f64, f64, f64, f64, Complex64)> {
        let omega = self.spline_at(|b| b.omega[i])?.eval(mu)?;
        let delta = self.spline_at(|b| b.delta[i])?.eval(mu)?.max(0.0);
        let gamma = self.spline_at(|b| b.gamma[i])?.eval(mu)?;
        let peak = self.spline_at(|b| b.response_peak[i])?.eval(mu)?;
        let proj = Complex64::new(
            self.spline_at(|b| b.forcing_projection[i].re)?.eval(mu)?,
            self.spline_at(|b| b.forcing_projection[i].im)?.eval(mu)?,
        );
        Ok((omega, delta, gamma, peak, proj))
    }

    /// Full interpolated backbone at `mu`, including component-wise
    /// interpolated and re-normalized periodic motions. Exact at samples.
    pub fn interpolate(&self, mu: f64, mass: &DMatrix<f64>) -> Result<ModalBackbone> {
        self.check_range(mu)?;
        if let Some(k) = self
            .mu_samples
            .iter()
            .position(|&m| (m - mu).abs() <= 1e-12 * m.abs().max(1.0))
        {
            return Ok(self.backbones[k].clone());
        }
        let template = &self.backbones[0];
        let n_grid = template.q.len();
        let mut out = template.clone();
        out.mu = mu;
        out.warnings.clear();
        for i in 0..n_grid {
            let (omega, delta, _gamma, _peak, proj) = self.interp_grid_point(i, mu)?;
            out.omega[i] = omega;
            out.delta[i] = delta;
            out.forcing_projection[i] = proj;
            // motions interpolated component-wise, then rescaled so the
            // kinetic-energy amplitude still equals q
            let mut motion = HarmonicCoeffs::zeros(
                template.motions[i].n_dof(),
                template.motions[i].n_harmonics(),
            );
            for h in 0..=template.n_h {
                for d in 0..motion.n_dof() {
                    let re = CubicSpline::new(
                        self.mu_samples.clone(),
                        self.backbones
                            .iter()
                            .map(|b| b.motions[i].get(h, d).re)
                            .collect(),
                    )?
                    .eval(mu)?;
                    let im = CubicSpline::new(
                        self.mu_samples.clone(),
                        self.backbones
                            .iter()
                            .map(|b| b.motions[i].get(h, d).im)
                            .collect(),
                    )?
                    .eval(mu)?;
                    motion.set(h, d, Complex64::new(re, im));
                }
            }
            let q_actual = modal_amplitude(&motion, mass, omega);
            if q_actual > 0.0 {
                motion.scale((out.q[i] / q_actual).sqrt());
            }
            let n_dof = motion.n_dof();
            let u1 = DVector::from_iterator(n_dof, (0..n_dof).map(|d| motion.get(1, d)));
            let m_c = mass.map(|x| Complex64::new(x, 0.0));
            out.gamma[i] = (u1.adjoint() * &m_c * &u1)[(0, 0)].re.max(0.0).sqrt();
            out.response_peak[i] =
                crate::hbm::periodic_peak_amplitude(&motion, template.response_dof);
            out.motions[i] = motion;
        }
        Ok(out)
    }
}

/// Compute backbones at every friction sample and interpolate the modal
/// quantities at `mu_query`.
pub fn sample_and_interpolate_mu(
    model: &SystemModel,
    mu_samples: &[f64],
    mu_query: f64,
    mode_index: usize,
    q_grid: &[f64],
    n_h: usize,
    opts: &NmaOptions,
) -> Result<ModalBackbone> {
    let mut entries = Vec::with_capacity(mu_samples.len());
    for &mu in mu_samples {
        let sampled = model.with_friction(mu);
        let backbone = solve_backbone(&sampled, mode_index, q_grid, n_h, opts)?;
        entries.push((mu, backbone));
    }
    let family = MuBackboneFamily::new(entries)?;
    family.interpolate(mu_query, &model.mass)
}
