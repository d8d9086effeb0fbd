//! Assembly of the desk-scale cyclic assembly with underplatform friction
//! dampers.
//!
//! Each sector carries three lumped masses in the circumferential
//! direction (blade tip, blade root, platform) chained by springs and
//! coupled to the neighboring sectors through the root. Between the
//! platforms of adjacent sectors sits a rigid damper mass with two DOFs
//! (circumferential `x`, radial `y`), pressed outward by the centrifugal
//! force and touching each platform through one contact patch with one
//! normal and one tangential direction. The wedge half-angle maps platform
//! and damper motion onto the patch directions.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::contact::{ContactElement, DofSelector};
use crate::error::{CoreError, Result};
use crate::linalg::{
    generalized_symmetric_eig, hermitian_generalized_eig, HermitianModalDecomposition,
    ModalDecomposition,
};

/// Declarative description of the assembly, read from the run
/// configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Number of identical sectors chained cyclically.
    pub sectors: usize,
    /// Spatial harmonic of the traveling-wave excitation.
    pub engine_order: usize,
    pub sector: SectorConfig,
    #[serde(default)]
    pub damper: Option<DamperConfig>,
    pub damping: DampingConfig,
    pub excitation: ExcitationConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorConfig {
    pub mass_tip: f64,
    pub mass_root: f64,
    pub mass_platform: f64,
    /// Root-tip bending spring (N/m).
    pub k_blade: f64,
    /// Root-hub spring (N/m).
    pub k_ground: f64,
    /// Root-platform spring (N/m).
    pub k_platform: f64,
    /// Root-root inter-sector coupling (N/m).
    pub k_coupling: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DamperConfig {
    /// Damper mass (kg); the design variable.
    pub mass: f64,
    /// Reference mass defining the preload scale `nu = 1`.
    pub mass_ref: f64,
    /// Distance from the rotation axis to the damper center of gravity (m).
    pub cg_radius: f64,
    /// Rotational speed at which the reference preload is computed (rad/s).
    pub ref_speed: f64,
    /// Normal penalty stiffness (Pa/m).
    pub kn: f64,
    /// Tangential penalty stiffness (Pa/m).
    pub kt: f64,
    /// Friction coefficient.
    pub mu: f64,
    /// Contact patch integration area (m^2).
    pub contact_area: f64,
    /// Wedge half-angle between the patch normal and the radial direction
    /// (degrees).
    pub wedge_angle_deg: f64,
    /// Fraction of the centrifugal force carried by each interface as
    /// normal force; `None` uses the symmetric wedge equilibrium
    /// `1 / (2 cos theta)`.
    #[serde(default)]
    pub split_factor: Option<f64>,
    /// Weak spring tying the damper DOFs to ground; regularizes the
    /// fully lifted-off state.
    #[serde(default = "default_retention")]
    pub k_retention: f64,
}

fn default_retention() -> f64 {
    0.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampingConfig {
    /// Hysteretic loss factor of the structure.
    pub eta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcitationConfig {
    /// Traveling-wave force amplitude applied at each blade tip (N).
    pub force_tip: f64,
    /// Excitation level multiplier (dimensionless).
    #[serde(default = "default_level")]
    pub level: f64,
}

fn default_level() -> f64 {
    1.0
}

/// Damper data retained on the assembled model for preload studies.
#[derive(Debug, Clone)]
pub struct DamperSpec {
    pub mass: f64,
    pub mass_ref: f64,
    pub cg_radius: f64,
    pub ref_speed: f64,
    pub split_factor: f64,
    pub contact_area: f64,
}

impl DamperSpec {
    /// Preload scaling `nu = (m / m_ref) (omega_r / omega_r_ref)^2`.
    pub fn preload_scale(&self, mass: f64, omega_r: f64) -> f64 {
        (mass / self.mass_ref) * (omega_r / self.ref_speed).powi(2)
    }
}

/// Normal preload per contact node (Pa) from the static wedge equilibrium
/// with the centrifugal force `m r_cg omega_r^2`. Defined through the
/// reference preload so that the scaling relation
/// `p0(m, omega) = nu * p0(m_ref, omega_ref)` holds exactly.
pub fn centrifugal_preload(damper: &DamperSpec, omega_r: f64) -> f64 {
    let p0_ref = damper.split_factor * damper.mass_ref * damper.cg_radius
        * damper.ref_speed.powi(2)
        / damper.contact_area;
    damper.preload_scale(damper.mass, omega_r) * p0_ref
}

/// Traveling-wave excitation description.
#[derive(Debug, Clone)]
pub struct ExcitationSpec {
    pub engine_order: usize,
    pub level: f64,
    /// Force pattern over one sector cell (N).
    pub sector_force: Vec<f64>,
    pub sector_count: usize,
    /// Global index of the performance DOF.
    pub response_dof: usize,
}

/// Complex force amplitudes of harmonic `n`; only the fundamental carries
/// force, with inter-sector phase `exp(i n EO 2 pi / N_s)`.
pub fn excitation_vector(spec: &ExcitationSpec, harmonic: usize) -> DVector<Complex64> {
    let cell = spec.sector_force.len();
    let n_dof = cell * spec.sector_count;
    let mut f = DVector::from_element(n_dof, Complex64::new(0.0, 0.0));
    if harmonic != 1 {
        return f;
    }
    let step = 2.0 * std::f64::consts::PI * (harmonic * spec.engine_order) as f64
        / spec.sector_count as f64;
    for s in 0..spec.sector_count {
        let phase = Complex64::from_polar(1.0, step * s as f64);
        for (j, &fj) in spec.sector_force.iter().enumerate() {
            if fj != 0.0 {
                f[s * cell + j] = phase * (spec.level * fj);
            }
        }
    }
    f
}

/// DOF bookkeeping of the sector-major, block-circulant assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CyclicLayout {
    pub sectors: usize,
    pub cell_dofs: usize,
    pub has_damper: bool,
}

impl CyclicLayout {
    pub fn n_dof(&self) -> usize {
        self.sectors * self.cell_dofs
    }

    pub fn tip(&self, s: usize) -> usize {
        s * self.cell_dofs
    }

    pub fn root(&self, s: usize) -> usize {
        s * self.cell_dofs + 1
    }

    pub fn platform(&self, s: usize) -> usize {
        s * self.cell_dofs + 2
    }

    pub fn damper_x(&self, s: usize) -> usize {
        debug_assert!(self.has_damper);
        s * self.cell_dofs + 3
    }

    pub fn damper_y(&self, s: usize) -> usize {
        debug_assert!(self.has_damper);
        s * self.cell_dofs + 4
    }

    pub fn cell_dof_names(&self) -> Vec<&'static str> {
        if self.has_damper {
            vec!["tip", "root", "plat", "dmp_x", "dmp_y"]
        } else {
            vec!["tip", "root", "plat"]
        }
    }
}

/// Structural damping description of Eq.-(1)-type assemblies.
#[derive(Debug, Clone)]
pub enum DampingModel {
    /// Hysteretic loss factor, applied per harmonic as `i sign(n) eta K`.
    Hysteretic(f64),
    /// Explicit viscous matrix (N s/m).
    Viscous(DMatrix<f64>),
}

/// The assembled system of the equation of motion: structural matrices,
/// contact-element set and excitation. Immutable after assembly.
#[derive(Debug, Clone)]
pub struct SystemModel {
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    pub damping: DampingModel,
    pub contacts: Vec<ContactElement>,
    pub excitation: ExcitationSpec,
    pub dof_labels: Vec<String>,
    pub layout: CyclicLayout,
    pub damper: Option<DamperSpec>,
}

impl SystemModel {
    pub fn n_dof(&self) -> usize {
        self.layout.n_dof()
    }

    /// Static external load: the preload reaction integrated over the
    /// contacts (centrifugal seating forces). At the reference
    /// configuration it balances the contact forces exactly.
    pub fn static_load_vector(&self) -> DVector<f64> {
        let mut f = DVector::zeros(self.n_dof());
        for elem in &self.contacts {
            elem.reference_force_into(&mut f);
        }
        f
    }

    /// Stiffness with every contact patch fully stuck.
    pub fn stuck_stiffness(&self) -> DMatrix<f64> {
        let mut k = self.stiffness.clone();
        for elem in &self.contacts {
            elem.stuck_stiffness_into(&mut k);
        }
        k
    }

    /// Modes of the linear fully stuck assembly.
    pub fn stuck_modes(&self) -> Result<ModalDecomposition> {
        generalized_symmetric_eig(&self.mass, &self.stuck_stiffness())
    }

    /// The diagonal cell blocks of the block-circulant matrices; valid for
    /// three or more sectors.
    fn circulant_blocks(&self, m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        if self.layout.sectors < 3 {
            return Err(CoreError::InvalidConfig(
                "cyclic reduction needs at least 3 sectors".into(),
            ));
        }
        let c = self.layout.cell_dofs;
        let intra = m.view((0, 0), (c, c)).into_owned();
        let next = m.view((0, c), (c, c)).into_owned();
        Ok((intra, next))
    }

    /// Linear stuck modes of the cyclically reduced one-sector problem for
    /// a given spatial harmonic index.
    pub fn stuck_cyclic_modes(&self, harmonic_index: usize) -> Result<HermitianModalDecomposition> {
        let k = self.stuck_stiffness();
        let (k0, k1) = self.circulant_blocks(&k)?;
        let (m0, _) = self.circulant_blocks(&self.mass)?;
        let phi = 2.0 * std::f64::consts::PI * harmonic_index as f64 / self.layout.sectors as f64;
        let e = Complex64::from_polar(1.0, phi);
        let c = self.layout.cell_dofs;
        let mut kh = DMatrix::from_element(c, c, Complex64::new(0.0, 0.0));
        for i in 0..c {
            for j in 0..c {
                kh[(i, j)] = Complex64::new(k0[(i, j)], 0.0)
                    + e * k1[(i, j)]
                    + e.conj() * k1[(j, i)];
            }
        }
        let mh = m0.map(|x| Complex64::new(x, 0.0));
        hermitian_generalized_eig(&mh, &kh)
    }

    /// Copy of the model with every contact preload scaled by `nu`.
    pub fn scaled_preload(&self, nu: f64) -> SystemModel {
        let mut out = self.clone();
        for elem in &mut out.contacts {
            elem.p0 *= nu;
        }
        out
    }

    /// Preload scale at excitation frequency `omega` when the normal load
    /// follows the rotational speed (`omega_r = omega / EO`).
    pub fn speed_preload_scale(&self, omega: f64) -> Result<f64> {
        let damper = self.damper.as_ref().ok_or_else(|| {
            CoreError::InvalidConfig("speed-dependent preload needs a damper".into())
        })?;
        if self.excitation.engine_order == 0 {
            return Err(CoreError::InvalidConfig(
                "speed-dependent preload is undefined for engine order 0".into(),
            ));
        }
        let omega_r = omega / self.excitation.engine_order as f64;
        Ok((omega_r / damper.ref_speed).powi(2))
    }

    /// Copy with a different friction coefficient on every patch.
    pub fn with_friction(&self, mu: f64) -> SystemModel {
        let mut out = self.clone();
        for elem in &mut out.contacts {
            elem.mu = mu;
        }
        out
    }

    /// Surrogate for modal analysis: same structure and contacts, no
    /// linear damping (the excitation is ignored by the modal solver).
    pub fn modal_surrogate(&self) -> SystemModel {
        let mut out = self.clone();
        out.damping = DampingModel::Hysteretic(0.0);
        out
    }
}

fn check_positive(value: f64, name: &str) -> Result<()> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(CoreError::InvalidConfig(format!(
            "{name} must be positive and finite, got {value}"
        )));
    }
    Ok(())
}

/// Build the full cyclic assembly from its configuration.
pub fn assemble_system(config: &ModelConfig) -> Result<SystemModel> {
    let ns = config.sectors;
    if ns == 0 {
        return Err(CoreError::InvalidConfig("sector count must be >= 1".into()));
    }
    if 2 * config.engine_order > ns {
        return Err(CoreError::InvalidConfig(format!(
            "engine order {} exceeds N_s/2 = {}",
            config.engine_order,
            ns / 2
        )));
    }
    let sc = &config.sector;
    for (v, name) in [
        (sc.mass_tip, "mass_tip"),
        (sc.mass_root, "mass_root"),
        (sc.mass_platform, "mass_platform"),
        (sc.k_blade, "k_blade"),
        (sc.k_ground, "k_ground"),
        (sc.k_platform, "k_platform"),
        (sc.k_coupling, "k_coupling"),
    ] {
        check_positive(v, name)?;
    }
    if config.damping.eta < 0.0 {
        return Err(CoreError::InvalidConfig(format!(
            "loss factor must be non-negative, got {}",
            config.damping.eta
        )));
    }

    let layout = CyclicLayout {
        sectors: ns,
        cell_dofs: if config.damper.is_some() { 5 } else { 3 },
        has_damper: config.damper.is_some(),
    };
    let n = layout.n_dof();
    let mut mass = DMatrix::zeros(n, n);
    let mut stiffness = DMatrix::zeros(n, n);

    let add_spring = |k: &mut DMatrix<f64>, i: usize, j: usize, stiff: f64| {
        k[(i, i)] += stiff;
        k[(j, j)] += stiff;
        k[(i, j)] -= stiff;
        k[(j, i)] -= stiff;
    };
    let add_ground = |k: &mut DMatrix<f64>, i: usize, stiff: f64| {
        k[(i, i)] += stiff;
    };

    for s in 0..ns {
        mass[(layout.tip(s), layout.tip(s))] = sc.mass_tip;
        mass[(layout.root(s), layout.root(s))] = sc.mass_root;
        mass[(layout.platform(s), layout.platform(s))] = sc.mass_platform;
        add_ground(&mut stiffness, layout.root(s), sc.k_ground);
        add_spring(&mut stiffness, layout.root(s), layout.tip(s), sc.k_blade);
        add_spring(
            &mut stiffness,
            layout.root(s),
            layout.platform(s),
            sc.k_platform,
        );
        let next = (s + 1) % ns;
        if next != s {
            add_spring(
                &mut stiffness,
                layout.root(s),
                layout.root(next),
                sc.k_coupling,
            );
        }
    }

    let mut contacts = Vec::new();
    let mut damper_spec = None;
    if let Some(dc) = &config.damper {
        for (v, name) in [
            (dc.mass, "damper mass"),
            (dc.mass_ref, "damper mass_ref"),
            (dc.cg_radius, "cg_radius"),
            (dc.ref_speed, "ref_speed"),
            (dc.kn, "kn"),
            (dc.kt, "kt"),
            (dc.contact_area, "contact_area"),
        ] {
            check_positive(v, name)?;
        }
        if dc.mu < 0.0 {
            return Err(CoreError::InvalidConfig("mu must be non-negative".into()));
        }
        let theta = dc.wedge_angle_deg.to_radians();
        if !(0.0..90.0).contains(&dc.wedge_angle_deg) {
            return Err(CoreError::InvalidConfig(format!(
                "wedge angle must lie in [0, 90) degrees, got {}",
                dc.wedge_angle_deg
            )));
        }
        let split = dc.split_factor.unwrap_or(1.0 / (2.0 * theta.cos()));
        let spec = DamperSpec {
            mass: dc.mass,
            mass_ref: dc.mass_ref,
            cg_radius: dc.cg_radius,
            ref_speed: dc.ref_speed,
            split_factor: split,
            contact_area: dc.contact_area,
        };
        let p0 = centrifugal_preload(&spec, dc.ref_speed);
        let (sin_t, cos_t) = (theta.sin(), theta.cos());
        for s in 0..ns {
            // Structural matrices are frozen at the reference damper mass;
            // the design mass enters only through the preload.
            mass[(layout.damper_x(s), layout.damper_x(s))] = dc.mass_ref;
            mass[(layout.damper_y(s), layout.damper_y(s))] = dc.mass_ref;
            if dc.k_retention > 0.0 {
                add_ground(&mut stiffness, layout.damper_x(s), dc.k_retention);
                add_ground(&mut stiffness, layout.damper_y(s), dc.k_retention);
            }
            let plat_l = layout.platform(s);
            let plat_r = layout.platform((s + 1) % ns);
            let dx = layout.damper_x(s);
            let dy = layout.damper_y(s);
            // Left patch: outward normal (-sin, +cos); right patch mirrored.
            let left = ContactElement {
                kn: dc.kn,
                kt: dc.kt,
                mu: dc.mu,
                p0,
                area_weight: dc.contact_area,
                normal: DofSelector::new(vec![(dx, -sin_t), (plat_l, sin_t), (dy, cos_t)]),
                tangential: DofSelector::new(vec![(dx, cos_t), (plat_l, -cos_t), (dy, sin_t)]),
            };
            let right = ContactElement {
                kn: dc.kn,
                kt: dc.kt,
                mu: dc.mu,
                p0,
                area_weight: dc.contact_area,
                normal: DofSelector::new(vec![(dx, sin_t), (plat_r, -sin_t), (dy, cos_t)]),
                tangential: DofSelector::new(vec![(dx, cos_t), (plat_r, -cos_t), (dy, -sin_t)]),
            };
            left.validate()?;
            right.validate()?;
            contacts.push(left);
            contacts.push(right);
        }
        damper_spec = Some(spec);
    }

    if !config.excitation.force_tip.is_finite() || !config.excitation.level.is_finite() {
        return Err(CoreError::InvalidConfig("excitation must be finite".into()));
    }
    let mut sector_force = vec![0.0; layout.cell_dofs];
    sector_force[0] = config.excitation.force_tip;
    let excitation = ExcitationSpec {
        engine_order: config.engine_order,
        level: config.excitation.level,
        sector_force,
        sector_count: ns,
        response_dof: layout.tip(0),
    };

    let mut dof_labels = Vec::with_capacity(n);
    for s in 0..ns {
        for name in layout.cell_dof_names() {
            dof_labels.push(format!("s{s}_{name}"));
        }
    }

    let model = SystemModel {
        mass,
        stiffness,
        damping: DampingModel::Hysteretic(config.damping.eta),
        contacts,
        excitation,
        dof_labels,
        layout,
        damper: damper_spec,
    };
    validate_model(&model)?;
    Ok(model)
}

fn validate_model(model: &SystemModel) -> Result<()> {
    let n = model.n_dof();
    if model.stiffness.nrows() != n || model.mass.nrows() != n {
        return Err(CoreError::InvalidConfig("matrix size mismatch".into()));
    }
    if (&model.stiffness - model.stiffness.transpose()).amax()
        > 1e-12 * model.stiffness.amax().max(1.0)
    {
        return Err(CoreError::InvalidConfig("stiffness not symmetric".into()));
    }
    // positive definiteness of the mass matrix, checked by factorization
    if model.mass.clone().cholesky().is_none() {
        return Err(CoreError::InvalidConfig(
            "mass matrix is not positive definite".into(),
        ));
    }
    for elem in &model.contacts {
        for sel in [&elem.normal, &elem.tangential] {
            if sel.max_dof() >= n {
                return Err(CoreError::InvalidConfig(format!(
                    "contact selector references DOF {} beyond {}",
                    sel.max_dof(),
                    n
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub fn base_config() -> ModelConfig {
        ModelConfig {
            sectors: 8,
            engine_order: 2,
            sector: SectorConfig {
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
            damping: DampingConfig { eta: 0.0015 },
            excitation: ExcitationConfig {
                force_tip: 30.0,
                level: 1.0,
            },
        }
    }

    #[test]
    fn nominal_counts() {
        let model = assemble_system(&base_config()).unwrap();
        assert_eq!(model.n_dof(), 8 * 5);
        assert_eq!(model.contacts.len(), 16);
        assert_eq!(model.dof_labels.len(), 40);
        assert_eq!(model.dof_labels[0], "s0_tip");
        assert_eq!(model.dof_labels[7], "s1_plat");
    }

    #[test]
    fn invalid_stiffness_rejected() {
        let mut config = base_config();
        config.sector.k_blade = -1.0;
        assert!(matches!(
            assemble_system(&config),
            Err(CoreError::InvalidConfig(_))
        ));
        let mut config = base_config();
        config.sector.k_ground = 0.0;
        assert!(assemble_system(&config).is_err());
    }

    #[test]
    fn engine_order_bound_enforced() {
        let mut config = base_config();
        config.engine_order = 5; // > 8/2
        assert!(assemble_system(&config).is_err());
    }

    /// Closed-form cubic roots (trigonometric method) as the independent
    /// oracle for the single-sector chain eigenvalues.
    fn cubic_roots(a: f64, b: f64, c: f64, d: f64) -> [f64; 3] {
        // a x^3 + b x^2 + c x + d with three real roots
        let p = (3.0 * a * c - b * b) / (3.0 * a * a);
        let q = (2.0 * b * b * b - 9.0 * a * b * c + 27.0 * a * a * d) / (27.0 * a * a * a);
        let m = 2.0 * (-p / 3.0).sqrt();
        let phi = (3.0 * q / (p * m)).clamp(-1.0, 1.0).acos() / 3.0;
        let shift = -b / (3.0 * a);
        let mut roots = [
            m * phi.cos() + shift,
            m * (phi - 2.0 * std::f64::consts::PI / 3.0).cos() + shift,
            m * (phi - 4.0 * std::f64::consts::PI / 3.0).cos() + shift,
        ];
        roots.sort_by(f64::total_cmp);
        roots
    }

    #[test]
    fn single_sector_chain_matches_analytic_eigenvalues() {
        let mut config = base_config();
        config.sectors = 1;
        config.engine_order = 0;
        config.damper = None;
        let model = assemble_system(&config).unwrap();
        assert_eq!(model.n_dof(), 3);
        let modal = model.stuck_modes().unwrap();

        // det(K - L M) = 0 expanded by hand for the 3-DOF chain with
        // DOFs (tip, root, plat) and K = [[kb, -kb, 0],
        // [-kb, kb+kg+kp, -kp], [0, -kp, kp]]:
        // (kb - L mt) [ L^2 mr mp - L (mr kp + mp krr) + (krr kp - kp^2) ]
        //   - kb^2 (kp - L mp)   with krr = kb + kg + kp
        let s = &config.sector;
        let (mt, mr, mp) = (s.mass_tip, s.mass_root, s.mass_platform);
        let (kb, kg, kp) = (s.k_blade, s.k_ground, s.k_platform);
        let krr = kb + kg + kp;
        let a = -mt * mr * mp;
        let b = kb * mr * mp + mt * (mr * kp + mp * krr);
        let c = -kb * (mr * kp + mp * krr) - mt * (krr * kp - kp * kp) + kb * kb * mp;
        let d = kb * (krr * kp - kp * kp) - kb * kb * kp;
        let roots = cubic_roots(a, b, c, d);
        let mut expected: Vec<f64> = roots.iter().map(|l| l.max(0.0).sqrt()).collect();
        expected.sort_by(f64::total_cmp);
        for (freq, exp) in modal.frequencies.iter().zip(expected.iter()) {
            assert_relative_eq!(freq, exp, max_relative = 1e-9);
        }
    }

    #[test]
    fn block_circulant_eigenvalues_match_cyclic_reduction() {
        let model = assemble_system(&base_config()).unwrap();
        let full = model.stuck_modes().unwrap();
        let mut reduced: Vec<f64> = Vec::new();
        let ns = model.layout.sectors;
        for h in 0..=ns / 2 {
            let modal = model.stuck_cyclic_modes(h).unwrap();
            let degenerate = h != 0 && 2 * h != ns;
            for f in modal.frequencies {
                reduced.push(f);
                if degenerate {
                    reduced.push(f);
                }
            }
        }
        reduced.sort_by(f64::total_cmp);
        assert_eq!(reduced.len(), full.frequencies.len());
        for (r, f) in reduced.iter().zip(full.frequencies.iter()) {
            assert_relative_eq!(r, f, max_relative = 1e-8);
        }
    }

    #[test]
    fn preload_zero_speed_and_linearity() {
        let damper = DamperSpec {
            mass: 0.015,
            mass_ref: 0.015,
            cg_radius: 0.04,
            ref_speed: 850.0,
            split_factor: 1.0 / (2.0 * 45f64.to_radians().cos()),
            contact_area: 2.0e-4,
        };
        assert_eq!(centrifugal_preload(&damper, 0.0), 0.0);
        let p1 = centrifugal_preload(&damper, 850.0);
        let mut doubled_mass = damper.clone();
        doubled_mass.mass = 0.03;
        assert_relative_eq!(centrifugal_preload(&doubled_mass, 850.0), 2.0 * p1);
        // doubling speed quadruples the preload
        assert_relative_eq!(centrifugal_preload(&damper, 1700.0), 4.0 * p1);
    }

    #[test]
    fn preload_scaling_relation_exact() {
        let damper = DamperSpec {
            mass: 0.02,
            mass_ref: 0.015,
            cg_radius: 0.04,
            ref_speed: 850.0,
            split_factor: 0.7,
            contact_area: 2.0e-4,
        };
        let p_ref = {
            let mut at_ref = damper.clone();
            at_ref.mass = damper.mass_ref;
            centrifugal_preload(&at_ref, damper.ref_speed)
        };
        for omega in [100.0, 850.0, 1234.5] {
            let nu = damper.preload_scale(damper.mass, omega);
            assert_eq!(centrifugal_preload(&damper, omega), nu * p_ref);
        }
    }

    #[test]
    fn excitation_phases() {
        let spec = ExcitationSpec {
            engine_order: 2,
            level: 1.0,
            sector_force: vec![30.0, 0.0, 0.0, 0.0, 0.0],
            sector_count: 8,
            response_dof: 0,
        };
        let f = excitation_vector(&spec, 1);
        // adjacent sectors 90 degrees apart
        let ratio = f[5] / f[0];
        assert_relative_eq!(ratio.re, 0.0, epsilon = 1e-12);
        assert_relative_eq!(ratio.im, 1.0, epsilon = 1e-12);
        // only the tip DOF carries force
        assert_eq!(f[1], Complex64::new(0.0, 0.0));
        // other harmonics carry nothing
        assert!(excitation_vector(&spec, 2).iter().all(|c| c.norm() == 0.0));
        assert!(excitation_vector(&spec, 0).iter().all(|c| c.norm() == 0.0));

        let in_phase = ExcitationSpec {
            engine_order: 0,
            ..spec
        };
        let f = excitation_vector(&in_phase, 1);
        for s in 0..8 {
            assert_eq!(f[5 * s], f[0]);
        }
    }

    #[test]
    fn static_load_balances_reference_contact_forces() {
        let model = assemble_system(&base_config()).unwrap();
        let f = model.static_load_vector();
        // Radial static force on each damper equals the centrifugal force.
        let damper = model.damper.as_ref().unwrap();
        let fc = damper.mass * damper.cg_radius * damper.ref_speed.powi(2);
        for s in 0..8 {
            assert_relative_eq!(f[model.layout.damper_y(s)], fc, max_relative = 1e-12);
            assert_relative_eq!(f[model.layout.damper_x(s)], 0.0, epsilon = 1e-9 * fc);
        }
    }
}
