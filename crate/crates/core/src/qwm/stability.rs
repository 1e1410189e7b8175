//! Linear stability machinery for the quarter-wave model: finite-difference
//! Jacobians, balanced eigenvalue extraction, the rank-one sliding update for
//! pseudo-equilibria at the upper stop, and Hopf-boundary tracing in the
//! (flow rate, pipe length) plane.

use nalgebra::{Complex, Matrix5, Vector5};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{QwmModel, QwmState};

/// Eigenvalue-based classification of a 5x5 spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumClass {
    Stable,
    HopfMarginal,
    UnstableOscillatory,
    UnstableStatic,
}

impl SpectrumClass {
    pub fn label(self) -> &'static str {
        match self {
            SpectrumClass::Stable => "stable",
            SpectrumClass::HopfMarginal => "hopf-marginal",
            SpectrumClass::UnstableOscillatory => "unstable-oscillatory",
            SpectrumClass::UnstableStatic => "unstable-static",
        }
    }
}

/// Jacobian with its spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct QwmJacobian<T: Scalar> {
    pub matrix: Matrix5<T>,
    pub eigenvalues: [Complex<T>; 5],
    pub classification: SpectrumClass,
}

/// Relative tolerance defining "marginal" eigenvalues.
const MARGINAL_TOL: f64 = 1e-6;

fn spectral_radius<T: Scalar>(eigs: &[Complex<T>; 5]) -> T {
    eigs.iter().fold(T::zero(), |m, e| m.max((e.re * e.re + e.im * e.im).sqrt()))
}

/// Osborne-style diagonal balancing; similarity transform, eigenvalues are
/// preserved exactly while the eigenproblem conditioning improves a lot for
/// the dimensional system (entries span many orders of magnitude).
fn balance<T: Scalar>(m: &Matrix5<T>) -> Matrix5<T> {
    let mut a = *m;
    for _sweep in 0..20 {
        let mut converged = true;
        for i in 0..5 {
            let mut r = T::zero();
            let mut c = T::zero();
            for j in 0..5 {
                if j != i {
                    r += a[(i, j)].abs();
                    c += a[(j, i)].abs();
                }
            }
            if r > T::zero() && c > T::zero() {
                let f = (r / c).sqrt().sqrt();
                if f > T::lit(1.001) || f < T::lit(0.999) {
                    converged = false;
                    for j in 0..5 {
                        a[(i, j)] /= f;
                        a[(j, i)] *= f;
                    }
                }
            }
        }
        if converged {
            break;
        }
    }
    a
}

/// Eigenvalues of a real 5x5 matrix (balanced Schur).
pub fn eigenvalues5<T: Scalar>(m: &Matrix5<T>) -> Result<[Complex<T>; 5]> {
    let balanced = balance(m);
    let eigs = balanced.complex_eigenvalues();
    let mut out = [Complex::new(T::zero(), T::zero()); 5];
    for i in 0..5 {
        out[i] = eigs[i];
    }
    // Deterministic ordering: descending real part, then descending |imag|.
    out.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.im.abs().partial_cmp(&a.im.abs()).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok(out)
}

fn classify<T: Scalar>(eigs: &[Complex<T>; 5]) -> SpectrumClass {
    let radius = spectral_radius(eigs);
    let tol = T::lit(MARGINAL_TOL) * radius.max(T::lit(1e-30));
    let leading = eigs
        .iter()
        .copied()
        .max_by(|a, b| a.re.partial_cmp(&b.re).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap();
    if leading.re < -tol {
        SpectrumClass::Stable
    } else if leading.re.abs() <= tol {
        SpectrumClass::HopfMarginal
    } else if leading.im.abs() > tol {
        SpectrumClass::UnstableOscillatory
    } else {
        SpectrumClass::UnstableStatic
    }
}

impl<'a, T: Scalar> QwmModel<'a, T> {
    fn fd_scales(&self) -> [T; 5] {
        let omega = (self.geom.spring_k / self.geom.mass).sqrt();
        [
            self.geom.x_stop,
            self.geom.x_stop * omega,
            self.ambient.p_set,
            self.ambient.p_set,
            self.fluid.sonic_speed(),
        ]
    }

    /// Central finite-difference Jacobian of the assembled rhs at any state
    /// (no equilibrium gate); step h_i = max(1e-7 |z_i|, 1e-9 scale_i).
    pub fn jacobian_at(&self, state: &QwmState<T>) -> Result<QwmJacobian<T>> {
        self.jacobian_with_steps(state, T::lit(1e-7), T::lit(1e-9))
    }

    fn jacobian_with_steps(&self, state: &QwmState<T>, rel: T, abs: T) -> Result<QwmJacobian<T>> {
        let scales = self.fd_scales();
        let z0 = state.to_vector();
        let mut m = Matrix5::zeros();
        for j in 0..5 {
            let h = (rel * z0[j].abs()).max(abs * scales[j]);
            let mut zp = z0;
            zp[j] += h;
            let mut zm = z0;
            zm[j] -= h;
            let fp = self.rhs(&QwmState::from_vector(&zp))?;
            let fm = self.rhs(&QwmState::from_vector(&zm))?;
            for i in 0..5 {
                m[(i, j)] = (fp[i] - fm[i]) / (h + h);
            }
        }
        let eigenvalues = eigenvalues5(&m)?;
        let classification = classify(&eigenvalues);
        Ok(QwmJacobian { matrix: m, eigenvalues, classification })
    }

    /// Jacobian at a smooth equilibrium; rejects states whose rhs is not
    /// numerically zero.
    pub fn jacobian(&self, state: &QwmState<T>) -> Result<QwmJacobian<T>> {
        let rhs = self.rhs(state)?;
        let scales = self.fd_scales();
        for i in 0..5 {
            if (rhs[i] / scales[i]).abs() > T::lit(1e-6) {
                return Err(Error::Precondition {
                    context: "qwm::jacobian",
                    message: format!(
                        "state is not an equilibrium (component {i} residual {:.3e})",
                        (rhs[i] / scales[i]).as_f64()
                    ),
                });
            }
        }
        self.jacobian_at(state)
    }

    /// Richardson-extrapolated Jacobian from steps h and h/2: the independent
    /// differencing route used to cross-check [`Self::jacobian_at`].
    pub fn jacobian_richardson(&self, state: &QwmState<T>) -> Result<Matrix5<T>> {
        let coarse = self.jacobian_with_steps(state, T::lit(2e-7), T::lit(2e-9))?.matrix;
        let fine = self.jacobian_with_steps(state, T::lit(1e-7), T::lit(1e-9))?.matrix;
        // Central differences have O(h^2) error: J = (4 J_{h/2} - J_h)/3.
        Ok((fine * T::lit(4.0) - coarse) / T::lit(3.0))
    }
}

/// Rank-one sliding update A_s = (I - B C / (C B)) J0.
///
/// `c_row` is the sliding-constraint gradient on the vector field (for the
/// stop it selects the velocity row, which is the position gradient pushed
/// through the kinematic row xdot = w) and `b_col` is the direction the
/// constraint force acts in. By construction C A_s = 0, hence C A_s B = 0
/// exactly up to rounding. Transversality demands C J0 B != 0.
pub fn sliding_jacobian<T: Scalar>(
    j0: &Matrix5<T>,
    b_col: &Vector5<T>,
    c_row: &Vector5<T>,
) -> Result<Matrix5<T>> {
    let scale = j0.amax();
    let cjb = (j0.transpose() * c_row).dot(b_col);
    if cjb.abs() < T::lit(1e-12) * scale.max(T::lit(1e-30)) {
        return Err(Error::TransversalityFailure { magnitude: cjb.abs().as_f64() });
    }
    let cb = c_row.dot(b_col);
    if cb.abs() < T::lit(1e-14) {
        return Err(Error::Precondition {
            context: "sliding_jacobian",
            message: "constraint gradient orthogonal to the input direction".into(),
        });
    }
    let projector = Matrix5::identity() - b_col * c_row.transpose() / cb;
    Ok(projector * j0)
}

/// Outcome of the pseudo-equilibrium stability test at the upper stop.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoEquilibriumReport<T: Scalar> {
    pub status: PseudoEquilibriumStatus,
    /// State of the boundary equilibrium (x pinned at the stop).
    pub state: QwmState<T>,
    /// Unconstrained valve acceleration at the boundary point.
    pub constraint_accel: T,
    /// Jacobian of the free dynamics at the constrained point.
    pub unconstrained: Option<QwmJacobian<T>>,
    /// Sliding Jacobian and its spectrum.
    pub sliding: Option<QwmJacobian<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PseudoEquilibriumStatus {
    /// All non-structural eigenvalues of the sliding Jacobian have
    /// non-positive real part (within tolerance).
    Stable,
    /// Some non-structural eigenvalue has positive real part.
    Unstable,
    /// No boundary equilibrium: the fluid force does not press the valve
    /// onto the stop (or exactly vanishes at the bifurcation point).
    NotApplicable,
}

impl PseudoEquilibriumStatus {
    pub fn label(self) -> &'static str {
        match self {
            PseudoEquilibriumStatus::Stable => "stable",
            PseudoEquilibriumStatus::Unstable => "unstable",
            PseudoEquilibriumStatus::NotApplicable => "not-applicable",
        }
    }
}

/// Build the boundary equilibrium at the stop, form the unconstrained
/// Jacobian, apply the rank-one sliding update and classify its spectrum
/// excluding the two structural zeros.
pub fn pseudo_equilibrium_stability<T: Scalar>(
    model: &QwmModel<'_, T>,
) -> Result<PseudoEquilibriumReport<T>> {
    let (state, accel) = model.boundary_equilibrium()?;
    if accel <= T::zero() {
        return Ok(PseudoEquilibriumReport {
            status: PseudoEquilibriumStatus::NotApplicable,
            state,
            constraint_accel: accel,
            unconstrained: None,
            sliding: None,
        });
    }
    let j0 = model.jacobian_at(&state)?;
    // Sliding at the stop holds xdot = 0; the constraint force acts on the
    // same velocity channel. This zeroes the acceleration row of J0, which
    // is the position constraint's gradient transported through xdot = w.
    let c_row = Vector5::new(T::zero(), T::one(), T::zero(), T::zero(), T::zero());
    let b_col = Vector5::new(T::zero(), T::one(), T::zero(), T::zero(), T::zero());
    let a_s = sliding_jacobian(&j0.matrix, &b_col, &c_row)?;
    let eigs = eigenvalues5(&a_s)?;
    let radius = spectral_radius(&eigs);
    let tol = T::lit(MARGINAL_TOL) * radius.max(T::lit(1e-30));

    // Two structural zeros come from the zeroed acceleration row; drop the
    // two smallest-modulus eigenvalues and classify the rest.
    let mut by_mag: Vec<Complex<T>> = eigs.to_vec();
    by_mag.sort_by(|a, b| {
        (a.re * a.re + a.im * a.im)
            .partial_cmp(&(b.re * b.re + b.im * b.im))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let structural = &by_mag[..2];
    let rest = &by_mag[2..];
    let structurally_zero = structural
        .iter()
        .all(|e| (e.re * e.re + e.im * e.im).sqrt() <= tol);
    let stable = rest.iter().all(|e| e.re <= tol);
    let status = if structurally_zero && stable {
        PseudoEquilibriumStatus::Stable
    } else {
        PseudoEquilibriumStatus::Unstable
    };

    let sliding = QwmJacobian { matrix: a_s, eigenvalues: eigs, classification: classify(&eigs) };
    Ok(PseudoEquilibriumReport {
        status,
        state,
        constraint_accel: accel,
        unconstrained: Some(j0),
        sliding: Some(sliding),
    })
}

/// One sample of the Hopf boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfBoundarySample<T> {
    /// Relative flow rate q = mdot_in / mdot_cap.
    pub q: T,
    /// Critical pipe length, if the bracket contained the sign change.
    pub l_c: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopfBoundary<T> {
    pub samples: Vec<HopfBoundarySample<T>>,
    pub convection: bool,
    pub inlet_loss: bool,
}

/// Leading growth rate of the oscillatory eigenvalue pairs of the QWM at the
/// smooth equilibrium for the given pipe length.
pub fn oscillatory_growth_rate<T: Scalar>(model: &QwmModel<'_, T>, l: T) -> Result<T> {
    let m = QwmModel { pipe_length: l, ..model.clone() };
    let eq = m.equilibrium()?;
    let jac = m.jacobian_at(&eq)?;
    let radius = spectral_radius(&jac.eigenvalues);
    let tol = T::lit(1e-9) * radius.max(T::lit(1e-30));
    let mut best: Option<T> = None;
    for e in jac.eigenvalues.iter() {
        if e.im.abs() > tol {
            best = Some(match best {
                Some(b) => b.max(e.re),
                None => e.re,
            });
        }
    }
    best.ok_or_else(|| Error::SolverFailure {
        context: "oscillatory_growth_rate",
        message: "no oscillatory eigenvalue pair found".into(),
    })
}

/// Trace the quarter-wave Hopf boundary over a grid of relative flow rates by
/// bisecting the leading oscillatory growth rate in pipe length.
pub fn hopf_boundary<T: Scalar>(
    model: &QwmModel<'_, T>,
    mdot_cap: T,
    q_grid: &[T],
    l_bracket: (T, T),
    l_tol: T,
) -> Result<HopfBoundary<T>> {
    let mut samples = Vec::with_capacity(q_grid.len());
    for &q in q_grid {
        if !(q > T::zero() && q <= T::one()) {
            return Err(Error::Precondition {
                context: "hopf_boundary",
                message: "q must lie in (0, 1]".into(),
            });
        }
        let m = QwmModel { mdot_in: q * mdot_cap, ..model.clone() };
        let (mut lo, mut hi) = l_bracket;
        let f_lo = oscillatory_growth_rate(&m, lo)?;
        let f_hi = oscillatory_growth_rate(&m, hi)?;
        if (f_lo > T::zero()) == (f_hi > T::zero()) {
            samples.push(HopfBoundarySample { q, l_c: None });
            continue;
        }
        let mut f_lo = f_lo;
        while hi - lo > l_tol {
            let mid = (lo + hi) / T::lit(2.0);
            let f_mid = oscillatory_growth_rate(&m, mid)?;
            if (f_lo > T::zero()) == (f_mid > T::zero()) {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
            }
        }
        samples.push(HopfBoundarySample { q, l_c: Some((lo + hi) / T::lit(2.0)) });
    }
    Ok(HopfBoundary {
        samples,
        convection: model.options.convection,
        inlet_loss: model.options.inlet_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::EffectiveAreaVariant;
    use crate::qwm::tests::fixture;
    use crate::qwm::QwmOptions;
    use approx::assert_relative_eq;

    #[test]
    fn sliding_projection_identity_random_matrices() {
        // C A_s B = 0 exactly (to rounding) for random full matrices.
        let mut seed = 0x9e3779b9u64;
        let mut rnd = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for _ in 0..200 {
            let j0 = Matrix5::from_fn(|_, _| rnd());
            let b = Vector5::from_fn(|_, _| rnd());
            let c = Vector5::from_fn(|_, _| rnd());
            let Ok(a_s) = sliding_jacobian(&j0, &b, &c) else {
                continue; // transversality too small; skip
            };
            let cab = (a_s.transpose() * c).dot(&b);
            assert!(cab.abs() < 1e-10 * j0.amax(), "C A_s B = {cab}");
        }
    }

    #[test]
    fn sliding_with_position_constraint_zeroes_second_row() {
        let (fluid, geom, aeff, ambient) = fixture(EffectiveAreaVariant::Polynomial([0.0, 1.0, 0.0, 0.0]));
        let model = QwmModel {
            fluid: &fluid,
            geom: &geom,
            aeff: &aeff,
            ambient: &ambient,
            pipe_length: 2.0,
            tank_volume: 1.0,
            lambda: 0.0,
            mdot_in: 0.8,
            options: QwmOptions::default(),
        };
        let report = pseudo_equilibrium_stability(&model).unwrap();
        let a_s = report.sliding.unwrap().matrix;
        for j in 0..5 {
            assert!(a_s[(1, j)].abs() < 1e-9 * a_s.amax(), "row 2 entry {j} = {}", a_s[(1, j)]);
        }
        // Row 1 keeps the (0,1,0,0,0) structure.
        assert_relative_eq!(a_s[(0, 1)], 1.0, max_relative = 1e-12);
        for j in [0usize, 2, 3, 4] {
            assert!(a_s[(0, j)].abs() < 1e-12);
        }
    }

    #[test]
    fn no_boundary_equilibrium_reports_not_applicable() {
        // Below ~77% of capacity the fluid force cannot hold the enhanced
        // valve on the stop; the sliding analysis must decline, not guess.
        let (fluid, geom, aeff, ambient) = fixture(EffectiveAreaVariant::Polynomial([0.0, 1.0, 0.0, 0.0]));
        let model = QwmModel {
            fluid: &fluid,
            geom: &geom,
            aeff: &aeff,
            ambient: &ambient,
            pipe_length: 2.0,
            tank_volume: 1.0,
            lambda: 0.0,
            mdot_in: 0.5 * 0.9274392468656761,
            options: QwmOptions::default(),
        };
        let report = pseudo_equilibrium_stability(&model).unwrap();
        assert_eq!(report.status, crate::qwm::PseudoEquilibriumStatus::NotApplicable);
        assert!(report.constraint_accel <= 0.0);
        assert!(report.sliding.is_none());
    }

    #[test]
    fn transversality_failure_detected() {
        let j0 = Matrix5::<f64>::zeros();
        let b = Vector5::new(0.0, 1.0, 0.0, 0.0, 0.0);
        let c = Vector5::new(1.0, 0.0, 0.0, 0.0, 0.0);
        assert!(matches!(
            sliding_jacobian(&j0, &b, &c),
            Err(crate::error::Error::TransversalityFailure { .. })
        ));
    }

    #[test]
    fn jacobian_rejects_non_equilibrium() {
        let (fluid, geom, aeff, ambient) = fixture(EffectiveAreaVariant::Constant);
        let model = QwmModel {
            fluid: &fluid,
            geom: &geom,
            aeff: &aeff,
            ambient: &ambient,
            pipe_length: 0.5,
            tank_volume: 1.0,
            lambda: 0.0,
            mdot_in: 0.4,
            options: QwmOptions::default(),
        };
        let z = QwmState { x: 0.5 * geom.x_stop, xdot: 3.0, p_r: 6.0e5, b: 0.0, c: 0.0 };
        assert!(model.jacobian(&z).is_err());
    }

    #[test]
    fn eigenvalues_closed_under_conjugation() {
        let (fluid, geom, aeff, ambient) = fixture(EffectiveAreaVariant::Constant);
        let model = QwmModel {
            fluid: &fluid,
            geom: &geom,
            aeff: &aeff,
            ambient: &ambient,
            pipe_length: 0.7,
            tank_volume: 1.0,
            lambda: 0.0,
            mdot_in: 0.45,
            options: QwmOptions::default(),
        };
        let eq = model.equilibrium().unwrap();
        let jac = model.jacobian(&eq).unwrap();
        let radius = jac.eigenvalues.iter().map(|e| (e.re * e.re + e.im * e.im).sqrt()).fold(0.0f64, f64::max);
        for e in jac.eigenvalues.iter().filter(|e| e.im != 0.0) {
            let conj_found = jac
                .eigenvalues
                .iter()
                .any(|f| (f.re - e.re).abs() < 1e-8 * radius && (f.im + e.im).abs() < 1e-8 * radius);
            assert!(conj_found, "conjugate of {e} missing");
        }
    }

    #[test]
    fn dual_differencing_agreement() {
        let (fluid, geom, aeff, ambient) = fixture(EffectiveAreaVariant::Constant);
        let model = QwmModel {
            fluid: &fluid,
            geom: &geom,
            aeff: &aeff,
            ambient: &ambient,
            pipe_length: 0.6,
            tank_volume: 1.0,
            lambda: 0.0,
            mdot_in: 0.5,
            options: QwmOptions::default(),
        };
        let eq = model.equilibrium().unwrap();
        let j_fd = model.jacobian(&eq).unwrap().matrix;
        let j_rich = model.jacobian_richardson(&eq).unwrap();
        let scale = j_fd.amax();
        for i in 0..5 {
            for j in 0..5 {
                let diff = (j_fd[(i, j)] - j_rich[(i, j)]).abs();
                let denom = j_fd[(i, j)].abs() + 1e-6 * scale;
                assert!(diff / denom < 1e-5, "entry ({i},{j}): {} vs {}", j_fd[(i, j)], j_rich[(i, j)]);
            }
        }
    }
}
