//! Error propagation for the negativity estimate and the repetition /
//! total-time budget for reaching a target signal-to-noise ratio.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{log_negativity, BeamSplitter, CovMat2};
use crate::params::DerivedParams;

/// The six partial derivatives of the raw mirror-basis negativity with
/// respect to the mode-covariance entries, ordered (qq, qp, pp) per mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegativityGradient {
    pub plus: [f64; 3],
    pub minus: [f64; 3],
}

fn raw_en(v_plus: &CovMat2, v_minus: &CovMat2, epsilon: f64) -> Result<f64> {
    let bs = BeamSplitter::new(epsilon)?;
    Ok(log_negativity(&bs.combine(v_plus, v_minus)?)?.raw)
}

/// Gradient by central finite differences with relative step 1e-6
/// (floored for near-zero entries). Uses the raw branch throughout: the
/// estimated quantity is the raw negativity, clamping happens only at
/// reporting time.
pub fn negativity_gradient(
    v_plus: &CovMat2,
    v_minus: &CovMat2,
    epsilon: f64,
) -> Result<NegativityGradient> {
    const REL_STEP: f64 = 1e-6;
    const FLOOR: f64 = 1e-3;
    let mut out = NegativityGradient { plus: [0.0; 3], minus: [0.0; 3] };
    for mode in 0..2 {
        for comp in 0..3 {
            let get = |v: &CovMat2, c: usize| [v.vqq, v.vqp, v.vpp][c];
            let set = |v: &mut CovMat2, c: usize, x: f64| match c {
                0 => v.vqq = x,
                1 => v.vqp = x,
                _ => v.vpp = x,
            };
            let (mut a, mut b) = (*v_plus, *v_minus);
            let target: &mut CovMat2 = if mode == 0 { &mut a } else { &mut b };
            let x0 = get(target, comp);
            let h = REL_STEP * x0.abs().max(FLOOR);
            set(target, comp, x0 + h);
            let up = raw_en(&a, &b, epsilon).map_err(|_| Error::NonDifferentiable)?;
            let target: &mut CovMat2 = if mode == 0 { &mut a } else { &mut b };
            set(target, comp, x0 - h);
            let down = raw_en(&a, &b, epsilon).map_err(|_| Error::NonDifferentiable)?;
            let slot = if mode == 0 { &mut out.plus } else { &mut out.minus };
            slot[comp] = (up - down) / (2.0 * h);
        }
    }
    Ok(out)
}

/// Same gradient through the chain rule: the negativity depends on the
/// mode covariances only through det VA (= det VB here), det VAB and
/// det V = det V+ det V-, all of which are quadratic in the entries.
pub fn negativity_gradient_exact(
    v_plus: &CovMat2,
    v_minus: &CovMat2,
    epsilon: f64,
) -> Result<NegativityGradient> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::EpsilonOutOfRange { epsilon });
    }
    let u2 = (1.0 - epsilon).sqrt();
    let (ap, bp, cp) = (v_plus.vqq, v_plus.vqp, v_plus.vpp);
    let (am, bm, cm) = (v_minus.vqq, v_minus.vqp, v_minus.vpp);
    let det_p = v_plus.det();
    let det_m = v_minus.det();
    let det_v = det_p * det_m;

    // mirror-block entries: VA = VB = mean, VAB = half-difference with the
    // (1 - eps)^(1/2) weights on the minus mode
    let aq = 0.5 * (ap + am / u2);
    let ab = 0.5 * (bp + bm);
    let ac = 0.5 * (cp + cm * u2);
    let gq = 0.5 * (ap - am / u2);
    let gb = 0.5 * (bp - bm);
    let gc = 0.5 * (cp - cm * u2);
    let det_a = aq * ac - ab * ab;
    let det_g = gq * gc - gb * gb;
    let sigma = 2.0 * det_a - 2.0 * det_g;
    let disc = sigma * sigma - 4.0 * det_v;
    if disc <= 0.0 {
        return Err(Error::NonDifferentiable);
    }
    let sq = disc.sqrt();
    let x = 0.5 * (sigma - sq);
    if x <= 0.0 {
        return Err(Error::NonDifferentiable);
    }

    // partials of det VA, det VAB, det V w.r.t. (ap, bp, cp, am, bm, cm)
    let d_det_a = [
        0.5 * ac,
        -ab,
        0.5 * aq,
        0.5 * ac / u2,
        -ab,
        0.5 * aq * u2,
    ];
    let d_det_g = [
        0.5 * gc,
        -gb,
        0.5 * gq,
        -0.5 * gc / u2,
        gb,
        -0.5 * gq * u2,
    ];
    let d_det_v = [
        cp * det_m,
        -2.0 * bp * det_m,
        ap * det_m,
        cm * det_p,
        -2.0 * bm * det_p,
        am * det_p,
    ];

    let mut grad = [0.0; 6];
    for i in 0..6 {
        let d_sigma = 2.0 * (d_det_a[i] - d_det_g[i]);
        let dx = 0.5 * (d_sigma - (sigma * d_sigma - 2.0 * d_det_v[i]) / sq);
        grad[i] = -dx / (x * 2.0 * std::f64::consts::LN_2);
    }
    Ok(NegativityGradient {
        plus: [grad[0], grad[1], grad[2]],
        minus: [grad[3], grad[4], grad[5]],
    })
}

/// Convention for the pp fluctuation moment. `Symmetric` (the default)
/// uses 2 Vpp^2, homogeneous with the qq moment; `PpLinear` keeps the
/// pp second moment linear in Vpp for comparison studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MomentConvention {
    #[default]
    Symmetric,
    PpLinear,
}

/// Second moments of the single-shot estimation error of a mode
/// covariance whose samples are Gaussian with covariance `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMoments {
    pub qq_qq: f64,
    pub qp_qp: f64,
    pub pp_pp: f64,
    pub qq_qp: f64,
    pub qq_pp: f64,
    pub pp_qp: f64,
}

/// Gaussian fourth-moment relations for single-sample estimators
/// (q^2, qp, p^2) of the covariance entries.
pub fn covariance_moment_matrix(v: &CovMat2, convention: MomentConvention) -> ErrorMoments {
    let (a, b, c) = (v.vqq, v.vqp, v.vpp);
    ErrorMoments {
        qq_qq: 2.0 * a * a,
        qp_qp: a * c + b * b,
        pp_pp: match convention {
            MomentConvention::Symmetric => 2.0 * c * c,
            MomentConvention::PpLinear => 2.0 * c,
        },
        qq_qp: 2.0 * a * b,
        qq_pp: 2.0 * b * b,
        pp_qp: 2.0 * c * b,
    }
}

/// Propagated variance of the negativity estimate: the quadratic form of
/// the gradient with the per-mode error moments, summed over both modes.
pub fn variance_en(
    grad: &NegativityGradient,
    v_plus: &CovMat2,
    v_minus: &CovMat2,
    convention: MomentConvention,
) -> Result<f64> {
    let mut total = 0.0;
    for (g, v) in [(&grad.plus, v_plus), (&grad.minus, v_minus)] {
        let m = covariance_moment_matrix(v, convention);
        let (gq, gqp, gpp) = (g[0], g[1], g[2]);
        total += gq * gq * m.qq_qq
            + gqp * gqp * m.qp_qp
            + gpp * gpp * m.pp_pp
            + 2.0 * gq * gqp * m.qq_qp
            + 2.0 * gq * gpp * m.qq_pp
            + 2.0 * gpp * gqp * m.pp_qp;
    }
    if total < -1e-12 {
        return Err(Error::NegativeVariance { value: total });
    }
    Ok(total.max(0.0))
}

/// Repetition count and total-time budget for a target signal-to-noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrBudget {
    pub en: f64,
    pub var_en: f64,
    /// ceil(target^2 * var / en^2)
    pub n_meas: u64,
    /// Per-repetition settling time, t_meas_factor * kappa / g_+^2 (s).
    pub t_meas: f64,
    /// n_meas * t_meas (s).
    pub tau: f64,
}

/// Builds the budget. `t_meas_factor` scales the per-shot settling time
/// kappa/g_+^2; the stated timescale is a proportionality, so the unit
/// factor is a convention (and a config knob).
pub fn snr_budget(
    d: &DerivedParams,
    en: f64,
    var_en: f64,
    target_snr: f64,
    t_meas_factor: f64,
) -> Result<SnrBudget> {
    if en <= 0.0 {
        return Err(Error::NotEntangled { en });
    }
    if var_en < 0.0 {
        return Err(Error::NegativeVariance { value: var_en });
    }
    let n_raw = target_snr * target_snr * var_en / (en * en);
    let n_meas = if n_raw.is_finite() { n_raw.ceil().max(0.0) as u64 } else { u64::MAX };
    let t_meas = t_meas_factor * d.cavity_decay / (d.coupling_plus * d.coupling_plus);
    Ok(SnrBudget {
        en,
        var_en,
        n_meas,
        t_meas,
        tau: n_meas as f64 * t_meas,
    })
}

/// Weak-damping closed form E_N ~ kappa G rho / (8 sqrt(2) g_+^2 Omega),
/// valid deep inside the criterion (margin >> 1). `grav` and `density`
/// are passed explicitly since [`DerivedParams`] does not retain them.
pub fn small_coupling_negativity(d: &DerivedParams, grav: f64, density: f64) -> f64 {
    d.cavity_decay * grav * density
        / (8.0 * std::f64::consts::SQRT_2 * d.coupling_plus * d.coupling_plus * d.freq_plus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{derive, ExperimentParams, Mode, PhysicalConstants};
    use crate::steady::steady_covariance;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn reference() -> DerivedParams {
        derive(&ExperimentParams::reference(), &PhysicalConstants::codata2018()).unwrap()
    }

    fn steady_pair(d: &DerivedParams) -> (CovMat2, CovMat2) {
        (
            steady_covariance(d, Mode::Plus).unwrap(),
            steady_covariance(d, Mode::Minus).unwrap(),
        )
    }

    #[test]
    fn gradient_fixtures_at_reference_steady_state() {
        let d = reference();
        let (vp, vm) = steady_pair(&d);
        let g = negativity_gradient_exact(&vp, &vm, d.epsilon).unwrap();
        assert_relative_eq!(g.plus[0], -5.20609349573154412e-1, max_relative = 1e-10);
        assert_relative_eq!(g.plus[1], -3.28113748426294594e-1, max_relative = 1e-10);
        assert_relative_eq!(g.plus[2], -5.16983761406596964e-2, max_relative = 1e-10);
        assert_relative_eq!(g.minus[0], -1.50209915285445028e0, max_relative = 1e-10);
        assert_relative_eq!(g.minus[1], 1.48287731573767889e0, max_relative = 1e-10);
        assert_relative_eq!(g.minus[2], -3.65975363435679213e-1, max_relative = 1e-10);
        // qq partials dominate within each mode's (qq, pp) pair and the
        // minus-mode entries carry the largest magnitudes
        assert!(g.plus[0].abs() > g.plus[2].abs());
        assert!(g.minus[0].abs() > g.plus[0].abs());
    }

    #[test]
    fn finite_difference_agrees_with_chain_rule() {
        let d = reference();
        let (vp, vm) = steady_pair(&d);
        let fd = negativity_gradient(&vp, &vm, d.epsilon).unwrap();
        let ex = negativity_gradient_exact(&vp, &vm, d.epsilon).unwrap();
        for i in 0..3 {
            assert_relative_eq!(fd.plus[i], ex.plus[i], max_relative = 1e-6);
            assert_relative_eq!(fd.minus[i], ex.minus[i], max_relative = 1e-6);
        }
    }

    #[test]
    fn exchange_symmetric_point_partials() {
        // With eps = 0 the negativity is symmetric under swapping the two
        // modes (the cross block flips sign, its determinant does not).
        // At V+ = V- the two symplectic branches cross (discriminant 0),
        // so the chain-rule gradient refuses; the central-difference
        // gradient averages the one-sided slopes, and exchange symmetry
        // forces the plus and minus partials to coincide there.
        let v = CovMat2::new(0.9, 0.2, 1.4);
        assert!(matches!(
            negativity_gradient_exact(&v, &v, 0.0),
            Err(Error::NonDifferentiable)
        ));
        let g = negativity_gradient(&v, &v, 0.0).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(g.plus[i], g.minus[i], epsilon = 1e-9);
            assert!(g.plus[i].abs() > 1e-3, "partials should be nonzero");
        }
        // exchange symmetry away from the degenerate point
        let w = CovMat2::new(1.3, -0.1, 0.8);
        let ab = raw_en(&v, &w, 0.0).unwrap();
        let ba = raw_en(&w, &v, 0.0).unwrap();
        assert_abs_diff_eq!(ab, ba, epsilon = 1e-13);
    }

    #[test]
    fn uniform_scaling_directional_derivative() {
        let d = reference();
        let (vp, vm) = steady_pair(&d);
        let g = negativity_gradient_exact(&vp, &vm, d.epsilon).unwrap();
        let dot = g.plus[0] * vp.vqq
            + g.plus[1] * vp.vqp
            + g.plus[2] * vp.vpp
            + g.minus[0] * vm.vqq
            + g.minus[1] * vm.vqp
            + g.minus[2] * vm.vpp;
        let delta = 1e-5;
        let up = raw_en(&vp.scale(1.0 + delta), &vm.scale(1.0 + delta), d.epsilon).unwrap();
        let down = raw_en(&vp.scale(1.0 - delta), &vm.scale(1.0 - delta), d.epsilon).unwrap();
        let fd = (up - down) / (2.0 * delta);
        assert_relative_eq!(dot, fd, max_relative = 1e-4);
    }

    #[test]
    fn moment_matrix_of_vacuum() {
        let m = covariance_moment_matrix(&CovMat2::vacuum(), MomentConvention::Symmetric);
        assert_eq!(m.qq_qq, 2.0);
        assert_eq!(m.qp_qp, 1.0);
        assert_eq!(m.pp_pp, 2.0);
        assert_eq!(m.qq_qp, 0.0);
        assert_eq!(m.qq_pp, 0.0);
        assert_eq!(m.pp_qp, 0.0);
    }

    #[test]
    fn moment_matrix_fixtures_and_homogeneity() {
        let d = reference();
        let (vp, _) = steady_pair(&d);
        let m = covariance_moment_matrix(&vp, MomentConvention::Symmetric);
        assert_relative_eq!(m.qq_qq, 8.54269085229682590e-1, max_relative = 1e-10);
        assert_relative_eq!(m.qp_qp, 2.21300555124074805e0, max_relative = 1e-10);
        assert_relative_eq!(m.pp_pp, 1.22563081665090738e1, max_relative = 1e-10);
        assert_relative_eq!(m.qq_qp, 1.00835962091957110e0, max_relative = 1e-10);
        assert_relative_eq!(m.qq_pp, 1.19024455254363160e0, max_relative = 1e-10);
        assert_relative_eq!(m.pp_qp, 3.81942456784833606e0, max_relative = 1e-10);

        // quadratic homogeneity under the symmetric convention
        let c = 3.7;
        let ms = covariance_moment_matrix(&vp.scale(c), MomentConvention::Symmetric);
        assert_relative_eq!(ms.qq_qq, c * c * m.qq_qq, max_relative = 1e-12);
        assert_relative_eq!(ms.pp_pp, c * c * m.pp_pp, max_relative = 1e-12);
        assert_relative_eq!(ms.pp_qp, c * c * m.pp_qp, max_relative = 1e-12);

        // the linear-pp variant differs exactly in that one entry
        let ml = covariance_moment_matrix(&vp, MomentConvention::PpLinear);
        assert_relative_eq!(ml.pp_pp, 2.0 * vp.vpp, max_relative = 1e-14);
        assert_eq!(ml.qq_qq, m.qq_qq);
    }

    #[test]
    fn variance_trivial_cases() {
        let v = CovMat2::vacuum();
        let zero = NegativityGradient { plus: [0.0; 3], minus: [0.0; 3] };
        assert_eq!(variance_en(&zero, &v, &v, MomentConvention::Symmetric).unwrap(), 0.0);

        // single unit qq partial against a unit covariance: 2 * 1^2 * 1^2
        let single = NegativityGradient { plus: [1.0, 0.0, 0.0], minus: [0.0; 3] };
        assert_eq!(
            variance_en(&single, &v, &v, MomentConvention::Symmetric).unwrap(),
            2.0
        );
    }

    #[test]
    fn variance_fixture_at_reference() {
        let d = reference();
        let (vp, vm) = steady_pair(&d);
        let g = negativity_gradient_exact(&vp, &vm, d.epsilon).unwrap();
        let var = variance_en(&g, &vp, &vm, MomentConvention::Symmetric).unwrap();
        assert_relative_eq!(var, 2.08136898100569967e0, max_relative = 1e-10);
        let var_lin = variance_en(&g, &vp, &vm, MomentConvention::PpLinear).unwrap();
        assert_relative_eq!(var_lin, 5.14224467902589133e-1, max_relative = 1e-10);
    }

    #[test]
    fn budget_fixture_and_scalings() {
        let d = reference();
        let (vp, vm) = steady_pair(&d);
        let en = raw_en(&vp, &vm, d.epsilon).unwrap();
        let g = negativity_gradient_exact(&vp, &vm, d.epsilon).unwrap();
        let var = variance_en(&g, &vp, &vm, MomentConvention::Symmetric).unwrap();
        let b = snr_budget(&d, en, var, 1.0, 1.0).unwrap();
        assert_eq!(b.n_meas, 7287);
        assert_relative_eq!(b.t_meas, 7.04971742934954136e2, max_relative = 1e-12);
        assert_relative_eq!(b.tau, 5.13712909076701012e6, max_relative = 1e-10);

        // variance x4 quadruples the count (up to the ceiling) and is
        // identical to doubling the target
        let b4 = snr_budget(&d, en, 4.0 * var, 1.0, 1.0).unwrap();
        assert!((b4.n_meas as f64 / b.n_meas as f64 - 4.0).abs() < 1e-3);
        let doubled = snr_budget(&d, en, var, 2.0, 1.0).unwrap();
        assert_eq!(doubled.n_meas, b4.n_meas);
        assert_relative_eq!(b4.tau, b4.n_meas as f64 * b.t_meas, max_relative = 1e-12);

        // zero target costs nothing
        let b0 = snr_budget(&d, en, var, 0.0, 1.0).unwrap();
        assert_eq!(b0.n_meas, 0);
        assert_eq!(b0.tau, 0.0);

        // separable input is refused
        assert!(matches!(
            snr_budget(&d, -0.01, var, 1.0, 1.0),
            Err(Error::NotEntangled { .. })
        ));
    }

    #[test]
    fn weak_damping_negativity_fixture() {
        let d = reference();
        let c = PhysicalConstants::codata2018();
        let en = small_coupling_negativity(&d, c.grav, 2e4);
        assert_relative_eq!(en, 1.32380060688171309e-2, max_relative = 1e-12);
        // linear in the density
        assert_relative_eq!(
            small_coupling_negativity(&d, c.grav, 4e4),
            2.0 * en,
            max_relative = 1e-14
        );
        // same order as the closed-form value, but a different truncation
        let full = crate::steady::analytic_negativity(&d).unwrap();
        let ratio = en / full;
        assert!(ratio > 0.3 && ratio < 3.0, "ratio {ratio}");
        assert!((en - full).abs() / full > 1e-3);
    }
}
