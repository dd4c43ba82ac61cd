//! Shared test support: independent oracles (fixed-step reference
//! integrator, partial-transpose symplectic spectra, Gaussian sampling)
//! and seeded random generators. Everything here deliberately avoids the
//! closed-form paths in the library it checks.

#![allow(dead_code)]

use nalgebra::{Matrix2, Matrix4};
use rand::Rng;
use rand_distr::StandardNormal;

use gie_core::gaussian::{symplectic_form, CovMat2, CovMat4};
use gie_core::params::{derive, DerivedParams, ExperimentParams, PhysicalConstants};
use gie_core::riccati::ModeSystem;

pub fn reference_params() -> ExperimentParams {
    ExperimentParams::reference()
}

pub fn reference_derived() -> DerivedParams {
    derive(&ExperimentParams::reference(), &PhysicalConstants::codata2018()).unwrap()
}

/// Classical fixed-step 4th-order Runge-Kutta reference. Steps land
/// exactly on every grid time by splitting each interval into equal steps
/// no longer than `h_max`.
pub fn rk4_reference(sys: &ModeSystem, v0: CovMat2, grid: &[f64], h_max: f64) -> Vec<(f64, CovMat2)> {
    let mut out = Vec::with_capacity(grid.len());
    let mut t = 0.0;
    let mut y = v0.as_matrix();
    for &tg in grid {
        let span = tg - t;
        if span > 0.0 {
            let n = (span / h_max).ceil().max(1.0) as usize;
            let h = span / n as f64;
            for _ in 0..n {
                y = rk4_step(sys, &y, h);
            }
            t = tg;
        }
        out.push((tg, CovMat2::from_matrix(&y)));
    }
    out
}

fn rk4_step(sys: &ModeSystem, y: &Matrix2<f64>, h: f64) -> Matrix2<f64> {
    let k1 = sys.rhs(y);
    let k2 = sys.rhs(&(y + k1 * (0.5 * h)));
    let k3 = sys.rhs(&(y + k2 * (0.5 * h)));
    let k4 = sys.rhs(&(y + k3 * h));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Symplectic eigenvalues of the partial transpose of `v`, smallest
/// first, computed by brute force: the moduli of the (imaginary)
/// eigenvalues of J * (P v P) with P flipping the second mirror's
/// momentum.
pub fn pt_symplectic_eigs(v: &CovMat4) -> (f64, f64) {
    let p = Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, 1.0, 1.0, -1.0));
    let vt = p * v.as_matrix() * p;
    let m = symplectic_form() * vt;
    let eig = m.complex_eigenvalues();
    let mut mags: Vec<f64> = eig.iter().map(|z| z.im.abs()).collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // eigenvalues come in +-i nu pairs
    assert!((mags[0] - mags[1]).abs() <= 1e-9 * (1.0 + mags[1]));
    assert!((mags[2] - mags[3]).abs() <= 1e-9 * (1.0 + mags[3]));
    (0.5 * (mags[0] + mags[1]), 0.5 * (mags[2] + mags[3]))
}

fn rot2(phi: f64) -> Matrix2<f64> {
    Matrix2::new(phi.cos(), phi.sin(), -phi.sin(), phi.cos())
}

fn squeeze2(r: f64) -> Matrix2<f64> {
    Matrix2::new(r.exp(), 0.0, 0.0, (-r).exp())
}

fn direct_sum(a: &Matrix2<f64>, b: &Matrix2<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<2, 2>(0, 0).copy_from(a);
    m.fixed_view_mut::<2, 2>(2, 2).copy_from(b);
    m
}

fn mode_mixer(theta: f64) -> Matrix4<f64> {
    let (c, s) = (theta.cos(), theta.sin());
    #[rustfmt::skip]
    let m = Matrix4::new(
        c, 0.0, s, 0.0,
        0.0, c, 0.0, s,
        -s, 0.0, c, 0.0,
        0.0, -s, 0.0, c,
    );
    m
}

/// Random physical two-mode covariance: a thermal-spectrum diagonal
/// conjugated by a random symplectic built from local rotations,
/// single-mode squeezers and mode mixers. Squeezing through the mixers
/// produces both separable and entangled states.
pub fn random_physical_cov4(rng: &mut impl Rng) -> CovMat4 {
    let nu1 = 1.0 + 2.0 * rng.random::<f64>();
    let nu2 = 1.0 + 2.0 * rng.random::<f64>();
    let d = Matrix4::from_diagonal(&nalgebra::Vector4::new(nu1, nu1, nu2, nu2));
    let tau = std::f64::consts::TAU;
    let t = direct_sum(&rot2(rng.random::<f64>() * tau), &rot2(rng.random::<f64>() * tau))
        * mode_mixer(rng.random::<f64>() * tau)
        * direct_sum(
            &squeeze2(2.0 * rng.random::<f64>() - 1.0),
            &squeeze2(2.0 * rng.random::<f64>() - 1.0),
        )
        * mode_mixer(rng.random::<f64>() * tau)
        * direct_sum(&rot2(rng.random::<f64>() * tau), &rot2(rng.random::<f64>() * tau));
    let full = t * d * t.transpose();
    let sym = 0.5 * (full + full.transpose());
    CovMat4 {
        va: CovMat2::from_matrix(&sym.fixed_view::<2, 2>(0, 0).into_owned()),
        vb: CovMat2::from_matrix(&sym.fixed_view::<2, 2>(2, 2).into_owned()),
        vab: sym.fixed_view::<2, 2>(0, 2).into_owned(),
    }
}

/// Log-uniform multiplier in [1/breadth, breadth].
pub fn log_uniform_factor(rng: &mut impl Rng, breadth: f64) -> f64 {
    let u = 2.0 * rng.random::<f64>() - 1.0;
    (u * breadth.ln()).exp()
}

/// Random parameter set in the pinned x3 log-uniform neighborhood of the
/// reference values, the distribution used for the in-regime suites.
pub fn draw_near_reference(rng: &mut impl Rng) -> ExperimentParams {
    let mut p = ExperimentParams::reference();
    p.temperature *= log_uniform_factor(rng, 3.0);
    p.input_power *= log_uniform_factor(rng, 3.0);
    p.mass *= log_uniform_factor(rng, 3.0);
    p.cavity_decay *= log_uniform_factor(rng, 3.0);
    p.feedback_damping *= log_uniform_factor(rng, 3.0);
    p.mech_freq *= log_uniform_factor(rng, 3.0);
    p.density *= log_uniform_factor(rng, 3.0);
    p
}

/// One standard-normal pair correlated per `v`, via its Cholesky factor.
pub fn sample_gaussian_pair(rng: &mut impl Rng, v: &CovMat2) -> (f64, f64) {
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    let l11 = v.vqq.sqrt();
    let l21 = v.vqp / l11;
    let l22 = (v.vpp - l21 * l21).max(0.0).sqrt();
    (l11 * z1, l21 * z1 + l22 * z2)
}

/// Relative difference against the larger magnitude.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
