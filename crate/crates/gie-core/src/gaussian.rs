//! Gaussian-state algebra on small covariance matrices.
//!
//! Normalization convention, fixed once for the whole crate: quadratures
//! satisfy [q, p] = 2i, so the vacuum state has covariance equal to the
//! identity and a thermal state with occupation n has (2n + 1) * I. Under
//! this convention a single-mode state is physical when det V >= 1 and the
//! purity is 1/sqrt(det V).

use nalgebra::{Matrix2, Matrix4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric 2x2 covariance of one mechanical mode, stored as its three
/// independent entries so symmetry is structural.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovMat2 {
    pub vqq: f64,
    pub vqp: f64,
    pub vpp: f64,
}

impl CovMat2 {
    pub const fn new(vqq: f64, vqp: f64, vpp: f64) -> Self {
        Self { vqq, vqp, vpp }
    }

    /// Vacuum covariance (identity).
    pub const fn vacuum() -> Self {
        Self::new(1.0, 0.0, 1.0)
    }

    /// Thermal covariance (2n + 1) * I.
    pub fn thermal(occupation: f64) -> Self {
        Self::scalar(2.0 * occupation + 1.0)
    }

    /// s * I.
    pub const fn scalar(s: f64) -> Self {
        Self::new(s, 0.0, s)
    }

    pub fn from_matrix(m: &Matrix2<f64>) -> Self {
        Self::new(m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)])
    }

    pub fn as_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.vqq, self.vqp, self.vqp, self.vpp)
    }

    pub fn det(&self) -> f64 {
        self.vqq * self.vpp - self.vqp * self.vqp
    }

    pub fn trace(&self) -> f64 {
        self.vqq + self.vpp
    }

    /// Eigenvalues, smallest first.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mid = 0.5 * (self.vqq + self.vpp);
        let rad = (0.25 * (self.vqq - self.vpp).powi(2) + self.vqp * self.vqp).sqrt();
        (mid - rad, mid + rad)
    }

    /// Positive semidefinite within an absolute slack on the eigenvalues.
    pub fn is_psd(&self, tol: f64) -> bool {
        self.eigenvalues().0 >= -tol
    }

    /// Whether the state satisfies the single-mode uncertainty bound
    /// det V >= 1 up to `slack`.
    pub fn is_physical(&self, slack: f64) -> bool {
        self.det() >= 1.0 - slack
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(c * self.vqq, c * self.vqp, c * self.vpp)
    }
}

/// 4x4 covariance of the two individual mirrors, stored by blocks. `va` and
/// `vb` are the single-mirror blocks, `vab` the cross-mirror correlation
/// (a general 2x2 matrix).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovMat4 {
    pub va: CovMat2,
    pub vb: CovMat2,
    pub vab: Matrix2<f64>,
}

impl CovMat4 {
    pub fn as_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<2, 2>(0, 0).copy_from(&self.va.as_matrix());
        m.fixed_view_mut::<2, 2>(2, 2).copy_from(&self.vb.as_matrix());
        m.fixed_view_mut::<2, 2>(0, 2).copy_from(&self.vab);
        m.fixed_view_mut::<2, 2>(2, 0).copy_from(&self.vab.transpose());
        m
    }

    pub fn det(&self) -> f64 {
        self.as_matrix().determinant()
    }

    pub fn det_ab(&self) -> f64 {
        self.vab.determinant()
    }
}

/// The mode-mixing map sending the (+, -) mode pair to the two individual
/// mirrors. For nonzero gravitational coupling the splitter is unbalanced
/// by the quartic root of (1 - epsilon) on the differential quadratures.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSplitter {
    s: Matrix4<f64>,
    epsilon: f64,
}

impl BeamSplitter {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::EpsilonOutOfRange { epsilon });
        }
        let u = (1.0 - epsilon).powf(0.25);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        #[rustfmt::skip]
        let s = Matrix4::new(
            r,   0.0, r / u,  0.0,
            0.0, r,   0.0,    r * u,
            r,   0.0, -r / u, 0.0,
            0.0, r,   0.0,    -r * u,
        );
        Ok(Self { s, epsilon })
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.s
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Maps the two mode covariances to the mirror-basis covariance
    /// S * diag(V+, V-) * S^T.
    pub fn combine(&self, v_plus: &CovMat2, v_minus: &CovMat2) -> Result<CovMat4> {
        let psd_tol = 1e-9 * (1.0 + v_plus.trace().abs() + v_minus.trace().abs());
        if !v_plus.is_psd(psd_tol) {
            return Err(Error::NotPsd { what: "plus-mode covariance" });
        }
        if !v_minus.is_psd(psd_tol) {
            return Err(Error::NotPsd { what: "minus-mode covariance" });
        }
        let mut block = Matrix4::zeros();
        block.fixed_view_mut::<2, 2>(0, 0).copy_from(&v_plus.as_matrix());
        block.fixed_view_mut::<2, 2>(2, 2).copy_from(&v_minus.as_matrix());
        let full = self.s * block * self.s.transpose();
        Ok(CovMat4 {
            va: CovMat2::from_matrix(&full.fixed_view::<2, 2>(0, 0).into_owned()),
            vb: CovMat2::from_matrix(&full.fixed_view::<2, 2>(2, 2).into_owned()),
            vab: full.fixed_view::<2, 2>(0, 2).into_owned(),
        })
    }
}

/// The 4x4 symplectic form with [[0,1],[-1,0]] blocks on the diagonal.
pub fn symplectic_form() -> Matrix4<f64> {
    #[rustfmt::skip]
    let j = Matrix4::new(
        0.0, 1.0, 0.0, 0.0,
        -1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
        0.0, 0.0, -1.0, 0.0,
    );
    j
}

/// Logarithmic negativity of a two-mirror covariance. `raw` may be
/// negative (separable); `clamped` is max(raw, 0). The state is entangled
/// exactly when `raw > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNegativity {
    pub raw: f64,
    pub clamped: f64,
}

impl LogNegativity {
    pub fn entangled(&self) -> bool {
        self.raw > 0.0
    }
}

/// Closed-form logarithmic negativity from the block determinants:
/// with Sigma = det VA + det VB - 2 det VAB,
/// E_N = -1/2 log2[(Sigma - sqrt(Sigma^2 - 4 det V)) / 2].
pub fn log_negativity(v: &CovMat4) -> Result<LogNegativity> {
    let det_a = v.va.det();
    let det_b = v.vb.det();
    let det_ab = v.det_ab();
    let det_v = v.det();
    let sigma = det_a + det_b - 2.0 * det_ab;
    let disc = sigma * sigma - 4.0 * det_v;
    let disc = if disc < 0.0 {
        if disc < -1e-12 * sigma * sigma {
            return Err(Error::ComplexBranch { discriminant: disc });
        }
        0.0
    } else {
        disc
    };
    let x = 0.5 * (sigma - disc.sqrt());
    if x <= 0.0 {
        return Err(Error::SingularCovariance { det: x });
    }
    let raw = -0.5 * x.log2();
    Ok(LogNegativity { raw, clamped: raw.max(0.0) })
}

/// Purity 1/sqrt(det V) of a single-mode Gaussian state; 1 for pure
/// states. Inputs with 0 < det < 1 are conditionally possible only as
/// numerical transients, so they are not rejected here; callers that care
/// should check [`CovMat2::is_physical`].
pub fn purity(v: &CovMat2) -> Result<f64> {
    let det = v.det();
    if det <= 0.0 {
        return Err(Error::SingularCovariance { det });
    }
    Ok(1.0 / det.sqrt())
}

/// Orientation and strength of the squeezing of a single-mode state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezingDiagnostics {
    /// Angle of the minimum-variance principal axis, measured from the q
    /// axis, in (-pi/2, pi/2].
    pub angle: f64,
    /// lambda_min / lambda_max of the covariance, in (0, 1].
    pub eig_ratio: f64,
}

/// Principal-axis diagnostics. Degenerate (isotropic) covariances return
/// angle 0 and ratio 1 so the output stays deterministic.
pub fn squeezing_diagnostics(v: &CovMat2) -> SqueezingDiagnostics {
    let (lo, hi) = v.eigenvalues();
    let rad = 0.5 * (hi - lo);
    if rad <= 1e-14 * hi.abs().max(1.0) {
        return SqueezingDiagnostics { angle: 0.0, eig_ratio: 1.0 };
    }
    // Major axis at 1/2 atan2(2 vqp, vqq - vpp); the minor axis sits a
    // quarter turn away, folded back into (-pi/2, pi/2].
    let major = 0.5 * (2.0 * v.vqp).atan2(v.vqq - v.vpp);
    let mut angle = major - std::f64::consts::FRAC_PI_2;
    if angle <= -std::f64::consts::FRAC_PI_2 {
        angle += std::f64::consts::PI;
    }
    SqueezingDiagnostics { angle, eig_ratio: lo / hi }
}
