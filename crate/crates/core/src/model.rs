//! The vector-field family on the 3-sphere, its symmetry-reduced forms,
//! group actions, closed-form linearizations and derived constants.
//!
//! The full system lives in `R^4`; a rotational symmetry quotient gives a
//! 3D system in `(rho, x3, x4)` and, on the invariant two-sphere, a planar
//! system in `(x3, x4)`. All evaluations are plain polynomial arithmetic
//! with a fixed term order so results are bit-reproducible.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::ModelError;

/// Coefficients of the vector-field family plus the amplitude `kappa` of the
/// optional term that breaks every symmetry together with sphere invariance.
///
/// Constructed through [`ModelParams::new`], which enforces the parameter
/// constraints; all downstream operations assume a validated value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    alpha: f64,
    beta: f64,
    omega: f64,
    tau1: f64,
    tau2: f64,
    kappa: f64,
}

impl ModelParams {
    /// Validates `beta < 0 < alpha`, `beta^2 < 8 alpha^2`, `|beta| < |alpha|`,
    /// `tau1, tau2 in [0, 1]` and `kappa >= 0`.
    pub fn new(
        alpha: f64,
        beta: f64,
        omega: f64,
        tau1: f64,
        tau2: f64,
        kappa: f64,
    ) -> Result<Self, ModelError> {
        let all = [alpha, beta, omega, tau1, tau2, kappa];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidParams("parameters must be finite".into()));
        }
        if !(beta < 0.0 && 0.0 < alpha) {
            return Err(ModelError::InvalidParams(format!(
                "need beta < 0 < alpha, got alpha={alpha}, beta={beta}"
            )));
        }
        if !(beta * beta < 8.0 * alpha * alpha) {
            return Err(ModelError::InvalidParams(format!(
                "need beta^2 < 8 alpha^2, got alpha={alpha}, beta={beta}"
            )));
        }
        if !(beta.abs() < alpha.abs()) {
            return Err(ModelError::InvalidParams(format!(
                "need |beta| < |alpha|, got alpha={alpha}, beta={beta}"
            )));
        }
        if !(omega > 0.0) {
            return Err(ModelError::InvalidParams(format!("need omega > 0, got {omega}")));
        }
        for (name, v) in [("tau1", tau1), ("tau2", tau2)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ModelError::InvalidParams(format!(
                    "need {name} in [0, 1], got {v}"
                )));
            }
        }
        if !(kappa >= 0.0) {
            return Err(ModelError::InvalidParams(format!("need kappa >= 0, got {kappa}")));
        }
        Ok(Self { alpha, beta, omega, tau1, tau2, kappa })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn omega(&self) -> f64 {
        self.omega
    }
    pub fn tau1(&self) -> f64 {
        self.tau1
    }
    pub fn tau2(&self) -> f64 {
        self.tau2
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Same coefficients with different symmetry-breaking amplitudes.
    pub fn with_taus(&self, tau1: f64, tau2: f64) -> Result<Self, ModelError> {
        Self::new(self.alpha, self.beta, self.omega, tau1, tau2, self.kappa)
    }
}

/// Equilibrium at the north pole `(0, 0, 0, 1)`.
pub const O1: [f64; 4] = [0.0, 0.0, 0.0, 1.0];
/// Equilibrium at the south pole `(0, 0, 0, -1)`.
pub const O2: [f64; 4] = [0.0, 0.0, 0.0, -1.0];

pub fn norm_sq_4d(x: &[f64; 4]) -> f64 {
    x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3]
}

/// Full 4D vector field. Terms are summed in their printed order, with the
/// `kappa` perturbation appended last, so values are bit-stable.
pub fn eval_field_4d(p: &ModelParams, x: &[f64; 4]) -> [f64; 4] {
    let (x1, x2, x3, x4) = (x[0], x[1], x[2], x[3]);
    let (al, be, om) = (p.alpha, p.beta, p.omega);
    let (t1, t2, ka) = (p.tau1, p.tau2, p.kappa);
    let r2 = x1 * x1 + x2 * x2 + x3 * x3 + x4 * x4;

    let mut f = [
        x1 * (1.0 - r2) - om * x2 - al * x1 * x4 + be * x1 * x4 * x4 + t2 * x1 * x3 * x4,
        x2 * (1.0 - r2) + om * x1 - al * x2 * x4 + be * x2 * x4 * x4,
        x3 * (1.0 - r2) + al * x3 * x4 + be * x3 * x4 * x4 + t1 * x4 * x4 * x4
            - t2 * x1 * x1 * x4,
        x4 * (1.0 - r2) - al * (x3 * x3 - x1 * x1 - x2 * x2)
            - be * x4 * (x1 * x1 + x2 * x2 + x3 * x3)
            - t1 * x3 * x4 * x4,
    ];
    if ka != 0.0 {
        f[0] += ka * (x1 * x3 * x4);
        f[1] += ka * (-x1 * x2 * x2);
        f[2] += ka * (x3 * x3 * x3);
        f[3] += ka * (-x1 * x3 * x4);
    }
    f
}

/// Analytic Jacobian of [`eval_field_4d`], rows indexed by equation.
pub fn eval_jacobian_4d(p: &ModelParams, x: &[f64; 4]) -> [[f64; 4]; 4] {
    let (x1, x2, x3, x4) = (x[0], x[1], x[2], x[3]);
    let (al, be, om) = (p.alpha, p.beta, p.omega);
    let (t1, t2, ka) = (p.tau1, p.tau2, p.kappa);
    let r2 = norm_sq_4d(x);

    [
        [
            (1.0 - r2) - 2.0 * x1 * x1 - al * x4 + be * x4 * x4 + (t2 + ka) * x3 * x4,
            -2.0 * x1 * x2 - om,
            -2.0 * x1 * x3 + (t2 + ka) * x1 * x4,
            -2.0 * x1 * x4 - al * x1 + 2.0 * be * x1 * x4 + (t2 + ka) * x1 * x3,
        ],
        [
            -2.0 * x2 * x1 + om - ka * x2 * x2,
            (1.0 - r2) - 2.0 * x2 * x2 - al * x4 + be * x4 * x4 - 2.0 * ka * x1 * x2,
            -2.0 * x2 * x3,
            -2.0 * x2 * x4 - al * x2 + 2.0 * be * x2 * x4,
        ],
        [
            -2.0 * x3 * x1 - 2.0 * t2 * x1 * x4,
            -2.0 * x3 * x2,
            (1.0 - r2) - 2.0 * x3 * x3 + al * x4 + be * x4 * x4 + 3.0 * ka * x3 * x3,
            -2.0 * x3 * x4 + al * x3 + 2.0 * be * x3 * x4 + 3.0 * t1 * x4 * x4 - t2 * x1 * x1,
        ],
        [
            -2.0 * x4 * x1 + 2.0 * al * x1 - 2.0 * be * x4 * x1 - ka * x3 * x4,
            -2.0 * x4 * x2 + 2.0 * al * x2 - 2.0 * be * x4 * x2,
            -2.0 * x4 * x3 - 2.0 * al * x3 - 2.0 * be * x4 * x3 - t1 * x4 * x4 - ka * x1 * x4,
            (1.0 - r2) - 2.0 * x4 * x4 - be * (x1 * x1 + x2 * x2 + x3 * x3)
                - 2.0 * t1 * x3 * x4
                - ka * x1 * x3,
        ],
    ]
}

/// Quotient field on the rotation-group orbit space, coordinates
/// `(rho, x3, x4)` with `rho^2 = x1^2 + x2^2`. Only defined for `tau2 = 0`.
pub fn eval_field_3d(p: &ModelParams, y: &[f64; 3]) -> Result<[f64; 3], ModelError> {
    if p.tau2 != 0.0 {
        return Err(ModelError::QuotientInvalid(p.tau2));
    }
    let (rho, x3, x4) = (y[0], y[1], y[2]);
    let (al, be, t1) = (p.alpha, p.beta, p.tau1);
    let r2 = rho * rho + x3 * x3 + x4 * x4;
    Ok([
        rho * (1.0 - r2) - al * rho * x4 + be * rho * x4 * x4,
        x3 * (1.0 - r2) + al * x3 * x4 + be * x3 * x4 * x4 + t1 * x4 * x4 * x4,
        x4 * (1.0 - r2) - al * (x3 * x3 - rho * rho) - be * x4 * (rho * rho + x3 * x3)
            - t1 * x3 * x4 * x4,
    ])
}

/// Planar system obtained from the quotient flow on the unit two-sphere,
/// coordinates `(x3, x4)`. `omega`, `tau2` and `kappa` play no role here.
pub fn eval_field_2d(p: &ModelParams, z: &[f64; 2]) -> [f64; 2] {
    let (x3, x4) = (z[0], z[1]);
    let (al, be, t1) = (p.alpha, p.beta, p.tau1);
    [
        al * x3 * x4 + be * x3 * x4 * x4 + t1 * x4 * x4 * x4,
        al * (1.0 - 2.0 * x3 * x3 - x4 * x4) + be * x4 * (x4 * x4 - 1.0) - t1 * x3 * x4 * x4,
    ]
}

/// Analytic 2x2 Jacobian of [`eval_field_2d`].
pub fn eval_jacobian_2d(p: &ModelParams, z: &[f64; 2]) -> [[f64; 2]; 2] {
    let (x3, x4) = (z[0], z[1]);
    let (al, be, t1) = (p.alpha, p.beta, p.tau1);
    [
        [
            al * x4 + be * x4 * x4,
            al * x3 + 2.0 * be * x3 * x4 + 3.0 * t1 * x4 * x4,
        ],
        [
            -4.0 * al * x3 - t1 * x4 * x4,
            -2.0 * al * x4 + be * (3.0 * x4 * x4 - 1.0) - 2.0 * t1 * x3 * x4,
        ],
    ]
}

/// Elements of the symmetry group acting on the 4D phase space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GroupElement {
    /// Planar rotation by `psi` in `(x1, x2)`, fixing `(x3, x4)`.
    Rotation(f64),
    /// Negates `x3` only.
    Gamma2,
    /// Negates `x1` and `x2` only; equals `Rotation(pi)`.
    GammaPi,
}

pub fn group_apply(g: GroupElement, x: &[f64; 4]) -> [f64; 4] {
    match g {
        GroupElement::Rotation(psi) => {
            let (c, s) = (psi.cos(), psi.sin());
            [
                x[0] * c - x[1] * s,
                x[0] * s + x[1] * c,
                x[2],
                x[3],
            ]
        }
        GroupElement::Gamma2 => [x[0], x[1], -x[2], x[3]],
        GroupElement::GammaPi => [-x[0], -x[1], x[2], x[3]],
    }
}

/// Deterministic sequence of uniform points on the unit 3-sphere.
pub fn sphere_samples(n: usize, seed: u64) -> Vec<[f64; 4]> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        // Gaussian 4-vector by Box-Muller, normalized.
        let mut g = [0.0f64; 4];
        for pair in 0..2 {
            let u1: f64 = rng.random::<f64>().max(1e-300);
            let u2: f64 = rng.random::<f64>();
            let r = (-2.0 * u1.ln()).sqrt();
            g[2 * pair] = r * (2.0 * PI * u2).cos();
            g[2 * pair + 1] = r * (2.0 * PI * u2).sin();
        }
        let n2 = norm_sq_4d(&g);
        if n2 < 1e-12 {
            continue;
        }
        let inv = 1.0 / n2.sqrt();
        out.push([g[0] * inv, g[1] * inv, g[2] * inv, g[3] * inv]);
    }
    out
}

/// Max over seeded sphere points of `||f(g x) - g f(x)||_2`.
pub fn equivariance_defect(p: &ModelParams, g: GroupElement, n_samples: usize, seed: u64) -> f64 {
    let mut worst = 0.0f64;
    for x in sphere_samples(n_samples.max(1), seed) {
        let lhs = eval_field_4d(p, &group_apply(g, &x));
        let gfx = group_apply(g, &eval_field_4d(p, &x));
        let d2: f64 = lhs
            .iter()
            .zip(gfx.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        worst = worst.max(d2.sqrt());
    }
    worst
}

/// Result of probing `<f(x), x>` on the unit sphere.
#[derive(Debug, Clone, Copy)]
pub struct TangencyReport {
    /// Max `|<f(x), x>|` over the sampled points.
    pub defect: f64,
    /// False when `kappa != 0`; the perturbed field is not tangent to the sphere.
    pub guaranteed: bool,
}

pub fn sphere_tangency_defect(p: &ModelParams, n_samples: usize, seed: u64) -> TangencyReport {
    let mut worst = 0.0f64;
    for x in sphere_samples(n_samples.max(1), seed) {
        let f = eval_field_4d(p, &x);
        let dot: f64 = f.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
        worst = worst.max(dot.abs());
    }
    TangencyReport { defect: worst, guaranteed: p.kappa == 0.0 }
}

/// Linearization rates, saddle values and twisting numbers of the flow
/// near the two polar equilibria.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    pub c1: f64,
    pub c2: f64,
    pub e1: f64,
    pub e2: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta: f64,
    pub k: f64,
    pub komega: f64,
}

pub fn derived_constants(p: &ModelParams) -> DerivedConstants {
    let c = p.alpha - p.beta;
    let e = p.alpha + p.beta;
    let d = c / e;
    let denom = e * e;
    DerivedConstants {
        c1: c,
        c2: c,
        e1: e,
        e2: e,
        delta1: d,
        delta2: d,
        delta: d * d,
        k: 2.0 * p.alpha / denom,
        komega: 2.0 * p.alpha * p.omega / denom,
    }
}

/// Qualitative dynamics predicted from the twisting number and the ratio
/// of the two symmetry-breaking amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Torus,
    Transition,
    Horseshoe,
}

/// Lower regime boundary `1 / sqrt(1 + K_omega^2)`.
pub fn h1_curve(komega: f64) -> Result<f64, ModelError> {
    if !(komega > 0.0) {
        return Err(ModelError::DomainError(format!("need K_omega > 0, got {komega}")));
    }
    Ok(1.0 / (1.0 + komega * komega).sqrt())
}

/// Upper regime boundary `(exp(6 pi / K_omega) - 1) / (exp(6 pi / K_omega) - 1/6)`.
pub fn h2_curve(komega: f64) -> Result<f64, ModelError> {
    if !(komega > 0.0) {
        return Err(ModelError::DomainError(format!("need K_omega > 0, got {komega}")));
    }
    // Evaluated via exp(-6 pi / K) so small K does not overflow.
    let em = (-6.0 * PI / komega).exp();
    Ok((1.0 - em) / (1.0 - em / 6.0))
}

/// Classifies a ratio `tau2 / tau1` against the two boundary curves.
pub fn predicted_regime(komega: f64, ratio: f64) -> Result<Regime, ModelError> {
    if !ratio.is_finite() {
        return Err(ModelError::DomainError(format!(
            "amplitude ratio is not finite ({ratio}); tau1 must be nonzero"
        )));
    }
    let h1 = h1_curve(komega)?;
    let h2 = h2_curve(komega)?;
    Ok(if ratio < h1 {
        Regime::Torus
    } else if ratio > h2 {
        Regime::Horseshoe
    } else {
        Regime::Transition
    })
}
