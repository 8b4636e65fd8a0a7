//! Lyapunov-spectrum estimation by integrating the variational flow of a
//! tangent frame with periodic Gram-Schmidt reorthonormalization, and the
//! spectral-signature attractor classification used by the parameter sweep.

use crate::error::LyapunovError;
use crate::integrate::{propagate_with, project_unit, IntegratorConfig};
use crate::model::{self, ModelParams};

/// Spectrum-run policy. The transient discarded before accumulating is
/// taken from [`IntegratorConfig::t_transient`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovSettings {
    /// Total integration time, transient included.
    pub t_total: f64,
    /// Time between tangent-frame reorthonormalizations.
    pub gs_interval: f64,
    /// Half-width of the band around zero used to call an exponent "zero".
    pub zero_tol: f64,
    /// Converged when every exponent moved less than this over the last
    /// tenth of the run.
    pub convergence_tol: f64,
}

impl Default for LyapunovSettings {
    fn default() -> Self {
        Self { t_total: 3750.0, gs_interval: 0.5, zero_tol: 0.01, convergence_tol: 0.005 }
    }
}

/// Ordered exponents plus convergence diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    /// On-sphere spectrum: the three largest exponents, descending.
    pub exponents: [f64; 3],
    /// The discarded most-negative exponent (radial contraction rate).
    pub radial_exponent: f64,
    pub t_total: f64,
    pub gs_interval: f64,
    pub converged: bool,
    /// Max movement of any raw exponent estimate over the last 10% of the run.
    pub tail_variation: f64,
    /// Time average of the Jacobian trace along the orbit; the sum of all
    /// four raw exponents should match it (divergence identity).
    pub mean_divergence: f64,
}

impl SpectrumResult {
    pub fn sum_raw(&self) -> f64 {
        self.exponents.iter().sum::<f64>() + self.radial_exponent
    }
}

/// Attractor classes keyed by the number of non-negative exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttractorLabel {
    FixedPoint,
    LimitCycle,
    TorusOrChaos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttractorClass {
    pub label: AttractorLabel,
    pub nonneg_count: usize,
    pub color: [u8; 3],
    /// Raised when the leading exponent is well above the zero band,
    /// hinting chaos rather than a torus.
    pub positive_leading: bool,
}

impl AttractorClass {
    pub fn color_name(&self) -> &'static str {
        match self.label {
            AttractorLabel::FixedPoint => "red",
            AttractorLabel::LimitCycle => "blue",
            AttractorLabel::TorusOrChaos => "yellow",
        }
    }
}

/// Classifies a spectrum. Refuses unconverged input unless overridden.
pub fn classify(
    s: &SpectrumResult,
    zero_tol: f64,
    allow_unconverged: bool,
) -> Result<AttractorClass, LyapunovError> {
    if !s.converged && !allow_unconverged {
        return Err(LyapunovError::Unconverged(s.tail_variation));
    }
    let nonneg = s.exponents.iter().filter(|&&l| l >= -zero_tol).count();
    let (label, color) = match nonneg {
        0 => (AttractorLabel::FixedPoint, [255, 0, 0]),
        1 => (AttractorLabel::LimitCycle, [0, 0, 255]),
        _ => (AttractorLabel::TorusOrChaos, [255, 255, 0]),
    };
    Ok(AttractorClass {
        label,
        nonneg_count: nonneg,
        color,
        positive_leading: s.exponents[0] > 3.0 * zero_tol,
    })
}

const DIM: usize = 4;
const AUG: usize = DIM + DIM * DIM;

/// Full-spectrum run for an arbitrary 4D field/Jacobian pair. The base
/// trajectory is renormalized onto the unit sphere after every accepted
/// step when `project` is set.
pub fn spectrum_with(
    field: &impl Fn(&[f64; DIM]) -> [f64; DIM],
    jac: &impl Fn(&[f64; DIM]) -> [[f64; DIM]; DIM],
    x0: [f64; DIM],
    cfg: &IntegratorConfig,
    set: &LyapunovSettings,
    project: bool,
) -> Result<SpectrumResult, LyapunovError> {
    if !(set.t_total > cfg.t_transient) {
        return Err(LyapunovError::InvalidSettings(format!(
            "t_total ({}) must exceed the transient ({})",
            set.t_total, cfg.t_transient
        )));
    }
    if !(set.gs_interval > 0.0) || !(set.zero_tol > 0.0) {
        return Err(LyapunovError::InvalidSettings(
            "gs_interval and zero_tol must be positive".into(),
        ));
    }

    // Discard the transient on the base system alone.
    let mut x = x0;
    let mut h_hint = None;
    if cfg.t_transient > 0.0 {
        let (xf, h) = crate::integrate::propagate(
            field,
            x,
            0.0,
            cfg.t_transient,
            cfg,
            project,
            None,
            |_, _| {},
        )?;
        x = xf;
        h_hint = Some(h);
    }

    // Augmented state: base point plus four tangent vectors.
    let mut y = [0.0f64; AUG];
    y[..DIM].copy_from_slice(&x);
    for v in 0..DIM {
        y[DIM + DIM * v + v] = 1.0;
    }

    let aug_field = |y: &[f64; AUG]| {
        let x: [f64; DIM] = y[..DIM].try_into().unwrap();
        let f = field(&x);
        let j = jac(&x);
        let mut out = [0.0f64; AUG];
        out[..DIM].copy_from_slice(&f);
        for v in 0..DIM {
            let base = DIM + DIM * v;
            for i in 0..DIM {
                let mut acc = 0.0;
                for k in 0..DIM {
                    acc += j[i][k] * y[base + k];
                }
                out[base + i] = acc;
            }
        }
        out
    };

    let span = set.t_total - cfg.t_transient;
    let n_chunks = (span / set.gs_interval).ceil() as usize;
    let tail_start = 0.9 * span;

    let mut log_sums = [0.0f64; DIM];
    let mut trace_integral = 0.0;
    let mut trace_prev = {
        let j = jac(&x);
        (0..DIM).map(|i| j[i][i]).sum::<f64>()
    };
    let mut tail_min = [f64::INFINITY; DIM];
    let mut tail_max = [f64::NEG_INFINITY; DIM];

    let mut t = 0.0;
    for c in 0..n_chunks {
        let t_next = ((c + 1) as f64 * set.gs_interval).min(span);
        let (yf, h) = propagate_with(
            &aug_field,
            y,
            t,
            t_next,
            cfg,
            h_hint,
            |y| {
                if project {
                    let mut x: [f64; DIM] = y[..DIM].try_into().unwrap();
                    project_unit(&mut x);
                    y[..DIM].copy_from_slice(&x);
                    true
                } else {
                    false
                }
            },
            |step, y_end| {
                // Trapezoid accumulation of the divergence along the orbit.
                let x: [f64; DIM] = y_end[..DIM].try_into().unwrap();
                let j = jac(&x);
                let tr = (0..DIM).map(|i| j[i][i]).sum::<f64>();
                trace_integral += 0.5 * (trace_prev + tr) * step.h;
                trace_prev = tr;
            },
        )?;
        y = yf;
        h_hint = Some(h);
        t = t_next;

        gram_schmidt(&mut y, &mut log_sums);

        if t >= tail_start {
            for i in 0..DIM {
                let est = log_sums[i] / t;
                tail_min[i] = tail_min[i].min(est);
                tail_max[i] = tail_max[i].max(est);
            }
        }
    }

    let mut raw = [0.0f64; DIM];
    for i in 0..DIM {
        raw[i] = log_sums[i] / span;
    }
    let mut tail_variation = 0.0f64;
    for i in 0..DIM {
        if tail_max[i].is_finite() {
            tail_variation = tail_variation.max(tail_max[i] - tail_min[i]);
        }
    }

    let mut sorted = raw;
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let result = SpectrumResult {
        exponents: [sorted[0], sorted[1], sorted[2]],
        radial_exponent: sorted[3],
        t_total: set.t_total,
        gs_interval: set.gs_interval,
        converged: tail_variation < set.convergence_tol,
        tail_variation,
        mean_divergence: trace_integral / span,
    };
    if project && result.radial_exponent >= -0.5 {
        return Err(LyapunovError::RadialAnomaly(result.radial_exponent));
    }
    Ok(result)
}

/// Spectrum of the model flow; the base trajectory is kept on the sphere.
pub fn spectrum(
    p: &ModelParams,
    x0: [f64; 4],
    cfg: &IntegratorConfig,
    set: &LyapunovSettings,
) -> Result<SpectrumResult, LyapunovError> {
    spectrum_with(
        &|x| model::eval_field_4d(p, x),
        &|x| model::eval_jacobian_4d(p, x),
        x0,
        cfg,
        set,
        true,
    )
}

/// Modified Gram-Schmidt on the tangent frame, accumulating log norms.
fn gram_schmidt(y: &mut [f64; AUG], log_sums: &mut [f64; DIM]) {
    for v in 0..DIM {
        let base = DIM + DIM * v;
        for prev in 0..v {
            let pbase = DIM + DIM * prev;
            let mut dot = 0.0;
            for i in 0..DIM {
                dot += y[base + i] * y[pbase + i];
            }
            for i in 0..DIM {
                y[base + i] -= dot * y[pbase + i];
            }
        }
        let norm: f64 = (0..DIM).map(|i| y[base + i] * y[base + i]).sum::<f64>().sqrt();
        log_sums[v] += norm.ln();
        let inv = 1.0 / norm;
        for i in 0..DIM {
            y[base + i] *= inv;
        }
    }
}

/// Frame orthonormality defect: max pairwise |dot| and max |norm - 1|.
/// Exposed for the validation suite.
pub fn frame_defect(y: &[f64; AUG]) -> (f64, f64) {
    let mut max_dot = 0.0f64;
    let mut max_norm = 0.0f64;
    for v in 0..DIM {
        let base = DIM + DIM * v;
        let norm: f64 = (0..DIM).map(|i| y[base + i] * y[base + i]).sum::<f64>().sqrt();
        max_norm = max_norm.max((norm - 1.0).abs());
        for w in 0..v {
            let wbase = DIM + DIM * w;
            let dot: f64 = (0..DIM).map(|i| y[base + i] * y[wbase + i]).sum();
            max_dot = max_dot.max(dot.abs());
        }
    }
    (max_dot, max_norm)
}

/// One `tau1,tau2,lambda1,lambda2,lambda3,radial,nonneg,class` CSV row.
pub fn spectrum_csv_row(p: &ModelParams, s: &SpectrumResult, class: &AttractorClass) -> String {
    use crate::integrate::fmt_f64 as f;
    format!(
        "{},{},{},{},{},{},{},{}",
        f(p.tau1()),
        f(p.tau2()),
        f(s.exponents[0]),
        f(s.exponents[1]),
        f(s.exponents[2]),
        f(s.radial_exponent),
        class.nonneg_count,
        class.color_name()
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn diag_system() -> (impl Fn(&[f64; 4]) -> [f64; 4], impl Fn(&[f64; 4]) -> [[f64; 4]; 4]) {
        const L: [f64; 4] = [-0.3, -1.0, -2.0, -2.5];
        let f = |x: &[f64; 4]| [L[0] * x[0], L[1] * x[1], L[2] * x[2], L[3] * x[3]];
        let j = |_x: &[f64; 4]| {
            let mut m = [[0.0; 4]; 4];
            for i in 0..4 {
                m[i][i] = L[i];
            }
            m
        };
        (f, j)
    }

    #[test]
    fn diagonal_linear_oracle() {
        let (f, j) = diag_system();
        let mut cfg = IntegratorConfig::default();
        cfg.t_transient = 1.0;
        let set = LyapunovSettings { t_total: 200.0, ..Default::default() };
        let s = spectrum_with(&f, &j, [1.0, 1.0, 1.0, 1.0], &cfg, &set, false).unwrap();
        assert_abs_diff_eq!(s.exponents[0], -0.3, epsilon = 1e-3);
        assert_abs_diff_eq!(s.exponents[1], -1.0, epsilon = 1e-3);
        assert_abs_diff_eq!(s.exponents[2], -2.0, epsilon = 1e-3);
        assert_abs_diff_eq!(s.radial_exponent, -2.5, epsilon = 1e-3);
        assert!(s.converged);
        // Divergence identity is exact for a constant-trace system.
        assert_abs_diff_eq!(s.sum_raw(), s.mean_divergence, epsilon = 1e-6);
    }

    #[test]
    fn orbit_into_saddle_focus_inherits_eigen_rates() {
        // On the invariant circle the orbit falls into the south-pole
        // equilibrium, whose on-sphere eigenvalue real parts are
        // (0.9, 0.9, -1.1) for the reference coefficients.
        let p = ModelParams::new(1.0, -0.1, 1.0, 0.0, 0.0, 0.0).unwrap();
        let cfg = IntegratorConfig { t_transient: 200.0, ..Default::default() };
        let set = LyapunovSettings { t_total: 2000.0, ..Default::default() };
        let s = spectrum(&p, [0.0, 0.0, 0.01, 0.99], &cfg, &set).unwrap();
        assert_abs_diff_eq!(s.exponents[0], 0.9, epsilon = 0.05);
        assert_abs_diff_eq!(s.exponents[1], 0.9, epsilon = 0.05);
        assert_abs_diff_eq!(s.exponents[2], -1.1, epsilon = 0.05);
        assert!(s.radial_exponent < -0.5);
    }

    #[test]
    fn classification_rules() {
        let mk = |e: [f64; 3]| SpectrumResult {
            exponents: e,
            radial_exponent: -2.0,
            t_total: 100.0,
            gs_interval: 0.5,
            converged: true,
            tail_variation: 0.0,
            mean_divergence: 0.0,
        };
        let c = classify(&mk([-0.3, -1.0, -2.0]), 0.01, false).unwrap();
        assert_eq!(c.label, AttractorLabel::FixedPoint);
        assert_eq!(c.color_name(), "red");
        let c = classify(&mk([0.001, -0.4, -1.2]), 0.01, false).unwrap();
        assert_eq!(c.label, AttractorLabel::LimitCycle);
        assert_eq!(c.color_name(), "blue");
        let c = classify(&mk([0.08, 0.002, -0.9]), 0.01, false).unwrap();
        assert_eq!(c.label, AttractorLabel::TorusOrChaos);
        assert_eq!(c.color_name(), "yellow");
        assert!(c.positive_leading);

        let mut unconv = mk([0.0, -0.1, -0.2]);
        unconv.converged = false;
        assert!(matches!(classify(&unconv, 0.01, false), Err(LyapunovError::Unconverged(_))));
        assert!(classify(&unconv, 0.01, true).is_ok());
    }

    #[test]
    fn invalid_settings_rejected() {
        let (f, j) = diag_system();
        let cfg = IntegratorConfig::default(); // transient 500
        let set = LyapunovSettings { t_total: 100.0, ..Default::default() };
        assert!(matches!(
            spectrum_with(&f, &j, [1.0; 4], &cfg, &set, false),
            Err(LyapunovError::InvalidSettings(_))
        ));
    }

    #[test]
    fn gram_schmidt_orthonormalizes() {
        let mut y = [0.0f64; AUG];
        // A deliberately skewed frame.
        let frame = [
            [1.0, 0.2, -0.3, 0.4],
            [0.9, 1.1, 0.0, -0.2],
            [0.1, 0.7, 1.3, 0.5],
            [-0.4, 0.3, 0.8, 1.7],
        ];
        for v in 0..4 {
            for i in 0..4 {
                y[4 + 4 * v + i] = frame[v][i];
            }
        }
        let mut logs = [0.0; 4];
        gram_schmidt(&mut y, &mut logs);
        let (dot, norm) = frame_defect(&y);
        assert!(dot < 1e-12);
        assert!(norm < 1e-12);
    }
}
