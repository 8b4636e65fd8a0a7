//! Adaptive embedded Runge-Kutta 5(4) integration (Dormand-Prince pair)
//! with fourth-order dense output, optional renormalization onto the unit
//! sphere and hyperplane-crossing event detection.

use crate::error::IntegrationError;
use crate::model::{self, ModelParams};

/// Tolerances and sampling policy of the integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub project_to_sphere: bool,
    pub t_transient: f64,
    pub sample_dt: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            max_step: 0.1,
            project_to_sphere: false,
            t_transient: 500.0,
            sample_dt: 0.01,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), IntegrationError> {
        for (name, v) in [
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("max_step", self.max_step),
            ("sample_dt", self.sample_dt),
        ] {
            if !(v > 0.0) {
                return Err(IntegrationError::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.t_transient >= 0.0) {
            return Err(IntegrationError::InvalidConfig(format!(
                "t_transient must be nonnegative, got {}",
                self.t_transient
            )));
        }
        Ok(())
    }
}

// Dormand-Prince 5(4) tableau (autonomous form; stage times unused).
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
// b - bhat, including the seventh (FSAL) stage.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Dense-output weights for the quartic interpolant.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// One accepted step together with its dense-output polynomial.
#[derive(Debug, Clone, Copy)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    cont: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// Interpolated state at `t` in `[t0, t1]`.
    pub fn eval(&self, t: f64) -> [f64; N] {
        let theta = (t - self.t0) / self.h;
        let th1 = 1.0 - theta;
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = self.cont[0][i]
                + theta
                    * (self.cont[1][i]
                        + th1
                            * (self.cont[2][i]
                                + theta * (self.cont[3][i] + th1 * self.cont[4][i])));
        }
        out
    }
}

/// Rescales a state onto the unit sphere. Returns true when the state
/// was nonzero (and hence touched).
pub fn project_unit<const N: usize>(x: &mut [f64; N]) -> bool {
    let n2: f64 = x.iter().map(|v| v * v).sum();
    if n2 > 0.0 {
        let inv = 1.0 / n2.sqrt();
        for v in x.iter_mut() {
            *v *= inv;
        }
        true
    } else {
        false
    }
}

/// Low-level driver: integrates `dx/dt = f(x)` from `t0` to `t_end`,
/// invoking `observer` with every accepted step (dense output plus the
/// post-step state). When `project` is set, the endpoint state of every
/// accepted step is renormalized to the unit sphere before continuing.
///
/// Returns the final state and the last accepted step size (reusable as
/// `h_init` when continuing the same orbit).
pub fn propagate<const N: usize>(
    f: &impl Fn(&[f64; N]) -> [f64; N],
    x0: [f64; N],
    t0: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
    project: bool,
    h_init: Option<f64>,
    observer: impl FnMut(&DenseStep<N>, &[f64; N]),
) -> Result<([f64; N], f64), IntegrationError> {
    if project {
        propagate_with(f, x0, t0, t_end, cfg, h_init, |x| project_unit(x), observer)
    } else {
        propagate_with(f, x0, t0, t_end, cfg, h_init, |_| false, observer)
    }
}

/// As [`propagate`], with an arbitrary post-acceptance state adjustment.
/// `post` may modify the endpoint state of an accepted step; it returns
/// whether it changed the state (forcing a fresh derivative evaluation
/// instead of the FSAL reuse).
pub fn propagate_with<const N: usize>(
    f: &impl Fn(&[f64; N]) -> [f64; N],
    x0: [f64; N],
    t0: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
    h_init: Option<f64>,
    mut post: impl FnMut(&mut [f64; N]) -> bool,
    mut observer: impl FnMut(&DenseStep<N>, &[f64; N]),
) -> Result<([f64; N], f64), IntegrationError> {
    cfg.validate()?;
    let mut x = x0;
    let mut t = t0;
    if !(t_end > t0) {
        return Ok((x, h_init.unwrap_or(cfg.max_step)));
    }

    let mut k1 = f(&x);
    if !k1.iter().all(|v| v.is_finite()) {
        return Err(IntegrationError::NumericalBlowup { t });
    }
    let mut h = h_init
        .unwrap_or_else(|| initial_step(&x, &k1, cfg))
        .min(cfg.max_step)
        .min(t_end - t0);
    let mut blowup_reject = false;

    while t < t_end {
        if t_end - t <= 1e-13 * t.abs().max(1.0) {
            break; // arrived up to roundoff
        }
        if h < 1e-14 * t.abs().max(1.0) {
            if blowup_reject {
                return Err(IntegrationError::NumericalBlowup { t });
            }
            return Err(IntegrationError::Stalled { t, state: x.to_vec() });
        }
        h = h.min(cfg.max_step).min(t_end - t);

        let mut k = [[0.0; N]; 7];
        k[0] = k1;
        let stage = |ks: &[[f64; N]], a: &[f64]| {
            let mut y = x;
            for (j, aj) in a.iter().enumerate() {
                for i in 0..N {
                    y[i] += h * aj * ks[j][i];
                }
            }
            y
        };
        k[1] = f(&stage(&k, &A2));
        k[2] = f(&stage(&k, &A3));
        k[3] = f(&stage(&k, &A4));
        k[4] = f(&stage(&k, &A5));
        k[5] = f(&stage(&k, &A6));
        let y1 = stage(&k, &B);
        k[6] = f(&y1);

        let finite = y1.iter().all(|v| v.is_finite()) && k[6].iter().all(|v| v.is_finite());
        if !finite {
            blowup_reject = true;
            h *= 0.25;
            continue;
        }
        blowup_reject = false;

        // Scaled RMS error of the embedded pair.
        let mut err2 = 0.0;
        for i in 0..N {
            let e: f64 = (0..7).map(|j| E[j] * k[j][i]).sum::<f64>() * h;
            let sk = cfg.atol + cfg.rtol * x[i].abs().max(y1[i].abs());
            err2 += (e / sk) * (e / sk);
        }
        let err = (err2 / N as f64).sqrt();
        if !err.is_finite() {
            blowup_reject = true;
            h *= 0.25;
            continue;
        }

        if err <= 1.0 {
            // Accept: build the dense-output polynomial, then advance.
            let mut cont = [[0.0; N]; 5];
            for i in 0..N {
                let ydiff = y1[i] - x[i];
                let bspl = h * k[0][i] - ydiff;
                cont[0][i] = x[i];
                cont[1][i] = ydiff;
                cont[2][i] = bspl;
                cont[3][i] = ydiff - h * k[6][i] - bspl;
                cont[4][i] = h * (0..7).map(|j| D[j] * k[j][i]).sum::<f64>();
            }
            let step = DenseStep { t0: t, h, cont };
            t += h;
            x = y1;
            let changed = post(&mut x);
            observer(&step, &x);
            k1 = if changed { f(&x) } else { k[6] };
            if !k1.iter().all(|v| v.is_finite()) {
                return Err(IntegrationError::NumericalBlowup { t });
            }
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 10.0);
            h *= fac;
        } else {
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            h *= fac;
        }
    }
    Ok((x, h))
}

fn initial_step<const N: usize>(x: &[f64; N], dx: &[f64; N], cfg: &IntegratorConfig) -> f64 {
    let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let dn = dx.iter().map(|v| v * v).sum::<f64>().sqrt();
    let h = if dn > 1e-12 { 0.01 * (xn + cfg.atol) / dn } else { cfg.max_step };
    h.clamp(1e-10, cfg.max_step)
}

/// A sampled solution curve.
#[derive(Debug, Clone)]
pub struct Trajectory<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
}

impl<const N: usize> Trajectory<N> {
    pub fn last(&self) -> Option<(f64, &[f64; N])> {
        self.times.last().map(|t| (*t, self.states.last().unwrap()))
    }

    /// CSV with header `t,x1,..` and 17-significant-digit floats.
    pub fn to_csv(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        let labels: Vec<String> = (1..=N).map(|i| format!("x{i}")).collect();
        let refs: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
        self.to_csv_labeled(w, &refs)
    }

    /// CSV with caller-chosen column labels (e.g. `x3,x4` for the planar
    /// reduced system).
    pub fn to_csv_labeled(
        &self,
        w: &mut impl std::io::Write,
        labels: &[&str],
    ) -> std::io::Result<()> {
        write!(w, "t")?;
        for l in labels.iter().take(N) {
            write!(w, ",{l}")?;
        }
        writeln!(w)?;
        for (t, x) in self.times.iter().zip(&self.states) {
            write!(w, "{}", fmt_f64(*t))?;
            for v in x.iter() {
                write!(w, ",{}", fmt_f64(*v))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// 17-significant-digit scientific format; round-trips exactly through f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Integrates an arbitrary autonomous system and samples it every
/// `cfg.sample_dt` via dense interpolation, starting at `t = 0`.
pub fn integrate_sampled<const N: usize>(
    f: &impl Fn(&[f64; N]) -> [f64; N],
    x0: [f64; N],
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory<N>, IntegrationError> {
    let mut times = vec![0.0];
    let mut states = vec![x0];
    let mut next = cfg.sample_dt;
    let project = cfg.project_to_sphere;
    let (xf, _) = propagate(f, x0, 0.0, t_end, cfg, project, None, |step, _| {
        while next <= step.t1() + 1e-12 && next < t_end {
            let mut s = step.eval(next);
            if project {
                project_unit(&mut s);
            }
            times.push(next);
            states.push(s);
            next += cfg.sample_dt;
        }
    })?;
    if *times.last().unwrap() < t_end {
        times.push(t_end);
        states.push(xf);
    }
    Ok(Trajectory { times, states })
}

/// Full 4D model trajectory.
pub fn integrate(
    p: &ModelParams,
    x0: [f64; 4],
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory<4>, IntegrationError> {
    integrate_sampled(&|x| model::eval_field_4d(p, x), x0, t_end, cfg)
}

/// Quotient-system trajectory (`tau2` must be zero; validated by the model).
pub fn integrate_3d(
    p: &ModelParams,
    y0: [f64; 3],
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory<3>, IntegrationError> {
    let f3 = model::eval_field_3d(p, &y0).map_err(|e| {
        IntegrationError::InvalidConfig(e.to_string())
    })?;
    let _ = f3;
    let mut c = *cfg;
    c.project_to_sphere = false;
    integrate_sampled(&|y| model::eval_field_3d(p, y).expect("tau2 checked above"), y0, t_end, &c)
}

/// Planar reduced-system trajectory.
pub fn integrate_2d(
    p: &ModelParams,
    z0: [f64; 2],
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory<2>, IntegrationError> {
    let mut c = *cfg;
    c.project_to_sphere = false;
    integrate_sampled(&|z| model::eval_field_2d(p, z), z0, t_end, &c)
}

/// Which sign changes of the section function count as events.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingDirection {
    Increasing,
    Decreasing,
    Both,
}

/// An affine hyperplane section `n . x = c` with an optional half-space
/// filter `h . x > 0` applied to the event point.
#[derive(Debug, Clone, Copy)]
pub struct SectionSpec<const N: usize> {
    pub normal: [f64; N],
    pub offset: f64,
    pub direction: CrossingDirection,
    pub half_space: Option<[f64; N]>,
}

impl<const N: usize> SectionSpec<N> {
    pub fn g(&self, x: &[f64; N]) -> f64 {
        self.normal.iter().zip(x.iter()).map(|(n, v)| n * v).sum::<f64>() - self.offset
    }

    fn admits(&self, x: &[f64; N], rising: bool) -> bool {
        let dir_ok = match self.direction {
            CrossingDirection::Increasing => rising,
            CrossingDirection::Decreasing => !rising,
            CrossingDirection::Both => true,
        };
        let half_ok = self
            .half_space
            .map(|h| h.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>() > 0.0)
            .unwrap_or(true);
        dir_ok && half_ok
    }
}

impl SectionSpec<4> {
    /// The practical angular section for the model: hyperplane `x2 = 0`
    /// crossed with `x1 > 0`, increasing direction. Hits are usually
    /// plotted in `(x3, x4)`.
    pub fn default_4d() -> Self {
        Self {
            normal: [0.0, 1.0, 0.0, 0.0],
            offset: 0.0,
            direction: CrossingDirection::Increasing,
            half_space: Some([1.0, 0.0, 0.0, 0.0]),
        }
    }
}

/// Integrates and records every transversal section crossing, refined by
/// bisection on the dense output until `|g| < refine_tol`. Tangential
/// grazes without a sign change are not detected.
pub fn detect_crossings<const N: usize>(
    f: &impl Fn(&[f64; N]) -> [f64; N],
    x0: [f64; N],
    t_end: f64,
    cfg: &IntegratorConfig,
    section: &SectionSpec<N>,
    refine_tol: f64,
) -> Result<Vec<(f64, [f64; N])>, IntegrationError> {
    let mut events = Vec::new();
    let mut g_prev = section.g(&x0);
    propagate(f, x0, 0.0, t_end, cfg, cfg.project_to_sphere, None, |step, x_end| {
        let g_new = section.g(x_end);
        if g_prev != 0.0 && g_new != 0.0 && g_prev.signum() != g_new.signum() {
            let rising = g_new > g_prev;
            if let Some((te, xe)) = refine_crossing(step, section, refine_tol) {
                if section.admits(&xe, rising) {
                    events.push((te, xe));
                }
            }
        }
        g_prev = g_new;
    })
    .map(|_| events)
}

fn refine_crossing<const N: usize>(
    step: &DenseStep<N>,
    section: &SectionSpec<N>,
    refine_tol: f64,
) -> Option<(f64, [f64; N])> {
    let mut lo = step.t0;
    let mut hi = step.t1();
    let mut g_lo = section.g(&step.eval(lo));
    let g_hi = section.g(&step.eval(hi));
    if g_lo == 0.0 {
        return Some((lo, step.eval(lo)));
    }
    if g_lo.signum() == g_hi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let xm = step.eval(mid);
        let gm = section.g(&xm);
        if gm.abs() < refine_tol {
            return Some((mid, xm));
        }
        if gm.signum() == g_lo.signum() {
            lo = mid;
            g_lo = gm;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    Some((mid, step.eval(mid)))
}

/// Section crossings of the full 4D model flow.
pub fn detect_crossings_4d(
    p: &ModelParams,
    x0: [f64; 4],
    t_end: f64,
    cfg: &IntegratorConfig,
    section: &SectionSpec<4>,
    refine_tol: f64,
) -> Result<Vec<(f64, [f64; 4])>, IntegrationError> {
    detect_crossings(&|x| model::eval_field_4d(p, x), x0, t_end, cfg, section, refine_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{norm_sq_4d, ModelParams, O1};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn base() -> ModelParams {
        ModelParams::new(1.0, -0.1, 1.0, 0.0, 0.0, 0.0).unwrap()
    }

    #[test]
    fn linear_system_error_and_order() {
        // dx/dt = A x with A = [[0, 1], [-1, 0]]: exact solution is a rotation.
        let f = |x: &[f64; 2]| [x[1], -x[0]];
        let cfg = IntegratorConfig::default();
        let traj = integrate_sampled(&f, [1.0, 0.0], 10.0, &cfg).unwrap();
        let (t, x) = traj.last().unwrap();
        assert_eq!(t, 10.0);
        let exact = [10.0f64.cos(), -10.0f64.sin()];
        let err = ((x[0] - exact[0]).powi(2) + (x[1] - exact[1]).powi(2)).sqrt();
        assert!(err < 1e-7, "global error {err}");

        let mut loose = cfg;
        loose.rtol = 1e-6;
        let xl = integrate_sampled(&f, [1.0, 0.0], 10.0, &loose).unwrap();
        let (_, y) = xl.last().unwrap();
        let err_loose = ((y[0] - exact[0]).powi(2) + (y[1] - exact[1]).powi(2)).sqrt();
        assert!(err <= err_loose, "tighter rtol should not increase error");
    }

    #[test]
    fn constant_at_equilibrium() {
        let p = base();
        let traj = integrate(&p, O1, 10.0, &IntegratorConfig::default()).unwrap();
        for x in &traj.states {
            assert_eq!(*x, O1);
        }
    }

    #[test]
    fn time_reversal_short_span() {
        let p = base();
        let cfg = IntegratorConfig::default();
        let x0 = {
            let mut x = [0.3, -0.2, 0.5, -0.7];
            project_unit(&mut x);
            x
        };
        let (x1, _) = propagate(&|x| crate::model::eval_field_4d(&p, x), x0, 0.0, 1.0, &cfg, false, None, |_, _| {}).unwrap();
        let back = |x: &[f64; 4]| {
            let f = crate::model::eval_field_4d(&p, x);
            [-f[0], -f[1], -f[2], -f[3]]
        };
        let (x2, _) = propagate(&back, x1, 0.0, 1.0, &cfg, false, None, |_, _| {}).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(x2[i], x0[i], epsilon = 1e-6);
        }
    }

    #[test]
    fn projection_keeps_samples_on_sphere() {
        let p = base();
        let mut cfg = IntegratorConfig::default();
        cfg.project_to_sphere = true;
        cfg.sample_dt = 0.1;
        let traj = integrate(&p, [0.1, 0.1, 0.0, -0.99], 20.0, &cfg).unwrap();
        // Initial sample is the raw initial condition; all later ones are
        // renormalized.
        for x in traj.states.iter().skip(1) {
            assert!((norm_sq_4d(x).sqrt() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn sphere_is_attracting() {
        let p = base();
        let cfg = IntegratorConfig::default();
        for scale in [0.5, 1.5] {
            let x0 = [0.0, 0.0, 0.01 * scale / 0.99, scale];
            let traj = integrate(&p, x0, 50.0, &cfg).unwrap();
            let (_, xf) = traj.last().unwrap();
            assert!((norm_sq_4d(xf) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn harmonic_oscillator_crossings() {
        let f = |x: &[f64; 2]| [-x[1], x[0]];
        let section = SectionSpec::<2> {
            normal: [0.0, 1.0],
            offset: 0.0,
            direction: CrossingDirection::Increasing,
            half_space: Some([1.0, 0.0]),
        };
        // Dense-output interpolation error scales like h^5 and the global
        // error with rtol; both must sit well inside the 1e-9 check.
        let cfg = IntegratorConfig {
            rtol: 1e-12,
            atol: 1e-14,
            max_step: 0.05,
            ..Default::default()
        };
        let hits = detect_crossings(&f, [1.0, 0.0], 10.0 * PI, &cfg, &section, 1e-12).unwrap();
        assert_eq!(hits.len(), 5);
        for (k, (t, x)) in hits.iter().enumerate() {
            assert_abs_diff_eq!(*t, 2.0 * PI * (k + 1) as f64, epsilon = 1e-9);
            assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-9);
            assert_abs_diff_eq!(x[1], 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn invariant_subspace_never_crosses() {
        // Flow confined to x1 = x2 = 0 cannot reach the half-space x1 > 0.
        let p = base();
        let cfg = IntegratorConfig::default();
        let section = SectionSpec::default_4d();
        let hits = detect_crossings_4d(&p, [0.0, 0.0, 0.01, 0.99], 100.0, &cfg, &section, 1e-10)
            .unwrap();
        assert!(hits.is_empty());
    }

    #[test]
    fn blowup_is_reported() {
        let f = |x: &[f64; 1]| [x[0] * x[0]];
        let cfg = IntegratorConfig::default();
        let r = integrate_sampled(&f, [10.0], 10.0, &cfg);
        assert!(matches!(
            r,
            Err(IntegrationError::NumericalBlowup { .. }) | Err(IntegrationError::Stalled { .. })
        ));
    }

    #[test]
    fn csv_format() {
        let traj = Trajectory::<2> {
            times: vec![0.0, 0.5],
            states: vec![[1.0, 2.0], [3.0, 4.5]],
        };
        let mut buf = Vec::new();
        traj.to_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next().unwrap(), "t,x1,x2");
        assert!(lines.next().unwrap().starts_with("0.0000000000000000e0,1.0000000000000000e0"));
        assert!(!s.contains('\r'));
    }
}
