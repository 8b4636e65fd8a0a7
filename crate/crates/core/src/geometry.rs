//! Return-map analytics: Poincare-section portraits, rotation-number
//! estimation and limit-cycle detection for the planar reduced system.

use std::f64::consts::PI;

use crate::error::GeometryError;
use crate::integrate::{
    detect_crossings, detect_crossings_4d, CrossingDirection, IntegratorConfig, SectionSpec,
};
use crate::model::{self, ModelParams};

/// Section hits with an unwrapped phase sequence around the hit centroid.
#[derive(Debug, Clone)]
pub struct ReturnSeries {
    pub times: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    pub angles: Vec<f64>,
}

impl ReturnSeries {
    /// Builds the series from `(time, (x3, x4))` hits. The phase of each hit
    /// is measured around the centroid of all hits and unwrapped so that
    /// consecutive raw increments stay within `(-pi, pi]`.
    pub fn from_hits(hits: &[(f64, [f64; 2])]) -> Self {
        let n = hits.len();
        let mut c = [0.0f64; 2];
        for (_, p) in hits {
            c[0] += p[0];
            c[1] += p[1];
        }
        if n > 0 {
            c[0] /= n as f64;
            c[1] /= n as f64;
        }
        let mut angles = Vec::with_capacity(n);
        let mut prev_raw = 0.0;
        let mut offset = 0.0;
        for (i, (_, p)) in hits.iter().enumerate() {
            let raw = (p[0] - c[0]).atan2(p[1] - c[1]);
            if i > 0 {
                let mut d = raw - prev_raw;
                while d > PI {
                    d -= 2.0 * PI;
                }
                while d <= -PI {
                    d += 2.0 * PI;
                }
                offset += d;
                angles.push(angles[0] + offset);
            } else {
                angles.push(raw);
            }
            prev_raw = raw;
        }
        Self {
            times: hits.iter().map(|(t, _)| *t).collect(),
            points: hits.iter().map(|(_, p)| *p).collect(),
            angles,
        }
    }
}

/// Least-squares slope of the unwrapped phase against hit index, in turns
/// per return, with the standard error of the fitted slope.
pub fn rotation_number(rs: &ReturnSeries) -> Result<(f64, f64), GeometryError> {
    let n = rs.angles.len();
    if n < 10 {
        return Err(GeometryError::InsufficientData { needed: 10, got: n });
    }
    let nf = n as f64;
    let i_mean = (nf - 1.0) / 2.0;
    let a_mean = rs.angles.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (i, a) in rs.angles.iter().enumerate() {
        let di = i as f64 - i_mean;
        sxx += di * di;
        sxy += di * (a - a_mean);
    }
    let slope = sxy / sxx;
    let mut ss_res = 0.0;
    for (i, a) in rs.angles.iter().enumerate() {
        let fit = a_mean + slope * (i as f64 - i_mean);
        ss_res += (a - fit) * (a - fit);
    }
    let stderr = (ss_res / (nf - 2.0) / sxx).sqrt();
    Ok((slope / (2.0 * PI), stderr / (2.0 * PI)))
}

/// A detected stable periodic orbit of a planar flow.
#[derive(Debug, Clone, Copy)]
pub struct LimitCycle2D {
    pub period: f64,
    /// Point where the cycle pierces the section `{x3 = 0, dx3/dt > 0}`.
    pub section_point: [f64; 2],
    /// Return-map derivative at the fixed point; stable cycles have |.| < 1.
    pub floquet_estimate: f64,
}

/// Transient discarded before looking for returns.
pub const CYCLE_TRANSIENT: f64 = 200.0;
/// Successive section hits this close (in the section coordinate) fix the cycle.
pub const CYCLE_TOL: f64 = 1e-8;

fn planar_section() -> SectionSpec<2> {
    SectionSpec {
        normal: [1.0, 0.0],
        offset: 0.0,
        direction: CrossingDirection::Increasing,
        half_space: None,
    }
}

/// Limit-cycle search for an arbitrary planar field via its return map to
/// the section `{x3 = 0, dx3/dt > 0}`.
pub fn find_limit_cycle(
    f: &impl Fn(&[f64; 2]) -> [f64; 2],
    z0: [f64; 2],
    t_search: f64,
    cfg: &IntegratorConfig,
) -> Result<LimitCycle2D, GeometryError> {
    let section = planar_section();
    let mut c = *cfg;
    c.project_to_sphere = false;

    // Run past the transient, then watch returns.
    let (z1, _) = crate::integrate::propagate(f, z0, 0.0, CYCLE_TRANSIENT.min(0.5 * t_search), &c, false, None, |_, _| {})?;
    let hits = detect_crossings(f, z1, t_search, &c, &section, 1e-12)?;

    for w in hits.windows(2) {
        let (t0, p0) = w[0];
        let (t1, p1) = w[1];
        if (p1[1] - p0[1]).abs() < CYCLE_TOL {
            let period = t1 - t0;
            let fixed = p1;
            let floquet = return_map_derivative(f, fixed, period, &c)?;
            return Ok(LimitCycle2D { period, section_point: fixed, floquet_estimate: floquet });
        }
    }
    Err(GeometryError::NoCycleFound(t_search))
}

/// Central finite difference of the section return map at a fixed point.
fn return_map_derivative(
    f: &impl Fn(&[f64; 2]) -> [f64; 2],
    fixed: [f64; 2],
    period: f64,
    cfg: &IntegratorConfig,
) -> Result<f64, GeometryError> {
    let section = planar_section();
    let h = 1e-6;
    let mut returns = [0.0f64; 2];
    for (slot, sign) in [(0usize, 1.0f64), (1, -1.0)] {
        let z = [fixed[0], fixed[1] + sign * h];
        let hits = detect_crossings(f, z, 3.0 * period, cfg, &section, 1e-12)?;
        let (_, p) = hits.first().ok_or(GeometryError::NoCycleFound(3.0 * period))?;
        returns[slot] = p[1];
    }
    Ok((returns[0] - returns[1]) / (2.0 * h))
}

/// Limit-cycle search for the planar reduced model system.
pub fn find_limit_cycle_2d(
    p: &ModelParams,
    z0: [f64; 2],
    t_search: f64,
    cfg: &IntegratorConfig,
) -> Result<LimitCycle2D, GeometryError> {
    find_limit_cycle(&|z| model::eval_field_2d(p, z), z0, t_search, cfg)
}

/// Section hits of the full 4D flow projected to `(x3, x4)`.
pub fn section_portrait(
    p: &ModelParams,
    x0: [f64; 4],
    t_end: f64,
    cfg: &IntegratorConfig,
    section: &SectionSpec<4>,
) -> Result<Vec<(f64, [f64; 2])>, GeometryError> {
    let hits = detect_crossings_4d(p, x0, t_end, cfg, section, 1e-10)?;
    Ok(hits.into_iter().map(|(t, x)| (t, [x[2], x[3]])).collect())
}

/// Writes `t,x3,x4` rows in the shared float format.
pub fn portrait_to_csv(
    hits: &[(f64, [f64; 2])],
    w: &mut impl std::io::Write,
) -> std::io::Result<()> {
    use crate::integrate::fmt_f64 as f;
    writeln!(w, "t,x3,x4")?;
    for (t, p) in hits {
        writeln!(w, "{},{},{}", f(*t), f(p[0]), f(p[1]))?;
    }
    Ok(())
}

/// Symmetric Hausdorff distance between two planar point sets.
pub fn hausdorff_distance(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    fn one_sided(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
        let mut worst = 0.0f64;
        for p in a {
            let mut best = f64::INFINITY;
            for q in b {
                let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
                best = best.min(d2);
            }
            worst = worst.max(best);
        }
        worst.sqrt()
    }
    one_sided(a, b).max(one_sided(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rigid_rotation_rotation_number() {
        // Hits of an exact rotation by 2*pi*3/7 on the unit circle.
        // 49 hits = 7 full periods, so the hit centroid sits at the circle
        // center to machine precision and the unwrapped phase is exactly
        // linear in the index.
        let rho = 3.0 / 7.0;
        let hits: Vec<(f64, [f64; 2])> = (0..49)
            .map(|i| {
                let th = 0.3 + 2.0 * PI * rho * i as f64;
                (i as f64, [th.sin(), th.cos()])
            })
            .collect();
        let rs = ReturnSeries::from_hits(&hits);
        let (est, err) = rotation_number(&rs).unwrap();
        assert_abs_diff_eq!(est, rho, epsilon = 1e-12);
        assert!(err < 1e-12);
    }

    #[test]
    fn irrational_rotation_number() {
        let rho = 1.0 / std::f64::consts::SQRT_2;
        let hits: Vec<(f64, [f64; 2])> = (0..200)
            .map(|i| {
                let th = 2.0 * PI * rho * i as f64;
                (i as f64, [th.sin(), th.cos()])
            })
            .collect();
        let rs = ReturnSeries::from_hits(&hits);
        let (est, stderr) = rotation_number(&rs).unwrap();
        // Rotation numbers are only defined mod 1 and up to orientation;
        // the unwrapped slope recovers rho - 1 here (winding direction).
        // The centroid of finitely many quasi-periodic hits is slightly
        // off-center, so unlike the mode-locked case the fit is biased at
        // the 1e-8 level and its residuals stay visibly above zero.
        let frac = est.rem_euclid(1.0);
        let e = (frac - rho).abs();
        let d = e.min(1.0 - e);
        assert!(d < 1e-5, "estimate {est}");
        assert!(stderr > 1e-12, "stderr {stderr}");
    }

    #[test]
    fn too_few_hits_rejected() {
        let hits: Vec<(f64, [f64; 2])> = (0..5).map(|i| (i as f64, [0.0, 1.0])).collect();
        let rs = ReturnSeries::from_hits(&hits);
        assert!(matches!(
            rotation_number(&rs),
            Err(GeometryError::InsufficientData { .. })
        ));
    }

    #[test]
    fn hopf_normal_form_cycle() {
        // dr/dt = r(1 - r^2), dtheta/dt = 1: unit circle, period 2*pi.
        let f = |z: &[f64; 2]| {
            let r2 = z[0] * z[0] + z[1] * z[1];
            [
                z[0] * (1.0 - r2) - z[1],
                z[1] * (1.0 - r2) + z[0],
            ]
        };
        let cfg = IntegratorConfig::default();
        let cyc = find_limit_cycle(&f, [0.1, 0.1], 500.0, &cfg).unwrap();
        assert_abs_diff_eq!(cyc.period, 2.0 * PI, epsilon = 1e-6);
        assert_abs_diff_eq!(
            (cyc.section_point[0].powi(2) + cyc.section_point[1].powi(2)).sqrt(),
            1.0,
            epsilon = 1e-6
        );
        assert!(cyc.floquet_estimate.abs() < 1.0);
    }

    #[test]
    fn planar_model_cycle_exists_for_positive_tau1() {
        let p = ModelParams::new(1.0, -0.1, 1.0, 0.5, 0.0, 0.0).unwrap();
        let cfg = IntegratorConfig::default();
        let cyc = find_limit_cycle_2d(&p, [0.0, -0.99], 2000.0, &cfg).unwrap();
        assert!(cyc.floquet_estimate.abs() < 1.0, "floquet {}", cyc.floquet_estimate);
        assert!(cyc.period > 0.0);
    }

    #[test]
    fn no_cycle_at_organizing_center() {
        let p = ModelParams::new(1.0, -0.1, 1.0, 0.0, 0.0, 0.0).unwrap();
        let cfg = IntegratorConfig::default();
        assert!(matches!(
            find_limit_cycle_2d(&p, [0.0, -0.99], 2000.0, &cfg),
            Err(GeometryError::NoCycleFound(_))
        ));
    }

    #[test]
    fn hausdorff_basics() {
        let a = [[0.0, 0.0], [1.0, 0.0]];
        let b = [[0.0, 0.1], [1.0, 0.0]];
        assert_abs_diff_eq!(hausdorff_distance(&a, &b), 0.1, epsilon = 1e-15);
        assert_eq!(hausdorff_distance(&a, &a), 0.0);
    }
}
