//! Config-file support for the CLI: UTF-8 `key = value` lines grouped under
//! `[model]`, `[integrator]`, `[lyapunov]` and `[sweep]` section headers.
//! Flags override file values; unknown sections or keys are hard errors so
//! typos cannot silently skew a long sweep.

use std::path::Path;

use crate::integrate::IntegratorConfig;
use crate::lyapunov::LyapunovSettings;
use crate::sweep::SweepSpec;

/// Merged view of every tunable the subcommands share, before flag overrides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    pub beta: f64,
    pub omega: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub kappa: f64,
    pub integrator: IntegratorConfig,
    pub lyapunov: LyapunovSettings,
    pub sweep: SweepSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: -0.1,
            omega: 1.0,
            tau1: 0.0,
            tau2: 0.0,
            kappa: 0.0,
            integrator: IntegratorConfig::default(),
            lyapunov: LyapunovSettings::default(),
            sweep: SweepSpec::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("config {path}:{line}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub line: usize,
    pub message: String,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, Box<dyn std::error::Error>> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::default();
        cfg.apply_text(&text, &path.display().to_string())?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str, path: &str) -> Result<(), ConfigError> {
        let err = |line: usize, message: String| ConfigError {
            path: path.to_string(),
            line,
            message,
        };
        let mut section = String::new();
        for (lineno0, raw) in text.lines().enumerate() {
            let lineno = lineno0 + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| err(lineno, format!("malformed section header `{raw}`")))?;
                if !["model", "integrator", "lyapunov", "sweep"].contains(&name) {
                    return Err(err(lineno, format!("unknown section `[{name}]`")));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(lineno, format!("expected `key = value`, got `{raw}`")))?;
            let key = key.trim();
            let value = value.trim();
            if section.is_empty() {
                return Err(err(lineno, format!("key `{key}` before any section header")));
            }
            self.set(&section, key, value)
                .map_err(|m| err(lineno, m))?;
        }
        Ok(())
    }

    fn set(&mut self, section: &str, key: &str, value: &str) -> Result<(), String> {
        let num = || -> Result<f64, String> {
            value.parse::<f64>().map_err(|e| format!("key `{key}`: {e}"))
        };
        let count = || -> Result<usize, String> {
            value.parse::<usize>().map_err(|e| format!("key `{key}`: {e}"))
        };
        let flag = || -> Result<bool, String> {
            value.parse::<bool>().map_err(|e| format!("key `{key}`: {e}"))
        };
        match (section, key) {
            ("model", "alpha") => self.alpha = num()?,
            ("model", "beta") => self.beta = num()?,
            ("model", "omega") => self.omega = num()?,
            ("model", "tau1") => self.tau1 = num()?,
            ("model", "tau2") => self.tau2 = num()?,
            ("model", "kappa") => self.kappa = num()?,
            ("integrator", "rtol") => self.integrator.rtol = num()?,
            ("integrator", "atol") => self.integrator.atol = num()?,
            ("integrator", "max_step") => self.integrator.max_step = num()?,
            ("integrator", "project_to_sphere") => self.integrator.project_to_sphere = flag()?,
            ("integrator", "t_transient") => self.integrator.t_transient = num()?,
            ("integrator", "sample_dt") => self.integrator.sample_dt = num()?,
            ("lyapunov", "t_total") => self.lyapunov.t_total = num()?,
            ("lyapunov", "gs_interval") => self.lyapunov.gs_interval = num()?,
            ("lyapunov", "zero_tol") => self.lyapunov.zero_tol = num()?,
            ("lyapunov", "convergence_tol") => self.lyapunov.convergence_tol = num()?,
            ("sweep", "tau1_lo") => self.sweep.tau1_lo = num()?,
            ("sweep", "tau1_hi") => self.sweep.tau1_hi = num()?,
            ("sweep", "n1") => self.sweep.n1 = count()?,
            ("sweep", "tau2_lo") => self.sweep.tau2_lo = num()?,
            ("sweep", "tau2_hi") => self.sweep.tau2_hi = num()?,
            ("sweep", "n2") => self.sweep.n2 = count()?,
            ("sweep", "x0") => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                if parts.len() != 4 {
                    return Err(format!("key `x0`: expected 4 comma-separated values"));
                }
                for (i, part) in parts.iter().enumerate() {
                    self.sweep.x0[i] =
                        part.parse::<f64>().map_err(|e| format!("key `x0`: {e}"))?;
                }
            }
            _ => return Err(format!("unknown key `{key}` in section `[{section}]`")),
        }
        Ok(())
    }

    /// Pushes the shared model/integration settings into the sweep spec.
    pub fn sweep_spec(&self) -> SweepSpec {
        SweepSpec {
            alpha: self.alpha,
            beta: self.beta,
            omega: self.omega,
            kappa: self.kappa,
            integrator: self.integrator,
            lyapunov: self.lyapunov,
            ..self.sweep
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_overrides_defaults() {
        let mut cfg = RunConfig::default();
        cfg.apply_text(
            "# comment\n[model]\nalpha = 2.0\nbeta = -0.5\n\n[lyapunov]\nt_total = 100\n\n[sweep]\nn1 = 8\nx0 = 0, 0, 0.01, 0.99\n",
            "test",
        )
        .unwrap();
        assert_eq!(cfg.alpha, 2.0);
        assert_eq!(cfg.beta, -0.5);
        assert_eq!(cfg.lyapunov.t_total, 100.0);
        assert_eq!(cfg.sweep.n1, 8);
        assert_eq!(cfg.sweep.x0, [0.0, 0.0, 0.01, 0.99]);
        assert_eq!(cfg.omega, 1.0); // untouched default
    }

    #[test]
    fn unknown_key_is_an_error() {
        let mut cfg = RunConfig::default();
        let e = cfg.apply_text("[model]\nalhpa = 1.0\n", "test").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(e.message.contains("alhpa"));
    }

    #[test]
    fn unknown_section_is_an_error() {
        let mut cfg = RunConfig::default();
        assert!(cfg.apply_text("[integrater]\nrtol = 1\n", "test").is_err());
    }

    #[test]
    fn key_without_section_is_an_error() {
        let mut cfg = RunConfig::default();
        assert!(cfg.apply_text("alpha = 1\n", "test").is_err());
    }
}
