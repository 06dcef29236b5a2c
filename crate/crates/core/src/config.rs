//! Tunable constants of the analysis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the scale ratio `γ` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum GammaMode {
    /// Use `gamma` as given.
    Fixed,
    /// `γ = c0^{-2/η}`.
    FromC0 { c0: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub gamma: f64,
    pub gamma_mode: GammaMode,
    pub eta: f64,
    pub eps: f64,
    pub delta: f64,
    /// Nonhomogeneity factor; `None` means `γ^{-n}`.
    pub t_factor: Option<f64>,
    /// Off-plane margin for cone splitting.
    pub tau: f64,
    pub j_max: usize,
    pub seed: u64,
    pub mc_samples: usize,
    /// Relative tolerance on quadrature error estimates.
    pub tolerance: f64,
    pub theta_radial: usize,
    pub theta_sphere: usize,
    pub defect_order: usize,
    pub net_size: usize,
    pub refine_top: usize,
    pub golden_iters: usize,
    pub refine_sweeps: usize,
    pub lp_radial: usize,
    pub lp_sphere: usize,
    pub rf_radial: usize,
    pub rf_sphere: usize,
    pub cutoff_min_exp: u32,
    pub cutoff_max_exp: u32,
    pub divergence_alpha: f64,
    pub conical_samples: usize,
    pub conical_net: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            gamma: 0.5,
            gamma_mode: GammaMode::Fixed,
            eta: 0.1,
            eps: 0.05,
            delta: 1.0,
            t_factor: None,
            tau: 0.1,
            j_max: 8,
            seed: 0x5eed,
            mc_samples: 20_000,
            tolerance: 0.05,
            theta_radial: 64,
            theta_sphere: 24,
            defect_order: 10,
            net_size: 256,
            refine_top: 2,
            golden_iters: 12,
            refine_sweeps: 2,
            lp_radial: 16,
            lp_sphere: 12,
            rf_radial: 4,
            rf_sphere: 3,
            cutoff_min_exp: 3,
            cutoff_max_exp: 10,
            divergence_alpha: 0.05,
            conical_samples: 50_000,
            conical_net: 32,
        }
    }
}

impl AnalysisConfig {
    /// Cheaper rules for scans over many points and scales.
    pub fn scan() -> Self {
        AnalysisConfig {
            theta_radial: 24,
            theta_sphere: 10,
            defect_order: 6,
            net_size: 48,
            refine_top: 1,
            golden_iters: 8,
            refine_sweeps: 1,
            ..Self::default()
        }
    }

    pub fn effective_gamma(&self) -> f64 {
        match self.gamma_mode {
            GammaMode::Fixed => self.gamma,
            GammaMode::FromC0 { c0 } => c0.powf(-2.0 / self.eta),
        }
    }

    /// `t` in `N_t`, defaulting to `γ^{-n}`.
    pub fn t_for(&self, n: usize) -> f64 {
        self.t_factor
            .unwrap_or_else(|| self.effective_gamma().powi(-(n as i32)))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eta", self.eta),
            ("eps", self.eps),
            ("delta", self.delta),
            ("tau", self.tau),
            ("tolerance", self.tolerance),
            ("divergence_alpha", self.divergence_alpha),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(t) = self.t_factor {
            if !(t > 0.0) {
                return Err(Error::Config(format!("t_factor must be positive, got {t}")));
            }
        }
        if let GammaMode::FromC0 { c0 } = self.gamma_mode {
            if !(c0 > 1.0) {
                return Err(Error::Config(format!("c0 must exceed 1, got {c0}")));
            }
        }
        let g = self.effective_gamma();
        if !(g > 0.0 && g < 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0,1), got {g}")));
        }
        if !(g.powi(self.j_max as i32) > 1e-10) {
            return Err(Error::Config(format!(
                "gamma^j_max = {:e} is below resolution",
                g.powi(self.j_max as i32)
            )));
        }
        if self.cutoff_min_exp >= self.cutoff_max_exp {
            return Err(Error::Config("cutoff_min_exp must be below cutoff_max_exp".into()));
        }
        let counts = [
            ("mc_samples", self.mc_samples),
            ("theta_radial", self.theta_radial),
            ("theta_sphere", self.theta_sphere),
            ("defect_order", self.defect_order),
            ("golden_iters", self.golden_iters),
            ("lp_radial", self.lp_radial),
            ("lp_sphere", self.lp_sphere),
            ("rf_radial", self.rf_radial),
            ("rf_sphere", self.rf_sphere),
            ("conical_samples", self.conical_samples),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        AnalysisConfig::default().validate().unwrap();
        AnalysisConfig::scan().validate().unwrap();
        assert_eq!(AnalysisConfig::default().t_for(3), 8.0);
    }

    #[test]
    fn rejects_bad_thresholds() {
        let cfg = AnalysisConfig {
            eta: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = AnalysisConfig {
            gamma: 0.01,
            j_max: 10,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn gamma_from_c0() {
        let cfg = AnalysisConfig {
            gamma_mode: GammaMode::FromC0 { c0: 2.0 },
            eta: 1.0,
            ..Default::default()
        };
        assert_eq!(cfg.effective_gamma(), 0.25);
    }
}
