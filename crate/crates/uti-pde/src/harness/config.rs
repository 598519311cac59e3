use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::contours::{OscillatoryStrategy, QuadratureRule};
use crate::domain::{BoundarySignal, ClosedForm};
use crate::heat::{default_tau_support, Taper};

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Equation {
    Heat,
    HeatVarcoeff,
    Kdv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    Picard,
    Collocation,
    Marching,
    FixedPointKdv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    PlainPanels,
    TauSubstitution,
}

/// One run, read from a flat TOML file. See `docs/config.md` for the schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub equation: Equation,
    pub solver: Solver,
    pub ell: f64,
    pub t_end: f64,
    /// Closed-form name of the left datum: `zero`, `sine`, `affine`,
    /// `windowed_sine` or `sine_series`.
    pub g: String,
    #[serde(default)]
    pub g_params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diffusion_params: Vec<f64>,
    #[serde(default = "defaults::m")]
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_support: Option<f64>,
    /// Taper end as a fraction of the sine support; 0 disables the taper.
    #[serde(default = "defaults::taper_end")]
    pub taper_end: f64,
    #[serde(default = "defaults::n_t")]
    pub n_t: usize,
    #[serde(default = "defaults::n_x")]
    pub n_x: usize,
    #[serde(default = "defaults::tol")]
    pub tol: f64,
    #[serde(default = "defaults::max_iter")]
    pub max_iter: usize,
    #[serde(default = "defaults::truncation_radius")]
    pub truncation_radius: f64,
    #[serde(default = "defaults::panels")]
    pub panels: usize,
    #[serde(default = "defaults::nodes_per_panel")]
    pub nodes_per_panel: usize,
    #[serde(default = "defaults::tail_tolerance")]
    pub tail_tolerance: f64,
    #[serde(default = "defaults::strategy")]
    pub strategy: Strategy,
    #[serde(default = "defaults::output_dir")]
    pub output_dir: PathBuf,
}

mod defaults {
    use super::Strategy;
    use std::path::PathBuf;

    pub fn m() -> usize {
        48
    }
    pub fn taper_end() -> f64 {
        0.85
    }
    pub fn n_t() -> usize {
        241
    }
    pub fn n_x() -> usize {
        161
    }
    pub fn tol() -> f64 {
        1e-10
    }
    pub fn max_iter() -> usize {
        60
    }
    pub fn truncation_radius() -> f64 {
        30.0
    }
    pub fn panels() -> usize {
        64
    }
    pub fn nodes_per_panel() -> usize {
        16
    }
    pub fn tail_tolerance() -> f64 {
        1e-8
    }
    pub fn strategy() -> Strategy {
        Strategy::TauSubstitution
    }
    pub fn output_dir() -> PathBuf {
        PathBuf::from("out")
    }
}

pub const BUILTINS: [&str; 3] = ["fig3", "fig4", "kdv-desk"];

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    fn base(equation: Equation, solver: Solver, ell: f64, t_end: f64, g: &str, g_params: Vec<f64>) -> Self {
        Self {
            equation,
            solver,
            ell,
            t_end,
            g: g.to_string(),
            g_params,
            diffusion: None,
            diffusion_params: vec![],
            m: defaults::m(),
            tau_support: None,
            taper_end: defaults::taper_end(),
            n_t: defaults::n_t(),
            n_x: defaults::n_x(),
            tol: defaults::tol(),
            max_iter: defaults::max_iter(),
            truncation_radius: defaults::truncation_radius(),
            panels: defaults::panels(),
            nodes_per_panel: defaults::nodes_per_panel(),
            tail_tolerance: defaults::tail_tolerance(),
            strategy: defaults::strategy(),
            output_dir: defaults::output_dir(),
        }
    }

    /// The shipped scenarios.
    pub fn builtin(name: &str) -> Option<Self> {
        use std::f64::consts::PI;
        let mut cfg = match name {
            "fig3" => Self::base(Equation::Heat, Solver::Collocation, 4.0, 6.0, "sine", vec![1.0, 2.0 * PI / 16.0]),
            "fig4" => Self::base(Equation::Heat, Solver::Marching, 4.0, 42.0, "sine", vec![1.0, 2.0 * PI / 112.0]),
            "kdv-desk" => {
                let mut c = Self::base(Equation::Kdv, Solver::FixedPointKdv, 4.0, 0.04, "windowed_sine", vec![1.0, 50.0 * PI, 0.04, 2.0]);
                c.n_t = 41;
                c.n_x = 41;
                c
            }
            _ => return None,
        };
        cfg.output_dir = PathBuf::from("out").join(name);
        Some(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(HarnessError::Config(format!("field `{name}` must be positive, got {v}")))
            }
        };
        positive("ell", self.ell)?;
        positive("t_end", self.t_end)?;
        positive("tol", self.tol)?;
        if self.n_t < 2 || self.n_x < 2 {
            return Err(HarnessError::Config(format!("fields `n_t` and `n_x` need at least 2 nodes, got {} and {}", self.n_t, self.n_x)));
        }
        if self.max_iter < 1 {
            return Err(HarnessError::Config("field `max_iter` must be at least 1".into()));
        }
        if self.solver == Solver::Collocation {
            if self.m < 1 {
                return Err(HarnessError::Config("field `m` must be at least 1".into()));
            }
            if let Some(tau) = self.tau_support {
                positive("tau_support", tau)?;
            }
            if !(0.0..=1.0).contains(&self.taper_end) {
                return Err(HarnessError::Config(format!("field `taper_end` must lie in [0, 1], got {}", self.taper_end)));
            }
        }
        let compatible = matches!(
            (self.equation, self.solver),
            (Equation::Heat, Solver::Picard | Solver::Collocation | Solver::Marching)
                | (Equation::HeatVarcoeff, Solver::Picard)
                | (Equation::Kdv, Solver::FixedPointKdv)
        );
        if !compatible {
            return Err(HarnessError::Config(format!("field `solver`: {:?} cannot solve equation {:?}", self.solver, self.equation)));
        }
        match (self.equation, &self.diffusion) {
            (Equation::HeatVarcoeff, None) => {
                return Err(HarnessError::Config("field `diffusion` is required for heat-varcoeff".into()));
            }
            (Equation::Heat | Equation::Kdv, Some(_)) => {
                return Err(HarnessError::Config("field `diffusion` only applies to heat-varcoeff".into()));
            }
            _ => {}
        }
        self.rule().validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.datum()?;
        if self.diffusion.is_some() {
            self.diffusion_signal()?;
        }
        Ok(())
    }

    pub fn rule(&self) -> QuadratureRule {
        let strategy = match self.strategy {
            Strategy::PlainPanels => OscillatoryStrategy::PlainPanels,
            Strategy::TauSubstitution => OscillatoryStrategy::TauSubstitution,
        };
        let mut rule = QuadratureRule::default()
            .with_panels(self.panels)
            .with_radius(self.truncation_radius)
            .with_tolerance(self.tail_tolerance)
            .with_strategy(strategy);
        rule.nodes_per_panel = self.nodes_per_panel;
        rule
    }

    pub fn datum(&self) -> Result<BoundarySignal, HarnessError> {
        parse_signal("g", &self.g, &self.g_params)
    }

    pub fn diffusion_signal(&self) -> Result<BoundarySignal, HarnessError> {
        let name = self.diffusion.as_deref().unwrap_or("affine");
        parse_signal("diffusion", name, &self.diffusion_params)
    }

    pub fn tau(&self) -> f64 {
        self.tau_support.unwrap_or_else(|| default_tau_support(self.t_end))
    }

    pub fn taper(&self) -> Taper {
        if self.taper_end == 0.0 {
            Taper::None
        } else {
            Taper::Smooth { end_fraction: self.taper_end }
        }
    }
}

/// Builds a boundary signal from a closed-form name and its parameter list.
pub fn parse_signal(field: &str, name: &str, p: &[f64]) -> Result<BoundarySignal, HarnessError> {
    let arity = |n: usize| {
        if p.len() == n {
            Ok(())
        } else {
            Err(HarnessError::Config(format!("field `{field}_params`: `{name}` takes {n} parameters, got {}", p.len())))
        }
    };
    let wrap = |r: crate::Result<BoundarySignal>| r.map_err(|e| HarnessError::Config(format!("field `{field}`: {e}")));
    match name {
        "zero" => arity(0).map(|_| BoundarySignal::zero()),
        "sine" => arity(2).map(|_| BoundarySignal::sine(p[0], p[1])),
        "affine" => arity(2).map(|_| BoundarySignal::closed_form(ClosedForm::affine(p[0], p[1]))),
        "windowed_sine" => {
            arity(4)?;
            if p[3] < 1.0 || p[3].fract() != 0.0 {
                return Err(HarnessError::Config(format!("field `{field}_params`: window power must be a positive integer, got {}", p[3])));
            }
            wrap(BoundarySignal::windowed_sine(p[0], p[1], p[2], p[3] as u32))
        }
        "sine_series" => {
            if p.len() < 2 {
                return Err(HarnessError::Config(format!(
                    "field `{field}_params`: `sine_series` takes the support followed by at least one coefficient"
                )));
            }
            wrap(BoundarySignal::sine_series(p[0], p[1..].to_vec()))
        }
        other => Err(HarnessError::Config(format!(
            "field `{field}`: unknown signal `{other}` (expected zero, sine, affine, windowed_sine or sine_series)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_takes_defaults() {
        let cfg = ScenarioConfig::from_toml_str(
            "equation = \"heat\"\nsolver = \"picard\"\nell = 4.0\nt_end = 6.0\ng = \"sine\"\ng_params = [1.0, 0.5]\n",
        )
        .unwrap();
        assert_eq!(cfg.m, 48);
        assert_eq!((cfg.n_t, cfg.n_x), (241, 161));
        assert_eq!(cfg.truncation_radius, 30.0);
        assert_eq!(cfg.strategy, Strategy::TauSubstitution);
    }

    #[test]
    fn unknown_key_names_the_field_and_line() {
        let err =
            ScenarioConfig::from_toml_str("equation = \"heat\"\nsolver = \"picard\"\nell = 4.0\nt_end = 6.0\ng = \"zero\"\nwidth = 3\n")
                .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("width"), "{msg}");
        assert!(msg.contains("line 6"), "{msg}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn incompatible_solver_rejected() {
        let err = ScenarioConfig::from_toml_str("equation = \"kdv\"\nsolver = \"collocation\"\nell = 4.0\nt_end = 0.04\ng = \"zero\"\n")
            .unwrap_err();
        assert!(err.to_string().contains("solver"));
    }

    #[test]
    fn nonpositive_fields_rejected() {
        for (key, line) in [("ell", "ell = -1.0"), ("tol", "tol = 0.0")] {
            let text = format!(
                "equation = \"heat\"\nsolver = \"picard\"\nt_end = 1.0\ng = \"zero\"\n{line}\n{}",
                if key == "ell" { "" } else { "ell = 1.0\n" }
            );
            let err = ScenarioConfig::from_toml_str(&text).unwrap_err();
            assert!(err.to_string().contains(key), "{err}");
        }
    }

    #[test]
    fn signal_arity_checked() {
        assert!(parse_signal("g", "sine", &[1.0]).is_err());
        assert!(parse_signal("g", "windowed_sine", &[1.0, 2.0, 0.1, 1.5]).is_err());
        assert!(parse_signal("g", "sine_series", &[2.0, 0.5, 0.25]).is_ok());
        assert!(parse_signal("g", "cosine", &[]).is_err());
    }

    #[test]
    fn builtins_are_valid() {
        for name in BUILTINS {
            ScenarioConfig::builtin(name).unwrap().validate().unwrap();
        }
        assert!(ScenarioConfig::builtin("fig5").is_none());
    }

    #[test]
    fn json_echo_round_trips() {
        let cfg = ScenarioConfig::builtin("kdv-desk").unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ScenarioConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }
}
