//! Scenario runner behind the `uti-pde` binary: config loading, the
//! solve-then-residual pipeline, and report files.

mod config;
mod report;

pub use config::{parse_signal, Equation, ScenarioConfig, Solver, Strategy, BUILTINS};
pub use report::{emit_report, report_json, write_json};

use crate::domain::{l2_norm_time, Certificate, SpaceGrid, TimeGrid};
use crate::heat::{
    admissible_horizon, collocation_solve, contraction_check_heat, contraction_check_varcoeff, marching_with_rule, picard_with_rule,
    residual_heat, uniform_collocation_nodes, varcoeff_with_rule, CollocationOptions, HeatScenario,
};
use crate::kdv::{contraction_check_kdv, fixed_point_kdv_with_rule, residual_kdv, KdvScenario};
use crate::Error;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Refused(Error),
    #[error("numerical failure: {0}")]
    Numerical(Error),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Refused(_) => 2,
            HarnessError::Numerical(_) | HarnessError::Io { .. } => 3,
        }
    }
}

impl From<Error> for HarnessError {
    fn from(e: Error) -> Self {
        match e {
            Error::NotAdmissible { .. } => HarnessError::Refused(e),
            other => HarnessError::Numerical(other),
        }
    }
}

/// A column-oriented table with a header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        let i = self.header.iter().position(|h| *h == name)?;
        Some(&self.columns[i])
    }
}

/// Everything a finished run reports.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub config: ScenarioConfig,
    pub certificate: Certificate,
    pub signals: Table,
    /// Interval fields; absent for variable diffusion, which has no
    /// interval reference formula.
    pub field: Option<Table>,
    pub times: Vec<f64>,
    /// Per-time residual: `||q - v - w||` in x for heat, the largest
    /// boundary defect for KdV. Empty for variable diffusion.
    pub residual_norms: Vec<f64>,
    /// Largest residual norm, or the final fixed-point increment when no
    /// field residual exists.
    pub max_residual: f64,
    /// `[max |r0|, max |r1|, max |r2|]` for KdV.
    pub defects: Option<[f64; 3]>,
    pub iteration_log: Vec<f64>,
    pub window_mismatch: Vec<f64>,
    pub a_l2: f64,
    pub g_l2: f64,
}

impl RunOutcome {
    pub fn iterations(&self) -> usize {
        self.iteration_log.len()
    }

    pub fn summary(&self) -> String {
        format!(
            "max residual {:.3e}, kappa {:.6}, iterations {}",
            self.max_residual,
            self.certificate.contraction_factor,
            self.iterations()
        )
    }
}

/// Certificate for the configured equation on `[0, t_end]`.
pub fn certificate(cfg: &ScenarioConfig) -> Result<Certificate, HarnessError> {
    Ok(match cfg.equation {
        Equation::Heat => contraction_check_heat(cfg.ell, cfg.t_end),
        Equation::HeatVarcoeff => {
            let grid = TimeGrid::uniform(cfg.t_end, cfg.n_t)?;
            let d_sup = cfg.diffusion_signal()?.sampled(&grid).into_iter().fold(0.0, f64::max);
            contraction_check_varcoeff(cfg.ell, cfg.t_end, d_sup)
        }
        Equation::Kdv => contraction_check_kdv(cfg.ell, cfg.t_end),
    })
}

/// Certificate report for `uti-pde check`; refuses when the configured
/// solver needs an admissible horizon and does not get one.
pub fn check(cfg: &ScenarioConfig) -> Result<String, HarnessError> {
    let cert = certificate(cfg)?;
    let mut line = format!("kappa {:.6}, threshold {}, admissible {}", cert.contraction_factor, cert.threshold, cert.admissible);
    if let Some(m) = cert.size_bound_multiplier {
        line.push_str(&format!(", size bound multiplier {m:.6}"));
    }
    match cfg.solver {
        Solver::Collocation => {}
        Solver::Marching => line.push_str(&format!(", window length {:.6}", admissible_horizon(cfg.ell))),
        Solver::Picard | Solver::FixedPointKdv => {
            if !cert.admissible {
                return Err(HarnessError::Refused(Error::NotAdmissible {
                    kappa: cert.contraction_factor,
                    threshold: cert.threshold,
                    hint: "shorten the horizon",
                }));
            }
        }
    }
    Ok(line)
}

/// Runs the configured solve and its residual check. No files are written.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutcome, HarnessError> {
    cfg.validate()?;
    let rule = cfg.rule();
    let g = cfg.datum()?;
    let tgrid = TimeGrid::uniform(cfg.t_end, cfg.n_t)?;
    let xgrid = SpaceGrid::uniform(cfg.ell, cfg.n_x)?;
    let times = tgrid.nodes().to_vec();
    let g_l2 = l2_norm_time(&g, &tgrid);
    // Field rows run over t fastest, matching the field storage order.
    let xs: Vec<f64> = (0..cfg.n_x * cfg.n_t).map(|i| xgrid.nodes()[i / cfg.n_t]).collect();
    let ts: Vec<f64> = (0..cfg.n_x * cfg.n_t).map(|i| times[i % cfg.n_t]).collect();

    match cfg.equation {
        Equation::Heat | Equation::HeatVarcoeff => {
            let mut sc = HeatScenario::new(cfg.ell, cfg.t_end, g.clone())?;
            if cfg.equation == Equation::HeatVarcoeff {
                sc = sc.with_diffusion(cfg.diffusion_signal()?);
            }
            let res = match (cfg.equation, cfg.solver) {
                (Equation::HeatVarcoeff, _) => varcoeff_with_rule(&sc, &tgrid, cfg.tol, cfg.max_iter, &rule)?,
                (_, Solver::Picard) => picard_with_rule(&sc, &tgrid, cfg.tol, cfg.max_iter, &rule)?,
                (_, Solver::Marching) => marching_with_rule(&sc, &tgrid, cfg.tol, cfg.max_iter, &rule)?,
                (_, Solver::Collocation) => {
                    let tau = cfg.tau();
                    let nodes = uniform_collocation_nodes(cfg.m, tau)?;
                    let opts = CollocationOptions { taper: cfg.taper(), rule, ..CollocationOptions::default() };
                    collocation_solve(&sc, cfg.m, tau, &nodes, &opts)?
                }
                (_, Solver::FixedPointKdv) => unreachable!("rejected by validate"),
            };
            let signals = Table {
                header: vec!["t", "g", "a", "b"],
                columns: vec![times.clone(), g.sampled(&tgrid), res.a.sampled(&tgrid), res.b.sampled(&tgrid)],
            };
            let a_l2 = l2_norm_time(&res.a, &tgrid);
            let (field, residual_norms, max_residual) = if sc.diffusion.is_some() {
                (None, vec![], res.iteration_log.last().copied().unwrap_or(0.0))
            } else {
                let r = residual_heat(&sc, &res, &xgrid, &tgrid, &rule)?;
                let max = r.max_norm();
                let table = Table {
                    header: vec!["x", "t", "q", "v", "w", "dc"],
                    columns: vec![xs, ts, r.q.values().to_vec(), r.v.values().to_vec(), r.w.values().to_vec(), r.dc.values().to_vec()],
                };
                (Some(table), r.norms, max)
            };
            Ok(RunOutcome {
                config: cfg.clone(),
                certificate: res.certificate,
                signals,
                field,
                times,
                residual_norms,
                max_residual,
                defects: None,
                iteration_log: res.iteration_log,
                window_mismatch: res.window_mismatch,
                a_l2,
                g_l2,
            })
        }
        Equation::Kdv => {
            let sc = KdvScenario::new(cfg.ell, cfg.t_end, g.clone())?;
            let sol = fixed_point_kdv_with_rule(&sc, &tgrid, cfg.tol, cfg.max_iter, &rule)?;
            let r = residual_kdv(&sc, &sol, &xgrid, &tgrid, &rule)?;
            let norms = r.norms();
            let defects = r.max_defects();
            let per_row = |v: &[f64]| -> Vec<f64> { (0..cfg.n_x * cfg.n_t).map(|i| v[i % cfg.n_t]).collect() };
            let field = Table {
                header: vec!["x", "t", "v", "w", "r0", "r1", "r2"],
                columns: vec![xs, ts, r.v.values().to_vec(), r.w.values().to_vec(), per_row(&r.r0), per_row(&r.r1), per_row(&r.r2)],
            };
            let signals = Table {
                header: vec!["t", "g", "a", "b", "c"],
                columns: vec![times.clone(), g.sampled(&tgrid), sol.a.sampled(&tgrid), sol.b.sampled(&tgrid), sol.c.sampled(&tgrid)],
            };
            Ok(RunOutcome {
                config: cfg.clone(),
                certificate: sol.certificate,
                signals,
                field: Some(field),
                times,
                max_residual: defects.iter().copied().fold(0.0, f64::max),
                residual_norms: norms,
                defects: Some(defects),
                iteration_log: sol.log,
                window_mismatch: vec![],
                a_l2: l2_norm_time(&sol.a, &tgrid),
                g_l2,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_heat(solver: Solver) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::builtin("fig3").unwrap();
        cfg.solver = solver;
        cfg.t_end = 2.0;
        cfg.n_t = 21;
        cfg.n_x = 9;
        cfg.m = 16;
        cfg
    }

    #[test]
    fn error_exit_codes() {
        assert_eq!(HarnessError::Config("x".into()).exit_code(), 1);
        let refused: HarnessError = Error::NotAdmissible { kappa: 0.7, threshold: 0.5, hint: "" }.into();
        assert_eq!(refused.exit_code(), 2);
        let numerical: HarnessError = Error::IllConditioned(1e13).into();
        assert_eq!(numerical.exit_code(), 3);
    }

    #[test]
    fn zero_datum_gives_zero_signals() {
        let mut cfg = small_heat(Solver::Picard);
        cfg.g = "zero".into();
        cfg.g_params.clear();
        let out = run_scenario(&cfg).unwrap();
        for name in ["a", "b"] {
            assert!(out.signals.column(name).unwrap().iter().all(|&v| v == 0.0));
        }
        assert_eq!(out.max_residual, 0.0);
    }

    #[test]
    fn field_rows_cover_the_grid() {
        let out = run_scenario(&small_heat(Solver::Picard)).unwrap();
        let field = out.field.unwrap();
        assert_eq!(field.n_rows(), 9 * 21);
        assert_eq!(field.column("t").unwrap()[..21], out.times[..]);
        assert!(field.column("x").unwrap()[..21].iter().all(|&x| x == 0.0));
        assert_eq!(out.residual_norms.len(), 21);
    }

    #[test]
    fn varcoeff_skips_the_field() {
        let mut cfg = small_heat(Solver::Picard);
        cfg.equation = Equation::HeatVarcoeff;
        cfg.diffusion = Some("affine".into());
        cfg.diffusion_params = vec![1.0, 0.1];
        let out = run_scenario(&cfg).unwrap();
        assert!(out.field.is_none());
        assert!(out.max_residual <= cfg.tol);
        assert!(out.a_l2 <= out.certificate.size_bound_multiplier.unwrap() * out.g_l2);
    }

    #[test]
    fn check_refuses_inadmissible_picard_only() {
        let mut cfg = ScenarioConfig::builtin("fig4").unwrap();
        assert!(check(&cfg).unwrap().contains("window length"));
        cfg.solver = Solver::Picard;
        assert_eq!(check(&cfg).unwrap_err().exit_code(), 2);
    }
}
