//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Complex numbers are written
//! `re,im` and lists are separated by `;`, e.g.
//!
//! ```text
//! coeffs = 6,0; 3,0; 1,0; 1,0; 20,0
//! regions = -0.8,0.4,-1.4,-0.4; -0.1,0.6,0.5,1.3
//! grid = 64,64
//! ```
//!
//! Keys that are absent keep their defaults, which reproduce the reference
//! five-component experiment.

use std::path::PathBuf;

use num_complex::Complex64;

use crate::bandwidth::EstimatorSettings;
use crate::diffusion::{Deposition, OperatorForm, SolverConfig, DEFAULT_GAMMA, DEFAULT_PHI};
use crate::error::{Error, Result};
use crate::fields::COEFF_CLIP_PERCENTILE;
use crate::grid::Region;
use crate::signal::{ExponentialModel, NoiseConvention};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ExponentialModel,
    pub replicates: usize,
    pub regions: Vec<Region>,
    pub mx: usize,
    pub my: usize,
    pub gamma: f64,
    pub phi: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    pub seed: u64,
    pub output: PathBuf,
    pub literal_operator: bool,
    pub per_point_delta: bool,
    pub baseline: bool,
    pub mc_trials: usize,
    pub pilot_threshold: f64,
    pub maxima_threshold: f64,
    pub bandwidth_updates: usize,
    /// Percentile at which the diffusion coefficient is clipped.
    pub coeff_clip_percentile: f64,
    /// Wall-clock budget in seconds for one region's diffusion solves (0 = none).
    pub time_budget: f64,
    /// Record `t,step,err_est` lines for the final diffusion solves.
    pub solver_log: bool,
    pub deposition: Deposition,
    pub noise: NoiseConvention,
    /// Read replicates from this file instead of simulating them.
    pub replicates_file: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ExponentialModel::reference(74, 1.0).expect("reference model is valid"),
            replicates: 10,
            regions: reference_regions(),
            mx: 64,
            my: 64,
            gamma: DEFAULT_GAMMA,
            phi: DEFAULT_PHI,
            rel_tol: 1e-3,
            abs_tol: 1e-6,
            max_steps: 2_000_000,
            seed: 1,
            output: PathBuf::from("out"),
            literal_operator: false,
            per_point_delta: false,
            baseline: true,
            mc_trials: 0,
            pilot_threshold: 0.1,
            maxima_threshold: 0.3,
            bandwidth_updates: 1,
            coeff_clip_percentile: COEFF_CLIP_PERCENTILE,
            time_budget: 0.0,
            solver_log: true,
            deposition: Deposition::NearestNode,
            noise: NoiseConvention::Circular,
            replicates_file: None,
        }
    }
}

/// The two analysis rectangles of the reference experiment.
pub fn reference_regions() -> Vec<Region> {
    vec![
        Region::new(-0.8, 0.4, -1.4, -0.4).expect("valid"),
        Region::new(-0.1, 0.6, 0.5, 1.3).expect("valid"),
    ]
}

fn parse_f64(v: &str, line: usize) -> Result<f64> {
    v.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("`{}` is not a number", v.trim()),
    })
}

fn parse_usize(v: &str, line: usize) -> Result<usize> {
    v.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("`{}` is not a non-negative integer", v.trim()),
    })
}

fn parse_bool(v: &str, line: usize) -> Result<bool> {
    match v.trim() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => Err(Error::Parse {
            line,
            msg: format!("`{other}` is not a boolean"),
        }),
    }
}

fn parse_numbers(v: &str, count: usize, line: usize) -> Result<Vec<f64>> {
    let nums: Vec<f64> = v.split(',').map(|s| parse_f64(s, line)).collect::<Result<_>>()?;
    if nums.len() != count {
        return Err(Error::Parse {
            line,
            msg: format!("expected {count} comma-separated numbers in `{}`", v.trim()),
        });
    }
    Ok(nums)
}

pub fn parse_complex(v: &str, line: usize) -> Result<Complex64> {
    let n = parse_numbers(v, 2, line)?;
    Ok(Complex64::new(n[0], n[1]))
}

fn parse_list<T>(v: &str, line: usize, item: impl Fn(&str, usize) -> Result<T>) -> Result<Vec<T>> {
    v.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|s| item(s, line))
        .collect()
}

impl RunConfig {
    /// Parses a configuration; an input without any entries is rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut coeffs = None;
        let mut nodes = None;
        let mut n = cfg.model.n;
        let mut sigma = cfg.model.sigma;
        let mut entries = 0;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or(Error::Parse {
                line,
                msg: format!("expected `key = value`, found `{body}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            entries += 1;
            match key {
                "coeffs" => coeffs = Some(parse_list(value, line, parse_complex)?),
                "nodes" => nodes = Some(parse_list(value, line, parse_complex)?),
                "n" => n = parse_usize(value, line)?,
                "sigma" => sigma = parse_f64(value, line)?,
                "replicates" => cfg.replicates = parse_usize(value, line)?,
                "regions" => {
                    cfg.regions = parse_list(value, line, |s, l| {
                        let v = parse_numbers(s, 4, l)?;
                        Region::new(v[0], v[1], v[2], v[3])
                    })?
                }
                "grid" => {
                    let v = parse_numbers(value, 2, line)?;
                    cfg.mx = v[0] as usize;
                    cfg.my = v[1] as usize;
                }
                "gamma" => cfg.gamma = parse_f64(value, line)?,
                "phi" => cfg.phi = parse_f64(value, line)?,
                "rel_tol" => cfg.rel_tol = parse_f64(value, line)?,
                "abs_tol" => cfg.abs_tol = parse_f64(value, line)?,
                "max_steps" => cfg.max_steps = parse_usize(value, line)?,
                "seed" => {
                    cfg.seed = value.parse().map_err(|_| Error::Parse {
                        line,
                        msg: format!("`{value}` is not a 64-bit seed"),
                    })?
                }
                "output" => cfg.output = PathBuf::from(value),
                "literal_operator" => cfg.literal_operator = parse_bool(value, line)?,
                "per_point_delta" => cfg.per_point_delta = parse_bool(value, line)?,
                "baseline" => cfg.baseline = parse_bool(value, line)?,
                "mc_trials" => cfg.mc_trials = parse_usize(value, line)?,
                "pilot_threshold" => cfg.pilot_threshold = parse_f64(value, line)?,
                "maxima_threshold" => cfg.maxima_threshold = parse_f64(value, line)?,
                "bandwidth_updates" => cfg.bandwidth_updates = parse_usize(value, line)?,
                "coeff_clip_percentile" => cfg.coeff_clip_percentile = parse_f64(value, line)?,
                "time_budget" => cfg.time_budget = parse_f64(value, line)?,
                "solver_log" => cfg.solver_log = parse_bool(value, line)?,
                "deposition" => {
                    cfg.deposition = match value {
                        "nearest" => Deposition::NearestNode,
                        "cubic" => Deposition::LocalCubic,
                        other => {
                            return Err(Error::Parse {
                                line,
                                msg: format!("unknown deposition `{other}` (nearest, cubic)"),
                            })
                        }
                    }
                }
                "noise" => {
                    cfg.noise = match value {
                        "circular" => NoiseConvention::Circular,
                        "per_component" => NoiseConvention::PerComponent,
                        other => {
                            return Err(Error::Parse {
                                line,
                                msg: format!("unknown noise convention `{other}` (circular, per_component)"),
                            })
                        }
                    }
                }
                "replicates_file" => cfg.replicates_file = Some(PathBuf::from(value)),
                other => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        if entries == 0 {
            return Err(Error::InvalidArgument("configuration has no entries".into()));
        }
        let (coeffs, nodes) = match (coeffs, nodes) {
            (Some(c), Some(z)) => (c, z),
            (None, None) => (cfg.model.coeffs.clone(), cfg.model.nodes.clone()),
            _ => {
                return Err(Error::InvalidArgument(
                    "`coeffs` and `nodes` must be given together".into(),
                ));
            }
        };
        cfg.model = ExponentialModel::new(coeffs, nodes, n, sigma)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("replicates must be at least 1".into()));
        }
        if self.mx < crate::grid::MIN_NODES || self.my < crate::grid::MIN_NODES {
            return Err(Error::InvalidArgument(format!(
                "grid {} x {} is too small",
                self.mx, self.my
            )));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidArgument("solver tolerances must be positive".into()));
        }
        if !(self.coeff_clip_percentile > 0.0 && self.coeff_clip_percentile <= 100.0) {
            return Err(Error::InvalidArgument(
                "coeff_clip_percentile must lie in (0, 100]".into(),
            ));
        }
        if !(self.time_budget >= 0.0) {
            return Err(Error::InvalidArgument("time_budget must be non-negative".into()));
        }
        if !(self.gamma > 0.0 && self.phi > 0.0) {
            return Err(Error::InvalidArgument("filter parameters must be positive".into()));
        }
        Ok(())
    }

    pub fn estimator_settings(&self) -> EstimatorSettings {
        EstimatorSettings {
            solver: SolverConfig {
                rel_tol: self.rel_tol,
                abs_tol: self.abs_tol,
                max_steps: self.max_steps,
                snapshot_times: Vec::new(),
                record_log: self.solver_log,
                deadline: None,
            },
            form: if self.literal_operator {
                OperatorForm::Literal
            } else {
                OperatorForm::Divergence
            },
            per_point_delta: self.per_point_delta,
            deposition: self.deposition,
            updates: self.bandwidth_updates.max(1),
            clip_percentile: self.coeff_clip_percentile,
        }
    }

    /// Renders the configuration in the format accepted by [`RunConfig::parse`].
    pub fn to_text(&self) -> String {
        let complex = |v: &[Complex64]| {
            v.iter()
                .map(|z| format!("{},{}", z.re, z.im))
                .collect::<Vec<_>>()
                .join("; ")
        };
        let regions = self
            .regions
            .iter()
            .map(|r| format!("{},{},{},{}", r.x_min, r.x_max, r.y_min, r.y_max))
            .collect::<Vec<_>>()
            .join("; ");
        let mut s = String::new();
        let mut put = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        put("coeffs", complex(&self.model.coeffs));
        put("nodes", complex(&self.model.nodes));
        put("n", self.model.n.to_string());
        put("sigma", self.model.sigma.to_string());
        put("replicates", self.replicates.to_string());
        put("regions", regions);
        put("grid", format!("{},{}", self.mx, self.my));
        put("gamma", self.gamma.to_string());
        put("phi", self.phi.to_string());
        put("rel_tol", self.rel_tol.to_string());
        put("abs_tol", self.abs_tol.to_string());
        put("max_steps", self.max_steps.to_string());
        put("seed", self.seed.to_string());
        put("output", self.output.display().to_string());
        put("literal_operator", self.literal_operator.to_string());
        put("per_point_delta", self.per_point_delta.to_string());
        put("baseline", self.baseline.to_string());
        put("mc_trials", self.mc_trials.to_string());
        put("pilot_threshold", self.pilot_threshold.to_string());
        put("maxima_threshold", self.maxima_threshold.to_string());
        put("bandwidth_updates", self.bandwidth_updates.to_string());
        put("coeff_clip_percentile", self.coeff_clip_percentile.to_string());
        put("time_budget", self.time_budget.to_string());
        put("solver_log", self.solver_log.to_string());
        put(
            "deposition",
            match self.deposition {
                Deposition::NearestNode => "nearest",
                Deposition::LocalCubic => "cubic",
            }
            .into(),
        );
        put(
            "noise",
            match self.noise {
                NoiseConvention::Circular => "circular",
                NoiseConvention::PerComponent => "per_component",
            }
            .into(),
        );
        if let Some(p) = &self.replicates_file {
            put("replicates_file", p.display().to_string());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_rejected() {
        assert!(RunConfig::parse("").is_err());
        assert!(RunConfig::parse("# only a comment\n\n").is_err());
    }

    #[test]
    fn defaults_reproduce_reference_setup() {
        let c = RunConfig::parse("seed = 7").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.model.n, 74);
        assert_eq!(c.replicates, 10);
        assert_eq!((c.mx, c.my), (64, 64));
        assert_eq!(c.regions.len(), 2);
        assert_eq!(c.regions[0], Region::new(-0.8, 0.4, -1.4, -0.4).unwrap());
        assert_eq!((c.gamma, c.phi), (1.6, 0.02));
    }

    #[test]
    fn explicit_model() {
        let c = RunConfig::parse("coeffs = 1,0\nnodes = 0.5,-0.5\nn = 2\nsigma = 0.3\ngrid = 16,12").unwrap();
        assert_eq!(c.model.nodes, vec![Complex64::new(0.5, -0.5)]);
        assert_eq!((c.mx, c.my), (16, 12));
    }

    #[test]
    fn errors_carry_line_numbers() {
        match RunConfig::parse("seed = 1\nsigma = abc") {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(RunConfig::parse("bogus = 1").is_err());
        assert!(RunConfig::parse("coeffs = 1,0").is_err());
        assert!(RunConfig::parse("n = 7").is_err());
    }

    #[test]
    fn text_round_trip() {
        let c = RunConfig {
            seed: 99,
            deposition: Deposition::LocalCubic,
            ..RunConfig::default()
        };
        let back = RunConfig::parse(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }
}
