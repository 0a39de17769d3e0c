//! JSON model configuration: parsing, canonical printing and conversion into
//! core model objects.

use std::fmt;
use std::path::Path;

use lrwm_core::mc::McConfig;
use lrwm_core::mortality::MortalityModel;
use lrwm_core::numerics::{QuadratureConfig, SpdMatrix, SymMatrix};
use lrwm_core::pricing::{AnnuitySchedule, DiscountCurve, GaoContract};
use lrwm_core::wishart::WishartParams;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const CONFIG_VERSION: u32 = 1;

/// Row-major nested arrays.
pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub version: u32,
    pub alpha: f64,
    pub r: f64,
    pub beta: f64,
    pub sigma: Rows,
    pub m: Rows,
    pub v0: Rows,
    pub legs: Vec<Rows>,
    pub schedule: ScheduleConfig,
    pub g: f64,
    pub z_i: f64,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub mc: McSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    /// Option date `T`, in years from the valuation date.
    pub option_date: f64,
    /// Number of yearly payments starting at `T + 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payments: Option<usize>,
    /// Explicit payment dates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dates: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSection {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub panel_order: usize,
    pub max_panels: usize,
    pub truncation_ratio: f64,
}

impl Default for QuadratureSection {
    fn default() -> Self {
        let q = QuadratureConfig::default();
        QuadratureSection {
            abs_tol: q.abs_tol,
            rel_tol: q.rel_tol,
            panel_order: q.panel_order,
            max_panels: q.max_panels,
            truncation_ratio: q.truncation_ratio,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    pub paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub psd_floor: f64,
}

impl Default for McSection {
    fn default() -> Self {
        let c = McConfig::default();
        McSection {
            paths: c.paths,
            dt: c.dt,
            seed: c.seed,
            psd_floor: c.psd_floor,
        }
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Io(std::io::Error),
    Parse(serde_json::Error),
    /// A model invariant rejected the configuration.
    Invalid { field: String, error: lrwm_core::Error },
    Shape(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "cannot read config: {e}"),
            ConfigError::Parse(e) => write!(f, "cannot parse config: {e}"),
            ConfigError::Invalid { field, error } => {
                write!(f, "invalid config field `{field}`: {} ({error})", error.name())
            }
            ConfigError::Shape(msg) => write!(f, "invalid config: {msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(field: &str) -> impl FnOnce(lrwm_core::Error) -> ConfigError + '_ {
    move |error| ConfigError::Invalid {
        field: field.to_string(),
        error,
    }
}

fn matrix(field: &str, rows: &Rows) -> Result<DMatrix<f64>, ConfigError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(ConfigError::Shape(format!("`{field}` must be a non-empty square matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Rows {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Everything a command needs, built from a validated configuration.
#[derive(Debug, Clone)]
pub struct Setup {
    pub model: MortalityModel,
    pub curve: DiscountCurve,
    pub contract: GaoContract,
    pub quad: QuadratureConfig,
    pub mc: McConfig,
}

impl Setup {
    pub fn v0(&self) -> SymMatrix {
        self.model.wishart().v0().as_sym().clone()
    }

    /// Tolerances for integrals over a recovered density (moments, mass, tail
    /// means). Each density value is itself a Fourier integral, so asking the
    /// outer pass for more than about 1e-8 only multiplies the work.
    pub fn density_quad(&self) -> QuadratureConfig {
        QuadratureConfig {
            abs_tol: self.quad.abs_tol.max(1e-8),
            rel_tol: self.quad.rel_tol.max(1e-7),
            ..self.quad
        }
    }
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ModelConfig = serde_json::from_str(text).map_err(ConfigError::Parse)?;
        if cfg.version != CONFIG_VERSION {
            return Err(ConfigError::Shape(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(ConfigError::Io)?;
        Self::from_json(&text)
    }

    /// Pretty-printed JSON in declaration key order, with a trailing newline.
    pub fn canonical(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn sha256(&self) -> String {
        format!("{:x}", Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn quadrature(&self) -> QuadratureConfig {
        QuadratureConfig {
            abs_tol: self.quadrature.abs_tol,
            rel_tol: self.quadrature.rel_tol,
            panel_order: self.quadrature.panel_order,
            max_panels: self.quadrature.max_panels,
            truncation_ratio: self.quadrature.truncation_ratio,
        }
    }

    pub fn mc_config(&self) -> McConfig {
        McConfig {
            paths: self.mc.paths,
            dt: self.mc.dt,
            seed: self.mc.seed,
            horizon: self.schedule.option_date,
            psd_floor: self.mc.psd_floor,
        }
    }

    pub fn wishart(&self) -> Result<WishartParams, ConfigError> {
        let sigma = SpdMatrix::new(SymMatrix::new(matrix("sigma", &self.sigma)?).map_err(invalid("sigma"))?)
            .map_err(invalid("sigma"))?;
        let v0 = SpdMatrix::new(SymMatrix::new(matrix("v0", &self.v0)?).map_err(invalid("v0"))?).map_err(invalid("v0"))?;
        let m = matrix("m", &self.m)?;
        WishartParams::new(self.beta, sigma, m, v0).map_err(|e| {
            let field = match &e {
                lrwm_core::Error::InvalidParameter { name, .. } => name,
                _ => "wishart",
            };
            invalid(field)(e)
        })
    }

    pub fn model(&self) -> Result<MortalityModel, ConfigError> {
        let legs = self
            .legs
            .iter()
            .map(|u| SymMatrix::new(matrix("legs", u)?).map_err(invalid("legs")))
            .collect::<Result<Vec<_>, _>>()?;
        MortalityModel::new(self.wishart()?, legs, self.alpha).map_err(|e| {
            let field = match &e {
                lrwm_core::Error::InvalidParameter { name, .. } => name,
                _ => "legs",
            };
            invalid(field)(e)
        })
    }

    pub fn annuity_schedule(&self) -> Result<AnnuitySchedule, ConfigError> {
        let s = &self.schedule;
        match (&s.payments, &s.dates) {
            (Some(n), None) => AnnuitySchedule::yearly(s.option_date, *n).map_err(invalid("schedule")),
            (None, Some(d)) => AnnuitySchedule::new(s.option_date, d.clone()).map_err(invalid("schedule")),
            _ => Err(ConfigError::Shape(
                "`schedule` needs exactly one of `payments` or `dates`".to_string(),
            )),
        }
    }

    pub fn setup(&self) -> Result<Setup, ConfigError> {
        let model = self.model()?;
        let curve = DiscountCurve::flat(self.r).map_err(invalid("r"))?;
        let contract = GaoContract::new(self.annuity_schedule()?, self.g, self.z_i).map_err(|e| {
            let field = match &e {
                lrwm_core::Error::InvalidParameter { name, .. } => name,
                _ => "g",
            };
            invalid(field)(e)
        })?;
        let mc = self.mc_config();
        mc.validate().map_err(invalid("mc"))?;
        Ok(Setup {
            model,
            curve,
            contract,
            quad: self.quadrature(),
            mc,
        })
    }

    /// `σ₁₂ / √(σ₁₁σ₂₂)` for two-dimensional configurations.
    pub fn rho_sigma(&self) -> Option<f64> {
        if self.sigma.len() != 2 {
            return None;
        }
        Some(self.sigma[0][1] / (self.sigma[0][0] * self.sigma[1][1]).sqrt())
    }

    /// Copy with one parameter replaced; the off-diagonal of `σ` is re-derived
    /// from the correlation whenever a diagonal entry or the correlation moves.
    pub fn with_param(&self, param: SweepParam, value: f64) -> Result<Self, ConfigError> {
        let mut out = self.clone();
        let rho = self.rho_sigma();
        let recouple = |cfg: &mut ModelConfig, rho: f64| {
            let s12 = rho * (cfg.sigma[0][0] * cfg.sigma[1][1]).sqrt();
            cfg.sigma[0][1] = s12;
            cfg.sigma[1][0] = s12;
        };
        match param {
            SweepParam::Alpha => out.alpha = value,
            SweepParam::Beta => out.beta = value,
            SweepParam::M11 => out.m[0][0] = value,
            SweepParam::T => out.schedule.option_date = value,
            SweepParam::RhoSigma | SweepParam::Sigma11 => {
                let rho = rho.ok_or_else(|| ConfigError::Shape("correlation sweeps need n = 2".to_string()))?;
                if param == SweepParam::RhoSigma {
                    recouple(&mut out, value);
                } else {
                    out.sigma[0][0] = value;
                    recouple(&mut out, rho);
                }
            }
        }
        if param == SweepParam::T {
            if let Some(d) = &out.schedule.dates {
                let shift = value - self.schedule.option_date;
                out.schedule.dates = Some(d.iter().map(|x| x + shift).collect());
            }
        }
        Ok(out)
    }

    /// Copy of a model built in code, for tests and round trips.
    pub fn from_parts(setup: &Setup, g: f64) -> Self {
        let w = setup.model.wishart();
        let sched = setup.contract.schedule();
        ModelConfig {
            version: CONFIG_VERSION,
            alpha: setup.model.alpha(),
            r: setup.curve.rate(),
            beta: w.beta(),
            sigma: rows_of(w.sigma().as_matrix()),
            m: rows_of(w.m()),
            v0: rows_of(w.v0().as_matrix()),
            legs: setup.model.legs().iter().map(|u| rows_of(u.as_matrix())).collect(),
            schedule: ScheduleConfig {
                option_date: sched.option_date(),
                payments: None,
                dates: Some(sched.payment_dates().to_vec()),
            },
            g,
            z_i: setup.contract.damping(),
            quadrature: QuadratureSection::default(),
            mc: McSection::default(),
        }
    }
}

/// Parameters the sensitivity command can sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepParam {
    Alpha,
    Beta,
    #[value(name = "rho_sigma")]
    RhoSigma,
    M11,
    Sigma11,
    #[value(name = "T")]
    T,
}

impl SweepParam {
    pub fn label(self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::Beta => "beta",
            SweepParam::RhoSigma => "rho_sigma",
            SweepParam::M11 => "m11",
            SweepParam::Sigma11 => "sigma11",
            SweepParam::T => "T",
        }
    }
}

/// The shipped reference configuration.
pub const REFERENCE_JSON: &str = include_str!("../configs/reference.json");

pub fn reference() -> ModelConfig {
    ModelConfig::from_json(REFERENCE_JSON).expect("shipped config parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_config_round_trips() {
        let cfg = reference();
        assert_eq!(cfg.canonical(), REFERENCE_JSON);
        assert_eq!(ModelConfig::from_json(&cfg.canonical()).unwrap(), cfg);
        assert_eq!(cfg.sha256().len(), 64);
    }

    #[test]
    fn shipped_config_has_reference_values() {
        let cfg = reference();
        assert_eq!(cfg.alpha, 0.04);
        assert_eq!(cfg.beta, 3.5);
        assert!((cfg.rho_sigma().unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(cfg.g, 0.225);
        assert_eq!(cfg.z_i, -0.025);
        assert_eq!(cfg.schedule.option_date, 2.0);
        assert_eq!(cfg.schedule.payments, Some(5));
        let s = cfg.setup().unwrap();
        assert_eq!(s.contract.schedule().payment_dates(), &[3.0, 4.0, 5.0, 6.0, 7.0]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = REFERENCE_JSON.replacen("\"alpha\"", "\"alhpa\"", 1);
        assert!(matches!(ModelConfig::from_json(&text), Err(ConfigError::Parse(_))));
        let text = REFERENCE_JSON.replacen("\"seed\"", "\"sed\"", 1);
        assert!(matches!(ModelConfig::from_json(&text), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn invariant_violations_name_the_field() {
        let mut cfg = reference();
        cfg.beta = 2.0;
        match cfg.setup() {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "beta"),
            other => panic!("{other:?}"),
        }
        let mut cfg = reference();
        cfg.sigma[0][1] = 0.01;
        assert!(matches!(cfg.setup(), Err(ConfigError::Invalid { .. })));
        let mut cfg = reference();
        cfg.schedule.dates = Some(vec![3.0]);
        assert!(matches!(cfg.setup(), Err(ConfigError::Shape(_))));
        let mut cfg = reference();
        cfg.m = vec![vec![-1.0, 0.0]];
        assert!(matches!(cfg.setup(), Err(ConfigError::Shape(_))));
    }

    #[test]
    fn sweeps_recouple_the_off_diagonal() {
        let cfg = reference();
        let s = cfg.with_param(SweepParam::Sigma11, 0.07).unwrap();
        assert!((s.rho_sigma().unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(s.sigma[1][0], s.sigma[0][1]);
        let r = cfg.with_param(SweepParam::RhoSigma, 0.0).unwrap();
        assert_eq!(r.sigma[0][1], 0.0);
        assert_eq!(r.sigma[0][0], 0.06);
        let t = cfg.with_param(SweepParam::T, 3.0).unwrap();
        assert_eq!(t.setup().unwrap().contract.schedule().payment_dates()[0], 4.0);
    }

    #[test]
    fn config_from_code_round_trips() {
        let s = reference().setup().unwrap();
        let cfg = ModelConfig::from_parts(&s, 0.2);
        let back = ModelConfig::from_json(&cfg.canonical()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.setup().unwrap().contract.schedule().payment_dates(), s.contract.schedule().payment_dates());
    }
}
