//! The TOML run configuration. Every physical length carries its unit in the key name.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{AssimR, Factor, InflationSearch, Scenario, Truth, PAPER_D_B_KM, PAPER_M_B};
use crate::solver::DEFAULT_TOL;
use crate::spectral::{ChiMapRequest, Geometry, HessianSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub domain_km: f64,
    pub n: usize,
    pub zeta: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let g = Geometry::paper();
        Self { domain_km: g.domain_km, n: g.n, zeta: g.zeta }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundConfig {
    pub sigma2_b: f64,
    #[serde(rename = "M_b")]
    pub m_b: u32,
    #[serde(rename = "D_b_km")]
    pub d_b_km: f64,
}

impl Default for BackgroundConfig {
    fn default() -> Self {
        Self { sigma2_b: 1.0, m_b: PAPER_M_B, d_b_km: PAPER_D_B_KM }
    }
}

/// The true observation-error covariance. `M_o = 0` means uncorrelated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationConfig {
    pub sigma2_o: f64,
    #[serde(rename = "M_o")]
    pub m_o: u32,
    #[serde(rename = "D_o_km")]
    pub d_o_km: f64,
}

impl Default for ObservationConfig {
    fn default() -> Self {
        Self { sigma2_o: 1.0, m_o: 2, d_o_km: 30.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChiMapConfig {
    #[serde(rename = "M_o")]
    pub m_o: Vec<u32>,
    /// Explicit `D_o` axis; when absent a log-spaced axis is built from the three keys below.
    #[serde(rename = "D_o_km", skip_serializing_if = "Option::is_none")]
    pub d_o_km: Option<Vec<f64>>,
    #[serde(rename = "D_o_min_km")]
    pub d_o_min_km: f64,
    #[serde(rename = "D_o_max_km")]
    pub d_o_max_km: f64,
    #[serde(rename = "D_o_count")]
    pub d_o_count: usize,
    /// `(M_b, D_b_km)` panels; defaults to the `[background]` pair.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub panels: Option<Vec<(u32, f64)>>,
}

impl Default for ChiMapConfig {
    fn default() -> Self {
        Self {
            m_o: vec![2, 4, 6, 8, 10],
            d_o_km: None,
            d_o_min_km: 10.0,
            d_o_max_km: 300.0,
            d_o_count: 60,
            panels: None,
        }
    }
}

/// Sweep of `L̃_o/L̃_b` for the bounds comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub count: usize,
    /// Include the dense infinity-norm bound (needs `n ≤ 512`).
    pub infnorm: bool,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self { ratio_min: 0.05, ratio_max: 5.0, count: 100, infnorm: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub realizations: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub truth: Truth,
    /// Assimilation `R̃` variants, one curve each.
    pub variants: Vec<AssimR>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            realizations: 1000,
            tol: DEFAULT_TOL,
            max_iter: 2000,
            truth: Truth::Zero,
            variants: vec![AssimR::TrueR, AssimR::Diagonal],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LengthScalesConfig {
    pub orders: Vec<u32>,
    /// The fixed value of `(1 + 4L̃²)^M`.
    pub growth: f64,
    pub stein_km: f64,
    pub h_km: f64,
}

impl Default for LengthScalesConfig {
    fn default() -> Self {
        Self { orders: vec![2, 4, 6, 8, 10], growth: 1e10, stein_km: 80.0, h_km: 1.0 }
    }
}

/// Everything a run needs. Sections a subcommand does not use are ignored by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub background: BackgroundConfig,
    #[serde(default)]
    pub observation: ObservationConfig,
    #[serde(default)]
    pub chi_map: ChiMapConfig,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub inflation: InflationSearch,
    #[serde(default)]
    pub lengthscales: LengthScalesConfig,
}

fn default_name() -> String {
    "run".into()
}

fn default_seed() -> u64 {
    20_190_601
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config is valid")
    }
}

impl RunConfig {
    /// Parse and validate; errors name the offending line or key.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let key = match e.span() {
                Some(span) => format!("line {}", text[..span.start].matches('\n').count() + 1),
                None => "document".into(),
            };
            Error::Config { key, message: e.message().replace('\n', " ") }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config { key: path.display().to_string(), message: e.to_string() })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Check cross-field constraints, reporting the section at fault.
    pub fn validate(&self) -> Result<()> {
        let at = |key: &str| {
            let key = key.to_string();
            move |e: Error| Error::Config { key: key.clone(), message: e.to_string() }
        };
        self.geometry().map_err(at("geometry"))?;
        self.hessian().map_err(at("background/observation"))?;
        if self.workers == Some(0) {
            return Err(Error::Config { key: "workers".into(), message: "must be at least 1".into() });
        }
        self.chi_map_requests().map_err(at("chi_map"))?;
        let b = &self.bounds;
        if !(b.ratio_min > 0.0 && b.ratio_max >= b.ratio_min && b.count >= 1) {
            return Err(Error::Config {
                key: "bounds".into(),
                message: "needs 0 < ratio_min <= ratio_max and count >= 1".into(),
            });
        }
        if self.ensemble.variants.is_empty() {
            return Err(Error::Config { key: "ensemble.variants".into(), message: "needs at least one variant".into() });
        }
        for v in &self.ensemble.variants {
            self.scenario(*v).validate().map_err(at("ensemble"))?;
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<Geometry> {
        let g = &self.geometry;
        Geometry::new(g.domain_km, g.n, g.zeta)
    }

    pub fn background_factor(&self) -> Factor {
        let b = &self.background;
        Factor::new(b.sigma2_b, b.m_b, b.d_b_km)
    }

    pub fn observation_factor(&self) -> Factor {
        let o = &self.observation;
        if o.m_o == 0 {
            Factor::diagonal(o.sigma2_o)
        } else {
            Factor::new(o.sigma2_o, o.m_o, o.d_o_km)
        }
    }

    /// Hessian with the true observation-error covariance.
    pub fn hessian(&self) -> Result<HessianSpec> {
        let g = self.geometry()?;
        let b = self.background_factor().on_grid(g.h_b(), g.n)?;
        let o = self.observation_factor().on_grid(g.h_o(), g.m())?;
        HessianSpec::new(b, o, g.zeta)
    }

    pub fn chi_map_requests(&self) -> Result<Vec<ChiMapRequest>> {
        let g = self.geometry()?;
        let c = &self.chi_map;
        let axis = match &c.d_o_km {
            Some(v) => v.clone(),
            None => {
                if !(c.d_o_min_km > 0.0 && c.d_o_max_km >= c.d_o_min_km && c.d_o_count >= 1) {
                    return Err(Error::param("D_o_km", "needs 0 < D_o_min_km <= D_o_max_km and D_o_count >= 1"));
                }
                crate::spectral::log_space(c.d_o_min_km, c.d_o_max_km, c.d_o_count)
            }
        };
        let panels = c.panels.clone().unwrap_or_else(|| vec![(self.background.m_b, self.background.d_b_km)]);
        Ok(panels
            .into_iter()
            .map(|(m_b, d_b)| ChiMapRequest {
                geometry: g,
                sigma2_b: self.background.sigma2_b,
                m_b,
                d_b_km: d_b,
                sigma2_o: self.observation.sigma2_o,
                m_o_values: c.m_o.clone(),
                d_o_values_km: axis.clone(),
            })
            .collect())
    }

    pub fn scenario(&self, assim: AssimR) -> Scenario {
        let e = &self.ensemble;
        Scenario {
            name: self.name.clone(),
            geometry: self.geometry().unwrap_or_else(|_| Geometry::paper()),
            b: self.background_factor(),
            true_r: self.observation_factor(),
            assim,
            realizations: e.realizations,
            tol: e.tol,
            max_iter: e.max_iter,
            seed: self.seed,
            truth: e.truth,
            zero_noise: false,
        }
    }
}
