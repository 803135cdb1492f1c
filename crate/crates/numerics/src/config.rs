//! Simulation configuration, read from the spec file's `simulation` section.

use serde::Deserialize;
use serde_json::Value;

use crate::error::{NumError, NumResult};
use crate::funcs::{InitialData, Profile, ScalarFn};
use crate::grid::Grid;
use crate::noise::MollifierSpec;

/// Everything the solvers need besides the driving noise.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub grid: Grid,
    pub mollifier: MollifierSpec,
    pub f: ScalarFn,
    pub g: ScalarFn,
    /// `C¹, C², C³` multiplying `g'g`, `g'³g`, `g''g'g²`.
    pub constants: [f64; 3],
    pub u0: InitialData,
    pub blowup: f64,
}

impl SimConfig {
    pub fn new(grid: Grid, eps: f64, f: ScalarFn, g: ScalarFn) -> Self {
        Self {
            grid,
            mollifier: MollifierSpec::new(eps),
            f,
            g,
            constants: [0.0; 3],
            u0: InitialData { amp: 0.0, mode: 1, phase: 0.0 },
            blowup: 1e8,
        }
    }

    pub fn validate(&self) -> NumResult<()> {
        self.mollifier.check(&self.grid)?;
        self.f.self_check("f")?;
        self.g.self_check("g")?;
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSection {
    nx: usize,
    t_final: String,
    dt: String,
    eps: String,
    f: ScalarFn,
    g: ScalarFn,
    #[serde(default)]
    constants: [f64; 3],
    u0: InitialData,
    h: Profile,
    phi: Profile,
    #[serde(default = "default_r")]
    frechet_r: Vec<f64>,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_blowup")]
    blowup: f64,
}

fn default_r() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3]
}

fn default_blowup() -> f64 {
    1e8
}

/// A parsed `simulation` section.
#[derive(Debug, Clone)]
pub struct SimulationSpec {
    pub config: SimConfig,
    pub h: Profile,
    pub phi: Profile,
    pub frechet_r: Vec<f64>,
    pub seed: u64,
}

impl SimulationSpec {
    pub fn from_json(v: &Value) -> NumResult<Self> {
        let raw: RawSection = serde_json::from_value(v.clone()).map_err(|e| NumError::Config(e.to_string()))?;
        let q = |s: &str| mallitree::q::parse_q(s).map_err(|e| NumError::Config(e.to_string()));
        let grid = Grid::from_rationals(raw.nx, q(&raw.t_final)?, q(&raw.dt)?)?;
        let eps = mallitree::q::to_f64(&q(&raw.eps)?);
        let mut config = SimConfig::new(grid, eps, raw.f, raw.g);
        config.constants = raw.constants;
        config.u0 = raw.u0;
        config.blowup = raw.blowup;
        config.validate()?;
        Ok(Self { config, h: raw.h, phi: raw.phi, frechet_r: raw.frechet_r, seed: raw.seed })
    }
}
