//! Experiment configuration files.
//!
//! A config is TOML with the sections `[model]`, `[grid]`, `[continuation]`,
//! `[sweep]`, `[evolve]`, `[output]` and `[verify]`. Every key has a default;
//! unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crossflux::continuation::default_tolerance;
use crossflux::evolve::EvolveControls;
use crossflux::model::ReactionCoefficients;
use crossflux::{FluxRatio, Grid, ModelParams, StepControls};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub d1: f64,
    pub d2: f64,
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub c1: f64,
    pub c2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub length: f64,
    /// Defaults to `-length / 2`.
    pub x_left: Option<f64>,
    /// Flux ratio of the limiting problem; `inf` is allowed. Defaults to `alpha / beta`.
    pub gamma: Option<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            d1: 0.004,
            d2: 0.03,
            a1: 1.0,
            a2: 1.0,
            b1: 4.0,
            b2: 5.0,
            c1: 2.0,
            c2: 3.0,
            alpha: 2.0,
            beta: 1.0,
            length: 1.0,
            x_left: None,
            gamma: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { n: 201 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuationSection {
    pub j_list: Vec<usize>,
    /// Highest mode examined by `analyze` and `verify`.
    pub j_max: usize,
    pub d2_floor: f64,
    pub d2_max: f64,
    pub amplitude: f64,
    pub delta: f64,
    pub ds: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub max_points: usize,
    pub max_folds: usize,
    /// Newton tolerance; scaled with the grid and flux strength when absent.
    pub tol: Option<f64>,
    pub stability: bool,
}

impl Default for ContinuationSection {
    fn default() -> Self {
        let c = crossflux::continuation::StepControls::<f64>::default();
        ContinuationSection {
            j_list: vec![1, 2, 3],
            j_max: 50,
            d2_floor: 0.002,
            d2_max: 1.0,
            amplitude: 0.05,
            delta: 0.02,
            ds: c.ds,
            ds_min: c.ds_min,
            ds_max: c.ds_max,
            max_points: 600,
            max_folds: 2,
            tol: None,
            stability: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub alpha0: f64,
    pub beta0: f64,
    pub scales: Vec<f64>,
    pub j_list: Vec<usize>,
    /// Folds allowed before a compared branch is cut.
    pub max_folds: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            alpha0: 2.0,
            beta0: 1.0,
            scales: vec![1.0, 2.5, 5.0, 10.0, 25.0],
            j_list: vec![1],
            max_folds: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveSection {
    pub d2: f64,
    pub dt: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_max: f64,
    pub steady_tol: f64,
    pub max_change: f64,
    pub snapshot_every: usize,
    pub amplitude: f64,
    pub seed: u64,
    /// Newton-polish the final state when the run ends steady.
    pub polish: bool,
}

impl Default for EvolveSection {
    fn default() -> Self {
        let c = EvolveControls::<f64>::default();
        EvolveSection {
            d2: 0.02,
            dt: c.dt,
            dt_min: c.dt_min,
            dt_max: c.dt_max,
            t_max: c.t_max,
            steady_tol: c.steady_tol,
            max_change: c.max_change,
            snapshot_every: c.snapshot_every,
            amplitude: 0.01,
            seed: 7,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    SupV,
    L2V,
    SupU,
    L2U,
}

impl Measure {
    pub fn label(self) -> &'static str {
        match self {
            Measure::SupV => "sup v",
            Measure::L2V => "L2 norm of v",
            Measure::SupU => "sup u",
            Measure::L2U => "L2 norm of u",
        }
    }

    pub fn of(self, n: &crossflux::Norms) -> f64 {
        match self {
            Measure::SupV => n.sup_v,
            Measure::L2V => n.l2_v,
            Measure::SupU => n.sup_u,
            Measure::L2U => n.l2_u,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    /// Write the state of every k-th branch point; 0 writes none.
    pub snapshot_stride: usize,
    pub measure: Measure,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { directory: PathBuf::from("out"), snapshot_stride: 0, measure: Measure::SupV }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub jacobian_tol: f64,
    pub jacobian_samples: usize,
    /// Grid used for the Jacobian comparison.
    pub jacobian_n: usize,
    pub fd_step: f64,
    /// Side of the `(j, d2)` sample grid for the determinant-sign check.
    pub det_grid: usize,
    pub kernel_alignment: f64,
    /// Branch CSVs to audit; when absent `verify` traces its own.
    pub branch_dir: Option<PathBuf>,
    pub seed: u64,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            jacobian_tol: 1e-6,
            jacobian_samples: 100,
            jacobian_n: 41,
            fd_step: 1e-4,
            det_grid: 20,
            kernel_alignment: 0.999,
            branch_dir: None,
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    pub continuation: ContinuationSection,
    pub sweep: SweepSection,
    pub evolve: EvolveSection,
    pub output: OutputSection,
    pub verify: VerifySection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// The config with every default filled in, as TOML.
    pub fn resolved_toml(&self) -> String {
        let mut echo = self.clone();
        echo.model.x_left = Some(self.x_left());
        echo.model.gamma = Some(self.gamma_value());
        toml::to_string(&echo).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        self.params()?;
        if self.grid.n < 3 {
            return bad(format!("grid.n must be at least 3, got {}", self.grid.n));
        }
        let c = &self.continuation;
        if c.j_list.iter().any(|&j| j == 0) || self.sweep.j_list.iter().any(|&j| j == 0) {
            return bad("mode indices start at 1".into());
        }
        if c.j_max == 0 {
            return bad("continuation.j_max must be at least 1".into());
        }
        if !(c.d2_floor > 0.0 && c.d2_floor < c.d2_max) {
            return bad(format!("need 0 < d2_floor < d2_max, got {} and {}", c.d2_floor, c.d2_max));
        }
        if !(c.amplitude > 0.0) || !(c.delta > 0.0 && c.delta < 1.0) {
            return bad("continuation.amplitude must be positive and delta in (0, 1)".into());
        }
        if let Some(t) = c.tol {
            if !(t > 0.0) {
                return bad(format!("continuation.tol must be positive, got {t}"));
            }
        }
        self.step_controls_for(&self.params()?, &self.grid()?)
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.sweep.scales.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return bad("sweep.scales must be positive".into());
        }
        if let Some(g) = self.model.gamma {
            if !(g >= 0.0) {
                return bad(format!("model.gamma must be nonnegative, got {g}"));
            }
        }
        let e = &self.evolve;
        if !(e.d2 > 0.0 && e.dt > 0.0 && e.dt_min > 0.0 && e.t_max > 0.0 && e.steady_tol > 0.0) {
            return bad("evolve.d2, dt, dt_min, t_max and steady_tol must be positive".into());
        }
        if !(e.amplitude >= 0.0 && e.amplitude < 1.0) {
            return bad("evolve.amplitude must lie in [0, 1)".into());
        }
        let v = &self.verify;
        if !(v.jacobian_tol > 0.0 && v.fd_step > 0.0) || v.jacobian_n < 3 || v.det_grid == 0 {
            return bad("verify tolerances must be positive, jacobian_n >= 3 and det_grid >= 1".into());
        }
        Ok(())
    }

    pub fn x_left(&self) -> f64 {
        self.model.x_left.unwrap_or(-0.5 * self.model.length)
    }

    pub fn params(&self) -> Result<ModelParams, CliError> {
        let m = &self.model;
        let k = ReactionCoefficients { a1: m.a1, a2: m.a2, b1: m.b1, b2: m.b2, c1: m.c1, c2: m.c2 };
        ModelParams::new(m.d1, m.d2, k, m.alpha, m.beta, m.length, self.x_left())
            .map_err(|e| CliError::Config(format!("[model]: {e}")))
    }

    pub fn gamma_value(&self) -> f64 {
        self.model.gamma.unwrap_or_else(|| match self.model.beta {
            b if b == 0.0 => f64::INFINITY,
            b => self.model.alpha / b,
        })
    }

    pub fn gamma(&self) -> FluxRatio {
        match self.gamma_value() {
            g if g.is_infinite() => FluxRatio::Infinite,
            g => FluxRatio::Finite(g),
        }
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        Grid::new(self.grid.n, self.model.length, self.x_left()).map_err(|e| CliError::Config(format!("[grid]: {e}")))
    }

    pub fn tolerance(&self, params: &ModelParams, grid: &Grid) -> f64 {
        self.continuation.tol.unwrap_or_else(|| default_tolerance(params, grid))
    }

    pub fn step_controls_for(&self, params: &ModelParams, grid: &Grid) -> StepControls {
        let c = &self.continuation;
        StepControls {
            ds: c.ds,
            ds_min: c.ds_min,
            ds_max: c.ds_max,
            max_points: c.max_points,
            max_folds: c.max_folds,
            tol: self.tolerance(params, grid),
            d2_min: c.d2_floor,
            d2_max: c.d2_max,
            stability: c.stability,
            ..StepControls::default()
        }
    }

    pub fn evolve_controls(&self) -> EvolveControls<f64> {
        let e = &self.evolve;
        EvolveControls {
            dt: e.dt,
            dt_min: e.dt_min,
            dt_max: e.dt_max,
            t_max: e.t_max,
            steady_tol: e.steady_tol,
            max_change: e.max_change,
            snapshot_every: e.snapshot_every,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_reference_setup() {
        let c = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(c.params().unwrap(), ModelParams::reference(2.0, 1.0, 0.03).unwrap());
        assert_eq!(c.gamma(), FluxRatio::Finite(2.0));
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let err = ExperimentConfig::from_toml("[model]\nalpha = 2.0\nalhpa = 3.0\n").unwrap_err();
        let CliError::Config(msg) = err else { panic!("{err:?}") };
        assert!(msg.contains("alhpa") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn infinite_gamma_parses() {
        let c = ExperimentConfig::from_toml("[model]\ngamma = inf\n").unwrap();
        assert_eq!(c.gamma(), FluxRatio::Infinite);
    }

    #[test]
    fn resolved_echo_round_trips() {
        let c = ExperimentConfig::from_toml("[grid]\nn = 51\n[output]\nmeasure = \"l2_v\"\n").unwrap();
        let back = ExperimentConfig::from_toml(&c.resolved_toml()).unwrap();
        assert_eq!(back.params().unwrap(), c.params().unwrap());
        assert_eq!(back.grid.n, 51);
        assert_eq!(back.output.measure, Measure::L2V);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for text in ["[grid]\nn = 2\n", "[model]\nb1 = 1.0\n", "[continuation]\nj_list = [0]\n"] {
            assert!(matches!(ExperimentConfig::from_toml(text), Err(CliError::Config(_))), "{text}");
        }
    }
}
