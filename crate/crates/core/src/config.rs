//! Every numeric default of the pipeline, in one place. The whole [`Config`]
//! is echoed into each report so a run can be reproduced exactly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Grid sizes accepted for fiber extraction.
pub const GRID_RANGE: std::ops::RangeInclusive<usize> = 4..=16384;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("invalid configuration: {0}")]
pub struct ConfigError(pub String);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    /// Maximum `‖V‖` accepted at a polished critical point.
    pub residual_tol: f64,
    /// `|det ∇V|` at or below this marks a critical point degenerate.
    pub degeneracy_tol: f64,
    /// Maximum quadtree depth of the root subdivision.
    pub max_depth: u32,
    /// Boxes narrower than this are no longer split.
    pub resolution_tol: f64,
    /// More live boxes than this on one level means the zero set is not a
    /// finite set of points at the current resolution.
    pub max_active_boxes: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            residual_tol: 1e-12,
            degeneracy_tol: 1e-9,
            max_depth: 40,
            resolution_tol: 1e-7,
            max_active_boxes: 20_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FiberConfig {
    /// Initial marching-squares grid (cells per side).
    pub grid: usize,
    /// Largest grid reached by refinement.
    pub max_grid: usize,
    /// Number of η values in the sweep.
    pub sweep_len: usize,
    /// Number of trailing sweep entries that must agree for stability.
    pub stable_tail: usize,
    /// Upper bound on the Milnor ball radius.
    pub delta_cap: f64,
    /// Minimum `‖∇P‖` on the fibration's total space.
    pub submersion_tol: f64,
    /// Ratio between the largest and smallest η of the sweep.
    pub sweep_span: f64,
    /// Points sampled on the sphere `∂B_δ` when choosing η.
    pub sphere_samples: usize,
    /// Smallest admissible δ.
    pub min_delta: f64,
}

impl Default for FiberConfig {
    fn default() -> Self {
        Self {
            grid: 256,
            max_grid: 2048,
            sweep_len: 8,
            stable_tail: 4,
            delta_cap: 2.5,
            submersion_tol: 1e-6,
            sweep_span: 100.0,
            sphere_samples: 4096,
            min_delta: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Integration stops once `‖V(x)‖` drops below this.
    pub equilibrium_tol: f64,
    /// Integration stops outside the search box scaled by this factor.
    pub box_inflation: f64,
    pub max_steps: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            equilibrium_tol: 1e-10,
            box_inflation: 1.5,
            max_steps: 200_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CycleConfig {
    /// Integration horizon for each seed, forward and backward.
    pub t_horizon: f64,
    /// Seed rays per critical point.
    pub rays: usize,
    /// Seed radii per ray.
    pub radii: usize,
    /// Seeds per side of the box grid.
    pub box_grid: usize,
    /// Tolerances used while refining a candidate on its return map.
    pub refine_rtol: f64,
    pub refine_atol: f64,
    /// Newton on the return map stops when `|P(u) - u|` is below this.
    pub refine_tol: f64,
    /// Confirmed cycles must close to within this.
    pub closure_tol: f64,
    /// `|P'(u*) - 1|` above this confirms an isolated (hyperbolic) cycle.
    pub isolation_tol: f64,
    /// Cycles closer than this in Hausdorff distance are the same cycle.
    pub dedup_tol: f64,
    /// Vertices in a cycle's polyline.
    pub polyline_samples: usize,
    /// Return-map iterations used by the one-sided convergence test.
    pub one_sided_returns: usize,
    /// Offset of the neighbouring seeds used by that test, relative to the
    /// system's length scale.
    pub one_sided_offset: f64,
}

impl Default for CycleConfig {
    fn default() -> Self {
        Self {
            t_horizon: 100.0,
            rays: 16,
            radii: 12,
            box_grid: 20,
            refine_rtol: 1e-11,
            refine_atol: 1e-13,
            refine_tol: 1e-11,
            closure_tol: 1e-8,
            isolation_tol: 1e-4,
            dedup_tol: 1e-4,
            polyline_samples: 1024,
            one_sided_returns: 24,
            one_sided_offset: 2e-4,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub solve: SolveConfig,
    pub fiber: FiberConfig,
    pub flow: FlowConfig,
    pub cycles: CycleConfig,
    /// Seed of the morsification generator.
    pub seed: u64,
}

impl Config {
    /// Rejects values the pipeline cannot run with: non-positive tolerances,
    /// grids outside [`GRID_RANGE`], `max_grid < grid`, `stable_tail` outside
    /// `1..=sweep_len`.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("solve.residual_tol", self.solve.residual_tol),
            ("solve.degeneracy_tol", self.solve.degeneracy_tol),
            ("solve.resolution_tol", self.solve.resolution_tol),
            ("fiber.delta_cap", self.fiber.delta_cap),
            ("fiber.submersion_tol", self.fiber.submersion_tol),
            ("fiber.min_delta", self.fiber.min_delta),
            ("flow.rtol", self.flow.rtol),
            ("flow.atol", self.flow.atol),
            ("flow.equilibrium_tol", self.flow.equilibrium_tol),
            ("cycles.t_horizon", self.cycles.t_horizon),
            ("cycles.refine_rtol", self.cycles.refine_rtol),
            ("cycles.refine_atol", self.cycles.refine_atol),
            ("cycles.refine_tol", self.cycles.refine_tol),
            ("cycles.closure_tol", self.cycles.closure_tol),
            ("cycles.isolation_tol", self.cycles.isolation_tol),
            ("cycles.dedup_tol", self.cycles.dedup_tol),
            ("cycles.one_sided_offset", self.cycles.one_sided_offset),
        ];
        for (name, x) in positive {
            if !(x.is_finite() && x > 0.0) {
                return Err(ConfigError(format!("{name} must be positive and finite, got {x}")));
            }
        }
        let f = &self.fiber;
        if !(f.sweep_span.is_finite() && f.sweep_span > 1.0) {
            return Err(ConfigError(format!(
                "fiber.sweep_span must exceed 1, got {}",
                f.sweep_span
            )));
        }
        if !(self.flow.box_inflation.is_finite() && self.flow.box_inflation >= 1.0) {
            return Err(ConfigError(format!(
                "flow.box_inflation must be at least 1, got {}",
                self.flow.box_inflation
            )));
        }
        for (name, g) in [("fiber.grid", f.grid), ("fiber.max_grid", f.max_grid)] {
            if !GRID_RANGE.contains(&g) {
                return Err(ConfigError(format!(
                    "{name} must lie in {}..={}, got {g}",
                    GRID_RANGE.start(),
                    GRID_RANGE.end()
                )));
            }
        }
        if f.max_grid < f.grid {
            return Err(ConfigError(format!(
                "fiber.max_grid ({}) is smaller than fiber.grid ({})",
                f.max_grid, f.grid
            )));
        }
        if f.stable_tail == 0 || f.stable_tail > f.sweep_len {
            return Err(ConfigError(format!(
                "fiber.stable_tail ({}) must lie in 1..=fiber.sweep_len ({})",
                f.stable_tail, f.sweep_len
            )));
        }
        if !(1..=60).contains(&self.solve.max_depth) {
            return Err(ConfigError(format!(
                "solve.max_depth must lie in 1..=60, got {}",
                self.solve.max_depth
            )));
        }
        let counts = [
            ("solve.max_active_boxes", self.solve.max_active_boxes, 1),
            ("fiber.sphere_samples", f.sphere_samples, 8),
            ("flow.max_steps", self.flow.max_steps, 1),
            ("cycles.polyline_samples", self.cycles.polyline_samples, 3),
            ("cycles.one_sided_returns", self.cycles.one_sided_returns, 1),
        ];
        for (name, n, min) in counts {
            if n < min {
                return Err(ConfigError(format!("{name} must be at least {min}, got {n}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_json_fills_defaults() {
        let c: Config = serde_json::from_str(r#"{"fiber": {"grid": 128}}"#).unwrap();
        assert_eq!(c.fiber.grid, 128);
        assert_eq!(c.fiber.max_grid, 2048);
        assert_eq!(c.solve, SolveConfig::default());
    }

    #[test]
    fn validation() {
        assert!(Config::default().validate().is_ok());
        let bad: Vec<Config> = vec![
            serde_json::from_str(r#"{"flow": {"rtol": -1}}"#).unwrap(),
            serde_json::from_str(r#"{"fiber": {"grid": 512, "max_grid": 256}}"#).unwrap(),
            serde_json::from_str(r#"{"fiber": {"stable_tail": 9}}"#).unwrap(),
            serde_json::from_str(r#"{"fiber": {"stable_tail": 0}}"#).unwrap(),
            serde_json::from_str(r#"{"fiber": {"grid": 2}}"#).unwrap(),
            serde_json::from_str(r#"{"solve": {"max_depth": 0}}"#).unwrap(),
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }
}
