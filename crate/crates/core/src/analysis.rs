//! The bound `B = Σ l_i` against the detected limit cycles, morsification
//! experiments and the machine-readable report.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::critfind::{find_critical_points, CritError, CriticalPoint};
use crate::cycledetect::{cycle_class_map, detect_limit_cycles, enclosure_matrix, fiber_residence, LimitCycle};
use crate::geom::open_vertices;
use crate::milnorfiber::{extract_fiber, vanishing_cycle_count, MilnorData, MilnorError};
use crate::polyalg::{rational_from_f64, Poly2, VectorField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    InequalityHolds,
    InequalityViolated,
    Inconclusive,
}

impl Verdict {
    /// Process exit code of `analyze`.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::InequalityHolds => 0,
            Verdict::InequalityViolated => 2,
            Verdict::Inconclusive => 3,
        }
    }
}

/// Whether `P - P(p_i)` is a submersion on every swept annulus.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EqualityHypothesis {
    pub submersion_ok_all: bool,
    pub failed_at: Vec<usize>,
}

/// A critical point whose fibration could not be set up at all.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointFailure {
    pub point_id: usize,
    pub error: MilnorError,
}

/// `Σ l_i` with its per-point breakdown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomologyBound {
    pub bound: usize,
    pub critical_points: Vec<CriticalPoint>,
    pub milnor: Vec<MilnorData>,
    pub failed_points: Vec<PointFailure>,
}

/// A detected cycle with its row of the enclosure matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectedCycle {
    #[serde(flatten)]
    pub cycle: LimitCycle,
    pub enclosure_row: Vec<i32>,
}

/// How closely a cycle follows a single Milnor fiber of an enclosed point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub cycle: usize,
    pub point_id: usize,
    /// Mean of `‖V - V(p)‖` along the cycle; the fiber is compared at this η.
    pub mean_speed: f64,
    pub relative_variation: f64,
    /// The cycle lies inside the Milnor ball of the point.
    pub in_tube: bool,
    pub component_index: Option<usize>,
    pub hausdorff: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub system_name: String,
    pub system: VectorField,
    pub config_echo: Config,
    pub critical_points: Vec<CriticalPoint>,
    pub milnor: Vec<MilnorData>,
    pub bound: usize,
    pub detected: Vec<DetectedCycle>,
    pub verdict: Verdict,
    pub equality_hypothesis: EqualityHypothesis,
    pub diagnostics: Vec<DiagnosticRow>,
    /// Why the verdict is inconclusive, or other problems met on the way.
    pub reasons: Vec<String>,
    /// Figure files written alongside the report.
    pub figures: Vec<String>,
    pub timestamp: String,
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The JSON with the timestamp blanked, for reproducibility checks.
    pub fn to_json_without_timestamp(&self) -> String {
        let mut r = self.clone();
        r.timestamp.clear();
        r.to_json()
    }
}

/// Computes `l_i` at every equilibrium and sums them over the stable entries.
pub fn homology_bound(v: &VectorField, cfg: &Config) -> Result<HomologyBound, CritError> {
    let cps = find_critical_points(v, &cfg.solve)?;
    Ok(bound_for(v, cps, cfg))
}

fn bound_for(v: &VectorField, cps: Vec<CriticalPoint>, cfg: &Config) -> HomologyBound {
    let results: Vec<Result<MilnorData, MilnorError>> = cps
        .par_iter()
        .map(|cp| vanishing_cycle_count(v, cp, &cps, &cfg.fiber))
        .collect();
    let mut milnor = Vec::new();
    let mut failed_points = Vec::new();
    for (cp, r) in cps.iter().zip(results) {
        match r {
            Ok(m) => milnor.push(m),
            Err(error) => failed_points.push(PointFailure { point_id: cp.id, error }),
        }
    }
    HomologyBound {
        bound: bound_of(&milnor),
        critical_points: cps,
        milnor,
        failed_points,
    }
}

/// `Σ l_i` over the stable entries.
pub fn bound_of(milnor: &[MilnorData]) -> usize {
    milnor.iter().filter(|m| m.stable).map(|m| m.l).sum()
}

/// The verdict from the Milnor data and the number of detected cycles:
/// inconclusive when some entry is unstable, has failed sweep entries or is
/// missing altogether; otherwise whether `detected ≤ Σ l_i`.
pub fn verdict(milnor: &[MilnorData], missing_points: usize, detected: usize) -> Verdict {
    if missing_points > 0 || milnor.iter().any(|m| !m.stable || !m.failures.is_empty()) {
        Verdict::Inconclusive
    } else if detected <= bound_of(milnor) {
        Verdict::InequalityHolds
    } else {
        Verdict::InequalityViolated
    }
}

fn diagnostics(
    v: &VectorField,
    cps: &[CriticalPoint],
    milnor: &[MilnorData],
    cycles: &[LimitCycle],
    cfg: &Config,
) -> Vec<DiagnosticRow> {
    let mut rows = Vec::new();
    for (c, cycle) in cycles.iter().enumerate() {
        for &id in &cycle.enclosed_cp_ids {
            let cp = &cps[id];
            let (mean_speed, relative_variation) = fiber_residence(cycle, v, cp);
            let delta = milnor.iter().find(|m| m.point_id == id).map(|m| m.delta);
            let reach = open_vertices(&cycle.points)
                .iter()
                .map(|x| x.dist(cp.location))
                .fold(0.0, f64::max);
            let in_tube = delta.is_some_and(|d| reach <= d);
            let (component_index, hausdorff) = match delta {
                Some(d) if in_tube && mean_speed > 0.0 => {
                    match extract_fiber(v, cp, d, mean_speed, cfg.fiber.grid, cfg.fiber.max_grid) {
                        Ok(f) => {
                            let (k, h) = cycle_class_map(cycle, &f);
                            (k, h.is_finite().then_some(h))
                        }
                        Err(e) => {
                            log::warn!("fiber at η = {mean_speed} for cycle {c}: {e}");
                            (None, None)
                        }
                    }
                }
                _ => (None, None),
            };
            rows.push(DiagnosticRow {
                cycle: c,
                point_id: id,
                mean_speed,
                relative_variation,
                in_tube,
                component_index,
                hausdorff,
            });
        }
    }
    rows
}

const CRIT_REASON: &str = "critical points";

/// Runs the whole pipeline on `v`. Failures never abort: they make the
/// verdict inconclusive and are listed in `reasons`.
pub fn compare(v: &VectorField, cfg: &Config) -> AnalysisReport {
    let mut reasons = Vec::new();
    let system_name = v.name().unwrap_or("unnamed").to_string();
    let timestamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let hb = match homology_bound(v, cfg) {
        Ok(hb) => hb,
        Err(e) => {
            reasons.push(format!("{CRIT_REASON}: {}: {e}", e.kind()));
            return AnalysisReport {
                system_name,
                system: v.clone(),
                config_echo: cfg.clone(),
                critical_points: vec![],
                milnor: vec![],
                bound: 0,
                detected: vec![],
                verdict: Verdict::Inconclusive,
                equality_hypothesis: EqualityHypothesis::default(),
                diagnostics: vec![],
                reasons,
                figures: vec![],
                timestamp,
            };
        }
    };
    for f in &hb.failed_points {
        reasons.push(format!("point {}: {}", f.point_id, f.error));
    }
    for m in &hb.milnor {
        if !m.stable {
            reasons.push(format!(
                "point {}: closed-component count not stable over the η sweep",
                m.point_id
            ));
        }
        for f in &m.failures {
            reasons.push(format!("point {}: η = {}: {}", m.point_id, f.eta, f.error));
        }
    }
    let cps = &hb.critical_points;
    let cycles = detect_limit_cycles(v, cps, &cfg.flow, &cfg.cycles);
    let rows = match enclosure_matrix(&cycles, cps) {
        Ok(rows) => rows,
        Err(e) => {
            reasons.push(e.to_string());
            vec![vec![]; cycles.len()]
        }
    };
    let diagnostics = diagnostics(v, cps, &hb.milnor, &cycles, cfg);
    let failed_at: Vec<usize> = hb
        .milnor
        .iter()
        .filter(|m| !m.submersion_ok)
        .map(|m| m.point_id)
        .chain(hb.failed_points.iter().map(|f| f.point_id))
        .collect();
    let verdict = verdict(&hb.milnor, hb.failed_points.len(), cycles.len());
    AnalysisReport {
        system_name,
        system: v.clone(),
        config_echo: cfg.clone(),
        critical_points: hb.critical_points.clone(),
        bound: hb.bound,
        milnor: hb.milnor,
        detected: cycles
            .into_iter()
            .zip(rows)
            .map(|(cycle, enclosure_row)| DetectedCycle { cycle, enclosure_row })
            .collect(),
        verdict,
        equality_hypothesis: EqualityHypothesis {
            submersion_ok_all: failed_at.is_empty(),
            failed_at,
        },
        diagnostics,
        reasons,
        figures: vec![],
        timestamp,
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MorsifyError {
    #[error("perturbation size must be a finite nonnegative number, got {0}")]
    BadSize(f64),
    #[error("perturbed field is identically zero")]
    ZeroField,
}

/// `V + s·A` with `A` an affine field whose six coefficients are drawn
/// uniformly from `[-1, 1]` by a ChaCha8 generator seeded with `seed`.
/// The coefficients enter as exact rationals, and `s = 0` returns `V` itself.
pub fn morsify(v: &VectorField, s: f64, seed: u64) -> Result<VectorField, MorsifyError> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(MorsifyError::BadSize(s));
    }
    if s == 0.0 {
        return Ok(v.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut affine = || {
        let c: [f64; 3] = [
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
        ];
        Poly2::from_terms([
            (0, 0, rational_from_f64(c[0])),
            (1, 0, rational_from_f64(c[1])),
            (0, 1, rational_from_f64(c[2])),
        ])
    };
    let a = affine();
    let b = affine();
    let sr = rational_from_f64(s);
    v.plus(&a.scale(&sr), &b.scale(&sr))
        .map_err(|_| MorsifyError::ZeroField)
}

/// One row of the morsification table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceRow {
    pub s: f64,
    pub seed: u64,
    /// Number of equilibria; absent if they could not be isolated.
    pub k: Option<usize>,
    pub bound: usize,
    pub detected: usize,
    pub all_nondegenerate: bool,
    pub submersion_ok_all: bool,
    pub verdict: Verdict,
    /// `k`, `bound` or `detected` differ from the unperturbed row.
    pub changed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceTable {
    /// The unperturbed system (`s = 0`) followed by every `(s, seed)` pair.
    pub rows: Vec<InvarianceRow>,
}

impl InvarianceTable {
    pub fn any_change(&self) -> bool {
        self.rows.iter().any(|r| r.changed)
    }

    /// Fixed-width text rendering.
    pub fn render(&self) -> String {
        let mut out = format!(
            "{:>10} {:>6} {:>4} {:>4} {:>8} {:>6} {:>10} {:>8}\n",
            "s", "seed", "k", "B", "detected", "morse", "submersion", "changed"
        );
        for r in &self.rows {
            out += &format!(
                "{:>10} {:>6} {:>4} {:>4} {:>8} {:>6} {:>10} {:>8}\n",
                format!("{:e}", r.s),
                r.seed,
                r.k.map_or("-".into(), |k| k.to_string()),
                r.bound,
                r.detected,
                r.all_nondegenerate,
                r.submersion_ok_all,
                if r.changed { "yes" } else { "no" }
            );
        }
        out
    }
}

fn row_of(s: f64, seed: u64, report: &AnalysisReport) -> InvarianceRow {
    let crit_failed = report.reasons.iter().any(|r| r.starts_with(CRIT_REASON));
    let k = (!crit_failed).then_some(report.critical_points.len());
    InvarianceRow {
        s,
        seed,
        k,
        bound: report.bound,
        detected: report.detected.len(),
        all_nondegenerate: report.critical_points.iter().all(|c| c.nondegenerate),
        submersion_ok_all: report.equality_hypothesis.submersion_ok_all,
        verdict: report.verdict,
        changed: false,
    }
}

/// Reruns the pipeline on `morsify(V, s, seed)` for every pair and flags rows
/// whose `(k, B, detected)` differ from the unperturbed system.
pub fn morsification_invariance(
    v: &VectorField,
    s_values: &[f64],
    seeds: &[u64],
    cfg: &Config,
) -> Result<InvarianceTable, MorsifyError> {
    let mut jobs = vec![(0.0, cfg.seed, v.clone())];
    for &s in s_values {
        for &seed in seeds {
            jobs.push((s, seed, morsify(v, s, seed)?));
        }
    }
    let mut rows: Vec<InvarianceRow> = jobs
        .par_iter()
        .map(|(s, seed, w)| row_of(*s, *seed, &compare(w, cfg)))
        .collect();
    let base = (rows[0].k, rows[0].bound, rows[0].detected);
    for r in rows.iter_mut().skip(1) {
        r.changed = (r.k, r.bound, r.detected) != base;
    }
    Ok(InvarianceTable { rows })
}
