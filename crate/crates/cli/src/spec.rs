//! Experiment descriptions: JSON layout, sweep expansion and validation.

use std::collections::BTreeSet;
use std::fmt;

use cellsec_core::{derive_params, CooperationConfig, RawConfig, SystemParams};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Layout version understood by this build.
pub const SPEC_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    OutageVsSnr,
    RateVsSnr,
    RateVsDensity,
    CdfValidation,
    LaplaceValidation,
    Percolation,
}

impl ExperimentKind {
    pub fn allowed_paths(self) -> &'static [EvalPath] {
        use EvalPath::*;
        match self {
            Self::OutageVsSnr => &[MontecarloExact, MontecarloBall, Analytic],
            Self::RateVsSnr | Self::RateVsDensity => &[MontecarloExact, MontecarloBall, Analytic, LowerBound],
            Self::CdfValidation | Self::LaplaceValidation => &[MontecarloBall, Analytic],
            Self::Percolation => &[MontecarloExact, Analytic],
        }
    }

    /// Sweep keys that are not configuration fields.
    fn extra_keys(self) -> &'static [&'static str] {
        match self {
            Self::LaplaceValidation => &["s"],
            Self::Percolation => &["coop_radius"],
            _ => &[],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::OutageVsSnr => "outage_vs_snr",
            Self::RateVsSnr => "rate_vs_snr",
            Self::RateVsDensity => "rate_vs_density",
            Self::CdfValidation => "cdf_validation",
            Self::LaplaceValidation => "laplace_validation",
            Self::Percolation => "percolation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalPath {
    MontecarloExact,
    MontecarloBall,
    Analytic,
    LowerBound,
}

impl EvalPath {
    pub fn is_montecarlo(self) -> bool {
        matches!(self, Self::MontecarloExact | Self::MontecarloBall)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::MontecarloExact => "montecarlo_exact",
            Self::MontecarloBall => "montecarlo_ball",
            Self::Analytic => "analytic",
            Self::LowerBound => "lower_bound",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub key: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Series {
    pub label: String,
    #[serde(default)]
    pub overrides: Map<String, Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSpec {
    #[serde(default = "default_geometries")]
    pub n_geometries: usize,
    #[serde(default = "default_fadings")]
    pub n_fadings: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub explicit_cells: Option<f64>,
}

fn default_geometries() -> usize {
    200
}

fn default_fadings() -> usize {
    50
}

impl Default for McSpec {
    fn default() -> Self {
        Self {
            n_geometries: default_geometries(),
            n_fadings: default_fadings(),
            seed: None,
            explicit_cells: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub kind: ExperimentKind,
    /// Configuration shared by every series, in the `RawConfig` layout.
    pub base: Map<String, Value>,
    pub sweep: Sweep,
    /// Curves; a single unlabeled series when empty.
    #[serde(default)]
    pub series: Vec<Series>,
    #[serde(default)]
    pub mc: McSpec,
    pub paths: Vec<EvalPath>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cooperation: Option<CooperationConfig>,
    /// Samples per point for the validation kinds, trials for percolation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_grid: Option<Vec<f64>>,
    /// Percolation window in units of the link distance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_links: Option<f64>,
}

/// One constraint violation, with where it was found.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub context: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.context.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.context, self.message)
        }
    }
}

fn diag(context: impl Into<String>, message: impl fmt::Display) -> Diagnostic {
    Diagnostic {
        context: context.into(),
        message: message.to_string(),
    }
}

/// A fully resolved sweep point of one series.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub value: f64,
    pub raw: RawConfig,
    pub params: SystemParams,
    pub coop: Option<CooperationConfig>,
    /// Laplace argument when sweeping `s`.
    pub s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedSeries {
    pub label: String,
    pub points: Vec<Point>,
}

/// Keys that select the same quantity; setting one removes the others.
fn exclusive_with(key: &str) -> &'static [&'static str] {
    match key {
        "snr_db" => &["snr_linear"],
        "snr_linear" => &["snr_db"],
        "users_per_cell" => &["load_ratio", "user_density"],
        "load_ratio" => &["users_per_cell", "user_density"],
        "user_density" => &["users_per_cell", "load_ratio"],
        _ => &[],
    }
}

const CONFIG_KEYS: &[&str] = &[
    "n_antennas",
    "users_per_cell",
    "load_ratio",
    "snr_db",
    "snr_linear",
    "path_loss_exp",
    "bs_density",
    "user_density",
    "regularizer",
    "round_users",
];

fn set_key(map: &mut Map<String, Value>, key: &str, value: Value) {
    for other in exclusive_with(key) {
        map.remove(*other);
    }
    map.insert(key.to_string(), value);
}

fn sweep_value(key: &str, x: f64) -> Result<Value, String> {
    if key == "n_antennas" {
        if x >= 1.0 && x.fract() == 0.0 && x <= u32::MAX as f64 {
            return Ok(Value::from(x as u64));
        }
        return Err(format!("n_antennas must be a positive integer (got {x})"));
    }
    serde_json::Number::from_f64(x)
        .map(Value::Number)
        .ok_or_else(|| format!("sweep value {x} is not finite"))
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn series_or_default(&self) -> Vec<Series> {
        if self.series.is_empty() {
            vec![Series {
                label: "default".into(),
                overrides: Map::new(),
            }]
        } else {
            self.series.clone()
        }
    }

    pub fn uses_montecarlo(&self) -> bool {
        self.paths.iter().any(|p| p.is_montecarlo())
    }

    /// Expands every series over the sweep, collecting all violations
    /// instead of stopping at the first.
    pub fn resolve(&self, seed_override: Option<u64>) -> Result<Vec<ResolvedSeries>, Vec<Diagnostic>> {
        let mut diags = self.structural_diagnostics(seed_override);
        let mut out = Vec::new();
        let key = self.sweep.key.as_str();
        let key_known = CONFIG_KEYS.contains(&key) || self.kind.extra_keys().contains(&key);
        for series in self.series_or_default() {
            let ctx = format!("series `{}`", series.label);
            let mut merged = self.base.clone();
            for (k, v) in &series.overrides {
                if !CONFIG_KEYS.contains(&k.as_str()) {
                    diags.push(diag(&ctx, format!("unknown override key `{k}`")));
                    continue;
                }
                set_key(&mut merged, k, v.clone());
            }
            let mut points = Vec::new();
            for &x in &self.sweep.values {
                let pctx = format!("{ctx}, {key}={x}");
                let mut cfg = merged.clone();
                let mut coop = self.cooperation;
                let mut s = None;
                if key_known {
                    match key {
                        "s" => s = Some(x),
                        "coop_radius" => match CooperationConfig::new(x) {
                            Ok(c) => {
                                coop = Some(CooperationConfig {
                                    connection_distance: coop.and_then(|c| c.connection_distance),
                                    ..c
                                })
                            }
                            Err(e) => {
                                diags.push(diag(&pctx, e));
                                continue;
                            }
                        },
                        _ => match sweep_value(key, x) {
                            Ok(v) => set_key(&mut cfg, key, v),
                            Err(e) => {
                                diags.push(diag(&pctx, e));
                                continue;
                            }
                        },
                    }
                }
                let raw: RawConfig = match serde_json::from_value(Value::Object(cfg)) {
                    Ok(r) => r,
                    Err(e) => {
                        diags.push(diag(&pctx, format!("configuration: {e}")));
                        continue;
                    }
                };
                let issues = raw.diagnostics();
                if !issues.is_empty() {
                    diags.extend(issues.into_iter().map(|e| diag(&pctx, e)));
                    continue;
                }
                match derive_params(&raw) {
                    Ok(params) => points.push(Point {
                        value: x,
                        raw,
                        params,
                        coop,
                        s,
                    }),
                    Err(e) => diags.push(diag(&pctx, e)),
                }
            }
            out.push(ResolvedSeries {
                label: series.label,
                points,
            });
        }
        if diags.is_empty() {
            Ok(out)
        } else {
            Err(diags)
        }
    }

    /// Violations that do not depend on individual sweep points.
    fn structural_diagnostics(&self, seed_override: Option<u64>) -> Vec<Diagnostic> {
        let mut d = Vec::new();
        if self.version != SPEC_VERSION {
            d.push(diag(
                "version",
                format!(
                    "unsupported layout version {} (expected {SPEC_VERSION})",
                    self.version
                ),
            ));
        }
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
        {
            d.push(diag("name", "must be a non-empty file-name-safe string"));
        }
        let key = self.sweep.key.as_str();
        if !(CONFIG_KEYS.contains(&key) || self.kind.extra_keys().contains(&key)) || key == "round_users" {
            d.push(diag(
                "sweep.key",
                format!(
                    "`{key}` is not a sweepable parameter of a {} experiment",
                    self.kind.as_str()
                ),
            ));
        }
        if self.sweep.values.is_empty() {
            d.push(diag("sweep.values", "sweep list is empty"));
        }
        if let Some(bad) = self.sweep.values.iter().find(|v| !v.is_finite()) {
            d.push(diag("sweep.values", format!("non-finite value {bad}")));
        }
        if self.paths.is_empty() {
            d.push(diag("paths", "no evaluation path selected"));
        }
        let unique: BTreeSet<_> = self.paths.iter().collect();
        if unique.len() != self.paths.len() {
            d.push(diag("paths", "duplicate evaluation path"));
        }
        for p in &self.paths {
            if !self.kind.allowed_paths().contains(p) {
                d.push(diag(
                    "paths",
                    format!("`{}` is not available for {}", p.as_str(), self.kind.as_str()),
                ));
            }
        }
        if self.uses_montecarlo() && self.mc.seed.or(seed_override).is_none() {
            d.push(diag(
                "mc.seed",
                "a seed is required when a Monte Carlo path is selected",
            ));
        }
        if self.uses_montecarlo() && (self.mc.n_geometries == 0 || self.mc.n_fadings == 0) {
            d.push(diag("mc", "n_geometries and n_fadings must be at least 1"));
        }
        if let Some(c) = self.mc.explicit_cells {
            if !(c >= 0.0) || !c.is_finite() {
                d.push(diag(
                    "mc.explicit_cells",
                    format!("must be finite and non-negative (got {c})"),
                ));
            }
        }
        let needs_samples = matches!(
            self.kind,
            ExperimentKind::CdfValidation | ExperimentKind::LaplaceValidation | ExperimentKind::Percolation
        );
        if needs_samples && self.uses_montecarlo() && self.n_samples.unwrap_or(0) == 0 {
            d.push(diag(
                "n_samples",
                format!("required and positive for {}", self.kind.as_str()),
            ));
        }
        if self.kind == ExperimentKind::LaplaceValidation && key != "s" {
            match &self.s_grid {
                Some(g) if !g.is_empty() && g.iter().all(|s| *s >= 0.0 && s.is_finite()) => {}
                _ => d.push(diag("s_grid", "a non-empty grid of finite s ≥ 0 is required")),
            }
        }
        if self.kind == ExperimentKind::LaplaceValidation && key == "s" {
            if let Some(bad) = self.sweep.values.iter().find(|s| !(**s >= 0.0)) {
                d.push(diag(
                    "sweep.values",
                    format!("Laplace argument must be ≥ 0 (got {bad})"),
                ));
            }
        }
        if self.kind == ExperimentKind::Percolation {
            if self.cooperation.is_none() && key != "coop_radius" {
                d.push(diag(
                    "cooperation",
                    "required for percolation unless sweeping coop_radius",
                ));
            }
            if let Some(w) = self.window_links {
                if !(w > 0.0) || !w.is_finite() {
                    d.push(diag("window_links", format!("must be positive (got {w})")));
                }
            }
        }
        let mut labels = BTreeSet::new();
        for s in &self.series {
            if !labels.insert(s.label.as_str()) {
                d.push(diag("series", format!("duplicate label `{}`", s.label)));
            }
        }
        d
    }

    /// Every violation in the spec; empty when it can be run.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        self.resolve(None).err().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(body: &str) -> ExperimentSpec {
        ExperimentSpec::from_json(body).unwrap()
    }

    const BASE: &str = r#""base": {"n_antennas": 20, "users_per_cell": 20, "snr_db": 10.0, "path_loss_exp": 4.0, "bs_density": 0.1}"#;

    #[test]
    fn snr_sweep_replaces_linear_snr() {
        let s = spec(&format!(
            r#"{{"version": 1, "name": "t", "kind": "rate_vs_snr", {BASE},
                "sweep": {{"key": "snr_linear", "values": [1.0, 100.0]}}, "paths": ["analytic"]}}"#
        ));
        let r = s.resolve(None).unwrap();
        assert_eq!(r[0].points.len(), 2);
        assert_eq!(r[0].points[1].params.snr, 100.0);
        assert_eq!(r[0].points[1].raw.snr_db, None);
    }

    #[test]
    fn load_ratio_override_drops_user_count() {
        let s = spec(&format!(
            r#"{{"version": 1, "name": "t", "kind": "rate_vs_snr", {BASE},
                "sweep": {{"key": "snr_db", "values": [0.0]}},
                "series": [{{"label": "half", "overrides": {{"load_ratio": 0.5}}}}],
                "paths": ["analytic"]}}"#
        ));
        assert_eq!(s.resolve(None).unwrap()[0].points[0].params.users_per_cell, 10);
    }

    #[test]
    fn collects_every_violation() {
        let s = spec(
            r#"{"version": 2, "name": "t", "kind": "outage_vs_snr",
                "base": {"n_antennas": 20, "users_per_cell": 20, "snr_db": 10.0, "snr_linear": 3.0,
                         "path_loss_exp": 2.0, "bs_density": 0.1},
                "sweep": {"key": "bs_density", "values": [0.1]},
                "paths": ["montecarlo_ball", "lower_bound"]}"#,
        );
        let text: Vec<String> = s.diagnostics().iter().map(|d| d.to_string()).collect();
        assert_eq!(text.len(), 5, "{text:#?}");
        for needle in [
            "version",
            "lower_bound",
            "seed",
            "exceed 2",
            "exactly one of `snr_db`",
        ] {
            assert!(text.iter().any(|t| t.contains(needle)), "{needle}: {text:#?}");
        }
    }

    #[test]
    fn fractional_antenna_sweep_is_rejected() {
        let s = spec(&format!(
            r#"{{"version": 1, "name": "t", "kind": "rate_vs_snr", {BASE},
                "sweep": {{"key": "n_antennas", "values": [20.5]}}, "paths": ["analytic"]}}"#
        ));
        assert_eq!(s.diagnostics().len(), 1);
    }

    #[test]
    fn percolation_accepts_coop_radius_sweep() {
        let s = spec(&format!(
            r#"{{"version": 1, "name": "t", "kind": "percolation", {BASE},
                "sweep": {{"key": "coop_radius", "values": [1.0, 2.0]}},
                "mc": {{"seed": 1}}, "n_samples": 4, "paths": ["montecarlo_exact", "analytic"]}}"#
        ));
        let r = s.resolve(None).unwrap();
        assert_eq!(r[0].points[1].coop.unwrap().coop_radius, 2.0);
    }
}
