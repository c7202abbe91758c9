//! Execution of a resolved experiment and its on-disk outputs.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use cellsec_core::analytic::{
    interference_moments, laplace_interference, laplace_leakage, leakage_moments, lognormal_fit,
    mean_rate_lower_bound, mean_secrecy_rate, outage_probability, AnalyticConfig, LognormalFit, PdfSource,
};
use cellsec_core::geometry::{percolation_threshold, SceneMode};
use cellsec_core::montecarlo::{
    collect_interference_leakage, empirical_laplace, estimate_secrecy, ks_distance, percolation_trials,
    DistanceCondition, SampleSet, SamplingOptions,
};
use cellsec_core::{Error, EstimateWithCI, McConfig};
use rayon::prelude::*;
use serde_json::json;
use thiserror::Error as ThisError;

use crate::spec::{
    Diagnostic, EvalPath, ExperimentKind, ExperimentSpec, Point, ResolvedSeries, SPEC_VERSION,
};

/// Probability levels at which CDF curves are tabulated.
const CDF_LEVELS: usize = 99;
/// Default percolation window, in link distances.
const DEFAULT_WINDOW_LINKS: f64 = 10.0;

pub const CSV_HEADER: &str = "series,metric,path,param,x,y,y_err,n";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub workers: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, ThisError)]
pub enum RunError {
    #[error("invalid experiment ({} problem(s))", .0.len())]
    Config(Vec<Diagnostic>),
    #[error("cannot write outputs: {0}")]
    Io(#[from] io::Error),
    #[error("cannot build worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// One output line.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub series: String,
    pub metric: &'static str,
    pub path: &'static str,
    pub param: f64,
    pub x: f64,
    pub y: f64,
    pub y_err: Option<f64>,
    pub n: Option<usize>,
}

/// Shortest round-trip decimal, switching to exponent form for very large
/// or very small magnitudes.
pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) || !x.is_finite() {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

impl Row {
    fn csv(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_default();
        let (param, x, y) = (
            format_number(self.param),
            format_number(self.x),
            format_number(self.y),
        );
        format!(
            "{},{},{},{},{},{},{},{}",
            self.series,
            self.metric,
            self.path,
            param,
            x,
            y,
            opt(self.y_err.map(format_number)),
            opt(self.n.map(|n| n.to_string())),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub context: String,
    pub message: String,
    pub config_error: bool,
}

/// Everything produced by one unit of work, in output order.
#[derive(Debug, Default)]
struct UnitOutput {
    rows: Vec<Row>,
    dumps: Vec<(String, SampleSet)>,
    failure: Option<Failure>,
}

#[derive(Debug)]
pub struct RunReport {
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
    pub rows: usize,
    pub failures: Vec<Failure>,
}

impl RunReport {
    /// 0 on success, 2 when a failure traces back to the inputs, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> u8 {
        if self.failures.is_empty() {
            0
        } else if self.failures.iter().all(|f| f.config_error) {
            2
        } else {
            3
        }
    }
}

/// Work item: a slice of the (series × point × path) grid evaluated together.
struct Unit<'a> {
    series: &'a str,
    points: Vec<(usize, &'a Point)>,
    paths: Vec<EvalPath>,
}

struct Context<'a> {
    spec: &'a ExperimentSpec,
    seed: u64,
    analytic: AnalyticConfig,
}

fn units<'a>(spec: &ExperimentSpec, resolved: &'a [ResolvedSeries]) -> Vec<Unit<'a>> {
    let mut out = Vec::new();
    for s in resolved {
        let indexed: Vec<(usize, &Point)> = s.points.iter().enumerate().collect();
        match spec.kind {
            // one sample set serves the whole s grid
            ExperimentKind::LaplaceValidation if spec.sweep.key == "s" => out.push(Unit {
                series: &s.label,
                points: indexed,
                paths: spec.paths.clone(),
            }),
            ExperimentKind::CdfValidation | ExperimentKind::LaplaceValidation => {
                out.extend(indexed.into_iter().map(|p| Unit {
                    series: &s.label,
                    points: vec![p],
                    paths: spec.paths.clone(),
                }))
            }
            _ => {
                for p in indexed {
                    out.extend(spec.paths.iter().map(|&path| Unit {
                        series: &s.label,
                        points: vec![p],
                        paths: vec![path],
                    }))
                }
            }
        }
    }
    out
}

fn mc_config(ctx: &Context, n_geometries: usize, n_fadings: usize) -> McConfig {
    let mut cfg = McConfig::new(n_geometries, n_fadings, ctx.seed);
    if let Some(c) = ctx.spec.mc.explicit_cells {
        cfg.explicit_cells = c;
    }
    cfg
}

fn sampling() -> SamplingOptions {
    SamplingOptions {
        compensate_tail: true,
        ..SamplingOptions::default()
    }
}

impl Unit<'_> {
    fn row(&self, metric: &'static str, path: EvalPath, param: f64, x: f64, y: f64) -> Row {
        Row {
            series: self.series.to_string(),
            metric,
            path: path.as_str(),
            param,
            x,
            y,
            y_err: None,
            n: None,
        }
    }

    fn estimate_row(&self, metric: &'static str, path: EvalPath, param: f64, e: &EstimateWithCI) -> Row {
        Row {
            y_err: Some(e.std_error),
            n: Some(e.n_trials),
            ..self.row(metric, path, param, param, e.mean)
        }
    }

    fn describe(&self, key: &str) -> String {
        let mut s = format!("series={}", self.series);
        if self.points.len() == 1 {
            let _ = write!(s, ", {key}={}", format_number(self.points[0].1.value));
        }
        if self.paths.len() == 1 {
            let _ = write!(s, ", path={}", self.paths[0].as_str());
        }
        s
    }

    fn run(&self, ctx: &Context) -> UnitOutput {
        let mut out = UnitOutput::default();
        let result = match ctx.spec.kind {
            ExperimentKind::OutageVsSnr | ExperimentKind::RateVsSnr | ExperimentKind::RateVsDensity => {
                self.sweep_point(ctx, &mut out)
            }
            ExperimentKind::CdfValidation => self.cdf_point(ctx, &mut out),
            ExperimentKind::LaplaceValidation => self.laplace_points(ctx, &mut out),
            ExperimentKind::Percolation => self.percolation_point(ctx, &mut out),
        };
        if let Err(e) = result {
            out.failure = Some(Failure {
                context: self.describe(&ctx.spec.sweep.key),
                message: e.to_string(),
                config_error: e.is_config_error(),
            });
        }
        out
    }

    fn sweep_point(&self, ctx: &Context, out: &mut UnitOutput) -> Result<(), Error> {
        let (_, point) = self.points[0];
        let path = self.paths[0];
        let p = &point.params;
        let outage = ctx.spec.kind == ExperimentKind::OutageVsSnr;
        let metric = if outage { "outage" } else { "mean_rate" };
        match path {
            EvalPath::MontecarloExact | EvalPath::MontecarloBall => {
                let mode = if path == EvalPath::MontecarloExact {
                    SceneMode::Exact
                } else {
                    SceneMode::BallApprox
                };
                let cfg = mc_config(ctx, ctx.spec.mc.n_geometries, ctx.spec.mc.n_fadings);
                let e = estimate_secrecy(p, mode, &cfg)?;
                let est = if outage { e.outage } else { e.mean_rate };
                out.rows.push(self.estimate_row(metric, path, point.value, &est));
            }
            EvalPath::Analytic => {
                let y = if outage {
                    outage_probability(p, PdfSource::Lognormal, &ctx.analytic)?
                } else {
                    mean_secrecy_rate(p, PdfSource::Lognormal, &ctx.analytic)?
                };
                out.rows.push(self.row(metric, path, point.value, point.value, y));
            }
            EvalPath::LowerBound => {
                let y = mean_rate_lower_bound(p, &ctx.analytic)?;
                out.rows.push(self.row(metric, path, point.value, point.value, y));
            }
        }
        Ok(())
    }

    fn samples(&self, ctx: &Context, point: &Point) -> Result<(SampleSet, SampleSet), Error> {
        let n = ctx.spec.n_samples.unwrap_or(0);
        Ok(collect_interference_leakage(
            &point.params,
            n,
            DistanceCondition::CellRadius,
            &sampling(),
            ctx.seed,
        )?)
    }

    fn cdf_point(&self, ctx: &Context, out: &mut UnitOutput) -> Result<(), Error> {
        let (index, point) = self.points[0];
        let p = &point.params;
        let fits: [LognormalFit; 2] = [
            lognormal_fit(&interference_moments(p.cell_radius, p)?)?,
            lognormal_fit(&leakage_moments(p)?)?,
        ];
        let samples = if self.paths.contains(&EvalPath::MontecarloBall) {
            let (i, l) = self.samples(ctx, point)?;
            Some([i, l])
        } else {
            None
        };
        for (q, fit) in fits.iter().enumerate() {
            let (cdf_metric, ks_metric) = [
                ("cdf_interference", "ks_interference"),
                ("cdf_leakage", "ks_leakage"),
            ][q];
            let sorted = samples.as_ref().map(|s| s[q].sorted());
            let grid: Vec<f64> = match &sorted {
                Some(v) => (1..=CDF_LEVELS)
                    .map(|j| {
                        let k = (j * v.len()).div_ceil(CDF_LEVELS + 1);
                        v[k.clamp(1, v.len()) - 1]
                    })
                    .collect(),
                None => {
                    let half = 4.0 * fit.sigma_n();
                    (1..=CDF_LEVELS)
                        .map(|j| fit.quantile_point(-half + 2.0 * half * j as f64 / (CDF_LEVELS + 1) as f64))
                        .collect()
                }
            };
            for path in &self.paths {
                for &x in &grid {
                    let y = match (path, &sorted) {
                        (EvalPath::MontecarloBall, Some(v)) => {
                            v.partition_point(|&s| s <= x) as f64 / v.len() as f64
                        }
                        _ => fit.cdf(x),
                    };
                    let mut row = self.row(cdf_metric, *path, point.value, x, y);
                    if *path == EvalPath::MontecarloBall {
                        row.n = sorted.as_ref().map(Vec::len);
                    }
                    out.rows.push(row);
                }
            }
            if let Some(v) = &sorted {
                let mut row = self.row(
                    ks_metric,
                    EvalPath::MontecarloBall,
                    point.value,
                    point.value,
                    ks_distance(v, |x| fit.cdf(x)),
                );
                row.n = Some(v.len());
                out.rows.push(row);
            }
        }
        if let Some(sets) = samples {
            for set in sets {
                let file = format!(
                    "{}.{}.{:03}.{}.txt",
                    ctx.spec.name,
                    file_safe(self.series),
                    index,
                    set.label.as_str()
                );
                out.dumps.push((file, set));
            }
        }
        Ok(())
    }

    fn laplace_points(&self, ctx: &Context, out: &mut UnitOutput) -> Result<(), Error> {
        let grid: Vec<f64> = match (self.points[0].1.s, &ctx.spec.s_grid) {
            (Some(_), _) => self.points.iter().map(|(_, p)| p.s.unwrap_or_default()).collect(),
            (None, Some(g)) => g.clone(),
            (None, None) => Vec::new(),
        };
        let sweeping_s = self.points[0].1.s.is_some();
        // with `s` swept, the parameters are identical across points
        let groups: Vec<(&Point, Vec<f64>)> = if sweeping_s {
            vec![(self.points[0].1, grid)]
        } else {
            self.points.iter().map(|(_, p)| (*p, grid.clone())).collect()
        };
        for (point, s_values) in groups {
            let p = &point.params;
            let samples = if self.paths.contains(&EvalPath::MontecarloBall) {
                let (i, l) = self.samples(ctx, point)?;
                let doubled: Vec<f64> = s_values.iter().map(|s| 2.0 * s).collect();
                let mut stats = Vec::new();
                for set in [&i, &l] {
                    let m1 = empirical_laplace(set, &s_values)?;
                    let m2 = empirical_laplace(set, &doubled)?;
                    stats.push((m1, m2, set.values.len()));
                }
                Some(stats)
            } else {
                None
            };
            for (q, metric) in ["laplace_interference", "laplace_leakage"]
                .into_iter()
                .enumerate()
            {
                for (j, &s) in s_values.iter().enumerate() {
                    let param = if sweeping_s { s } else { point.value };
                    for &path in &self.paths {
                        match path {
                            EvalPath::MontecarloBall => {
                                let (m1, m2, n) = &samples.as_ref().expect("sampled")[q];
                                let var = (m2[j] - m1[j] * m1[j]).max(0.0);
                                let e = EstimateWithCI::new(m1[j], (var / *n as f64).sqrt(), *n);
                                out.rows.push(Row {
                                    x: s,
                                    ..self.estimate_row(metric, path, param, &e)
                                });
                            }
                            _ => {
                                let y = if q == 0 {
                                    laplace_interference(s, p.cell_radius, p)?
                                } else {
                                    laplace_leakage(s, p)?
                                };
                                out.rows.push(self.row(metric, path, param, s, y));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn percolation_point(&self, ctx: &Context, out: &mut UnitOutput) -> Result<(), Error> {
        let (_, point) = self.points[0];
        let path = self.paths[0];
        let coop = point.coop.expect("validated cooperation config");
        match path {
            EvalPath::Analytic => {
                let critical = point.params.user_density > percolation_threshold(&coop);
                let y = if critical { 1.0 } else { 0.0 };
                out.rows
                    .push(self.row("supercritical", path, point.value, point.value, y));
            }
            _ => {
                let window = ctx.spec.window_links.unwrap_or(DEFAULT_WINDOW_LINKS) * coop.link_distance();
                let n = ctx.spec.n_samples.unwrap_or(0);
                let fractions = percolation_trials(&point.params, &coop, window, n, ctx.seed)?;
                let e = EstimateWithCI::sample_mean(&fractions);
                out.rows
                    .push(self.estimate_row("largest_cluster_fraction", path, point.value, &e));
            }
        }
        Ok(())
    }
}

fn file_safe(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn csv_field(label: &str) -> String {
    if label.contains([',', '"', '\n']) {
        format!("\"{}\"", label.replace('"', "\"\""))
    } else {
        label.to_string()
    }
}

/// Spec as recorded in the outputs: the effective seed is written back.
fn effective_spec(spec: &ExperimentSpec, seed: Option<u64>) -> ExperimentSpec {
    let mut s = spec.clone();
    if seed.is_some() {
        s.mc.seed = seed;
    }
    s
}

/// Runs every sweep point and writes `<name>.csv` and
/// `<name>.summary.json` (plus sample dumps) into `out_dir`.
///
/// Configuration problems are reported before any work starts. Failures
/// of individual points are recorded in the outputs and in the report;
/// the remaining points still run.
pub fn run_experiment(
    spec: &ExperimentSpec,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<RunReport, RunError> {
    let resolved = spec.resolve(opts.seed).map_err(RunError::Config)?;
    let seed = opts.seed.or(spec.mc.seed);
    let ctx = Context {
        spec,
        seed: seed.unwrap_or(0),
        analytic: AnalyticConfig::default(),
    };
    let work = units(spec, &resolved);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.workers {
        pool = pool.num_threads(n);
    }
    let outputs: Vec<UnitOutput> = pool
        .build()?
        .install(|| work.par_iter().map(|u| u.run(&ctx)).collect());

    fs::create_dir_all(out_dir)?;
    let recorded = effective_spec(spec, seed);
    let csv_path = out_dir.join(format!("{}.csv", spec.name));
    let mut csv = BufWriter::new(fs::File::create(&csv_path)?);
    writeln!(
        csv,
        "# cellsec {} (layout {SPEC_VERSION})",
        env!("CARGO_PKG_VERSION")
    )?;
    writeln!(
        csv,
        "# experiment: {} ({}), sweep over {}",
        spec.name,
        spec.kind.as_str(),
        spec.sweep.key
    )?;
    writeln!(
        csv,
        "# spec: {}",
        serde_json::to_string(&recorded).expect("serializable")
    )?;
    for s in &resolved {
        let params: Vec<_> = s.points.iter().map(|p| &p.params).collect();
        writeln!(
            csv,
            "# params[{}]: {}",
            s.label,
            serde_json::to_string(&params).expect("serializable")
        )?;
    }
    writeln!(csv, "{CSV_HEADER}")?;
    let mut rows = 0;
    let mut failures = Vec::new();
    for output in &outputs {
        for row in &output.rows {
            let line = Row {
                series: csv_field(&row.series),
                ..row.clone()
            };
            writeln!(csv, "{}", line.csv())?;
        }
        rows += output.rows.len();
        if let Some(f) = &output.failure {
            writeln!(csv, "# failed: {}: {}", f.context, f.message.replace('\n', " "))?;
            failures.push(f.clone());
        }
        for (file, set) in &output.dumps {
            set.write_dump(BufWriter::new(fs::File::create(out_dir.join(file))?))?;
        }
    }
    csv.flush()?;

    let summary = json!({
        "name": spec.name,
        "kind": spec.kind.as_str(),
        "code_version": env!("CARGO_PKG_VERSION"),
        "layout_version": SPEC_VERSION,
        "seed": seed,
        "sweep_key": spec.sweep.key,
        "csv": csv_path.file_name().map(|n| n.to_string_lossy().into_owned()),
        "rows": rows,
        "failures": failures.iter().map(|f| json!({
            "context": f.context,
            "error": f.message,
            "config_error": f.config_error,
        })).collect::<Vec<_>>(),
        "series": resolved.iter().map(|s| json!({
            "label": s.label,
            "points": s.points.iter().map(|p| json!({"value": p.value, "params": p.params})).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "spec": recorded,
    });
    let summary_path = out_dir.join(format!("{}.summary.json", spec.name));
    fs::write(
        &summary_path,
        serde_json::to_string_pretty(&summary).expect("serializable") + "\n",
    )?;
    Ok(RunReport {
        csv_path,
        summary_path,
        rows,
        failures,
    })
}
