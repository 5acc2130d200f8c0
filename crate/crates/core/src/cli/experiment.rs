//! Running a configured experiment and writing its CSV outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use super::config::{Check, ExperimentConfig};
use crate::exactref::{
    gap_exponent, low_temp_predictions, onsager_magnetization, theorem_gap_bound, verify_coupling_identities,
    verify_edge_conditionals, verify_impl_npiani, verify_rotation_invariance, ExactError,
};
use crate::graph::{GraphError, LatticeGraph, LatticeKind};
use crate::observables::{ColumnSet, EClass, ObservableError, ObservableRecord, OBSERVABLE_NAMES};
use crate::sampler::{p_from_beta, run_chain_with, Boundary, ModelParams, SamplerError, Schedule, GENERATOR_NAME};
use crate::stats::{accumulate, margin_verdict, paired_verdict, Estimate, StatsError, Verdict};

/// Window averages reported alongside the per-origin observables on slabs.
const BULK_NAMES: [&str; 2] = ["bulk_m", "bulk_column_span"];

/// Tolerance for identities checked by enumeration.
pub const EXACT_IDENTITY_TOL: f64 = 1e-10;
/// Tolerance for closed-form conditionals and symmetries checked by enumeration.
pub const EXACT_FORMULA_TOL: f64 = 1e-12;
/// Absolute floor on the Onsager comparison.
pub const ONSAGER_ABS_TOL: f64 = 0.02;
/// Allowed multiplicative deviation from the low-temperature leading order.
pub const LOWTEMP_FACTOR: f64 = 1.5;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error("no check in the list has an exact form")]
    NothingExact,
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OutputOptions {
    /// Adds a generation timestamp to the CSV metadata.
    pub timestamp: bool,
}

#[derive(Debug, Clone)]
pub struct DataRow {
    pub beta: f64,
    pub observable: String,
    pub estimate: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerdictRow {
    pub check: String,
    pub beta: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// Signed amount by which the check is satisfied.
    pub margin: f64,
    pub sigma: f64,
    pub k_sigma: f64,
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub data: Vec<DataRow>,
    pub verdicts: Vec<VerdictRow>,
    pub files: Vec<PathBuf>,
}

impl RunReport {
    pub fn any_violated(&self) -> bool {
        self.verdicts.iter().any(|v| v.verdict == Verdict::Violated)
    }

    pub fn verdict(&self, check: &str, beta: f64) -> Option<&VerdictRow> {
        self.verdicts.iter().find(|v| v.check == check && v.beta == beta)
    }

    pub fn estimate(&self, observable: &str, beta: f64) -> Option<&Estimate> {
        self.data
            .iter()
            .find(|d| d.observable == observable && d.beta == beta)
            .map(|d| &d.estimate)
    }
}

/// Samples of every observable, one vector per chain in seed order.
pub struct ChainSamples {
    pub seeds: Vec<u64>,
    pub chains: Vec<Vec<ObservableRecord>>,
    pub batch_size: usize,
}

impl ChainSamples {
    /// Batch-means estimate of `f`, pooled over chains.
    pub fn estimate(&self, f: impl Fn(&ObservableRecord) -> f64 + Sync) -> Result<Estimate, StatsError> {
        let per_chain = self
            .chains
            .iter()
            .zip(&self.seeds)
            .map(|(records, &seed)| {
                let stream: Vec<f64> = records.iter().map(&f).collect();
                accumulate(&stream, self.batch_size).map(|e| e.with_seed(seed))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Estimate::merge_all(&per_chain).expect("at least one chain"))
    }

    pub fn count(&self, f: impl Fn(&ObservableRecord) -> bool) -> usize {
        self.chains.iter().flatten().filter(|r| f(r)).count()
    }
}

/// Runs independent chains with seeds `base_seed + i` in parallel.
pub fn sample_chains(
    g: &LatticeGraph,
    params: &ModelParams,
    config: &ExperimentConfig,
) -> Result<ChainSamples, SamplerError> {
    let seeds = config.seeds();
    let chains = seeds
        .par_iter()
        .map(|&seed| {
            let schedule = Schedule::new(config.burn_in, config.sweeps, config.thin, seed);
            run_chain_with(g, params, &schedule, |view| Ok(ObservableRecord::from_view(view)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ChainSamples {
        seeds,
        chains,
        batch_size: config.batch_size,
    })
}

fn ind(x: bool) -> f64 {
    if x {
        1.0
    } else {
        0.0
    }
}

/// Sign of the boundary, +1 when it does not fix one.
fn boundary_sign(b: Boundary) -> f64 {
    f64::from(b.fixed_sign().unwrap_or(1))
}

fn spans_with_sign(r: &ObservableRecord, s: f64) -> bool {
    if s > 0.0 {
        r.plus_span
    } else {
        r.minus_span
    }
}

fn column_spans_with_sign(r: &ObservableRecord, s: f64) -> bool {
    let v = if s > 0.0 { r.column_span } else { r.column_span_minus };
    v.unwrap_or(false)
}

/// Evaluates the statistical checks of `config` at one temperature.
pub fn statistical_verdicts(
    g: &LatticeGraph,
    config: &ExperimentConfig,
    beta: f64,
    samples: &ChainSamples,
) -> Result<Vec<VerdictRow>, RunError> {
    let s = boundary_sign(config.boundary);
    let k = config.k_sigma;
    let mut rows = Vec::new();
    let row = |check: &str, lhs: f64, rhs: f64, margin: f64, sigma: f64, verdict: Verdict, detail: String| VerdictRow {
        check: check.to_string(),
        beta,
        lhs,
        rhs,
        margin,
        sigma,
        k_sigma: k,
        verdict,
        detail,
    };
    let signed_m = || samples.estimate(|r| s * f64::from(r.m_origin));

    for &check in &config.checks {
        match check {
            Check::Thm31 | Check::Thm32i => {
                let m = signed_m()?;
                let span = samples.estimate(|r| ind(spans_with_sign(r, s)))?;
                let diff = samples.estimate(|r| ind(spans_with_sign(r, s)) - s * f64::from(r.m_origin))?;
                if check == Check::Thm31 {
                    rows.push(row(
                        "thm31",
                        m.mean(),
                        span.mean(),
                        diff.mean(),
                        diff.stderr(),
                        paired_verdict(&diff, k),
                        "paired".into(),
                    ));
                } else {
                    let LatticeKind::Cubic { dim } = g.kind() else {
                        unreachable!("validated at parse time")
                    };
                    let p = p_from_beta(beta, config.j_horizontal)?;
                    let bound = theorem_gap_bound(dim as u32, p, m.mean().clamp(0.0, 1.0));
                    let margin = diff.mean() - bound;
                    rows.push(row(
                        "thm32i",
                        m.mean() + bound,
                        span.mean(),
                        margin,
                        diff.stderr(),
                        margin_verdict(margin, diff.stderr(), k),
                        format!("gap_bound={bound};exponent={}", gap_exponent(dim as u32)),
                    ));
                }
            }
            Check::Prop21 => {
                let m = signed_m()?;
                let fk = samples.estimate(|r| ind(r.fk_span))?;
                let diff = samples.estimate(|r| ind(r.fk_span) - s * f64::from(r.m_origin))?;
                rows.push(equality_row(
                    "prop21",
                    beta,
                    m.mean(),
                    fk.mean(),
                    k * diff.stderr(),
                    diff.stderr(),
                    k,
                ));
            }
            Check::Onsager => {
                let m = samples.estimate(|r| f64::from(r.m_origin))?;
                let target = match config.boundary.fixed_sign() {
                    Some(sign) => f64::from(sign) * onsager_magnetization(beta * config.j_horizontal),
                    None => 0.0,
                };
                let tol = ONSAGER_ABS_TOL.max(k * m.stderr());
                rows.push(equality_row("onsager", beta, m.mean(), target, tol, m.stderr(), k));
            }
            Check::LowTemp => {
                let x = (-2.0 * beta * config.j_horizontal).exp();
                let pred = low_temp_predictions(x, 4);
                let one_minus_m = samples.estimate(|r| 1.0 - s * f64::from(r.m_origin))?;
                let one_minus_r = samples.estimate(|r| 1.0 - ind(spans_with_sign(r, s)))?;
                rows.push(factor_row("lowtemp_m", beta, &one_minus_m, pred.one_minus_m, k));
                rows.push(factor_row("lowtemp_r", beta, &one_minus_r, pred.one_minus_r, k));
            }
            Check::Thm51 => {
                let sign = if s > 0.0 { 1 } else { -1 };
                let window = |r: &ObservableRecord| r.column_window.expect("slab records carry a column window");
                let bulk_m = samples.estimate(|r| s * window(r).magnetization())?;
                let bulk_r = samples.estimate(|r| window(r).span_fraction(sign))?;
                let diff = samples.estimate(|r| window(r).span_fraction(sign) - s * window(r).magnetization())?;
                let columns = samples.chains[0].first().map_or(0, |r| window(r).columns);
                rows.push(row(
                    "thm51",
                    bulk_m.mean(),
                    bulk_r.mean(),
                    diff.mean(),
                    diff.stderr(),
                    paired_verdict(&diff, k),
                    format!("paired;bulk_columns={columns};layer_averaged"),
                ));
                let m = signed_m()?;
                let col = samples.estimate(|r| ind(column_spans_with_sign(r, s)))?;
                let diff = samples.estimate(|r| ind(column_spans_with_sign(r, s)) - s * f64::from(r.m_origin))?;
                rows.push(row(
                    "thm51_origin",
                    m.mean(),
                    col.mean(),
                    diff.mean(),
                    diff.stderr(),
                    paired_verdict(&diff, k),
                    "paired".into(),
                ));
            }
            Check::Prop43 => {
                let favoured = if s > 0.0 { EClass::Plus } else { EClass::Minus };
                let class_gap = |r: &ObservableRecord| s * r.e_class.map_or(0.0, |c| f64::from(c.as_sign()));
                let a = samples.estimate(|r| ind(r.event_a == Some(true)))?;
                let gap = samples.estimate(class_gap)?;
                let diff = samples.estimate(|r| class_gap(r) - ind(r.event_a == Some(true)))?;
                rows.push(row(
                    "prop43",
                    a.mean(),
                    gap.mean(),
                    diff.mean(),
                    diff.stderr(),
                    paired_verdict(&diff, k),
                    "paired".into(),
                ));
                let total = samples.count(|_| true);
                let failures = samples.count(|r| r.event_a == Some(true) && r.e_class != Some(favoured));
                let with_a = samples.count(|r| r.event_a == Some(true));
                rows.push(row(
                    "prop43_inclusion",
                    failures as f64,
                    0.0,
                    -(failures as f64),
                    0.0,
                    if failures == 0 { Verdict::Holds } else { Verdict::Violated },
                    format!("samples={total};with_event_a={with_a}"),
                ));
            }
            Check::ImplNpiani | Check::Eq4 | Check::Rotation => {}
        }
    }
    Ok(rows)
}

/// Two-sided comparison: holds when `|lhs - rhs| <= tol`.
fn equality_row(check: &str, beta: f64, lhs: f64, rhs: f64, tol: f64, sigma: f64, k: f64) -> VerdictRow {
    let margin = tol - (lhs - rhs).abs();
    VerdictRow {
        check: check.to_string(),
        beta,
        lhs,
        rhs,
        margin,
        sigma,
        k_sigma: k,
        verdict: if margin >= 0.0 { Verdict::Holds } else { Verdict::Violated },
        detail: format!("tolerance={tol}"),
    }
}

/// Holds when the measured value is within a factor of the prediction; a miss
/// that is still within `k` standard errors is inconclusive.
fn factor_row(check: &str, beta: f64, measured: &Estimate, predicted: f64, k: f64) -> VerdictRow {
    let value = measured.mean();
    let ratio = value / predicted;
    let within = ratio >= 1.0 / LOWTEMP_FACTOR && ratio <= LOWTEMP_FACTOR;
    let verdict = if within {
        Verdict::Holds
    } else if (value - predicted).abs() <= k * measured.stderr() {
        Verdict::Inconclusive
    } else {
        Verdict::Violated
    };
    VerdictRow {
        check: check.to_string(),
        beta,
        lhs: value,
        rhs: predicted,
        margin: LOWTEMP_FACTOR.ln() - ratio.ln().abs(),
        sigma: measured.stderr(),
        k_sigma: k,
        verdict,
        detail: format!("ratio={ratio};factor={LOWTEMP_FACTOR}"),
    }
}

fn exact_row(check: &str, beta: f64, lhs: f64, rhs: f64, margin: f64, detail: String) -> VerdictRow {
    VerdictRow {
        check: check.to_string(),
        beta,
        lhs,
        rhs,
        margin,
        sigma: 0.0,
        k_sigma: 0.0,
        verdict: if margin >= 0.0 { Verdict::Holds } else { Verdict::Violated },
        detail,
    }
}

/// Evaluates one check by enumeration. `None` when the check has no exact form.
pub fn exact_verdict(g: &LatticeGraph, params: &ModelParams, check: Check) -> Result<Option<VerdictRow>, RunError> {
    let beta = params.beta();
    let row = match check {
        Check::Prop21 => {
            let r = verify_coupling_identities(g, params)?;
            exact_row(
                "prop21_exact",
                beta,
                r.magnetization,
                r.connection_probability,
                EXACT_IDENTITY_TOL - r.difference(),
                format!("tolerance={EXACT_IDENTITY_TOL}"),
            )
        }
        Check::Eq4 => {
            let r = verify_edge_conditionals(g, &params.edge_probabilities(g))?;
            exact_row(
                "eq4",
                beta,
                r.max_error,
                0.0,
                EXACT_FORMULA_TOL - r.max_error,
                format!("joined={};separated={};tolerance={EXACT_FORMULA_TOL}", r.joined, r.separated),
            )
        }
        Check::ImplNpiani => {
            let y = ColumnSet::origin(g)?;
            let r = verify_impl_npiani(g, &y, params)?;
            exact_row(
                "impl_npiani",
                beta,
                r.plus,
                r.minus,
                r.minus - r.plus + EXACT_FORMULA_TOL,
                format!("strict={}", r.plus < r.minus),
            )
        }
        Check::Rotation => {
            let r = verify_rotation_invariance(g, params)?;
            let periodic = matches!(g.kind(), LatticeKind::SlabPeriodic { .. });
            let dev = if periodic {
                r.rotation_deviation
            } else {
                r.reflection_deviation
            };
            exact_row(
                "rotation",
                beta,
                r.rotation_deviation,
                r.reflection_deviation,
                EXACT_FORMULA_TOL - dev,
                format!(
                    "periodic={periodic};tested={};tolerance={EXACT_FORMULA_TOL}",
                    if periodic { "rotation" } else { "reflection" }
                ),
            )
        }
        _ => return Ok(None),
    };
    Ok(Some(row))
}

/// Samples every temperature, evaluates all checks and writes `data.csv` and
/// `verdicts.csv` into the output directory.
pub fn run_experiment(config: &ExperimentConfig, options: OutputOptions) -> Result<RunReport, RunError> {
    let g = config.graph.build()?;
    let statistical = config.checks.is_empty() || config.checks.iter().any(|c| !c.is_exact_only());
    let mut report = RunReport::default();
    for &beta in &config.betas {
        let params = config.params(beta)?;
        if statistical {
            let samples = sample_chains(&g, &params, config)?;
            for name in OBSERVABLE_NAMES.into_iter().chain(BULK_NAMES) {
                if samples.chains[0].first().and_then(|r| r.value(name)).is_none() {
                    continue;
                }
                let estimate = samples.estimate(|r| r.value(name).unwrap_or(0.0))?;
                report.data.push(DataRow {
                    beta,
                    observable: name.to_string(),
                    estimate,
                });
            }
            report.verdicts.extend(statistical_verdicts(&g, config, beta, &samples)?);
        }
        for &check in config.checks.iter().filter(|c| c.is_exact_only()) {
            report.verdicts.extend(exact_verdict(&g, &params, check)?);
        }
    }
    let header = metadata(config, &g, options);
    report.files.push(write_file(&config.output_dir, "data.csv", &(header.clone() + &data_csv(&report.data)))?);
    report.files.push(write_file(&config.output_dir, "verdicts.csv", &(header + &verdict_csv(&report.verdicts)))?);
    Ok(report)
}

/// Runs every check with an exact form at each temperature; writes `exact.csv`.
pub fn run_exact(config: &ExperimentConfig, options: OutputOptions) -> Result<RunReport, RunError> {
    let g = config.graph.build()?;
    let checks: Vec<Check> = config.checks.iter().copied().filter(|c| c.has_exact_form()).collect();
    if checks.is_empty() {
        return Err(RunError::NothingExact);
    }
    let mut report = RunReport::default();
    for &beta in &config.betas {
        let params = config.params(beta)?;
        for &check in &checks {
            report.verdicts.extend(exact_verdict(&g, &params, check)?);
        }
    }
    let text = metadata(config, &g, options) + &verdict_csv(&report.verdicts);
    report.files.push(write_file(&config.output_dir, "exact.csv", &text)?);
    Ok(report)
}

fn metadata(config: &ExperimentConfig, g: &LatticeGraph, options: OutputOptions) -> String {
    let mut out = String::new();
    let seeds: Vec<String> = config.seeds().iter().map(u64::to_string).collect();
    writeln!(out, "# fkslab {}", env!("CARGO_PKG_VERSION")).unwrap();
    writeln!(out, "# graph: {}", g.describe()).unwrap();
    writeln!(out, "# boundary: {}", config.boundary.name()).unwrap();
    writeln!(out, "# generator: {GENERATOR_NAME}").unwrap();
    writeln!(out, "# seeds: {}", seeds.join(" ")).unwrap();
    writeln!(out, "# config_sha256: {}", config.hash()).unwrap();
    writeln!(
        out,
        "# schedule: burn_in={} sweeps={} thin={} batch_size={}",
        config.burn_in, config.sweeps, config.thin, config.batch_size
    )
    .unwrap();
    writeln!(
        out,
        "# note: spanning observables stand in for infinite clusters by reaching the boundary of the finite graph"
    )
    .unwrap();
    if options.timestamp {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        writeln!(out, "# generated_unix: {now}").unwrap();
    }
    out
}

/// Shortest round-trip form, in scientific notation outside `[1e-4, 1e15)`.
pub fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn data_csv(rows: &[DataRow]) -> String {
    let mut out = String::from("beta,observable,mean,stderr,n,batches,chains\n");
    for r in rows {
        let e = &r.estimate;
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_num(r.beta),
            r.observable,
            fmt_num(e.mean()),
            fmt_num(e.stderr()),
            e.n_samples(),
            e.n_batches(),
            e.seeds().len()
        )
        .unwrap();
    }
    out
}

pub fn verdict_csv(rows: &[VerdictRow]) -> String {
    let mut out = String::from("check,beta,lhs,rhs,margin,sigma,k_sigma,verdict,detail\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.check,
            fmt_num(r.beta),
            fmt_num(r.lhs),
            fmt_num(r.rhs),
            fmt_num(r.margin),
            fmt_num(r.sigma),
            fmt_num(r.k_sigma),
            r.verdict,
            r.detail
        )
        .unwrap();
    }
    out
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<PathBuf, RunError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| RunError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(io(&path))?;
    Ok(path)
}

/// Closed-form quantities printed by the `bound` subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub dim: u32,
    pub beta: f64,
    pub p: f64,
    pub x: f64,
    /// Onsager magnetization; only defined for d = 2.
    pub onsager: Option<f64>,
    pub m: f64,
    pub m_source: &'static str,
    pub exponent: u64,
    pub gap_bound: f64,
    pub one_minus_m: f64,
    pub one_minus_r: f64,
}

pub fn bound_report(dim: u32, beta: f64, m: Option<f64>) -> Result<BoundReport, RunError> {
    if dim == 0 {
        return Err(GraphError::InvalidParameter("dimension must be at least 1".into()).into());
    }
    let p = p_from_beta(beta, 1.0)?;
    let x = (-2.0 * beta).exp();
    let onsager = (dim == 2).then(|| onsager_magnetization(beta));
    let (m, m_source) = match (m, onsager) {
        (Some(m), _) => (m, "given"),
        (None, Some(o)) => (o, "onsager"),
        (None, None) => (1.0, "upper bound 1"),
    };
    let pred = low_temp_predictions(x, 2 * dim);
    Ok(BoundReport {
        dim,
        beta,
        p,
        x,
        onsager,
        m,
        m_source,
        exponent: gap_exponent(dim),
        gap_bound: theorem_gap_bound(dim, p, m),
        one_minus_m: pred.one_minus_m,
        one_minus_r: pred.one_minus_r,
    })
}

impl std::fmt::Display for BoundReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "d = {}", self.dim)?;
        writeln!(f, "beta = {}", fmt_num(self.beta))?;
        writeln!(f, "p = {}", fmt_num(self.p))?;
        writeln!(f, "x = {}", fmt_num(self.x))?;
        match self.onsager {
            Some(o) => writeln!(f, "onsager_m = {}", fmt_num(o))?,
            None => writeln!(f, "onsager_m = n/a")?,
        }
        writeln!(f, "m = {} ({})", fmt_num(self.m), self.m_source)?;
        writeln!(f, "exponent = {}", self.exponent)?;
        writeln!(f, "gap_bound = {}", fmt_num(self.gap_bound))?;
        writeln!(f, "lowtemp_one_minus_m = {}", fmt_num(self.one_minus_m))?;
        write!(f, "lowtemp_one_minus_r = {}", fmt_num(self.one_minus_r))
    }
}
