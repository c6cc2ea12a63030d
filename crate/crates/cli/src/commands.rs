//! Command implementations. Each returns the full text of its output file.

use crate::args::*;
use ldpopt::bayes_lab::{bayes_loss_mc, default_radius, PriorSpec, MIN_RESOLUTION};
use ldpopt::lower_bound::{phi_summary, LOWER_BOUND_CSV_HEADER};
use ldpopt::mechanisms::{
    krappor_mechanism, krr_mechanism, reduce_alphabet, subset_mechanism, verify_ldp,
};
use ldpopt::numeric::quantile;
use ldpopt::risk::{
    analytic_l2_risk, fmt_f64, monte_carlo_risk, optimal_d, simulate_trials, summarize,
    worst_case_risk, EstimatorKind, RiskRow, RISK_CSV_HEADER,
};
use ldpopt::{Distribution, Error as CoreError, Mechanism, MechanismLabel};
use serde_json::{json, Map, Value};
use std::fs;
use std::path::Path;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Resolved configuration echoed into every output. Thread count and output
/// path are left out so that output bytes do not depend on them.
#[derive(Default)]
struct Echo(Map<String, Value>);

impl Echo {
    fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.0.insert(key.to_string(), value.into());
    }

    fn csv_lines(&self) -> String {
        self.0
            .iter()
            .map(|(k, v)| match v {
                Value::String(s) => format!("# {k}={s}\n"),
                other => format!("# {k}={other}\n"),
            })
            .collect()
    }

    fn into_value(self) -> Value {
        Value::Object(self.0)
    }
}

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

/// Loads a mechanism from JSON. Accepts a bare mechanism object or the full
/// output of the `mech` command.
pub fn load_mechanism(path: &Path) -> CliResult<Mechanism> {
    let text = read_file(path)?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let inner = match value.get("mechanism") {
        Some(m) => m.clone(),
        None => value,
    };
    serde_json::from_value(inner).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Parses `--p`: `uniform` or `file:<path>`.
fn load_distribution(spec: &str, k: usize) -> CliResult<Distribution> {
    if spec == "uniform" {
        return Ok(Distribution::uniform(k));
    }
    let path = spec.strip_prefix("file:").ok_or_else(|| {
        usage(format!(
            "--p must be \"uniform\" or \"file:<path>\", got {spec:?}"
        ))
    })?;
    let text = read_file(Path::new(path))?;
    let probs: Vec<f64> = serde_json::from_str(&text).map_err(|e| usage(format!("{path}: {e}")))?;
    if probs.len() != k {
        return Err(usage(format!(
            "{path}: distribution has {} entries, mechanism has k={k}",
            probs.len()
        )));
    }
    Ok(Distribution::new(probs)?)
}

fn kind_name(kind: Kind) -> &'static str {
    match kind {
        Kind::Subset => "subset",
        Kind::Krr => "krr",
        Kind::Rappor => "rappor",
    }
}

/// Builds the mechanism named by `src` and echoes how it was resolved.
fn build_mechanism(src: &MechSource, echo: &mut Echo) -> CliResult<Mechanism> {
    if let Some(path) = &src.mechanism_file {
        let m = load_mechanism(path)?;
        echo.set("mechanism_file", path.display().to_string());
        echo.set("kind", m.label().to_string());
        echo.set("k", m.k());
        echo.set("eps", fmt_f64(m.epsilon()));
        if let Some(d) = m.subset_size() {
            echo.set("d", d);
        }
        return Ok(m);
    }
    let k = src.k.ok_or_else(|| usage("--k is required"))?;
    let eps = src.eps.ok_or_else(|| usage("--eps is required"))?;
    echo.set("kind", kind_name(src.kind));
    echo.set("k", k);
    echo.set("eps", fmt_f64(eps));
    let m = match src.kind {
        Kind::Subset => {
            let d = match src.d {
                DChoice::Fixed(d) => d,
                DChoice::Auto => optimal_d(k, eps)?.d_star,
            };
            echo.set("d", d);
            subset_mechanism(k, eps, d)?
        }
        Kind::Krr => krr_mechanism(k, eps)?,
        Kind::Rappor => krappor_mechanism(k, eps)?,
    };
    Ok(m)
}

fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn json_only(fmt: Option<Format>, cmd: &str) -> CliResult<()> {
    match fmt {
        Some(Format::Csv) => Err(usage(format!("{cmd} only supports --format json"))),
        _ => Ok(()),
    }
}

pub fn cmd_mech(a: &MechArgs) -> CliResult<String> {
    json_only(a.common.format, "mech")?;
    let mut echo = Echo::default();
    echo.set("command", "mech");
    let m = build_mechanism(&a.source, &mut echo)?;
    let report = verify_ldp(&m, m.epsilon());
    let d = m.subset_size();
    let out = json!({
        "config": echo.into_value(),
        "d": d,
        "mechanism": serde_json::to_value(&m).map_err(|e| usage(e.to_string()))?,
        "verification": report,
    });
    Ok(json_text(&out))
}

/// Parses a comma-separated list of integers, with inclusive ranges `a..b`.
fn parse_int_list<T>(s: &str, what: &str) -> CliResult<Vec<T>>
where
    T: std::str::FromStr + Copy + Into<u64> + TryFrom<u64>,
{
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((lo, hi)) = part.split_once("..") {
            let lo: u64 = lo
                .parse()
                .map_err(|_| usage(format!("bad {what} range {part:?}")))?;
            let hi: u64 = hi
                .parse()
                .map_err(|_| usage(format!("bad {what} range {part:?}")))?;
            for v in lo..=hi {
                out.push(T::try_from(v).map_err(|_| usage(format!("{what} out of range")))?);
            }
        } else {
            out.push(
                part.parse()
                    .map_err(|_| usage(format!("bad {what} value {part:?}")))?,
            );
        }
    }
    if out.is_empty() {
        return Err(usage(format!("empty {what} list")));
    }
    Ok(out)
}

fn parse_d_list(s: &str) -> CliResult<Vec<DChoice>> {
    if s.trim() == "auto" {
        return Ok(vec![DChoice::Auto]);
    }
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim) {
        if part == "auto" {
            out.push(DChoice::Auto);
        } else {
            let vals: Vec<u64> = parse_int_list(part, "d")?;
            out.extend(vals.into_iter().map(|v| DChoice::Fixed(v as usize)));
        }
    }
    Ok(out)
}

fn parse_eps_list(s: &str) -> CliResult<Vec<f64>> {
    let out: Vec<f64> = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| parse_eps(p).map_err(usage))
        .collect::<CliResult<_>>()?;
    if out.is_empty() {
        return Err(usage("empty eps list"));
    }
    Ok(out)
}

pub fn cmd_risk_table(a: &RiskTableArgs) -> CliResult<String> {
    let ks: Vec<u64> = parse_int_list(&a.k, "k")?;
    let epss = parse_eps_list(&a.eps)?;
    let ds = parse_d_list(&a.d)?;
    let ns: Vec<u64> = parse_int_list(&a.n, "n")?;
    if a.mc && a.trials < 2 {
        return Err(usage("--mc needs --trials >= 2"));
    }
    let mut echo = Echo::default();
    echo.set("command", "risk-table");
    echo.set("k", a.k.clone());
    echo.set(
        "eps",
        epss.iter()
            .map(|e| fmt_f64(*e))
            .collect::<Vec<_>>()
            .join(","),
    );
    echo.set("d", a.d.clone());
    echo.set("n", a.n.clone());
    echo.set("p", a.p.clone());
    echo.set("mc", a.mc);
    if a.mc {
        echo.set("trials", a.trials);
        echo.set("seed", a.common.seed);
    }

    let mut rows = Vec::new();
    for &k in &ks {
        let k = k as usize;
        let p = load_distribution(&a.p, k)?;
        for &eps in &epss {
            for &dc in &ds {
                let d = match dc {
                    DChoice::Fixed(d) => d,
                    DChoice::Auto => optimal_d(k, eps)?.d_star,
                };
                for &n in &ns {
                    let mc = if a.mc {
                        let m = subset_mechanism(k, eps, d)?;
                        let r = monte_carlo_risk(
                            &m,
                            EstimatorKind::Subset,
                            &p,
                            n,
                            a.trials,
                            a.common.seed,
                        )?;
                        Some((r.mc_mean, r.mc_stderr, r.trials, a.common.seed))
                    } else {
                        None
                    };
                    rows.push(RiskRow {
                        k,
                        epsilon: eps,
                        d,
                        n,
                        analytic: analytic_l2_risk(k, eps, d, n, &p)?,
                        worst_case: worst_case_risk(k, eps, d, n)?,
                        mc,
                    });
                }
            }
        }
    }

    match a.common.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = echo.csv_lines();
            s.push_str(RISK_CSV_HEADER);
            s.push('\n');
            for r in &rows {
                s.push_str(&r.to_csv());
                s.push('\n');
            }
            Ok(s)
        }
        Format::Json => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "k": r.k,
                        "epsilon": r.epsilon,
                        "d": r.d,
                        "n": r.n,
                        "analytic": r.analytic,
                        "worst_case": r.worst_case,
                        "mc_mean": r.mc.map(|m| m.0),
                        "mc_stderr": r.mc.map(|m| m.1),
                        "trials": r.mc.map(|m| m.2),
                        "seed": r.mc.map(|m| m.3),
                    })
                })
                .collect();
            Ok(json_text(
                &json!({ "config": echo.into_value(), "rows": rows }),
            ))
        }
    }
}

pub fn cmd_lower_bound(a: &LowerBoundArgs) -> CliResult<String> {
    if a.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let mut echo = Echo::default();
    echo.set("command", "lower-bound");
    let m = build_mechanism(&a.source, &mut echo)?;
    echo.set("n", a.n);
    let summary = phi_summary(&reduce_alphabet(&m), m.epsilon(), a.n)?;
    match a.common.format.unwrap_or(Format::Csv) {
        Format::Csv => Ok(format!(
            "{}{LOWER_BOUND_CSV_HEADER}\n{}\n",
            echo.csv_lines(),
            summary.to_csv()
        )),
        Format::Json => Ok(json_text(&json!({
            "config": echo.into_value(),
            "report": summary,
        }))),
    }
}

fn resolve_estimator(name: Option<&str>, m: &Mechanism) -> CliResult<EstimatorKind> {
    match name {
        Some(s) => Ok(s.parse()?),
        None => Ok(match m.label() {
            MechanismLabel::Subset { .. } => EstimatorKind::Subset,
            _ => EstimatorKind::LeastSquares,
        }),
    }
}

pub fn cmd_simulate(a: &SimulateArgs) -> CliResult<String> {
    if a.trials < 2 {
        return Err(usage("--trials must be at least 2"));
    }
    let mut echo = Echo::default();
    echo.set("command", "simulate");
    let m = build_mechanism(&a.source, &mut echo)?;
    let est = resolve_estimator(a.estimator.as_deref(), &m)?;
    let p = load_distribution(&a.p, m.k())?;
    echo.set("n", a.n);
    echo.set("trials", a.trials);
    echo.set("seed", a.common.seed);
    echo.set("p", a.p.clone());
    echo.set(
        "estimator",
        match est {
            EstimatorKind::Subset => "subset",
            EstimatorKind::LeastSquares => "least_squares",
        },
    );
    let records = simulate_trials(&m, est, &p, a.n, a.trials, a.common.seed)?;
    let report = summarize(&m, est, &p, a.n, &records)?;
    match a.common.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = echo.csv_lines();
            s.push_str(&format!("# analytic={}\n", fmt_f64(report.analytic)));
            s.push_str(&format!("# worst_case={}\n", fmt_f64(report.worst_case)));
            s.push_str(&format!("# mc_mean={}\n", fmt_f64(report.mc_mean)));
            s.push_str(&format!("# mc_stderr={}\n", fmt_f64(report.mc_stderr)));
            s.push_str("trial,n,loss");
            for i in 1..=m.k() {
                s.push_str(&format!(",p_hat_{i}"));
            }
            s.push('\n');
            for r in &records {
                s.push_str(&format!("{},{},{}", r.trial, r.n, fmt_f64(r.loss)));
                for x in &r.p_hat {
                    s.push(',');
                    s.push_str(&fmt_f64(*x));
                }
                s.push('\n');
            }
            Ok(s)
        }
        Format::Json => Ok(json_text(&json!({
            "config": echo.into_value(),
            "report": report,
            "trials": records,
        }))),
    }
}

pub fn cmd_bayes_demo(a: &BayesDemoArgs) -> CliResult<String> {
    json_only(a.common.format, "bayes-demo")?;
    let mut echo = Echo::default();
    echo.set("command", "bayes-demo");
    if let Some(k) = a.source.k {
        if a.source.mechanism_file.is_none() && !(k == 2 || k == 3) {
            return Err(CoreError::UnsupportedK(k).into());
        }
    }
    let m = build_mechanism(&a.source, &mut echo)?;
    if !(m.k() == 2 || m.k() == 3) {
        return Err(CoreError::UnsupportedK(m.k()).into());
    }
    if a.resolution < MIN_RESOLUTION {
        return Err(CoreError::ResolutionTooCoarse {
            got: a.resolution,
            min: MIN_RESOLUTION,
        }
        .into());
    }
    let radius = a.radius.unwrap_or_else(|| default_radius(a.n));
    let prior = PriorSpec::with_radius(m.k(), a.n, radius)?;
    echo.set("n", a.n);
    echo.set("trials", a.trials);
    echo.set("seed", a.common.seed);
    echo.set("radius", fmt_f64(radius));
    echo.set("resolution", a.resolution);

    let r = reduce_alphabet(&m);
    let bl = bayes_loss_mc(&r, &prior, a.trials, a.common.seed, a.resolution)?;
    let mut tv = bl.tv.clone();
    tv.sort_by(f64::total_cmp);
    let tv_quantiles = if tv.is_empty() {
        Value::Null
    } else {
        json!({
            "q50": quantile(&tv, 0.5),
            "q90": quantile(&tv, 0.9),
            "q95": quantile(&tv, 0.95),
            "max": tv[tv.len() - 1],
        })
    };
    let below = tv.iter().filter(|&&x| x < 0.05).count() as f64 / tv.len().max(1) as f64;
    Ok(json_text(&json!({
        "config": echo.into_value(),
        "k": m.k(),
        "epsilon": m.epsilon(),
        "n": a.n,
        "radius": radius,
        "trials": bl.trials,
        "loss": bl.loss,
        "stderr": bl.stderr,
        "reference": bl.reference,
        "ratio": bl.ratio,
        "tv_quantiles": tv_quantiles,
        "tv_fraction_below_0_05": below,
    })))
}
