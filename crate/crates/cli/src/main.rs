//! `bandclt`: command-line front end.
//!
//! Exit status is 0 on success, 1 on usage errors and 2 on numerical or
//! runtime failures. Every subcommand accepts `--config FILE`, a flat JSON
//! object keyed by flag names; flags given on the command line win.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bandclt::chebyshev::{bilinear_form_terms, default_quad_order};
use bandclt::combinatorics::{c_lm, dyck_count, gamma, gamma_by_quadrature, monomial_inner_exact};
use bandclt::ensemble::{DistKind, EntryDistribution, MatrixSpec, RngStream};
use bandclt::harness::{
    empirical_inner_products, read_records, resolvent_variance_scan, run_ensemble, stieltjes_compare, write_histogram,
    Bandwidth, RunConfig, RunSummary, RECORDS_FILE, SUMMARY_FILE,
};
use bandclt::quadrature::{
    kernel_grid, kernel_integral, stieltjes_f, variance_total, GridMethod, KernelIntegrand, KernelOptions,
    VarianceOptions, VarianceVariant,
};
use bandclt::semicircle::{esd_report, histogram_csv};
use bandclt::{eigen, kernel_series, sample_matrix, Complex64, TestFunction, VERSION};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<bandclt::Error> for CliError {
    fn from(e: bandclt::Error) -> Self {
        match e {
            bandclt::Error::Argument(_) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Parser, Debug)]
#[command(name = "bandclt", version, about = "Linear eigenvalue statistics of periodic random band matrices")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Table of γ_k, exact and as floating point.
    Gamma(GammaArgs),
    /// Dyck path counts #Dyck(l, m, k).
    Dyck(DyckArgs),
    /// C_{l,m} and the monomial inner products ⟨x^l, x^m⟩.
    Clm(ClmArgs),
    /// Bilinear form ⟨f, g⟩ by Chebyshev series and optionally Monte Carlo.
    Innerprod(InnerArgs),
    /// Kernel F(x, y) at a point or on a grid.
    Kernel(KernelArgs),
    /// The three terms of the limiting variance V(φ).
    Variance(VarianceArgs),
    /// Monte Carlo run of N_n(φ); writes records, summary and histogram.
    Simulate(SimulateArgs),
    /// Recompute diagnostics and histograms from a simulate output directory.
    Report(ReportArgs),
    /// Eigenvalue histogram of one sample and KS distance to the semicircle.
    Esd(EsdArgs),
    /// Variance of Tr G(z) across a grid of (n, b).
    ScanResolvent(ScanArgs),
    /// Stieltjes transform f(z), optionally against Tr G(z)/n.
    Stieltjes(StieltjesArgs),
}

#[derive(Args, Debug, Serialize)]
struct Common {
    /// JSON file with flag values (flat object, keys are flag names).
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
struct Ensemble {
    #[arg(long)]
    n: Option<usize>,
    /// Bandwidth b.
    #[arg(long, conflicts_with = "b_exp")]
    b: Option<usize>,
    /// Bandwidth exponent α, b = round(n^α).
    #[arg(long)]
    b_exp: Option<f64>,
    #[arg(long, default_value = "gaussian")]
    dist: String,
    /// Diagonal variance σ².
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl Ensemble {
    fn n(&self) -> CliResult<usize> {
        self.n.ok_or_else(|| usage("--n is required"))
    }

    fn bandwidth(&self) -> CliResult<Bandwidth> {
        match (self.b, self.b_exp) {
            (Some(b), None) => Ok(Bandwidth::Fixed(b)),
            (None, Some(a)) => Ok(Bandwidth::Exponent(a)),
            _ => Err(usage("exactly one of --b and --b-exp is required")),
        }
    }

    fn dist(&self) -> CliResult<EntryDistribution> {
        let kind: DistKind = self.dist.parse()?;
        Ok(EntryDistribution::new(kind, self.sigma2)?)
    }

    fn spec(&self) -> CliResult<MatrixSpec> {
        let n = self.n()?;
        let b = self.bandwidth()?.resolve(n)?;
        Ok(MatrixSpec::new(n, b, self.dist()?, self.seed)?)
    }
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
struct GammaArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    #[arg(long, default_value_t = 10)]
    max_k: usize,
    /// Add a column computed from the characteristic-function integral.
    #[arg(long)]
    quadrature: bool,
    /// Gauss–Legendre points per panel for the quadrature column.
    #[arg(long, default_value_t = 32)]
    quad_order: usize,
    /// Write the CSV here (plus FILE.json with the resolved config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
struct DyckArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    #[arg(long)]
    l: usize,
    #[arg(long)]
    m: usize,
    /// Single height; all heights when omitted.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
struct ClmArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    #[arg(long, default_value_t = 6)]
    max_deg: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
struct InnerArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    #[arg(long)]
    f: String,
    #[arg(long)]
    g: String,
    /// Chebyshev series truncation.
    #[arg(long, default_value_t = 40)]
    order: usize,
    #[arg(long)]
    quad_order: Option<usize>,
    /// Also estimate ⟨f, g⟩_n by Monte Carlo.
    #[arg(long)]
    empirical: bool,
    #[command(flatten)]
    #[serde(flatten)]
    ensemble: Ensemble,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, env = "BANDCLT_WORKERS", default_value_t = 1)]
    workers: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum MethodArg {
    Series,
    Integral,
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum IntegrandArg {
    Generating,
    Printed,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
struct KernelArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    #[arg(long, allow_hyphen_values = true)]
    x: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    y: Option<f64>,
    /// Comma-separated axis; tabulates F on axis × axis (diagonal skipped).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    grid: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "both")]
    method: MethodArg,
    /// Series truncation K.
    #[arg(long, default_value_t = 200)]
    order: usize,
    #[arg(long, default_value_t = 400.0)]
    s_max: f64,
    #[arg(long, value_enum, default_value = "generating")]
    integrand: IntegrandArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum VariantArg {
    Printed,
    Symmetrized,
    Both,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
struct VarianceArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    #[arg(long)]
    phi: String,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    kappa4: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long, value_enum, default_value = "both")]
    variant: VariantArg,
    #[arg(long, default_value_t = 256)]
    quad_order: usize,
    #[arg(long, default_value_t = 24)]
    grid_order: usize,
    #[arg(long, default_value_t = 400.0)]
    s_max: f64,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
struct SimulateArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    ensemble: Ensemble,
    #[arg(long)]
    phi: String,
    #[arg(long)]
    reps: usize,
    #[arg(long, env = "BANDCLT_WORKERS", default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    out: PathBuf,
    /// Write ms = 0 in every record so record files are byte-reproducible.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
struct ReportArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    /// Output directory of a `simulate` run.
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, default_value_t = 30)]
    bins: usize,
    /// Write the histogram of centered normalized samples here.
    #[arg(long)]
    hist_out: Option<PathBuf>,
    /// Write QQ points here.
    #[arg(long)]
    qq_out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
struct EsdArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    ensemble: Ensemble,
    #[arg(long, default_value_t = 60)]
    bins: usize,
    /// Write the histogram CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
struct ScanArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    #[arg(long, value_delimiter = ',', required = true)]
    n_list: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    b_list: Vec<usize>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    z_re: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    z_im: f64,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value = "gaussian")]
    dist: String,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, env = "BANDCLT_WORKERS", default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
struct StieltjesArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    /// Real parts (comma-separated; missing entries are 0).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    z_re: Vec<f64>,
    /// Imaginary parts (comma-separated).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    z_im: Vec<f64>,
    /// With --n, also sample matrices and compare Tr G(z)/n.
    #[command(flatten)]
    #[serde(flatten)]
    ensemble: Ensemble,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long, env = "BANDCLT_WORKERS", default_value_t = 1)]
    workers: usize,
}

/// Turns `--config FILE` into extra flags placed right after the subcommand,
/// skipping keys already given on the command line.
fn apply_config(args: Vec<String>) -> CliResult<Vec<String>> {
    let pos = args.iter().position(|a| a == "--config" || a.starts_with("--config="));
    let Some(pos) = pos else { return Ok(args) };
    let path = if let Some(p) = args[pos].strip_prefix("--config=") {
        p.to_string()
    } else {
        args.get(pos + 1).cloned().ok_or_else(|| usage("--config needs a file"))?
    };
    let Some(sub_name) = args.get(1).filter(|a| !a.starts_with('-')) else {
        return Err(usage("--config must follow a subcommand"));
    };
    let cmd = Cli::command();
    let sub = cmd.find_subcommand(sub_name).ok_or_else(|| usage(format!("unknown subcommand '{sub_name}'")))?;
    let longs: Vec<String> = sub.get_arguments().filter_map(|a| a.get_long().map(str::to_string)).collect();
    let text = fs::read_to_string(&path).map_err(|e| usage(format!("cannot read config {path}: {e}")))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| usage(format!("config {path} is not valid JSON: {e}")))?;
    let Value::Object(map) = value else {
        return Err(usage(format!("config {path} must be a flat JSON object")));
    };
    let mut extra = Vec::new();
    for (key, v) in map {
        if key == "config" || !longs.contains(&key) {
            return Err(usage(format!("unknown config key '{key}' for '{sub_name}'")));
        }
        let flag = format!("--{key}");
        if args.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}="))) {
            continue;
        }
        let scalar = |v: &Value| -> CliResult<String> {
            match v {
                Value::String(s) => Ok(s.clone()),
                Value::Number(n) => Ok(n.to_string()),
                Value::Bool(b) => Ok(b.to_string()),
                _ => Err(usage(format!("config key '{key}' has an unsupported value"))),
            }
        };
        match &v {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => extra.push(flag),
            Value::Array(items) => {
                let parts: Vec<String> = items.iter().map(scalar).collect::<CliResult<_>>()?;
                extra.push(format!("{flag}={}", parts.join(",")));
            }
            other => extra.push(format!("{flag}={}", scalar(other)?)),
        }
    }
    let mut out = args[..2].to_vec();
    out.extend(extra);
    out.extend(args[2..].iter().cloned());
    Ok(out)
}

fn document(command: &str, config: &impl Serialize, body: Value) -> CliResult<Value> {
    let mut doc = json!({ "command": command, "version": VERSION, "config": serde_json::to_value(config)? });
    if let (Value::Object(d), Value::Object(b)) = (&mut doc, body) {
        d.extend(b);
    }
    Ok(doc)
}

fn print_json(doc: &Value) -> CliResult<()> {
    println!("{}", serde_json::to_string_pretty(doc)?);
    Ok(())
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// CSV to stdout, or to `out` with a `out.json` sidecar carrying the config.
fn emit_csv(command: &str, config: &impl Serialize, csv: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        None => {
            print!("{csv}");
            Ok(())
        }
        Some(path) => {
            write_file(path, csv)?;
            let mut side = path.as_os_str().to_owned();
            side.push(".json");
            let doc = document(command, config, json!({ "data": path.display().to_string() }))?;
            write_file(Path::new(&side), &(serde_json::to_string_pretty(&doc)? + "\n"))
        }
    }
}

fn phi(id: &str) -> CliResult<TestFunction> {
    Ok(TestFunction::parse(id)?)
}

fn cmd_gamma(a: &GammaArgs) -> CliResult<()> {
    if a.max_k == 0 {
        return Err(usage("--max-k must be positive"));
    }
    let mut csv = String::from(if a.quadrature { "k,exact,value,quadrature\n" } else { "k,exact,value\n" });
    for k in 1..=a.max_k {
        let g = gamma(k)?;
        write!(csv, "{k},{g},{}", g.to_f64()).unwrap();
        if a.quadrature {
            write!(csv, ",{}", gamma_by_quadrature(k, a.quad_order)?).unwrap();
        }
        csv.push('\n');
    }
    emit_csv("gamma", a, &csv, a.out.as_deref())
}

fn cmd_dyck(a: &DyckArgs) -> CliResult<()> {
    let ks: Vec<usize> = match a.k {
        Some(k) => vec![k],
        None => (0..=a.l.min(a.m)).collect(),
    };
    let mut csv = String::from("l,m,k,count\n");
    for k in ks {
        writeln!(csv, "{},{},{k},{}", a.l, a.m, dyck_count(a.l, a.m, k)?).unwrap();
    }
    emit_csv("dyck", a, &csv, a.out.as_deref())
}

fn cmd_clm(a: &ClmArgs) -> CliResult<()> {
    let mut csv = String::from("l,m,c_lm_exact,c_lm,inner_exact,inner\n");
    for l in 0..=a.max_deg {
        for m in (0..=a.max_deg).filter(|m| (l + m) % 2 == 0) {
            let c = c_lm(l, m);
            let inner = monomial_inner_exact(l, m);
            writeln!(csv, "{l},{m},{c},{},{inner},{}", c.to_f64(), inner.to_f64()).unwrap();
        }
    }
    emit_csv("clm", a, &csv, a.out.as_deref())
}

fn cmd_innerprod(a: &InnerArgs) -> CliResult<()> {
    let (f, g) = (phi(&a.f)?, phi(&a.g)?);
    let q = a.quad_order.unwrap_or_else(|| default_quad_order(a.order));
    let terms = bilinear_form_terms(|x| f.eval(x), |x| g.eval(x), a.order, q)?;
    let value: Complex64 = terms.iter().sum();
    let mut body = json!({
        "theoretical": {
            "value": [value.re, value.im],
            "order": a.order,
            "quad_order": q,
            "last_term": terms.last().map(|t| t.norm()).unwrap_or(0.0),
        }
    });
    if a.empirical {
        let spec = a.ensemble.spec()?;
        let e = empirical_inner_products(&[(f, g)], &spec, a.reps, a.workers)?[0];
        body["empirical"] = json!({ "n": spec.n, "b": spec.b, "mean": e.mean, "std_error": e.std_error, "reps": e.reps, "failures": e.failures });
    }
    print_json(&document("innerprod", a, body)?)
}

fn kernel_options(a: &KernelArgs) -> KernelOptions {
    KernelOptions {
        s_max: a.s_max,
        integrand: match a.integrand {
            IntegrandArg::Generating => KernelIntegrand::Generating,
            IntegrandArg::Printed => KernelIntegrand::Printed,
        },
        ..KernelOptions::default()
    }
}

fn cmd_kernel(a: &KernelArgs) -> CliResult<()> {
    let opts = kernel_options(a);
    let method = match a.method {
        MethodArg::Series => GridMethod::Series,
        MethodArg::Integral => GridMethod::Integral,
        MethodArg::Both => GridMethod::Both,
    };
    if let Some(axis) = &a.grid {
        if a.x.is_some() || a.y.is_some() {
            return Err(usage("--grid cannot be combined with --x/--y"));
        }
        let grid = kernel_grid(axis, axis, method, a.order, &opts, 1e-8)?;
        let mut csv = String::from("x,y,method,value,error\n");
        for c in &grid.cells {
            writeln!(csv, "{},{},{},{},{}", c.x, c.y, c.method, c.value, c.error).unwrap();
        }
        return emit_csv("kernel", a, &csv, a.out.as_deref());
    }
    let (Some(x), Some(y)) = (a.x, a.y) else {
        return Err(usage("give --x and --y, or --grid"));
    };
    let mut body = json!({ "x": x, "y": y });
    if matches!(a.method, MethodArg::Series | MethodArg::Both) {
        let s = kernel_series(x, y, a.order)?;
        body["series"] = serde_json::to_value(s)?;
    }
    if matches!(a.method, MethodArg::Integral | MethodArg::Both) {
        let v = kernel_integral(x, y, &opts)?;
        body["integral"] = serde_json::to_value(v)?;
    }
    print_json(&document("kernel", a, body)?)
}

fn cmd_variance(a: &VarianceArgs) -> CliResult<()> {
    let f = phi(&a.phi)?;
    let opts = VarianceOptions {
        quad_order: a.quad_order,
        grid_order: a.grid_order,
        kernel: KernelOptions { s_max: a.s_max, ..VarianceOptions::default().kernel },
        ..VarianceOptions::default()
    };
    let run = |v| variance_total(&f, a.kappa4, a.sigma2, v, &opts);
    let body = match a.variant {
        VariantArg::Printed => serde_json::to_value(run(VarianceVariant::Printed)?)?,
        VariantArg::Symmetrized => serde_json::to_value(run(VarianceVariant::Symmetrized)?)?,
        VariantArg::Both => {
            let p = run(VarianceVariant::Printed)?;
            let s = run(VarianceVariant::Symmetrized)?;
            json!({ "kappa_term": p.kappa_term, "sigma_term": p.sigma_term, "printed": p, "symmetrized": s })
        }
    };
    print_json(&document("variance", a, body)?)
}

fn cmd_simulate(a: &SimulateArgs) -> CliResult<()> {
    let n = a.ensemble.n()?;
    let cfg = RunConfig {
        dist: a.ensemble.dist()?,
        workers: a.workers,
        output: Some(a.out.clone()),
        record_timing: !a.no_timing,
        ..RunConfig::new(n, a.ensemble.bandwidth()?, phi(&a.phi)?, a.reps, a.ensemble.seed)
    };
    let s = run_ensemble(&cfg)?;
    let body = json!({
        "output": a.out.display().to_string(),
        "b": s.b,
        "count": s.count,
        "failures": s.failures,
        "mean": s.mean,
        "variance": s.variance,
        "normalized_variance": s.normalized_variance,
        "skewness": s.skewness,
        "kurtosis_ratio": s.kurtosis_ratio,
        "jarque_bera_pvalue": s.normality.as_ref().map(|r| r.jarque_bera_pvalue),
        "wall_time_s": s.wall_time_s,
    });
    print_json(&document("simulate", a, body)?)
}

fn cmd_report(a: &ReportArgs) -> CliResult<()> {
    let summary_path = a.dir.join(SUMMARY_FILE);
    let text = fs::read_to_string(&summary_path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", summary_path.display())))?;
    let stored: RunSummary = serde_json::from_str(&text)?;
    let records = read_records(&a.dir.join(RECORDS_FILE))?;
    let s = RunSummary::from_records(&stored.config, &records)?;
    let rel = |x: f64, y: f64| if x == y { 0.0 } else { (x - y).abs() / x.abs().max(y.abs()) };
    let opt = |x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(x), Some(y)) => rel(x, y),
        (None, None) => 0.0,
        _ => f64::INFINITY,
    };
    let max_rel = [
        rel(s.mean, stored.mean),
        rel(s.variance, stored.variance),
        opt(s.skewness, stored.skewness),
        opt(s.kurtosis_ratio, stored.kurtosis_ratio),
    ]
    .into_iter()
    .fold(0.0f64, f64::max);
    if let Some(p) = &a.hist_out {
        write_histogram(p, &s, a.bins)?;
    }
    if let (Some(p), Some(r)) = (&a.qq_out, &s.normality) {
        write_file(p, &r.qq_csv())?;
    }
    let body = json!({
        "run_config": stored.config,
        "count": s.count,
        "failures": s.failures,
        "mean": s.mean,
        "variance": s.variance,
        "normalized_variance": s.normalized_variance,
        "skewness": s.skewness,
        "excess_kurtosis": s.excess_kurtosis,
        "kurtosis_ratio": s.kurtosis_ratio,
        "normality": s.normality.as_ref().map(|r| json!({
            "jarque_bera_stat": r.jarque_bera_stat,
            "jarque_bera_pvalue": r.jarque_bera_pvalue,
            "ks_stat": r.ks_stat,
        })),
        "max_relative_difference_vs_summary": max_rel,
    });
    print_json(&document("report", a, body)?)
}

fn cmd_esd(a: &EsdArgs) -> CliResult<()> {
    let spec = a.ensemble.spec()?;
    let m = sample_matrix(&spec, &mut RngStream::new(spec.seed, 0))?;
    let r = esd_report(&eigen(&m, false)?, a.bins)?;
    if let Some(p) = &a.out {
        write_file(p, &histogram_csv(&r.histogram))?;
    }
    let body = json!({ "n": spec.n, "b": spec.b, "ks": r.ks, "outside_fraction": r.outside_fraction, "histogram": r.histogram });
    print_json(&document("esd", a, body)?)
}

fn cmd_scan(a: &ScanArgs) -> CliResult<()> {
    let dist = EntryDistribution::new(a.dist.parse()?, a.sigma2)?;
    let z = Complex64::new(a.z_re, a.z_im);
    let cells = resolvent_variance_scan(&a.n_list, &a.b_list, z, a.reps, dist, a.seed, a.workers)?;
    let mut csv = String::from("n,b,reps,variance,std_error,ratio,ratio_std_error\n");
    for c in cells {
        writeln!(csv, "{},{},{},{},{},{},{}", c.n, c.b, c.reps, c.variance, c.std_error, c.ratio, c.ratio_std_error).unwrap();
    }
    emit_csv("scan-resolvent", a, &csv, a.out.as_deref())
}

fn cmd_stieltjes(a: &StieltjesArgs) -> CliResult<()> {
    if a.z_re.len() > a.z_im.len() {
        return Err(usage("more real parts than imaginary parts"));
    }
    let zs: Vec<Complex64> =
        a.z_im.iter().enumerate().map(|(i, &im)| Complex64::new(a.z_re.get(i).copied().unwrap_or(0.0), im)).collect();
    let body = if a.ensemble.n.is_some() {
        let spec = a.ensemble.spec()?;
        json!({ "n": spec.n, "b": spec.b, "comparisons": stieltjes_compare(&spec, &zs, a.reps, a.workers)? })
    } else {
        let values: Vec<Value> = zs
            .iter()
            .map(|&z| {
                let f = stieltjes_f(z)?;
                Ok(json!({ "z": [z.re, z.im], "f": [f.re, f.im], "residual": (2.0 * f * f + z * f + 1.0).norm() }))
            })
            .collect::<CliResult<_>>()?;
        json!({ "values": values })
    };
    print_json(&document("stieltjes", a, body)?)
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.cmd {
        Cmd::Gamma(a) => cmd_gamma(a),
        Cmd::Dyck(a) => cmd_dyck(a),
        Cmd::Clm(a) => cmd_clm(a),
        Cmd::Innerprod(a) => cmd_innerprod(a),
        Cmd::Kernel(a) => cmd_kernel(a),
        Cmd::Variance(a) => cmd_variance(a),
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Report(a) => cmd_report(a),
        Cmd::Esd(a) => cmd_esd(a),
        Cmd::ScanResolvent(a) => cmd_scan(a),
        Cmd::Stieltjes(a) => cmd_stieltjes(a),
    }
}

fn main() -> ExitCode {
    let fail = |e: CliError| match e {
        CliError::Usage(m) => {
            eprintln!("error: {m}");
            eprintln!("run 'bandclt --help' for usage");
            ExitCode::from(1)
        }
        CliError::Runtime(m) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    };
    let args = match apply_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => return fail(e),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}
