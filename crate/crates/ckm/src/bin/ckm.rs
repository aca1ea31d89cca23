//! Command-line front end: distribution estimates, policy-effect curves, and
//! the seeded benchmark study, all emitted as manifest-stamped CSV or JSON.
//!
//! Failures print a JSON error record to stderr and exit with a class code:
//! 2 usage, 3 file parsing, 4 data validation, 5 empty kernel neighborhood,
//! 6 hazard divergence, 7 inference guards, 8 numerics, 9 I/O.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ckm::counterfactual::{
    counterfactual_cdf, policy_effects, rothe_cdf, EmptyNeighborhoodPolicy, HazardMethod,
    PolicyEffectCurves, PolicyEffectOptions,
};
use ckm::data::{CensoredSample, CounterfactualCovariates, Grid};
use ckm::inference::{
    delta_f_variance, delta_lambda_variance, effect_variances_at, km_variance_at, pointwise_ci,
    InfluenceContext,
};
use ckm::io::{
    parse_bandwidth_rule, parse_grid_spec, parse_study_config, read_counterfactual_csv,
    read_grid_file, read_sample_csv, write_output, Cell, OutputFormat, OutputTable, RunManifest,
};
use ckm::kernel::{BandwidthRule, KernelProfile, KernelSpec};
use ckm::simulation::run_study;
use ckm::survival::{kaplan_meier, BeranVariant};
use ckm::{Error, Result};

/// Counterfactual distributions from right-censored durations.
#[derive(Parser)]
#[command(name = "ckm", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a distribution curve on a grid
    Estimate(EstimateArgs),
    /// Factual vs scenario distribution and hazard effects with bands
    Effect(EffectArgs),
    /// Run the seeded benchmark study from a config file
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct SmoothingArgs {
    /// Bandwidth: auto (3 n^{-1/7}) or a positive number
    #[arg(long, default_value = "auto")]
    bandwidth: String,
    /// Kernel profile: quartic4 or epanechnikov
    #[arg(long, default_value = "quartic4")]
    kernel: String,
    /// Conditional transform: exponential or product-limit
    #[arg(long, default_value = "exponential")]
    variant: String,
    /// Empty scenario neighborhoods: fail or drop
    #[arg(long = "on-empty", default_value = "fail")]
    on_empty: String,
}

#[derive(Args)]
struct OutputArgs {
    /// Uniform evaluation grid start:stop:step
    #[arg(long, conflicts_with = "grid_file")]
    grid: Option<String>,
    /// Evaluation times file, one number per line
    #[arg(long = "grid-file")]
    grid_file: Option<PathBuf>,
    /// Result path; stdout when omitted
    #[arg(long)]
    output: Option<PathBuf>,
    /// Result encoding: csv or json
    #[arg(long, default_value = "csv")]
    format: String,
    /// Manifest timestamp; fix it to make output bytes reproducible
    #[arg(long)]
    timestamp: Option<String>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Sample CSV with header y,delta,x1,..,xd
    #[arg(long)]
    input: PathBuf,
    /// Which estimate: km, counterfactual, or rothe
    #[arg(long, default_value = "km")]
    estimator: String,
    /// Scenario covariates CSV (counterfactual and rothe only)
    #[arg(long)]
    counterfactual: Option<PathBuf>,
    #[command(flatten)]
    smoothing: SmoothingArgs,
    /// Two-sided miscoverage of the confidence bands
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Band guard: quantile level of the uncensored durations
    #[arg(long, default_value_t = 0.95)]
    guard: f64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct EffectArgs {
    /// Sample CSV with header y,delta,x1,..,xd
    #[arg(long)]
    input: PathBuf,
    /// Scenario covariates CSV with header x1,..,xd
    #[arg(long)]
    counterfactual: PathBuf,
    #[command(flatten)]
    smoothing: SmoothingArgs,
    /// Hazard transform: neg-log or na-integral
    #[arg(long, default_value = "neg-log")]
    hazard: String,
    /// Two-sided miscoverage of the confidence bands
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Band guard: quantile level of the uncensored durations
    #[arg(long, default_value_t = 0.95)]
    guard: f64,
    /// Project both distribution estimates to nondecreasing curves
    #[arg(long)]
    isotonize: bool,
    /// Truncate the output instead of failing when a hazard diverges
    #[arg(long)]
    truncate_on_divergence: bool,
    /// Scenario rows transform the sample rows one-to-one; adds the
    /// correlated term to the cross covariance
    #[arg(long)]
    xstar_mapped: bool,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Study config file of key = value lines
    #[arg(long)]
    config: PathBuf,
    /// Override the configured replication count
    #[arg(long)]
    reps: Option<usize>,
    /// Override the configured base seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured sizes, e.g. 100,200
    #[arg(long)]
    sizes: Option<String>,
    /// Result path; falls back to the config's output, then stdout
    #[arg(long)]
    output: Option<PathBuf>,
    /// Result encoding: csv or json
    #[arg(long, default_value = "csv")]
    format: String,
    /// Manifest timestamp; fix it to make output bytes reproducible
    #[arg(long)]
    timestamp: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Estimate(args) => cmd_estimate(args),
        Command::Effect(args) => cmd_effect(args),
        Command::Simulate(args) => cmd_simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = exit_code(&err);
            let record = serde_json::json!({ "error": err.to_string(), "code": code });
            eprintln!("{record}");
            ExitCode::from(code)
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Usage(_) => 2,
        Error::Csv(_) | Error::CsvSchema { .. } | Error::Config { .. } => 3,
        Error::EmptySample
        | Error::NegativeDuration { .. }
        | Error::NonBinaryStatus { .. }
        | Error::NonFinite { .. }
        | Error::RaggedCovariates { .. }
        | Error::EmptyCovariates
        | Error::DimensionMismatch { .. }
        | Error::PairedRowsRequired { .. } => 4,
        Error::EmptyNeighborhood { .. } => 5,
        Error::HazardDivergence { .. } => 6,
        Error::GuardViolation { .. } | Error::BeyondGuard { .. } | Error::NoUncensored => 7,
        Error::CurveShape { .. }
        | Error::CurveKnots { .. }
        | Error::CurveValues { .. }
        | Error::EmptyGrid
        | Error::GridPoints { .. }
        | Error::GridRange { .. }
        | Error::GridMismatch { .. }
        | Error::Bandwidth { .. }
        | Error::KernelDimension { .. }
        | Error::InvalidAlpha { .. }
        | Error::QuadratureOrder
        | Error::QuadratureNonConvergence { .. }
        | Error::NaIntegralNeedsCurve => 8,
        Error::Io(_) | Error::Json(_) => 9,
    }
}

fn resolve_grid(out: &OutputArgs) -> Result<Grid> {
    match (&out.grid, &out.grid_file) {
        (Some(spec), None) => parse_grid_spec(spec),
        (None, Some(path)) => read_grid_file(path),
        (None, None) => Err(Error::Usage(
            "provide --grid start:stop:step or --grid-file".into(),
        )),
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    }
}

fn timestamp_or_now(arg: &Option<String>) -> String {
    arg.clone().unwrap_or_else(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
            .to_string()
    })
}

fn grid_description(grid: &Grid) -> String {
    let points = grid.points();
    match grid.step() {
        Some(step) => format!("{}:{}:{}", points[0], points[points.len() - 1], step),
        None => format!("{} explicit points", points.len()),
    }
}

fn parse_policy(name: &str) -> Result<EmptyNeighborhoodPolicy> {
    match name {
        "fail" => Ok(EmptyNeighborhoodPolicy::Fail),
        "drop" => Ok(EmptyNeighborhoodPolicy::Drop),
        other => Err(Error::Usage(format!(
            "unknown neighborhood policy `{other}` (expected fail or drop)"
        ))),
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) || !alpha.is_finite() {
        return Err(Error::InvalidAlpha { value: alpha });
    }
    Ok(())
}

struct Smoothing {
    h: f64,
    spec: KernelSpec,
    variant: BeranVariant,
    policy: EmptyNeighborhoodPolicy,
    kernel: KernelProfile,
}

impl Smoothing {
    fn resolve(args: &SmoothingArgs, sample: &CensoredSample) -> Result<Self> {
        let kernel = KernelProfile::from_name(&args.kernel)?;
        Ok(Smoothing {
            h: parse_bandwidth_rule(&args.bandwidth)?.resolve(sample.len())?,
            spec: KernelSpec::new(kernel, sample.dim())?,
            variant: BeranVariant::from_name(&args.variant)?,
            policy: parse_policy(&args.on_empty)?,
            kernel,
        })
    }
}

/// Lower/upper band columns; entries are NaN where the guard refuses
/// inference (NaN renders as null in JSON).
struct Bands {
    lo: Vec<f64>,
    hi: Vec<f64>,
    skipped: usize,
    floored: usize,
}

impl Bands {
    fn with_capacity(len: usize) -> Self {
        Bands {
            lo: Vec::with_capacity(len),
            hi: Vec::with_capacity(len),
            skipped: 0,
            floored: 0,
        }
    }

    fn push(&mut self, interval: (f64, f64)) {
        self.lo.push(interval.0);
        self.hi.push(interval.1);
    }

    fn skip(&mut self) {
        self.lo.push(f64::NAN);
        self.hi.push(f64::NAN);
        self.skipped += 1;
    }
}

fn guard_refused(err: &Error) -> bool {
    matches!(
        err,
        Error::BeyondGuard { .. } | Error::GuardViolation { .. }
    )
}

fn km_bands(ctx: &InfluenceContext, ts: &[f64], f: &[f64], alpha: f64) -> Result<Bands> {
    let mut bands = Bands::with_capacity(ts.len());
    for (k, &t) in ts.iter().enumerate() {
        match km_variance_at(ctx, t) {
            Ok(var) => bands.push(pointwise_ci(f[k], var, ctx.n(), alpha)?),
            Err(ref err) if guard_refused(err) => bands.skip(),
            Err(err) => return Err(err),
        }
    }
    Ok(bands)
}

fn counterfactual_bands(
    ctx: &InfluenceContext,
    ts: &[f64],
    f: &[f64],
    alpha: f64,
) -> Result<Bands> {
    let mut bands = Bands::with_capacity(ts.len());
    for (k, &t) in ts.iter().enumerate() {
        match effect_variances_at(ctx, t, false) {
            Ok((s11, _, _)) => bands.push(pointwise_ci(f[k], s11, ctx.n(), alpha)?),
            Err(ref err) if guard_refused(err) => bands.skip(),
            Err(err) => return Err(err),
        }
    }
    Ok(bands)
}

fn warn_skipped(bands: &Bands, what: &str) {
    if bands.skipped > 0 {
        eprintln!(
            "warning: {} of {} {what} bands beyond the inference guard; cells are NaN",
            bands.skipped,
            bands.lo.len()
        );
    }
    if bands.floored > 0 {
        eprintln!(
            "warning: {} of {} {what} variance estimates are negative; those bands collapse to the point estimate",
            bands.floored,
            bands.lo.len()
        );
    }
}

/// Builds the influence context behind the bands, degrading to no bands with
/// a warning when the scenario is unpaired or a sample neighborhood is empty.
fn band_context(
    sample: &CensoredSample,
    xstar: &CounterfactualCovariates,
    smoothing: &Smoothing,
    guard: f64,
) -> Result<Option<InfluenceContext>> {
    if xstar.len() != sample.len() {
        eprintln!(
            "warning: {} scenario rows do not pair one-to-one with the {} observations; bands omitted",
            xstar.len(),
            sample.len()
        );
        return Ok(None);
    }
    match InfluenceContext::with_conditionals(
        sample,
        xstar,
        smoothing.h,
        &smoothing.spec,
        smoothing.variant,
        guard,
    ) {
        Ok(ctx) => Ok(Some(ctx)),
        Err(Error::EmptyNeighborhood { row }) => {
            let at = row.map_or_else(String::new, |r| format!(" at row {r}"));
            eprintln!("warning: empty sample neighborhood{at}; bands omitted");
            Ok(None)
        }
        Err(err) => Err(err),
    }
}

fn cmd_estimate(args: &EstimateArgs) -> Result<()> {
    check_alpha(args.alpha)?;
    let format = OutputFormat::from_name(&args.out.format)?;
    let sample = read_sample_csv(&args.input)?;
    let grid = resolve_grid(&args.out)?;
    let ts = grid.points();
    let mut manifest = RunManifest::new("estimate", &timestamp_or_now(&args.out.timestamp));
    manifest.input = Some(args.input.display().to_string());
    manifest.grid = Some(grid_description(&grid));
    manifest.alpha = Some(args.alpha);

    let mut table;
    match args.estimator.as_str() {
        "km" => {
            let f = kaplan_meier(&sample).eval_on(ts);
            let ctx = InfluenceContext::unconditional(&sample, args.guard)?;
            let bands = km_bands(&ctx, ts, &f, args.alpha)?;
            warn_skipped(&bands, "distribution");
            table = curve_table(ts, &f, Some(&bands));
        }
        name @ ("counterfactual" | "rothe") => {
            let path = args.counterfactual.as_ref().ok_or_else(|| {
                Error::Usage(format!("--counterfactual is required for `{name}`"))
            })?;
            let xstar = read_counterfactual_csv(path, Some(sample.dim()))?;
            let smoothing = Smoothing::resolve(&args.smoothing, &sample)?;
            manifest.counterfactual = Some(path.display().to_string());
            manifest.kernel = Some(smoothing.kernel.name().into());
            manifest.bandwidth = Some(smoothing.h.to_string());
            let est = if name == "counterfactual" {
                counterfactual_cdf(
                    &sample,
                    &xstar,
                    ts,
                    smoothing.h,
                    &smoothing.spec,
                    smoothing.variant,
                    smoothing.policy,
                )?
            } else {
                rothe_cdf(
                    &sample,
                    &xstar,
                    ts,
                    smoothing.h,
                    &smoothing.spec,
                    smoothing.policy,
                )?
            };
            if est.dropped_rows > 0 {
                eprintln!(
                    "warning: dropped {} scenario rows with empty neighborhoods",
                    est.dropped_rows
                );
            }
            // the censoring-blind comparator carries no influence theory
            let bands = if name == "counterfactual" {
                match band_context(&sample, &xstar, &smoothing, args.guard)? {
                    Some(ctx) => {
                        let bands = counterfactual_bands(&ctx, ts, &est.values, args.alpha)?;
                        warn_skipped(&bands, "distribution");
                        Some(bands)
                    }
                    None => None,
                }
            } else {
                None
            };
            table = curve_table(ts, &est.values, bands.as_ref());
        }
        other => {
            return Err(Error::Usage(format!(
                "unknown estimator `{other}` (expected km, counterfactual or rothe)"
            )))
        }
    }
    stamp_estimator(&mut table, &args.estimator);
    write_output(args.out.output.as_deref(), &manifest, &table, format)
}

fn curve_table(ts: &[f64], f: &[f64], bands: Option<&Bands>) -> OutputTable {
    let mut columns = vec!["t".to_string(), "f".to_string()];
    if bands.is_some() {
        columns.push("f_lo".into());
        columns.push("f_hi".into());
    }
    let mut table = OutputTable::new(columns);
    for k in 0..ts.len() {
        let mut row = vec![Cell::Real(ts[k]), Cell::Real(f[k])];
        if let Some(bands) = bands {
            row.push(Cell::Real(bands.lo[k]));
            row.push(Cell::Real(bands.hi[k]));
        }
        table.push(row);
    }
    table
}

fn stamp_estimator(table: &mut OutputTable, estimator: &str) {
    table.columns.push("estimator".into());
    for row in &mut table.rows {
        row.push(Cell::Text(estimator.to_string()));
    }
}

struct EffectBands {
    delta_f: Bands,
    delta_lambda: Bands,
}

fn effect_bands(
    ctx: &InfluenceContext,
    curves: &PolicyEffectCurves,
    mapped: bool,
    alpha: f64,
) -> Result<EffectBands> {
    let ts = curves.grid.points();
    let mut delta_f = Bands::with_capacity(ts.len());
    let mut delta_lambda = Bands::with_capacity(ts.len());
    for (k, &t) in ts.iter().enumerate() {
        match effect_variances_at(ctx, t, mapped) {
            Ok((s11, s22, s12)) => {
                let var = delta_f_variance(s11, s22, s12);
                if var < 0.0 {
                    delta_f.floored += 1;
                }
                delta_f.push(pointwise_ci(curves.delta_f[k], var, ctx.n(), alpha)?);
                match delta_lambda_variance(
                    s11,
                    s22,
                    s12,
                    curves.f_star[k],
                    curves.f_base[k],
                    t,
                ) {
                    Ok(var) => {
                        if var < 0.0 {
                            delta_lambda.floored += 1;
                        }
                        delta_lambda
                            .push(pointwise_ci(curves.delta_lambda[k], var, ctx.n(), alpha)?);
                    }
                    Err(ref err) if guard_refused(err) => delta_lambda.skip(),
                    Err(err) => return Err(err),
                }
            }
            Err(ref err) if guard_refused(err) => {
                delta_f.skip();
                delta_lambda.skip();
            }
            Err(err) => return Err(err),
        }
    }
    Ok(EffectBands {
        delta_f,
        delta_lambda,
    })
}

fn cmd_effect(args: &EffectArgs) -> Result<()> {
    check_alpha(args.alpha)?;
    let format = OutputFormat::from_name(&args.out.format)?;
    let sample = read_sample_csv(&args.input)?;
    let xstar = read_counterfactual_csv(&args.counterfactual, Some(sample.dim()))?;
    let grid = resolve_grid(&args.out)?;
    let smoothing = Smoothing::resolve(&args.smoothing, &sample)?;
    let hazard = HazardMethod::from_name(&args.hazard)?;
    let options = PolicyEffectOptions {
        variant: smoothing.variant,
        hazard,
        policy: smoothing.policy,
        isotonize: args.isotonize,
        truncate_on_divergence: args.truncate_on_divergence,
    };
    let curves = policy_effects(&sample, &xstar, &grid, smoothing.h, &smoothing.spec, &options)?;
    if curves.truncated {
        eprintln!(
            "warning: hazard diverged; output truncated to {} of {} grid points",
            curves.grid.len(),
            grid.len()
        );
    }
    if curves.dropped_rows > 0 {
        eprintln!(
            "warning: dropped {} scenario rows with empty neighborhoods",
            curves.dropped_rows
        );
    }
    let bands = match band_context(&sample, &xstar, &smoothing, args.guard)? {
        Some(ctx) => {
            let bands = effect_bands(&ctx, &curves, args.xstar_mapped, args.alpha)?;
            warn_skipped(&bands.delta_f, "distribution-effect");
            warn_skipped(&bands.delta_lambda, "hazard-effect");
            Some(bands)
        }
        None => None,
    };

    let mut manifest = RunManifest::new("effect", &timestamp_or_now(&args.out.timestamp));
    manifest.input = Some(args.input.display().to_string());
    manifest.counterfactual = Some(args.counterfactual.display().to_string());
    manifest.kernel = Some(smoothing.kernel.name().into());
    manifest.bandwidth = Some(smoothing.h.to_string());
    manifest.grid = Some(grid_description(&grid));
    manifest.hazard = Some(hazard.name().into());
    manifest.alpha = Some(args.alpha);

    let mut columns = vec!["t".to_string(), "f_star".into(), "f_base".into(), "delta_f".into()];
    if bands.is_some() {
        columns.push("delta_f_lo".into());
        columns.push("delta_f_hi".into());
    }
    columns.push("lambda_star".into());
    columns.push("lambda_base".into());
    columns.push("delta_lambda".into());
    if bands.is_some() {
        columns.push("delta_lambda_lo".into());
        columns.push("delta_lambda_hi".into());
    }
    let mut table = OutputTable::new(columns);
    for (k, &t) in curves.grid.points().iter().enumerate() {
        let mut row = vec![
            Cell::Real(t),
            Cell::Real(curves.f_star[k]),
            Cell::Real(curves.f_base[k]),
            Cell::Real(curves.delta_f[k]),
        ];
        if let Some(bands) = &bands {
            row.push(Cell::Real(bands.delta_f.lo[k]));
            row.push(Cell::Real(bands.delta_f.hi[k]));
        }
        row.push(Cell::Real(curves.lambda_star[k]));
        row.push(Cell::Real(curves.lambda_base[k]));
        row.push(Cell::Real(curves.delta_lambda[k]));
        if let Some(bands) = &bands {
            row.push(Cell::Real(bands.delta_lambda.lo[k]));
            row.push(Cell::Real(bands.delta_lambda.hi[k]));
        }
        table.push(row);
    }
    write_output(args.out.output.as_deref(), &manifest, &table, format)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let format = OutputFormat::from_name(&args.format)?;
    let file = parse_study_config(&args.config)?;
    let mut config = file.config;
    if let Some(reps) = args.reps {
        config.replications = reps;
    }
    if let Some(seed) = args.seed {
        config.base_seed = seed;
    }
    if let Some(sizes) = &args.sizes {
        config.sizes = sizes
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Usage(format!("`{tok}` is not a sample size")))
            })
            .collect::<Result<_>>()?;
    }
    let report = run_study(&config)?;

    let mut manifest = RunManifest::new("simulate", &timestamp_or_now(&args.timestamp));
    manifest.config = Some(args.config.display().to_string());
    manifest.kernel = Some(config.kernel.name().into());
    manifest.bandwidth = Some(match config.bandwidth {
        BandwidthRule::Auto => "auto".into(),
        BandwidthRule::Fixed(h) => h.to_string(),
    });
    manifest.grid = Some(grid_description(&config.grid));
    manifest.hazard = Some(config.hazard.name().into());
    manifest.seed = Some(config.base_seed);

    let mut table = OutputTable::new(
        ["target", "n", "estimator", "miae", "rmise", "replications_used", "replications_failed"]
            .map(String::from)
            .to_vec(),
    );
    for row in &report.rows {
        table.push(vec![
            Cell::Text(row.target.name().into()),
            Cell::Int(row.n as u64),
            Cell::Text(row.estimator.name().into()),
            Cell::Real(row.miae),
            Cell::Real(row.rmise),
            Cell::Int(row.replications_used as u64),
            Cell::Int(row.replications_failed as u64),
        ]);
    }
    let out_path = args.output.clone().or(file.output);
    write_output(out_path.as_deref(), &manifest, &table, format)
}
