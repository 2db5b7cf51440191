//! Batch CLI for the WLRTR restoration toolkit.
//!
//! Subcommands: `denoise`, `destripe`, `deblur`, `superres`, `degrade`,
//! `metrics`. Tensors travel in the HST1 binary format (`--raw` ingests
//! headerless band-sequential files); kernels and spectral responses are
//! whitespace-separated text matrices. Each solver run writes the output
//! tensor plus a text run-log with the parameters, per-iteration objective
//! values, and wall time.
//!
//! Runs are deterministic given inputs, flags, and seed: group work is
//! parallel but aggregation order is fixed, so `--threads` only affects
//! speed, and `--threads 1` forces fully sequential execution.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use wlrtr_core::{
    add_gaussian_noise, add_stripes, column_mean_bias, convolve, deblur_with_log,
    denoise_with_log, destripe_with_log, downsample_spatial, downsample_spectral, load_matrix_text,
    load_raw_tensor, load_tensor, make_kernel, quality_report, save_tensor, superres_with_log,
    DeblurConfig, DegradationSpec, DenoiseConfig, DestripeConfig, GroupingConfig, KernelSpec, Psf,
    ShrinkParams, SolverLog, SpectralResponse, StripeMode, SuperresConfig, Tensor3,
};

#[derive(Parser, Debug)]
#[command(
    name = "wlrtr",
    about = "Weighted low-rank tensor recovery for hyperspectral image restoration",
    version
)]
struct Cli {
    /// Worker threads (0 = all cores, 1 = fully sequential).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// key=value config file whose entries override the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Remove white Gaussian noise.
    Denoise(DenoiseArgs),
    /// Remove mixed random + stripe noise; also writes the stripe component.
    Destripe(DestripeArgs),
    /// Non-blind deconvolution with a known kernel.
    Deblur(DeblurArgs),
    /// Fuse a low-resolution tensor with a high-resolution spectral guide.
    Superres(SuperresArgs),
    /// Simulate degradations (noise, stripes, blur, downsampling).
    Degrade(DegradeArgs),
    /// Print PSNR / SSIM / ERGAS / SAM against a reference tensor.
    Metrics(MetricsArgs),
}

#[derive(Args, Debug, Clone)]
struct RawSpec {
    /// Interpret the input as headerless band-sequential data:
    /// rows,cols,bands,dtype (dtype 0 = f32, 1 = f64).
    #[arg(long, value_name = "R,C,B,DTYPE")]
    raw: Option<String>,
}

#[derive(Args, Debug, Clone)]
struct GroupingArgs {
    /// Patch size m.
    #[arg(long, default_value_t = 7)]
    patch: usize,
    /// Matched neighbors k per key cubic.
    #[arg(long, default_value_t = 140)]
    neighbors: usize,
    /// Search window radius.
    #[arg(long, default_value_t = 20)]
    window: usize,
    /// Step between key cubics.
    #[arg(long, default_value_t = 4)]
    stride: usize,
}

impl GroupingArgs {
    fn build(&self) -> GroupingConfig {
        GroupingConfig {
            patch: self.patch,
            k: self.neighbors,
            window: self.window,
            stride: self.stride,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct ShrinkArgs {
    /// Weight scale constant of the shrinkage rule. On the 8-bit scale,
    /// values around 8-16 give noise-floor thresholds near 2-3 sigma.
    #[arg(long, default_value_t = 0.04)]
    c: f64,
    /// Division guard of the weight rule.
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
}

impl ShrinkArgs {
    fn build(&self, sigma: f64) -> ShrinkParams {
        ShrinkParams {
            c: self.c,
            eps: self.eps,
            sigma,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct KernelArgs {
    /// Text matrix file holding the blur kernel.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["gaussian", "uniform"])]
    kernel: Option<PathBuf>,
    /// Gaussian kernel: size,std.
    #[arg(long, value_name = "SIZE,STD", conflicts_with = "uniform")]
    gaussian: Option<String>,
    /// Uniform kernel: size.
    #[arg(long, value_name = "SIZE")]
    uniform: Option<usize>,
}

impl KernelArgs {
    fn build(&self) -> Result<Psf> {
        if let Some(path) = &self.kernel {
            let m = load_matrix_text(path)?;
            return Ok(Psf::normalized(m)?);
        }
        if let Some(spec) = &self.gaussian {
            let (size, std) = parse_pair::<usize, f64>(spec, "gaussian")?;
            return Ok(make_kernel(&KernelSpec::Gaussian { size, std })?);
        }
        if let Some(size) = self.uniform {
            return Ok(make_kernel(&KernelSpec::Uniform { size })?);
        }
        Ok(Psf::delta())
    }

    fn describe(&self) -> String {
        if let Some(p) = &self.kernel {
            format!("file:{}", p.display())
        } else if let Some(g) = &self.gaussian {
            format!("gaussian:{}", g)
        } else if let Some(u) = self.uniform {
            format!("uniform:{}", u)
        } else {
            "delta".into()
        }
    }
}

#[derive(Args, Debug)]
struct DenoiseArgs {
    input: PathBuf,
    output: PathBuf,
    /// Noise standard deviation (8-bit scale).
    #[arg(long)]
    sigma: f64,
    /// Prior aggregation weight.
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    /// Outer iterations.
    #[arg(long, default_value_t = 4)]
    iters: usize,
    /// Noise decay between iterations.
    #[arg(long, default_value_t = 0.9)]
    sigma_decay: f64,
    #[command(flatten)]
    grouping: GroupingArgs,
    #[command(flatten)]
    shrink: ShrinkArgs,
    #[command(flatten)]
    raw: RawSpec,
    /// Run-log path (default: OUTPUT.log).
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DestripeArgs {
    input: PathBuf,
    output: PathBuf,
    /// Random-noise standard deviation (8-bit scale).
    #[arg(long)]
    sigma: f64,
    /// Stripe column-norm threshold (default 10 * sigma * sqrt(rows)).
    #[arg(long)]
    rho: Option<f64>,
    /// Treat stripes as horizontal instead of vertical.
    #[arg(long, default_value_t = false)]
    horizontal: bool,
    /// Where to write the stripe component tensor.
    #[arg(long)]
    stripes_out: Option<PathBuf>,
    /// Prior aggregation weight.
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    /// Alternations between stripe and image updates.
    #[arg(long, default_value_t = 4)]
    iters: usize,
    /// Noise decay between iterations.
    #[arg(long, default_value_t = 0.9)]
    sigma_decay: f64,
    #[command(flatten)]
    grouping: GroupingArgs,
    #[command(flatten)]
    shrink: ShrinkArgs,
    #[command(flatten)]
    raw: RawSpec,
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DeblurArgs {
    input: PathBuf,
    output: PathBuf,
    /// Noise standard deviation of the blurred observation.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Prior aggregation weight.
    #[arg(long, default_value_t = 1e-8)]
    eta: f64,
    /// Initial ADMM penalty.
    #[arg(long, default_value_t = 1e-3)]
    alpha0: f64,
    /// Penalty growth factor.
    #[arg(long, default_value_t = 1.5)]
    delta: f64,
    /// Outer ADMM iterations.
    #[arg(long, default_value_t = 10)]
    iters: usize,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    grouping: GroupingArgs,
    #[command(flatten)]
    shrink: ShrinkArgs,
    #[command(flatten)]
    raw: RawSpec,
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SuperresArgs {
    /// Low spatial-resolution input tensor.
    input: PathBuf,
    /// High-resolution, spectrally reduced guide tensor.
    guide: PathBuf,
    output: PathBuf,
    /// Spatial downsampling factor of the input.
    #[arg(long)]
    scale: usize,
    /// Spectral response matrix file (rows = guide channels); when absent, a
    /// contiguous band-average response is assumed.
    #[arg(long)]
    response: Option<PathBuf>,
    /// Noise standard deviation of the observations.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Prior aggregation weight.
    #[arg(long, default_value_t = 1e-5)]
    eta: f64,
    /// Initial spatial penalty.
    #[arg(long, default_value_t = 1e-3)]
    beta0: f64,
    /// Initial spectral penalty.
    #[arg(long, default_value_t = 1e-3)]
    gamma0: f64,
    /// Penalty growth factor.
    #[arg(long, default_value_t = 1.5)]
    delta: f64,
    /// Outer ADMM iterations.
    #[arg(long, default_value_t = 15)]
    iters: usize,
    /// Conjugate-gradient relative residual target.
    #[arg(long, default_value_t = 1e-6)]
    cg_tol: f64,
    /// Conjugate-gradient iteration cap.
    #[arg(long, default_value_t = 200)]
    cg_max_iters: usize,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    grouping: GroupingArgs,
    #[command(flatten)]
    shrink: ShrinkArgs,
    #[command(flatten)]
    raw: RawSpec,
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DegradeArgs {
    input: PathBuf,
    output: PathBuf,
    /// Gaussian noise standard deviation.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Fraction of columns striped per band.
    #[arg(long, default_value_t = 0.0)]
    stripe_fraction: f64,
    /// Stripe amplitude.
    #[arg(long, default_value_t = 50.0)]
    stripe_amp: f64,
    /// additive or multiplicative.
    #[arg(long, default_value = "additive")]
    stripe_mode: String,
    /// Spatial downsampling factor.
    #[arg(long, default_value_t = 1)]
    scale: usize,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    raw: RawSpec,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    /// Tensor under evaluation.
    input: PathBuf,
    /// Reference tensor.
    reference: PathBuf,
    /// ERGAS scale factor (1 outside super-resolution).
    #[arg(long, default_value_t = 1)]
    scale: usize,
    /// Write per-band PSNR as CSV to this path.
    #[arg(long)]
    per_band: Option<PathBuf>,
    /// Also print per-band/per-column stripe bias energy against the reference.
    #[arg(long, default_value_t = false)]
    stripe_bias: bool,
}

/// Entry point; returns the process exit code.
pub fn run_cli(argv: &[String]) -> i32 {
    let mut cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders help/version on stdout and usage errors on stderr.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(path) = cli.config.clone() {
        if let Err(e) = apply_config_file(&mut cli, &path) {
            eprintln!("error: {:#}", e);
            return 2;
        }
    }
    let threads = cli.threads;
    let run = || match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {:#}", e);
            1
        }
    };
    if threads == 0 {
        run()
    } else {
        match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(run),
            Err(e) => {
                eprintln!("error: {}", e);
                1
            }
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Denoise(args) => run_denoise(args),
        Command::Destripe(args) => run_destripe(args),
        Command::Deblur(args) => run_deblur(args),
        Command::Superres(args) => run_superres(args),
        Command::Degrade(args) => run_degrade(args),
        Command::Metrics(args) => run_metrics(args),
    }
}

// --- config file -----------------------------------------------------------

fn parse_config_entries(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("config line {}: expected key=value", lineno + 1))?;
        entries.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(entries)
}

macro_rules! set_from_config {
    ($key:expr, $value:expr; $($name:literal => $slot:expr),+ $(,)?) => {
        match $key {
            $($name => {
                $slot = $value.parse().map_err(|e| {
                    anyhow!("config key '{}': cannot parse '{}' ({})", $key, $value, e)
                })?;
                return Ok(());
            })+
            _ => {}
        }
    };
}

fn apply_config_file(cli: &mut Cli, path: &Path) -> Result<()> {
    for (key, value) in parse_config_entries(path)? {
        apply_config_entry(cli, &key, &value)
            .with_context(|| format!("config {}", path.display()))?;
    }
    Ok(())
}

fn apply_config_entry(cli: &mut Cli, key: &str, value: &str) -> Result<()> {
    set_from_config!(key, value; "threads" => cli.threads);
    match &mut cli.command {
        Command::Denoise(a) => {
            set_from_config!(key, value;
                "sigma" => a.sigma, "eta" => a.eta, "iters" => a.iters,
                "sigma-decay" => a.sigma_decay,
                "patch" => a.grouping.patch, "neighbors" => a.grouping.neighbors,
                "window" => a.grouping.window, "stride" => a.grouping.stride,
                "c" => a.shrink.c, "eps" => a.shrink.eps,
            );
        }
        Command::Destripe(a) => {
            if key == "rho" {
                a.rho = Some(value.parse()?);
                return Ok(());
            }
            set_from_config!(key, value;
                "sigma" => a.sigma, "eta" => a.eta, "iters" => a.iters,
                "sigma-decay" => a.sigma_decay, "horizontal" => a.horizontal,
                "patch" => a.grouping.patch, "neighbors" => a.grouping.neighbors,
                "window" => a.grouping.window, "stride" => a.grouping.stride,
                "c" => a.shrink.c, "eps" => a.shrink.eps,
            );
        }
        Command::Deblur(a) => {
            set_from_config!(key, value;
                "sigma" => a.sigma, "eta" => a.eta, "iters" => a.iters,
                "alpha0" => a.alpha0, "delta" => a.delta,
                "patch" => a.grouping.patch, "neighbors" => a.grouping.neighbors,
                "window" => a.grouping.window, "stride" => a.grouping.stride,
                "c" => a.shrink.c, "eps" => a.shrink.eps,
            );
        }
        Command::Superres(a) => {
            set_from_config!(key, value;
                "sigma" => a.sigma, "eta" => a.eta, "iters" => a.iters,
                "beta0" => a.beta0, "gamma0" => a.gamma0, "delta" => a.delta,
                "scale" => a.scale, "cg-tol" => a.cg_tol, "cg-max-iters" => a.cg_max_iters,
                "patch" => a.grouping.patch, "neighbors" => a.grouping.neighbors,
                "window" => a.grouping.window, "stride" => a.grouping.stride,
                "c" => a.shrink.c, "eps" => a.shrink.eps,
            );
        }
        Command::Degrade(a) => {
            if key == "stripe-mode" {
                a.stripe_mode = value.to_string();
                return Ok(());
            }
            set_from_config!(key, value;
                "sigma" => a.sigma, "stripe-fraction" => a.stripe_fraction,
                "stripe-amp" => a.stripe_amp, "scale" => a.scale, "seed" => a.seed,
            );
        }
        Command::Metrics(a) => {
            set_from_config!(key, value; "scale" => a.scale);
        }
    }
    bail!("unknown config key '{}'", key);
}

// --- shared helpers ---------------------------------------------------------

fn parse_pair<A: std::str::FromStr, B: std::str::FromStr>(s: &str, what: &str) -> Result<(A, B)>
where
    A::Err: std::fmt::Display,
    B::Err: std::fmt::Display,
{
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| anyhow!("--{} expects two comma-separated values", what))?;
    Ok((
        a.trim()
            .parse::<A>()
            .map_err(|e| anyhow!("--{}: {}", what, e))?,
        b.trim()
            .parse::<B>()
            .map_err(|e| anyhow!("--{}: {}", what, e))?,
    ))
}

fn load_input(path: &Path, raw: &RawSpec) -> Result<Tensor3> {
    let t = match &raw.raw {
        Some(spec) => {
            let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
            if parts.len() != 4 {
                bail!("--raw expects rows,cols,bands,dtype");
            }
            let rows: usize = parts[0].parse().context("--raw rows")?;
            let cols: usize = parts[1].parse().context("--raw cols")?;
            let bands: usize = parts[2].parse().context("--raw bands")?;
            let dtype: u8 = parts[3].parse().context("--raw dtype")?;
            load_raw_tensor(path, rows, cols, bands, dtype)?
        }
        None => load_tensor(path)?,
    };
    Ok(t)
}

fn transpose_rows_cols(t: &Tensor3) -> Tensor3 {
    Tensor3::from_fn(t.cols(), t.rows(), t.bands(), |i, j, k| t.get(j, i, k))
}

struct RunLog {
    lines: Vec<String>,
}

impl RunLog {
    fn new(command: &str) -> Self {
        Self {
            lines: vec![format!("command: {}", command)],
        }
    }

    fn param(&mut self, key: &str, value: impl std::fmt::Display) {
        self.lines.push(format!("{}: {}", key, value));
    }

    fn solver(&mut self, log: &SolverLog) {
        for stat in &log.iterations {
            self.lines.push(format!(
                "iter {} objective {:.9e} sigma {:.4}",
                stat.iteration, stat.objective, stat.sigma
            ));
        }
        self.lines
            .push(format!("wall_seconds: {:.3}", log.wall.as_secs_f64()));
    }

    fn write(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        for line in &self.lines {
            writeln!(text, "{}", line).unwrap();
        }
        std::fs::write(path, text).with_context(|| format!("writing log {}", path.display()))?;
        Ok(())
    }
}

fn log_path(explicit: &Option<PathBuf>, output: &Path) -> PathBuf {
    explicit.clone().unwrap_or_else(|| {
        let mut p = output.as_os_str().to_owned();
        p.push(".log");
        PathBuf::from(p)
    })
}

fn grouping_params(log: &mut RunLog, g: &GroupingArgs, s: &ShrinkArgs) {
    log.param("patch", g.patch);
    log.param("neighbors", g.neighbors);
    log.param("window", g.window);
    log.param("stride", g.stride);
    log.param("c", s.c);
    log.param("eps", s.eps);
}

// --- subcommand runners ------------------------------------------------------

fn run_denoise(args: DenoiseArgs) -> Result<()> {
    let y = load_input(&args.input, &args.raw)?;
    let cfg = DenoiseConfig {
        grouping: args.grouping.build(),
        shrink: args.shrink.build(args.sigma),
        eta: args.eta,
        outer_iters: args.iters,
        sigma_decay: args.sigma_decay,
        ..Default::default()
    };
    let (x, log) = denoise_with_log(&y, &cfg)?;
    save_tensor(&args.output, &x)?;

    let mut run = RunLog::new("denoise");
    run.param("input", args.input.display());
    run.param("dims", format!("{:?}", y.dims()));
    run.param("sigma", args.sigma);
    run.param("eta", args.eta);
    run.param("iters", args.iters);
    run.param("sigma-decay", args.sigma_decay);
    grouping_params(&mut run, &args.grouping, &args.shrink);
    run.solver(&log);
    run.write(&log_path(&args.log, &args.output))
}

fn run_destripe(args: DestripeArgs) -> Result<()> {
    let mut y = load_input(&args.input, &args.raw)?;
    if args.horizontal {
        y = transpose_rows_cols(&y);
    }
    let rho = args
        .rho
        .unwrap_or_else(|| DestripeConfig::default_rho(args.sigma, y.rows()));
    let cfg = DestripeConfig {
        denoise: DenoiseConfig {
            grouping: args.grouping.build(),
            shrink: args.shrink.build(args.sigma),
            eta: args.eta,
            sigma_decay: args.sigma_decay,
            ..Default::default()
        },
        rho,
        outer_iters: args.iters,
    };
    let (mut x, mut e, log) = destripe_with_log(&y, &cfg)?;
    if args.horizontal {
        x = transpose_rows_cols(&x);
        e = transpose_rows_cols(&e);
    }
    save_tensor(&args.output, &x)?;
    if let Some(path) = &args.stripes_out {
        save_tensor(path, &e)?;
    }

    let mut run = RunLog::new("destripe");
    run.param("input", args.input.display());
    run.param("dims", format!("{:?}", x.dims()));
    run.param("sigma", args.sigma);
    run.param("rho", rho);
    run.param("horizontal", args.horizontal);
    run.param("eta", args.eta);
    run.param("iters", args.iters);
    grouping_params(&mut run, &args.grouping, &args.shrink);
    run.solver(&log);
    run.write(&log_path(&args.log, &args.output))
}

fn run_deblur(args: DeblurArgs) -> Result<()> {
    let y = load_input(&args.input, &args.raw)?;
    let psf = args.kernel.build()?;
    let cfg = DeblurConfig {
        eta: args.eta,
        alpha0: args.alpha0,
        delta: args.delta,
        outer_iters: args.iters,
        shrink: args.shrink.build(args.sigma),
        grouping: args.grouping.build(),
    };
    let (x, log) = deblur_with_log(&y, &psf, args.sigma, &cfg)?;
    save_tensor(&args.output, &x)?;

    let mut run = RunLog::new("deblur");
    run.param("input", args.input.display());
    run.param("dims", format!("{:?}", y.dims()));
    run.param("kernel", args.kernel.describe());
    run.param("sigma", args.sigma);
    run.param("eta", args.eta);
    run.param("alpha0", args.alpha0);
    run.param("delta", args.delta);
    run.param("iters", args.iters);
    grouping_params(&mut run, &args.grouping, &args.shrink);
    run.solver(&log);
    run.write(&log_path(&args.log, &args.output))
}

fn run_superres(args: SuperresArgs) -> Result<()> {
    let y = load_input(&args.input, &args.raw)?;
    let z = load_tensor(&args.guide)?;
    let psf = args.kernel.build()?;
    let response = match &args.response {
        Some(path) => SpectralResponse::new(load_matrix_text(path)?)?,
        None => SpectralResponse::band_average(y.bands(), z.bands())?,
    };
    let cfg = SuperresConfig {
        eta: args.eta,
        beta0: args.beta0,
        gamma0: args.gamma0,
        delta: args.delta,
        scale: args.scale,
        outer_iters: args.iters,
        cg_tol: args.cg_tol,
        cg_max_iters: args.cg_max_iters,
        shrink: args.shrink.build(args.sigma),
        grouping: args.grouping.build(),
    };
    let (x, log) = superres_with_log(&y, &z, &psf, &response, &cfg)?;
    save_tensor(&args.output, &x)?;

    let mut run = RunLog::new("superres");
    run.param("input", args.input.display());
    run.param("guide", args.guide.display());
    run.param("dims", format!("{:?}", x.dims()));
    run.param("scale", args.scale);
    run.param("kernel", args.kernel.describe());
    run.param(
        "response",
        args.response
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "band-average".into()),
    );
    run.param("sigma", args.sigma);
    run.param("eta", args.eta);
    run.param("beta0", args.beta0);
    run.param("gamma0", args.gamma0);
    run.param("delta", args.delta);
    run.param("iters", args.iters);
    run.param("cg-tol", args.cg_tol);
    run.param("cg-max-iters", args.cg_max_iters);
    grouping_params(&mut run, &args.grouping, &args.shrink);
    run.solver(&log);
    run.write(&log_path(&args.log, &args.output))
}

fn run_degrade(args: DegradeArgs) -> Result<()> {
    let x = load_input(&args.input, &args.raw)?;
    let stripe_mode = match args.stripe_mode.as_str() {
        "additive" => StripeMode::Additive,
        "multiplicative" => StripeMode::Multiplicative,
        other => bail!("unknown stripe mode '{}'", other),
    };
    let kernel_spec = if let Some(g) = &args.kernel.gaussian {
        let (size, std) = parse_pair::<usize, f64>(g, "gaussian")?;
        KernelSpec::Gaussian { size, std }
    } else if let Some(size) = args.kernel.uniform {
        KernelSpec::Uniform { size }
    } else {
        KernelSpec::Delta
    };
    let spec = DegradationSpec {
        sigma: args.sigma,
        stripe_fraction: args.stripe_fraction,
        stripe_amp: args.stripe_amp,
        stripe_mode,
        kernel: kernel_spec.clone(),
        scale: args.scale,
        seed: args.seed,
    };

    // Degradation order mirrors the acquisition model: blur and spatial
    // downsampling first, then stripes, then random noise.
    let mut out = x;
    let psf = if let Some(path) = &args.kernel.kernel {
        Psf::normalized(load_matrix_text(path)?)?
    } else {
        make_kernel(&kernel_spec)?
    };
    if args.scale > 1 {
        out = downsample_spatial(&out, &psf, args.scale)?;
    } else if !matches!(kernel_spec, KernelSpec::Delta) || args.kernel.kernel.is_some() {
        out = convolve(&out, &psf)?;
    }
    if args.stripe_fraction > 0.0 {
        out = add_stripes(&out, &spec);
    }
    if args.sigma > 0.0 {
        out = add_gaussian_noise(&out, args.sigma, args.seed.wrapping_add(1));
    }
    save_tensor(&args.output, &out)?;

    // Text sidecar recording the degradation.
    let mut side = String::new();
    writeln!(side, "sigma={}", args.sigma).unwrap();
    writeln!(side, "stripe-fraction={}", args.stripe_fraction).unwrap();
    writeln!(side, "stripe-amp={}", args.stripe_amp).unwrap();
    writeln!(side, "stripe-mode={}", args.stripe_mode).unwrap();
    writeln!(side, "kernel={}", args.kernel.describe()).unwrap();
    writeln!(side, "scale={}", args.scale).unwrap();
    writeln!(side, "seed={}", args.seed).unwrap();
    let mut sidecar = args.output.as_os_str().to_owned();
    sidecar.push(".spec.txt");
    std::fs::write(PathBuf::from(sidecar), side)?;
    Ok(())
}

fn run_metrics(args: MetricsArgs) -> Result<()> {
    let x = load_tensor(&args.input)?;
    let reference = load_tensor(&args.reference)?;
    for b in 0..reference.bands() {
        let mean: f64 =
            reference.band(b).data().iter().sum::<f64>() / (reference.rows() * reference.cols()) as f64;
        if mean == 0.0 {
            eprintln!("warning: reference band {} has zero mean; skipped by ERGAS", b);
        }
    }
    let report = quality_report(&x, &reference, args.scale)?;
    println!("psnr {:.4}", report.psnr);
    println!("ssim {:.4}", report.ssim);
    println!("ergas {:.4}", report.ergas);
    println!("sam {:.4}", report.sam);
    if args.stripe_bias {
        let bias = column_mean_bias(&x, &reference)?;
        println!("stripe_bias_energy {:.4}", bias.fro_norm().powi(2));
    }
    if let Some(path) = &args.per_band {
        let mut csv = String::from("band,psnr\n");
        for (b, p) in report.per_band_psnr.iter().enumerate() {
            writeln!(csv, "{},{:.4}", b, p).unwrap();
        }
        std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
