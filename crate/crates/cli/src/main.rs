use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use rcar_core::config::{parse_noise_choice, resolve_params, ParamOverrides, RunFile};
use rcar_core::estimate::{correlation_test, TestOptions, ThetaSource};
use rcar_core::harness::{self, Experiment, MCConfig};
use rcar_core::model::{check_hypotheses, ModelParams, NoiseFamily, NoiseSpec};
use rcar_core::numerics::spectral_radius;
use rcar_core::simulate::{self, DEFAULT_BURN_IN, GENERATOR_ID};
use rcar_core::{fourth_order, second_order, Analysis, RcarError};

mod exit;

use exit::Failure;

#[derive(Parser, Debug)]
#[command(
    name = "rcar",
    version,
    about = "Autoregression with MA(1)-correlated random coefficient"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Moment tables M, N, Λ and the autocovariance (H, G, Δ, Λ⁵ with --order 4)
    Moments {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(2..=4))]
        order: u8,
        #[arg(long, default_value_t = 10)]
        max_lag: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Limits and asymptotic variances κ², ω², Σ, Ψ, ψ⁰
    Variance {
        #[command(flatten)]
        params: ParamArgs,
        /// Include every intermediate matrix
        #[arg(long)]
        full: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Hypotheses H1-H5 and the pathological-set flags
    Check {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 100_000)]
        mc_draws: usize,
        #[arg(long, env = "RCAR_SEED", default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Simulate a trajectory (CSV `t,x` by default)
    Simulate {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, env = "RCAR_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_BURN_IN)]
        burn_in: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// All estimators and the correlation test on a `t,x` series
    Estimate(TestArgs),
    /// Correlation test only: statistic, p-value and decision
    Test(TestArgs),
    /// Monte Carlo experiment
    Mc {
        #[arg(long)]
        experiment: String,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long, env = "RCAR_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        level: Option<f64>,
        #[arg(long)]
        burn_in: Option<usize>,
        /// Comma-separated α values for size_power
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        alpha_grid: Option<Vec<f64>>,
        /// Also run size_power at 2n
        #[arg(long)]
        double_n: bool,
        #[arg(long)]
        workers: Option<usize>,
        /// Keep per-replicate values in the JSON report
        #[arg(long)]
        keep_replicates: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// ρ(M) and ρ(H) over a (θ, α) grid, as CSV
    Region {
        /// start:end:step
        #[arg(long, allow_hyphen_values = true)]
        theta_range: String,
        /// start:end:step
        #[arg(long, allow_hyphen_values = true)]
        alpha_range: String,
        #[arg(long)]
        eps: Option<String>,
        #[arg(long)]
        eta: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Args, Debug, Clone)]
struct ParamArgs {
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// family:scale (gaussian scale = variance; uniform half-width; laplace b; rademacher amplitude)
    #[arg(long)]
    eps: Option<String>,
    /// family:scale, or `none` for a fixed coefficient
    #[arg(long)]
    eta: Option<String>,
    /// TOML run file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct TestArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    #[arg(long, value_enum, default_value_t = Source::Tilde)]
    theta_source: Source,
    /// Family used to map σ̄₂ to σ̄₄
    #[arg(long, default_value = "gaussian")]
    eps_family: String,
    /// Family used to map τ̄₂ to τ̄₄
    #[arg(long, default_value = "gaussian")]
    eta_family: String,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    /// Output file (standard output when absent)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    Hat,
    Tilde,
}

impl From<Source> for ThetaSource {
    fn from(s: Source) -> Self {
        match s {
            Source::Hat => ThetaSource::Hat,
            Source::Tilde => ThetaSource::Tilde,
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("rcar: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Command) -> CmdResult {
    match cmd {
        Command::Moments {
            params,
            order,
            max_lag,
            output,
        } => moments(&params, order, max_lag, &output),
        Command::Variance {
            params,
            full,
            output,
        } => variance(&params, full, &output),
        Command::Check {
            params,
            mc_draws,
            seed,
            output,
        } => check(&params, mc_draws, seed, &output),
        Command::Simulate {
            params,
            n,
            seed,
            burn_in,
            output,
        } => simulate_cmd(&params, n, seed, burn_in, &output),
        Command::Estimate(args) => estimate(&args, false),
        Command::Test(args) => estimate(&args, true),
        Command::Mc {
            experiment,
            params,
            n,
            replicates,
            seed,
            level,
            burn_in,
            alpha_grid,
            double_n,
            workers,
            keep_replicates,
            output,
        } => {
            let experiment: Experiment = experiment.parse()?;
            let file = load_file(&params.config)?;
            let model = load_params(&params, file.as_ref())?;
            let mut cfg = MCConfig::new(model, experiment);
            let f = file.unwrap_or_default();
            if let Some(e) = &f.experiment {
                if e.parse::<Experiment>()? != experiment {
                    return Err(Failure::usage(format!(
                        "run file names experiment '{e}' but --experiment is '{experiment}'"
                    )));
                }
            }
            cfg.n = n.or(f.n).unwrap_or(cfg.n);
            cfg.replicates = replicates.or(f.replicates).unwrap_or(cfg.replicates);
            cfg.master_seed = seed.or(f.seed).unwrap_or(0);
            cfg.level = level.or(f.level).unwrap_or(cfg.level);
            cfg.burn_in = burn_in.or(f.burn_in).unwrap_or(cfg.burn_in);
            if let Some(g) = alpha_grid.or(f.alpha_grid) {
                cfg.alpha_grid = g;
            }
            cfg.double_n = double_n || f.double_n.unwrap_or(false);
            cfg.workers = workers.or(f.workers);
            mc(&cfg, keep_replicates, &output)
        }
        Command::Region {
            theta_range,
            alpha_range,
            eps,
            eta,
            config,
            output,
        } => region(&theta_range, &alpha_range, eps, eta, &config, &output),
    }
}

fn load_file(path: &Option<PathBuf>) -> Result<Option<RunFile>, Failure> {
    path.as_ref()
        .map(|p| RunFile::load(p))
        .transpose()
        .map_err(Failure::from)
}

fn overrides(args: &ParamArgs) -> Result<ParamOverrides, Failure> {
    Ok(ParamOverrides {
        theta: args.theta,
        alpha: args.alpha,
        eps: args
            .eps
            .as_deref()
            .map(str::parse::<NoiseSpec>)
            .transpose()?,
        eta: args.eta.as_deref().map(parse_noise_choice).transpose()?,
    })
}

fn load_params(args: &ParamArgs, file: Option<&RunFile>) -> Result<ModelParams, Failure> {
    Ok(resolve_params(file, &overrides(args)?)?)
}

fn params_of(args: &ParamArgs) -> Result<ModelParams, Failure> {
    let file = load_file(&args.config)?;
    load_params(args, file.as_ref())
}

fn provenance(params: Option<&ModelParams>, seed: Option<u64>, extra: Value) -> Value {
    json!({
        "tool": "rcar",
        "version": env!("CARGO_PKG_VERSION"),
        "generator": GENERATOR_ID,
        "params": params,
        "seed": seed,
        "settings": extra,
    })
}

fn json_only(output: &OutputArgs, what: &str) -> CmdResult {
    if output.format == Some(Format::Csv) {
        return Err(Failure::usage(format!("{what} output is JSON only")));
    }
    Ok(())
}

fn emit(output: &OutputArgs, body: &[u8]) -> CmdResult {
    match &output.out {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(body)
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::usage(e.to_string()))
        }
    }
}

fn emit_json<T: Serialize>(output: &OutputArgs, value: &T) -> CmdResult {
    let mut s =
        serde_json::to_string_pretty(value).map_err(|e| Failure::internal(e.to_string()))?;
    s.push('\n');
    emit(output, s.as_bytes())
}

fn moments(args: &ParamArgs, order: u8, max_lag: u64, output: &OutputArgs) -> CmdResult {
    json_only(output, "moments")?;
    if order != 2 && order != 4 {
        return Err(Failure::usage(format!(
            "--order must be 2 or 4, got {order}"
        )));
    }
    let params = params_of(args)?;
    let p = params.moments()?;
    let so = second_order::build_second_order(&p)?;
    let acvf = second_order::acvf(&so, max_lag)?;
    let mut body = json!({
        "provenance": provenance(Some(&params), None, json!({"order": order, "max_lag": max_lag})),
        "U0": so.u0, "U1": so.u1, "U2": so.u2,
        "M": so.m, "N": so.n, "Lambda": so.lambda, "rho_M": so.rho_m,
        "acvf": acvf,
    });
    if order == 4 {
        let fo = fourth_order::build_fourth_order(&p, &so)?;
        let obj = body.as_object_mut().expect("object");
        obj.insert("V".into(), json!(fo.v));
        obj.insert("H".into(), json!(fo.h));
        obj.insert("G".into(), json!(fo.g));
        obj.insert("R".into(), json!(fo.r));
        obj.insert("Delta".into(), json!(fo.delta));
        obj.insert("Lambda5".into(), json!(fo.lambda5));
        obj.insert("rho_H".into(), json!(fo.rho_h));
    }
    emit_json(output, &body)
}

fn variance(args: &ParamArgs, full: bool, output: &OutputArgs) -> CmdResult {
    json_only(output, "variance")?;
    let params = params_of(args)?;
    let a = Analysis::new(&params.moments()?)?;
    let s = &a.stack;
    let mut body = json!({
        "provenance": provenance(Some(&params), None, json!({})),
        "theta_star": s.limits.theta_star,
        "vartheta_star": s.limits.vartheta_star,
        "gamma": s.limits.gamma,
        "sigma2_star": s.limits.sigma2_star,
        "kappa2": s.kappa2,
        "omega2": s.omega2,
        "Sigma": s.sigma,
        "Psi": s.psi_matrix,
        "psi": s.psi,
        "psi0": s.psi0,
        "psi00": s.psi00,
    });
    if full {
        body.as_object_mut()
            .expect("object")
            .insert("stack".into(), json!(s));
    }
    emit_json(output, &body)
}

fn check(args: &ParamArgs, mc_draws: usize, seed: u64, output: &OutputArgs) -> CmdResult {
    json_only(output, "check")?;
    let params = params_of(args)?;
    let report = check_hypotheses(&params, mc_draws, seed);
    for w in &report.warnings {
        eprintln!("rcar: warning: {w}");
    }
    let mut body = serde_json::to_value(&report).map_err(|e| Failure::internal(e.to_string()))?;
    body.as_object_mut().expect("object").insert(
        "provenance".into(),
        provenance(
            Some(&params),
            Some(seed),
            json!({"mc_draws": mc_draws.max(rcar_core::model::MIN_LOG_MOMENT_DRAWS)}),
        ),
    );
    emit_json(output, &body)?;
    if [report.rho_m, report.rho_h]
        .iter()
        .any(|r| r.is_nan() || *r >= 1.0)
    {
        return Err(Failure {
            code: exit::HYPOTHESIS,
            message: format!(
                "ρ(M) = {:.6}, ρ(H) = {:.6}: moment conditions fail",
                report.rho_m, report.rho_h
            ),
        });
    }
    let flags = report.excluded_degenerate;
    if flags.sqrt2_theta_boundary || flags.psi00_zero {
        return Err(Failure {
            code: exit::PATHOLOGICAL,
            message: "parameters lie in the pathological set".into(),
        });
    }
    Ok(())
}

fn simulate_cmd(
    args: &ParamArgs,
    n: usize,
    seed: u64,
    burn_in: usize,
    output: &OutputArgs,
) -> CmdResult {
    let params = params_of(args)?;
    let traj = simulate::simulate(&params, n, seed, burn_in)?;
    match output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut buf = Vec::new();
            traj.write_csv(&mut buf)?;
            emit(output, &buf)
        }
        Format::Json => emit_json(
            output,
            &json!({
                "provenance": provenance(Some(&params), Some(seed), json!({"n": n, "burn_in_requested": burn_in, "burn_in_used": traj.burn_in})),
                "x": traj.x,
            }),
        ),
    }
}

fn estimate(args: &TestArgs, test_only: bool) -> CmdResult {
    json_only(&args.output, if test_only { "test" } else { "estimate" })?;
    let traj = simulate::ingest(&args.input)?;
    let opts = TestOptions {
        level: args.level,
        source: args.theta_source.into(),
        eps_family: args.eps_family.parse::<NoiseFamily>()?,
        eta_family: args.eta_family.parse::<NoiseFamily>()?,
    };
    let report = correlation_test(&traj, &opts)?;
    let prov = provenance(None, None, json!({"input": args.input, "options": opts}));
    let body = if test_only {
        json!({
            "provenance": prov,
            "n": report.n,
            "gamma_tilde": report.gamma_tilde,
            "psi0_hat": report.psi0_hat,
            "statistic": report.statistic,
            "p_value": report.p_value,
            "level": report.level,
            "reject": report.reject,
        })
    } else {
        let mut v = serde_json::to_value(&report).map_err(|e| Failure::internal(e.to_string()))?;
        v.as_object_mut()
            .expect("object")
            .insert("provenance".into(), prov);
        v
    };
    emit_json(&args.output, &body)
}

fn mc(cfg: &MCConfig, keep_replicates: bool, output: &OutputArgs) -> CmdResult {
    let mut report = harness::run(cfg)?;
    eprintln!("rcar: {} status: {:?}", cfg.experiment, report.status);
    if output.format == Some(Format::Csv) {
        let mut s = String::new();
        if report.grid.is_empty() {
            s.push_str("replicate,values\n");
            for r in &report.replicates {
                let vals: Vec<String> = r.values.iter().map(|v| format!("{v:.16e}")).collect();
                s.push_str(&format!("{},{}\n", r.index, vals.join(";")));
            }
        } else {
            s.push_str("alpha,n,rejection_rate,std_error,completed,failed,mean_statistic\n");
            for g in &report.grid {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    g.alpha,
                    g.n,
                    g.rejection_rate,
                    g.std_error,
                    g.completed,
                    g.failed,
                    g.mean_statistic
                ));
            }
        }
        return emit(output, s.as_bytes());
    }
    if !keep_replicates {
        report.replicates.clear();
    }
    let mut body = serde_json::to_value(&report).map_err(|e| Failure::internal(e.to_string()))?;
    body.as_object_mut().expect("object").insert(
        "provenance".into(),
        provenance(Some(&cfg.params), Some(cfg.master_seed), json!({})),
    );
    emit_json(output, &body)
}

fn parse_range(s: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Failure::usage(format!("range '{s}' is not start:end:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let (start, end, step) = (nums[0], nums[1], nums[2]);
    if step.is_nan() || step <= 0.0 || end < start {
        return Err(bad());
    }
    let count = ((end - start) / step + 1e-9).floor() as usize;
    if count > 100_000 {
        return Err(Failure::usage("range has too many points".into()));
    }
    Ok((0..=count).map(|i| start + i as f64 * step).collect())
}

fn region(
    theta_range: &str,
    alpha_range: &str,
    eps: Option<String>,
    eta: Option<String>,
    config: &Option<PathBuf>,
    output: &OutputArgs,
) -> CmdResult {
    if output.format == Some(Format::Json) {
        return Err(Failure::usage("region output is CSV only".into()));
    }
    let thetas = parse_range(theta_range)?;
    let alphas = parse_range(alpha_range)?;
    let file = load_file(config)?;
    let ov = ParamOverrides {
        theta: None,
        alpha: None,
        eps: eps.as_deref().map(str::parse::<NoiseSpec>).transpose()?,
        eta: eta.as_deref().map(parse_noise_choice).transpose()?,
    };
    let eta = match ov.eta {
        Some(e) => e,
        None => file
            .as_ref()
            .map(|f| f.eta_choice())
            .transpose()?
            .flatten()
            .ok_or_else(|| Failure::usage("--eta is required".into()))?,
    };
    let tau = eta.map_or(rcar_core::MomentSet::zero(), |e| e.moments());
    let mut s = String::from("theta,alpha,rho_M,rho_H\n");
    for &th in &thetas {
        for &al in &alphas {
            let rm = spectral_radius(&second_order::m_matrix(th, al, &tau))?;
            let rh = spectral_radius(&fourth_order::h_matrix(th, al, &tau))?;
            s.push_str(&format!("{th},{al},{rm},{rh}\n"));
        }
    }
    emit(output, s.as_bytes())
}

impl From<RcarError> for Failure {
    fn from(e: RcarError) -> Self {
        exit::classify(e)
    }
}
