//! `sepcross` command-line driver.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use sepcross::coeffs::{bundle, SeparatrixCoefficients};
use sepcross::jump::{from_xi_i, invariant_jump, jump_slow, InvariantMode};
use sepcross::model::{build_system, Mode, ModelConfig, SystemDef, CATALOG};
use sepcross::portrait::{default_delta, find_saddle, trace_separatrices, DomainTag};
use sepcross::simulate::{
    area_bracket, capture_fractions, extract_crossing, initial_point, integrate_full, run_sweep,
    CaptureConfig, EventSpec, SweepConfig,
};

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (", env!("SEPCROSS_DESCRIBE"), ")");

#[derive(Parser)]
#[command(name = "sepcross", version = VERSION, about = "Separatrix-crossing coefficients, jump predictions and validation runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Saddle, separatrix loops and loop areas at a fixed z.
    Portrait(Common),
    /// Near-separatrix coefficients at a fixed z.
    Coeffs(Common),
    /// Closed-form jump predictions over a grid of pseudo-phases.
    Predict(PredictArgs),
    /// One trajectory of the full system through the separatrix.
    Simulate(SimulateArgs),
    /// Phase sweep comparing measured and predicted jumps.
    Sweep(SweepArgs),
    /// Monte Carlo capture probabilities.
    Capture(CaptureArgs),
}

#[derive(Args, Clone, Serialize)]
struct Common {
    /// Model TOML file, or a catalog model name.
    #[arg(long)]
    model: String,
    /// Slow variables, comma-separated or repeated; defaults to the model's z0.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    z: Vec<f64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Swap the orientation of the section rays.
    #[arg(long)]
    flip_sections: bool,
}

#[derive(Args, Clone, Serialize)]
struct Numerics {
    /// Validity window half-width in units of sqrt(eps).
    #[arg(long, default_value_t = 3.0)]
    k_window: f64,
    /// Integrator relative tolerance.
    #[arg(long, default_value_t = 1e-12)]
    tol_rel: f64,
    /// Integrator absolute tolerance.
    #[arg(long, default_value_t = 1e-14)]
    tol_abs: f64,
}

#[derive(Args, Serialize)]
struct PredictArgs {
    #[command(flatten)]
    common: Common,
    /// Small parameter; repeat for several values.
    #[arg(long, required = true)]
    eps: Vec<f64>,
    /// Pseudo-phases; defaults to 0.05, 0.10, ..., 0.95.
    #[arg(long, value_delimiter = ',')]
    xi: Vec<f64>,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    numerics: Numerics,
    /// Small parameter.
    #[arg(long)]
    eps: f64,
    /// Initial E in G3; defaults to 25 energy steps.
    #[arg(long)]
    h_init: Option<f64>,
    /// Initial phase along the G3 orbit.
    #[arg(long, default_value_t = 0.0)]
    phi: f64,
    /// Inner rounds to follow after capture.
    #[arg(long, default_value_t = 3)]
    rounds: usize,
    /// Time limit; defaults to 100/eps.
    #[arg(long)]
    t_end: Option<f64>,
    /// Store every accepted step.
    #[arg(long)]
    record_steps: bool,
}

#[derive(Args, Serialize)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    numerics: Numerics,
    /// Small parameter; repeat for an eps grid.
    #[arg(long, required = true)]
    eps: Vec<f64>,
    /// Initial phases per eps, evenly spaced.
    #[arg(long, default_value_t = 200)]
    phases: usize,
    /// Initial E in G3; defaults to 25 energy steps at each eps.
    #[arg(long)]
    h_init: Option<f64>,
    /// Seed for the random phase offset or initial points.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct CaptureArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    numerics: Numerics,
    /// Small parameter.
    #[arg(long)]
    eps: f64,
    /// Number of Monte Carlo runs.
    #[arg(long, default_value_t = 2000)]
    runs: usize,
    /// Seed for the random phase offset or initial points.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug)]
enum CliError {
    Config { message: String, path: Option<String> },
    Runtime(String),
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        CliError::Config {
            message: message.into(),
            path: None,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Runtime(_) => 1,
        }
    }

    fn to_json(&self) -> Value {
        match self {
            CliError::Config { message, path } => {
                json!({"error": {"kind": "config", "message": message, "path": path}})
            }
            CliError::Runtime(message) => json!({"error": {"kind": "runtime", "message": message}}),
        }
    }
}

impl From<sepcross::Error> for CliError {
    fn from(e: sepcross::Error) -> Self {
        match e {
            sepcross::Error::Config(_) | sepcross::Error::Expr(_) => CliError::config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

type Res<T> = Result<T, CliError>;

fn load_model(common: &Common) -> Res<ModelConfig> {
    let path = Path::new(&common.model);
    let mut config = if path.is_file() {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config {
            message: format!("cannot read model file: {e}"),
            path: Some(common.model.clone()),
        })?;
        ModelConfig::from_toml(&text).map_err(|e| CliError::Config {
            message: e.to_string(),
            path: Some(common.model.clone()),
        })?
    } else if CATALOG.contains(&common.model.as_str()) {
        ModelConfig::catalog(&common.model)
    } else {
        return Err(CliError::Config {
            message: format!("model file not found (catalog models: {})", CATALOG.join(", ")),
            path: Some(common.model.clone()),
        });
    };
    if common.flip_sections {
        config.sections.flip = !config.sections.flip;
    }
    Ok(config)
}

struct Setup {
    model: ModelConfig,
    sys: SystemDef,
    z: Vec<f64>,
}

fn setup(common: &Common) -> Res<Setup> {
    let model = load_model(common)?;
    let sys = build_system(&model).map_err(|e| match CliError::from(e) {
        CliError::Config { message, .. } if Path::new(&common.model).is_file() => CliError::Config {
            message,
            path: Some(common.model.clone()),
        },
        other => other,
    })?;
    let z = if common.z.is_empty() {
        sys.default_z.clone()
    } else {
        common.z.clone()
    };
    if z.len() != sys.dim_z {
        return Err(CliError::config(format!(
            "--z has {} values, model `{}` has dim_z = {}",
            z.len(),
            sys.name,
            sys.dim_z
        )));
    }
    Ok(Setup { model, sys, z })
}

fn check_eps(eps: &[f64]) -> Res<()> {
    if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(CliError::config("--eps values must be positive"));
    }
    Ok(())
}

fn envelope(command: &str, args: &impl Serialize, model: &ModelConfig, result: Value) -> Value {
    json!({
        "version": VERSION,
        "command": command,
        "config": {"args": args, "model": model},
        "result": result,
    })
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("cannot write {}: {e}", path.display()))
}

fn write_json(dir: &Path, name: &str, value: &Value) -> Res<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

fn write_csv<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Res<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Runtime(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;
    Ok(path)
}

fn to_value(v: &impl Serialize) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn portrait(args: &Common) -> Res<Vec<PathBuf>> {
    let s = setup(args)?;
    let chart = find_saddle(&s.sys, &s.z, s.sys.saddle_seed)?;
    let geometry = trace_separatrices(&s.sys, &chart, default_delta(&s.sys))?;
    let result = json!({"z": s.z, "saddle": to_value(&chart), "separatrix": to_value(&geometry)});
    Ok(vec![write_json(&args.out, "portrait.json", &envelope("portrait", args, &s.model, result))?])
}

fn coeffs(args: &Common) -> Res<Vec<PathBuf>> {
    let s = setup(args)?;
    let c = bundle(&s.sys, &s.z)?;
    Ok(vec![write_json(&args.out, "coeffs.json", &envelope("coeffs", args, &s.model, to_value(&c)))?])
}

fn invariant_mode(sys: &SystemDef) -> Option<InvariantMode> {
    match sys.mode {
        Mode::HamiltonianTime => Some(InvariantMode::TimeDependent),
        Mode::SlowFast => Some(InvariantMode::SlowFast),
        Mode::Generic => None,
    }
}

fn predict(args: &PredictArgs) -> Res<Vec<PathBuf>> {
    check_eps(&args.eps)?;
    let s = setup(&args.common)?;
    let xis: Vec<f64> = if args.xi.is_empty() {
        (1..20).map(|k| k as f64 * 0.05).collect()
    } else {
        args.xi.clone()
    };
    if xis.iter().any(|x| !(*x > 0.0 && *x < 1.0)) {
        return Err(CliError::config("--xi values must lie in (0, 1)"));
    }
    let c: SeparatrixCoefficients = bundle(&s.sys, &s.z)?;
    let bracket = if s.sys.mode == Mode::SlowFast {
        area_bracket(&s.sys, &s.z, 1e-4)?
    } else {
        [0.0, 0.0]
    };
    let mode = invariant_mode(&s.sys);
    let mut rows = Vec::new();
    for &eps in &args.eps {
        for target in [DomainTag::G1, DomainTag::G2] {
            for &xi in &xis {
                let pp = from_xi_i(xi, eps, &c, target, 0.0)?;
                let j = jump_slow(&c, &pp, eps, true)?;
                let mut row = json!({
                    "eps": eps,
                    "target": target.index(),
                    "xi_i": xi,
                    "xi3": pp.xi3,
                    "dtau": j.dtau,
                    "dtau_terms": to_value(&j.dtau_terms),
                    "dz": j.dz,
                });
                if let Some(m) = mode {
                    let ij = invariant_jump(&c, c.s[2], &pp, eps, m, bracket[target.index() - 1])?;
                    row["two_pi_j_shift"] = json!(ij.two_pi_j_plus - ij.baseline);
                    row["bracket_term"] = json!(ij.bracket_term);
                }
                rows.push(row);
            }
        }
    }
    let result = json!({"z": s.z, "coefficients": to_value(&c), "predictions": rows});
    Ok(vec![write_json(&args.common.out, "predict.json", &envelope("predict", args, &s.model, result))?])
}

fn simulate(args: &SimulateArgs) -> Res<Vec<PathBuf>> {
    check_eps(&[args.eps])?;
    let s = setup(&args.common)?;
    let eps = args.eps;
    let h_init = match args.h_init {
        Some(h) if h > 0.0 => h,
        Some(_) => return Err(CliError::config("--h-init must be positive")),
        None => 25.0 * eps * bundle_theta3(&s)?,
    };
    let init = initial_point(&s.sys, &s.z, h_init, args.phi)?;
    let spec = EventSpec {
        stop_after_inner: Some(args.rounds.max(1)),
        record_steps: args.record_steps,
        options: sepcross::ode::Options {
            rtol: args.numerics.tol_rel,
            atol: args.numerics.tol_abs,
            ..Default::default()
        },
        ..Default::default()
    };
    let traj = integrate_full(&s.sys, &init, eps, args.t_end.unwrap_or(100.0 / eps), &spec)?;
    let crossing = traj
        .events
        .iter()
        .find(|e| matches!(e.section, sepcross::portrait::Section::XiPlus | sepcross::portrait::Section::XiMinus) && e.h < 0.0)
        .map(|e| -> Res<Value> {
            let c = bundle(&s.sys, &e.z)?;
            Ok(match extract_crossing(&traj, &c, args.numerics.k_window) {
                Ok(cr) => to_value(&cr),
                Err(err) => json!({"error": err.to_string()}),
            })
        })
        .transpose()?
        .unwrap_or_else(|| json!({"error": "trajectory was not captured"}));
    let result = json!({"h_init": h_init, "trajectory": to_value(&traj), "crossing": crossing});
    Ok(vec![write_json(&args.common.out, "trajectory.json", &envelope("simulate", args, &s.model, result))?])
}

fn bundle_theta3(s: &Setup) -> Res<f64> {
    let ld = sepcross::coeffs::loop_data(&s.sys, &s.z, None)?;
    Ok(ld.ints.theta[2])
}

fn numerics_into(n: &Numerics, cfg: &mut SweepConfig) {
    cfg.k_window = n.k_window;
    cfg.tol_rel = n.tol_rel;
    cfg.tol_abs = n.tol_abs;
}

fn sweep(args: &SweepArgs) -> Res<Vec<PathBuf>> {
    check_eps(&args.eps)?;
    if args.phases == 0 {
        return Err(CliError::config("--phases must be positive"));
    }
    let s = setup(&args.common)?;
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for (k, &eps) in args.eps.iter().enumerate() {
        let mut cfg = SweepConfig::new(s.model.clone(), eps, args.phases);
        cfg.seed = args.seed;
        cfg.h_init = args.h_init;
        cfg.z_init = s.z.clone();
        numerics_into(&args.numerics, &mut cfg);
        let r = run_sweep(cfg.clone())?;
        for mut row in r.rows {
            row.run_id += k * args.phases;
            rows.push(row);
        }
        runs.push(json!({
            "eps": eps,
            "sweep": to_value(&cfg),
            "h_init": r.h_init,
            "phase_offset": r.phase_offset,
            "tau_star": r.tau_star,
            "z_star": r.z_star,
            "coefficients": to_value(&r.coeffs),
        }));
    }
    let csv = write_csv(&args.common.out, "sweep.csv", &rows)?;
    let result = json!({"rows": rows.len(), "runs": runs});
    let side = write_json(&args.common.out, "sweep.json", &envelope("sweep", args, &s.model, result))?;
    Ok(vec![csv, side])
}

fn capture(args: &CaptureArgs) -> Res<Vec<PathBuf>> {
    check_eps(&[args.eps])?;
    let s = setup(&args.common)?;
    let mut cfg = CaptureConfig::new(s.model.clone(), args.eps, args.runs);
    cfg.seed = args.seed;
    cfg.z_init = s.z.clone();
    cfg.k_window = args.numerics.k_window;
    cfg.tol_rel = args.numerics.tol_rel;
    cfg.tol_abs = args.numerics.tol_abs;
    let stats = capture_fractions(&cfg)?;
    let csv = write_csv(&args.common.out, "capture.csv", &stats.details)?;
    let mut summary = to_value(&stats);
    if let Some(m) = summary.as_object_mut() {
        m.remove("details");
    }
    let result = json!({"capture": to_value(&cfg), "statistics": summary});
    let side = write_json(&args.common.out, "capture.json", &envelope("capture", args, &s.model, result))?;
    Ok(vec![csv, side])
}

fn run(cli: &Cli) -> Res<Vec<PathBuf>> {
    match &cli.command {
        Command::Portrait(a) => portrait(a),
        Command::Coeffs(a) => coeffs(a),
        Command::Predict(a) => predict(a),
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Capture(a) => capture(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = json!({"error": {"kind": "usage", "message": e.to_string().trim_end()}});
            eprintln!("{err}");
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
