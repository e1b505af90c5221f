use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use gammalab::geometry::{canonical_constants, geometry_report};
use gammalab::heat::{cc_distance, mc_semigroup, pde_semigroup, McSettings, PdeSettings};
use gammalab::jet::TestFunction;
use gammalab::model_zoo::{model_by_name, shipped_models, validate, LieModel};
use gammalab::verify::algebraic::{check_cd_inequality, check_cd_witness, CdParams};
use gammalab::verify::spectral::spectral_gap_su2_pair;
use gammalab::verify::suite::verdict_label;
use gammalab::verify::{run_and_write, CheckResult, Report, SuiteConfig};
use gammalab::{Error, Result};

/// Γ-calculus checks on left-invariant sub-Riemannian model spaces.
#[derive(Parser)]
#[command(name = "gammalab", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Master seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the machine-readable result here.
    #[arg(long, global = true)]
    json: Option<PathBuf>,
    /// Write CSV tables into this directory.
    #[arg(long, global = true)]
    csv_dir: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// List the shipped models with their validation predicates, or validate a model file.
    Models {
        /// JSON model document to validate instead.
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Curvature bounds and CD constants of a model.
    Constants { model: String },
    /// Sweep the CD inequality over random polynomials and check the equality witness.
    CdCheck {
        model: String,
        #[arg(long, default_value_t = 1000)]
        functions: usize,
        #[arg(long, default_value_t = 20)]
        points: usize,
    },
    /// Estimate P_t f(x).
    Heat {
        model: String,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Starting point, comma separated; defaults to the origin.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Option<Vec<f64>>,
        /// Exponents of a monomial, comma separated; defaults to x₀².
        #[arg(long, value_delimiter = ',')]
        monomial: Option<Vec<u32>>,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        /// Use the finite-difference solver (Heisenberg only).
        #[arg(long)]
        pde: bool,
    },
    /// Carnot-Carathéodory distance with bounds.
    Distance {
        model: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        y: Vec<f64>,
    },
    /// First nonzero eigenvalue of the sub-Laplacian on SU(2)×SU(2).
    Spectral {
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long, default_value_t = 2.0)]
        j_max: f64,
    },
    /// Configured check suites.
    Suite {
        #[command(subcommand)]
        action: SuiteAction,
    },
}

#[derive(Subcommand)]
enum SuiteAction {
    /// Run every check in a config; without --config the default config runs.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the default config.
    DefaultConfig,
}

fn write_json(path: &Option<PathBuf>, value: &impl Serialize) -> Result<()> {
    if let Some(path) = path {
        std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    }
    Ok(())
}

fn print_result(r: &CheckResult) {
    println!(
        "{:<13} {:<22} {:<32} {:<18} margin {:>12.4e}  tol {:.1e}",
        verdict_label(r.verdict),
        r.check_id,
        r.anchor,
        r.model,
        r.margin,
        r.tolerance
    );
}

/// Prints, writes and turns a list of results into an exit code.
fn finish(global: &Global, report: Report) -> Result<ExitCode> {
    for r in &report.results {
        print_result(r);
    }
    println!("pass {}  fail {}  inconclusive {}", report.tally.pass, report.tally.fail, report.tally.inconclusive);
    if let Some(path) = &global.json {
        std::fs::write(path, report.to_json()?)?;
    }
    if let Some(dir) = &global.csv_dir {
        report.write_csv(dir)?;
    }
    Ok(if report.failed() { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn print_validation(model: &LieModel) -> Result<gammalab::model_zoo::ValidationReport> {
    let v = validate(model);
    println!(
        "{:<18} dim_h {} dim_v {}  step {:<4} bracket-generating {:<5} metric-preserving {:<5} metric-parallel {:<5} jacobi {:.1e}",
        model.name(),
        model.dim_h(),
        model.dim_v(),
        v.bracket_step.map_or("-".to_string(), |s| s.to_string()),
        v.bracket_generating,
        v.metric_preserving,
        v.metric_parallel,
        v.jacobi_residual
    );
    Ok(v)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let g = &cli.global;
    match cli.command {
        Command::Models { file } => {
            let models = match file {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)?;
                    vec![serde_json::from_str::<LieModel>(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?]
                }
                None => shipped_models(),
            };
            let reports: Vec<_> = models.iter().map(print_validation).collect::<Result<_>>()?;
            write_json(&g.json, &reports)?;
        }
        Command::Constants { model } => {
            let m = model_by_name(&model)?;
            let report = geometry_report(&m)?;
            let (normalized, k) = canonical_constants(&m)?;
            println!("{}", serde_json::to_string_pretty(&*report)?);
            println!("constants for {}:", normalized.name());
            println!("{}", serde_json::to_string_pretty(&k)?);
            write_json(&g.json, &serde_json::json!({ "geometry": &*report, "constants": k }))?;
        }
        Command::CdCheck { model, functions, points } => {
            let m = model_by_name(&model)?;
            let p = CdParams { models: vec![model.clone()], functions, points, ..CdParams::default() };
            let results = vec![check_cd_inequality(&m, &p, g.seed)?, check_cd_witness(&m, &p)?];
            return finish(g, Report::from_results(g.seed, String::new(), results));
        }
        Command::Heat { model, t, x, monomial, paths, steps, pde } => {
            let m = model_by_name(&model)?;
            let d = m.dim();
            let x = x.unwrap_or_else(|| vec![0.0; d]);
            let exps = monomial.unwrap_or_else(|| {
                let mut e = vec![0; d];
                e[0] = 2;
                e
            });
            if exps.len() != d {
                return Err(Error::InvalidArgument(format!("monomial needs {d} exponents")));
            }
            let f = TestFunction::monomial(&exps);
            let est = if pde {
                pde_semigroup(&f, &x, t, &PdeSettings::default())?
            } else {
                mc_semigroup(&m, &f, &x, t, &McSettings::new(paths, steps, g.seed))?
            };
            println!("P_t f(x) = {:.8} ± {:.2e}  (f = {}, t = {t})", est.value, est.error, est.f);
            write_json(&g.json, &est)?;
        }
        Command::Distance { model, x, y } => {
            let m = model_by_name(&model)?;
            let e = cc_distance(&m, &x, &y)?;
            println!("d_cc = {:.10}  in [{:.10}, {:.10}]  via {:?}", e.value, e.lower, e.upper, e.method);
            write_json(&g.json, &e)?;
        }
        Command::Spectral { rho, j_max } => {
            let (gap, a, b) = spectral_gap_su2_pair(rho, j_max)?;
            println!("λ₁ = {:.12}  (ρ = {rho}, j_max = {j_max}, change under j_max + 1: {:.1e})", gap.lambda1, gap.stability);
            let report = Report::from_results(g.seed, String::new(), vec![a, b]);
            write_json(&g.json, &serde_json::json!({ "gap": gap, "results": &report.results }))?;
            let json = None;
            return finish(&Global { json, csv_dir: g.csv_dir.clone(), ..*g }, report);
        }
        Command::Suite { action } => match action {
            SuiteAction::DefaultConfig => println!("{}", serde_json::to_string_pretty(&SuiteConfig::default())?),
            SuiteAction::Run { config } => {
                let mut c = match config {
                    Some(path) => SuiteConfig::load(Path::new(&path))?,
                    None => SuiteConfig::default(),
                };
                if g.seed != 0 {
                    c.seed = g.seed;
                }
                if g.json.is_some() {
                    c.output.json = g.json.clone();
                }
                if g.csv_dir.is_some() {
                    c.output.csv_dir = g.csv_dir.clone();
                }
                let start = Instant::now();
                let report = run_and_write(&c)?;
                for r in &report.results {
                    print_result(r);
                }
                println!("pass {}  fail {}  inconclusive {}", report.tally.pass, report.tally.fail, report.tally.inconclusive);
                eprintln!("suite finished in {:.1} s", start.elapsed().as_secs_f64());
                return Ok(if report.failed() { ExitCode::from(1) } else { ExitCode::SUCCESS });
            }
        },
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.global.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidArgument(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
