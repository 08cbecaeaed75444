use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nmqj::config::parse_config;
use nmqj::models::{LadderStart, ModelKind, ModelSpec};
use nmqj::scenario::run_scenario;
use nmqj::series::{compare_series, TrajectorySeries};
use nmqj::{acceptance, Error};

const PASS: u8 = 0;
const COMPARISON_FAILED: u8 = 1;
const CONFIG_ERROR: u8 = 2;
const RUNTIME_ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "nmqj", version, about = "Non-Markovian quantum jump simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario from a JSON config and write CSV, summary and event log.
    Simulate {
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two series CSVs element by element (coherences by magnitude).
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        tol: f64,
        /// Print the full report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Print Δ_j(t) and λ_j(t) for a model as CSV.
    Rates {
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 6.0)]
        t_max: f64,
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
    },
    /// Run the acceptance suite.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Errors the user can fix by editing their input.
fn code_for(err: &Error) -> u8 {
    match err {
        Error::Parse(_) | Error::Validation(_) | Error::UnsupportedModel(_) => CONFIG_ERROR,
        Error::GridMismatch(_) => COMPARISON_FAILED,
        _ => RUNTIME_ERROR,
    }
}

fn fail(context: &str, err: Error) -> u8 {
    eprintln!("error: {context}: {err}");
    code_for(&err)
}

fn simulate(path: &Path, out: Option<PathBuf>) -> u8 {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return CONFIG_ERROR;
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => return fail(&path.display().to_string(), e),
    };
    if let Some(dir) = out {
        cfg.outputs.directory = dir;
    }
    let outcome = match run_scenario(&cfg) {
        Ok(o) => o,
        Err(e) => return fail("simulation failed", e),
    };
    let s = &outcome.summary;
    println!(
        "{}: N = {}, {} steps, max N_eff = {}, {} jump events, {:.2} s",
        s.model, s.ensemble_size, s.steps, s.max_n_eff, s.jump_events, s.runtime_seconds
    );
    for w in &s.warnings {
        println!("warning: {w}");
    }
    for c in &s.comparisons {
        println!(
            "{} {}: max deviation {:.3e} (tol {:.1e}, t ≤ {})",
            if c.report.pass { "PASS" } else { "FAIL" },
            c.name,
            c.report.max_deviation,
            c.report.tolerance,
            c.compared_until
        );
    }
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    if s.pass {
        PASS
    } else {
        COMPARISON_FAILED
    }
}

fn read_series(path: &Path) -> Result<TrajectorySeries, u8> {
    let file = fs::File::open(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        CONFIG_ERROR
    })?;
    TrajectorySeries::read_csv(file).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        CONFIG_ERROR
    })
}

fn compare(a: &Path, b: &Path, tol: f64, json: bool) -> u8 {
    if !(tol >= 0.0) {
        eprintln!("error: --tol must be non-negative");
        return CONFIG_ERROR;
    }
    let (sa, sb) = match (read_series(a), read_series(b)) {
        (Ok(x), Ok(y)) => (x, y),
        (Err(c), _) | (_, Err(c)) => return c,
    };
    let r = match compare_series(&sa, &sb, tol) {
        Ok(r) => r,
        Err(e) => return fail("series cannot be compared", e),
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&r).expect("report serialises"));
    } else {
        for e in &r.elements {
            println!("{:<10} {:.3e} at t = {}", e.element, e.max_deviation, e.at_time);
        }
        println!("{}: max deviation {:.3e} (tol {tol:e})", if r.pass { "PASS" } else { "FAIL" }, r.max_deviation);
    }
    if r.pass {
        PASS
    } else {
        COMPARISON_FAILED
    }
}

fn model_by_name(name: &str) -> Result<ModelSpec, Error> {
    // "ladder_excited" selects the |a⟩ start; plain "ladder" the mixed one.
    if let Some(base) = name.strip_suffix("_excited") {
        if base.parse::<ModelKind>()? == ModelKind::Ladder {
            return Ok(ModelSpec::ladder(LadderStart::Excited));
        }
    }
    let kind: ModelKind = name.parse()?;
    ModelSpec::build(kind, &Default::default())
}

fn rates(name: &str, t_max: f64, dt: f64) -> u8 {
    if !(dt > 0.0) || !(t_max >= 0.0) {
        eprintln!("error: --dt must be positive and --t-max non-negative");
        return CONFIG_ERROR;
    }
    let model = match model_by_name(name) {
        Ok(m) => m.with_lamb_shift(true),
        Err(e) => return fail("unknown model", e),
    };
    let labels: Vec<_> = model.channels.iter().map(|c| c.label).collect();
    let mut header = vec!["t".to_string()];
    header.extend(labels.iter().map(|l| format!("delta_{l}")));
    header.extend(labels.iter().map(|l| format!("lambda_{l}")));
    println!("{}", header.join(","));
    let steps = (t_max / dt).round() as usize;
    for k in 0..=steps {
        let t = k as f64 * dt;
        let row = model.decay_rates(t).and_then(|d| model.lamb_shift_rates(t).map(|l| (d, l)));
        let (d, l) = match row {
            Ok(x) => x,
            Err(e) => return fail("rate evaluation failed", e),
        };
        let cells: Vec<String> = std::iter::once(t).chain(d).chain(l).map(|x| x.to_string()).collect();
        println!("{}", cells.join(","));
    }
    PASS
}

fn selftest(seed: u64) -> u8 {
    let reports = acceptance::run_all(seed);
    for r in &reports {
        println!("{r}");
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    println!("selftest: {} passed, {failed} failed", reports.len() - failed);
    if failed == 0 {
        PASS
    } else {
        COMPARISON_FAILED
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Simulate { config, out } => simulate(&config, out),
        Command::Compare { a, b, tol, json } => compare(&a, &b, tol, json),
        Command::Rates { model, t_max, dt } => rates(&model, t_max, dt),
        Command::Selftest { seed } => selftest(seed),
    };
    ExitCode::from(code)
}
