use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use consensus_flow::flow::{flow_map, fmt_f64};
use consensus_flow::scenario::{load_reports, run_batch, ScenarioConfig};
use consensus_flow::verify::{run_verification_suite, Mode};
use consensus_flow::{build_laplacian, Error, WeightedDigraph};

/// Output directory override for `simulate`.
const OUT_DIR_ENV: &str = "CONSENSUS_FLOW_OUT_DIR";

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 3;
const EXIT_DOMAIN: u8 = 4;
const EXIT_VERIFICATION: u8 = 5;

#[derive(Parser)]
#[command(
    name = "consensus-flow",
    version,
    about = "Simulate and verify consensus gradient flows"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scenario of a TOML config and write its artifacts.
    Simulate {
        config: PathBuf,
        /// Output directory [default: $CONSENSUS_FLOW_OUT_DIR, else ./runs].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the named checks over seeded random instances.
    Verify(VerifyArgs),
    /// Print exp(-L t) for an edge-list graph as CSV.
    Flowmap {
        graph: PathBuf,
        #[arg(long)]
        t: f64,
    },
    /// Summarize the reports of a previous `simulate` run.
    Report { run_dir: PathBuf },
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, value_delimiter = ',', default_value = "4,8,16")]
    sizes: Vec<usize>,
    #[arg(long, conflicts_with = "lenient")]
    strict: bool,
    #[arg(long)]
    lenient: bool,
}

fn error_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Parse { .. }
        | Error::InvalidArgument(_)
        | Error::InvalidGraph(_) => EXIT_CONFIG,
        e if e.is_domain() => EXIT_DOMAIN,
        _ => EXIT_FAILURE,
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(error_code(e))
}

fn simulate(config: &Path, out: Option<PathBuf>) -> ExitCode {
    let cfg = match ScenarioConfig::load(config) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let out_dir = out
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"));
    let mut code = 0;
    let mut any_failed_check = false;
    for (name, result) in run_batch(&cfg, &out_dir) {
        match result {
            Ok(report) => {
                println!(
                    "{name}: a={} terminal_distance={:e} t={} checks {}/{} passed",
                    report.consensus_value,
                    report.terminal_distance,
                    report.final_time,
                    report.checks.iter().filter(|c| c.passed).count(),
                    report.checks.len()
                );
                for c in report.checks.iter().filter(|c| !c.passed) {
                    println!("  {c}");
                }
                any_failed_check |= !report.passed();
            }
            Err(e) => {
                eprintln!("{name}: error: {e}");
                code = code.max(error_code(&e));
            }
        }
    }
    if code != 0 {
        ExitCode::from(code)
    } else if any_failed_check {
        ExitCode::from(EXIT_VERIFICATION)
    } else {
        ExitCode::SUCCESS
    }
}

fn verify(args: &VerifyArgs) -> ExitCode {
    let mode = if args.strict {
        Mode::Strict
    } else if args.lenient {
        Mode::Lenient
    } else {
        Mode::Normal
    };
    match run_verification_suite(args.seed, args.count, &args.sizes, mode) {
        Ok(reports) => {
            for r in &reports {
                println!("{r}");
            }
            let failed = reports.iter().filter(|r| !r.passed).count();
            eprintln!("{} checks, {failed} failed", reports.len());
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VERIFICATION)
            }
        }
        Err(e) => fail(&e),
    }
}

fn flowmap(graph: &Path, t: f64) -> ExitCode {
    let run = || -> consensus_flow::Result<String> {
        let text = fs::read_to_string(graph)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", graph.display())))?;
        let p = flow_map(
            &build_laplacian(&WeightedDigraph::from_edge_list(&text)?),
            t,
        )?;
        let m = p.matrix();
        let mut out = String::new();
        for i in 0..m.nrows() {
            let row: Vec<String> = m.row(i).iter().map(|&v| fmt_f64(v)).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        Ok(out)
    };
    match run() {
        Ok(s) => {
            print!("{s}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn report(dir: &Path) -> ExitCode {
    match load_reports(dir) {
        Ok(reports) => {
            let mut all = true;
            for (path, r) in &reports {
                let passed = r.checks.iter().filter(|c| c.passed).count();
                println!(
                    "{} ({}): n={} a={} t={} terminal_distance={:e} V_monotone={} checks {passed}/{}",
                    r.scenario.name,
                    path.display(),
                    r.n,
                    r.consensus_value,
                    r.final_time,
                    r.terminal_distance,
                    r.series.v_non_increasing,
                    r.checks.len()
                );
                for c in r.checks.iter().filter(|c| !c.passed) {
                    println!("  {c}");
                }
                all &= r.passed();
            }
            if all {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VERIFICATION)
            }
        }
        Err(e) => fail(&e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { config, out } => simulate(&config, out),
        Command::Verify(args) => verify(&args),
        Command::Flowmap { graph, t } => flowmap(&graph, t),
        Command::Report { run_dir } => report(&run_dir),
    }
}
