use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gridprice::pipeline::{run_pipeline, Pipeline, PipelineSettings, StartChoice};
use gridprice::record::{Formulation, RunRecord};
use gridprice::{load_case, report};
use gridprice_core::hermitian::DEFAULT_RANK_TOL;

/// Nodal prices for AC economic dispatch and their settlement audits.
#[derive(Parser)]
#[command(name = "gridprice", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Case file path, or the name of a bundled case.
    case: String,
    /// Conic solver tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Relative eigenvalue threshold for the rank of W.
    #[arg(long = "rank-tol", default_value_t = DEFAULT_RANK_TOL)]
    rank_tol: f64,
    /// AC starting point. Defaults to sdp-warm when the SDP is also solved.
    #[arg(long, value_enum)]
    start: Option<StartChoice>,
    /// Directory for run records (and reports).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a case file.
    Validate { case: String },
    /// Local AC solve with KKT certification.
    SolveAc(Common),
    /// Semidefinite relaxation.
    SolveSdp(Common),
    /// Branch-flow second-order cone relaxation (radial cases).
    SolveSocp(Common),
    /// Settle one formulation at its own dispatch and prices.
    Settle {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "ac")]
        formulation: Formulation,
    },
    /// Split the AC/SDP duality gap into LOC and PRS.
    Gap(Common),
    /// Compare SDP and SOCP optima and prices on a radial case.
    CompareRadial(Common),
    /// Run several formulations and print the full report.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, value_delimiter = ',', default_values = ["sdp", "ac"])]
        formulations: Vec<Formulation>,
    },
    /// Per-bus price table for plotting.
    Heatmap {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "socp")]
        formulation: Formulation,
    },
    /// Reload a run record and recompute its residuals.
    Verify {
        record: PathBuf,
        /// Case the record was produced from.
        #[arg(long)]
        case: String,
    },
}

const SOLVE_FAILED: u8 = 1;
const INPUT_ERROR: u8 = 2;

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn settings(c: &Common) -> PipelineSettings {
    PipelineSettings { tol: c.tol, rank_tol: c.rank_tol, start: c.start }
}

fn persist(p: &Pipeline, out: Option<&Path>) -> Result<(), String> {
    let Some(dir) = out else { return Ok(()) };
    for r in &p.records {
        let path = r.persist(dir).map_err(|e| e.to_string())?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn run(c: &Common, formulations: &[Formulation]) -> Result<Pipeline, ExitCode> {
    let (name, _, case) = load_case(&c.case).map_err(|e| fail(INPUT_ERROR, e))?;
    let p = run_pipeline(&name, &case, formulations, &settings(c));
    persist(&p, c.out.as_deref()).map_err(|e| fail(INPUT_ERROR, e))?;
    Ok(p)
}

fn status(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(SOLVE_FAILED)
    }
}

fn solve(c: &Common, formulations: &[Formulation]) -> ExitCode {
    match run(c, formulations) {
        Ok(p) => {
            print!("{}", report::render_text(&p));
            status(p.all_certified())
        }
        Err(code) => code,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { case } => match load_case(&case) {
            Ok((name, _, case)) => {
                println!("{name}: ok ({} buses, {} lines{})", case.n_buses(), case.n_lines(), if case.is_radial() { ", radial" } else { "" });
                ExitCode::SUCCESS
            }
            Err(e) => fail(INPUT_ERROR, e),
        },
        Command::SolveAc(c) => solve(&c, &[Formulation::Ac]),
        Command::SolveSdp(c) => solve(&c, &[Formulation::Sdp]),
        Command::SolveSocp(c) => solve(&c, &[Formulation::Socp]),
        Command::Settle { common, formulation } => match run(&common, &[formulation]) {
            Ok(p) => {
                let r = p.record(formulation).expect("requested");
                print!("{}", report::render_settlement(r));
                status(r.certified && r.settlement.is_some())
            }
            Err(code) => code,
        },
        Command::Gap(c) => match run(&c, &[Formulation::Sdp, Formulation::Ac]) {
            Ok(p) => {
                print!("{}", report::render_text(&p));
                let consistent = p.record(Formulation::Ac).and_then(|r| r.gap.as_ref()).is_some_and(|g| g.consistent);
                status(p.all_certified() && consistent)
            }
            Err(code) => code,
        },
        Command::CompareRadial(c) => {
            match load_case(&c.case) {
                Ok((_, _, case)) if !case.is_radial() => return fail(INPUT_ERROR, "case is not radial"),
                Err(e) => return fail(INPUT_ERROR, e),
                Ok(_) => {}
            }
            match run(&c, &[Formulation::Sdp, Formulation::Socp]) {
                Ok(p) => {
                    print!("{}", report::render_text(&p));
                    let passed = p.record(Formulation::Socp).and_then(|r| r.radial.as_ref()).is_some_and(|c| c.passed);
                    status(p.all_certified() && passed)
                }
                Err(code) => code,
            }
        }
        Command::Report { common, formulations } => {
            let p = match run(&common, &formulations) {
                Ok(p) => p,
                Err(code) => return code,
            };
            let text = report::render_text(&p);
            print!("{text}");
            if let Some(dir) = &common.out {
                let mut csv = Vec::new();
                let written = report::write_csv(&p, &mut csv)
                    .map_err(|e| e.to_string())
                    .and_then(|_| fs::write(dir.join(format!("{}-report.txt", p.case)), &text).map_err(|e| e.to_string()))
                    .and_then(|_| fs::write(dir.join(format!("{}-report.csv", p.case)), &csv).map_err(|e| e.to_string()));
                if let Err(e) = written {
                    return fail(INPUT_ERROR, e);
                }
            }
            status(p.all_certified())
        }
        Command::Heatmap { common, formulation } => {
            let mut c = common;
            let out = c.out.take();
            let p = match run(&c, &[formulation]) {
                Ok(p) => p,
                Err(code) => return code,
            };
            let r = p.record(formulation).expect("requested");
            let Some(s) = &r.solution else {
                return fail(SOLVE_FAILED, r.error.as_deref().unwrap_or("solve failed"));
            };
            let written = match &out {
                Some(path) => fs::File::create(path)
                    .map_err(|e| e.to_string())
                    .and_then(|f| report::emit_heatmap_data(&s.duals.lmp_p, &s.duals.lmp_q, f).map_err(|e| e.to_string())),
                None => report::emit_heatmap_data(&s.duals.lmp_p, &s.duals.lmp_q, io::stdout().lock()).map_err(|e| e.to_string()),
            };
            if let Err(e) = written {
                return fail(INPUT_ERROR, e);
            }
            status(r.certified)
        }
        Command::Verify { record, case } => {
            let (_, _, case) = match load_case(&case) {
                Ok(c) => c,
                Err(e) => return fail(INPUT_ERROR, e),
            };
            let r = match RunRecord::load(&record) {
                Ok(r) => r,
                Err(e) => return fail(INPUT_ERROR, e),
            };
            match r.verify(&case) {
                Ok(()) => {
                    let _ = writeln!(io::stdout(), "{}: residuals reproduced", record.display());
                    status(r.certified)
                }
                Err(e) => fail(SOLVE_FAILED, e),
            }
        }
    }
}
