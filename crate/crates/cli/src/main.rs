use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sigmared::expr::{render, Expr};
use sigmared::jet::sigma_prolong;
use sigmared::transform::{ds_to_ode, ode_to_ds, render_y};
use sigmared_cli::corpus;
use sigmared_cli::pipeline::{prepare, run_problem, zero_test, Options, Stages};
use sigmared_cli::problem::{Kind, Problem};
use sigmared_cli::report::{render as render_reports, Format, Record, Report, Status};

#[derive(Parser)]
#[command(name = "sigmared", version, about = "Check, reduce and transform σ-symmetric systems of ODEs")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Seed for the sampling RNG (overrides the problem file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Samples per zero test (overrides the problem file).
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Absolute threshold below which a sampled residual counts as zero.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Also write the report to this file.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Text)]
    format: OutFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Text,
    Machine,
}

#[derive(Subcommand)]
enum Command {
    /// Involution and determining equations.
    Check { file: PathBuf },
    /// Print the σ-prolonged fields.
    Prolong {
        file: PathBuf,
        #[arg(long, default_value_t = 1)]
        order: usize,
    },
    /// Apply the [construct] deformation and rescaling.
    Construct { file: PathBuf },
    /// Invariants and reduction.
    Reduce { file: PathBuf },
    /// Convert the system into a scalar ODE and transfer its reduction.
    ToOde { file: PathBuf },
    /// Turn a scalar ODE into its companion system.
    ToDs { file: PathBuf },
    /// The full pipeline, trajectory checks included.
    Verify { file: PathBuf },
    /// Run the bundled examples.
    Corpus,
}

fn load(path: &Path) -> Result<Vec<Problem>, String> {
    Problem::from_path(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn run(problems: &[Problem], opts: &Options) -> Vec<Report> {
    problems.iter().map(|p| run_problem(p, opts)).collect()
}

fn prolong(p: &Problem, opts: &Options, order: usize) -> Report {
    let zt = zero_test(p, opts);
    let mut rep = Report::new(&p.name, &p.tags, zt.seed, zt.trials);
    let Some((_, set)) = prepare(p, &zt, &mut rep) else { return rep };
    let Some(set) = set else {
        rep.push(Record::new("prolong", Status::Fail).with("error", "no symmetries declared"));
        return rep;
    };
    match sigma_prolong(&set.fields, &set.spec, order) {
        Ok(ys) => {
            for (al, y) in ys.iter().enumerate() {
                let mut r = Record::new(format!("prolong.Y{}", al + 1), Status::Info).with("t", render(&y.tau));
                for k in 0..=order {
                    for a in 1..=y.n() {
                        r = r.with(&format!("u{a}{}", "'".repeat(k)), render(y.coeff(a, k)));
                    }
                }
                rep.push(r);
            }
        }
        Err(e) => rep.push(Record::new("prolong", Status::Fail).with("error", e.to_string())),
    }
    rep
}

fn to_ds(p: &Problem, opts: &Options) -> Report {
    let zt = zero_test(p, opts);
    let mut rep = Report::new(&p.name, &p.tags, zt.seed, zt.trials);
    let (Kind::Ode, Some(ode)) = (p.kind, &p.ode) else {
        rep.push(Record::new("to-ds", Status::Fail).with("error", "to-ds needs a scalar ODE problem (kind = ode, n = 1)"));
        return rep;
    };
    match ode_to_ds(ode) {
        Ok(ds) => {
            let f: Vec<String> = ds.f.iter().map(render).collect();
            rep.push(Record::new("to-ds", Status::Info).with("f", format!("({})", f.join(", "))));
            let back = ds_to_ode(&ds, 1, &zt);
            let rec = match (back, ode.solved.as_ref().and_then(|m| m.values().next())) {
                (Ok(c), Some(orig)) => {
                    let v = zt.is_zero(&c.rhs().cloned().unwrap_or_else(Expr::zero).sub(orig));
                    Record::pass_if("to-ds.round-trip", v.is_zero()).with("max_abs", v.max_abs()).with("ode", c.rhs().map(render_y).unwrap_or_default())
                }
                (Err(e), _) => Record::new("to-ds.round-trip", Status::Fail).with("error", e.to_string()),
                (_, None) => Record::new("to-ds.round-trip", Status::Fail).with("error", "empty system"),
            };
            rep.push(rec);
        }
        Err(e) => rep.push(Record::new("to-ds", Status::Fail).with("error", e.to_string())),
    }
    rep
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = &cli.global;
    let mut opts = Options { seed: g.seed, trials: g.trials, eps_zero: g.tol, stages: Stages::ALL };
    let tol = g.tol.unwrap_or(sigmared::expr::ZeroTest::default().eps_zero);

    let reports = match &cli.command {
        Command::Corpus => match corpus::problems() {
            Ok(ps) => corpus::run_all(&ps, &opts),
            Err(e) => return usage(&format!("corpus: {e}")),
        },
        Command::Check { file } | Command::Construct { file } | Command::Reduce { file } | Command::ToOde { file } | Command::Verify { file } => {
            let ps = match load(file) {
                Ok(ps) => ps,
                Err(e) => return usage(&e),
            };
            opts.stages = match &cli.command {
                Command::Check { .. } => Stages::CHECK,
                Command::Construct { .. } => Stages::CONSTRUCT,
                Command::Reduce { .. } => Stages::REDUCE,
                Command::ToOde { .. } => Stages::TO_ODE,
                _ => Stages::ALL,
            };
            if matches!(cli.command, Command::Construct { .. }) && ps.iter().any(|p| p.construct.is_none()) {
                return usage(&format!("{}: no [construct] section", file.display()));
            }
            if matches!(cli.command, Command::ToOde { .. }) && ps.iter().any(|p| p.transform.is_none()) {
                return usage(&format!("{}: no [transform] section", file.display()));
            }
            run(&ps, &opts)
        }
        Command::Prolong { file, order } => match load(file) {
            Ok(ps) => ps.iter().map(|p| prolong(p, &opts, *order)).collect(),
            Err(e) => return usage(&e),
        },
        Command::ToDs { file } => match load(file) {
            Ok(ps) => ps.iter().map(|p| to_ds(p, &opts)).collect(),
            Err(e) => return usage(&e),
        },
    };

    let format = match g.format {
        OutFormat::Text => Format::Text,
        OutFormat::Machine => Format::Machine,
    };
    let out = render_reports(&reports, format, tol);
    print!("{out}");
    if let Some(path) = &g.report {
        if let Err(e) = std::fs::write(path, &out) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    if reports.iter().all(Report::passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn usage(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}
