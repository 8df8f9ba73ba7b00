use clap::{Args, Parser, Subcommand};
use fractrans_core::experiment::{
    cli_convergence, compare_models, parse_f64_list, parse_level_list, parse_models, verify_kernels,
    write_discrepancy_csv, write_records_csv, RunConfig,
};
use fractrans_core::solvers::run_model;
use fractrans_core::{build_mesh, CoefficientField, Error, ModelKind, ProblemConfig, RationalInterface, Sigma3Policy};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fractrans", version, about = "Fractional transmission problems with sign-changing coefficients")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence sweep from a key = value configuration file.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override a configuration key, e.g. `--set sigma2=-0.5`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Solve one model and print `x,value` rows.
    Solve {
        #[arg(long)]
        model: ModelKind,
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        level: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare closed-form matrix entries with the quadrature oracle.
    VerifyKernels {
        /// Comma-separated orders.
        #[arg(long)]
        s: String,
        /// Comma-separated refinement levels or ranges `a..b`.
        #[arg(long)]
        levels: String,
        #[arg(long, default_value = "1/2")]
        b: RationalInterface,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        sigma1: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        sigma2: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        sigma3: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run several models on one problem and print their errors.
    CompareModels {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        level: u32,
        #[arg(long, default_value = "all")]
        models: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ProblemArgs {
    #[arg(long)]
    b: RationalInterface,
    #[arg(long, allow_hyphen_values = true)]
    sigma1: f64,
    #[arg(long, allow_hyphen_values = true)]
    sigma2: f64,
    /// A number, `avg` or `zero`; defaults to what the model needs.
    #[arg(long, allow_hyphen_values = true)]
    sigma3: Option<Sigma3Policy>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long)]
    s: f64,
}

impl ProblemArgs {
    fn config(&self) -> ProblemConfig {
        ProblemConfig {
            b: self.b,
            sigma1: self.sigma1,
            sigma2: self.sigma2,
            sigma3: self.sigma3,
            alpha: self.alpha,
            s: self.s,
        }
    }
}

fn sink(out: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Convergence { config, out, overrides } => {
            let mut pairs = Vec::new();
            for o in &overrides {
                let (k, v) = o.split_once('=').ok_or_else(|| Error::Parse(format!("--set expects KEY=VALUE, got '{o}'")))?;
                pairs.push((k.trim().to_string(), v.trim().to_string()));
            }
            if let Some(dir) = out {
                pairs.push(("out".into(), dir.display().to_string()));
            }
            let cfg = RunConfig::from_file(&config, &pairs)?;
            let art = cli_convergence(&cfg)?;
            let ok = art.outcome.records().count();
            let failed = art.outcome.failures().count();
            println!("runs: {ok} ok, {failed} failed, {} skipped", art.outcome.skipped.len());
            for f in &art.outcome.slopes {
                let at = f.fixed_h.map(|h| format!(" at h={h}")).unwrap_or_default();
                println!("slope {} {} vs {}{at}: {:.4}", f.model, f.metric, f.against, f.slope);
            }
            println!("wrote {}", art.csv.display());
            println!("wrote {}", art.manifest.display());
            if let Some(p) = &art.svg {
                println!("wrote {}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve { model, problem, level, out } => {
            let cfg = problem.config();
            let mesh = build_mesh(cfg.b, level)?;
            let sol = run_model(model, &cfg, &mesh)?;
            let mut w = sink(&out)?;
            sol.write_csv(&mut w)?;
            w.flush()?;
            eprintln!("{model}: u(b) = {}", sol.interface_value());
            Ok(ExitCode::SUCCESS)
        }
        Command::VerifyKernels { s, levels, b, sigma1, sigma2, sigma3, out } => {
            let s_list = parse_f64_list("s", &s)?;
            let levels = parse_level_list(&levels)?;
            let coeff = CoefficientField::new(sigma1, sigma2, sigma3)?;
            let rows = verify_kernels(b, &coeff, &s_list, &levels)?;
            let mut w = sink(&out)?;
            write_discrepancy_csv(&mut w, &rows)?;
            w.flush()?;
            let flagged = rows.iter().filter(|r| r.flagged()).count();
            if flagged > 0 {
                eprintln!("{flagged} row(s) above tolerance or without an oracle value");
                return Ok(ExitCode::from(1));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::CompareModels { problem, level, models, out } => {
            let models = parse_models(&models)?;
            let entries = compare_models(&problem.config(), level, &models)?;
            let mut w = sink(&out)?;
            write_records_csv(&mut w, entries.iter().filter_map(|e| e.outcome.as_ref().ok()))?;
            w.flush()?;
            for e in &entries {
                if let Err(f) = &e.outcome {
                    eprintln!("{} failed ({}): {}", e.job.model, f.class, f.message);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.class());
            ExitCode::from(2)
        }
    }
}
