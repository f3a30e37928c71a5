use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use eta_riccati_cli as cli;

/// Generalized alternating Dirichlet series and their Riccati dynamics:
/// reference tables, figure data, Monte Carlo validation, trapping
/// thresholds and MIDI sonification.
#[derive(Parser)]
#[command(name = "eta-riccati", version, max_term_width = 100)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Direct,
    Fast,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Markdown,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Theme,
    Composition,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate eta_a^(k)(t) by the direct series or the geometric algorithm
    Eval {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 0)]
        k: u32,
        #[arg(long, value_enum, default_value = "direct")]
        method: MethodArg,
        /// Geometric table size (fast method)
        #[arg(long, default_value_t = 30)]
        n: usize,
        /// Term cap for the direct series
        #[arg(long, default_value_t = 100_000)]
        max_terms: usize,
    },
    /// Reference table of phi, phi_e, phi_as and their ratio over an (a, t) grid
    RiccatiTable {
        #[arg(long, value_delimiter = ',', default_values_t = cli::default_a_list())]
        a_list: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = cli::default_t_list())]
        t_list: Vec<f64>,
        #[arg(long, value_enum, default_value = "markdown")]
        format: FormatArg,
        /// Write to a file instead of standard output
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Geometric convergence of the truncated estimator at (a, t)
    ConvergenceTable {
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, value_delimiter = ',', default_values_t = vec![5usize, 10, 20, 30])]
        n_list: Vec<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// CSV data for the four validation panels over a uniform t-grid
    FigureData {
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 2.0])]
        a_list: Vec<f64>,
        #[arg(long, default_value_t = 0.05)]
        t_min: f64,
        #[arg(long, default_value_t = 8.0)]
        t_max: f64,
        #[arg(long, default_value_t = 400)]
        points: usize,
        #[arg(short, long)]
        out_dir: PathBuf,
    },
    /// Trapping threshold T*(a): first root of eta'' + 2 eta' in (0.01, 8]
    Threshold {
        #[arg(long)]
        a: f64,
    },
    /// Run the Monte Carlo validation suite (exit 1 on any band violation)
    ValidateMc {
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Generate a melody from the Riccati trajectory as a Standard MIDI File
    Sonify {
        #[arg(long, value_enum, default_value = "theme")]
        preset: PresetArg,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        t_start: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        /// Output path for the .mid file
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn write_or_print(path: Option<&PathBuf>, text: &str) -> Result<(), i32> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| {
            eprintln!("error: cannot write {}: {e}", p.display());
            1
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(args: Args) -> Result<(), i32> {
    let fail = |e: eta_riccati::Error| -> i32 {
        eprintln!("error: {e}");
        cli::exit_code_for(&e)
    };
    match args.command {
        Command::Eval { a, t, k, method, n, max_terms } => {
            let method = match method {
                MethodArg::Direct => cli::EvalMethod::Direct,
                MethodArg::Fast => cli::EvalMethod::Fast,
            };
            let r = cli::eval(a, t, k, method, n, max_terms).map_err(fail)?;
            print!("{}", r.text);
            if !r.converged {
                eprintln!("error: series not converged to tolerance within the term budget");
                return Err(3);
            }
            Ok(())
        }
        Command::RiccatiTable { a_list, t_list, format, output } => {
            let format = match format {
                FormatArg::Csv => cli::TableFormat::Csv,
                FormatArg::Markdown => cli::TableFormat::Markdown,
            };
            let r = cli::riccati_table(&a_list, &t_list, format).map_err(fail)?;
            write_or_print(output.as_ref(), &r.text)?;
            if r.any_failed {
                eprintln!("error: some rows had no certified series value");
                return Err(3);
            }
            Ok(())
        }
        Command::ConvergenceTable { a, t, n_list, output } => {
            let text = cli::convergence_table(a, t, &n_list).map_err(fail)?;
            write_or_print(output.as_ref(), &text)
        }
        Command::FigureData { a_list, t_min, t_max, points, out_dir } => {
            let r = cli::figure_data(&a_list, t_min, t_max, points, &out_dir).map_err(fail)?;
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            for f in &r.files {
                println!("{}", f.display());
            }
            Ok(())
        }
        Command::Threshold { a } => {
            let text = cli::threshold_report(a).map_err(fail)?;
            print!("{text}");
            Ok(())
        }
        Command::ValidateMc { samples, seed } => {
            let (text, all_pass) = cli::validate_mc(samples, seed).map_err(fail)?;
            print!("{text}");
            if all_pass {
                Ok(())
            } else {
                Err(1)
            }
        }
        Command::Sonify { preset, a, t_start, t_end, steps, output } => {
            let flags = cli::SonifyFlags {
                preset: match preset {
                    PresetArg::Theme => cli::SonifyPreset::Theme,
                    PresetArg::Composition => cli::SonifyPreset::Composition,
                },
                a,
                t_start,
                t_end,
                steps,
            };
            let text = cli::sonify_cmd(&flags, &output).map_err(fail)?;
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code as u8),
    }
}
