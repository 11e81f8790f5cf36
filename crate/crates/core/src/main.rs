use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sim_ee::harness::experiment::{
    ensure_dir, run_complexity, run_convergence, run_quantization, run_sweep, write_csv, write_metadata,
    write_results, Sweep,
};
use sim_ee::harness::ExperimentConfig;
use sim_ee::Result;

/// Energy-efficiency simulator for SIM-assisted broadcast MIMO.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// EE per AO iteration of the proposed schemes, one CSV per layer count.
    Convergence(Common),
    /// EE versus meta-elements per layer.
    SweepN(Common),
    /// EE and sum-rate versus layer count at a fixed total of meta-elements.
    SweepLayers(Common),
    /// EE versus number of users.
    SweepK(Common),
    /// EE versus transmit power budget.
    SweepPmax(Common),
    /// EE with phases quantized to a few bits.
    Quantization(Common),
    /// Per-iteration complex-multiplication counts.
    ComplexityTable(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment file; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut exp = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            exp.seed = s;
        }
        if let Some(t) = self.trials {
            exp.trials = t;
        }
        exp.validate()?;
        Ok(exp)
    }
}

fn run(cli: Cli) -> Result<()> {
    let (name, common) = match &cli.command {
        Command::Convergence(c) => ("convergence", c),
        Command::SweepN(c) => ("sweep-n", c),
        Command::SweepLayers(c) => ("sweep-layers", c),
        Command::SweepK(c) => ("sweep-k", c),
        Command::SweepPmax(c) => ("sweep-pmax", c),
        Command::Quantization(c) => ("quantization", c),
        Command::ComplexityTable(c) => ("complexity-table", c),
    };
    let exp = common.load()?;
    let dir = ensure_dir(&common.out)?;
    let (trials, seed) = (exp.trials, exp.seed);
    let mut notes = Vec::new();
    match &cli.command {
        Command::Convergence(_) => {
            notes.push("x-axis: one AO iteration = one digital update followed by one phase line search; iteration 0 is the random starting point".into());
            for &l in &exp.convergence_layers {
                let rows = run_convergence(&exp, l, trials, seed)?;
                write_csv(&dir.join(format!("convergence_L{l}.csv")), &rows)?;
            }
        }
        Command::SweepN(_) => write_results(&dir, &run_sweep(&Sweep::n(&exp), &exp.schemes, trials, seed)?)?,
        Command::SweepLayers(_) => {
            notes.push(format!("meta-elements per layer = {} / layers", exp.total_elements));
            write_results(&dir, &run_sweep(&Sweep::layers(&exp), &exp.schemes, trials, seed)?)?
        }
        Command::SweepK(_) => write_results(&dir, &run_sweep(&Sweep::users(&exp), &exp.schemes, trials, seed)?)?,
        Command::SweepPmax(_) => write_results(&dir, &run_sweep(&Sweep::p_max(&exp), &exp.schemes, trials, seed)?)?,
        Command::Quantization(_) => {
            notes.push(if exp.quantized_reoptimize {
                "phases quantized after optimization, digital part re-optimized at the quantized phases".into()
            } else {
                "phases quantized after optimization, digital part kept from the continuous optimum".into()
            });
            write_results(&dir, &run_quantization(&exp, &exp.schemes, trials, seed)?)?
        }
        Command::ComplexityTable(_) => {
            notes.push("counts averaged over AO iterations up to the first reaching 95% of the final EE".into());
            write_csv(&dir.join("complexity_table.csv"), &run_complexity(&exp, trials, seed)?)?
        }
    }
    write_metadata(&dir, name, &exp, notes)?;
    eprintln!("{name}: wrote results to {}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
