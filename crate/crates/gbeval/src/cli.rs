//! Argument parsing and the run wrapper shared by every subcommand.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{
    cmd_aggregate, cmd_chac, cmd_cm2, cmd_eval, cmd_prep, cmd_synth, cmd_toytrain, AggregateArgs,
    ChacArgs, Cm2Args, EvalArgs, Outcome, PrepArgs, SynthArgs, ToytrainArgs,
};
use crate::provenance::Provenance;
use crate::{Error, EXIT_CONFIG, EXIT_OK};

#[derive(Debug, Parser)]
#[command(
    name = "gbeval",
    version,
    about = "Grain boundary segmentation evaluation toolkit"
)]
pub struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, env = "GBEVAL_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Where `run.json` is written.
    #[arg(long, global = true, default_value = ".")]
    pub output_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Quarter, pair and fold a dataset into a manifest.
    Prep(PrepArgs),
    /// Precision, recall, F1, certainty and abundance per image.
    Eval(EvalArgs),
    /// Count grains by contour and convex-hull analysis.
    Chac(ChacArgs),
    /// Render confusion overlays.
    Cm2(Cm2Args),
    /// Generate synthetic Voronoi fixtures.
    Synth(SynthArgs),
    /// Summarize cross-validation run records.
    Aggregate(AggregateArgs),
    /// Train the toy network.
    Toytrain(ToytrainArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Prep(_) => "prep",
            Command::Eval(_) => "eval",
            Command::Chac(_) => "chac",
            Command::Cm2(_) => "cm2",
            Command::Synth(_) => "synth",
            Command::Aggregate(_) => "aggregate",
            Command::Toytrain(_) => "toytrain",
        }
    }

    fn inputs(&self) -> Vec<PathBuf> {
        let mut v: Vec<PathBuf> = Vec::new();
        match self {
            Command::Prep(a) => v.extend([a.images.clone(), a.annotations.clone()]),
            Command::Eval(a) => v.extend([a.pred.clone(), a.gt.clone()]),
            Command::Chac(a) => {
                v.push(a.pred.clone());
                v.extend(a.config.clone());
            }
            Command::Cm2(a) => {
                v.extend([a.pred.clone(), a.gt.clone()]);
                v.extend(a.backdrop.clone());
            }
            Command::Synth(_) => {}
            Command::Aggregate(a) => v.push(a.records.clone()),
            Command::Toytrain(a) => {
                v.extend(a.images.clone());
                v.extend(a.annotations.clone());
                v.extend(a.manifest.clone());
                v.extend(a.init.clone());
            }
        }
        v
    }

    fn execute(&self, seed: u64) -> crate::Result<Outcome> {
        match self {
            Command::Prep(a) => cmd_prep(a, seed),
            Command::Eval(a) => cmd_eval(a),
            Command::Chac(a) => cmd_chac(a, seed),
            Command::Cm2(a) => cmd_cm2(a),
            Command::Synth(a) => cmd_synth(a, seed),
            Command::Aggregate(a) => cmd_aggregate(a),
            Command::Toytrain(a) => cmd_toytrain(a, seed),
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let mut prov = Provenance::new(
        cli.command.name(),
        args.iter()
            .skip(1)
            .map(|a| a.to_string_lossy().into_owned())
            .collect(),
        cli.seed,
    );
    for p in cli.command.inputs() {
        prov.add_input(&p);
    }

    let result = match cli.threads {
        Some(0) => Err(Error::Config("--threads must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| cli.command.execute(cli.seed)),
            Err(e) => Err(Error::Config(format!("thread pool: {e}"))),
        },
        None => cli.command.execute(cli.seed),
    };

    let code = match &result {
        Ok(out) => {
            prov.outputs = out
                .outputs
                .iter()
                .map(|p| p.display().to_string())
                .collect();
            if !out.message.is_empty() {
                println!("{}", out.message);
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            prov.fail(e);
            e.exit_code()
        }
    };
    if let Err(e) = prov.write(&cli.output_dir) {
        eprintln!("error: could not write run record: {e}");
        if code == EXIT_OK {
            return e.exit_code();
        }
    }
    code
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_are_config_errors() {
        assert_eq!(run(["gbeval", "eval", "--bogus"]), EXIT_CONFIG);
        assert_eq!(run(["gbeval", "--help"]), EXIT_OK);
    }
}
