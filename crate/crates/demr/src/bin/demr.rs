//! Thin command-line front end; all logic lives in `demr::cli`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use demr::cli::{dispatch, CliOverrides, TaskKind};
use demr::liegroups::Tag;

#[derive(Parser)]
#[command(
    name = "demr",
    about = "Manifold-representation experiment harness (SE(3) pose, Grassmann subspaces, estimator checks)",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config (schema: configs/config.schema.json).
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Relative point-cloud pose regression on SE(3).
    Pose {
        #[command(flatten)]
        common: Common,
        /// Override the rotation representation tag
        /// (euler3|axis3|quat4|sixd6|nine9).
        #[arg(long)]
        tag: Option<Tag>,
        /// Override the training rotation-range fraction.
        #[arg(long)]
        fraction: Option<f64>,
        /// Evaluate the ground-truth oracle stub instead of training.
        #[arg(long)]
        stub_gt: bool,
    },
    /// Illumination-subspace regression on the Grassmann manifold.
    Subspace {
        #[command(flatten)]
        common: Common,
        /// Also train the finite-difference geodesic competitor.
        #[arg(long)]
        dimr_fd: bool,
        /// Evaluate the ground-truth oracle stub instead of training.
        #[arg(long)]
        stub_gt: bool,
    },
    /// Run the estimator property suite and write props.csv.
    Props {
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (task, common, overrides) = match cli.command {
        Command::Pose {
            common,
            tag,
            fraction,
            stub_gt,
        } => (
            TaskKind::Pose,
            common,
            CliOverrides {
                seed: None,
                tag,
                fraction,
                stub_gt,
                dimr_fd: false,
            },
        ),
        Command::Subspace {
            common,
            dimr_fd,
            stub_gt,
        } => (
            TaskKind::Subspace,
            common,
            CliOverrides {
                seed: None,
                tag: None,
                fraction: None,
                stub_gt,
                dimr_fd,
            },
        ),
        Command::Props { common } => (
            TaskKind::Props,
            common,
            CliOverrides {
                seed: None,
                tag: None,
                fraction: None,
                stub_gt: false,
                dimr_fd: false,
            },
        ),
    };
    let overrides = CliOverrides {
        seed: common.seed,
        ..overrides
    };
    match dispatch(task, &common.config, &overrides) {
        Ok(out_dir) => {
            println!("results written to {}", out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
