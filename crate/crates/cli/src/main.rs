//! `entrocheck`: randomized checks of continuity bounds for entropic functionals.
//!
//! Exit status: 0 when every check holds, 1 when some bound is violated, 2 on bad input.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Options;

#[derive(Parser, Debug)]
#[command(name = "entrocheck", version, about = "Randomized checks of continuity bounds for quantum-state functionals")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    opts: Options,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Fannes-type continuity campaign for a functional (default: entropy).
    Fannes,
    /// Verify the two-state decomposition on random pairs.
    Tales,
    /// Transfer between robustness and continuity bounds, and check both.
    Prop1,
    /// Relative-entropy distance to a convex set (single state or campaign).
    Reldist,
    /// Continuity campaign for the relative-entropy distance.
    Lemma2,
    /// Ensemble-donation inequality campaign.
    Donation,
    /// Infimum (or supremum with --sup) of a functional under measurement of the last subsystem.
    Arrow,
    /// Infimum over rank-one measurements.
    Cpl,
    /// Backward classical correlation.
    Cback,
    /// Intrinsic information of a classical joint distribution.
    Intrinsic,
    /// Pure (or mixed with --mixed) convex roof of a functional.
    Roof,
    /// Entanglement of formation.
    Ef,
    /// Pure versus mixed roof of the mutual information on antisymmetric states.
    Roofgap,
    /// Reduce a valued ensemble to at most d²+1 members.
    Reduce,
}

fn run(cmd: Cmd, o: &Options) -> Result<usize, String> {
    match cmd {
        Cmd::Fannes => commands::fannes(o),
        Cmd::Tales => commands::tales(o),
        Cmd::Prop1 => commands::prop1(o),
        Cmd::Reldist => commands::reldist(o),
        Cmd::Lemma2 => commands::lemma2(o),
        Cmd::Donation => commands::donation(o),
        Cmd::Arrow => commands::arrow(o),
        Cmd::Cpl => commands::cpl(o),
        Cmd::Cback => commands::cback(o),
        Cmd::Intrinsic => commands::intrinsic(o),
        Cmd::Roof => commands::roof(o),
        Cmd::Ef => commands::ef(o),
        Cmd::Roofgap => commands::roofgap(o),
        Cmd::Reduce => commands::reduce(o),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = cli.opts.with_file().and_then(|o| run(cli.cmd, &o));
    match outcome {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("entrocheck: {n} violation(s)");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("entrocheck: error: {e}");
            ExitCode::from(2)
        }
    }
}
