//! `graph check` and `graph build`.

use std::path::PathBuf;

use anyhow::Result;
use clap::Subcommand;
use graphnls::graph::{build_standard, GraphKind, LadderCaps};

use crate::context::{load_graph, usage};
use crate::output::{to_json, write};

#[derive(Subcommand, Debug)]
pub enum GraphCmd {
    /// Validate a graph file and print its topology report.
    Check {
        file: PathBuf,
    },
    /// Write one of the standard graphs as JSON.
    Build {
        /// line | halfline | star:N | tadpole:LOOP | tgraph:PENDANT |
        /// signpost:LOOP,STEM,EXTRA | ladder:CELL,RUNG,N[,dirichlet] |
        /// interval:LEN | loop:LEN
        #[arg(long)]
        kind: String,
        /// Output file; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn run(cmd: &GraphCmd) -> Result<()> {
    match cmd {
        GraphCmd::Check { file } => {
            let (g, _) = load_graph(file)?;
            print!("{}", to_json(&g.classify()?)?);
        }
        GraphCmd::Build { kind, out } => {
            let g = build_standard(&parse_kind(kind)?)?;
            let text = g.to_json_string() + "\n";
            match out {
                Some(path) => write(path, &text)?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

pub fn parse_kind(spec: &str) -> Result<GraphKind<f64>> {
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let args: Vec<&str> = if rest.is_empty() { vec![] } else { rest.split(',').collect() };
    let bad = || usage(format!("bad graph kind {spec:?}"));
    let num = |i: usize| -> Result<f64> { args.get(i).and_then(|s| s.trim().parse().ok()).ok_or_else(bad) };
    let count = |i: usize| -> Result<usize> { args.get(i).and_then(|s| s.trim().parse().ok()).ok_or_else(bad) };
    let arity = |n: usize| if args.len() == n { Ok(()) } else { Err(bad()) };
    Ok(match name {
        "line" => arity(0).map(|_| GraphKind::Line)?,
        "halfline" => arity(0).map(|_| GraphKind::HalfLine)?,
        "star" => {
            arity(1)?;
            GraphKind::Star(count(0)?)
        }
        "tadpole" => {
            arity(1)?;
            GraphKind::Tadpole { loop_len: num(0)? }
        }
        "tgraph" => {
            arity(1)?;
            GraphKind::TGraph { pendant_len: num(0)? }
        }
        "signpost" => {
            arity(3)?;
            GraphKind::Signpost {
                loop_len: num(0)?,
                stem_len: num(1)?,
                extra_halflines: count(2)?,
            }
        }
        "ladder" => {
            let caps = match args.len() {
                3 => LadderCaps::HalfLines,
                4 if args[3] == "dirichlet" => LadderCaps::Dirichlet,
                4 if args[3] == "halflines" => LadderCaps::HalfLines,
                _ => return Err(bad()),
            };
            GraphKind::Ladder {
                cell_len: num(0)?,
                rung_len: num(1)?,
                n_cells: count(2)?,
                caps,
            }
        }
        "interval" => {
            arity(1)?;
            GraphKind::Interval(num(0)?)
        }
        "loop" => {
            arity(1)?;
            GraphKind::Loop(num(0)?)
        }
        _ => return Err(bad()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_parse() {
        assert_eq!(parse_kind("star:4").unwrap(), GraphKind::Star(4));
        assert_eq!(parse_kind("tadpole:2").unwrap(), GraphKind::Tadpole { loop_len: 2.0 });
        assert!(matches!(
            parse_kind("ladder:1,1,6,dirichlet").unwrap(),
            GraphKind::Ladder { n_cells: 6, caps: LadderCaps::Dirichlet, .. }
        ));
        for bad in ["star", "star:x", "line:1", "ladder:1,1", "wheel:3"] {
            assert!(parse_kind(bad).is_err(), "{bad}");
        }
    }
}
