//! Configuration-driven runner for the spinboson studies.
//!
//! Usage:
//!   spinboson run <config.toml> [--out DIR] [--seed N] [--study NAME]...
//!   spinboson schema
//!
//! Exit codes: 0 all selected checks pass, 1 a numerical check failed,
//! 2 usage or configuration error.

mod config;
mod schema;
mod studies;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use config::RunConfig;
use studies::StudyOutcome;

const USAGE: &str = "usage:
  spinboson run <config.toml> [--out DIR] [--seed N] [--study NAME]...
  spinboson schema

exit codes: 0 pass, 1 check failure, 2 usage/config error";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match args.first().map(String::as_str) {
        Some("schema") => {
            print!("{}", schema::SCHEMA);
            ExitCode::SUCCESS
        }
        Some("run") => run_command(&args[1..]),
        Some("--help") | Some("-h") | Some("help") => {
            println!("{USAGE}");
            ExitCode::SUCCESS
        }
        _ => {
            eprintln!("{USAGE}");
            ExitCode::from(2)
        }
    }
}

struct Overrides {
    out: Option<String>,
    seed: Option<u64>,
    studies: Vec<String>,
}

fn parse_overrides(args: &[String]) -> Result<(PathBuf, Overrides), String> {
    let mut config_path = None;
    let mut over = Overrides {
        out: None,
        seed: None,
        studies: Vec::new(),
    };
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--out" => {
                over.out = Some(it.next().ok_or("--out needs a value")?.clone());
            }
            "--seed" => {
                let raw = it.next().ok_or("--seed needs a value")?;
                over.seed = Some(raw.parse().map_err(|_| format!("bad seed `{raw}`"))?);
            }
            "--study" => {
                over.studies.push(it.next().ok_or("--study needs a value")?.clone());
            }
            other if config_path.is_none() && !other.starts_with('-') => {
                config_path = Some(PathBuf::from(other));
            }
            other => return Err(format!("unexpected argument `{other}`")),
        }
    }
    let path = config_path.ok_or("missing config path")?;
    Ok((path, over))
}

fn run_command(args: &[String]) -> ExitCode {
    let (path, over) = match parse_overrides(args) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}\n{USAGE}");
            return ExitCode::from(2);
        }
    };
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    let mut cfg = match RunConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: invalid config: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(out) = over.out {
        cfg.output.dir = out;
    }
    if let Some(seed) = over.seed {
        cfg.output.seed = seed;
    }
    let selected: Vec<String> = if over.studies.is_empty() {
        cfg.studies.run.clone()
    } else {
        for s in &over.studies {
            if !config::KNOWN_STUDIES.contains(&s.as_str()) {
                eprintln!("error: unknown study `{s}`");
                return ExitCode::from(2);
            }
        }
        over.studies
    };

    if selected.is_empty() {
        println!("no studies selected; nothing to do");
        return ExitCode::SUCCESS;
    }

    let out_dir = Path::new(&cfg.output.dir);
    if let Err(e) = fs::create_dir_all(out_dir) {
        eprintln!("error: cannot create {}: {e}", out_dir.display());
        return ExitCode::from(2);
    }

    let mut outcomes: Vec<StudyOutcome> = Vec::new();
    let mut sorted = selected.clone();
    sorted.sort();
    sorted.dedup();
    for name in &sorted {
        match studies::run_study(name, &cfg) {
            Ok(outcome) => outcomes.push(outcome),
            Err(e) => {
                eprintln!("error: study {name} failed to run: {e}");
                // a study that cannot produce its numbers is a failed check
                outcomes.push(StudyOutcome {
                    name: config::KNOWN_STUDIES
                        .iter()
                        .find(|k| *k == name)
                        .copied()
                        .unwrap_or("unknown"),
                    pass: false,
                    summary: format!("failed to run: {e}"),
                    csv: String::new(),
                    json: String::new(),
                });
            }
        }
    }

    let mut summary = String::new();
    let mut all_pass = true;
    for o in &outcomes {
        let status = if o.pass { "PASS" } else { "FAIL" };
        all_pass = all_pass && o.pass;
        let line = format!("[{status}] {}: {}", o.name, o.summary);
        println!("{line}");
        summary.push_str(&line);
        summary.push('\n');
        if !o.csv.is_empty() {
            if let Err(e) = fs::write(out_dir.join(format!("{}.csv", o.name)), &o.csv) {
                eprintln!("error: cannot write artifacts: {e}");
                return ExitCode::from(2);
            }
        }
        if !o.json.is_empty() {
            if let Err(e) = fs::write(out_dir.join(format!("{}.json", o.name)), &o.json) {
                eprintln!("error: cannot write artifacts: {e}");
                return ExitCode::from(2);
            }
        }
    }
    if let Err(e) = fs::write(out_dir.join("summary.txt"), &summary) {
        eprintln!("error: cannot write summary: {e}");
        return ExitCode::from(2);
    }

    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
