//! Flat `key = value` run files merged under the command line.

use std::fs;
use std::path::Path;

pub const SUBCOMMANDS: [&str; 10] = [
    "coeffs",
    "qlandau",
    "bounds",
    "selfsim-errors",
    "refute-landau",
    "refute-boltzmann",
    "refute-vpl",
    "evolve",
    "blowup-fit",
    "check-theta",
];

const GLOBAL_KEYS: [&str; 3] = ["out", "threads", "seed"];

/// Parsed run file: an optional subcommand and the remaining settings in file order.
#[derive(Debug, Default, PartialEq)]
pub struct RunFile {
    pub subcommand: Option<String>,
    pub entries: Vec<(String, String)>,
}

pub fn parse(text: &str) -> Result<RunFile, String> {
    let mut out = RunFile::default();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", k + 1))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(format!("line {}: empty key", k + 1));
        }
        if key == "config" {
            return Err(format!("line {}: run files cannot include other run files", k + 1));
        }
        if key == "subcommand" {
            out.subcommand = Some(value);
        } else {
            out.entries.push((key, value));
        }
    }
    Ok(out)
}

pub fn read(path: &Path) -> Result<RunFile, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    parse(&text)
}

fn config_path(args: &[String]) -> Result<Option<String>, String> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned().map(Some).ok_or_else(|| "--config needs a path".to_string());
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Ok(Some(p.to_string()));
        }
    }
    Ok(None)
}

/// Inserts run-file settings right after the subcommand so that explicit flags,
/// which come later, override them.
pub fn merge(args: Vec<String>) -> Result<Vec<String>, String> {
    let Some(path) = config_path(&args)? else { return Ok(args) };
    let file = read(Path::new(&path))?;
    let mut globals = Vec::new();
    let mut flags = Vec::new();
    for (k, v) in &file.entries {
        let dest = if GLOBAL_KEYS.contains(&k.as_str()) { &mut globals } else { &mut flags };
        match v.as_str() {
            "true" => dest.push(format!("--{k}")),
            "false" => {}
            _ => dest.push(format!("--{k}={v}")),
        }
    }
    let mut args = args;
    args.splice(1..1, globals);
    match args.iter().position(|a| SUBCOMMANDS.contains(&a.as_str())) {
        Some(pos) => {
            if let Some(sub) = &file.subcommand {
                if *sub != args[pos] {
                    return Err(format!("run file is for {sub}, command line asks for {}", args[pos]));
                }
            }
            args.splice(pos + 1..pos + 1, flags);
        }
        None => {
            let sub = file.subcommand.ok_or_else(|| "no subcommand given on the command line or in the run file".to_string())?;
            args.push(sub);
            args.extend(flags);
        }
    }
    Ok(args)
}
