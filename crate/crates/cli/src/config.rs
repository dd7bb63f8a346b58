//! Config files: keys are long flag names. Top-level keys apply to every
//! command; tables named after subcommands (`[solve]`, `[bench.root]`)
//! apply along the invoked path. Values are injected as flags ahead of the
//! user's own, and a key is skipped when the user passed that flag.

use std::ffi::OsString;

use clap::Command;
use toml::{Table, Value};

use crate::Failure;

fn flag_name(tok: &str) -> Option<&str> {
    let body = tok.strip_prefix("--")?;
    Some(body.split_once('=').map_or(body, |(k, _)| k))
}

fn config_path(argv: &[String]) -> Option<String> {
    let mut it = argv.iter();
    while let Some(tok) = it.next() {
        if tok == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = tok.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

/// Subcommand names along the path, with the index of the last one.
fn subcommand_path(cmd: &Command, argv: &[String]) -> (Vec<String>, usize) {
    let globals: Vec<(String, bool)> = cmd
        .get_arguments()
        .filter_map(|a| Some((a.get_long()?.to_string(), a.get_action().takes_values())))
        .collect();
    let mut path = Vec::new();
    let mut last = 0;
    let mut cur = cmd.clone();
    let mut i = 1;
    while i < argv.len() {
        let tok = &argv[i];
        if tok.starts_with("--") {
            if !tok.contains('=') {
                let name = flag_name(tok).unwrap_or_default();
                let takes = cur
                    .get_arguments()
                    .find(|a| a.get_long() == Some(name))
                    .map(|a| a.get_action().takes_values())
                    .or_else(|| globals.iter().find(|(n, _)| n == name).map(|g| g.1))
                    .unwrap_or(false);
                if takes {
                    i += 1;
                }
            }
        } else if let Some(sub) = cur.find_subcommand(tok).cloned() {
            path.push(tok.clone());
            last = i;
            cur = sub;
        } else {
            break;
        }
        i += 1;
    }
    (path, last)
}

fn push_value(key: &str, v: &Value, out: &mut Vec<String>) -> Result<(), Failure> {
    let flag = format!("--{key}");
    match v {
        Value::Boolean(true) => out.push(flag),
        Value::Boolean(false) => {}
        Value::String(s) => out.extend([flag, s.clone()]),
        Value::Integer(n) => out.extend([flag, n.to_string()]),
        Value::Float(x) => out.extend([flag, x.to_string()]),
        Value::Array(items) => {
            for item in items {
                push_value(key, item, out)?;
            }
        }
        other => return Err(Failure::usage(format!("config key `{key}`: unsupported value {other}"))),
    }
    Ok(())
}

/// Returns `argv` with the config file's settings spliced in.
pub fn merge(cmd: &Command, argv: Vec<OsString>) -> Result<Vec<OsString>, Failure> {
    let argv: Vec<String> = argv
        .into_iter()
        .map(|a| a.into_string().map_err(|_| Failure::usage("arguments must be valid UTF-8")))
        .collect::<Result<_, _>>()?;
    let Some(path) = config_path(&argv) else {
        return Ok(argv.into_iter().map(OsString::from).collect());
    };
    let text = std::fs::read_to_string(&path).map_err(|e| Failure::usage(format!("config {path}: {e}")))?;
    let table: Table = text.parse().map_err(|e| Failure::usage(format!("config {path}: {e}")))?;
    let (sub_path, last) = subcommand_path(cmd, &argv);
    let given: Vec<&str> = argv.iter().filter_map(|t| flag_name(t)).collect();

    let mut injected = Vec::new();
    let mut scope = Some(&table);
    let mut depth = 0;
    while let Some(t) = scope {
        for (k, v) in t {
            if v.is_table() {
                continue;
            }
            if k == "config" {
                return Err(Failure::usage("config files cannot nest `config`"));
            }
            if !given.contains(&k.as_str()) {
                push_value(k, v, &mut injected)?;
            }
        }
        scope = sub_path.get(depth).and_then(|name| t.get(name)).and_then(Value::as_table);
        depth += 1;
    }
    let mut out = argv[..=last].to_vec();
    out.extend(injected);
    out.extend_from_slice(&argv[last + 1..]);
    Ok(out.into_iter().map(OsString::from).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::args::Cli;
    use clap::CommandFactory;

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn finds_nested_subcommands_past_global_flags() {
        let cmd = Cli::command();
        let (path, last) = subcommand_path(&cmd, &argv("mzero --prec 64 bench --out csv root --m 1..3"));
        assert_eq!(path, ["bench", "root"]);
        assert_eq!(last, 6);
        assert_eq!(flag_name("--m=3"), Some("m"));
    }

    #[test]
    fn flags_on_the_command_line_win() {
        let dir = std::env::temp_dir().join(format!("mzero-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("c.toml");
        std::fs::write(&p, "seed = 5\n[bench]\n[bench.root]\nm = \"2\"\ntrials = 20000\n").unwrap();
        let raw = format!("mzero --config {} bench root --m 3", p.display());
        let merged: Vec<String> = merge(&Cli::command(), argv(&raw).into_iter().map(OsString::from).collect())
            .unwrap()
            .into_iter()
            .map(|s| s.into_string().unwrap())
            .collect();
        assert_eq!(merged[5..], argv("--seed 5 --trials 20000 --m 3"));
        std::fs::remove_dir_all(dir).unwrap();
    }
}
