//! `key = value` config files, expanded into flags placed before the
//! command-line ones so that explicit flags win.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Command;

pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected `key = value`, got {raw:?}", i + 1);
        };
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            bail!("config line {}: empty key", i + 1);
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// Turns config entries into flags for `sub`, checking each key against the
/// subcommand's arguments.
pub fn config_flags(cmd: &Command, sub: &str, entries: &[(String, String)]) -> Result<Vec<String>> {
    let sc = cmd
        .find_subcommand(sub)
        .with_context(|| format!("unknown subcommand {sub:?}"))?;
    let mut flags = Vec::new();
    for (k, v) in entries {
        if k == "config" {
            bail!("config files cannot include other config files");
        }
        let Some(arg) = sc
            .get_arguments()
            .find(|a| a.get_long() == Some(k.as_str()))
        else {
            bail!("unknown config key {k:?} for `{sub}`");
        };
        if arg.get_action().takes_values() {
            flags.push(format!("--{k}"));
            flags.extend(v.split_whitespace().map(str::to_string));
        } else {
            match v.as_str() {
                "true" | "yes" | "1" => flags.push(format!("--{k}")),
                "false" | "no" | "0" => {}
                _ => bail!("config key {k:?} expects true or false, got {v:?}"),
            }
        }
    }
    Ok(flags)
}

/// Returns argv with the `--config FILE` of the subcommand replaced by the
/// file's flags, or `None` when no config is given.
pub fn expand(cmd: &Command, argv: &[String]) -> Result<Option<Vec<String>>> {
    let Some(sub) = argv.get(1) else {
        return Ok(None);
    };
    let mut rest = Vec::new();
    let mut path = None;
    let mut it = argv[2..].iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = it.next().cloned();
            if path.is_none() {
                bail!("--config needs a file");
            }
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a.clone());
        }
    }
    let Some(path) = path else {
        return Ok(None);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .with_context(|| format!("reading config {path}"))?;
    let mut out = vec![argv[0].clone(), sub.clone()];
    out.extend(config_flags(cmd, sub, &parse_config(&text)?)?);
    out.extend(rest);
    Ok(Some(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_underscores() {
        let e = parse_config("# c\nseed = 3\nflip_test = true # x\n\n").unwrap();
        assert_eq!(
            e,
            vec![
                ("seed".into(), "3".into()),
                ("flip-test".into(), "true".into())
            ]
        );
    }

    #[test]
    fn rejects_lines_without_equals() {
        assert!(parse_config("seed 3").is_err());
    }
}
