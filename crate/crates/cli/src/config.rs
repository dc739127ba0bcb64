//! Optional TOML config: a table per subcommand whose keys are long flag
//! names, e.g.
//!
//! ```toml
//! [corpus.build]
//! threshold = 0.9
//! workers = 4
//!
//! [serve]
//! port = 9000
//! ```
//!
//! Values are spliced in as flags right after the subcommand, so flags given
//! on the command line win.

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};

const NESTED: &[&str] = &["synth", "corpus", "features", "gtm", "surface", "session"];

/// Removes `--config PATH` / `--config=PATH` and returns it.
fn take_config(args: &mut Vec<OsString>) -> Result<Option<PathBuf>> {
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy().into_owned();
        if a == "--" {
            break;
        }
        if a == "--config" {
            if i + 1 >= args.len() {
                bail!("--config needs a file path");
            }
            let path = args.remove(i + 1);
            args.remove(i);
            return Ok(Some(path.into()));
        }
        if let Some(p) = a.strip_prefix("--config=") {
            args.remove(i);
            return Ok(Some(p.into()));
        }
        i += 1;
    }
    Ok(None)
}

fn flags_for(table: &toml::Table, section: &str) -> Result<Vec<OsString>> {
    let mut out = Vec::new();
    for (key, value) in table {
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            toml::Value::Boolean(true) => out.push(flag.into()),
            toml::Value::Boolean(false) => {}
            toml::Value::String(s) => out.extend([flag.into(), s.into()]),
            toml::Value::Integer(n) => out.extend([flag.into(), n.to_string().into()]),
            toml::Value::Float(x) => out.extend([flag.into(), x.to_string().into()]),
            other => bail!("config [{section}] {key}: unsupported value {other}"),
        }
    }
    Ok(out)
}

/// Expands `--config` into explicit flags. Without it, `args` is returned as is.
pub fn expand(mut args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = take_config(&mut args)? else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let doc: toml::Table = text
        .parse()
        .with_context(|| format!("parsing config {}", path.display()))?;

    let words: Vec<(usize, String)> = args
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, a)| (i, a.to_string_lossy().into_owned()))
        .filter(|(_, a)| !a.starts_with('-'))
        .take(2)
        .collect();
    let Some((gi, group)) = words.first().cloned() else {
        return Ok(args);
    };
    let (insert_at, table) = if NESTED.contains(&group.as_str()) {
        let Some((ai, action)) = words.get(1).cloned() else {
            return Ok(args);
        };
        let table = doc
            .get(&group)
            .and_then(|g| g.as_table())
            .and_then(|g| g.get(&action))
            .and_then(|t| t.as_table());
        (ai + 1, table.map(|t| (format!("{group}.{action}"), t)))
    } else {
        (
            gi + 1,
            doc.get(&group)
                .and_then(|t| t.as_table())
                .map(|t| (group.clone(), t)),
        )
    };
    if let Some((section, table)) = table {
        let flags = flags_for(table, &section)?;
        args.splice(insert_at..insert_at, flags);
    }
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn splices_section_after_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.toml");
        std::fs::write(
            &cfg,
            "[corpus.build]\nthreshold = 0.9\nworkers = 4\n[serve]\nport = 9000\n",
        )
        .unwrap();
        let c = cfg.to_str().unwrap();

        let out = expand(os(&[
            "timbre",
            "--config",
            c,
            "corpus",
            "build",
            "--workers",
            "2",
        ]))
        .unwrap();
        assert_eq!(
            out,
            os(&[
                "timbre",
                "corpus",
                "build",
                "--threshold",
                "0.9",
                "--workers",
                "4",
                "--workers",
                "2"
            ])
        );

        let out = expand(os(&["timbre", "serve", &format!("--config={c}")])).unwrap();
        assert_eq!(out, os(&["timbre", "serve", "--port", "9000"]));

        let out = expand(os(&["timbre", "--config", c, "gtm", "train"])).unwrap();
        assert_eq!(out, os(&["timbre", "gtm", "train"]));
    }

    #[test]
    fn no_config_is_identity() {
        let args = os(&["timbre", "synth", "render", "--out", "a.wav"]);
        assert_eq!(expand(args.clone()).unwrap(), args);
    }
}
