//! `--config` support.
//!
//! The config file is a JSON object mapping long flag names to values.
//! Keys named after a subcommand may hold an object that applies only to
//! that subcommand. Values are spliced in as flags right after the
//! subcommand name, so any flag given on the command line (parsed later,
//! with `args_override_self`) wins.

use std::ffi::OsString;
use std::path::PathBuf;

use serde_json::{Map, Value};

use crate::error::{Error, Result};

const SUBCOMMANDS: [&str; 6] = ["phantom", "fingerprint", "fcn-fit", "normalize", "segment", "evaluate"];

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

fn value_to_flags(key: &str, value: &Value, out: &mut Vec<OsString>) -> Result<()> {
    let flag = format!("--{}", key.replace('_', "-"));
    match value {
        Value::Bool(true) => out.push(flag.into()),
        Value::Bool(false) | Value::Null => {}
        Value::Number(n) => out.extend([flag.into(), n.to_string().into()]),
        Value::String(s) => out.extend([flag.into(), s.into()]),
        Value::Array(_) | Value::Object(_) => {
            return Err(Error::InvalidArgument(format!(
                "config key {key:?} must be a scalar"
            )))
        }
    }
    Ok(())
}

/// Returns `args` with the config file's flags inserted after the
/// subcommand. Arguments are returned unchanged without `--config`.
pub fn merge_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let root: Map<String, Value> = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.clone(),
        source: e,
    })?;
    let Some(pos) = args
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
    else {
        return Ok(args);
    };
    let sub = args[pos].to_string_lossy().into_owned();

    let mut injected = Vec::new();
    for (key, value) in &root {
        if SUBCOMMANDS.contains(&key.as_str()) {
            continue;
        }
        if key == "config" {
            return Err(Error::InvalidArgument("config files cannot nest --config".into()));
        }
        value_to_flags(key, value, &mut injected)?;
    }
    if let Some(section) = root.get(&sub) {
        let Value::Object(section) = section else {
            return Err(Error::InvalidArgument(format!(
                "config section {sub:?} must be an object"
            )));
        };
        for (key, value) in section {
            value_to_flags(key, value, &mut injected)?;
        }
    }
    let mut out = args[..=pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}
