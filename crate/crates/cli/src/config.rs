//! Splices a JSON config file into argv ahead of the command-line flags, so
//! that later (command-line) occurrences override file values.

use std::ffi::OsString;

use serde_json::Value;

use crate::{CliError, CliResult};

const SUBCOMMANDS: [&str; 5] = ["splitter", "rabi-trace", "fit", "eid", "verify"];

pub(crate) fn expand(argv: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let mut iter = argv.into_iter();
    let program = iter.next().unwrap_or_else(|| OsString::from("qbranch"));
    let mut rest = Vec::new();
    let mut path = None;
    while let Some(arg) = iter.next() {
        match arg.to_str() {
            Some("--config") => {
                let value = iter.next().ok_or_else(|| CliError::Usage("--config needs a file".into()))?;
                path = Some(value);
            }
            Some(s) if s.starts_with("--config=") => path = Some(OsString::from(&s["--config=".len()..])),
            _ => rest.push(arg),
        }
    }
    let Some(path) = path else {
        let mut out = vec![program];
        out.extend(rest);
        return Ok(out);
    };

    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.to_string_lossy())))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config JSON: {e}")))?;
    let Value::Object(map) = doc else {
        return Err(CliError::Usage("config must be a JSON object".into()));
    };

    let user_command = rest.first().and_then(|a| a.to_str()).filter(|a| SUBCOMMANDS.contains(a)).map(str::to_owned);
    let file_command = match map.get("command") {
        None => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(CliError::Usage("config key \"command\" must be a string".into())),
    };
    let command = match (user_command.as_deref(), file_command.as_deref()) {
        (Some(u), Some(f)) if u != f => {
            return Err(CliError::Usage(format!("config is for \"{f}\" but \"{u}\" was requested")))
        }
        (Some(u), _) => u.to_owned(),
        (None, Some(f)) => f.to_owned(),
        (None, None) => return Err(CliError::Usage("no subcommand given and config has no \"command\"".into())),
    };

    let mut out = vec![program, OsString::from(&command)];
    for (key, value) in &map {
        if key == "command" {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        push_value(&mut out, &flag, value)?;
    }
    let skip = usize::from(user_command.is_some());
    out.extend(rest.into_iter().skip(skip));
    Ok(out)
}

fn push_value(out: &mut Vec<OsString>, flag: &str, value: &Value) -> CliResult<()> {
    match value {
        Value::Null | Value::Bool(false) => {}
        Value::Bool(true) => out.push(flag.into()),
        Value::Number(n) => out.extend([flag.into(), n.to_string().into()]),
        Value::String(s) => out.extend([flag.into(), s.into()]),
        Value::Array(items) => {
            for item in items {
                if matches!(item, Value::Array(_) | Value::Object(_)) {
                    return Err(CliError::Usage(format!("config key {flag}: nested values are not flags")));
                }
                push_value(out, flag, item)?;
            }
        }
        Value::Object(_) => return Err(CliError::Usage(format!("config key {flag}: objects are not flags"))),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: Vec<OsString>) -> Vec<String> {
        v.into_iter().map(|s| s.into_string().unwrap()).collect()
    }

    #[test]
    fn passthrough_without_config() {
        let argv = vec!["q".into(), "fit".into(), "--omega".into(), "1".into()];
        assert_eq!(strings(expand(argv).unwrap()), ["q", "fit", "--omega", "1"]);
    }

    #[test]
    fn file_flags_precede_user_flags() {
        let dir = std::env::temp_dir().join(format!("qbranch-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.json");
        std::fs::write(&path, r#"{"command": "splitter", "n": 3, "eps_r": 0.1, "quick": true, "window": ["0:0:1"]}"#)
            .unwrap();
        let argv = vec!["q".into(), "--config".into(), path.clone().into(), "--n".into(), "4".into()];
        let got = strings(expand(argv).unwrap());
        assert_eq!(got, ["q", "splitter", "--eps-r", "0.1", "--n", "3", "--quick", "--window", "0:0:1", "--n", "4"]);
        std::fs::remove_dir_all(dir).unwrap();
    }
}
