//! Flat `key=value` config files, spliced into argv ahead of the user's own
//! flags so that flags given on the command line win.

use std::fs;

/// Expands `--config PATH` (or `--config=PATH`) into `--key value` pairs
/// placed right after the subcommand. Keys are long flag names; `true`
/// becomes a bare switch and `false` drops the key.
pub fn expand(argv: Vec<String>, subcommands: &[&str]) -> Result<Vec<String>, String> {
    let mut path = None;
    let mut rest = Vec::with_capacity(argv.len());
    let mut it = argv.into_iter();
    while let Some(arg) = it.next() {
        if arg == "--config" {
            path = Some(it.next().ok_or("--config needs a path")?);
        } else if let Some(p) = arg.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("--config {path}: {e}"))?;
    let injected = parse(&text).map_err(|e| format!("--config {path}: {e}"))?;
    let at = rest
        .iter()
        .skip(1)
        .position(|a| subcommands.contains(&a.as_str()))
        .map_or(rest.len(), |p| p + 2);
    rest.splice(at..at, injected);
    Ok(rest)
}

fn parse(text: &str) -> Result<Vec<String>, String> {
    let mut args = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key=value", k + 1))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || key == "config" {
            return Err(format!("line {}: invalid key {key:?}", k + 1));
        }
        match value {
            "true" => args.push(format!("--{key}")),
            "false" => {}
            v => {
                args.push(format!("--{key}"));
                args.push(v.to_string());
            }
        }
    }
    Ok(args)
}
