use std::ffi::OsString;
use std::path::Path;

/// Parses `key=value` lines. Blank lines and lines starting with `#` are
/// skipped; keys may carry a leading `--`.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("line {}: expected key=value, got {line:?}", i + 1));
        };
        let key = key.trim().trim_start_matches("--");
        if key.is_empty() {
            return Err(format!("line {}: empty key", i + 1));
        }
        pairs.push((key.to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter().skip(1);
    while let Some(arg) = it.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

fn has_flag(argv: &[OsString], key: &str) -> bool {
    let flag = format!("--{key}");
    let with_value = format!("--{key}=");
    argv.iter().any(|a| {
        let s = a.to_string_lossy();
        s == flag || s.starts_with(&with_value)
    })
}

/// Index of the subcommand: the first positional argument.
fn subcommand_index(argv: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let s = argv[i].to_string_lossy();
        if s == "--config" {
            i += 2;
            continue;
        }
        if !s.starts_with('-') {
            return Some(i);
        }
        i += 1;
    }
    None
}

/// Splices the `--config` file's keys in as flags right after the
/// subcommand, skipping any key already given on the command line.
/// `true` becomes a bare switch and `false` drops the key.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(Path::new(&path)).map_err(|e| {
        format!(
            "cannot read config file {}: {e}",
            Path::new(&path).display()
        )
    })?;
    let pairs = parse(&text)?;
    let Some(at) = subcommand_index(&argv) else {
        return Ok(argv);
    };
    let mut injected = Vec::new();
    for (key, value) in pairs {
        if key == "config" || has_flag(&argv, &key) {
            continue;
        }
        match value.as_str() {
            "false" => {}
            "true" => injected.push(OsString::from(format!("--{key}"))),
            _ => {
                injected.push(OsString::from(format!("--{key}")));
                injected.push(OsString::from(value));
            }
        }
    }
    let mut out = argv;
    out.splice(at + 1..at + 1, injected);
    Ok(out)
}
