//! Config loading: preset, then TOML file, then `--key value` overrides.

use std::path::Path;

use condflow::experiments::ExperimentConfig;
use toml::Value;

pub fn load(preset: &str, file: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig, String> {
    let base = ExperimentConfig::preset(preset).map_err(|e| e.to_string())?;
    let mut tree = Value::try_from(&base).map_err(|e| format!("cannot serialize preset: {e}"))?;
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let file_tree: Value = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        merge(&mut tree, file_tree);
    }
    for (key, value) in parse_overrides(overrides)? {
        set_path(&mut tree, &key, parse_value(&value))?;
    }
    tree.try_into().map_err(|e: toml::de::Error| format!("invalid configuration: {}", e.message()))
}

/// Splits `--a.b 1 --c x` into `[("a.b", "1"), ("c", "x")]`.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let key = arg.strip_prefix("--").ok_or_else(|| format!("expected --key, got {arg:?}"))?;
        if let Some((k, v)) = key.split_once('=') {
            out.push((k.to_string(), v.to_string()));
            continue;
        }
        let value = it.next().ok_or_else(|| format!("missing value for --{key}"))?;
        out.push((key.to_string(), value.clone()));
    }
    Ok(out)
}

/// TOML literal when it parses as one (numbers, booleans, arrays, inline
/// tables), otherwise a bare string.
fn parse_value(raw: &str) -> Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Table(b), Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn set_path(tree: &mut Value, key: &str, value: Value) -> Result<(), String> {
    let mut node = tree;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = node.as_table_mut().ok_or_else(|| format!("--{key}: {} is not a table", parts[..i].join(".")))?;
        if i + 1 == parts.len() {
            table.insert(part.to_string(), value);
            return Ok(());
        }
        node = table.entry(part.to_string()).or_insert_with(|| Value::Table(Default::default()));
    }
    unreachable!("split always yields at least one part")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_reach_nested_fields() {
        let args: Vec<String> = ["--train.epochs", "3", "--data.glyph.blur=1.5", "--quantile", "0.9"].map(String::from).into();
        let cfg = load("glyph", None, &args).unwrap();
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.data.glyph.blur, 1.5);
        assert_eq!(cfg.quantile, 0.9);
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!(load("blobs", None, &["--train.epochs".into(), "many".into()]).is_err());
        assert!(load("blobs", None, &["--train.epochs".into()]).is_err());
        assert!(load("nope", None, &[]).is_err());
    }

    #[test]
    fn strings_fall_back_to_bare_words() {
        let cfg = load("blobs", None, &["--data.kind".into(), "annuli".into()]).unwrap();
        assert_eq!(cfg.data.kind, condflow::experiments::DataKind::Annuli);
    }
}
