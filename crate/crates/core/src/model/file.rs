//! Line-oriented model files.
//!
//! ```text
//! [domain]
//! x0 = 0
//! x_max = inf
//!
//! [rates]
//! gamma = const:1
//! mu = const:1
//! beta = powexp:1,2,1
//!
//! [diffusion]
//! D = 2
//!
//! [birth]
//! multiplicity = 1
//! ```
//!
//! `x_min` (domain) defaults to `x0`. Tabulated rates use `table:path.csv`,
//! resolved relative to the model file; the CSV has a header row and two
//! columns `x,value`.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::rate::{parse_real, RateFunction, Table};
use super::ModelSpec;
use crate::error::{Error, Result};

const SECTIONS: [(&str, &[&str]); 4] = [
    ("domain", &["x0", "x_max", "x_min"]),
    ("rates", &["gamma", "mu", "beta"]),
    ("diffusion", &["D"]),
    ("birth", &["multiplicity", "sample_point"]),
];

pub fn load_model(path: &Path) -> Result<ModelSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_model_at(&text, &path.display().to_string(), &base)
}

/// Parses model text; table paths resolve against the working directory.
pub fn parse_model(text: &str) -> Result<ModelSpec> {
    parse_model_at(text, "<string>", &PathBuf::new())
}

fn parse_model_at(text: &str, origin: &str, base: &Path) -> Result<ModelSpec> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };

    let mut section: Option<&str> = None;
    let mut values: HashMap<(String, String), (usize, String)> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            section = Some(
                SECTIONS
                    .iter()
                    .find(|(s, _)| *s == name)
                    .map(|(s, _)| *s)
                    .ok_or_else(|| err(lineno, format!("unknown section [{name}]")))?,
            );
            continue;
        }
        let sec = section.ok_or_else(|| err(lineno, "key outside of any section".into()))?;
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(lineno, format!("expected 'key = value', got '{line}'")))?;
        let key = key.trim();
        let allowed = SECTIONS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.contains(&key) {
            return Err(err(lineno, format!("unknown key '{key}' in [{sec}]")));
        }
        let slot = (sec.to_string(), key.to_string());
        if values.contains_key(&slot) {
            return Err(err(lineno, format!("duplicate key '{key}' in [{sec}]")));
        }
        values.insert(slot, (lineno, value.trim().to_string()));
    }

    let get = |sec: &str, key: &str| values.get(&(sec.to_string(), key.to_string()));
    let real = |sec: &str, key: &str| -> Result<Option<f64>> {
        match get(sec, key) {
            None => Ok(None),
            Some((line, v)) => parse_real(v).map(Some).map_err(|e| err(*line, e.to_string())),
        }
    };
    let required = |sec: &str, key: &str| -> Result<f64> {
        real(sec, key)?.ok_or_else(|| err(0, format!("missing key '{key}' in [{sec}]")))
    };
    let rate = |key: &str| -> Result<RateFunction> {
        let (line, v) = get("rates", key).ok_or_else(|| err(0, format!("missing key '{key}' in [rates]")))?;
        if let Some(p) = v.strip_prefix("table:") {
            load_table(&base.join(p.trim())).map_err(|e| err(*line, e.to_string()))
        } else {
            RateFunction::parse_inline(v).map_err(|e| err(*line, e.to_string()))
        }
    };

    let x0 = required("domain", "x0")?;
    Ok(ModelSpec {
        x_min: real("domain", "x_min")?.unwrap_or(x0),
        x0,
        x_max: required("domain", "x_max")?,
        gamma: rate("gamma")?,
        mu: rate("mu")?,
        beta: rate("beta")?,
        diffusion: real("diffusion", "D")?.unwrap_or(0.0),
        birth_multiplicity: real("birth", "multiplicity")?.unwrap_or(1.0),
        birth_sample_point: real("birth", "sample_point")?,
    })
}

fn load_table(path: &Path) -> Result<RateFunction> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut nodes = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::Domain(format!(
                "{}: expected 2 columns, found {}",
                path.display(),
                rec.len()
            )));
        }
        nodes.push((parse_real(&rec[0])?, parse_real(&rec[1])?));
    }
    Ok(RateFunction::Tabulated(Table::new(nodes, true)?))
}
