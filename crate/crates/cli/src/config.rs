//! Config files are JSON. Flags override file values key by key.

use crate::failure::{CliResult, Failure};
use serde::de::DeserializeOwned;
use serde_json::{Map, Value};
use std::path::Path;

/// Flag overrides as `(dotted key, value)` pairs; `None` means the flag was
/// not given.
#[derive(Default)]
pub struct Overrides(Vec<(&'static str, Value)>);

impl Overrides {
    pub fn set<T: serde::Serialize>(&mut self, key: &'static str, value: Option<T>) -> &mut Self {
        if let Some(v) = value {
            self.0.push((key, serde_json::to_value(v).expect("flag values serialize")));
        }
        self
    }
}

pub fn read_json(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::config(format!("config {}: {e}", path.display())))
}

fn insert(root: &mut Map<String, Value>, key: &str, value: Value) {
    match key.split_once('.') {
        None => {
            root.insert(key.to_string(), value);
        }
        Some((head, rest)) => {
            let child = root.entry(head).or_insert_with(|| Value::Object(Map::new()));
            if !child.is_object() {
                *child = Value::Object(Map::new());
            }
            insert(child.as_object_mut().unwrap(), rest, value);
        }
    }
}

/// Defaults, then the file, then the flags. Unknown keys are errors.
pub fn resolve<T: DeserializeOwned>(file: Option<&Path>, overrides: &Overrides) -> CliResult<T> {
    let mut root = match file {
        Some(p) => match read_json(p)? {
            Value::Object(m) => m,
            _ => return Err(Failure::config(format!("config {} must be a JSON object", p.display()))),
        },
        None => Map::new(),
    };
    for (k, v) in &overrides.0 {
        insert(&mut root, k, v.clone());
    }
    serde_json::from_value(Value::Object(root)).map_err(|e| Failure::config(e.to_string()))
}
