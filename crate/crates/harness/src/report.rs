use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use oscbath::PhaseSpaceField64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Kind};
use crate::Result;

#[derive(Clone, Debug)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// One embedded pass/fail check with the number it was decided on.
#[derive(Clone, Debug, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub bound: String,
}

impl Assertion {
    pub fn le(name: &str, value: f64, bound: f64) -> Self {
        Assertion { name: name.into(), passed: value <= bound, value, bound: format!("<= {bound:e}") }
    }

    pub fn ge(name: &str, value: f64, bound: f64) -> Self {
        Assertion { name: name.into(), passed: value >= bound, value, bound: format!(">= {bound:e}") }
    }

    pub fn lt(name: &str, value: f64, bound: f64) -> Self {
        Assertion { name: name.into(), passed: value < bound, value, bound: format!("< {bound:e}") }
    }

    pub fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Assertion { name: name.into(), passed: value >= lo && value <= hi, value, bound: format!("in [{lo}, {hi}]") }
    }

    /// A yes/no property; `value` is the witness reported alongside.
    pub fn holds(name: &str, passed: bool, value: f64, what: &str) -> Self {
        Assertion { name: name.into(), passed, value, bound: what.into() }
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub kind: Kind,
    pub tables: Vec<Table>,
    pub fields: Vec<(String, PhaseSpaceField64)>,
    pub derived: BTreeMap<String, Value>,
    pub assertions: Vec<Assertion>,
}

impl Report {
    pub fn new(kind: Kind) -> Self {
        Report { kind, tables: Vec::new(), fields: Vec::new(), derived: BTreeMap::new(), assertions: Vec::new() }
    }

    pub fn derive(&mut self, key: &str, value: impl Serialize) {
        self.derived.insert(key.into(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    pub fn check(&mut self, a: Assertion) {
        self.assertions.push(a);
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn assertion(&self, name: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.name == name)
    }

    /// Writes `<kind>_<table>.csv`, `<kind>_<field>.csv` and
    /// `<kind>_manifest.json` into `dir`; returns the manifest.
    pub fn write(&self, config: &ExperimentConfig, dir: &Path) -> Result<Value> {
        std::fs::create_dir_all(dir)?;
        let meta = self.metadata(config);
        let meta_ref: Vec<(&str, String)> = meta.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
        let mut outputs: Vec<PathBuf> = Vec::new();
        for t in &self.tables {
            let path = dir.join(format!("{}_{}.csv", self.kind, t.name));
            let header: Vec<&str> = t.header.iter().map(String::as_str).collect();
            oscbath::io::write_table_csv(BufWriter::new(File::create(&path)?), &meta_ref, &header, &t.rows)?;
            outputs.push(path);
        }
        for (name, f) in &self.fields {
            let path = dir.join(format!("{}_{}.csv", self.kind, name));
            oscbath::io::write_field_csv(BufWriter::new(File::create(&path)?), f, &meta_ref)?;
            outputs.push(path);
        }
        let manifest = self.manifest(config, &outputs);
        let path = dir.join(format!("{}_manifest.json", self.kind));
        std::fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n")?;
        Ok(manifest)
    }

    fn metadata(&self, config: &ExperimentConfig) -> Vec<(String, String)> {
        vec![
            ("kind".into(), self.kind.to_string()),
            ("seed".into(), config.seed.to_string()),
            ("harness_version".into(), env!("CARGO_PKG_VERSION").into()),
            ("library_version".into(), oscbath::VERSION.into()),
        ]
    }

    pub fn manifest(&self, config: &ExperimentConfig, outputs: &[PathBuf]) -> Value {
        let files: Vec<String> = outputs
            .iter()
            .map(|p| p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned()))
            .collect();
        json!({
            "kind": self.kind,
            "passed": self.passed(),
            "seed": config.seed,
            "versions": { "harness": env!("CARGO_PKG_VERSION"), "oscbath": oscbath::VERSION },
            "config": config,
            "derived": self.derived,
            "assertions": self.assertions,
            "outputs": files,
        })
    }
}
