//! Machine-readable command reports.

use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::CliError;

/// Uniform report shape: a verdict, named values, named margins, and a
/// list of checked assertions.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub verdict: String,
    pub values: Map<String, Value>,
    pub margins: Map<String, Value>,
    pub assertions: Vec<Assertion>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub got: f64,
    pub want: f64,
    pub tol: f64,
}

impl Report {
    pub fn new(verdict: impl Into<String>) -> Self {
        Self {
            verdict: verdict.into(),
            values: Map::new(),
            margins: Map::new(),
            assertions: Vec::new(),
        }
    }

    pub fn value(&mut self, name: &str, v: impl Serialize) {
        self.values.insert(name.to_string(), json!(v));
    }

    pub fn margin(&mut self, name: &str, v: f64) {
        self.margins.insert(name.to_string(), json!(v));
    }

    /// Records a tolerance assertion and returns whether it passed.
    pub fn check(&mut self, name: &str, got: f64, want: f64, tol: f64) -> bool {
        let passed = (got - want).abs() <= tol;
        self.assertions.push(Assertion { name: name.to_string(), passed, got, want, tol });
        passed
    }

    /// Records a boolean assertion (got/want encode the flag as 0/1).
    pub fn check_flag(&mut self, name: &str, ok: bool) -> bool {
        self.assertions.push(Assertion {
            name: name.to_string(),
            passed: ok,
            got: if ok { 1.0 } else { 0.0 },
            want: 1.0,
            tol: 0.0,
        });
        ok
    }

    pub fn all_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.passed)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        }
        std::fs::write(path, self.to_json())
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
    }

    /// Compact per-assertion diff table for the terminal.
    pub fn render_assertions(&self) -> String {
        let mut out = String::new();
        for a in &self.assertions {
            let status = if a.passed { "ok  " } else { "FAIL" };
            out.push_str(&format!(
                "  [{status}] {:<32} got {:>12.6}  want {:>10.6} +/- {:.0e}\n",
                a.name, a.got, a.want, a.tol
            ));
        }
        out
    }
}

/// Matrix rendered as nested rows for reports.
pub fn matrix_rows(m: &minimax_adaptive::Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| (0..m.cols()).map(|j| m.get(i, j)).collect()).collect()
}

pub fn sym_rows(m: &minimax_adaptive::SymmetricMatrix) -> Vec<Vec<f64>> {
    (0..m.dim()).map(|i| (0..m.dim()).map(|j| m.get(i, j)).collect()).collect()
}
