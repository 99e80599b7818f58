//! Report document shared by the text and JSON renderers.

use std::fmt::Write;

use serde::Serialize;

/// Schema identifier carried by every JSON report.
pub const SCHEMA_ID: &str = "urn:lik:report:v1";

#[derive(Debug, Default, Serialize)]
pub struct Report {
    pub system: SystemReport,
    pub weights: Option<WeightsReport>,
    pub densities: Vec<DensityReport>,
    pub symmetries: Vec<SymmetryReport>,
    pub recursion_operator: Option<OperatorReport>,
    pub conditions: Vec<String>,
    pub verification: Vec<Verdict>,
}

#[derive(Debug, Default, Serialize)]
pub struct SystemReport {
    pub components: Vec<String>,
    pub params: Vec<String>,
    /// Values fixed on the command line, `a = 2`.
    pub fixed: Vec<String>,
    pub equations: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct Named {
    pub name: String,
    pub value: String,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightStatus {
    Unique,
    Underdetermined,
    Inconsistent,
}

#[derive(Debug, Serialize)]
pub struct WeightsReport {
    pub status: WeightStatus,
    pub values: Vec<Named>,
    pub detail: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct DensityReport {
    pub rank: String,
    pub rho: String,
    /// Satisfies `Dt(rho) + Delta(flux) = 0`.
    pub flux: String,
    pub conditions: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct SymmetryReport {
    pub ranks: Vec<String>,
    pub components: Vec<Named>,
    pub conditions: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct EntryReport {
    pub row: usize,
    pub col: usize,
    pub entry: String,
}

#[derive(Debug, Serialize)]
pub struct OperatorReport {
    pub rank_matrix: Vec<Vec<String>>,
    pub unknowns: usize,
    pub coefficients: Vec<String>,
    pub entries: Vec<EntryReport>,
}

#[derive(Debug, Serialize)]
pub struct Verdict {
    pub check: String,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(check: &str, passed: bool, detail: impl Into<String>) -> Self {
        Verdict {
            check: check.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.verification.iter().all(|v| v.passed)
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Document<'a> {
            #[serde(rename = "$schema")]
            schema: &'static str,
            #[serde(flatten)]
            report: &'a Report,
        }
        let doc = Document {
            schema: SCHEMA_ID,
            report: self,
        };
        let mut out = serde_json::to_string_pretty(&doc).expect("report serializes");
        out.push('\n');
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("system:\n");
        for eq in &self.system.equations {
            let _ = writeln!(out, "  {eq}");
        }
        if !self.system.fixed.is_empty() {
            let _ = writeln!(out, "  with {}", self.system.fixed.join(", "));
        }
        if let Some(w) = &self.weights {
            let values: Vec<String> = w
                .values
                .iter()
                .map(|n| format!("w({}) = {}", n.name, n.value))
                .collect();
            match w.status {
                WeightStatus::Unique => {
                    let _ = writeln!(out, "weights: {}", values.join(", "));
                }
                WeightStatus::Underdetermined => {
                    let _ = writeln!(
                        out,
                        "weights: underdetermined ({})",
                        w.detail.as_deref().unwrap_or("")
                    );
                }
                WeightStatus::Inconsistent => {
                    let _ = writeln!(
                        out,
                        "weights: inconsistent ({})",
                        w.detail.as_deref().unwrap_or("")
                    );
                }
            }
        }
        for d in &self.densities {
            let _ = writeln!(out, "density of rank {}:", d.rank);
            let _ = writeln!(out, "  rho = {}", d.rho);
            let _ = writeln!(out, "  flux = {}", d.flux);
            if !d.conditions.is_empty() {
                let _ = writeln!(out, "  when {}", d.conditions.join(", "));
            }
        }
        for s in &self.symmetries {
            let _ = writeln!(out, "symmetry of ranks ({}):", s.ranks.join(", "));
            for c in &s.components {
                let _ = writeln!(out, "  {} = {}", c.name, c.value);
            }
            if !s.conditions.is_empty() {
                let _ = writeln!(out, "  when {}", s.conditions.join(", "));
            }
        }
        if let Some(r) = &self.recursion_operator {
            let rows: Vec<String> = r
                .rank_matrix
                .iter()
                .map(|row| format!("[{}]", row.join(", ")))
                .collect();
            let _ = writeln!(
                out,
                "recursion operator (rank matrix [{}]):",
                rows.join(", ")
            );
            for e in &r.entries {
                let _ = writeln!(out, "  R({},{}) = {}", e.row, e.col, e.entry);
            }
        }
        if !self.conditions.is_empty() {
            out.push_str("conditions:\n");
            for c in &self.conditions {
                let _ = writeln!(out, "  {c}");
            }
        }
        if !self.verification.is_empty() {
            out.push_str("verification:\n");
            for v in &self.verification {
                let mark = if v.passed { "ok  " } else { "FAIL" };
                let _ = writeln!(out, "  {mark} {}: {}", v.check, v.detail);
            }
        }
        out
    }
}
