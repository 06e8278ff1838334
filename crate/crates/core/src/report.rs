//! System-by-metric and class-by-system result tables, as JSON and as
//! aligned text with percentages to one decimal.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::metrics::{F1Report, PsdsReport};

/// Scores of one system; any metric may be absent.
#[derive(Debug, Clone, Default)]
pub struct SystemResult {
    pub name: String,
    pub f1: Option<F1Report>,
    pub psds1: Option<PsdsReport>,
    pub psds2: Option<PsdsReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemRow {
    pub system: String,
    pub collar_f1: Option<f64>,
    pub psds1: Option<f64>,
    pub psds2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub class: String,
    /// One entry per system, in `systems` order.
    pub f1: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTables {
    pub systems: Vec<SystemRow>,
    pub class_systems: Vec<String>,
    pub classes: Vec<ClassRow>,
}

pub fn report_tables(results: &[SystemResult]) -> ReportTables {
    let systems = results
        .iter()
        .map(|r| SystemRow {
            system: r.name.clone(),
            collar_f1: r.f1.as_ref().map(|f| f.macro_f1),
            psds1: r.psds1.as_ref().map(|p| p.psds),
            psds2: r.psds2.as_ref().map(|p| p.psds),
        })
        .collect();
    // class order from the first system that has an F1 report
    let class_names: Vec<String> = results
        .iter()
        .find_map(|r| r.f1.as_ref())
        .map(|f| f.classes.iter().map(|c| c.class.clone()).collect())
        .unwrap_or_default();
    let classes = class_names
        .iter()
        .map(|name| ClassRow {
            class: name.clone(),
            f1: results
                .iter()
                .map(|r| r.f1.as_ref().and_then(|f| f.class(name)).map(|c| c.f1))
                .collect(),
        })
        .collect();
    ReportTables {
        systems,
        class_systems: results.iter().map(|r| r.name.clone()).collect(),
        classes,
    }
}

/// Fraction as a percentage with one decimal, or `-` when absent.
pub fn percent(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{:.1}", x * 100.0))
}

impl ReportTables {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let name_w = self
            .systems
            .iter()
            .map(|s| s.system.len())
            .chain(std::iter::once("System".len()))
            .max()
            .unwrap_or(6);
        let _ = writeln!(
            out,
            "{:<name_w$}  {:>15}  {:>6}  {:>6}",
            "System", "Collar-based F1", "PSDS1", "PSDS2"
        );
        for s in &self.systems {
            let _ = writeln!(
                out,
                "{:<name_w$}  {:>15}  {:>6}  {:>6}",
                s.system,
                percent(s.collar_f1),
                percent(s.psds1),
                percent(s.psds2)
            );
        }
        out.push('\n');

        let class_w = self
            .classes
            .iter()
            .map(|c| c.class.len())
            .chain(["Class".len(), "Collar-based F1 (Average)".len()])
            .max()
            .unwrap_or(5);
        let col_w: Vec<usize> = self.class_systems.iter().map(|s| s.len().max(5)).collect();
        let _ = write!(out, "{:<class_w$}", "Class");
        for (s, w) in self.class_systems.iter().zip(&col_w) {
            let _ = write!(out, "  {s:>w$}");
        }
        out.push('\n');
        for row in &self.classes {
            let _ = write!(out, "{:<class_w$}", row.class);
            for (v, w) in row.f1.iter().zip(&col_w) {
                let _ = write!(out, "  {:>w$}", percent(*v));
            }
            out.push('\n');
        }
        if !self.classes.is_empty() {
            let _ = write!(out, "{:<class_w$}", "Collar-based F1 (Average)");
            for (s, w) in self.systems.iter().zip(&col_w) {
                let _ = write!(out, "  {:>w$}", percent(s.collar_f1));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ClassScore;

    fn f1_report(macro_f1: f64) -> F1Report {
        F1Report {
            classes: vec![ClassScore::from_counts("Speech", 1, 1, 1)],
            macro_f1,
        }
    }

    #[test]
    fn percentages_have_one_decimal() {
        assert_eq!(percent(Some(0.465)), "46.5");
        assert_eq!(percent(Some(1.0)), "100.0");
        assert_eq!(percent(None), "-");
    }

    #[test]
    fn single_system_renders() {
        let t = report_tables(&[SystemResult {
            name: "sys".into(),
            f1: Some(f1_report(0.465)),
            ..Default::default()
        }]);
        let text = t.render_text();
        assert!(text.lines().nth(1).unwrap().contains("46.5"), "{text}");
        assert!(text.contains("Speech"));
    }

    #[test]
    fn empty_tables_are_header_only() {
        let t = report_tables(&[]);
        assert!(t.systems.is_empty() && t.classes.is_empty());
        let text = t.render_text();
        assert_eq!(text.lines().filter(|l| !l.is_empty()).count(), 2);
    }

    #[test]
    fn json_reparses_exactly() {
        let t = report_tables(&[SystemResult {
            name: "a".into(),
            f1: Some(f1_report(0.1 + 0.2)),
            ..Default::default()
        }]);
        let text = serde_json::to_string(&t).unwrap();
        let back: ReportTables = serde_json::from_str(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.systems[0].collar_f1.unwrap().to_bits(), (0.1f64 + 0.2).to_bits());
    }
}
