//! CSV and Markdown renderings of study results.
//!
//! CSV values use Rust's shortest round-trip formatting, so parsing a file
//! gives back the exact `f64` values. Markdown cells use three decimals.

use std::fmt::Write as _;

use crate::experiments::{ErrorRecord, GammaCase};

#[derive(Clone, Debug, PartialEq)]
pub struct Study {
    pub p: f64,
    pub gamma_case: GammaCase,
    pub records: Vec<ErrorRecord>,
}

impl Study {
    pub fn expected_rate(&self) -> f64 {
        self.gamma_case.expected_rate(self.p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    L,
    S,
    Jump,
}

impl Quantity {
    pub const ALL: [Quantity; 3] = [Quantity::L, Quantity::Jump, Quantity::S];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::L => "L",
            Quantity::S => "S",
            Quantity::Jump => "jump",
        }
    }

    pub fn file_name(self) -> String {
        format!("eoc_{}.csv", self.name())
    }

    pub fn error(self, r: &ErrorRecord) -> f64 {
        match self {
            Quantity::L => r.e_l,
            Quantity::S => r.e_s,
            Quantity::Jump => r.e_jump,
        }
    }

    pub fn eoc(self, r: &ErrorRecord) -> Option<f64> {
        match self {
            Quantity::L => r.eoc_l,
            Quantity::S => r.eoc_s,
            Quantity::Jump => r.eoc_jump,
        }
    }
}

pub const CSV_HEADER: &str = "p,case,level,h,ndof,error,eoc,expected";

/// One CSV for `quantity` covering all studies; the EOC cell of the first
/// level is empty.
pub fn csv(quantity: Quantity, studies: &[Study]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for s in studies {
        for r in &s.records {
            let eoc = quantity.eoc(r).map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                s.p,
                s.gamma_case.number(),
                r.level,
                r.h,
                r.n_dof,
                quantity.error(r),
                eoc,
                s.expected_rate()
            );
        }
    }
    out
}

/// Three EOC tables (`e_L`, `e_jump`, `e_S`), one column per study.
pub fn markdown(studies: &[Study]) -> String {
    let mut out = String::new();
    let levels = studies
        .iter()
        .flat_map(|s| s.records.iter().map(|r| r.level))
        .max()
        .unwrap_or(0);
    for q in Quantity::ALL {
        let _ = writeln!(out, "### EOC of e_{}\n", q.name());
        out.push_str("| i |");
        for s in studies {
            let _ = write!(out, " p={} case {} |", s.p, s.gamma_case.number());
        }
        out.push_str("\n|---|");
        for _ in studies {
            out.push_str("---|");
        }
        out.push('\n');
        for level in 1..=levels {
            let _ = write!(out, "| {level} |");
            for s in studies {
                let cell = s
                    .records
                    .iter()
                    .find(|r| r.level == level)
                    .map(|r| q.eoc(r).map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into()))
                    .unwrap_or_default();
                let _ = write!(out, " {cell} |");
            }
            out.push('\n');
        }
        out.push_str("| expected |");
        for s in studies {
            let _ = write!(out, " {:.3} |", s.expected_rate());
        }
        out.push_str("\n\n");
    }
    out
}
