//! Classification of p-values and rendering of battery reports.
//!
//! Text result lines match
//!
//! ```text
//! ^(\S+)  n=(\d+)  stat=(\S+)  p=(\S+)  (PASS|WEAK|FAIL)$
//! ```
//!
//! and tests that could not run are listed as `<name>  NOT RUN  <reason>`.
//! The last line is always the verdict.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::battery::TestResult;
use crate::stats::PValue;

/// Version of the JSON layout emitted by [`render`].
pub const SCHEMA_VERSION: u32 = 1;

/// p below this (or above its complement) is a failure.
pub const FAIL_THRESHOLD: f64 = 1e-6;
/// p below this (or above its complement) is suspicious.
pub const WEAK_THRESHOLD: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Pass,
    Weak,
    Fail,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Pass => "PASS",
            Classification::Weak => "WEAK",
            Classification::Fail => "FAIL",
        })
    }
}

/// Two-sided: a p-value stuck near 1 is as suspicious as one near 0.
pub fn classify(p: PValue) -> Classification {
    let p = p.value();
    if !(FAIL_THRESHOLD..=1.0 - FAIL_THRESHOLD).contains(&p) {
        Classification::Fail
    } else if !(WEAK_THRESHOLD..=1.0 - WEAK_THRESHOLD).contains(&p) {
        Classification::Weak
    } else {
        Classification::Pass
    }
}

/// A selected test that produced no result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NotRun {
    pub test_name: String,
    pub reason: String,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub pass: u64,
    pub weak: u64,
    pub fail: u64,
    pub not_run: u64,
}

impl Counts {
    pub fn total(&self) -> u64 {
        self.pass + self.weak + self.fail + self.not_run
    }

    pub fn is_clean(&self) -> bool {
        self.weak == 0 && self.fail == 0 && self.not_run == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub schema_version: u32,
    pub stream: String,
    pub total_words: u64,
    pub results: Vec<TestResult>,
    pub not_run: Vec<NotRun>,
    pub counts: Counts,
    pub warnings: Vec<String>,
    pub verdict: String,
}

impl BatteryReport {
    pub fn assemble(
        stream: String,
        total_words: u64,
        results: Vec<TestResult>,
        not_run: Vec<NotRun>,
        warnings: Vec<String>,
    ) -> Self {
        let mut counts = Counts {
            not_run: not_run.len() as u64,
            ..Counts::default()
        };
        for r in &results {
            match r.classification {
                Classification::Pass => counts.pass += 1,
                Classification::Weak => counts.weak += 1,
                Classification::Fail => counts.fail += 1,
            }
        }
        let verdict = verdict_line(&counts);
        BatteryReport {
            schema_version: SCHEMA_VERSION,
            stream,
            total_words,
            results,
            not_run,
            counts,
            warnings,
            verdict,
        }
    }
}

fn verdict_line(counts: &Counts) -> String {
    if counts.is_clean() {
        format!("no anomalies in {} test result(s)", counts.pass)
    } else {
        format!(
            "anomalies in {} of {} test result(s)",
            counts.weak + counts.fail + counts.not_run,
            counts.total()
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verbosity {
    AnomaliesOnly,
    Full,
}

pub fn result_line(r: &TestResult) -> String {
    format!(
        "{}  n={}  stat={:.6}  p={:.6e}  {}",
        r.test_name,
        r.n_consumed_words,
        r.statistic,
        r.p.value(),
        r.classification
    )
}

pub fn render(report: &BatteryReport, format: Format, verbosity: Verbosity) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        Format::Text => {
            let mut out = String::new();
            for r in &report.results {
                if verbosity == Verbosity::Full || r.classification != Classification::Pass {
                    out.push_str(&result_line(r));
                    out.push('\n');
                }
            }
            for n in &report.not_run {
                out.push_str(&format!("{}  NOT RUN  {}\n", n.test_name, n.reason));
            }
            let c = &report.counts;
            if verbosity == Verbosity::Full || !c.is_clean() {
                out.push_str(&format!(
                    "summary: pass={} weak={} fail={} not_run={}\n",
                    c.pass, c.weak, c.fail, c.not_run
                ));
            }
            out.push_str(&report.verdict);
            out.push('\n');
            out
        }
    }
}

pub fn exit_code(report: &BatteryReport) -> i32 {
    let c = &report.counts;
    if c.fail > 0 || c.not_run > 0 {
        2
    } else if c.weak > 0 {
        1
    } else {
        0
    }
}
