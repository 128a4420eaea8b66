//! JSON serialization of verification reports.
//!
//! The body (`meta`, `points`, `aggregate`) is a pure function of the run
//! configuration. The header carries a SHA-256 of the compact body and,
//! only when requested, wall-clock timing, so default reports are
//! byte-identical across runs and thread counts.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analysis::{Aggregate, Meta, PointRecord, VerificationReport};

pub const SCHEMA: &str = "wefe-report/1";

#[derive(Serialize)]
struct Body<'a> {
    meta: &'a Meta,
    points: &'a [PointRecord],
    aggregate: &'a Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Header {
    pub schema: &'static str,
    /// Hex SHA-256 of the compact JSON body.
    pub body_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<f64>,
}

#[derive(Serialize)]
struct Document<'a> {
    header: Header,
    #[serde(flatten)]
    body: Body<'a>,
}

fn body(report: &VerificationReport) -> Body<'_> {
    Body {
        meta: &report.meta,
        points: &report.points,
        aggregate: &report.aggregate,
    }
}

/// SHA-256 of the compact body serialization.
pub fn body_checksum(report: &VerificationReport) -> String {
    let compact = serde_json::to_vec(&body(report)).expect("reports serialize");
    Sha256::digest(&compact)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Pretty JSON with the header first.
pub fn to_json(report: &VerificationReport, timing_ms: Option<f64>) -> String {
    let doc = Document {
        header: Header {
            schema: SCHEMA,
            body_sha256: body_checksum(report),
            timing_ms,
        },
        body: body(report),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("reports serialize");
    text.push('\n');
    text
}
