//! CSV emission. Floats use Rust's shortest round-trip formatting, rows end
//! with `\n`.

use std::fmt::Write as _;

use gausscbo::cbo::StepRecord;
use gausscbo::gf::GfRecord;

pub const CBO_HEADER: &str = "step,time,kl_consensus,kl_best_particle,ensemble_variance,frozen_count";
pub const GF_HEADER: &str = "step,time,kl";

pub fn cbo_csv(records: &[StepRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CBO_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{:?},{:?},{:?},{:?},{}",
            r.step, r.time, r.consensus_objective, r.min_objective, r.variance, r.frozen
        )
        .unwrap();
    }
    out
}

pub fn gf_csv(records: &[GfRecord]) -> String {
    let mut out = String::with_capacity(40 * (records.len() + 1));
    out.push_str(GF_HEADER);
    out.push('\n');
    for r in records {
        writeln!(out, "{},{:?},{:?}", r.step, r.time, r.kl).unwrap();
    }
    out
}
