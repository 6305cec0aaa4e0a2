//! Plot-ready CSV tables. Missing values are empty fields; numbers use the
//! shortest decimal form that parses back to the same `f64`.

use std::fmt::Write as _;

use flatness::verification::Statement;
use flatness::Bracket;

use crate::commands::{AnalyzeReport, VerifyReport};

pub const PROFILE_COLUMNS: &str = "i,radius,below_floor,alpha_lo,alpha_hi,beta_lo,beta_hi,a_lo,a_hi,b_lo,b_hi,\
extrinsic_slack,intrinsic_slack,extrinsic_centers,intrinsic_centers";

pub const VERIFY_COLUMNS: &str = "input,i,radius,alpha_lo,alpha_hi,beta_lo,beta_hi,a_lo,a_hi,b_lo,b_hi,\
ratio_precise_A,ratio_precise_B,ratio_converse_alpha,ratio_converse_beta";

fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn pair(b: Option<Bracket>) -> String {
    format!("{},{}", num(b.map(|b| b.lo)), num(b.map(|b| b.hi)))
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn profile_table(report: &AnalyzeReport) -> String {
    let mut out = String::from(PROFILE_COLUMNS);
    out.push('\n');
    for rec in &report.profile.scales {
        let slack = report.slack.iter().find(|s| s.i == rec.i);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            rec.i,
            rec.radius,
            rec.below_floor,
            pair(rec.alpha),
            pair(rec.beta),
            pair(rec.a),
            pair(rec.b),
            num(slack.map(|s| s.extrinsic)),
            num(slack.map(|s| s.intrinsic)),
            rec.extrinsic_centers,
            rec.intrinsic_centers,
        )
        .expect("writing to a string cannot fail");
    }
    out
}

pub fn verify_table(report: &VerifyReport) -> String {
    let mut out = String::from(VERIFY_COLUMNS);
    out.push('\n');
    for inp in &report.inputs {
        for rec in &inp.profile.scales {
            let ratio = |st: Statement| {
                num(inp
                    .records
                    .iter()
                    .find(|r| r.statement == st && r.i == Some(rec.i))
                    .map(|r| r.ratio))
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                quote(&inp.path),
                rec.i,
                rec.radius,
                pair(rec.alpha),
                pair(rec.beta),
                pair(rec.a),
                pair(rec.b),
                ratio(Statement::PreciseA),
                ratio(Statement::PreciseB),
                ratio(Statement::ConverseAlpha),
                ratio(Statement::ConverseBeta),
            )
            .expect("writing to a string cannot fail");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_fields_for_missing_values() {
        assert_eq!(pair(None), ",");
        assert_eq!(pair(Some(Bracket::new(0.25, 0.5, true))), "0.25,0.5");
        assert_eq!(num(Some(0.1)), "0.1");
        assert_eq!(quote("a,b"), "\"a,b\"");
        assert_eq!(PROFILE_COLUMNS.split(',').count(), 15);
        assert_eq!(VERIFY_COLUMNS.split(',').count(), 15);
    }
}
