use std::fmt::Write as _;

use incseq::measures::{
    exponent_scan, lln_exceedance, total_variation_exact, total_variation_mc, write_exponent_scan_csv,
    write_tv_csv, ExponentRow, EXHAUSTIVE_MAX_N,
};
use incseq::moments::{
    k_for_exponent, moment_summary, variance_scan, write_variance_scan_csv, ScanRow, SCAN_K_BUDGET,
};
use incseq::walk::{
    bridge_event_prob_enum, bridge_event_prob_exact, identity_4_2, lemma4_band, lemma5_envelopes,
    lemma6_8_envelopes, BridgeSpec, EnvelopeCheck, BRIDGE_ENUM_MAX_STEPS,
};
use incseq::{Error, ExactRatio, RandomStream};
use serde::Serialize;
use serde_json::json;

use crate::output::Artifact;

pub type CmdResult = Result<Artifact, Error>;

fn csv_of(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> String {
    let mut buf = Vec::new();
    write(&mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv is utf-8")
}

/// Stream for job `job` of `command` with the given parameter tuple.
pub fn job_stream(seed: u64, command: &str, params: &str, job: u64) -> RandomStream {
    RandomStream::from_seed(seed).derive(format!("{command}|{params}|{job}").as_bytes())
}

pub fn moments(n: usize, k: usize, force: bool) -> CmdResult {
    if k > SCAN_K_BUDGET && !force {
        return Err(Error::Budget {
            what: "subsequence length",
            requested: k as u128,
            limit: SCAN_K_BUDGET as u128,
        });
    }
    let summary = moment_summary(n, k)?;
    let ratio_float = incseq::exact::ratio_to_f64(&summary.ratio);
    let row = ScanRow {
        ratio_norm: ratio_float * n as f64 / (k as f64).powf(2.5),
        ratio_float,
        summary,
    };
    let line = format!(
        "first={} second={} var={} ratio={}",
        row.summary.first, row.summary.second, row.summary.variance, row.summary.ratio
    );
    let rows = vec![row];
    Ok(Artifact {
        csv: csv_of(|b| write_variance_scan_csv(&rows, b)),
        rows: json!(rows),
        summary: line,
        violation: None,
    })
}

pub fn variance_scan_cmd(exponent: f64, n_list: &[usize], force: bool) -> CmdResult {
    let rows = variance_scan(exponent, n_list, force)?;
    let mut summary = format!("variance-scan exponent={exponent}:");
    for r in &rows {
        let _ = write!(summary, " n={} k={} ratio={:.4e}", r.summary.n, r.summary.k, r.ratio_float);
    }
    Ok(Artifact {
        csv: csv_of(|b| write_variance_scan_csv(&rows, b)),
        rows: json!(rows),
        summary,
        violation: None,
    })
}

pub struct LlnArgs {
    pub n: usize,
    pub k: Option<usize>,
    pub exponent: Option<f64>,
    pub epsilon: f64,
    pub samples: u64,
    pub seed: u64,
}

pub fn lln(args: &LlnArgs) -> CmdResult {
    let (k, l) = match (args.k, args.exponent) {
        (Some(k), None) => (k, f64::NAN),
        (None, Some(l)) => {
            if !(l > 0.0 && l < 0.5) {
                return Err(Error::Domain(format!("exponent must lie in (0, 0.5), got {l}")));
            }
            (k_for_exponent(args.n, l), l)
        }
        _ => return Err(Error::Domain("give exactly one of --k and --exponent".into())),
    };
    let params = format!("n={}|k={k}|eps={:016x}", args.n, args.epsilon.to_bits());
    let mut rng = job_stream(args.seed, "lln", &params, 0);
    let est = lln_exceedance(args.n, k, args.epsilon, args.samples, &mut rng)?;
    let row = ExponentRow {
        l,
        n: args.n,
        k,
        epsilon: args.epsilon,
        exceedance: est.estimate,
        stderr: est.stderr,
        samples: args.samples,
        seed: args.seed,
    };
    let summary = format!(
        "lln n={} k={k} eps={} exceedance={:.6} stderr={:.6}",
        args.n, args.epsilon, est.estimate, est.stderr
    );
    let rows = vec![row];
    Ok(Artifact {
        csv: csv_of(|b| write_exponent_scan_csv(&rows, b)),
        rows: json!(rows),
        summary,
        violation: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TvChoice {
    Auto,
    Exact,
    Mc,
}

pub fn tv(n: usize, k: usize, mode: TvChoice, samples: u64, seed: u64) -> CmdResult {
    let exact = match mode {
        TvChoice::Exact => true,
        TvChoice::Mc => false,
        TvChoice::Auto => n <= EXHAUSTIVE_MAX_N,
    };
    let report = if exact {
        total_variation_exact(n, k)?
    } else {
        let mut rng = job_stream(seed, "tv", &format!("n={n}|k={k}"), 0);
        total_variation_mc(n, k, samples, &mut rng)?
    };
    let summary = match &report.exact {
        Some(v) => format!("tv n={n} k={k} exact={v} ({:.6})", report.tv),
        None => format!("tv n={n} k={k} estimate={:.6} stderr={:.6}", report.tv, report.stderr),
    };
    let rows = vec![report];
    Ok(Artifact {
        csv: csv_of(|b| write_tv_csv(&rows, b)),
        rows: json!(rows),
        summary,
        violation: None,
    })
}

pub fn exponent_scan_cmd(l_list: &[f64], n_list: &[usize], epsilon: f64, samples: u64, seed: u64) -> CmdResult {
    let rows = exponent_scan(l_list, n_list, epsilon, samples, seed)?;
    let summary = format!(
        "exponent-scan cells={} exponents={} sizes={} eps={epsilon} samples={samples}",
        rows.len(),
        l_list.len(),
        n_list.len()
    );
    Ok(Artifact {
        csv: csv_of(|b| write_exponent_scan_csv(&rows, b)),
        rows: json!(rows),
        summary,
        violation: None,
    })
}

pub struct WalkArgs {
    pub n_max: usize,
    pub band_max: usize,
    pub l: f64,
    pub c2: f64,
    pub c_l2: f64,
}

pub fn walk_check(args: &WalkArgs) -> CmdResult {
    let band = lemma4_band(args.band_max)?;
    let one_d = lemma5_envelopes(args.n_max, args.l)?;
    let two_d = lemma6_8_envelopes(args.n_max, args.l, args.c2, args.c_l2)?;
    let mut cells = one_d.cells.clone();
    cells.extend(two_d.cells.iter().cloned());
    let mut report = two_d.clone();
    report.cells = cells;
    report.violations += one_d.violations;

    let fitted = |r: &incseq::walk::EnvelopeReport, c| r.constant(c).unwrap_or(f64::NAN);
    let summary = format!(
        "walk-check lazy_band=[{:.4},{:.4}] C0={:.4} cL={:.4} c1={:.4} cL1={:.4} c3={:.4} violations={}",
        band.lo,
        band.hi,
        fitted(&one_d, EnvelopeCheck::Upper1d),
        fitted(&one_d, EnvelopeCheck::Lower1d),
        fitted(&two_d, EnvelopeCheck::Upper2d),
        fitted(&two_d, EnvelopeCheck::Lower2d),
        two_d.diagonal_return.unwrap_or(f64::NAN),
        report.violations
    );
    let band_ok = band.lo.is_finite() && band.lo > 0.0 && band.hi.is_finite();
    let violation = if report.violations > 0 {
        Some(format!("{} envelope cells are not finite and positive", report.violations))
    } else if !band_ok {
        Some(format!("lazy return band [{}, {}] is degenerate", band.lo, band.hi))
    } else {
        None
    };
    Ok(Artifact {
        csv: csv_of(|b| report.write_csv(b)),
        rows: json!({
            "lazy_band": band,
            "fitted": report.fitted,
            "diagonal_return": report.diagonal_return,
            "violations": report.violations,
            "cells": report.cells,
        }),
        summary,
        violation,
    })
}

#[derive(Serialize)]
struct IdentityRow {
    check: &'static str,
    n: usize,
    j: usize,
    blocks: String,
    lhs: String,
    rhs: String,
    ok: bool,
}

impl IdentityRow {
    fn new(check: &'static str, n: usize, j: usize, blocks: String, lhs: &ExactRatio, rhs: &ExactRatio) -> Self {
        Self {
            check,
            n,
            j,
            blocks,
            lhs: lhs.to_string(),
            rhs: rhs.to_string(),
            ok: lhs == rhs,
        }
    }
}

pub const IDENTITY_HEADER: &str = "check,N,j,blocks,lhs_num,lhs_den,rhs_num,rhs_den,ok";

pub fn identity_check(n_max: usize, j_max: usize) -> CmdResult {
    if j_max < 1 {
        return Err(Error::Domain("--jmax must be at least 1".into()));
    }
    let mut rows = Vec::new();
    let mut csv = String::from(IDENTITY_HEADER);
    csv.push('\n');
    let mut push = |row: IdentityRow, lhs: &ExactRatio, rhs: &ExactRatio| {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            row.check,
            row.n,
            row.j,
            row.blocks,
            lhs.numer(),
            lhs.denom(),
            rhs.numer(),
            rhs.denom(),
            row.ok
        );
        rows.push(row);
    };
    for n in 0..=n_max {
        for j in 1..=j_max {
            let (lhs, rhs) = identity_4_2(n, j)?;
            push(IdentityRow::new("sum-identity", n, j, String::new(), &lhs, &rhs), &lhs, &rhs);
        }
    }
    // Formula against literal enumeration, wherever enumeration is affordable.
    for n in 1..=n_max.min(BRIDGE_ENUM_MAX_STEPS / 2) {
        for j in 1..=j_max {
            let mut specs = Vec::new();
            incseq_compositions(2 * n, j + 1, &mut specs);
            for blocks in specs {
                let spec = BridgeSpec::new(n, blocks.clone())?;
                let lhs = bridge_event_prob_exact(&spec)?;
                let rhs = bridge_event_prob_enum(&spec)?;
                let label = blocks.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(" ");
                push(IdentityRow::new("bridge-enum", n, j, label, &lhs, &rhs), &lhs, &rhs);
            }
        }
    }
    let failures = rows.iter().filter(|r| !r.ok).count();
    let summary = if failures == 0 {
        format!("OK ({} exact comparisons)", rows.len())
    } else {
        format!("FAILED ({failures} of {} comparisons differ)", rows.len())
    };
    let violation = (failures > 0).then(|| format!("{failures} exact identities failed"));
    Ok(Artifact { csv, rows: json!(rows), summary, violation })
}

fn incseq_compositions(total: usize, parts: usize, out: &mut Vec<Vec<usize>>) {
    fn rec(buf: &mut Vec<usize>, left: usize, parts: usize, out: &mut Vec<Vec<usize>>) {
        if buf.len() + 1 == parts {
            buf.push(left);
            out.push(buf.clone());
            buf.pop();
            return;
        }
        for first in 0..=left {
            buf.push(first);
            rec(buf, left - first, parts, out);
            buf.pop();
        }
    }
    rec(&mut Vec::new(), total, parts, out);
}
