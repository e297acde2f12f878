//! CSV renderings of library results.

use std::io::Write;

use hellinger_bn::decomposition::{DecompositionReport, Factorization};
use hellinger_bn::divergences::DivergenceValue;
use hellinger_bn::gof::GofVerdict;
use hellinger_bn::harness::format_set;
use hellinger_bn::subtest::SubtestVerdict;
use hellinger_bn::testers::Verdict;
use hellinger_bn::tree_order::OrderingResult;
use hellinger_bn::{Error, Result};

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::io("writing output", e))
}

fn blank_row(len: usize) -> Vec<String> {
    vec![String::new(); len]
}

pub fn divergences<W: Write>(values: &[DivergenceValue], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["divergence", "value"]).map_err(csv_err)?;
    for v in values {
        w.write_record([v.kind.to_string(), v.value.to_string()]).map_err(csv_err)?;
    }
    finish(w)
}

pub fn decomposition<W: Write>(fact: &Factorization, rep: &DecompositionReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "block", "set", "cond", "h_sq", "tv"]).map_err(csv_err)?;
    for (i, b) in fact.blocks().iter().enumerate() {
        w.write_record([
            "block".to_string(),
            i.to_string(),
            format_set(&b.set),
            format_set(&b.cond),
            rep.terms[i].to_string(),
            rep.tv_terms[i].to_string(),
        ])
        .map_err(csv_err)?;
    }
    let sum_h: f64 = rep.terms.iter().sum();
    let sum_tv: f64 = rep.tv_terms.iter().sum();
    let rows: [[String; 4]; 4] = [
        ["joint".into(), String::new(), rep.total_h_sq.to_string(), rep.total_tv.to_string()],
        ["sum".into(), String::new(), sum_h.to_string(), sum_tv.to_string()],
        ["slack".into(), String::new(), rep.slack.to_string(), String::new()],
        ["argmax".into(), rep.argmax_block.to_string(), String::new(), String::new()],
    ];
    for [kind, block, h, tv] in rows {
        w.write_record([kind, block, String::new(), String::new(), h, tv])
            .map_err(csv_err)?;
    }
    finish(w)
}

pub fn ordering<W: Write>(ord: &OrderingResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["position", "node", "dep_p", "dep_q", "pi", "pi_size"])
        .map_err(csv_err)?;
    for (i, &v) in ord.order.iter().enumerate() {
        w.write_record([
            i.to_string(),
            v.to_string(),
            format_set(&ord.dep_sets_p[i]),
            format_set(&ord.dep_sets_q[i]),
            format_set(&ord.pi_sets[i]),
            ord.pi_sets[i].len().to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

pub fn subtest<W: Write>(v: &SubtestVerdict, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "decision",
        "statistic",
        "threshold",
        "pvalue",
        "required",
        "samples_a",
        "samples_b",
        "insufficient_samples",
    ])
    .map_err(csv_err)?;
    w.write_record([
        v.decision.to_string(),
        v.statistic.to_string(),
        v.threshold.to_string(),
        v.pvalue.to_string(),
        v.required.to_string(),
        v.samples_a.to_string(),
        v.samples_b.to_string(),
        v.insufficient_samples.to_string(),
    ])
    .map_err(csv_err)?;
    finish(w)
}

const VERDICT_HEADER: [&str; 13] = [
    "kind",
    "set",
    "statistic",
    "threshold",
    "pvalue",
    "decision",
    "insufficient_samples",
    "eps_sq",
    "eta",
    "samples_p",
    "samples_q",
    "planned_subtests",
    "incomplete",
];

/// One `subtest` row per subtest, then a `summary` row whose `set` is the witness.
pub fn verdict<W: Write>(v: &Verdict, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(VERDICT_HEADER).map_err(csv_err)?;
    for r in &v.subtests {
        let mut row = blank_row(VERDICT_HEADER.len());
        row[0] = "subtest".into();
        row[1] = format_set(&r.set);
        row[2] = r.statistic.to_string();
        row[3] = r.threshold.to_string();
        row[4] = r.pvalue.to_string();
        row[5] = r.decision.to_string();
        row[6] = r.insufficient_samples.to_string();
        w.write_record(&row).map_err(csv_err)?;
    }
    let mut row = blank_row(VERDICT_HEADER.len());
    row[0] = "summary".into();
    row[1] = v.witness.as_deref().map(format_set).unwrap_or_default();
    row[5] = v.decision.to_string();
    row[6] = v.subtests.iter().any(|r| r.insufficient_samples).to_string();
    row[7] = v.eps_sq.to_string();
    row[8] = v.eta.to_string();
    row[9] = v.samples_p.to_string();
    row[10] = v.samples_q.to_string();
    row[11] = v.planned_subtests.to_string();
    row[12] = v.incomplete.to_string();
    w.write_record(&row).map_err(csv_err)?;
    finish(w)
}

pub fn gof<W: Write>(v: &GofVerdict, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "decision",
        "z",
        "threshold",
        "m",
        "truncated",
        "flipped",
        "noise_lifted",
        "samples_used",
    ])
    .map_err(csv_err)?;
    let flipped: Vec<usize> = (0..v.flip_mask.len()).filter(|&i| v.flip_mask[i]).collect();
    let lifted: Vec<usize> = (0..v.noise_rates.len()).filter(|&i| v.noise_rates[i] > 0.0).collect();
    w.write_record([
        v.decision.to_string(),
        v.z.to_string(),
        v.threshold.to_string(),
        v.m.to_string(),
        v.truncated.to_string(),
        format_set(&flipped),
        format_set(&lifted),
        v.samples_used.to_string(),
    ])
    .map_err(csv_err)?;
    finish(w)
}
