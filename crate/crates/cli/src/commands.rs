use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use num_bigint::BigUint;
use serde_json::{json, Value};
use towerfact::census::{census_with, first_run_with, CensusError, SweepConfig};
use towerfact::densities::{average_height, density_c, density_d, CertifiedValue, DensityError, TailMethod};
use towerfact::runs::{
    abbreviate, construct_run_with, verify_run_with, RunCertificate, RunConfig, RunError, RunVerification,
    DEFAULT_SCAN_BOUND,
};
use towerfact::{factorize, render_tower, tower_of, ArithError};

use crate::output::{Failure, Report, EXIT_NOT_FOUND};

// Decimal digits of big integers shown in text output.
const SHOWN_DIGITS: usize = 60;

impl From<ArithError> for Failure {
    fn from(e: ArithError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<CensusError> for Failure {
    fn from(e: CensusError) -> Self {
        match e {
            CensusError::Pool(_) => Failure::Compute(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<DensityError> for Failure {
    fn from(e: DensityError) -> Self {
        match e {
            DensityError::Unreachable { .. } => Failure::Budget(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::BitBudget { .. } => Failure::Budget(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

pub fn factor(n: u64) -> Result<Report, Failure> {
    let f = factorize(n)?;
    let factors: Vec<Value> = f.factors().iter().map(|&(p, e)| json!([p, e])).collect();
    let rendered = f.to_string();
    Ok(Report::new("factor", json!({ "n": n, "factorization": rendered, "factors": factors }))
        .param("n", n)
        .line(rendered))
}

pub fn tower(n: u64) -> Result<Report, Failure> {
    let t = tower_of(&factorize(n)?);
    let rendered = render_tower(&t);
    Ok(Report::new("tower", json!({ "n": n, "tower": rendered, "height": t.height() })).param("n", n).line(rendered))
}

pub fn height(n: u64) -> Result<Report, Failure> {
    let h = towerfact::height(n)?;
    Ok(Report::new("height", json!({ "n": n, "height": h })).param("n", n).line(h.to_string()))
}

pub fn lambda(k: u32, n: u64) -> Result<Report, Failure> {
    let l = towerfact::lambda(k, n)?;
    Ok(Report::new("lambda", json!({ "n": n, "k": k, "lambda": l })).param("n", n).param("k", k).line(l.to_string()))
}

pub fn census(max: u64, k: Option<usize>, segment: u64, workers: usize) -> Result<Report, Failure> {
    let c = census_with(max, &SweepConfig { segment_size: segment, workers })?;
    let heights: Vec<usize> = match k {
        Some(k) => vec![k],
        None => (0..=c.max_height()).collect(),
    };
    let rows: Vec<Value> =
        heights.iter().map(|&k| json!({ "k": k, "count": c.count(k), "t_k": c.at_least(k) })).collect();

    let mut csv = String::from("x,k,count,t_k\n");
    for &k in &heights {
        writeln!(csv, "{max},{k},{},{}", c.count(k), c.at_least(k)).expect("writing to a String");
    }

    let mut report = Report::new("census", json!({ "x": max, "rows": rows }))
        .param("max", max)
        .param("segment", segment)
        .param("k", k.map_or(Value::Null, Value::from))
        .detail(format!("x = {max}"))
        .detail(format!("{:>3} {:>20} {:>20}", "k", "count", "T_k"));
    for &k in &heights {
        report = report.line(format!("{k:>3} {:>20} {:>20}", c.count(k), c.at_least(k)));
    }
    report.csv = Some(csv);
    Ok(report)
}

fn decimals_for(precision: f64) -> usize {
    ((-precision.log10()).ceil().max(0.0) as usize + 1).min(16)
}

fn tail_name(tail: TailMethod) -> &'static str {
    match tail {
        TailMethod::SeriesTruncation => "series truncation",
        TailMethod::GeometricBound => "integral bound",
        TailMethod::ZetaAccelerated => "zeta-accelerated",
        TailMethod::Lemma => "d_k < 4/2^(k)",
    }
}

fn certified_report(command: &'static str, name: String, value: &CertifiedValue, precision: f64) -> Report {
    let decimals = decimals_for(precision);
    let p = &value.provenance;
    let mut provenance = Vec::new();
    if let Some(cutoff) = p.prime_cutoff {
        provenance.push(format!("primes <= {cutoff}"));
    }
    if let Some(cutoff) = p.series_cutoff {
        provenance.push(format!("series to r = {cutoff}"));
    }
    if let Some(cutoff) = p.height_cutoff {
        provenance.push(format!("heights to {cutoff}"));
    }
    provenance.push(format!("tail: {}", tail_name(p.tail)));
    let mut report = Report::new(command, serde_json::to_value(value).expect("plain data"))
        .param("precision", precision)
        .line(format!("{name} = {:.decimals$} ± {:.1e}", value.estimate, value.error_bound))
        .detail(provenance.join(", "));
    report.certified_error = Some(value.error_bound);
    report
}

pub fn density(k: u32, precision: f64, exact: bool) -> Result<Report, Failure> {
    let (value, name) =
        if exact { (density_d(k, precision)?, format!("d_{k}")) } else { (density_c(k, precision)?, format!("c_{k}")) };
    Ok(certified_report("density", name, &value, precision)
        .param("k", k)
        .param("quantity", if exact { "d" } else { "c" }))
}

pub fn average(precision: f64) -> Result<Report, Failure> {
    let value = average_height(precision)?;
    Ok(certified_report("average", "average height".into(), &value, precision))
}

fn certificate_lines(mut report: Report, c: &RunCertificate) -> Report {
    report = report
        .line(format!("n0 = {}", abbreviate(&c.n0, SHOWN_DIGITS)))
        .detail(format!("length {}, height >= {}", c.length, c.min_height))
        .detail(format!("period {}", abbreviate(&c.modulus, SHOWN_DIGITS)));
    for ev in &c.evidence {
        report = report.detail(format!(
            "  n0 + {}: {}^{} exactly, h({}) = {}",
            ev.index, ev.prime, ev.exponent, ev.exponent, ev.exponent_height
        ));
    }
    report
}

pub fn run_construct(length: u64, height: u32, occurrence: &BigUint, bits_budget: u64) -> Result<Report, Failure> {
    let config = RunConfig { bits_budget, scan_bound: DEFAULT_SCAN_BOUND };
    let c = construct_run_with(length, height, occurrence, &config)?;
    c.check().map_err(|e| Failure::Compute(format!("constructed certificate failed its check: {e}")))?;
    let report = Report::new("run construct", json!({ "status": "verified", "certificate": c }))
        .param("length", length)
        .param("height", height)
        .param("occurrence", occurrence.to_string())
        .param("bits_budget", bits_budget);
    Ok(certificate_lines(report, &c))
}

pub fn run_verify(n: &BigUint, length: u64, height: u32, scan_bound: u64) -> Result<Report, Failure> {
    let config = RunConfig { scan_bound, ..RunConfig::default() };
    let report = match verify_run_with(n, length, height, &config)? {
        RunVerification::Verified(c) => {
            let report = Report::new("run verify", json!({ "status": "verified", "certificate": c }));
            certificate_lines(report.line("verified"), &c)
        }
        RunVerification::Unverified { index, scan_bound } => {
            Report::new("run verify", json!({ "status": "unverified", "index": index, "scan_bound": scan_bound }))
                .line(format!("unverified: no witness prime <= {scan_bound} for n0 + {index}"))
        }
    };
    Ok(report.param("n", n.to_string()).param("length", length).param("height", height).param("scan_bound", scan_bound))
}

pub fn run_check(path: &Path) -> Result<Report, Failure> {
    let mut text = String::new();
    let read = if path.as_os_str() == "-" {
        std::io::stdin().read_to_string(&mut text)
    } else {
        std::fs::File::open(path).and_then(|mut f| f.read_to_string(&mut text))
    };
    read.map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let c: RunCertificate =
        serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let report = match c.check() {
        Ok(()) => certificate_lines(
            Report::new("run verify", json!({ "status": "verified", "certificate": c })).line("verified"),
            &c,
        ),
        Err(e) => Report::new("run verify", json!({ "status": "invalid", "reason": e.to_string() }))
            .line(format!("invalid: {e}")),
    };
    Ok(report.param("certificate", path.display().to_string()))
}

pub fn run_search(length: u64, height: u32, limit: u64, segment: u64, workers: usize) -> Result<Report, Failure> {
    let found = first_run_with(length, height, limit, &SweepConfig { segment_size: segment, workers })?;
    let mut report = Report::new("run search", json!({ "found": found.is_some(), "n0": found }))
        .param("length", length)
        .param("height", height)
        .param("limit", limit);
    match found {
        Some(n0) => report = report.line(n0.to_string()),
        None => {
            report.diagnostic =
                Some(format!("no run of {length} integers of height >= {height} lies within 1..={limit}"));
            report.exit_code = EXIT_NOT_FOUND;
        }
    }
    Ok(report)
}
