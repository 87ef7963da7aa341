use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{Estimate, MetricsSummary};

pub const CSV_HEADER: &str =
    "scenario,protocol,ttl,msg_int,dp_mean,dp_ci,cost_mean,cost_ci,lat_mean_s,lat_ci,runs,drops_ttl,drops_evict,expected";

/// One sweep point of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scenario: String,
    pub protocol: String,
    /// Seconds.
    pub ttl: f64,
    pub msg_int: Option<u32>,
    pub summary: MetricsSummary,
}

/// C-style `%.6g`.
pub fn fmt_g(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn pair(e: Option<Estimate>) -> (String, String) {
    match e {
        Some(e) => (fmt_g(e.mean), fmt_g(e.half_width)),
        None => (String::new(), String::new()),
    }
}

/// Header plus one line per row, in the given order.
pub fn render_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let s = &r.summary;
        let (cost, cost_ci) = pair(s.cost);
        let (lat, lat_ci) = pair(s.latency);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            quote(&r.scenario),
            quote(&r.protocol),
            fmt_g(r.ttl),
            r.msg_int.map(|m| m.to_string()).unwrap_or_default(),
            fmt_g(s.delivery_probability.mean),
            fmt_g(s.delivery_probability.half_width),
            cost,
            cost_ci,
            lat,
            lat_ci,
            s.runs,
            fmt_g(s.drops_ttl),
            fmt_g(s.drops_eviction),
            s.expected,
        );
    }
    out
}

/// `key=value` lines in key order.
pub fn metadata_text(entries: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    for (k, v) in entries {
        let _ = writeln!(out, "{k}={}", v.replace('\n', " "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_format_matches_c() {
        // reference strings from printf("%.6g")
        let cases = [
            (0.972, "0.972"),
            (5.0, "5"),
            (0.126_519_9, "0.12652"),
            (1_234_567.0, "1.23457e+06"),
            (123_456.0, "123456"),
            (0.000_123_456_7, "0.000123457"),
            (0.000_012_345_67, "1.23457e-05"),
            (-2.5, "-2.5"),
            (86_400.0, "86400"),
            (1_814_400.0, "1.8144e+06"),
            (999_999.5, "1e+06"),
            (100.0, "100"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_g(x), want, "{x}");
        }
    }

    #[test]
    fn quoting() {
        assert_eq!(quote("plain"), "plain");
        assert_eq!(quote("a,b"), "\"a,b\"");
    }
}
