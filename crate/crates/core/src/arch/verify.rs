use std::fmt::Write as _;

use serde::Serialize;

use crate::error::Result;

use super::spec::{ArchitectureSpec, LayerKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParamRow {
    pub index: usize,
    pub kind: LayerKind,
    pub m: Option<usize>,
    pub r: Option<usize>,
    pub n: Option<usize>,
    pub in_channels: Option<usize>,
    pub computed: Option<u64>,
    pub expected: Option<u64>,
}

impl ParamRow {
    pub fn matches(&self) -> bool {
        match self.expected {
            Some(e) => self.computed == Some(e),
            None => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParamReport {
    pub name: String,
    pub rows: Vec<ParamRow>,
    pub total: u64,
    pub reported_total: Option<String>,
    /// Whether `total` rounds to `reported_total` at its printed precision.
    pub total_matches: Option<bool>,
}

impl ParamReport {
    pub fn mismatches(&self) -> Vec<&ParamRow> {
        self.rows.iter().filter(|r| !r.matches()).collect()
    }

    pub fn passed(&self) -> bool {
        self.mismatches().is_empty() && self.total_matches != Some(false)
    }

    /// Fixed-width table in the `Type m r n Params` layout.
    pub fn render_table(&self) -> String {
        let dash = |v: Option<usize>| v.map_or("-".to_string(), |x| x.to_string());
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.name);
        let _ = writeln!(out, "{:>3}  {:<9}{:>4}{:>4}{:>5}  {:>8}  {:>8}  {}", "#", "Type", "m", "r", "n", "Params", "Expected", "");
        for row in &self.rows {
            let status = match (row.expected, row.matches()) {
                (None, _) => "",
                (Some(_), true) => "ok",
                (Some(_), false) => "MISMATCH",
            };
            let _ = writeln!(
                out,
                "{:>3}  {:<9}{:>4}{:>4}{:>5}  {:>8}  {:>8}  {}",
                row.index,
                row.kind.to_string(),
                dash(row.m),
                dash(row.r),
                dash(row.n),
                row.computed.map_or("-".into(), |c| c.to_string()),
                row.expected.map_or("-".into(), |c| c.to_string()),
                status
            );
        }
        let _ = writeln!(
            out,
            "     {:<9}{:>4}{:>4}{:>5}  {:>8}  {:>8}  {}",
            "Total",
            "-",
            "-",
            "-",
            self.total,
            self.reported_total.as_deref().unwrap_or("-"),
            match self.total_matches {
                Some(true) => "ok",
                Some(false) => "MISMATCH",
                None => "",
            }
        );
        let _ = write!(out, "{}", if self.passed() { "PASS" } else { "FAIL" });
        out
    }
}

/// Whether `total` rounds to a printed figure such as `"107K"` or `"43.7K"`.
pub fn rounded_total_matches(total: u64, printed: &str) -> Option<bool> {
    let s = printed.trim();
    let (digits, scale) = match s.chars().last()? {
        'k' | 'K' => (&s[..s.len() - 1], 1e3),
        'm' | 'M' => (&s[..s.len() - 1], 1e6),
        _ => (s, 1.0),
    };
    let value: f64 = digits.parse().ok()?;
    let decimals = digits.split_once('.').map_or(0, |(_, frac)| frac.len()) as i32;
    let step = 10f64.powi(-decimals);
    let rounded = ((total as f64 / scale) / step).round() * step;
    Some((rounded - value).abs() < step / 2.0)
}

/// Paper-mode parameter count of every row, checked against the row's
/// expected count and the spec's printed total when present.
pub fn verify_params(spec: &ArchitectureSpec) -> Result<ParamReport> {
    spec.validate()?;
    let rows: Vec<ParamRow> = spec
        .layers
        .iter()
        .zip(spec.input_channels())
        .enumerate()
        .map(|(index, (layer, cin))| {
            let computed = match layer.kind {
                LayerKind::Conv => Some((layer.m.unwrap_or(0) * layer.r.unwrap_or(0) * cin.unwrap_or(0) * layer.n.unwrap_or(0)) as u64),
                LayerKind::Dense => Some((cin.unwrap_or(0) * layer.n.unwrap_or(0)) as u64),
                LayerKind::AvgPool | LayerKind::Softmax => None,
            };
            ParamRow {
                index,
                kind: layer.kind,
                m: layer.m,
                r: layer.r,
                n: layer.n,
                in_channels: cin,
                computed,
                expected: layer.params,
            }
        })
        .collect();
    let total = rows.iter().filter_map(|r| r.computed).sum();
    let total_matches = spec
        .reported_total
        .as_deref()
        .map(|p| rounded_total_matches(total, p).unwrap_or(false));
    Ok(ParamReport {
        name: spec.name.clone(),
        rows,
        total,
        reported_total: spec.reported_total.clone(),
        total_matches,
    })
}
