//! Text and JSON output.
//!
//! Every result is first converted to a serializable document with values as
//! strings (exact fractions under the rational backend, shortest round-trip
//! decimals under the float backend); the text form is rendered from the same
//! document, so both outputs carry identical values.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use qsd_core::example::ExampleReport;
use qsd_core::expand::Diagnostics;
use qsd_core::oracle::{Method, RemainderReport};
use qsd_core::{PowerSeries, QsdExpansion, QsdPoint, Scalar, ValidationReport};
use serde::{Deserialize, Serialize};

fn value<S: Scalar>(v: &S) -> String {
    v.to_string()
}

fn series<S: Scalar>(p: &PowerSeries<S>) -> Vec<String> {
    p.coeffs().iter().map(value).collect()
}

fn by_state<T>(items: impl IntoIterator<Item = T>) -> BTreeMap<String, T> {
    items.into_iter().enumerate().map(|(j, v)| ((j + 1).to_string(), v)).collect()
}

/// `(state, value)` in numeric state order.
fn states<T>(map: &BTreeMap<String, T>) -> Vec<(usize, &T)> {
    let mut out: Vec<(usize, &T)> = map.iter().map(|(k, v)| (k.parse().unwrap_or(0), v)).collect();
    out.sort_by_key(|(j, _)| *j);
    out
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationDoc {
    pub ok: bool,
    pub communication_ok: bool,
    pub nonperiodic_ok: bool,
    pub stochastic_ok: bool,
    pub limit_absorption_free: bool,
    pub periods: BTreeMap<String, Option<u64>>,
    pub messages: Vec<String>,
}

impl From<&ValidationReport> for ValidationDoc {
    fn from(r: &ValidationReport) -> Self {
        Self {
            ok: r.hard_ok(),
            communication_ok: r.communication_ok,
            nonperiodic_ok: r.nonperiodic_ok,
            stochastic_ok: r.stochastic_ok,
            limit_absorption_free: r.limit_absorption_free,
            periods: by_state(r.periods.iter().copied()),
            messages: r.messages.clone(),
        }
    }
}

impl ValidationDoc {
    pub fn text(&self) -> String {
        let mut out = String::new();
        let status = if self.ok { "ok" } else { "FAILED" };
        writeln!(out, "conditions: {status}").unwrap();
        writeln!(out, "  communicating: {}", yes(self.communication_ok)).unwrap();
        writeln!(out, "  non-periodic: {}", yes(self.nonperiodic_ok)).unwrap();
        writeln!(out, "  stochastic on the ε interval: {}", yes(self.stochastic_ok)).unwrap();
        writeln!(out, "  no absorption at ε = 0: {}", yes(self.limit_absorption_free)).unwrap();
        for (j, p) in states(&self.periods) {
            match p {
                Some(d) => writeln!(out, "  period of state {j}: {d}").unwrap(),
                None => writeln!(out, "  period of state {j}: never returns").unwrap(),
            }
        }
        for m in &self.messages {
            writeln!(out, "  - {m}").unwrap();
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsDoc {
    pub zero_limiting_root: bool,
    pub root_routes_agree: bool,
    pub root_route_gap: f64,
    pub omega_routes_agree: bool,
    pub omega_route_gap: f64,
    pub characteristic_residual: f64,
    pub normalization_residual: f64,
    pub reference_invariant: Option<bool>,
    pub validation: ValidationDoc,
}

impl From<&Diagnostics> for DiagnosticsDoc {
    fn from(d: &Diagnostics) -> Self {
        Self {
            zero_limiting_root: d.zero_limiting_root,
            root_routes_agree: d.root_routes_agree,
            root_route_gap: d.root_route_gap,
            omega_routes_agree: d.omega_routes_agree,
            omega_route_gap: d.omega_route_gap,
            characteristic_residual: d.characteristic_residual,
            normalization_residual: d.normalization_residual,
            reference_invariant: d.reference_invariant,
            validation: (&d.validation).into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionDoc {
    pub backend: String,
    pub order: usize,
    pub reference_state: usize,
    pub rho0: String,
    pub c: Vec<String>,
    pub pi: BTreeMap<String, Vec<String>>,
    pub d: BTreeMap<String, Vec<String>>,
    pub e: Vec<String>,
    pub diagnostics: DiagnosticsDoc,
}

impl<S: Scalar> From<&QsdExpansion<S>> for ExpansionDoc {
    fn from(x: &QsdExpansion<S>) -> Self {
        Self {
            backend: S::BACKEND.to_string(),
            order: x.k,
            reference_state: x.i_ref,
            rho0: value(&x.rho0),
            c: x.c.iter().map(value).collect(),
            pi: by_state(x.pi.iter().map(series)),
            d: by_state(x.d.iter().map(series)),
            e: series(&x.e),
            diagnostics: (&x.diagnostics).into(),
        }
    }
}

impl ExpansionDoc {
    pub fn text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "backend: {}", self.backend).unwrap();
        writeln!(out, "order: {}, reference state: {}", self.order, self.reference_state).unwrap();
        writeln!(out, "ρ0 = {}", self.rho0).unwrap();
        for (n, c) in self.c.iter().enumerate() {
            writeln!(out, "c_{} = {c}", n + 1).unwrap();
        }
        writeln!(out).unwrap();
        for (j, coeffs) in states(&self.pi) {
            for (n, v) in coeffs.iter().enumerate() {
                writeln!(out, "π_{j}[{n}] = {v}").unwrap();
            }
        }
        writeln!(out).unwrap();
        for (j, coeffs) in states(&self.d) {
            for (n, v) in coeffs.iter().enumerate() {
                writeln!(out, "d_{j}[{n}] = {v}").unwrap();
            }
        }
        for (n, v) in self.e.iter().enumerate() {
            writeln!(out, "e[{n}] = {v}").unwrap();
        }
        let d = &self.diagnostics;
        writeln!(out).unwrap();
        writeln!(out, "diagnostics:").unwrap();
        writeln!(out, "  limiting root exactly zero: {}", yes(d.zero_limiting_root)).unwrap();
        writeln!(out, "  root coefficients, closed form vs substitution: {} (gap {:e})", agree(d.root_routes_agree), d.root_route_gap).unwrap();
        writeln!(out, "  occupation coefficients, closed form vs substitution: {} (gap {:e})", agree(d.omega_routes_agree), d.omega_route_gap).unwrap();
        writeln!(out, "  characteristic identity residual: {:e}", d.characteristic_residual).unwrap();
        writeln!(out, "  normalization residual: {:e}", d.normalization_residual).unwrap();
        match d.reference_invariant {
            Some(b) => writeln!(out, "  independent of reference state: {}", yes(b)).unwrap(),
            None => writeln!(out, "  independent of reference state: not checked").unwrap(),
        }
        out
    }
}

fn agree(b: bool) -> &'static str {
    if b {
        "agree"
    } else {
        "DISAGREE"
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QsdPointDoc {
    pub backend: String,
    pub epsilon: Option<String>,
    pub method: String,
    pub rho: String,
    pub pi: BTreeMap<String, String>,
    pub convergence: Option<f64>,
}

impl<S: Scalar> From<&QsdPoint<S>> for QsdPointDoc {
    fn from(p: &QsdPoint<S>) -> Self {
        Self {
            backend: S::BACKEND.to_string(),
            epsilon: p.epsilon.as_ref().map(value),
            method: match p.method {
                Method::Formula => "formula",
                Method::Iterative => "iterative",
            }
            .into(),
            rho: value(&p.rho),
            pi: by_state(p.pi.iter().map(value)),
            convergence: p.convergence,
        }
    }
}

impl QsdPointDoc {
    pub fn text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "backend: {}, method: {}", self.backend, self.method).unwrap();
        if let Some(eps) = &self.epsilon {
            writeln!(out, "ε = {eps}").unwrap();
        }
        writeln!(out, "ρ = {}", self.rho).unwrap();
        for (j, v) in states(&self.pi) {
            writeln!(out, "π_{j} = {v}").unwrap();
        }
        if let Some(c) = self.convergence {
            writeln!(out, "distance to half-horizon snapshot: {c:e}").unwrap();
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemainderRowDoc {
    pub epsilon: f64,
    pub oracle: Vec<f64>,
    pub expansion: Vec<f64>,
    pub normalized: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemainderDoc {
    pub order: usize,
    pub decaying: bool,
    pub non_decaying: Vec<usize>,
    pub rows: Vec<RemainderRowDoc>,
}

impl From<&RemainderReport> for RemainderDoc {
    fn from(r: &RemainderReport) -> Self {
        Self {
            order: r.k,
            decaying: r.decaying(),
            non_decaying: r.non_decaying.clone(),
            rows: r
                .rows
                .iter()
                .map(|row| RemainderRowDoc {
                    epsilon: row.epsilon,
                    oracle: row.oracle.clone(),
                    expansion: row.expansion.clone(),
                    normalized: row.normalized.clone(),
                })
                .collect(),
        }
    }
}

impl RemainderDoc {
    pub fn text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "order {}: |oracle - expansion| / ε^{}", self.order, self.order).unwrap();
        for row in &self.rows {
            let cells: Vec<String> = row.normalized.iter().map(|v| format!("{v:.3e}")).collect();
            writeln!(out, "  ε = {:<10} {}", row.epsilon, cells.join("  ")).unwrap();
        }
        if self.decaying {
            writeln!(out, "remainders decay for every state").unwrap();
        } else {
            let list: Vec<String> = self.non_decaying.iter().map(usize::to_string).collect();
            writeln!(out, "remainders do NOT decay for states {}", list.join(", ")).unwrap();
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableDoc {
    pub name: String,
    pub passed: bool,
    pub entries: usize,
    pub max_error: Option<f64>,
    pub mismatches: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleDoc {
    pub backend: String,
    pub passed: usize,
    pub total: usize,
    pub tables: Vec<TableDoc>,
}

impl From<&ExampleReport> for ExampleDoc {
    fn from(r: &ExampleReport) -> Self {
        Self {
            backend: r.backend.to_string(),
            passed: r.passed(),
            total: r.tables.len(),
            tables: r
                .tables
                .iter()
                .map(|t| TableDoc {
                    name: t.name.into(),
                    passed: t.passed(),
                    entries: t.entries,
                    max_error: t.max_error.is_finite().then_some(t.max_error),
                    mismatches: t.mismatches.clone(),
                })
                .collect(),
        }
    }
}

/// The example report's own layout, one line per table.
pub fn example_text(r: &ExampleReport) -> String {
    format!("{r}\n")
}

pub fn json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents serialize");
    s.push('\n');
    s
}
