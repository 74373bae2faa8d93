//! JSON model files.
//!
//! ```json
//! { "N": 3, "order": 2, "eps_max": "1/2", "markov_chain": true,
//!   "transitions": [ { "from": 1, "to": 2, "poly": ["1", "-1", "1/2"] } ] }
//! ```
//!
//! Rationals are `"num/den"` strings, integer strings, finite decimals such
//! as `"0.05"`, or bare JSON integers. Omitted `(i, j, n)` entries are zero.
//! With `"markov_chain": true`, `time` may be omitted and must otherwise be 1.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};
use num_bigint::BigInt;
use num_traits::Zero;
use qsd_core::{PerturbedSemiMarkovModel, Rational, Transition};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Parse `-3`, `7/5` or `0.05` exactly. Exponent notation is rejected.
pub fn parse_rational(text: &str) -> anyhow::Result<Rational> {
    let s = text.trim();
    if s.is_empty() {
        bail!("empty number");
    }
    if let Some((num, den)) = s.split_once('/') {
        let num = BigInt::from_str(num.trim()).map_err(|_| anyhow!("bad numerator in {text:?}"))?;
        let den = BigInt::from_str(den.trim()).map_err(|_| anyhow!("bad denominator in {text:?}"))?;
        if den.is_zero() {
            bail!("zero denominator in {text:?}");
        }
        return Ok(Rational::new(num, den));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let negative = int.starts_with('-');
        let digits = frac.len();
        if digits == 0 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            bail!("bad decimal {text:?}");
        }
        let int_part = match int.trim_start_matches(['-', '+']) {
            "" => BigInt::zero(),
            d => BigInt::from_str(d).map_err(|_| anyhow!("bad decimal {text:?}"))?,
        };
        let scale = num_traits::pow(BigInt::from(10), digits);
        let magnitude = int_part * &scale + BigInt::from_str(frac).expect("digits");
        let num = if negative { -magnitude } else { magnitude };
        return Ok(Rational::new(num, scale));
    }
    let n = BigInt::from_str(s).map_err(|_| anyhow!("expected an integer, \"num/den\" or a decimal, got {text:?}"))?;
    Ok(Rational::from_integer(n))
}

/// `"num/den"`, or `"num"` for integers.
pub fn format_rational(q: &Rational) -> String {
    q.to_string()
}

/// A rational that (de)serializes as a string but also accepts JSON integers.
#[derive(Clone, Debug, PartialEq)]
pub struct Number(pub Rational);

impl Serialize for Number {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(&self.0))
    }
}

impl<'de> Deserialize<'de> for Number {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Number;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a rational as \"num/den\", a decimal string, or an integer")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Number, E> {
                parse_rational(v).map(Number).map_err(E::custom)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Number, E> {
                Ok(Number(Rational::from_integer(v.into())))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Number, E> {
                Ok(Number(Rational::from_integer(v.into())))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Number, E> {
                Err(E::custom(format!("bare float {v} is ambiguous; quote it as a string")))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionEntry {
    pub from: usize,
    pub to: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<usize>,
    pub poly: Vec<Number>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(rename = "N")]
    pub states: usize,
    pub order: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_max: Option<Number>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub markov_chain: bool,
    pub transitions: Vec<TransitionEntry>,
}

impl ModelFile {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        serde_json::from_str(text).map_err(|e| anyhow!("model file: {e}"))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_model(&self) -> anyhow::Result<PerturbedSemiMarkovModel<Rational>> {
        let mut transitions = Vec::with_capacity(self.transitions.len());
        for (idx, t) in self.transitions.iter().enumerate() {
            let time = match (self.markov_chain, t.time) {
                (true, None) | (true, Some(1)) => 1,
                (true, Some(other)) => bail!("transitions[{idx}]: markov_chain models need time 1, got {other}"),
                (false, Some(time)) => time,
                (false, None) => bail!("transitions[{idx}]: missing field `time`"),
            };
            if t.poly.is_empty() {
                bail!("transitions[{idx}]: empty `poly`");
            }
            transitions.push(Transition {
                from: t.from,
                to: t.to,
                time,
                poly: t.poly.iter().map(|n| n.0.clone()).collect(),
            });
        }
        let eps_max = self.eps_max.as_ref().map(|n| n.0.clone());
        PerturbedSemiMarkovModel::new(self.states, self.order, transitions, eps_max).map_err(|e| anyhow!(e))
    }

    /// File form of a model; `markov_chain` is set when every sojourn is one step.
    pub fn from_model(model: &PerturbedSemiMarkovModel<Rational>) -> Self {
        let markov_chain = model.is_markov_chain();
        let transitions = model
            .entries()
            .map(|(&(from, to, time), poly)| TransitionEntry {
                from,
                to,
                time: (!markov_chain).then_some(time),
                poly: poly.coeffs().iter().cloned().map(Number).collect(),
            })
            .collect();
        Self {
            states: model.states(),
            order: model.order(),
            eps_max: Some(Number(model.eps_max().clone())),
            markov_chain,
            transitions,
        }
    }
}
