//! Fixed-point target selection and the four-step threshold computation.
//!
//! Quantities of scale 2^(2^q) never materialize: comparisons against them
//! are done on exponents, and a magnitude is only built once its exponent
//! fits in 62 bits. Anything outside that range is a loud error, not a
//! saturation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::RangeInclusive;

use thiserror::Error;

use crate::bitstr::{encode_tuple, BitString};
use crate::toy::{past_volume, w_marker, Complexity, EnumerationTrace, ToyDecompressor, ToyError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KeyLemmaError {
    #[error("no fixed point: beta({q}) = {val} >= {q}")]
    NoFixedPoint { q: u32, val: u32 },
    #[error("exponent {0} not representable")]
    ExponentOutOfRange(i128),
    #[error("oracle incomplete at l={l}: no finite complexity for {what}")]
    OracleIncomplete { l: u32, what: String },
    #[error("marker mismatch: expected {expected}, trace yields {actual}")]
    MarkerMismatch {
        expected: BitString,
        actual: BitString,
    },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Toy(#[from] ToyError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BetaFunction {
    values: Vec<u32>,
}

impl BetaFunction {
    /// `values[l]` is beta(l); the domain is [0, values.len() - 1].
    pub fn new(values: Vec<u32>) -> Result<Self, KeyLemmaError> {
        if values.is_empty() {
            return Err(KeyLemmaError::Invalid("beta needs at least l=0".into()));
        }
        Ok(BetaFunction { values })
    }

    pub fn q(&self) -> u32 {
        (self.values.len() - 1) as u32
    }

    pub fn get(&self, l: u32) -> u32 {
        self.values[l as usize]
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QTilde {
    pub q: u32,
    pub l_star: u32,
}

/// Largest l with beta(l) >= l. Always exists because beta(0) >= 0, and the
/// boundary case beta(q) >= q is surfaced instead of clamped: the bracket
/// beta(l*) >= l*, beta(l*+1) < l*+1 needs l* < q.
pub fn fixed_point(beta: &BetaFunction) -> Result<u32, KeyLemmaError> {
    let q = beta.q();
    if beta.get(q) >= q {
        return Err(KeyLemmaError::NoFixedPoint {
            q,
            val: beta.get(q),
        });
    }
    let l_star = (0..=q).rev().find(|&l| beta.get(l) >= l).unwrap();
    Ok(l_star)
}

fn bin(v: u32) -> BitString {
    BitString::from_int(v as u64)
}

/// The structure string T_l = (q, l).
pub fn structure_string(q: u32, l: u32) -> BitString {
    encode_tuple(&[bin(q), bin(l)])
}

/// beta(l) = C((T_l, alpha(l)) | q) with alpha(l) = C(T_l | n), both read
/// off the decompressor's conditional table within the time bound.
pub fn beta_from_decompressor(
    q: u32,
    n: u32,
    dec: &ToyDecompressor,
    time_bound: u64,
    max_len: u32,
) -> Result<BetaFunction, KeyLemmaError> {
    if q == 0 || n == 0 {
        return Err(KeyLemmaError::Invalid(
            "conditions q and n must be nonzero".into(),
        ));
    }
    let mut values = Vec::with_capacity(q as usize + 1);
    for l in 0..=q {
        let t_l = structure_string(q, l);
        let alpha = match dec.time_bounded_complexity(&t_l, &bin(n), max_len, time_bound) {
            Complexity::Finite(a) => a,
            Complexity::Infinite => {
                return Err(KeyLemmaError::OracleIncomplete {
                    l,
                    what: format!("alpha target {t_l} given {n}"),
                })
            }
        };
        let pair = encode_tuple(&[t_l.clone(), bin(alpha)]);
        match dec.time_bounded_complexity(&pair, &bin(q), max_len, time_bound) {
            Complexity::Finite(b) => values.push(b),
            Complexity::Infinite => {
                return Err(KeyLemmaError::OracleIncomplete {
                    l,
                    what: format!("beta target {pair} given {q}"),
                })
            }
        }
    }
    BetaFunction::new(values)
}

pub fn build_q_tilde(
    q: u32,
    n: u32,
    dec: &ToyDecompressor,
    time_bound: u64,
    max_len: u32,
) -> Result<QTilde, KeyLemmaError> {
    let beta = beta_from_decompressor(q, n, dec, time_bound, max_len)?;
    let l_star = fixed_point(&beta)?;
    Ok(QTilde { q, l_star })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThresholdInputs {
    pub n: u32,
    pub q: u32,
    pub lambda: u32,
    /// |St^w_q(x)|: extensions of x at scale q seen before the marker.
    pub past_volume_q: u64,
    /// (C(q~, alpha | q), C(q~ | n)).
    pub delta_terms: (u32, u32),
    /// |St^w_n(q~, x)|: extensions of the pair at scale n before the marker.
    pub struct_volume_n: u64,
}

/// True iff `value >= 2^exp`, without materializing the power.
fn at_least_pow2(value: u64, exp: i128) -> bool {
    if exp < 0 {
        value >= 1
    } else if exp >= 64 {
        false
    } else {
        value >= 1u64.checked_shl(exp as u32).unwrap_or(u64::MAX)
    }
}

/// Four steps: trivial exit on a heavy past at scale q, structural
/// correction delta, heavy-structure exit at scale n, otherwise the target
/// count Num itself. Output is always 0 or exactly Num.
pub fn threshold(inputs: &ThresholdInputs) -> Result<u64, KeyLemmaError> {
    if inputs.q <= inputs.n {
        return Err(KeyLemmaError::Invalid(format!(
            "threshold needs q > n, got q={} n={}",
            inputs.q, inputs.n
        )));
    }
    if inputs.q > 62 || inputs.n > 62 {
        return Err(KeyLemmaError::ExponentOutOfRange(
            inputs.q.max(inputs.n) as i128
        ));
    }
    let big_q = 1i128 << inputs.q;
    let trivial_exp = big_q - inputs.q as i128 - inputs.lambda as i128;
    if at_least_pow2(inputs.past_volume_q, trivial_exp) {
        return Ok(0);
    }
    let delta = inputs.delta_terms.0 as i128 - inputs.delta_terms.1 as i128;
    let big_n = 1i128 << inputs.n;
    let num_exp = big_n - inputs.q as i128 + delta - inputs.lambda as i128;
    if !(0..=62).contains(&num_exp) {
        return Err(KeyLemmaError::ExponentOutOfRange(num_exp));
    }
    let num = 1u64 << num_exp;
    if inputs.struct_volume_n >= num {
        Ok(0)
    } else {
        Ok(num)
    }
}

/// Where the two correction terms for the threshold come from: given
/// directly, or read off a decompressor's conditional tables.
pub enum DeltaSource<'a> {
    Fixed {
        l_star: u32,
        term_q: u32,
        term_n: u32,
    },
    Computed {
        dec: &'a ToyDecompressor,
        time_bound: u64,
        max_len: u32,
    },
}

/// Prices for every (x, q) pair: each entry is the threshold computed at
/// algorithm level q - d, with past volumes read from the trace relative to
/// the marker w. The d-bit shift is the overhead between the composite
/// machine and the base one.
#[allow(clippy::too_many_arguments)]
pub fn price_table(
    n: u32,
    w: &BitString,
    trace: &EnumerationTrace,
    universe: &[BitString],
    q_range: RangeInclusive<u32>,
    d: u32,
    lambda: u32,
    delta: &DeltaSource,
) -> Result<BTreeMap<(BitString, u32), u64>, KeyLemmaError> {
    let mut table = BTreeMap::new();
    if universe.is_empty() {
        return Ok(table);
    }
    let marker = w_marker(trace, n)?;
    if marker.w != *w {
        return Err(KeyLemmaError::MarkerMismatch {
            expected: w.clone(),
            actual: marker.w,
        });
    }
    if n >= 31 {
        return Err(KeyLemmaError::ExponentOutOfRange(n as i128));
    }
    let scale_n = 1u32 << n;
    for q in q_range {
        let aq = q
            .checked_sub(d)
            .filter(|aq| *aq > n)
            .ok_or_else(|| KeyLemmaError::Invalid(format!("level {q} needs q - {d} > {n}")))?;
        if aq >= 31 {
            return Err(KeyLemmaError::ExponentOutOfRange(aq as i128));
        }
        let scale_q = 1u32 << aq;
        let (l_star, term_q, term_n) = match delta {
            DeltaSource::Fixed {
                l_star,
                term_q,
                term_n,
            } => (*l_star, *term_q, *term_n),
            DeltaSource::Computed {
                dec,
                time_bound,
                max_len,
            } => {
                let qt = build_q_tilde(aq, n, dec, *time_bound, *max_len)?;
                let qt_str = structure_string(aq, qt.l_star);
                let alpha = match dec.time_bounded_complexity(&qt_str, &bin(n), *max_len, *time_bound)
                {
                    Complexity::Finite(a) => a,
                    Complexity::Infinite => {
                        return Err(KeyLemmaError::OracleIncomplete {
                            l: qt.l_star,
                            what: format!("alpha target {qt_str} given {n}"),
                        })
                    }
                };
                let pair = encode_tuple(&[qt_str, bin(alpha)]);
                let tq = match dec.time_bounded_complexity(&pair, &bin(aq), *max_len, *time_bound) {
                    Complexity::Finite(b) => b,
                    Complexity::Infinite => {
                        return Err(KeyLemmaError::OracleIncomplete {
                            l: qt.l_star,
                            what: format!("delta target {pair} given {aq}"),
                        })
                    }
                };
                (qt.l_star, tq, alpha)
            }
        };
        let qtilde = structure_string(aq, l_star);
        for x in universe {
            let past_q = past_volume(trace, std::slice::from_ref(x), scale_q, marker.index)?;
            let struct_n = past_volume(
                trace,
                &[qtilde.clone(), x.clone()],
                scale_n,
                marker.index,
            )?;
            let b = threshold(&ThresholdInputs {
                n,
                q: aq,
                lambda,
                past_volume_q: past_q,
                delta_terms: (term_q, term_n),
                struct_volume_n: struct_n,
            })?;
            table.insert((x.clone(), q), b);
        }
    }
    Ok(table)
}

pub fn parse_beta(text: &str) -> Result<BetaFunction, KeyLemmaError> {
    let mut seen: BTreeMap<u32, u32> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 4 || tokens[0] != "l" || tokens[2] != "beta" {
            return Err(KeyLemmaError::Parse {
                line,
                msg: format!("expected `l <int> beta <int>`, got `{trimmed}`"),
            });
        }
        let l: u32 = tokens[1].parse().map_err(|_| KeyLemmaError::Parse {
            line,
            msg: format!("bad l `{}`", tokens[1]),
        })?;
        let v: u32 = tokens[3].parse().map_err(|_| KeyLemmaError::Parse {
            line,
            msg: format!("bad beta `{}`", tokens[3]),
        })?;
        if seen.insert(l, v).is_some() {
            return Err(KeyLemmaError::Parse {
                line,
                msg: format!("duplicate l={l}"),
            });
        }
    }
    if seen.is_empty() {
        return Err(KeyLemmaError::Invalid("empty beta file".into()));
    }
    let q = *seen.keys().next_back().unwrap();
    let mut values = Vec::with_capacity(q as usize + 1);
    for l in 0..=q {
        match seen.get(&l) {
            Some(v) => values.push(*v),
            None => {
                return Err(KeyLemmaError::Invalid(format!(
                    "beta missing l={l} (domain must cover 0..={q})"
                )))
            }
        }
    }
    BetaFunction::new(values)
}

pub fn print_beta(beta: &BetaFunction) -> String {
    let mut out = String::new();
    for l in 0..=beta.q() {
        writeln!(out, "l {} beta {}", l, beta.get(l)).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy::TraceEvent;

    fn bs(s: &str) -> BitString {
        BitString::parse(s).unwrap()
    }

    fn beta(values: &[u32]) -> BetaFunction {
        BetaFunction::new(values.to_vec()).unwrap()
    }

    #[test]
    fn fixed_point_examples() {
        assert_eq!(fixed_point(&beta(&[1, 2, 2, 1, 2])).unwrap(), 2);
        assert_eq!(fixed_point(&beta(&[0, 0, 0, 0])).unwrap(), 0);
        assert_eq!(
            fixed_point(&beta(&[0, 1, 2, 3])),
            Err(KeyLemmaError::NoFixedPoint { q: 3, val: 3 })
        );
    }

    #[test]
    fn fixed_point_matches_exhaustive_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..300 {
            let q = rng.random_range(1..=12u32);
            let values: Vec<u32> = (0..=q).map(|_| rng.random_range(0..=q + 2)).collect();
            let b = beta(&values);
            let scan = (0..=q).filter(|&l| values[l as usize] >= l).max().unwrap();
            match fixed_point(&b) {
                Ok(l_star) => {
                    assert_eq!(l_star, scan);
                    assert!(values[l_star as usize] >= l_star);
                    assert!(values[l_star as usize + 1] < l_star + 1);
                }
                Err(KeyLemmaError::NoFixedPoint { .. }) => assert_eq!(scan, q),
                Err(e) => panic!("unexpected {e}"),
            }
        }
    }

    #[test]
    fn threshold_trivial_exit() {
        let b = threshold(&ThresholdInputs {
            n: 2,
            q: 3,
            lambda: 1,
            past_volume_q: 20,
            delta_terms: (0, 0),
            struct_volume_n: 0,
        })
        .unwrap();
        assert_eq!(b, 0);
    }

    #[test]
    fn threshold_num_output() {
        let b = threshold(&ThresholdInputs {
            n: 2,
            q: 3,
            lambda: 1,
            past_volume_q: 0,
            delta_terms: (3, 2),
            struct_volume_n: 1,
        })
        .unwrap();
        assert_eq!(b, 2);
    }

    #[test]
    fn threshold_heavy_structure_exit() {
        let b = threshold(&ThresholdInputs {
            n: 2,
            q: 3,
            lambda: 1,
            past_volume_q: 0,
            delta_terms: (3, 2),
            struct_volume_n: 2,
        })
        .unwrap();
        assert_eq!(b, 0);
    }

    #[test]
    fn threshold_rejects_bad_shapes() {
        let base = ThresholdInputs {
            n: 3,
            q: 3,
            lambda: 1,
            past_volume_q: 0,
            delta_terms: (0, 0),
            struct_volume_n: 0,
        };
        assert!(matches!(
            threshold(&base),
            Err(KeyLemmaError::Invalid(_))
        ));
        let negative = ThresholdInputs {
            n: 2,
            q: 3,
            lambda: 10,
            ..base
        };
        assert!(matches!(
            threshold(&negative),
            Err(KeyLemmaError::ExponentOutOfRange(_))
        ));
        let huge = ThresholdInputs { n: 2, q: 63, ..base };
        assert!(matches!(
            threshold(&huge),
            Err(KeyLemmaError::ExponentOutOfRange(_))
        ));
    }

    #[test]
    fn threshold_monotone_in_past_volume() {
        let mk = |past| ThresholdInputs {
            n: 2,
            q: 3,
            lambda: 1,
            past_volume_q: past,
            delta_terms: (3, 2),
            struct_volume_n: 0,
        };
        let mut last = threshold(&mk(0)).unwrap();
        for past in 1..=40 {
            let b = threshold(&mk(past)).unwrap();
            assert!(b <= last, "B rose from {last} to {b} at past={past}");
            last = b;
        }
        assert_eq!(last, 0);
    }

    /// Conditional table realizing beta = [1,2,2,1,2] at q=4, n=2.
    fn crafted_beta_table() -> ToyDecompressor {
        let mut dec = ToyDecompressor::new();
        let alpha_progs = ["0", "1", "00", "01", "10"];
        let beta_progs = ["0", "00", "01", "1", "10"];
        for l in 0..=4u32 {
            let t_l = structure_string(4, l);
            dec.insert_conditional(bs(alpha_progs[l as usize]), bin(2), t_l.clone(), 0)
                .unwrap();
            let alpha = alpha_progs[l as usize].len() as u32;
            let pair = encode_tuple(&[t_l, bin(alpha)]);
            dec.insert_conditional(bs(beta_progs[l as usize]), bin(4), pair, 0)
                .unwrap();
        }
        dec
    }

    #[test]
    fn build_q_tilde_from_crafted_table() {
        let dec = crafted_beta_table();
        let b = beta_from_decompressor(4, 2, &dec, 10, 32).unwrap();
        assert_eq!(b.values(), &[1, 2, 2, 1, 2]);
        let qt = build_q_tilde(4, 2, &dec, 10, 32).unwrap();
        assert_eq!(qt, QTilde { q: 4, l_star: 2 });
    }

    #[test]
    fn build_q_tilde_boundary_violation() {
        let mut dec = ToyDecompressor::new();
        let progs = ["0", "1", "00", "000", "0000"];
        for l in 0..=4u32 {
            let t_l = structure_string(4, l);
            dec.insert_conditional(bs(&"1".repeat(l as usize + 1)), bin(2), t_l.clone(), 0)
                .unwrap();
            let alpha = l + 1;
            let pair = encode_tuple(&[t_l, bin(alpha)]);
            dec.insert_conditional(bs(progs[l as usize]), bin(4), pair, 0)
                .unwrap();
        }
        assert!(matches!(
            build_q_tilde(4, 2, &dec, 10, 32),
            Err(KeyLemmaError::NoFixedPoint { q: 4, val: 4 })
        ));
    }

    #[test]
    fn build_q_tilde_incomplete_oracle() {
        let full = crafted_beta_table();
        let t3 = structure_string(4, 3);
        let pair3 = encode_tuple(&[t3, bin(2)]);
        let mut dec = ToyDecompressor::new();
        for ((p, c), e) in full.conditional() {
            if e.output != pair3 {
                dec.insert_conditional(p.clone(), c.clone(), e.output.clone(), e.cost)
                    .unwrap();
            }
        }
        assert!(matches!(
            build_q_tilde(4, 2, &dec, 10, 32),
            Err(KeyLemmaError::OracleIncomplete { l: 3, .. })
        ));
    }

    #[test]
    fn build_q_tilde_respects_time_bound() {
        let mut dec = ToyDecompressor::new();
        let alpha_progs = ["0", "1", "00", "01", "10"];
        let beta_progs = ["0", "00", "01", "1", "10"];
        for l in 0..=4u32 {
            let t_l = structure_string(4, l);
            dec.insert_conditional(bs(alpha_progs[l as usize]), bin(2), t_l.clone(), 5)
                .unwrap();
            let alpha = alpha_progs[l as usize].len() as u32;
            let pair = encode_tuple(&[t_l, bin(alpha)]);
            dec.insert_conditional(bs(beta_progs[l as usize]), bin(4), pair, 5)
                .unwrap();
        }
        assert!(matches!(
            build_q_tilde(4, 2, &dec, 4, 32),
            Err(KeyLemmaError::OracleIncomplete { l: 0, .. })
        ));
        assert_eq!(
            build_q_tilde(4, 2, &dec, 5, 32).unwrap(),
            QTilde { q: 4, l_star: 2 }
        );
    }

    fn marker_trace() -> EnumerationTrace {
        EnumerationTrace::from_events(vec![TraceEvent {
            step: 1,
            program: bs("00"),
            output: bs("11"),
            cost: 1,
        }])
        .unwrap()
    }

    #[test]
    fn price_table_num_values() {
        let trace = marker_trace();
        let delta = DeltaSource::Fixed {
            l_star: 0,
            term_q: 3,
            term_n: 2,
        };
        let table = price_table(2, &bs("11"), &trace, &[bs("0")], 5..=6, 2, 1, &delta).unwrap();
        assert_eq!(table.len(), 2);
        assert_eq!(table[&(bs("0"), 5)], 2);
        assert_eq!(table[&(bs("0"), 6)], 1);
    }

    #[test]
    fn price_table_trivial_row() {
        let mut events = Vec::new();
        for i in 0..16u64 {
            events.push(TraceEvent {
                step: i + 1,
                program: BitString::from_bits(
                    (0..5).map(|b| (i >> b) & 1 == 1).collect::<Vec<_>>(),
                ),
                output: encode_tuple(&[bs("0"), BitString::from_int(i)]),
                cost: 1,
            });
        }
        events.push(TraceEvent {
            step: 17,
            program: bs("00"),
            output: bs("11"),
            cost: 1,
        });
        let trace = EnumerationTrace::from_events(events).unwrap();
        let delta = DeltaSource::Fixed {
            l_star: 0,
            term_q: 3,
            term_n: 2,
        };
        let table = price_table(2, &bs("11"), &trace, &[bs("0")], 5..=5, 2, 1, &delta).unwrap();
        assert_eq!(table[&(bs("0"), 5)], 0);
    }

    #[test]
    fn price_table_empty_universe() {
        let trace = marker_trace();
        let delta = DeltaSource::Fixed {
            l_star: 0,
            term_q: 0,
            term_n: 0,
        };
        let table = price_table(2, &bs("11"), &trace, &[], 5..=6, 2, 1, &delta).unwrap();
        assert!(table.is_empty());
    }

    #[test]
    fn price_table_marker_mismatch() {
        let trace = marker_trace();
        let delta = DeltaSource::Fixed {
            l_star: 0,
            term_q: 0,
            term_n: 0,
        };
        assert!(matches!(
            price_table(2, &bs("00"), &trace, &[bs("0")], 5..=5, 2, 1, &delta),
            Err(KeyLemmaError::MarkerMismatch { .. })
        ));
    }

    #[test]
    fn beta_file_round_trip() {
        let b = beta(&[1, 2, 2, 1, 2]);
        let text = print_beta(&b);
        assert_eq!(text, "l 0 beta 1\nl 1 beta 2\nl 2 beta 2\nl 3 beta 1\nl 4 beta 2\n");
        assert_eq!(parse_beta(&text).unwrap(), b);
    }

    #[test]
    fn beta_file_rejects_gaps_and_junk() {
        assert!(matches!(
            parse_beta("l 0 beta 1\nl 2 beta 1\n"),
            Err(KeyLemmaError::Invalid(_))
        ));
        assert!(matches!(
            parse_beta("l 0 beta 1\nl 0 beta 2\n"),
            Err(KeyLemmaError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_beta("beta 0 l 1\n"),
            Err(KeyLemmaError::Parse { line: 1, .. })
        ));
        assert!(matches!(parse_beta(""), Err(KeyLemmaError::Invalid(_))));
    }
}
