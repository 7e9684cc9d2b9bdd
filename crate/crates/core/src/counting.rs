//! Counting simple strings through a threshold oracle.
//!
//! `count_simple` recovers N = |{x : C(x) <= m}| from the single-bit
//! predicate "are there at least t such strings", using binary search over
//! [0, 2^{m+1}]. The upper end is safe because fewer than 2^{m+1} strings
//! can have complexity at most m. The search issues at most m + 2 queries.

use thiserror::Error;

use crate::toy::ToyDecompressor;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CountError {
    #[error("complexity bound {0} too large for exact search")]
    MTooLarge(u32),
    #[error("predicate not monotone: true at {t_true}, false at {t_false}")]
    NonMonotone { t_true: u64, t_false: u64 },
}

/// Records probe answers and flags any pair witnessing non-monotonicity.
/// A faithful binary search keeps all probes between its known-true and
/// known-false frontiers, so this stays silent there; it exists for callers
/// that mix in answers from elsewhere.
#[derive(Debug, Default, Clone, Copy)]
pub struct MonotoneCheck {
    max_true: Option<u64>,
    min_false: Option<u64>,
}

impl MonotoneCheck {
    pub fn record(&mut self, t: u64, answer: bool) -> Result<(), CountError> {
        if answer {
            if let Some(f) = self.min_false {
                if t >= f {
                    return Err(CountError::NonMonotone {
                        t_true: t,
                        t_false: f,
                    });
                }
            }
            self.max_true = Some(self.max_true.map_or(t, |m| m.max(t)));
        } else {
            if let Some(tr) = self.max_true {
                if tr >= t {
                    return Err(CountError::NonMonotone {
                        t_true: tr,
                        t_false: t,
                    });
                }
            }
            self.min_false = Some(self.min_false.map_or(t, |m| m.min(t)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountOutcome {
    pub count: u64,
    pub queries: u32,
}

pub fn count_simple(
    m: u32,
    mut pred: impl FnMut(u64) -> bool,
) -> Result<CountOutcome, CountError> {
    if m > 62 {
        return Err(CountError::MTooLarge(m));
    }
    let mut lo: i128 = 0;
    let mut hi: i128 = 1i128 << (m + 1);
    let mut ans: i128 = 0;
    let mut queries = 0u32;
    let mut check = MonotoneCheck::default();
    while lo <= hi {
        let mid = (lo + hi) / 2;
        queries += 1;
        let answer = pred(mid as u64);
        check.record(mid as u64, answer)?;
        if answer {
            ans = mid;
            lo = mid + 1;
        } else {
            hi = mid - 1;
        }
    }
    Ok(CountOutcome {
        count: ans as u64,
        queries,
    })
}

/// The threshold predicate a finite decompressor table induces.
pub fn predicate_from_decompressor(
    dec: &ToyDecompressor,
    m: u32,
) -> impl FnMut(u64) -> bool + '_ {
    move |t| dec.simple_count(m) >= t
}

pub fn count_simple_decompressor(
    dec: &ToyDecompressor,
    m: u32,
) -> Result<CountOutcome, CountError> {
    count_simple(m, predicate_from_decompressor(dec, m))
}
