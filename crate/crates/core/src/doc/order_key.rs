//! Fractional order keys.
//!
//! A key is a non-empty string over `a..=z`. Keys are compared
//! lexicographically. Generated keys never end in `a`, which guarantees that
//! another key always fits between any two generated keys, so a block can be
//! positioned between two siblings without renumbering anything.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::DocError;

const BASE: u8 = 26;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct OrderKey(String);

impl OrderKey {
    pub fn parse(s: &str) -> Result<Self, DocError> {
        let valid = !s.is_empty() && s.bytes().all(|b| b.is_ascii_lowercase());
        if valid {
            Ok(OrderKey(s.to_owned()))
        } else {
            Err(DocError::InvalidKey(s.to_owned()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for OrderKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for OrderKey {
    type Error = DocError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        OrderKey::parse(&s)
    }
}

impl From<OrderKey> for String {
    fn from(k: OrderKey) -> String {
        k.0
    }
}

/// Returns a key strictly between `lo` and `hi`, where `None` stands for
/// the open end of the range.
pub fn order_key_between(
    lo: Option<&OrderKey>,
    hi: Option<&OrderKey>,
) -> Result<OrderKey, DocError> {
    if let (Some(lo), Some(hi)) = (lo, hi) {
        if lo >= hi {
            return Err(DocError::KeyOrderViolation {
                lo: lo.0.clone(),
                hi: hi.0.clone(),
            });
        }
        if hi.0.trim_end_matches('a') <= lo.0.as_str() {
            return Err(DocError::NoGap { lo: lo.0.clone(), hi: hi.0.clone() });
        }
    }
    if let (None, Some(hi)) = (lo, hi) {
        if hi.0.trim_end_matches('a').is_empty() {
            return Err(DocError::NoGap { lo: String::new(), hi: hi.0.clone() });
        }
    }
    let lo_digits: Vec<u8> = lo.map(|k| digits(&k.0)).unwrap_or_default();
    let hi_digits: Option<Vec<u8>> = hi.map(|k| digits(&k.0));
    let mid = midpoint(&lo_digits, hi_digits.as_deref());
    Ok(OrderKey(mid.into_iter().map(|d| (b'a' + d) as char).collect()))
}

fn digits(s: &str) -> Vec<u8> {
    s.bytes().map(|b| b - b'a').collect()
}

// `lo` is treated as padded with zero digits; `hi == None` is +infinity.
fn midpoint(lo: &[u8], hi: Option<&[u8]>) -> Vec<u8> {
    if let Some(hi) = hi {
        let shared = hi
            .iter()
            .enumerate()
            .take_while(|&(i, &d)| lo.get(i).copied().unwrap_or(0) == d)
            .count();
        if shared > 0 {
            let mut out = hi[..shared].to_vec();
            let rest_lo = if shared < lo.len() { &lo[shared..] } else { &[][..] };
            out.extend(midpoint(rest_lo, Some(&hi[shared..])));
            return out;
        }
    }

    let lo_digit = lo.first().copied().unwrap_or(0);
    let hi_digit = hi.map_or(BASE, |h| h[0]);
    if hi_digit - lo_digit > 1 {
        return vec![(lo_digit + hi_digit) / 2];
    }
    match hi {
        // hi's first digit alone sorts above lo and below hi itself
        Some(h) if h.len() > 1 => vec![h[0]],
        _ => {
            let mut out = vec![lo_digit];
            let rest_lo = if lo.len() > 1 { &lo[1..] } else { &[][..] };
            out.extend(midpoint(rest_lo, None));
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(s: &str) -> OrderKey {
        OrderKey::parse(s).unwrap()
    }

    fn between(lo: Option<&str>, hi: Option<&str>) -> String {
        let lo = lo.map(key);
        let hi = hi.map(key);
        order_key_between(lo.as_ref(), hi.as_ref()).unwrap().0
    }

    #[test]
    fn direct_midpoint() {
        assert_eq!(between(Some("a"), Some("c")), "b");
    }

    #[test]
    fn unbounded_is_middle_of_alphabet() {
        let k = between(None, None);
        assert_eq!(k, "n");
    }

    #[test]
    fn adjacent_digits_extend_the_key() {
        let k = between(Some("a"), Some("b"));
        assert_eq!(k, "an");
        assert!("a" < k.as_str() && k.as_str() < "b");
    }

    #[test]
    fn open_ends() {
        let k = between(Some("z"), None);
        assert!(k.as_str() > "z");
        let k = between(None, Some("b"));
        assert!(k.as_str() < "b");
        let k = between(None, Some("ab"));
        assert!(k.as_str() < "ab" && !k.ends_with('a'));
    }

    #[test]
    fn shared_prefix() {
        let k = between(Some("az"), Some("b"));
        assert!("az" < k.as_str() && k.as_str() < "b");
        let k = between(Some("bcd"), Some("bce"));
        assert!("bcd" < k.as_str() && k.as_str() < "bce");
    }

    #[test]
    fn rejects_inverted_bounds() {
        let err = order_key_between(Some(&key("c")), Some(&key("b"))).unwrap_err();
        assert!(matches!(err, DocError::KeyOrderViolation { .. }));
        let err = order_key_between(Some(&key("c")), Some(&key("c"))).unwrap_err();
        assert!(matches!(err, DocError::KeyOrderViolation { .. }));
    }

    #[test]
    fn no_gap_when_upper_bound_only_pads_lower() {
        let err = order_key_between(Some(&key("b")), Some(&key("baa"))).unwrap_err();
        assert!(matches!(err, DocError::NoGap { .. }));
        let err = order_key_between(None, Some(&key("aa"))).unwrap_err();
        assert!(matches!(err, DocError::NoGap { .. }));
        let k = order_key_between(Some(&key("b")), Some(&key("baab"))).unwrap();
        assert!("b" < k.as_str() && k.as_str() < "baab" && !k.as_str().ends_with('a'));
    }

    #[test]
    fn rejects_malformed_keys() {
        assert!(OrderKey::parse("").is_err());
        assert!(OrderKey::parse("B").is_err());
        assert!(OrderKey::parse("b1").is_err());
    }

    #[test]
    fn repeated_appends_stay_ordered() {
        let mut last: Option<OrderKey> = None;
        for _ in 0..200 {
            let next = order_key_between(last.as_ref(), None).unwrap();
            if let Some(prev) = &last {
                assert!(prev < &next);
            }
            last = Some(next);
        }
        let mut hi: Option<OrderKey> = None;
        for _ in 0..200 {
            let next = order_key_between(None, hi.as_ref()).unwrap();
            if let Some(h) = &hi {
                assert!(&next < h);
            }
            hi = Some(next);
        }
    }
}
