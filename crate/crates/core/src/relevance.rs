//! Directed change-point distance and the symmetric relevance score built on
//! it, plus deterministic top-k ranking.
//!
//! Arrays are sample offsets from the analysis-window start, so the
//! normalization length is the window length in samples.

use crate::changepoint::ChangePointArray;
use crate::clue::TimeRange;
use crate::error::{Error, Result};

/// Nearest element of sorted `t` to `x`; equidistant neighbours resolve to
/// the earlier one.
fn nearest(t: &[f64], x: f64) -> f64 {
    let i = t.partition_point(|v| *v < x);
    match (i.checked_sub(1).map(|j| t[j]), t.get(i).copied()) {
        (Some(lo), Some(hi)) => {
            if x - lo <= hi - x {
                lo
            } else {
                hi
            }
        }
        (Some(lo), None) => lo,
        (None, Some(hi)) => hi,
        (None, None) => unreachable!("caller checks t is non-empty"),
    }
}

/// Sum over `s` of the distance to the nearest point of `t`.
pub fn directed_distance(s: &[f64], t: &[f64]) -> Result<f64> {
    if t.is_empty() {
        return Err(Error::invalid("directed distance needs a non-empty target array"));
    }
    let sorted;
    let t = if t.windows(2).all(|w| w[0] <= w[1]) {
        t
    } else {
        sorted = {
            let mut v = t.to_vec();
            v.sort_by(f64::total_cmp);
            v
        };
        &sorted
    };
    Ok(s.iter().map(|x| (x - nearest(t, *x)).abs()).sum())
}

/// Relevance of two change-point arrays over a window of `window_len`
/// samples. Zero when either array is empty.
pub fn relevance(s1: &[f64], s2: &[f64], window_len: usize) -> f64 {
    if s1.is_empty() || s2.is_empty() {
        return 0.0;
    }
    let n = window_len.max(1) as f64;
    let d12 = directed_distance(s1, s2).expect("non-empty") / s1.len() as f64;
    let d21 = directed_distance(s2, s1).expect("non-empty") / s2.len() as f64;
    1.0 - (d12 + d21) / (2.0 * n)
}

/// Relevance of two timestamp arrays within `window` sampled every `step`
/// seconds.
pub fn relevance_in_window(a: &ChangePointArray, b: &ChangePointArray, window: &TimeRange, step: i64) -> f64 {
    relevance(
        &a.offsets(window.start, step),
        &b.offsets(window.start, step),
        window.samples(step),
    )
}

/// Top-`k` candidates by descending relevance to `baseline`, ties by
/// ascending id.
pub fn rank_candidates(
    baseline: &[f64],
    candidates: &[(String, Vec<f64>)],
    window_len: usize,
    k: usize,
) -> Result<Vec<(String, f64)>> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let mut scored: Vec<(String, f64)> = candidates
        .iter()
        .map(|(id, cp)| (id.clone(), relevance(baseline, cp, window_len)))
        .collect();
    sort_ranked(&mut scored);
    scored.truncate(k);
    Ok(scored)
}

/// Descending score, then ascending id.
pub fn sort_ranked(entries: &mut [(String, f64)]) {
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use proptest::prelude::*;

    #[test]
    fn directed_distance_examples() {
        assert_eq!(directed_distance(&[1.0, 5.0], &[2.0, 9.0]).unwrap(), 4.0);
        assert_eq!(directed_distance(&[1.0, 5.0], &[2.0]).unwrap(), 4.0);
        assert_eq!(directed_distance(&[2.0], &[1.0, 5.0]).unwrap(), 1.0);
        assert_eq!(directed_distance(&[3.0, 7.0], &[3.0, 7.0]).unwrap(), 0.0);
        assert!(directed_distance(&[1.0], &[]).is_err());
    }

    #[test]
    fn relevance_examples() {
        assert_eq!(relevance(&[10.0], &[10.0], 100), 1.0);
        assert!((relevance(&[10.0, 50.0], &[12.0, 60.0], 100) - 0.94).abs() < 1e-12);
        assert_eq!(relevance(&[], &[10.0], 100), 0.0);
        assert_eq!(relevance(&[10.0], &[], 100), 0.0);
        assert_eq!(relevance(&[], &[], 100), 0.0);
    }

    #[test]
    fn ranking_examples() {
        assert!(rank_candidates(&[1.0], &[], 10, 5).unwrap().is_empty());
        assert!(rank_candidates(&[1.0], &[], 10, 0).is_err());
        let c = vec![("b".to_string(), vec![3.0]), ("a".to_string(), vec![3.0])];
        let r = rank_candidates(&[3.0], &c, 10, 5).unwrap();
        assert_eq!(r[0].0, "a");
        assert_eq!(r[1].0, "b");
    }

    fn arrays() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        let one = proptest::collection::btree_set(0u32..=200, 1..=10)
            .prop_map(|s| s.into_iter().map(f64::from).collect::<Vec<_>>());
        (one.clone(), one)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn symmetric_bounded_and_reflexive((a, b) in arrays()) {
            let r = relevance(&a, &b, 200);
            prop_assert_eq!(r, relevance(&b, &a, 200));
            prop_assert!((0.0..=1.0).contains(&r));
            prop_assert_eq!(relevance(&a, &a, 200), 1.0);
            prop_assert_eq!(relevance(&a, &[], 200), 0.0);
            prop_assert_eq!(relevance(&[], &b, 200), 0.0);
        }
    }

    proptest! {
        #[test]
        fn matches_brute_force((a, b) in arrays()) {
            let got = relevance(&a, &b, 200);
            let want = oracle::relevance(&a, &b, 200);
            prop_assert!((got - want).abs() <= 1e-9);
        }

        #[test]
        fn top_k_matches_exhaustive(
            base in proptest::collection::btree_set(0u32..=200, 1..=6),
            cands in proptest::collection::vec(proptest::collection::btree_set(0u32..=200, 0..=6), 0..12),
            k in 1usize..8,
        ) {
            let to_f = |s: &std::collections::BTreeSet<u32>| s.iter().map(|v| f64::from(*v)).collect::<Vec<_>>();
            let base = to_f(&base);
            let cands: Vec<(String, Vec<f64>)> = cands.iter().enumerate().map(|(i, s)| (format!("c{i:02}"), to_f(s))).collect();
            let got = rank_candidates(&base, &cands, 200, k).unwrap();
            let want = oracle::top_k(&base, &cands, 200, k);
            prop_assert_eq!(got.len(), want.len());
            for (i, (g, w)) in got.iter().zip(&want).enumerate() {
                prop_assert!((g.1 - w.1).abs() <= 1e-9);
                // Ids may only differ between candidates whose scores tie up
                // to rounding.
                if g.0 != w.0 {
                    let tied = want.iter().any(|o| o.0 == g.0 && (o.1 - w.1).abs() <= 1e-9);
                    prop_assert!(tied, "position {i}: {g:?} vs {w:?}");
                }
            }
        }
    }
}
