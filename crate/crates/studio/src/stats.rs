//! Two-sample comparison of per-example errors.

use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::statistics::Statistics;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

/// Welch's unequal-variance t-test of `mean(a) - mean(b)`. `None` when a
/// sample has fewer than two values. Two constant samples give `t = 0,
/// p = 1` if their means agree and `t = ±inf, p = 0` otherwise.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Option<WelchResult> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (a.mean(), b.mean());
    let (va, vb) = (a.variance() / na, b.variance() / nb);
    let se2 = va + vb;
    let diff = ma - mb;
    if se2 == 0.0 {
        return Some(if diff == 0.0 {
            WelchResult { t: 0.0, df: na + nb - 2.0, p: 1.0 }
        } else {
            WelchResult { t: diff.signum() * f64::INFINITY, df: na + nb - 2.0, p: 0.0 }
        });
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).ok()?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Some(WelchResult { t, df, p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn repeat(v: &[f64], n: usize) -> Vec<f64> {
        v.iter().copied().cycle().take(n).collect()
    }

    #[test]
    fn identical_samples() {
        let a = [1.0, 2.0, 3.0, 5.0];
        let r = welch_t_test(&a, &a).unwrap();
        assert_eq!(r.t, 0.0);
        assert!((r.p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shifted_by_ten() {
        let a = repeat(&[1.0, 2.0, 3.0], 30);
        let b: Vec<f64> = a.iter().map(|v| v + 10.0).collect();
        let r = welch_t_test(&a, &b).unwrap();
        assert!(r.t < 0.0 && r.p < 1e-6, "{r:?}");
    }

    #[test]
    fn hand_computed_example() {
        // a: mean 2, var 1; b: mean 4, var 4, n = 3 each.
        // se² = 1/3 + 4/3 = 5/3; t = -2 / sqrt(5/3); df = (5/3)² / ((1/9 + 16/9) / 2).
        let r = welch_t_test(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap();
        let se2: f64 = 5.0 / 3.0;
        assert!((r.t + 2.0 / se2.sqrt()).abs() < 1e-12);
        assert!((r.df - se2 * se2 / (17.0 / 18.0)).abs() < 1e-12);
        // Reference value from an independent statistics package.
        assert!((r.p - 0.2208808404940958).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn constant_samples() {
        assert_eq!(welch_t_test(&[1.0, 1.0], &[1.0, 1.0]).unwrap().p, 1.0);
        let r = welch_t_test(&[1.0, 1.0], &[2.0, 2.0]).unwrap();
        assert_eq!((r.t, r.p), (f64::NEG_INFINITY, 0.0));
        assert!(welch_t_test(&[1.0], &[1.0, 2.0]).is_none());
    }

    proptest! {
        #[test]
        fn swap_negates_t_keeps_p(
            a in prop::collection::vec(-10.0f64..10.0, 2..20),
            b in prop::collection::vec(-10.0f64..10.0, 2..20),
        ) {
            let (x, y) = (welch_t_test(&a, &b).unwrap(), welch_t_test(&b, &a).unwrap());
            prop_assert_eq!(x.t, -y.t);
            prop_assert!((x.p - y.p).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&x.p));
        }
    }
}
