use crate::error::{Error, Result};

use super::confusion::UqConfusion;

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    Ok(())
}

/// `RS_α = CT/(T + α·F) − CF/(F + α·T)` from integer counts.
///
/// Fails when a denominator vanishes, which only happens for `α = 0` with no
/// true or no false predictions.
pub fn ranking_score(c: &UqConfusion, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if c.n == 0 || c.n != c.ct + c.ut + c.cf + c.uf {
        return Err(Error::InvalidInput("ranking score needs a non-empty, consistent confusion".into()));
    }
    rs_core(c.ct as f64, c.trues() as f64, c.cf as f64, c.falses() as f64, alpha)
}

/// The same score from rates, for averaged (non-integral) confusions.
pub fn ranking_score_from_rates(ct: f64, ut: f64, cf: f64, uf: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if [ct, ut, cf, uf].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidInput("rates must be finite and non-negative".into()));
    }
    rs_core(ct, ct + ut, cf, cf + uf, alpha)
}

fn rs_core(ct: f64, t: f64, cf: f64, f: f64, alpha: f64) -> Result<f64> {
    let d_true = t + alpha * f;
    let d_false = f + alpha * t;
    if d_true == 0.0 || d_false == 0.0 {
        return Err(Error::UndefinedScore { t, f });
    }
    Ok(ct / d_true - cf / d_false)
}

/// Weight `f_α(x) = x / (x + α·(1 − x))` applied to the confident rates.
pub fn ranking_weight(x: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidInput(format!("x must lie in [0, 1], got {x}")));
    }
    let denom = x + alpha * (1.0 - x);
    if denom == 0.0 {
        return Err(Error::UndefinedScore { t: 0.0, f: 1.0 });
    }
    Ok(x / denom)
}

/// `f_α(win)·CT/T − f_α(1 − win)·CF/F`; requires `T > 0` and `F > 0`.
pub fn unified_ranking_score(c: &UqConfusion, alpha: f64) -> Result<f64> {
    let (t, f) = (c.trues() as f64, c.falses() as f64);
    if t == 0.0 || f == 0.0 {
        return Err(Error::UndefinedScore { t, f });
    }
    let win = c.win_rate();
    Ok(ranking_weight(win, alpha)? * c.ct as f64 / t - ranking_weight(1.0 - win, alpha)? * c.cf as f64 / f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rs(ct: u64, ut: u64, cf: u64, uf: u64, a: f64) -> f64 {
        ranking_score(&UqConfusion::from_counts(ct, ut, cf, uf), a).unwrap()
    }

    #[test]
    fn table_fixtures() {
        assert!((rs(40, 60, 2, 8, 0.0) - 0.2).abs() < 1e-12);
        assert!((rs(40, 60, 2, 8, 1.0) - 38.0 / 110.0).abs() < 1e-12);
        assert!((rs(42, 63, 1, 4, 0.0) - 0.2).abs() < 1e-12);
        assert!((rs(70, 30, 5, 5, 0.0) - 0.2).abs() < 1e-12);
        assert!((rs(40, 8, 2, 60, 1.0) - 38.0 / 110.0).abs() < 1e-12);
        assert!((rs(48, 52, 10, 0, 1.0) - 38.0 / 110.0).abs() < 1e-12);
    }

    #[test]
    fn all_unconfident_scores_zero() {
        for a in [0.0, 0.2, 1.0] {
            assert_eq!(rs(0, 7, 0, 3, a), 0.0);
        }
    }

    #[test]
    fn zero_alpha_needs_both_classes() {
        let c = UqConfusion::from_counts(3, 2, 0, 0);
        assert!(matches!(ranking_score(&c, 0.0), Err(Error::UndefinedScore { .. })));
        assert_eq!(ranking_score(&c, 0.5).unwrap(), 0.6);
        assert!(ranking_score(&c, 1.5).is_err());
    }

    #[test]
    fn weight_fixtures() {
        let f = |x| ranking_weight(x, 0.2).unwrap();
        assert!((f(0.6) - 0.88).abs() < 0.005);
        assert!((f(0.8) - 0.95).abs() < 0.005);
        assert!((f(0.4) - 0.77).abs() < 0.005);
        assert!((f(0.2) - 0.56).abs() < 0.005);
        assert_eq!(ranking_weight(0.3, 1.0).unwrap(), 0.3);
        assert_eq!(ranking_weight(1.0, 0.7).unwrap(), 1.0);
        assert_eq!(ranking_weight(0.1, 0.0).unwrap(), 1.0);
        assert!(ranking_weight(0.0, 0.0).is_err());
    }

    #[test]
    fn rate_form_matches_counts() {
        let c = UqConfusion::from_counts(13, 5, 2, 9);
        let [a, b, d, e] = c.rates();
        let r = ranking_score_from_rates(a, b, d, e, 0.2).unwrap();
        assert!((r - ranking_score(&c, 0.2).unwrap()).abs() < 1e-12);
        assert!((unified_ranking_score(&c, 0.2).unwrap() - r).abs() < 1e-12);
    }
}
