//! Attack and robustness summaries. Rates are percentages.

use crate::{HarnessError, Result};

fn bad<T>(msg: &str) -> Result<T> {
    Err(HarnessError::Metric(msg.into()))
}

fn pct(count: usize, total: usize) -> f64 {
    100.0 * count as f64 / total as f64
}

/// Share of runs in which every model was fooled (`success[run][model]`).
pub fn asr_all(success: &[Vec<bool>]) -> Result<f64> {
    if success.is_empty() || success.iter().any(Vec::is_empty) {
        return bad("asr_all needs at least one run and one model");
    }
    Ok(pct(success.iter().filter(|row| row.iter().all(|&s| s)).count(), success.len()))
}

/// `(ASR_avg, ASR_gp)` from `success[group][image]`: the share of fooled
/// images, and the share of groups whose images were all fooled.
pub fn asr_group(success: &[Vec<bool>]) -> Result<(f64, f64)> {
    let Some(first) = success.first() else {
        return bad("asr_group needs at least one group");
    };
    if first.is_empty() || success.iter().any(|g| g.len() != first.len()) {
        return bad("groups must be non-empty and of equal size");
    }
    let images = success.len() * first.len();
    let fooled = success.iter().flatten().filter(|&&s| s).count();
    let groups = success.iter().filter(|g| g.iter().all(|&s| s)).count();
    Ok((pct(fooled, images), pct(groups, success.len())))
}

/// `(Acc_adv^max, Acc_adv^avg)` from `correct[example][type]`.
pub fn acc_adv(correct: &[Vec<bool>]) -> Result<(f64, f64)> {
    let Some(first) = correct.first() else {
        return bad("acc_adv needs at least one example");
    };
    if first.is_empty() || correct.iter().any(|r| r.len() != first.len()) {
        return bad("every example needs the same non-zero number of attack types");
    }
    let worst = correct.iter().filter(|r| r.iter().all(|&c| c)).count();
    let cells = correct.iter().flatten().filter(|&&c| c).count();
    Ok((pct(worst, correct.len()), pct(cells, correct.len() * first.len())))
}

/// Trapezoidal area under `(ε, Acc_adv^max)` points with strictly
/// increasing `ε`.
pub fn s_eps(curve: &[(f64, f64)]) -> Result<f64> {
    if curve.len() < 2 {
        return bad("s_eps needs at least two points");
    }
    if curve.iter().any(|(e, a)| !e.is_finite() || !a.is_finite()) {
        return bad("s_eps points must be finite");
    }
    if curve.windows(2).any(|w| w[1].0 <= w[0].0) {
        return bad("s_eps needs strictly increasing epsilon");
    }
    Ok(curve.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(asr_all(&[vec![true, true], vec![true, false]]).unwrap(), 50.0);
        assert_eq!(asr_all(&vec![vec![true; 3]; 4]).unwrap(), 100.0);
        assert_eq!(asr_all(&[vec![true], vec![false], vec![true], vec![true]]).unwrap(), 75.0);
        assert_eq!(asr_group(&[vec![true, false]]).unwrap(), (50.0, 0.0));
        assert_eq!(asr_group(&[vec![true, true], vec![true, false]]).unwrap(), (75.0, 50.0));
        assert_eq!(acc_adv(&[vec![true, false]]).unwrap(), (0.0, 50.0));
        assert_eq!(acc_adv(&[vec![true, true], vec![true, true]]).unwrap(), (100.0, 100.0));
        assert_eq!(s_eps(&[(0.0, 1.0), (1.0, 1.0)]).unwrap(), 1.0);
        assert_eq!(s_eps(&[(0.0, 1.0), (1.0, 0.0)]).unwrap(), 0.5);
    }

    #[test]
    fn invalid_inputs() {
        assert!(asr_all(&[]).is_err());
        assert!(asr_group(&[vec![true], vec![true, false]]).is_err());
        assert!(acc_adv(&[]).is_err());
        assert!(s_eps(&[(0.0, 1.0)]).is_err());
        assert!(s_eps(&[(0.5, 1.0), (0.2, 0.0)]).is_err());
    }
}
