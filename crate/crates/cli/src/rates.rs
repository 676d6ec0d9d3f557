//! Observed convergence orders from `(k, e)` pairs.

use log::warn;

/// Number of finest levels used by [`fit_rate`].
pub const FIT_LEVELS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RateFit {
    Slope(f64),
    /// Fewer than [`FIT_LEVELS`] usable pairs.
    NoFit,
}

impl RateFit {
    pub fn slope(self) -> Option<f64> {
        match self {
            RateFit::Slope(s) => Some(s),
            RateFit::NoFit => None,
        }
    }

    /// `true` when a slope exists and is at least `target`.
    pub fn at_least(self, target: f64) -> bool {
        self.slope().is_some_and(|s| s >= target)
    }
}

/// Least-squares slope of `log e` against `log k` over the four smallest `k`.
/// Nonpositive or non-finite errors are dropped with a warning.
pub fn fit_rate(points: &[(f64, f64)]) -> RateFit {
    let mut usable: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(k, e)| {
            let ok = k > 0.0 && e > 0.0 && k.is_finite() && e.is_finite();
            if !ok {
                warn!("dropping level k = {k}, e = {e} from the rate fit");
            }
            ok
        })
        .collect();
    if usable.len() < FIT_LEVELS {
        return RateFit::NoFit;
    }
    usable.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (xs, ys): (Vec<f64>, Vec<f64>) = usable[..FIT_LEVELS]
        .iter()
        .map(|&(k, e)| (k.ln(), e.ln()))
        .unzip();
    let n = FIT_LEVELS as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return RateFit::NoFit;
    }
    RateFit::Slope(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn levels() -> Vec<f64> {
        [8.0, 16.0, 32.0, 64.0, 128.0].iter().map(|n| 1.0 / n).collect()
    }

    #[test]
    fn exact_power() {
        let pts: Vec<_> = levels().into_iter().map(|k| (k, k * k)).collect();
        assert_abs_diff_eq!(fit_rate(&pts).slope().unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn perturbed_power() {
        let pts: Vec<_> = levels()
            .into_iter()
            .map(|k| (k, 3.0 * k.powf(1.5) * (1.0 + 0.01 * (1.0 / k).sin())))
            .collect();
        let s = fit_rate(&pts).slope().unwrap();
        assert!((s - 1.5).abs() <= 0.05, "{s}");
    }

    #[test]
    fn constant_error() {
        let pts: Vec<_> = levels().into_iter().map(|k| (k, 0.3)).collect();
        assert_abs_diff_eq!(fit_rate(&pts).slope().unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn too_few_levels() {
        let mut pts: Vec<_> = levels().into_iter().map(|k| (k, k)).collect();
        pts[1].1 = 0.0;
        pts[2].1 = f64::NAN;
        assert_eq!(fit_rate(&pts), RateFit::NoFit);
        assert_eq!(fit_rate(&pts[..3]), RateFit::NoFit);
    }

    #[test]
    fn coarsest_level_is_ignored() {
        let mut pts: Vec<_> = levels().into_iter().map(|k| (k, k * k)).collect();
        pts[0].1 = 1e6;
        assert_abs_diff_eq!(fit_rate(&pts).slope().unwrap(), 2.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn recovers_any_power(r in 0.0f64..6.0, c in 1e-3f64..1e3) {
            let pts: Vec<_> = levels().into_iter().map(|k| (k, c * k.powf(r))).collect();
            prop_assert!((fit_rate(&pts).slope().unwrap() - r).abs() < 1e-9);
        }
    }
}
