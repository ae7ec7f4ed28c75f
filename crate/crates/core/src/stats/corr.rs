use crate::error::{contract, Error, Result};

/// Sample Pearson correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(contract(format!("pearson on lengths {} and {}", a.len(), b.len())));
    }
    if a.len() < 3 {
        return Err(contract("pearson needs at least 3 points"));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Entry `lag` is `pearson(v[lag..], c[..len - lag])`: `v` now against `c`
/// `lag` steps earlier.
pub fn cross_correlation(v: &[f64], c: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if v.len() != c.len() {
        return Err(contract(format!("series lengths {} and {} differ", v.len(), c.len())));
    }
    if v.len() <= max_lag + 2 {
        return Err(contract(format!("series of length {} too short for lag {max_lag}", v.len())));
    }
    let n = v.len();
    (0..=max_lag).map(|lag| pearson(&v[lag..], &c[..n - lag])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngState;

    #[test]
    fn perfect_and_affine() {
        let a = [1.0, 2.0, 4.0, 8.0];
        assert!((pearson(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let b: Vec<f64> = a.iter().map(|x| -2.0 * x + 7.0).collect();
        assert!((pearson(&a, &b).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_variance_is_undefined() {
        assert!(matches!(pearson(&[1.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]), Err(Error::UndefinedCorrelation(_))));
    }

    #[test]
    fn shifted_copy_peaks_at_shift() {
        let mut rng = RngState::new(8);
        let base: Vec<f64> = (0..400).map(|_| rng.normal()).collect();
        let v: Vec<f64> = (0..397).map(|t| base[t]).collect();
        // c leads v by 3 steps: v[t] = c[t - 3].
        let mut c = vec![0.0; 397];
        for t in 0..394 {
            c[t] = base[t + 3];
        }
        for t in 394..397 {
            c[t] = rng.normal();
        }
        let cc = cross_correlation(&v, &c, 6).unwrap();
        let best = (0..cc.len()).max_by(|&i, &j| cc[i].total_cmp(&cc[j])).unwrap();
        assert_eq!(best, 3);
    }

    #[test]
    fn lag_zero_is_pearson() {
        let mut rng = RngState::new(2);
        let v: Vec<f64> = (0..50).map(|_| rng.normal()).collect();
        let c: Vec<f64> = (0..50).map(|_| rng.normal()).collect();
        assert_eq!(cross_correlation(&v, &c, 4).unwrap()[0], pearson(&v, &c).unwrap());
        assert!(cross_correlation(&v[..5], &c[..5], 3).is_err());
    }
}
