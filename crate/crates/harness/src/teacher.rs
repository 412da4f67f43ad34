use crate::HarnessError;

/// `w* = s^{-1/2}(1, …, 1, 0, …, 0)` with `s` leading ones.
pub fn build_teacher(d: usize, s: usize) -> Result<Vec<f64>, HarnessError> {
    if s == 0 || s > d {
        return Err(HarnessError::Config(format!(
            "sparsity {s} must lie in 1..={d}"
        )));
    }
    let v = 1.0 / (s as f64).sqrt();
    Ok((0..d).map(|i| if i < s { v } else { 0.0 }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let w = build_teacher(50, 4).unwrap();
        assert_eq!(&w[..4], &[0.5; 4]);
        assert!(w[4..].iter().all(|x| *x == 0.0));
        assert_eq!(build_teacher(1, 1).unwrap(), vec![1.0]);
        assert!(build_teacher(3, 4).is_err());
        assert!(build_teacher(3, 0).is_err());
    }

    #[test]
    fn unit_norm() {
        for d in 1..=60 {
            for s in 1..=d {
                let n: f64 = build_teacher(d, s).unwrap().iter().map(|x| x * x).sum();
                assert!((n - 1.0).abs() < 1e-14, "d={d} s={s}");
            }
        }
    }
}
