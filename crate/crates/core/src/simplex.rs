//! Euclidean projection onto the probability simplex.

/// Projection of `v` onto `{x : x >= 0, Σ x = 1}` (sort-and-threshold).
pub(crate) fn project(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cumsum += uk;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Uniformly random point of the simplex (normalised exponentials).
pub(crate) fn random_point<R: rand::Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_lands_on_simplex_and_fixes_points_on_it() {
        let p = project(&[0.3, -0.2, 1.4]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| x >= 0.0));
        assert_eq!(p, vec![0.0, 0.0, 1.0]);
        let q = [0.2, 0.5, 0.3];
        let pq = project(&q);
        for (a, b) in pq.iter().zip(q) {
            assert!((a - b).abs() < 1e-15);
        }
        let r = project(&[1.0, 1.0]);
        assert!((r[0] - 0.5).abs() < 1e-15);
    }
}
