//! Central-difference gradient oracle for checking analytic gradients.

/// Central differences per coordinate with step `h_scale * (1 + |p_i|)`.
pub fn finite_diff_grad<F>(f: &mut F, params: &[f64], h_scale: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut grads = Vec::with_capacity(params.len());
    let mut work = params.to_vec();
    for i in 0..params.len() {
        let h = h_scale * (1.0 + params[i].abs());
        work[i] = params[i] + h;
        let up = f(&work);
        work[i] = params[i] - h;
        let down = f(&work);
        work[i] = params[i];
        grads.push((up - down) / (2.0 * h));
    }
    grads
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_function_spot_value() {
        let mut f = |x: &[f64]| x[0] * x[0];
        let g = finite_diff_grad(&mut f, &[3.0], 1e-6);
        assert!((g[0] - 6.0).abs() < 1e-8, "{}", g[0]);
    }

    #[test]
    fn linear_function_has_no_truncation_error() {
        // only rounding remains, which scales like eps * |f| / h
        let mut f = |x: &[f64]| 3.0 * x[0] - 7.0 * x[1] + 2.0;
        for h in [1e-8, 1e-4, 1e-2, 0.5] {
            let g = finite_diff_grad(&mut f, &[0.3, -1.1], h);
            let slack = 1e-15 * (1.0 + 10.0 / h);
            assert!((g[0] - 3.0).abs() < slack, "h={h}: {}", g[0]);
            assert!((g[1] + 7.0).abs() < slack, "h={h}: {}", g[1]);
        }
    }

    #[test]
    fn matches_analytic_gradient_of_a_smooth_map() {
        let mut f = |x: &[f64]| (x[0] * x[1]).sin() + x[1].powi(3);
        let p = [0.6, -0.4];
        let g = finite_diff_grad(&mut f, &p, 1e-6);
        let expected = [
            p[1] * (p[0] * p[1]).cos(),
            p[0] * (p[0] * p[1]).cos() + 3.0 * p[1] * p[1],
        ];
        for (a, b) in g.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}
