use crate::error::{RcaError, Result};

/// Half-width `R` of the interval `[-R, R]` the sigmoid is fitted on.
pub const SIGMOID_FIT_HALF_WIDTH: f64 = 2.0;

const QUADRATURE_NODES: usize = 4096;

/// Monomial coefficients `c_0..c_degree` of the Chebyshev projection of the
/// logistic sigmoid on `[-R, R]`, `R = SIGMOID_FIT_HALF_WIDTH`.
///
/// `sigmoid(x) - 1/2` is odd, so `c_0` is exactly `0.5` and every other even
/// coefficient is exactly zero.
pub fn chebyshev_sigmoid(degree: usize) -> Result<Vec<f64>> {
    if !(3..=5).contains(&degree) {
        return Err(RcaError::InvalidInput(format!(
            "sigmoid approximation degree must be 3, 4 or 5, got {degree}"
        )));
    }
    let r = SIGMOID_FIT_HALF_WIDTH;
    // Gauss-Chebyshev quadrature for a_k = (2/pi) int_0^pi f(R cos t) cos(k t) dt
    let cheb: Vec<f64> = (0..=degree)
        .map(|k| {
            let s: f64 = (0..QUADRATURE_NODES)
                .map(|m| {
                    let t = (m as f64 + 0.5) * std::f64::consts::PI / QUADRATURE_NODES as f64;
                    sigmoid(r * t.cos()) * (k as f64 * t).cos()
                })
                .sum();
            2.0 * s / QUADRATURE_NODES as f64
        })
        .collect();
    // T_k(y) in monomials of y via T_{k+1} = 2 y T_k - T_{k-1}
    let mut basis: Vec<Vec<f64>> = vec![vec![1.0], vec![0.0, 1.0]];
    for k in 2..=degree {
        let mut next = vec![0.0; k + 1];
        for (i, c) in basis[k - 1].iter().enumerate() {
            next[i + 1] += 2.0 * c;
        }
        for (i, c) in basis[k - 2].iter().enumerate() {
            next[i] -= c;
        }
        basis.push(next);
    }
    let mut coeffs = vec![0.0; degree + 1];
    for (k, a) in cheb.iter().enumerate() {
        let weight = if k == 0 { a / 2.0 } else { *a };
        for (i, c) in basis[k].iter().enumerate() {
            coeffs[i] += weight * c;
        }
    }
    // rescale y = x / R and impose the odd symmetry exactly
    for (i, c) in coeffs.iter_mut().enumerate() {
        *c /= r.powi(i as i32);
        if i % 2 == 0 {
            *c = 0.0;
        }
    }
    coeffs[0] = 0.5;
    Ok(coeffs)
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Horner evaluation of `sum_k c_k x^k`.
pub fn eval_poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_three_coefficients() {
        let c = chebyshev_sigmoid(3).unwrap();
        assert_eq!(c[0], 0.5);
        assert_eq!(c[2], 0.0);
        assert!((c[1] - 0.245).abs() < 0.002, "{c:?}");
        assert!((c[3] + 0.014).abs() < 0.002, "{c:?}");
    }

    #[test]
    fn half_at_zero_and_odd_symmetry() {
        for degree in 3..=5 {
            let c = chebyshev_sigmoid(degree).unwrap();
            assert_eq!(eval_poly(&c, 0.0), 0.5);
            for x in [0.3, 1.1, 1.9, 3.5] {
                let s = eval_poly(&c, x) + eval_poly(&c, -x);
                assert!((s - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn degree_four_equals_degree_three() {
        let c3 = chebyshev_sigmoid(3).unwrap();
        let c4 = chebyshev_sigmoid(4).unwrap();
        assert_eq!(&c4[..4], &c3[..]);
        assert_eq!(c4[4], 0.0);
    }

    #[test]
    fn unsupported_degree() {
        assert!(chebyshev_sigmoid(2).is_err());
        assert!(chebyshev_sigmoid(6).is_err());
    }

    #[test]
    fn max_error_matches_grid_projection() {
        // independent oracle: least squares on a dense grid of Chebyshev nodes
        // with weight 1/sqrt(1 - y^2) is the same projection
        let r = SIGMOID_FIT_HALF_WIDTH;
        let m = 20_000;
        let ys: Vec<f64> = (0..m)
            .map(|i| ((i as f64 + 0.5) * std::f64::consts::PI / m as f64).cos())
            .collect();
        let a1 = ys.iter().map(|y| sigmoid(r * y) * 2.0 * y).sum::<f64>() / m as f64;
        let a3 = ys.iter().map(|y| sigmoid(r * y) * 2.0 * (4.0 * y * y * y - 3.0 * y)).sum::<f64>() / m as f64;
        let oracle = |x: f64| {
            let y = x / r;
            0.5 + a1 * y + a3 * (4.0 * y * y * y - 3.0 * y)
        };
        let c = chebyshev_sigmoid(3).unwrap();
        let grid: Vec<f64> = (0..=4000).map(|i| -r + 2.0 * r * i as f64 / 4000.0).collect();
        let err = |f: &dyn Fn(f64) -> f64| grid.iter().map(|&x| (f(x) - sigmoid(x)).abs()).fold(0.0, f64::max);
        let ours = err(&|x| eval_poly(&c, x));
        let theirs = err(&oracle);
        assert!((ours - theirs).abs() < 1e-3, "{ours} vs {theirs}");
    }
}
