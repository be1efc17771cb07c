//! Bessel functions of the first kind for integer order.
//!
//! All orders `0..=n_max` at a single argument are produced together by
//! Miller's backward recurrence, normalized with `J_0 + 2 Σ J_{2k} = 1`.
//! The modulation sums need whole order ladders at each harmonic argument,
//! so this is the natural primitive.

const RESCALE_ABOVE: f64 = 1e250;

/// `J_0(x), J_1(x), ..., J_{n_max}(x)`.
pub fn bessel_j_ladder(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();

    let top = (n_max as f64).max(ax);
    let mut start = (top + 20.0 + (40.0 * top).sqrt()).ceil() as usize;
    if start % 2 == 1 {
        start += 1;
    }

    let mut j = vec![0.0; start + 2];
    j[start] = 1e-30;
    let mut k = start;
    while k > 0 {
        let v = 2.0 * k as f64 / ax * j[k] - j[k + 1];
        j[k - 1] = v;
        if v.abs() > RESCALE_ABOVE {
            for val in j[k - 1..].iter_mut() {
                *val /= RESCALE_ABOVE;
            }
        }
        k -= 1;
    }

    let norm = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
    for (n, o) in out.iter_mut().enumerate() {
        let mut v = j[n] / norm;
        if x < 0.0 && n % 2 == 1 {
            v = -v;
        }
        *o = v;
    }
    out
}

/// `J_n(x)` for any integer order, using `J_{-n} = (-1)^n J_n`.
pub fn bessel_j(n: i32, x: f64) -> f64 {
    let m = n.unsigned_abs() as usize;
    let v = bessel_j_ladder(m, x)[m];
    if n < 0 && m % 2 == 1 {
        -v
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // J_n(x) = (1/2π) ∫ cos(nτ − x sin τ) dτ over one period; the
    // trapezoid rule is exact to rounding for this periodic integrand.
    fn integral_oracle(n: i32, x: f64) -> f64 {
        let k = 4096;
        (0..k)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / k as f64;
                (n as f64 * t - x * t.sin()).cos()
            })
            .sum::<f64>()
            / k as f64
    }

    #[test]
    fn reference_values() {
        assert!((bessel_j(0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((bessel_j(1, 1.0) - 0.440_050_585_744_933_5).abs() < 1e-15);
        assert!(bessel_j(0, 2.404_825_557_695_773).abs() < 1e-14);
    }

    #[test]
    fn zero_argument() {
        let l = bessel_j_ladder(5, 0.0);
        assert_eq!(l, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn ladder_matches_integral_representation() {
        for &x in &[0.01, 0.5, 3.7, 12.0, 47.3, 95.0, 140.0] {
            let ladder = bessel_j_ladder(90, x);
            for n in (0..=90).step_by(7) {
                let want = integral_oracle(n as i32, x);
                assert!(
                    (ladder[n] - want).abs() < 1e-13,
                    "J_{n}({x}) = {} vs {want}",
                    ladder[n]
                );
            }
        }
    }

    #[test]
    fn negative_order_and_argument_parity() {
        for &x in &[0.8, 6.1, 33.0] {
            for n in 0..8 {
                let s = if n % 2 == 0 { 1.0 } else { -1.0 };
                assert!((bessel_j(-n, x) - s * bessel_j(n, x)).abs() < 1e-15);
                assert!((bessel_j(n, -x) - s * bessel_j(n, x)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn neumann_sum_rule() {
        // J_0² + 2 Σ J_k² = 1
        for &x in &[2.0, 25.0, 80.0] {
            let l = bessel_j_ladder(200, x);
            let s = l[0] * l[0] + 2.0 * l[1..].iter().map(|v| v * v).sum::<f64>();
            assert!((s - 1.0).abs() < 1e-13, "x={x}: {s}");
        }
    }
}
