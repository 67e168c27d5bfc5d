//! Roots of real monic polynomials by the Aberth-Ehrlich iteration.
//!
//! Companion matrices share their eigenvalues with the polynomial read off the
//! bottom row, so this is the only eigen-solver the crate needs.

use num_complex::Complex64;

const MAX_ITERS: usize = 500;

/// Roots of `s^d + c[d-1] s^(d-1) + ... + c[1] s + c[0]` where `c = lower` (constant first).
pub fn monic_roots(lower: &[f64]) -> Vec<Complex64> {
    let d = lower.len();
    if d == 0 {
        return Vec::new();
    }
    // descending coefficients, leading 1
    let mut desc = Vec::with_capacity(d + 1);
    desc.push(1.0);
    desc.extend(lower.iter().rev());

    // Cauchy bound keeps the initial circle around all roots.
    let radius = 1.0 + lower.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let start_r = radius.min(1.0 + lower.iter().map(|c| c.abs()).sum::<f64>().powf(1.0 / d as f64));
    let mut z: Vec<Complex64> = (0..d)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / d as f64 + 0.4;
            Complex64::from_polar(start_r, angle)
        })
        .collect();

    for _ in 0..MAX_ITERS {
        let mut max_step = 0.0f64;
        for i in 0..d {
            let (p, dp) = eval_with_derivative(&desc, z[i]);
            if p == Complex64::new(0.0, 0.0) {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..d)
                .filter(|&j| j != i)
                .map(|j| {
                    let diff = z[i] - z[j];
                    if diff.norm() == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        1.0 / diff
                    }
                })
                .sum();
            let denom = Complex64::new(1.0, 0.0) - ratio * repulsion;
            let step = if denom.norm() == 0.0 || !ratio.is_finite() { ratio } else { ratio / denom };
            if step.is_finite() {
                z[i] -= step;
                max_step = max_step.max(step.norm() / (1.0 + z[i].norm()));
            }
        }
        if max_step < 1e-15 {
            break;
        }
    }
    // a final Newton polish on each root
    for root in z.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = eval_with_derivative(&desc, *root);
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            if !step.is_finite() {
                break;
            }
            *root -= step;
        }
    }
    z.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    z
}

fn eval_with_derivative(desc: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in desc {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}
