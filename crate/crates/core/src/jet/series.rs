//! Univariate Taylor coefficients of the supported outer functions.

use super::{JetError, Univariate};

/// Coefficients `f^(k)(x0) / k!` for `k = 0..=order`.
pub fn taylor_coefficients(f: Univariate, x0: f64, order: usize) -> Result<Vec<f64>, JetError> {
    f.check_domain(x0)?;
    let n = order + 1;
    let inv_fact: Vec<f64> = (0..n)
        .scan(1.0, |acc, k| {
            if k > 0 {
                *acc /= k as f64;
            }
            Some(*acc)
        })
        .collect();
    let cyclic =
        |cycle: [f64; 4]| -> Vec<f64> { (0..n).map(|k| cycle[k % 4] * inv_fact[k]).collect() };
    let coeffs = match f {
        Univariate::Exp => {
            let e = x0.exp();
            inv_fact.iter().map(|c| e * c).collect()
        }
        Univariate::Log => (0..n)
            .map(|k| {
                if k == 0 {
                    x0.ln()
                } else {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    sign / (k as f64 * x0.powi(k as i32))
                }
            })
            .collect(),
        Univariate::Sin => {
            let (s, c) = x0.sin_cos();
            cyclic([s, c, -s, -c])
        }
        Univariate::Cos => {
            let (s, c) = x0.sin_cos();
            cyclic([c, -s, -c, s])
        }
        Univariate::Sinh => {
            let (s, c) = (x0.sinh(), x0.cosh());
            cyclic([s, c, s, c])
        }
        Univariate::Cosh => {
            let (s, c) = (x0.sinh(), x0.cosh());
            cyclic([c, s, c, s])
        }
        Univariate::Tan => {
            let (s, c) = x0.sin_cos();
            divide(&cyclic([s, c, -s, -c]), &cyclic([c, -s, -c, s]))
        }
        Univariate::Arctanh => {
            // d/dt arctanh(x0 + t) = 1 / ((1 - x0^2) - 2 x0 t - t^2)
            let mut denom = vec![0.0; n];
            denom[0] = 1.0 - x0 * x0;
            if n > 1 {
                denom[1] = -2.0 * x0;
            }
            if n > 2 {
                denom[2] = -1.0;
            }
            let mut num = vec![0.0; n];
            num[0] = 1.0;
            let deriv = divide(&num, &denom);
            let mut out = vec![x0.atanh()];
            out.extend((1..n).map(|k| deriv[k - 1] / k as f64));
            out
        }
        Univariate::Sqrt => binomial(x0, 0.5, n),
        Univariate::Pow(p) => binomial(x0, p, n),
    };
    Ok(coeffs)
}

/// Series quotient `a / b`, both of the same length.
fn divide(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut q = vec![0.0; a.len()];
    for k in 0..a.len() {
        let acc = a[k] - (1..=k).map(|j| b[j] * q[k - j]).sum::<f64>();
        q[k] = acc / b[0];
    }
    q
}

/// `(x0 + t)^p = x0^p Σ C(p, k) (t / x0)^k`.
fn binomial(x0: f64, p: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut term = x0.powf(p);
    for k in 0..n {
        out.push(term);
        term *= (p - k as f64) / ((k + 1) as f64 * x0);
    }
    out
}
