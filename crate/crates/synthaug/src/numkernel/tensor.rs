use crate::error::{contract, Result};

/// Dense row-major f64 tensor. Every public operation keeps entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(contract(format!(
                "tensor shape {:?} expects {} entries, got {}",
                shape,
                n,
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(contract("tensor contains non-finite entries"));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// log Σ exp(v_i), shifted by max(v) for stability.
pub fn logsumexp(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(contract("logsumexp of empty vector"));
    }
    if !v.iter().all(|x| x.is_finite()) {
        return Err(contract("logsumexp of non-finite input"));
    }
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = v.iter().map(|x| (x - m).exp()).sum();
    Ok(m + s.ln())
}

/// Softmax with max-shift; entries positive, sum to 1.
pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(contract("softmax of empty vector"));
    }
    if !v.iter().all(|x| x.is_finite()) {
        return Err(contract("softmax of non-finite input"));
    }
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    Ok(e.iter().map(|x| x / s).collect())
}

/// KL divergence of a diagonal Gaussian N(mu, diag(exp(log_var))) from N(0, I):
/// ½ Σ (exp(log_var) + mu² − 1 − log_var).
pub fn gaussian_kl(mu: &[f64], log_var: &[f64]) -> Result<f64> {
    if mu.len() != log_var.len() {
        return Err(contract(format!(
            "gaussian_kl length mismatch: {} vs {}",
            mu.len(),
            log_var.len()
        )));
    }
    Ok(mu
        .iter()
        .zip(log_var)
        .map(|(m, lv)| 0.5 * (lv.exp() + m * m - 1.0 - lv))
        .sum())
}

/// Shannon entropy −Σ p log p of a probability vector, with 0·log 0 = 0.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    p.iter()
        .map(|&pi| if pi > 0.0 { -pi * pi.ln() } else { 0.0 })
        .sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn logsumexp_identities() {
        assert!((logsumexp(&[0.0; 10]).unwrap() - 10f64.ln()).abs() < 1e-14);
        assert!((logsumexp(&[1000.0, 1000.0]).unwrap() - (1000.0 + 2f64.ln())).abs() < 1e-9);
        assert!(logsumexp(&[]).is_err());
    }

    #[test]
    fn logsumexp_matches_compensated_naive() {
        // Oracle: compensated (Kahan) summation of exp(v_i), no shift.
        let mut rng = crate::numkernel::rng_stream(1, 0);
        for _ in 0..200 {
            let v: Vec<f64> = (0..8).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let mut s = 0.0f64;
            let mut c = 0.0f64;
            for &x in &v {
                let y = x.exp() - c;
                let t = s + y;
                c = (t - s) - y;
                s = t;
            }
            let naive = s.ln();
            assert!((logsumexp(&v).unwrap() - naive).abs() < 1e-12);
        }
    }

    #[test]
    fn logsumexp_shift_invariance() {
        let mut rng = crate::numkernel::rng_stream(2, 0);
        for _ in 0..100 {
            let v: Vec<f64> = (0..6).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let c = rng.gen_range(-10.0..10.0);
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            assert!((logsumexp(&shifted).unwrap() - logsumexp(&v).unwrap() - c).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_basics() {
        assert_eq!(softmax(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        let u = softmax(&[3.7, 3.7, 3.7, 3.7]).unwrap();
        for p in u {
            assert!((p - 0.25).abs() < 1e-15);
        }
        assert!(softmax(&[]).is_err());
    }

    #[test]
    fn softmax_matches_direct_ratio() {
        let mut rng = crate::numkernel::rng_stream(3, 0);
        for _ in 0..200 {
            let v: Vec<f64> = (0..5).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let p = softmax(&v).unwrap();
            let z: f64 = v.iter().map(|x| x.exp()).sum();
            for (pi, vi) in p.iter().zip(&v) {
                assert!((pi - vi.exp() / z).abs() < 1e-12);
            }
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            // shift invariance
            let c = rng.gen_range(-8.0..8.0);
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let p2 = softmax(&shifted).unwrap();
            for (a, b) in p.iter().zip(&p2) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gaussian_kl_closed_forms() {
        assert_eq!(gaussian_kl(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert!((gaussian_kl(&[1.0], &[0.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(gaussian_kl(&[0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn gaussian_kl_matches_quadrature() {
        // Oracle: per-dimension Simpson quadrature of ∫ q(z) log(q(z)/p0(z)) dz.
        let quad_kl_1d = |mu: f64, lv: f64| -> f64 {
            let sd = (lv / 2.0).exp();
            let (lo, hi) = (mu - 12.0 * sd - 1.0, mu + 12.0 * sd + 1.0);
            let n = 20_000; // even
            let h = (hi - lo) / n as f64;
            let f = |z: f64| {
                let var = lv.exp();
                let logq = -0.5 * ((z - mu).powi(2) / var + lv + (2.0 * std::f64::consts::PI).ln());
                let logp = -0.5 * (z * z + (2.0 * std::f64::consts::PI).ln());
                logq.exp() * (logq - logp)
            };
            let mut s = f(lo) + f(hi);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * f(lo + i as f64 * h);
            }
            s * h / 3.0
        };
        let mut rng = crate::numkernel::rng_stream(4, 0);
        for _ in 0..10 {
            let mu: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let lv: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let analytic = gaussian_kl(&mu, &lv).unwrap();
            let numeric: f64 = mu.iter().zip(&lv).map(|(&m, &l)| quad_kl_1d(m, l)).sum();
            assert!(
                (analytic - numeric).abs() / numeric.max(1e-12) < 1e-6,
                "analytic {analytic} vs quadrature {numeric}"
            );
        }
    }

    #[test]
    fn gaussian_kl_nonnegative_property() {
        let mut rng = crate::numkernel::rng_stream(5, 0);
        for _ in 0..500 {
            let mu: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let lv: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
            assert!(gaussian_kl(&mu, &lv).unwrap() >= 0.0);
        }
    }

    #[test]
    fn tensor_shape_contract() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![1], vec![f64::NAN]).is_err());
    }
}
