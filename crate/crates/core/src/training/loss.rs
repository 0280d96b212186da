use ndarray::{Array1, ArrayView1};

use crate::error::{check_len, Result};

/// Mean squared error over the output dimensions and its gradient `2 (pred - target) / dim`.
pub fn mse_loss(prediction: ArrayView1<f64>, target: ArrayView1<f64>) -> Result<(f64, Array1<f64>)> {
    check_len("target", prediction.len(), target.len())?;
    let dim = prediction.len() as f64;
    let diff = &prediction - &target;
    let loss = diff.dot(&diff) / dim;
    Ok((loss, diff * (2.0 / dim)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn examples() {
        let t = array![0.0, 1.0, 0.0];
        let (l, g) = mse_loss(t.view(), t.view()).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
        let mut e1 = Array1::zeros(10);
        e1[0] = 1.0;
        let (l, _) = mse_loss(Array1::zeros(10).view(), e1.view()).unwrap();
        assert!((l - 0.1).abs() < 1e-15);
        assert!(mse_loss(array![1.0].view(), t.view()).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = array![0.3, -0.7, 1.2, 0.05];
        let t = array![0.0, 1.0, 0.0, 0.0];
        let (_, g) = mse_loss(p.view(), t.view()).unwrap();
        let h = 1e-6;
        for i in 0..4 {
            let mut a = p.clone();
            a[i] += h;
            let mut b = p.clone();
            b[i] -= h;
            let fd = (mse_loss(a.view(), t.view()).unwrap().0 - mse_loss(b.view(), t.view()).unwrap().0) / (2.0 * h);
            assert!(((fd - g[i]) / g[i]).abs() < 1e-8);
        }
    }
}
