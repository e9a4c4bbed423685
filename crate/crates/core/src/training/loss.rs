use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{invalid, shape_err, Result};
use crate::imaging::Image;

/// Mean absolute difference over all samples.
pub fn loss_l1(fused: &Image, gt: &Image) -> Result<f64> {
    if !fused.same_shape(gt) {
        return Err(shape_err("L1 needs equally shaped images"));
    }
    Ok(l1_mean(&fused.to_f64(), &gt.to_f64()))
}

pub(crate) fn l1_mean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

fn unit_rows(h: ArrayView2<f64>) -> (Array2<f64>, Vec<f64>) {
    let mut unit = h.to_owned();
    let mut norms = Vec::with_capacity(h.nrows());
    for mut row in unit.axis_iter_mut(Axis(0)) {
        let n = row.dot(&row).sqrt();
        if n > 0.0 {
            row /= n;
        }
        norms.push(n);
    }
    (unit, norms)
}

/// Node-averaged InfoNCE between local and global representations: node
/// `i`'s local row should match its own global row against every other
/// node's. Similarities are cosines (zero rows score 0), scaled by `1/tau`.
pub fn loss_contrastive(h_local: ArrayView2<f64>, h_global: ArrayView2<f64>, tau: f64) -> Result<f64> {
    Ok(contrastive_with_grad(h_local, h_global, tau, false)?.0)
}

/// Loss and, when `with_grad`, its gradients with respect to both inputs.
pub(crate) fn contrastive_with_grad(
    h_local: ArrayView2<f64>,
    h_global: ArrayView2<f64>,
    tau: f64,
    with_grad: bool,
) -> Result<(f64, Option<(Array2<f64>, Array2<f64>)>)> {
    if !(tau > 0.0) {
        return Err(invalid("temperature must be positive"));
    }
    if h_local.dim() != h_global.dim() {
        return Err(shape_err("contrastive inputs differ in shape"));
    }
    let n = h_local.nrows();
    if n < 2 {
        return Err(invalid("contrastive loss needs at least two nodes"));
    }
    let (a, na) = unit_rows(h_local);
    let (b, nb) = unit_rows(h_global);
    let mut logits = a.dot(&b.t());
    logits /= tau;

    let mut total = 0.0;
    for (i, mut row) in logits.axis_iter_mut(Axis(0)).enumerate() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let diag = row[i];
        row.mapv_inplace(|v| (v - max).exp());
        let z = row.sum();
        total += max + z.ln() - diag;
        // keep the softmax for the reverse pass
        row /= z;
    }
    let loss = total / n as f64;
    if !with_grad {
        return Ok((loss, None));
    }

    // dL/dcos_ij = (softmax_ij - [i == j]) / (n tau)
    let mut dcos = logits;
    for i in 0..n {
        dcos[[i, i]] -= 1.0;
    }
    dcos /= n as f64 * tau;
    let da = dcos.dot(&b);
    let db = dcos.t().dot(&a);
    let project = |unit: &Array2<f64>, norms: &[f64], d: Array2<f64>| {
        let mut out = d;
        for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
            if norms[i] == 0.0 {
                row.fill(0.0);
                continue;
            }
            let along = row.dot(&unit.row(i));
            row.scaled_add(-along, &unit.row(i));
            row /= norms[i];
        }
        out
    };
    let dl = project(&a, &na, da);
    let dg = project(&b, &nb, db);
    Ok((loss, Some((dl, dg))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn l1_cases() {
        let a = Image::filled(3, 3, 4, 0.0);
        let b = Image::filled(3, 3, 4, 0.5);
        assert_eq!(loss_l1(&a, &a).unwrap(), 0.0);
        assert_eq!(loss_l1(&a, &b).unwrap(), 0.5);
        assert!(loss_l1(&a, &Image::zeros(3, 3, 1)).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x: Vec<f32> = (0..36).map(|_| rng.gen()).collect();
        let y: Vec<f32> = (0..36).map(|_| rng.gen()).collect();
        let mut expected = 0.0;
        for k in 0..36 {
            expected += (f64::from(x[k]) - f64::from(y[k])).abs();
        }
        expected /= 36.0;
        let got = loss_l1(&Image::new(3, 3, 4, x).unwrap(), &Image::new(3, 3, 4, y).unwrap()).unwrap();
        assert!((got - expected).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_rows_closed_form() {
        let h = Array2::<f64>::eye(3);
        let got = loss_contrastive(h.view(), h.view(), 0.5).unwrap();
        let e2 = 2.0f64.exp();
        let expected = -(e2 / (e2 + 2.0)).ln();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.2395).abs() < 1e-4);
    }

    #[test]
    fn identical_rows_give_log_n() {
        for n in [2usize, 5, 11] {
            let h = Array2::from_elem((n, 4), 0.3);
            let got = loss_contrastive(h.view(), h.view(), 0.5).unwrap();
            assert!((got - (n as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn nonnegative_and_guards() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let a = Array2::from_shape_fn((6, 3), |_| rng.gen_range(-1.0..1.0));
            let b = Array2::from_shape_fn((6, 3), |_| rng.gen_range(-1.0..1.0));
            assert!(loss_contrastive(a.view(), b.view(), 0.1).unwrap() >= 0.0);
        }
        let a = Array2::<f64>::eye(3);
        assert!(loss_contrastive(a.view(), a.view(), 0.0).is_err());
        let one = Array2::<f64>::ones((1, 3));
        assert!(loss_contrastive(one.view(), one.view(), 1.0).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut a = Array2::from_shape_fn((5, 3), |_| rng.gen_range(-1.0..1.0));
        let b = Array2::from_shape_fn((5, 3), |_| rng.gen_range(-1.0..1.0));
        a.row_mut(4).fill(0.0);
        let (_, grads) = contrastive_with_grad(a.view(), b.view(), 0.3, true).unwrap();
        let (da, db) = grads.unwrap();
        let h = 1e-6;
        for idx in [(0, 0), (2, 1), (3, 2)] {
            let mut p = a.clone();
            p[idx] += h;
            let mut m = a.clone();
            m[idx] -= h;
            let fd = (loss_contrastive(p.view(), b.view(), 0.3).unwrap()
                - loss_contrastive(m.view(), b.view(), 0.3).unwrap())
                / (2.0 * h);
            assert!((fd - da[idx]).abs() < 1e-7, "{fd} vs {}", da[idx]);
            let mut p = b.clone();
            p[idx] += h;
            let mut m = b.clone();
            m[idx] -= h;
            let fd = (loss_contrastive(a.view(), p.view(), 0.3).unwrap()
                - loss_contrastive(a.view(), m.view(), 0.3).unwrap())
                / (2.0 * h);
            assert!((fd - db[idx]).abs() < 1e-7);
        }
        assert!(da.row(4).iter().all(|&v| v == 0.0));
    }
}
