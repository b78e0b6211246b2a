//! Forward kernels shared by the recording graph and the step-wise
//! decoder used for generation.

use crate::error::{Error, Result};
use crate::numeric::array::{gemm_into, matmul};
use crate::numeric::{Array, Scalar};

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `y = x·W + b`.
pub fn affine<T: Scalar>(x: &Array<T>, w: &Array<T>, b: Option<&Array<T>>) -> Result<Array<T>> {
    if x.cols() != w.rows() {
        return Err(Error::shape(
            "affine",
            format!("x {:?} vs W {:?}", x.shape(), w.shape()),
        ));
    }
    let mut y = match b {
        Some(b) => {
            if b.len() != w.cols() {
                return Err(Error::shape(
                    "affine",
                    format!("W {:?} vs b {:?}", w.shape(), b.shape()),
                ));
            }
            let mut y = Array::zeros(&[x.rows(), w.cols()]);
            for i in 0..x.rows() {
                y.row_mut(i).copy_from_slice(b.data());
            }
            y
        }
        None => Array::zeros(&[x.rows(), w.cols()]),
    };
    gemm_into(x, false, w, false, y.data_mut(), T::one())?;
    Ok(y)
}

/// Activations cached by one LSTM step.
#[derive(Debug, Clone)]
pub struct LstmStep<T> {
    pub h: Array<T>,
    pub c: Array<T>,
    /// Activated gates, laid out `[i | f | g | o]` per row.
    pub gates: Array<T>,
    pub tanh_c: Array<T>,
}

/// One LSTM step over a batch. Gate order in the `4H` axis is input,
/// forget, candidate, output.
pub fn lstm_cell<T: Scalar>(
    x: &Array<T>,
    h_prev: &Array<T>,
    c_prev: &Array<T>,
    w_ih: &Array<T>,
    w_hh: &Array<T>,
    bias: &Array<T>,
) -> Result<LstmStep<T>> {
    let n = x.rows();
    let hidden = w_hh.rows();
    if w_hh.cols() != 4 * hidden
        || w_ih.cols() != 4 * hidden
        || w_ih.rows() != x.cols()
        || bias.len() != 4 * hidden
        || h_prev.rows() != n
        || h_prev.cols() != hidden
        || c_prev.rows() != n
        || c_prev.cols() != hidden
    {
        return Err(Error::shape(
            "lstm_cell",
            format!(
                "x {:?}, h {:?}, c {:?}, W_ih {:?}, W_hh {:?}, b {:?}",
                x.shape(),
                h_prev.shape(),
                c_prev.shape(),
                w_ih.shape(),
                w_hh.shape(),
                bias.shape()
            ),
        ));
    }
    let mut pre = affine(x, w_ih, Some(bias))?;
    gemm_into(h_prev, false, w_hh, false, pre.data_mut(), T::one())?;

    let mut h = Array::zeros(&[n, hidden]);
    let mut c = Array::zeros(&[n, hidden]);
    let mut tanh_c = Array::zeros(&[n, hidden]);
    for r in 0..n {
        let g = pre.row_mut(r);
        for j in 0..hidden {
            g[j] = sigmoid(g[j]);
            g[hidden + j] = sigmoid(g[hidden + j]);
            g[2 * hidden + j] = g[2 * hidden + j].tanh();
            g[3 * hidden + j] = sigmoid(g[3 * hidden + j]);
        }
        let cp = c_prev.row(r);
        let cr = c.row_mut(r);
        for j in 0..hidden {
            cr[j] = g[hidden + j] * cp[j] + g[j] * g[2 * hidden + j];
        }
        let tr = tanh_c.row_mut(r);
        for j in 0..hidden {
            tr[j] = cr[j].tanh();
        }
        let hr = h.row_mut(r);
        for j in 0..hidden {
            hr[j] = g[3 * hidden + j] * tr[j];
        }
    }
    Ok(LstmStep {
        h,
        c,
        gates: pre,
        tanh_c,
    })
}

/// Row-wise log-softmax with max subtraction.
pub fn log_softmax_rows<T: Scalar>(logits: &Array<T>) -> Array<T> {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let m = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let lse = m + T::total(row.iter().map(|&v| (v - m).exp())).ln();
        row.iter_mut().for_each(|v| *v = *v - lse);
    }
    out
}

/// Mean cross-entropy (nats) of `targets` under row-wise softmax of
/// `logits`.
pub fn softmax_xent<T: Scalar>(logits: &Array<T>, targets: &[usize]) -> Result<T> {
    if targets.len() != logits.rows() {
        return Err(Error::shape(
            "softmax_xent",
            format!("{} targets for logits {:?}", targets.len(), logits.shape()),
        ));
    }
    if targets.is_empty() {
        return Err(Error::Empty { what: "target list" });
    }
    let v = logits.cols();
    if let Some(&bad) = targets.iter().find(|&&t| t >= v) {
        return Err(Error::invalid(format!("target {bad} outside 0..{v}")));
    }
    let lp = log_softmax_rows(logits);
    let total = T::total(targets.iter().enumerate().map(|(r, &t)| -lp.get2(r, t)));
    Ok(total / T::lit(targets.len() as f64))
}

pub fn transpose<T: Scalar>(a: &Array<T>) -> Array<T> {
    let (r, c) = (a.rows(), a.cols());
    let mut out = Array::zeros(&[c, r]);
    for i in 0..r {
        for j in 0..c {
            out.set2(j, i, a.get2(i, j));
        }
    }
    out
}

pub fn matmul_nt<T: Scalar>(a: &Array<T>, b: &Array<T>) -> Result<Array<T>> {
    matmul(a, false, b, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_lstm(
        x: &[f64],
        h: &[f64],
        c: &[f64],
        w_ih: &[Vec<f64>],
        w_hh: &[Vec<f64>],
        b: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let hid = h.len();
        let pre = |k: usize| -> f64 {
            let mut s = b[k];
            for (i, xi) in x.iter().enumerate() {
                s += xi * w_ih[i][k];
            }
            for (i, hi) in h.iter().enumerate() {
                s += hi * w_hh[i][k];
            }
            s
        };
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        let mut hn = vec![0.0; hid];
        let mut cn = vec![0.0; hid];
        for j in 0..hid {
            let i = sig(pre(j));
            let f = sig(pre(hid + j));
            let g = pre(2 * hid + j).tanh();
            let o = sig(pre(3 * hid + j));
            cn[j] = f * c[j] + i * g;
            hn[j] = o * cn[j].tanh();
        }
        (hn, cn)
    }

    #[test]
    fn affine_examples() {
        let x = Array::<f64>::from_f64(&[1, 2], &[1., 2.]).unwrap();
        let y = affine(&x, &Array::identity(2), Some(&Array::zeros(&[2]))).unwrap();
        assert_eq!(y.data(), &[1., 2.]);

        let x = Array::<f64>::from_f64(&[1, 2], &[1., 1.]).unwrap();
        let w = Array::<f64>::from_f64(&[2, 1], &[1., 1.]).unwrap();
        let b = Array::<f64>::from_f64(&[1], &[1.]).unwrap();
        assert_eq!(affine(&x, &w, Some(&b)).unwrap().data(), &[3.]);

        let x = Array::<f64>::zeros(&[1, 3]);
        let w = Array::<f64>::from_f64(&[3, 1], &[0.3, -2., 7.]).unwrap();
        let b = Array::<f64>::from_f64(&[1], &[5.]).unwrap();
        assert_eq!(affine(&x, &w, Some(&b)).unwrap().data(), &[5.]);
    }

    #[test]
    fn affine_shape_error_names_operands() {
        let x = Array::<f64>::zeros(&[1, 3]);
        let w = Array::<f64>::zeros(&[2, 2]);
        let err = affine(&x, &w, None).unwrap_err().to_string();
        assert!(err.contains("[1, 3]") && err.contains("[2, 2]"), "{err}");
    }

    #[test]
    fn lstm_zero_everything_gives_zero_state() {
        let z = |r, c| Array::<f64>::zeros(&[r, c]);
        let s = lstm_cell(&z(2, 3), &z(2, 4), &z(2, 4), &z(3, 16), &z(4, 16), &Array::zeros(&[16]))
            .unwrap();
        assert!(s.h.data().iter().all(|&v| v == 0.0));
        assert!(s.c.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lstm_saturated_gates_keep_cell() {
        let hid = 2;
        let mut b = vec![0.0; 4 * hid];
        for j in 0..hid {
            b[j] = -1e3; // input gate closed
            b[hid + j] = 1e3; // forget gate open
        }
        let bias = Array::<f64>::from_f64(&[8], &b).unwrap();
        let c_prev = Array::<f64>::from_f64(&[1, 2], &[0.7, -1.3]).unwrap();
        let x = Array::<f64>::from_f64(&[1, 1], &[0.4]).unwrap();
        let w_ih = Array::<f64>::full(&[1, 8], 0.2);
        let w_hh = Array::<f64>::full(&[2, 8], -0.1);
        let h_prev = Array::<f64>::from_f64(&[1, 2], &[0.1, 0.2]).unwrap();
        let s = lstm_cell(&x, &h_prev, &c_prev, &w_ih, &w_hh, &bias).unwrap();
        assert_eq!(s.c.data(), c_prev.data());
    }

    #[test]
    fn lstm_matches_scalar_reference() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let (n, d, hid) = (2, 3, 3);
        let mut r = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let x = r(n * d);
        let h = r(n * hid);
        let c = r(n * hid);
        let wih = r(d * 4 * hid);
        let whh = r(hid * 4 * hid);
        let b = r(4 * hid);
        let s = lstm_cell(
            &Array::<f64>::from_f64(&[n, d], &x).unwrap(),
            &Array::from_f64(&[n, hid], &h).unwrap(),
            &Array::from_f64(&[n, hid], &c).unwrap(),
            &Array::from_f64(&[d, 4 * hid], &wih).unwrap(),
            &Array::from_f64(&[hid, 4 * hid], &whh).unwrap(),
            &Array::from_f64(&[4 * hid], &b).unwrap(),
        )
        .unwrap();
        let wih_rows: Vec<Vec<f64>> = wih.chunks(4 * hid).map(|c| c.to_vec()).collect();
        let whh_rows: Vec<Vec<f64>> = whh.chunks(4 * hid).map(|c| c.to_vec()).collect();
        for row in 0..n {
            let (hn, cn) = scalar_lstm(
                &x[row * d..(row + 1) * d],
                &h[row * hid..(row + 1) * hid],
                &c[row * hid..(row + 1) * hid],
                &wih_rows,
                &whh_rows,
                &b,
            );
            for j in 0..hid {
                assert!((s.h.get2(row, j) - hn[j]).abs() < 1e-14);
                assert!((s.c.get2(row, j) - cn[j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn softmax_xent_examples() {
        let l = Array::<f64>::from_f64(&[1, 2], &[0., 0.]).unwrap();
        assert!((softmax_xent(&l, &[0]).unwrap() - 2f64.ln()).abs() < 1e-15);
        let l = Array::<f64>::from_f64(&[1, 2], &[1., 0.]).unwrap();
        let want = (1.0 + (-1f64).exp()).ln();
        assert!((softmax_xent(&l, &[0]).unwrap() - want).abs() < 1e-15);
        assert!((want - 0.3133).abs() < 1e-4);
        let l = Array::<f64>::from_f64(&[1, 3], &[1000., 0., 0.]).unwrap();
        assert!(softmax_xent(&l, &[0]).unwrap().abs() < 1e-12);
        assert!(softmax_xent(&l, &[3]).is_err());
    }

    #[test]
    fn softmax_xent_shift_invariant() {
        let l = Array::<f64>::from_f64(&[2, 3], &[0.2, -1.0, 3.0, 0.0, 0.5, 0.1]).unwrap();
        let shifted = l.map(|v| v + 123.25);
        let a = softmax_xent(&l, &[2, 1]).unwrap();
        let b = softmax_xent(&shifted, &[2, 1]).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}
