use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::{Array, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutKind {
    /// One mask row per sequence, reused at every input position.
    VariationalInput,
    /// One mask row per sequence, reused on every LSTM output position.
    VariationalOutput,
    /// One mask per minibatch over a hidden-to-hidden weight matrix.
    WeightDrop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Inverted-dropout mask: entries are `0` or `1/(1-rate)`; in eval mode
/// (or at rate 0) all ones.
///
/// For the variational kinds `shape` is `[sequences, width]`; for weight
/// drop it is the weight shape.
pub fn dropout_mask<T: Scalar, R: Rng + ?Sized>(
    kind: DropoutKind,
    shape: &[usize],
    rate: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<Array<T>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("dropout rate {rate} outside [0, 1)")));
    }
    if matches!(kind, DropoutKind::VariationalInput | DropoutKind::VariationalOutput)
        && shape.len() != 2
    {
        return Err(Error::shape("dropout_mask", format!("{shape:?} is not [sequences, width]")));
    }
    if mode == Mode::Eval || rate == 0.0 {
        return Ok(Array::ones(shape));
    }
    let keep = T::lit(1.0 / (1.0 - rate));
    let mut m = Array::zeros(shape);
    for v in m.data_mut() {
        if rng.gen::<f64>() >= rate {
            *v = keep;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rate_zero_and_eval_are_ones() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m: Array<f64> =
            dropout_mask(DropoutKind::WeightDrop, &[4, 4], 0.0, Mode::Train, &mut rng).unwrap();
        assert!(m.data().iter().all(|&v| v == 1.0));
        let m: Array<f64> =
            dropout_mask(DropoutKind::VariationalInput, &[4, 4], 0.5, Mode::Eval, &mut rng).unwrap();
        assert!(m.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn bernoulli_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m: Array<f64> =
            dropout_mask(DropoutKind::VariationalOutput, &[100, 100], 0.5, Mode::Train, &mut rng)
                .unwrap();
        let nz: Vec<f64> = m.data().iter().copied().filter(|&v| v != 0.0).collect();
        let frac = nz.len() as f64 / 10_000.0;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
        assert!(nz.iter().all(|&v| v == 2.0));
    }

    #[test]
    fn bad_rate_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(dropout_mask::<f64, _>(DropoutKind::WeightDrop, &[2], 1.0, Mode::Train, &mut rng).is_err());
    }
}
