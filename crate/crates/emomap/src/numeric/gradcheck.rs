use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{EmoError, Result};

use super::matrix::ParamRef;
use super::tape::{NodeId, Tape};

/// At most this many coordinates are sampled per parameter.
pub const MAX_COORDS_PER_PARAM: usize = 64;

/// Compares analytic gradients against central finite differences.
///
/// `build` must deterministically reconstruct the forward graph and return the
/// tape together with its scalar loss node. Returns the maximum over sampled
/// coordinates of `|analytic - numeric| / max(1, |analytic|)`.
///
/// Coordinates where the two one-sided difference quotients disagree are
/// skipped: these sit on a non-differentiable point (a relu kink), where the
/// central difference is not a valid oracle.
pub fn grad_check<F>(build: F, params: &[ParamRef], eps: f64, seed: u64) -> Result<f64>
where
    F: Fn() -> Result<(Tape, NodeId)>,
{
    if !(1e-6..=1e-4).contains(&eps) {
        return Err(EmoError::Config(format!(
            "grad_check eps must be in [1e-6, 1e-4], got {eps}"
        )));
    }
    for p in params {
        p.borrow_mut().zero_grad();
    }
    let (tape, root) = build()?;
    let f0 = tape.scalar(root);
    tape.backward(root)?;
    let analytic: Vec<Vec<f64>> = params.iter().map(|p| p.borrow().grad.data().to_vec()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel: f64 = 0.0;
    for (pi, p) in params.iter().enumerate() {
        let n = p.borrow().value.data().len();
        let mut coords: Vec<usize> = (0..n).collect();
        coords.shuffle(&mut rng);
        coords.truncate(MAX_COORDS_PER_PARAM);
        for ci in coords {
            let orig = p.borrow().value.data()[ci];
            p.borrow_mut().value.data_mut()[ci] = orig + eps;
            let (tp, rp) = build()?;
            let f_plus = tp.scalar(rp);
            p.borrow_mut().value.data_mut()[ci] = orig - eps;
            let (tm, rm) = build()?;
            let f_minus = tm.scalar(rm);
            p.borrow_mut().value.data_mut()[ci] = orig;

            let slope_plus = (f_plus - f0) / eps;
            let slope_minus = (f0 - f_minus) / eps;
            if (slope_plus - slope_minus).abs()
                > 1e-3 * slope_plus.abs().max(slope_minus.abs()).max(1.0)
            {
                // kink between the evaluation points
                continue;
            }
            let numeric = (f_plus - f_minus) / (2.0 * eps);
            let a = analytic[pi][ci];
            let rel = (a - numeric).abs() / a.abs().max(1.0);
            max_rel = max_rel.max(rel);
        }
    }
    // leave gradients clean for the caller
    for p in params {
        p.borrow_mut().zero_grad();
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::ffn::FeedForward;
    use crate::numeric::matrix::{param, Matrix};
    use crate::numeric::tape::{Activation, LossKind};

    #[test]
    fn quadratic_loss_is_exact() {
        let w = param(Matrix::from_vec(1, 1, vec![1.7]).unwrap());
        let err = grad_check(
            || {
                let mut t = Tape::new();
                let one = t.input(vec![1.0]);
                let x = t.affine(&w, None, one)?;
                let l = t.loss(LossKind::Mse, x, vec![0.3])?;
                Ok((t, l))
            },
            &[w.clone()],
            1e-5,
            0,
        )
        .unwrap();
        assert!(err < 1e-9, "err={err}");
    }

    #[test]
    fn relu_network_passes_at_differentiable_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = FeedForward::new(
            &[4, 8, 8, 3],
            Activation::Relu,
            Activation::Identity,
            true,
            &mut rng,
        );
        let x = vec![0.3, -0.4, 0.9, 0.1];
        let err = grad_check(
            || {
                let mut t = Tape::new();
                let input = t.input(x.clone());
                let out = net.forward(&mut t, input)?;
                let l = t.loss(LossKind::Mse, out, vec![0.2, -0.1, 0.5])?;
                Ok((t, l))
            },
            &net.params(),
            1e-5,
            1,
        )
        .unwrap();
        assert!(err < 1e-4, "err={err}");
    }

    #[test]
    fn eps_range_enforced() {
        let w = param(Matrix::from_vec(1, 1, vec![1.0]).unwrap());
        let res = grad_check(
            || {
                let mut t = Tape::new();
                let one = t.input(vec![1.0]);
                let x = t.affine(&w, None, one)?;
                let l = t.loss(LossKind::Mse, x, vec![0.0])?;
                Ok((t, l))
            },
            &[w.clone()],
            1e-2,
            0,
        );
        assert!(res.is_err());
    }
}
