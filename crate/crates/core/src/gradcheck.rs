//! Numerical gradient checking.
//!
//! Central finite differences evaluated on a caller-supplied loss
//! function. Nothing here touches the tape internals, so the check stays
//! an independent oracle for the reverse-mode implementation. Run it in
//! `f64`; at `f32` the difference quotients drown in rounding noise.

use crate::autodiff::{NodeId, Tape};
use crate::error::Result;
use crate::tensor::Tensor;

/// Central-difference gradient of `loss` with respect to `x`.
pub fn central_diff_grad<F>(mut loss: F, x: &[f64], step: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let up = loss(&probe);
        probe[i] = x[i] - step;
        let down = loss(&probe);
        probe[i] = x[i];
        grad[i] = (up - down) / (2.0 * step);
    }
    grad
}

/// Largest elementwise relative error between two gradients, with the
/// denominator floored: `|a - b| / max(|a|, |b|, floor)`.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &b)| (a - b).abs() / a.abs().max(b.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Fixed pseudo-random target so the loss weights every output element
/// differently. Plain LCG; no dependence on the crate's RNG choices.
fn loss_target(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut state = seed
        .wrapping_mul(0x9E3779B97F4A7C15)
        .wrapping_add(0x2545F4914F6CDD1D);
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n)
        .map(|_| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
        .collect();
    Tensor::from_vec(shape, data).expect("target shape")
}

/// Check one tape operation against central finite differences.
///
/// `op` builds the forward computation from nodes standing in for
/// `inputs`; the harness drives `loss = mse(op(inputs), target)` both
/// through [`Tape::backward`] and through [`central_diff_grad`] and
/// returns the largest elementwise relative error over all inputs
/// (denominator floored at `1e-8`).
pub fn check_tape_op<F>(inputs: &[Tensor<f64>], step: f64, op: F) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, &[NodeId]) -> Result<NodeId>,
{
    // Analytic gradients.
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = inputs
        .iter()
        .enumerate()
        .map(|(i, t)| tape.param(&format!("x{i}"), t.clone()))
        .collect::<Result<_>>()?;
    let y = op(&mut tape, &ids)?;
    let target = loss_target(tape.value(y).shape(), 40503);
    let t_node = tape.constant(target.clone());
    let loss = tape.mse(y, t_node)?;
    tape.backward(loss)?;

    let mut worst = 0.0f64;
    for (i, input) in inputs.iter().enumerate() {
        let analytic: Vec<f64> = match tape.grad(ids[i]) {
            Some(g) => g.data().to_vec(),
            None => vec![0.0; input.numel()],
        };
        let loss_at = |vals: &[f64]| -> f64 {
            let mut t = Tape::new();
            let ids: Vec<NodeId> = inputs
                .iter()
                .enumerate()
                .map(|(j, orig)| {
                    if j == i {
                        t.constant(Tensor::from_vec(orig.shape(), vals.to_vec()).unwrap())
                    } else {
                        t.constant(orig.clone())
                    }
                })
                .collect();
            let y = op(&mut t, &ids).expect("forward must succeed on probe");
            let tn = t.constant(target.clone());
            let l = t.mse(y, tn).expect("loss");
            t.value(l).data()[0]
        };
        let numeric = central_diff_grad(loss_at, input.data(), step);
        worst = worst.max(max_rel_error(&analytic, &numeric, 1e-8));
    }
    Ok(worst)
}
