//! Property tests for the tensor/layer invariants: shape laws,
//! linearity, and determinism.

use proptest::prelude::*;
use restega_core::autodiff::Tape;
use restega_core::conv::{conv2d_forward, conv_transpose2d_forward};
use restega_core::tensor::Tensor;

fn tensor_strategy(shape: Vec<usize>) -> impl Strategy<Value = Tensor<f64>> {
    let n: usize = shape.iter().product();
    proptest::collection::vec(-1.0f64..1.0, n)
        .prop_map(move |data| Tensor::from_vec(&shape, data).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Downsampling conv (k3 or k4, stride 2, padding 1) followed by the
    /// k4/stride-2/padding-1 transposed conv restores even spatial dims.
    #[test]
    fn conv_then_transpose_restores_even_dims(
        half in 1usize..5,
        c in 1usize..3,
        k_down in 3usize..5,
        x in tensor_strategy(vec![1, 2, 8, 8]),
    ) {
        let h = half * 2;
        let x = Tensor::from_vec(&[1, 2, h, h], x.data()[..2 * h * h].to_vec()).unwrap();
        let w_down = Tensor::full(&[c, 2, k_down, k_down], 0.1);
        let b_down = Tensor::zeros(&[c]);
        let down = conv2d_forward(&x, &w_down, &b_down, 2, 1).unwrap();
        prop_assert_eq!(down.shape()[2], h / 2);

        let w_up = Tensor::full(&[c, 2, 4, 4], 0.1);
        let b_up = Tensor::zeros(&[2]);
        let up = conv_transpose2d_forward(&down, &w_up, &b_up, 2, 1).unwrap();
        prop_assert_eq!(up.shape(), &[1, 2, h, h]);
    }

    /// conv2d is homogeneous when the bias is zero: conv(a*x) = a*conv(x).
    #[test]
    fn conv2d_linearity_with_zero_bias(
        a in -3.0f64..3.0,
        x in tensor_strategy(vec![1, 2, 5, 5]),
        w in tensor_strategy(vec![3, 2, 3, 3]),
    ) {
        let bias = Tensor::zeros(&[3]);
        let scaled_in = conv2d_forward(&x.map(|v| v * a), &w, &bias, 1, 1).unwrap();
        let scaled_out = conv2d_forward(&x, &w, &bias, 1, 1).unwrap().map(|v| v * a);
        for (p, q) in scaled_in.data().iter().zip(scaled_out.data()) {
            prop_assert!((p - q).abs() < 1e-9, "{p} vs {q}");
        }
    }

    /// Identical inputs and parameters give bit-identical outputs, with
    /// gradients included.
    #[test]
    fn forward_backward_bit_determinism(
        x in tensor_strategy(vec![2, 2, 4, 4]),
        w in tensor_strategy(vec![2, 2, 3, 3]),
    ) {
        let run = || {
            let mut tape = Tape::<f64>::new();
            let xn = tape.param("x", x.clone()).unwrap();
            let wn = tape.param("w", w.clone()).unwrap();
            let bn = tape.constant(Tensor::zeros(&[2]));
            let y = tape.conv2d(xn, wn, bn, 1, 1).unwrap();
            let y = tape.sigmoid(y);
            let t = tape.constant(Tensor::full(&[2, 2, 4, 4], 0.25));
            let loss = tape.mse(y, t).unwrap();
            tape.backward(loss).unwrap();
            (
                tape.value(y).clone(),
                tape.grad(xn).unwrap().clone(),
                tape.grad(wn).unwrap().clone(),
            )
        };
        let (y1, gx1, gw1) = run();
        let (y2, gx2, gw2) = run();
        prop_assert_eq!(y1, y2);
        prop_assert_eq!(gx1, gx2);
        prop_assert_eq!(gw1, gw2);
    }

    /// Forward and backward stay finite on finite inputs.
    #[test]
    fn finite_in_finite_out(
        x in tensor_strategy(vec![1, 2, 4, 4]),
        w in tensor_strategy(vec![2, 2, 3, 3]),
        gamma in tensor_strategy(vec![2]),
        beta in tensor_strategy(vec![2]),
    ) {
        let mut tape = Tape::<f64>::new();
        let xn = tape.param("x", x).unwrap();
        let wn = tape.param("w", w).unwrap();
        let bn = tape.constant(Tensor::zeros(&[2]));
        let g = tape.param("gamma", gamma).unwrap();
        let b = tape.param("beta", beta).unwrap();
        let y = tape.conv2d(xn, wn, bn, 1, 1).unwrap();
        let (y, _, _) = tape.batch_norm_train(y, g, b, 1e-5).unwrap();
        let y = tape.leaky_relu(y, 0.2);
        let y = tape.sigmoid(y);
        let t = tape.constant(Tensor::full(&[1, 2, 4, 4], 0.5));
        let loss = tape.mse(y, t).unwrap();
        tape.backward(loss).unwrap();
        prop_assert!(tape.value(y).is_finite());
        prop_assert!(tape.value(loss).is_finite());
        for id in [xn, wn, g, b] {
            prop_assert!(tape.grad(id).unwrap().is_finite());
        }
    }
}
