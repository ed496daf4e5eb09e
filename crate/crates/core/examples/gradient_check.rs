//! Checks BPTT gradients against central finite differences on a tiny
//! double-precision network.
//!
//! ```text
//! cargo run -p rnn-introspect --example gradient_check
//! ```

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rnn_introspect::rnn::{bptt, loss_and_dlogits, readout_logits, Architecture, RnnParams};

fn loss(params: &RnnParams<f64>, x: &Array2<f64>, label: usize) -> f64 {
    let inputs = x.view().insert_axis(ndarray::Axis(0));
    let logits = readout_logits(params, inputs, &[x.nrows()]).unwrap();
    loss_and_dlogits(logits[0].row(0), label).unwrap().0
}

fn main() {
    let arch = Architecture {
        input: 3,
        hidden: 6,
        classes: 4,
        output_bias: true,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut params = RnnParams::<f64>::init_uniform(arch, &mut rng);
    params.w_rec.mapv_inplace(|v| v * 3.0);
    let x = Array2::from_shape_simple_fn((5, 3), || rng.random_range(0.0..1.0));
    let label = 2;

    let (l, grads) = bptt(&params, x.view(), label, x.nrows()).unwrap();
    println!("loss {l:.6}");

    let h = 1e-5;
    let names = ["w_in", "w_rec", "w_out", "b_out"];
    for (k, name) in names.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for i in 0..params.slices()[k].len() {
            let orig = params.slices()[k][i];
            params.slices_mut()[k][i] = orig + h;
            let plus = loss(&params, &x, label);
            params.slices_mut()[k][i] = orig - h;
            let minus = loss(&params, &x, label);
            params.slices_mut()[k][i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let analytic = grads.slices()[k][i];
            worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8));
        }
        println!("{name:>5}: max relative error {worst:.2e}");
    }
}
