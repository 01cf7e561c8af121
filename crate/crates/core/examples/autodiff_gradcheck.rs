//! Reverse-mode gradients of a small MLP loss checked against central
//! finite differences, then a few Adam steps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wsn_anomaly::tensor::check::{max_relative_error, numeric_gradient};
use wsn_anomaly::tensor::{Adam, AdamConfig, Tape, Tensor};

fn loss(tape: &mut Tape, ps: &[Tensor], x: &Tensor, y: &Tensor) -> wsn_anomaly::Result<wsn_anomaly::tensor::Var> {
    let w1 = tape.param(0, ps[0].clone());
    let b1 = tape.param(1, ps[1].clone());
    let w2 = tape.param(2, ps[2].clone());
    let (xv, yv) = (tape.constant(x.clone()), tape.constant(y.clone()));
    let h = tape.matmul(xv, w1)?;
    let h = tape.add_bias(h, b1)?;
    let h = tape.relu(h);
    let o = tape.matmul(h, w2)?;
    let d = tape.sub(o, yv)?;
    let sq = tape.square(d);
    Ok(tape.mean(sq))
}

fn main() -> wsn_anomaly::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = Tensor::uniform(&[16, 4], 1.0, &mut rng);
    let y = Tensor::uniform(&[16, 2], 1.0, &mut rng);
    let mut params = vec![
        Tensor::uniform(&[4, 8], 0.5, &mut rng),
        Tensor::uniform(&[8], 0.1, &mut rng),
        Tensor::uniform(&[8, 2], 0.5, &mut rng),
    ];
    let shapes: Vec<Vec<usize>> = params.iter().map(|p| p.shape().to_vec()).collect();
    let shape_refs: Vec<&[usize]> = shapes.iter().map(Vec::as_slice).collect();
    let names: Vec<String> = ["w1", "b1", "w2"].iter().map(|s| s.to_string()).collect();

    let mut tape = Tape::new();
    let l = loss(&mut tape, &params, &x, &y)?;
    let grads = tape.backward(l)?.params(&shape_refs);
    let f = |ps: &[Tensor]| {
        let mut t = Tape::new();
        let l = loss(&mut t, ps, &x, &y).expect("forward");
        t.value(l).data()[0]
    };
    for (slot, name) in names.iter().enumerate() {
        let num = numeric_gradient(f, &params, slot, 1e-5);
        println!("{name}: max relative error {:.2e}", max_relative_error(&grads[slot], &num));
    }

    let mut adam = Adam::new(AdamConfig { lr: 1e-2, ..AdamConfig::default() }, &params);
    for step in 0..=200 {
        let mut tape = Tape::new();
        let l = loss(&mut tape, &params, &x, &y)?;
        if step % 50 == 0 {
            println!("step {step}: loss {:.5}", tape.value(l).data()[0]);
        }
        let g = tape.backward(l)?.params(&shape_refs);
        adam.step(&mut params, &g, &names)?;
    }
    Ok(())
}
