mod common;

use common::*;

#[test]
fn every_primitive_matches_finite_differences() {
    for p in primitives() {
        for seed in 0..5 {
            let err = check_primitive(&p, seed).unwrap();
            assert!(err < GRAD_TOL, "{} seed {seed}: rel err {err}", p.name);
        }
    }
}

#[test]
fn reconstruction_loss_gradient_matches_finite_differences() {
    for seed in 0..3 {
        let (err, slot) = check_end_to_end(4, 2, 16, seed).unwrap();
        assert!(err < GRAD_TOL, "seed {seed}: {slot} rel err {err}");
    }
}

#[test]
fn composite_mlp_loss_matches_finite_differences() {
    use wsn_anomaly::tensor::check::{max_relative_error, numeric_gradient};
    use wsn_anomaly::tensor::{Tape, Tensor};
    let mut r = rng(40);
    let x = Tensor::uniform(&[5, 4], 1.0, &mut r);
    let y = Tensor::uniform(&[5, 3], 1.0, &mut r);
    let params = vec![
        Tensor::uniform(&[4, 6], 1.0, &mut r),
        Tensor::uniform(&[6], 0.5, &mut r),
        Tensor::uniform(&[6, 3], 1.0, &mut r),
    ];
    let build = |tape: &mut Tape, ps: &[Tensor]| {
        let (w1, b1, w2) = (tape.param(0, ps[0].clone()), tape.param(1, ps[1].clone()), tape.param(2, ps[2].clone()));
        let xv = tape.constant(x.clone());
        let yv = tape.constant(y.clone());
        let h = tape.matmul(xv, w1).unwrap();
        let h = tape.add_bias(h, b1).unwrap();
        let h = tape.relu(h);
        let o = tape.matmul(h, w2).unwrap();
        let d = tape.sub(o, yv).unwrap();
        let sq = tape.square(d);
        tape.mean(sq)
    };
    let mut tape = Tape::new();
    let loss = build(&mut tape, &params);
    let grads = tape.backward(loss).unwrap().params(&[&[4, 6], &[6], &[6, 3]]);
    let f = |ps: &[Tensor]| {
        let mut t = Tape::new();
        let l = build(&mut t, ps);
        t.value(l).data()[0]
    };
    for slot in 0..3 {
        let err = max_relative_error(&grads[slot], &numeric_gradient(f, &params, slot, GRAD_H));
        assert!(err < GRAD_TOL, "slot {slot}: {err}");
    }
}

#[test]
fn trend_mlp_weights_all_receive_gradient() {
    use wsn_anomaly::model::*;
    use wsn_anomaly::tensor::{Tape, Tensor};
    let cfg = small_config(16, 2);
    let p = ModelParams::init(&cfg, 3, complete(6)).unwrap();
    let x = random(&[6, 3, 16], &mut rng(41));
    let tr = Transforms::new(&cfg).unwrap();
    let parts = decompose(&x, &cfg).unwrap();
    let mut tape = Tape::new();
    let b = Bound::new(&mut tape, &p, true);
    let f = forward_on(&mut tape, &b, &tr, &parts).unwrap();
    let xv = tape.constant(x.clone());
    let loss = mse_on(&mut tape, xv, f.reconstruction).unwrap();
    let shapes: Vec<&[usize]> = p.tensors().iter().map(Tensor::shape).collect();
    let grads = tape.backward(loss).unwrap().params(&shapes);
    for name in ["trend.mlp.w1", "trend.mlp.w2"] {
        let g = &grads[p.slot(name).unwrap()];
        assert!(g.data().iter().all(|v| *v != 0.0), "{name} has a zero gradient entry");
    }
}
