//! Proximity graph, attention-reweighted adjacency and cross-modal fusion on
//! a small random network.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wsn_anomaly::graph::*;
use wsn_anomaly::tensor::Tensor;

fn main() -> wsn_anomaly::Result<()> {
    let positions: Vec<NodePosition> = [(0.0, 0.0), (1.0, 0.2), (2.1, 0.1), (5.0, 4.0), (5.5, 4.4)]
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| NodePosition { node_id: i as u32 + 1, x, y })
        .collect();
    let a = build_adjacency(&positions, 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (n, m, t) = (5, 3, 8);
    let x = Tensor::uniform(&[n, m, t], 1.0, &mut rng);

    // node representation: per-modality time mean
    let z = Tensor::new(vec![n, m], x.data().chunks(t).map(|s| s.iter().sum::<f64>() / t as f64).collect())?;
    let s = spatial_correlation(&z)?;
    let a_tilde = adjust_adjacency(&s, &a)?;
    println!("adjacency (kNN, k=2, self-loops):");
    for i in 0..n {
        println!("  {:?}", (0..n).map(|j| a.weights.at2(i, j)).collect::<Vec<_>>());
    }
    println!("reweighted adjacency:");
    for i in 0..n {
        println!("  {:?}", (0..n).map(|j| (a_tilde.at2(i, j) * 1000.0).round() / 1000.0).collect::<Vec<_>>());
    }

    let fusion = FusionParams {
        w_o: (0..m).map(|_| Tensor::uniform(&[t, 4], 0.5, &mut rng)).collect(),
        w_k: (0..m).map(|_| Tensor::uniform(&[t, 4], 0.5, &mut rng)).collect(),
        w_v: (0..m).map(|_| Tensor::uniform(&[t, t], 0.5, &mut rng)).collect(),
        layer_weights: vec![],
    };
    let fused = modal_fusion(&x, &fusion, FusionReading::AsPrinted)?;
    let fused_shape = fused.shape().to_vec();
    let h = fused.reshape(&[n, m * t])?;
    let w = Tensor::uniform(&[m * t, m * t], 0.3, &mut rng);
    let out = mfdgcn_layer(&h, &a_tilde, &w)?;
    let active = out.data().iter().filter(|v| **v > 0.0).count();
    println!("fused {fused_shape:?} -> graph layer {:?}, active units {active}", out.shape());
    Ok(())
}
