//! Build a CNO for the running-mean recursion, check it on held-out paths and
//! audit causality.

use cno::bench::{GMap, RecursiveTarget};
use cno::cno::{causality_audit, construct_cno, predict, CnoOptions};
use cno::net::{Activation, TrainOptions};

fn main() -> cno::Result<()> {
    let target = RecursiveTarget::new(6, GMap::Mean)?;
    let ds = target.causal_dataset(&target.sample_inputs(256, 0), 6)?;
    let opts = CnoOptions {
        eps_d: 0.0,
        eps_a: 0.05,
        q: 3,
        delta: 0.5,
        radius: 1.0,
        seed: 7,
        hidden: vec![vec![8]],
        activation: Activation::Prelu,
        train: TrainOptions { lr: 1e-2, epochs: 200, batch: 32, seed: 0, final_lr_scale: 0.05 },
    };
    let oracle = target.window_oracle(6);
    let (model, report) = construct_cno(&oracle, &ds, &opts)?;
    for w in &report.windows {
        println!(
            "window {}: dims {:?}, train max err {:.3e} (gate {:.3e}){}",
            w.index,
            w.dims,
            w.train_max_err,
            w.gate,
            if w.shortfall { " shortfall" } else { "" }
        );
    }
    println!("synced dims {:?}, P = {}, anchor residual {:e}", report.synced_dims, report.param_count, report.anchor_residual);

    let held = target.sample_inputs(200, 99);
    let mut worst: f64 = 0.0;
    for z in &held {
        let path: Vec<Vec<f64>> = z.iter().map(|&v| vec![v]).collect();
        let y = predict(&model, &path, 6)?;
        for (yi, ti) in y.iter().zip(target.trajectory(z)?) {
            worst = worst.max((yi[0] - ti).abs());
        }
    }
    println!("held-out max error {worst:.3e}");

    let a: Vec<Vec<f64>> = held[0].iter().map(|&v| vec![v]).collect();
    let mut b = a.clone();
    b[4][0] = 1.0 - b[4][0];
    println!("outputs up to t = 3 unaffected by a change at t = 4: {}", causality_audit(&model, &a, &b, 3)?);
    Ok(())
}
