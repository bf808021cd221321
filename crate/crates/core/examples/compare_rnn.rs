//! CNO versus feedforward networks on a recursive target, plus the check that
//! a CNO replays exactly as a recurrent cell.

use cno::bench::{compare, default_ladder, rnn_reduction_check, CompareOptions, GMap, RecursiveTarget};
use cno::cno::{construct_cno, CnoOptions};
use cno::net::{Activation, TrainOptions};

fn main() -> cno::Result<()> {
    let target = RecursiveTarget::new(4, GMap::AbsDiff)?;
    let opts = CompareOptions {
        n_train: 256,
        n_test: 256,
        seeds: vec![0, 1],
        train: TrainOptions { epochs: 150, ..CompareOptions::default().train },
        ..CompareOptions::default()
    };
    let report = compare(&target, &default_ladder(4), &opts)?;
    for m in report.medians() {
        println!("{:<12} {:>6} params  median max err {:.3e}", m.model, m.params, m.median_err);
    }
    if let Some(d) = report.direction() {
        println!("smaller CNO beats every larger FFNN: {:?}", d.holds());
    }

    let ds = target.causal_dataset(&target.sample_inputs(64, 5), 4)?;
    let cno_opts = CnoOptions {
        eps_d: 0.0,
        eps_a: 0.1,
        q: 2,
        delta: 0.5,
        radius: 1.0,
        seed: 0,
        hidden: vec![vec![6]],
        activation: Activation::Prelu,
        train: TrainOptions { epochs: 50, ..TrainOptions::default() },
    };
    let oracle = target.window_oracle(4);
    let (model, _) = construct_cno(&oracle, &ds, &cno_opts)?;
    println!("RNN replay matches predict: {}", rnn_reduction_check(&model, 50, 1)?);
    Ok(())
}
