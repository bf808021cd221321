//! Learn the one-step solution operator of an Ornstein-Uhlenbeck process on
//! first-order chaos coordinates.

use cno::cno::{construct_cno, predict, CnoOptions, TimeGrid};
use cno::net::{Activation, TrainOptions};
use cno::sde::{build_sde_dataset, ChaosCoords, InitBox, McOracle, SdeCoeffs, SdeWindowOracle};

fn main() -> cno::Result<()> {
    let coeffs = SdeCoeffs::ornstein_uhlenbeck(1.0, 0.5)?;
    let mc = McOracle { n_paths: 5000, steps_per_unit: 100, seed: 1, tamed: true };
    let grid = TimeGrid::uniform(4, 0.25)?;
    let oracle = SdeWindowOracle::new(coeffs.clone(), grid, 4, &mc)?;

    let data = build_sde_dataset(&oracle, &InitBox { mean_lo: -1.0, mean_hi: 1.0, n_samples: 24, seed: 2 })?;
    println!("truncation per window {:?}", data.truncation.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>());

    let opts = CnoOptions {
        eps_d: 0.0,
        eps_a: 0.05,
        q: 3,
        delta: 0.5,
        radius: 1.0,
        seed: 3,
        hidden: vec![vec![12]],
        activation: Activation::Prelu,
        train: TrainOptions { lr: 1e-2, epochs: 300, batch: 8, seed: 0, final_lr_scale: 0.05 },
    };
    let (model, report) = construct_cno(&oracle, &data.dataset, &opts)?;
    println!("trained {} windows, P = {}", report.windows.len(), report.param_count);

    // Start from the deterministic value 0.5 and chain the oracle for comparison.
    let x0 = ChaosCoords::constant(0.5, 4);
    let y = predict(&model, &[x0.to_coords()], 1)?;
    let exact = oracle.advance(0, &x0)?.coords.to_coords();
    println!("predicted {:?}", y[0].iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>());
    println!("oracle    {:?}", exact.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>());
    println!("Lipschitz bound over one window: {:.4}", coeffs.lipschitz_bound(0.25));
    Ok(())
}
