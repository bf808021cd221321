//! Weave a sequence of parameter vectors into one hypernetwork and replay it.

use cno::weave::{build_weave, rollout, WeaveModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> cno::Result<()> {
    let (t, p) = (16, 50);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let thetas: Vec<Vec<f64>> = (0..t).map(|_| (0..p).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let w = build_weave(&thetas, 4, 0.5, 1)?;
    println!(
        "hypernetwork dims {:?} ({} params), M_T = {:.3}, min separation {:.3}",
        w.hyper_spec.dims(),
        w.hyper_spec.param_count(),
        w.m_t,
        w.packing.min_separation()
    );

    let replay = rollout(&w, t)?;
    let worst = replay
        .iter()
        .zip(&thetas)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    println!("max |theta_t - replay_t| over {t} steps: {worst:e}");

    let bytes = w.to_bytes();
    let back = WeaveModel::from_bytes(&bytes)?;
    println!("serialized {} bytes, round trip equal: {}", bytes.len(), back.to_bytes() == bytes);
    Ok(())
}
