//! Train one neural filter between Fourier-coded L² and the reals, then split
//! its error into encoding and approximation parts.

use cno::filter::{error_decomposition, NeuralFilter};
use cno::net::{self, Activation, Dataset, NetSpec, TrainOptions};
use cno::spaces::{Element, GridFunction, SchauderSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: usize = 4;

fn main() -> cno::Result<()> {
    let ins = SchauderSpace::fourier(1.0)?;
    let outs = SchauderSpace::euclidean(1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples: Vec<Element> = (0..200)
        .map(|_| {
            let c: Vec<f64> = (0..6).map(|k| rng.random_range(-1.0..1.0) / (k + 1) as f64).collect();
            Element::Samples(GridFunction::sample(1.0, 256, |s| {
                c.iter().enumerate().map(|(k, ck)| ck * 2f64.sqrt() * ((k + 1) as f64 * std::f64::consts::PI * s).sin()).sum()
            }))
        })
        .collect();
    // Target: squared L² norm, of samples or of sine coefficients.
    let target = |x: &Element| -> cno::Result<Element> {
        let norm = match x {
            Element::Samples(g) => {
                let sq: Vec<f64> = g.values.iter().map(|v| v * v).collect();
                cno::spaces::simpson(&sq, g.horizon)
            }
            Element::Coords(c) => c.iter().map(|v| v * v).sum(),
        };
        Ok(Element::Coords(vec![norm]))
    };

    let xs = samples.iter().map(|x| Ok(ins.project(x, MODES)?.coords)).collect::<cno::Result<Vec<_>>>()?;
    let ys = samples
        .iter()
        .map(|x| match target(x)? {
            Element::Coords(c) => Ok(c),
            Element::Samples(_) => unreachable!("target returns coordinates"),
        })
        .collect::<cno::Result<Vec<_>>>()?;
    let data = Dataset::new(xs, ys)?;
    let spec = NetSpec::new(vec![MODES, 16, 16, 1], Activation::Prelu)?;
    let report = net::train(&spec, &data, &TrainOptions { epochs: 300, ..TrainOptions::default() })?;
    println!("train mse {:.3e}, max abs err {:.3e}", report.mse, report.max_abs_err);

    let filter = NeuralFilter::new(ins, outs, spec, report.params)?;
    let split = error_decomposition(&target, &filter, &samples)?;
    println!("output truncation  {:.3e}", split.enc_out);
    println!("input truncation   {:.3e}", split.enc_in);
    println!("approximation      {:.3e}", split.approx);
    println!("end to end         {:.3e} <= {:.3e}: {}", split.end_to_end, split.bound(), split.is_sound());
    Ok(())
}
