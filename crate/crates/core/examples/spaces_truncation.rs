//! Truncation error profiles in a weighted sequence space and in L²([0, 1]).

use cno::spaces::{Element, GridFunction, SchauderSpace, WeightRule};

fn main() -> cno::Result<()> {
    let seq = SchauderSpace::weighted_sequence(WeightRule::Geometric { ratio: 0.5 })?;
    let x = Element::Coords((1..=12).map(|k| 1.0 / k as f64).collect());
    let profile = seq.truncation_error_profile(&[x], 12)?;
    println!("{}", seq.tag());
    for (n, e) in profile.iter().enumerate() {
        println!("  n = {:>2}  max d(A_n x, x) = {e:.3e}", n + 1);
    }

    let l2 = SchauderSpace::fourier(1.0)?;
    // A ramp has slowly decaying sine coefficients, a bump much faster ones.
    let ramp = Element::Samples(GridFunction::sample(1.0, 512, |s| s));
    let bump = Element::Samples(GridFunction::sample(1.0, 512, |s| (s * (1.0 - s)).powi(2)));
    for (name, f) in [("ramp", ramp), ("bump", bump)] {
        let p = l2.truncation_error_profile(&[f.clone()], 16)?;
        println!("{name}: n = 1 {:.3e}, n = 4 {:.3e}, n = 16 {:.3e}", p[0], p[3], p[15]);
        let c = l2.project(&f, 4)?;
        println!("  first coefficients {:?}", c.coords.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>());
    }
    Ok(())
}
