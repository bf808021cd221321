//! Depth/width padding leaves a network's function unchanged; parallelization
//! stacks several networks that read the same input.

use cno::net::{self, FlatParams, NetSpec};

fn main() -> cno::Result<()> {
    let a = NetSpec::prelu(vec![2, 3, 1])?;
    let b = NetSpec::relu(vec![2, 5, 4, 2])?;
    println!("P{:?} = {}, P{:?} = {}", a.dims(), a.param_count(), b.dims(), b.param_count());

    let pa = net::init_params(&a, 1);
    let pb = net::init_params(&b, 2);
    let (padded, pp) = net::pad_to(&a, &pa, &[2, 6, 6, 3, 1])?;
    let x = [0.3, -1.2];
    println!(
        "original {:?}, padded to {:?}: {:?}",
        net::forward(&a, &pa, &x)?,
        padded.dims(),
        net::forward(&padded, &pp, &x)?
    );

    let par = net::parallelize(&[(a.clone(), pa.clone()), (b.clone(), pb.clone())])?;
    let joint = net::forward(&par.spec, &par.params, &x)?;
    let mut split = net::forward(&a, &pa, &x)?;
    split.extend(net::forward(&b, &pb, &x)?);
    println!("parallel dims {:?}", par.spec.dims());
    println!("  stacked {joint:?}");
    println!("  separate {split:?}");
    println!("  {} params, bound {:.0}", par.spec.param_count(), par.param_bound);

    let zero = FlatParams::zeros(&a);
    assert_eq!(net::forward(&a, &zero, &x)?, vec![0.0]);
    Ok(())
}
