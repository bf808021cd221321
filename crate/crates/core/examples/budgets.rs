use cno::filter::{budget, BudgetInput, Modulus, Regularity};
use cno::weave::hyper_report;

fn main() -> cno::Result<()> {
    let cases = [
        ("lipschitz, 2 -> 1", Regularity::Holder { alpha: 1.0 }, 0.1, 2, 1),
        ("holder 1/2, 1 -> 3", Regularity::Holder { alpha: 0.5 }, 0.5, 1, 3),
        ("C^1, 1 -> 1", Regularity::Smooth { k: 1 }, 0.1, 1, 1),
        ("C^2, 2 -> 2", Regularity::Smooth { k: 2 }, 0.05, 2, 2),
    ];
    for (name, regularity, eps_a, n_in, n_out) in cases {
        let b = BudgetInput {
            eps_d: 0.1,
            eps_a,
            lambda: 1.0,
            regularity,
            n_in,
            n_out,
            omega_phi: Modulus::Identity,
            c_fbar: 1.0,
        };
        let r = budget(&b)?;
        println!("{name:<20} eps_A {eps_a:<5} width {:>12} depth {:>10}", r.width, r.depth);
    }

    for (p, q, delta, t) in [(17, 4, 0.5, 16), (100, 8, 0.5, 64)] {
        let h = hyper_report(p, q, delta, t)?;
        println!(
            "hypernetwork P={p} Q={q} delta={delta}: capacity {}, width bound {}, depth ~ {:.1}",
            h.capacity,
            h.width_bound,
            h.depth_expr.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
