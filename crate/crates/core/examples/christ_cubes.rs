//! Christ cubes on a finite metric space, their constants, and the extrapolation
//! audit run on the resulting weighted tree.

use std::sync::Arc;

use carleson::christ::{audit_christ_properties, build_christ_tree, MetricSpace};
use carleson::extrapolation::audit_bound;
use carleson::generate::{random_measure, rng};
use carleson::measures::carleson_constant;
use carleson::rational::{format_rational, frac};

fn main() -> carleson::Result<()> {
    let space = MetricSpace::uniform_grid(5)?;
    let tree = build_christ_tree(&space, 1, 12)?;
    let audit = audit_christ_properties(&tree, &space, 1);
    println!("levels: {}", tree.levels().len());
    println!("diam ratio {}, c2 {}", format_rational(&audit.diam_ratio), format_rational(&audit.c2));
    if let (Some(c0), Some(c1)) = (&audit.c0, &audit.c1) {
        println!("c0 {}, c1 {} over {} balls", format_rational(c0), format_rational(c1), audit.c1_samples);
    }
    println!("partition {}, nesting {}, separation {}", audit.partition, audit.nesting, audit.separation);

    let (weighted, _) = tree.to_weighted_tree()?;
    let weighted = Arc::new(weighted);
    println!("weighted tree: {} nodes, theta {}", weighted.len(), format_rational(weighted.theta()));

    let mut g = rng(7);
    let mu = random_measure(&mut g, weighted.clone())?;
    let c = frac(3, 2);
    let nu = mu.scaled(&c)?;
    let c1 = carleson_constant(&mu).value;
    let report = audit_bound(&mu, &nu, &(&c1 / frac(2, 1)), &(&c * &c1))?;
    println!(
        "audit on the Christ tree: measured {} <= predicted {}: {}",
        format_rational(&report.measured_c1_nu),
        format_rational(&report.predicted_bound),
        report.pass
    );
    Ok(())
}
