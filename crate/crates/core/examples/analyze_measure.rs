//! Carleson constant, top-layer constant and bad set of a dyadic tree measure.

use std::sync::Arc;

use carleson::extrapolation::bad_set;
use carleson::measures::{carleson_constant, top_constant, TreeMeasure};
use carleson::rational::{format_rational, frac};
use carleson::tree::WeightedTree;

fn main() -> carleson::Result<()> {
    let tree = Arc::new(WeightedTree::dyadic(1, 3)?);
    // Mass sigma(Q) / 2^level: heavier near the root.
    let mu = TreeMeasure::from_fn(tree.clone(), |t, v| t.sigma(v) * frac(1, 1 << t.level(v)))?;

    let c1 = carleson_constant(&mu);
    let c2 = top_constant(&mu);
    println!("C1 = {} at {}", format_rational(&c1.value), tree.label(c1.argmax));
    println!("C2 = {} at {}", format_rational(&c2.value), tree.label(c2.argmax));

    let delta = frac(1, 2);
    let bad: Vec<String> = bad_set(&mu, &delta).iter().map(|&v| tree.label(v).to_string()).collect();
    println!("bad cubes at delta = 1/2: {}", bad.join(" "));
    Ok(())
}
