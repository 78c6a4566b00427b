//! Exhaustive checks on small trees: antichains, minimality, the hypothesis.

use std::sync::Arc;

use carleson::extrapolation::build_stopping_family;
use carleson::measures::TreeMeasure;
use carleson::oracle::{antichain_count, brute_force_minimal_check, enumerate_families, exhaustive_hypothesis_check};
use carleson::rational::{format_rational, frac, int};
use carleson::tree::WeightedTree;

fn main() -> carleson::Result<()> {
    let tree = Arc::new(WeightedTree::dyadic(1, 2)?);
    let families = enumerate_families(tree.root(), &tree)?;
    println!("antichains below the root: {} (recursion gives {})", families.len(), antichain_count(&tree, tree.root()));
    for f in families.iter().take(6) {
        let cubes: Vec<String> = f.iter().map(|v| tree.label(v).to_string()).collect();
        println!("  {{{}}}", cubes.join(" "));
    }

    let delta = frac(1, 2);
    let mu = TreeMeasure::from_fn(tree.clone(), |t, v| t.sigma(v) / int(4))?;
    let f = build_stopping_family(&mu, tree.root(), &delta)?.family;
    let cubes: Vec<String> = f.iter().map(|v| tree.label(v).to_string()).collect();
    println!("constructed F(root) = {{{}}}, minimal: {}", cubes.join(" "), brute_force_minimal_check(&mu, tree.root(), &delta, &f)?);

    let nu = TreeMeasure::from_fn(tree.clone(), |t, v| t.sigma(v).clone())?;
    for capc in [int(3), int(1)] {
        let check = exhaustive_hypothesis_check(&mu, &nu, &delta, &capc)?;
        print!("C = {}: {} admissible pairs of {}", format_rational(&capc), check.admissible_pairs, check.pairs_checked);
        match check.counterexample {
            None => println!(", hypothesis holds"),
            Some(ce) => println!(
                ", violated at {} with nu = {} > {}",
                tree.label(ce.q),
                format_rational(&ce.region_mass),
                format_rational(&ce.allowed)
            ),
        }
    }
    Ok(())
}
