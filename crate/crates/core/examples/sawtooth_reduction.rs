//! Sawtooth regions over a cube family, and binning half-space atoms into a tree.

use carleson::generate::{random_atoms, random_disjoint_family, rng};
use carleson::rational::{format_rational, frac};
use carleson::sawtooth::{reduce_to_dyadic, verify_set_identity, SawtoothFunction};
use carleson::tree::CubeId;

fn main() -> carleson::Result<()> {
    let root = CubeId::root(1);
    let family = vec![CubeId::new(1, vec![0])?, CubeId::new(3, vec![6])?];
    let psi = SawtoothFunction::new(root.clone(), family.clone())?;
    for k in [1, 2, 4, 13] {
        let x = frac(k, 16);
        println!("psi({}) = {}", format_rational(&x), format_rational(&psi.value(std::slice::from_ref(&x))));
    }

    let mut g = rng(42);
    let atoms = random_atoms(&mut g, 1, 4, 200)?;
    let report = verify_set_identity(&root, &family, &atoms)?;
    println!(
        "set identity on {} atoms: {} disagreements, {} on the frontier",
        report.checked,
        report.disagreements.len(),
        report.frontier.len()
    );

    let random_family = random_disjoint_family(&mut g, &root, 4);
    println!("random family of {} cubes holds: {}", random_family.len(), verify_set_identity(&root, &random_family, &atoms)?.holds());

    let mu = random_atoms(&mut g, 1, 4, 50)?;
    let r = reduce_to_dyadic(&mu, &atoms, &root, 4)?;
    println!(
        "reduction: mu mass {}, nu mass kept {}, dropped outside the tent {}, truncation bound holds: {}",
        format_rational(r.mu.total()),
        format_rational(r.nu.total()),
        format_rational(&r.dropped_nu_mass),
        r.truncation_bound_holds
    );
    Ok(())
}
