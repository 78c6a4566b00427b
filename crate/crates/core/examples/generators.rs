//! Seeded corpus generators and the measure file format.

use carleson::generate::{generate, Kind, Params};
use carleson::io::{measure_to_json, parse_measure};
use carleson::measures::carleson_constant;
use carleson::rational::{format_rational, frac};
use carleson::tree::CubeId;

fn main() -> carleson::Result<()> {
    let mut product = Params::new(Kind::Product, 2, 2);
    product.target = Some(frac(5, 2));
    let m = generate(&product, 1)?;
    println!("product: C1 = {}", format_rational(&carleson_constant(&m).value));

    let mut singular = Params::new(Kind::SubtreeSingular, 1, 3);
    singular.node = Some(CubeId::new(1, vec![1])?);
    let m = generate(&singular, 2)?;
    let c1 = carleson_constant(&m);
    println!("subtree-singular: C1 = {} at {}", format_rational(&c1.value), m.tree().label(c1.argmax));

    let mut cascade = Params::new(Kind::Cascade, 1, 2);
    cascade.uniform = true;
    let m = generate(&cascade, 0)?;
    let text = measure_to_json(&m);
    print!("{text}");
    assert_eq!(measure_to_json(&parse_measure(&text, None)?), text);
    Ok(())
}
