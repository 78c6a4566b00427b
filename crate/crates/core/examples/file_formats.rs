//! Reading and writing atoms, metric spaces and cube families.

use carleson::io::{atoms_to_json, family_to_json, metric_to_json, parse_atoms, parse_family, parse_metric};

fn main() -> carleson::Result<()> {
    let atoms = parse_atoms(r#"{"atoms": [{"x": [0.25], "t": "1/8", "w": 1}, {"x": ["3/4"], "t": 0.5, "w": "1/2"}]}"#)?;
    print!("{}", atoms_to_json(&atoms));

    let space = parse_metric(
        r#"{"points": ["a", "b", "c"],
            "dist": [[0, "1/2", 1], ["1/2", 0, "1/2"], [1, "1/2", 0]],
            "weights": ["1/3", "1/3", "1/3"]}"#,
    )?;
    print!("{}", metric_to_json(&space));

    let family = parse_family(r#"[{"level": 1, "index": [0]}, {"level": 2, "index": [3]}]"#)?;
    print!("{}", family_to_json(&family));

    match parse_metric(r#"{"points": ["a"], "dist": [[0]], "weights": ["1/2"]}"#) {
        Ok(_) => unreachable!(),
        Err(e) => println!("rejected: {e}"),
    }
    Ok(())
}
