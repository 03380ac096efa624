//! Systems serialize to a plain JSON document and read back bit-for-bit.

use kfselect::model::{random_system, LinearSystem, RandomSystemSpec};

fn main() -> kfselect::error::Result<()> {
    let spec = RandomSystemSpec {
        n: 3,
        p: 2,
        ..Default::default()
    };
    let sys = random_system(&spec, 1)?;
    let text = sys.to_json();
    println!("{text}");
    let back = LinearSystem::from_json(&text)?;
    assert_eq!(back, sys);
    println!("round trip ok");

    match LinearSystem::from_json(r#"{"n": 2, "F": [[1, 0]], "R_w": [[1]], "Pi0": [[1]], "sensors": []}"#) {
        Err(e) => println!("rejected as expected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
