//! Mixed-type schema, CSV round trip with labels, domain projection.

use std::sync::Arc;

use discover::tabular::{project_to_domain, read_csv, write_csv, Feature, Schema};

fn main() -> discover::Result<()> {
    let schema = Arc::new(Schema::new(vec![
        Feature::numerical("age", 18.0, 90.0),
        Feature::categorical("job", ["clerk", "manager", "technician"]).with_admissible(&["clerk", "technician"])?,
        Feature::categorical("country", ["fr", "de"]).immutable(),
    ])?);
    println!("actionable features: {:?}", schema.actionable());

    let text = "age,job,country\n30,clerk,fr\n57.5,manager,de\n";
    let cohort = read_csv(text.as_bytes(), schema.clone())?;
    println!("encoded rows: {:?}", cohort.rows().collect::<Vec<_>>());

    let mut out = Vec::new();
    write_csv(&cohort, &mut out)?;
    print!("decoded again:\n{}", String::from_utf8_lossy(&out));
    assert_eq!(read_csv(out.as_slice(), schema.clone())?, cohort);

    // Out-of-range age is clamped; the inadmissible level `manager` is not an edit target but stays valid data.
    let raw = [120.0, 1.0, 0.0];
    println!("{raw:?} projects to {:?}", project_to_domain(&raw, &schema));

    match read_csv("age,job,country\n30,pilot,fr\n".as_bytes(), schema) {
        Err(e) => println!("unknown level rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
