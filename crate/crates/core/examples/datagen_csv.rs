//! Generate biased classification data, write it as CSV and read it back.
//!
//! cargo run --release --example datagen_csv

use vtrust::synth::{gen_biased_classification, parse_csv, to_csv, BiasedClassificationSpec, CsvSchema};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = BiasedClassificationSpec::new(200, 3, 0.8, 7);
    let (train, validation) = gen_biased_classification(&spec)?;
    let agree = train.rows.iter().filter(|r| r.sensitive == Some(r.label as u8)).count();
    println!("{} train / {} validation rows; z agrees with y on {agree}", train.len(), validation.len());

    let text = to_csv(&train);
    println!("{}", text.lines().take(3).collect::<Vec<_>>().join("\n"));
    let back = parse_csv(&text, &CsvSchema::for_dataset(&train))?;
    assert_eq!(back.rows, train.rows);
    println!("round trip ok");
    Ok(())
}
