//! Evaluates a prediction file against a benchmark with strict AST matching
//! and prints the error taxonomy.
//!
//!     cargo run --example evaluate_benchmark

use std::path::Path;

use toolplay::eval::{evaluate_file, PredictionSource};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/eval");
    let preds = fixtures.join("preds.lines");
    let report = evaluate_file(&fixtures.join("bench.lines"), PredictionSource::File(preds))?;
    println!("accuracy {}/{} = {:.3}", report.correct, report.total, report.accuracy);
    for v in &report.verdicts {
        match v.label {
            None => println!("  {:<4} correct", v.id),
            Some(label) => println!("  {:<4} {label}", v.id),
        }
    }
    for (category, causes) in &report.histogram {
        println!("{category:?}: {causes:?}");
    }
    Ok(())
}
