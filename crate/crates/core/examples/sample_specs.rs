//! Draws control specs from the default distribution and renders the
//! generator prompt for the first one.
//!
//!     cargo run --example sample_specs -- 42

use toolplay::canonical;
use toolplay::taskspec::{extract_control_spec, render_generator_prompt, sample_specs, PromptBundle, SpecDistribution};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(42);
    let dist = SpecDistribution::default();
    let specs = sample_specs(&dist, seed, 8)?;
    for (i, spec) in specs.iter().enumerate() {
        println!("{i}: {}", canonical::to_string(spec));
    }

    let prompt = render_generator_prompt(&specs[0], &PromptBundle::default())?;
    println!("\n--- generator prompt for draw 0 ---\n{prompt}");
    // the spec can be recovered from its own prompt
    assert_eq!(extract_control_spec(&prompt).as_ref(), Some(&specs[0]));

    let narrow = SpecDistribution::single_domain("Travel");
    println!("\nsingle-domain draw: {}", canonical::to_string(&sample_specs(&narrow, seed, 1)?[0]));
    Ok(())
}
