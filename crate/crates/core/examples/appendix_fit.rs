//! Fit the bundled appendix model to one simulated 400-patient trial and
//! print the posterior summary.
//!
//! ```text
//! cargo run --release -p bacta-core --example appendix_fit -- 42 [corrected]
//! ```

use bacta_core::design::{assets, generate_cohort_sized, load_trial_spec};
use bacta_core::graph::compile;
use bacta_core::inference::{run_mcmc, summarize};
use bacta_core::rng::RandomStream;

fn main() {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(42);
    let spec = match std::env::args().nth(2).as_deref() {
        Some("corrected") => assets::APPENDIX_TRIAL_CORRECTED,
        _ => assets::APPENDIX_TRIAL,
    };
    let design = load_trial_spec(spec).expect("bundled spec");
    let data = generate_cohort_sized(&design, 200, &mut RandomStream::new(seed)).expect("cohort");
    let graph = compile(&design.model_ast, &data).expect("model compiles");
    let mut config = design.mcmc.clone();
    config.seed = seed;
    let start = std::time::Instant::now();
    let samples = run_mcmc(&graph, &config).expect("sampling");
    print!("{}", summarize(&samples).to_text());
    for (name, stats) in samples
        .latent_names
        .iter()
        .zip(&samples.chain_stats[0].acceptance_rates)
    {
        println!("acceptance {name}: {stats:.3}");
    }
    println!("elapsed {:.2?}", start.elapsed());
}
