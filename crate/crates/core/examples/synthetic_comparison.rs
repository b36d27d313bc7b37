//! DCP versus k-means on the synthetic scenarios, scored on test points.
//!
//! ```text
//! cargo run --release -p dcp-core --example synthetic_comparison -- [seeds] [sweeps] [aux_sweeps]
//! ```

use dcp_core::io::{generate_synthetic, Scenario, SyntheticSpec};
use dcp_core::metrics::{
    adjusted_rand_index_on, kmeans, normalized_mutual_information_on, summarize,
};
use dcp_core::sampler::{run_inference, LogNormalPrior};
use dcp_core::{KernelParams, SamplerConfig};

const RESTARTS: u64 = 10;

fn main() -> dcp_core::Result<()> {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let seeds = args.first().copied().unwrap_or(10) as u64;
    let sweeps = args.get(1).copied().unwrap_or(2000);
    let aux_sweeps = args
        .get(2)
        .copied()
        .unwrap_or(SamplerConfig::default().aux_sweeps);

    for scenario in [Scenario::MultiModal, Scenario::OverlapPair] {
        let mut dcp = (0.0, 0.0);
        let mut km = (0.0, 0.0);
        for seed in 0..seeds {
            let spec = SyntheticSpec::default_for(scenario, seed);
            let synth = generate_synthetic(&spec)?;
            let test = &synth.test_indices;

            let params = KernelParams::squared_exponential(vec![1.0; synth.data.dim()], 1.0)?;
            let config = SamplerConfig {
                n_sweeps: sweeps,
                burn_in: sweeps / 4,
                seed,
                aux_sweeps,
                ..Default::default()
            };
            let trace = run_inference(&synth.data, &params, &LogNormalPrior::default(), &config)?;
            let s = summarize(&trace, Some(&synth.truth), Some(test))?;
            let (ari, nmi) = (s.mean_ari.unwrap_or(0.0), s.mean_nmi.unwrap_or(0.0));

            let (mut kari, mut knmi) = (0.0, 0.0);
            for r in 0..RESTARTS {
                let p = kmeans(&synth.data, spec.num_clusters(), seed * 1000 + r)?;
                kari += adjusted_rand_index_on(&p, &synth.truth, test)?;
                knmi += normalized_mutual_information_on(&p, &synth.truth, test)?;
            }
            kari /= RESTARTS as f64;
            knmi /= RESTARTS as f64;

            let last = &trace.samples.last().expect("post-burn-in samples").params;
            let psi: Vec<String> = last
                .log_vector()
                .iter()
                .map(|v| format!("{:.3}", v.exp()))
                .collect();
            println!(
                "{scenario:?} seed {seed}: dcp ari {ari:.3} nmi {nmi:.3} | k-means ari {kari:.3} nmi {knmi:.3} | accept {:.2} | final psi [{}]",
                trace.acceptance_rate(),
                psi.join(", "),
            );
            dcp.0 += ari;
            dcp.1 += nmi;
            km.0 += kari;
            km.1 += knmi;
        }
        let n = seeds as f64;
        println!(
            "{scenario:?} mean: dcp ari {:.3} nmi {:.3} | k-means ari {:.3} nmi {:.3}",
            dcp.0 / n,
            dcp.1 / n,
            km.0 / n,
            km.1 / n
        );
    }
    Ok(())
}
