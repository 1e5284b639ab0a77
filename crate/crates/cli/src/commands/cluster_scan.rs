//! `cluster-scan`: SSE elbow scan over a list of centroid counts.

use std::fs;

use kmesn::clustering::{elbow_scan, write_elbow_csv, ClusterConfig};

use crate::commands::prepare_train;
use crate::config::ExperimentConfig;
use crate::CliError;

pub fn run(config: &ExperimentConfig, ks: Option<Vec<usize>>) -> Result<(), CliError> {
    config.validate()?;
    let ctx = prepare_train(config)?;
    let ks = ks.unwrap_or_else(|| config.k_list.clone());
    let template = ClusterConfig {
        k: 1,
        batch_size: config.clustering.batch_size,
        max_iterations: config.clustering.max_iterations,
        seed: config.clustering_seed(),
        reassign_threshold: config.clustering.reassign_threshold,
    };
    let results = elbow_scan(&ctx.data.pooled_frames(), &ks, &template)?;

    fs::create_dir_all(&config.out)?;
    let path = config.out.join("elbow.csv");
    let file = fs::File::create(&path)?;
    write_elbow_csv(&results, file)?;

    println!("{:>8} {:>20}", "k", "sse");
    for (k, sse) in &results {
        println!("{k:>8} {sse:>20.6}");
    }
    println!("written to {}", path.display());
    Ok(())
}
