//! Ablation-table snapshot on the synthetic benchmark across several master
//! seeds. Run with:
//!
//! ```text
//! cargo run --release -p chronocast --example ablation [days] [base_epochs] [noise_std] [seed...]
//! ```

use std::time::Instant;

use chronocast::ensemble::small_grid;
use chronocast::eval::AblationVariant;
use chronocast::pipeline::{run_ablation, PipelineConfig};
use chronocast::synth::{generate, SynthConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let days: usize = args.get(1).map_or(365, |v| v.parse().expect("days"));
    let base_epochs: usize = args.get(2).map_or(80, |v| v.parse().expect("epochs"));
    let noise_std: f64 = args.get(3).map_or(1500.0, |v| v.parse().expect("noise"));
    let seeds: Vec<u64> = if args.len() > 4 {
        args[4..].iter().map(|v| v.parse().expect("seed")).collect()
    } else {
        vec![42, 43, 44]
    };

    let series = generate(&SynthConfig {
        days,
        noise_std,
        ..SynthConfig::default()
    })
    .expect("synthetic series");

    println!("days={days} base_epochs={base_epochs} noise={noise_std}");
    for seed in seeds {
        let cfg = PipelineConfig {
            base_epochs,
            grid: small_grid(),
            ..PipelineConfig::standard(seed)
        };
        let t0 = Instant::now();
        let report = run_ablation(&series, &AblationVariant::ALL, &cfg).expect("ablation");
        println!("seed {seed} ({:.0}s):", t0.elapsed().as_secs_f64());
        print!("{}", report.to_csv());
        let full = &report.rows[0];
        let raw = &report.rows[3];
        println!(
            "  full avg rmse {:.5} vs raw {:.5} -> {}",
            full.avg.rmse,
            raw.avg.rmse,
            if full.avg.rmse <= raw.avg.rmse { "ordered" } else { "INVERTED" }
        );
    }
}
