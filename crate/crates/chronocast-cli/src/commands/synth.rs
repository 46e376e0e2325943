use std::path::Path;

use chronocast::synth::{generate, write_csv, SynthConfig};
use chronocast::Result;

use crate::artifacts::artifact_path;
use crate::config::RunConfig;

/// Generates a synthetic daily consumption CSV and writes it either to the
/// explicit `--output` path or to `<out-dir>/synthetic.csv`.
pub fn run(cfg: &RunConfig, output: Option<&Path>) -> Result<()> {
    let synth_cfg = SynthConfig {
        start: cfg.synth_start,
        days: cfg.synth_days,
        noise_std: cfg.synth_noise,
        seed: cfg.seed,
        ..SynthConfig::default()
    };
    let series = generate(&synth_cfg)?;
    let path = match output {
        Some(p) => {
            if let Some(parent) = p.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent).map_err(|e| chronocast::Error::Io {
                        path: parent.to_path_buf(),
                        source: e,
                    })?;
                }
            }
            p.to_path_buf()
        }
        None => artifact_path(&cfg.out_dir, "synthetic.csv")?,
    };
    write_csv(&series, &path)?;
    println!(
        "synth: wrote {} days ({} .. {}) to {}",
        series.len(),
        series.dates().first().unwrap(),
        series.dates().last().unwrap(),
        path.display()
    );
    Ok(())
}
