pub mod ablate;
pub mod analyze;
pub mod evaluate;
pub mod forecast;
pub mod synth;
pub mod train;

use std::path::{Path, PathBuf};

use crate::config::RunConfig;

/// Resolves an optional bundle flag to the default artifact location.
pub fn bundle_path(cfg: &RunConfig, flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.out_dir.join("bundle.json"))
}

/// Prints one horizon report as an aligned text table.
pub fn print_report(report: &chronocast::eval::HorizonReport) {
    println!(
        "{} ({}): avg mae {:.6} rmse {:.6}",
        report.model_name, report.units, report.avg.mae, report.avg.rmse
    );
    for (i, m) in report.per_day.iter().enumerate() {
        println!("  day {}: mae {:.6} rmse {:.6}", i + 1, m.mae, m.rmse);
    }
}
