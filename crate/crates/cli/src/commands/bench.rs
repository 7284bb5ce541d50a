use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use crate::bench::{linear_fit, run_suite, BenchOptions, BenchRecord};

#[derive(Args, Debug)]
pub struct BenchCmd {
    /// CSV output path.
    #[arg(long, default_value = "bench.csv")]
    out: PathBuf,
    /// Device label recorded in every row.
    #[arg(long, default_value = "local")]
    device: String,
    #[arg(long, default_value_t = crate::bench::MIN_ITERATIONS)]
    iterations: usize,
    /// Restrict the retrieval sweep to smaller databases.
    #[arg(long)]
    quick: bool,
}

pub fn run(cmd: BenchCmd) -> Result<()> {
    let opts = BenchOptions {
        device: cmd.device,
        iterations: cmd.iterations,
        pir_prefix_range: if cmd.quick { (6, 10) } else { (6, 15) },
        snapshot_sizes: if cmd.quick {
            vec![50_000]
        } else {
            vec![50_000, 1_000_000]
        },
        ..BenchOptions::default()
    };
    let records = run_suite(&opts);

    let mut file = std::fs::File::create(&cmd.out)
        .with_context(|| format!("creating {}", cmd.out.display()))?;
    writeln!(file, "{}", BenchRecord::CSV_HEADER)?;
    for record in &records {
        writeln!(file, "{}", record.to_csv_row())?;
    }
    println!("wrote {} records to {}", records.len(), cmd.out.display());

    for line in crate::bench::storage_model_report() {
        println!("{line}");
    }

    // Scaling summaries against the published trends.
    let psi: Vec<&BenchRecord> = records
        .iter()
        .filter(|r| r.operation.starts_with("server_psi_"))
        .collect();
    if psi.len() == 2 {
        let ratio = (psi[0].mean_us / psi[1].mean_us).max(psi[1].mean_us / psi[0].mean_us);
        println!("psi cost ratio across database sizes: {ratio:.3}x");
    }
    let pir_points: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.operation.starts_with("pir_answer_"))
        .map(|r| {
            let elements: f64 = r
                .operation
                .rsplit('n')
                .next()
                .and_then(|s| s.parse().ok())
                .unwrap_or(0.0);
            (elements, r.mean_us)
        })
        .collect();
    if pir_points.len() >= 3 {
        let (slope, _, r2) = linear_fit(&pir_points);
        println!("pir server cost: {:.3} us per element, r2 = {r2:.4}", slope);
    }
    Ok(())
}
