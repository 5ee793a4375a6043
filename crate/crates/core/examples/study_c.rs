//! Setting C study printing replication-averaged diagnostics per method.
//!
//! Usage: `cargo run --release -p parconf --example study_c -- [reps] [n] [seed]`

use parconf::sim::{run_study, Method, SimSetting, StudyConfig};

fn main() -> parconf::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let reps = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let n = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(150);
    let seed = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(2024);
    let setting = SimSetting::c(n)?;
    let start = std::time::Instant::now();
    let report = run_study(
        &setting,
        &Method::ALL,
        reps,
        &StudyConfig::with_alpha(0.1),
        seed,
    )?;
    println!("method  coverage  area    pred_err  skipped");
    for (m, s) in &report.methods {
        println!(
            "{:<7} {:.4}    {:.4}  {:.5}   {}",
            m.as_str(),
            s.mean_marginal_coverage,
            s.mean_area,
            s.mean_prediction_error,
            s.skipped
        );
    }
    eprintln!("{reps} replications in {:.1?}", start.elapsed());
    Ok(())
}
