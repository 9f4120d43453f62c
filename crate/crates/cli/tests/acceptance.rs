//! Acceptance suite: one pass/fail line per criterion at its pinned tolerance.

use std::process::ExitCode;
use std::time::Instant;

use steinerlab::harness::acceptance::{run_all_with, Scale};
use steinerlab::sim::SimConfig;

fn main() -> ExitCode {
    // `cargo test -- --list` and filters should not trigger the full run.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let scale = if std::env::var_os("STEINERLAB_SMOKE").is_some() { Scale::smoke() } else { Scale::full() };
    let start = Instant::now();
    println!("running acceptance criteria");
    let reports = run_all_with(&scale, &SimConfig::default(), |r| println!("{r}"));
    let failed: Vec<u8> = reports.iter().filter(|r| !r.pass).map(|r| r.id).collect();
    println!(
        "acceptance: {} passed, {} failed {:?} in {:.1}s",
        reports.len() - failed.len(),
        failed.len(),
        failed,
        start.elapsed().as_secs_f64()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
