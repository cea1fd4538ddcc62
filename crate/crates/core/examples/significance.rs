//! Paired significance tests and effect sizes, on raw numbers and on two
//! evaluation reports.
//!
//! `cargo run --example significance [REPORT_A REPORT_B]`

use std::path::PathBuf;

use promptrl::eval::{cohens_d, cohens_h, mcnemar, paired_t};
use promptrl::run::compare_files;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    if let [a, b] = args.as_slice() {
        println!("{}", compare_files(a, b)?.to_table());
        return Ok(());
    }

    // strict outcomes of two methods on the same 12 tasks
    let a = [true, true, false, true, true, true, false, true, true, false, true, true];
    let b = [true, false, false, false, true, false, false, true, false, false, true, false];
    let pairs: Vec<(bool, bool)> = a.iter().copied().zip(b.iter().copied()).collect();
    let m = mcnemar(&pairs);
    println!("mcnemar b={} c={} p={:.4} ({:?})", m.b, m.c, m.p_value, m.method);

    let rate = |xs: &[bool]| xs.iter().filter(|x| **x).count() as f64 / xs.len() as f64;
    println!("cohen's h = {:.4}", cohens_h(rate(&a), rate(&b))?);
    println!("cohen's h(0.5758, 0.4189) = {:.5}", cohens_h(0.5758, 0.4189)?);

    let diffs = [0.4, 0.1, 0.0, 0.5, 0.2, 0.6, -0.1, 0.0, 0.3, 0.0, 0.1, 0.7];
    let t = paired_t(&diffs)?;
    println!("paired t = {:.3} on {} df, p = {:.4}", t.t, t.df, t.p_value);
    println!("cohen's d = {:.3}", cohens_d(&diffs)?);
    Ok(())
}
