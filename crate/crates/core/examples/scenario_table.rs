//! Prints the audit of every simulated scenario for the first few seeds.
//!
//! ```text
//! cargo run --release --example scenario_table -- 3
//! ```

use std::time::Instant;

use regfair::audit::AuditConfig;
use regfair::synthetic::scenario_table;

fn main() -> regfair::Result<()> {
    let seeds: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);
    let config = AuditConfig::default();
    println!(
        "{:<15} {:>5} {:>5} {:>5} {:>8} {:>8} {:>8} {:>7} {:>7} {:>7}",
        "scenario", "ba_s", "ba_y", "ba_ys", "r_ind", "r_sep", "r_suf", "m_ind", "m_sep", "m_suf"
    );
    let opt = |o: Option<f64>| o.unwrap_or(f64::NAN);
    for seed in 0..seeds {
        let start = Instant::now();
        for (kind, audit) in scenario_table(seed, &config)? {
            let r = audit.report;
            println!(
                "{:<15} {:>5.2} {:>5.2} {:>5.2} {:>8.3} {:>8.3} {:>8.3} {:>7.3} {:>7.3} {:>7.3}",
                kind.name(),
                r.balanced_accuracy_s,
                r.balanced_accuracy_y,
                r.balanced_accuracy_ys,
                opt(r.ratio_ind),
                opt(r.ratio_sep),
                opt(r.ratio_suf),
                opt(r.nmi_ind),
                opt(r.nmi_sep),
                opt(r.nmi_suf)
            );
        }
        eprintln!("seed {seed}: {:.1?}", start.elapsed());
    }
    Ok(())
}
