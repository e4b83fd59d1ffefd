//! Manual calibration probe for the synthetic generator defaults. Ignored
//! in normal runs; execute with
//! `cargo test -p paynet-core --test calibration -- --ignored --nocapture`.

use paynet_core::config::RunConfig;
use paynet_core::dataset::SpecKind;
use paynet_core::pipeline;

#[test]
#[ignore]
fn signal_recovery_across_seeds() {
    for seed in 1..=5u64 {
        let mut cfg = RunConfig::default();
        cfg.seed = seed;
        let start = std::time::Instant::now();
        let out = pipeline::run(&cfg, None).unwrap();
        let elapsed = start.elapsed();

        let r2 = |spec: SpecKind| -> f64 {
            out.report
                .specs
                .iter()
                .find(|s| s.spec == spec)
                .and_then(|s| s.pooled.r2)
                .unwrap_or(f64::NAN)
        };
        println!(
            "seed {seed}: rows={} elapsed={:.1}s trad={:.3} net={:.3} comb={:.3} gap={:+.1}pp",
            out.report.meta.rows,
            elapsed.as_secs_f64(),
            r2(SpecKind::Traditional),
            r2(SpecKind::Network),
            r2(SpecKind::Combined),
            (r2(SpecKind::Combined) - r2(SpecKind::Traditional)) * 100.0
        );
        for row in &out.report.periods.rows {
            println!(
                "    {:28} n={:6} improvement={}",
                row.name,
                row.n,
                row.improvement_pp
                    .map(|p| format!("{p:+.1}pp"))
                    .unwrap_or_else(|| "-".into())
            );
        }
    }
}
