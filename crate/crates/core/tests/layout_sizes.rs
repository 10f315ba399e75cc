//! The fused overlay holds up across store counts, not only the 12-store
//! layout the acceptance suite uses.

use mallnav::fixture::{generate, FixtureParams};
use mallnav::pipeline::run_images;

#[test]
fn overlap_across_store_counts() {
    for n_stores in [4, 7, 14, 20, 30] {
        for seed in 1..=3 {
            let f = generate(&FixtureParams { seed, n_stores, ..Default::default() }).unwrap();
            let run = run_images(&f.config, f.map.clone(), &f.directory, &f.sidecar).unwrap();
            let pct = run.overlap.overlap_percent;
            assert!(pct >= 95.0, "n_stores {n_stores} seed {seed}: overlap {pct:.2}%");
            assert_eq!(run.map.directory.len(), n_stores as usize, "n_stores {n_stores} seed {seed}");
        }
    }
}
