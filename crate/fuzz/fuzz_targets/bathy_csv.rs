#![no_main]
use std::sync::Arc;

use bathyflow::bathymetry::{parse_table_csv, BathymetrySpec};
use bathyflow::sampled::Grid;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(rows) = parse_table_csv(data) {
        // a small grid keeps resampling cheap
        let grid = Arc::new(Grid::new(10.0, 64).unwrap());
        if let Ok(spec) = BathymetrySpec::from_table(&rows, grid) {
            assert!(spec.symmetry_violation() == 0.0);
        }
    }
});
