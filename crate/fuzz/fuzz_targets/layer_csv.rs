#![no_main]
use std::sync::Arc;

use bathyflow::hierarchy::io::{layers_from_rows, parse_layers_csv, write_layers_csv};
use bathyflow::sampled::Grid;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let Ok(rows) = parse_layers_csv(data) else { return };
    let grid = Arc::new(Grid::new(4.0, 5).unwrap());
    if let Ok(layers) = layers_from_rows(&rows, &grid, 1.0) {
        let again = parse_layers_csv(&write_layers_csv(&layers)).unwrap();
        let back = layers_from_rows(&again, &grid, 1.0).unwrap();
        for (a, b) in layers.iter().zip(&back) {
            assert_eq!(a.coefficients, b.coefficients);
        }
    }
});
