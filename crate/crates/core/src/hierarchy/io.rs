//! Layer dumps and convergence reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{layer_eps, Convergence, ExpansionState, Mode, SpectralLayer};
use crate::error::{Error, Result};
use crate::sampled::{Grid, SampledCoefficient};

pub const LAYER_CSV_HEADER: &str = "j,m,n,x,re_b,im_b,re_db,im_db";

/// One row of a layer dump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerRow {
    pub j: usize,
    pub m: i32,
    pub n: i32,
    pub x: f64,
    pub b: Complex64,
    pub db: Complex64,
}

/// Writes every stored coefficient of `layers` with 17 significant digits.
pub fn write_layers_csv(layers: &[SpectralLayer]) -> String {
    let mut out = String::from(LAYER_CSV_HEADER);
    out.push('\n');
    for layer in layers {
        for ((m, n), c) in &layer.coefficients {
            let grid = c.grid();
            let d = c.derivs().unwrap_or(&[]);
            for (i, v) in c.values().iter().enumerate() {
                let dv = d.get(i).copied().unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    layer.order,
                    m,
                    n,
                    grid.x(i),
                    v.re,
                    v.im,
                    dv.re,
                    dv.im
                );
            }
        }
    }
    out
}

/// Parses a layer dump, accepting an optional header and `#` comments.
pub fn parse_layers_csv(text: &str) -> Result<Vec<LayerRow>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("j,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 8 {
            return Err(Error::Parse(format!(
                "line {}: expected 8 fields, found {}",
                lineno + 1,
                fields.len()
            )));
        }
        let bad = |what: &str| Error::Parse(format!("line {}: bad {what}", lineno + 1));
        let float = |k: usize, what: &str| -> Result<f64> {
            let v: f64 = fields[k].parse().map_err(|_| bad(what))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(bad(what))
            }
        };
        rows.push(LayerRow {
            j: fields[0].parse().map_err(|_| bad("order"))?,
            m: fields[1].parse().map_err(|_| bad("m"))?,
            n: fields[2].parse().map_err(|_| bad("n"))?,
            x: float(3, "x")?,
            b: Complex64::new(float(4, "Re b")?, float(5, "Im b")?),
            db: Complex64::new(float(6, "Re b'")?, float(7, "Im b'")?),
        });
    }
    Ok(rows)
}

/// Groups parsed rows by `(j, (m, n))`, checking that `x` increases within
/// each group.
pub fn group_rows(rows: &[LayerRow]) -> Result<BTreeMap<(usize, Mode), Vec<LayerRow>>> {
    let mut out: BTreeMap<(usize, Mode), Vec<LayerRow>> = BTreeMap::new();
    for r in rows {
        let group = out.entry((r.j, (r.m, r.n))).or_default();
        if let Some(last) = group.last() {
            if r.x <= last.x {
                return Err(Error::Parse(format!(
                    "layer {} mode ({}, {}): x not increasing at {}",
                    r.j, r.m, r.n, r.x
                )));
            }
        }
        group.push(*r);
    }
    Ok(out)
}

/// Rebuilds layers `0 ..= max j` from a dump sampled on `grid`. Layers with
/// no rows come back empty; `eps` is recomputed and `cross_check` is zero.
pub fn layers_from_rows(rows: &[LayerRow], grid: &Arc<Grid>, nu: f64) -> Result<Vec<SpectralLayer>> {
    let groups = group_rows(rows)?;
    let count = groups.keys().map(|(j, _)| j + 1).max().unwrap_or(0);
    let mut layers: Vec<SpectralLayer> = (0..count)
        .map(|order| SpectralLayer {
            order,
            coefficients: BTreeMap::new(),
            eps: 0.0,
            cross_check: 0.0,
        })
        .collect();
    let tol = 1e-9 * grid.x_max();
    for ((j, mode), group) in groups {
        if group.len() != grid.len()
            || group.iter().enumerate().any(|(i, r)| (r.x - grid.x(i)).abs() > tol)
        {
            return Err(Error::Parse(format!(
                "layer {j} mode {mode:?}: samples do not match the {}-point grid on [0, {}]",
                grid.len(),
                grid.x_max()
            )));
        }
        let values = group.iter().map(|r| r.b).collect();
        let derivs = group.iter().map(|r| r.db).collect();
        let c = SampledCoefficient::new(grid.clone(), values, Some(derivs))?;
        layers[j].coefficients.insert(mode, c);
    }
    for layer in &mut layers {
        let weight = if layer.order == 0 { 0.0 } else { 0.5 * nu };
        layer.eps = layer_eps(layer, weight);
    }
    Ok(layers)
}

/// JSON convergence report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub sigma: f64,
    pub m_max: i32,
    pub grid_len: usize,
    pub x_max: f64,
    #[serde(flatten)]
    pub convergence: Convergence,
    /// Largest violation of the two coefficient symmetries over all layers.
    pub symmetry_violation: f64,
    /// Smallest fitted decay rate over layers `j >= 1`.
    pub min_decay_rate: Option<f64>,
    pub nu: f64,
}

impl ConvergenceReport {
    pub fn from_state(state: &ExpansionState) -> Self {
        let min_decay_rate = state
            .decay_rates()
            .into_iter()
            .map(|(_, _, r)| r)
            .reduce(f64::min);
        Self {
            sigma: state.checked.sigma,
            m_max: state.modes.m_max,
            grid_len: state.grid.len(),
            x_max: state.grid.x_max(),
            convergence: state.convergence.clone(),
            symmetry_violation: state
                .layers
                .iter()
                .map(|l| l.symmetry_violation())
                .fold(0.0, f64::max),
            min_decay_rate,
            nu: state.checked.channel.nu,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::zeroth_layer;
    use crate::model::WaveParams;
    use crate::sampled::Grid;
    use std::sync::Arc;

    #[test]
    fn layer_csv_round_trip() {
        let g = Arc::new(Grid::new(5.0, 11).unwrap());
        let w = WaveParams { kappa: 2, m_tilde: 1, amplitude: 1.3 };
        let layer = zeroth_layer(&w, g.clone());
        let text = write_layers_csv(std::slice::from_ref(&layer));
        let rows = parse_layers_csv(&text).unwrap();
        assert_eq!(rows.len(), 4 * 11);
        let groups = group_rows(&rows).unwrap();
        for ((j, key), rs) in groups {
            assert_eq!(j, 0);
            let c = layer.coefficients.get(&key).unwrap();
            for (i, r) in rs.iter().enumerate() {
                assert_eq!(r.b, c.values()[i]);
                assert_eq!(r.db, c.derivs().unwrap()[i]);
                assert_eq!(r.x, g.x(i));
            }
        }
    }

    #[test]
    fn malformed_rows() {
        assert!(parse_layers_csv("1,2,3").is_err());
        assert!(parse_layers_csv("0,1,2,x,0,0,0,0").is_err());
        assert!(parse_layers_csv("0,1,2,0.0,NaN,0,0,0").is_err());
        assert!(parse_layers_csv("# note\n\n").unwrap().is_empty());
        let dup = "0,1,2,1.0,0,0,0,0\n0,1,2,1.0,0,0,0,0\n";
        assert!(group_rows(&parse_layers_csv(dup).unwrap()).is_err());
    }

    #[test]
    fn layers_rebuild_from_rows() {
        let g = Arc::new(Grid::new(5.0, 11).unwrap());
        let w = WaveParams { kappa: 2, m_tilde: 1, amplitude: 1.3 };
        let layer = zeroth_layer(&w, g.clone());
        let rows = parse_layers_csv(&write_layers_csv(std::slice::from_ref(&layer))).unwrap();
        let back = layers_from_rows(&rows, &g, 1.0).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].coefficients, layer.coefficients);
        assert_eq!(back[0].eps, layer.eps);
        let other = Arc::new(Grid::new(6.0, 11).unwrap());
        assert!(matches!(layers_from_rows(&rows, &other, 1.0), Err(Error::Parse(_))));
    }
}
