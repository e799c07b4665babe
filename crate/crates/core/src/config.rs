//! JSON run configuration shared by the command-line front end.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bathymetry::{parse_table_csv, BathymetrySource, BathymetrySpec, BuiltinMode, TableRow};
use crate::error::{Error, Result};
use crate::mode_ode::OdeTolerances;
use crate::model::{validate_with, ChannelParams, CheckedConfig, WaveParams};
use crate::sampled::{default_extent, Grid, DEFAULT_GRID_POINTS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub channel: ChannelParams,
    pub wave: WaveParams,
    pub bathymetry: BathymetryConfig,
    #[serde(default)]
    pub run: RunBlock,
    #[serde(default)]
    pub outputs: OutputsBlock,
}

/// Bathymetry block; `table_file` names a CSV with columns `l, x, re, im`,
/// relative paths being taken from the configuration file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BathymetryConfig {
    Flat,
    Builtin { nu: f64, modes: Vec<BuiltinMode> },
    Table { rows: Vec<TableRow> },
    TableFile { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunBlock {
    pub j_max: usize,
    /// `None` selects the lossless mode set.
    pub m_max: Option<i32>,
    pub grid_points: usize,
    /// `None` selects `max(10, 20/nu)`.
    pub x_max: Option<f64>,
    pub tolerances: OdeTolerances,
    /// Refuse configurations whose `L(mu)` exceeds 1/2.
    pub enforce_threshold: bool,
    /// Amplitudes used by `verify` for the residual-scaling fit.
    pub mu_sweep: Vec<f64>,
    pub nf_degree: u32,
    pub trace: TraceBlock,
}

impl Default for RunBlock {
    fn default() -> Self {
        Self {
            j_max: 2,
            m_max: None,
            grid_points: DEFAULT_GRID_POINTS,
            x_max: None,
            tolerances: OdeTolerances::default(),
            enforce_threshold: true,
            mu_sweep: Vec::new(),
            nf_degree: 6,
            trace: TraceBlock::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceBlock {
    /// Streamline starting points `(q, p)` in the Galilean frame, offset
    /// from the elliptic equilibrium.
    pub offsets: Vec<(f64, f64)>,
    pub t_end: f64,
    pub step: f64,
    /// Initial action as a fraction of the upper end of `G`.
    pub probe_action_fraction: f64,
    pub probe_phi0: f64,
    pub probe_duration: f64,
    /// `None` selects `1e-3 * 2 pi / |omega|`.
    pub probe_step: Option<f64>,
}

impl Default for TraceBlock {
    fn default() -> Self {
        Self {
            offsets: vec![(0.05, 0.0), (0.1, 0.0), (0.2, 0.0)],
            t_end: 20.0,
            step: 0.01,
            probe_action_fraction: 0.5,
            probe_phi0: 0.0,
            probe_duration: 100.0,
            probe_step: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputsBlock {
    pub directory: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputsBlock {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec![OutputFormat::Json, OutputFormat::Csv],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
}

impl RunConfig {
    /// Parses and checks the structural invariants; table files are not read.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Reads a configuration file and inlines any bathymetry table file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_json(&text)?;
        cfg.resolve_files(path.parent().unwrap_or(Path::new(".")))?;
        Ok(cfg)
    }

    /// Replaces a `table_file` block with its parsed rows.
    pub fn resolve_files(&mut self, base: &Path) -> Result<()> {
        if let BathymetryConfig::TableFile { path } = &self.bathymetry {
            let full = if path.is_absolute() { path.clone() } else { base.join(path) };
            let text = std::fs::read_to_string(&full).map_err(|e| {
                Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", full.display())))
            })?;
            self.bathymetry = BathymetryConfig::Table {
                rows: parse_table_csv(&text)?,
            };
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn check(&self) -> Result<()> {
        let r = &self.run;
        let t = &r.tolerances;
        let bad = |msg: String| Err(Error::Parameter(msg));
        if !(t.tol_case > 0.0 && t.tol_tail > 0.0 && t.tol_grid > 0.0) {
            return bad(format!("tolerances must be positive: {t:?}"));
        }
        if r.grid_points < 16 {
            return bad(format!("grid_points = {} is below 16", r.grid_points));
        }
        if let Some(x) = r.x_max {
            if !(x > 0.0 && x.is_finite()) {
                return bad(format!("x_max = {x} must be positive"));
            }
        }
        if let Some(m) = r.m_max {
            if m < self.wave.m_tilde {
                return bad(format!("m_max = {m} drops the wave mode m~ = {}", self.wave.m_tilde));
            }
        }
        if r.j_max > 64 {
            return bad(format!("j_max = {} is above 64", r.j_max));
        }
        if r.mu_sweep.iter().any(|mu| !(*mu > 0.0 && mu.is_finite())) {
            return bad(format!("mu_sweep entries must be positive: {:?}", r.mu_sweep));
        }
        if r.nf_degree < 4 || r.nf_degree > 16 {
            return bad(format!("nf_degree = {} outside 4..=16", r.nf_degree));
        }
        let tr = &r.trace;
        if !(tr.step > 0.0 && tr.t_end > 0.0 && tr.probe_duration > 0.0) {
            return bad("trace step, t_end and probe_duration must be positive".into());
        }
        if tr.probe_step.is_some_and(|h| !(h > 0.0)) {
            return bad("probe_step must be positive".into());
        }
        if !(tr.probe_action_fraction > 0.0 && tr.probe_action_fraction < 1.0) {
            return bad("probe_action_fraction must lie in (0, 1)".into());
        }
        if let BathymetryConfig::Builtin { nu, .. } = &self.bathymetry {
            if !(*nu > 0.0) {
                return bad(format!("bathymetry nu = {nu} must be positive"));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        let x_max = self.run.x_max.unwrap_or_else(|| default_extent(self.channel.nu));
        Ok(Arc::new(Grid::new(x_max, self.run.grid_points)?))
    }

    pub fn bathymetry_source(&self) -> Result<BathymetrySource> {
        Ok(match &self.bathymetry {
            BathymetryConfig::Flat => BathymetrySource::Flat,
            BathymetryConfig::Builtin { nu, modes } => BathymetrySource::Builtin {
                nu: *nu,
                modes: modes.clone(),
            },
            BathymetryConfig::Table { rows } => BathymetrySource::Table { rows: rows.clone() },
            BathymetryConfig::TableFile { path } => {
                return Err(Error::Parameter(format!(
                    "table file {} was not resolved",
                    path.display()
                )))
            }
        })
    }

    pub fn build_bathymetry(&self) -> Result<BathymetrySpec> {
        BathymetrySpec::build(&self.bathymetry_source()?, self.grid()?)
    }

    /// Validates channel and wave, optionally with `mu` replaced.
    pub fn checked(&self, mu: Option<f64>) -> Result<CheckedConfig> {
        let mut channel = self.channel;
        if let Some(mu) = mu {
            channel.mu = mu;
        }
        validate_with(&channel, &self.wave, self.run.enforce_threshold)
    }
}
