use std::fs;
use std::path::Path;
use std::sync::Arc;

use bathyflow::config::{OutputFormat, RunConfig};
use bathyflow::dynamics::{
    default_probe_step, integrate, linearize, poincare_section, rotation_frequency, section_csv,
    stability_probe, Frame, FrozenWaveField, Linearization, StreamField,
};
use bathyflow::fit::power_law_exponent;
use bathyflow::hamiltonian::chain::{equilibria, normal_form_chain, Equilibrium, FrozenHamiltonian};
use bathyflow::hamiltonian::{assemble_model, NfReport};
use bathyflow::hierarchy::io::{
    layers_from_rows, parse_layers_csv, write_layers_csv, ConvergenceReport,
};
use bathyflow::hierarchy::{
    residual_samples, run_hierarchy, solve_modes, Convergence, ExpansionState, LayerContext,
};
use bathyflow::mode_ode::{bound_certificate, BoundReport};
use bathyflow::model::validate_with;
use bathyflow::{Error, Result};
use serde::Serialize;

pub enum Outcome {
    Success,
    VerifyFailed,
}

const LAYERS_FILE: &str = "layers.csv";
const CONVERGENCE_FILE: &str = "convergence.json";
const CONFIG_FILE: &str = "config.json";
const VERIFY_FILE: &str = "verify.json";
const NF_FILE: &str = "nf.json";
const TRACE_FILE: &str = "trace.json";
const SUMMARY_FILE: &str = "summary.txt";

fn wants(cfg: &RunConfig, f: OutputFormat) -> bool {
    cfg.outputs.formats.contains(&f)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, text)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

fn build_state(cfg: &RunConfig, mu: Option<f64>, enforce: bool) -> Result<ExpansionState> {
    let mut channel = cfg.channel;
    if let Some(mu) = mu {
        channel.mu = mu;
    }
    let checked = validate_with(&channel, &cfg.wave, enforce)?;
    let bathy = cfg.build_bathymetry()?;
    run_hierarchy(&checked, &bathy, cfg.run.j_max, cfg.run.m_max, cfg.run.tolerances)
}

pub fn solve(cfg: &RunConfig) -> Result<Outcome> {
    let state = build_state(cfg, None, cfg.run.enforce_threshold)?;
    let dir = &cfg.outputs.directory;
    // the layer dump is what `verify` reads back, so it is always written
    write(dir, LAYERS_FILE, &write_layers_csv(&state.layers))?;
    write(dir, CONFIG_FILE, &cfg.to_json()?)?;
    if wants(cfg, OutputFormat::Json) {
        write(dir, CONVERGENCE_FILE, &ConvergenceReport::from_state(&state).to_json()?)?;
    }
    let c = &state.convergence;
    println!(
        "solve: {} layers, eps = {:?}, L(mu) = {:.3e}, threshold {}",
        state.layers.len(),
        c.eps,
        c.l_mu,
        if c.threshold_ok { "met" } else { "not met" }
    );
    Ok(Outcome::Success)
}

#[derive(Debug, Serialize)]
struct Check {
    name: &'static str,
    pass: bool,
    /// Diagnostic checks are reported but do not fail the run.
    required: bool,
    value: Option<f64>,
    threshold: Option<f64>,
    detail: String,
}

#[derive(Debug, Serialize)]
struct Certificate {
    order: usize,
    m: i32,
    n: i32,
    #[serde(flatten)]
    report: BoundReport,
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    pass: bool,
    checks: Vec<Check>,
    certificates: Vec<Certificate>,
    residual_sweep: Vec<(f64, f64)>,
}

/// Largest relative difference between two sets of layers; a layer missing
/// from one side counts as empty.
fn max_diff(a: &ExpansionState, b: &ExpansionState) -> (f64, bool) {
    let empty = Default::default();
    let mut worst: f64 = 0.0;
    let mut same_modes = true;
    for j in 0..a.layers.len().max(b.layers.len()) {
        let ca_all = a.layers.get(j).map_or(&empty, |l| &l.coefficients);
        let cb_all = b.layers.get(j).map_or(&empty, |l| &l.coefficients);
        same_modes &= ca_all.keys().eq(cb_all.keys());
        for (k, ca) in ca_all {
            let Some(cb) = cb_all.get(k) else { continue };
            let scale = ca.sup_norm().max(f64::MIN_POSITIVE);
            let dv = ca.values().iter().zip(cb.values());
            let dd = ca.derivs().unwrap_or(&[]).iter().zip(cb.derivs().unwrap_or(&[]));
            for (x, y) in dv.chain(dd) {
                worst = worst.max((x - y).norm() / scale);
            }
        }
    }
    (worst, same_modes)
}

/// Deterministic points spread over `[0, x_max) x [-5, 5)`.
fn boundary_points(x_max: f64, count: usize) -> Vec<(f64, f64)> {
    let (a1, a2) = (0.754_877_666_246_692_7, 0.569_840_290_998_053_3);
    (1..=count)
        .map(|k| {
            let k = k as f64;
            (x_max * (k * a1).fract(), 10.0 * (k * a2).fract() - 5.0)
        })
        .collect()
}

pub fn verify(cfg: &RunConfig) -> Result<Outcome> {
    let dir = &cfg.outputs.directory;
    let text = fs::read_to_string(dir.join(LAYERS_FILE)).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e} (run `solve` first)", dir.join(LAYERS_FILE).display()),
        ))
    })?;
    let fresh = build_state(cfg, None, cfg.run.enforce_threshold)?;
    let layers = layers_from_rows(&parse_layers_csv(&text)?, &fresh.grid, cfg.channel.nu)?;
    let eps: Vec<f64> = layers.iter().map(|l| l.eps).collect();
    let ratios: Vec<f64> = (2..eps.len())
        .map(|j| if eps[j - 1] > 0.0 { eps[j] / eps[j - 1] } else { 0.0 })
        .collect();
    let stored = ExpansionState {
        layers,
        convergence: Convergence {
            l_measured: ratios.iter().cloned().fold(0.0, f64::max),
            ratios: ratios.clone(),
            eps: eps.clone(),
            l_mu: fresh.checked.l_mu,
            threshold_ok: fresh.checked.threshold_ok,
            stopped_early: false,
            max_cross_check: 0.0,
        },
        ..fresh.clone()
    };
    let mut checks = Vec::new();

    let sym = stored.layers.iter().map(|l| l.symmetry_violation()).fold(0.0, f64::max);
    checks.push(Check {
        name: "symmetry",
        pass: sym <= 1e-12,
        required: true,
        value: Some(sym),
        threshold: Some(1e-12),
        detail: "b_(-m,n) = -b_(m,n) and b_(m,-n) = -conj(b_(m,n)) on the stored layers".into(),
    });

    let cross = fresh.convergence.max_cross_check;
    checks.push(Check {
        name: "cross_check",
        pass: cross <= 1e-10,
        required: true,
        value: Some(cross),
        threshold: Some(1e-10),
        detail: "independent solve of the n = -kappa family against the mirrored n = kappa family".into(),
    });

    let (diff, same) = max_diff(&stored, &fresh);
    checks.push(Check {
        name: "reproducible",
        pass: same && diff <= 1e-13,
        required: true,
        value: Some(diff),
        threshold: Some(1e-13),
        detail: if same {
            "stored layers against a fresh solve, relative to each coefficient's sup norm".into()
        } else {
            "stored mode set differs from a fresh solve".into()
        },
    });

    let order = stored.order();
    let mut boundary: f64 = 0.0;
    for (x, t) in boundary_points(stored.grid.x_max(), 1000) {
        for y in [0.0, 2.0 * std::f64::consts::PI] {
            boundary = boundary.max(stored.gradient(x, y, t, order)?.psi_x.abs());
        }
    }
    checks.push(Check {
        name: "boundary",
        pass: boundary <= 1e-10,
        required: true,
        value: Some(boundary),
        threshold: Some(1e-10),
        detail: "|psi_x| on y = 0 and y = 2 pi at 1000 (x, t) points".into(),
    });

    let samples = residual_samples(&stored.grid, 40, 8);
    let residual = stored.pde_residual(&samples, order)?;
    checks.push(Check {
        name: "pde_residual",
        pass: residual.is_finite(),
        required: false,
        value: Some(residual),
        threshold: None,
        detail: format!("sup residual of the order-{order} truncation at {} samples", samples.len()),
    });

    let mut sweep = Vec::new();
    if cfg.run.mu_sweep.len() >= 2 {
        for &mu in &cfg.run.mu_sweep {
            let s = build_state(cfg, Some(mu), false)?;
            sweep.push((mu, s.pde_residual(&residual_samples(&s.grid, 40, 8), s.order())?));
        }
        let target = (cfg.run.j_max + 1) as f64;
        let trivial = sweep.iter().all(|(_, r)| *r <= 1e-13);
        let (mus, res): (Vec<f64>, Vec<f64>) = sweep.iter().cloned().unzip();
        let exponent = if trivial { None } else { power_law_exponent(&mus, &res) };
        checks.push(Check {
            name: "residual_scaling",
            pass: trivial || exponent.is_some_and(|e| (e - target).abs() <= 0.3),
            required: true,
            value: exponent,
            threshold: Some(target),
            detail: if trivial {
                "residual vanishes at every amplitude".into()
            } else {
                format!("fitted exponent of the residual in mu, expected {target} +/- 0.3")
            },
        });
    }

    let nu = cfg.channel.nu;
    let min_rate = stored.decay_rates().into_iter().map(|(_, _, r)| r).reduce(f64::min);
    checks.push(Check {
        name: "decay",
        pass: min_rate.is_none_or(|r| r >= 0.5 * nu - 0.05),
        required: true,
        value: min_rate,
        threshold: Some(0.5 * nu - 0.05),
        detail: "smallest fitted decay rate over layers j >= 1".into(),
    });

    if stored.checked.threshold_ok {
        let contracting = ratios.iter().all(|r| *r < 1.0);
        let geometric = (1..eps.len()).all(|j| eps[j] < eps[0] * 0.9f64.powi(j as i32));
        checks.push(Check {
            name: "contraction",
            pass: contracting && geometric,
            required: true,
            value: Some(stored.convergence.l_measured),
            threshold: Some(1.0),
            detail: "eps_(j+1)/eps_j < 1 and eps_j < 0.9^j eps_0".into(),
        });
    }

    let ctx = LayerContext {
        checked: &fresh.checked,
        bathy: &fresh.bathy,
        modes: fresh.modes,
        tol: cfg.run.tolerances,
    };
    let mut certificates = Vec::new();
    for prev in &fresh.layers[..fresh.layers.len().saturating_sub(1)] {
        for s in solve_modes(prev, &ctx)? {
            certificates.push(Certificate {
                order: prev.order + 1,
                m: s.mode.0,
                n: s.mode.1,
                report: bound_certificate(&s.solution, s.rhs_bound, nu, cfg.channel.rho),
            });
        }
    }
    let held = certificates.iter().filter(|c| c.report.holds).count();
    checks.push(Check {
        name: "bound_certificates",
        pass: held == certificates.len(),
        required: false,
        value: Some(held as f64),
        threshold: Some(certificates.len() as f64),
        detail: "modes whose solution lies under the a-priori value and derivative bounds".into(),
    });

    let pass = checks.iter().all(|c| c.pass || !c.required);
    for c in &checks {
        println!(
            "{:<20} {}{}",
            c.name,
            if c.pass { "pass" } else { "FAIL" },
            c.value.map_or(String::new(), |v| format!("  ({v:.3e})"))
        );
    }
    let report = VerifyReport {
        pass,
        checks,
        certificates,
        residual_sweep: sweep,
    };
    write(dir, VERIFY_FILE, &json(&report)?)?;
    Ok(if pass { Outcome::Success } else { Outcome::VerifyFailed })
}

pub fn nf(cfg: &RunConfig) -> Result<Outcome> {
    let checked = cfg.checked(None)?;
    let chain = normal_form_chain(&checked, cfg.run.nf_degree)?;
    let report = NfReport::new(&chain);
    write(&cfg.outputs.directory, NF_FILE, &report.to_json()?)?;
    println!(
        "nf: omega = {:.12}, sigma*lambda = {:.12}, validity radius = {}",
        report.omega,
        report.sigma * report.lambda_ell,
        report.validity_radius
    );
    Ok(Outcome::Success)
}

#[derive(Debug, Serialize)]
struct OrbitSummary {
    offset: (f64, f64),
    frozen_frequency: f64,
    predicted_frequency: f64,
    frozen_energy_drift: f64,
    stream_truncated: bool,
    stream_final: (f64, f64),
}

#[derive(Debug, Serialize)]
struct ProbeSummary {
    initial_action: f64,
    initial_angle: f64,
    t_start: f64,
    duration: f64,
    step: f64,
    max_excursion: f64,
    /// Excursion over the first tenth of the window.
    early_excursion: f64,
    /// `max_excursion / early_excursion`; near 1 when the excursion saturates.
    saturation_ratio: f64,
    section_points: usize,
}

#[derive(Debug, Serialize)]
struct TraceReport {
    omega: f64,
    equilibria: Vec<Equilibrium>,
    elliptic_linearization: Linearization,
    orbits: Vec<OrbitSummary>,
    probe: ProbeSummary,
}

pub fn trace(cfg: &RunConfig) -> Result<Outcome> {
    let state = Arc::new(build_state(cfg, None, cfg.run.enforce_threshold)?);
    let checked = &state.checked;
    let chain = normal_form_chain(checked, cfg.run.nf_degree)?;
    let model = assemble_model(chain, Some(state.clone()));
    let chain = &model.chain;
    let dir = &cfg.outputs.directory;
    let csv = wants(cfg, OutputFormat::Csv);
    let tr = &cfg.run.trace;

    let frozen = FrozenWaveField(FrozenHamiltonian::new(&checked.wave, checked.sigma));
    let centre = (0.0, chain.p_e);
    let lin = linearize(&frozen, centre, 0.0)?;
    let stream = StreamField {
        state: &state,
        order: state.order(),
        frame: Frame::Galilean,
    };
    let t0 = model.earliest_time();
    let mut orbits = Vec::new();
    for (k, &(dq, dp)) in tr.offsets.iter().enumerate() {
        let start = (centre.0 + dq, centre.1 + dp);
        let f = integrate(&frozen, start, 0.0, tr.t_end, tr.step)?;
        let s = integrate(&stream, start, t0, t0 + tr.t_end, tr.step)?;
        if csv {
            write(dir, &format!("frozen_{k}.csv"), &f.to_csv(("q", "p")))?;
            write(dir, &format!("stream_{k}.csv"), &s.to_csv(("q", "p")))?;
        }
        orbits.push(OrbitSummary {
            offset: (dq, dp),
            frozen_frequency: rotation_frequency(&f, centre),
            predicted_frequency: chain.orbit_frequency(start.0, start.1),
            frozen_energy_drift: f.conserved_drift(),
            stream_truncated: s.truncated,
            stream_final: s.last(),
        });
    }

    let i0 = tr.probe_action_fraction * model.g_interval.1;
    let h = tr.probe_step.unwrap_or_else(|| default_probe_step(&model));
    let probe = stability_probe(&model, i0, tr.probe_phi0, t0, tr.probe_duration, h)?;
    let cut = t0 + 0.1 * tr.probe_duration;
    let early = probe
        .trajectory
        .times
        .iter()
        .zip(&probe.trajectory.states)
        .take_while(|(t, _)| **t <= cut)
        .map(|(_, z)| (z.1 - i0).abs())
        .fold(0.0, f64::max);
    let section = poincare_section(&probe.trajectory);
    if csv {
        write(dir, "probe.csv", &probe.trajectory.to_csv(("phi", "I")))?;
        write(dir, "probe_section.csv", &section_csv(&section))?;
    }
    let report = TraceReport {
        omega: chain.omega(),
        equilibria: equilibria(&checked.wave, checked.sigma)?.to_vec(),
        elliptic_linearization: lin,
        orbits,
        probe: ProbeSummary {
            initial_action: i0,
            initial_angle: tr.probe_phi0,
            t_start: t0,
            duration: tr.probe_duration,
            step: h,
            max_excursion: probe.max_excursion,
            early_excursion: early,
            saturation_ratio: if early > 0.0 { probe.max_excursion / early } else { 1.0 },
            section_points: section.len(),
        },
    };
    write(dir, TRACE_FILE, &json(&report)?)?;
    println!(
        "trace: probe excursion {:.3e} (first tenth {:.3e}), {} section points",
        report.probe.max_excursion, early, report.probe.section_points
    );
    Ok(Outcome::Success)
}

fn read_json(dir: &Path, name: &str) -> Option<serde_json::Value> {
    let text = fs::read_to_string(dir.join(name)).ok()?;
    serde_json::from_str(&text).ok()
}

pub fn report(dir: &Path) -> Result<Outcome> {
    let mut out = String::new();
    let mut found = false;
    if let Some(v) = read_json(dir, CONVERGENCE_FILE) {
        found = true;
        out += &format!(
            "hierarchy: eps {} ratios {} L(mu) {} threshold_ok {}\n",
            v["eps"], v["ratios"], v["l_mu"], v["threshold_ok"]
        );
    }
    if let Some(v) = read_json(dir, VERIFY_FILE) {
        found = true;
        out += &format!("verify: pass {}\n", v["pass"]);
        for c in v["checks"].as_array().into_iter().flatten() {
            out += &format!("  {} pass {} value {}\n", c["name"], c["pass"], c["value"]);
        }
    }
    if let Some(v) = read_json(dir, NF_FILE) {
        found = true;
        out += &format!(
            "normal form: omega {} alpha {} validity radius {}\n",
            v["omega"], v["alpha"], v["validity_radius"]
        );
    }
    if let Some(v) = read_json(dir, TRACE_FILE) {
        found = true;
        let p = &v["probe"];
        out += &format!(
            "probe: excursion {} early {} saturation ratio {}\n",
            p["max_excursion"], p["early_excursion"], p["saturation_ratio"]
        );
    }
    if !found {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("no reports in {}", dir.display()),
        )));
    }
    print!("{out}");
    write(dir, SUMMARY_FILE, &out)?;
    Ok(Outcome::Success)
}
