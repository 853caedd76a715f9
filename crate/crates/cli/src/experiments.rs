//! One function per named experiment. Each writes its tables and plots
//! through [`Output`] and returns the scalar findings for `results.json`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64 as C64;
use phasediff::diffusion::{check_diffusion_step, step_count};
use phasediff::effective::{perturbation_shift, zero_point_constant};
use phasediff::evolution::{fit_decay_rate, write_trace_csv};
use phasediff::io::{read_config_field, read_phase_field, write_phase_field};
use phasediff::physical::{friction_from_ratio, physical_report, PhysicalEnvironment, ELECTRON_MASS, LAMB_A_OVER_B};
use phasediff::stochastic::write_summary_json;
use phasediff::{
    apply_h_approx, apply_h_integral, config_density, diffusion_spectrum, evolve_full, fast_slow_decompose, lift_to_phase,
    mc_wavefunction, phase_density, solve_schrodinger_traced, ApproxTerms, ConfigWaveFunction, DiffusionPropagator,
    FullPropagator, HOperator, ModelParams, PhaseGrid, PhaseWaveFunction, Projector,
};
use serde_json::{json, Map, Value};

use crate::config::{Config, ExperimentKind, InitialState, PhysicalConfig, TimeConfig};
use crate::error::CliError;
use crate::svg::{heatmap, line_plot, Series};

pub type Results = Map<String, Value>;

/// Artifact directory that remembers what it wrote.
pub struct Output {
    dir: PathBuf,
    plots: bool,
    files: Vec<String>,
}

impl Output {
    pub fn new(dir: &Path, plots: bool) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            plots,
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn svg(&mut self, name: &str, make: impl FnOnce() -> String) -> Result<(), CliError> {
        if self.plots {
            self.write(name, make())?;
        }
        Ok(())
    }

    fn phase_field(&mut self, stem: &str, phi: &PhaseWaveFunction, hbar: f64) -> Result<(), CliError> {
        write_phase_field(&self.dir.join(stem), phi, hbar)?;
        self.files.push(format!("{stem}.bin"));
        self.files.push(format!("{stem}.json"));
        Ok(())
    }
}

fn invalid(path: &str, message: impl Into<String>) -> CliError {
    CliError::ConfigInvalid {
        path: path.into(),
        message: message.into(),
    }
}

fn grid(cfg: &Config) -> Result<PhaseGrid, CliError> {
    let spec = cfg.grid.ok_or_else(|| invalid("grid", "missing"))?;
    Ok(PhaseGrid::new(spec, cfg.params.hbar)?)
}

fn time(cfg: &Config) -> Result<&TimeConfig, CliError> {
    cfg.time.as_ref().ok_or_else(|| invalid("time", "missing"))
}

fn initial(cfg: &Config) -> Result<&InitialState, CliError> {
    cfg.experiment.initial.as_ref().ok_or_else(|| invalid("experiment.initial", "missing"))
}

/// Uniform steps covering `[0, t]`, at most `dt` long and within the diffusion step bound.
fn steps_for(t: f64, dt: f64, params: &ModelParams) -> Result<(usize, f64), CliError> {
    check_diffusion_step(dt, params)?;
    let n = step_count(t, dt);
    Ok((n, if n == 0 { dt } else { t / n as f64 }))
}

fn phase_initial(cfg: &Config, g: &PhaseGrid) -> Result<PhaseWaveFunction, CliError> {
    let params = &cfg.params;
    match initial(cfg)? {
        InitialState::PhaseGaussian { x, p, std_x, std_p, kx, kp } => Ok(PhaseWaveFunction::from_fn(*g, |xx, pp| {
            let e = -(xx - x).powi(2) / (2.0 * std_x * std_x) - (pp - p).powi(2) / (2.0 * std_p * std_p);
            C64::from_polar(e.exp(), kx * xx + kp * pp)
        })?),
        InitialState::PhaseField { path } => {
            let phi = read_phase_field(path)?;
            if phi.grid() != g {
                return Err(invalid("experiment.initial.path", "field grid differs from the grid section"));
            }
            Ok(phi)
        }
        InitialState::GaussianPacket { .. } | InitialState::ConfigField { .. } => {
            Ok(lift_to_phase(&config_initial(cfg, g)?, g, params)?)
        }
    }
}

fn config_initial(cfg: &Config, g: &PhaseGrid) -> Result<ConfigWaveFunction, CliError> {
    let axis = *g.x_axis();
    match initial(cfg)? {
        InitialState::GaussianPacket { center, sigma, momentum } => {
            Ok(ConfigWaveFunction::gaussian(axis, *center, *sigma, *momentum, cfg.params.hbar)?)
        }
        InitialState::ConfigField { path } => {
            let psi = read_config_field(path)?;
            if psi.axis() != &axis {
                return Err(invalid("experiment.initial.path", "field axis differs from the grid section"));
            }
            Ok(psi)
        }
        InitialState::PhaseGaussian { .. } | InitialState::PhaseField { .. } => {
            let phi = phase_initial(cfg, g)?;
            Ok(Projector::new(g, &cfg.params)?.project_unchecked(&phi)?)
        }
    }
}

pub fn run(cfg: &Config, out: &mut Output) -> Result<Results, CliError> {
    match cfg.kind() {
        ExperimentKind::Relax => relax(cfg, out),
        ExperimentKind::Spectrum => spectrum(cfg, out),
        ExperimentKind::Evolve => evolve(cfg, out),
        ExperimentKind::Fastslow => fastslow(cfg, out),
        ExperimentKind::SchrodingerCompare => schrodinger_compare(cfg, out),
        ExperimentKind::MontecarloCompare => montecarlo_compare(cfg, out),
        ExperimentKind::Densities => densities(cfg, out),
        ExperimentKind::Params => params(cfg, out),
    }
}

fn intensity(phi: &PhaseWaveFunction) -> Array2<f64> {
    phi.values().mapv(|z| z.norm_sqr())
}

fn extents(g: &PhaseGrid) -> ((f64, f64), (f64, f64)) {
    ((g.x_min(), g.x_max()), (g.p_min(), g.p_max()))
}

/// `relax.csv`: `t,residual,norm`, with the residual `‖φ(t) − lift(project(φ₀))‖/‖φ₀‖`.
fn relax(cfg: &Config, out: &mut Output) -> Result<Results, CliError> {
    let g = grid(cfg)?;
    let tc = time(cfg)?;
    let params = cfg.params;
    let phi0 = phase_initial(cfg, &g)?;
    let target = Projector::new(&g, &params)?.stationary_part(&phi0)?;
    let (steps, h) = steps_for(tc.t, tc.dt, &params)?;
    let prop = DiffusionPropagator::new(&g, &params, h)?;
    let n0 = phi0.norm();
    let mut v = phi0.values().clone();
    let (mut ts, mut rs, mut ns) = (Vec::new(), Vec::new(), Vec::new());
    let mut step = 0;
    loop {
        let phi = PhaseWaveFunction::new(g, v.clone())?;
        ts.push(step as f64 * h);
        rs.push(phi.distance(&target) / n0);
        ns.push(phi.norm());
        if step >= steps {
            break;
        }
        let n = tc.sample_every.min(steps - step);
        prop.advance(&mut v, n);
        step += n;
    }
    // skip the first two relaxation times and samples near the discretization floor
    let start = 2.0 * params.hbar / params.relaxation_rate().max(f64::MIN_POSITIVE);
    let floor = (10.0 * rs.iter().copied().fold(f64::INFINITY, f64::min)).max(1e-11 * rs[0]);
    let (ft, fr): (Vec<f64>, Vec<f64>) = ts.iter().zip(&rs).filter(|(t, r)| **t >= start && **r > floor).map(|(t, r)| (*t, *r)).unzip();
    let fitted = fit_decay_rate(&ft, &fr);
    let gap = diffusion_spectrum(&params, 0.0, 3).ok().and_then(|s| s.gap());

    let mut csv = String::from("t,residual,norm\n");
    for i in 0..ts.len() {
        writeln!(csv, "{},{},{}", ts[i], rs[i], ns[i]).unwrap();
    }
    out.write("relax.csv", csv)?;
    out.svg("relax.svg", || {
        let pts = ts.iter().copied().zip(rs.iter().copied()).collect();
        line_plot("relaxation onto the stationary subspace", "t", "residual", &[Series { label: "residual", points: pts }], true)
    })?;
    let phi = PhaseWaveFunction::new(g, v)?;
    if cfg.output.fields {
        out.phase_field("final", &phi, params.hbar)?;
    }
    let mut r = Results::new();
    r.insert("fitted_decay_rate".into(), json!(fitted));
    r.insert("spectral_gap".into(), json!(gap));
    r.insert("relaxation_rate_ab_over_hbar".into(), json!(params.relaxation_rate()));
    r.insert("fit_points".into(), json!(ft.len()));
    r.insert("initial_residual".into(), json!(rs[0]));
    r.insert("final_residual".into(), json!(rs[rs.len() - 1]));
    r.insert("final_norm".into(), json!(phi.norm()));
    Ok(r)
}

/// `spectrum.csv`: `k_mode,level_index,eigenvalue`.
fn spectrum(cfg: &Config, out: &mut Output) -> Result<Results, CliError> {
    let params = cfg.params;
    let modes = if cfg.experiment.k_modes.is_empty() { vec![0.0] } else { cfg.experiment.k_modes.clone() };
    let levels = cfg.experiment.levels.unwrap_or(6);
    let spectra = modes.iter().map(|k| diffusion_spectrum(&params, *k, levels)).collect::<phasediff::Result<Vec<_>>>()?;
    let mut csv = Vec::new();
    phasediff::diffusion::write_spectrum_csv(&spectra, &mut csv)?;
    out.write("spectrum.csv", csv)?;
    out.svg("spectrum.svg", || {
        let labels: Vec<String> = spectra.iter().map(|s| format!("k = {}", s.k_mode)).collect();
        let series: Vec<Series> = spectra
            .iter()
            .zip(&labels)
            .map(|(s, l)| Series {
                label: l,
                points: s.eigenvalues.iter().enumerate().map(|(i, e)| (i as f64, *e)).collect(),
            })
            .collect();
        line_plot("diffusion generator spectrum", "level", "eigenvalue", &series, false)
    })?;
    let mut r = Results::new();
    r.insert("relaxation_rate_ab_over_hbar".into(), json!(params.relaxation_rate()));
    r.insert(
        "modes".into(),
        Value::Array(
            spectra
                .iter()
                .map(|s| {
                    json!({
                        "k_mode": s.k_mode,
                        "gap": s.gap(),
                        "eigenvalues": s.eigenvalues,
                        "ground_center": s.ground_center,
                        "ground_width": s.ground_width,
                        "convergence_shift": s.convergence_shift,
                    })
                })
                .collect(),
        ),
    );
    Ok(r)
}

/// `evolve.csv`: `t,norm,residual`.
fn evolve(cfg: &Config, out: &mut Output) -> Result<Results, CliError> {
    let g = grid(cfg)?;
    let tc = time(cfg)?;
    let params = cfg.params;
    let spec = cfg.hamiltonian_spec()?;
    let phi0 = phase_initial(cfg, &g)?;
    let projector = Projector::new(&g, &params)?;
    let (steps, h) = steps_for(tc.t, tc.dt, &params)?;
    let prop = FullPropagator::new(&g, &spec, &params, h)?;
    let mut v = phi0.values().clone();
    let mut csv = String::from("t,norm,residual\n");
    let mut trace = Vec::new();
    let mut step = 0;
    loop {
        let phi = PhaseWaveFunction::new(g, v.clone())?;
        let (t, norm, res) = (step as f64 * h, phi.norm(), projector.residual(&phi)?);
        writeln!(csv, "{t},{norm},{res}").unwrap();
        trace.push((t, norm, res));
        if step >= steps {
            break;
        }
        let n = tc.sample_every.min(steps - step);
        prop.advance(&mut v, n);
        step += n;
    }
    let phi = PhaseWaveFunction::new(g, v)?;
    out.write("evolve.csv", csv)?;
    let (xr, pr) = extents(&g);
    out.svg("final_intensity.svg", || heatmap("|phi|^2 at the final time", xr, pr, "x", "p", &intensity(&phi)))?;
    out.svg("residual.svg", || {
        let pts = trace.iter().map(|s| (s.0, s.2)).collect();
        line_plot("distance from the stationary subspace", "t", "residual", &[Series { label: "residual", points: pts }], true)
    })?;
    if cfg.output.fields {
        out.phase_field("final", &phi, params.hbar)?;
    }
    let psi = projector.project_unchecked(&phi)?;
    let last = trace[trace.len() - 1];
    let mut r = Results::new();
    r.insert("steps".into(), json!(steps));
    r.insert("step".into(), json!(h));
    r.insert("final_norm".into(), json!(last.1));
    r.insert("final_residual".into(), json!(last.2));
    r.insert("final_boundary_ratio".into(), json!(phi.boundary_ratio()));
    r.insert("projected_norm".into(), json!(psi.norm()));
    r.insert("projected_mean_position".into(), json!(psi.mean_position(0.0)));
    Ok(r)
}

/// `trace.csv`: `t,norm,residual,slow_error`.
fn fastslow(cfg: &Config, out: &mut Output) -> Result<Results, CliError> {
    let g = grid(cfg)?;
    let tc = time(cfg)?;
    let params = cfg.params;
    let spec = cfg.hamiltonian_spec()?;
    let phi0 = phase_initial(cfg, &g)?;
    let trace = fast_slow_decompose(&phi0, &spec, &params, tc.t, tc.dt, tc.sample_every)?;
    let mut csv = Vec::new();
    write_trace_csv(&trace, &mut csv)?;
    out.write("trace.csv", csv)?;
    out.svg("trace.svg", || {
        let res = trace.times.iter().copied().zip(trace.residuals.iter().copied()).collect();
        let slow = trace.times.iter().zip(&trace.slow_errors).filter_map(|(t, e)| e.map(|e| (*t, e))).collect();
        line_plot(
            "fast relaxation and slow tracking",
            "t",
            "error",
            &[Series { label: "residual", points: res }, Series { label: "slow error", points: slow }],
            true,
        )
    })?;
    let mut r = Results::new();
    r.insert("fast_decay_rate".into(), json!(trace.fast_decay_rate));
    r.insert("relaxation_gap_2ab_over_hbar".into(), json!(2.0 * params.relaxation_rate()));
    r.insert("slow_deviation".into(), json!(trace.slow_deviation));
    r.insert("reference_start".into(), json!(trace.reference_start));
    r.insert("time_residual_below_1e-2".into(), json!(trace.time_below(1e-2)));
    r.insert("min_residual".into(), json!(trace.min_residual()));
    r.insert("final_norm".into(), json!(trace.norms.last()));
    Ok(r)
}

/// `compare.csv`: `t,norm_approx,norm_integral,distance,energy_approx,energy_integral`.
fn schrodinger_compare(cfg: &Config, out: &mut Output) -> Result<Results, CliError> {
    let g = grid(cfg)?;
    let tc = time(cfg)?;
    let spec = cfg.hamiltonian_spec()?;
    let (inv_mass, potential) = spec.as_separable()?;
    if inv_mass <= 0.0 {
        return Err(invalid("hamiltonian", "schrodinger-compare needs a kinetic term"));
    }
    let params = ModelParams {
        mass: 1.0 / inv_mass,
        ..cfg.params
    };
    let psi0 = config_initial(cfg, &g)?;
    let h_int = apply_h_integral(&psi0, &spec, &params)?;
    let h_apx = apply_h_approx(&psi0, potential, &params)?;
    let operator_gap = h_int.distance(&h_apx) / psi0.norm();
    let approx = HOperator::Approx {
        potential: potential.clone(),
        terms: ApproxTerms::ALL,
    };
    let integral = HOperator::Integral { spec: spec.clone() };
    let (sa, qa) = solve_schrodinger_traced(&psi0, &approx, tc.t, tc.dt, &params, tc.sample_every)?;
    let (si, qi) = solve_schrodinger_traced(&psi0, &integral, tc.t, tc.dt, &params, tc.sample_every)?;
    let mut csv = String::from("t,norm_approx,norm_integral,distance,energy_approx,energy_integral\n");
    let mut dist = Vec::new();
    for k in 0..qa.len().min(qi.len()) {
        let d = sa[k].phase_aligned_distance(&si[k]) / sa[k].norm();
        dist.push((qa[k].t, d));
        writeln!(csv, "{},{},{},{},{},{}", qa[k].t, qa[k].norm, qi[k].norm, d, qa[k].energy, qi[k].energy).unwrap();
    }
    out.write("compare.csv", csv)?;
    out.svg("compare.svg", || {
        line_plot("closed-form vs integral effective Hamiltonian", "t", "relative distance", &[Series { label: "distance", points: dist.clone() }], false)
    })?;
    let mut r = Results::new();
    r.insert("operator_gap".into(), json!(operator_gap));
    r.insert("max_distance".into(), json!(dist.iter().map(|d| d.1).fold(0.0, f64::max)));
    r.insert("final_distance".into(), json!(dist.last().map(|d| d.1)));
    r.insert("perturbation_shift".into(), json!(perturbation_shift(&psi0, potential, &params)?));
    r.insert("zero_point_constant".into(), json!(zero_point_constant(&params)));
    r.insert("final_norm_approx".into(), json!(qa.last().map(|q| q.norm)));
    r.insert("final_norm_integral".into(), json!(qi.last().map(|q| q.norm)));
    Ok(r)
}

/// `bins.csv`: one row per grid node with the estimate, the PDE value and the z-score.
fn montecarlo_compare(cfg: &Config, out: &mut Output) -> Result<Results, CliError> {
    let g = grid(cfg)?;
    let tc = time(cfg)?;
    let sc = cfg.stochastic.as_ref().ok_or_else(|| invalid("stochastic", "missing"))?;
    let params = cfg.params;
    let spec = cfg.hamiltonian_spec()?;
    let phi0 = phase_initial(cfg, &g)?;
    let pde = evolve_full(&phi0, &spec, &params, tc.t, tc.dt)?;
    let mc = mc_wavefunction(&phi0, &spec, &params, tc.t, sc.dt, sc.paths, sc.seed, &g)?;
    let mut csv = String::from("ix,ip,x,p,count,mc_re,mc_im,pde_re,pde_im,stderr,ess,z\n");
    let (mut occupied, mut within) = (0usize, 0usize);
    let mut zmap = Array2::zeros(g.shape());
    for ((i, j), c) in mc.counts.indexed_iter() {
        let (m, p) = (mc.estimate.values()[[i, j]], pde.values()[[i, j]]);
        let se = mc.stderr[[i, j]];
        let z = if *c > 0 && se > 0.0 { (m - p).norm() / se } else { f64::NAN };
        if *c > 0 {
            occupied += 1;
            if (m - p).norm() <= 3.0 * se {
                within += 1;
            }
            zmap[[i, j]] = z;
        }
        writeln!(csv, "{i},{j},{},{},{c},{},{},{},{},{se},{},{z}", g.x(i), g.p(j), m.re, m.im, p.re, p.im, mc.ess[[i, j]]).unwrap();
    }
    out.write("bins.csv", csv)?;
    let mut summary = Vec::new();
    write_summary_json(&mc.summary(), &mut summary)?;
    summary.push(b'\n');
    out.write("mc_summary.json", summary)?;
    let (xr, pr) = extents(&g);
    out.svg("zscore.svg", || heatmap("|MC - PDE| / stderr", xr, pr, "x", "p", &zmap))?;
    let mut r = Results::new();
    r.insert("paths".into(), json!(mc.paths));
    r.insert("seed".into(), json!(sc.seed));
    r.insert("occupied_bins".into(), json!(occupied));
    r.insert("bins_within_3_stderr".into(), json!(within));
    r.insert("fraction_within_3_stderr".into(), json!(within as f64 / occupied.max(1) as f64));
    r.insert("min_significant_ess".into(), json!(mc.min_significant_ess()));
    r.insert("mean_stderr".into(), json!(mc.mean_stderr()));
    r.insert("escaped".into(), json!(mc.escaped));
    r.insert("weight_modulus".into(), json!((params.normalizer_rate() * tc.t).exp()));
    Ok(r)
}

/// `density.csv`: `x,p,rho`; `marginal.csv`: `x,marginal,smoothed`.
fn densities(cfg: &Config, out: &mut Output) -> Result<Results, CliError> {
    let g = grid(cfg)?;
    let params = cfg.params;
    let psi = config_initial(cfg, &g)?;
    let rho = phase_density(&psi, &g, &params, true)?;
    let smoothed = config_density(&psi, &params, true)?;
    let marginal = rho.marginal_x();
    let mut csv = String::from("x,p,rho\n");
    for ((i, j), v) in rho.values.indexed_iter() {
        writeln!(csv, "{},{},{v}", g.x(i), g.p(j)).unwrap();
    }
    out.write("density.csv", csv)?;
    let mut csv = String::from("x,marginal,smoothed\n");
    for i in 0..g.nx() {
        writeln!(csv, "{},{},{}", g.x(i), marginal[i], smoothed[i]).unwrap();
    }
    out.write("marginal.csv", csv)?;
    let (xr, pr) = extents(&g);
    out.svg("density.svg", || heatmap("phase-space density", xr, pr, "x", "p", &rho.values))?;
    out.svg("marginal.svg", || {
        let xs = g.xs();
        let a = xs.iter().copied().zip(marginal.iter().copied()).collect();
        let b = xs.iter().copied().zip(smoothed.iter().copied()).collect();
        line_plot("position density", "x", "density", &[Series { label: "marginal", points: a }, Series { label: "smoothed |psi|^2", points: b }], false)
    })?;
    let dev = marginal.iter().zip(&smoothed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mut r = Results::new();
    r.insert("total".into(), json!(rho.total()));
    r.insert("min".into(), json!(rho.min()));
    r.insert("max_marginal_deviation".into(), json!(dev));
    r.insert("smoothing_variance".into(), json!(params.smoothing_variance()?));
    Ok(r)
}

fn params(cfg: &Config, out: &mut Output) -> Result<Results, CliError> {
    let pc = cfg.experiment.physical.clone().unwrap_or(PhysicalConfig {
        temperature: 1.0,
        mass: None,
        gamma: None,
        a_over_b: None,
    });
    let mass = pc.mass.unwrap_or(ELECTRON_MASS);
    let gamma = match pc.gamma {
        Some(g) => g,
        None => friction_from_ratio(pc.a_over_b.unwrap_or(LAMB_A_OVER_B), mass)?,
    };
    let env = PhysicalEnvironment::new(pc.temperature, gamma, mass)?;
    let report = physical_report(&env)?;
    let value = serde_json::to_value(&report).map_err(|e| phasediff::Error::Format(e.to_string()))?;
    let mut text = serde_json::to_string_pretty(&value).map_err(|e| phasediff::Error::Format(e.to_string()))?;
    text.push('\n');
    out.write("physical.json", text)?;
    match value {
        Value::Object(m) => Ok(m),
        _ => unreachable!("report serializes to an object"),
    }
}
