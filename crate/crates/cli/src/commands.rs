use std::f64::consts::PI;

use log::{info, warn};
use serde_json::{json, Value};
use thermlab::analysis::{
    antitherm_prediction, branching_ratios, entropy_surface, gibbs_populations, ssb_limit_scan, von_neumann_entropy,
    EntropyUnit, LimitOrder, LimitReport,
};
use thermlab::dynamics::{asymptotic_state, evolve_adaptive_at, evolve_exact, evolve_fixed, uniform_times, Trajectory};
use thermlab::generator::{
    bloch_diff_report, build_bloch_matrix_transcribed, build_liouvillian_with_sign, derive_bloch_matrix, BlochMatrix,
    Liouvillian,
};
use thermlab::micro::{build_bath, evolve_schrodinger, reduced_density, InterferenceSign, SingleExcitationState};
use thermlab::model::{validate_params, DecayRates, ParamsFile, SystemParams};
use thermlab::VERSION;

use crate::config::{Method, MicroOptions, RunConfig, ScanOrder};
use crate::error::CliError;
use crate::output::{artifact, num, state_json, state_values, Csv, STATE_COLUMNS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub struct Output {
    pub primary: String,
    /// Extra JSON document written next to the primary artifact.
    pub summary: Option<String>,
}

impl Output {
    fn single(primary: String) -> Self {
        Self { primary, summary: None }
    }
}

pub struct Context<'a> {
    pub command: &'a str,
    pub config: &'a RunConfig,
    pub format: Format,
}

impl Context<'_> {
    fn config_json(&self) -> Value {
        serde_json::to_value(self.config).expect("config serializes")
    }

    fn csv(&self, columns: &[&str]) -> Csv {
        Csv::new(VERSION, self.command, &self.config_json(), columns)
    }

    fn json(&self, result: Value) -> String {
        artifact(VERSION, self.command, &self.config_json(), result)
    }

    fn params(&self) -> Result<SystemParams, CliError> {
        Ok(validate_params(SystemParams::from(&self.config.params))?)
    }

    fn liouvillian(&self) -> Result<Liouvillian, CliError> {
        Ok(build_liouvillian_with_sign(&self.params()?, self.config.sign.unwrap_or_default()))
    }
}

fn complex_json(z: thermlab::Complex64) -> Value {
    json!([z.re, z.im])
}

fn trajectory_rows(t: &Trajectory) -> Vec<Vec<f64>> {
    t.times
        .iter()
        .zip(&t.states)
        .map(|(time, rho)| std::iter::once(*time).chain(state_values(rho)).collect())
        .collect()
}

fn time_columns() -> Vec<&'static str> {
    std::iter::once("t").chain(STATE_COLUMNS).collect()
}

pub fn evolve(ctx: &Context) -> Result<Output, CliError> {
    let c = ctx.config;
    let l = ctx.liouvillian()?;
    let rho0 = c.initial_density()?;
    let t_final = c.t_final.unwrap_or_else(|| 10.0 / l.params.min_positive_rate().unwrap_or(1.0));
    let samples = c.samples.unwrap_or(201).max(2);
    let times = if t_final == 0.0 { vec![0.0] } else { uniform_times(t_final, samples) };
    let method = c.method.unwrap_or(Method::Adaptive);
    let traj = match method {
        Method::Adaptive => evolve_adaptive_at(&l, &rho0, &times, c.rtol.unwrap_or(1e-8), c.atol.unwrap_or(1e-12))?,
        Method::Expm => evolve_exact(&l, &rho0, &times)?,
        Method::Rk4 => {
            let dt = c.dt.unwrap_or_else(|| 0.02 / l.max_abs().max(f64::MIN_POSITIVE));
            let full = evolve_fixed(&l, &rho0, t_final, dt)?;
            let stride = (full.times.len() / samples).max(1);
            let last = full.times.len() - 1;
            let keep: Vec<usize> = (0..full.times.len()).filter(|k| k % stride == 0 || *k == last).collect();
            Trajectory {
                times: keep.iter().map(|&k| full.times[k]).collect(),
                states: keep.iter().map(|&k| full.states[k]).collect(),
                stats: full.stats,
            }
        }
    };
    let s = traj.stats;
    info!("evolve: {} samples, {} steps", traj.times.len(), s.steps);
    let stats = json!({
        "steps": s.steps,
        "rejected_steps": s.rejected_steps,
        "evaluations": s.evaluations,
        "max_trace_drift": s.max_trace_drift,
        "max_hermiticity_drift": s.max_hermiticity_drift,
        "min_eigenvalue": s.min_eigenvalue,
    });
    Ok(Output::single(match ctx.format {
        Format::Json => ctx.json(json!({ "columns": time_columns(), "rows": trajectory_rows(&traj), "stats": stats })),
        Format::Csv => {
            let mut csv = ctx.csv(&time_columns());
            csv.comment(&format!("stats: {stats}"));
            for row in trajectory_rows(&traj) {
                csv.row(&row.iter().map(|x| num(*x)).collect::<Vec<_>>());
            }
            csv.finish()
        }
    }))
}

pub fn steady(ctx: &Context) -> Result<Output, CliError> {
    let l = ctx.liouvillian()?;
    let res = asymptotic_state(&l, &ctx.config.initial_density()?)?;
    let state = *res.limit_state().expect("every classification carries a limit state");
    let (nats, bits) = (von_neumann_entropy(&state, EntropyUnit::Nats), von_neumann_entropy(&state, EntropyUnit::Bits));
    let p = &l.params;
    Ok(Output::single(match ctx.format {
        Format::Json => ctx.json(json!({
            "kind": res.kind,
            "populations": state.populations(),
            "ground_coherence": complex_json(state.ground_coherence()),
            "state": state_json(&state),
            "oscillation_frequencies": res.oscillation_frequencies,
            "entropy_nats": nats,
            "entropy_bits": bits,
            "gibbs_populations": gibbs_populations(p.beta, p.omega1, p.omega2),
        })),
        Format::Csv => {
            let columns: Vec<&str> = std::iter::once("kind").chain(STATE_COLUMNS).chain(["entropy_nats", "entropy_bits"]).collect();
            let mut csv = ctx.csv(&columns);
            let kind = serde_json::to_value(res.kind).expect("kind serializes");
            let mut row = vec![kind.as_str().unwrap_or_default().to_string()];
            row.extend(state_values(&state).iter().map(|x| num(*x)));
            row.extend([num(nats), num(bits)]);
            csv.row(&row);
            csv.finish()
        }
    }))
}

pub fn ssb_scan(ctx: &Context) -> Result<Output, CliError> {
    let c = ctx.config;
    let template = ctx.params()?;
    let orders = match c.order.unwrap_or(ScanOrder::Both) {
        ScanOrder::TemperatureFirst => vec![LimitOrder::TemperatureFirst],
        ScanOrder::SplittingFirst => vec![LimitOrder::SplittingFirst],
        ScanOrder::Both => vec![LimitOrder::TemperatureFirst, LimitOrder::SplittingFirst],
    };
    let reports: Vec<LimitReport> = orders
        .iter()
        .map(|o| ssb_limit_scan(&template, *o, c.n_points.unwrap_or(40), c.shrink.unwrap_or(0.5)))
        .collect::<Result<_, _>>()?;
    Ok(Output::single(match ctx.format {
        Format::Json => ctx.json(json!({ "reports": reports })),
        Format::Csv => {
            let columns =
                ["order", "delta", "temperature", "p_e", "p_g1", "p_g2", "entropy_nats", "kind", "inner_limit"];
            let mut csv = ctx.csv(&columns);
            for r in &reports {
                let order = serde_json::to_value(r.order).expect("order serializes");
                let order = order.as_str().unwrap_or_default();
                let e = r.extrapolated;
                csv.comment(&format!(
                    "{order} limit: p = ({}, {}, {}), S = {} nats = {} bits, final change {}",
                    num(e.populations[0]),
                    num(e.populations[1]),
                    num(e.populations[2]),
                    num(e.entropy_nats),
                    num(e.entropy_bits),
                    num(r.final_change)
                ));
                for pt in &r.sequence {
                    let kind = serde_json::to_value(pt.kind).expect("kind serializes");
                    csv.row(&[
                        order.to_string(),
                        num(pt.delta),
                        num(pt.temperature),
                        num(pt.populations[0]),
                        num(pt.populations[1]),
                        num(pt.populations[2]),
                        num(pt.entropy_nats),
                        kind.as_str().unwrap_or_default().to_string(),
                        pt.inner_limit.to_string(),
                    ]);
                }
            }
            csv.finish()
        }
    }))
}

pub fn entropy_surface_cmd(ctx: &Context) -> Result<Output, CliError> {
    let c = ctx.config;
    let template = ctx.params()?;
    let deltas = c.delta_grid.as_ref().map_or_else(|| grid(0.0, 1.0, 30), |g| g.points());
    let temps = c.temperature_grid.as_ref().map_or_else(|| grid(0.0, 2.0, 30), |g| g.points());
    let surface = entropy_surface(&deltas, &temps, &template)?;
    let ln2 = std::f64::consts::LN_2;
    Ok(Output::single(match ctx.format {
        Format::Json => {
            let bits: Vec<Vec<f64>> = surface.entropy.iter().map(|row| row.iter().map(|s| s / ln2).collect()).collect();
            ctx.json(json!({
                "delta_grid": surface.delta_grid,
                "temperature_grid": surface.temperature_grid,
                "entropy_nats": surface.entropy,
                "entropy_bits": bits,
                "status": surface.status,
            }))
        }
        Format::Csv => {
            let mut csv = ctx.csv(&["delta", "temperature", "entropy_nats", "entropy_bits", "status"]);
            for (d, t, s, status) in surface.cells() {
                csv.row(&[num(d), num(t), num(s), num(s / ln2), status.label().to_string()]);
            }
            csv.finish()
        }
    }))
}

fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    crate::config::Grid::Range { start: a, stop: b, count: n }.points()
}

pub fn antitherm(ctx: &Context) -> Result<Output, CliError> {
    let p = &ctx.config.params;
    let rho0 = ctx.config.initial_density()?;
    let prediction = antitherm_prediction(&rho0, p.gamma1, p.gamma2, p.gamma12, p.gamma21)?;
    // cross-check against the dynamics of the degenerate zero-temperature system
    let lambda = validate_params(SystemParams::new(
        p.omega1,
        p.omega1,
        DecayRates::lambda(p.gamma1, p.gamma2, p.gamma12, p.gamma21),
        f64::INFINITY,
    ))?;
    let res = asymptotic_state(&build_liouvillian_with_sign(&lambda, ctx.config.sign.unwrap_or_default()), &rho0)?;
    let dynamics = *res.limit_state().expect("every classification carries a limit state");
    let gap = prediction.max_abs_diff(&dynamics);
    let purity = (prediction.matrix() * prediction.matrix()).trace().re;
    let branching = branching_ratios(p.gamma1, p.gamma2).ok();
    Ok(Output::single(match ctx.format {
        Format::Json => ctx.json(json!({
            "state": state_json(&prediction),
            "populations": prediction.populations(),
            "ground_coherence": complex_json(prediction.ground_coherence()),
            "purity": purity,
            "entropy_nats": von_neumann_entropy(&prediction, EntropyUnit::Nats),
            "branching_ratios": branching,
            "dynamics_kind": res.kind,
            "dynamics_state": state_json(&dynamics),
            "max_gap_to_dynamics": gap,
        })),
        Format::Csv => {
            let columns: Vec<&str> = std::iter::once("source").chain(STATE_COLUMNS).collect();
            let mut csv = ctx.csv(&columns);
            csv.comment(&format!("max gap to dynamics: {}", num(gap)));
            for (label, rho) in [("prediction", &prediction), ("dynamics", &dynamics)] {
                let mut row = vec![label.to_string()];
                row.extend(state_values(rho).iter().map(|x| num(*x)));
                csv.row(&row);
            }
            csv.finish()
        }
    }))
}

pub fn micro_compare(ctx: &Context) -> Result<Output, CliError> {
    let c = ctx.config;
    let p = &c.params;
    let params = validate_params(SystemParams::from(p))?;
    if !params.beta.is_infinite() || params.gamma3 != 0.0 {
        return Err(CliError::Config("micro-compare needs temperature \"zero\" and gamma3 = 0".into()));
    }
    let opts = c.micro.clone().unwrap_or(MicroOptions { modes: 256, bandwidth: None, sign: 1 });
    let sign = InterferenceSign::from_int(opts.sign)
        .ok_or_else(|| CliError::Config(format!("micro.sign must be 1, -1 or 0, got {}", opts.sign)))?;
    let gamma = p.gamma1.max(p.gamma2);
    let bandwidth = opts.bandwidth.unwrap_or(2.0 * PI * gamma / 0.01);
    let bath = build_bath(p.gamma1, p.gamma2, sign, opts.modes, bandwidth, 0.0)?;
    let rates = bath.implied_rates();
    if (rates.gamma12 - p.gamma12).abs() > 1e-9 || (rates.gamma12 - p.gamma21).abs() > 1e-9 {
        warn!("bath geometry fixes gamma12 = gamma21 = {}; configured values are ignored", rates.gamma12);
    }
    let window = (10.0 / gamma).min(0.5 * opts.modes as f64 / bandwidth);
    let t_final = c.t_final.unwrap_or(window);
    let times = if t_final == 0.0 { vec![0.0] } else { uniform_times(t_final, c.samples.unwrap_or(101).max(2)) };

    let ket = c.initial_ket()?;
    let psi0 = SingleExcitationState::from_atom(ket[0], [ket[1], ket[2]], opts.modes);
    let micro = evolve_schrodinger(&bath, &psi0, params.delta, t_final, &times)?;
    let lindblad_params = validate_params(SystemParams::new(
        params.omega1,
        params.omega2,
        DecayRates { gamma1: rates.gamma1, gamma2: rates.gamma2, gamma3: 0.0, gamma12: rates.gamma12, gamma21: rates.gamma12 },
        f64::INFINITY,
    ))?;
    let l = build_liouvillian_with_sign(&lindblad_params, c.sign.unwrap_or_default());
    let lindblad = evolve_exact(&l, &reduced_density(&psi0), &times)?;

    let mut columns = vec!["t".to_string()];
    for prefix in ["micro", "lindblad", "gap"] {
        columns.extend(STATE_COLUMNS.iter().map(|c| format!("{prefix}_{c}")));
    }
    let (mut max_gap, mut max_gap_window) = (0.0f64, 0.0f64);
    let mut rows = Vec::with_capacity(times.len());
    for ((t, m), lrho) in times.iter().zip(&micro.states).zip(&lindblad.states) {
        let (a, b) = (state_values(&reduced_density(m)), state_values(lrho));
        let gaps: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).collect();
        let g = gaps.iter().copied().fold(0.0, f64::max);
        max_gap = max_gap.max(g);
        if *t <= window {
            max_gap_window = max_gap_window.max(g);
        }
        rows.push(std::iter::once(*t).chain(a).chain(b).chain(gaps).collect::<Vec<f64>>());
    }
    let summary = json!({
        "modes": opts.modes,
        "bandwidth": bandwidth,
        "interference": sign,
        "implied_rates": rates,
        "coupling_ratio": gamma * 2.0 * PI / bandwidth,
        "recurrence_time": bath.recurrence_time(),
        "validity_window": window,
        "t_final": t_final,
        "max_gap": max_gap,
        "max_gap_within_window": max_gap_window,
        "max_norm_drift": micro.max_norm_drift,
    });
    let summary_doc = ctx.json(summary.clone());
    let column_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let primary = match ctx.format {
        Format::Json => ctx.json(json!({ "summary": summary, "columns": column_refs, "rows": rows })),
        Format::Csv => {
            let mut csv = ctx.csv(&column_refs);
            csv.comment(&format!("summary: {summary}"));
            for row in &rows {
                csv.row(&row.iter().map(|x| num(*x)).collect::<Vec<_>>());
            }
            csv.finish()
        }
    };
    Ok(Output { primary, summary: Some(summary_doc) })
}

pub fn validate(ctx: &Context) -> Result<Output, CliError> {
    let p = ctx.params()?;
    let resolved = ParamsFile::from(&p);
    let rates = p.channel_rates();
    let text = ctx.json(json!({
        "valid": true,
        "params": resolved,
        "delta": p.delta,
        "channel_rates": {
            "down": [rates.down1, rates.down2, rates.down3],
            "up": [rates.up1, rates.up2, rates.up3],
        },
    }));
    Ok(Output::single(text))
}

fn matrix_json(rows: usize, cols: usize, get: impl Fn(usize, usize) -> thermlab::Complex64) -> Value {
    json!({
        "re": (0..rows).map(|i| (0..cols).map(|j| get(i, j).re).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "im": (0..rows).map(|i| (0..cols).map(|j| get(i, j).im).collect::<Vec<_>>()).collect::<Vec<_>>(),
    })
}

fn bloch_json(m: &BlochMatrix) -> Value {
    let full = m.full();
    json!({ "provenance": m.provenance, "matrix": matrix_json(7, 7, |i, j| full[(i, j)]) })
}

fn eigen_json(values: &[thermlab::Complex64]) -> Value {
    values.iter().map(|z| complex_json(*z)).collect()
}

pub fn dump_generator(ctx: &Context) -> Result<Output, CliError> {
    let l = ctx.liouvillian()?;
    let sign = ctx.config.sign.unwrap_or_default();
    let derived = derive_bloch_matrix(&l)?;
    let transcribed = build_bloch_matrix_transcribed(&l.params);
    let report = bloch_diff_report(&l.params, sign);
    Ok(Output::single(match ctx.format {
        Format::Json => ctx.json(json!({
            "sign": sign,
            "liouvillian": matrix_json(9, 9, |i, j| l.matrix[(i, j)]),
            "liouvillian_eigenvalues": eigen_json(&l.eigenvalues()),
            "bloch_derived": bloch_json(&derived),
            "bloch_derived_eigenvalues": eigen_json(&derived.eigenvalues()),
            "bloch_transcribed": transcribed.as_ref().map(bloch_json).unwrap_or_else(|e| json!({ "error": e.to_string() })),
            "diff_report": report.as_ref().map(|r| json!(r)).unwrap_or_else(|e| json!({ "error": e.to_string() })),
        })),
        Format::Csv => {
            let mut csv = ctx.csv(&["matrix", "row", "col", "re", "im"]);
            let mut emit = |name: &str, rows: usize, cols: usize, get: &dyn Fn(usize, usize) -> thermlab::Complex64| {
                for i in 0..rows {
                    for j in 0..cols {
                        let z = get(i, j);
                        csv.row(&[name.to_string(), i.to_string(), j.to_string(), num(z.re), num(z.im)]);
                    }
                }
            };
            emit("liouvillian", 9, 9, &|i, j| l.matrix[(i, j)]);
            let md = derived.full();
            emit("bloch_derived", 7, 7, &|i, j| md[(i, j)]);
            if let Ok(t) = &transcribed {
                let mt = t.full();
                emit("bloch_transcribed", 7, 7, &|i, j| mt[(i, j)]);
            }
            csv.finish()
        }
    }))
}
