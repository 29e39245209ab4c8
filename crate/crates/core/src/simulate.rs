//! Direct integration of the full system with section events, crossing
//! extraction, time-shift fits and the sweep and Monte Carlo drivers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::averaging::{measure_invariant, AveragedSolution, Averager, Leg};
use crate::coeffs::{bundle_with, loop_data, CoeffOptions, SeparatrixCoefficients};
use crate::jump::{
    boundary_predictors, invariant_jump, jump_slow, pseudo_phase, InvariantMode, PseudoPhase,
};
use crate::model::{build_system, Mode, ModelConfig, SectionConfig, SystemDef};
use crate::numeric::{brent_root, golden_min, ks_critical_1pct, ks_uniform, median};
use crate::ode::{Dop853, Options};
use crate::portrait::{find_saddle, periodic_orbit, run_orbit, DomainTag, SaddleChart, Section, Stop};
use crate::{Error, Result};

/// One crossing of a section half-ray in the flow direction.
#[derive(Debug, Clone, Serialize)]
pub struct SectionEvent {
    pub t: f64,
    pub section: Section,
    pub p: f64,
    pub q: f64,
    pub z: Vec<f64>,
    /// `E` at the event.
    pub h: f64,
    /// `∫₀^t E dt`
    pub int_e: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    TimeLimit,
    /// Enough inner-section rounds after the last positive `η` crossing.
    CaptureRounds,
    /// Far enough from the separatrix after capture.
    PostWindow,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRecord {
    pub model: String,
    pub eps: f64,
    /// `[p, q, z…]` at `t = 0`.
    pub init: Vec<f64>,
    /// `[t, p, q, z…]` at accepted steps when requested.
    pub samples: Vec<Vec<f64>>,
    pub events: Vec<SectionEvent>,
    pub termination: Termination,
    pub t_final: f64,
    pub y_final: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct EventSpec {
    /// Stop after this many inner-section events with `E < 0` following the
    /// last `η` event with `E > 0`.
    pub stop_after_inner: Option<usize>,
    /// Once an inner event has `|E|` above the first value, record this many
    /// more inner events, then stop.
    pub stop_beyond: Option<(f64, usize)>,
    pub record_steps: bool,
    pub options: Options,
}

impl Default for EventSpec {
    fn default() -> Self {
        EventSpec {
            stop_after_inner: None,
            stop_beyond: None,
            record_steps: false,
            options: Options::default(),
        }
    }
}

/// Saddle chart following the slow drift of `z`.
struct Tracker<'a> {
    sys: &'a SystemDef,
    chart: SaddleChart,
}

impl<'a> Tracker<'a> {
    fn new(sys: &'a SystemDef, z: &[f64]) -> Result<Self> {
        Ok(Tracker {
            sys,
            chart: find_saddle(sys, z, sys.saddle_seed)?,
        })
    }

    fn at(&self, z: &[f64]) -> Result<SaddleChart> {
        if z == self.chart.z.as_slice() {
            return Ok(self.chart.clone());
        }
        find_saddle(self.sys, z, self.chart.center())
    }

    fn update(&mut self, z: &[f64]) -> Result<()> {
        self.chart = self.at(z)?;
        Ok(())
    }
}

fn is_inner(s: Section) -> bool {
    matches!(s, Section::XiPlus | Section::XiMinus)
}

pub fn integrate_full(
    sys: &SystemDef,
    init: &[f64],
    eps: f64,
    t_end: f64,
    spec: &EventSpec,
) -> Result<TrajectoryRecord> {
    let k = sys.dim_z;
    let n = 3 + k;
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let (p, q, z) = (y[0], y[1], &y[2..2 + k]);
        let g = sys.grad(p, q, z)?;
        let f = sys.pert_with(&g, p, q, z, eps)?;
        dy[0] = -g.hq + eps * f.fp;
        dy[1] = g.hp + eps * f.fq;
        for j in 0..k {
            dy[2 + j] = eps * f.fz[j];
        }
        dy[2 + k] = g.h;
        Ok(())
    };
    let mut y0 = init.to_vec();
    y0.push(0.0);
    sys.phase_box.check(y0[0], y0[1], &y0[2..2 + k])?;
    let mut solver = Dop853::new(rhs, 0.0, &y0, 1.0, spec.options)?;
    let mut tracker = Tracker::new(sys, &y0[2..2 + k])?;
    let mut samples = Vec::new();
    if spec.record_steps {
        let mut s = vec![0.0];
        s.extend_from_slice(&y0[..2 + k]);
        samples.push(s);
    }
    let mut events: Vec<SectionEvent> = Vec::new();
    let mut int_hc = 0.0;
    let mut inner_since_eta = 0usize;
    let mut beyond: Option<usize> = None;
    let mut buf = vec![0.0; n];
    let termination = loop {
        if solver.t() >= t_end {
            break Termination::TimeLimit;
        }
        let hc_a = tracker.chart.h_c;
        let chart_a = tracker.chart.clone();
        solver.step(t_end)?;
        let (ta, tb) = (solver.t_prev(), solver.t());
        let ya = solver.y_prev().to_vec();
        let yb = solver.y().to_vec();
        tracker.update(&yb[2..2 + k])?;
        let hc_b = tracker.chart.h_c;
        if spec.record_steps {
            let mut s = vec![tb];
            s.extend_from_slice(&yb[..2 + k]);
            samples.push(s);
        }
        let mut found: Vec<SectionEvent> = Vec::new();
        for sec in Section::ALL {
            let ray = tracker.chart.ray(sec);
            let ga = tracker.chart.line_value(&ray, ya[0], ya[1]);
            let gb = tracker.chart.line_value(&ray, yb[0], yb[1]);
            if ga == 0.0 || ga.signum() == gb.signum() || (gb - ga).signum() != ray.crossing {
                continue;
            }
            let seg = solver.segment()?.clone();
            let chart = &tracker.chart;
            let mut tr = brent_root(
                |t| {
                    seg.eval_into(t, &mut buf);
                    Ok(chart.line_value(&ray, buf[0], buf[1]))
                },
                ta,
                tb,
                1e-13 * tb.abs().max(1.0),
            )?;
            seg.eval_into(tr, &mut buf);
            // Re-solve against the chart at the event's own z.
            let local = tracker.at(&buf[2..2 + k])?;
            let lray = local.ray(sec);
            let la = local.line_value(&lray, ya[0], ya[1]);
            let lb = local.line_value(&lray, yb[0], yb[1]);
            if la.signum() != lb.signum() && la != 0.0 {
                tr = brent_root(
                    |t| {
                        seg.eval_into(t, &mut buf);
                        Ok(local.line_value(&lray, buf[0], buf[1]))
                    },
                    ta,
                    tb,
                    1e-13 * tb.abs().max(1.0),
                )?;
                seg.eval_into(tr, &mut buf);
            }
            if local.projection(&lray, buf[0], buf[1]) <= 0.0 {
                continue;
            }
            let z = buf[2..2 + k].to_vec();
            let h = sys.hamiltonian(buf[0], buf[1], &z)? - local.h_c;
            let w = (tr - ta) / (tb - ta);
            let hc_t = hc_a + w * (hc_b - hc_a);
            let int_e = buf[2 + k] - (int_hc + 0.5 * (hc_a + hc_t) * (tr - ta));
            let dup = events
                .last()
                .is_some_and(|e| e.section == sec && tr - e.t < 1e-6);
            if !dup {
                found.push(SectionEvent {
                    t: tr,
                    section: sec,
                    p: buf[0],
                    q: buf[1],
                    z,
                    h,
                    int_e,
                });
            }
        }
        let _ = chart_a;
        int_hc += 0.5 * (hc_a + hc_b) * (tb - ta);
        found.sort_by(|a, b| a.t.total_cmp(&b.t));
        let mut stop = None;
        for e in found {
            if e.section.is_eta() && e.h > 0.0 {
                inner_since_eta = 0;
                beyond = None;
            } else if is_inner(e.section) && e.h < 0.0 {
                inner_since_eta += 1;
                if let Some((lim, extra)) = spec.stop_beyond {
                    if let Some(b) = beyond.as_mut() {
                        *b += 1;
                        if *b > extra {
                            stop = Some(Termination::PostWindow);
                        }
                    } else if -e.h > lim {
                        beyond = Some(0);
                        if extra == 0 {
                            stop = Some(Termination::PostWindow);
                        }
                    }
                }
                if spec.stop_after_inner.is_some_and(|m| inner_since_eta >= m) {
                    stop = Some(Termination::CaptureRounds);
                }
            }
            events.push(e);
        }
        if let Some(s) = stop {
            break s;
        }
    };
    let yf = solver.y();
    Ok(TrajectoryRecord {
        model: sys.name.clone(),
        eps,
        init: init.to_vec(),
        samples,
        events,
        termination,
        t_final: solver.t(),
        y_final: yf[..2 + k].to_vec(),
    })
}

/// Measured crossing data.
#[derive(Debug, Clone, Serialize)]
pub struct CrossingRecord {
    pub domain: DomainTag,
    /// Last `η` event with `E > 0`.
    pub t0: f64,
    pub h0: f64,
    pub z0: Vec<f64>,
    pub eta_section: Section,
    /// First inner event with `E < 0`.
    pub t0p: f64,
    pub h0p: f64,
    pub z0p: Vec<f64>,
    pub xi3: f64,
    pub xi_i: f64,
    /// Position of the final `η₊` crossing inside one `G₃` energy step:
    /// `ξ₃` for `G₂`, `θ₂₃ + ξ₃` for `G₁`.
    pub phase3: f64,
    pub valid: bool,
    pub ambiguous: bool,
    /// `h_{n+1} − h_n` between consecutive `η₊` events in `G₃`.
    pub h_steps: Vec<f64>,
}

pub fn extract_crossing(
    traj: &TrajectoryRecord,
    coeffs: &SeparatrixCoefficients,
    k_window: f64,
) -> Result<CrossingRecord> {
    let ev = &traj.events;
    let eps = traj.eps;
    let mut capture = None;
    for (idx, e) in ev.iter().enumerate() {
        if !(is_inner(e.section) && e.h < 0.0) {
            continue;
        }
        let prior_eta = ev[..idx].iter().rposition(|x| x.section.is_eta() && x.h > 0.0);
        if prior_eta.is_some() {
            capture = Some((idx, prior_eta.unwrap()));
            break;
        }
    }
    let (ci, ei) = capture.ok_or_else(|| Error::NotCaptured("no inner crossing with E < 0 after G3".into()))?;
    let cap = &ev[ci];
    let eta = &ev[ei];
    let domain = if cap.section == Section::XiPlus { DomainTag::G2 } else { DomainTag::G1 };
    let expected_eta = if domain == DomainTag::G2 { Section::EtaPlus } else { Section::EtaMinus };
    let rest = &ev[ci + 1..];
    let inner_after = rest.iter().filter(|e| e.section == cap.section && e.h < 0.0).count();
    let recross = rest.iter().any(|e| e.section.is_eta() && e.h > 0.0);
    let wrong_side = rest.iter().any(|e| is_inner(e.section) && e.h < 0.0 && e.section != cap.section);
    let ambiguous = recross || wrong_side || eta.section != expected_eta || inner_after < 2;
    let i = domain.index();
    let pp = pseudo_phase(eta.h, eps, coeffs, domain, k_window)?;
    let xi_i = -cap.h / (eps * coeffs.theta[i - 1]);
    let phase3 = if domain == DomainTag::G2 {
        pp.xi3
    } else {
        coeffs.theta_ratio(2) + pp.xi3
    };
    let plus: Vec<&SectionEvent> = ev[..=ei]
        .iter()
        .filter(|e| e.section == Section::EtaPlus && e.h > 0.0)
        .collect();
    let h_steps = plus.windows(2).map(|w| w[1].h - w[0].h).collect();
    Ok(CrossingRecord {
        domain,
        t0: eta.t,
        h0: eta.h,
        z0: eta.z.clone(),
        eta_section: eta.section,
        t0p: cap.t,
        h0p: cap.h,
        z0p: cap.z.clone(),
        xi3: pp.xi3,
        xi_i,
        phase3,
        valid: pp.valid && !ambiguous,
        ambiguous,
        h_steps,
    })
}

/// Time-averaged `E` over each round between consecutive events of one
/// section: `(t_mid, ⟨E⟩)`.
pub fn round_averages(traj: &TrajectoryRecord, section: Section, positive: bool) -> Vec<(f64, f64)> {
    let evs: Vec<&SectionEvent> = traj
        .events
        .iter()
        .filter(|e| e.section == section && (e.h > 0.0) == positive)
        .collect();
    evs.windows(2)
        .map(|w| {
            let dt = w[1].t - w[0].t;
            (0.5 * (w[0].t + w[1].t), (w[1].int_e - w[0].int_e) / dt)
        })
        .collect()
}

/// `δ` minimizing `Σ (h̄(εt_k + δ) − h_k)²` on one averaged leg.
pub fn fit_time_shift(rounds: &[(f64, f64)], leg: &Leg, eps: f64) -> Result<f64> {
    if rounds.len() < 5 {
        return Err(Error::MeasurementSuspect(format!(
            "{} rounds in the fit window (need 5)",
            rounds.len()
        )));
    }
    let guesses: Vec<f64> = rounds
        .iter()
        .map(|&(t, h)| leg.at_h(h).map(|y| y[0] - eps * t))
        .collect::<Result<_>>()?;
    let d0 = median(&guesses);
    let spread = guesses.iter().map(|g| (g - d0).abs()).fold(0.0, f64::max);
    let w = 4.0 * spread + 1e-6;
    let cost = |d: f64| -> Result<f64> {
        let mut s = 0.0;
        for &(t, h) in rounds {
            match leg.at_tau(eps * t + d) {
                Ok((hb, _)) => s += (hb - h).powi(2),
                Err(_) => return Ok(f64::MAX),
            }
        }
        Ok(s)
    };
    let (d, _) = golden_min(cost, d0 - w, d0 + w, 1e-10 * (1.0 + d0.abs()))?;
    if (d - (d0 - w)).abs() < 1e-3 * w || (d - (d0 + w)).abs() < 1e-3 * w {
        return Err(Error::MeasurementSuspect("time-shift minimum at bracket edge".into()));
    }
    Ok(d)
}

/// Period average of `S(E, z)` over the rounds following the given events.
pub fn period_averaged_area(
    sys: &SystemDef,
    traj: &TrajectoryRecord,
    domain: DomainTag,
    events: &[&SectionEvent],
) -> Result<f64> {
    let k = sys.dim_z;
    let samples = 16;
    let mut total = 0.0;
    let mut count = 0;
    for w in events.windows(2).take(3) {
        let (a, b) = (w[0], w[1]);
        let mut y0 = vec![a.p, a.q];
        y0.extend_from_slice(&a.z);
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| sys.flow(y, traj.eps, dy);
        let dt = b.t - a.t;
        let mut solver = Dop853::new(rhs, 0.0, &y0, 1.0, Options::default())?;
        let mut acc = 0.0;
        for j in 0..samples {
            let t = (j as f64 + 0.5) / samples as f64 * dt;
            while solver.t() < t {
                solver.step(dt)?;
            }
            let y = solver.segment()?.eval(t);
            let z = &y[2..2 + k];
            let chart = find_saddle(sys, z, sys.saddle_seed)?;
            let h = sys.hamiltonian(y[0], y[1], z)? - chart.h_c;
            acc += periodic_orbit(sys, &chart, domain, h, false)?.ints.pdq;
        }
        total += acc / samples as f64;
        count += 1;
    }
    if count == 0 {
        return Err(Error::MeasurementSuspect("no complete round for the cross-check".into()));
    }
    Ok(total / count as f64)
}

/// Point on the `G₃` orbit `E = h` at phase `phi`, counted from the
/// unrotated, unflipped `η₊` ray so that runs do not depend on the sections.
pub fn initial_point(sys: &SystemDef, z: &[f64], h: f64, phi: f64) -> Result<Vec<f64>> {
    let mut reference = sys.clone();
    reference.sections = SectionConfig::default();
    let sys = &reference;
    let chart = find_saddle(sys, z, sys.saddle_seed)?;
    let o = periodic_orbit(sys, &chart, DomainTag::G3, h, false)?;
    let frac = phi.rem_euclid(2.0 * std::f64::consts::PI) / (2.0 * std::f64::consts::PI);
    let x = if frac == 0.0 {
        o.start
    } else {
        run_orbit(sys, &chart, o.start, Stop::Time(frac * o.period), 2.0 * o.period, false)?.end
    };
    let mut y = vec![x[0], x[1]];
    y.extend_from_slice(z);
    Ok(y)
}

#[derive(Debug, Clone, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub model: ModelConfig,
    pub eps: f64,
    pub phases: usize,
    pub seed: u64,
    /// Initial `E` in `G₃`; defaults to `h_init_rounds · εΘ₃`.
    pub h_init: Option<f64>,
    pub h_init_rounds: f64,
    pub z_init: Vec<f64>,
    pub k_window: f64,
    pub tol_rel: f64,
    pub tol_abs: f64,
    /// Time-shift windows in units of `εΘ` per round.
    pub window: [f64; 2],
    /// Rounds used for each invariant measurement.
    pub invariant_rounds: usize,
}

impl SweepConfig {
    pub fn new(model: ModelConfig, eps: f64, phases: usize) -> Self {
        SweepConfig {
            model,
            eps,
            phases,
            seed: 1,
            h_init: None,
            h_init_rounds: 25.0,
            z_init: Vec::new(),
            k_window: 3.0,
            tol_rel: 1e-12,
            tol_abs: 1e-14,
            window: [3.0, 15.0],
            invariant_rounds: 4,
        }
    }
}

/// One sweep row; field order is the CSV column order. Slow-variable columns
/// refer to the first component of `z`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SweepRow {
    pub run_id: usize,
    pub eps: f64,
    pub phi0: f64,
    pub xi3: Option<f64>,
    pub xi_i: Option<f64>,
    pub target: Option<u8>,
    pub measured_xi_i: Option<f64>,
    pub measured_dtau: Option<f64>,
    pub predicted_dtau: Option<f64>,
    pub measured_z0: Option<f64>,
    pub predicted_z0: Option<f64>,
    pub predicted_z0_eps: Option<f64>,
    pub measured_z0p: Option<f64>,
    pub predicted_z0p: Option<f64>,
    pub predicted_z0p_anchor: Option<f64>,
    pub predicted_dz0: Option<f64>,
    pub predicted_z0p_eps: Option<f64>,
    pub two_pi_j_minus: Option<f64>,
    pub measured_two_pi_j_plus: Option<f64>,
    pub predicted_two_pi_j_plus: Option<f64>,
    pub baseline: Option<f64>,
    pub bracket_term: Option<f64>,
    pub valid: bool,
    pub ambiguous: bool,
    pub error: Option<String>,
}

/// Shared per-sweep data computed before the runs.
pub struct SweepContext {
    pub sys: SystemDef,
    pub config: SweepConfig,
    pub h_init: f64,
    pub z_init: Vec<f64>,
    pub tau_star: f64,
    pub z_star: Vec<f64>,
    pub coeffs: SeparatrixCoefficients,
    /// Glued averaged solutions into `[G₁, G₂]` for the time-shift fits.
    pub glued: Option<[AveragedSolution; 2]>,
    /// `{S_i, S₃}` at `z_*` in the slow-fast mode, `[i = 1, i = 2]`.
    pub bracket: [f64; 2],
    /// Seeded offset of the phase grid, in units of the grid spacing.
    pub phase_offset: f64,
}

/// `{S_i, S₃}` at `z` with `{a, b} = a_x b_y − a_y b_x`, `z = (y, x)`.
pub fn area_bracket(sys: &SystemDef, z: &[f64], step: f64) -> Result<[f64; 2]> {
    let area = |dy: f64, dx: f64| -> Result<[f64; 3]> {
        Ok(loop_data(sys, &[z[0] + dy, z[1] + dx], None)?.geometry.areas)
    };
    let (yp, ym) = (area(step, 0.0)?, area(-step, 0.0)?);
    let (xp, xm) = (area(0.0, step)?, area(0.0, -step)?);
    let d = |a: [f64; 3], b: [f64; 3], i: usize| (a[i] - b[i]) / (2.0 * step);
    let br = |i: usize| d(xp, xm, i) * d(yp, ym, 2) - d(yp, ym, i) * d(xp, xm, 2);
    Ok([br(0), br(1)])
}

impl SweepContext {
    pub fn new(config: SweepConfig) -> Result<Self> {
        if !(config.eps > 0.0) || config.phases == 0 {
            return Err(Error::Config("sweep needs eps > 0 and a non-empty phase grid".into()));
        }
        let sys = build_system(&config.model)?;
        let z_init = if config.z_init.is_empty() {
            sys.default_z.clone()
        } else {
            config.z_init.clone()
        };
        if z_init.len() != sys.dim_z {
            return Err(Error::Config(format!(
                "z_init has {} entries for dim_z = {}",
                z_init.len(),
                sys.dim_z
            )));
        }
        let eps = config.eps;
        let theta3 = loop_data(&sys, &z_init, None)?.ints.theta[2];
        if theta3 <= 0.0 {
            return Err(Error::UnsupportedRegime("Theta3 <= 0 at the initial z".into()));
        }
        let h_init = config.h_init.unwrap_or(config.h_init_rounds * eps * theta3);
        let av = Averager::new(&sys);
        let pre = av.approach(DomainTag::G3, h_init, &z_init, 0.0)?;
        let (tau_star, z_star) = pre.arrival.clone();
        let coeffs = bundle_with(&sys, &z_star, &CoeffOptions::default())?;
        let glued = if sys.mode == Mode::Generic {
            let post = |d: DomainTag| -> Result<AveragedSolution> {
                let i = d.index();
                let h_end = -(config.window[1] + 2.0) * eps * coeffs.theta[i - 1];
                Ok(AveragedSolution {
                    route: vec![DomainTag::G3, d],
                    tau_star,
                    z_star: z_star.clone(),
                    pre: pre.clone(),
                    post: av.depart(d, &z_star, tau_star, h_end)?,
                })
            };
            Some([post(DomainTag::G1)?, post(DomainTag::G2)?])
        } else {
            None
        };
        let bracket = if sys.mode == Mode::SlowFast {
            area_bracket(&sys, &z_star, 1e-4)?
        } else {
            [0.0, 0.0]
        };
        let phase_offset = ChaCha8Rng::seed_from_u64(config.seed).gen::<f64>();
        Ok(SweepContext {
            phase_offset,
            sys,
            config,
            h_init,
            z_init,
            tau_star,
            z_star,
            coeffs,
            glued,
            bracket,
        })
    }

    fn options(&self) -> Options {
        Options {
            rtol: self.config.tol_rel,
            atol: self.config.tol_abs,
            ..Options::default()
        }
    }

    fn t_cap(&self) -> f64 {
        // several times the averaged arrival plus the post window
        20.0 * (self.tau_star + 1.0) / self.config.eps
    }

    pub fn phase(&self, run_id: usize) -> f64 {
        2.0 * std::f64::consts::PI * (run_id as f64 + self.phase_offset) / self.config.phases as f64
    }

    pub fn run(&self, run_id: usize) -> SweepRow {
        let phi0 = self.phase(run_id);
        let mut row = SweepRow {
            run_id,
            eps: self.config.eps,
            phi0,
            ..Default::default()
        };
        if let Err(e) = self.run_into(&mut row) {
            row.valid = false;
            row.error = Some(e.to_string());
        }
        row
    }

    fn run_into(&self, row: &mut SweepRow) -> Result<()> {
        let eps = self.config.eps;
        let c = &self.coeffs;
        let init = initial_point(&self.sys, &self.z_init, self.h_init, row.phi0)?;
        let w = self.config.window;
        let far = if self.sys.mode == Mode::Generic {
            (w[1] + 1.0) * eps * c.theta[0].max(c.theta[1])
        } else {
            self.h_init * c.theta[0].min(c.theta[1]) / c.theta[2]
        };
        let spec = EventSpec {
            stop_beyond: Some((far, self.config.invariant_rounds + 1)),
            options: self.options(),
            ..Default::default()
        };
        let traj = integrate_full(&self.sys, &init, eps, self.t_cap(), &spec)?;
        let cr = extract_crossing(&traj, c, self.config.k_window)?;
        let pp: PseudoPhase = pseudo_phase(cr.h0, eps, c, cr.domain, self.config.k_window)?;
        let i = cr.domain.index();
        row.xi3 = Some(pp.xi3);
        row.xi_i = Some(pp.xi_i);
        row.target = Some(i as u8);
        row.measured_xi_i = Some(cr.xi_i);
        row.valid = cr.valid;
        row.ambiguous = cr.ambiguous;
        let jp = jump_slow(c, &pp, eps, true)?;
        row.predicted_dtau = Some(jp.dtau);
        row.measured_z0 = Some(cr.z0[0]);
        row.measured_z0p = Some(cr.z0p[0]);
        if let Some(glued) = &self.glued {
            let sol = &glued[i - 1];
            let theta_i = c.theta[i - 1];
            let pre_rounds: Vec<(f64, f64)> = round_averages(&traj, Section::EtaPlus, true)
                .into_iter()
                .filter(|&(t, h)| t < cr.t0 && h >= w[0] * eps * c.theta[2] && h <= w[1] * eps * c.theta[2])
                .collect();
            let inner = if i == 2 { Section::XiPlus } else { Section::XiMinus };
            let post_rounds: Vec<(f64, f64)> = round_averages(&traj, inner, false)
                .into_iter()
                .filter(|&(t, h)| t > cr.t0p && -h >= w[0] * eps * theta_i && -h <= w[1] * eps * theta_i)
                .collect();
            let d_minus = fit_time_shift(&pre_rounds, &sol.pre, eps)?;
            let d_plus = fit_time_shift(&post_rounds, &sol.post, eps)?;
            row.measured_dtau = Some(d_minus - d_plus);
            let anchor3: Vec<f64> = (0..self.sys.dim_z)
                .map(|j| self.z_star[j] - c.f_zc[j] * d_minus)
                .collect();
            let anchor_i: Vec<f64> = (0..self.sys.dim_z)
                .map(|j| self.z_star[j] - c.f_zc[j] * d_plus)
                .collect();
            let bp = boundary_predictors(c, &anchor3, &anchor_i, &pp, eps)?;
            row.predicted_z0 = Some(bp.z0[0]);
            row.predicted_z0_eps = Some(bp.z0_eps[0]);
            // increment across the round taken with the measured end points
            let measured_pp = PseudoPhase { h0: cr.h0, ..pp };
            let bm = boundary_predictors(c, &anchor3, &anchor_i, &measured_pp, eps)?;
            let dz0 = eps * c.f_zc[0]
                * (-0.5 * c.a * cr.h0.ln() - 0.5 * c.a * (-cr.h0p).ln() + c.b[i - 1])
                + eps * c.big_a[i - 1][0];
            let _ = bm;
            row.predicted_z0p = Some(cr.z0[0] + dz0);
            row.predicted_dz0 = Some(dz0);
            row.predicted_z0p_anchor = Some(bp.z0_prime[0]);
            row.predicted_z0p_eps = Some(bp.z0_prime_eps[0]);
        }
        if self.sys.is_hamiltonian() {
            let n = self.config.invariant_rounds;
            let g3: Vec<&SectionEvent> = traj
                .events
                .iter()
                .filter(|e| e.section == Section::EtaPlus && e.h > 0.0)
                .collect();
            let inner = DomainTag::inner(i).start_section();
            let gi: Vec<&SectionEvent> = traj
                .events
                .iter()
                .filter(|e| e.section == inner && e.h < 0.0 && e.t > cr.t0p)
                .collect();
            if g3.len() < n || gi.len() < n {
                return Err(Error::MeasurementSuspect("too few rounds for the invariant".into()));
            }
            let margin = 3.0 * eps * c.theta[2];
            let jm = measure_invariant(&self.sys, &traj, DomainTag::G3, [g3[0].t, g3[n - 1].t], margin)?;
            let jp_meas = measure_invariant(
                &self.sys,
                &traj,
                DomainTag::inner(i),
                [gi[gi.len() - n].t, gi[gi.len() - 1].t],
                margin,
            )?;
            let mode = if self.sys.mode == Mode::SlowFast {
                InvariantMode::SlowFast
            } else {
                InvariantMode::TimeDependent
            };
            let ij = invariant_jump(c, jm.two_pi_j, &pp, eps, mode, self.bracket[i - 1])?;
            row.two_pi_j_minus = Some(jm.two_pi_j);
            row.measured_two_pi_j_plus = Some(jp_meas.two_pi_j);
            row.predicted_two_pi_j_plus = Some(ij.two_pi_j_plus);
            row.baseline = Some(ij.baseline);
            row.bracket_term = Some(ij.bracket_term);
        }
        Ok(())
    }
}

/// Run `ids` on a pool capped by `SEPCROSS_THREADS`, results in id order.
pub fn parallel_map<T: Send, F: Fn(usize) -> T + Sync + Send>(ids: std::ops::Range<usize>, f: F) -> Vec<T> {
    let threads = std::env::var("SEPCROSS_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0);
    match threads.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(|| ids.into_par_iter().map(&f).collect()),
        None => ids.into_par_iter().map(&f).collect(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub tau_star: f64,
    pub z_star: Vec<f64>,
    pub h_init: f64,
    pub phase_offset: f64,
    pub coeffs: SeparatrixCoefficients,
}

pub fn run_sweep(config: SweepConfig) -> Result<SweepResult> {
    let ctx = SweepContext::new(config)?;
    let rows = parallel_map(0..ctx.config.phases, |id| ctx.run(id));
    Ok(SweepResult {
        rows,
        tau_star: ctx.tau_star,
        z_star: ctx.z_star.clone(),
        h_init: ctx.h_init,
        phase_offset: ctx.phase_offset,
        coeffs: ctx.coeffs.clone(),
    })
}

#[derive(Debug, Clone, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptureConfig {
    pub model: ModelConfig,
    pub eps: f64,
    pub runs: usize,
    pub seed: u64,
    pub z_init: Vec<f64>,
    /// Lowest initial `E` in units of `εΘ₃`.
    pub h_low_rounds: f64,
    /// Width of the initial energy band in `G₃` energy steps.
    pub h_band_rounds: f64,
    pub k_window: f64,
    pub tol_rel: f64,
    pub tol_abs: f64,
}

impl CaptureConfig {
    pub fn new(model: ModelConfig, eps: f64, runs: usize) -> Self {
        CaptureConfig {
            model,
            eps,
            runs,
            seed: 1,
            z_init: Vec::new(),
            h_low_rounds: 2.0,
            h_band_rounds: 5.0,
            k_window: 3.0,
            tol_rel: 1e-10,
            tol_abs: 1e-13,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CaptureRun {
    pub run_id: usize,
    pub h: f64,
    pub phi: f64,
    pub domain: Option<u8>,
    pub xi3: Option<f64>,
    pub phase3: Option<f64>,
    pub valid: bool,
    pub ambiguous: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CaptureStats {
    pub runs: usize,
    pub counted: usize,
    pub counts: [usize; 2],
    pub fractions: [f64; 2],
    /// Binomial standard errors.
    pub sigma: [f64; 2],
    pub theta_ratio: [f64; 2],
    pub invalid_fraction: f64,
    pub ambiguous: usize,
    pub failed: usize,
    pub ks_statistic: f64,
    pub ks_critical: f64,
    pub details: Vec<CaptureRun>,
}

pub fn capture_fractions(config: &CaptureConfig) -> Result<CaptureStats> {
    if config.runs < 100 {
        return Err(Error::Config("capture statistics need at least 100 runs".into()));
    }
    let sys = build_system(&config.model)?;
    let z0 = if config.z_init.is_empty() {
        sys.default_z.clone()
    } else {
        config.z_init.clone()
    };
    let eps = config.eps;
    let l0 = loop_data(&sys, &z0, None)?;
    let th3 = l0.ints.theta[2];
    let h_mid = (config.h_low_rounds + 0.5 * config.h_band_rounds) * eps * th3;
    let av = Averager::new(&sys);
    let z_star = av.approach(DomainTag::G3, h_mid, &z0, 0.0)?.arrival.1;
    let ld = loop_data(&sys, &z_star, None)?;
    let th = ld.ints.theta;
    if th[0] <= 0.0 || th[1] <= 0.0 {
        return Err(Error::UnsupportedRegime("loop integrals must be positive".into()));
    }
    // Only Θ and the section metadata enter the pseudo-phase.
    let coeffs = SeparatrixCoefficients {
        z: z_star.clone(),
        p_c: ld.chart.p_c,
        q_c: ld.chart.q_c,
        h_c: ld.chart.h_c,
        a: ld.chart.a,
        b: [0.0; 3],
        theta: th,
        big_a: ld.ints.big_a.clone(),
        d: [0.0; 3],
        g: ld.ints.big_a.clone(),
        s: ld.geometry.areas,
        f_zc: ld.chart.f_zc.clone(),
        sections: crate::coeffs::SectionMeta::of(&ld.chart),
        delta: ld.geometry.delta,
        diagnostics: Default::default(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let draws: Vec<(f64, f64)> = (0..config.runs)
        .map(|_| {
            let u: f64 = rng.gen();
            let v: f64 = rng.gen();
            (
                (config.h_low_rounds + u * config.h_band_rounds) * eps * th3,
                2.0 * std::f64::consts::PI * v,
            )
        })
        .collect();
    let opts = Options {
        rtol: config.tol_rel,
        atol: config.tol_abs,
        ..Options::default()
    };
    let t_cap = 50.0 * (config.h_low_rounds + config.h_band_rounds + 5.0) * 100.0;
    let details: Vec<CaptureRun> = parallel_map(0..config.runs, |id| {
        let (h, phi) = draws[id];
        let mut run = CaptureRun {
            run_id: id,
            h,
            phi,
            domain: None,
            xi3: None,
            phase3: None,
            valid: false,
            ambiguous: false,
            error: None,
        };
        let res = (|| -> Result<()> {
            let init = initial_point(&sys, &z0, h, phi)?;
            let spec = EventSpec {
                stop_after_inner: Some(3),
                options: opts,
                ..Default::default()
            };
            let traj = integrate_full(&sys, &init, eps, t_cap, &spec)?;
            let cr = extract_crossing(&traj, &coeffs, config.k_window)?;
            run.domain = Some(cr.domain.index() as u8);
            run.xi3 = Some(cr.xi3);
            run.phase3 = Some(cr.phase3);
            run.valid = cr.valid;
            run.ambiguous = cr.ambiguous;
            Ok(())
        })();
        if let Err(e) = res {
            run.error = Some(e.to_string());
        }
        run
    });
    let counted: Vec<&CaptureRun> = details
        .iter()
        .filter(|r| r.domain.is_some() && !r.ambiguous)
        .collect();
    let n = counted.len();
    let mut counts = [0usize; 2];
    for r in &counted {
        counts[r.domain.unwrap() as usize - 1] += 1;
    }
    let nf = n.max(1) as f64;
    let fractions = [counts[0] as f64 / nf, counts[1] as f64 / nf];
    let ratio = [th[0] / th[2], th[1] / th[2]];
    let sigma = ratio.map(|p| (p * (1.0 - p) / nf).sqrt());
    let u: Vec<f64> = counted.iter().map(|r| r.phase3.unwrap()).collect();
    Ok(CaptureStats {
        runs: config.runs,
        counted: n,
        counts,
        fractions,
        sigma,
        theta_ratio: ratio,
        invalid_fraction: details.iter().filter(|r| !r.valid).count() as f64 / config.runs as f64,
        ambiguous: details.iter().filter(|r| r.ambiguous).count(),
        failed: details.iter().filter(|r| r.error.is_some()).count(),
        ks_statistic: ks_uniform(&u),
        ks_critical: ks_critical_1pct(n),
        details,
    })
}
