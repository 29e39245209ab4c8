//! First-order averaged dynamics, glued across the separatrix, and the
//! first-order near-identity corrections.
//!
//! Legs are integrated in `s = −ln|h|` so that the approach to `h = 0` stays
//! regular; the last stretch below `|h| = e^{−s_cut}` uses the leading-order
//! closed form of `∫ T dh / Θ`.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::Serialize;

use crate::model::SystemDef;
use crate::numeric::brent_root;
use crate::ode::{DenseSegment, Dop853, Options};
use crate::portrait::{find_saddle, periodic_orbit, run_orbit, DomainTag, SaddleChart, Stop};
use crate::simulate::{SectionEvent, TrajectoryRecord};
use crate::{Error, Result};

/// Orbit averages at `(h, z)`; integrals are over one period.
#[derive(Debug, Clone, Serialize)]
pub struct AveragedRhs {
    pub period: f64,
    /// `(1/T) ∮ f_h dt`
    pub fh: f64,
    /// `(1/T) ∮ f_z dt`
    pub fz: Vec<f64>,
    /// `∮ p dq`
    pub area: f64,
    /// `∮ ∂E/∂z dt`
    pub ez: Vec<f64>,
}

pub fn averaged_rhs(sys: &SystemDef, chart: &SaddleChart, domain: DomainTag, h: f64) -> Result<AveragedRhs> {
    let o = periodic_orbit(sys, chart, domain, h, false)?;
    let t = o.period;
    let k = sys.dim_z;
    Ok(AveragedRhs {
        period: t,
        fh: o.ints.fh / t,
        fz: (0..k).map(|j| o.ints.fz[j] / t + chart.f_zc[j]).collect(),
        area: o.ints.pdq,
        ez: o.ints.ez[..k].to_vec(),
    })
}

type Key = (DomainTag, u64, Vec<u64>);

/// Memoized averaged right-hand sides for one system.
pub struct Averager<'a> {
    pub sys: &'a SystemDef,
    memo: Mutex<HashMap<Key, AveragedRhs>>,
    charts: Mutex<HashMap<Vec<u64>, SaddleChart>>,
    /// `|h|` below which the closed-form tail takes over, relative to `S₃`.
    pub h_cut: f64,
    pub options: Options,
}

fn bits(z: &[f64]) -> Vec<u64> {
    z.iter().map(|v| v.to_bits()).collect()
}

impl<'a> Averager<'a> {
    pub fn new(sys: &'a SystemDef) -> Self {
        Averager {
            sys,
            memo: Mutex::new(HashMap::new()),
            charts: Mutex::new(HashMap::new()),
            h_cut: 1e-8,
            options: Options {
                rtol: 1e-11,
                atol: 1e-14,
                h_max: 0.5,
                ..Options::default()
            },
        }
    }

    pub fn chart(&self, z: &[f64]) -> Result<SaddleChart> {
        let key = bits(z);
        if let Some(c) = self.charts.lock().unwrap().get(&key) {
            return Ok(c.clone());
        }
        let c = find_saddle(self.sys, z, self.sys.saddle_seed)?;
        self.charts.lock().unwrap().insert(key, c.clone());
        Ok(c)
    }

    pub fn rhs(&self, domain: DomainTag, h: f64, z: &[f64]) -> Result<AveragedRhs> {
        let key = (domain, h.to_bits(), bits(z));
        if let Some(r) = self.memo.lock().unwrap().get(&key) {
            return Ok(r.clone());
        }
        let chart = self.chart(z)?;
        let r = averaged_rhs(self.sys, &chart, domain, h)?;
        self.memo.lock().unwrap().insert(key, r.clone());
        Ok(r)
    }

    fn cut(&self, z: &[f64]) -> Result<f64> {
        let chart = self.chart(z)?;
        let scale = self.sys.scale * self.sys.scale * chart.lambda;
        Ok(self.h_cut * scale)
    }

    /// Closed-form `(Δτ, Δz)` between `h = 0` and `h`, using `T` and the
    /// loop integrals read off the orbit at `h`.
    fn tail(&self, domain: DomainTag, h: f64, z: &[f64]) -> Result<(f64, Vec<f64>)> {
        let r = self.rhs(domain, h, z)?;
        let chart = self.chart(z)?;
        let ai = if domain == DomainTag::G3 { 2.0 * chart.a } else { chart.a };
        let u = h.abs();
        let theta = -r.fh * r.period;
        if theta <= 0.0 {
            return Err(Error::UnsupportedRegime(format!(
                "averaged flow in {domain:?} does not approach the separatrix"
            )));
        }
        let b = r.period + ai * u.ln();
        let dtau = (-ai * (u * u.ln() - u) + b * u) / theta;
        let dz = (0..self.sys.dim_z)
            .map(|j| {
                let big_a = (r.fz[j] - chart.f_zc[j]) * r.period;
                chart.f_zc[j] * dtau + big_a * u / theta
            })
            .collect();
        Ok((dtau, dz))
    }

    /// Integrate the averaged system in `s = −ln|h|` from `s0` to `s1`.
    fn integrate_s(
        &self,
        domain: DomainTag,
        s0: f64,
        y0: &[f64],
        s1: f64,
    ) -> Result<Vec<DenseSegment>> {
        let sign = if domain == DomainTag::G3 { 1.0 } else { -1.0 };
        let k = self.sys.dim_z;
        let rhs = |s: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
            let h = sign * (-s).exp();
            let r = self.rhs(domain, h, &y[1..])?;
            if r.fh == 0.0 {
                return Err(Error::Averaging("stationary averaged energy".into()));
            }
            let dtau = -h / r.fh;
            dy[0] = dtau;
            for j in 0..k {
                dy[1 + j] = r.fz[j] * dtau;
            }
            Ok(())
        };
        let mut segs = Vec::new();
        if s1 == s0 {
            return Ok(segs);
        }
        let mut solver = Dop853::new(rhs, s0, y0, s1 - s0, self.options)?;
        while solver.t() != s1 {
            solver.step(s1)?;
            segs.push(solver.segment()?.clone());
        }
        Ok(segs)
    }

    /// From `(h0, z0)` at `tau0` to the separatrix. In `G₃` this runs forward
    /// in `τ`; in `G₁`, `G₂` it runs backward.
    pub fn approach(&self, domain: DomainTag, h0: f64, z0: &[f64], tau0: f64) -> Result<Leg> {
        check_sign(domain, h0)?;
        let s0 = -h0.abs().ln();
        let mut y0 = vec![tau0];
        y0.extend_from_slice(z0);
        let s_cut = -self.cut(z0)?.ln();
        if s0 >= s_cut {
            let (dt, dz) = self.tail(domain, h0, z0)?;
            let dir = self.direction(domain);
            let arrival = (tau0 + dir * dt, z0.iter().zip(&dz).map(|(z, d)| z + dir * d).collect());
            return Ok(Leg::new(domain, Vec::new(), s0, y0, arrival));
        }
        let segs = self.integrate_s(domain, s0, &y0, s_cut)?;
        let end = segs.last().unwrap().eval(s_cut);
        let h_end = sign_of(domain) * (-s_cut).exp();
        let (dt, dz) = self.tail(domain, h_end, &end[1..])?;
        let dir = self.direction(domain);
        let arrival = (
            end[0] + dir * dt,
            end[1..].iter().zip(&dz).map(|(z, d)| z + dir * d).collect(),
        );
        Ok(Leg::new(domain, segs, s0, y0, arrival))
    }

    /// From the separatrix at `(tau_star, z_star)` out to `|h| = |h_end|`.
    pub fn depart(&self, domain: DomainTag, z_star: &[f64], tau_star: f64, h_end: f64) -> Result<Leg> {
        check_sign(domain, h_end)?;
        let s_end = -h_end.abs().ln();
        let s_cut = -self.cut(z_star)?.ln();
        let dir = -self.direction(domain);
        let h_cut = sign_of(domain) * (-s_cut).exp();
        let (dt, dz) = self.tail(domain, h_cut, z_star)?;
        let mut y_cut = vec![tau_star + dir * dt];
        y_cut.extend(z_star.iter().zip(&dz).map(|(z, d)| z + dir * d));
        let s_far = s_end.min(s_cut);
        let segs = self.integrate_s(domain, s_cut, &y_cut, s_far)?;
        let y_far = segs.last().map_or(y_cut, |g| g.eval(s_far));
        Ok(Leg::new(domain, segs, s_far, y_far, (tau_star, z_star.to_vec())))
    }

    /// `G₃` approach glued to a departure into `target` at `h̄ = 0`.
    pub fn glued(
        &self,
        h0: f64,
        z0: &[f64],
        tau0: f64,
        target: DomainTag,
        h_end: f64,
    ) -> Result<AveragedSolution> {
        let pre = self.approach(DomainTag::G3, h0, z0, tau0)?;
        let (tau_star, z_star) = pre.arrival.clone();
        let post = self.depart(target, &z_star, tau_star, h_end)?;
        Ok(AveragedSolution {
            route: vec![DomainTag::G3, target],
            tau_star,
            z_star,
            pre,
            post,
        })
    }

    /// `+1` when `τ` grows as `|h|` shrinks.
    fn direction(&self, domain: DomainTag) -> f64 {
        if domain == DomainTag::G3 {
            1.0
        } else {
            -1.0
        }
    }
}

fn sign_of(domain: DomainTag) -> f64 {
    if domain == DomainTag::G3 {
        1.0
    } else {
        -1.0
    }
}

fn check_sign(domain: DomainTag, h: f64) -> Result<()> {
    if h == 0.0 || sign_of(domain) * h < 0.0 {
        return Err(Error::Averaging(format!("h = {h} is not inside {domain:?}")));
    }
    Ok(())
}

/// One averaged leg between `|h| = e^{−s}` values, with the arrival point at
/// the separatrix.
#[derive(Debug, Clone)]
pub struct Leg {
    pub domain: DomainTag,
    /// Dense output in `s` of `[τ, z…]`.
    pub segments: Vec<DenseSegment>,
    /// `s` at the end far from the separatrix.
    pub s_far: f64,
    pub y_far: Vec<f64>,
    /// `(τ, z)` at `h̄ = 0`.
    pub arrival: (f64, Vec<f64>),
}

impl Leg {
    fn new(domain: DomainTag, segments: Vec<DenseSegment>, s_far: f64, y_far: Vec<f64>, arrival: (f64, Vec<f64>)) -> Self {
        Leg {
            domain,
            segments,
            s_far,
            y_far,
            arrival,
        }
    }

    pub fn h_of_s(&self, s: f64) -> f64 {
        sign_of(self.domain) * (-s).exp()
    }

    fn s_range(&self) -> (f64, f64) {
        if self.segments.is_empty() {
            return (self.s_far, self.s_far);
        }
        let a = self.segments.first().unwrap().t0;
        let b = self.segments.last().unwrap().t1();
        (a.min(b), a.max(b))
    }

    fn segment_at(&self, s: f64) -> Option<&DenseSegment> {
        self.segments.iter().find(|g| {
            let (lo, hi) = (g.t0.min(g.t1()), g.t0.max(g.t1()));
            s >= lo && s <= hi
        })
    }

    /// `[τ, z…]` at `h̄ = h` inside the integrated range.
    pub fn at_h(&self, h: f64) -> Result<Vec<f64>> {
        let s = -h.abs().ln();
        if s == self.s_far {
            return Ok(self.y_far.clone());
        }
        self.segment_at(s)
            .map(|g| g.eval(s))
            .ok_or_else(|| Error::Averaging(format!("h = {h} outside the averaged leg")))
    }

    /// `(h̄, z̄)` at slow time `tau` inside the integrated range.
    pub fn at_tau(&self, tau: f64) -> Result<(f64, Vec<f64>)> {
        let (lo, hi) = self.s_range();
        let tau_of = |s: f64| -> f64 { self.segment_at(s).map(|g| g.component(s, 0)).unwrap_or(f64::NAN) };
        let (t_lo, t_hi) = (tau_of(lo), tau_of(hi));
        let inside = (tau - t_lo) * (tau - t_hi) <= 0.0;
        if !inside {
            return Err(Error::Averaging(format!(
                "tau = {tau} outside the averaged leg [{}, {}]",
                t_lo.min(t_hi),
                t_lo.max(t_hi)
            )));
        }
        // Locate the segment first, then solve inside it.
        let seg = self
            .segments
            .iter()
            .find(|g| {
                let (a, b) = (g.component(g.t0, 0), g.component(g.t1(), 0));
                (tau - a) * (tau - b) <= 0.0
            })
            .unwrap();
        let s = brent_root(|s| Ok(seg.component(s, 0) - tau), seg.t0, seg.t1(), 1e-15)?;
        let y = seg.eval(s);
        Ok((self.h_of_s(s), y[1..].to_vec()))
    }

    /// Slow-time range covered by the integrated part.
    pub fn tau_range(&self) -> (f64, f64) {
        let (lo, hi) = self.s_range();
        let f = |s: f64| self.segment_at(s).map(|g| g.component(s, 0)).unwrap_or(self.y_far[0]);
        let (a, b) = (f(lo), f(hi));
        (a.min(b), a.max(b))
    }
}

#[derive(Debug, Clone)]
pub struct AveragedSolution {
    pub route: Vec<DomainTag>,
    pub tau_star: f64,
    pub z_star: Vec<f64>,
    pub pre: Leg,
    pub post: Leg,
}

impl AveragedSolution {
    /// `h̄(τ)` on whichever leg covers `tau`.
    pub fn h_at(&self, tau: f64) -> Result<f64> {
        if tau <= self.tau_star {
            self.pre.at_tau(tau).map(|r| r.0)
        } else {
            self.post.at_tau(tau).map(|r| r.0)
        }
    }
}

/// `(u_{h,1}, u_{z,1})` at phase `φ` on the orbit `E = h` of `domain`.
pub fn first_order_correction(
    sys: &SystemDef,
    chart: &SaddleChart,
    domain: DomainTag,
    h: f64,
    phi: f64,
) -> Result<(f64, Vec<f64>)> {
    let base = periodic_orbit(sys, chart, domain, h, false)?;
    let t = base.period;
    let shift = phi.rem_euclid(2.0 * std::f64::consts::PI) / (2.0 * std::f64::consts::PI) * t;
    let start = if shift == 0.0 {
        base.start
    } else {
        run_orbit(sys, chart, base.start, Stop::Time(shift), 2.0 * t, false)?.end
    };
    let run = run_orbit(sys, chart, start, Stop::Time(t), 2.0 * t, false)?;
    let uh = run.ints.weighted_fh() / t;
    let uz = (0..sys.dim_z).map(|j| run.ints.weighted_fz(j) / t).collect();
    Ok((uh, uz))
}

/// Improved invariant at a section point (phase zero).
#[derive(Debug, Clone, Serialize)]
pub struct InvariantSample {
    pub t: f64,
    pub h: f64,
    pub area: f64,
    /// `2πJ`
    pub two_pi_j: f64,
}

pub fn invariant_at(
    sys: &SystemDef,
    domain: DomainTag,
    h: f64,
    z: &[f64],
    eps: f64,
) -> Result<(f64, f64)> {
    let chart = find_saddle(sys, z, sys.saddle_seed)?;
    let o = periodic_orbit(sys, &chart, domain, h, false)?;
    let t = o.period;
    let mut corr = o.ints.weighted_fh();
    for j in 0..sys.dim_z {
        corr -= o.ints.ez[j] * o.ints.weighted_fz(j) / t;
    }
    Ok((o.ints.pdq, o.ints.pdq - eps * corr))
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantMeasurement {
    pub window: [f64; 2],
    pub domain: DomainTag,
    /// Mean of `2πJ` over the section events in the window.
    pub two_pi_j: f64,
    /// Period-averaged `S` over the same rounds.
    pub two_pi_j_cross: f64,
    pub scatter: f64,
    pub samples: Vec<InvariantSample>,
}

fn domain_events<'e>(events: &'e [SectionEvent], domain: DomainTag, window: [f64; 2]) -> Vec<&'e SectionEvent> {
    let want = domain.start_section();
    events
        .iter()
        .filter(|e| e.section == want && e.t >= window[0] && e.t <= window[1])
        .filter(|e| match domain {
            DomainTag::G3 => e.h > 0.0,
            _ => e.h < 0.0,
        })
        .collect()
}

/// `2πJ` averaged over the section events of `domain` inside `window`.
pub fn measure_invariant(
    sys: &SystemDef,
    traj: &TrajectoryRecord,
    domain: DomainTag,
    window: [f64; 2],
    margin: f64,
) -> Result<InvariantMeasurement> {
    if !sys.is_hamiltonian() {
        return Err(Error::ModeMismatch("invariant needs a Hamiltonian mode".into()));
    }
    let eps = traj.eps;
    let evs = domain_events(&traj.events, domain, window);
    if evs.len() < 2 {
        return Err(Error::MeasurementSuspect(format!(
            "{} section events in the window",
            evs.len()
        )));
    }
    let mut samples = Vec::with_capacity(evs.len());
    for e in &evs {
        if e.h.abs() < margin {
            return Err(Error::MeasurementSuspect(format!(
                "|E| = {:e} inside the separatrix margin",
                e.h.abs()
            )));
        }
        let (area, j) = invariant_at(sys, domain, e.h, &e.z, eps)?;
        samples.push(InvariantSample {
            t: e.t,
            h: e.h,
            area,
            two_pi_j: j,
        });
    }
    let js: Vec<f64> = samples.iter().map(|s| s.two_pi_j).collect();
    let mean = crate::numeric::mean(&js);
    let scatter = crate::numeric::std_dev(&js);
    let cross = crate::simulate::period_averaged_area(sys, traj, domain, &evs)?;
    if (cross - mean).abs() > 10.0 * eps * eps * 2.0 * std::f64::consts::PI {
        return Err(Error::MeasurementSuspect(format!(
            "invariant methods disagree: {mean} vs {cross}"
        )));
    }
    Ok(InvariantMeasurement {
        window,
        domain,
        two_pi_j: mean,
        two_pi_j_cross: cross,
        scatter,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_system, ModelConfig};
    use std::f64::consts::PI;

    fn duffing() -> SystemDef {
        build_system(&ModelConfig::catalog("duffing_dissipative")).unwrap()
    }

    #[test]
    fn separatrix_limit_of_averaged_energy_rate() {
        let sys = duffing();
        let chart = find_saddle(&sys, &[0.0], [0.1, 0.1]).unwrap();
        let r = averaged_rhs(&sys, &chart, DomainTag::G3, 1e-9).unwrap();
        assert!((r.fh * r.period + 8.0 / 3.0).abs() < 1e-4);
        assert_eq!(r.fz, vec![1.0]);
    }

    #[test]
    fn harmonic_virial() {
        let sys = duffing();
        let chart = find_saddle(&sys, &[0.0], [0.1, 0.1]).unwrap();
        let h = -0.25 + 1e-6;
        let r = averaged_rhs(&sys, &chart, DomainTag::G1, h).unwrap();
        assert!((r.fh + (h + 0.25)).abs() < 1e-4 * 1e-4 + 1e-6);
    }

    /// `τ_* = ∫_0^{h0} dh / (−f̄_h)` by Gauss-Legendre panels in `ln h`.
    fn arrival_oracle(sys: &SystemDef, h0: f64) -> f64 {
        let chart = find_saddle(sys, &[0.0], [0.1, 0.1]).unwrap();
        let nodes = [
            (-0.906179845938664, 0.236926885056189),
            (-0.538469310105683, 0.478628670499366),
            (0.0, 0.568888888888889),
            (0.538469310105683, 0.478628670499366),
            (0.906179845938664, 0.236926885056189),
        ];
        let h_lo = 1e-8f64;
        let (lo, hi) = (h_lo.ln(), h0.ln());
        let panels = 400;
        let w = (hi - lo) / panels as f64;
        let mut sum = 0.0;
        for k in 0..panels {
            let mid = lo + (k as f64 + 0.5) * w;
            for (x, wt) in nodes {
                let u = mid + 0.5 * w * x;
                let h = u.exp();
                let r = averaged_rhs(sys, &chart, DomainTag::G3, h).unwrap();
                sum += 0.5 * w * wt * h / (-r.fh);
            }
        }
        // T₃ ≈ −2 ln h + 2 ln 16, S₃ → 8/3 for this potential
        let b3 = 2.0 * 16f64.ln();
        sum + (-2.0 * (h_lo * h_lo.ln() - h_lo) + b3 * h_lo) / (8.0 / 3.0)
    }

    #[test]
    fn arrival_time_matches_quadrature() {
        let sys = duffing();
        let av = Averager::new(&sys);
        let leg = av.approach(DomainTag::G3, 0.5, &[0.0], 0.0).unwrap();
        let oracle = arrival_oracle(&sys, 0.5);
        assert!((leg.arrival.0 - oracle).abs() < 1e-8, "{} {}", leg.arrival.0, oracle);
        // z = τ for this model
        assert!((leg.arrival.1[0] - leg.arrival.0).abs() < 1e-10);
    }

    #[test]
    fn backward_then_forward_round_trip() {
        let sys = duffing();
        let av = Averager::new(&sys);
        let back = av.approach(DomainTag::G2, -0.1, &[0.3], 0.3).unwrap();
        let (tau_s, z_s) = back.arrival.clone();
        assert!(tau_s < 0.3);
        let fwd = av.depart(DomainTag::G2, &z_s, tau_s, -0.1).unwrap();
        let end = fwd.at_h(-0.1).unwrap();
        assert!((end[0] - 0.3).abs() < 1e-9, "{}", end[0] - 0.3);
        assert!((end[1] - 0.3).abs() < 1e-9);
    }

    #[test]
    fn glued_solution_is_continuous() {
        let sys = duffing();
        let av = Averager::new(&sys);
        let sol = av.glued(0.3, &[0.0], 0.0, DomainTag::G2, -0.1).unwrap();
        assert_eq!(sol.post.arrival.1, sol.z_star);
        assert_eq!(sol.post.arrival.0, sol.tau_star);
        let tau = sol.tau_star + 0.5 * (sol.post.tau_range().1 - sol.tau_star);
        let h = sol.h_at(tau).unwrap();
        assert!(h < 0.0 && h > -0.1);
        let h_pre = sol.h_at(0.5 * sol.tau_star).unwrap();
        assert!(h_pre > 0.0 && h_pre < 0.3);
    }

    #[test]
    fn immediate_arrival_near_separatrix() {
        let sys = duffing();
        let av = Averager::new(&sys);
        let leg = av.approach(DomainTag::G3, 1e-13, &[0.2], 0.2).unwrap();
        assert!((leg.arrival.0 - 0.2).abs() < 1e-11);
    }

    #[test]
    fn near_separatrix_slope() {
        let sys = build_system(&ModelConfig::catalog("duffing_breathing_asym")).unwrap();
        let av = Averager::new(&sys);
        let leg = av.approach(DomainTag::G3, 0.2, &[0.0], 0.0).unwrap();
        // dz/dh = −(T f_zc + A₃)/Θ₃ near h = 0
        let (h1, h2) = (1.52e-6, 1.48e-6);
        let (y1, y2) = (leg.at_h(h1).unwrap(), leg.at_h(h2).unwrap());
        let slope = (y1[1] - y2[1]) / (h1 - h2);
        let r = av.rhs(DomainTag::G3, 1.5e-6, &y1[1..]).unwrap();
        let theta = -r.fh * r.period;
        let predicted = -r.period / theta;
        assert!((slope - predicted).abs() < 1e-3 * predicted.abs(), "{slope} {predicted}");
    }

    #[test]
    fn first_order_correction_has_zero_mean() {
        let sys = duffing();
        let chart = find_saddle(&sys, &[0.0], [0.1, 0.1]).unwrap();
        let n = 64;
        let us: Vec<f64> = (0..n)
            .map(|k| first_order_correction(&sys, &chart, DomainTag::G3, 0.1, 2.0 * PI * k as f64 / n as f64).unwrap().0)
            .collect();
        assert!(crate::numeric::mean(&us).abs() < 1e-8);
        assert!(us.iter().any(|u| u.abs() > 1e-3));
        let (_, uz) = first_order_correction(&sys, &chart, DomainTag::G3, 0.1, 1.0).unwrap();
        assert_eq!(uz, vec![0.0]);
    }

    #[test]
    fn harmonic_first_order_correction() {
        let sys = duffing();
        let chart = find_saddle(&sys, &[0.0], [0.1, 0.1]).unwrap();
        let h = -0.25 + 1e-6;
        for phi in [0.3, 1.0, 2.0] {
            let (u, _) = first_order_correction(&sys, &chart, DomainTag::G1, h, phi).unwrap();
            let want = (h + 0.25) * (2.0 * phi).sin() / (2.0 * 2f64.sqrt());
            assert!((u - want).abs() < 0.02 * want.abs(), "{u} {want}");
        }
    }
}
