//! Saddle chart, section rays, separatrix loops and periodic orbits at fixed `z`.

use serde::Serialize;

use crate::model::{Hess, SectionConfig, SystemDef, MAX_Z};
use crate::numeric::{brent_root, golden_min};
use crate::ode::{Dop853, Options};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
pub enum DomainTag {
    G1,
    G2,
    G3,
}

impl DomainTag {
    pub fn index(self) -> usize {
        match self {
            DomainTag::G1 => 1,
            DomainTag::G2 => 2,
            DomainTag::G3 => 3,
        }
    }

    pub fn inner(i: usize) -> DomainTag {
        if i == 1 {
            DomainTag::G1
        } else {
            DomainTag::G2
        }
    }

    /// Section half-ray on which orbits of this domain start.
    pub fn start_section(self) -> Section {
        match self {
            DomainTag::G1 => Section::XiMinus,
            DomainTag::G2 => Section::XiPlus,
            DomainTag::G3 => Section::EtaPlus,
        }
    }
}

/// The four half-rays of the two section axes through the saddle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
pub enum Section {
    EtaPlus,
    EtaMinus,
    XiPlus,
    XiMinus,
}

impl Section {
    pub const ALL: [Section; 4] = [
        Section::EtaPlus,
        Section::EtaMinus,
        Section::XiPlus,
        Section::XiMinus,
    ];

    pub fn is_eta(self) -> bool {
        matches!(self, Section::EtaPlus | Section::EtaMinus)
    }
}

/// A half-ray from the saddle, with the crossing orientation of the flow.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Ray {
    pub dir: [f64; 2],
    /// Sign of `d/dt cross(dir, x − C)` for crossings in the flow direction.
    pub crossing: f64,
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn unit(a: [f64; 2]) -> [f64; 2] {
    let n = a[0].hypot(a[1]);
    [a[0] / n, a[1] / n]
}

fn rotate(a: [f64; 2], deg: f64) -> [f64; 2] {
    let (s, c) = deg.to_radians().sin_cos();
    [c * a[0] - s * a[1], s * a[0] + c * a[1]]
}

/// Local data at the saddle. Vectors are `(p, q)` pairs.
#[derive(Debug, Clone, Serialize)]
pub struct SaddleChart {
    pub z: Vec<f64>,
    pub p_c: f64,
    pub q_c: f64,
    pub h_c: f64,
    pub lambda: f64,
    pub a: f64,
    pub v_u: [f64; 2],
    pub v_s: [f64; 2],
    pub e_eta: [f64; 2],
    pub e_xi: [f64; 2],
    /// Linearization of `(ṗ, q̇)` in `(p, q)`.
    pub m: [[f64; 2]; 2],
    pub hess: [f64; 3],
    /// `∇h_C = ∂H/∂z` at the saddle.
    pub grad_hc: Vec<f64>,
    pub f_zc: Vec<f64>,
    pub sections: SectionConfig,
}

impl SaddleChart {
    pub fn center(&self) -> [f64; 2] {
        [self.p_c, self.q_c]
    }

    pub fn ray(&self, s: Section) -> Ray {
        let dir = match s {
            Section::EtaPlus => self.e_eta,
            Section::EtaMinus => [-self.e_eta[0], -self.e_eta[1]],
            Section::XiPlus => self.e_xi,
            Section::XiMinus => [-self.e_xi[0], -self.e_xi[1]],
        };
        let md = self.apply_m(dir);
        Ray {
            dir,
            crossing: cross(dir, md).signum(),
        }
    }

    fn apply_m(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }

    /// Quadratic part of `E` along a unit direction.
    pub fn curvature(&self, d: [f64; 2]) -> f64 {
        let [pp, pq, qq] = self.hess;
        pp * d[0] * d[0] + 2.0 * pq * d[0] * d[1] + qq * d[1] * d[1]
    }

    /// Signed crossing function of the line through C along `ray.dir`.
    pub fn line_value(&self, ray: &Ray, p: f64, q: f64) -> f64 {
        cross(ray.dir, [p - self.p_c, q - self.q_c])
    }

    pub fn projection(&self, ray: &Ray, p: f64, q: f64) -> f64 {
        dot(ray.dir, [p - self.p_c, q - self.q_c])
    }

    /// Unstable direction leaving C toward loop `l_i`.
    pub fn launch_direction(&self, i: usize) -> [f64; 2] {
        let s = if i == 2 { 1.0 } else { -1.0 };
        let sign = dot(self.v_u, self.e_xi).signum() * s;
        [sign * self.v_u[0], sign * self.v_u[1]]
    }
}

/// Newton iteration for the critical point near `seed`, then the local chart.
pub fn find_saddle(sys: &SystemDef, z: &[f64], seed: [f64; 2]) -> Result<SaddleChart> {
    let (mut p, mut q) = (seed[0], seed[1]);
    let mut converged = false;
    for _ in 0..100 {
        let g = sys.grad(p, q, z)?;
        let h = sys.hess(p, q, z)?;
        let det = h.pp * h.qq - h.pq * h.pq;
        if det == 0.0 || !det.is_finite() {
            return Err(Error::NewtonFailed("singular Hessian".into()));
        }
        let dp = (h.qq * g.hp - h.pq * g.hq) / det;
        let dq = (-h.pq * g.hp + h.pp * g.hq) / det;
        let step = dp.hypot(dq);
        let lim = 0.5 * sys.scale;
        let fac = if step > lim { lim / step } else { 1.0 };
        p -= fac * dp;
        q -= fac * dq;
        if step < 1e-15 * (1.0 + p.abs().max(q.abs())) {
            converged = true;
            break;
        }
        let g = sys.grad(p, q, z)?;
        if g.hp.abs().max(g.hq.abs()) < 1e-14 {
            converged = true;
            break;
        }
    }
    let g = sys.grad(p, q, z)?;
    if !converged || g.hp.abs().max(g.hq.abs()) > 1e-12 {
        return Err(Error::NewtonFailed(format!(
            "residual ({:e}, {:e}) at ({p}, {q})",
            g.hp, g.hq
        )));
    }
    let h = sys.hess(p, q, z)?;
    chart_at(sys, z, p, q, &h)
}

fn chart_at(sys: &SystemDef, z: &[f64], p: f64, q: f64, h: &Hess) -> Result<SaddleChart> {
    let det = h.pp * h.qq - h.pq * h.pq;
    if det >= 0.0 {
        return Err(Error::NotASaddle { p, q });
    }
    let lambda = (-det).sqrt();
    let m = [[-h.pq, -h.qq], [h.pp, h.pq]];
    let eigvec = |l: f64| -> [f64; 2] {
        let a = [-h.qq, h.pq + l];
        let b = [l - h.pq, h.pp];
        let v = if a[0].hypot(a[1]) >= b[0].hypot(b[1]) { a } else { b };
        unit(v)
    };
    let v_u = eigvec(lambda);
    let v_s = eigvec(-lambda);
    let hess = [h.pp, h.pq, h.qq];
    let quad = |d: [f64; 2]| h.pp * d[0] * d[0] + 2.0 * h.pq * d[0] * d[1] + h.qq * d[1] * d[1];
    let w1 = unit([v_u[0] + v_s[0], v_u[1] + v_s[1]]);
    let w2 = unit([v_u[0] - v_s[0], v_u[1] - v_s[1]]);
    let (mut e_eta, mut e_xi) = if quad(w1) > 0.0 { (w1, w2) } else { (w2, w1) };
    if quad(e_eta) <= 0.0 || quad(e_xi) >= 0.0 {
        return Err(Error::Topology("bisectors do not separate energy signs".into()));
    }
    if e_xi[1] < 0.0 || (e_xi[1] == 0.0 && e_xi[0] < 0.0) {
        e_xi = [-e_xi[0], -e_xi[1]];
    }
    if sys.sections.flip {
        e_xi = [-e_xi[0], -e_xi[1]];
    }
    let rot = sys.sections.rotate_deg;
    if rot != 0.0 {
        e_xi = rotate(e_xi, rot);
        e_eta = rotate(e_eta, rot);
        if quad(e_eta) <= 0.0 || quad(e_xi) >= 0.0 {
            return Err(Error::Config(format!(
                "rotation by {rot} degrees leaves the section sectors"
            )));
        }
    }
    let me = [m[0][0] * e_eta[0] + m[0][1] * e_eta[1], m[1][0] * e_eta[0] + m[1][1] * e_eta[1]];
    if dot(me, e_xi) < 0.0 {
        e_eta = [-e_eta[0], -e_eta[1]];
    }
    let g = sys.grad(p, q, z)?;
    let f = sys.pert_with(&g, p, q, z, 0.0)?;
    let k = sys.dim_z;
    Ok(SaddleChart {
        z: z.to_vec(),
        p_c: p,
        q_c: q,
        h_c: g.h,
        lambda,
        a: 1.0 / lambda,
        v_u,
        v_s,
        e_eta,
        e_xi,
        m,
        hess,
        grad_hc: g.hz[..k].to_vec(),
        f_zc: f.fz[..k].to_vec(),
        sections: sys.sections,
    })
}

/// Quadratures accumulated along an unperturbed orbit at fixed `z`.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct OrbitIntegrals {
    pub t: f64,
    /// `∫ f_h dt`
    pub fh: f64,
    /// `∫ t f_h dt`
    pub tfh: f64,
    /// `∫ p q̇ dt`
    pub pdq: f64,
    /// `∫ F_z dt`
    pub fz: [f64; MAX_Z],
    /// `∫ t F_z dt`
    pub tfz: [f64; MAX_Z],
    /// `∫ ∂E/∂z dt`
    pub ez: [f64; MAX_Z],
}

impl OrbitIntegrals {
    /// `∫ (t − T/2) f_h dt` over the orbit.
    pub fn weighted_fh(&self) -> f64 {
        self.tfh - 0.5 * self.t * self.fh
    }

    pub fn weighted_fz(&self, k: usize) -> f64 {
        self.tfz[k] - 0.5 * self.t * self.fz[k]
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Stop {
    /// Next crossing of the half-ray in the flow direction.
    Return(Ray),
    /// Re-entry into the ball of this radius around C.
    Ball(f64),
    /// Fixed duration.
    Time(f64),
}

#[derive(Debug, Clone)]
pub struct OrbitRun {
    pub end: [f64; 2],
    pub ints: OrbitIntegrals,
    pub samples: Vec<[f64; 3]>,
}

pub fn orbit_options() -> Options {
    Options {
        rtol: 1e-13,
        atol: 1e-15,
        ..Options::default()
    }
}

/// Integrate the unperturbed flow at `chart.z` from `start` with quadratures.
pub fn run_orbit(
    sys: &SystemDef,
    chart: &SaddleChart,
    start: [f64; 2],
    stop: Stop,
    t_cap: f64,
    record: bool,
) -> Result<OrbitRun> {
    let k = sys.dim_z;
    let n = 5 + 3 * k;
    let z = chart.z.clone();
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let (p, q) = (y[0], y[1]);
        let g = sys.grad(p, q, &z)?;
        let f = sys.pert_with(&g, p, q, &z, 0.0)?;
        dy[0] = -g.hq;
        dy[1] = g.hp;
        let mut fh = g.hp * f.fp + g.hq * f.fq;
        for j in 0..k {
            let ez = g.hz[j] - chart.grad_hc[j];
            fh += ez * f.fz[j];
            let big = f.fz[j] - chart.f_zc[j];
            dy[5 + j] = big;
            dy[5 + k + j] = t * big;
            dy[5 + 2 * k + j] = ez;
        }
        dy[2] = fh;
        dy[3] = t * fh;
        dy[4] = p * g.hp;
        Ok(())
    };
    let mut y0 = vec![0.0; n];
    y0[0] = start[0];
    y0[1] = start[1];
    let t_end = match stop {
        Stop::Time(t) => t,
        _ => t_cap,
    };
    let mut solver = Dop853::new(rhs, 0.0, &y0, 1.0, orbit_options())?;
    let c = chart.center();
    let event = |y: &[f64]| -> f64 {
        match stop {
            Stop::Return(ray) => chart.line_value(&ray, y[0], y[1]),
            Stop::Ball(r) => (y[0] - c[0]).hypot(y[1] - c[1]) - r,
            Stop::Time(_) => 1.0,
        }
    };
    let mut samples = Vec::new();
    if record {
        samples.push([0.0, start[0], start[1]]);
    }
    let mut g_prev = event(&y0);
    if matches!(stop, Stop::Return(_)) && g_prev.abs() <= 1e-12 * (1.0 + start[0].hypot(start[1])) {
        g_prev = 0.0;
    }
    let mut armed = match stop {
        Stop::Ball(r) => g_prev > r,
        _ => true,
    };
    let mut buf = vec![0.0; n];
    loop {
        if solver.t() >= t_end {
            if let Stop::Time(_) = stop {
                return Ok(finish(solver.y(), solver.t(), k, samples));
            }
            return Err(Error::NoReturn(format!("no event before t = {t_end}")));
        }
        solver.step(t_end)?;
        let y = solver.y();
        let g_new = event(y);
        if record {
            samples.push([solver.t(), y[0], y[1]]);
        }
        let hit = match stop {
            Stop::Return(ray) => {
                g_prev != 0.0
                    && g_prev.signum() != g_new.signum()
                    && (g_new - g_prev).signum() == ray.crossing
            }
            Stop::Ball(r) => {
                if !armed && g_new > r {
                    armed = true;
                }
                armed && g_new <= 0.0
            }
            Stop::Time(_) => false,
        };
        if hit {
            let (ta, tb) = (solver.t_prev(), solver.t());
            let seg = solver.segment()?.clone();
            let tr = brent_root(
                |t| {
                    seg.eval_into(t, &mut buf);
                    Ok(event(&buf))
                },
                ta,
                tb,
                1e-15 * tb.abs().max(1.0),
            )?;
            seg.eval_into(tr, &mut buf);
            let accept = match stop {
                Stop::Return(ray) => chart.projection(&ray, buf[0], buf[1]) > 0.0,
                _ => true,
            };
            if accept {
                if record {
                    samples.pop();
                    samples.push([tr, buf[0], buf[1]]);
                }
                return Ok(finish(&buf, tr, k, samples));
            }
        }
        g_prev = g_new;
    }
}

fn finish(y: &[f64], t: f64, k: usize, samples: Vec<[f64; 3]>) -> OrbitRun {
    let mut ints = OrbitIntegrals {
        t,
        fh: y[2],
        tfh: y[3],
        pdq: y[4],
        ..Default::default()
    };
    for j in 0..k {
        ints.fz[j] = y[5 + j];
        ints.tfz[j] = y[5 + k + j];
        ints.ez[j] = y[5 + 2 * k + j];
    }
    OrbitRun {
        end: [y[0], y[1]],
        ints,
        samples,
    }
}

/// One separatrix loop, truncated at the δ-ball around C.
#[derive(Debug, Clone, Serialize)]
pub struct LoopGeometry {
    pub index: usize,
    pub launch: [f64; 2],
    pub arrival: [f64; 2],
    /// Direction from C to the arrival point.
    pub arrival_dir: [f64; 2],
    /// `(t, p, q)` along the flow.
    pub points: Vec<[f64; 3]>,
    pub ints: OrbitIntegrals,
    pub area: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparatrixGeometry {
    pub delta: f64,
    /// `l₁`, `l₂`.
    pub loops: [LoopGeometry; 2],
    /// `S₁`, `S₂`, `S₃`.
    pub areas: [f64; 3],
}

pub fn default_delta(sys: &SystemDef) -> f64 {
    1e-4 * sys.scale
}

pub fn trace_separatrices(sys: &SystemDef, chart: &SaddleChart, delta: f64) -> Result<SeparatrixGeometry> {
    let mut loops = Vec::with_capacity(2);
    for i in [1usize, 2] {
        let d = chart.launch_direction(i);
        let launch = [chart.p_c + delta * d[0], chart.q_c + delta * d[1]];
        let run = run_orbit(sys, chart, launch, Stop::Ball(delta), 1e4 * sys.scale.max(1.0), true)
            .map_err(|e| match e {
                Error::NoReturn(m) | Error::BoxExit(m) => {
                    Error::Topology(format!("loop l{i} does not return to the saddle: {m}"))
                }
                other => other,
            })?;
        let arrival = run.end;
        let arrival_dir = unit([arrival[0] - chart.p_c, arrival[1] - chart.q_c]);
        // Straight segments arrival -> C -> launch close the gap; ∫ p dq on
        // a segment is the mean p times the q increment.
        let seg = |a: [f64; 2], b: [f64; 2]| 0.5 * (a[0] + b[0]) * (b[1] - a[1]);
        let c = chart.center();
        let area = run.ints.pdq + seg(arrival, c) + seg(c, launch);
        if area <= 0.0 {
            return Err(Error::Topology(format!(
                "loop l{i} has non-positive oriented area {area}"
            )));
        }
        loops.push(LoopGeometry {
            index: i,
            launch,
            arrival,
            arrival_dir,
            points: run.samples,
            ints: run.ints,
            area,
        });
    }
    let l2 = loops.pop().unwrap();
    let l1 = loops.pop().unwrap();
    let areas = [l1.area, l2.area, l1.area + l2.area];
    Ok(SeparatrixGeometry {
        delta,
        loops: [l1, l2],
        areas,
    })
}

/// Point on the half-ray with `E = h`, the first root marching out from C.
pub fn point_on_ray(sys: &SystemDef, chart: &SaddleChart, ray: &Ray, h: f64) -> Result<[f64; 2]> {
    let z = &chart.z;
    let at = |s: f64| [chart.p_c + s * ray.dir[0], chart.q_c + s * ray.dir[1]];
    let e = |s: f64| -> Result<f64> {
        let x = at(s);
        Ok(sys.hamiltonian(x[0], x[1], z)? - chart.h_c - h)
    };
    let kappa = chart.curvature(ray.dir).abs();
    let s0 = (2.0 * h.abs() / kappa).sqrt();
    let mut s_lo = 0.25 * s0;
    let mut f_lo = e(s_lo)?;
    if f_lo.signum() != (-h).signum() {
        return Err(Error::RootSolve(format!("energy {h} not reachable on the ray")));
    }
    let s_max = 100.0 * sys.scale.max(s0);
    let sign = f_lo.signum();
    let mut prev = (s_lo, f_lo);
    let mut s_hi = s_lo;
    loop {
        s_hi *= 1.05;
        if s_hi > s_max {
            return Err(Error::RootSolve(format!(
                "no point with E = {h} on the section ray"
            )));
        }
        let f_hi = match e(s_hi) {
            Ok(v) => v,
            Err(Error::BoxExit(_)) => {
                return Err(Error::RootSolve(format!(
                    "E = {h} not reached inside the box"
                )))
            }
            Err(other) => return Err(other),
        };
        if f_hi.signum() != sign || f_hi == 0.0 {
            break;
        }
        // A double root can hide inside one step; look for the dip.
        if sign * f_hi > sign * f_lo && sign * f_lo < sign * prev.1 {
            let (sm, fm) = golden_min(|s| Ok(sign * e(s)?), prev.0, s_hi, 1e-14 * s_hi)?;
            if fm < 0.0 {
                s_lo = prev.0;
                s_hi = sm;
                break;
            }
        }
        prev = (s_lo, f_lo);
        s_lo = s_hi;
        f_lo = f_hi;
    }
    let s = brent_root(e, s_lo, s_hi, 1e-16 * s_hi)?;
    Ok(at(s))
}

/// A closed unperturbed orbit `E = h` started on its domain's section ray.
#[derive(Debug, Clone, Serialize)]
pub struct Orbit {
    pub domain: DomainTag,
    pub h: f64,
    pub start: [f64; 2],
    pub period: f64,
    pub samples: Vec<[f64; 3]>,
    pub ints: OrbitIntegrals,
    pub closure_error: f64,
}

impl Orbit {
    /// Enclosed area `∮ p dq`.
    pub fn area(&self) -> f64 {
        self.ints.pdq
    }
}

fn check_domain_energy(domain: DomainTag, h: f64) -> Result<()> {
    let ok = match domain {
        DomainTag::G3 => h > 0.0,
        _ => h < 0.0,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::RootSolve(format!("h = {h} has the wrong sign for {domain:?}")))
    }
}

pub fn periodic_orbit(
    sys: &SystemDef,
    chart: &SaddleChart,
    domain: DomainTag,
    h: f64,
    record: bool,
) -> Result<Orbit> {
    check_domain_energy(domain, h)?;
    let ray = chart.ray(domain.start_section());
    let start = point_on_ray(sys, chart, &ray, h)?;
    let t_cap = 1e4 * sys.scale.max(1.0);
    let run = run_orbit(sys, chart, start, Stop::Return(ray), t_cap, record)?;
    let closure_error = (run.end[0] - start[0]).hypot(run.end[1] - start[1]);
    Ok(Orbit {
        domain,
        h,
        start,
        period: run.ints.t,
        samples: run.samples,
        ints: run.ints,
        closure_error,
    })
}

fn inside_polygon(pts: &[[f64; 2]], x: [f64; 2]) -> bool {
    let mut inside = false;
    let n = pts.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (pts[i], pts[j]);
        if (a[1] > x[1]) != (b[1] > x[1]) {
            let xc = a[0] + (x[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if x[0] < xc {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

pub fn classify(
    sys: &SystemDef,
    chart: &SaddleChart,
    geometry: &SeparatrixGeometry,
    p: f64,
    q: f64,
) -> Result<(DomainTag, f64)> {
    let e = sys.hamiltonian(p, q, &chart.z)? - chart.h_c;
    if e.abs() <= 1e-12 {
        return Err(Error::OnSeparatrix(e));
    }
    if e > 0.0 {
        return Ok((DomainTag::G3, e));
    }
    for lp in geometry.loops.iter().rev() {
        let mut poly: Vec<[f64; 2]> = lp.points.iter().map(|s| [s[1], s[2]]).collect();
        poly.push(chart.center());
        if inside_polygon(&poly, [p, q]) {
            return Ok((DomainTag::inner(lp.index), e));
        }
    }
    Err(Error::Topology(format!(
        "point ({p}, {q}) has E < 0 but lies outside both loops"
    )))
}
