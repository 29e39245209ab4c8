//! Separatrix coefficients at fixed `z`: loop integrals, period constants and
//! the constants of the weighted orbit integrals.

use rayon::prelude::*;
use serde::Serialize;

use crate::model::{derived_fields, SystemDef};
use crate::numeric::least_squares;
use crate::portrait::{
    default_delta, find_saddle, periodic_orbit, trace_separatrices, DomainTag, Orbit, SaddleChart,
    SeparatrixGeometry,
};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct CoeffOptions {
    pub delta: Option<f64>,
    /// Largest `|h|` of the grid relative to `S₃`.
    pub h_top: f64,
    /// Levels used for the period fit.
    pub levels_period: usize,
    /// Levels used for the weighted-integral fits.
    pub levels_weighted: usize,
    pub slope_tolerance: f64,
}

impl Default for CoeffOptions {
    fn default() -> Self {
        CoeffOptions {
            delta: None,
            h_top: 1e-2,
            levels_period: 12,
            levels_weighted: 18,
            slope_tolerance: 0.05,
        }
    }
}

/// Orientation of the sections used for `d_i`, `g_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectionMeta {
    pub flip: bool,
    pub rotate_deg: f64,
    pub e_xi: [f64; 2],
    pub e_eta: [f64; 2],
}

impl SectionMeta {
    pub fn of(chart: &SaddleChart) -> Self {
        SectionMeta {
            flip: chart.sections.flip,
            rotate_deg: chart.sections.rotate_deg,
            e_xi: chart.e_xi,
            e_eta: chart.e_eta,
        }
    }

    pub fn same_convention(&self, other: &SectionMeta) -> bool {
        self.flip == other.flip && self.rotate_deg == other.rotate_deg
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstantFit {
    pub name: String,
    pub basis: Vec<&'static str>,
    pub h_grid: Vec<f64>,
    pub samples: Vec<f64>,
    pub coef: Vec<f64>,
    pub residuals: Vec<f64>,
    pub residual_rms: f64,
    /// Fitted and predicted `ln|h|` slope where one is predicted.
    pub slope: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct FitDiagnostics {
    pub fits: Vec<ConstantFit>,
    /// Near-saddle tail contributions of `∮ f_h` per loop.
    pub tail_fh: [f64; 2],
    /// Near-saddle tail contributions of `∮ F_z` per loop.
    pub tail_fz: [Vec<f64>; 2],
}

/// Coefficients indexed `[i − 1]` for `i = 1, 2, 3`.
#[derive(Debug, Clone, Serialize)]
pub struct SeparatrixCoefficients {
    pub z: Vec<f64>,
    pub p_c: f64,
    pub q_c: f64,
    pub h_c: f64,
    pub a: f64,
    pub b: [f64; 3],
    pub theta: [f64; 3],
    pub big_a: [Vec<f64>; 3],
    pub d: [f64; 3],
    pub g: [Vec<f64>; 3],
    pub s: [f64; 3],
    pub f_zc: Vec<f64>,
    pub sections: SectionMeta,
    pub delta: f64,
    pub diagnostics: FitDiagnostics,
}

impl SeparatrixCoefficients {
    /// `θ_{i3} = Θ_i / Θ₃`.
    pub fn theta_ratio(&self, i: usize) -> f64 {
        self.theta[i - 1] / self.theta[2]
    }

    pub fn dim_z(&self) -> usize {
        self.z.len()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LoopIntegrals {
    pub theta: [f64; 3],
    pub big_a: [Vec<f64>; 3],
    pub tail_fh: [f64; 2],
    pub tail_fz: [Vec<f64>; 2],
}

/// Integrand gradient at C by central differences.
fn integrand_gradient(
    sys: &SystemDef,
    chart: &SaddleChart,
    pick: &dyn Fn(&crate::model::FieldSample) -> f64,
) -> Result<[f64; 2]> {
    let step = 1e-5 * sys.scale;
    let c = chart.center();
    let val = |p: f64, q: f64| -> Result<f64> { Ok(pick(&derived_fields(sys, chart, p, q)?)) };
    let at_c = val(c[0], c[1])?;
    let scale = val(c[0] + sys.scale, c[1])?.abs().max(val(c[0], c[1] + sys.scale)?.abs());
    if at_c.abs() > 1e-9 * (1.0 + scale) {
        return Err(Error::Model(format!(
            "loop integrand does not vanish at the saddle ({at_c:e})"
        )));
    }
    Ok([
        (val(c[0] + step, c[1])? - val(c[0] - step, c[1])?) / (2.0 * step),
        (val(c[0], c[1] + step)? - val(c[0], c[1] - step)?) / (2.0 * step),
    ])
}

pub fn loop_integrals(sys: &SystemDef, chart: &SaddleChart, geometry: &SeparatrixGeometry) -> Result<LoopIntegrals> {
    let k = sys.dim_z;
    let delta = geometry.delta;
    // Linear vanishing rate: x − C ≈ δ v e^{∓λ|t|} beyond the ball.
    let tail = |grad: [f64; 2], i: usize| -> f64 {
        let lp = &geometry.loops[i];
        let out = chart.launch_direction(lp.index);
        let back = lp.arrival_dir;
        let dot = |v: [f64; 2]| grad[0] * v[0] + grad[1] * v[1];
        delta * (dot(out) + dot(back)) / chart.lambda
    };
    let grad_fh = integrand_gradient(sys, chart, &|s| s.f_h)?;
    let grads_fz: Vec<[f64; 2]> = (0..k)
        .map(|j| integrand_gradient(sys, chart, &move |s| s.big_f_z[j]))
        .collect::<Result<_>>()?;
    let mut theta = [0.0; 3];
    let mut big_a: [Vec<f64>; 3] = [vec![0.0; k], vec![0.0; k], vec![0.0; k]];
    let mut tail_fh = [0.0; 2];
    let mut tail_fz: [Vec<f64>; 2] = [vec![0.0; k], vec![0.0; k]];
    for i in 0..2 {
        let ints = &geometry.loops[i].ints;
        tail_fh[i] = tail(grad_fh, i);
        theta[i] = -(ints.fh + tail_fh[i]);
        for j in 0..k {
            tail_fz[i][j] = tail(grads_fz[j], i);
            big_a[i][j] = ints.fz[j] + tail_fz[i][j];
        }
    }
    theta[2] = theta[0] + theta[1];
    for j in 0..k {
        big_a[2][j] = big_a[0][j] + big_a[1][j];
    }
    Ok(LoopIntegrals {
        theta,
        big_a,
        tail_fh,
        tail_fz,
    })
}

/// Geometric grid `|h|_k = h_top · S₃ · 2^{−k}`.
pub fn h_grid(s3: f64, h_top: f64, levels: usize) -> Vec<f64> {
    (0..levels).map(|k| h_top * s3 * 0.5f64.powi(k as i32)).collect()
}

fn signed(domain: DomainTag, h: f64) -> f64 {
    match domain {
        DomainTag::G3 => h,
        _ => -h,
    }
}

/// Orbits on the grid for each domain, `[G1, G2, G3]`.
fn grid_orbits(sys: &SystemDef, chart: &SaddleChart, grid: &[f64]) -> Result<[Vec<Orbit>; 3]> {
    let domains = [DomainTag::G1, DomainTag::G2, DomainTag::G3];
    let jobs: Vec<(DomainTag, f64)> = domains
        .iter()
        .flat_map(|&d| grid.iter().map(move |&h| (d, signed(d, h))))
        .collect();
    let orbits: Vec<Orbit> = jobs
        .par_iter()
        .map(|&(d, h)| periodic_orbit(sys, chart, d, h, false))
        .collect::<Result<_>>()?;
    let n = grid.len();
    let mut it = orbits.into_iter();
    let mut take = || it.by_ref().take(n).collect::<Vec<_>>();
    Ok([take(), take(), take()])
}

fn fit(
    name: String,
    basis: &[&'static str],
    grid: &[f64],
    samples: Vec<f64>,
    slope: Option<f64>,
) -> Result<ConstantFit> {
    let rows: Vec<Vec<f64>> = grid
        .iter()
        .map(|&h| {
            let (l, r) = (h.ln(), h.sqrt());
            basis
                .iter()
                .map(|b| match *b {
                    "1" => 1.0,
                    "ln|h|" => l,
                    "h ln|h|" => h * l,
                    "h" => h,
                    "h^2 ln|h|" => h * h * l,
                    "h^2" => h * h,
                    "sqrt|h| ln|h|" => r * l,
                    "sqrt|h|" => r,
                    other => unreachable!("basis {other}"),
                })
                .collect()
        })
        .collect();
    let lf = least_squares(&rows, &samples, &vec![1.0; grid.len()])?;
    let slope = slope.map(|pred| (lf.coef[basis.iter().position(|b| *b == "ln|h|").unwrap()], pred));
    Ok(ConstantFit {
        name,
        basis: basis.to_vec(),
        h_grid: grid.to_vec(),
        samples,
        coef: lf.coef,
        residuals: lf.residuals,
        residual_rms: lf.residual_rms,
        slope,
    })
}

const PERIOD_BASIS: [&str; 5] = ["1", "h ln|h|", "h", "h^2 ln|h|", "h^2"];
const WEIGHTED_BASIS: [&str; 6] = ["ln|h|", "1", "sqrt|h| ln|h|", "sqrt|h|", "h ln|h|", "h"];

fn constant_of(f: &ConstantFit) -> f64 {
    f.coef[f.basis.iter().position(|b| *b == "1").unwrap()]
}

pub fn period_constants(
    chart: &SaddleChart,
    grid: &[f64],
    orbits: &[Vec<Orbit>; 3],
) -> Result<([f64; 3], Vec<ConstantFit>)> {
    let mut b = [0.0; 3];
    let mut fits = Vec::new();
    for (i, orbs) in orbits.iter().enumerate() {
        let ai = if i == 2 { 2.0 * chart.a } else { chart.a };
        let samples: Vec<f64> = orbs.iter().map(|o| o.period + ai * o.h.abs().ln()).collect();
        let f = fit(format!("b{}", i + 1), &PERIOD_BASIS, grid, samples, None)?;
        b[i] = constant_of(&f);
        if f.residual_rms > 1e-6 * (1.0 + b[i].abs()) {
            return Err(Error::FitDiverged(format!(
                "b{} fit residual {:e}",
                i + 1,
                f.residual_rms
            )));
        }
        fits.push(f);
    }
    Ok((b, fits))
}

fn check_slope(f: &ConstantFit, tol: f64, scale: f64) -> Result<()> {
    if let Some((got, want)) = f.slope {
        if (got - want).abs() > tol * want.abs().max(scale) {
            return Err(Error::FitDiverged(format!(
                "{}: fitted ln|h| slope {got:e}, predicted {want:e}",
                f.name
            )));
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn weighted_constants(
    sys: &SystemDef,
    chart: &SaddleChart,
    ints: &LoopIntegrals,
    b: &[f64; 3],
    grid: &[f64],
    orbits: &[Vec<Orbit>; 3],
    opts: &CoeffOptions,
) -> Result<([f64; 3], [Vec<f64>; 3], Vec<ConstantFit>)> {
    let k = sys.dim_z;
    let a = chart.a;
    let th = &ints.theta;
    let aa = &ints.big_a;
    let mut d = [0.0; 3];
    let mut g: [Vec<f64>; 3] = [vec![0.0; k], vec![0.0; k], vec![0.0; k]];
    let mut fits = Vec::new();
    let slope_scale_fh = 1e-3 * a * (th[0].abs() + th[1].abs()).max(1e-12);
    for i in 0..3 {
        let orbs = &orbits[i];
        let samples: Vec<f64> = orbs.iter().map(|o| o.ints.weighted_fh()).collect();
        let pred = if i == 2 { -a * (th[1] - th[0]) / 2.0 } else { 0.0 };
        let f = fit(format!("d{}", i + 1), &WEIGHTED_BASIS, grid, samples, Some(pred))?;
        check_slope(&f, opts.slope_tolerance, slope_scale_fh)?;
        let beta = constant_of(&f);
        d[i] = if i == 2 {
            -beta - (th[0] * b[1] - th[1] * b[0]) / 2.0
        } else {
            -beta
        };
        fits.push(f);
        for j in 0..k {
            let samples: Vec<f64> = orbs.iter().map(|o| o.ints.weighted_fz(j)).collect();
            let pred = if i == 2 { -a * (aa[0][j] - aa[1][j]) / 2.0 } else { 0.0 };
            let scale = 1e-3 * a * (aa[0][j].abs() + aa[1][j].abs()).max(1e-12);
            let f = fit(format!("g{}[{}]", i + 1, j + 1), &WEIGHTED_BASIS, grid, samples, Some(pred))?;
            check_slope(&f, opts.slope_tolerance, scale)?;
            let beta = constant_of(&f);
            g[i][j] = if i == 2 {
                -beta + (aa[0][j] * b[1] - aa[1][j] * b[0]) / 2.0
            } else {
                -beta
            };
            fits.push(f);
        }
    }
    Ok((d, g, fits))
}

/// Saddle, loops and loop integrals only; no orbit fits.
pub struct LoopData {
    pub chart: SaddleChart,
    pub geometry: SeparatrixGeometry,
    pub ints: LoopIntegrals,
}

pub fn loop_data(sys: &SystemDef, z: &[f64], delta: Option<f64>) -> Result<LoopData> {
    let chart = find_saddle(sys, z, sys.saddle_seed)?;
    let geometry = trace_separatrices(sys, &chart, delta.unwrap_or_else(|| default_delta(sys)))?;
    let ints = loop_integrals(sys, &chart, &geometry)?;
    Ok(LoopData { chart, geometry, ints })
}

pub fn bundle(sys: &SystemDef, z: &[f64]) -> Result<SeparatrixCoefficients> {
    bundle_with(sys, z, &CoeffOptions::default())
}

pub fn bundle_with(sys: &SystemDef, z: &[f64], opts: &CoeffOptions) -> Result<SeparatrixCoefficients> {
    let LoopData { chart, geometry, ints } = loop_data(sys, z, opts.delta)?;
    for i in 0..2 {
        if ints.theta[i] <= 0.0 {
            return Err(Error::UnsupportedRegime(format!(
                "Theta{} = {} is not positive",
                i + 1,
                ints.theta[i]
            )));
        }
    }
    let levels = opts.levels_weighted.max(opts.levels_period);
    let grid = h_grid(geometry.areas[2], opts.h_top, levels);
    let orbits = grid_orbits(sys, &chart, &grid)?;
    let np = opts.levels_period;
    let head: [Vec<Orbit>; 3] = [
        orbits[0][..np].to_vec(),
        orbits[1][..np].to_vec(),
        orbits[2][..np].to_vec(),
    ];
    let (b, mut fits) = period_constants(&chart, &grid[..np], &head)?;
    let nw = opts.levels_weighted;
    let tail: [Vec<Orbit>; 3] = [
        orbits[0][..nw].to_vec(),
        orbits[1][..nw].to_vec(),
        orbits[2][..nw].to_vec(),
    ];
    let (d, g, wfits) = weighted_constants(sys, &chart, &ints, &b, &grid[..nw], &tail, opts)?;
    fits.extend(wfits);
    Ok(SeparatrixCoefficients {
        z: z.to_vec(),
        p_c: chart.p_c,
        q_c: chart.q_c,
        h_c: chart.h_c,
        a: chart.a,
        b,
        theta: ints.theta,
        big_a: ints.big_a,
        d,
        g,
        s: geometry.areas,
        f_zc: chart.f_zc.clone(),
        sections: SectionMeta::of(&chart),
        delta: geometry.delta,
        diagnostics: FitDiagnostics {
            fits,
            tail_fh: ints.tail_fh,
            tail_fz: ints.tail_fz,
        },
    })
}
