//! Dormand-Prince 8(5,3) integrator with 7th-order dense output.

use crate::{Error, Result};

/// Right-hand side `f(t, y, dy)`.
pub trait Rhs {
    fn eval(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;
}

impl<F> Rhs for F
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    fn eval(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        self(t, y, dy)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            rtol: 1e-12,
            atol: 1e-14,
            h_max: f64::INFINITY,
            max_steps: 5_000_000,
        }
    }
}

/// Interpolant over one accepted step.
#[derive(Debug, Clone)]
pub struct DenseSegment {
    pub t0: f64,
    pub h: f64,
    cont: [Vec<f64>; 8],
}

impl DenseSegment {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn dim(&self) -> usize {
        self.cont[0].len()
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let c = &self.cont;
        for i in 0..out.len() {
            let conpar = c[4][i] + (c[5][i] + (c[6][i] + c[7][i] * s) * s1) * s;
            out[i] = c[0][i] + (c[1][i] + (c[2][i] + (c[3][i] + conpar * s1) * s) * s1) * s;
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, &mut out);
        out
    }

    pub fn component(&self, t: f64, i: usize) -> f64 {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let c = &self.cont;
        let conpar = c[4][i] + (c[5][i] + (c[6][i] + c[7][i] * s) * s1) * s;
        c[0][i] + (c[1][i] + (c[2][i] + (c[3][i] + conpar * s1) * s) * s1) * s
    }
}

/// A continuous solution glued from consecutive dense segments.
#[derive(Debug, Clone, Default)]
pub struct DenseSolution {
    pub segments: Vec<DenseSegment>,
}

impl DenseSolution {
    pub fn t_start(&self) -> f64 {
        self.segments.first().map_or(f64::NAN, |s| s.t0)
    }

    pub fn t_end(&self) -> f64 {
        self.segments.last().map_or(f64::NAN, |s| s.t1())
    }

    fn locate(&self, t: f64) -> &DenseSegment {
        let forward = self.segments[0].h > 0.0;
        let idx = self.segments.partition_point(|s| {
            if forward {
                s.t1() < t
            } else {
                s.t1() > t
            }
        });
        &self.segments[idx.min(self.segments.len() - 1)]
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        self.locate(t).eval(t)
    }

    pub fn component(&self, t: f64, i: usize) -> f64 {
        self.locate(t).component(t, i)
    }
}

pub struct Dop853<F: Rhs> {
    f: F,
    opts: Options,
    n: usize,
    t: f64,
    y: Vec<f64>,
    h: f64,
    direction: f64,
    k: [Vec<f64>; 13],
    y_new: Vec<f64>,
    y_stage: Vec<f64>,
    t_old: f64,
    y_old: Vec<f64>,
    k_old: Vec<f64>,
    h_old: f64,
    facold: f64,
    last_rejected: bool,
    steps: usize,
    dense: Option<DenseSegment>,
    evals: usize,
}

impl<F: Rhs> Dop853<F> {
    pub fn new(mut f: F, t0: f64, y0: &[f64], direction: f64, opts: Options) -> Result<Self> {
        let n = y0.len();
        let mut k: [Vec<f64>; 13] = std::array::from_fn(|_| vec![0.0; n]);
        f.eval(t0, y0, &mut k[0])?;
        let mut s = Dop853 {
            f,
            opts,
            n,
            t: t0,
            y: y0.to_vec(),
            h: 0.0,
            direction: if direction < 0.0 { -1.0 } else { 1.0 },
            k,
            y_new: vec![0.0; n],
            y_stage: vec![0.0; n],
            t_old: t0,
            y_old: y0.to_vec(),
            k_old: vec![0.0; n],
            h_old: 0.0,
            facold: 1e-4,
            last_rejected: false,
            steps: 0,
            dense: None,
            evals: 1,
        };
        s.h = s.initial_step()?;
        Ok(s)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn t_prev(&self) -> f64 {
        self.t_old
    }

    pub fn y_prev(&self) -> &[f64] {
        &self.y_old
    }

    pub fn evaluations(&self) -> usize {
        self.evals
    }

    pub fn rhs_mut(&mut self) -> &mut F {
        &mut self.f
    }

    fn sk(&self, a: f64, b: f64) -> f64 {
        self.opts.atol + self.opts.rtol * a.abs().max(b.abs())
    }

    fn initial_step(&mut self) -> Result<f64> {
        let n = self.n as f64;
        let (mut dnf, mut dny) = (0.0, 0.0);
        for i in 0..self.n {
            let sk = self.opts.atol + self.opts.rtol * self.y[i].abs();
            dnf += (self.k[0][i] / sk).powi(2);
            dny += (self.y[i] / sk).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
            1e-6
        } else {
            (dny / dnf).sqrt() * 0.01
        };
        h = h.min(self.opts.h_max) * self.direction;
        for i in 0..self.n {
            self.y_stage[i] = self.y[i] + h * self.k[0][i];
        }
        self.f.eval(self.t + h, &self.y_stage, &mut self.k[1])?;
        self.evals += 1;
        let mut der2 = 0.0;
        for i in 0..self.n {
            let sk = self.opts.atol + self.opts.rtol * self.y[i].abs();
            der2 += ((self.k[1][i] - self.k[0][i]) / sk).powi(2);
        }
        let der2 = der2.sqrt() / h.abs();
        let der12 = der2.max((dnf / n).sqrt());
        let h1 = if der12 <= 1e-15 {
            (h.abs() * 1e-3).max(1e-6)
        } else {
            (0.01 / der12).powf(1.0 / 8.0)
        };
        Ok((100.0 * h.abs()).min(h1).min(self.opts.h_max) * self.direction)
    }

    fn stage(&mut self, c: f64, coeffs: &[(usize, f64)], out: usize) -> Result<()> {
        let h = self.h;
        for i in 0..self.n {
            let mut acc = 0.0;
            for &(j, a) in coeffs {
                acc += a * self.k[j][i];
            }
            self.y_stage[i] = self.y[i] + h * acc;
        }
        let (t, ys) = (self.t + c * h, &self.y_stage);
        self.f.eval(t, ys, &mut self.k[out])?;
        self.evals += 1;
        Ok(())
    }

    /// Advance by one accepted step without passing `t_limit`.
    pub fn step(&mut self, t_limit: f64) -> Result<()> {
        let mut rejected_in_row = 0;
        loop {
            if self.steps >= self.opts.max_steps {
                return Err(Error::Integration(format!(
                    "step limit {} reached at t = {}",
                    self.opts.max_steps, self.t
                )));
            }
            let remaining = t_limit - self.t;
            if remaining * self.direction <= 0.0 {
                return Err(Error::Integration("step requested past limit".into()));
            }
            let mut clipped = false;
            if (self.h.abs()) >= remaining.abs() {
                self.h = remaining;
                clipped = true;
            }
            if self.h.abs() <= 1e-15 * self.t.abs().max(1.0) && !clipped {
                return Err(Error::Integration(format!(
                    "step size collapse at t = {}",
                    self.t
                )));
            }
            self.steps += 1;
            self.stage(C2, &[(0, A21)], 1)?;
            self.stage(C3, &[(0, A31), (1, A32)], 2)?;
            self.stage(C4, &[(0, A41), (2, A43)], 3)?;
            self.stage(C5, &[(0, A51), (2, A53), (3, A54)], 4)?;
            self.stage(C6, &[(0, A61), (3, A64), (4, A65)], 5)?;
            self.stage(C7, &[(0, A71), (3, A74), (4, A75), (5, A76)], 6)?;
            self.stage(C8, &[(0, A81), (3, A84), (4, A85), (5, A86), (6, A87)], 7)?;
            self.stage(
                C9,
                &[(0, A91), (3, A94), (4, A95), (5, A96), (6, A97), (7, A98)],
                8,
            )?;
            self.stage(
                C10,
                &[(0, A101), (3, A104), (4, A105), (5, A106), (6, A107), (7, A108), (8, A109)],
                9,
            )?;
            self.stage(
                C11,
                &[
                    (0, A111),
                    (3, A114),
                    (4, A115),
                    (5, A116),
                    (6, A117),
                    (7, A118),
                    (8, A119),
                    (9, A1110),
                ],
                10,
            )?;
            self.stage(
                1.0,
                &[
                    (0, A121),
                    (3, A124),
                    (4, A125),
                    (5, A126),
                    (6, A127),
                    (7, A128),
                    (8, A129),
                    (9, A1210),
                    (10, A1211),
                ],
                11,
            )?;
            // k[11] = f at t+h of the 12th stage; weights give the new state.
            let h = self.h;
            let (mut err, mut err2) = (0.0, 0.0);
            for i in 0..self.n {
                let k = &self.k;
                let inc = B1 * k[0][i]
                    + B6 * k[5][i]
                    + B7 * k[6][i]
                    + B8 * k[7][i]
                    + B9 * k[8][i]
                    + B10 * k[9][i]
                    + B11 * k[10][i]
                    + B12 * k[11][i];
                self.y_new[i] = self.y[i] + h * inc;
                let sk = self.sk(self.y[i], self.y_new[i]);
                let e2 = inc - BHH1 * k[0][i] - BHH2 * k[8][i] - BHH3 * k[11][i];
                err2 += (e2 / sk).powi(2);
                let e1 = ER1 * k[0][i]
                    + ER6 * k[5][i]
                    + ER7 * k[6][i]
                    + ER8 * k[7][i]
                    + ER9 * k[8][i]
                    + ER10 * k[9][i]
                    + ER11 * k[10][i]
                    + ER12 * k[11][i];
                err += (e1 / sk).powi(2);
            }
            let mut deno = err + 0.01 * err2;
            if deno <= 0.0 {
                deno = 1.0;
            }
            let err = h.abs() * err * (1.0 / (deno * self.n as f64)).sqrt();
            let err = if err.is_finite() { err } else { 1e10 };
            let fac11 = err.powf(1.0 / 8.0);
            let fac = (fac11 / self.facold.powf(0.0) / 0.9).clamp(1.0 / 6.0, 1.0 / 0.333);
            let mut h_new = h / fac;
            if err <= 1.0 {
                self.facold = err.max(1e-4);
                // k[12] holds f(t+h, y_new) for the next step and dense output.
                let t_new = self.t + h;
                let y_new = std::mem::take(&mut self.y_new);
                let res = self.f.eval(t_new, &y_new, &mut self.k[12]);
                self.y_new = y_new;
                res?;
                self.evals += 1;
                self.t_old = self.t;
                self.h_old = h;
                std::mem::swap(&mut self.y_old, &mut self.y);
                self.y.copy_from_slice(&self.y_new);
                self.k_old.copy_from_slice(&self.k[0]);
                self.t = if clipped { t_limit } else { t_new };
                self.dense = None;
                if self.last_rejected {
                    h_new = if self.direction > 0.0 {
                        h_new.min(h)
                    } else {
                        h_new.max(h)
                    };
                }
                self.last_rejected = false;
                let hmax = self.opts.h_max;
                self.h = h_new.abs().min(hmax) * self.direction;
                // Stage slots 0 and 12 swap so k[0] is f at the new point.
                self.k.swap(0, 12);
                // k[12] now holds the old k1; dense output uses k_old instead.
                return Ok(());
            }
            h_new = h / (1.0 / 0.333f64).min(fac11 / 0.9);
            self.h = h_new;
            self.last_rejected = true;
            rejected_in_row += 1;
            if rejected_in_row > 200 {
                return Err(Error::Integration(format!(
                    "repeated step rejection at t = {}",
                    self.t
                )));
            }
        }
    }

    /// Dense output on the last accepted step.
    pub fn segment(&mut self) -> Result<&DenseSegment> {
        if self.dense.is_none() {
            self.build_dense()?;
        }
        Ok(self.dense.as_ref().unwrap())
    }

    pub fn dense_into(&mut self, t: f64, out: &mut [f64]) -> Result<()> {
        self.segment()?.eval_into(t, out);
        Ok(())
    }

    fn build_dense(&mut self) -> Result<()> {
        let n = self.n;
        let h = self.h_old;
        // Slot layout after the swap: k[0] = f(t_new), k[12] = f(t_old).
        // Stages 6..11 are kept in k[5..=11]; k[13..16] need three extra calls.
        let k = &self.k;
        let kold = &self.k_old;
        let knew = &k[0];
        let mut c: [Vec<f64>; 8] = std::array::from_fn(|_| vec![0.0; n]);
        for i in 0..n {
            let ydiff = self.y[i] - self.y_old[i];
            let bspl = h * kold[i] - ydiff;
            c[0][i] = self.y_old[i];
            c[1][i] = ydiff;
            c[2][i] = bspl;
            c[3][i] = ydiff - h * knew[i] - bspl;
            c[4][i] = D41 * kold[i]
                + D46 * k[5][i]
                + D47 * k[6][i]
                + D48 * k[7][i]
                + D49 * k[8][i]
                + D410 * k[9][i]
                + D411 * k[10][i]
                + D412 * k[11][i];
            c[5][i] = D51 * kold[i]
                + D56 * k[5][i]
                + D57 * k[6][i]
                + D58 * k[7][i]
                + D59 * k[8][i]
                + D510 * k[9][i]
                + D511 * k[10][i]
                + D512 * k[11][i];
            c[6][i] = D61 * kold[i]
                + D66 * k[5][i]
                + D67 * k[6][i]
                + D68 * k[7][i]
                + D69 * k[8][i]
                + D610 * k[9][i]
                + D611 * k[10][i]
                + D612 * k[11][i];
            c[7][i] = D71 * kold[i]
                + D76 * k[5][i]
                + D77 * k[6][i]
                + D78 * k[7][i]
                + D79 * k[8][i]
                + D710 * k[9][i]
                + D711 * k[10][i]
                + D712 * k[11][i];
        }
        let mut k14 = vec![0.0; n];
        let mut k15 = vec![0.0; n];
        let mut k16 = vec![0.0; n];
        let mut ys = vec![0.0; n];
        for i in 0..n {
            ys[i] = self.y_old[i]
                + h * (A141 * kold[i]
                    + A147 * k[6][i]
                    + A148 * k[7][i]
                    + A149 * k[8][i]
                    + A1410 * k[9][i]
                    + A1411 * k[10][i]
                    + A1412 * k[11][i]
                    + A1413 * knew[i]);
        }
        self.f.eval(self.t_old + C14 * h, &ys, &mut k14)?;
        let k = &self.k;
        let knew = &k[0];
        for i in 0..n {
            ys[i] = self.y_old[i]
                + h * (A151 * kold[i]
                    + A156 * k[5][i]
                    + A157 * k[6][i]
                    + A158 * k[7][i]
                    + A1511 * k[10][i]
                    + A1512 * k[11][i]
                    + A1513 * knew[i]
                    + A1514 * k14[i]);
        }
        self.f.eval(self.t_old + C15 * h, &ys, &mut k15)?;
        let k = &self.k;
        let knew = &k[0];
        for i in 0..n {
            ys[i] = self.y_old[i]
                + h * (A161 * kold[i]
                    + A166 * k[5][i]
                    + A167 * k[6][i]
                    + A168 * k[7][i]
                    + A169 * k[8][i]
                    + A1613 * knew[i]
                    + A1614 * k14[i]
                    + A1615 * k15[i]);
        }
        self.f.eval(self.t_old + C16 * h, &ys, &mut k16)?;
        self.evals += 3;
        let knew = &self.k[0];
        for i in 0..n {
            c[4][i] = h * (c[4][i] + D413 * knew[i] + D414 * k14[i] + D415 * k15[i] + D416 * k16[i]);
            c[5][i] = h * (c[5][i] + D513 * knew[i] + D514 * k14[i] + D515 * k15[i] + D516 * k16[i]);
            c[6][i] = h * (c[6][i] + D613 * knew[i] + D614 * k14[i] + D615 * k15[i] + D616 * k16[i]);
            c[7][i] = h * (c[7][i] + D713 * knew[i] + D714 * k14[i] + D715 * k15[i] + D716 * k16[i]);
        }
        self.dense = Some(DenseSegment {
            t0: self.t_old,
            h,
            cont: c,
        });
        Ok(())
    }
}

/// Integrate from `t0` to `t1` and return the final state.
pub fn integrate<F: Rhs>(f: F, t0: f64, y0: &[f64], t1: f64, opts: Options) -> Result<Vec<f64>> {
    if t1 == t0 {
        return Ok(y0.to_vec());
    }
    let mut s = Dop853::new(f, t0, y0, t1 - t0, opts)?;
    while s.t() != t1 {
        s.step(t1)?;
    }
    Ok(s.y().to_vec())
}

/// Integrate from `t0` to `t1` keeping every dense segment.
pub fn integrate_dense<F: Rhs>(
    f: F,
    t0: f64,
    y0: &[f64],
    t1: f64,
    opts: Options,
) -> Result<DenseSolution> {
    let mut s = Dop853::new(f, t0, y0, t1 - t0, opts)?;
    let mut sol = DenseSolution::default();
    while s.t() != t1 {
        s.step(t1)?;
        sol.segments.push(s.segment()?.clone());
    }
    Ok(sol)
}

const A21: f64 = 5.26001519587677318785587544488E-2;
const A31: f64 = 1.97250569845378994544595329183E-2;
const A32: f64 = 5.91751709536136983633785987549E-2;
const A41: f64 = 2.95875854768068491816892993775E-2;
const A43: f64 = 8.87627564304205475450678981324E-2;
const A51: f64 = 2.41365134159266685502369798665E-1;
const A53: f64 = -8.84549479328286085344864962717E-1;
const A54: f64 = 9.24834003261792003115737966543E-1;
const A61: f64 = 3.7037037037037037037037037037E-2;
const A64: f64 = 1.70828608729473871279604482173E-1;
const A65: f64 = 1.25467687566822425016691814123E-1;
const A71: f64 = 3.7109375E-2;
const A74: f64 = 1.70252211019544039314978060272E-1;
const A75: f64 = 6.02165389804559606850219397283E-2;
const A76: f64 = -1.7578125E-2;
const A81: f64 = 3.70920001185047927108779319836E-2;
const A84: f64 = 1.70383925712239993810214054705E-1;
const A85: f64 = 1.07262030446373284651809199168E-1;
const A86: f64 = -1.53194377486244017527936158236E-2;
const A87: f64 = 8.27378916381402288758473766002E-3;
const A91: f64 = 6.24110958716075717114429577812E-1;
const A94: f64 = -3.36089262944694129406857109825E0;
const A95: f64 = -8.68219346841726006818189891453E-1;
const A96: f64 = 2.75920996994467083049415600797E1;
const A97: f64 = 2.01540675504778934086186788979E1;
const A98: f64 = -4.34898841810699588477366255144E1;
const A101: f64 = 4.77662536438264365890433908527E-1;
const A104: f64 = -2.48811461997166764192642586468E0;
const A105: f64 = -5.90290826836842996371446475743E-1;
const A106: f64 = 2.12300514481811942347288949897E1;
const A107: f64 = 1.52792336328824235832596922938E1;
const A108: f64 = -3.32882109689848629194453265587E1;
const A109: f64 = -2.03312017085086261358222928593E-2;
const A111: f64 = -9.3714243008598732571704021658E-1;
const A114: f64 = 5.18637242884406370830023853209E0;
const A115: f64 = 1.09143734899672957818500254654E0;
const A116: f64 = -8.14978701074692612513997267357E0;
const A117: f64 = -1.85200656599969598641566180701E1;
const A118: f64 = 2.27394870993505042818970056734E1;
const A119: f64 = 2.49360555267965238987089396762E0;
const A1110: f64 = -3.0467644718982195003823669022E0;
const A121: f64 = 2.27331014751653820792359768449E0;
const A124: f64 = -1.05344954667372501984066689879E1;
const A125: f64 = -2.00087205822486249909675718444E0;
const A126: f64 = -1.79589318631187989172765950534E1;
const A127: f64 = 2.79488845294199600508499808837E1;
const A128: f64 = -2.85899827713502369474065508674E0;
const A129: f64 = -8.87285693353062954433549289258E0;
const A1210: f64 = 1.23605671757943030647266201528E1;
const A1211: f64 = 6.43392746015763530355970484046E-1;
const A141: f64 = 5.61675022830479523392909219681E-2;
const A147: f64 = 2.53500210216624811088794765333E-1;
const A148: f64 = -2.46239037470802489917441475441E-1;
const A149: f64 = -1.24191423263816360469010140626E-1;
const A1410: f64 = 1.5329179827876569731206322685E-1;
const A1411: f64 = 8.20105229563468988491666602057E-3;
const A1412: f64 = 7.56789766054569976138603589584E-3;
const A1413: f64 = -8.298E-3;
const A151: f64 = 3.18346481635021405060768473261E-2;
const A156: f64 = 2.83009096723667755288322961402E-2;
const A157: f64 = 5.35419883074385676223797384372E-2;
const A158: f64 = -5.49237485713909884646569340306E-2;
const A1511: f64 = -1.08347328697249322858509316994E-4;
const A1512: f64 = 3.82571090835658412954920192323E-4;
const A1513: f64 = -3.40465008687404560802977114492E-4;
const A1514: f64 = 1.41312443674632500278074618366E-1;
const A161: f64 = -4.28896301583791923408573538692E-1;
const A166: f64 = -4.69762141536116384314449447206E0;
const A167: f64 = 7.68342119606259904184240953878E0;
const A168: f64 = 4.06898981839711007970213554331E0;
const A169: f64 = 3.56727187455281109270669543021E-1;
const A1613: f64 = -1.39902416515901462129418009734E-3;
const A1614: f64 = 2.9475147891527723389556272149E0;
const A1615: f64 = -9.15095847217987001081870187138E0;
const B1: f64 = 5.42937341165687622380535766363E-2;
const B6: f64 = 4.45031289275240888144113950566E0;
const B7: f64 = 1.89151789931450038304281599044E0;
const B8: f64 = -5.8012039600105847814672114227E0;
const B9: f64 = 3.1116436695781989440891606237E-1;
const B10: f64 = -1.52160949662516078556178806805E-1;
const B11: f64 = 2.01365400804030348374776537501E-1;
const B12: f64 = 4.47106157277725905176885569043E-2;
const BHH1: f64 = 0.244094488188976377952755905512E+00;
const BHH2: f64 = 0.733846688281611857341361741547E+00;
const BHH3: f64 = 0.220588235294117647058823529412E-01;
const C2: f64 = 0.526001519587677318785587544488E-01;
const C3: f64 = 0.789002279381515978178381316732E-01;
const C4: f64 = 0.118350341907227396726757197510E+00;
const C5: f64 = 0.281649658092772603273242802490E+00;
const C6: f64 = 0.333333333333333333333333333333E+00;
const C7: f64 = 0.25E+00;
const C8: f64 = 0.307692307692307692307692307692E+00;
const C9: f64 = 0.651282051282051282051282051282E+00;
const C10: f64 = 0.6E+00;
const C11: f64 = 0.857142857142857142857142857142E+00;
const C14: f64 = 0.1E+00;
const C15: f64 = 0.2E+00;
const C16: f64 = 0.777777777777777777777777777778E+00;
const ER1: f64 = 0.1312004499419488073250102996E-01;
const ER6: f64 = -0.1225156446376204440720569753E+01;
const ER7: f64 = -0.4957589496572501915214079952E+00;
const ER8: f64 = 0.1664377182454986536961530415E+01;
const ER9: f64 = -0.3503288487499736816886487290E+00;
const ER10: f64 = 0.3341791187130174790297318841E+00;
const ER11: f64 = 0.8192320648511571246570742613E-01;
const ER12: f64 = -0.2235530786388629525884427845E-01;
const D41: f64 = -0.84289382761090128651353491142E+01;
const D46: f64 = 0.56671495351937776962531783590E+00;
const D47: f64 = -0.30689499459498916912797304727E+01;
const D48: f64 = 0.23846676565120698287728149680E+01;
const D49: f64 = 0.21170345824450282767155149946E+01;
const D410: f64 = -0.87139158377797299206789907490E+00;
const D411: f64 = 0.22404374302607882758541771650E+01;
const D412: f64 = 0.63157877876946881815570249290E+00;
const D413: f64 = -0.88990336451333310820698117400E-01;
const D414: f64 = 0.18148505520854727256656404962E+02;
const D415: f64 = -0.91946323924783554000451984436E+01;
const D416: f64 = -0.44360363875948939664310572000E+01;
const D51: f64 = 0.10427508642579134603413151009E+02;
const D56: f64 = 0.24228349177525818288430175319E+03;
const D57: f64 = 0.16520045171727028198505394887E+03;
const D58: f64 = -0.37454675472269020279518312152E+03;
const D59: f64 = -0.22113666853125306036270938578E+02;
const D510: f64 = 0.77334326684722638389603898808E+01;
const D511: f64 = -0.30674084731089398182061213626E+02;
const D512: f64 = -0.93321305264302278729567221706E+01;
const D513: f64 = 0.15697238121770843886131091075E+02;
const D514: f64 = -0.31139403219565177677282850411E+02;
const D515: f64 = -0.93529243588444783865713862664E+01;
const D516: f64 = 0.35816841486394083752465898540E+02;
const D61: f64 = 0.19985053242002433820987653617E+02;
const D66: f64 = -0.38703730874935176555105901742E+03;
const D67: f64 = -0.18917813819516756882830838328E+03;
const D68: f64 = 0.52780815920542364900561016686E+03;
const D69: f64 = -0.11573902539959630126141871134E+02;
const D610: f64 = 0.68812326946963000169666922661E+01;
const D611: f64 = -0.10006050966910838403183860980E+01;
const D612: f64 = 0.77771377980534432092869265740E+00;
const D613: f64 = -0.27782057523535084065932004339E+01;
const D614: f64 = -0.60196695231264120758267380846E+02;
const D615: f64 = 0.84320405506677161018159903784E+02;
const D616: f64 = 0.11992291136182789328035130030E+02;
const D71: f64 = -0.25693933462703749003312586129E+02;
const D76: f64 = -0.15418974869023643374053993627E+03;
const D77: f64 = -0.23152937917604549567536039109E+03;
const D78: f64 = 0.35763911791061412378285349910E+03;
const D79: f64 = 0.93405324183624310003907691704E+02;
const D710: f64 = -0.37458323136451633156875139351E+02;
const D711: f64 = 0.10409964950896230045147246184E+03;
const D712: f64 = 0.29840293426660503123344363579E+02;
const D713: f64 = -0.43533456590011143754432175058E+02;
const D714: f64 = 0.96324553959188282948394950600E+02;
const D715: f64 = -0.39177261675615439165231486172E+02;
const D716: f64 = -0.14972683625798562581422125276E+03;
