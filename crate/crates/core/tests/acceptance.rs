//! Acceptance suite. Prints one line per criterion and exits non-zero when a
//! criterion fails outside the recorded known deviations.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use sepcross::coeffs::{bundle, loop_data, SeparatrixCoefficients};
use sepcross::jump::gamma_log;
use sepcross::model::{build_system, ModelConfig, SystemDef};
use sepcross::numeric::{median, rms, slope};
use sepcross::portrait::{find_saddle, periodic_orbit, DomainTag};
use sepcross::simulate::{capture_fractions, run_sweep, CaptureConfig, SweepConfig, SweepResult, SweepRow};

const EPS_GRID: [f64; 3] = [1e-2, 3.16e-3, 1e-3];

struct Outcome {
    id: &'static str,
    pass: bool,
    /// Failing sub-checks that are recorded deviations.
    known: Vec<String>,
    detail: String,
}

impl Outcome {
    fn line(&self) -> String {
        let verdict = if self.pass && self.known.is_empty() { "PASS" } else { "FAIL" };
        let mut s = format!("{} {verdict} {}", self.id, self.detail);
        if !self.known.is_empty() {
            s.push_str(&format!(" [known deviation: {}]", self.known.join("; ")));
        }
        s
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn sys(name: &str) -> SystemDef {
    build_system(&ModelConfig::catalog(name)).unwrap()
}

fn sweep(model: ModelConfig, eps: f64, phases: usize, h_init: f64, z: Vec<f64>) -> SweepResult {
    let mut cfg = SweepConfig::new(model, eps, phases);
    cfg.h_init = Some(h_init);
    cfg.z_init = z;
    run_sweep(cfg).unwrap()
}

fn areas(sys: &SystemDef, z: &[f64]) -> [f64; 3] {
    loop_data(sys, z, None).unwrap().geometry.areas
}

fn identities(c: &SeparatrixCoefficients, sys: &SystemDef, checks: &mut Vec<(String, bool)>) {
    let chart = find_saddle(sys, &c.z, sys.saddle_seed).unwrap();
    let period = |h: f64| periodic_orbit(sys, &chart, DomainTag::G3, h, false).unwrap().period;
    let a3 = (period(1e-9) - period(1e-7)) / 100f64.ln();
    checks.push((format!("a3/a={:.6}", a3 / c.a), rel(a3, 2.0 * c.a) < 1e-4));
    let db = c.b[2] - c.b[0] - c.b[1];
    checks.push((format!("db={db:.1e}"), db.abs() <= 1e-5));
    let dt = c.theta[2] - c.theta[0] - c.theta[1];
    checks.push((format!("dTheta={dt:.1e}"), dt.abs() <= 1e-6));
    let dd = c.d[2] - c.d[0] - c.d[1];
    checks.push((format!("dd={dd:.1e}"), dd.abs() <= 1e-4 * (1.0 + c.d[2].abs())));
    for j in 0..c.dim_z() {
        let da = c.big_a[2][j] - c.big_a[0][j] - c.big_a[1][j];
        checks.push((format!("dA={da:.1e}"), da.abs() <= 1e-6 * (1.0 + c.big_a[2][j].abs())));
        let dg = c.g[2][j] - c.g[0][j] - c.g[1][j];
        checks.push((format!("dg={dg:.1e}"), dg.abs() <= 1e-4 * (1.0 + c.g[2][j].abs())));
    }
    let ds = c.s[2] - c.s[0] - c.s[1];
    checks.push((format!("dS={ds:.1e}"), ds.abs() <= 1e-6 * c.s[2].abs()));
}

fn a1() -> Outcome {
    let mut checks: Vec<(String, bool)> = Vec::new();
    let dis = sys("duffing_dissipative");
    let c = bundle(&dis, &[0.0]).unwrap();
    identities(&c, &dis, &mut checks);

    let br = sys("duffing_breathing_asym");
    let tau = 0.3;
    let c = bundle(&br, &[tau]).unwrap();
    identities(&c, &br, &mut checks);
    let step = 1e-4;
    let (sp, sm) = (areas(&br, &[tau + step]), areas(&br, &[tau - step]));
    let worst = (0..3)
        .map(|j| rel((sp[j] - sm[j]) / (2.0 * step), c.theta[j]))
        .fold(0.0, f64::max);
    checks.push((format!("Theta=dS/dtau rel={worst:.1e}"), worst < 1e-4));

    let sf = sys("duffing_slowfast_deepening");
    let z = [0.3, 1.0];
    let c = bundle(&sf, &z).unwrap();
    let (sy, sx) = {
        let (yp, ym) = (areas(&sf, &[z[0] + step, z[1]]), areas(&sf, &[z[0] - step, z[1]]));
        let (xp, xm) = (areas(&sf, &[z[0], z[1] + step]), areas(&sf, &[z[0], z[1] - step]));
        let d = |a: [f64; 3], b: [f64; 3]| [0, 1, 2].map(|j| (a[j] - b[j]) / (2.0 * step));
        (d(yp, ym), d(xp, xm))
    };
    let hc = |y: f64, x: f64| find_saddle(&sf, &[y, x], sf.saddle_seed).unwrap().h_c;
    let hy = (hc(z[0] + step, z[1]) - hc(z[0] - step, z[1])) / (2.0 * step);
    let hx = (hc(z[0], z[1] + step) - hc(z[0], z[1] - step)) / (2.0 * step);
    let mut worst_t: f64 = 0.0;
    let mut worst_a: f64 = 0.0;
    for j in 0..3 {
        worst_t = worst_t.max(rel(sx[j] * hy - sy[j] * hx, c.theta[j]));
        let scale = c.big_a[j][0].abs().max(c.big_a[j][1].abs());
        worst_a = worst_a.max((c.big_a[j][0] - sx[j]).abs() / scale);
        worst_a = worst_a.max((c.big_a[j][1] + sy[j]).abs() / scale);
    }
    checks.push((format!("Theta={{S,hC}} rel={worst_t:.1e}"), worst_t < 1e-4));
    checks.push((format!("A=(Sx,-Sy) rel={worst_a:.1e}"), worst_a < 1e-4));

    let pass = checks.iter().all(|c| c.1);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0.as_str()).collect();
    Outcome {
        id: "A1",
        pass,
        known: Vec::new(),
        detail: if pass {
            format!("{} identity checks hold", checks.len())
        } else {
            format!("failed: {}", failed.join(", "))
        },
    }
}

/// Median-subtracted residuals of the slow-time shift.
struct ShiftStats {
    residual_rms: f64,
    variation_rms: f64,
    used: usize,
}

fn shift_rows(r: &SweepResult) -> Vec<&SweepRow> {
    r.rows.iter().filter(|r| r.measured_dtau.is_some()).collect()
}

fn shift_stats(r: &SweepResult) -> ShiftStats {
    let rows = shift_rows(r);
    let m: Vec<f64> = rows.iter().map(|r| r.measured_dtau.unwrap()).collect();
    let p: Vec<f64> = rows.iter().map(|r| r.predicted_dtau.unwrap()).collect();
    let (mm, pm) = (median(&m), median(&p));
    let res: Vec<f64> = m.iter().zip(&p).map(|(a, b)| (a - mm) - (b - pm)).collect();
    let var: Vec<f64> = p.iter().map(|b| b - pm).collect();
    ShiftStats {
        residual_rms: rms(&res),
        variation_rms: rms(&var),
        used: rows.len(),
    }
}

fn log_slope(eps: &[f64], vals: &[f64]) -> f64 {
    let lx: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ly: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
    slope(&lx, &ly)
}

/// Fit of the measured shift on `[1, ξ − ½, Γ-term]` and its 95% prediction
/// band at `ξ = ½`.
fn symmetric_point(r: &SweepResult) -> (f64, f64) {
    let rows = shift_rows(r);
    let th = r.coeffs.theta_ratio(2);
    let basis = |xi: f64| vec![1.0, xi - 0.5, gamma_log(xi, th).unwrap()];
    let x = DMatrix::from_row_iterator(rows.len(), 3, rows.iter().flat_map(|r| basis(r.xi_i.unwrap())));
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.measured_dtau.unwrap()));
    let xtx_inv = (x.transpose() * &x).try_inverse().unwrap();
    let coef = &xtx_inv * x.transpose() * &y;
    let resid = &y - &x * &coef;
    let s2 = resid.norm_squared() / (rows.len() - 3) as f64;
    let x0 = DVector::from_vec(basis(0.5));
    let value = x0.dot(&coef);
    let lev = (x0.transpose() * &xtx_inv * &x0)[(0, 0)];
    (value, 1.96 * (s2 * (1.0 + lev)).sqrt())
}

fn a2(dissipative: &[SweepResult]) -> Outcome {
    let stats: Vec<ShiftStats> = dissipative.iter().map(shift_stats).collect();
    let fine = &stats[2];
    let ratio = fine.residual_rms / fine.variation_rms;
    let res: Vec<f64> = stats.iter().map(|s| s.residual_rms).collect();
    let k = log_slope(&EPS_GRID, &res);
    let r = &dissipative[2];
    let (value, band) = symmetric_point(r);
    let target = -EPS_GRID[2] * r.coeffs.a * 2f64.ln();
    let inside = (value - target).abs() <= band;
    let pass = ratio <= 0.25 && k >= 1.2 && inside;
    Outcome {
        id: "A2",
        pass,
        known: Vec::new(),
        detail: format!(
            "rms ratio {ratio:.3} (<= 0.25, n={}), residual slope {k:.2} (>= 1.2; rms {:.2e} {:.2e} {:.2e}), fit at xi=1/2 {value:.4e} +- {band:.1e} vs -eps a ln2 = {target:.4e}",
            fine.used, res[0], res[1], res[2]
        ),
    }
}

fn a3() -> Outcome {
    let mut meds = Vec::new();
    let mut fine = None;
    for &eps in &EPS_GRID {
        let r = sweep(ModelConfig::catalog("duffing_breathing_asym"), eps, 200, 0.1, Vec::new());
        let sel = |lo: f64, hi: f64| -> (Vec<f64>, Vec<f64>) {
            r.rows
                .iter()
                .filter(|r| r.measured_two_pi_j_plus.is_some() && r.xi_i.is_some_and(|x| x >= lo && x <= hi))
                .map(|r| {
                    let p = r.predicted_two_pi_j_plus.unwrap();
                    ((r.measured_two_pi_j_plus.unwrap() - p).abs(), (p - r.baseline.unwrap()).abs())
                })
                .unzip()
        };
        let (res, sig) = sel(0.1, 0.9);
        meds.push(median(&res));
        if eps == EPS_GRID[2] {
            let mid = median(&sel(0.3, 0.5).0);
            let edge = median(&sel(0.8, 0.95).0);
            fine = Some((median(&res) / median(&sig), res.len(), mid, edge));
        }
    }
    let (ratio, n, mid, edge) = fine.unwrap();
    let k = log_slope(&EPS_GRID, &meds);
    let grows = edge > mid;
    let mut known = Vec::new();
    if !grows {
        known.push(format!(
            "residual does not grow toward xi_i -> 1 (median {edge:.2e} in [0.8,0.95] vs {mid:.2e} in [0.3,0.5])"
        ));
    }
    Outcome {
        id: "A3",
        pass: ratio <= 0.2 && k >= 1.2,
        known,
        detail: format!(
            "median residual/jump {ratio:.3} (<= 0.2, n={n}), residual slope {k:.2} (>= 1.2; medians {:.2e} {:.2e} {:.2e})",
            meds[0], meds[1], meds[2]
        ),
    }
}

fn a4() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for m in ["duffing_dissipative", "duffing_breathing_asym"] {
        let mut cfg = CaptureConfig::new(ModelConfig::catalog(m), 1e-3, 2000);
        cfg.seed = 7;
        let s = capture_fractions(&cfg).unwrap();
        let z = (s.fractions[0] - s.theta_ratio[0]) / s.sigma[0];
        let ok = z.abs() <= 3.0 && s.ks_statistic < s.ks_critical && s.counted >= 1900;
        pass &= ok;
        parts.push(format!(
            "{m}: G1 {:.4} vs {:.4} ({z:+.2} sigma), KS {:.4} < {:.4}, counted {}",
            s.fractions[0], s.theta_ratio[0], s.ks_statistic, s.ks_critical, s.counted
        ));
    }
    Outcome {
        id: "A4",
        pass,
        known: Vec::new(),
        detail: parts.join("; "),
    }
}

fn a5(dissipative: &[SweepResult]) -> Outcome {
    let metric = |r: &SweepResult| -> [f64; 3] {
        let rows: Vec<&SweepRow> = r.rows.iter().filter(|r| r.predicted_z0.is_some()).collect();
        let m = |f: &dyn Fn(&SweepRow) -> f64| median(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
        [
            m(&|r| ((r.measured_z0.unwrap() - r.predicted_z0.unwrap()) / r.predicted_z0_eps.unwrap()).abs()),
            m(&|r| ((r.measured_z0p.unwrap() - r.predicted_z0p.unwrap()) / r.predicted_dz0.unwrap()).abs()),
            m(&|r| ((r.measured_z0p.unwrap() - r.predicted_z0p_anchor.unwrap()) / r.predicted_z0p_eps.unwrap()).abs()),
        ]
    };
    let ms: Vec<[f64; 3]> = dissipative.iter().map(metric).collect();
    let fine_ok = ms[2].iter().all(|&v| v <= 0.1);
    let monotone = (0..3).all(|j| ms[0][j] > ms[1][j] && ms[1][j] > ms[2][j]);
    let fmt = |j: usize| format!("{:.2e}/{:.2e}/{:.2e}", ms[0][j], ms[1][j], ms[2][j]);
    Outcome {
        id: "A5",
        pass: fine_ok && monotone,
        known: Vec::new(),
        detail: format!(
            "error/correction along eps grid: z0 {}, z0' from z0 {}, z0' from anchor {} (<= 0.1 at 1e-3, decreasing)",
            fmt(0),
            fmt(1),
            fmt(2)
        ),
    }
}

fn a6(reference: &SweepResult) -> Outcome {
    let mut model = ModelConfig::catalog("duffing_dissipative");
    model.sections.rotate_deg = 20.0;
    let rotated = sweep(model, EPS_GRID[2], 200, 0.6, Vec::new());
    let tol = 0.25 * shift_stats(reference).variation_rms;
    let both: Vec<(&SweepRow, &SweepRow)> = reference
        .rows
        .iter()
        .zip(&rotated.rows)
        .filter(|(a, b)| a.measured_dtau.is_some() && b.measured_dtau.is_some())
        .collect();
    let pa: Vec<f64> = both.iter().map(|(a, _)| a.predicted_dtau.unwrap()).collect();
    let pb: Vec<f64> = both.iter().map(|(_, b)| b.predicted_dtau.unwrap()).collect();
    let (ma, mb) = (median(&pa), median(&pb));
    let change: Vec<f64> = pa.iter().zip(&pb).map(|(a, b)| (a - ma) - (b - mb)).collect();
    let shift = median(&pa.iter().zip(&pb).map(|(a, b)| b - a).collect::<Vec<_>>());
    let ch = rms(&change);
    let rot_ratio = shift_stats(&rotated).residual_rms / shift_stats(&rotated).variation_rms;
    Outcome {
        id: "A6",
        pass: ch <= tol && rot_ratio <= 0.25,
        known: Vec::new(),
        detail: format!(
            "rotated 20 deg: prediction change rms {ch:.2e} <= {tol:.2e} (n={}), rotated-run rms ratio {rot_ratio:.3}; constant offset {shift:.2e}",
            both.len()
        ),
    }
}

fn a7() -> Outcome {
    let r = sweep(ModelConfig::catalog("duffing_slowfast_deepening"), 1e-3, 50, 0.1, vec![0.3, 1.0]);
    let rows: Vec<&SweepRow> = r.rows.iter().filter(|r| r.measured_two_pi_j_plus.is_some()).collect();
    let res: Vec<f64> = rows
        .iter()
        .map(|r| (r.measured_two_pi_j_plus.unwrap() - r.predicted_two_pi_j_plus.unwrap()).abs())
        .collect();
    let without: Vec<f64> = rows
        .iter()
        .map(|r| (r.measured_two_pi_j_plus.unwrap() - r.predicted_two_pi_j_plus.unwrap() + r.bracket_term.unwrap()).abs())
        .collect();
    let jump: Vec<f64> = rows
        .iter()
        .map(|r| (r.predicted_two_pi_j_plus.unwrap() - r.baseline.unwrap()).abs())
        .collect();
    let ratio = median(&res) / median(&jump);
    // bracket term is −εθ(ξ − ½){S_i, S₃}: its sign relative to ξ − ½ is fixed per target
    let mut stable = true;
    let mut nonzero = true;
    for t in [1u8, 2] {
        let signs: Vec<f64> = rows
            .iter()
            .filter(|r| r.target == Some(t) && (r.xi_i.unwrap() - 0.5).abs() > 0.05)
            .map(|r| (r.bracket_term.unwrap() * (r.xi_i.unwrap() - 0.5)).signum())
            .collect();
        stable &= signs.windows(2).all(|w| w[0] == w[1]);
        nonzero &= rows
            .iter()
            .filter(|r| r.target == Some(t))
            .all(|r| r.bracket_term.unwrap() != 0.0);
    }
    let matters = median(&without) > 2.0 * median(&res);
    Outcome {
        id: "A7",
        pass: ratio <= 0.3 && stable && nonzero && matters && rows.len() >= 45,
        known: Vec::new(),
        detail: format!(
            "median residual/jump {ratio:.3} (<= 0.3, n={}), bracket term nonzero {nonzero}, sign-stable {stable}, residual without it {:.2e} vs {:.2e}",
            rows.len(),
            median(&without),
            median(&res)
        ),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        for id in ["A1", "A2", "A3", "A4", "A5", "A6", "A7"] {
            println!("{id}: test");
        }
        return ExitCode::SUCCESS;
    }
    let filter: Vec<&String> = args[1..].iter().filter(|a| !a.starts_with('-')).collect();
    let wanted = |id: &str| filter.is_empty() || filter.iter().any(|f| id.contains(f.as_str()));
    let start = Instant::now();
    let needs_sweeps = ["A2", "A5", "A6"].iter().any(|id| wanted(id));
    let dissipative: Vec<SweepResult> = if needs_sweeps {
        EPS_GRID
            .iter()
            .map(|&eps| sweep(ModelConfig::catalog("duffing_dissipative"), eps, 200, 0.6, Vec::new()))
            .collect()
    } else {
        Vec::new()
    };
    let mut outcomes = Vec::new();
    let mut run = |id: &'static str, f: &dyn Fn() -> Outcome| {
        if wanted(id) {
            let t = Instant::now();
            let o = f();
            println!("{}  ({:.1}s)", o.line(), t.elapsed().as_secs_f64());
            outcomes.push(o);
        }
    };
    run("A1", &a1);
    run("A2", &|| a2(&dissipative));
    run("A3", &a3);
    run("A4", &a4);
    run("A5", &|| a5(&dissipative));
    run("A6", &|| a6(&dissipative[2]));
    run("A7", &a7);
    let hard: Vec<&str> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    println!(
        "acceptance: {}/{} pass, {} with known deviations, {:.0}s",
        outcomes.iter().filter(|o| o.pass && o.known.is_empty()).count(),
        outcomes.len(),
        outcomes.iter().filter(|o| !o.known.is_empty()).count(),
        start.elapsed().as_secs_f64()
    );
    if hard.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failing: {}", hard.join(", "));
        ExitCode::FAILURE
    }
}
