//! Pseudo-phase and the closed-form jump predictions at a separatrix crossing
//! from `G₃` into `G_i`.

use serde::Serialize;

use crate::coeffs::SeparatrixCoefficients;
use crate::portrait::DomainTag;
use crate::{Error, Result};

pub fn lgamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::GammaDomain(x));
    }
    Ok(statrs::function::gamma::ln_gamma(x))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PseudoPhase {
    pub xi3: f64,
    pub target: DomainTag,
    pub xi_i: f64,
    pub valid: bool,
    pub eps: f64,
    pub h0: f64,
    pub k: f64,
}

fn target_index(target: DomainTag) -> Result<usize> {
    match target {
        DomainTag::G3 => Err(Error::Config("target domain must be G1 or G2".into())),
        t => Ok(t.index()),
    }
}

/// `ξ₃ = h₀/(εΘ₃)`, `ξ_i = 1 − ξ₃/θ_{i3}`; window `k√ε ≤ ξ₃ ≤ θ_{i3} − k√ε`.
pub fn pseudo_phase(
    h0: f64,
    eps: f64,
    coeffs: &SeparatrixCoefficients,
    target: DomainTag,
    k: f64,
) -> Result<PseudoPhase> {
    if !(h0 > 0.0) {
        return Err(Error::InvalidPseudoPhase(format!("h0 = {h0} must be positive")));
    }
    if !(eps > 0.0) || coeffs.theta[2] <= 0.0 {
        return Err(Error::InvalidPseudoPhase("needs eps > 0 and Theta3 > 0".into()));
    }
    let i = target_index(target)?;
    let th = coeffs.theta_ratio(i);
    let xi3 = h0 / (eps * coeffs.theta[2]);
    let xi_i = 1.0 - xi3 / th;
    let margin = k * eps.sqrt();
    Ok(PseudoPhase {
        xi3,
        target,
        xi_i,
        valid: xi3 >= margin && xi3 <= th - margin,
        eps,
        h0,
        k,
    })
}

/// Inverse map: the pseudo-phase for a given `ξ_i`.
pub fn from_xi_i(xi_i: f64, eps: f64, coeffs: &SeparatrixCoefficients, target: DomainTag, k: f64) -> Result<PseudoPhase> {
    let i = target_index(target)?;
    let xi3 = coeffs.theta_ratio(i) * (1.0 - xi_i);
    let mut pp = pseudo_phase(eps * coeffs.theta[2] * xi3, eps, coeffs, target, k)?;
    pp.xi_i = xi_i;
    Ok(pp)
}

/// Terms of the slow-variable jump, one per displayed group.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct JumpTerms {
    pub log: f64,
    pub gamma: f64,
    pub b: f64,
    pub a: f64,
    pub d: f64,
}

impl JumpTerms {
    pub fn total(&self) -> f64 {
        self.log + self.gamma + self.b + self.a + self.d
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct JumpPrediction {
    pub xi_i: f64,
    pub target: DomainTag,
    /// `Δẑ_*` per component.
    pub dz: Vec<f64>,
    pub dz_terms: Vec<JumpTerms>,
    /// `Δτ̂_*`
    pub dtau: f64,
    pub dtau_terms: JumpTerms,
    pub valid: bool,
}

/// `ln[(2π)^{3/2} / (Γ(ξ_i) Γ(θ(1−ξ_i)) Γ(1−θξ_i))]`
pub fn gamma_log(xi_i: f64, th: f64) -> Result<f64> {
    let two_pi = 2.0 * std::f64::consts::PI;
    Ok(1.5 * two_pi.ln() - lgamma(xi_i)? - lgamma(th * (1.0 - xi_i))? - lgamma(1.0 - th * xi_i)?)
}

struct Inputs {
    eps: f64,
    a: f64,
    xi: f64,
    th: f64,
    theta_i: f64,
    theta_3: f64,
    b_i: f64,
    b_3: f64,
    d_i: f64,
    d_3: f64,
}

/// One component of the jump for given `f_{z,C}` and `(A_i, A₃)`.
fn terms(x: &Inputs, f: f64, a_i: f64, a_3: f64) -> Result<JumpTerms> {
    let e = x.eps;
    let half = x.xi - 0.5;
    Ok(JumpTerms {
        log: e * f * x.a * half * ((e * x.theta_i).ln() - 2.0 * x.th * (e * x.theta_3).ln()),
        gamma: -e * x.a * f * gamma_log(x.xi, x.th)?,
        b: -e * f * half * (x.b_i - x.th * x.b_3),
        a: -e * half * (a_i - x.th * a_3),
        d: e * f / x.theta_i * (x.d_i - x.th * x.d_3),
    })
}

fn inputs(c: &SeparatrixCoefficients, pp: &PseudoPhase, eps: f64) -> Result<(usize, Inputs)> {
    let i = target_index(pp.target)?;
    Ok((
        i,
        Inputs {
            eps,
            a: c.a,
            xi: pp.xi_i,
            th: c.theta_ratio(i),
            theta_i: c.theta[i - 1],
            theta_3: c.theta[2],
            b_i: c.b[i - 1],
            b_3: c.b[2],
            d_i: c.d[i - 1],
            d_3: c.d[2],
        },
    ))
}

/// Jump of the slow variables and the slow-time shift.
pub fn jump_slow(c: &SeparatrixCoefficients, pp: &PseudoPhase, eps: f64, force: bool) -> Result<JumpPrediction> {
    if !pp.valid && !force {
        return Err(Error::InvalidPseudoPhase(format!(
            "xi3 = {} outside the window for k = {}",
            pp.xi3, pp.k
        )));
    }
    let (i, x) = inputs(c, pp, eps)?;
    let dz_terms: Vec<JumpTerms> = (0..c.dim_z())
        .map(|j| terms(&x, c.f_zc[j], c.big_a[i - 1][j], c.big_a[2][j]))
        .collect::<Result<_>>()?;
    let dtau_terms = terms(&x, 1.0, 0.0, 0.0)?;
    Ok(JumpPrediction {
        xi_i: pp.xi_i,
        target: pp.target,
        dz: dz_terms.iter().map(JumpTerms::total).collect(),
        dz_terms,
        dtau: dtau_terms.total(),
        dtau_terms,
        valid: pp.valid,
    })
}

/// Slow-time shift for a bare `ξ_i`, without a validity window.
pub fn dtau_of_xi(c: &SeparatrixCoefficients, target: DomainTag, xi_i: f64, eps: f64) -> Result<f64> {
    let pp = from_xi_i(xi_i, eps, c, target, 0.0)?;
    let (_, x) = inputs(c, &pp, eps)?;
    Ok(terms(&x, 1.0, 0.0, 0.0)?.total())
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryPrediction {
    /// `z` at the last `η` crossing, leading part and `ε` corrections.
    pub z0: Vec<f64>,
    pub z0_eps: Vec<f64>,
    /// `h'₀ = h₀ − εΘ_i`.
    pub h0_prime: f64,
    /// `z'₀ − z₀`.
    pub dz0: Vec<f64>,
    /// `z'₀` from the outgoing anchor.
    pub z0_prime: Vec<f64>,
    pub z0_prime_eps: Vec<f64>,
}

/// Boundary-layer values around the crossing.
///
/// `anchor3` is `ẑ_{3,*}`; `anchor_i` is `ẑ_{i,*}`. For `G₁` the roles of the
/// loop indices are exchanged.
pub fn boundary_predictors(
    c: &SeparatrixCoefficients,
    anchor3: &[f64],
    anchor_i: &[f64],
    pp: &PseudoPhase,
    eps: f64,
) -> Result<BoundaryPrediction> {
    let i = target_index(pp.target)?;
    let o = 3 - i;
    let (ii, oo) = (i - 1, o - 1);
    let a = c.a;
    let h0 = pp.h0;
    let xi3 = pp.xi3;
    let th_i = c.theta_ratio(i);
    let th_o = c.theta_ratio(o);
    let t3 = c.theta[2];
    let two_pi = 2.0 * std::f64::consts::PI;
    let g3 = two_pi.ln() - lgamma(xi3)? - lgamma(xi3 + th_o)?;
    let h0p = h0 - eps * c.theta[ii];
    if h0p >= 0.0 {
        return Err(Error::InvalidPseudoPhase(format!(
            "h0 = {h0} does not lead into G{i}"
        )));
    }
    let xi = -h0p / (eps * c.theta[ii]);
    let gi = 0.5 * two_pi.ln() - lgamma(xi)?;
    let k = c.dim_z();
    let mut out = BoundaryPrediction {
        z0: vec![0.0; k],
        z0_eps: vec![0.0; k],
        h0_prime: h0p,
        dz0: vec![0.0; k],
        z0_prime: vec![0.0; k],
        z0_prime_eps: vec![0.0; k],
    };
    for j in 0..k {
        let f = c.f_zc[j];
        let (a_i, a_o, a_3) = (c.big_a[ii][j], c.big_a[oo][j], c.big_a[2][j]);
        let lead = anchor3[j] - f / t3 * (-2.0 * a * h0 * (eps * t3).ln() + c.b[2] * h0) - a_3 / t3 * h0;
        let corr = 2.0 * eps * a * f * (-0.5 * g3 + 0.5 * th_i * xi3.ln())
            - eps * 0.5 * a * f * (th_i - th_o) * h0.ln()
            - eps * 0.5 * f * ((th_o * c.b[ii] - th_i * c.b[oo]) + 2.0 * c.d[2] / t3)
            + eps * 0.25 * a_3 * (th_i - th_o)
            + eps * (a_o - a_i) / 4.0;
        out.z0[j] = lead + corr;
        out.z0_eps[j] = corr;
        out.dz0[j] = eps * f * (-0.5 * a * h0.ln() - 0.5 * a * (-h0p).ln() + c.b[ii]) + eps * a_i;
        let lead_i = anchor_i[j] - eps * f * (a * xi * (eps * c.theta[ii]).ln() - c.b[ii] * xi) + eps * a_i * xi;
        let corr_i = -eps * a * f * (-gi + 0.5 * xi.ln()) - eps * f / c.theta[ii] * c.d[ii];
        out.z0_prime[j] = lead_i + corr_i;
        out.z0_prime_eps[j] = corr_i;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InvariantMode {
    TimeDependent,
    /// Carries the bracket `{S_i, S₃}` at `z_*`.
    SlowFast,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantJump {
    /// `S_i(ẑ_{3,*})` reconstructed from `J₋`.
    pub baseline: f64,
    pub two_pi_j_plus: f64,
    pub terms: JumpTerms,
    /// `−εθ_{i3}(ξ_i − ½){S_i, S₃}`
    pub bracket_term: f64,
}

/// `2πJ₊` after the crossing. `two_pi_j_minus` is the incoming `2πJ₋`.
pub fn invariant_jump(
    c: &SeparatrixCoefficients,
    two_pi_j_minus: f64,
    pp: &PseudoPhase,
    eps: f64,
    mode: InvariantMode,
    bracket: f64,
) -> Result<InvariantJump> {
    let (i, x) = inputs(c, pp, eps)?;
    let th = x.th;
    let baseline = c.s[i - 1] + th * (two_pi_j_minus - c.s[2]);
    let t = terms(&x, 1.0, 0.0, 0.0)?;
    let ti = x.theta_i;
    let scaled = JumpTerms {
        log: ti * t.log,
        gamma: ti * t.gamma,
        b: ti * t.b,
        a: 0.0,
        d: ti * t.d,
    };
    let bracket_term = match mode {
        InvariantMode::TimeDependent => 0.0,
        InvariantMode::SlowFast => -eps * th * (pp.xi_i - 0.5) * bracket,
    };
    Ok(InvariantJump {
        baseline,
        two_pi_j_plus: baseline + scaled.total() + bracket_term,
        terms: scaled,
        bracket_term,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{FitDiagnostics, SectionMeta};

    pub(crate) fn symmetric() -> SeparatrixCoefficients {
        SeparatrixCoefficients {
            z: vec![0.0],
            p_c: 0.0,
            q_c: 0.0,
            h_c: 0.0,
            a: 1.0,
            b: [16f64.ln(), 16f64.ln(), 2.0 * 16f64.ln()],
            theta: [4.0 / 3.0, 4.0 / 3.0, 8.0 / 3.0],
            big_a: [vec![0.0], vec![0.0], vec![0.0]],
            d: [0.1, 0.1, 0.2],
            g: [vec![0.0], vec![0.0], vec![0.0]],
            s: [4.0 / 3.0, 4.0 / 3.0, 8.0 / 3.0],
            f_zc: vec![1.0],
            sections: SectionMeta {
                flip: false,
                rotate_deg: 0.0,
                e_xi: [0.0, 1.0],
                e_eta: [1.0, 0.0],
            },
            delta: 1e-4,
            diagnostics: FitDiagnostics::default(),
        }
    }

    fn asymmetric() -> SeparatrixCoefficients {
        let mut c = symmetric();
        c.theta = [0.9, 1.5, 2.4];
        c.b = [2.5, 3.1, 5.6];
        c.d = [0.05, -0.2, -0.15];
        c.big_a = [vec![0.3], vec![-0.1], vec![0.2]];
        c.f_zc = vec![0.7];
        c
    }

    #[test]
    fn lgamma_values() {
        assert!(lgamma(1.0).unwrap().abs() < 1e-15);
        assert!((lgamma(0.5).unwrap() - 0.5723649429247001).abs() < 1e-14);
        let refl = lgamma(0.25).unwrap() + lgamma(0.75).unwrap();
        let want = std::f64::consts::PI.ln() + 0.5 * 2f64.ln();
        assert!((refl - want).abs() < 1e-13);
        assert!(matches!(lgamma(0.0), Err(Error::GammaDomain(_))));
        assert!(lgamma(-1.5).is_err());
    }

    #[test]
    fn pseudo_phase_examples() {
        let c = symmetric();
        let eps = 1e-3;
        let pp = pseudo_phase(0.5 * eps * c.theta[2], eps, &c, DomainTag::G2, 3.0).unwrap();
        assert!((pp.xi3 - 0.5).abs() < 1e-14);
        assert!(!pp.valid);
        let pp = pseudo_phase(0.25 * eps * 8.0 / 3.0, eps, &c, DomainTag::G2, 3.0).unwrap();
        assert!((pp.xi3 - 0.25).abs() < 1e-14 && (pp.xi_i - 0.5).abs() < 1e-14);
        assert!(pp.valid);
        let back = from_xi_i(pp.xi_i, eps, &c, DomainTag::G2, 3.0).unwrap();
        assert!((back.xi3 - pp.xi3).abs() < 1e-15);
        assert!(pseudo_phase(0.0, eps, &c, DomainTag::G2, 3.0).is_err());
    }

    #[test]
    fn symmetric_point_is_minus_eps_a_ln2() {
        let c = symmetric();
        let eps = 1e-3;
        let dt = dtau_of_xi(&c, DomainTag::G2, 0.5, eps).unwrap();
        assert!((dt + eps * 2f64.ln()).abs() < 1e-15, "{}", dt + eps * 2f64.ln());
    }

    #[test]
    fn time_shift_is_unit_forcing_case() {
        let mut c = asymmetric();
        c.f_zc = vec![1.0];
        c.big_a = [vec![0.0], vec![0.0], vec![0.0]];
        let pp = from_xi_i(0.37, 1e-3, &c, DomainTag::G1, 0.0).unwrap();
        let j = jump_slow(&c, &pp, 1e-3, true).unwrap();
        assert_eq!(j.dz[0], j.dtau);
    }

    #[test]
    fn breakdown_sums_and_linearity() {
        let c = asymmetric();
        let pp = from_xi_i(0.6, 2e-3, &c, DomainTag::G2, 0.0).unwrap();
        let j = jump_slow(&c, &pp, 2e-3, true).unwrap();
        assert_eq!(j.dz[0], j.dz_terms[0].total());
        let mut c2 = c.clone();
        c2.f_zc = vec![1.4];
        c2.big_a = [vec![0.6], vec![-0.2], vec![0.4]];
        let j2 = jump_slow(&c2, &pp, 2e-3, true).unwrap();
        assert!((j2.dz[0] - 2.0 * j.dz[0]).abs() < 1e-15);
    }

    #[test]
    fn invalid_pseudo_phase_requires_force() {
        let c = symmetric();
        let pp = pseudo_phase(0.45 * 1e-3 * c.theta[2], 1e-3, &c, DomainTag::G2, 3.0).unwrap();
        assert!(matches!(jump_slow(&c, &pp, 1e-3, false), Err(Error::InvalidPseudoPhase(_))));
        assert!(jump_slow(&c, &pp, 1e-3, true).is_ok());
    }

    #[test]
    fn doubling_eps_log_term() {
        let c = asymmetric();
        let xi = 0.3;
        let th = c.theta_ratio(2);
        let t = |eps: f64| {
            let pp = from_xi_i(xi, eps, &c, DomainTag::G2, 0.0).unwrap();
            jump_slow(&c, &pp, eps, true).unwrap().dtau_terms.log
        };
        let eps = 1e-3;
        let diff = t(2.0 * eps) - 2.0 * t(eps);
        let want = 2.0 * eps * c.a * (xi - 0.5) * (1.0 - 2.0 * th) * 2f64.ln();
        assert!((diff - want).abs() < 1e-15, "{diff} {want}");
    }

    #[test]
    fn gamma_term_diverges_logarithmically() {
        let c = asymmetric();
        let eps = 1e-3;
        let g = |xi: f64| {
            let pp = from_xi_i(xi, eps, &c, DomainTag::G2, 0.0).unwrap();
            jump_slow(&c, &pp, eps, true).unwrap().dtau_terms.gamma
        };
        let xs = [1e-4, 1e-5, 1e-6];
        let ys: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
        let lx: Vec<f64> = xs.iter().map(|x: &f64| -x.ln()).collect();
        let slope = crate::numeric::slope(&lx, &ys);
        let want = eps * c.a;
        assert!((slope - want).abs() < 0.02 * want.abs(), "{slope} {want}");
    }

    #[test]
    fn exchange_symmetry() {
        let c = symmetric();
        for xi in [0.2, 0.5, 0.7] {
            let a = dtau_of_xi(&c, DomainTag::G1, xi, 1e-3).unwrap();
            let b = dtau_of_xi(&c, DomainTag::G2, xi, 1e-3).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn invariant_jump_compositions() {
        let c = asymmetric();
        let eps = 1e-3;
        let pp = from_xi_i(0.4, eps, &c, DomainTag::G1, 0.0).unwrap();
        let dt = jump_slow(&c, &pp, eps, true).unwrap().dtau;
        let jm = c.s[2] + 0.01;
        let r = invariant_jump(&c, jm, &pp, eps, InvariantMode::TimeDependent, 0.0).unwrap();
        let s_hat = c.s[0] + c.theta_ratio(1) * (jm - c.s[2]);
        assert!((r.two_pi_j_plus - (s_hat + c.theta[0] * dt)).abs() < 1e-15);
        let r0 = invariant_jump(&c, c.s[2], &pp, eps, InvariantMode::TimeDependent, 0.0).unwrap();
        assert_eq!(r0.baseline, c.s[0]);
        let sf = invariant_jump(&c, jm, &pp, eps, InvariantMode::SlowFast, 0.0).unwrap();
        assert_eq!(sf.two_pi_j_plus, r.two_pi_j_plus);
    }

    #[test]
    fn boundary_predictor_arithmetic() {
        let c = symmetric();
        let eps = 1e-3;
        let pp = pseudo_phase(0.25 * eps * c.theta[2], eps, &c, DomainTag::G2, 3.0).unwrap();
        let b = boundary_predictors(&c, &[0.0], &[0.0], &pp, eps).unwrap();
        assert!((pp.h0 - 6.6667e-4).abs() < 1e-8);
        assert!((b.h0_prime + 6.6667e-4).abs() < 1e-8);
        // the two loops cancel in the asymmetry terms
        let mut c1 = c.clone();
        c1.d = [0.0, 0.0, 0.0];
        let b1 = boundary_predictors(&c1, &[0.0], &[0.0], &pp, eps).unwrap();
        let two_pi = 2.0 * std::f64::consts::PI;
        let g3 = two_pi.ln() - lgamma(0.25).unwrap() - lgamma(0.75).unwrap();
        let want = 2.0 * eps * (-0.5 * g3 + 0.25 * 0.25f64.ln()) - eps * 0.5 * (0.5 * c.b[1] - 0.5 * c.b[0]);
        assert!((b1.z0_eps[0] - want).abs() < 1e-15);
    }
}
