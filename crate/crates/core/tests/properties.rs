use proptest::prelude::*;

use sepcross::coeffs::{FitDiagnostics, SectionMeta, SeparatrixCoefficients};
use sepcross::exprdsl::{parse, Env, Scope};
use sepcross::jump::{dtau_of_xi, from_xi_i, jump_slow, pseudo_phase};
use sepcross::portrait::DomainTag;

fn leaf() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("p".to_string()),
        Just("q".to_string()),
        (-3.0..3.0f64).prop_map(|c| format!("({c:.3})")),
    ]
}

fn expr() -> impl Strategy<Value = String> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} * {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} / (2 + {b}^2))")),
            inner.clone().prop_map(|a| format!("(-{a})")),
            inner.clone().prop_map(|a| format!("({a}^2)")),
            inner.clone().prop_map(|a| format!("({a}^3)")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("exp(sin({a}))")),
            inner.clone().prop_map(|a| format!("ln(1 + {a}^2)")),
            inner.prop_map(|a| format!("sqrt(1 + {a}^2)")),
        ]
    })
}

fn env(p: f64, q: f64) -> Env {
    [("p".to_string(), p), ("q".to_string(), q)].into_iter().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn derivative_matches_central_difference(text in expr(), p in -1.5..1.5f64, q in -1.5..1.5f64) {
        let s = Scope::new(&["p", "q"]);
        let e = parse(&text, &s).unwrap();
        for var in ["p", "q"] {
            let d = e.differentiate(var, &s).unwrap();
            let Ok(value) = d.evaluate(&env(p, q)) else { continue };
            prop_assume!(value.abs() < 1e4);
            let h = 1e-6;
            let shifted = |dx: f64| {
                let (pp, qq) = if var == "p" { (p + dx, q) } else { (p, q + dx) };
                e.evaluate(&env(pp, qq)).unwrap()
            };
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            let scale = 1.0 + e.evaluate(&env(p, q)).unwrap().abs();
            prop_assert!(
                (value - fd).abs() <= 1e-6 * (1.0 + value.abs()) * scale,
                "d/d{var} {text}: {value} vs {fd}"
            );
        }
    }

    #[test]
    fn print_parse_round_trip(text in expr()) {
        let s = Scope::new(&["p", "q"]);
        let e = parse(&text, &s).unwrap();
        let again = parse(&e.to_string(), &s).unwrap();
        prop_assert_eq!(again.to_string(), e.to_string());
        for k in 0..100 {
            let m = env(-1.5 + 0.03 * k as f64, 1.2 - 0.021 * k as f64);
            let (a, b) = (e.evaluate(&m).unwrap(), again.evaluate(&m).unwrap());
            prop_assert!((a - b).abs() <= 1e-15 * a.abs().max(1e-300), "{text}: {a} vs {b}");
        }
    }

    #[test]
    fn compiled_program_matches_tree(text in expr(), p in -1.5..1.5f64, q in -1.5..1.5f64) {
        let s = Scope::new(&["p", "q"]);
        let e = parse(&text, &s).unwrap();
        let c = e.compile(&["p", "q"]).unwrap();
        prop_assert_eq!(c.eval(&[p, q]).unwrap(), e.evaluate(&env(p, q)).unwrap());
    }
}

fn coefficients(theta: [f64; 2], b: [f64; 2], d: [f64; 3], a: [[f64; 2]; 3], f: [f64; 2]) -> SeparatrixCoefficients {
    SeparatrixCoefficients {
        z: vec![0.0, 0.0],
        p_c: 0.0,
        q_c: 0.0,
        h_c: 0.0,
        a: 1.0,
        b: [b[0], b[1], b[0] + b[1]],
        theta: [theta[0], theta[1], theta[0] + theta[1]],
        big_a: [a[0].to_vec(), a[1].to_vec(), a[2].to_vec()],
        d,
        g: [vec![0.0; 2], vec![0.0; 2], vec![0.0; 2]],
        s: [1.0, 1.0, 2.0],
        f_zc: f.to_vec(),
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

fn swapped(c: &SeparatrixCoefficients) -> SeparatrixCoefficients {
    let mut s = c.clone();
    s.theta.swap(0, 1);
    s.b.swap(0, 1);
    s.d.swap(0, 1);
    s.big_a.swap(0, 1);
    s.g.swap(0, 1);
    s.s.swap(0, 1);
    s
}

fn arb_coefficients() -> impl Strategy<Value = SeparatrixCoefficients> {
    (
        prop::array::uniform2(0.3..3.0f64),
        prop::array::uniform2(0.5..4.0f64),
        prop::array::uniform3(-0.5..0.5f64),
        prop::array::uniform3(prop::array::uniform2(-1.0..1.0f64)),
        prop::array::uniform2(-2.0..2.0f64),
    )
        .prop_map(|(t, b, d, a, f)| coefficients(t, b, d, a, f))
}

fn target() -> impl Strategy<Value = DomainTag> {
    prop_oneof![Just(DomainTag::G1), Just(DomainTag::G2)]
}

proptest! {
    #[test]
    fn breakdown_sums_to_total(c in arb_coefficients(), t in target(), xi in 0.02..0.98f64, eps in 1e-4..1e-1f64) {
        let pp = from_xi_i(xi, eps, &c, t, 0.0).unwrap();
        let j = jump_slow(&c, &pp, eps, true).unwrap();
        prop_assert_eq!(j.dtau, j.dtau_terms.total());
        for k in 0..2 {
            prop_assert_eq!(j.dz[k], j.dz_terms[k].total());
        }
    }

    #[test]
    fn jump_is_linear_in_forcing(
        c in arb_coefficients(),
        t in target(),
        xi in 0.02..0.98f64,
        alpha in -3.0..3.0f64,
        beta in -3.0..3.0f64,
    ) {
        let eps = 1e-3;
        let pp = from_xi_i(xi, eps, &c, t, 0.0).unwrap();
        let mut other = c.clone();
        other.f_zc = vec![c.f_zc[1], -c.f_zc[0]];
        for (i, a) in other.big_a.iter_mut().enumerate() {
            *a = vec![0.5 * c.big_a[i][1] - 0.1, c.big_a[i][0] + 0.2];
        }
        let mut mix = c.clone();
        mix.f_zc = (0..2).map(|k| alpha * c.f_zc[k] + beta * other.f_zc[k]).collect();
        for i in 0..3 {
            mix.big_a[i] = (0..2).map(|k| alpha * c.big_a[i][k] + beta * other.big_a[i][k]).collect();
        }
        let (j1, j2, jm) = (
            jump_slow(&c, &pp, eps, true).unwrap(),
            jump_slow(&other, &pp, eps, true).unwrap(),
            jump_slow(&mix, &pp, eps, true).unwrap(),
        );
        for k in 0..2 {
            let want = alpha * j1.dz[k] + beta * j2.dz[k];
            prop_assert!((jm.dz[k] - want).abs() <= 1e-12 * (1.0 + want.abs()) * eps);
        }
        // the slow-time shift does not see f_{z,C} or A
        prop_assert_eq!(jm.dtau, j1.dtau);
    }

    #[test]
    fn exchange_symmetry(c in arb_coefficients(), xi in 0.02..0.98f64, eps in 1e-4..1e-2f64) {
        let s = swapped(&c);
        for (t, u) in [(DomainTag::G1, DomainTag::G2), (DomainTag::G2, DomainTag::G1)] {
            let a = dtau_of_xi(&c, t, xi, eps).unwrap();
            let b = dtau_of_xi(&s, u, xi, eps).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * eps.max(a.abs()));
            let pa = jump_slow(&c, &from_xi_i(xi, eps, &c, t, 0.0).unwrap(), eps, true).unwrap();
            let pb = jump_slow(&s, &from_xi_i(xi, eps, &s, u, 0.0).unwrap(), eps, true).unwrap();
            for k in 0..2 {
                prop_assert!((pa.dz[k] - pb.dz[k]).abs() <= 1e-12 * eps.max(pa.dz[k].abs()));
            }
        }
    }

    #[test]
    fn pseudo_phase_round_trip(c in arb_coefficients(), t in target(), xi3 in 0.01..0.99f64, eps in 1e-5..1e-2f64) {
        let th = c.theta_ratio(t.index());
        let xi3 = xi3 * th;
        let h0 = xi3 * eps * c.theta[2];
        let pp = pseudo_phase(h0, eps, &c, t, 3.0).unwrap();
        prop_assert!((pp.xi3 - xi3).abs() <= 1e-13);
        prop_assert!((pp.xi_i - (1.0 - xi3 / th)).abs() <= 1e-13);
        let w = 3.0 * eps.sqrt();
        prop_assert_eq!(pp.valid, xi3 >= w && xi3 <= th - w);
        let back = from_xi_i(pp.xi_i, eps, &c, t, 3.0).unwrap();
        prop_assert!((back.xi3 - pp.xi3).abs() <= 1e-13);
    }

    #[test]
    fn gamma_term_grows_like_log_at_small_xi(c in arb_coefficients(), t in target()) {
        let eps = 1e-3;
        let at = |xi: f64| jump_slow(&c, &from_xi_i(xi, eps, &c, t, 0.0).unwrap(), eps, true).unwrap().dtau_terms.gamma;
        // slope against -ln ξ
        let slope = (at(1e-7) - at(1e-6)) / 10f64.ln();
        prop_assert!((slope - eps * c.a).abs() <= 0.02 * eps * c.a, "{slope}");
    }
}
