use confgauge_core::symbol::{
    ellipticity_certificate, gamma_tilde_symbol, gauged_weyl_certificate, q_apply, q_diagonal_factored, q_nullspace,
    riemann_symbol, weyl_contraction_identity, weyl_identity_unchecked, Covector, FrozenPoint, SymPerturbation,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// `B Bᵗ + ½ I` with `B` uniform in `[-1, 1]`.
fn spd(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, n * n).prop_map(move |v| {
        let b = DMatrix::from_row_slice(n, n, &v);
        &b * b.transpose() + DMatrix::identity(n, n) * 0.5
    })
}

fn sym(n: usize) -> impl Strategy<Value = SymPerturbation> {
    prop::collection::vec(-1.0..1.0f64, n * n)
        .prop_map(move |v| SymPerturbation::new(DMatrix::from_row_slice(n, n, &v)))
}

fn covector(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, n).prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-2)
}

fn triple(n: usize) -> impl Strategy<Value = (FrozenPoint, Covector, SymPerturbation)> {
    (spd(n), covector(n), sym(n)).prop_map(|(g, xi, h)| {
        let fp = FrozenPoint::new(g).unwrap();
        let cv = Covector::new(&fp, &xi).unwrap();
        (fp, cv, h)
    })
}

fn any_triple() -> impl Strategy<Value = (FrozenPoint, Covector, SymPerturbation)> {
    prop_oneof![triple(3), triple(4), triple(5)]
}

fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
    (a - b).amax() <= tol * b.amax().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn factored_diagonal_matches_unfactored((fp, xi, h) in any_triple()) {
        let factored = q_diagonal_factored(&fp, &xi, &h).unwrap();
        let full = q_apply(&fp, &xi, &h).unwrap().raised;
        let scale = full.amax().max(1.0);
        for (a, f) in factored.iter().enumerate() {
            prop_assert!((f - full[(a, a)]).abs() <= 1e-10 * scale, "a = {a}: {f} vs {}", full[(a, a)]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn symbols_are_linear_in_h(
        (fp, xi, h1) in any_triple(),
        seed in prop::collection::vec(-1.0..1.0f64, 25),
        a in -2.0..2.0f64,
        b in -2.0..2.0f64,
    ) {
        let n = fp.dim();
        let h2 = SymPerturbation::new(DMatrix::from_row_slice(n, n, &seed[..n * n]));
        let mix = SymPerturbation::linear_combination(a, &h1, b, &h2);
        let q = |h: &SymPerturbation| q_apply(&fp, &xi, h).unwrap().lowered;
        prop_assert!(close(&q(&mix), &(q(&h1) * a + q(&h2) * b), 1e-12));
        let r = |h: &SymPerturbation| riemann_symbol(&fp, &xi, h);
        let (rm, r1, r2) = (r(&mix), r(&h1), r(&h2));
        let scale = rm.max_abs().max(1.0);
        for i in 0..rm.comps().len() {
            prop_assert!((rm.comps()[i] - a * r1.comps()[i] - b * r2.comps()[i]).abs() <= 1e-12 * scale);
        }
        let g = |h: &SymPerturbation| gamma_tilde_symbol(&fp, &xi, h).unwrap();
        for ((m, u), v) in g(&mix).iter().zip(g(&h1)).zip(g(&h2)) {
            prop_assert!((m - a * u - b * v).abs() <= 1e-12 * m.abs().max(1.0));
        }
    }

    #[test]
    fn symbols_are_homogeneous((fp, xi, h) in any_triple(), t in 0.2..5.0f64) {
        let q1 = q_apply(&fp, &xi, &h).unwrap().lowered;
        let qt = q_apply(&fp, &xi.scaled(t), &h).unwrap().lowered;
        prop_assert!(close(&qt, &(q1 * t.powi(4)), 1e-12));
        let r1 = riemann_symbol(&fp, &xi, &h).scaled(t * t);
        let rt = riemann_symbol(&fp, &xi.scaled(t), &h);
        prop_assert!(rt.max_diff(&r1) <= 1e-12 * r1.max_abs().max(1.0));
    }

    #[test]
    fn q_has_trivial_nullspace((fp, xi, _h) in any_triple()) {
        prop_assert!(q_nullspace(&fp, &xi, 1e-10).unwrap().is_empty());
    }
}

fn unimodular_trace_free(n: usize) -> impl Strategy<Value = (FrozenPoint, Covector, SymPerturbation)> {
    (spd(n), covector(n), sym(n)).prop_map(|(g, xi, h)| {
        let fp = FrozenPoint::new(g).unwrap().normalized();
        let cv = Covector::new(&fp, &xi).unwrap();
        let h = h.trace_free(&fp);
        (fp, cv, h)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn contracted_weyl_and_bianchi_identities(
        (fp, xi, h) in prop_oneof![unimodular_trace_free(4), unimodular_trace_free(5), unimodular_trace_free(6)],
    ) {
        let id = weyl_contraction_identity(&fp, &xi, &h).unwrap();
        let scale = id.lhs.amax().max(id.rhs.amax()).max(1.0);
        prop_assert!(id.defect <= 1e-10 * scale, "defect {:e}", id.defect);
        prop_assert!(id.bianchi_first <= 1e-10 * scale);
        prop_assert!(id.bianchi_second <= 1e-10 * scale);
    }

    #[test]
    fn contracted_weyl_lhs_vanishes_in_three_dimensions((fp, xi, h) in unimodular_trace_free(3)) {
        let id = weyl_identity_unchecked(&fp, &xi, &h);
        prop_assert!(id.lhs.amax() <= 1e-10 * id.rhs.amax().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn certificates_pass_on_random_backgrounds(g in prop_oneof![spd(3), spd(4), spd(5)]) {
        let fp = FrozenPoint::new(g).unwrap();
        let c = ellipticity_certificate(&fp, 100, "random").unwrap();
        prop_assert!(c.pass, "sigma_min {:e}", c.sigma_min);
        if fp.dim() >= 4 {
            let w = gauged_weyl_certificate(&fp, 20, "random").unwrap();
            prop_assert!(w.pass, "gauged weyl sigma_min {:e}", w.sigma_min);
        }
    }
}
