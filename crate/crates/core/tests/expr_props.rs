use confgauge_core::expr::Func;
use confgauge_core::{parse, Expr, MetricSpec};
use proptest::prelude::*;

/// Random trees that stay finite on `[-1, 1]^3`.
fn tree() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![(-2.0..2.0f64).prop_map(Expr::num), (0..3usize).prop_map(Expr::var)];
    let guarded = |e: Expr| Expr::add(vec![Expr::num(1.0), Expr::powi(e, 2)]);
    leaf.prop_recursive(4, 24, 3, move |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(Expr::add),
            prop::collection::vec(inner.clone(), 2..3).prop_map(Expr::mul),
            inner.clone().prop_map(Expr::neg),
            (inner.clone(), inner.clone()).prop_map(move |(a, b)| Expr::div(a, guarded(b))),
            (inner.clone(), 1..4i32).prop_map(|(a, k)| Expr::powi(a, k)),
            (inner.clone(), -2..0i32).prop_map(move |(a, k)| Expr::powi(guarded(a), k)),
            inner.clone().prop_map(|a| Expr::call(Func::Exp, Expr::call(Func::Sin, a))),
            inner.clone().prop_map(move |a| Expr::call(Func::Log, guarded(a))),
            inner.clone().prop_map(move |a| Expr::call(Func::Sqrt, guarded(a))),
            inner.clone().prop_map(|a| Expr::call(Func::Sin, a)),
            inner.clone().prop_map(|a| Expr::call(Func::Cos, a)),
        ]
    })
    .prop_filter("depth at most 6", |e| e.depth() <= 6)
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.9..0.9f64, 3)
}

fn five_point(e: &Expr, x: &[f64], axis: usize) -> f64 {
    let h = 1e-3;
    let at = |s: f64| {
        let mut y = x.to_vec();
        y[axis] += s * h;
        e.eval(&y)
    };
    (at(-2.0) - 8.0 * at(-1.0) + 8.0 * at(1.0) - at(2.0)) / (12.0 * h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn derivative_matches_central_difference(e in tree(), x in point(), axis in 0..3usize) {
        let d = e.differentiate(axis).eval(&x);
        let f = five_point(&e, &x, axis);
        prop_assume!(d.is_finite() && f.is_finite());
        prop_assert!((d - f).abs() <= 1e-6 * f.abs().max(1.0), "{e}: {d} vs {f}");
    }

    #[test]
    fn mixed_partials_commute(e in tree(), x in point(), a in 0..3usize, b in 0..3usize) {
        let ab = e.differentiate(a).differentiate(b).eval(&x);
        let ba = e.differentiate(b).differentiate(a).eval(&x);
        prop_assume!(ab.is_finite());
        prop_assert!((ab - ba).abs() <= 1e-12 * ab.abs().max(1.0), "{e}: {ab} vs {ba}");
    }

    #[test]
    fn printed_form_parses_back(e in tree(), x in point()) {
        let back = parse(&e.to_string(), 3).unwrap();
        let (u, v) = (e.eval(&x), back.eval(&x));
        prop_assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0), "{e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn jets_are_deterministic_and_symmetric(es in prop::collection::vec(tree(), 3), x in point()) {
        let n = 3;
        let g: Vec<Expr> = (0..n * n)
            .map(|i| {
                if i / n == i % n {
                    Expr::call(Func::Exp, Expr::call(Func::Sin, es[i / n].clone()))
                } else {
                    Expr::num(0.0)
                }
            })
            .collect();
        let spec = MetricSpec::new("random", n, vec![[-1.0, 1.0]; n], g).unwrap();
        let (j1, j2) = (spec.jet(&x, 3).unwrap(), spec.jet(&x, 3).unwrap());
        for a in 0..n {
            for b in 0..n {
                prop_assert_eq!(j1.dg(&[a, b], a, a).to_bits(), j2.dg(&[a, b], a, a).to_bits());
                prop_assert_eq!(j1.dg(&[a, b], a, a).to_bits(), j1.dg(&[b, a], a, a).to_bits());
                for c in 0..n {
                    prop_assert_eq!(j1.dg(&[a, b, c], b, b).to_bits(), j1.dg(&[c, a, b], b, b).to_bits());
                }
            }
        }
    }
}
