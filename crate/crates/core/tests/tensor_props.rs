use confgauge_core::tensor::{bach_at, cotton_at, curvature_bundle, weyl, WeylForm};
use confgauge_core::{parse, MetricSpec};
use proptest::prelude::*;

/// `g = I + ε·(quadratic polynomial)` per entry, diagonally dominant on `[-0.5, 0.5]^n`.
fn poly_metric(n: usize) -> impl Strategy<Value = MetricSpec> {
    let entry = (prop::collection::vec(-0.05..0.05f64, 3), 0..n, 0..n, 0..n);
    prop::collection::vec(entry, n * (n + 1) / 2).prop_map(move |coeffs| {
        let mut src = vec![String::new(); n * n];
        let mut it = coeffs.into_iter();
        for a in 0..n {
            for b in a..n {
                let (c, i, j, k) = it.next().unwrap();
                let base = if a == b { 1.0 } else { 0.0 };
                let s = format!("{base} + {} + {}*x{} + {}*x{}*x{}", c[0], c[1], i + 1, c[2], j + 1, k + 1);
                src[a * n + b] = s.clone();
                src[b * n + a] = s;
            }
        }
        let g = src.iter().map(|s| parse(s, n).unwrap()).collect();
        MetricSpec::new("poly", n, vec![[-0.5, 0.5]; n], g).unwrap()
    })
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.4..0.4f64, n)
}

fn metric_and_point(n: usize) -> impl Strategy<Value = (MetricSpec, Vec<f64>)> {
    (poly_metric(n), point(n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn weyl_is_totally_trace_free((spec, x) in metric_and_point(4)) {
        let n = 4;
        let jet = spec.jet(&x, 2).unwrap();
        let b = curvature_bundle(&jet).unwrap();
        let w = weyl(&b, &jet, WeylForm::AllDown).unwrap();
        let scale = b.riemann.max_abs().max(1.0);
        let idx = |s: [usize; 4]| ((s[0] * n + s[1]) * n + s[2]) * n + s[3];
        for (p, q) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
            for u in 0..n {
                for v in 0..n {
                    let mut t = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            let mut s = [0; 4];
                            s[p] = i;
                            s[q] = j;
                            let free: Vec<usize> = (0..4).filter(|k| *k != p && *k != q).collect();
                            s[free[0]] = u;
                            s[free[1]] = v;
                            t += jet.ginv(i, j) * w.comps()[idx(s)];
                        }
                    }
                    prop_assert!(t.abs() <= 1e-9 * scale, "trace over ({p},{q}) = {t:e}");
                }
            }
        }
    }

    #[test]
    fn mixed_and_lowered_weyl_agree((spec, x) in metric_and_point(4)) {
        let jet = spec.jet(&x, 2).unwrap();
        let b = curvature_bundle(&jet).unwrap();
        let down = weyl(&b, &jet, WeylForm::AllDown).unwrap();
        let mixed = weyl(&b, &jet, WeylForm::LastUp).unwrap();
        let g: Vec<f64> = (0..16).map(|i| jet.g(i / 4, i % 4)).collect();
        let lowered = mixed.lower(3, &g).unwrap();
        prop_assert!(lowered.max_diff(&down) <= 1e-10 * down.max_abs().max(1.0));
    }

    #[test]
    fn cotton_symmetries((spec, x) in metric_and_point(3)) {
        let n = 3;
        let c = cotton_at(&spec.jet(&x, 3).unwrap()).unwrap().tensor;
        let scale = c.max_abs().max(1.0);
        for a in 0..n {
            for b in 0..n {
                for k in 0..n {
                    prop_assert_eq!(c.get(&[a, b, k]), -c.get(&[b, a, k]));
                    let cyc = c.get(&[a, b, k]) + c.get(&[b, k, a]) + c.get(&[k, a, b]);
                    prop_assert!(cyc.abs() <= 1e-12 * scale, "cyclic sum {cyc:e}");
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn bach_is_trace_free(
        (spec, x) in prop_oneof![metric_and_point(4), metric_and_point(5)],
    ) {
        let n = spec.dim();
        let jet = spec.jet(&x, 4).unwrap();
        let rep = bach_at(&jet).unwrap();
        let tr: f64 = (0..n * n).map(|i| jet.ginv(i / n, i % n) * rep.tensor.comps()[i]).sum();
        prop_assert!(tr.abs() <= 1e-7 * rep.tensor.max_abs().max(1e-3), "trace {tr:e}");
        prop_assert!(rep.relative_defect <= 1e-7);
    }
}
