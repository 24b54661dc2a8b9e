use fcsd_core::cha::{classify, polygon_to_halfspaces, quickhull2d, Point2};
use fcsd_core::io::format_sig;
use fcsd_core::sfr::{self, AggregatedSfrParams};
use fcsd_core::uncertainty::{affine_project, Gmm, UnivariateGmm};
use proptest::prelude::*;

fn mixture() -> impl Strategy<Value = UnivariateGmm> {
    prop::collection::vec((0.05f64..1.0, -50.0f64..50.0, 0.01f64..25.0), 1..5).prop_map(|c| {
        let (w, (m, v)): (Vec<f64>, (Vec<f64>, Vec<f64>)) = c.into_iter().map(|(w, m, v)| (w, (m, v))).unzip();
        let total: f64 = w.iter().sum();
        UnivariateGmm::new(w.iter().map(|x| x / total).collect(), m, v).unwrap()
    })
}

proptest! {
    #[test]
    fn quantile_is_monotone_and_inverts_cdf(g in mixture(), a in 0.001f64..0.999, b in 0.001f64..0.999) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (qa, qb) = (g.quantile(lo).unwrap(), g.quantile(hi).unwrap());
        prop_assert!(qa <= qb);
        prop_assert!((g.cdf(qa) - lo).abs() <= 1e-10);
    }

    #[test]
    fn hull_contains_every_point(pts in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..150)) {
        let pts: Vec<Point2> = pts.into_iter().map(|(h, d)| Point2::new(h, d)).collect();
        let poly = quickhull2d(&pts);
        prop_assume!(!poly.degenerate);
        for v in &poly.vertices {
            prop_assert!(pts.contains(v));
        }
        let hs = polygon_to_halfspaces(&poly).unwrap();
        for p in &pts {
            let worst = hs.planes.iter().map(|pl| pl.eval(*p)).fold(f64::INFINITY, f64::min);
            prop_assert!(worst >= -1e-9, "{p:?} outside by {worst}");
        }
        for v in &poly.vertices {
            prop_assert!(classify(&hs, *v));
        }
    }

    #[test]
    fn nadir_is_at_least_steady_state(
        h in 0.1f64..20.0, d in 0.0f64..15.0, t in 0.1f64..20.0, r in 1.0f64..100.0, ratio in 0.0f64..0.8,
    ) {
        let p = AggregatedSfrParams { inertia: h, damping: d, droop_gain: r, turbine_fraction: ratio * r, time_constant: t };
        let m = sfr::metrics(&p, 0.1, 50.0).unwrap();
        prop_assert!(m.delta_f_max >= m.delta_f_ss * (1.0 - 1e-12));
        prop_assert!(m.delta_f_max.is_finite() && m.rocof_max > 0.0);
    }

    #[test]
    fn projection_preserves_the_mean(
        mean in prop::collection::vec(0.0f64..300.0, 1..4), rho in 0.0f64..0.8, b in -10.0f64..10.0,
    ) {
        let sigma: Vec<f64> = mean.iter().map(|m| 1.0 + 0.1 * m).collect();
        let g = Gmm::from_means(&mean, &sigma, rho, &[0.65, 0.35], &[0.35, -0.65], &[0.8, 1.3]).unwrap();
        let a: Vec<f64> = (0..mean.len()).map(|i| 1.0 + i as f64).collect();
        let u = affine_project(&g, &a, b).unwrap();
        let expect: f64 = a.iter().zip(&mean).map(|(a, m)| a * m).sum::<f64>() + b;
        prop_assert!((u.mean() - expect).abs() <= 1e-9 * (1.0 + expect.abs()));
    }

    #[test]
    fn format_sig_keeps_nine_digits(x in prop::num::f64::NORMAL) {
        let back: f64 = format_sig(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-9 * x.abs(), "{x} -> {}", format_sig(x));
    }
}
