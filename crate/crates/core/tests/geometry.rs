use darepc_core::geometry::{
    affine_interval_eval, interval_arith, interval_trig, ArithOp, HyperRect, Interval, TrigFn,
};
use proptest::prelude::*;

fn iv() -> impl Strategy<Value = Interval> {
    (-50.0f64..50.0, 0.0f64..20.0).prop_map(|(lo, w)| Interval::new(lo, lo + w).unwrap())
}

/// An interval and a sub-interval of it.
fn nested() -> impl Strategy<Value = (Interval, Interval)> {
    (iv(), 0.0f64..1.0, 0.0f64..1.0).prop_map(|(outer, a, b)| {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let lo = outer.lo() + a * outer.width();
        let hi = outer.lo() + b * outer.width();
        (outer, Interval::new(lo, hi.max(lo)).unwrap())
    })
}

const BINARY: [ArithOp; 3] = [ArithOp::Add, ArithOp::Sub, ArithOp::Mul];
const UNARY: [ArithOp; 2] = [ArithOp::Neg, ArithOp::Abs];

fn point_op(op: ArithOp, a: f64, b: f64) -> f64 {
    match op {
        ArithOp::Add => a + b,
        ArithOp::Sub => a - b,
        ArithOp::Mul | ArithOp::Scale => a * b,
        ArithOp::Neg => -a,
        ArithOp::Abs => a.abs(),
    }
}

proptest! {
    #[test]
    fn arithmetic_is_inclusion_monotone((a, a2) in nested(), (b, b2) in nested()) {
        for op in BINARY {
            let wide = interval_arith(op, a, b);
            let narrow = interval_arith(op, a2, b2);
            prop_assert!(wide.contains_interval(&narrow), "{op:?}: {wide:?} vs {narrow:?}");
        }
        for op in UNARY {
            prop_assert!(interval_arith(op, a, b).contains_interval(&interval_arith(op, a2, b2)));
        }
    }

    #[test]
    fn trig_is_inclusion_monotone((a, a2) in nested()) {
        for f in [TrigFn::Sin, TrigFn::Cos] {
            prop_assert!(interval_trig(f, a).unwrap().contains_interval(&interval_trig(f, a2).unwrap()));
        }
    }

    #[test]
    fn arithmetic_encloses_sampled_points(a in iv(), b in iv(), us in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1000)) {
        for op in BINARY.into_iter().chain(UNARY) {
            let r = interval_arith(op, a, b);
            for &(u, v) in &us {
                let x = a.lo() + u * a.width();
                let y = b.lo() + v * b.width();
                prop_assert!(r.contains(point_op(op, x, y)), "{op:?} {x} {y} not in {r:?}");
            }
        }
        let k = b.mid();
        let r = interval_arith(ArithOp::Scale, a, k);
        for &(u, _) in &us {
            prop_assert!(r.contains((a.lo() + u * a.width()) * k));
        }
    }

    #[test]
    fn trig_encloses_sampled_points(a in iv(), us in prop::collection::vec(0.0f64..=1.0, 1000)) {
        let s = a.sin();
        let c = a.cos();
        for u in us {
            let x = a.lo() + u * a.width();
            prop_assert!(s.contains(x.sin()) && c.contains(x.cos()));
        }
    }

    #[test]
    fn tan_encloses_points_away_from_poles(lo in -1.5f64..1.4, w in 0.0f64..0.1, us in prop::collection::vec(0.0f64..=1.0, 100)) {
        let a = Interval::new(lo, (lo + w).min(1.5)).unwrap();
        let t = a.tan().unwrap();
        for u in us {
            prop_assert!(t.contains((a.lo() + u * a.width()).tan()));
        }
    }

    #[test]
    fn affine_eval_attains_corner_extremes(
        dims in 1usize..=6,
        seed in prop::collection::vec((-5.0f64..5.0, 0.0f64..3.0, -2.0f64..2.0), 6),
        intercept in -10.0f64..10.0,
    ) {
        let bounds: Vec<(f64, f64)> = seed[..dims].iter().map(|&(lo, w, _)| (lo, lo + w)).collect();
        let coeffs: Vec<f64> = seed[..dims].iter().map(|s| s.2).collect();
        let r = HyperRect::from_bounds(&bounds).unwrap();
        let got = affine_interval_eval(&coeffs, intercept, &r).unwrap();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for mask in 0..(1u32 << dims) {
            let v = intercept
                + (0..dims)
                    .map(|i| coeffs[i] * if mask >> i & 1 == 1 { bounds[i].1 } else { bounds[i].0 })
                    .sum::<f64>();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let tol = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
        prop_assert!((got.lo() - lo).abs() <= tol && (got.hi() - hi).abs() <= tol, "{got:?} vs [{lo}, {hi}]");
    }

    #[test]
    fn bisection_partitions_the_box(
        bounds in prop::collection::vec((-10.0f64..10.0, 0.01f64..5.0), 1..6),
        axis_pick in 0usize..6,
        u in prop::collection::vec(0.0f64..=1.0, 6),
    ) {
        let b: Vec<(f64, f64)> = bounds.iter().map(|&(lo, w)| (lo, lo + w)).collect();
        let r = HyperRect::from_bounds(&b).unwrap();
        let axis = axis_pick % r.dim();
        let (left, right) = r.bisect(axis).unwrap();
        prop_assert_eq!(left.axis(axis).hi(), right.axis(axis).lo());
        prop_assert_eq!(left.axis(axis).lo(), r.axis(axis).lo());
        prop_assert_eq!(right.axis(axis).hi(), r.axis(axis).hi());
        for i in (0..r.dim()).filter(|&i| i != axis) {
            prop_assert_eq!(left.axis(i), r.axis(i));
            prop_assert_eq!(right.axis(i), r.axis(i));
        }
        let p = r.lerp(&u[..r.dim()]);
        prop_assert!(left.contains_point(&p).unwrap() || right.contains_point(&p).unwrap());
        let vol = left.volume() + right.volume();
        prop_assert!((vol - r.volume()).abs() <= 1e-9 * r.volume().max(1e-300));
    }
}

#[test]
fn documented_examples() {
    let i = |lo, hi| Interval::new(lo, hi).unwrap();
    let add = interval_arith(ArithOp::Add, i(0.0, 1.0), i(2.0, 3.0));
    assert!(add.contains_interval(&i(2.0, 4.0)) && add.width() < 2.0 + 1e-12);
    let mul = interval_arith(ArithOp::Mul, i(-1.0, 2.0), i(3.0, 4.0));
    assert!(mul.contains_interval(&i(-4.0, 8.0)) && mul.width() < 12.0 + 1e-12);
    assert_eq!(interval_arith(ArithOp::Abs, i(-3.0, 1.0), 0.0), i(0.0, 3.0));
    let s = interval_trig(TrigFn::Sin, i(0.0, std::f64::consts::PI)).unwrap();
    assert!(s.contains(1.0) && s.hi() < 1.0 + 1e-12 && s.lo() <= 0.0 && s.lo() > -1e-12);
    assert!(interval_trig(TrigFn::Tan, i(1.5, 1.7)).is_err());
    let r = HyperRect::from_bounds(&[(0.0, 1.0), (0.0, 2.0)]).unwrap();
    let e = affine_interval_eval(&[2.0, -1.0], 3.0, &r).unwrap();
    assert!(e.contains_interval(&i(1.0, 5.0)) && e.width() < 4.0 + 1e-12);
    let a = HyperRect::from_bounds(&[(0.0, 1.0)]).unwrap();
    assert!(a.intersects(&HyperRect::from_bounds(&[(1.0, 2.0)]).unwrap()).unwrap());
    assert!(!a.intersects(&HyperRect::from_bounds(&[(1.01, 2.0)]).unwrap()).unwrap());
}
