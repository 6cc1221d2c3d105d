use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use smoothmax::density::{
    density_numeric, disk_overlap_area, measure_mc, measure_quadrature, DensityField, Region,
};
use smoothmax::geometry::{
    ball_polygon, clip_convex, lp_norm, support_contains, unit_ball_area, ConvexPolygon, DENSITY_RESOLUTION,
};
use smoothmax::maxima::{dominates, maximal_indices, maximal_points, maximal_points_bruteforce};
use smoothmax::sampling::sample_set;
use smoothmax::{PNorm, Point, SeedSpec, SmoothedDist};

fn norm() -> impl Strategy<Value = PNorm> {
    prop_oneof![
        Just(PNorm::ONE),
        Just(PNorm::Finite(1.5)),
        Just(PNorm::TWO),
        Just(PNorm::Finite(4.0)),
        Just(PNorm::INF),
    ]
}

fn point(r: f64) -> impl Strategy<Value = Point> {
    (-r..r, -r..r).prop_map(|(x, y)| Point::new(x, y))
}

fn point_set() -> impl Strategy<Value = Vec<Point>> {
    prop_oneof![
        prop::collection::vec(point(10.0), 1..200),
        // Lattice points: ties and exact duplicates.
        prop::collection::vec((0i32..6, 0i32..6).prop_map(|(x, y)| Point::new(x as f64, y as f64)), 1..120),
    ]
}

fn sorted(v: &[Point]) -> Vec<(f64, f64)> {
    let mut t: Vec<(f64, f64)> = v.iter().map(|p| (p.x, p.y)).collect();
    t.sort_by(|a, b| a.partial_cmp(b).unwrap());
    t
}

proptest! {
    #[test]
    fn norm_axioms(p in norm(), u in point(5.0), v in point(5.0), s in -4.0f64..4.0) {
        let nu = lp_norm(p, u);
        prop_assert!(nu >= 0.0);
        prop_assert_eq!(nu == 0.0, u.x == 0.0 && u.y == 0.0);
        prop_assert!((lp_norm(p, u * s) - s.abs() * nu).abs() <= 1e-12 * (1.0 + s.abs() * nu));
        prop_assert!(lp_norm(p, u + v) <= nu + lp_norm(p, v) + 1e-12);
        prop_assert_eq!(lp_norm(p, Point::new(u.y, u.x)), nu);
    }

    #[test]
    fn norms_are_ordered(u in point(5.0)) {
        // ‖·‖_∞ <= ‖·‖_q <= ‖·‖_p for p <= q.
        let ps = [PNorm::ONE, PNorm::Finite(1.5), PNorm::TWO, PNorm::Finite(4.0), PNorm::INF];
        for w in ps.windows(2) {
            prop_assert!(lp_norm(w[1], u) <= lp_norm(w[0], u) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn ball_area_grows_with_p(a in 1.0f64..50.0, b in 1.0f64..50.0) {
        prop_assume!((a - b).abs() > 1e-6);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (al, ah) = (unit_ball_area(PNorm::Finite(lo)), unit_ball_area(PNorm::Finite(hi)));
        prop_assert!(al < ah && ah < 4.0 && al >= 2.0);
    }

    #[test]
    fn lens_is_symmetric_and_bounded(r1 in 0.01f64..3.0, r2 in 0.01f64..3.0, d in 0.0f64..6.0) {
        let a = disk_overlap_area(r1, r2, d);
        prop_assert!((a - disk_overlap_area(r2, r1, d)).abs() <= 1e-12 * (1.0 + a));
        let cap = std::f64::consts::PI * r1.min(r2).powi(2);
        prop_assert!(a >= 0.0 && a <= cap * (1.0 + 1e-12));
    }

    #[test]
    fn clipping_commutes(p in norm(), q in norm(), c in point(1.5), r in 0.1f64..2.0) {
        let a = ball_polygon(p, 1.0, Point::ORIGIN, 64).unwrap();
        let b = ball_polygon(q, r, c, 64).unwrap();
        let ab = clip_convex(&a, &b).map_or(0.0, |x| x.area());
        let ba = clip_convex(&b, &a).map_or(0.0, |x| x.area());
        prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab));
        prop_assert!(ab <= a.area().min(b.area()) * (1.0 + 1e-12));
    }

    #[test]
    fn rectangle_clip_is_exact(lo in point(2.0), w in 0.1f64..2.0, h in 0.1f64..2.0, shift in point(2.0)) {
        let a = ConvexPolygon::rectangle(lo, lo + Point::new(w, h)).unwrap();
        let b = a.translate(shift);
        let ox = (w - shift.x.abs()).max(0.0);
        let oy = (h - shift.y.abs()).max(0.0);
        let got = clip_convex(&a, &b).map_or(0.0, |x| x.area());
        prop_assert!((got - ox * oy).abs() <= 1e-9);
    }

    #[test]
    fn fast_maxima_match_bruteforce(pts in point_set()) {
        let fast = maximal_points(&pts).unwrap();
        let slow = maximal_points_bruteforce(&pts).unwrap();
        prop_assert_eq!(sorted(&fast.maxima), sorted(&slow.maxima));
        prop_assert_eq!(fast.count, fast.maxima.len());
    }

    #[test]
    fn maxima_are_complete(pts in point_set()) {
        let idx = maximal_indices(&pts).unwrap();
        for (i, &u) in pts.iter().enumerate() {
            let dominated = pts.iter().any(|&v| dominates(v, u));
            prop_assert_eq!(idx.contains(&i), !dominated);
            if dominated {
                prop_assert!(idx.iter().any(|&j| dominates(pts[j], u)));
            }
        }
    }

    #[test]
    fn maxima_survive_monotone_maps(pts in point_set(), s in 0.1f64..10.0, t in point(100.0)) {
        let base = maximal_indices(&pts).unwrap();
        let affine: Vec<Point> = pts.iter().map(|&p| p * s + t).collect();
        prop_assert_eq!(&maximal_indices(&affine).unwrap(), &base);
        let warped: Vec<Point> = pts.iter().map(|p| Point::new(p.x.powi(3) + p.x, (p.y / 4.0).exp())).collect();
        prop_assert_eq!(maximal_indices(&warped).unwrap(), base);
    }

    #[test]
    fn samples_stay_in_support(p in norm(), q in norm(), delta in 0.0f64..5.0, seed in any::<u64>()) {
        let dist = SmoothedDist::new(p, q, delta).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in sample_set(&dist, 200, &mut rng).unwrap() {
            prop_assert!(support_contains(&dist, v));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn positive_density_implies_support(p in norm(), q in norm(), delta in 0.05f64..3.0, v in point(4.0)) {
        let dist = SmoothedDist::new(p, q, delta).unwrap();
        let f = density_numeric(&dist, v).unwrap();
        prop_assert!(f >= 0.0);
        if f > 0.0 {
            prop_assert!(support_contains(&dist, v));
        }
    }

    #[test]
    fn density_is_flat_deep_inside(p in norm(), q in norm(), delta in 0.01f64..1.0, t in 0.0f64..6.3, r in 0.0f64..1.0) {
        prop_assume!(delta < 0.95);
        let dist = SmoothedDist::new(p, q, delta).unwrap();
        // B_q ⊂ B_∞, so ‖w‖_p <= ‖(1,1)‖_p and the preimage lies in B_p.
        let room = 1.0 - delta * lp_norm(p, Point::new(1.0, 1.0));
        prop_assume!(room > 0.0);
        let dir = Point::new(t.cos(), t.sin());
        let v = dir * (r * room / lp_norm(p, dir));
        let f = DensityField::new(dist, DENSITY_RESOLUTION).unwrap().density(v);
        prop_assert!((f - 1.0 / unit_ball_area(p)).abs() <= 1e-3, "f = {f}");
    }
}

#[test]
fn mc_and_quadrature_agree_on_rectangles() {
    let cases = [
        (PNorm::ONE, PNorm::TWO, 0.3, Point::new(0.2, -0.1), Point::new(0.9, 0.4)),
        (PNorm::TWO, PNorm::TWO, 1.0, Point::new(-0.5, -0.5), Point::new(0.5, 0.5)),
        (PNorm::INF, PNorm::ONE, 0.5, Point::new(0.8, 0.8), Point::new(1.4, 1.3)),
        (PNorm::TWO, PNorm::INF, 2.0, Point::new(1.0, -1.0), Point::new(2.5, 0.5)),
    ];
    for (i, (p, q, delta, lo, hi)) in cases.into_iter().enumerate() {
        let dist = SmoothedDist::new(p, q, delta).unwrap();
        let region = Region::AxisRectangle { lo, hi };
        let mc = measure_mc(&dist, &region, 400_000, SeedSpec::new(9, 9, i as u64)).unwrap();
        let quad = measure_quadrature(&dist, &region, 8, 8).unwrap();
        assert!(mc.z_score(quad).abs() <= 4.0, "case {i}: mc {mc:?} quadrature {quad}");
    }
}

#[test]
fn samples_are_uniform_and_symmetric() {
    // Unsmoothed B_p: the fraction inside the half-radius ball is 1/4 for every p.
    for p in [PNorm::ONE, PNorm::Finite(1.5), PNorm::TWO, PNorm::INF] {
        let dist = SmoothedDist::new(p, PNorm::TWO, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let pts = sample_set(&dist, 200_000, &mut rng).unwrap();
        let n = pts.len() as f64;
        let inner = pts.iter().filter(|&&v| lp_norm(p, v) <= 0.5).count() as f64 / n;
        assert!((inner - 0.25).abs() <= 4.0 * (0.25 * 0.75 / n).sqrt(), "{p}: {inner}");
        // Quadrant counts are exchangeable.
        let mut quad = [0.0f64; 4];
        for v in &pts {
            quad[(v.x >= 0.0) as usize * 2 + (v.y >= 0.0) as usize] += 1.0 / n;
        }
        for f in quad {
            assert!((f - 0.25).abs() <= 4.0 * (0.25 * 0.75 / n).sqrt(), "{p}: {quad:?}");
        }
    }
}

#[test]
fn smoothed_samples_match_density() {
    // Hit frequency of a small box against the numeric density times its area.
    let dist = SmoothedDist::new(PNorm::ONE, PNorm::INF, 0.4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let pts = sample_set(&dist, 400_000, &mut rng).unwrap();
    let n = pts.len() as f64;
    for c in [Point::new(0.0, 0.0), Point::new(0.9, 0.2), Point::new(1.1, 0.1)] {
        let h = 0.05;
        let hits = pts
            .iter()
            .filter(|v| (v.x - c.x).abs() <= h && (v.y - c.y).abs() <= h)
            .count() as f64
            / n;
        let want = density_numeric(&dist, c).unwrap() * 4.0 * h * h;
        assert!((hits - want).abs() <= 4.0 * (want / n).sqrt() + 0.02 * want, "{c:?}: {hits} vs {want}");
    }
}
