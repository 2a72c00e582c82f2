use masktrack_core::geom::{
    hungarian, iou_axis, iou_mask, iou_rotated, mbr, min_max_box, opt_box, rotated_mask_iou, AffinityMatrix, AxisBox,
    BinaryMask, RotatedBox,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exhaustive maximum over all partial matchings (rows matched to distinct columns or left out).
fn brute_force_max(a: &AffinityMatrix) -> f64 {
    fn rec(a: &AffinityMatrix, i: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if i == a.rows() {
            if acc > *best {
                *best = acc;
            }
            return;
        }
        rec(a, i + 1, used, acc, best);
        for j in 0..a.cols() {
            if !used[j] {
                used[j] = true;
                rec(a, i + 1, used, acc + a.get(i, j), best);
                used[j] = false;
            }
        }
    }
    let mut best = 0.0;
    rec(a, 0, &mut vec![false; a.cols()], 0.0, &mut best);
    best
}

#[test]
fn hungarian_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let m = rng.random_range(1..=6);
        let n = rng.random_range(1..=6);
        let a = AffinityMatrix::from_fn(m, n, |_, _| rng.random::<f64>()).unwrap();
        let s = hungarian(&a);
        let mut rows: Vec<_> = s.pairs.iter().map(|p| p.0).collect();
        let mut cols: Vec<_> = s.pairs.iter().map(|p| p.1).collect();
        rows.dedup();
        cols.sort_unstable();
        cols.dedup();
        assert_eq!(rows.len(), s.pairs.len());
        assert_eq!(cols.len(), s.pairs.len());
        let bf = brute_force_max(&a);
        assert!((s.total - bf).abs() <= 1e-12, "{} vs {}", s.total, bf);
    }
}

/// Random convex polygon rasterised by pixel centres.
fn random_convex_mask(rng: &mut ChaCha8Rng, side: usize) -> BinaryMask {
    loop {
        let c = side as f64 / 2.0;
        let n = rng.random_range(5..12);
        let mut pts: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let r = rng.random_range(5.0..c - 2.0);
                let t = rng.random_range(0.0..std::f64::consts::TAU);
                (c + r * t.cos() * rng.random_range(0.4..1.0), c + r * t.sin())
            })
            .collect();
        pts = masktrack_core::geom::convex_hull(&pts);
        if pts.len() < 3 {
            continue;
        }
        let inside = |x: f64, y: f64| {
            (0..pts.len()).all(|i| {
                let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
                (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0) >= 0.0
            })
        };
        let m = BinaryMask::from_fn(side, side, |r, cc| inside(cc as f64 + 0.5, r as f64 + 0.5)).unwrap();
        if m.count() >= 10 {
            return m;
        }
    }
}

/// Smallest bounding-box area over orientations sampled every 0.5 degrees, using all
/// corners of all foreground cells.
fn sweep_oracle_area(m: &BinaryMask) -> f64 {
    let mut pts = Vec::new();
    for r in 0..m.height() {
        for c in 0..m.width() {
            if m.get(r, c) {
                for (dx, dy) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
                    pts.push((c as f64 + dx, r as f64 + dy));
                }
            }
        }
    }
    (0..180)
        .map(|k| {
            let t = (k as f64 * 0.5).to_radians();
            let (s, co) = t.sin_cos();
            let (mut u0, mut u1, mut v0, mut v1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
            for &(x, y) in &pts {
                let u = x * co + y * s;
                let v = -x * s + y * co;
                u0 = u0.min(u);
                u1 = u1.max(u);
                v0 = v0.min(v);
                v1 = v1.max(v);
            }
            (u1 - u0) * (v1 - v0)
        })
        .fold(f64::MAX, f64::min)
}

#[test]
fn mbr_matches_angle_sweep_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let m = random_convex_mask(&mut rng, 64);
        let b = mbr(&m).unwrap();
        let oracle = sweep_oracle_area(&m);
        assert!(b.area() <= oracle * 1.01, "mbr {} oracle {}", b.area(), oracle);
        assert!(b.area() >= oracle * 0.99 - 1e-9, "mbr {} oracle {}", b.area(), oracle);
        // every foreground pixel centre is inside the rectangle
        for r in 0..m.height() {
            for c in 0..m.width() {
                if m.get(r, c) {
                    assert!(b.contains(c as f64 + 0.5, r as f64 + 0.5));
                }
            }
        }
        assert!(b.area() <= min_max_box(&m).unwrap().area() + 1e-9);
        let o = opt_box(&m).unwrap();
        assert!(rotated_mask_iou(&m, &o) >= rotated_mask_iou(&m, &b));
    }
}

/// IoU by counting samples of a `res x res` grid over the joint bounding square.
fn raster_iou(a: &RotatedBox, b: &RotatedBox, res: usize) -> f64 {
    let ea = a.enclosing_axis();
    let eb = b.enclosing_axis();
    let x0 = ea.x_min.min(eb.x_min);
    let y0 = ea.y_min.min(eb.y_min);
    let side = (ea.x_max.max(eb.x_max) - x0).max(ea.y_max.max(eb.y_max) - y0);
    let step = side / res as f64;
    let (mut inter, mut union) = (0u64, 0u64);
    for i in 0..res {
        let y = y0 + (i as f64 + 0.5) * step;
        for j in 0..res {
            let x = x0 + (j as f64 + 0.5) * step;
            let (ia, ib) = (a.contains(x, y), b.contains(x, y));
            inter += (ia && ib) as u64;
            union += (ia || ib) as u64;
        }
    }
    inter as f64 / union as f64
}

#[test]
fn rotated_iou_matches_rasterization() {
    let unit = RotatedBox::new(0.0, 0.0, 1.0, 1.0, 0.0).unwrap();
    let diag = RotatedBox::new(0.0, 0.0, 1.0, 1.0, std::f64::consts::FRAC_PI_4).unwrap();
    let oracle = raster_iou(&unit, &diag, 2000);
    assert!((oracle - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-3);
    assert!((iou_rotated(&unit, &diag) - oracle).abs() < 1e-3);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let mut rb = || {
            RotatedBox::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(2.0..12.0),
                rng.random_range(2.0..12.0),
                rng.random_range(0.0..3.2),
            )
            .unwrap()
        };
        let (a, b) = (rb(), rb());
        let exact = iou_rotated(&a, &b);
        let approx = raster_iou(&a, &b, 2000);
        assert!((exact - approx).abs() < 1e-3, "{exact} vs {approx}");
    }
}

fn axis_box() -> impl Strategy<Value = AxisBox> {
    (-20.0..20.0f64, -20.0..20.0f64, 0.0..15.0f64, 0.0..15.0f64)
        .prop_map(|(x, y, w, h)| AxisBox::new(x, y, x + w, y + h).unwrap())
}

fn rot_box() -> impl Strategy<Value = RotatedBox> {
    (-10.0..10.0f64, -10.0..10.0f64, 0.5..10.0f64, 0.5..10.0f64, -4.0..4.0f64)
        .prop_map(|(x, y, w, h, a)| RotatedBox::new(x, y, w, h, a).unwrap())
}

fn small_mask() -> impl Strategy<Value = BinaryMask> {
    proptest::collection::vec(any::<bool>(), 12 * 9).prop_map(|b| BinaryMask::from_bits(12, 9, b).unwrap())
}

proptest! {
    #[test]
    fn axis_iou_symmetric_bounded(a in axis_box(), b in axis_box()) {
        let (x, y) = (iou_axis(&a, &b), iou_axis(&b, &a));
        prop_assert_eq!(x, y);
        prop_assert!((0.0..=1.0).contains(&x));
        if a.area() > 0.0 {
            prop_assert!((iou_axis(&a, &a) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rotated_iou_symmetric_bounded(a in rot_box(), b in rot_box()) {
        let (x, y) = (iou_rotated(&a, &b), iou_rotated(&b, &a));
        prop_assert!((x - y).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&x));
        prop_assert!((iou_rotated(&a, &a) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mask_iou_symmetric(a in small_mask(), b in small_mask()) {
        prop_assert_eq!(iou_mask(&a, &b).unwrap(), iou_mask(&b, &a).unwrap());
        if !a.is_empty() {
            prop_assert_eq!(iou_mask(&a, &a).unwrap(), 1.0);
        }
    }

    #[test]
    fn min_max_is_tight(m in small_mask()) {
        prop_assume!(!m.is_empty());
        let b = min_max_box(&m).unwrap();
        let inside = |bb: &AxisBox, r: usize, c: usize| {
            (c as f64) >= bb.x_min && (c as f64 + 1.0) <= bb.x_max && (r as f64) >= bb.y_min && (r as f64 + 1.0) <= bb.y_max
        };
        let fg: Vec<(usize, usize)> = (0..m.height()).flat_map(|r| (0..m.width()).map(move |c| (r, c))).filter(|&(r, c)| m.get(r, c)).collect();
        prop_assert!(fg.iter().all(|&(r, c)| inside(&b, r, c)));
        for shrunk in [
            AxisBox { x_min: b.x_min + 1.0, ..b },
            AxisBox { y_min: b.y_min + 1.0, ..b },
            AxisBox { x_max: b.x_max - 1.0, ..b },
            AxisBox { y_max: b.y_max - 1.0, ..b },
        ] {
            prop_assert!(fg.iter().any(|&(r, c)| !inside(&shrunk, r, c)));
        }
        let r = mbr(&m).unwrap();
        prop_assert!(r.area() <= b.area() + 1e-9);
    }
}
