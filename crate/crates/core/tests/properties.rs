use dc_core::alignment::{align_kawakami, align_odc, anchor_residual, OdcTarget};
use dc_core::costmodel::{flops_imakura, flops_kawakami, flops_odc};
use dc_core::numkernels::{haar_orthogonal, pinv, seeded_rng, thin_qr, thin_svd};
use dc_core::protocol::{collude_reconstruct, generate_anchor, make_scenario, BasisCondition, ScenarioSpec};
use dc_core::Matrix;
use proptest::prelude::*;

fn rel(a: &Matrix, b: &Matrix) -> f64 {
    let scale = b.frobenius_norm().max(1.0);
    a.frobenius_distance(b).unwrap() / scale
}

/// `p×q` Gaussian matrix of rank at most `r`.
fn low_rank(p: usize, q: usize, r: usize, seed: u64) -> Matrix {
    let mut rng = seeded_rng(seed);
    let left = Matrix::gaussian(p, r, &mut rng);
    let right = Matrix::gaussian(r, q, &mut rng);
    left.matmul(&right).unwrap()
}

fn check_penrose(m: &Matrix, tol: f64) {
    let x = pinv(m).unwrap();
    assert_eq!(x.shape(), (m.cols(), m.rows()));
    let mxm = m.matmul(&x).unwrap().matmul(m).unwrap();
    assert!(rel(&mxm, m) <= tol, "A X A != A: {}", rel(&mxm, m));
    let xmx = x.matmul(m).unwrap().matmul(&x).unwrap();
    assert!(rel(&xmx, &x) <= tol, "X A X != X: {}", rel(&xmx, &x));
    let mx = m.matmul(&x).unwrap();
    assert!(rel(&mx, &mx.transpose()) <= tol, "A X not symmetric");
    let xm = x.matmul(m).unwrap();
    assert!(rel(&xm, &xm.transpose()) <= tol, "X A not symmetric");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn svd_reconstructs(p in 1usize..=50, q in 1usize..=50, seed in any::<u64>()) {
        let m = Matrix::gaussian(p, q, &mut seeded_rng(seed));
        let svd = thin_svd(&m).unwrap();
        let k = p.min(q);
        prop_assert_eq!(svd.sigma.len(), k);
        prop_assert!(svd.sigma.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(svd.sigma.iter().all(|&s| s >= 0.0));
        prop_assert!(svd.u.orthonormality_defect() <= 1e-12);
        prop_assert!(svd.vt.transpose().orthonormality_defect() <= 1e-12);
        prop_assert!(rel(&svd.reconstruct(), &m) <= 1e-12);
    }

    #[test]
    fn pinv_satisfies_penrose_conditions(p in 1usize..=30, q in 1usize..=30, seed in any::<u64>()) {
        let m = Matrix::gaussian(p, q, &mut seeded_rng(seed));
        check_penrose(&m, 1e-9);
    }

    #[test]
    fn pinv_rank_deficient(p in 2usize..=30, q in 2usize..=30, r in 1usize..=5, seed in any::<u64>()) {
        let r = r.min(p - 1).min(q - 1).max(1);
        let m = low_rank(p, q, r, seed);
        check_penrose(&m, 1e-9);
    }

    #[test]
    fn qr_is_bit_deterministic(p in 1usize..=40, n in 1usize..=40, seed in any::<u64>()) {
        let (p, n) = (p.max(n), p.min(n));
        let m = Matrix::gaussian(p, n, &mut seeded_rng(seed));
        let a = thin_qr(&m).unwrap();
        let b = thin_qr(&m).unwrap();
        prop_assert_eq!(a.q.as_slice(), b.q.as_slice());
        prop_assert_eq!(a.r.as_slice(), b.r.as_slice());
        prop_assert!(a.r.diagonal().iter().all(|&d| d > 0.0));
        prop_assert!(rel(&a.q.matmul(&a.r).unwrap(), &m) <= 1e-12);
    }

    #[test]
    fn haar_is_orthogonal_and_seeded(dim in 1usize..=30, seed in any::<u64>()) {
        let o = haar_orthogonal(dim, seed);
        prop_assert!(o.orthonormality_defect() <= 1e-12);
        let again = haar_orthogonal(dim, seed);
        prop_assert_eq!(o.as_slice(), again.as_slice());
    }

    #[test]
    fn flop_hierarchy(l in 1u64..=2_000, extra in 1u64..=100_000, c in 1u64..=1_000) {
        // anchors always have more rows than the latent dimension
        let a = l + extra;
        let (im, kw, odc) = (flops_imakura(a, l, c).total, flops_kawakami(a, l, c).total, flops_odc(a, l, c).total);
        prop_assert!(odc < im);
        prop_assert!(kw < im);
        // ODC's per-user ℓ×ℓ SVD only undercuts Kawakami's stacked SVD once a ≥ 2ℓ
        if a >= 2 * l {
            prop_assert!(odc < kw, "a={a} l={l} c={c}: odc {odc} kawakami {kw}");
        }
    }

    #[test]
    fn flops_grow_with_users(a in 1u64..=10_000, l in 1u64..=500, c in 1u64..=500) {
        for f in [flops_imakura, flops_kawakami, flops_odc] {
            prop_assert!(f(a, l, c + 1).total > f(a, l, c).total);
        }
    }

    #[test]
    fn odc_aligns_rotated_anchors(a in 4usize..=40, l in 1usize..=6, c in 1usize..=6, seed in any::<u64>()) {
        let l = l.min(a - 1);
        let mut rng = seeded_rng(seed);
        let base = Matrix::gaussian(a, l, &mut rng);
        let anchors: Vec<Matrix> = (0..c)
            .map(|i| base.matmul(&haar_orthogonal(l, seed ^ (i as u64 + 1))).unwrap())
            .collect();
        let res = align_odc(&anchors, &OdcTarget::Seed(seed)).unwrap();
        for g in &res.g {
            prop_assert!(g.orthonormality_defect() <= 1e-10);
        }
        prop_assert!(res.anchor_residual <= 1e-9 * base.frobenius_norm().max(1.0));
        let kw = align_kawakami(&anchors).unwrap();
        prop_assert!(anchor_residual(&anchors, &kw.g).unwrap() <= 1e-8 * base.frobenius_norm().max(1.0));
    }
}

#[test]
fn collusion_round_trip_over_seeded_instances() {
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let mut rng = seeded_rng(seed);
        let m = 2 + (seed as usize % 12);
        let a = m + 1 + (seed as usize % 20);
        let l = 1 + (seed as usize % m);
        let anchor = generate_anchor(a, m, seed).unwrap();
        let f = Matrix::gaussian(m, l, &mut rng);
        let rec = collude_reconstruct(&anchor, &anchor.matmul(&f).unwrap()).unwrap();
        worst = worst.max(rec.frobenius_distance(&f).unwrap() / f.frobenius_norm());
    }
    assert!(worst <= 1e-8, "worst relative error {worst:e}");
}

#[test]
fn haar_dim2_angle_is_uniform() {
    // Rotation angle of a Haar O(2) draw (after folding reflections) is
    // uniform on [0, 2π); determinant signs are balanced.
    const BINS: usize = 20;
    const N: usize = 10_000;
    let mut counts = [0usize; BINS];
    let mut reflections = 0usize;
    let mut rng = seeded_rng(2024);
    for _ in 0..N {
        let o = dc_core::numkernels::haar_orthogonal_with(2, &mut rng);
        let det = o.get(0, 0) * o.get(1, 1) - o.get(0, 1) * o.get(1, 0);
        assert!((det.abs() - 1.0).abs() < 1e-12);
        if det < 0.0 {
            reflections += 1;
        }
        let theta = o.get(1, 0).atan2(o.get(0, 0)).rem_euclid(std::f64::consts::TAU);
        counts[((theta / std::f64::consts::TAU * BINS as f64) as usize).min(BINS - 1)] += 1;
    }
    let expected = N as f64 / BINS as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 99.9% quantile of χ² with 19 degrees of freedom
    assert!(chi2 < 43.82, "chi2 = {chi2}, counts {counts:?}");
    let z = (reflections as f64 - N as f64 / 2.0) / (N as f64 / 4.0).sqrt();
    assert!(z.abs() < 3.29, "reflection share z = {z}");
}

#[test]
fn scenario_generation_is_bit_identical() {
    for (k, &condition) in BasisCondition::ALL.iter().enumerate() {
        let spec = ScenarioSpec {
            users: 3,
            feature_dim: 9,
            latent_dim: 3,
            samples_per_user: 15,
            anchor_rows: 12,
            condition,
            seed: 77 + k as u64,
        };
        let a = make_scenario(&spec).unwrap();
        let b = make_scenario(&spec).unwrap();
        assert_eq!(a.anchor.as_slice(), b.anchor.as_slice());
        for (ua, ub) in a.users.iter().zip(&b.users) {
            assert_eq!(ua.x.as_slice(), ub.x.as_slice());
            assert_eq!(ua.f.as_slice(), ub.f.as_slice());
            assert_eq!(ua.e.as_slice(), ub.e.as_slice());
            assert_eq!(ua.labels, ub.labels);
        }
    }
}
