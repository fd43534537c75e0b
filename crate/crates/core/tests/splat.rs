use headsplat::morphable::skin;
use headsplat::oracle::{compositing_suite, gradient_suite, random_scene, GradientScene};
use headsplat::psm::deform_samples;
use headsplat::splat::{rasterize, render_gaussians, RasterConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn tile_rasterizer_matches_global_sort() {
    let r = compositing_suite(60, 17);
    assert!(r.max_color_deviation <= 1e-5, "{r:?}");
    assert!(r.max_weight_deviation <= 1e-5, "{r:?}");
}

#[test]
fn gradients_match_central_differences() {
    for check in gradient_suite(3) {
        assert!(check.checked > 0 && check.largest > 0.0, "{check:?}");
        assert!(
            check.max_rel_err <= 1e-3,
            "{}: {:.3e} over {}",
            check.class,
            check.max_rel_err,
            check.checked
        );
    }
}

#[test]
fn render_is_bitwise_stable_across_thread_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let splats = random_scene(&mut rng, 300, 70, 50, 2);
    let cfg = RasterConfig::default();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| rasterize(&splats, 70, 50, [0.2; 3], &cfg).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.image, b.image);
    assert_eq!(a.max_weight, b.max_weight);
}

#[test]
fn alpha_and_transmittance_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for kind in 0..3 {
        let splats = random_scene(&mut rng, 64, 32, 32, kind);
        let r = rasterize(&splats, 32, 32, [0.0; 3], &RasterConfig::default()).unwrap();
        assert!(r.alpha.iter().all(|a| (0.0..=1.0).contains(a)));
        assert!(r.max_weight.iter().all(|w| (0.0..=1.0).contains(w)));
        assert!(r.image.iter().flatten().all(|c| (0.0..=1.0).contains(c)));
    }
}

#[test]
fn opaque_gaussian_shows_its_color() {
    let mut sc = GradientScene::new(1);
    sc.gaussians.prims.truncate(1);
    let g = &mut sc.gaussians.prims[0];
    g.base.opacity_raw = 12.0;
    g.log_scale = [-2.0; 3];
    g.sh = [[0.0; 3]; 16];
    g.sh[0] = [0.4 / headsplat::splat::SH_C0, -0.2 / headsplat::splat::SH_C0, 0.0];
    let mesh = skin(&sc.model, &sc.pe).unwrap();
    let d = deform_samples(&mesh, &sc.gaussians.samples()).unwrap();
    let out = render_gaussians(&sc.gaussians, &d, &sc.cam, [1.0; 3], &RasterConfig::default()).unwrap();
    let (i, w) = out
        .per_primitive_max_weight
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, &w)| if w > acc.1 { (i, w) } else { acc });
    assert_eq!(i, 0);
    assert!((w - 0.99).abs() < 1e-3, "{w}");
    let splat = out.splats()[0].unwrap();
    let p = (splat.mean[1] as usize) * 16 + splat.mean[0] as usize;
    let c = out.image[p];
    assert!(
        (c[0] - 0.9).abs() < 0.02 && (c[1] - 0.3).abs() < 0.02 && (c[2] - 0.5).abs() < 0.02,
        "{c:?}"
    );
}
