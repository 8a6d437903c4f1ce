mod common;

use homeospline::io::GrayImage;
use homeospline::warp2d::{
    default_kernel_2d, default_lambda_grid_2d, diagonal_swap_fixture, jacobian_min_default,
    synthetic_face, warp_image_homeo, AffineMap, DeformedGrid, Lattice, PlanarMap,
};
use homeospline::{
    deform_grid, jacobian_min, match_homeo, match_unconstrained, warp_image, Kernel, LandmarkPairs,
};
use nalgebra::{DMatrix, DVector};

fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

fn max_dist(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| dist(*p, *q))
        .fold(0.0, f64::max)
}

fn rotation(angle: f64, scale: f64, offset: [f64; 2]) -> AffineMap {
    let (s, c) = angle.sin_cos();
    AffineMap {
        matrix: [[scale * c, -scale * s], [scale * s, scale * c]],
        offset,
    }
}

fn scattered() -> Vec<[f64; 2]> {
    vec![
        [0.1, 0.2],
        [0.8, 0.1],
        [0.5, 0.5],
        [0.2, 0.9],
        [0.9, 0.8],
        [0.4, 0.3],
        [0.7, 0.6],
    ]
}

#[test]
fn affine_targets_give_the_affine_map_exactly() {
    let map = rotation(0.4, 1.2, [0.05, -0.1]);
    let sources = scattered();
    let pairs = LandmarkPairs::new(
        sources.clone(),
        sources.iter().map(|&p| map.apply(p)).collect(),
    )
    .unwrap();
    let kernel = default_kernel_2d(&pairs.sources).unwrap();
    let flow = match_homeo(&pairs, &kernel, 1e-2, 30).unwrap();
    let probes = Lattice::unit(7, 7).nodes();
    let expected: Vec<[f64; 2]> = probes.iter().map(|&p| map.apply(p)).collect();
    assert!(max_dist(&flow.map_points(&probes).unwrap(), &expected) < 1e-8);
    let det = 1.2f64 * 1.2;
    assert!((jacobian_min_default(&flow).unwrap() - det).abs() < 1e-5);
}

#[test]
fn swap_folds_only_without_the_flow() {
    let pairs = diagonal_swap_fixture();
    let kernel = default_kernel_2d(&pairs.sources).unwrap();
    let plain = match_unconstrained(&pairs, &kernel, 1e-2).unwrap();
    assert!(jacobian_min_default(&plain).unwrap() < 0.0);
    let flow = match_homeo(&pairs, &kernel, 1e-2, 30).unwrap();
    assert!(jacobian_min_default(&flow).unwrap() > 0.0);
}

#[test]
fn homeo_landmarks_land_near_targets_for_small_penalty() {
    let sources = scattered();
    let targets: Vec<[f64; 2]> = sources
        .iter()
        .map(|p| {
            [
                p[0] + 0.1 * (4.0 * p[1]).sin(),
                p[1] + 0.1 * (3.0 * p[0]).cos(),
            ]
        })
        .collect();
    let pairs = LandmarkPairs::new(sources, targets).unwrap();
    let kernel = default_kernel_2d(&pairs.sources).unwrap();
    let far = |lambda: f64, steps| {
        let flow = match_homeo(&pairs, &kernel, lambda, steps).unwrap();
        max_dist(&flow.map_points(&pairs.sources).unwrap(), &pairs.targets)
    };
    assert!(far(1e-4, 120) < far(1e-2, 120));
    assert!(far(1e-4, 120) < 1e-3);
}

#[test]
fn planar_round_trip_is_first_order() {
    let pairs = diagonal_swap_fixture();
    let kernel = default_kernel_2d(&pairs.sources).unwrap();
    let probes = Lattice::unit(10, 10).nodes();
    let err = |steps| {
        let flow = match_homeo(&pairs, &kernel, 1e-2, steps).unwrap();
        let back = flow
            .inverse()
            .map_points(&flow.map_points(&probes).unwrap())
            .unwrap();
        max_dist(&back, &probes)
    };
    let ratio = err(30) / err(60);
    assert!((1.7..=2.3).contains(&ratio), "{ratio}");
}

#[test]
fn huge_penalty_gives_the_least_squares_affine_map() {
    let sources = scattered();
    let targets: Vec<[f64; 2]> = sources
        .iter()
        .map(|p| {
            [
                p[0] + 0.1 * (4.0 * p[1]).sin(),
                p[1] + 0.1 * (3.0 * p[0]).cos(),
            ]
        })
        .collect();
    let pairs = LandmarkPairs::new(sources.clone(), targets.clone()).unwrap();
    let fit = match_unconstrained(&pairs, &Kernel::gaussian(0.2).unwrap(), 1e6).unwrap();
    let design = DMatrix::from_fn(sources.len(), 3, |i, j| {
        if j == 0 {
            1.0
        } else {
            sources[i][j - 1]
        }
    });
    let svd = design.clone().svd(true, true);
    for c in 0..2 {
        let rhs = DVector::from_iterator(targets.len(), targets.iter().map(|t| t[c]));
        let coef = svd.solve(&rhs, 1e-14).unwrap();
        assert!((fit.offset[c] - coef[0]).abs() < 1e-3);
        assert!((fit.affine[c][0] - coef[1]).abs() < 1e-3);
        assert!((fit.affine[c][1] - coef[2]).abs() < 1e-3);
    }
}

#[test]
fn identity_grid_matches_golden() {
    let golden: DeformedGrid =
        serde_json::from_str(include_str!("fixtures/identity_grid_2x2.json")).unwrap();
    assert_eq!(
        deform_grid(&AffineMap::identity(), 2, 2, 2).unwrap(),
        golden
    );
    let shifted = deform_grid(&AffineMap::translation([0.25, -0.5]), 2, 2, 2).unwrap();
    for (line, gold) in shifted.horizontal.iter().zip(&golden.horizontal) {
        for (p, q) in line.iter().zip(gold) {
            assert_eq!(*p, [q[0] + 0.25, q[1] - 0.5]);
        }
    }
    assert!(deform_grid(&AffineMap::identity(), 1, 3, 2).is_err());
    assert!(deform_grid(&AffineMap::identity(), 3, 3, 0).is_err());
}

#[test]
fn jacobian_of_affine_maps() {
    let lattice = Lattice::unit(5, 5);
    let det = jacobian_min(&rotation(1.0, 0.5, [0.0, 0.0]), &lattice, 1e-3).unwrap();
    assert!((det - 0.25).abs() < 1e-9);
    let flip = AffineMap {
        matrix: [[-1.0, 0.0], [0.0, 1.0]],
        offset: [1.0, 0.0],
    };
    assert!((jacobian_min(&flip, &lattice, 1e-3).unwrap() + 1.0).abs() < 1e-9);
    assert!(jacobian_min(&flip, &lattice, 0.0).is_err());
}

#[test]
fn identity_warp_preserves_pixels() {
    let face = synthetic_face(40, 30);
    assert_eq!(
        warp_image(&face, &AffineMap::identity(), 40, 30).unwrap(),
        face
    );
}

#[test]
fn warp_moves_content_with_the_landmarks() {
    let mut img = GrayImage::new(32, 32);
    for r in 12..20 {
        for c in 4..12 {
            img.set(c, r, 255);
        }
    }
    // the bright square on the left is carried to the right
    let sources = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.25, 0.5]];
    let mut targets = sources.clone();
    targets[4] = [0.6, 0.5];
    let pairs = LandmarkPairs::new(sources, targets).unwrap();
    let flow = match_homeo(
        &pairs,
        &default_kernel_2d(&pairs.sources).unwrap(),
        1e-4,
        60,
    )
    .unwrap();
    let out = warp_image_homeo(&img, &flow, 32, 32).unwrap();
    assert!(out.get(19, 16) > 200, "{}", out.get(19, 16));
    assert!(out.get(8, 16) < img.get(8, 16));
}

#[test]
fn default_grid_is_seven_decades() {
    let g = default_lambda_grid_2d();
    assert_eq!(g.len(), 7);
    assert!((g[0] - 1e-4).abs() < 1e-18 && (g[6] - 1e2).abs() < 1e-10);
}

#[test]
fn mismatched_landmarks_are_rejected() {
    assert!(LandmarkPairs::new(vec![[0.0, 0.0]; 3], vec![[0.0, 0.0]; 2]).is_err());
}
