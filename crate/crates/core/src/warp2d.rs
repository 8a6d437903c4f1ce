//! Planar landmark matching, fold detection, grid deformation and image warping.
//!
//! Coordinates live in the unit square. For images the first coordinate runs
//! along columns and the second down the rows, both normalised by the image size.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{fit_time_field_2d, FlowMap, TimeVectorField};
use crate::io::GrayImage;
use crate::kernel::Kernel;
use crate::monotone::log_grid;
use crate::spline::{fit_spline_2d, VectorSplineFit2D};

/// Upper bound on step doubling when the planar guard fails.
pub const MAX_STEPS_2D: usize = 960;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkPairs {
    pub sources: Vec<[f64; 2]>,
    pub targets: Vec<[f64; 2]>,
}

impl LandmarkPairs {
    pub fn new(sources: Vec<[f64; 2]>, targets: Vec<[f64; 2]>) -> Result<Self> {
        if sources.len() != targets.len() {
            return Err(Error::Input(format!(
                "{} sources but {} targets",
                sources.len(),
                targets.len()
            )));
        }
        Ok(Self { sources, targets })
    }

    /// The same correspondences read in the opposite direction.
    pub fn reversed(&self) -> Self {
        Self {
            sources: self.targets.clone(),
            targets: self.sources.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }
}

/// Unit-square corners held fixed while two interior landmarks trade places
/// along the main diagonal.
pub fn diagonal_swap_fixture() -> LandmarkPairs {
    let corners = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
    let mut sources = corners.to_vec();
    let mut targets = corners.to_vec();
    sources.extend([[0.35, 0.35], [0.65, 0.65]]);
    targets.extend([[0.65, 0.65], [0.35, 0.35]]);
    LandmarkPairs { sources, targets }
}

/// Penalties scanned by the fold comparison: 7 log-spaced points in `[1e-4, 1e2]`.
pub fn default_lambda_grid_2d() -> Vec<f64> {
    log_grid(1e-4, 1e2, 7)
}

/// Gaussian of width 0.2 times the larger side of the landmarks' bounding box.
pub fn default_kernel_2d(points: &[[f64; 2]]) -> Result<Kernel> {
    let range = |c: usize| {
        let (lo, hi) = points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p[c]), hi.max(p[c]))
            });
        hi - lo
    };
    let r = range(0).max(range(1));
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::DegenerateDesign("landmarks span no area".into()));
    }
    Kernel::gaussian(0.2 * r)
}

/// Anything that maps planar points to planar points.
pub trait PlanarMap: Sync {
    fn map_points(&self, points: &[[f64; 2]]) -> Result<Vec<[f64; 2]>>;
}

impl PlanarMap for VectorSplineFit2D {
    fn map_points(&self, points: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
        Ok(points.iter().map(|&p| self.eval(p)).collect())
    }
}

impl PlanarMap for FlowMap<VectorSplineFit2D> {
    fn map_points(&self, points: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
        self.eval(points)
    }
}

/// Identity and translations, handy as reference maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub matrix: [[f64; 2]; 2],
    pub offset: [f64; 2],
}

impl AffineMap {
    pub fn identity() -> Self {
        Self {
            matrix: [[1.0, 0.0], [0.0, 1.0]],
            offset: [0.0, 0.0],
        }
    }

    pub fn translation(c: [f64; 2]) -> Self {
        Self {
            offset: c,
            ..Self::identity()
        }
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let m = &self.matrix;
        [
            m[0][0] * p[0] + m[0][1] * p[1] + self.offset[0],
            m[1][0] * p[0] + m[1][1] * p[1] + self.offset[1],
        ]
    }
}

impl PlanarMap for AffineMap {
    fn map_points(&self, points: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
        Ok(points.iter().map(|&p| self.apply(p)).collect())
    }
}

/// Unconstrained spline matching: the smoothing spline from sources to absolute targets.
pub fn match_unconstrained(
    pairs: &LandmarkPairs,
    kernel: &Kernel,
    lambda: f64,
) -> Result<VectorSplineFit2D> {
    fit_spline_2d(&pairs.sources, &pairs.targets, kernel, lambda)
}

/// Homeomorphic matching: landmarks travel along straight lines and each time
/// node is an ordinary planar smoothing spline of the displacements.
pub fn match_homeo(
    pairs: &LandmarkPairs,
    kernel: &Kernel,
    lambda: f64,
    steps: usize,
) -> Result<FlowMap<VectorSplineFit2D>> {
    Ok(FlowMap::forward(fit_time_field_2d(
        &pairs.sources,
        &pairs.targets,
        kernel,
        lambda,
        steps,
    )?))
}

/// [`match_homeo`] with the step count doubled from `steps` until the field's
/// sup-norm falls below it (capped at [`MAX_STEPS_2D`]).
pub fn match_homeo_guarded(
    pairs: &LandmarkPairs,
    kernel: &Kernel,
    lambda: f64,
    steps: usize,
) -> Result<FlowMap<VectorSplineFit2D>> {
    let mut steps = steps;
    loop {
        let field: TimeVectorField<VectorSplineFit2D> =
            fit_time_field_2d(&pairs.sources, &pairs.targets, kernel, lambda, steps)?;
        if field.guard_holds() || steps * 2 > MAX_STEPS_2D {
            return Ok(FlowMap::forward(field));
        }
        steps *= 2;
    }
}

/// Rectangular lattice of `rows x cols` nodes spanning `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub rows: usize,
    pub cols: usize,
}

impl Lattice {
    pub fn unit(rows: usize, cols: usize) -> Self {
        Self {
            lo: [0.0, 0.0],
            hi: [1.0, 1.0],
            rows,
            cols,
        }
    }

    fn coord(&self, c: usize, i: usize, count: usize) -> f64 {
        if count == 1 {
            return 0.5 * (self.lo[c] + self.hi[c]);
        }
        self.lo[c] + (self.hi[c] - self.lo[c]) * i as f64 / (count - 1) as f64
    }

    pub fn nodes(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.push([self.coord(0, c, self.cols), self.coord(1, r, self.rows)]);
            }
        }
        out
    }

    /// Smaller of the two node spacings.
    pub fn spacing(&self) -> f64 {
        let s = |c: usize, n: usize| (self.hi[c] - self.lo[c]) / (n.max(2) - 1) as f64;
        s(0, self.cols).min(s(1, self.rows))
    }
}

/// Smallest central-difference Jacobian determinant over the lattice nodes.
pub fn jacobian_min(map: &impl PlanarMap, lattice: &Lattice, step: f64) -> Result<f64> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Config(format!(
            "difference step must be positive, got {step}"
        )));
    }
    let nodes = lattice.nodes();
    if nodes.is_empty() {
        return Err(Error::Config("empty lattice".into()));
    }
    let mut probes = Vec::with_capacity(4 * nodes.len());
    for p in &nodes {
        probes.push([p[0] + step, p[1]]);
        probes.push([p[0] - step, p[1]]);
        probes.push([p[0], p[1] + step]);
        probes.push([p[0], p[1] - step]);
    }
    let images = map.map_points(&probes)?;
    Ok(images
        .chunks_exact(4)
        .map(|q| {
            let dx = [
                (q[0][0] - q[1][0]) / (2.0 * step),
                (q[0][1] - q[1][1]) / (2.0 * step),
            ];
            let dy = [
                (q[2][0] - q[3][0]) / (2.0 * step),
                (q[2][1] - q[3][1]) / (2.0 * step),
            ];
            dx[0] * dy[1] - dx[1] * dy[0]
        })
        .fold(f64::INFINITY, f64::min))
}

/// [`jacobian_min`] on a 20x20 unit lattice with step spacing/100.
pub fn jacobian_min_default(map: &impl PlanarMap) -> Result<f64> {
    let lattice = Lattice::unit(20, 20);
    jacobian_min(map, &lattice, lattice.spacing() / 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformedGrid {
    pub rows: usize,
    pub cols: usize,
    pub samples_per_edge: usize,
    /// Images of the lines of constant second coordinate, top to bottom.
    pub horizontal: Vec<Vec<[f64; 2]>>,
    /// Images of the lines of constant first coordinate, left to right.
    pub vertical: Vec<Vec<[f64; 2]>>,
}

/// Images of the lines of a `rows x cols` grid on the unit square. Each edge
/// between adjacent grid nodes is sampled `samples_per_edge` times.
pub fn deform_grid(
    map: &impl PlanarMap,
    rows: usize,
    cols: usize,
    samples_per_edge: usize,
) -> Result<DeformedGrid> {
    if rows < 2 || cols < 2 {
        return Err(Error::Config(format!(
            "grid needs at least 2x2 lines, got {rows}x{cols}"
        )));
    }
    if samples_per_edge < 1 {
        return Err(Error::Config("samples per edge must be at least 1".into()));
    }
    let line = |segments: usize| -> Vec<f64> {
        let m = segments * samples_per_edge;
        (0..=m).map(|i| i as f64 / m as f64).collect()
    };
    let along_x = line(cols - 1);
    let along_y = line(rows - 1);
    let horizontal = (0..rows)
        .map(|r| {
            let y = r as f64 / (rows - 1) as f64;
            let pts: Vec<[f64; 2]> = along_x.iter().map(|&x| [x, y]).collect();
            map.map_points(&pts)
        })
        .collect::<Result<_>>()?;
    let vertical = (0..cols)
        .map(|c| {
            let x = c as f64 / (cols - 1) as f64;
            let pts: Vec<[f64; 2]> = along_y.iter().map(|&y| [x, y]).collect();
            map.map_points(&pts)
        })
        .collect::<Result<_>>()?;
    Ok(DeformedGrid {
        rows,
        cols,
        samples_per_edge,
        horizontal,
        vertical,
    })
}

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}

/// Bilinear sample at normalised coordinates; zero outside the unit square.
pub fn sample_bilinear(image: &GrayImage, q: [f64; 2]) -> f64 {
    if !(q[0] >= 0.0 && q[0] <= 1.0 && q[1] >= 0.0 && q[1] <= 1.0) {
        return 0.0;
    }
    let (w, h) = (image.width, image.height);
    let u = snap(q[0] * w as f64 - 0.5).clamp(0.0, (w - 1) as f64);
    let v = snap(q[1] * h as f64 - 0.5).clamp(0.0, (h - 1) as f64);
    let (c0, r0) = (u.floor() as usize, v.floor() as usize);
    let (c1, r1) = ((c0 + 1).min(w - 1), (r0 + 1).min(h - 1));
    let (fu, fv) = (u - c0 as f64, v - r0 as f64);
    let px = |c: usize, r: usize| image.get(c, r) as f64;
    let top = px(c0, r0) * (1.0 - fu) + px(c1, r0) * fu;
    let bottom = px(c0, r1) * (1.0 - fu) + px(c1, r1) * fu;
    top * (1.0 - fv) + bottom * fv
}

/// Backward warping: output pixel centre `p` takes the input value at `backward(p)`.
pub fn warp_image(
    image: &GrayImage,
    backward: &impl PlanarMap,
    out_width: usize,
    out_height: usize,
) -> Result<GrayImage> {
    if image.width == 0 || image.height == 0 {
        return Err(Error::Input("empty input image".into()));
    }
    if out_width == 0 || out_height == 0 {
        return Err(Error::Config("output size must be positive".into()));
    }
    let rows: Vec<Vec<u8>> = (0..out_height)
        .into_par_iter()
        .map(|r| {
            let y = (r as f64 + 0.5) / out_height as f64;
            let centres: Vec<[f64; 2]> = (0..out_width)
                .map(|c| [(c as f64 + 0.5) / out_width as f64, y])
                .collect();
            let sources = backward.map_points(&centres)?;
            Ok(sources
                .iter()
                .map(|&q| sample_bilinear(image, q).round().clamp(0.0, 255.0) as u8)
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(GrayImage {
        width: out_width,
        height: out_height,
        pixels: rows.concat(),
    })
}

/// Warps with the inverse of a homeomorphic match.
pub fn warp_image_homeo(
    image: &GrayImage,
    map: &FlowMap<VectorSplineFit2D>,
    out_width: usize,
    out_height: usize,
) -> Result<GrayImage> {
    warp_image(image, &map.inverse(), out_width, out_height)
}

/// A cartoon face: bright oval head, dark eyes, nose and mouth, on black.
pub fn synthetic_face(width: usize, height: usize) -> GrayImage {
    let mut img = GrayImage::new(width, height);
    let ellipse = |p: [f64; 2], c: [f64; 2], r: [f64; 2]| {
        ((p[0] - c[0]) / r[0]).powi(2) + ((p[1] - c[1]) / r[1]).powi(2) <= 1.0
    };
    for row in 0..height {
        for col in 0..width {
            let p = [
                (col as f64 + 0.5) / width as f64,
                (row as f64 + 0.5) / height as f64,
            ];
            let mut v = 0u8;
            if ellipse(p, [0.5, 0.5], [0.36, 0.44]) {
                v = 200;
            }
            if ellipse(p, [0.35, 0.38], [0.07, 0.045]) || ellipse(p, [0.65, 0.38], [0.07, 0.045]) {
                v = 40;
            }
            if ellipse(p, [0.5, 0.55], [0.035, 0.09]) {
                v = 140;
            }
            if ellipse(p, [0.5, 0.74], [0.15, 0.04]) {
                v = 70;
            }
            img.set(col, row, v);
        }
    }
    img
}

/// Landmarks on [`synthetic_face`]: eye centres, nose tip, mouth corners and chin.
pub fn synthetic_face_landmarks() -> Vec<[f64; 2]> {
    vec![
        [0.35, 0.38],
        [0.65, 0.38],
        [0.5, 0.62],
        [0.35, 0.74],
        [0.65, 0.74],
        [0.5, 0.93],
    ]
}
