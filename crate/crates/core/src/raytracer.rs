//! Deterministic image-method specular ray tracer.
//!
//! For every ordered sequence of up to `max_bounces` surfaces the
//! transmitter is mirrored across each surface plane in turn; the path is
//! then recovered backwards from the receiver, validated against the
//! polygons, and tested for occlusion segment by segment.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scene::{Scene, Surface, SurfaceKind};
use crate::vectormath::{mirror_point, Vec3};

/// Occlusion and polygon-edge tolerance, meters.
pub const GEOMETRY_EPSILON: f64 = 1e-9;
/// RSSI reported when no energy arrives.
pub const RSSI_FLOOR_DBM: f64 = -200.0;
pub const MAX_BOUNCES: usize = 3;
pub const DEFAULT_MAX_BOUNCES: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationPath {
    /// tx, bounce points..., rx
    pub vertices: Vec<Vec3>,
    /// Indices into `Scene::surfaces`, one per bounce.
    pub surfaces_hit: Vec<usize>,
    pub total_length: f64,
    /// Includes the edge-diffraction amplitude factor for diffracted paths.
    pub gamma_product: Complex64,
    /// Single tile bounce routed over the tile edge.
    pub diffracted: bool,
}

impl PropagationPath {
    pub fn bounces(&self) -> usize {
        self.surfaces_hit.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSummary {
    pub coefficient_sum: Complex64,
    pub rssi_dbm: f64,
    pub path_count: usize,
}

/// Whether any surface other than those in `skip` blocks the open segment
/// `a → b`.
fn segment_blocked(surfaces: &[Surface], a: Vec3, b: Vec3, skip: [usize; 2]) -> bool {
    let d = b - a;
    let len = d.norm();
    if len <= 2.0 * GEOMETRY_EPSILON {
        return false;
    }
    let lo = a.component_min(b);
    let hi = a.component_max(b);
    let t_eps = GEOMETRY_EPSILON / len;
    for (idx, s) in surfaces.iter().enumerate() {
        if idx == skip[0] || idx == skip[1] {
            continue;
        }
        let (slo, shi) = s.bounds();
        if shi.x < lo.x - GEOMETRY_EPSILON
            || slo.x > hi.x + GEOMETRY_EPSILON
            || shi.y < lo.y - GEOMETRY_EPSILON
            || slo.y > hi.y + GEOMETRY_EPSILON
            || shi.z < lo.z - GEOMETRY_EPSILON
            || slo.z > hi.z + GEOMETRY_EPSILON
        {
            continue;
        }
        let plane = s.plane();
        let da = plane.signed_distance(a);
        let db = plane.signed_distance(b);
        if (da > 0.0 && db > 0.0) || (da < 0.0 && db < 0.0) {
            continue;
        }
        let denom = da - db;
        if denom.abs() < 1e-300 {
            // Segment lies in the plane; grazing contact does not block.
            continue;
        }
        let t = da / denom;
        if t <= t_eps || t >= 1.0 - t_eps {
            continue;
        }
        let p = a + d * t;
        // Edge hits block, so closed solids cannot leak through seams.
        if s.contains_projected(p, GEOMETRY_EPSILON) {
            return true;
        }
    }
    false
}

/// Candidate reflection point on `s` for the straight line from `image` to
/// `next`. Requires the two points on opposite sides of the plane.
fn reflection_point(s: &Surface, image: Vec3, next: Vec3) -> Option<Vec3> {
    let plane = s.plane();
    let di = plane.signed_distance(image);
    let dn = plane.signed_distance(next);
    if !(di * dn < 0.0) || dn.abs() <= GEOMETRY_EPSILON || di.abs() <= GEOMETRY_EPSILON {
        return None;
    }
    let t = di / (di - dn);
    let p = image + (next - image) * t;
    if s.contains_projected(p, GEOMETRY_EPSILON) {
        Some(p)
    } else {
        None
    }
}

/// Validates one ordered surface sequence, returning the path if it exists.
fn try_sequence(scene: &Scene, tx: Vec3, rx: Vec3, seq: &[usize], images: &[Vec3]) -> Option<PropagationPath> {
    let m = seq.len();
    let surfaces = &scene.surfaces;
    let mut points = vec![Vec3::ZERO; m + 2];
    points[0] = tx;
    points[m + 1] = rx;
    for k in (0..m).rev() {
        points[k + 1] = reflection_point(&surfaces[seq[k]], images[k + 1], points[k + 2])?;
    }
    // Consecutive vertices must be distinct and each bounce must see both
    // neighbours on the same side of its plane.
    for k in 0..m {
        let plane = surfaces[seq[k]].plane();
        let before = plane.signed_distance(points[k]);
        let after = plane.signed_distance(points[k + 2]);
        if !(before * after > 0.0) {
            return None;
        }
    }
    for k in 0..=m {
        let skip_a = if k > 0 { seq[k - 1] } else { usize::MAX };
        let skip_b = if k < m { seq[k] } else { usize::MAX };
        if segment_blocked(surfaces, points[k], points[k + 1], [skip_a, skip_b]) {
            return None;
        }
    }
    let mut gamma = Complex64::new(1.0, 0.0);
    for k in 0..m {
        let s = &surfaces[seq[k]];
        let incoming = (points[k + 1] - points[k]).normalized().ok()?;
        let cos_i = incoming.vec().dot(s.normal().vec()).abs();
        gamma *= s.reflectivity.coefficient(cos_i).ok()?;
    }
    let total_length = points.windows(2).map(|w| w[0].distance(w[1])).sum();
    Some(PropagationPath {
        vertices: points,
        surfaces_hit: seq.to_vec(),
        total_length,
        gamma_product: gamma,
        diffracted: false,
    })
}

/// LOS path (if unoccluded) plus every specular path of up to
/// `max_bounces` bounces.
pub fn trace_paths(scene: &Scene, tx: Vec3, rx: Vec3, max_bounces: usize) -> Result<Vec<PropagationPath>> {
    if max_bounces > MAX_BOUNCES {
        return Err(Error::contract(format!("max_bounces must be <= {MAX_BOUNCES}, got {max_bounces}")));
    }
    let mut paths = Vec::new();
    if tx.distance(rx) > 0.0 && !segment_blocked(&scene.surfaces, tx, rx, [usize::MAX; 2]) {
        paths.push(PropagationPath {
            vertices: vec![tx, rx],
            surfaces_hit: Vec::new(),
            total_length: tx.distance(rx),
            gamma_product: Complex64::new(1.0, 0.0),
            diffracted: false,
        });
    }
    let mut seq = Vec::with_capacity(max_bounces);
    let mut images = Vec::with_capacity(max_bounces + 1);
    images.push(tx);
    enumerate(scene, tx, rx, max_bounces, &mut seq, &mut images, &mut paths);
    if scene.tile_edge_diffraction && max_bounces > 0 {
        let wavelength = scene.wavelength();
        for (idx, s) in scene.surfaces.iter().enumerate() {
            if s.kind == SurfaceKind::Tile {
                if let Some(p) = tile_edge_path(scene, idx, tx, rx, wavelength) {
                    paths.push(p);
                }
            }
        }
    }
    Ok(paths)
}

/// Knife-edge diffraction loss in dB for the Fresnel–Kirchhoff parameter
/// `v` (standard single-edge approximation; zero for `v ≤ −0.78`).
pub fn knife_edge_loss_db(v: f64) -> f64 {
    if v <= -0.78 {
        0.0
    } else {
        6.9 + 20.0 * (((v - 0.1) * (v - 0.1) + 1.0).sqrt() + v - 0.1).log10()
    }
}

/// Tile reflection whose specular point misses the tile, routed over the
/// nearest edge point and attenuated by the knife-edge loss of the miss
/// distance.
fn tile_edge_path(scene: &Scene, idx: usize, tx: Vec3, rx: Vec3, wavelength: f64) -> Option<PropagationPath> {
    let s = &scene.surfaces[idx];
    let plane = s.plane();
    let dt = plane.signed_distance(tx);
    let dr = plane.signed_distance(rx);
    if !(dt * dr > 0.0) || dt.abs() <= GEOMETRY_EPSILON || dr.abs() <= GEOMETRY_EPSILON {
        return None;
    }
    let image = mirror_point(tx, plane);
    let t = plane.signed_distance(image) / (plane.signed_distance(image) - dr);
    let specular = image + (rx - image) * t;
    if s.edge_margin(specular) <= GEOMETRY_EPSILON {
        return None;
    }
    let q = s.closest_boundary_point(specular);
    let miss = q.distance(specular);
    let (d1, d2) = (tx.distance(q), q.distance(rx));
    if !(d1 > GEOMETRY_EPSILON && d2 > GEOMETRY_EPSILON) {
        return None;
    }
    if segment_blocked(&scene.surfaces, tx, q, [idx, usize::MAX])
        || segment_blocked(&scene.surfaces, q, rx, [idx, usize::MAX])
    {
        return None;
    }
    let v = miss * (2.0 * (d1 + d2) / (wavelength * d1 * d2)).sqrt();
    let factor = 10f64.powf(-knife_edge_loss_db(v) / 20.0);
    let incoming = (q - tx).normalized().ok()?;
    let cos_i = incoming.vec().dot(s.normal().vec()).abs();
    let gamma = s.reflectivity.coefficient(cos_i).ok()? * factor;
    Some(PropagationPath {
        vertices: vec![tx, q, rx],
        surfaces_hit: vec![idx],
        total_length: d1 + d2,
        gamma_product: gamma,
        diffracted: true,
    })
}

fn enumerate(
    scene: &Scene,
    tx: Vec3,
    rx: Vec3,
    depth_left: usize,
    seq: &mut Vec<usize>,
    images: &mut Vec<Vec3>,
    out: &mut Vec<PropagationPath>,
) {
    if depth_left == 0 {
        return;
    }
    let prev_image = *images.last().expect("images starts with tx");
    for (idx, s) in scene.surfaces.iter().enumerate() {
        if seq.last() == Some(&idx) {
            continue;
        }
        // The previous image must sit strictly off this plane.
        if s.plane().signed_distance(prev_image).abs() <= GEOMETRY_EPSILON {
            continue;
        }
        let image = mirror_point(prev_image, s.plane());
        seq.push(idx);
        images.push(image);
        if let Some(p) = try_sequence(scene, tx, rx, seq, images) {
            out.push(p);
        }
        enumerate(scene, tx, rx, depth_left - 1, seq, images, out);
        seq.pop();
        images.pop();
    }
}

/// `h = λ/(4π d) · Γ · exp(−j 2π d / λ)`.
pub fn path_coefficient(path: &PropagationPath, wavelength_m: f64) -> Result<Complex64> {
    if !(wavelength_m > 0.0) {
        return Err(Error::contract("wavelength must be positive"));
    }
    let d = path.total_length;
    if !(d > 0.0) {
        return Err(Error::contract("zero-length path"));
    }
    let amplitude = wavelength_m / (4.0 * PI * d);
    let phase = Complex64::from_polar(1.0, -2.0 * PI * d / wavelength_m);
    Ok(path.gamma_product * amplitude * phase)
}

pub fn rssi_from_coefficient(tx_power_dbm: f64, h: Complex64) -> f64 {
    let mag = h.norm();
    if mag > 0.0 {
        (tx_power_dbm + 20.0 * mag.log10()).max(RSSI_FLOOR_DBM)
    } else {
        RSSI_FLOOR_DBM
    }
}

/// Coherent sum over `paths`.
pub fn received_power(tx_power_dbm: f64, paths: &[PropagationPath], wavelength_m: f64) -> Result<ChannelSummary> {
    let mut sum = Complex64::new(0.0, 0.0);
    for p in paths {
        sum += path_coefficient(p, wavelength_m)?;
    }
    let rssi_dbm = if paths.is_empty() { RSSI_FLOOR_DBM } else { rssi_from_coefficient(tx_power_dbm, sum) };
    Ok(ChannelSummary { coefficient_sum: sum, rssi_dbm, path_count: paths.len() })
}

/// RSSI at `rx` for the scene's AP.
pub fn rssi_at(scene: &Scene, rx: Vec3, max_bounces: usize) -> Result<ChannelSummary> {
    let paths = trace_paths(scene, scene.ap_position, rx, max_bounces)?;
    received_power(scene.ap_power_dbm, &paths, scene.wavelength())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub step: f64,
    pub z: f64,
}

impl GridSpec {
    pub fn dims(&self) -> (usize, usize) {
        let nx = ((self.x1 - self.x0) / self.step - 1e-9).ceil().max(1.0) as usize;
        let ny = ((self.y1 - self.y0) / self.step - 1e-9).ceil().max(1.0) as usize;
        (nx, ny)
    }

    pub fn x_centers(&self) -> Vec<f64> {
        let (nx, _) = self.dims();
        (0..nx).map(|i| self.x0 + (i as f64 + 0.5) * self.step).collect()
    }

    pub fn y_centers(&self) -> Vec<f64> {
        let (_, ny) = self.dims();
        (0..ny).map(|j| self.y0 + (j as f64 + 0.5) * self.step).collect()
    }
}

/// Row-major RSSI grid: `rows[j][i]` is the cell at `y_centers[j]`,
/// `x_centers[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub x_centers: Vec<f64>,
    pub y_centers: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl Heatmap {
    pub fn mean(&self) -> f64 {
        let n: usize = self.rows.iter().map(Vec::len).sum();
        self.rows.iter().flatten().sum::<f64>() / n as f64
    }

    /// Mean over cells whose centers fall inside the given xy rectangle.
    pub fn mean_in(&self, x0: f64, x1: f64, y0: f64, y1: f64) -> Option<f64> {
        let mut acc = 0.0;
        let mut n = 0usize;
        for (j, &y) in self.y_centers.iter().enumerate() {
            for (i, &x) in self.x_centers.iter().enumerate() {
                if x >= x0 && x <= x1 && y >= y0 && y <= y1 {
                    acc += self.rows[j][i];
                    n += 1;
                }
            }
        }
        (n > 0).then(|| acc / n as f64)
    }

    /// Header row of x centers, first column of y centers, 2-decimal dBm.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("y\\x");
        for x in &self.x_centers {
            let _ = write!(s, ",{x:.4}");
        }
        s.push('\n');
        for (y, row) in self.y_centers.iter().zip(&self.rows) {
            let _ = write!(s, "{y:.4}");
            for v in row {
                let _ = write!(s, ",{v:.2}");
            }
            s.push('\n');
        }
        s
    }

    /// Binary 8-bit PGM, linearly scaled from `min_dbm` (black) to
    /// `max_dbm` (white). The top image row is the largest y.
    pub fn to_pgm(&self, min_dbm: f64, max_dbm: f64) -> Result<Vec<u8>> {
        if !(max_dbm > min_dbm) {
            return Err(Error::contract("PGM range must satisfy max > min"));
        }
        let (w, h) = (self.x_centers.len(), self.y_centers.len());
        let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
        for row in self.rows.iter().rev() {
            for v in row {
                let t = ((v - min_dbm) / (max_dbm - min_dbm)).clamp(0.0, 1.0);
                out.push((t * 255.0).round() as u8);
            }
        }
        Ok(out)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_csv()).map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>, min_dbm: f64, max_dbm: f64) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_pgm(min_dbm, max_dbm)?).map_err(|e| Error::io(path.as_ref(), e))
    }
}

pub fn rssi_heatmap(scene: &Scene, grid: &GridSpec, max_bounces: usize) -> Result<Heatmap> {
    if !(grid.step > 0.0) {
        return Err(Error::contract("grid step must be positive"));
    }
    if !(grid.x1 > grid.x0 && grid.y1 > grid.y0) {
        return Err(Error::contract("grid extents must be increasing"));
    }
    let b = &scene.bounds;
    let eps = 1e-9;
    if grid.x0 < b.min.x - eps
        || grid.x1 > b.max.x + eps
        || grid.y0 < b.min.y - eps
        || grid.y1 > b.max.y + eps
        || grid.z < b.min.z
        || grid.z > b.max.z
    {
        return Err(Error::contract("grid extends outside the scene bounding box"));
    }
    let x_centers = grid.x_centers();
    let y_centers = grid.y_centers();
    let mut rows = Vec::with_capacity(y_centers.len());
    for &y in &y_centers {
        let mut row = Vec::with_capacity(x_centers.len());
        for &x in &x_centers {
            row.push(rssi_at(scene, Vec3::new(x, y, grid.z), max_bounces)?.rssi_dbm);
        }
        rows.push(row);
    }
    Ok(Heatmap { x_centers, y_centers, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{build_l_hallway, Aabb, Material, SceneConfig, SurfaceKind};

    const F: f64 = 60e9;

    fn open_scene() -> Scene {
        let b = Aabb::new(Vec3::new(-50.0, -50.0, -50.0), Vec3::new(50.0, 50.0, 50.0)).unwrap();
        Scene::free_space(Vec3::ZERO, 5.0, F, b).unwrap()
    }

    fn wavelength() -> f64 {
        crate::scene::SPEED_OF_LIGHT / F
    }

    #[test]
    fn empty_scene_single_los() {
        let s = open_scene();
        let paths = trace_paths(&s, Vec3::ZERO, Vec3::new(10.0, 0.0, 0.0), 2).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].total_length, 10.0);
        assert!(paths[0].surfaces_hit.is_empty());
    }

    #[test]
    fn single_wall_image_identity() {
        let mut s = open_scene();
        let big = 1e4;
        s.add_surface(
            vec![Vec3::new(-big, -big, 0.0), Vec3::new(big, -big, 0.0), Vec3::new(big, big, 0.0), Vec3::new(-big, big, 0.0)],
            Material::CONCRETE,
            SurfaceKind::Floor,
        )
        .unwrap();
        let tx = Vec3::new(0.0, 0.0, 2.0);
        let rx = Vec3::new(7.0, 3.0, 1.0);
        let paths = trace_paths(&s, tx, rx, 2).unwrap();
        assert_eq!(paths.len(), 2);
        let refl = paths.iter().find(|p| p.bounces() == 1).unwrap();
        let image = mirror_point(tx, s.surfaces[0].plane());
        assert!((refl.total_length - image.distance(rx)).abs() < 1e-12);
        assert!(refl.vertices[1].z.abs() < 1e-12);
    }

    #[test]
    fn max_bounces_bound() {
        let s = open_scene();
        assert!(trace_paths(&s, Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), 4).is_err());
    }

    #[test]
    fn free_space_path_loss_at_60ghz() {
        let lambda = wavelength();
        assert!((lambda - 4.99654e-3).abs() < 1e-8);
        let path = PropagationPath {
            vertices: vec![Vec3::ZERO, Vec3::new(10.0, 0.0, 0.0)],
            surfaces_hit: vec![],
            total_length: 10.0,
            gamma_product: Complex64::new(1.0, 0.0),
            diffracted: false,
        };
        let h = path_coefficient(&path, lambda).unwrap();
        assert!((h.norm() - lambda / (4.0 * PI * 10.0)).abs() < 1e-18);
        assert!((20.0 * h.norm().log10() + 88.01).abs() < 0.005);

        let pec = PropagationPath { gamma_product: Complex64::new(-1.0, 0.0), ..path.clone() };
        let hp = path_coefficient(&pec, lambda).unwrap();
        assert!((hp + h).norm() < 1e-18);

        let far = PropagationPath { total_length: 20.0, ..path.clone() };
        let hf = path_coefficient(&far, lambda).unwrap();
        assert!((20.0 * (hf.norm() / h.norm()).log10() + 6.0206).abs() < 1e-4);

        let zero = PropagationPath { total_length: 0.0, ..path };
        assert!(path_coefficient(&zero, lambda).is_err());
    }

    #[test]
    fn received_power_cases() {
        let lambda = wavelength();
        let los = PropagationPath {
            vertices: vec![Vec3::ZERO, Vec3::new(10.0, 0.0, 0.0)],
            surfaces_hit: vec![],
            total_length: 10.0,
            gamma_product: Complex64::new(1.0, 0.0),
            diffracted: false,
        };
        let one = received_power(5.0, std::slice::from_ref(&los), lambda).unwrap();
        assert!((one.rssi_dbm + 83.01).abs() < 0.005);
        let two = received_power(5.0, &[los.clone(), los.clone()], lambda).unwrap();
        assert!((two.rssi_dbm - one.rssi_dbm - 6.0206).abs() < 1e-4);
        let anti = PropagationPath { gamma_product: Complex64::new(-1.0, 0.0), ..los.clone() };
        let cancel = received_power(5.0, &[los, anti], lambda).unwrap();
        assert_eq!(cancel.rssi_dbm, RSSI_FLOOR_DBM);
        let none = received_power(5.0, &[], lambda).unwrap();
        assert_eq!((none.rssi_dbm, none.path_count), (RSSI_FLOOR_DBM, 0));
    }

    #[test]
    fn aligned_phasor_never_lowers_rssi() {
        let lambda = wavelength();
        let base = PropagationPath {
            vertices: vec![Vec3::ZERO, Vec3::new(10.0, 0.0, 0.0)],
            surfaces_hit: vec![],
            total_length: 10.0,
            gamma_product: Complex64::new(1.0, 0.0),
            diffracted: false,
        };
        let h0 = path_coefficient(&base, lambda).unwrap();
        let before = received_power(5.0, std::slice::from_ref(&base), lambda).unwrap().rssi_dbm;
        // Construct extra paths whose phasor lies within ±π/2 of h0.
        for k in 0..50 {
            let extra_len = 10.0 + lambda * (k as f64 / 50.0 - 0.5) * 0.49;
            let p = PropagationPath { total_length: extra_len, ..base.clone() };
            let hp = path_coefficient(&p, lambda).unwrap();
            assert!((hp * h0.conj()).re > 0.0);
            let after = received_power(5.0, &[base.clone(), p], lambda).unwrap().rssi_dbm;
            assert!(after >= before);
        }
    }

    #[test]
    fn reciprocity_in_hallway() {
        let scene = build_l_hallway(&SceneConfig::default()).unwrap();
        let a = Vec3::new(9.0, -3.0, 2.0);
        let b = Vec3::new(-1.0, -5.0, 1.5);
        let lambda = scene.wavelength();
        let mut fwd: Vec<(Vec<usize>, f64, f64)> = trace_paths(&scene, a, b, 2)
            .unwrap()
            .iter()
            .map(|p| (p.surfaces_hit.clone(), p.total_length, path_coefficient(p, lambda).unwrap().norm()))
            .collect();
        let mut rev: Vec<(Vec<usize>, f64, f64)> = trace_paths(&scene, b, a, 2)
            .unwrap()
            .iter()
            .map(|p| {
                let mut s = p.surfaces_hit.clone();
                s.reverse();
                (s, p.total_length, path_coefficient(p, lambda).unwrap().norm())
            })
            .collect();
        assert!(!fwd.is_empty());
        fwd.sort_by(|x, y| x.0.cmp(&y.0));
        rev.sort_by(|x, y| x.0.cmp(&y.0));
        assert_eq!(fwd.len(), rev.len());
        for (f, r) in fwd.iter().zip(&rev) {
            assert_eq!(f.0, r.0);
            assert!((f.1 - r.1).abs() < 1e-12);
            assert!((f.2 - r.2).abs() < 1e-12 * f.2.max(1e-30) + 1e-18);
        }
    }

    #[test]
    fn hallway_paths_are_valid() {
        let scene = build_l_hallway(&SceneConfig::default()).unwrap();
        let rx = Vec3::new(0.0, -5.0, 1.5);
        let paths = trace_paths(&scene, scene.ap_position, rx, 2).unwrap();
        assert!(!paths.is_empty(), "hallway should deliver some wall paths");
        let mut seqs: Vec<&Vec<usize>> = paths.iter().map(|p| &p.surfaces_hit).collect();
        seqs.sort();
        seqs.dedup();
        assert_eq!(seqs.len(), paths.len());
        for p in &paths {
            assert_eq!(p.surfaces_hit.len(), p.vertices.len() - 2);
            let sum: f64 = p.vertices.windows(2).map(|w| w[0].distance(w[1])).sum();
            assert!((sum - p.total_length).abs() < 1e-12);
            for (k, &s) in p.surfaces_hit.iter().enumerate() {
                let surf = &scene.surfaces[s];
                let v = p.vertices[k + 1];
                assert!(surf.plane().signed_distance(v).abs() < 1e-9);
                assert!(surf.contains_projected(v, 1e-9));
            }
        }
        // Direct line of sight is blocked by the inner corner.
        assert!(paths.iter().all(|p| p.bounces() > 0));
    }

    #[test]
    fn heatmap_degenerate_and_occluded() {
        let scene = build_l_hallway(&SceneConfig::default()).unwrap();
        let rx = Vec3::new(-1.0, -5.0, 1.5);
        let step = 0.2;
        let grid = GridSpec { x0: rx.x - step / 2.0, x1: rx.x + step / 2.0, y0: rx.y - step / 2.0, y1: rx.y + step / 2.0, step, z: rx.z };
        let hm = rssi_heatmap(&scene, &grid, 2).unwrap();
        assert_eq!((hm.x_centers.len(), hm.y_centers.len()), (1, 1));
        assert!((hm.x_centers[0] - rx.x).abs() < 1e-12 && (hm.y_centers[0] - rx.y).abs() < 1e-12);
        assert_eq!(hm.rows[0][0], rssi_at(&scene, Vec3::new(hm.x_centers[0], hm.y_centers[0], rx.z), 2).unwrap().rssi_dbm);

        // Cell inside the obstacle.
        let inside = GridSpec { x0: 2.9, x1: 3.1, y0: -5.6, y1: -5.4, step: 0.2, z: 1.0 };
        let hm = rssi_heatmap(&scene, &inside, 2).unwrap();
        assert_eq!(hm.rows[0][0], RSSI_FLOOR_DBM);

        let outside = GridSpec { x0: 20.0, x1: 21.0, y0: 0.0, y1: 1.0, step: 0.5, z: 1.0 };
        assert!(rssi_heatmap(&scene, &outside, 2).is_err());
        let bad_step = GridSpec { step: 0.0, ..grid };
        assert!(rssi_heatmap(&scene, &bad_step, 2).is_err());
    }

    #[test]
    fn free_space_heatmap_matches_friis() {
        let mut s = open_scene();
        s.ap_position = Vec3::new(0.0, 0.0, 3.0);
        let grid = GridSpec { x0: -5.0, x1: 5.0, y0: -4.0, y1: 4.0, step: 0.5, z: 1.0 };
        let hm = rssi_heatmap(&s, &grid, 2).unwrap();
        let lambda = wavelength();
        for (j, y) in hm.y_centers.iter().enumerate() {
            for (i, x) in hm.x_centers.iter().enumerate() {
                let d = Vec3::new(*x, *y, 1.0).distance(s.ap_position);
                let friis = 5.0 + 20.0 * (lambda / (4.0 * PI * d)).log10();
                assert!((hm.rows[j][i] - friis).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn heatmap_exports() {
        let hm = Heatmap { x_centers: vec![0.5, 1.5], y_centers: vec![-1.0], rows: vec![vec![-80.123, -200.0]] };
        assert_eq!(hm.to_csv(), "y\\x,0.5000,1.5000\n-1.0000,-80.12,-200.00\n");
        let pgm = hm.to_pgm(-120.0, -60.0).unwrap();
        assert_eq!(&pgm[..11], b"P5\n2 1\n255\n");
        assert_eq!(&pgm[11..], &[169, 0]);
        assert!(hm.to_pgm(-60.0, -60.0).is_err());
    }

    fn tile_scene(diffraction: bool) -> Scene {
        // 0.1 m metal square in the z = 0 plane, centered at the origin.
        let mut s = open_scene();
        let h = 0.05;
        let poly = vec![Vec3::new(-h, -h, 0.0), Vec3::new(h, -h, 0.0), Vec3::new(h, h, 0.0), Vec3::new(-h, h, 0.0)];
        s.add_surface(poly, Material::METAL, SurfaceKind::Tile).unwrap();
        s.tile_edge_diffraction = diffraction;
        s
    }

    #[test]
    fn knife_edge_loss_shape() {
        assert_eq!(knife_edge_loss_db(-0.78), 0.0);
        assert_eq!(knife_edge_loss_db(-3.0), 0.0);
        // Grazing incidence costs about 6 dB.
        assert!((knife_edge_loss_db(0.0) - 6.03).abs() < 0.01);
        // Nearly continuous at the cut-off.
        assert!(knife_edge_loss_db(-0.78 + 1e-12) < 0.01);
        // Deep shadow approaches 6.9 + 20·log10(2v) dB.
        let v = 1e4;
        assert!((knife_edge_loss_db(v) - (6.9 + 20.0 * (2.0 * v).log10())).abs() < 1e-3);
        let mut prev = 0.0;
        for i in 0..200 {
            let l = knife_edge_loss_db(-0.7 + 0.05 * i as f64);
            assert!(l >= prev);
            prev = l;
        }
    }

    #[test]
    fn specular_hit_on_tile_has_no_edge_path() {
        let s = tile_scene(true);
        let paths = trace_paths(&s, Vec3::new(-1.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 1.0), 2).unwrap();
        assert_eq!(paths.iter().filter(|p| p.diffracted).count(), 0);
        assert_eq!(paths.iter().filter(|p| p.surfaces_hit == [0]).count(), 1);
    }

    #[test]
    fn missed_tile_routes_over_nearest_edge() {
        let s = tile_scene(true);
        // Specular point sits at x = 0.25, 0.2 m beyond the x = 0.05 edge.
        let tx = Vec3::new(-0.75, 0.0, 1.0);
        let rx = Vec3::new(1.25, 0.0, 1.0);
        let paths = trace_paths(&s, tx, rx, 2).unwrap();
        assert!(paths.iter().all(|p| p.surfaces_hit != [0] || p.diffracted));
        let d: Vec<_> = paths.iter().filter(|p| p.diffracted).collect();
        assert_eq!(d.len(), 1);
        let q = Vec3::new(0.05, 0.0, 0.0);
        assert!((d[0].vertices[1] - q).max_abs() < 1e-12);
        let (d1, d2) = (tx.distance(q), q.distance(rx));
        assert!((d[0].total_length - (d1 + d2)).abs() < 1e-12);
        let lambda = wavelength();
        let v = 0.2 * (2.0 * (d1 + d2) / (lambda * d1 * d2)).sqrt();
        let j = 6.9 + 20.0 * (((v - 0.1).powi(2) + 1.0).sqrt() + v - 0.1).log10();
        assert!((d[0].gamma_product.norm() - 10f64.powf(-j / 20.0)).abs() < 1e-12);
        // Far misses are weaker than near ones.
        let near = trace_paths(&s, Vec3::new(-0.85, 0.0, 1.0), Vec3::new(1.15, 0.0, 1.0), 2).unwrap();
        let g_near = near.iter().find(|p| p.diffracted).unwrap().gamma_product.norm();
        assert!(g_near > d[0].gamma_product.norm());
    }

    #[test]
    fn edge_paths_follow_the_scene_flag() {
        let tx = Vec3::new(-0.75, 0.0, 1.0);
        let rx = Vec3::new(1.25, 0.0, 1.0);
        let off = trace_paths(&tile_scene(false), tx, rx, 2).unwrap();
        assert!(off.iter().all(|p| !p.diffracted));
        assert_eq!(off.len(), 1);
        let on = trace_paths(&tile_scene(true), tx, rx, 2).unwrap();
        assert_eq!(on.len(), 2);
        // No bounces allowed, no edge paths either.
        assert!(trace_paths(&tile_scene(true), tx, rx, 0).unwrap().iter().all(|p| !p.diffracted));
        // Walls never diffract.
        let mut wall = open_scene();
        let h = 0.05;
        let poly = vec![Vec3::new(-h, -h, 0.0), Vec3::new(h, -h, 0.0), Vec3::new(h, h, 0.0), Vec3::new(-h, h, 0.0)];
        wall.add_surface(poly, Material::CONCRETE, SurfaceKind::Wall).unwrap();
        wall.tile_edge_diffraction = true;
        assert!(trace_paths(&wall, tx, rx, 2).unwrap().iter().all(|p| !p.diffracted));
    }
}
