//! Hexagonal tile array, tile-to-agent assignment and the focal-point to
//! servo-angle mapping.
//!
//! Angles live in the panel frame (`base_normal` = local z). A tile normal
//! is `(sinθ cosφ, sinθ sinφ, cosθ)`; θ is signed and φ is kept in
//! `(−π/2, π/2]` so a symmetric servo wedge covers tilts on both sides of
//! the panel's local x axis.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_6, PI};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{Aabb, Material, ReflectorMount, Surface, SurfaceKind};
use crate::vectormath::{angles_to_normal, bisector_normal, normal_to_angles, rotate_between, Frame, UnitVec3, Vec3};

pub const ANGLE_LIMIT: f64 = FRAC_PI_6;
/// Row-to-row cyclic left shift of group labels in the shifted pattern.
pub const DEFAULT_GROUP_SHIFT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleLimits {
    pub theta_min: f64,
    pub theta_max: f64,
    pub phi_min: f64,
    pub phi_max: f64,
}

impl AngleLimits {
    pub const SERVO: AngleLimits =
        AngleLimits { theta_min: -ANGLE_LIMIT, theta_max: ANGLE_LIMIT, phi_min: -ANGLE_LIMIT, phi_max: ANGLE_LIMIT };
    pub const UNCONSTRAINED: AngleLimits = AngleLimits { theta_min: -PI, theta_max: PI, phi_min: -PI, phi_max: PI };

    pub fn contains(&self, theta: f64, phi: f64) -> bool {
        theta >= self.theta_min && theta <= self.theta_max && phi >= self.phi_min && phi <= self.phi_max
    }

    fn validate(&self) -> Result<()> {
        if self.theta_min <= self.theta_max && self.phi_min <= self.phi_max {
            Ok(())
        } else {
            Err(Error::contract("angle limits must satisfy min <= max"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tile {
    pub row: usize,
    pub col: usize,
    pub position: Vec3,
    pub theta: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectorArray {
    pub rows: usize,
    pub cols: usize,
    pub pitch: f64,
    pub center: Vec3,
    /// Panel frame; `frame.z` is the base normal. Columns run along
    /// `frame.y`, rows along `frame.x`.
    pub frame: Frame,
    /// Row-major, `rows * cols` entries.
    pub tiles: Vec<Tile>,
}

/// Raw lattice offset `(u, v)` of tile `(row, col)` relative to tile (0, 0):
/// pointy-top packing, odd rows shifted by half a pitch.
pub fn hex_offset(row: usize, col: usize, pitch: f64) -> (f64, f64) {
    let odd = if row % 2 == 1 { 0.5 } else { 0.0 };
    ((col as f64 + odd) * pitch, row as f64 * pitch * 3f64.sqrt() / 2.0)
}

pub fn hex_layout(rows: usize, cols: usize, pitch: f64, center: Vec3, frame: Frame) -> Result<ReflectorArray> {
    if rows == 0 || cols == 0 {
        return Err(Error::contract("array needs at least one row and one column"));
    }
    if !(pitch > 0.0) || !pitch.is_finite() {
        return Err(Error::contract(format!("pitch must be positive, got {pitch}")));
    }
    let raw: Vec<(f64, f64)> =
        (0..rows).flat_map(|r| (0..cols).map(move |c| hex_offset(r, c, pitch))).collect();
    let n = raw.len() as f64;
    let mu = raw.iter().map(|o| o.0).sum::<f64>() / n;
    let mv = raw.iter().map(|o| o.1).sum::<f64>() / n;
    let tiles = raw
        .iter()
        .enumerate()
        .map(|(k, &(u, v))| Tile {
            row: k / cols,
            col: k % cols,
            position: center + frame.y.vec() * (u - mu) + frame.x.vec() * (v - mv),
            theta: 0.0,
            phi: 0.0,
        })
        .collect();
    Ok(ReflectorArray { rows, cols, pitch, center, frame, tiles })
}

impl ReflectorArray {
    pub fn from_mount(m: &ReflectorMount) -> Result<Self> {
        hex_layout(m.rows, m.cols, m.pitch, m.center, m.frame)
    }

    pub fn base_normal(&self) -> UnitVec3 {
        self.frame.z
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn tile_normal(&self, idx: usize) -> UnitVec3 {
        let t = &self.tiles[idx];
        let local = angles_to_normal(t.theta, t.phi).vec();
        UnitVec3::try_new(self.frame.to_world(local)).expect("rotation preserves unit length")
    }

    /// Every tile flat (θ = φ = 0).
    pub fn flatten(&mut self) {
        for t in &mut self.tiles {
            t.theta = 0.0;
            t.phi = 0.0;
        }
    }

    /// Independent uniform draws within `limits`.
    pub fn randomize<R: Rng + ?Sized>(&mut self, rng: &mut R, limits: &AngleLimits) {
        for t in &mut self.tiles {
            t.theta = rng.random_range(limits.theta_min..=limits.theta_max);
            t.phi = rng.random_range(limits.phi_min..=limits.phi_max);
        }
    }

    /// Hexagonal PEC facets (circumradius `pitch/√3`) at the current angles.
    pub fn tile_surfaces(&self, frequency_hz: f64) -> Result<Vec<Surface>> {
        let r = self.pitch / 3f64.sqrt();
        let base = self.base_normal();
        let corners: Vec<Vec3> = (0..6)
            .map(|k| {
                // Counter-clockwise about the base normal, points along rows.
                let a = k as f64 * PI / 3.0;
                self.frame.x.vec() * (r * a.cos()) + self.frame.y.vec() * (r * a.sin())
            })
            .collect();
        (0..self.tiles.len())
            .map(|i| {
                let n = self.tile_normal(i);
                let pos = self.tiles[i].position;
                let poly = corners.iter().map(|&c| pos + rotate_between(base, n, c)).collect();
                Surface::new(poly, Material::METAL, SurfaceKind::Tile, frequency_hz)
            })
            .collect()
    }

    pub fn dump(&self) -> ArrayDump {
        ArrayDump {
            rows: self.rows,
            cols: self.cols,
            tiles: self.tiles.iter().map(|t| TileAngles { row: t.row, col: t.col, theta: t.theta, phi: t.phi }).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.dump()).expect("array dump serializes")
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_json()).map_err(|e| Error::io(path.as_ref(), e))
    }

    /// Restores angles from a dump of an array with the same shape.
    pub fn load_dump(&mut self, dump: &ArrayDump) -> Result<()> {
        if dump.rows != self.rows || dump.cols != self.cols || dump.tiles.len() != self.tiles.len() {
            return Err(Error::Dimension { expected: self.tiles.len(), got: dump.tiles.len() });
        }
        for t in &dump.tiles {
            if t.row >= self.rows || t.col >= self.cols {
                return Err(Error::contract(format!("tile ({}, {}) outside the array", t.row, t.col)));
            }
            let i = self.index(t.row, t.col);
            self.tiles[i].theta = t.theta;
            self.tiles[i].phi = t.phi;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileAngles {
    pub row: usize,
    pub col: usize,
    pub theta: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayDump {
    pub rows: usize,
    pub cols: usize,
    pub tiles: Vec<TileAngles>,
}

/// Tile-to-agent map; agent ids are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub rows: usize,
    pub cols: usize,
    pub n_agents: usize,
    map: Vec<usize>,
}

impl Assignment {
    pub fn agent(&self, row: usize, col: usize) -> usize {
        self.map[row * self.cols + col]
    }

    pub fn agent_of_index(&self, idx: usize) -> usize {
        self.map[idx]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn tiles_of(&self, agent: usize) -> Vec<usize> {
        (0..self.map.len()).filter(|&i| self.map[i] == agent).collect()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_agents];
        for &a in &self.map {
            c[a - 1] += 1;
        }
        c
    }
}

fn check_agents(cols: usize, l: usize) -> Result<()> {
    if l == 0 {
        return Err(Error::contract("at least one agent is required"));
    }
    if l > cols {
        return Err(Error::contract(format!("{l} agents exceed {cols} columns")));
    }
    Ok(())
}

/// Column `c` (1-based) goes to agent `((c − 1) mod L) + 1`.
pub fn assign_columns(rows: usize, cols: usize, l: usize) -> Result<Assignment> {
    assign_shifted(rows, cols, l, 0)
}

/// Row 0 holds groups `1..=cols`; each following row is the previous row's
/// group sequence cyclically left-shifted by `shift`. Groups fold onto
/// agents with the column rule.
pub fn assign_shifted(rows: usize, cols: usize, l: usize, shift: usize) -> Result<Assignment> {
    check_agents(cols, l)?;
    let map = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (c + r * shift) % cols % l + 1))
        .collect();
    Ok(Assignment { rows, cols, n_agents: l, map })
}

/// Raw group label (1-based) before folding onto agents.
pub fn shifted_group(row: usize, col: usize, cols: usize, shift: usize) -> usize {
    (col + row * shift) % cols + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    Columns,
    Shifted,
}

pub fn assign(grouping: Grouping, rows: usize, cols: usize, l: usize) -> Result<Assignment> {
    match grouping {
        Grouping::Columns => assign_columns(rows, cols, l),
        Grouping::Shifted => assign_shifted(rows, cols, l, DEFAULT_GROUP_SHIFT),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    PerTile,
    ColumnAzimuth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FocalConstraints {
    /// One box per agent, index `l − 1`.
    pub boxes: Vec<Aabb>,
    pub delta_max: f64,
    pub limits: AngleLimits,
}

/// Horizontal inflation of the user region for the default focal box.
pub const FOCAL_BOX_MARGIN_M: f64 = 2.0;
pub const FOCAL_BOX_Z: (f64, f64) = (0.5, 2.5);

impl FocalConstraints {
    pub fn new(boxes: Vec<Aabb>, delta_max: f64, limits: AngleLimits) -> Result<Self> {
        if boxes.is_empty() {
            return Err(Error::contract("need one focal box per agent"));
        }
        if !(delta_max > 0.0) {
            return Err(Error::contract("delta_max must be positive"));
        }
        limits.validate()?;
        Ok(FocalConstraints { boxes, delta_max, limits })
    }

    /// Every agent gets the user region inflated horizontally, with a fixed
    /// height band.
    pub fn around_region(region: &Aabb, n_agents: usize, delta_max: f64, limits: AngleLimits) -> Result<Self> {
        let m = FOCAL_BOX_MARGIN_M;
        let b = Aabb::new(
            Vec3::new(region.min.x - m, region.min.y - m, FOCAL_BOX_Z.0),
            Vec3::new(region.max.x + m, region.max.y + m, FOCAL_BOX_Z.1),
        )?;
        Self::new(vec![b; n_agents], delta_max, limits)
    }

    pub fn focal_box(&self, agent: usize) -> Result<&Aabb> {
        if agent == 0 || agent > self.boxes.len() {
            return Err(Error::InvalidAgent(agent));
        }
        Ok(&self.boxes[agent - 1])
    }
}

pub fn clamp_focal(f: Vec3, b: &Aabb) -> Vec3 {
    b.clamp(f)
}

/// Folds a literal `(θ, φ)` pair into signed-θ form with `φ ∈ (−π/2, π/2]`.
pub fn fold_angles(theta: f64, phi: f64) -> (f64, f64) {
    if phi > FRAC_PI_2 {
        (-theta, phi - PI)
    } else if phi <= -FRAC_PI_2 {
        (-theta, phi + PI)
    } else {
        (theta, phi)
    }
}

/// Unclamped panel-frame angles that specularly send the AP ray from `tile`
/// through `focal`.
pub fn target_angles(frame: &Frame, tile: Vec3, focal: Vec3, ap: Vec3) -> Result<(f64, f64)> {
    let n = bisector_normal(tile, focal, ap)?;
    let local = UnitVec3::try_new(frame.to_local(n.vec()))?;
    let (theta, phi) = normal_to_angles(local)?;
    Ok(fold_angles(theta, phi))
}

/// Orients every tile toward its agent's focal point. Focals are clamped
/// into their boxes first; angles are clamped to the servo limits.
pub fn apply_focal_points(
    array: &mut ReflectorArray,
    focals: &[Vec3],
    assignment: &Assignment,
    ap: Vec3,
    constraints: &FocalConstraints,
    mode: ControlMode,
) -> Result<()> {
    if focals.len() != assignment.n_agents {
        return Err(Error::Dimension { expected: assignment.n_agents, got: focals.len() });
    }
    if constraints.boxes.len() != assignment.n_agents {
        return Err(Error::Dimension { expected: assignment.n_agents, got: constraints.boxes.len() });
    }
    if assignment.rows != array.rows || assignment.cols != array.cols {
        return Err(Error::Dimension { expected: array.len(), got: assignment.rows * assignment.cols });
    }
    let clamped: Vec<Vec3> = focals.iter().zip(&constraints.boxes).map(|(f, b)| clamp_focal(*f, b)).collect();
    let targets = array
        .tiles
        .iter()
        .enumerate()
        .map(|(i, t)| target_angles(&array.frame, t.position, clamped[assignment.agent_of_index(i) - 1], ap))
        .collect::<Result<Vec<_>>>()?;
    let lim = constraints.limits;
    let column_phi: Option<Vec<f64>> = match mode {
        ControlMode::PerTile => None,
        ControlMode::ColumnAzimuth => Some(
            (0..array.cols)
                .map(|c| {
                    let sum: f64 = (0..array.rows).map(|r| targets[array.index(r, c)].1).sum();
                    sum / array.rows as f64
                })
                .collect(),
        ),
    };
    for (i, t) in array.tiles.iter_mut().enumerate() {
        let (theta, phi) = targets[i];
        let phi = column_phi.as_ref().map_or(phi, |cp| cp[t.col]);
        t.theta = theta.clamp(lim.theta_min, lim.theta_max);
        t.phi = phi.clamp(lim.phi_min, lim.phi_max);
    }
    Ok(())
}

/// Ratio of the joint per-tile action dimension to the per-agent focal
/// dimension: `2·N_r·N_c / (3·L)`.
pub fn complexity_reduction(rows: usize, cols: usize, l: usize) -> Result<f64> {
    if rows == 0 || cols == 0 || l == 0 {
        return Err(Error::contract("rows, cols and agents must be positive"));
    }
    Ok((2 * rows * cols) as f64 / (3 * l) as f64)
}
