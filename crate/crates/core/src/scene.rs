//! Scene description: planar convex facets with ITU-R P.2040 materials, the
//! access point, the user region, and the reflector mounting. Also builds
//! the canonical L-shaped hallway.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectormath::{Frame, Plane, UnitVec3, Vec3};

/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.8541878128e-12;
/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// ITU-R P.2040 power-law material: `η'(f) = a·f^b`, `σ(f) = c·f^d` with `f`
/// in GHz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub name: &'static str,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// Metallic tiles are treated as perfect electric conductors.
    pub perfect_conductor: bool,
}

impl Material {
    pub const CONCRETE: Material = Material::itu("concrete", 5.24, 0.0, 0.0462, 0.7822);
    pub const PLASTERBOARD: Material = Material::itu("plasterboard", 2.73, 0.0, 0.0085, 0.9395);
    pub const CEILING_BOARD: Material = Material::itu("ceiling_board", 1.50, 0.0, 0.0005, 1.1634);
    pub const WOOD: Material = Material::itu("wood", 1.99, 0.0, 0.0047, 1.0718);
    pub const METAL: Material = Material {
        name: "metal",
        a: 1.0,
        b: 0.0,
        c: 1e7,
        d: 0.0,
        perfect_conductor: true,
    };

    pub const fn itu(name: &'static str, a: f64, b: f64, c: f64, d: f64) -> Material {
        Material { name, a, b, c, d, perfect_conductor: false }
    }
}

/// Relative permittivity and conductivity (S/m) of `m` at `f_ghz`.
pub fn material_properties(m: &Material, f_ghz: f64) -> Result<(f64, f64)> {
    if !(f_ghz > 0.0) {
        return Err(Error::contract(format!("frequency must be positive, got {f_ghz} GHz")));
    }
    Ok((m.a * f_ghz.powf(m.b), m.c * f_ghz.powf(m.d)))
}

/// `η = η' − j·σ/(2π f ε₀)`.
pub fn complex_permittivity(eta_prime: f64, sigma: f64, f_hz: f64) -> Result<Complex64> {
    if !(f_hz > 0.0) {
        return Err(Error::contract(format!("frequency must be positive, got {f_hz} Hz")));
    }
    Ok(Complex64::new(eta_prime, -sigma / (2.0 * PI * f_hz * EPSILON_0)))
}

/// How a surface reflects an incident plane wave.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reflectivity {
    PerfectConductor,
    Dielectric(Complex64),
}

impl Reflectivity {
    pub fn for_material(m: &Material, f_hz: f64) -> Result<Self> {
        if m.perfect_conductor {
            return Ok(Reflectivity::PerfectConductor);
        }
        let (eta_prime, sigma) = material_properties(m, f_hz / 1e9)?;
        Ok(Reflectivity::Dielectric(complex_permittivity(eta_prime, sigma, f_hz)?))
    }

    pub fn coefficient(&self, cos_theta_i: f64) -> Result<Complex64> {
        match *self {
            Reflectivity::PerfectConductor => {
                check_incidence(cos_theta_i)?;
                Ok(Complex64::new(-1.0, 0.0))
            }
            Reflectivity::Dielectric(eta) => fresnel_reflection(eta, cos_theta_i),
        }
    }
}

fn check_incidence(cos_theta_i: f64) -> Result<()> {
    if !(cos_theta_i > 0.0 && cos_theta_i <= 1.0 + 1e-12) {
        return Err(Error::contract(format!("cos(theta_i) must be in (0, 1], got {cos_theta_i}")));
    }
    Ok(())
}

/// Perpendicular-polarization Fresnel reflection coefficient.
pub fn fresnel_reflection(eta: Complex64, cos_theta_i: f64) -> Result<Complex64> {
    check_incidence(cos_theta_i)?;
    let c = cos_theta_i.min(1.0);
    let sin2 = 1.0 - c * c;
    let root = (eta - sin2).sqrt();
    Ok((c - root) / (c + root))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceKind {
    Wall,
    Floor,
    Ceiling,
    Obstacle,
    Tile,
}

/// Planar convex polygon with a material. Plane data and a 2D projection
/// are cached for the tracer.
#[derive(Debug, Clone)]
pub struct Surface {
    polygon: Vec<Vec3>,
    pub material: Material,
    pub kind: SurfaceKind,
    pub reflectivity: Reflectivity,
    plane: Plane,
    u: Vec3,
    v: Vec3,
    poly2d: Vec<(f64, f64)>,
    /// Outward edge normals (2D, unit) and offsets: inside iff n·p ≤ off.
    edges: Vec<(f64, f64, f64)>,
    lo: Vec3,
    hi: Vec3,
}

/// Planarity tolerance for polygon vertices, meters.
pub const PLANAR_TOLERANCE: f64 = 1e-9;

impl Surface {
    pub fn new(polygon: Vec<Vec3>, material: Material, kind: SurfaceKind, frequency_hz: f64) -> Result<Self> {
        if polygon.len() < 3 {
            return Err(Error::config("surface needs at least 3 vertices"));
        }
        if polygon.iter().any(|p| !p.is_finite()) {
            return Err(Error::config("surface vertex is not finite"));
        }
        // Newell normal.
        let mut nsum = Vec3::ZERO;
        for (i, a) in polygon.iter().enumerate() {
            let b = polygon[(i + 1) % polygon.len()];
            nsum += a.cross(b);
        }
        let area = 0.5 * nsum.norm();
        if !(area > 1e-12) {
            return Err(Error::config("surface has zero area"));
        }
        let normal = nsum.normalized()?;
        let centroid = polygon.iter().fold(Vec3::ZERO, |acc, p| acc + *p) / polygon.len() as f64;
        let plane = Plane::new(centroid, normal);
        for p in &polygon {
            if plane.signed_distance(*p).abs() > PLANAR_TOLERANCE {
                return Err(Error::config(format!(
                    "surface is not planar (offset {:e} m)",
                    plane.signed_distance(*p)
                )));
            }
        }
        let u = (polygon[1] - polygon[0]).normalized()?.vec();
        let v = normal.vec().cross(u);
        let poly2d: Vec<(f64, f64)> = polygon
            .iter()
            .map(|p| {
                let d = *p - centroid;
                (d.dot(u), d.dot(v))
            })
            .collect();
        // Newell orientation makes the 2D polygon counter-clockwise.
        let mut edges = Vec::with_capacity(poly2d.len());
        for i in 0..poly2d.len() {
            let (x0, y0) = poly2d[i];
            let (x1, y1) = poly2d[(i + 1) % poly2d.len()];
            let (ex, ey) = (x1 - x0, y1 - y0);
            let len = (ex * ex + ey * ey).sqrt();
            if len < 1e-12 {
                return Err(Error::config("surface has repeated vertices"));
            }
            let (nx, ny) = (ey / len, -ex / len);
            edges.push((nx, ny, nx * x0 + ny * y0));
        }
        for &(nx, ny, off) in &edges {
            for &(x, y) in &poly2d {
                if nx * x + ny * y - off > 1e-9 {
                    return Err(Error::config("surface polygon is not convex"));
                }
            }
        }
        let lo = polygon.iter().fold(polygon[0], |acc, p| acc.component_min(*p));
        let hi = polygon.iter().fold(polygon[0], |acc, p| acc.component_max(*p));
        let reflectivity = Reflectivity::for_material(&material, frequency_hz)?;
        Ok(Surface { polygon, material, kind, reflectivity, plane, u, v, poly2d, edges, lo, hi })
    }

    pub fn polygon(&self) -> &[Vec3] {
        &self.polygon
    }

    pub fn plane(&self) -> &Plane {
        &self.plane
    }

    pub fn normal(&self) -> UnitVec3 {
        self.plane.normal
    }

    pub fn centroid(&self) -> Vec3 {
        self.plane.point
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        (self.lo, self.hi)
    }

    pub fn area(&self) -> f64 {
        let n = self.poly2d.len();
        let mut s = 0.0;
        for i in 0..n {
            let (x0, y0) = self.poly2d[i];
            let (x1, y1) = self.poly2d[(i + 1) % n];
            s += x0 * y1 - x1 * y0;
        }
        0.5 * s.abs()
    }

    /// Signed distance from `p` to the polygon boundary measured in the
    /// plane: positive outside, negative inside. `p` is projected.
    pub fn edge_margin(&self, p: Vec3) -> f64 {
        let d = p - self.plane.point;
        let (x, y) = (d.dot(self.u), d.dot(self.v));
        self.edges
            .iter()
            .map(|&(nx, ny, off)| nx * x + ny * y - off)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Point of the polygon boundary nearest to the in-plane projection of `p`.
    pub fn closest_boundary_point(&self, p: Vec3) -> Vec3 {
        let d = p - self.plane.point;
        let (x, y) = (d.dot(self.u), d.dot(self.v));
        let n = self.poly2d.len();
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..n {
            let (x0, y0) = self.poly2d[i];
            let (x1, y1) = self.poly2d[(i + 1) % n];
            let (ex, ey) = (x1 - x0, y1 - y0);
            let t = (((x - x0) * ex + (y - y0) * ey) / (ex * ex + ey * ey)).clamp(0.0, 1.0);
            let (cx, cy) = (x0 + t * ex, y0 + t * ey);
            let dist2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            if dist2 < best.0 {
                best = (dist2, cx, cy);
            }
        }
        self.plane.point + self.u * best.1 + self.v * best.2
    }

    /// Whether the projection of `p` lies inside the polygon, counting
    /// points within `tol` of an edge as inside.
    pub fn contains_projected(&self, p: Vec3, tol: f64) -> bool {
        self.edge_margin(p) <= tol
    }

    pub fn max_planarity_error(&self) -> f64 {
        self.polygon.iter().map(|p| self.plane.signed_distance(*p).abs()).fold(0.0, f64::max)
    }

    pub fn is_convex(&self) -> bool {
        self.edges
            .iter()
            .all(|&(nx, ny, off)| self.poly2d.iter().all(|&(x, y)| nx * x + ny * y - off <= 1e-9))
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self> {
        if !(min.x <= max.x && min.y <= max.y && min.z <= max.z) {
            return Err(Error::config(format!("box min {min:?} exceeds max {max:?}")));
        }
        Ok(Aabb { min, max })
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn clamp(&self, p: Vec3) -> Vec3 {
        p.component_max(self.min).component_min(self.max)
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn half_extent(&self) -> Vec3 {
        (self.max - self.min) * 0.5
    }

    pub fn inflate(&self, by: Vec3) -> Aabb {
        Aabb { min: self.min - by, max: self.max + by }
    }
}

/// Where and how the reflector panel is mounted. The tile orientation
/// angles are measured in `frame` (its `z` axis is the panel normal).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectorMount {
    pub center: Vec3,
    pub frame: Frame,
    pub rows: usize,
    pub cols: usize,
    pub pitch: f64,
}

impl ReflectorMount {
    pub fn base_normal(&self) -> UnitVec3 {
        self.frame.z
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub surfaces: Vec<Surface>,
    pub ap_position: Vec3,
    pub ap_power_dbm: f64,
    pub frequency_hz: f64,
    /// User sampling region; `min.z == max.z` is the antenna height.
    pub user_region: Aabb,
    pub users: Vec<Vec3>,
    /// Volume used for heatmap bounds and observation normalization.
    pub bounds: Aabb,
    pub reflector: Option<ReflectorMount>,
    /// Adds knife-edge diffracted single-bounce paths for tiles whose
    /// specular point falls outside the tile.
    pub tile_edge_diffraction: bool,
}

impl Scene {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency_hz
    }

    /// Scene without any surfaces (free space).
    pub fn free_space(ap_position: Vec3, ap_power_dbm: f64, frequency_hz: f64, bounds: Aabb) -> Result<Scene> {
        if !(frequency_hz > 0.0) {
            return Err(Error::config("frequency must be positive"));
        }
        Ok(Scene {
            surfaces: Vec::new(),
            ap_position,
            ap_power_dbm,
            frequency_hz,
            user_region: bounds,
            users: Vec::new(),
            bounds,
            reflector: None,
            tile_edge_diffraction: false,
        })
    }

    /// Copy of the scene with every tile surface removed.
    pub fn without_tiles(&self) -> Scene {
        let mut s = self.clone();
        s.surfaces.retain(|f| f.kind != SurfaceKind::Tile);
        s
    }

    /// Copy of the scene with tile surfaces replaced by `tiles`.
    pub fn with_tiles(&self, tiles: Vec<Surface>) -> Scene {
        let mut s = self.without_tiles();
        s.surfaces.extend(tiles);
        s
    }

    pub fn add_surface(&mut self, polygon: Vec<Vec3>, material: Material, kind: SurfaceKind) -> Result<()> {
        let s = Surface::new(polygon, material, kind, self.frequency_hz)?;
        self.surfaces.push(s);
        Ok(())
    }
}

/// Hallway build parameters. Every key is optional in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub hall_width_m: f64,
    pub ceiling_m: f64,
    pub ue_height_m: f64,
    pub frequency_ghz: f64,
    pub tx_power_dbm: f64,
    pub reflector_rows: usize,
    pub reflector_cols: usize,
    pub reflector_pitch_m: f64,
    pub reflector_height_m: f64,
    /// Downward pitch of the panel away from the AP/UE bisector, degrees.
    pub reflector_tilt_deg: f64,
    pub obstacle_semi_x_m: f64,
    pub obstacle_semi_y_m: f64,
    pub obstacle_facets: usize,
    pub tile_edge_diffraction: bool,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            hall_width_m: 3.0,
            ceiling_m: 3.0,
            ue_height_m: 1.5,
            frequency_ghz: 60.0,
            tx_power_dbm: 5.0,
            reflector_rows: 7,
            reflector_cols: 9,
            reflector_pitch_m: 0.10,
            reflector_height_m: 2.3,
            reflector_tilt_deg: 8.0,
            obstacle_semi_x_m: 0.6,
            obstacle_semi_y_m: 0.4,
            obstacle_facets: 16,
            tile_edge_diffraction: true,
        }
    }
}

impl SceneConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::from_toml_str(&text)
    }
}

/// Fixed anchors of the hallway layout (x, y in meters).
pub const AP_XY: (f64, f64) = (9.5, -1.5);
pub const AP_HEIGHT_M: f64 = 2.5;
pub const OBSTACLE_XY: (f64, f64) = (3.0, -5.5);
pub const OBSTACLE_HEIGHT_M: f64 = 1.8;
pub const REFLECTOR_XY: (f64, f64) = (11.2, -5.7);
pub const UE_REGION_MIN_XY: (f64, f64) = (-6.0, -6.2);
pub const UE_REGION_MAX_XY: (f64, f64) = (2.0, -4.25);
/// Outer corner of the L: the horizontal leg's far wall and the vertical
/// leg's outer wall meet here.
const OUTER_X: f64 = 11.5;
const OUTER_Y: f64 = -7.0;
const END_TO_END_M: f64 = 20.0;
const VERTICAL_LEG_M: f64 = 15.0;

fn rect(corners: [Vec3; 4]) -> Vec<Vec3> {
    corners.to_vec()
}

/// The L-shaped hallway: a horizontal leg along x (users, obstacle,
/// reflector) and a vertical leg along y (access point), both ends open.
pub fn build_l_hallway(cfg: &SceneConfig) -> Result<Scene> {
    let positive = [
        ("hall_width_m", cfg.hall_width_m),
        ("ceiling_m", cfg.ceiling_m),
        ("ue_height_m", cfg.ue_height_m),
        ("frequency_ghz", cfg.frequency_ghz),
        ("reflector_pitch_m", cfg.reflector_pitch_m),
        ("reflector_height_m", cfg.reflector_height_m),
        ("obstacle_semi_x_m", cfg.obstacle_semi_x_m),
        ("obstacle_semi_y_m", cfg.obstacle_semi_y_m),
    ];
    for (name, v) in positive {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::config(format!("{name} must be positive, got {v}")));
        }
    }
    if cfg.reflector_rows == 0 || cfg.reflector_cols == 0 {
        return Err(Error::config("reflector rows/cols must be at least 1"));
    }
    if cfg.obstacle_facets < 3 {
        return Err(Error::config("obstacle needs at least 3 facets"));
    }
    let w = cfg.hall_width_m;
    let h = cfg.ceiling_m;
    let x_min = OUTER_X - END_TO_END_M;
    let inner_x = OUTER_X - w;
    let inner_y = OUTER_Y + w;
    let y_max = OUTER_Y + VERTICAL_LEG_M;

    // L-topology checks: AP in the vertical leg, users/obstacle/reflector in
    // the horizontal leg, everything below the ceiling.
    let topo = |ok: bool, what: &str| if ok { Ok(()) } else { Err(Error::config(format!("config inconsistent with L-topology: {what}"))) };
    topo(w < VERTICAL_LEG_M && w < END_TO_END_M, "hall wider than the legs")?;
    topo(AP_XY.0 > inner_x && AP_XY.0 < OUTER_X && AP_XY.1 > inner_y && AP_XY.1 < y_max, "access point outside the vertical leg")?;
    topo(UE_REGION_MAX_XY.1 < inner_y && UE_REGION_MIN_XY.1 > OUTER_Y, "user region outside the horizontal leg")?;
    topo(REFLECTOR_XY.1 < inner_y && REFLECTOR_XY.0 < OUTER_X, "reflector outside the horizontal leg")?;
    topo(OBSTACLE_XY.1 - cfg.obstacle_semi_y_m > OUTER_Y && OBSTACLE_XY.1 + cfg.obstacle_semi_y_m < inner_y, "obstacle does not fit the hallway")?;
    topo(AP_HEIGHT_M < h && cfg.ue_height_m < h && OBSTACLE_HEIGHT_M < h, "ceiling too low")?;
    let half_panel = 0.5 * cfg.reflector_pitch_m * (cfg.reflector_rows.max(cfg.reflector_cols) as f64 + 1.0);
    topo(cfg.reflector_height_m - half_panel > 0.0 && cfg.reflector_height_m + half_panel < h, "reflector panel does not fit vertically")?;

    let f_hz = cfg.frequency_ghz * 1e9;
    let bounds = Aabb::new(Vec3::new(x_min, OUTER_Y, 0.0), Vec3::new(OUTER_X, y_max, h))?;
    let user_region = Aabb::new(
        Vec3::new(UE_REGION_MIN_XY.0, UE_REGION_MIN_XY.1, cfg.ue_height_m),
        Vec3::new(UE_REGION_MAX_XY.0, UE_REGION_MAX_XY.1, cfg.ue_height_m),
    )?;
    let ap = Vec3::new(AP_XY.0, AP_XY.1, AP_HEIGHT_M);
    let mut scene = Scene::free_space(ap, cfg.tx_power_dbm, f_hz, bounds)?;
    scene.tile_edge_diffraction = cfg.tile_edge_diffraction;
    scene.user_region = user_region;

    let v = |x: f64, y: f64, z: f64| Vec3::new(x, y, z);
    let walls = [
        // Outer wall of the vertical leg (includes the horizontal leg's end).
        rect([v(OUTER_X, OUTER_Y, 0.0), v(OUTER_X, y_max, 0.0), v(OUTER_X, y_max, h), v(OUTER_X, OUTER_Y, h)]),
        // Outer wall of the horizontal leg.
        rect([v(x_min, OUTER_Y, 0.0), v(OUTER_X, OUTER_Y, 0.0), v(OUTER_X, OUTER_Y, h), v(x_min, OUTER_Y, h)]),
        // Inner corner walls.
        rect([v(inner_x, inner_y, 0.0), v(inner_x, y_max, 0.0), v(inner_x, y_max, h), v(inner_x, inner_y, h)]),
        rect([v(x_min, inner_y, 0.0), v(inner_x, inner_y, 0.0), v(inner_x, inner_y, h), v(x_min, inner_y, h)]),
    ];
    for w in walls {
        scene.add_surface(w, Material::PLASTERBOARD, SurfaceKind::Wall)?;
    }
    // Floor and ceiling split into the two convex legs.
    let legs = [(x_min, OUTER_X, OUTER_Y, inner_y), (inner_x, OUTER_X, inner_y, y_max)];
    for (x0, x1, y0, y1) in legs {
        scene.add_surface(rect([v(x0, y0, 0.0), v(x1, y0, 0.0), v(x1, y1, 0.0), v(x0, y1, 0.0)]), Material::CONCRETE, SurfaceKind::Floor)?;
        scene.add_surface(rect([v(x0, y0, h), v(x1, y0, h), v(x1, y1, h), v(x0, y1, h)]), Material::CEILING_BOARD, SurfaceKind::Ceiling)?;
    }
    // Elliptical obstacle as a faceted prism with a top cap.
    let n = cfg.obstacle_facets;
    let ring: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / n as f64;
            (OBSTACLE_XY.0 + cfg.obstacle_semi_x_m * a.cos(), OBSTACLE_XY.1 + cfg.obstacle_semi_y_m * a.sin())
        })
        .collect();
    for k in 0..n {
        let (xa, ya) = ring[k];
        let (xb, yb) = ring[(k + 1) % n];
        scene.add_surface(
            rect([v(xa, ya, 0.0), v(xb, yb, 0.0), v(xb, yb, OBSTACLE_HEIGHT_M), v(xa, ya, OBSTACLE_HEIGHT_M)]),
            Material::WOOD,
            SurfaceKind::Obstacle,
        )?;
    }
    scene.add_surface(ring.iter().map(|&(x, y)| v(x, y, OBSTACLE_HEIGHT_M)).collect(), Material::WOOD, SurfaceKind::Obstacle)?;

    scene.reflector = Some(reflector_mount(cfg, ap, user_region)?);
    Ok(scene)
}

/// Panel normal: bisector of the directions to the AP and to the user-region
/// center, pitched down by `reflector_tilt_deg`. The angle frame's `x` axis
/// points "up" along the panel so positive elevation tilts tiles upward.
fn reflector_mount(cfg: &SceneConfig, ap: Vec3, user_region: Aabb) -> Result<ReflectorMount> {
    let center = Vec3::new(REFLECTOR_XY.0, REFLECTOR_XY.1, cfg.reflector_height_m);
    let to_ap = (ap - center).normalized()?.vec();
    let to_users = (user_region.center() - center).normalized()?.vec();
    let bisector = (to_ap + to_users).normalized()?;
    let horizontal = Vec3::new(0.0, 0.0, 1.0).cross(bisector.vec()).normalized()?;
    // Rotate about the horizontal in-panel axis; positive tilt points down.
    let tilt = cfg.reflector_tilt_deg.to_radians();
    let up = bisector.vec().cross(horizontal.vec()).normalized()?.vec();
    let normal = (bisector.vec() * tilt.cos() - up * tilt.sin()).normalized()?;
    let frame = Frame::from_z_and_x_hint(normal, Vec3::new(0.0, 0.0, 1.0))?;
    Ok(ReflectorMount {
        center,
        frame,
        rows: cfg.reflector_rows,
        cols: cfg.reflector_cols,
        pitch: cfg.reflector_pitch_m,
    })
}
