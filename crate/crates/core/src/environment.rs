//! The multi-agent focal-point MDP: state, observations, transition,
//! reward variants, mobility and position noise.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raytracer::{rssi_at, DEFAULT_MAX_BOUNCES};
use crate::reflector::{
    apply_focal_points, assign, AngleLimits, Assignment, ControlMode, FocalConstraints, Grouping, ReflectorArray,
};
use crate::scene::{Aabb, Scene};
use crate::vectormath::Vec3;

/// Independent random streams derived from one experiment seed.
pub mod streams {
    pub const USERS: u64 = 1;
    pub const TILES: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const POLICY: u64 = 4;
    pub const SHUFFLE: u64 = 5;
    pub const EXPLORE: u64 = 6;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RewardMode {
    Mean,
    /// Each user's linear power is scaled by `d^n` before averaging in dB.
    DistNorm { n: u32 },
}

/// How the reflector participates in an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReflectorMode {
    /// Tiles follow the agents' focal points.
    Controlled,
    /// All tiles at θ = φ = 0; actions move focals but not tiles.
    Flat,
    /// No reflector in the scene.
    Absent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub n_users: usize,
    pub n_agents: usize,
    pub episode_length: usize,
    /// Per-axis focal displacement bound per step, meters.
    pub delta_max_m: f64,
    pub control: ControlMode,
    pub grouping: Grouping,
    pub reflector: ReflectorMode,
    pub reward: RewardMode,
    /// Gaussian std added to observed user coordinates, meters.
    pub position_noise_m: f64,
    /// Users resample every this many steps; 0 disables mobility.
    pub mobility_every: usize,
    pub max_bounces: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            n_users: 3,
            n_agents: 3,
            episode_length: 20,
            delta_max_m: 0.5,
            control: ControlMode::PerTile,
            grouping: Grouping::Columns,
            reflector: ReflectorMode::Controlled,
            reward: RewardMode::Mean,
            position_noise_m: 0.0,
            mobility_every: 0,
            max_bounces: DEFAULT_MAX_BOUNCES,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.n_agents == 0 {
            return Err(Error::config("need at least one user and one agent"));
        }
        if self.episode_length == 0 {
            return Err(Error::config("episode_length must be positive"));
        }
        if !(self.delta_max_m > 0.0) {
            return Err(Error::config("delta_max_m must be positive"));
        }
        if !(self.position_noise_m >= 0.0) {
            return Err(Error::config("position_noise_m must be non-negative"));
        }
        if let RewardMode::DistNorm { n } = self.reward {
            if !(2..=4).contains(&n) {
                return Err(Error::config(format!("distance exponent must be in 2..=4, got {n}")));
            }
        }
        if self.max_bounces > crate::raytracer::MAX_BOUNCES {
            return Err(Error::config("max_bounces too large"));
        }
        Ok(())
    }

    /// User served by agent `l` (1-based ids on both sides).
    pub fn user_of(&self, agent: usize) -> usize {
        (agent - 1) % self.n_users + 1
    }

    /// Critic input size: users, segment centroids and focals.
    pub fn global_state_dim(&self) -> usize {
        3 * self.n_users + 6 * self.n_agents
    }
}

pub const OBS_DIM: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalState {
    pub users: Vec<Vec3>,
    /// User positions as the agents perceive them (noisy when enabled).
    pub observed_users: Vec<Vec3>,
    pub segments: Vec<Vec3>,
    pub focals: Vec<Vec3>,
    pub step_index: usize,
    pub tiles: ReflectorArray,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalObservation(pub [f64; OBS_DIM]);

/// Affine map of a box onto `[−1, 1]³`. The environment uses agent 1's
/// focal box, so displacements and positions share one scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalizer {
    center: Vec3,
    half: Vec3,
}

impl Normalizer {
    pub fn new(bounds: &Aabb) -> Self {
        Normalizer { center: bounds.center(), half: bounds.half_extent() }
    }

    pub fn normalize(&self, p: Vec3) -> Vec3 {
        Vec3::new((p.x - self.center.x) / self.half.x, (p.y - self.center.y) / self.half.y, (p.z - self.center.z) / self.half.z)
    }

    /// Meters per normalized unit along each axis.
    pub fn half_extent(&self) -> Vec3 {
        self.half
    }

    pub fn denormalize(&self, q: Vec3) -> Vec3 {
        Vec3::new(q.x * self.half.x + self.center.x, q.y * self.half.y + self.center.y, q.z * self.half.z + self.center.z)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub reward: f64,
    pub per_user_rssi: Vec<f64>,
    pub done: bool,
    /// Users were resampled at the end of this step.
    pub moved: bool,
}

pub fn reward(rssi_dbm: &[f64], mode: RewardMode, distances: &[f64]) -> Result<f64> {
    if rssi_dbm.is_empty() {
        return Err(Error::contract("reward needs at least one user"));
    }
    match mode {
        RewardMode::Mean => Ok(rssi_dbm.iter().sum::<f64>() / rssi_dbm.len() as f64),
        RewardMode::DistNorm { n } => {
            if distances.len() != rssi_dbm.len() {
                return Err(Error::Dimension { expected: rssi_dbm.len(), got: distances.len() });
            }
            let mut acc = 0.0;
            for (&p, &d) in rssi_dbm.iter().zip(distances) {
                if !(d > 0.0) {
                    return Err(Error::contract(format!("distance must be positive, got {d}")));
                }
                acc += p + 10.0 * n as f64 * d.log10();
            }
            Ok(acc / rssi_dbm.len() as f64)
        }
    }
}

pub fn sample_in_region<R: Rng + ?Sized>(region: &Aabb, rng: &mut R) -> Vec3 {
    let s = |lo: f64, hi: f64, rng: &mut R| if hi > lo { rng.random_range(lo..=hi) } else { lo };
    Vec3::new(s(region.min.x, region.max.x, rng), s(region.min.y, region.max.y, rng), s(region.min.z, region.max.z, rng))
}

pub fn noisy_positions<R: Rng + ?Sized>(users: &[Vec3], sigma_m: f64, rng: &mut R) -> Result<Vec<Vec3>> {
    if !(sigma_m >= 0.0) {
        return Err(Error::contract(format!("noise sigma must be non-negative, got {sigma_m}")));
    }
    if sigma_m == 0.0 {
        return Ok(users.to_vec());
    }
    let normal = Normal::new(0.0, sigma_m).map_err(|e| Error::contract(e.to_string()))?;
    Ok(users.iter().map(|u| *u + Vec3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng))).collect())
}

pub struct ReflectorEnv {
    cfg: EnvConfig,
    scene: Scene,
    template: Option<ReflectorArray>,
    assignment: Option<Assignment>,
    constraints: FocalConstraints,
    normalizer: Normalizer,
    user_rng: ChaCha8Rng,
    tile_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    state: GlobalState,
}

impl ReflectorEnv {
    /// `scene` must carry a reflector mount unless the mode is `Absent`.
    pub fn new(scene: &Scene, cfg: EnvConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let base = scene.without_tiles();
        let constraints = FocalConstraints::around_region(&scene.user_region, cfg.n_agents, cfg.delta_max_m, AngleLimits::SERVO)?;
        let (template, assignment) = match (&scene.reflector, cfg.reflector) {
            (_, ReflectorMode::Absent) => (None, None),
            (Some(m), _) => {
                let arr = ReflectorArray::from_mount(m)?;
                let asg = assign(cfg.grouping, arr.rows, arr.cols, cfg.n_agents)?;
                (Some(arr), Some(asg))
            }
            (None, _) => return Err(Error::config("scene has no reflector mount")),
        };
        let segments = match (&template, &assignment) {
            (Some(arr), Some(asg)) => (1..=cfg.n_agents)
                .map(|l| {
                    let idx = asg.tiles_of(l);
                    idx.iter().fold(Vec3::ZERO, |s, &i| s + arr.tiles[i].position) * (1.0 / idx.len() as f64)
                })
                .collect(),
            _ => {
                let c = scene.reflector.as_ref().map_or(scene.ap_position, |m| m.center);
                vec![c; cfg.n_agents]
            }
        };
        let placeholder = template.clone().unwrap_or_else(|| {
            crate::reflector::hex_layout(1, 1, 0.1, Vec3::ZERO, crate::vectormath::Frame::WORLD).expect("trivial layout")
        });
        let state = GlobalState {
            users: vec![scene.user_region.center(); cfg.n_users],
            observed_users: vec![scene.user_region.center(); cfg.n_users],
            segments,
            focals: vec![scene.user_region.center(); cfg.n_agents],
            step_index: 0,
            tiles: placeholder,
        };
        let mut env = ReflectorEnv {
            normalizer: Normalizer::new(&constraints.boxes[0]),
            cfg,
            scene: base,
            template,
            assignment,
            constraints,
            user_rng: stream_rng(seed, streams::USERS),
            tile_rng: stream_rng(seed, streams::TILES),
            noise_rng: stream_rng(seed, streams::NOISE),
            state,
        };
        env.reset();
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn state(&self) -> &GlobalState {
        &self.state
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn constraints(&self) -> &FocalConstraints {
        &self.constraints
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn assignment(&self) -> Option<&Assignment> {
        self.assignment.as_ref()
    }

    /// Random tile angles, fresh users, focals on the observed users.
    pub fn reset(&mut self) -> &GlobalState {
        if let Some(t) = &self.template {
            let mut arr = t.clone();
            arr.randomize(&mut self.tile_rng, &AngleLimits::SERVO);
            if self.cfg.reflector == ReflectorMode::Flat {
                arr.flatten();
            }
            self.state.tiles = arr;
        }
        self.state.step_index = 0;
        self.resample_users();
        self.state.focals = (1..=self.cfg.n_agents)
            .map(|l| self.constraints.boxes[l - 1].clamp(self.state.observed_users[self.cfg.user_of(l) - 1]))
            .collect();
        &self.state
    }

    fn resample_users(&mut self) {
        let region = self.scene.user_region;
        self.state.users = (0..self.cfg.n_users).map(|_| sample_in_region(&region, &mut self.user_rng)).collect();
        self.state.observed_users = noisy_positions(&self.state.users, self.cfg.position_noise_m, &mut self.noise_rng)
            .expect("noise validated in config");
    }

    /// Resamples every user uniformly in the region.
    pub fn move_users(&mut self) {
        self.resample_users();
    }

    /// Replaces user positions directly (observations follow, with noise).
    pub fn set_users(&mut self, users: &[Vec3]) -> Result<()> {
        if users.len() != self.cfg.n_users {
            return Err(Error::Dimension { expected: self.cfg.n_users, got: users.len() });
        }
        self.state.users = users.to_vec();
        self.state.observed_users = noisy_positions(users, self.cfg.position_noise_m, &mut self.noise_rng)?;
        Ok(())
    }

    /// Places focals directly (clamped into their boxes); tiles follow on
    /// the next step.
    pub fn set_focals(&mut self, focals: &[Vec3]) -> Result<()> {
        if focals.len() != self.cfg.n_agents {
            return Err(Error::Dimension { expected: self.cfg.n_agents, got: focals.len() });
        }
        self.state.focals = focals.iter().zip(&self.constraints.boxes).map(|(f, b)| b.clamp(*f)).collect();
        Ok(())
    }

    /// `actions[l]` is agent `l + 1`'s focal displacement in meters.
    pub fn step(&mut self, actions: &[Vec3]) -> Result<StepResult> {
        if actions.len() != self.cfg.n_agents {
            return Err(Error::Dimension { expected: self.cfg.n_agents, got: actions.len() });
        }
        let dm = self.cfg.delta_max_m;
        for (l, a) in actions.iter().enumerate() {
            if !a.is_finite() {
                return Err(Error::contract("non-finite action"));
            }
            let clipped = a.map(|v| v.clamp(-dm, dm));
            self.state.focals[l] = self.constraints.boxes[l].clamp(self.state.focals[l] + clipped);
        }
        if self.cfg.reflector == ReflectorMode::Controlled {
            let asg = self.assignment.as_ref().expect("controlled mode has an assignment");
            apply_focal_points(
                &mut self.state.tiles,
                &self.state.focals,
                asg,
                self.scene.ap_position,
                &self.constraints,
                self.cfg.control,
            )?;
        }
        let per_user_rssi = self.measure()?;
        let distances: Vec<f64> = self.state.users.iter().map(|u| u.distance(self.scene.ap_position)).collect();
        let r = reward(&per_user_rssi, self.cfg.reward, &distances)?;
        self.state.step_index += 1;
        let moved = self.cfg.mobility_every > 0 && self.state.step_index % self.cfg.mobility_every == 0;
        if moved {
            self.move_users();
        }
        Ok(StepResult { reward: r, per_user_rssi, done: self.state.step_index >= self.cfg.episode_length, moved })
    }

    /// Scene including the current tile facets.
    pub fn current_scene(&self) -> Result<Scene> {
        match (&self.template, self.cfg.reflector) {
            (_, ReflectorMode::Absent) | (None, _) => Ok(self.scene.clone()),
            (Some(_), _) => Ok(self.scene.with_tiles(self.state.tiles.tile_surfaces(self.scene.frequency_hz)?)),
        }
    }

    /// RSSI at every true user position for the current tiles.
    pub fn measure(&self) -> Result<Vec<f64>> {
        let scene = self.current_scene()?;
        self.state.users.iter().map(|u| Ok(rssi_at(&scene, *u, self.cfg.max_bounces)?.rssi_dbm)).collect()
    }

    /// Agent `agent` (1-based): assigned user, segment centroid, focal.
    pub fn observe(&self, agent: usize) -> Result<LocalObservation> {
        if agent == 0 || agent > self.cfg.n_agents {
            return Err(Error::InvalidAgent(agent));
        }
        let n = &self.normalizer;
        let u = n.normalize(self.state.observed_users[self.cfg.user_of(agent) - 1]);
        let r = n.normalize(self.state.segments[agent - 1]);
        let f = n.normalize(self.state.focals[agent - 1]);
        Ok(LocalObservation([u.x, u.y, u.z, r.x, r.y, r.z, f.x, f.y, f.z]))
    }

    pub fn observe_all(&self) -> Vec<LocalObservation> {
        (1..=self.cfg.n_agents).map(|l| self.observe(l).expect("agent ids in range")).collect()
    }

    /// Like [`Self::global_state_vector`] but with the noisy user positions.
    pub fn observed_state_vector(&self) -> Vec<f64> {
        let n = &self.normalizer;
        let mut v = Vec::with_capacity(self.cfg.global_state_dim());
        for p in self.state.observed_users.iter().chain(&self.state.segments).chain(&self.state.focals) {
            v.extend_from_slice(&n.normalize(*p).to_array());
        }
        v
    }

    /// Normalized `[users, segments, focals]`, length `3K + 6L`.
    pub fn global_state_vector(&self) -> Vec<f64> {
        let n = &self.normalizer;
        let mut v = Vec::with_capacity(self.cfg.global_state_dim());
        for p in self.state.users.iter().chain(&self.state.segments).chain(&self.state.focals) {
            v.extend_from_slice(&n.normalize(*p).to_array());
        }
        v
    }
}

/// Per-step trace: episode, step, per-user RSSI, reward, focal coordinates.
#[derive(Debug, Clone, Default)]
pub struct RolloutLog {
    text: String,
    users: usize,
    agents: usize,
}

impl RolloutLog {
    pub fn new(n_users: usize, n_agents: usize) -> Self {
        let mut text = String::from("episode,step");
        for k in 1..=n_users {
            let _ = write!(text, ",rssi_{k}");
        }
        text.push_str(",reward");
        for l in 1..=n_agents {
            let _ = write!(text, ",f{l}_x,f{l}_y,f{l}_z");
        }
        text.push('\n');
        RolloutLog { text, users: n_users, agents: n_agents }
    }

    pub fn record(&mut self, episode: usize, step: usize, result: &StepResult, focals: &[Vec3]) {
        debug_assert_eq!(result.per_user_rssi.len(), self.users);
        debug_assert_eq!(focals.len(), self.agents);
        let _ = write!(self.text, "{episode},{step}");
        for r in &result.per_user_rssi {
            let _ = write!(self.text, ",{r:.4}");
        }
        let _ = write!(self.text, ",{:.4}", result.reward);
        for f in focals {
            let _ = write!(self.text, ",{:.4},{:.4},{:.4}", f.x, f.y, f.z);
        }
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), &self.text).map_err(|e| Error::io(path.as_ref(), e))
    }
}
