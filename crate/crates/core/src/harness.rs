//! Experiment orchestration: baselines, training runs, evaluation under
//! mobility, sweeps, ablations, heatmaps and summaries.
//!
//! Evaluation protocol: one reset, then `eval_steps` scored steps. Before
//! every scored step whose index is a positive multiple of
//! `mobility_every`, users are resampled and `adaptation_steps` unscored
//! steps run first. All RSSI aggregation happens in dB.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::environment::{EnvConfig, ReflectorEnv, ReflectorMode, RewardMode};
use crate::error::{Error, Result};
use crate::marl::{train, Hyperparameters, LearningCurve, MappoModel, TrainMode, TrainOptions};
use crate::raytracer::{rssi_heatmap, GridSpec, Heatmap};
use crate::reflector::{ControlMode, Grouping};
use crate::scene::{build_l_hallway, Scene, SceneConfig};
use crate::vectormath::Vec3;

/// Added to the experiment seed for evaluation environments, so that
/// training and evaluation never share user draws.
pub const EVAL_SEED_OFFSET: u64 = 1000;

/// Step-mean RSSI must come back within this margin of the pre-move level.
pub const RECOVERY_MARGIN_DB: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    None,
    Flat,
    SaFocus,
    ColMa,
    MaFocus,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::None, Scheme::Flat, Scheme::SaFocus, Scheme::ColMa, Scheme::MaFocus];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::None => "none",
            Scheme::Flat => "flat",
            Scheme::SaFocus => "sa_focus",
            Scheme::ColMa => "col_ma",
            Scheme::MaFocus => "ma_focus",
        }
    }

    pub fn parse(s: &str) -> Result<Scheme> {
        Scheme::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme {s:?}")))
    }

    /// Training mode for learned schemes, `None` for static ones.
    pub fn train_mode(self) -> Option<TrainMode> {
        match self {
            Scheme::None | Scheme::Flat => None,
            Scheme::SaFocus => Some(TrainMode::SingleAgent),
            Scheme::ColMa => Some(TrainMode::ColumnMa),
            Scheme::MaFocus => Some(TrainMode::MultiAgent),
        }
    }

    pub fn is_learned(self) -> bool {
        self.train_mode().is_some()
    }

    fn reflector_mode(self) -> ReflectorMode {
        match self {
            Scheme::None => ReflectorMode::Absent,
            Scheme::Flat => ReflectorMode::Flat,
            _ => ReflectorMode::Controlled,
        }
    }

    fn control(self) -> ControlMode {
        match self {
            Scheme::ColMa => ControlMode::ColumnAzimuth,
            _ => ControlMode::PerTile,
        }
    }
}

/// One experiment: scheme, scene size, environment and training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub users: usize,
    pub agents: usize,
    pub rows: usize,
    pub cols: usize,
    pub grouping: Grouping,
    pub reward: RewardMode,
    pub noise_m: f64,
    pub seed: u64,
    pub episodes: usize,
    pub eval_steps: usize,
    /// Evaluation mobility cadence in scored steps.
    pub mobility_every: usize,
    /// Unscored steps granted after every evaluation move.
    pub adaptation_steps: usize,
    pub delta_max_m: f64,
    pub episode_length: usize,
    /// Training-time mobility cadence; 0 keeps users fixed per episode.
    pub train_mobility_every: usize,
    /// Heatmap cell size, meters.
    pub heatmap_step_m: f64,
    pub hp: Hyperparameters,
    pub scene: SceneConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::desk()
    }
}

impl ExperimentConfig {
    /// 5×5 array, 300 training episodes, 100 scored evaluation steps.
    pub fn desk() -> Self {
        ExperimentConfig {
            scheme: Scheme::MaFocus,
            users: 3,
            agents: 3,
            rows: 5,
            cols: 5,
            grouping: Grouping::Columns,
            reward: RewardMode::Mean,
            noise_m: 0.0,
            seed: 1,
            episodes: 300,
            eval_steps: 100,
            mobility_every: 4,
            adaptation_steps: 3,
            delta_max_m: 2.0,
            episode_length: 200,
            train_mobility_every: 1,
            heatmap_step_m: 0.25,
            hp: Hyperparameters::tuned(),
            scene: SceneConfig::default(),
        }
    }

    /// 7×9 array, 3000 training episodes, 300 scored evaluation steps.
    pub fn full() -> Self {
        ExperimentConfig { rows: 7, cols: 9, episodes: 3000, eval_steps: 300, ..ExperimentConfig::desk() }
    }

    /// Missing keys take the desk values; keys inside `[hp]` override the
    /// profile hyperparameters one by one.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let err = |e: &dyn std::fmt::Display| Error::Config(e.to_string());
        let mut table: toml::Table = toml::from_str(s).map_err(|e| err(&e))?;
        if let Some(toml::Value::Table(hp)) = table.remove("hp") {
            let mut merged = toml::Table::try_from(Hyperparameters::tuned()).map_err(|e| err(&e))?;
            merged.extend(hp);
            table.insert("hp".into(), toml::Value::Table(merged));
        }
        let cfg: ExperimentConfig = table.try_into().map_err(|e| err(&e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let p = path.as_ref();
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.eval_steps == 0 {
            return Err(Error::config("eval_steps must be positive"));
        }
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::config("reflector needs at least one row and column"));
        }
        if !(self.heatmap_step_m > 0.0) {
            return Err(Error::config("heatmap_step_m must be positive"));
        }
        self.env_config(true)?.validate()?;
        let mut hp = self.hp.clone();
        hp.episodes = self.episodes;
        hp.validate()
    }

    pub fn scene(&self) -> Result<Scene> {
        build_l_hallway(&SceneConfig { reflector_rows: self.rows, reflector_cols: self.cols, ..self.scene.clone() })
    }

    /// Environment settings for training (`training = true`) or evaluation.
    pub fn env_config(&self, training: bool) -> Result<EnvConfig> {
        let cfg = EnvConfig {
            n_users: self.users,
            n_agents: self.agents,
            episode_length: if training { self.episode_length } else { usize::MAX },
            delta_max_m: self.delta_max_m,
            control: self.scheme.control(),
            grouping: self.grouping,
            reflector: self.scheme.reflector_mode(),
            reward: self.reward,
            position_noise_m: self.noise_m,
            mobility_every: if training { self.train_mobility_every } else { 0 },
            ..EnvConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn hyperparameters(&self) -> Hyperparameters {
        Hyperparameters { episodes: self.episodes, ..self.hp.clone() }
    }
}

/// A trained model with its learning curve.
#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub model: MappoModel,
    pub curve: LearningCurve,
}

/// Trains the config's (learned) scheme from scratch.
pub fn train_scheme(cfg: &ExperimentConfig, opts: &TrainOptions) -> Result<TrainedRun> {
    cfg.validate()?;
    let mode = cfg
        .scheme
        .train_mode()
        .ok_or_else(|| Error::Config(format!("scheme {} has nothing to train", cfg.scheme.name())))?;
    let scene = cfg.scene()?;
    let hp = cfg.hyperparameters();
    let mut env = ReflectorEnv::new(&scene, cfg.env_config(true)?, cfg.seed)?;
    let mut model = MappoModel::new(&env, &hp, mode, cfg.seed)?;
    let curve = train(&mut env, &mut model, &hp, cfg.seed, opts)?;
    Ok(TrainedRun { model, curve })
}

/// Who picks the focal displacements during evaluation.
#[derive(Debug, Clone, Copy)]
pub enum Controller<'a> {
    /// Focals never move (static schemes, or an untrained reference).
    Static,
    /// Deterministic decentralized execution of trained actors.
    Policy(&'a MappoModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalStep {
    /// Position in the full trace, adaptation steps included.
    pub index: usize,
    pub adapting: bool,
    pub per_user_rssi: Vec<f64>,
    pub mean_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scheme: Scheme,
    pub steps: Vec<EvalStep>,
    /// Trace indices at which users were resampled (before that step ran).
    pub move_steps: Vec<usize>,
    /// Mean of scored step means, dBm.
    pub temporal_mean_dbm: f64,
    /// Population std of scored step means, dB.
    pub std_db: f64,
}

impl EvalReport {
    pub fn scored(&self) -> impl Iterator<Item = &EvalStep> {
        self.steps.iter().filter(|s| !s.adapting)
    }

    /// CSV: step, adapting flag, per-user RSSI, step mean.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let k = self.steps.first().map_or(0, |s| s.per_user_rssi.len());
        let mut s = String::from("step,adapting");
        for u in 1..=k {
            let _ = write!(s, ",rssi_{u}");
        }
        s.push_str(",mean\n");
        for st in &self.steps {
            let _ = write!(s, "{},{}", st.index, u8::from(st.adapting));
            for r in &st.per_user_rssi {
                let _ = write!(s, ",{r:.4}");
            }
            let _ = writeln!(s, ",{:.4}", st.mean_dbm);
        }
        s
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len().max(1) as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt())
}

/// Runs the mobility evaluation protocol on a prepared environment.
pub fn evaluate_env(env: &mut ReflectorEnv, scheme: Scheme, ctrl: Controller, cfg: &ExperimentConfig) -> Result<EvalReport> {
    let n_agents = env.config().n_agents;
    let act = |env: &ReflectorEnv| -> Result<Vec<Vec3>> {
        match ctrl {
            Controller::Static => Ok(vec![Vec3::ZERO; n_agents]),
            Controller::Policy(m) => m.act_deterministic(env),
        }
    };
    env.reset();
    let mut steps = Vec::new();
    let mut move_steps = Vec::new();
    let record = |env: &mut ReflectorEnv, adapting: bool, steps: &mut Vec<EvalStep>| -> Result<()> {
        let a = act(env)?;
        let r = env.step(&a)?;
        let (mean_dbm, _) = mean_std(&r.per_user_rssi);
        steps.push(EvalStep { index: steps.len(), adapting, per_user_rssi: r.per_user_rssi, mean_dbm });
        Ok(())
    };
    for s in 0..cfg.eval_steps {
        if cfg.mobility_every > 0 && s > 0 && s % cfg.mobility_every == 0 {
            env.move_users();
            move_steps.push(steps.len());
            for _ in 0..cfg.adaptation_steps {
                record(env, true, &mut steps)?;
            }
        }
        record(env, false, &mut steps)?;
    }
    let scored: Vec<f64> = steps.iter().filter(|s| !s.adapting).map(|s| s.mean_dbm).collect();
    let (temporal_mean_dbm, std_db) = mean_std(&scored);
    Ok(EvalReport { scheme, steps, move_steps, temporal_mean_dbm, std_db })
}

fn check_model(scheme: Scheme, model: &MappoModel) -> Result<()> {
    match scheme.train_mode() {
        Some(m) if m == model.mode => Ok(()),
        Some(m) => Err(Error::Config(format!("checkpoint was trained as {:?}, scheme needs {m:?}", model.mode))),
        None => Ok(()),
    }
}

/// Evaluates `cfg.scheme` on the config's scene; learned schemes need `model`.
pub fn evaluate(cfg: &ExperimentConfig, model: Option<&MappoModel>) -> Result<EvalReport> {
    evaluate_on(cfg, &cfg.scene()?, model)
}

fn evaluate_on(cfg: &ExperimentConfig, scene: &Scene, model: Option<&MappoModel>) -> Result<EvalReport> {
    cfg.validate()?;
    let ctrl = match (cfg.scheme.is_learned(), model) {
        (false, _) => Controller::Static,
        (true, Some(m)) => {
            check_model(cfg.scheme, m)?;
            Controller::Policy(m)
        }
        (true, None) => {
            return Err(Error::MissingCheckpoint(format!("scheme {} needs a trained model", cfg.scheme.name())))
        }
    };
    let mut env = ReflectorEnv::new(scene, cfg.env_config(false)?, cfg.seed + EVAL_SEED_OFFSET)?;
    evaluate_env(&mut env, cfg.scheme, ctrl, cfg)
}

/// Baseline evaluation; learned schemes load their actors from `checkpoint`.
pub fn run_baseline(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<EvalReport> {
    let model = match (cfg.scheme.is_learned(), checkpoint) {
        (true, Some(p)) => Some(MappoModel::load(p)?),
        (true, None) => {
            return Err(Error::MissingCheckpoint(format!("scheme {} needs --checkpoint", cfg.scheme.name())))
        }
        (false, _) => None,
    };
    evaluate(cfg, model.as_ref())
}

/// Evaluates a 3-agent model at each user count without retraining.
pub fn sweep_users(cfg: &ExperimentConfig, model: &MappoModel, users: &[usize]) -> Result<Vec<(usize, EvalReport)>> {
    users
        .iter()
        .map(|&k| Ok((k, evaluate(&ExperimentConfig { users: k, ..cfg.clone() }, Some(model))?)))
        .collect()
}

/// Rebuilds the array at each row count and reuses the policy.
pub fn sweep_rows(cfg: &ExperimentConfig, model: &MappoModel, rows: &[usize]) -> Result<Vec<(usize, EvalReport)>> {
    rows.iter()
        .map(|&r| Ok((r, evaluate(&ExperimentConfig { rows: r, ..cfg.clone() }, Some(model))?)))
        .collect()
}

/// Result of one train-then-evaluate experiment.
#[derive(Debug, Clone)]
pub struct TrainEval {
    pub config: ExperimentConfig,
    pub run: TrainedRun,
    pub report: EvalReport,
}

pub fn train_and_evaluate(cfg: &ExperimentConfig) -> Result<TrainEval> {
    let run = train_scheme(cfg, &TrainOptions::default())?;
    let report = evaluate(cfg, Some(&run.model))?;
    Ok(TrainEval { config: cfg.clone(), run, report })
}

/// Runs independent experiments on scoped worker threads; results keep
/// the input order.
pub fn run_all(configs: &[ExperimentConfig]) -> Result<Vec<TrainEval>> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(configs.len().max(1));
    if workers <= 1 {
        return configs.iter().map(train_and_evaluate).collect();
    }
    let mut slots: Vec<Option<Result<TrainEval>>> = (0..configs.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        let chunk = configs.len().div_ceil(workers);
        for (cfgs, out) in configs.chunks(chunk).zip(slots.chunks_mut(chunk)) {
            s.spawn(move || {
                for (c, o) in cfgs.iter().zip(out.iter_mut()) {
                    *o = Some(train_and_evaluate(c));
                }
            });
        }
    });
    slots.into_iter().map(|o| o.expect("every slot filled")).collect()
}

/// Trains and evaluates once per noise level.
pub fn sweep_noise(cfg: &ExperimentConfig, sigmas: &[f64]) -> Result<Vec<TrainEval>> {
    let cfgs: Vec<_> = sigmas.iter().map(|&s| ExperimentConfig { noise_m: s, ..cfg.clone() }).collect();
    run_all(&cfgs)
}

/// Trains and evaluates each grouping pattern with the same seed.
pub fn ablate_grouping(cfg: &ExperimentConfig, patterns: &[Grouping]) -> Result<Vec<TrainEval>> {
    let cfgs: Vec<_> = patterns.iter().map(|&g| ExperimentConfig { grouping: g, ..cfg.clone() }).collect();
    run_all(&cfgs)
}

/// Trains with each distance-normalized reward; reports raw RSSI.
pub fn ablate_reward(cfg: &ExperimentConfig, exponents: &[u32]) -> Result<Vec<TrainEval>> {
    let cfgs: Vec<_> =
        exponents.iter().map(|&n| ExperimentConfig { reward: RewardMode::DistNorm { n }, ..cfg.clone() }).collect();
    run_all(&cfgs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationStats {
    pub events: usize,
    /// Mean pre-move level over events, dBm.
    pub pre_move_dbm: f64,
    /// Event-averaged step means after a move, truncated to the shortest
    /// window, dBm.
    pub post_move_profile_dbm: Vec<f64>,
    /// First post-move step (from 1) at which the event-averaged profile is
    /// back within the margin of the averaged pre-move level; profile
    /// length + 1 if it never is.
    pub recovery_steps: f64,
    /// Same rule applied per event, then averaged. Single-event values are
    /// dominated by position-dependent fading.
    pub per_event_recovery_steps: f64,
    /// Mean of (pre-move level − first post-move step mean), dB.
    pub post_move_dip_db: f64,
}

fn recovery_index(window: &[f64], level: f64) -> f64 {
    window.iter().position(|&v| v >= level - RECOVERY_MARGIN_DB).map_or(window.len() + 1, |i| i + 1) as f64
}

/// Recovery after each move. The pre-move level is the mean of the four
/// steps before the move; the window ends at the next move or trace end.
pub fn adaptation_stats(report: &EvalReport) -> Result<AdaptationStats> {
    pooled_adaptation_stats(std::slice::from_ref(report))
}

/// [`adaptation_stats`] over the move events of several reports.
pub fn pooled_adaptation_stats(reports: &[EvalReport]) -> Result<AdaptationStats> {
    let mut levels = Vec::new();
    let mut windows: Vec<Vec<f64>> = Vec::new();
    for report in reports {
        let means: Vec<f64> = report.steps.iter().map(|s| s.mean_dbm).collect();
        for (e, &m) in report.move_steps.iter().enumerate() {
            if m == 0 || m >= means.len() {
                continue;
            }
            let pre = &means[m.saturating_sub(4)..m];
            levels.push(pre.iter().sum::<f64>() / pre.len() as f64);
            let end = report.move_steps.get(e + 1).copied().unwrap_or(means.len());
            windows.push(means[m..end].to_vec());
        }
    }
    if levels.is_empty() {
        return Err(Error::contract("no complete move events"));
    }
    let n = levels.len() as f64;
    let pre_move_dbm = levels.iter().sum::<f64>() / n;
    let len = windows.iter().map(Vec::len).min().unwrap_or(0);
    let profile: Vec<f64> = (0..len).map(|i| windows.iter().map(|w| w[i]).sum::<f64>() / n).collect();
    let per_event = levels.iter().zip(&windows).map(|(&l, w)| recovery_index(w, l)).sum::<f64>() / n;
    let dip = levels.iter().zip(&windows).map(|(&l, w)| l - w[0]).sum::<f64>() / n;
    Ok(AdaptationStats {
        events: levels.len(),
        pre_move_dbm,
        recovery_steps: recovery_index(&profile, pre_move_dbm),
        post_move_profile_dbm: profile,
        per_event_recovery_steps: per_event,
        post_move_dip_db: dip,
    })
}

/// Machine-readable result line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scheme: Scheme,
    pub mean_dbm: f64,
    pub std_dbm: f64,
    pub recovery_steps: Option<f64>,
}

impl Summary {
    pub fn from_report(report: &EvalReport) -> Self {
        Summary {
            scheme: report.scheme,
            mean_dbm: report.temporal_mean_dbm,
            std_dbm: report.std_db,
            recovery_steps: adaptation_stats(report).ok().map(|a| a.recovery_steps),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("summary serializes")
    }
}

/// Files written by [`emit_heatmap`].
#[derive(Debug, Clone)]
pub struct HeatmapFiles {
    pub csv: PathBuf,
    pub pgm: PathBuf,
    pub users: PathBuf,
    pub heatmap: Heatmap,
}

/// Display range of heatmap PGMs, dBm.
pub const PGM_RANGE_DBM: (f64, f64) = (-140.0, -60.0);

/// RSSI over the user region after one reset and `adaptation_steps + 1`
/// controller steps. Writes `<stem>.csv`, `<stem>.pgm` and
/// `<stem>_users.csv` (one `x,y,z` line per user).
pub fn emit_heatmap(cfg: &ExperimentConfig, model: Option<&MappoModel>, out_stem: &Path) -> Result<HeatmapFiles> {
    cfg.validate()?;
    let scene = cfg.scene()?;
    let ctrl = match (cfg.scheme.is_learned(), model) {
        (false, _) => Controller::Static,
        (true, Some(m)) => {
            check_model(cfg.scheme, m)?;
            Controller::Policy(m)
        }
        (true, None) => return Err(Error::MissingCheckpoint(format!("scheme {} needs a model", cfg.scheme.name()))),
    };
    let mut env = ReflectorEnv::new(&scene, cfg.env_config(false)?, cfg.seed + EVAL_SEED_OFFSET)?;
    env.reset();
    for _ in 0..=cfg.adaptation_steps {
        let a = match ctrl {
            Controller::Static => vec![Vec3::ZERO; cfg.agents],
            Controller::Policy(m) => m.act_deterministic(&env)?,
        };
        env.step(&a)?;
    }
    let region = scene.user_region;
    let grid = GridSpec {
        x0: region.min.x,
        x1: region.max.x,
        y0: region.min.y,
        y1: region.max.y,
        step: cfg.heatmap_step_m,
        z: region.min.z,
    };
    let heatmap = rssi_heatmap(&env.current_scene()?, &grid, env.config().max_bounces)?;
    let with_ext = |suffix: &str| {
        let mut s = out_stem.as_os_str().to_owned();
        s.push(suffix);
        PathBuf::from(s)
    };
    let files = HeatmapFiles { csv: with_ext(".csv"), pgm: with_ext(".pgm"), users: with_ext("_users.csv"), heatmap };
    files.heatmap.write_csv(&files.csv)?;
    files.heatmap.write_pgm(&files.pgm, PGM_RANGE_DBM.0, PGM_RANGE_DBM.1)?;
    let mut users = String::from("x,y,z\n");
    for u in &env.state().users {
        users.push_str(&format!("{:.4},{:.4},{:.4}\n", u.x, u.y, u.z));
    }
    std::fs::write(&files.users, users).map_err(|e| Error::io(&files.users, e))?;
    Ok(files)
}
