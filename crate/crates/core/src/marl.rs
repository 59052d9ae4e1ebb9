//! Multi-agent PPO with a centralized critic (CTDE), plus the single-agent
//! and column-controlled variants used as baselines.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{stream_rng, streams, ReflectorEnv, OBS_DIM};
use crate::error::{Error, Result};
use crate::neuralnet::{adam_step, AdamState, DenseNet, GaussianPolicy};
use crate::reflector::ControlMode;
use crate::vectormath::Vec3;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    pub gamma: f64,
    pub lambda_gae: f64,
    pub clip_eps: f64,
    /// Value-loss weight.
    pub c1: f64,
    /// Entropy-bonus weight.
    pub c2: f64,
    pub lr: f64,
    /// Rollout transitions collected per update.
    pub buffer: usize,
    pub minibatch: usize,
    pub epochs_per_update: usize,
    pub episodes: usize,
    /// Remaining epochs of an update are skipped once the estimated KL exceeds this.
    pub kl_stop: f64,
    pub hidden: usize,
    /// Initial policy std as a fraction of the environment's `delta_max_m`.
    pub init_std_frac: f64,
    /// Critic regresses standardized returns using running return statistics.
    pub value_norm: bool,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            gamma: 0.985,
            lambda_gae: 0.9,
            clip_eps: 0.2,
            c1: 0.5,
            c2: 1e-4,
            lr: 2e-4,
            buffer: 1000,
            minibatch: 200,
            epochs_per_update: 4,
            episodes: 300,
            kl_stop: 0.05,
            hidden: 256,
            init_std_frac: 0.3,
            value_norm: true,
        }
    }
}

impl Hyperparameters {
    /// Table values with the overrides the experiment profiles use: a
    /// near-greedy discount and a larger step.
    pub fn tuned() -> Self {
        Hyperparameters { gamma: 0.1, lr: 2e-3, ..Hyperparameters::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(self.gamma) || !unit(self.lambda_gae) {
            return Err(Error::config("gamma and lambda_gae must lie in (0, 1]"));
        }
        if !(self.clip_eps > 0.0) || !(self.lr > 0.0) || !(self.init_std_frac > 0.0) {
            return Err(Error::config("clip_eps, lr and init_std_frac must be positive"));
        }
        if self.c1 < 0.0 || self.c2 < 0.0 || !(self.kl_stop > 0.0) {
            return Err(Error::config("loss weights must be non-negative and kl_stop positive"));
        }
        if self.minibatch < 2 || self.buffer < self.minibatch {
            return Err(Error::config("need 2 <= minibatch <= buffer"));
        }
        if self.epochs_per_update == 0 || self.hidden == 0 {
            return Err(Error::config("epochs_per_update and hidden must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    /// One actor per agent on local observations.
    MultiAgent,
    /// One actor on the observed global state emitting all `3L` displacements.
    SingleAgent,
    /// Multi-agent actors driving column-shared azimuths.
    ColumnMa,
}

impl TrainMode {
    pub fn control(self) -> ControlMode {
        match self {
            TrainMode::ColumnMa => ControlMode::ColumnAzimuth,
            _ => ControlMode::PerTile,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub global_state: Vec<f64>,
    /// Per-actor inputs.
    pub observations: Vec<Vec<f64>>,
    /// Per-actor pre-clip actions.
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub reward: f64,
    /// Critic estimate in reward units.
    pub value: f64,
    pub done: bool,
}

/// On-policy rollout storage, cleared after every update.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryBuffer {
    capacity: usize,
    items: Vec<Transition>,
}

impl TrajectoryBuffer {
    pub fn new(capacity: usize) -> Self {
        TrajectoryBuffer { capacity, items: Vec::with_capacity(capacity) }
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        if self.items.len() >= self.capacity {
            return Err(Error::contract("trajectory buffer is full"));
        }
        if let Some(first) = self.items.first() {
            if first.observations.len() != t.observations.len()
                || first.actions.len() != t.actions.len()
                || t.log_probs.len() != t.actions.len()
            {
                return Err(Error::contract("transition layout differs from buffer contents"));
            }
        }
        self.items.push(t);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.items.len() >= self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn items(&self) -> &[Transition] {
        &self.items
    }

    pub fn clear(&mut self) {
        self.items.clear();
    }
}

/// Generalized advantage estimates and returns. `dones[t]` cuts the
/// bootstrap after step `t`; `bootstrap` values the state after the last step.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if n == 0 {
        return Err(Error::contract("empty trajectory"));
    }
    if values.len() != n || dones.len() != n {
        return Err(Error::Dimension { expected: n, got: values.len().min(dones.len()) });
    }
    let mut adv = vec![0.0; n];
    let mut next_value = bootstrap;
    let mut running = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        running = delta + gamma * lambda * live * running;
        adv[t] = running;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Standardizes with the population std plus `1e-8` in the denominator.
pub fn normalize_advantages(adv: &[f64]) -> Result<Vec<f64>> {
    if adv.len() < 2 {
        return Err(Error::contract("need at least two advantages"));
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let denom = var.sqrt() + 1e-8;
    Ok(adv.iter().map(|a| (a - mean) / denom).collect())
}

pub fn ppo_clip_term(ratio: f64, adv: f64, eps: f64) -> f64 {
    (ratio * adv).min(ratio.clamp(1.0 - eps, 1.0 + eps) * adv)
}

pub fn critic_loss(predicted: &[f64], targets: &[f64]) -> Result<f64> {
    if predicted.is_empty() {
        return Err(Error::contract("empty critic batch"));
    }
    if predicted.len() != targets.len() {
        return Err(Error::Dimension { expected: predicted.len(), got: targets.len() });
    }
    Ok(predicted.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / predicted.len() as f64)
}

/// Running mean and variance (parallel Welford merge).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub count: f64,
    pub mean: f64,
    pub m2: f64,
}

impl RunningStats {
    pub fn update(&mut self, xs: &[f64]) {
        if xs.is_empty() {
            return;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let m2: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
        let total = self.count + n;
        let d = mean - self.mean;
        self.mean += d * n / total;
        self.m2 += m2 + d * d * self.count * n / total;
        self.count = total;
    }

    pub fn std(&self) -> f64 {
        if self.count < 2.0 {
            1.0
        } else {
            (self.m2 / self.count).sqrt().max(1e-6)
        }
    }
}

/// Summary of one actor minibatch pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorBatch {
    /// Gradient of the loss `−(L^CLIP + c₂·H)` over `policy.params()`.
    pub grad: Vec<f64>,
    pub surrogate: f64,
    pub clip_fraction: f64,
    pub kl: f64,
}

/// Clipped-surrogate loss gradient of one actor over a minibatch.
pub fn actor_minibatch_grad(
    policy: &GaussianPolicy,
    observations: &[&[f64]],
    actions: &[&[f64]],
    old_log_probs: &[f64],
    advantages: &[f64],
    clip_eps: f64,
    c2: f64,
) -> Result<ActorBatch> {
    let b = observations.len();
    if b == 0 || actions.len() != b || old_log_probs.len() != b || advantages.len() != b {
        return Err(Error::contract("actor minibatch fields must be non-empty and aligned"));
    }
    let n_net = policy.net.num_params();
    let mut grad = vec![0.0; policy.num_params()];
    let (mut surrogate, mut clipped, mut kl) = (0.0, 0.0, 0.0);
    let inv_b = 1.0 / b as f64;
    for i in 0..b {
        let cache = policy.net.forward_cached(observations[i])?;
        let mean = cache.output();
        let logp = policy.log_prob_given_mean(mean, actions[i]);
        let log_ratio = logp - old_log_probs[i];
        let ratio = log_ratio.exp();
        let a = advantages[i];
        surrogate += ppo_clip_term(ratio, a, clip_eps) * inv_b;
        kl += ((ratio - 1.0) - log_ratio) * inv_b;
        if (ratio - 1.0).abs() > clip_eps {
            clipped += inv_b;
        }
        // The unclipped branch carries gradient only when it is the minimum.
        if ratio * a <= ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * a {
            let scale = -ratio * a * inv_b;
            let (dm, ds) = policy.log_prob_grads(mean, actions[i]);
            let upstream: Vec<f64> = dm.iter().map(|g| g * scale).collect();
            policy.net.backward(&cache, &upstream, &mut grad[..n_net])?;
            grad[n_net..].iter_mut().zip(&ds).for_each(|(g, d)| *g += d * scale);
        }
    }
    // dH/dlog_std = 1 per dimension.
    grad[n_net..].iter_mut().for_each(|g| *g -= c2);
    Ok(ActorBatch { grad, surrogate, clip_fraction: clipped, kl })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappoModel {
    pub mode: TrainMode,
    pub n_agents: usize,
    pub actors: Vec<GaussianPolicy>,
    pub critic: DenseNet,
    pub actor_opt: Vec<AdamState>,
    pub critic_opt: AdamState,
    pub value_stats: RunningStats,
    pub value_norm: bool,
    /// Meters per unit of actor output along x, y, z.
    pub action_scale: [f64; 3],
}

impl MappoModel {
    /// Fresh model sized for `env`; weights drawn from the seed's policy stream.
    pub fn new(env: &ReflectorEnv, hp: &Hyperparameters, mode: TrainMode, seed: u64) -> Result<Self> {
        hp.validate()?;
        let cfg = env.config();
        let l = cfg.n_agents;
        let mut rng = stream_rng(seed, streams::POLICY);
        let h = hp.hidden;
        let action_scale = env.normalizer().half_extent().to_array();
        let std0 = hp.init_std_frac * cfg.delta_max_m;
        let with_std = |net: DenseNet| -> Result<GaussianPolicy> {
            let mut p = GaussianPolicy::new(net, 1.0)?;
            for (i, ls) in p.log_std.iter_mut().enumerate() {
                *ls = (std0 / action_scale[i % 3]).ln();
            }
            Ok(p)
        };
        let actors = match mode {
            TrainMode::SingleAgent => {
                vec![with_std(DenseNet::mlp(&[cfg.global_state_dim(), h, h, 3 * l], 0.01, &mut rng)?)?]
            }
            _ => (0..l)
                .map(|_| with_std(DenseNet::mlp(&[OBS_DIM, h, h, 3], 0.01, &mut rng)?))
                .collect::<Result<Vec<_>>>()?,
        };
        let critic = DenseNet::mlp(&[cfg.global_state_dim(), h, h, 1], 1.0, &mut rng)?;
        let actor_opt = actors.iter().map(|a| AdamState::new(a.num_params(), hp.lr)).collect();
        let critic_opt = AdamState::new(critic.num_params(), hp.lr);
        Ok(MappoModel {
            mode,
            n_agents: l,
            actors,
            critic,
            actor_opt,
            critic_opt,
            value_stats: RunningStats::default(),
            value_norm: hp.value_norm,
            action_scale,
        })
    }

    fn value_scale(&self) -> (f64, f64) {
        if self.value_norm {
            (self.value_stats.mean, self.value_stats.std())
        } else {
            (0.0, 1.0)
        }
    }

    /// Critic estimate in reward units.
    pub fn value(&self, global_state: &[f64]) -> Result<f64> {
        let (mu, sigma) = self.value_scale();
        Ok(self.critic.forward(global_state)?[0] * sigma + mu)
    }

    /// Per-actor inputs for the current environment state.
    pub fn actor_inputs(&self, env: &ReflectorEnv) -> Result<Vec<Vec<f64>>> {
        match self.mode {
            TrainMode::SingleAgent => Ok(vec![env.observed_state_vector()]),
            _ => {
                if env.config().n_agents != self.actors.len() {
                    return Err(Error::Dimension { expected: self.actors.len(), got: env.config().n_agents });
                }
                Ok(env.observe_all().into_iter().map(|o| o.0.to_vec()).collect())
            }
        }
    }

    /// Splits raw actor outputs into per-agent displacements.
    pub fn displacements(&self, raw: &[Vec<f64>]) -> Vec<Vec3> {
        let s = self.action_scale;
        raw.iter()
            .flat_map(|a| a.chunks(3).map(|c| Vec3::new(c[0] * s[0], c[1] * s[1], c[2] * s[2])).collect::<Vec<_>>())
            .collect()
    }

    /// Stochastic actions with their log densities.
    pub fn sample(&self, inputs: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let mut acts = Vec::with_capacity(inputs.len());
        let mut lps = Vec::with_capacity(inputs.len());
        for (p, x) in self.actors.iter().zip(inputs) {
            let (a, lp) = p.sample(x, rng)?;
            acts.push(a);
            lps.push(lp);
        }
        Ok((acts, lps))
    }

    /// Mean actions; decentralized execution uses only the actors.
    pub fn act_deterministic(&self, env: &ReflectorEnv) -> Result<Vec<Vec3>> {
        let inputs = self.actor_inputs(env)?;
        let raw = self.actors.iter().zip(&inputs).map(|(p, x)| p.mean(x)).collect::<Result<Vec<_>>>()?;
        Ok(self.displacements(&raw))
    }

    pub fn mean_entropy(&self) -> f64 {
        self.actors.iter().map(|a| a.entropy()).sum::<f64>() / self.actors.len() as f64
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let ck = Checkpoint { version: CHECKPOINT_VERSION, model: self.clone() };
        let text = serde_json::to_string(&ck).map_err(|e| Error::Checkpoint(e.to_string()))?;
        std::fs::write(path.as_ref(), text).map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let p = path.as_ref();
        if !p.exists() {
            return Err(Error::MissingCheckpoint(p.display().to_string()));
        }
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {}", ck.version)));
        }
        Ok(ck.model)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    model: MappoModel,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateStats {
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub kl: f64,
    pub minibatches: usize,
    pub stopped_early: bool,
    /// 1 − Var(returns − values) / Var(returns), with the rollout-time values.
    pub explained_variance: f64,
}

fn explained_variance(targets: &[f64], preds: &[f64]) -> f64 {
    let var = |x: &mut dyn Iterator<Item = f64>, n: f64| {
        let v: Vec<f64> = x.collect();
        let m = v.iter().sum::<f64>() / n;
        v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / n
    };
    let n = targets.len() as f64;
    let vt = var(&mut targets.iter().copied(), n);
    if vt == 0.0 {
        return 0.0;
    }
    1.0 - var(&mut targets.iter().zip(preds).map(|(t, p)| t - p), n) / vt
}

/// One PPO update over a full rollout. `bootstrap` is the critic value of
/// the state following the last transition (ignored if that one is done).
pub fn mappo_update(
    model: &mut MappoModel,
    buffer: &TrajectoryBuffer,
    bootstrap: f64,
    hp: &Hyperparameters,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateStats> {
    if buffer.len() < hp.minibatch {
        return Err(Error::BufferUnderfull { have: buffer.len(), need: hp.minibatch });
    }
    let items = buffer.items();
    if items[0].observations.len() != model.actors.len() {
        return Err(Error::Dimension { expected: model.actors.len(), got: items[0].observations.len() });
    }
    let rewards: Vec<f64> = items.iter().map(|t| t.reward).collect();
    let values: Vec<f64> = items.iter().map(|t| t.value).collect();
    let dones: Vec<bool> = items.iter().map(|t| t.done).collect();
    let (adv, returns) = compute_gae(&rewards, &values, &dones, bootstrap, hp.gamma, hp.lambda_gae)?;
    if model.value_norm {
        model.value_stats.update(&returns);
    }
    let (mu, sigma) = model.value_scale();
    let targets: Vec<f64> = returns.iter().map(|r| (r - mu) / sigma).collect();

    let n_actors = model.actors.len() as f64;
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut stats = UpdateStats { explained_variance: explained_variance(&returns, &values), ..UpdateStats::default() };
    'epochs: for _ in 0..hp.epochs_per_update {
        order.shuffle(rng);
        for chunk in order.chunks(hp.minibatch) {
            if chunk.len() < 2 {
                continue;
            }
            let mb_adv = normalize_advantages(&chunk.iter().map(|&i| adv[i]).collect::<Vec<_>>())?;
            let mut mb_kl = 0.0;
            for (k, actor) in model.actors.iter_mut().enumerate() {
                let obs: Vec<&[f64]> = chunk.iter().map(|&i| items[i].observations[k].as_slice()).collect();
                let act: Vec<&[f64]> = chunk.iter().map(|&i| items[i].actions[k].as_slice()).collect();
                let old: Vec<f64> = chunk.iter().map(|&i| items[i].log_probs[k]).collect();
                let batch = actor_minibatch_grad(actor, &obs, &act, &old, &mb_adv, hp.clip_eps, hp.c2)?;
                let mut params = actor.params();
                adam_step(&mut params, &batch.grad, &mut model.actor_opt[k])?;
                actor.set_params(&params)?;
                for ls in actor.log_std.iter_mut() {
                    *ls = ls.clamp(-20.0, 5.0);
                }
                stats.actor_loss -= batch.surrogate / n_actors;
                stats.clip_fraction += batch.clip_fraction / n_actors;
                mb_kl += batch.kl / n_actors;
            }
            stats.kl += mb_kl;
            stats.entropy += model.mean_entropy();

            let mut cgrad = vec![0.0; model.critic.num_params()];
            let mut preds = Vec::with_capacity(chunk.len());
            let scale = 2.0 * hp.c1 / chunk.len() as f64;
            for &i in chunk {
                let cache = model.critic.forward_cached(&items[i].global_state)?;
                let v = cache.output()[0];
                preds.push(v);
                model.critic.backward(&cache, &[scale * (v - targets[i])], &mut cgrad)?;
            }
            let tg: Vec<f64> = chunk.iter().map(|&i| targets[i]).collect();
            stats.critic_loss += critic_loss(&preds, &tg)?;
            adam_step(&mut model.critic.params, &cgrad, &mut model.critic_opt)?;
            stats.minibatches += 1;
            if mb_kl > hp.kl_stop {
                stats.stopped_early = true;
                break 'epochs;
            }
        }
    }
    let m = stats.minibatches.max(1) as f64;
    stats.actor_loss /= m;
    stats.critic_loss /= m;
    stats.entropy /= m;
    stats.clip_fraction /= m;
    stats.kl /= m;
    Ok(stats)
}

/// One row of the learning curve.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub mean_reward: f64,
    /// Statistics of the most recent update, if any has run.
    pub update: Option<UpdateStats>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearningCurve {
    pub episodes: Vec<EpisodeRecord>,
}

impl LearningCurve {
    pub fn rewards(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.mean_reward).collect()
    }

    /// Mean reward over episodes `[from, to)`.
    pub fn window_mean(&self, from: usize, to: usize) -> f64 {
        let r = &self.rewards()[from.min(self.episodes.len())..to.min(self.episodes.len())];
        r.iter().sum::<f64>() / r.len().max(1) as f64
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("episode,mean_reward,actor_loss,critic_loss,entropy,clip_fraction,kl\n");
        for e in &self.episodes {
            let _ = write!(s, "{},{:.6}", e.episode, e.mean_reward);
            match &e.update {
                Some(u) => {
                    let _ = writeln!(
                        s,
                        ",{:.6},{:.6},{:.6},{:.6},{:.6}",
                        u.actor_loss, u.critic_loss, u.entropy, u.clip_fraction, u.kl
                    );
                }
                None => s.push_str(",,,,,\n"),
            }
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_csv()).map_err(|e| Error::io(path.as_ref(), e))
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Directory receiving `checkpoint_<episode>.json` files.
    pub checkpoint_dir: Option<PathBuf>,
    /// Episodes between checkpoints; 0 disables periodic saves.
    pub checkpoint_every: usize,
}

/// Collects `hp.episodes` episodes, updating whenever the buffer fills.
pub fn train(
    env: &mut ReflectorEnv,
    model: &mut MappoModel,
    hp: &Hyperparameters,
    seed: u64,
    opts: &TrainOptions,
) -> Result<LearningCurve> {
    hp.validate()?;
    if model.mode != TrainMode::SingleAgent && env.config().n_agents != model.actors.len() {
        return Err(Error::Dimension { expected: model.actors.len(), got: env.config().n_agents });
    }
    if env.config().control != model.mode.control() {
        return Err(Error::config("environment control mode does not match the training mode"));
    }
    let mut policy_rng = stream_rng(seed, streams::EXPLORE);
    let mut shuffle_rng = stream_rng(seed, streams::SHUFFLE);
    let mut buffer = TrajectoryBuffer::new(hp.buffer);
    let mut curve = LearningCurve::default();
    let mut last_update: Option<UpdateStats> = None;
    for episode in 0..hp.episodes {
        env.reset();
        let mut total = 0.0;
        let mut steps = 0usize;
        loop {
            let gs = env.global_state_vector();
            let inputs = model.actor_inputs(env)?;
            let value = model.value(&gs)?;
            let (actions, log_probs) = model.sample(&inputs, &mut policy_rng)?;
            let result = env.step(&model.displacements(&actions))?;
            total += result.reward;
            steps += 1;
            buffer.push(Transition {
                global_state: gs,
                observations: inputs,
                actions,
                log_probs,
                reward: result.reward,
                value,
                done: result.done,
            })?;
            if buffer.is_full() {
                let bootstrap = if result.done { 0.0 } else { model.value(&env.global_state_vector())? };
                last_update = Some(mappo_update(model, &buffer, bootstrap, hp, &mut shuffle_rng)?);
                buffer.clear();
            }
            if result.done {
                break;
            }
        }
        curve.episodes.push(EpisodeRecord { episode, mean_reward: total / steps as f64, update: last_update.clone() });
        if let Some(dir) = &opts.checkpoint_dir {
            if opts.checkpoint_every > 0 && (episode + 1) % opts.checkpoint_every == 0 {
                model.save(dir.join(format!("checkpoint_{:05}.json", episode + 1)))?;
            }
        }
    }
    Ok(curve)
}

/// Uniform random displacements within the action box (untrained reference).
pub fn random_actions<R: Rng + ?Sized>(n_agents: usize, delta_max: f64, rng: &mut R) -> Vec<Vec3> {
    (0..n_agents)
        .map(|_| {
            Vec3::new(
                rng.random_range(-delta_max..=delta_max),
                rng.random_range(-delta_max..=delta_max),
                rng.random_range(-delta_max..=delta_max),
            )
        })
        .collect()
}
