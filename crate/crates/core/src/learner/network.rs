//! Actor-critic network over flat parameter storage.
//!
//! Topology: an LSTM consumes the human sequence (farthest first); a
//! three-layer tanh MLP consumes the lidar ring; their outputs are
//! concatenated with the goal and time features and passed through a
//! two-layer tanh trunk shared by a linear actor head (Gaussian mean, plus a
//! state-independent log standard deviation) and a linear critic head.
//!
//! Dense weights are stored input-major (`w[i * out + o]`), so forward
//! passes are axpy loops and input gradients are dot products.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::features::{Features, EXTRA_FEATURES, HUMAN_FEATURES};
use super::LearnerError;
use crate::sensing::{Observation, NUM_BEAMS};
use crate::sim::{Action, MAX_ANGULAR_VELOCITY, MAX_LINEAR_VELOCITY};

pub const ACTION_DIM: usize = 2;

/// Uniform-init gain for the tanh layers, giving weight variance `2 / fan_in`.
const HIDDEN_GAIN: f64 = 2.449_489_742_783_178;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub human_features: usize,
    pub lstm_hidden: usize,
    pub lidar_inputs: usize,
    pub lidar_widths: [usize; 3],
    pub merge_widths: [usize; 2],
    pub extra_features: usize,
    pub init_log_std: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            human_features: HUMAN_FEATURES,
            lstm_hidden: 64,
            lidar_inputs: NUM_BEAMS,
            lidar_widths: [128, 64, 64],
            merge_widths: [128, 128],
            extra_features: EXTRA_FEATURES,
            init_log_std: -0.5,
        }
    }
}

impl NetConfig {
    /// Every hidden width set to `width`; used for quick checks.
    pub fn uniform(width: usize) -> Self {
        Self {
            lstm_hidden: width,
            lidar_widths: [width; 3],
            merge_widths: [width; 2],
            ..Self::default()
        }
    }

    fn merge_inputs(&self) -> usize {
        self.lstm_hidden + self.lidar_widths[2] + self.extra_features
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Dense {
    w: usize,
    b: usize,
    inp: usize,
    out: usize,
}

impl Dense {
    fn forward(&self, p: &[f64], x: &[f64], y: &mut Vec<f64>) {
        y.clear();
        y.extend_from_slice(&p[self.b..self.b + self.out]);
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                axpy(xi, &p[self.w + i * self.out..self.w + (i + 1) * self.out], y);
            }
        }
    }

    /// Accumulate parameter gradients for pre-activation gradient `dy`, and
    /// write the input gradient into `dx` when requested.
    fn backward(&self, p: &[f64], g: &mut [f64], x: &[f64], dy: &[f64], dx: Option<&mut Vec<f64>>) {
        axpy(1.0, dy, &mut g[self.b..self.b + self.out]);
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                axpy(xi, dy, &mut g[self.w + i * self.out..self.w + (i + 1) * self.out]);
            }
        }
        if let Some(dx) = dx {
            dx.clear();
            dx.extend((0..self.inp).map(|i| dot(&p[self.w + i * self.out..self.w + (i + 1) * self.out], dy)));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    lstm_wx: usize,
    lstm_wh: usize,
    lstm_b: usize,
    lidar: [Dense; 3],
    merge: [Dense; 2],
    actor: Dense,
    log_std: usize,
    critic: Dense,
    total: usize,
}

impl Layout {
    fn new(cfg: &NetConfig) -> Self {
        let mut total = 0usize;
        let mut block = |n: usize| {
            let at = total;
            total += n;
            at
        };
        let h4 = 4 * cfg.lstm_hidden;
        let lstm_wx = block(cfg.human_features * h4);
        let lstm_wh = block(cfg.lstm_hidden * h4);
        let lstm_b = block(h4);
        let mut dense = |inp: usize, out: usize| {
            let w = block(inp * out);
            let b = block(out);
            Dense { w, b, inp, out }
        };
        let lw = cfg.lidar_widths;
        let lidar = [dense(cfg.lidar_inputs, lw[0]), dense(lw[0], lw[1]), dense(lw[1], lw[2])];
        let mw = cfg.merge_widths;
        let merge = [dense(cfg.merge_inputs(), mw[0]), dense(mw[0], mw[1])];
        let actor = dense(mw[1], ACTION_DIM);
        let critic = dense(mw[1], 1);
        let log_std = block(ACTION_DIM);
        Self {
            lstm_wx,
            lstm_wh,
            lstm_b,
            lidar,
            merge,
            actor,
            log_std,
            critic,
            total,
        }
    }
}

/// Diagonal Gaussian over the pre-squash action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagGaussian {
    pub mean: [f64; ACTION_DIM],
    pub log_std: [f64; ACTION_DIM],
}

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

impl DiagGaussian {
    pub fn log_prob(&self, u: &[f64; ACTION_DIM]) -> f64 {
        (0..ACTION_DIM)
            .map(|k| {
                let z = (u[k] - self.mean[k]) * (-self.log_std[k]).exp();
                -0.5 * z * z - self.log_std[k] - HALF_LN_2PI
            })
            .sum()
    }

    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|s| s + 0.5 + HALF_LN_2PI).sum()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> [f64; ACTION_DIM] {
        let mut u = [0.0; ACTION_DIM];
        for k in 0..ACTION_DIM {
            let n: f64 = rng.sample(StandardNormal);
            u[k] = self.mean[k] + self.log_std[k].exp() * n;
        }
        u
    }
}

/// Map a pre-squash sample into the robot's action bounds with `tanh`.
pub fn squash(u: &[f64; ACTION_DIM]) -> Action {
    let v = 0.5 * (u[0].tanh() + 1.0) * MAX_LINEAR_VELOCITY;
    let w = u[1].tanh() * MAX_ANGULAR_VELOCITY;
    Action::new(
        v.clamp(0.0, MAX_LINEAR_VELOCITY),
        w.clamp(-MAX_ANGULAR_VELOCITY, MAX_ANGULAR_VELOCITY),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyOutput {
    pub dist: DiagGaussian,
    pub value: f64,
}

#[derive(Debug, Clone, Default)]
struct LstmStep {
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates laid out `[i | f | g | o]`.
    gates: Vec<f64>,
    c: Vec<f64>,
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    lstm: Vec<LstmStep>,
    lidar: [Vec<f64>; 3],
    merge_in: Vec<f64>,
    merge: [Vec<f64>; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNetwork {
    cfg: NetConfig,
    params: Vec<f64>,
    #[serde(skip)]
    layout: Option<Layout>,
}

impl PolicyNetwork {
    /// Scaled-uniform initialisation; the actor head starts near zero and the
    /// LSTM forget gate is biased open.
    pub fn new(cfg: NetConfig, seed: u64) -> Self {
        let layout = Layout::new(&cfg);
        let mut params = vec![0.0; layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |params: &mut [f64], at: usize, n: usize, fan_in: usize, gain: f64| {
            let bound = gain / (fan_in as f64).sqrt();
            for p in &mut params[at..at + n] {
                *p = rng.random_range(-bound..bound);
            }
        };
        let h = cfg.lstm_hidden;
        fill(
            &mut params,
            layout.lstm_wx,
            cfg.human_features * 4 * h,
            cfg.human_features,
            1.0,
        );
        fill(&mut params, layout.lstm_wh, h * 4 * h, h, 1.0);
        for d in layout.lidar.iter().chain(&layout.merge) {
            fill(&mut params, d.w, d.inp * d.out, d.inp, HIDDEN_GAIN);
        }
        fill(
            &mut params,
            layout.actor.w,
            layout.actor.inp * ACTION_DIM,
            layout.actor.inp,
            0.01,
        );
        fill(&mut params, layout.critic.w, layout.critic.inp, layout.critic.inp, 1.0);
        for b in &mut params[layout.lstm_b + h..layout.lstm_b + 2 * h] {
            *b = 1.0;
        }
        for s in &mut params[layout.log_std..layout.log_std + ACTION_DIM] {
            *s = cfg.init_log_std;
        }
        Self {
            cfg,
            params,
            layout: Some(layout),
        }
    }

    /// Network whose parameters are all zero.
    pub fn zeros(cfg: NetConfig) -> Self {
        let mut net = Self::new(cfg, 0);
        net.params.iter_mut().for_each(|p| *p = 0.0);
        net
    }

    pub fn from_params(cfg: NetConfig, params: Vec<f64>) -> Result<Self, LearnerError> {
        let layout = Layout::new(&cfg);
        if params.len() != layout.total {
            return Err(LearnerError::ShapeMismatch(format!(
                "expected {} parameters for this configuration, found {}",
                layout.total,
                params.len()
            )));
        }
        Ok(Self {
            cfg,
            params,
            layout: Some(layout),
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn layout(&self) -> &Layout {
        self.layout.as_ref().expect("layout is rebuilt on construction")
    }

    /// Restore the derived layout after deserialisation.
    pub fn rebuild(mut self) -> Result<Self, LearnerError> {
        let params = std::mem::take(&mut self.params);
        Self::from_params(self.cfg, params)
    }

    /// Index range of the critic head parameters.
    pub fn critic_params(&self) -> std::ops::Range<usize> {
        let c = self.layout().critic;
        c.w..c.b + c.out
    }

    /// Index range of the actor head (mean weights and bias, log-std).
    pub fn actor_params(&self) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let l = self.layout();
        (l.actor.w..l.actor.b + l.actor.out, l.log_std..l.log_std + ACTION_DIM)
    }

    pub fn log_std(&self) -> [f64; ACTION_DIM] {
        let at = self.layout().log_std;
        [self.params[at], self.params[at + 1]]
    }

    pub fn log_std_index(&self) -> usize {
        self.layout().log_std
    }

    pub fn evaluate(&self, obs: &Observation) -> Result<PolicyOutput, LearnerError> {
        self.forward(&super::features::encode(obs))
    }

    /// Deterministic action: squashed distribution mean.
    pub fn act_deterministic(&self, obs: &Observation) -> Result<Action, LearnerError> {
        Ok(squash(&self.evaluate(obs)?.dist.mean))
    }

    pub fn check_input_shape(&self, f: &Features) -> Result<(), LearnerError> {
        if f.lidar.len() != self.cfg.lidar_inputs {
            return Err(LearnerError::ShapeMismatch(format!(
                "network expects {} lidar beams, observation has {}",
                self.cfg.lidar_inputs,
                f.lidar.len()
            )));
        }
        if self.cfg.human_features != HUMAN_FEATURES || self.cfg.extra_features != EXTRA_FEATURES {
            return Err(LearnerError::ShapeMismatch(format!(
                "network expects {}/{} human/extra features, observations carry {HUMAN_FEATURES}/{EXTRA_FEATURES}",
                self.cfg.human_features, self.cfg.extra_features
            )));
        }
        Ok(())
    }

    pub fn forward(&self, f: &Features) -> Result<PolicyOutput, LearnerError> {
        self.forward_cached(f).map(|(out, _)| out)
    }

    pub fn forward_cached(&self, f: &Features) -> Result<(PolicyOutput, ForwardCache), LearnerError> {
        self.check_input_shape(f)?;
        let l = self.layout();
        let p = &self.params;
        let h = self.cfg.lstm_hidden;
        let mut cache = ForwardCache::default();

        let mut hs = vec![0.0; h];
        let mut cs = vec![0.0; h];
        let mut pre = Vec::with_capacity(4 * h);
        for x in &f.humans {
            pre.clear();
            pre.extend_from_slice(&p[l.lstm_b..l.lstm_b + 4 * h]);
            for (j, &xj) in x.iter().enumerate() {
                axpy(xj, &p[l.lstm_wx + j * 4 * h..l.lstm_wx + (j + 1) * 4 * h], &mut pre);
            }
            for (k, &hk) in hs.iter().enumerate() {
                axpy(hk, &p[l.lstm_wh + k * 4 * h..l.lstm_wh + (k + 1) * 4 * h], &mut pre);
            }
            let mut gates = pre.clone();
            for (idx, g) in gates.iter_mut().enumerate() {
                *g = if (2 * h..3 * h).contains(&idx) {
                    g.tanh()
                } else {
                    sigmoid(*g)
                };
            }
            let c: Vec<f64> = (0..h)
                .map(|k| gates[h + k] * cs[k] + gates[k] * gates[2 * h + k])
                .collect();
            let h_new: Vec<f64> = (0..h).map(|k| gates[3 * h + k] * c[k].tanh()).collect();
            cache.lstm.push(LstmStep {
                h_prev: std::mem::replace(&mut hs, h_new),
                c_prev: std::mem::replace(&mut cs, c.clone()),
                gates,
                c,
            });
        }

        let mut x = f.lidar.clone();
        for (k, d) in l.lidar.iter().enumerate() {
            let mut y = Vec::new();
            d.forward(p, &x, &mut y);
            y.iter_mut().for_each(|v| *v = v.tanh());
            cache.lidar[k] = y.clone();
            x = y;
        }

        let mut merge_in = hs;
        merge_in.extend_from_slice(&x);
        merge_in.extend_from_slice(&f.extra);
        let mut x = merge_in.clone();
        cache.merge_in = merge_in;
        for (k, d) in l.merge.iter().enumerate() {
            let mut y = Vec::new();
            d.forward(p, &x, &mut y);
            y.iter_mut().for_each(|v| *v = v.tanh());
            cache.merge[k] = y.clone();
            x = y;
        }

        let mut mean = Vec::new();
        l.actor.forward(p, &x, &mut mean);
        let mut value = Vec::new();
        l.critic.forward(p, &x, &mut value);
        let out = PolicyOutput {
            dist: DiagGaussian {
                mean: [mean[0], mean[1]],
                log_std: [p[l.log_std], p[l.log_std + 1]],
            },
            value: value[0],
        };
        if !(out.value.is_finite() && out.dist.mean.iter().all(|m| m.is_finite())) {
            return Err(LearnerError::NonFinite(diagnose(&cache, &out)));
        }
        Ok((out, cache))
    }

    /// Backpropagate output gradients `d_mean` and `d_value` through the
    /// cached forward pass, accumulating into `grad`. The log-std gradient is
    /// not touched here; callers add it at [`Self::log_std_index`].
    pub fn backward(
        &self,
        f: &Features,
        cache: &ForwardCache,
        d_mean: [f64; ACTION_DIM],
        d_value: f64,
        grad: &mut [f64],
    ) {
        let l = self.layout();
        let p = &self.params;
        let h = self.cfg.lstm_hidden;
        let trunk = &cache.merge[1];

        let mut d_trunk = Vec::new();
        l.actor.backward(p, grad, trunk, &d_mean, Some(&mut d_trunk));
        let mut d_from_critic = Vec::new();
        l.critic.backward(p, grad, trunk, &[d_value], Some(&mut d_from_critic));
        axpy(1.0, &d_from_critic, &mut d_trunk);

        let mut dy = d_trunk;
        for k in (0..2).rev() {
            let y = &cache.merge[k];
            for (g, a) in dy.iter_mut().zip(y) {
                *g *= 1.0 - a * a;
            }
            let x = if k == 0 { &cache.merge_in } else { &cache.merge[0] };
            let mut dx = Vec::new();
            l.merge[k].backward(p, grad, x, &dy, Some(&mut dx));
            dy = dx;
        }
        let d_merge_in = dy;
        let mut dh: Vec<f64> = d_merge_in[..h].to_vec();

        let mut dy = d_merge_in[h..h + self.cfg.lidar_widths[2]].to_vec();
        for k in (0..3).rev() {
            let y = &cache.lidar[k];
            for (g, a) in dy.iter_mut().zip(y) {
                *g *= 1.0 - a * a;
            }
            if k == 0 {
                l.lidar[0].backward(p, grad, &f.lidar, &dy, None);
            } else {
                let mut dx = Vec::new();
                l.lidar[k].backward(p, grad, &cache.lidar[k - 1], &dy, Some(&mut dx));
                dy = dx;
            }
        }

        let mut dc = vec![0.0; h];
        let mut da = vec![0.0; 4 * h];
        for (t, step) in cache.lstm.iter().enumerate().rev() {
            let g = &step.gates;
            for k in 0..h {
                let (i, fg, gg, o) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
                let tc = step.c[k].tanh();
                let d_o = dh[k] * tc;
                let dck = dc[k] + dh[k] * o * (1.0 - tc * tc);
                da[k] = dck * gg * i * (1.0 - i);
                da[h + k] = dck * step.c_prev[k] * fg * (1.0 - fg);
                da[2 * h + k] = dck * i * (1.0 - gg * gg);
                da[3 * h + k] = d_o * o * (1.0 - o);
                dc[k] = dck * fg;
            }
            axpy(1.0, &da, &mut grad[l.lstm_b..l.lstm_b + 4 * h]);
            for (j, &xj) in f.humans[t].iter().enumerate() {
                if xj != 0.0 {
                    axpy(xj, &da, &mut grad[l.lstm_wx + j * 4 * h..l.lstm_wx + (j + 1) * 4 * h]);
                }
            }
            for (k, &hk) in step.h_prev.iter().enumerate() {
                if hk != 0.0 {
                    axpy(hk, &da, &mut grad[l.lstm_wh + k * 4 * h..l.lstm_wh + (k + 1) * 4 * h]);
                }
            }
            for (k, d) in dh.iter_mut().enumerate() {
                *d = dot(&p[l.lstm_wh + k * 4 * h..l.lstm_wh + (k + 1) * 4 * h], &da);
            }
        }
    }
}

fn diagnose(cache: &ForwardCache, out: &PolicyOutput) -> String {
    let bad = |v: &[f64]| v.iter().any(|x| !x.is_finite());
    let stage = if cache.lstm.iter().any(|s| bad(&s.c) || bad(&s.gates)) {
        "lstm"
    } else if cache.lidar.iter().any(|v| bad(v)) {
        "lidar branch"
    } else if cache.merge.iter().any(|v| bad(v)) || bad(&cache.merge_in) {
        "merge trunk"
    } else {
        "output heads"
    };
    format!(
        "non-finite activation first seen in {stage} (mean={:?}, value={})",
        out.dist.mean, out.value
    )
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Dot product with eight independent accumulators.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::features::encode;
    use crate::sensing::{LidarScan, SemanticHumanState, SemanticRobotState};
    use crate::Vec2;

    fn obs(n_humans: usize) -> Observation {
        Observation {
            lidar: LidarScan::empty(),
            humans: (0..n_humans)
                .map(|i| SemanticHumanState {
                    rel_position: Vec2::new(1.0 + i as f64 * 0.3, -0.5),
                    body_radius: 0.3,
                    distance: 1.2,
                    zone_radius: 1.0,
                    clearance: 1.3,
                    class_id: (i % 3) as u8,
                    pedestrian_id: i as u32,
                })
                .collect(),
            robot: SemanticRobotState {
                goal_distance: 5.0,
                position: Vec2::new(2.0, 3.0),
                v_linear: 0.3,
                v_angular: 0.1,
                radius: 0.3,
            },
            goal_in_robot_frame: Vec2::new(4.0, 3.0),
            time_fraction: 0.25,
        }
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = PolicyNetwork::zeros(NetConfig::default());
        let out = net.evaluate(&obs(4)).unwrap();
        assert_eq!(out.value, 0.0);
        assert_eq!(out.dist.mean, [0.0, 0.0]);
    }

    #[test]
    fn shapes_independent_of_human_count() {
        let net = PolicyNetwork::new(NetConfig::default(), 3);
        for n in [0, 10] {
            let out = net.evaluate(&obs(n)).unwrap();
            assert!(out.value.is_finite());
            assert!(out.dist.mean.iter().all(|m| m.is_finite()));
        }
    }

    #[test]
    fn squash_respects_bounds() {
        for u in [[-50.0, -50.0], [50.0, 50.0], [0.0, 0.0], [0.3, -1.2]] {
            assert!(squash(&u).is_within_bounds());
        }
        assert_eq!(squash(&[0.0, 0.0]), Action::new(0.3, 0.0));
    }

    #[test]
    fn wrong_lidar_length_is_shape_error() {
        let net = PolicyNetwork::new(NetConfig::default(), 1);
        let mut f = encode(&obs(1));
        f.lidar.pop();
        assert!(matches!(net.forward(&f), Err(LearnerError::ShapeMismatch(_))));
    }

    #[test]
    fn non_finite_weights_reported() {
        let mut net = PolicyNetwork::new(NetConfig::uniform(8), 1);
        let at = net.critic_params().start;
        net.params_mut()[at] = f64::NAN;
        assert!(matches!(net.evaluate(&obs(2)), Err(LearnerError::NonFinite(_))));
    }

    #[test]
    fn heads_are_disjoint() {
        let net = PolicyNetwork::new(NetConfig::uniform(8), 1);
        let critic = net.critic_params();
        let (actor, log_std) = net.actor_params();
        assert!(critic.end <= actor.start || actor.end <= critic.start);
        assert!(critic.end <= log_std.start || log_std.end <= critic.start);
    }

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..37).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..37).map(|i| 1.0 - i as f64 * 0.1).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-9);
    }
}
