//! Built-in trainable scorer: a small text encoder over prompt segments with
//! either a next-token head or per-action heads, plus a value head.

use std::collections::HashMap;
use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::backend::{Evaluation, ScorerBackend, Upstream};
use super::dist::{PolicyMode, LOGPROB_FLOOR};
use super::params::{ParamLayout, ParamManifest};
use super::vocab::{tokenize, Vocab};
use super::PolicyError;
use crate::env::seed::splitmix64;
use crate::prompt::{ACTIONS_HEADER, GOAL_HEADER};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelDims {
    pub embed: usize,
    pub hidden: usize,
    pub pair_buckets: usize,
    pub max_prefix: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            embed: 32,
            hidden: 64,
            pair_buckets: 4096,
            max_prefix: 4,
        }
    }
}

impl ModelDims {
    pub fn tiny() -> Self {
        Self {
            embed: 6,
            hidden: 7,
            pair_buckets: 31,
            max_prefix: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub mode: PolicyMode,
    pub dims: ModelDims,
    /// Output heads in action-heads mode.
    pub num_actions: usize,
    pub vocab: Vocab,
    pub init_seed: u64,
}

const ROLE_HEADER: usize = 0;
const ROLE_GOAL: usize = 1;
const ROLE_OBS: usize = 2;
const ROLE_ACTION: usize = 5;
const ROLE_OTHER: usize = 7;
const NUM_ROLES: usize = 8;

const SALT_BIGRAM: u64 = 0x5bd1_e995;
const SALT_SKIP: u64 = 0x1b87_3593;

#[derive(Clone, Debug)]
struct Blocks {
    features: Range<usize>,
    roles: Range<usize>,
    seg_bias: Range<usize>,
    wq: Range<usize>,
    wk: Range<usize>,
    wv: Range<usize>,
    null_k: Range<usize>,
    null_v: Range<usize>,
    overlap: Range<usize>,
    val_w1: Range<usize>,
    val_b1: Range<usize>,
    val_w2: Range<usize>,
    val_b2: Range<usize>,
    head_w1: Range<usize>,
    head_b1: Range<usize>,
    head_w2: Range<usize>,
    head_b2: Range<usize>,
    tok_emb: Range<usize>,
    pos_emb: Range<usize>,
    tok_w1: Range<usize>,
    tok_b1: Range<usize>,
    tok_w2: Range<usize>,
    tok_b2: Range<usize>,
}

/// y = W x + b with W stored row-major (rows = outputs).
fn affine(w: &[f64], b: &[f64], x: &[f64], y: &mut [f64]) {
    let cols = x.len();
    for (i, yi) in y.iter_mut().enumerate() {
        let row = &w[i * cols..(i + 1) * cols];
        *yi = b[i] + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
    }
}

/// dx += W^T dy
fn affine_back_input(w: &[f64], dy: &[f64], dx: &mut [f64]) {
    let cols = dx.len();
    for (i, g) in dy.iter().enumerate() {
        if *g == 0.0 {
            continue;
        }
        let row = &w[i * cols..(i + 1) * cols];
        for (d, a) in dx.iter_mut().zip(row) {
            *d += g * a;
        }
    }
}

/// dW += dy x^T
fn outer_acc(dw: &mut [f64], dy: &[f64], x: &[f64]) {
    let cols = x.len();
    for (i, g) in dy.iter().enumerate() {
        if *g == 0.0 {
            continue;
        }
        let row = &mut dw[i * cols..(i + 1) * cols];
        for (d, a) in row.iter_mut().zip(x) {
            *d += g * a;
        }
    }
}

fn add_to(dst: &mut [f64], src: &[f64], scale: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += scale * s;
    }
}

#[derive(Clone, Debug)]
struct Segment {
    features: Vec<usize>,
    role: usize,
    /// distinct features shared with the goal, observations only
    overlap: f64,
}

#[derive(Clone, Debug)]
struct EncCache {
    segments: Vec<Segment>,
    goal: Option<usize>,
    /// S x d segment vectors
    x: Vec<f64>,
    q: Vec<f64>,
    /// (S + 1) x d, null slot first
    keys: Vec<f64>,
    vals: Vec<f64>,
    alpha: Vec<f64>,
    h: Vec<f64>,
}

#[derive(Clone, Debug)]
struct PrefixCache {
    tokens: Vec<usize>,
    input: Vec<f64>,
    hidden: Vec<f64>,
    logp: Vec<f64>,
}

#[derive(Clone, Debug)]
struct Forward {
    enc: EncCache,
    raw: Vec<f64>,
    value: Option<(f64, Vec<f64>)>,
    head_hidden: Vec<f64>,
    prefixes: Vec<PrefixCache>,
    /// per scored candidate: (prefix index, token id) per token
    token_refs: Vec<Vec<(usize, usize)>>,
}

#[derive(Clone, Debug)]
pub struct BuiltinModel {
    spec: ModelSpec,
    layout: ParamLayout,
    blocks: Blocks,
    params: Vec<f64>,
}

impl BuiltinModel {
    pub fn new(spec: ModelSpec) -> Self {
        let d = spec.dims.embed;
        let hdim = spec.dims.hidden;
        let v = spec.vocab.len();
        let rep = 3 * d;
        let mut layout = ParamLayout::default();
        let mut add = |name: &str, shape: &[usize], used: bool| {
            if used {
                layout.add(name, shape)
            } else {
                0..0
            }
        };
        let heads = spec.mode == PolicyMode::ActionHeads;
        let tokens = spec.mode == PolicyMode::TokenScoring;
        let a = spec.num_actions;
        let blocks = Blocks {
            features: add("enc.features", &[v + spec.dims.pair_buckets, d], true),
            roles: add("enc.roles", &[NUM_ROLES, d], true),
            seg_bias: add("enc.seg_bias", &[d], true),
            wq: add("enc.wq", &[d, d], true),
            wk: add("enc.wk", &[d, d], true),
            wv: add("enc.wv", &[d, d], true),
            null_k: add("enc.null_k", &[d], true),
            null_v: add("enc.null_v", &[d], true),
            overlap: add("enc.overlap", &[1], true),
            val_w1: add("value.w1", &[hdim, rep], true),
            val_b1: add("value.b1", &[hdim], true),
            val_w2: add("value.w2", &[1, hdim], true),
            val_b2: add("value.b2", &[1], true),
            head_w1: add("heads.w1", &[hdim, rep], heads),
            head_b1: add("heads.b1", &[hdim], heads),
            head_w2: add("heads.w2", &[a, hdim], heads),
            head_b2: add("heads.b2", &[a], heads),
            tok_emb: add("tokens.emb", &[v, d], tokens),
            pos_emb: add("tokens.pos", &[spec.dims.max_prefix, d], tokens),
            tok_w1: add("tokens.w1", &[hdim, rep + d], tokens),
            tok_b1: add("tokens.b1", &[hdim], tokens),
            tok_w2: add("tokens.w2", &[v, hdim], tokens),
            tok_b2: add("tokens.b2", &[v], tokens),
        };
        let mut model = Self {
            params: vec![0.0; layout.len()],
            spec,
            layout,
            blocks,
        };
        model.init();
        model
    }

    /// Token-scoring model over `vocab`.
    pub fn token_scorer(vocab: Vocab, dims: ModelDims, seed: u64) -> Self {
        Self::new(ModelSpec {
            mode: PolicyMode::TokenScoring,
            dims,
            num_actions: 0,
            vocab,
            init_seed: seed,
        })
    }

    /// Action-heads model with `num_actions` outputs.
    pub fn action_heads(vocab: Vocab, num_actions: usize, dims: ModelDims, seed: u64) -> Self {
        Self::new(ModelSpec {
            mode: PolicyMode::ActionHeads,
            dims,
            num_actions,
            vocab,
            init_seed: seed,
        })
    }

    fn init(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.init_seed);
        let b = self.blocks.clone();
        let d = self.spec.dims.embed as f64;
        let rep = 3.0 * d;
        let plan: [(&Range<usize>, f64); 16] = [
            (&b.features, 1.0),
            (&b.roles, 0.5),
            (&b.wq, 1.0 / d.sqrt()),
            (&b.wk, 1.0 / d.sqrt()),
            (&b.wv, 1.0 / d.sqrt()),
            (&b.null_k, 0.1),
            (&b.null_v, 0.1),
            (&b.val_w1, 1.0 / rep.sqrt()),
            (&b.val_w2, 0.01),
            (&b.head_w1, 1.0 / rep.sqrt()),
            (&b.head_w2, 0.01),
            (&b.tok_emb, 0.5),
            (&b.pos_emb, 0.5),
            (&b.tok_w1, 1.0 / (rep + d).sqrt()),
            (&b.tok_w2, 0.01),
            (&b.seg_bias, 0.0),
        ];
        for (range, std) in plan {
            if std == 0.0 {
                continue;
            }
            let normal = Normal::new(0.0, std).expect("positive std");
            for p in &mut self.params[range.clone()] {
                *p = normal.sample(&mut rng);
            }
        }
        self.params[b.overlap.clone()].fill(1.0);
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn vocab(&self) -> &Vocab {
        &self.spec.vocab
    }

    pub fn from_parts(spec: ModelSpec, params: Vec<f64>) -> Result<Self, PolicyError> {
        let mut model = Self::new(spec);
        if params.len() != model.params.len() {
            return Err(PolicyError::Shape(format!(
                "expected {} parameters, got {}",
                model.params.len(),
                params.len()
            )));
        }
        model.params = params;
        Ok(model)
    }

    fn p(&self, r: &Range<usize>) -> &[f64] {
        &self.params[r.clone()]
    }

    fn pair_feature(&self, a: usize, b: usize, salt: u64) -> usize {
        let v = self.spec.vocab.len();
        let h = splitmix64(((a as u64) << 32 | b as u64) ^ salt);
        v + (h % self.spec.dims.pair_buckets as u64) as usize
    }

    fn segment_features(&self, text: &str) -> Vec<usize> {
        let ids: Vec<usize> = tokenize(text).map(|w| self.spec.vocab.id(w)).collect();
        let mut f = ids.clone();
        for w in ids.windows(2) {
            f.push(self.pair_feature(w[0], w[1], SALT_BIGRAM));
        }
        for w in ids.windows(3) {
            f.push(self.pair_feature(w[0], w[2], SALT_SKIP));
        }
        f
    }

    fn parse(&self, prompt: &str) -> (Vec<Segment>, Option<usize>) {
        enum Kind {
            Header,
            Goal,
            Obs(usize),
            Action(usize),
            Other,
        }
        let slot = |rest: &str| -> Option<(usize, String)> {
            let (k, body) = rest.split_once(':')?;
            Some((k.trim().parse().ok()?, body.trim().to_string()))
        };
        let mut lines = Vec::new();
        for line in prompt.lines() {
            let parsed = if let Some(r) = line.strip_prefix(ACTIONS_HEADER) {
                (Kind::Header, r.trim().to_string())
            } else if let Some(r) = line.strip_prefix(GOAL_HEADER) {
                (Kind::Goal, r.trim().to_string())
            } else if let Some((k, body)) = line.strip_prefix("Obs. ").and_then(slot) {
                (Kind::Obs(k), body)
            } else if let Some((k, body)) = line.strip_prefix("Action ").and_then(slot) {
                (Kind::Action(k), body)
            } else {
                (Kind::Other, line.trim().to_string())
            };
            lines.push(parsed);
        }
        let last_obs = lines
            .iter()
            .filter_map(|(k, _)| if let Kind::Obs(i) = k { Some(*i) } else { None })
            .max()
            .unwrap_or(0);
        let mut segments = Vec::new();
        let mut goal = None;
        for (kind, body) in lines {
            if body.is_empty() {
                continue;
            }
            let role = match kind {
                Kind::Header => ROLE_HEADER,
                Kind::Goal => ROLE_GOAL,
                Kind::Obs(k) => ROLE_OBS + last_obs.saturating_sub(k).min(2),
                Kind::Action(k) => ROLE_ACTION + last_obs.saturating_sub(k + 1).min(1),
                Kind::Other => ROLE_OTHER,
            };
            if role == ROLE_GOAL {
                goal.get_or_insert(segments.len());
                segments.push(Segment {
                    features: self.segment_features(&body),
                    role,
                    overlap: 0.0,
                });
                continue;
            }
            for piece in body.split(", ") {
                let features = self.segment_features(piece);
                if !features.is_empty() {
                    segments.push(Segment {
                        features,
                        role,
                        overlap: 0.0,
                    });
                }
            }
        }
        if let Some(gi) = goal {
            let goal_set: std::collections::HashSet<usize> = segments[gi].features.iter().copied().collect();
            for seg in &mut segments {
                if (ROLE_OBS..ROLE_ACTION).contains(&seg.role) {
                    let own: std::collections::HashSet<usize> = seg.features.iter().copied().collect();
                    seg.overlap = own.intersection(&goal_set).count() as f64;
                }
            }
        }
        (segments, goal)
    }

    fn encode(&self, prompt: &str) -> EncCache {
        let d = self.spec.dims.embed;
        let (segments, goal) = self.parse(prompt);
        let s = segments.len();
        let feats = self.p(&self.blocks.features);
        let roles = self.p(&self.blocks.roles);
        let bias = self.p(&self.blocks.seg_bias);
        let mut x = vec![0.0; s * d];
        for (i, seg) in segments.iter().enumerate() {
            let xi = &mut x[i * d..(i + 1) * d];
            let inv = 1.0 / (seg.features.len() as f64).sqrt();
            for f in &seg.features {
                add_to(xi, &feats[f * d..(f + 1) * d], inv);
            }
            add_to(xi, &roles[seg.role * d..(seg.role + 1) * d], 1.0);
            add_to(xi, bias, 1.0);
            for v in xi.iter_mut() {
                *v = v.tanh();
            }
        }
        let mut pooled = vec![0.0; d];
        for i in 0..s {
            add_to(&mut pooled, &x[i * d..(i + 1) * d], 1.0 / s as f64);
        }
        let g: Vec<f64> = goal.map_or(vec![0.0; d], |i| x[i * d..(i + 1) * d].to_vec());
        let zeros = vec![0.0; d];
        let mut q = vec![0.0; d];
        affine(self.p(&self.blocks.wq), &zeros, &g, &mut q);
        let mut keys = vec![0.0; (s + 1) * d];
        let mut vals = vec![0.0; (s + 1) * d];
        keys[..d].copy_from_slice(self.p(&self.blocks.null_k));
        vals[..d].copy_from_slice(self.p(&self.blocks.null_v));
        for i in 0..s {
            let xi = &x[i * d..(i + 1) * d];
            affine(self.p(&self.blocks.wk), &zeros, xi, &mut keys[(i + 1) * d..(i + 2) * d]);
            affine(self.p(&self.blocks.wv), &zeros, xi, &mut vals[(i + 1) * d..(i + 2) * d]);
        }
        let scale = 1.0 / (d as f64).sqrt();
        let beta = self.p(&self.blocks.overlap)[0];
        let scores: Vec<f64> = (0..=s)
            .map(|i| {
                let bonus = if i == 0 { 0.0 } else { beta * segments[i - 1].overlap };
                bonus + scale * q.iter().zip(&keys[i * d..(i + 1) * d]).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut alpha: Vec<f64> = scores.iter().map(|a| (a - m).exp()).collect();
        let z: f64 = alpha.iter().sum();
        alpha.iter_mut().for_each(|a| *a /= z);
        let mut att = vec![0.0; d];
        for i in 0..=s {
            add_to(&mut att, &vals[i * d..(i + 1) * d], alpha[i]);
        }
        let mut h = pooled;
        h.extend(att);
        h.extend(g);
        EncCache {
            segments,
            goal,
            x,
            q,
            keys,
            vals,
            alpha,
            h,
        }
    }

    fn encode_backward(&self, enc: &EncCache, dh: &[f64], grad: &mut [f64]) {
        let d = self.spec.dims.embed;
        let s = enc.segments.len();
        let b = &self.blocks;
        let scale = 1.0 / (d as f64).sqrt();
        let d_pooled = &dh[..d];
        let d_att = &dh[d..2 * d];
        let mut d_g = dh[2 * d..].to_vec();
        let mut dx = vec![0.0; s * d];
        for i in 0..s {
            add_to(&mut dx[i * d..(i + 1) * d], d_pooled, 1.0 / s as f64);
        }
        // attention
        let d_alpha: Vec<f64> = (0..=s)
            .map(|i| enc.vals[i * d..(i + 1) * d].iter().zip(d_att).map(|(a, c)| a * c).sum())
            .collect();
        let mean_da: f64 = enc.alpha.iter().zip(&d_alpha).map(|(a, da)| a * da).sum();
        let d_score: Vec<f64> = (0..=s).map(|i| enc.alpha[i] * (d_alpha[i] - mean_da)).collect();
        let mut d_q = vec![0.0; d];
        for i in 0..=s {
            add_to(&mut d_q, &enc.keys[i * d..(i + 1) * d], scale * d_score[i]);
        }
        grad[b.overlap.start] += (0..s).map(|i| d_score[i + 1] * enc.segments[i].overlap).sum::<f64>();
        // null slot
        add_to(&mut grad[b.null_k.clone()], &enc.q, scale * d_score[0]);
        add_to(&mut grad[b.null_v.clone()], d_att, enc.alpha[0]);
        let wk = self.p(&b.wk);
        let wv = self.p(&b.wv);
        let mut dk = vec![0.0; d];
        let mut dv = vec![0.0; d];
        for i in 0..s {
            let xi = &enc.x[i * d..(i + 1) * d];
            dk.iter_mut().zip(&enc.q).for_each(|(o, qv)| *o = scale * d_score[i + 1] * qv);
            dv.iter_mut().zip(d_att).for_each(|(o, a)| *o = enc.alpha[i + 1] * a);
            outer_acc(&mut grad[b.wk.clone()], &dk, xi);
            outer_acc(&mut grad[b.wv.clone()], &dv, xi);
            let dxi = &mut dx[i * d..(i + 1) * d];
            affine_back_input(wk, &dk, dxi);
            affine_back_input(wv, &dv, dxi);
        }
        if let Some(gi) = enc.goal {
            let g = &enc.x[gi * d..(gi + 1) * d];
            outer_acc(&mut grad[b.wq.clone()], &d_q, g);
            affine_back_input(self.p(&b.wq), &d_q, &mut d_g);
            add_to(&mut dx[gi * d..(gi + 1) * d], &d_g, 1.0);
        }
        // segment vectors
        for (i, seg) in enc.segments.iter().enumerate() {
            let xi = &enc.x[i * d..(i + 1) * d];
            let dm: Vec<f64> = dx[i * d..(i + 1) * d]
                .iter()
                .zip(xi)
                .map(|(g, x)| g * (1.0 - x * x))
                .collect();
            let inv = 1.0 / (seg.features.len() as f64).sqrt();
            let feats = b.features.start;
            for f in &seg.features {
                add_to(&mut grad[feats + f * d..feats + (f + 1) * d], &dm, inv);
            }
            let roles = b.roles.start;
            add_to(&mut grad[roles + seg.role * d..roles + (seg.role + 1) * d], &dm, 1.0);
            add_to(&mut grad[b.seg_bias.clone()], &dm, 1.0);
        }
    }

    fn mlp_forward(&self, w1: &Range<usize>, b1: &Range<usize>, input: &[f64]) -> Vec<f64> {
        let mut hidden = vec![0.0; self.spec.dims.hidden];
        affine(self.p(w1), self.p(b1), input, &mut hidden);
        hidden.iter_mut().for_each(|v| *v = v.tanh());
        hidden
    }

    /// Backprop through `out = W2 tanh(W1 x + b1) + b2`; accumulates dx.
    #[allow(clippy::too_many_arguments)]
    fn mlp_backward(
        &self,
        w1: &Range<usize>,
        b1: &Range<usize>,
        w2: &Range<usize>,
        b2: &Range<usize>,
        input: &[f64],
        hidden: &[f64],
        d_out: &[f64],
        dx: &mut [f64],
        grad: &mut [f64],
    ) {
        add_to(&mut grad[b2.clone()], d_out, 1.0);
        outer_acc(&mut grad[w2.clone()], d_out, hidden);
        let mut dh = vec![0.0; hidden.len()];
        affine_back_input(self.p(w2), d_out, &mut dh);
        for (g, y) in dh.iter_mut().zip(hidden) {
            *g *= 1.0 - y * y;
        }
        add_to(&mut grad[b1.clone()], &dh, 1.0);
        outer_acc(&mut grad[w1.clone()], &dh, input);
        affine_back_input(self.p(w1), &dh, dx);
    }

    fn tokenize_candidates(&self, candidates: &[String], range: &Range<usize>) -> Result<Vec<Vec<usize>>, PolicyError> {
        candidates[range.clone()]
            .iter()
            .map(|c| {
                let t = self.spec.vocab.encode(c);
                if t.is_empty() {
                    Err(PolicyError::EmptyCandidate(c.clone()))
                } else {
                    Ok(t)
                }
            })
            .collect()
    }

    fn prefix_forward(&self, h: &[f64], tokens: &[usize]) -> PrefixCache {
        let d = self.spec.dims.embed;
        let b = &self.blocks;
        let mut input = h.to_vec();
        let mut pre = vec![0.0; d];
        if !tokens.is_empty() {
            let emb = self.p(&b.tok_emb);
            for t in tokens {
                add_to(&mut pre, &emb[t * d..(t + 1) * d], 1.0 / tokens.len() as f64);
            }
        }
        let pos = tokens.len().min(self.spec.dims.max_prefix - 1);
        add_to(&mut pre, &self.p(&b.pos_emb)[pos * d..(pos + 1) * d], 1.0);
        input.extend(pre);
        let hidden = self.mlp_forward(&b.tok_w1, &b.tok_b1, &input);
        let mut logits = vec![0.0; self.spec.vocab.len()];
        affine(self.p(&b.tok_w2), self.p(&b.tok_b2), &hidden, &mut logits);
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
        let logp = logits.iter().map(|l| l - lse).collect();
        PrefixCache {
            tokens: tokens.to_vec(),
            input,
            hidden,
            logp,
        }
    }

    fn forward(
        &self,
        prompt: &str,
        candidates: &[String],
        range: Range<usize>,
        want_value: bool,
    ) -> Result<Forward, PolicyError> {
        if candidates.is_empty() {
            return Err(PolicyError::NoCandidates);
        }
        if range.start > range.end || range.end > candidates.len() {
            return Err(PolicyError::Shape(format!(
                "range {range:?} outside {} candidates",
                candidates.len()
            )));
        }
        let enc = self.encode(prompt);
        let b = &self.blocks;
        let value = want_value.then(|| {
            let hidden = self.mlp_forward(&b.val_w1, &b.val_b1, &enc.h);
            let v = self.p(&b.val_b2)[0]
                + self.p(&b.val_w2).iter().zip(&hidden).map(|(a, c)| a * c).sum::<f64>();
            (v, hidden)
        });
        let mut fwd = Forward {
            raw: Vec::new(),
            value,
            head_hidden: Vec::new(),
            prefixes: Vec::new(),
            token_refs: Vec::new(),
            enc,
        };
        match self.spec.mode {
            PolicyMode::ActionHeads => {
                if candidates.len() != self.spec.num_actions {
                    return Err(PolicyError::ActionCount {
                        expected: self.spec.num_actions,
                        got: candidates.len(),
                    });
                }
                let hidden = self.mlp_forward(&b.head_w1, &b.head_b1, &fwd.enc.h);
                let mut logits = vec![0.0; self.spec.num_actions];
                affine(self.p(&b.head_w2), self.p(&b.head_b2), &hidden, &mut logits);
                fwd.raw = logits[range].to_vec();
                fwd.head_hidden = hidden;
            }
            PolicyMode::TokenScoring => {
                let toks = self.tokenize_candidates(candidates, &range)?;
                let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
                for cand in &toks {
                    let mut refs = Vec::with_capacity(cand.len());
                    let mut total = 0.0;
                    for j in 0..cand.len() {
                        let prefix = &cand[..j];
                        let pi = match index.get(prefix) {
                            Some(i) => *i,
                            None => {
                                fwd.prefixes.push(self.prefix_forward(&fwd.enc.h, prefix));
                                index.insert(prefix.to_vec(), fwd.prefixes.len() - 1);
                                fwd.prefixes.len() - 1
                            }
                        };
                        total += fwd.prefixes[pi].logp[cand[j]].max(LOGPROB_FLOOR);
                        refs.push((pi, cand[j]));
                    }
                    fwd.raw.push(total);
                    fwd.token_refs.push(refs);
                }
            }
        }
        Ok(fwd)
    }

    fn backward(&self, fwd: &Forward, range: &Range<usize>, d_raw: &[f64], d_value: f64, grad: &mut [f64]) {
        let d = self.spec.dims.embed;
        let b = &self.blocks;
        let mut dh = vec![0.0; 3 * d];
        if let Some((_, hidden)) = &fwd.value {
            if d_value != 0.0 {
                self.mlp_backward(
                    &b.val_w1, &b.val_b1, &b.val_w2, &b.val_b2, &fwd.enc.h, hidden, &[d_value], &mut dh, grad,
                );
            }
        }
        match self.spec.mode {
            PolicyMode::ActionHeads => {
                let mut d_logits = vec![0.0; self.spec.num_actions];
                d_logits[range.clone()].copy_from_slice(d_raw);
                self.mlp_backward(
                    &b.head_w1,
                    &b.head_b1,
                    &b.head_w2,
                    &b.head_b2,
                    &fwd.enc.h,
                    &fwd.head_hidden,
                    &d_logits,
                    &mut dh,
                    grad,
                );
            }
            PolicyMode::TokenScoring => {
                let v = self.spec.vocab.len();
                let mut d_logp: Vec<Vec<f64>> = vec![Vec::new(); fwd.prefixes.len()];
                for (refs, g) in fwd.token_refs.iter().zip(d_raw) {
                    for (pi, t) in refs {
                        if fwd.prefixes[*pi].logp[*t] < LOGPROB_FLOOR || *g == 0.0 {
                            continue;
                        }
                        let slot = &mut d_logp[*pi];
                        if slot.is_empty() {
                            slot.resize(v, 0.0);
                        }
                        slot[*t] += g;
                    }
                }
                for (pc, dl) in fwd.prefixes.iter().zip(&d_logp) {
                    if dl.is_empty() {
                        continue;
                    }
                    let total: f64 = dl.iter().sum();
                    let d_logits: Vec<f64> = dl
                        .iter()
                        .zip(&pc.logp)
                        .map(|(g, lp)| g - total * lp.exp())
                        .collect();
                    let mut d_input = vec![0.0; 4 * d];
                    self.mlp_backward(
                        &b.tok_w1,
                        &b.tok_b1,
                        &b.tok_w2,
                        &b.tok_b2,
                        &pc.input,
                        &pc.hidden,
                        &d_logits,
                        &mut d_input,
                        grad,
                    );
                    add_to(&mut dh, &d_input[..3 * d], 1.0);
                    let d_pre = &d_input[3 * d..];
                    let pos = pc.tokens.len().min(self.spec.dims.max_prefix - 1);
                    let ps = b.pos_emb.start + pos * d;
                    add_to(&mut grad[ps..ps + d], d_pre, 1.0);
                    for t in &pc.tokens {
                        let ts = b.tok_emb.start + t * d;
                        add_to(&mut grad[ts..ts + d], d_pre, 1.0 / pc.tokens.len() as f64);
                    }
                }
            }
        }
        self.encode_backward(&fwd.enc, &dh, grad);
    }
}

impl ScorerBackend for BuiltinModel {
    fn kind(&self) -> &'static str {
        "builtin"
    }

    fn mode(&self) -> PolicyMode {
        self.spec.mode
    }

    fn manifest(&self) -> ParamManifest {
        let tag = match self.spec.mode {
            PolicyMode::TokenScoring => "builtin/tokens",
            PolicyMode::ActionHeads => "builtin/heads",
        };
        self.layout.manifest(tag)
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn evaluate(
        &self,
        prompt: &str,
        candidates: &[String],
        range: Range<usize>,
        want_value: bool,
    ) -> Result<Evaluation, PolicyError> {
        let fwd = self.forward(prompt, candidates, range, want_value)?;
        Ok(Evaluation {
            raw: fwd.raw,
            value: fwd.value.map(|(v, _)| v),
        })
    }

    fn forward_backward(
        &self,
        prompt: &str,
        candidates: &[String],
        want_value: bool,
        grad: &mut [f64],
        upstream: Upstream<'_>,
    ) -> Result<Evaluation, PolicyError> {
        let range = 0..candidates.len();
        let fwd = self.forward(prompt, candidates, range.clone(), want_value)?;
        let eval = Evaluation {
            raw: fwd.raw.clone(),
            value: fwd.value.as_ref().map(|(v, _)| *v),
        };
        let (d_raw, d_value) = upstream(&eval);
        self.backward(&fwd, &range, &d_raw, d_value, grad);
        Ok(eval)
    }

    fn token_logprobs(&self, prompt: &str, candidate: &str) -> Result<Vec<f64>, PolicyError> {
        if self.spec.mode != PolicyMode::TokenScoring {
            return Err(PolicyError::Unsupported("token_logprobs in action-heads mode"));
        }
        let cands = [candidate.to_string()];
        let fwd = self.forward(prompt, &cands, 0..1, false)?;
        Ok(fwd.token_refs[0]
            .iter()
            .map(|(pi, t)| fwd.prefixes[*pi].logp[*t].max(LOGPROB_FLOOR))
            .collect())
    }

    fn spec_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.spec).expect("spec serializes")
    }

    fn clone_box(&self) -> Box<dyn ScorerBackend> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::Lexicon;

    const PROMPT: &str = "Possible action of the agent: turn left, turn right, go forward\n\
        Goal of the agent: go to the red ball\n\
        Obs. 0: You see a wall 2 steps forward, You see a red ball 1 step left and 1 step forward\n\
        Action 0: turn left\n\
        Obs. 1: You see a red ball 1 step forward\n\
        Action 1:";

    fn cands() -> Vec<String> {
        ["turn left", "turn right", "go forward"].map(String::from).to_vec()
    }

    #[test]
    fn token_scores_are_log_probabilities() {
        let m = BuiltinModel::token_scorer(Vocab::from_lexicon(&Lexicon::english()), ModelDims::default(), 1);
        let e = m.evaluate(PROMPT, &cands(), 0..3, true).unwrap();
        assert!(e.raw.iter().all(|s| s.is_finite() && *s < 0.0));
        let tl = m.token_logprobs(PROMPT, "turn left").unwrap();
        assert_eq!(tl.len(), 2);
        assert!((tl.iter().sum::<f64>() - e.raw[0]).abs() < 1e-12);
        // the next-token distribution sums to one
        let fwd = m.forward(PROMPT, &cands(), 0..3, false).unwrap();
        for p in &fwd.prefixes {
            assert!((p.logp.iter().map(|l| l.exp()).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn range_scores_match_full_scores() {
        for m in [
            BuiltinModel::token_scorer(Vocab::from_lexicon(&Lexicon::english()), ModelDims::default(), 2),
            BuiltinModel::action_heads(Vocab::from_lexicon(&Lexicon::english()), 3, ModelDims::default(), 2),
        ] {
            let full = m.evaluate(PROMPT, &cands(), 0..3, false).unwrap().raw;
            let tail = m.evaluate(PROMPT, &cands(), 1..3, false).unwrap().raw;
            assert_eq!(&full[1..], &tail[..]);
        }
    }

    #[test]
    fn heads_reject_wrong_action_count() {
        let m = BuiltinModel::action_heads(Vocab::from_lexicon(&Lexicon::english()), 6, ModelDims::default(), 2);
        assert!(matches!(
            m.evaluate(PROMPT, &cands(), 0..3, false),
            Err(PolicyError::ActionCount { expected: 6, got: 3 })
        ));
    }

    #[test]
    fn parse_assigns_recency_roles() {
        let m = BuiltinModel::token_scorer(Vocab::from_lexicon(&Lexicon::english()), ModelDims::tiny(), 0);
        let (segs, goal) = m.parse(PROMPT);
        let roles: Vec<usize> = segs.iter().map(|s| s.role).collect();
        assert_eq!(roles, vec![0, 0, 0, 1, 3, 3, 5, 2]);
        assert_eq!(goal, Some(3));
    }
}
