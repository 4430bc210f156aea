//! Normalized margin and numeric checks of the augmentation inequalities.
//!
//! Instances are built on an exact orthonormal frame so the orthogonality
//! assumptions hold up to rounding, and every condition is re-checked from
//! the vectors themselves before an inequality is asserted.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Slack allowed on every inequality.
pub const SLACK: f64 = 1e-9;
/// Tolerance for "orthogonal", relative to the product of norms.
pub const ORTHO_TOL: f64 = 1e-12;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn scale(a: &[f64], c: f64) -> Vec<f64> {
    a.iter().map(|x| x * c).collect()
}

/// `<q, v1 - v2> / (|q| |v1 - v2|)`.
pub fn normalized_margin(q: &[f64], v1: &[f64], v2: &[f64]) -> Result<f64> {
    if q.len() != v1.len() || q.len() != v2.len() {
        return Err(Error::InvalidArgument("vectors differ in dimension".into()));
    }
    let qn = norm(q);
    if qn == 0.0 {
        return Err(Error::InvalidArgument("zero query vector".into()));
    }
    let diff = sub(v1, v2);
    let dn = norm(&diff);
    if dn == 0.0 {
        return Err(Error::InvalidArgument("v1 equals v2, the margin is undefined".into()));
    }
    Ok(dot(q, &diff) / (qn * dn))
}

fn orthogonal(a: &[f64], b: &[f64]) -> bool {
    dot(a, b).abs() <= ORTHO_TOL * (norm(a) * norm(b)).max(1.0)
}

fn axpy(v: &mut [f64], c: f64, f: &[f64]) {
    for (x, y) in v.iter_mut().zip(f) {
        *x += c * y;
    }
}

/// Removes the components of `v` along each (unit) vector in `frame`.
fn project_out(v: &mut [f64], frame: &[Vec<f64>]) {
    // Two passes keep the result orthogonal to ~1e-16 even at d = 64.
    for _ in 0..2 {
        for f in frame {
            let c = dot(v, f);
            axpy(v, -c, f);
        }
    }
}

/// `k` orthonormal vectors in `R^d` from Gram-Schmidt on random vectors.
pub fn random_frame(rng: &mut ChaCha8Rng, d: usize, k: usize) -> Vec<Vec<f64>> {
    assert!(k <= d, "cannot fit {k} orthonormal vectors in dimension {d}");
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(k);
    while frame.len() < k {
        let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        project_out(&mut v, &frame);
        let n = norm(&v);
        if n > 1e-6 {
            frame.push(scale(&v, 1.0 / n));
        }
    }
    frame
}

/// `sum(coords[i] * frame[i])` plus a random part orthogonal to the frame.
fn query_from(rng: &mut ChaCha8Rng, frame: &[Vec<f64>], coords: &[f64]) -> Vec<f64> {
    let d = frame[0].len();
    let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    project_out(&mut v, frame);
    for (f, c) in frame.iter().zip(coords) {
        axpy(&mut v, *c, f);
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceConfig {
    pub n_gen1: usize,
    pub n_gen2: usize,
    /// Extra query alignment of the target text over its competitor.
    pub relevance_gap: f64,
    /// Magnitude of both noise vectors; 0 makes `v1` equal its best generated vector.
    pub noise_scale: f64,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        Self {
            n_gen1: 3,
            n_gen2: 3,
            relevance_gap: 0.1,
            noise_scale: 1.0,
        }
    }
}

/// A query, a target text `v1` with generated vectors, and a competitor `v2`
/// with its own generated vectors. `v1 = v1_gen[chosen] + noise1` and
/// `v2 = sum(v2_gen) + noise2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticInstance {
    pub d: usize,
    pub v_q: Vec<f64>,
    pub v1_gen: Vec<Vec<f64>>,
    pub v2_gen: Vec<Vec<f64>>,
    pub chosen: usize,
    pub noise1: Vec<f64>,
    pub noise2: Vec<f64>,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
}

impl SyntheticInstance {
    /// Assembles `v1` and `v2` from their parts.
    pub fn from_parts(
        v_q: Vec<f64>,
        v1_gen: Vec<Vec<f64>>,
        chosen: usize,
        noise1: Vec<f64>,
        v2_gen: Vec<Vec<f64>>,
        noise2: Vec<f64>,
    ) -> Result<Self> {
        let d = v_q.len();
        let all_dims = v1_gen.iter().chain(&v2_gen).chain([&noise1, &noise2]).all(|v| v.len() == d);
        if !all_dims {
            return Err(Error::InvalidArgument("vectors differ in dimension".into()));
        }
        if chosen >= v1_gen.len() || v2_gen.is_empty() {
            return Err(Error::InvalidArgument("need a chosen target vector and at least one competitor vector".into()));
        }
        let v1 = add(&v1_gen[chosen], &noise1);
        let v2 = v2_gen.iter().fold(noise2.clone(), |acc, v| add(&acc, v));
        Ok(Self {
            d,
            v_q,
            v1_gen,
            v2_gen,
            chosen,
            noise1,
            noise2,
            v1,
            v2,
        })
    }
}

/// Which assumptions an instance meets, judged from its vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Conditions {
    /// The chosen generated vector is at least as query-aligned as `v1`.
    pub relevance_enhancement: bool,
    /// No competitor generated vector is more query-aligned than `v2`.
    pub irrelevance_consistency: bool,
    /// Generated vectors are pairwise orthogonal and orthogonal to both noise vectors.
    pub orthogonality: bool,
    /// `v1` is at least as query-aligned as `v2`.
    pub target_most_relevant: bool,
}

impl Conditions {
    pub fn all(&self) -> bool {
        self.relevance_enhancement && self.irrelevance_consistency && self.orthogonality && self.target_most_relevant
    }

    fn describe_failures(&self) -> String {
        let mut out = Vec::new();
        if !self.relevance_enhancement {
            out.push("relevance enhancement");
        }
        if !self.irrelevance_consistency {
            out.push("irrelevance consistency");
        }
        if !self.orthogonality {
            out.push("orthogonality");
        }
        if !self.target_most_relevant {
            out.push("target most relevant");
        }
        out.join(", ")
    }
}

pub fn check_conditions(inst: &SyntheticInstance) -> Conditions {
    let q = &inst.v_q;
    let a1 = dot(q, &inst.v1);
    let a2 = dot(q, &inst.v2);
    let relevance_enhancement = dot(q, &inst.v1_gen[inst.chosen]) >= a1 - SLACK;
    let irrelevance_consistency = inst.v2_gen.iter().all(|v| dot(q, v) <= a2 + SLACK);

    let gens: Vec<&Vec<f64>> = inst.v1_gen.iter().chain(&inst.v2_gen).collect();
    let mut orthogonality = true;
    for (i, a) in gens.iter().enumerate() {
        for b in &gens[i + 1..] {
            orthogonality &= orthogonal(a, b);
        }
        orthogonality &= orthogonal(a, &inst.noise1) && orthogonal(a, &inst.noise2);
    }
    Conditions {
        relevance_enhancement,
        irrelevance_consistency,
        orthogonality,
        target_most_relevant: a1 >= a2 - SLACK,
    }
}

/// Builds a condition-satisfying instance on a random orthonormal frame.
/// Generated and noise vectors each get their own frame axis.
pub fn build_instance(seed: u64, d: usize, config: &InstanceConfig) -> Result<SyntheticInstance> {
    let (n1, n2) = (config.n_gen1, config.n_gen2);
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidArgument("need at least one generated vector per text".into()));
    }
    if d < n1 + n2 + 2 {
        return Err(Error::InvalidArgument(format!(
            "dimension {d} is too small for {n1} + {n2} generated vectors and two noise vectors"
        )));
    }
    if config.relevance_gap < 0.0 || config.noise_scale < 0.0 {
        return Err(Error::InvalidArgument("relevance_gap and noise_scale must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = n1 + n2 + 2;
    let frame = random_frame(&mut rng, d, k);
    let mut mag = || rng.gen_range(0.5..1.5);

    let m1: Vec<f64> = (0..n1).map(|_| mag()).collect();
    let m2: Vec<f64> = (0..n2).map(|_| mag()).collect();
    let (mn1, mn2) = (config.noise_scale * mag(), config.noise_scale * mag());
    let (ax_n1, ax_n2) = (n1 + n2, n1 + n2 + 1);

    // Query coordinates in the frame.
    let mut c: Vec<f64> = (0..n1).map(|_| rng.gen_range(0.0..1.0)).collect();
    c.extend((0..n2 + 2).map(|_| 0.0));
    for ci in c.iter_mut().skip(n1).take(n2) {
        *ci = rng.gen_range(0.0..0.5);
    }
    c[ax_n1] = rng.gen_range(-1.0..=0.0);
    c[ax_n2] = rng.gen_range(0.0..1.0);
    let chosen = rng.gen_range(0..n1);
    c[chosen] += config.relevance_gap;
    let a2: f64 = (0..n2).map(|k| c[n1 + k] * m2[k]).sum::<f64>() + c[ax_n2] * mn2;
    let need = (a2 - c[ax_n1] * mn1 + config.relevance_gap) / m1[chosen];
    c[chosen] = c[chosen].max(need);

    let v_q = query_from(&mut rng, &frame, &c);
    let v1_gen = (0..n1).map(|j| scale(&frame[j], m1[j])).collect();
    let v2_gen = (0..n2).map(|k| scale(&frame[n1 + k], m2[k])).collect();
    SyntheticInstance::from_parts(
        v_q,
        v1_gen,
        chosen,
        scale(&frame[ax_n1], mn1),
        v2_gen,
        scale(&frame[ax_n2], mn2),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginComparison {
    /// Margin of the original pair, `mu(q, v1, v2)`.
    pub baseline: f64,
    /// Index of the generated vector that witnesses the inequalities.
    pub witness: usize,
    /// `mu(q, v1_gen[witness], v2)`.
    pub vs_original: f64,
    /// `mu(q, v1_gen[witness], v2_gen[j])` for every j.
    pub vs_generated: Vec<f64>,
    /// Smallest `lhs - rhs` over all asserted inequalities.
    pub worst_slack: f64,
    pub holds: bool,
}

/// Margins for every candidate target vector whose query alignment is at
/// least that of `v1`, keeping the one with the best worst-case slack.
/// Does not check any precondition.
pub fn single_source_margins(inst: &SyntheticInstance) -> Result<MarginComparison> {
    let q = &inst.v_q;
    let baseline = normalized_margin(q, &inst.v1, &inst.v2)?;
    let a1 = dot(q, &inst.v1);
    let mut best: Option<MarginComparison> = None;
    let candidates = (0..inst.v1_gen.len()).filter(|&j| dot(q, &inst.v1_gen[j]) >= a1 - SLACK);
    // Without any candidate, fall back to the designated one so a report still exists.
    let candidates: Vec<usize> = {
        let c: Vec<usize> = candidates.collect();
        if c.is_empty() {
            vec![inst.chosen]
        } else {
            c
        }
    };
    for j in candidates {
        let w = &inst.v1_gen[j];
        let vs_original = normalized_margin(q, w, &inst.v2)?;
        let vs_generated = inst
            .v2_gen
            .iter()
            .map(|v| normalized_margin(q, w, v))
            .collect::<Result<Vec<_>>>()?;
        let worst_slack = vs_generated
            .iter()
            .map(|m| m - baseline)
            .fold(vs_original - baseline, f64::min);
        let cmp = MarginComparison {
            baseline,
            witness: j,
            vs_original,
            vs_generated,
            worst_slack,
            holds: worst_slack >= -SLACK,
        };
        if best.as_ref().is_none_or(|b| cmp.worst_slack > b.worst_slack) {
            best = Some(cmp);
        }
    }
    Ok(best.expect("at least one candidate"))
}

/// Checks both margin inequalities on an instance that meets every condition.
pub fn verify_single_source(inst: &SyntheticInstance) -> Result<MarginComparison> {
    let cond = check_conditions(inst);
    if !cond.all() {
        return Err(Error::Precondition(format!("instance violates: {}", cond.describe_failures())));
    }
    single_source_margins(inst)
}

/// Slacks of the intermediate proof steps for the designated target vector:
/// the two distance bounds and the two numerator bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProofSteps {
    pub distance_vs_generated: f64,
    pub distance_vs_original: f64,
    pub numerator_vs_original: f64,
    pub numerator_vs_generated: f64,
}

impl ProofSteps {
    pub fn worst(&self) -> f64 {
        self.distance_vs_generated
            .min(self.distance_vs_original)
            .min(self.numerator_vs_original)
            .min(self.numerator_vs_generated)
    }
}

pub fn proof_steps(inst: &SyntheticInstance) -> ProofSteps {
    let q = &inst.v_q;
    let w = &inst.v1_gen[inst.chosen];
    let full = dot(&sub(&inst.v1, &inst.v2), &sub(&inst.v1, &inst.v2));
    let sq = |a: &[f64], b: &[f64]| {
        let d = sub(a, b);
        dot(&d, &d)
    };
    let base_num = dot(q, &inst.v1) - dot(q, &inst.v2);
    ProofSteps {
        distance_vs_generated: inst
            .v2_gen
            .iter()
            .map(|v| full - sq(w, v))
            .fold(f64::INFINITY, f64::min),
        distance_vs_original: full - sq(w, &inst.v2),
        numerator_vs_original: dot(q, &sub(w, &inst.v2)) - base_num,
        numerator_vs_generated: inst
            .v2_gen
            .iter()
            .map(|v| dot(q, &sub(w, v)) - base_num)
            .fold(f64::INFINITY, f64::min),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QaeaConfig {
    pub n_qa: usize,
    pub n_event: usize,
    pub n_gen2: usize,
    pub noise_scale: f64,
}

impl Default for QaeaConfig {
    fn default() -> Self {
        Self {
            n_qa: 3,
            n_event: 2,
            n_gen2: 3,
            noise_scale: 1.0,
        }
    }
}

/// Target generated vectors split into QA and event sets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QaeaInstance {
    pub v_q: Vec<f64>,
    pub qa: Vec<Vec<f64>>,
    pub event: Vec<Vec<f64>>,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub v2_gen: Vec<Vec<f64>>,
}

impl QaeaInstance {
    fn union(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.qa.iter().chain(&self.event)
    }

    /// Index into the QA-then-event union maximizing query alignment.
    pub fn best_index(&self) -> usize {
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for (i, v) in self.union().enumerate() {
            let a = dot(&self.v_q, v);
            if a > best_val {
                best_val = a;
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QaeaConditions {
    pub relevance_enhancement: bool,
    pub irrelevance_consistency: bool,
    /// QA vectors are orthogonal to event vectors.
    pub orthogonality: bool,
    /// All target generated vectors share one norm and are orthogonal to `v2`,
    /// so the query-aligned choice also has the largest margin.
    pub equal_norm_and_separated: bool,
}

impl QaeaConditions {
    pub fn all(&self) -> bool {
        self.relevance_enhancement && self.irrelevance_consistency && self.orthogonality && self.equal_norm_and_separated
    }
}

pub fn check_qaea_conditions(inst: &QaeaInstance) -> QaeaConditions {
    let q = &inst.v_q;
    let a1 = dot(q, &inst.v1);
    let a2 = dot(q, &inst.v2);
    let orthogonality = inst.qa.iter().all(|a| inst.event.iter().all(|b| orthogonal(a, b)));
    let norms: Vec<f64> = inst.union().map(|v| norm(v)).collect();
    let n0 = norms.first().copied().unwrap_or(0.0);
    let equal_norm_and_separated = norms.iter().all(|n| (n - n0).abs() <= SLACK * n0.max(1.0))
        && inst.union().all(|v| orthogonal(v, &inst.v2));
    QaeaConditions {
        relevance_enhancement: inst.union().any(|v| dot(q, v) >= a1 - SLACK),
        irrelevance_consistency: inst.v2_gen.iter().all(|v| dot(q, v) <= a2 + SLACK),
        orthogonality,
        equal_norm_and_separated,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QaeaComparison {
    /// Index into the QA-then-event union.
    pub chosen: usize,
    pub chosen_is_event: bool,
    pub union_margin: f64,
    pub qa_margins: Vec<f64>,
    pub event_margins: Vec<f64>,
    pub worst_slack: f64,
    pub holds: bool,
}

/// Margins of the union's best vector against every per-type margin. Does
/// not check any precondition.
pub fn union_margins(inst: &QaeaInstance) -> Result<QaeaComparison> {
    if inst.qa.is_empty() && inst.event.is_empty() {
        return Err(Error::InvalidArgument("no generated target vectors".into()));
    }
    let q = &inst.v_q;
    let chosen = inst.best_index();
    let best = inst.union().nth(chosen).expect("index within union");
    let union_margin = normalized_margin(q, best, &inst.v2)?;
    let margins = |set: &[Vec<f64>]| set.iter().map(|v| normalized_margin(q, v, &inst.v2)).collect::<Result<Vec<_>>>();
    let qa_margins = margins(&inst.qa)?;
    let event_margins = margins(&inst.event)?;
    let worst_slack = qa_margins
        .iter()
        .chain(&event_margins)
        .map(|m| union_margin - m)
        .fold(f64::INFINITY, f64::min);
    Ok(QaeaComparison {
        chosen,
        chosen_is_event: chosen >= inst.qa.len(),
        union_margin,
        qa_margins,
        event_margins,
        worst_slack,
        holds: worst_slack >= -SLACK,
    })
}

pub fn verify_union(inst: &QaeaInstance) -> Result<QaeaComparison> {
    let cond = check_qaea_conditions(inst);
    if !cond.all() {
        return Err(Error::Precondition(format!("instance conditions not met: {cond:?}")));
    }
    union_margins(inst)
}

/// Unit-norm QA and event vectors on their own frame axes, a competitor built
/// like in [`build_instance`], and `v1` equal to the best generated vector plus noise.
pub fn build_qaea_instance(seed: u64, d: usize, config: &QaeaConfig) -> Result<QaeaInstance> {
    let n1 = config.n_qa + config.n_event;
    if n1 == 0 || config.n_gen2 == 0 {
        return Err(Error::InvalidArgument("need generated vectors for both texts".into()));
    }
    if d < n1 + config.n_gen2 + 2 {
        return Err(Error::InvalidArgument(format!("dimension {d} is too small")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n2 = config.n_gen2;
    let frame = random_frame(&mut rng, d, n1 + n2 + 2);
    let (ax_n1, ax_n2) = (n1 + n2, n1 + n2 + 1);
    let m2: Vec<f64> = (0..n2).map(|_| rng.gen_range(0.5..1.5)).collect();
    let (mn1, mn2) = (
        config.noise_scale * rng.gen_range(0.5..1.5),
        config.noise_scale * rng.gen_range(0.5..1.5),
    );

    let mut c: Vec<f64> = (0..n1).map(|_| rng.gen_range(-0.5..1.0)).collect();
    c.extend((0..n2 + 2).map(|_| 0.0));
    for ci in c.iter_mut().skip(n1).take(n2) {
        *ci = rng.gen_range(0.0..0.5);
    }
    c[ax_n1] = rng.gen_range(-1.0..=0.0);
    c[ax_n2] = rng.gen_range(0.0..1.0);

    let v_q = query_from(&mut rng, &frame, &c);
    let gen1: Vec<Vec<f64>> = frame[..n1].to_vec();
    let best = (0..n1).max_by(|&a, &b| c[a].total_cmp(&c[b])).expect("n1 > 0");
    let v1 = add(&gen1[best], &scale(&frame[ax_n1], mn1));
    let v2_gen: Vec<Vec<f64>> = (0..n2).map(|k| scale(&frame[n1 + k], m2[k])).collect();
    let v2 = v2_gen.iter().fold(scale(&frame[ax_n2], mn2), |acc, v| add(&acc, v));
    Ok(QaeaInstance {
        v_q,
        qa: gen1[..config.n_qa].to_vec(),
        event: gen1[config.n_qa..].to_vec(),
        v1,
        v2,
        v2_gen,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub instances: usize,
    pub violations: usize,
    pub precondition_failures: usize,
    pub worst_slack: f64,
}

fn summarize(results: Vec<Result<f64>>) -> SweepSummary {
    let mut s = SweepSummary {
        instances: results.len(),
        violations: 0,
        precondition_failures: 0,
        worst_slack: f64::INFINITY,
    };
    for r in results {
        match r {
            Ok(slack) => {
                if slack < -SLACK {
                    s.violations += 1;
                }
                s.worst_slack = s.worst_slack.min(slack);
            }
            Err(_) => s.precondition_failures += 1,
        }
    }
    s
}

/// Random sizes with `d <= max_d`; instance `i` uses seed `seed + i`.
pub fn sweep_single_source(instances: usize, seed: u64, max_d: usize) -> Result<SweepSummary> {
    if max_d < 4 {
        return Err(Error::InvalidArgument("max_d must be at least 4".into()));
    }
    let results = (0..instances as u64)
        .into_par_iter()
        .map(|i| {
            let s = seed.wrapping_add(i);
            let mut rng = ChaCha8Rng::seed_from_u64(s ^ 0x9e37_79b9_7f4a_7c15);
            let budget = max_d - 2;
            let n1 = rng.gen_range(1..=(budget - 1).min(8));
            let n2 = rng.gen_range(1..=(budget - n1).min(8));
            let d = rng.gen_range(n1 + n2 + 2..=max_d);
            let config = InstanceConfig {
                n_gen1: n1,
                n_gen2: n2,
                relevance_gap: rng.gen_range(0.0..0.5),
                noise_scale: rng.gen_range(0.0..2.0),
            };
            let inst = build_instance(s, d, &config)?;
            let cmp = verify_single_source(&inst)?;
            Ok(cmp.worst_slack.min(proof_steps(&inst).worst()))
        })
        .collect();
    Ok(summarize(results))
}

pub fn sweep_union(instances: usize, seed: u64, max_d: usize) -> Result<SweepSummary> {
    if max_d < 5 {
        return Err(Error::InvalidArgument("max_d must be at least 5".into()));
    }
    let results = (0..instances as u64)
        .into_par_iter()
        .map(|i| {
            let s = seed.wrapping_add(i);
            let mut rng = ChaCha8Rng::seed_from_u64(s ^ 0x2545_f491_4f6c_dd1d);
            let budget = max_d - 2;
            let n_qa = rng.gen_range(1..=(budget - 2).min(6));
            let n_event = rng.gen_range(1..=(budget - 1 - n_qa).min(6));
            let n2 = rng.gen_range(1..=(budget - n_qa - n_event).min(6));
            let d = rng.gen_range(n_qa + n_event + n2 + 2..=max_d);
            let config = QaeaConfig {
                n_qa,
                n_event,
                n_gen2: n2,
                noise_scale: rng.gen_range(0.0..2.0),
            };
            let inst = build_qaea_instance(s, d, &config)?;
            Ok(verify_union(&inst)?.worst_slack)
        })
        .collect();
    Ok(summarize(results))
}
