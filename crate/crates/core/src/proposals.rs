//! Candidate generation around the current iterate.
//!
//! Every edit is built from one primitive: draw a direction inside a cone of
//! half-angle `phi` around the negative guidance, take a bounded step, and
//! project back onto the feasible domain. Numerical coordinates move in their
//! own units scaled by the feature range; categorical coordinates move in a
//! fixed random embedding space and are decoded back to a level with a
//! temperature-controlled soft-min.
//!
//! Randomness comes from independent ChaCha streams keyed by
//! `(seed, iteration, candidate, row)`, so a batch is identical no matter in
//! which order (or on which thread) its candidates are produced.

use std::f64::consts::FRAC_PI_2;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guidance::GuidanceField;
use crate::tabular::{project_in_place, FeatureKind, Schema};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConeParams {
    /// Half-angle in radians, `[0, pi]`.
    pub phi: f64,
    /// Step bound as a fraction of the feature range, `(0, 1]`.
    pub lambda_max: f64,
    /// Decoding temperature for categorical levels.
    pub tau: f64,
    /// Draw a separate step length for every numerical coordinate.
    pub per_feature_lambda: bool,
}

impl Default for ConeParams {
    fn default() -> Self {
        Self {
            phi: std::f64::consts::FRAC_PI_4,
            lambda_max: 0.1,
            tau: 1.0,
            per_feature_lambda: false,
        }
    }
}

impl ConeParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=std::f64::consts::PI).contains(&self.phi) {
            return Err(Error::Argument(format!("cone half-angle must lie in [0, pi], got {}", self.phi)));
        }
        if !(self.lambda_max > 0.0 && self.lambda_max <= 1.0) {
            return Err(Error::Argument(format!("lambda_max must lie in (0, 1], got {}", self.lambda_max)));
        }
        if !(self.tau > 0.0) {
            return Err(Error::Argument(format!("tau must be positive, got {}", self.tau)));
        }
        Ok(())
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for a key path such as `[seed, iteration, candidate, row]`.
pub fn stream_rng(keys: &[u64]) -> ChaCha8Rng {
    let mut h = 0x5EED_D15C_0FE2_u64;
    for &k in keys {
        h = mix64(h ^ mix64(k));
    }
    ChaCha8Rng::seed_from_u64(h)
}

// Extra key distinguishing per-candidate draws from per-row draws.
const CANDIDATE_STREAM: u64 = u64::MAX;
const EMBEDDING_STREAM: u64 = 0xE4BE_DD10_u64;

/// Fixed random embedding of one categorical feature's levels.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    levels: usize,
    dim: usize,
    values: Vec<f64>,
    anchor: Vec<f64>,
    spread: f64,
}

impl EmbeddingTable {
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embedding(&self, level: usize) -> &[f64] {
        &self.values[level * self.dim..(level + 1) * self.dim]
    }

    /// Unit vector in embedding space standing in for the guidance direction.
    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    /// Mean pairwise distance between level embeddings.
    pub fn spread(&self) -> f64 {
        self.spread
    }

    fn build(levels: usize, dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let scale = 1.0 / (dim as f64).sqrt();
        let values: Vec<f64> = (0..levels * dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                scale * z
            })
            .collect();
        let anchor = random_unit(dim, rng);
        let mut total = 0.0;
        let mut pairs = 0usize;
        for a in 0..levels {
            for b in a + 1..levels {
                total += sq_dist(&values[a * dim..(a + 1) * dim], &values[b * dim..(b + 1) * dim]).sqrt();
                pairs += 1;
            }
        }
        Self {
            levels,
            dim,
            values,
            anchor,
            spread: if pairs > 0 { total / pairs as f64 } else { 0.0 },
        }
    }
}

/// One optional table per schema column (present for categoricals).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTables {
    tables: Vec<Option<EmbeddingTable>>,
    seed: u64,
}

impl EmbeddingTables {
    pub fn get(&self, p: usize) -> Option<&EmbeddingTable> {
        self.tables.get(p).and_then(Option::as_ref)
    }

    pub fn count(&self) -> usize {
        self.tables.iter().flatten().count()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Builds entries i.i.d. `N(0, 1/r)` per categorical feature, deterministic in `seed`.
pub fn build_embeddings(schema: &Schema, seed: u64) -> EmbeddingTables {
    let tables = schema
        .features()
        .iter()
        .enumerate()
        .map(|(p, f)| match &f.kind {
            FeatureKind::Categorical { levels, embed_dim, .. } => {
                let mut rng = stream_rng(&[seed, EMBEDDING_STREAM, p as u64]);
                Some(EmbeddingTable::build(levels.len(), *embed_dim, &mut rng))
            }
            FeatureKind::Numerical { .. } => None,
        })
        .collect();
    EmbeddingTables { tables, seed }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn random_unit<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Unit direction at angle `psi ~ U[0, phi]` from `anchor`, rotated toward a
/// uniformly random orthogonal direction.
///
/// A zero anchor gives a uniform direction on the sphere. In one dimension
/// the only unit vectors are `+-anchor`; the sign flips when `psi > pi/2`.
pub fn cone_direction<R: Rng + ?Sized>(anchor: &[f64], phi: f64, rng: &mut R) -> Vec<f64> {
    let m = anchor.len();
    if m == 0 {
        return Vec::new();
    }
    let an = norm(anchor);
    if an == 0.0 {
        return random_unit(m, rng);
    }
    let unit: Vec<f64> = anchor.iter().map(|a| a / an).collect();
    if phi == 0.0 {
        return unit;
    }
    let psi = rng.random_range(0.0..=phi);
    if m == 1 {
        return if psi <= FRAC_PI_2 { unit } else { vec![-unit[0]] };
    }
    let ortho = loop {
        let v: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
        let along = crate::transport::dot(&v, &unit);
        let w: Vec<f64> = v.iter().zip(&unit).map(|(vi, ui)| vi - along * ui).collect();
        let wn = norm(&w);
        if wn > 1e-9 {
            break w.into_iter().map(|x| x / wn).collect::<Vec<f64>>();
        }
    };
    let (s, c) = psi.sin_cos();
    unit.iter().zip(&ortho).map(|(u, v)| c * u + s * v).collect()
}

/// Cone step on the numerical coordinates in `editable`, biased toward `-g`.
pub fn propose_numeric_row<R: Rng + ?Sized>(
    row: &[f64],
    editable: &[usize],
    g_row: Option<&[f64]>,
    cone: &ConeParams,
    schema: &Schema,
    rng: &mut R,
) -> Vec<f64> {
    let mut out = row.to_vec();
    if editable.is_empty() {
        return out;
    }
    let anchor: Vec<f64> = match g_row {
        Some(g) => editable.iter().map(|&p| -g[p]).collect(),
        None => vec![0.0; editable.len()],
    };
    let dir = cone_direction(&anchor, cone.phi, rng);
    let shared = rng.random_range(0.0..=cone.lambda_max);
    for (&p, dp) in editable.iter().zip(&dir) {
        let f = schema.feature(p);
        if let FeatureKind::Numerical { min, max } = f.kind {
            let lambda = if cone.per_feature_lambda {
                rng.random_range(0.0..=cone.lambda_max)
            } else {
                shared
            };
            out[p] = (out[p] + lambda * (max - min) * dp).clamp(min, max);
        }
    }
    out
}

/// Samples a level from `candidates` with probability proportional to
/// `exp(-||E[v] - z||^2 / tau)`.
pub fn decode_level<R: Rng + ?Sized>(
    table: &EmbeddingTable,
    z: &[f64],
    candidates: &[usize],
    tau: f64,
    rng: &mut R,
) -> usize {
    debug_assert!(!candidates.is_empty());
    let dists: Vec<f64> = candidates.iter().map(|&v| sq_dist(table.embedding(v), z)).collect();
    let best = dists.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = dists.iter().map(|dv| (-(dv - best) / tau).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (&v, w) in candidates.iter().zip(&weights) {
        if u < *w {
            return v;
        }
        u -= w;
    }
    // u landed on the rounding slack; return the last non-zero weight.
    candidates
        .iter()
        .zip(&weights)
        .rev()
        .find(|(_, w)| **w > 0.0)
        .map(|(&v, _)| v)
        .unwrap_or(candidates[0])
}

/// Level choices for feature `p`: admissible levels plus the current one.
fn decode_candidates(schema: &Schema, p: usize, current: usize) -> Vec<usize> {
    match &schema.feature(p).kind {
        FeatureKind::Categorical { admissible, .. } => {
            let mut c = admissible.clone();
            if let Err(pos) = c.binary_search(&current) {
                c.insert(pos, current);
            }
            c
        }
        FeatureKind::Numerical { .. } => vec![current],
    }
}

/// Embedding-space cone step and soft-min decode for each categorical coordinate in `editable`.
pub fn propose_categorical_row<R: Rng + ?Sized>(
    row: &[f64],
    editable: &[usize],
    g_row: Option<&[f64]>,
    cone: &ConeParams,
    tables: &EmbeddingTables,
    schema: &Schema,
    rng: &mut R,
) -> Vec<f64> {
    let mut out = row.to_vec();
    for &p in editable {
        let Some(table) = tables.get(p) else { continue };
        let current = row[p] as usize;
        let candidates = decode_candidates(schema, p, current);
        if candidates.len() == 1 {
            continue;
        }
        let sign = match g_row.map(|g| -g[p]) {
            Some(v) if v > 0.0 => 1.0,
            Some(v) if v < 0.0 => -1.0,
            _ => 0.0,
        };
        let anchor: Vec<f64> = table.anchor().iter().map(|u| sign * u).collect();
        let dir = cone_direction(&anchor, cone.phi, rng);
        let step = rng.random_range(0.0..=cone.lambda_max) * table.spread();
        let z: Vec<f64> = table
            .embedding(current)
            .iter()
            .zip(&dir)
            .map(|(e, d)| e + step * d)
            .collect();
        out[p] = decode_level(table, &z, &candidates, cone.tau, rng) as f64;
    }
    out
}

/// A sparse set of row replacements relative to the current iterate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Candidate {
    /// `(row, new values)`, ascending by row; only rows that actually change.
    pub edits: Vec<(usize, Vec<f64>)>,
}

impl Candidate {
    pub fn is_noop(&self) -> bool {
        self.edits.is_empty()
    }

    pub fn edited_rows(&self) -> Vec<usize> {
        self.edits.iter().map(|(i, _)| *i).collect()
    }

    pub fn edit_for(&self, row: usize) -> Option<&[f64]> {
        self.edits
            .binary_search_by_key(&row, |(i, _)| *i)
            .ok()
            .map(|pos| self.edits[pos].1.as_slice())
    }

    /// Applies the edits to row-major `values` in place.
    pub fn apply(&self, values: &mut [f64], d: usize) {
        for (i, r) in &self.edits {
            values[i * d..(i + 1) * d].copy_from_slice(r);
        }
    }

    /// The changed cells relative to `base`, the iterate the candidate was
    /// proposed on.
    pub fn to_patch(&self, base: &[f64], d: usize) -> Patch {
        Patch {
            edits: self
                .edits
                .iter()
                .map(|(i, r)| {
                    let old = &base[i * d..(i + 1) * d];
                    (*i, r.iter().zip(old).enumerate().filter(|(_, (a, b))| a != b).map(|(p, (a, _))| (p, *a)).collect())
                })
                .collect(),
        }
    }
}

/// Cell-level edits `(row, [(feature, value)])`, ascending by row. Genetic
/// elites are kept in this form so they can be replayed on a later iterate
/// without touching more than `h` features per row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Patch {
    pub edits: Vec<(usize, Vec<(usize, f64)>)>,
}

impl Patch {
    pub fn cells_for(&self, row: usize) -> Option<&[(usize, f64)]> {
        self.edits
            .binary_search_by_key(&row, |(i, _)| *i)
            .ok()
            .map(|pos| self.edits[pos].1.as_slice())
    }
}

/// Candidate 0 is always the no-op.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateBatch {
    pub candidates: Vec<Candidate>,
}

impl CandidateBatch {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Everything a proposal strategy sees in one iteration.
#[derive(Debug, Clone, Copy)]
pub struct ProposalContext<'a> {
    pub schema: &'a Schema,
    /// Current iterate, row-major.
    pub values: &'a [f64],
    /// Editable rows, ascending.
    pub rows: &'a [usize],
    pub guidance: &'a GuidanceField,
    pub cone: &'a ConeParams,
    /// Features edited per selected row.
    pub h: usize,
    pub tables: &'a EmbeddingTables,
    pub seed: u64,
    pub iteration: usize,
}

impl ProposalContext<'_> {
    fn row(&self, i: usize) -> &[f64] {
        let d = self.schema.len();
        &self.values[i * d..(i + 1) * d]
    }

    /// One cone move on a uniformly chosen subset of `min(h, #actionable)` features.
    fn propose_row(&self, row_index: usize, base: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.propose_row_keeping(row_index, base, &[], rng)
    }

    /// Like `propose_row`, but the subset always contains `keep` (features
    /// already changed in `base`), so the row stays within the `h` budget.
    fn propose_row_keeping(&self, row_index: usize, base: &[f64], keep: &[usize], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let actionable: Vec<usize> = self.schema.actionable().into_iter().filter(|p| !keep.contains(p)).collect();
        let take = self.h.saturating_sub(keep.len()).min(actionable.len());
        if take == 0 && keep.is_empty() {
            return base.to_vec();
        }
        let mut chosen: Vec<usize> = sample_indices(rng, actionable.len(), take)
            .into_iter()
            .map(|j| actionable[j])
            .chain(keep.iter().copied())
            .collect();
        chosen.sort_unstable();
        let (cats, nums): (Vec<usize>, Vec<usize>) =
            chosen.into_iter().partition(|&p| self.schema.feature(p).is_categorical());
        let g = self.guidance.get(row_index);
        let next = propose_numeric_row(base, &nums, g, self.cone, self.schema, rng);
        let mut next = propose_categorical_row(&next, &cats, g, self.cone, self.tables, self.schema, rng);
        project_in_place(&mut next, self.schema);
        next
    }

    fn row_rng(&self, candidate: usize, row: usize) -> ChaCha8Rng {
        stream_rng(&[self.seed, self.iteration as u64, candidate as u64, row as u64])
    }

    fn candidate_rng(&self, candidate: usize) -> ChaCha8Rng {
        stream_rng(&[self.seed, self.iteration as u64, candidate as u64, CANDIDATE_STREAM])
    }

    fn collect_edits(&self, rows: impl Iterator<Item = (usize, Vec<f64>)>) -> Candidate {
        Candidate {
            edits: rows.filter(|(i, r)| r.as_slice() != self.row(*i)).collect(),
        }
    }

    fn monte_carlo_candidate(&self, m: usize) -> Candidate {
        self.collect_edits(self.rows.iter().map(|&i| {
            let mut rng = self.row_rng(m, i);
            (i, self.propose_row(i, self.row(i), &mut rng))
        }))
    }
}

/// `m` independent cone proposals over the editable rows, plus the no-op.
pub fn monte_carlo_propose(ctx: &ProposalContext<'_>, m: usize) -> CandidateBatch {
    let mut candidates = vec![Candidate::default()];
    candidates.par_extend((1..=m).into_par_iter().map(|c| ctx.monte_carlo_candidate(c)));
    CandidateBatch { candidates }
}

/// One generation of crossover and guided mutation.
///
/// Parents are the elite patches carried from the previous iteration. Each
/// offspring draws two parents and, per editable row, replays that row's
/// cells from one of them with probability 1/2 onto the current iterate
/// (rows a parent did not edit stay as they are). Each offspring row is then
/// mutated with probability `p_mut` by the cone primitive, reusing the cells
/// it already changed so the row keeps to `h` features. With no elite the
/// generation is a fresh Monte Carlo batch, mutated the same way.
pub fn genetic_propose(ctx: &ProposalContext<'_>, m: usize, p_mut: f64, elite: &[Patch]) -> CandidateBatch {
    let mut candidates = vec![Candidate::default()];
    candidates.par_extend((1..=m).into_par_iter().map(|c| {
        let mut crng = ctx.candidate_rng(c);
        let inherited: Vec<(usize, Vec<f64>)> = if elite.is_empty() {
            let fresh = ctx.monte_carlo_candidate(c);
            ctx.rows
                .iter()
                .map(|&i| (i, fresh.edit_for(i).unwrap_or(ctx.row(i)).to_vec()))
                .collect()
        } else {
            let a = &elite[crng.random_range(0..elite.len())];
            let b = &elite[crng.random_range(0..elite.len())];
            ctx.rows
                .iter()
                .map(|&i| {
                    let parent = if crng.random_bool(0.5) { a } else { b };
                    let mut row = ctx.row(i).to_vec();
                    for &(p, v) in parent.cells_for(i).unwrap_or(&[]) {
                        if !ctx.schema.feature(p).immutable {
                            row[p] = v;
                        }
                    }
                    project_in_place(&mut row, ctx.schema);
                    (i, row)
                })
                .collect()
        };
        let offspring = inherited.into_iter().map(|(i, r)| {
            if p_mut > 0.0 && crng.random_bool(p_mut) {
                let changed: Vec<usize> = (0..r.len()).filter(|&p| r[p] != ctx.row(i)[p]).collect();
                // Offset keeps mutation draws apart from the fresh-proposal streams.
                let mut rng = ctx.row_rng(c + m + 1, i);
                (i, ctx.propose_row_keeping(i, &r, &changed, &mut rng))
            } else {
                (i, r)
            }
        });
        ctx.collect_edits(offspring)
    }));
    CandidateBatch { candidates }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::Feature;

    fn angle(a: &[f64], b: &[f64]) -> f64 {
        let c = crate::transport::dot(a, b) / (norm(a) * norm(b));
        c.clamp(-1.0, 1.0).acos()
    }

    #[test]
    fn zero_cone_returns_anchor() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(cone_direction(&[0.0, 1.0, 0.0], 0.0, &mut rng), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn cone_containment() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let anchor = [0.3, -0.5, 0.2, 0.7];
        for _ in 0..2000 {
            let d = cone_direction(&anchor, 0.3, &mut rng);
            assert!((norm(&d) - 1.0).abs() < 1e-12);
            assert!(angle(&d, &anchor) <= 0.3 + 1e-9);
        }
    }

    #[test]
    fn one_dimensional_cone_is_sign_choice() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert_eq!(cone_direction(&[2.0], 1.0, &mut rng), vec![1.0]);
        }
    }

    #[test]
    fn embeddings_deterministic() {
        let s = Schema::new(vec![
            Feature::numerical("a", 0.0, 1.0),
            Feature::categorical("c", ["w", "x", "y", "z"]),
        ])
        .unwrap();
        let t = build_embeddings(&s, 9);
        assert_eq!(t, build_embeddings(&s, 9));
        assert_ne!(t, build_embeddings(&s, 10));
        let table = t.get(1).unwrap();
        assert_eq!(table.dim(), 3);
        assert_eq!(table.levels(), 4);
        assert!(t.get(0).is_none());
        let only_num = Schema::new(vec![Feature::numerical("a", 0.0, 1.0)]).unwrap();
        assert_eq!(build_embeddings(&only_num, 1).count(), 0);
    }

    #[test]
    fn numeric_step_follows_negative_guidance() {
        let s = Schema::new(vec![Feature::numerical("a", 0.0, 10.0), Feature::numerical("b", 0.0, 10.0)]).unwrap();
        let cone = ConeParams {
            phi: 0.0,
            ..ConeParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let r = propose_numeric_row(&[5.0, 5.0], &[0, 1], Some(&[1.0, 0.0]), &cone, &s, &mut rng);
            assert!(r[0] <= 5.0);
            assert_eq!(r[1], 5.0);
        }
        let r = propose_numeric_row(&[10.0, 5.0], &[0], Some(&[-1.0, 0.0]), &cone, &s, &mut rng);
        assert_eq!(r[0], 10.0);
        let r = propose_numeric_row(&[3.0, 4.0], &[], Some(&[1.0, 1.0]), &cone, &s, &mut rng);
        assert_eq!(r, vec![3.0, 4.0]);
    }

    #[test]
    fn categorical_with_only_current_admissible_is_noop() {
        let s = Schema::new(vec![Feature::categorical("c", ["a", "b", "c"]).with_admissible(&["b"]).unwrap()]).unwrap();
        let t = build_embeddings(&s, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let r = propose_categorical_row(&[1.0], &[0], Some(&[0.3]), &ConeParams::default(), &t, &s, &mut rng);
            assert_eq!(r, vec![1.0]);
        }
        let empty = Schema::new(vec![Feature::categorical("c", ["a", "b"]).with_admissible::<&str>(&[]).unwrap()]).unwrap();
        let t = build_embeddings(&empty, 1);
        let r = propose_categorical_row(&[0.0], &[0], None, &ConeParams::default(), &t, &empty, &mut rng);
        assert_eq!(r, vec![0.0]);
    }

    #[test]
    fn cold_decode_picks_nearest() {
        let s = Schema::new(vec![Feature::categorical("c", ["a", "b", "c", "d", "e"])]).unwrap();
        let t = build_embeddings(&s, 3);
        let table = t.get(0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for v in 0..5 {
            let z = table.embedding(v).to_vec();
            assert_eq!(decode_level(table, &z, &[0, 1, 2, 3, 4], 1e-9, &mut rng), v);
        }
    }

    #[test]
    fn stream_keys_are_distinct() {
        let a: u64 = stream_rng(&[1, 2, 3]).random();
        let b: u64 = stream_rng(&[1, 2, 4]).random();
        let c: u64 = stream_rng(&[1, 2, 3]).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}
