//! Viewpoint-pose tree: a supervised hierarchical k-means vocabulary tree
//! for joint class/viewpoint template retrieval.
//!
//! Templates are feature sets extracted from renders of every database
//! model at every training viewpoint. Training recursively splits the
//! descriptor space into `|D|` cells per level, seeding each split with one
//! feature per model present in the cell so that class structure guides the
//! vocabulary. Retrieval pushes a query's features down the tree and
//! compares weighted path-count vectors.

use crate::features::{FeatureConfig, FeatureSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const VPTREE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum VpTreeError {
    #[error("training input: {0}")]
    TrainingInput(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("unsupported vptree format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },
}

/// Identifies one training template: model index `l` and training-viewpoint
/// index `g`, both 1-based. Models of interest occupy the lowest `l`
/// indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TemplateId {
    pub l: u32,
    pub g: u32,
}

impl TemplateId {
    pub fn new(l: u32, g: u32) -> Self {
        TemplateId { l, g }
    }
}

impl std::fmt::Display for TemplateId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(l={}, g={})", self.l, self.g)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VocabNode {
    pub center: Vec<f64>,
    pub children: Vec<u32>,
    /// Number of templates with at least one feature through this node.
    pub eta: u32,
    /// Relevance weight `ln(|T| / eta)`.
    pub weight: f64,
}

/// Sparse weighted path-count vector over node ids (sorted, nonzero
/// entries only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PathVector {
    pub entries: Vec<(u32, f64)>,
}

impl PathVector {
    pub fn l1(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v.abs()).sum()
    }
}

/// Relevance score `s = || d/||d||_1 - q/||q||_1 ||_1`, in [0, 2].
pub fn score(q: &PathVector, d: &PathVector) -> Result<f64, VpTreeError> {
    let (qn, dn) = (q.l1(), d.l1());
    if qn <= 0.0 || dn <= 0.0 {
        return Err(VpTreeError::InvalidArgument(
            "cannot score a zero-weight path vector".into(),
        ));
    }
    let mut total = 0.0;
    let (mut i, mut j) = (0, 0);
    while i < q.entries.len() || j < d.entries.len() {
        let qi = q.entries.get(i);
        let dj = d.entries.get(j);
        match (qi, dj) {
            (Some(&(qk, qv)), Some(&(dk, dv))) => {
                use std::cmp::Ordering::*;
                match qk.cmp(&dk) {
                    Less => {
                        total += (qv / qn).abs();
                        i += 1;
                    }
                    Greater => {
                        total += (dv / dn).abs();
                        j += 1;
                    }
                    Equal => {
                        total += (dv / dn - qv / qn).abs();
                        i += 1;
                        j += 1;
                    }
                }
            }
            (Some(&(_, qv)), None) => {
                total += (qv / qn).abs();
                i += 1;
            }
            (None, Some(&(_, dv))) => {
                total += (dv / dn).abs();
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TemplateEntry {
    id: TemplateId,
    desc: PathVector,
}

/// Training corpus: one feature set per (model, training viewpoint) pair,
/// complete over the `l x g` grid, with interest models first.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub g_count: u32,
    pub interest_count: u32,
    /// `l_to_class[l-1]` is the database class id of model index `l`.
    pub l_to_class: Vec<u32>,
    pub model_names: Vec<String>,
    pub templates: BTreeMap<TemplateId, FeatureSet>,
}

impl TrainingSet {
    pub fn model_count(&self) -> u32 {
        self.l_to_class.len() as u32
    }

    fn validate(&self) -> Result<(), VpTreeError> {
        if self.model_count() < 2 {
            return Err(VpTreeError::TrainingInput(
                "training needs at least 2 models".into(),
            ));
        }
        if self.interest_count == 0 || self.interest_count > self.model_count() {
            return Err(VpTreeError::TrainingInput(format!(
                "interest count {} out of range for {} models",
                self.interest_count,
                self.model_count()
            )));
        }
        if self.model_names.len() != self.l_to_class.len() {
            return Err(VpTreeError::TrainingInput(
                "model name list does not match the class map".into(),
            ));
        }
        for l in 1..=self.model_count() {
            for g in 1..=self.g_count {
                let id = TemplateId::new(l, g);
                match self.templates.get(&id) {
                    None => {
                        return Err(VpTreeError::TrainingInput(format!(
                            "missing template {id}"
                        )))
                    }
                    Some(fs) if fs.is_degenerate() => {
                        return Err(VpTreeError::TrainingInput(format!(
                            "template {id} is degenerate ({} descriptors)",
                            fs.descriptors.len()
                        )))
                    }
                    _ => {}
                }
            }
        }
        if self.templates.len() as u32 != self.model_count() * self.g_count {
            return Err(VpTreeError::TrainingInput(format!(
                "expected {} templates, got {}",
                self.model_count() * self.g_count,
                self.templates.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VpTreeParams {
    pub max_levels: u32,
    pub kmeans_iters: u32,
    pub seed: u64,
}

impl Default for VpTreeParams {
    fn default() -> Self {
        VpTreeParams {
            max_levels: 4,
            kmeans_iters: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VpTree {
    format_version: u32,
    pub feature_config: FeatureConfig,
    pub params: VpTreeParams,
    pub g_count: u32,
    pub interest_count: u32,
    pub l_to_class: Vec<u32>,
    pub model_names: Vec<String>,
    nodes: Vec<VocabNode>,
    templates: Vec<TemplateEntry>,
}

struct TrainContext<'a> {
    features: &'a [&'a [f64]],
    /// Model index (1-based l) of each feature.
    feature_model: &'a [u32],
    branching: usize,
    params: VpTreeParams,
}

impl VpTree {
    /// Train a tree over a complete template grid. Construction is
    /// deterministic given `params.seed`.
    pub fn train(
        set: &TrainingSet,
        feature_config: FeatureConfig,
        params: VpTreeParams,
    ) -> Result<VpTree, VpTreeError> {
        set.validate()?;
        if params.max_levels == 0 {
            return Err(VpTreeError::InvalidArgument("max_levels must be >= 1".into()));
        }

        // Flatten features with their template of origin.
        let mut owners: Vec<TemplateId> = Vec::new();
        let mut feats: Vec<&[f64]> = Vec::new();
        let mut feature_model: Vec<u32> = Vec::new();
        for (id, fs) in &set.templates {
            for d in &fs.descriptors {
                owners.push(*id);
                feats.push(&d.values);
                feature_model.push(id.l);
            }
        }

        let ctx = TrainContext {
            features: &feats,
            feature_model: &feature_model,
            branching: set.model_count() as usize,
            params,
        };
        let mut nodes = Vec::new();
        let all: Vec<u32> = (0..feats.len() as u32).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        Self::build_node(&ctx, &all, 0, &mut nodes, &mut rng);

        // Descend every training feature to collect per-template path
        // counts, then derive eta and the weights.
        let template_count = set.templates.len() as f64;
        let paths: Vec<Vec<u32>> = feats.iter().map(|f| descend(&nodes, f)).collect();
        let mut per_node_templates: Vec<BTreeMap<TemplateId, u32>> =
            vec![BTreeMap::new(); nodes.len()];
        for (f_idx, path) in paths.iter().enumerate() {
            for &node in path {
                *per_node_templates[node as usize]
                    .entry(owners[f_idx])
                    .or_insert(0) += 1;
            }
        }
        for (node, seen) in nodes.iter_mut().zip(&per_node_templates) {
            node.eta = seen.len() as u32;
            node.weight = if node.eta == 0 {
                0.0
            } else {
                (template_count / node.eta as f64).ln()
            };
        }
        let mut template_descs: BTreeMap<TemplateId, PathVector> = set
            .templates
            .keys()
            .map(|id| (*id, PathVector::default()))
            .collect();
        for (node_idx, seen) in per_node_templates.iter().enumerate() {
            let w = nodes[node_idx].weight;
            if w <= 0.0 {
                continue;
            }
            for (id, &count) in seen {
                template_descs
                    .get_mut(id)
                    .unwrap()
                    .entries
                    .push((node_idx as u32, count as f64 * w));
            }
        }

        Ok(VpTree {
            format_version: VPTREE_FORMAT_VERSION,
            feature_config,
            params,
            g_count: set.g_count,
            interest_count: set.interest_count,
            l_to_class: set.l_to_class.clone(),
            model_names: set.model_names.clone(),
            nodes,
            templates: template_descs
                .into_iter()
                .map(|(id, desc)| TemplateEntry { id, desc })
                .collect(),
        })
    }

    fn build_node(
        ctx: &TrainContext<'_>,
        members: &[u32],
        level: u32,
        nodes: &mut Vec<VocabNode>,
        rng: &mut ChaCha8Rng,
    ) -> u32 {
        let dim = ctx.features[0].len();
        let mut center = vec![0.0; dim];
        for &f in members {
            for (c, v) in center.iter_mut().zip(ctx.features[f as usize]) {
                *c += v;
            }
        }
        for c in &mut center {
            *c /= members.len() as f64;
        }
        let index = nodes.len() as u32;
        nodes.push(VocabNode {
            center,
            children: Vec::new(),
            eta: 0,
            weight: 0.0,
        });

        let mut models_present: Vec<u32> = members
            .iter()
            .map(|&f| ctx.feature_model[f as usize])
            .collect();
        models_present.sort_unstable();
        models_present.dedup();

        let splittable = level < ctx.params.max_levels
            && members.len() >= 2 * ctx.branching
            && models_present.len() >= 2;
        if !splittable {
            return index;
        }

        // Supervised seeding: one randomly chosen feature per model present.
        let mut centers: Vec<Vec<f64>> = models_present
            .iter()
            .map(|&l| {
                let of_model: Vec<u32> = members
                    .iter()
                    .copied()
                    .filter(|&f| ctx.feature_model[f as usize] == l)
                    .collect();
                let pick = of_model[rng.gen_range(0..of_model.len())];
                ctx.features[pick as usize].to_vec()
            })
            .collect();

        let mut assignment = vec![0usize; members.len()];
        for _ in 0..ctx.params.kmeans_iters {
            for (slot, &f) in members.iter().enumerate() {
                assignment[slot] = nearest_center(&centers, ctx.features[f as usize]);
            }
            let mut sums = vec![vec![0.0; dim]; centers.len()];
            let mut counts = vec![0usize; centers.len()];
            for (slot, &f) in members.iter().enumerate() {
                counts[assignment[slot]] += 1;
                for (s, v) in sums[assignment[slot]].iter_mut().zip(ctx.features[f as usize]) {
                    *s += v;
                }
            }
            for (k, sum) in sums.into_iter().enumerate() {
                if counts[k] > 0 {
                    centers[k] = sum.into_iter().map(|s| s / counts[k] as f64).collect();
                }
                // Empty clusters keep their previous center.
            }
        }
        for (slot, &f) in members.iter().enumerate() {
            assignment[slot] = nearest_center(&centers, ctx.features[f as usize]);
        }

        let mut cells: Vec<Vec<u32>> = vec![Vec::new(); centers.len()];
        for (slot, &f) in members.iter().enumerate() {
            cells[assignment[slot]].push(f);
        }
        let mut children = Vec::new();
        for cell in cells.iter().filter(|c| !c.is_empty()) {
            children.push(Self::build_node(ctx, cell, level + 1, nodes, rng));
        }
        nodes[index as usize].children = children;
        index
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn template_count(&self) -> usize {
        self.templates.len()
    }

    pub fn template_ids(&self) -> impl Iterator<Item = TemplateId> + '_ {
        self.templates.iter().map(|t| t.id)
    }

    pub fn template_descriptor(&self, id: TemplateId) -> Option<&PathVector> {
        self.templates
            .binary_search_by(|t| t.id.cmp(&id))
            .ok()
            .map(|i| &self.templates[i].desc)
    }

    /// Weighted path counts of a query feature set.
    pub fn describe_query(&self, fs: &FeatureSet) -> Result<PathVector, VpTreeError> {
        if fs.is_degenerate() {
            return Err(VpTreeError::DegenerateInput(format!(
                "query {:?} is degenerate ({} descriptors)",
                fs.source,
                fs.descriptors.len()
            )));
        }
        let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
        for d in &fs.descriptors {
            for node in descend(&self.nodes, &d.values) {
                *counts.entry(node).or_insert(0) += 1;
            }
        }
        Ok(PathVector {
            entries: counts
                .into_iter()
                .filter_map(|(node, n)| {
                    let w = self.nodes[node as usize].weight;
                    (w > 0.0).then_some((node, n as f64 * w))
                })
                .collect(),
        })
    }

    /// Score every template against the query, ascending (best first), ties
    /// broken by (l, g).
    pub fn query(&self, fs: &FeatureSet) -> Result<Vec<(TemplateId, f64)>, VpTreeError> {
        let q = self.describe_query(fs)?;
        let mut ranked: Vec<(TemplateId, f64)> = self
            .templates
            .iter()
            .map(|t| Ok((t.id, score(&q, &t.desc)?)))
            .collect::<Result<_, VpTreeError>>()?;
        ranked.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        Ok(ranked)
    }

    pub fn save(&self, path: &Path) -> Result<(), VpTreeError> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, VpTreeError> {
        let file = std::fs::File::open(path)?;
        let tree: VpTree = serde_json::from_reader(std::io::BufReader::new(file))?;
        if tree.format_version != VPTREE_FORMAT_VERSION {
            return Err(VpTreeError::FormatVersion {
                found: tree.format_version,
                expected: VPTREE_FORMAT_VERSION,
            });
        }
        Ok(tree)
    }

    /// Digest of the serialized tree, used by downstream artifacts to pin
    /// the exact detector they were built against.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("vptree serializes");
        format!("{:x}", Sha256::digest(bytes))
    }
}

fn nearest_center(centers: &[Vec<f64>], feature: &[f64]) -> usize {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (k, c) in centers.iter().enumerate() {
        let d: f64 = c
            .iter()
            .zip(feature)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    best
}

/// Greedy root-to-leaf descent; returns visited node ids including the root.
fn descend(nodes: &[VocabNode], feature: &[f64]) -> Vec<u32> {
    let mut path = vec![0u32];
    let mut current = 0u32;
    loop {
        let node = &nodes[current as usize];
        if node.children.is_empty() {
            return path;
        }
        let mut best = node.children[0];
        let mut best_d = f64::INFINITY;
        for &child in &node.children {
            let c = &nodes[child as usize].center;
            let d: f64 = c
                .iter()
                .zip(feature)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d < best_d {
                best_d = d;
                best = child;
            }
        }
        path.push(best);
        current = best;
    }
}
