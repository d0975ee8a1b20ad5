//! Joint topologies and partitioned graph adjacency.
//!
//! A [`TopologySpec`] names the joints of a skeleton, their connectivity,
//! and the center joint used to orient the graph. From it this module
//! derives the limb list, per-joint hop distances, and the three-way
//! partitioned, symmetrically normalized adjacency (root / centripetal /
//! centrifugal) used by spatial graph convolutions, plus a reference
//! spatial aggregation step for validating that adjacency.
//!
//! Two topologies ship built in: `base22` (the first 22 OpenPose BODY_25
//! points) and `face41` (base22 plus 19 facial landmarks). Both are stored
//! as plain-text config documents in the same format accepted from user
//! files, so alternative layouts need no code changes.

use std::collections::{HashSet, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

const BASE22_CONFIG: &str = include_str!("topologies/base22.topo");
const FACE41_CONFIG: &str = include_str!("topologies/face41.topo");

/// Where a joint's keypoint comes from in the raw OpenPose arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointSource {
    /// Index into the 25-point body array.
    Body(usize),
    /// Index into the 70-point face array.
    Face(usize),
}

/// A named joint layout: joint count, undirected edges, center joint.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologySpec {
    pub name: String,
    pub num_joints: usize,
    /// Undirected edges with endpoints normalized to `(min, max)`,
    /// kept in declaration order.
    pub edges: Vec<(usize, usize)>,
    /// Joint whose hop distances orient the partition.
    pub center: usize,
    pub joint_names: Option<Vec<String>>,
    /// Per-joint keypoint source, when the topology doubles as a loading map.
    pub sources: Option<Vec<JointSource>>,
}

impl TopologySpec {
    /// Validates endpoints, self-loops, duplicates, connectivity, and the
    /// center index.
    pub fn new(
        name: impl Into<String>,
        num_joints: usize,
        edges: Vec<(usize, usize)>,
        center: usize,
    ) -> Result<Self, TopologyError> {
        let name = name.into();
        if center >= num_joints {
            return Err(TopologyError::CenterOutOfRange { center, num_joints });
        }
        let mut normalized = Vec::with_capacity(edges.len());
        let mut seen = HashSet::with_capacity(edges.len());
        for (a, b) in edges {
            if a >= num_joints || b >= num_joints {
                return Err(TopologyError::EdgeOutOfRange { a, b, num_joints });
            }
            if a == b {
                return Err(TopologyError::SelfLoop(a));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(TopologyError::DuplicateEdge(e.0, e.1));
            }
            normalized.push(e);
        }
        let spec = Self {
            name,
            num_joints,
            edges: normalized,
            center,
            joint_names: None,
            sources: None,
        };
        let unreachable = spec.unreachable_from(spec.center);
        if !unreachable.is_empty() {
            return Err(TopologyError::Disconnected(unreachable));
        }
        Ok(spec)
    }

    pub fn with_joint_names(mut self, names: Vec<String>) -> Result<Self, TopologyError> {
        if names.len() != self.num_joints {
            return Err(TopologyError::MetadataLength {
                expected: self.num_joints,
                actual: names.len(),
            });
        }
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(TopologyError::DuplicateJointName(n.clone()));
            }
        }
        self.joint_names = Some(names);
        Ok(self)
    }

    pub fn with_sources(mut self, sources: Vec<JointSource>) -> Result<Self, TopologyError> {
        if sources.len() != self.num_joints {
            return Err(TopologyError::MetadataLength {
                expected: self.num_joints,
                actual: sources.len(),
            });
        }
        self.sources = Some(sources);
        Ok(self)
    }

    fn adjacency_list(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_joints];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    fn unreachable_from(&self, start: usize) -> Vec<usize> {
        let adj = self.adjacency_list();
        let mut seen = vec![false; self.num_joints];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(v) = queue.pop_front() {
            for &n in &adj[v] {
                if !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
        (0..self.num_joints).filter(|&v| !seen[v]).collect()
    }

    /// Parses a topology config document. Lines are `keyword args...`;
    /// `#` lines are comments; `hop` and `partition` lines (emitted as
    /// derived annotations by `topology-dump`) are skipped.
    pub fn parse_config(text: &str) -> Result<Self, TopologyError> {
        let parse_err =
            |line: usize, msg: String| TopologyError::Parse { line: line + 1, msg };
        let mut name: Option<String> = None;
        let mut num_joints: Option<usize> = None;
        let mut center_token: Option<(usize, String)> = None;
        let mut joints: Vec<(usize, String, Option<JointSource>, usize)> = Vec::new();
        let mut edge_tokens: Vec<(usize, String, String)> = Vec::new();

        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match tokens[0] {
                "name" => match tokens.as_slice() {
                    [_, n] => name = Some(n.to_string()),
                    _ => return Err(parse_err(ln, "expected `name <identifier>`".into())),
                },
                "num_joints" => match tokens.as_slice() {
                    [_, n] => {
                        num_joints = Some(n.parse().map_err(|_| {
                            parse_err(ln, format!("invalid joint count `{n}`"))
                        })?)
                    }
                    _ => return Err(parse_err(ln, "expected `num_joints <count>`".into())),
                },
                "center" => match tokens.as_slice() {
                    [_, c] => center_token = Some((ln, c.to_string())),
                    _ => return Err(parse_err(ln, "expected `center <joint>`".into())),
                },
                "joint" => {
                    let (idx, jname, source) = match tokens.as_slice() {
                        [_, idx, jname] => (idx, jname, None),
                        [_, idx, jname, kind, src] => {
                            let src_idx: usize = src.parse().map_err(|_| {
                                parse_err(ln, format!("invalid source index `{src}`"))
                            })?;
                            let source = match *kind {
                                "body" => JointSource::Body(src_idx),
                                "face" => JointSource::Face(src_idx),
                                other => {
                                    return Err(parse_err(
                                        ln,
                                        format!("unknown source array `{other}` (body|face)"),
                                    ))
                                }
                            };
                            (idx, jname, Some(source))
                        }
                        _ => {
                            return Err(parse_err(
                                ln,
                                "expected `joint <index> <name> [body|face <source-index>]`"
                                    .into(),
                            ))
                        }
                    };
                    let idx: usize = idx
                        .parse()
                        .map_err(|_| parse_err(ln, format!("invalid joint index `{idx}`")))?;
                    joints.push((idx, jname.to_string(), source, ln));
                }
                "edge" => match tokens.as_slice() {
                    [_, a, b] => edge_tokens.push((ln, a.to_string(), b.to_string())),
                    _ => return Err(parse_err(ln, "expected `edge <joint> <joint>`".into())),
                },
                // Derived annotations from `topology-dump`; not part of the graph.
                "hop" | "partition" => continue,
                other => {
                    return Err(parse_err(ln, format!("unknown keyword `{other}`")));
                }
            }
        }

        let name = name.ok_or_else(|| parse_err(0, "missing `name` line".into()))?;
        let num_joints =
            num_joints.ok_or_else(|| parse_err(0, "missing `num_joints` line".into()))?;

        // Resolve joint metadata.
        let mut names: Option<Vec<String>> = None;
        let mut sources: Option<Vec<JointSource>> = None;
        if !joints.is_empty() {
            let mut name_vec = vec![String::new(); num_joints];
            let mut source_vec = vec![JointSource::Body(0); num_joints];
            let mut defined = vec![false; num_joints];
            for (idx, jname, source, ln) in &joints {
                if *idx >= num_joints {
                    return Err(parse_err(
                        *ln,
                        format!("joint index {idx} out of range for {num_joints} joints"),
                    ));
                }
                if defined[*idx] {
                    return Err(parse_err(*ln, format!("joint {idx} defined twice")));
                }
                defined[*idx] = true;
                name_vec[*idx] = jname.clone();
                source_vec[*idx] = source.unwrap_or(JointSource::Body(*idx));
            }
            if let Some(missing) = defined.iter().position(|d| !d) {
                return Err(parse_err(
                    0,
                    format!("joint {missing} has no `joint` line"),
                ));
            }
            names = Some(name_vec);
            sources = Some(source_vec);
        }

        let lookup = |ln: usize, token: &str| -> Result<usize, TopologyError> {
            if let Ok(idx) = token.parse::<usize>() {
                return Ok(idx);
            }
            names
                .as_ref()
                .and_then(|ns| ns.iter().position(|n| n == token))
                .ok_or_else(|| parse_err(ln, format!("unknown joint `{token}`")))
        };

        let center = match center_token {
            Some((ln, token)) => lookup(ln, &token)?,
            None => return Err(parse_err(0, "missing `center` line".into())),
        };
        let mut edges = Vec::with_capacity(edge_tokens.len());
        for (ln, a, b) in edge_tokens {
            edges.push((lookup(ln, &a)?, lookup(ln, &b)?));
        }

        let mut spec = Self::new(name, num_joints, edges, center)?;
        if let Some(ns) = names {
            spec = spec.with_joint_names(ns)?;
        }
        if let Some(ss) = sources {
            spec = spec.with_sources(ss)?;
        }
        Ok(spec)
    }

    /// Serializes back to the config format parsed by [`parse_config`].
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "name {}", self.name);
        let _ = writeln!(out, "num_joints {}", self.num_joints);
        let _ = writeln!(out, "center {}", self.center);
        if let Some(names) = &self.joint_names {
            for (i, n) in names.iter().enumerate() {
                match self.sources.as_ref().map(|s| s[i]) {
                    Some(JointSource::Body(k)) => {
                        let _ = writeln!(out, "joint {i} {n} body {k}");
                    }
                    Some(JointSource::Face(k)) => {
                        let _ = writeln!(out, "joint {i} {n} face {k}");
                    }
                    None => {
                        let _ = writeln!(out, "joint {i} {n}");
                    }
                }
            }
        }
        for &(a, b) in &self.edges {
            match &self.joint_names {
                Some(names) => {
                    let _ = writeln!(out, "edge {} {}", names[a], names[b]);
                }
                None => {
                    let _ = writeln!(out, "edge {a} {b}");
                }
            }
        }
        out
    }

    pub fn joint_name(&self, idx: usize) -> Option<&str> {
        self.joint_names.as_ref()?.get(idx).map(String::as_str)
    }
}

/// Names of the built-in topologies accepted by [`builtin_topology`].
pub const BUILTIN_TOPOLOGIES: [&str; 2] = ["base22", "face41"];

/// Returns a built-in topology by name (`base22` or `face41`).
pub fn builtin_topology(name: &str) -> Result<TopologySpec, TopologyError> {
    let config = match name {
        "base22" => BASE22_CONFIG,
        "face41" => FACE41_CONFIG,
        _ => {
            return Err(TopologyError::UnknownBuiltin {
                name: name.to_string(),
                available: BUILTIN_TOPOLOGIES.join(", "),
            })
        }
    };
    TopologySpec::parse_config(config)
}

/// The limb list: edges sorted lexicographically by `(min, max)` endpoints.
/// This ordering defines the limb-heatmap channel order.
pub fn limbs(topo: &TopologySpec) -> Vec<(usize, usize)> {
    let mut edges = topo.edges.clone();
    edges.sort_unstable();
    edges
}

/// Breadth-first hop count from the center joint to every joint.
pub fn hop_distances(topo: &TopologySpec) -> Result<Vec<usize>, TopologyError> {
    let adj = topo.adjacency_list();
    let mut dist = vec![usize::MAX; topo.num_joints];
    let mut queue = VecDeque::from([topo.center]);
    dist[topo.center] = 0;
    while let Some(v) = queue.pop_front() {
        for &n in &adj[v] {
            if dist[n] == usize::MAX {
                dist[n] = dist[v] + 1;
                queue.push_back(n);
            }
        }
    }
    let unreachable: Vec<usize> =
        (0..topo.num_joints).filter(|&v| dist[v] == usize::MAX).collect();
    if !unreachable.is_empty() {
        return Err(TopologyError::Disconnected(unreachable));
    }
    Ok(dist)
}

/// Dense row-major f64 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in &rows {
            assert_eq!(r.len(), ncols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self { rows: nrows, cols: ncols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Indices of nonzero entries, row-major order.
    pub fn support(&self) -> Vec<(usize, usize)> {
        let mut s = Vec::new();
        for i in 0..self.rows {
            for j in 0..self.cols {
                if self.at(i, j) != 0.0 {
                    s.push((i, j));
                }
            }
        }
        s
    }
}

/// The three neighbor subsets of the spatial partition strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partition {
    /// Same hop distance to the center (includes each joint itself).
    Root,
    /// Neighbor closer to the center.
    Centripetal,
    /// Neighbor farther from the center.
    Centrifugal,
}

impl Partition {
    pub const ALL: [Partition; 3] =
        [Partition::Root, Partition::Centripetal, Partition::Centrifugal];

    pub fn name(self) -> &'static str {
        match self {
            Partition::Root => "root",
            Partition::Centripetal => "centripetal",
            Partition::Centrifugal => "centrifugal",
        }
    }

    fn index(self) -> usize {
        match self {
            Partition::Root => 0,
            Partition::Centripetal => 1,
            Partition::Centrifugal => 2,
        }
    }
}

/// The symmetrically normalized adjacency `D^(-1/2) (A + I) D^(-1/2)`
/// split into three matrices with pairwise disjoint supports. Their
/// entrywise sum reconstructs the normalized adjacency exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedAdjacency {
    pub num_joints: usize,
    matrices: [Matrix; 3],
}

impl PartitionedAdjacency {
    pub fn matrix(&self, p: Partition) -> &Matrix {
        &self.matrices[p.index()]
    }

    /// Entrywise sum of the three partitions.
    pub fn sum(&self) -> Matrix {
        let v = self.num_joints;
        let mut out = Matrix::zeros(v, v);
        for m in &self.matrices {
            for i in 0..v {
                for j in 0..v {
                    out.set(i, j, out.at(i, j) + m.at(i, j));
                }
            }
        }
        out
    }
}

/// How the partition matrices are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PartitionNormalization {
    /// `D^(-1/2) (A + I) D^(-1/2)` computed once, then masked. The three
    /// partitions sum back to the normalized adjacency exactly.
    #[default]
    Symmetric,
    /// Each masked partition is normalized by its own degrees; joints
    /// absent from a partition keep zero rows/columns.
    PerPartition,
}

/// Builds the partitioned normalized adjacency of a topology with the
/// default symmetric normalization.
///
/// Each support entry `(i, j)` of `A + I` (so `j` adjacent to `i`, or the
/// diagonal) is assigned to exactly one partition by comparing hop
/// distances to the center: equal hops go to root (the diagonal always
/// does), `hop(j) < hop(i)` to centripetal, `hop(j) > hop(i)` to
/// centrifugal. Normalization is applied before masking, so the three
/// matrices sum back to `D^(-1/2) (A + I) D^(-1/2)` exactly.
pub fn partition_adjacency(topo: &TopologySpec) -> Result<PartitionedAdjacency, TopologyError> {
    partition_adjacency_with(topo, PartitionNormalization::Symmetric)
}

#[allow(clippy::needless_range_loop)] // index loops mirror the matrix math
pub fn partition_adjacency_with(
    topo: &TopologySpec,
    normalization: PartitionNormalization,
) -> Result<PartitionedAdjacency, TopologyError> {
    let hops = hop_distances(topo)?;
    let v = topo.num_joints;
    let adj = topo.adjacency_list();
    // Degrees of A + I: neighbor count plus the self-loop.
    let degree: Vec<f64> = adj.iter().map(|n| (n.len() + 1) as f64).collect();
    let norm = |i: usize, j: usize| 1.0 / (degree[i] * degree[j]).sqrt();

    let mut matrices = [Matrix::zeros(v, v), Matrix::zeros(v, v), Matrix::zeros(v, v)];
    let assign = |hi: usize, hj: usize| -> Partition {
        use std::cmp::Ordering::*;
        match hj.cmp(&hi) {
            Equal => Partition::Root,
            Less => Partition::Centripetal,
            Greater => Partition::Centrifugal,
        }
    };
    for i in 0..v {
        matrices[Partition::Root.index()].set(i, i, 1.0);
        for &j in &adj[i] {
            let p = assign(hops[i], hops[j]);
            matrices[p.index()].set(i, j, 1.0);
        }
    }
    match normalization {
        PartitionNormalization::Symmetric => {
            for m in &mut matrices {
                for i in 0..v {
                    for j in 0..v {
                        if m.at(i, j) != 0.0 {
                            m.set(i, j, norm(i, j));
                        }
                    }
                }
            }
        }
        PartitionNormalization::PerPartition => {
            // Masks need not be symmetric, so rows and columns carry
            // separate degrees; both are >= 1 wherever an entry exists.
            for m in &mut matrices {
                let row_degree: Vec<f64> =
                    (0..v).map(|i| (0..v).map(|j| m.at(i, j)).sum()).collect();
                let col_degree: Vec<f64> =
                    (0..v).map(|j| (0..v).map(|i| m.at(i, j)).sum()).collect();
                for i in 0..v {
                    for j in 0..v {
                        if m.at(i, j) != 0.0 {
                            m.set(i, j, 1.0 / (row_degree[i] * col_degree[j]).sqrt());
                        }
                    }
                }
            }
        }
    }
    Ok(PartitionedAdjacency { num_joints: v, matrices })
}

/// Per-frame, per-joint feature channels, dense `frames x joints x channels`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatures {
    pub frames: usize,
    pub joints: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl NodeFeatures {
    pub fn zeros(frames: usize, joints: usize, channels: usize) -> Self {
        Self { frames, joints, channels, data: vec![0.0; frames * joints * channels] }
    }

    pub fn from_vec(
        frames: usize,
        joints: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self, TopologyError> {
        if data.len() != frames * joints * channels {
            return Err(TopologyError::ShapeMismatch {
                axis: "features",
                expected: frames * joints * channels,
                actual: data.len(),
            });
        }
        Ok(Self { frames, joints, channels, data })
    }

    pub fn at(&self, t: usize, v: usize, c: usize) -> f64 {
        self.data[(t * self.joints + v) * self.channels + c]
    }

    pub fn set(&mut self, t: usize, v: usize, c: usize, value: f64) {
        self.data[(t * self.joints + v) * self.channels + c] = value;
    }
}

/// Reference spatial aggregation: `out[t] = sum_k A_k * features[t] * W_k`
/// over the three partitions. This is the spatial step of a partitioned
/// graph convolution, kept as plain loops for validation, not training.
pub fn spatial_graph_aggregate(
    features: &NodeFeatures,
    pa: &PartitionedAdjacency,
    weights: &[Matrix; 3],
) -> Result<NodeFeatures, TopologyError> {
    if features.joints != pa.num_joints {
        return Err(TopologyError::ShapeMismatch {
            axis: "joints",
            expected: pa.num_joints,
            actual: features.joints,
        });
    }
    let (c_in, c_out) = (weights[0].rows(), weights[0].cols());
    for w in weights.iter().skip(1) {
        if w.rows() != c_in || w.cols() != c_out {
            return Err(TopologyError::ShapeMismatch {
                axis: "weights",
                expected: c_in * c_out,
                actual: w.rows() * w.cols(),
            });
        }
    }
    if features.channels != c_in {
        return Err(TopologyError::ShapeMismatch {
            axis: "channels",
            expected: c_in,
            actual: features.channels,
        });
    }

    let v = features.joints;
    let mut out = NodeFeatures::zeros(features.frames, v, c_out);
    let mut mixed = vec![0.0f64; v * c_in];
    for t in 0..features.frames {
        for (k, p) in Partition::ALL.iter().enumerate() {
            let a = pa.matrix(*p);
            // mixed = A_k * features[t]
            for (i, row) in mixed.chunks_mut(c_in).enumerate() {
                row.fill(0.0);
                for j in 0..v {
                    let aij = a.at(i, j);
                    if aij == 0.0 {
                        continue;
                    }
                    for (c, slot) in row.iter_mut().enumerate() {
                        *slot += aij * features.at(t, j, c);
                    }
                }
            }
            // out[t] += mixed * W_k
            let w = &weights[k];
            for i in 0..v {
                for co in 0..c_out {
                    let mut acc = 0.0;
                    for ci in 0..c_in {
                        acc += mixed[i * c_in + ci] * w.at(ci, co);
                    }
                    out.set(t, i, co, out.at(t, i, co) + acc);
                }
            }
        }
    }
    Ok(out)
}

fn fmt_joint_list(joints: &[usize]) -> String {
    joints
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("unknown topology `{name}`; available: {available}")]
    UnknownBuiltin { name: String, available: String },
    #[error("edge ({a}, {b}) endpoint out of range for {num_joints} joints")]
    EdgeOutOfRange { a: usize, b: usize, num_joints: usize },
    #[error("self-loop edge at joint {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("center joint {center} out of range for {num_joints} joints")]
    CenterOutOfRange { center: usize, num_joints: usize },
    #[error("graph is disconnected; unreachable joints: {}", fmt_joint_list(.0))]
    Disconnected(Vec<usize>),
    #[error("metadata length {actual} does not match joint count {expected}")]
    MetadataLength { expected: usize, actual: usize },
    #[error("duplicate joint name `{0}`")]
    DuplicateJointName(String),
    #[error("topology config line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("shape mismatch on {axis} axis: expected {expected}, got {actual}")]
    ShapeMismatch { axis: &'static str, expected: usize, actual: usize },
}
