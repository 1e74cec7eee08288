//! Planar graph layouts.
//!
//! Three algorithms are provided: Fruchterman-Reingold force simulation,
//! Kamada-Kawai stress minimization, and classical multidimensional scaling.
//! The last two work from ideal node distances derived from the edge weights
//! (shortest paths over edge lengths `1 / weight` by default).

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Edge weight to ideal length mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeLength {
    /// `1 / weight`: stronger edges are shorter.
    #[default]
    Inverse,
    /// Every edge has length one.
    Unit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutInput {
    pub n_nodes: usize,
    /// `(a, b, weight)` with `weight > 0`.
    pub edges: Vec<(u32, u32, f64)>,
    pub seed: u64,
    pub width: f64,
    pub height: f64,
    pub edge_length: EdgeLength,
    /// Scale FR attraction by `weight / max weight`.
    pub weighted_attraction: bool,
}

impl LayoutInput {
    pub fn new(n_nodes: usize, edges: Vec<(u32, u32, f64)>) -> Self {
        Self {
            n_nodes,
            edges,
            seed: 0,
            width: 1.0,
            height: 1.0,
            edge_length: EdgeLength::Inverse,
            weighted_attraction: true,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_nodes == 0 {
            return Err(Error::Parameter("layout needs at least one node".into()));
        }
        if !(self.width > 0.0 && self.height > 0.0 && self.width.is_finite() && self.height.is_finite()) {
            return Err(Error::Parameter(format!(
                "invalid canvas {}x{}",
                self.width, self.height
            )));
        }
        for &(a, b, w) in &self.edges {
            if a as usize >= self.n_nodes || b as usize >= self.n_nodes {
                return Err(Error::Parameter(format!("edge ({a}, {b}) references a missing node")));
            }
            if a == b {
                return Err(Error::Parameter(format!("self-loop on node {a}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Parameter(format!("edge ({a}, {b}) has weight {w}")));
            }
        }
        Ok(())
    }

    fn length(&self, w: f64) -> f64 {
        match self.edge_length {
            EdgeLength::Inverse => 1.0 / w,
            EdgeLength::Unit => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Positions(pub Vec<[f64; 2]>);

impl Positions {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        dist(self.0[a], self.0[b])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|p| p[0].is_finite() && p[1].is_finite())
    }

    /// Uniformly scale and translate into `[0, w] × [0, h]`, centered.
    pub fn fit_to_canvas(&self, w: f64, h: f64) -> Positions {
        if self.0.is_empty() {
            return self.clone();
        }
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &self.0 {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let span = [hi[0] - lo[0], hi[1] - lo[1]];
        let scale = [w / span[0], h / span[1]]
            .into_iter()
            .filter(|s| s.is_finite())
            .fold(f64::INFINITY, f64::min);
        let scale = if scale.is_finite() { scale } else { 0.0 };
        let offset = [
            (w - span[0] * scale) / 2.0,
            (h - span[1] * scale) / 2.0,
        ];
        Positions(
            self.0
                .iter()
                .map(|p| {
                    [
                        ((p[0] - lo[0]) * scale + offset[0]).clamp(0.0, w),
                        ((p[1] - lo[1]) * scale + offset[1]).clamp(0.0, h),
                    ]
                })
                .collect(),
        )
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutAlgorithm {
    #[default]
    Fr,
    Kk,
    Mds,
}

impl FromStr for LayoutAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fr" => Ok(LayoutAlgorithm::Fr),
            "kk" => Ok(LayoutAlgorithm::Kk),
            "mds" => Ok(LayoutAlgorithm::Mds),
            other => Err(Error::Parameter(format!(
                "unknown layout `{other}` (expected fr, kk or mds)"
            ))),
        }
    }
}

impl fmt::Display for LayoutAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LayoutAlgorithm::Fr => "fr",
            LayoutAlgorithm::Kk => "kk",
            LayoutAlgorithm::Mds => "mds",
        })
    }
}

// ---------------------------------------------------------------------------
// Fruchterman-Reingold

pub const FR_DEFAULT_ITERATIONS: usize = 500;

/// Fruchterman-Reingold force-directed layout.
///
/// Starting positions are drawn uniformly over the canvas from a ChaCha8
/// generator seeded with `input.seed`; all force sums run in a fixed order,
/// so the result is bit-reproducible for a given input.
pub fn fruchterman_reingold(input: &LayoutInput, iterations: usize) -> Result<Positions> {
    input.validate()?;
    if iterations == 0 {
        return Err(Error::Parameter("iterations must be >= 1".into()));
    }
    let (w, h) = (input.width, input.height);
    let m = input.n_nodes;
    if m == 1 {
        return Ok(Positions(vec![[w / 2.0, h / 2.0]]));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(input.seed);
    let mut pos: Vec<[f64; 2]> = (0..m)
        .map(|_| [rng.gen::<f64>() * w, rng.gen::<f64>() * h])
        .collect();
    let k = (w * h / m as f64).sqrt();
    let k2 = k * k;
    let max_w = input.edges.iter().map(|e| e.2).fold(0.0, f64::max);
    let min_sep = 1e-9 * k;

    let mut disp = vec![[0.0f64; 2]; m];
    for it in 0..iterations {
        let temperature = 0.1 * w * (1.0 - it as f64 / iterations as f64);
        disp.iter_mut().for_each(|d| *d = [0.0, 0.0]);
        for a in 0..m {
            for b in a + 1..m {
                let (delta, d) = separation(pos[a], pos[b], a, b, min_sep);
                let f = k2 / d;
                for c in 0..2 {
                    disp[a][c] += delta[c] / d * f;
                    disp[b][c] -= delta[c] / d * f;
                }
            }
        }
        for &(a, b, wt) in &input.edges {
            let (a, b) = (a as usize, b as usize);
            let (delta, d) = separation(pos[a], pos[b], a, b, min_sep);
            let scale = if input.weighted_attraction { wt / max_w } else { 1.0 };
            let f = d * d / k * scale;
            for c in 0..2 {
                disp[a][c] -= delta[c] / d * f;
                disp[b][c] += delta[c] / d * f;
            }
        }
        for (p, dv) in pos.iter_mut().zip(&disp) {
            let len = dv[0].hypot(dv[1]);
            if len > 0.0 {
                let step = len.min(temperature) / len;
                p[0] = (p[0] + dv[0] * step).clamp(0.0, w);
                p[1] = (p[1] + dv[1] * step).clamp(0.0, h);
            }
        }
    }
    Ok(Positions(pos))
}

/// Vector from `q` to `p` and its length, with coincident points pushed
/// apart along a fixed direction.
fn separation(p: [f64; 2], q: [f64; 2], a: usize, b: usize, min_sep: f64) -> ([f64; 2], f64) {
    let delta = [p[0] - q[0], p[1] - q[1]];
    let d = delta[0].hypot(delta[1]);
    if d > min_sep {
        (delta, d)
    } else {
        let angle = (a * 7919 + b * 104_729) as f64;
        ([min_sep * angle.cos(), min_sep * angle.sin()], min_sep)
    }
}

// ---------------------------------------------------------------------------
// Ideal distances

#[derive(Clone, Copy, PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// All-pairs shortest-path distances over edge lengths. Unreachable pairs
/// get 1.5 × the largest finite distance (1.0 when there is none).
pub fn ideal_distances(input: &LayoutInput) -> Result<Vec<Vec<f64>>> {
    input.validate()?;
    let m = input.n_nodes;
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    for &(a, b, w) in &input.edges {
        let len = input.length(w);
        adj[a as usize].push((b as usize, len));
        adj[b as usize].push((a as usize, len));
    }
    let mut out = vec![vec![f64::INFINITY; m]; m];
    let mut heap = BinaryHeap::new();
    for (src, row) in out.iter_mut().enumerate() {
        row[src] = 0.0;
        heap.push(HeapItem(0.0, src));
        while let Some(HeapItem(d, u)) = heap.pop() {
            if d > row[u] {
                continue;
            }
            for &(v, len) in &adj[u] {
                let nd = d + len;
                if nd < row[v] {
                    row[v] = nd;
                    heap.push(HeapItem(nd, v));
                }
            }
        }
    }
    let max_finite = out
        .iter()
        .flatten()
        .copied()
        .filter(|d| d.is_finite())
        .fold(0.0, f64::max);
    let fill = if max_finite > 0.0 { 1.5 * max_finite } else { 1.0 };
    for row in &mut out {
        for d in row.iter_mut() {
            if d.is_infinite() {
                *d = fill;
            }
        }
    }
    // Symmetrize against floating-point path-order differences.
    for a in 0..m {
        for b in a + 1..m {
            let v = out[a][b].min(out[b][a]);
            out[a][b] = v;
            out[b][a] = v;
        }
    }
    Ok(out)
}

/// Layout stress `Σ_{i<j} (‖p_i − p_j‖ − d_ij)² / d_ij²`. Pairs with zero
/// ideal distance are ignored.
pub fn stress(positions: &Positions, distances: &[Vec<f64>]) -> f64 {
    let m = positions.len();
    let mut s = 0.0;
    for a in 0..m {
        for b in a + 1..m {
            let d = distances[a][b];
            if d > 0.0 {
                let r = positions.distance(a, b) - d;
                s += r * r / (d * d);
            }
        }
    }
    s
}

// ---------------------------------------------------------------------------
// Kamada-Kawai

pub const KK_DEFAULT_MAX_ITERS: usize = 1000;
pub const KK_DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct KkLayout {
    pub positions: Positions,
    pub initial_stress: f64,
    pub final_stress: f64,
    /// Single-node moves performed.
    pub iterations: usize,
    pub converged: bool,
}

/// Stress state for node-by-node descent.
struct KkState<'a> {
    pos: Vec<[f64; 2]>,
    dist: &'a [Vec<f64>],
    grad: Vec<[f64; 2]>,
}

impl KkState<'_> {
    /// Gradient contribution on `a` from the pair `(a, b)`.
    fn pair_grad(&self, a: usize, b: usize, pa: [f64; 2]) -> [f64; 2] {
        let d = self.dist[a][b];
        if d <= 0.0 {
            return [0.0, 0.0];
        }
        let pb = self.pos[b];
        let dx = pa[0] - pb[0];
        let dy = pa[1] - pb[1];
        let r = dx.hypot(dy);
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let c = 2.0 * (r - d) / (d * d * r);
        [c * dx, c * dy]
    }

    fn node_grad(&self, a: usize, pa: [f64; 2]) -> [f64; 2] {
        let mut g = [0.0, 0.0];
        for b in 0..self.pos.len() {
            if b != a {
                let pg = self.pair_grad(a, b, pa);
                g[0] += pg[0];
                g[1] += pg[1];
            }
        }
        g
    }

    /// Terms of the stress involving node `a` placed at `pa`.
    fn node_energy(&self, a: usize, pa: [f64; 2]) -> f64 {
        let mut e = 0.0;
        for (b, &pb) in self.pos.iter().enumerate() {
            let d = self.dist[a][b];
            if b != a && d > 0.0 {
                let r = dist(pa, pb) - d;
                e += r * r / (d * d);
            }
        }
        e
    }

    fn hessian(&self, a: usize) -> [f64; 3] {
        let pa = self.pos[a];
        let (mut hxx, mut hxy, mut hyy) = (0.0, 0.0, 0.0);
        for (b, &pb) in self.pos.iter().enumerate() {
            let d = self.dist[a][b];
            if b == a || d <= 0.0 {
                continue;
            }
            let dx = pa[0] - pb[0];
            let dy = pa[1] - pb[1];
            let r = dx.hypot(dy).max(1e-12);
            let k = 2.0 / (d * d);
            let r3 = r * r * r;
            hxx += k * (1.0 - d * dy * dy / r3);
            hyy += k * (1.0 - d * dx * dx / r3);
            hxy += k * d * dx * dy / r3;
        }
        [hxx, hxy, hyy]
    }

    /// Move node `a` to `to`, keeping all gradients current.
    fn move_node(&mut self, a: usize, to: [f64; 2]) {
        let from = self.pos[a];
        for b in 0..self.pos.len() {
            if b == a {
                continue;
            }
            let old = self.pair_grad(b, a, self.pos[b]);
            self.pos[a] = to;
            let new = self.pair_grad(b, a, self.pos[b]);
            self.pos[a] = from;
            self.grad[b][0] += new[0] - old[0];
            self.grad[b][1] += new[1] - old[1];
        }
        self.pos[a] = to;
        self.grad[a] = self.node_grad(a, to);
    }

    /// Try to lower the energy by moving node `a`. Returns whether it moved.
    fn improve(&mut self, a: usize) -> bool {
        let pa = self.pos[a];
        let g = self.grad[a];
        let [hxx, hxy, hyy] = self.hessian(a);
        let det = hxx * hyy - hxy * hxy;
        let dir = if hxx > 0.0 && det > 0.0 {
            [-(hyy * g[0] - hxy * g[1]) / det, -(hxx * g[1] - hxy * g[0]) / det]
        } else {
            let curv = hxx.abs().max(hyy.abs()).max(1e-12);
            [-g[0] / curv, -g[1] / curv]
        };
        let base = self.node_energy(a, pa);
        let mut t = 1.0;
        for _ in 0..40 {
            let cand = [pa[0] + t * dir[0], pa[1] + t * dir[1]];
            if self.node_energy(a, cand) < base {
                self.move_node(a, cand);
                return true;
            }
            t *= 0.5;
        }
        false
    }
}

/// Kamada-Kawai layout by node-wise Newton steps with backtracking.
///
/// Nodes start on a circle. At each step the node with the largest gradient
/// is moved; a move is only accepted if it lowers the stress, so the final
/// stress never exceeds the initial one. Stops when the full gradient norm
/// drops below `tol` or after `max_iters` moves.
pub fn kamada_kawai(input: &LayoutInput, max_iters: usize, tol: f64) -> Result<KkLayout> {
    let distances = ideal_distances(input)?;
    Ok(kamada_kawai_distances(&distances, max_iters, tol))
}

/// Kamada-Kawai on an explicit ideal-distance matrix.
pub fn kamada_kawai_distances(distances: &[Vec<f64>], max_iters: usize, tol: f64) -> KkLayout {
    let m = distances.len();
    let radius = distances
        .iter()
        .flatten()
        .copied()
        .fold(0.0, f64::max)
        .max(1e-9)
        / 2.0;
    let pos: Vec<[f64; 2]> = (0..m)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / m as f64;
            [radius * t.cos(), radius * t.sin()]
        })
        .collect();
    let mut state = KkState {
        pos,
        dist: distances,
        grad: vec![[0.0, 0.0]; m],
    };
    for a in 0..m {
        state.grad[a] = state.node_grad(a, state.pos[a]);
    }
    let initial_stress = stress(&Positions(state.pos.clone()), distances);

    let mut stuck = vec![false; m];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        let norm = state
            .grad
            .iter()
            .map(|g| g[0] * g[0] + g[1] * g[1])
            .sum::<f64>()
            .sqrt();
        if norm < tol {
            converged = true;
            break;
        }
        let pick = (0..m)
            .filter(|&a| !stuck[a])
            .max_by(|&a, &b| {
                let ga = state.grad[a][0].hypot(state.grad[a][1]);
                let gb = state.grad[b][0].hypot(state.grad[b][1]);
                ga.total_cmp(&gb).then_with(|| b.cmp(&a))
            });
        let Some(a) = pick else { break };
        iterations += 1;
        if state.improve(a) {
            stuck.iter_mut().for_each(|s| *s = false);
        } else {
            stuck[a] = true;
        }
    }
    let positions = Positions(state.pos);
    let final_stress = stress(&positions, distances);
    KkLayout {
        positions,
        initial_stress,
        final_stress,
        iterations,
        converged,
    }
}

// ---------------------------------------------------------------------------
// Classical MDS

const MDS_TOL: f64 = 1e-10;
const MDS_MAX_ITERS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct MdsLayout {
    pub positions: Positions,
    pub eigenvalues: [f64; 2],
    /// All pairwise distances equal with four or more points: the planar
    /// embedding is not unique.
    pub degenerate: bool,
    pub converged: bool,
}

/// Classical MDS of the graph's ideal distances.
pub fn mds(input: &LayoutInput) -> Result<MdsLayout> {
    classical_mds(&ideal_distances(input)?)
}

/// Classical (Torgerson) MDS of a distance matrix into the plane.
///
/// The squared distances are double-centered, `B = -½ J D² J`, and the two
/// leading eigenpairs are found by shifted power iteration with deflation.
/// Coordinates are `v √λ`, with each eigenvector's first nonzero entry made
/// positive.
pub fn classical_mds(distances: &[Vec<f64>]) -> Result<MdsLayout> {
    let m = distances.len();
    if m == 0 {
        return Err(Error::Parameter("layout needs at least one node".into()));
    }
    for (a, row) in distances.iter().enumerate() {
        if row.len() != m {
            return Err(Error::Parameter("distance matrix is not square".into()));
        }
        for (b, &d) in row.iter().enumerate() {
            if !(d >= 0.0 && d.is_finite()) || (d - distances[b][a]).abs() > 1e-9 * d.max(1.0) {
                return Err(Error::Parameter(format!("invalid distance at ({a}, {b})")));
            }
        }
    }
    let mut degenerate = false;
    if m >= 4 {
        let d0 = distances[0][1];
        degenerate = (0..m).all(|a| (a + 1..m).all(|b| (distances[a][b] - d0).abs() <= 1e-12 * d0.max(1.0)));
    }

    let mut b = double_center(distances);
    let mut rng = ChaCha8Rng::seed_from_u64(0x006d_6473);
    let mut coords = vec![[0.0; 2]; m];
    let mut eigenvalues = [0.0; 2];
    let mut converged = true;
    for k in 0..2 {
        let (lambda, v, ok) = top_eigenpair(&b, &mut rng);
        converged &= ok;
        eigenvalues[k] = lambda;
        for a in 0..m {
            for c in 0..m {
                b[a][c] -= lambda * v[a] * v[c];
            }
        }
        let keep = if k == 0 {
            lambda > 0.0
        } else {
            lambda > MDS_TOL * eigenvalues[0].max(f64::MIN_POSITIVE)
        };
        let scale = if keep { lambda.sqrt() } else { 0.0 };
        for a in 0..m {
            coords[a][k] = v[a] * scale;
        }
    }
    Ok(MdsLayout {
        positions: Positions(coords),
        eigenvalues,
        degenerate,
        converged,
    })
}

fn double_center(distances: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = distances.len();
    let sq: Vec<Vec<f64>> = distances
        .iter()
        .map(|r| r.iter().map(|d| d * d).collect())
        .collect();
    let row_mean: Vec<f64> = sq.iter().map(|r| r.iter().sum::<f64>() / m as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / m as f64;
    (0..m)
        .map(|a| {
            (0..m)
                .map(|c| -0.5 * (sq[a][c] - row_mean[a] - row_mean[c] + grand))
                .collect()
        })
        .collect()
}

fn mat_vec(b: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    b.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Largest algebraic eigenpair of symmetric `b`, by power iteration on
/// `b + σI` with `σ` a Gershgorin bound. Sign fixed so the first entry that
/// is not negligible is positive.
fn top_eigenpair(b: &[Vec<f64>], rng: &mut ChaCha8Rng) -> (f64, Vec<f64>, bool) {
    let m = b.len();
    let sigma = b
        .iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if sigma == 0.0 {
        let mut v = vec![0.0; m];
        v[0] = 1.0;
        return (0.0, v, true);
    }
    let mut v: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() - 0.5).collect();
    normalize(&mut v);
    let mut lambda = 0.0;
    let mut converged = false;
    for _ in 0..MDS_MAX_ITERS {
        let bv = mat_vec(b, &v);
        lambda = v.iter().zip(&bv).map(|(x, y)| x * y).sum();
        let residual = bv
            .iter()
            .zip(&v)
            .map(|(y, x)| (y - lambda * x).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= MDS_TOL * sigma {
            converged = true;
            break;
        }
        let mut next: Vec<f64> = bv.iter().zip(&v).map(|(y, x)| y + sigma * x).collect();
        normalize(&mut next);
        v = next;
    }
    let max_abs = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-8 * max_abs) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    (lambda, v, converged)
}
