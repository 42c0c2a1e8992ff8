//! Regression trees under weighted squared error.
//!
//! Splits are exact: candidates are midpoints between consecutive distinct
//! values of a feature, and a row goes left when `x <= threshold`. Rows
//! with zero weight are left out of the fit entirely. Each feature is
//! sorted once per fit and the sorted order is carried down by stable
//! partitioning, so a level costs `O(rows * features)`.
//!
//! Growth is greedy, except at nodes with at most two levels left whose
//! `rows * features` is within [`TreeParams::exact_budget`]: there the
//! split is chosen by enumerating every depth-2 subtree, so small trees are
//! globally optimal rather than greedy.

use serde::{Deserialize, Serialize};
use twin_core::Scalar;

use crate::error::{ModelError, Result};
use crate::features::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    /// Minimum positive-weight rows per leaf.
    pub min_samples_leaf: usize,
    #[serde(default = "default_exact_budget")]
    pub exact_budget: usize,
}

fn default_exact_budget() -> usize {
    64
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 3,
            min_samples_leaf: 1,
            exact_budget: default_exact_budget(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Node<T> {
    Leaf { value: T },
    Split { feature: usize, threshold: T, left: usize, right: usize },
}

/// Nodes in pre-order; the root is `nodes[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree<T> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Scalar> RegressionTree<T> {
    pub fn leaf(value: T) -> Self {
        RegressionTree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn predict(&self, row: &[T]) -> T {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go<T>(nodes: &[Node<T>], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Structural checks used after decoding a model file.
    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(ModelError::format("tree", "no nodes"));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            match *n {
                Node::Leaf { value } if !value.is_finite() => {
                    return Err(ModelError::format("tree", format!("leaf {i} is not finite")))
                }
                Node::Split {
                    feature, left, right, ..
                } if feature >= n_features || left <= i || right <= i || left >= self.nodes.len() || right >= self.nodes.len() => {
                    return Err(ModelError::format("tree", format!("node {i} has bad links")))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Positive-weight rows sorted by each feature, with the feature values
/// alongside so split scans read contiguous memory.
#[derive(Debug, Clone)]
pub struct Presorted<T> {
    idx: Vec<Vec<usize>>,
    val: Vec<Vec<T>>,
}

impl<T: Scalar> Presorted<T> {
    pub fn new(x: &Matrix<T>, w: &[T]) -> Self {
        let active: Vec<usize> = (0..x.rows()).filter(|&i| w[i] > T::zero()).collect();
        let mut idx = Vec::with_capacity(x.cols());
        let mut val = Vec::with_capacity(x.cols());
        for f in 0..x.cols() {
            let mut l = active.clone();
            l.sort_by(|&a, &b| x.get(a, f).partial_cmp(&x.get(b, f)).expect("finite features"));
            val.push(l.iter().map(|&i| x.get(i, f)).collect());
            idx.push(l);
        }
        Presorted { idx, val }
    }

    pub fn rows(&self) -> usize {
        self.idx.first().map_or(0, Vec::len)
    }
}

pub(crate) fn check_inputs<T: Scalar>(x: &Matrix<T>, y: &[T], w: &[T]) -> Result<()> {
    if x.rows() != y.len() || y.len() != w.len() {
        return Err(ModelError::usage(format!(
            "shape mismatch: {} rows, {} targets, {} weights",
            x.rows(),
            y.len(),
            w.len()
        )));
    }
    if w.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
        return Err(ModelError::usage("weights must be finite and >= 0"));
    }
    if !w.iter().any(|v| *v > T::zero()) {
        return Err(ModelError::usage("all sample weights are zero"));
    }
    if x.as_slice().iter().chain(y).any(|v| !v.is_finite()) {
        return Err(ModelError::usage("features and targets must be finite"));
    }
    Ok(())
}

pub fn fit_tree<T: Scalar>(x: &Matrix<T>, y: &[T], w: &[T], params: &TreeParams) -> Result<RegressionTree<T>> {
    check_inputs(x, y, w)?;
    let pre = Presorted::new(x, w);
    Ok(fit_presorted(y, w, &pre, params))
}

/// Fit with a presort that the caller reuses across trees (boosting keeps
/// features and weights fixed between stages).
pub(crate) fn fit_presorted<T: Scalar>(y: &[T], w: &[T], pre: &Presorted<T>, params: &TreeParams) -> RegressionTree<T> {
    let n = pre.rows();
    let mut b = Builder {
        y,
        w,
        params,
        nodes: Vec::new(),
        mask: vec![false; y.len()],
        idx: pre.idx.clone(),
        val: pre.val.clone(),
        scratch_i: Vec::with_capacity(n),
        scratch_v: Vec::with_capacity(n),
    };
    b.build(0, n, params.max_depth);
    RegressionTree { nodes: b.nodes }
}

#[derive(Clone, Copy)]
struct Stats<T> {
    sw: T,
    swy: T,
    swyy: T,
    n: usize,
}

impl<T: Scalar> Stats<T> {
    fn zero() -> Self {
        Stats {
            sw: T::zero(),
            swy: T::zero(),
            swyy: T::zero(),
            n: 0,
        }
    }

    fn add(&mut self, w: T, y: T) {
        self.sw += w;
        self.swy += w * y;
        self.swyy += w * y * y;
        self.n += 1;
    }

    fn minus(&self, o: &Stats<T>) -> Stats<T> {
        Stats {
            sw: self.sw - o.sw,
            swy: self.swy - o.swy,
            swyy: self.swyy - o.swyy,
            n: self.n - o.n,
        }
    }

    /// `swy^2 / sw`; the leaf SSE is `swyy - explained`.
    fn explained(&self) -> T {
        self.swy * self.swy / self.sw
    }

    fn sse(&self) -> T {
        self.swyy - self.explained()
    }
}

struct Candidate<T> {
    feature: usize,
    /// The first `pos` rows in the node's order for `feature` go left.
    pos: usize,
    threshold: T,
    /// SSE of the resulting subtree(s).
    cost: T,
}

/// Per-feature sorted rows of one node, owned; used by the exact search.
struct Lists<T> {
    idx: Vec<Vec<usize>>,
    val: Vec<Vec<T>>,
}

fn threshold<T: Scalar>(a: T, b: T) -> T {
    let mid = (a + b) / T::lit(2.0);
    // Adjacent floats: the midpoint can round up to `b`.
    if mid >= b {
        a
    } else {
        mid
    }
}

struct Builder<'a, T> {
    y: &'a [T],
    w: &'a [T],
    params: &'a TreeParams,
    nodes: Vec<Node<T>>,
    mask: Vec<bool>,
    idx: Vec<Vec<usize>>,
    val: Vec<Vec<T>>,
    scratch_i: Vec<usize>,
    scratch_v: Vec<T>,
}

impl<'a, T: Scalar> Builder<'a, T> {
    fn stats(&self, rows: &[usize]) -> Stats<T> {
        let mut s = Stats::zero();
        for &i in rows {
            s.add(self.w[i], self.y[i]);
        }
        s
    }

    /// Best single split by SSE, honoring `min_samples_leaf`.
    fn best_split<I: AsRef<[usize]>, V: AsRef<[T]>>(&self, idx: &[I], val: &[V], total: &Stats<T>) -> Option<Candidate<T>> {
        let min_leaf = self.params.min_samples_leaf.max(1);
        let n = total.n;
        if n < 2 * min_leaf {
            return None;
        }
        let mut best: Option<Candidate<T>> = None;
        for (f, (list, vals)) in idx.iter().zip(val).enumerate() {
            let (list, vals) = (list.as_ref(), vals.as_ref());
            let mut left = Stats::zero();
            for pos in 1..n {
                let i = list[pos - 1];
                left.add(self.w[i], self.y[i]);
                if pos < min_leaf || n - pos < min_leaf {
                    continue;
                }
                let (a, b) = (vals[pos - 1], vals[pos]);
                if a == b {
                    continue;
                }
                let right = total.minus(&left);
                let cost = total.swyy - left.explained() - right.explained();
                if best.as_ref().is_none_or(|c| cost < c.cost) {
                    best = Some(Candidate {
                        feature: f,
                        pos,
                        threshold: threshold(a, b),
                        cost,
                    });
                }
            }
        }
        best
    }

    fn split_lists(&mut self, lists: &Lists<T>, c: &Candidate<T>) -> (Lists<T>, Lists<T>) {
        let left_rows = &lists.idx[c.feature][..c.pos];
        for &i in left_rows {
            self.mask[i] = true;
        }
        let mut l = Lists { idx: Vec::new(), val: Vec::new() };
        let mut r = Lists { idx: Vec::new(), val: Vec::new() };
        for (idx, val) in lists.idx.iter().zip(&lists.val) {
            let (mut li, mut lv, mut ri, mut rv) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for (&i, &v) in idx.iter().zip(val) {
                if self.mask[i] {
                    li.push(i);
                    lv.push(v);
                } else {
                    ri.push(i);
                    rv.push(v);
                }
            }
            l.idx.push(li);
            l.val.push(lv);
            r.idx.push(ri);
            r.val.push(rv);
        }
        for &i in left_rows {
            self.mask[i] = false;
        }
        (l, r)
    }

    /// Optimal SSE with at most one split.
    fn cost1(&self, lists: &Lists<T>) -> T {
        let total = self.stats(&lists.idx[0]);
        let leaf = total.sse();
        match self.best_split(&lists.idx, &lists.val, &total) {
            Some(c) if c.cost < leaf => c.cost,
            _ => leaf,
        }
    }

    /// Best root split when two levels remain, scored by the optimal cost
    /// of the two depth-1 subtrees below it.
    fn best_split_exact(&mut self, lists: &Lists<T>, total: &Stats<T>) -> Option<Candidate<T>> {
        let min_leaf = self.params.min_samples_leaf.max(1);
        let n = total.n;
        let mut best: Option<Candidate<T>> = None;
        for f in 0..lists.idx.len() {
            for pos in min_leaf.max(1)..=n.saturating_sub(min_leaf) {
                if pos >= n {
                    continue;
                }
                let (a, b) = (lists.val[f][pos - 1], lists.val[f][pos]);
                if a == b {
                    continue;
                }
                let cand = Candidate {
                    feature: f,
                    pos,
                    threshold: threshold(a, b),
                    cost: T::zero(),
                };
                let (l, r) = self.split_lists(lists, &cand);
                let cost = self.cost1(&l) + self.cost1(&r);
                if best.as_ref().is_none_or(|c| cost < c.cost) {
                    best = Some(Candidate { cost, ..cand });
                }
            }
        }
        best
    }

    /// Stable in-place partition of every feature's `lo..hi` range: rows
    /// of the left child first.
    fn partition(&mut self, lo: usize, hi: usize, c: &Candidate<T>) {
        for k in lo..lo + c.pos {
            let i = self.idx[c.feature][k];
            self.mask[i] = true;
        }
        for f in 0..self.idx.len() {
            if f == c.feature {
                continue;
            }
            self.scratch_i.clear();
            self.scratch_v.clear();
            let mut out = lo;
            for k in lo..hi {
                let (i, v) = (self.idx[f][k], self.val[f][k]);
                if self.mask[i] {
                    self.idx[f][out] = i;
                    self.val[f][out] = v;
                    out += 1;
                } else {
                    self.scratch_i.push(i);
                    self.scratch_v.push(v);
                }
            }
            self.idx[f][out..hi].copy_from_slice(&self.scratch_i);
            self.val[f][out..hi].copy_from_slice(&self.scratch_v);
        }
        for k in lo..lo + c.pos {
            let i = self.idx[c.feature][k];
            self.mask[i] = false;
        }
    }

    fn build(&mut self, lo: usize, hi: usize, depth_left: usize) -> usize {
        let idx = self.nodes.len();
        let total = self.stats(&self.idx[0][lo..hi]);
        let value = if total.n == 0 { T::zero() } else { total.swy / total.sw };
        self.nodes.push(Node::Leaf { value });
        if depth_left == 0 || total.n < 2 {
            return idx;
        }
        let n_features = self.idx.len();
        let cand = if depth_left == 2 && total.n * n_features <= self.params.exact_budget {
            let lists = Lists {
                idx: self.idx.iter().map(|l| l[lo..hi].to_vec()).collect(),
                val: self.val.iter().map(|l| l[lo..hi].to_vec()).collect(),
            };
            self.best_split_exact(&lists, &total)
        } else {
            let idx: Vec<&[usize]> = self.idx.iter().map(|l| &l[lo..hi]).collect();
            let val: Vec<&[T]> = self.val.iter().map(|l| &l[lo..hi]).collect();
            self.best_split(&idx, &val, &total)
        };
        let Some(c) = cand else { return idx };
        if !(c.cost < total.sse()) {
            return idx;
        }
        self.partition(lo, hi, &c);
        let mid = lo + c.pos;
        let left = self.build(lo, mid, depth_left - 1);
        let right = self.build(mid, hi, depth_left - 1);
        self.nodes[idx] = Node::Split {
            feature: c.feature,
            threshold: c.threshold,
            left,
            right,
        };
        idx
    }
}
