//! Decision trees: Gini CART for the forest, second-order regression trees
//! for boosting (exact and histogram split search).

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        gain: f64,
    },
    Leaf {
        value: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_for(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { value } => return value,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }

    pub fn add_gains(&self, into: &mut [f64]) {
        for n in &self.nodes {
            if let Node::Split { feature, gain, .. } = n {
                into[*feature] += gain;
            }
        }
    }

    /// Structural check used when loading untrusted files.
    pub fn validate(&self, n_features: usize, leaf_len: usize) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        let n = self.nodes.len();
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    gain,
                } => {
                    if *feature >= n_features {
                        return Err(format!("node {i}: feature {feature} out of range"));
                    }
                    if *left <= i || *right <= i || *left >= n || *right >= n {
                        return Err(format!("node {i}: bad child index"));
                    }
                    if threshold.is_nan() || !gain.is_finite() {
                        return Err(format!("node {i}: non-finite split"));
                    }
                }
                Node::Leaf { value } => {
                    if value.len() != leaf_len || value.iter().any(|v| !v.is_finite()) {
                        return Err(format!("node {i}: malformed leaf"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Column-major view of the training features.
pub(crate) struct Columns<'a> {
    pub cols: &'a [Vec<f64>],
}

impl Columns<'_> {
    fn n_features(&self) -> usize {
        self.cols.len()
    }
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid < hi {
        mid
    } else {
        lo
    }
}

// ---------------------------------------------------------------------------
// Gini CART

pub(crate) struct CartParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub max_features: usize,
}

struct CartBuilder<'a> {
    x: Columns<'a>,
    y: &'a [usize],
    n_classes: usize,
    params: &'a CartParams,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
    n_left: usize,
}

pub(crate) fn build_cart(
    cols: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    rows: Vec<usize>,
    params: &CartParams,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let mut b = CartBuilder {
        x: Columns { cols },
        y,
        n_classes,
        params,
        nodes: Vec::new(),
    };
    b.grow(rows, 0, rng);
    Tree { nodes: b.nodes }
}

impl CartBuilder<'_> {
    fn counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &r in rows {
            c[self.y[r]] += 1;
        }
        c
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let id = self.nodes.len();
        let counts = self.counts(&rows);
        let n = rows.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let split = if pure || depth >= self.params.max_depth || n < 2 * self.params.min_samples_leaf {
            None
        } else {
            self.best_split(&rows, &counts, rng)
        };
        let Some(best) = split else {
            let value = counts.iter().map(|&c| c as f64 / n as f64).collect();
            self.nodes.push(Node::Leaf { value });
            return id;
        };

        let parent_score: f64 = counts.iter().map(|&c| (c * c) as f64).sum::<f64>() / n as f64;
        let gain = (best.score - parent_score).max(0.0);
        self.nodes.push(Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: 0,
            right: 0,
            gain,
        });
        let col = &self.x.cols[best.feature];
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| col[i] <= best.threshold);
        debug_assert_eq!(l.len(), best.n_left);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        if let Node::Split {
            left: ls, right: rs, ..
        } = &mut self.nodes[id]
        {
            *ls = left;
            *rs = right;
        }
        id
    }

    /// Visits features in random order until `max_features` non-constant ones
    /// were seen, then scores those in ascending index order.
    fn best_split(&self, rows: &[usize], counts: &[usize], rng: &mut ChaCha8Rng) -> Option<BestSplit> {
        let mut order: Vec<usize> = (0..self.x.n_features()).collect();
        order.shuffle(rng);
        let mut chosen = Vec::with_capacity(self.params.max_features);
        for f in order {
            let col = &self.x.cols[f];
            let first = col[rows[0]];
            if rows.iter().any(|&r| col[r] != first) {
                chosen.push(f);
                if chosen.len() == self.params.max_features {
                    break;
                }
            }
        }
        chosen.sort_unstable();

        let mut best: Option<BestSplit> = None;
        let mut sorted = rows.to_vec();
        let min_leaf = self.params.min_samples_leaf;
        for f in chosen {
            let col = &self.x.cols[f];
            sorted.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
            let mut left = vec![0usize; self.n_classes];
            let n = sorted.len();
            for i in 0..n - 1 {
                left[self.y[sorted[i]]] += 1;
                let (lo, hi) = (col[sorted[i]], col[sorted[i + 1]]);
                let nl = i + 1;
                if lo == hi || nl < min_leaf || n - nl < min_leaf {
                    continue;
                }
                let nr = n - nl;
                let mut sl = 0usize;
                let mut sr = 0usize;
                for k in 0..self.n_classes {
                    sl += left[k] * left[k];
                    let rk = counts[k] - left[k];
                    sr += rk * rk;
                }
                let score = sl as f64 / nl as f64 + sr as f64 / nr as f64;
                if best.as_ref().is_none_or(|b| score > b.score) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold: midpoint(lo, hi),
                        score,
                        n_left: nl,
                    });
                }
            }
        }
        best
    }
}

// ---------------------------------------------------------------------------
// Second-order regression trees

pub(crate) struct BoostParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub learning_rate: f64,
}

/// Exact search walks presorted rows; histogram search walks bins.
pub(crate) enum SplitSearch<'a> {
    Exact { order: &'a [Vec<usize>] },
    Histogram { bins: &'a Binned },
}

/// Quantile-binned features. `codes[f][row]` is the bin of a row.
pub(crate) struct Binned {
    pub codes: Vec<Vec<u16>>,
    pub n_bins: Vec<usize>,
    pub bin_min: Vec<Vec<f64>>,
    pub bin_max: Vec<Vec<f64>>,
}

impl Binned {
    /// At most `max_bins` bins per feature; one bin per distinct value when
    /// the column has no more than `max_bins` of them.
    pub fn new(cols: &[Vec<f64>], max_bins: usize) -> Binned {
        let mut codes = Vec::with_capacity(cols.len());
        let mut n_bins = Vec::new();
        let mut bin_min = Vec::new();
        let mut bin_max = Vec::new();
        for col in cols {
            let mut sorted = col.clone();
            sorted.sort_by(f64::total_cmp);
            let mut distinct = sorted.clone();
            distinct.dedup();
            // upper bounds: bin j holds (uppers[j-1], uppers[j]]
            let uppers: Vec<f64> = if distinct.len() <= max_bins {
                distinct
            } else {
                let n = sorted.len();
                let mut u: Vec<f64> = (1..max_bins)
                    .map(|b| sorted[(b * n / max_bins).saturating_sub(1)])
                    .collect();
                u.push(sorted[n - 1]);
                u.dedup();
                u
            };
            let code: Vec<u16> = col
                .iter()
                .map(|v| uppers.partition_point(|u| u < v) as u16)
                .collect();
            let nb = uppers.len();
            let mut lo = vec![f64::INFINITY; nb];
            let mut hi = vec![f64::NEG_INFINITY; nb];
            for (&v, &c) in col.iter().zip(&code) {
                lo[c as usize] = lo[c as usize].min(v);
                hi[c as usize] = hi[c as usize].max(v);
            }
            codes.push(code);
            n_bins.push(nb);
            bin_min.push(lo);
            bin_max.push(hi);
        }
        Binned {
            codes,
            n_bins,
            bin_min,
            bin_max,
        }
    }
}

struct GradSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

pub(crate) fn build_boost_tree(
    cols: &[Vec<f64>],
    grad: &[f64],
    hess: &[f64],
    search: &SplitSearch,
    params: &BoostParams,
) -> Tree {
    let n = grad.len();
    let mut nodes = Vec::new();
    let mut in_node = vec![false; n];
    grow_boost(
        cols,
        grad,
        hess,
        search,
        params,
        (0..n).collect(),
        &mut in_node,
        0,
        &mut nodes,
    );
    Tree { nodes }
}

#[allow(clippy::too_many_arguments)]
fn grow_boost(
    cols: &[Vec<f64>],
    grad: &[f64],
    hess: &[f64],
    search: &SplitSearch,
    params: &BoostParams,
    rows: Vec<usize>,
    in_node: &mut [bool],
    depth: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    let g: f64 = rows.iter().map(|&r| grad[r]).sum();
    let h: f64 = rows.iter().map(|&r| hess[r]).sum();
    let split = if depth >= params.max_depth || rows.len() < 2 * params.min_samples_leaf {
        None
    } else {
        for &r in &rows {
            in_node[r] = true;
        }
        let s = match search {
            SplitSearch::Exact { order } => exact_split(cols, grad, hess, order, in_node, rows.len(), g, h, params),
            SplitSearch::Histogram { bins } => hist_split(grad, hess, bins, &rows, g, h, params),
        };
        for &r in &rows {
            in_node[r] = false;
        }
        s
    };
    let Some(best) = split else {
        let w = -g / (h + params.lambda) * params.learning_rate;
        nodes.push(Node::Leaf { value: vec![w] });
        return id;
    };
    nodes.push(Node::Split {
        feature: best.feature,
        threshold: best.threshold,
        left: 0,
        right: 0,
        gain: best.gain,
    });
    let col = &cols[best.feature];
    let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| col[i] <= best.threshold);
    let left = grow_boost(cols, grad, hess, search, params, l, in_node, depth + 1, nodes);
    let right = grow_boost(cols, grad, hess, search, params, r, in_node, depth + 1, nodes);
    if let Node::Split {
        left: ls, right: rs, ..
    } = &mut nodes[id]
    {
        *ls = left;
        *rs = right;
    }
    id
}

fn split_gain(gl: f64, hl: f64, g: f64, h: f64, p: &BoostParams) -> f64 {
    let (gr, hr) = (g - gl, h - hl);
    0.5 * (gl * gl / (hl + p.lambda) + gr * gr / (hr + p.lambda) - g * g / (h + p.lambda)) - p.gamma
}

// Both searches accumulate gradient sums per distinct value (exact) or per
// bin (histogram) in ascending row order before the running prefix sum, so
// on data with few distinct values they produce bit-identical gains.

#[allow(clippy::too_many_arguments)]
fn exact_split(
    cols: &[Vec<f64>],
    grad: &[f64],
    hess: &[f64],
    order: &[Vec<usize>],
    in_node: &[bool],
    n_rows: usize,
    g: f64,
    h: f64,
    p: &BoostParams,
) -> Option<GradSplit> {
    let mut best: Option<GradSplit> = None;
    for (f, ord) in order.iter().enumerate() {
        let col = &cols[f];
        let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0usize);
        let (mut gg, mut hg, mut ng) = (0.0, 0.0, 0usize);
        let mut prev: Option<f64> = None;
        for &r in ord.iter().filter(|&&r| in_node[r]) {
            let v = col[r];
            if let Some(pv) = prev {
                if v != pv {
                    gl += gg;
                    hl += hg;
                    nl += ng;
                    (gg, hg, ng) = (0.0, 0.0, 0);
                    if nl >= p.min_samples_leaf && n_rows - nl >= p.min_samples_leaf {
                        let gain = split_gain(gl, hl, g, h, p);
                        if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                            best = Some(GradSplit {
                                feature: f,
                                threshold: midpoint(pv, v),
                                gain,
                            });
                        }
                    }
                }
            }
            gg += grad[r];
            hg += hess[r];
            ng += 1;
            prev = Some(v);
        }
    }
    best
}

fn hist_split(
    grad: &[f64],
    hess: &[f64],
    bins: &Binned,
    rows: &[usize],
    g: f64,
    h: f64,
    p: &BoostParams,
) -> Option<GradSplit> {
    let mut best: Option<GradSplit> = None;
    let n_rows = rows.len();
    for (f, codes) in bins.codes.iter().enumerate() {
        let nb = bins.n_bins[f];
        let mut hg = vec![0.0; nb];
        let mut hh = vec![0.0; nb];
        let mut hn = vec![0usize; nb];
        for &r in rows {
            let c = codes[r] as usize;
            hg[c] += grad[r];
            hh[c] += hess[r];
            hn[c] += 1;
        }
        let nonempty: Vec<usize> = (0..nb).filter(|&b| hn[b] > 0).collect();
        let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0usize);
        for w in nonempty.windows(2) {
            let (b, next) = (w[0], w[1]);
            gl += hg[b];
            hl += hh[b];
            nl += hn[b];
            if nl < p.min_samples_leaf || n_rows - nl < p.min_samples_leaf {
                continue;
            }
            let gain = split_gain(gl, hl, g, h, p);
            if gain > 0.0 && best.as_ref().is_none_or(|bs| gain > bs.gain) {
                // node-local values are not tracked per bin, so the cut sits
                // between the training extremes of the neighbouring bins
                best = Some(GradSplit {
                    feature: f,
                    threshold: midpoint(bins.bin_max[f][b], bins.bin_min[f][next]),
                    gain,
                });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_stays_below_upper_value() {
        assert_eq!(midpoint(1.0, 3.0), 2.0);
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let m = midpoint(a, b);
        assert!(a <= m && m < b);
    }

    #[test]
    fn bins_follow_distinct_values_when_few() {
        let cols = vec![vec![3.0, 1.0, 2.0, 1.0, 3.0]];
        let b = Binned::new(&cols, 255);
        assert_eq!(b.n_bins[0], 3);
        assert_eq!(b.codes[0], vec![2, 0, 1, 0, 2]);
        assert_eq!(b.bin_min[0], vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn quantile_bins_are_capped_and_ordered() {
        let col: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1000) as f64).collect();
        let b = Binned::new(&[col.clone()], 16);
        assert!(b.n_bins[0] <= 16);
        for (i, &v) in col.iter().enumerate() {
            for (j, &w) in col.iter().enumerate().take(50) {
                if v < w {
                    assert!(b.codes[0][i] <= b.codes[0][j]);
                }
            }
        }
        let counts = (0..b.n_bins[0]).map(|k| b.codes[0].iter().filter(|&&c| c as usize == k).count());
        assert!(counts.into_iter().all(|c| (50..=80).contains(&c)));
    }
}
