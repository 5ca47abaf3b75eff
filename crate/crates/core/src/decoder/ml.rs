//! Maximum-likelihood subset selection over retained codewords.
//!
//! Both searches minimise the residual `|y - sum_{i in S'} x_i|^2` over
//! `K_a`-subsets of the retained indices. The residual of a subset is always
//! evaluated by [`Candidates::residual`], which sums rows in ascending index
//! order, so the two paths compare bit-identical numbers.

use super::{DecodeMethod, DecodeOutcome};
use crate::channel::Codebook;
use crate::error::{invalid, DecodeError, Result};
use crate::special::{choose_f64, dot, norm_sq};

pub const DEFAULT_ENUMERATION_CAP: u64 = 2_000_000;

/// Retained codewords copied into a dense block, ascending by index.
struct Candidates<'a> {
    y: &'a [f64],
    indices: Vec<usize>,
    rows: Vec<f64>,
    row_norm_sq: Vec<f64>,
    n: usize,
}

impl<'a> Candidates<'a> {
    fn load(y: &'a [f64], codebook: &Codebook, retained: &[usize], k: usize) -> Result<Self> {
        if y.len() != codebook.dim() {
            return Err(invalid("observation has the wrong dimension"));
        }
        if k == 0 {
            return Err(invalid("K_a must be at least 1"));
        }
        let mut indices = retained.to_vec();
        indices.sort_unstable();
        indices.dedup();
        if indices.len() < k {
            return Err(DecodeError::CapUnderflow {
                retained: indices.len(),
                required: k,
            }
            .into());
        }
        let rows = codebook.rows_for(&indices)?;
        let n = codebook.dim();
        let row_norm_sq = rows.chunks_exact(n).map(norm_sq).collect();
        Ok(Self {
            y,
            indices,
            rows,
            row_norm_sq,
            n,
        })
    }

    fn len(&self) -> usize {
        self.indices.len()
    }

    fn row(&self, p: usize) -> &[f64] {
        &self.rows[p * self.n..(p + 1) * self.n]
    }

    /// Residual of the subset given by candidate positions. Positions are
    /// ascending in index, so sorting positions sorts indices.
    fn residual(&self, positions: &[usize]) -> f64 {
        let mut sorted = positions.to_vec();
        sorted.sort_unstable();
        let mut sum = vec![0.0; self.n];
        for &p in &sorted {
            for (s, x) in sum.iter_mut().zip(self.row(p)) {
                *s += x;
            }
        }
        self.y
            .iter()
            .zip(&sum)
            .map(|(y, s)| (y - s) * (y - s))
            .sum()
    }

    fn index_set(&self, positions: &[usize]) -> Vec<usize> {
        let mut set: Vec<usize> = positions.iter().map(|&p| self.indices[p]).collect();
        set.sort_unstable();
        set
    }
}

fn outcome(
    cands: &Candidates,
    positions: &[usize],
    residual: f64,
    method: DecodeMethod,
) -> DecodeOutcome {
    DecodeOutcome {
        estimated_set: cands.index_set(positions),
        misses: None,
        residual_norm_sq: residual,
        method,
        heuristic: false,
        filter: None,
        greedy_trace: Vec::new(),
        swap_trace: Vec::new(),
        subsets_evaluated: 0,
    }
}

/// Exact ML over `K_a`-subsets of `retained`, with lexicographic
/// tie-breaking on the ascending index list.
///
/// Refuses when `C(|retained|, K_a)` exceeds `enumeration_cap`. The search
/// itself is a depth-first enumeration in decreasing order of `<y, x_j>`,
/// pruned with the bound
///
/// ```text
/// |y - sum x_i|^2 = |y|^2 - 2 sum <y, x_i> + |sum x_i|^2 >= |y|^2 - 2 sum <y, x_i>
/// ```
///
/// Pruned subsets have a residual strictly above the incumbent, so the
/// result equals that of exhaustive enumeration.
pub fn ml_decode_exact(
    y: &[f64],
    codebook: &Codebook,
    retained: &[usize],
    k: usize,
    enumeration_cap: u64,
) -> Result<DecodeOutcome> {
    let cands = Candidates::load(y, codebook, retained, k)?;
    let subsets = choose_f64(cands.len() as u64, k as u64);
    if subsets > enumeration_cap as f64 {
        return Err(DecodeError::EnumerationCapExceeded {
            subsets,
            cap: enumeration_cap,
        }
        .into());
    }

    // incumbent from local search
    let local = local_search(&cands, k, 50 * k);
    let mut best = Incumbent {
        residual: cands.residual(&local.positions),
        set: cands.index_set(&local.positions),
        positions: local.positions,
    };

    let correlations: Vec<f64> = (0..cands.len()).map(|p| dot(y, cands.row(p))).collect();
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by(|&a, &b| correlations[b].total_cmp(&correlations[a]).then(a.cmp(&b)));
    let mut prefix = Vec::with_capacity(order.len() + 1);
    prefix.push(0.0);
    for &p in &order {
        prefix.push(prefix.last().unwrap() + correlations[p]);
    }

    let power_scale: f64 = cands.row_norm_sq.iter().copied().fold(0.0, f64::max);
    let mut search = BranchAndBound {
        cands: &cands,
        order: &order,
        correlations: &correlations,
        prefix: &prefix,
        y_sq: norm_sq(y),
        slack: 1e-9 * (norm_sq(y) + k as f64 * power_scale + 1.0),
        k,
        chosen: Vec::with_capacity(k),
        best: &mut best,
        evaluated: 0,
    };
    search.descend(0, 0.0);
    let evaluated = search.evaluated;

    let mut out = outcome(
        &cands,
        &best.positions,
        best.residual,
        DecodeMethod::ExactEnumeration,
    );
    out.subsets_evaluated = evaluated;
    Ok(out)
}

struct Incumbent {
    residual: f64,
    set: Vec<usize>,
    positions: Vec<usize>,
}

struct BranchAndBound<'s, 'a> {
    cands: &'s Candidates<'a>,
    order: &'s [usize],
    correlations: &'s [f64],
    prefix: &'s [f64],
    y_sq: f64,
    slack: f64,
    k: usize,
    chosen: Vec<usize>,
    best: &'s mut Incumbent,
    evaluated: u64,
}

impl BranchAndBound<'_, '_> {
    fn descend(&mut self, start: usize, partial: f64) {
        let remaining = self.k - self.chosen.len();
        if remaining == 0 {
            self.leaf();
            return;
        }
        let last = self.order.len() - remaining;
        for q in start..=last {
            // best completion picks the next `remaining` entries of the order
            let optimistic = partial + self.prefix[q + remaining] - self.prefix[q];
            if self.y_sq - 2.0 * optimistic > self.best.residual + self.slack {
                break;
            }
            let p = self.order[q];
            let corr = self.correlations[p];
            self.chosen.push(p);
            self.descend(q + 1, partial + corr);
            self.chosen.pop();
        }
    }

    fn leaf(&mut self) {
        self.evaluated += 1;
        let residual = self.cands.residual(&self.chosen);
        if residual > self.best.residual {
            return;
        }
        let set = self.cands.index_set(&self.chosen);
        if residual < self.best.residual || set < self.best.set {
            self.best.residual = residual;
            self.best.set = set;
            self.best.positions = self.chosen.clone();
        }
    }
}

struct LocalResult {
    positions: Vec<usize>,
    greedy_trace: Vec<f64>,
    swap_trace: Vec<f64>,
}

/// Greedy construction followed by first-improvement 1-swap descent.
fn local_search(cands: &Candidates, k: usize, max_rounds: usize) -> LocalResult {
    let n = cands.n;
    let count = cands.len();
    let mut selected = vec![false; count];
    let mut positions = Vec::with_capacity(k);
    let mut r: Vec<f64> = cands.y.to_vec();
    let mut greedy_trace = Vec::with_capacity(k);

    // greedy: add the codeword with the largest residual decrease
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for p in 0..count {
            if selected[p] {
                continue;
            }
            let change = cands.row_norm_sq[p] - 2.0 * dot(&r, cands.row(p));
            if best.is_none_or(|(_, c)| change < c) {
                best = Some((p, change));
            }
        }
        let (p, _) = best.expect("at least k candidates");
        selected[p] = true;
        positions.push(p);
        for (ri, x) in r.iter_mut().zip(cands.row(p)) {
            *ri -= x;
        }
        greedy_trace.push(norm_sq(&r));
    }

    // 1-swap: out in ascending index, in ascending index, first improvement
    let mut current = norm_sq(&r);
    let mut swap_trace = Vec::new();
    let mut w = vec![0.0; n];
    for _ in 0..max_rounds {
        positions.sort_unstable();
        let mut accepted = None;
        'scan: for (slot, &out) in positions.iter().enumerate() {
            for ((wi, ri), x) in w.iter_mut().zip(&r).zip(cands.row(out)) {
                *wi = ri + x;
            }
            let w_sq = norm_sq(&w);
            let threshold = current - 1e-12 * (current + 1.0);
            for p in 0..count {
                if selected[p] {
                    continue;
                }
                let candidate = w_sq - 2.0 * dot(&w, cands.row(p)) + cands.row_norm_sq[p];
                if candidate < threshold {
                    accepted = Some((slot, out, p));
                    break 'scan;
                }
            }
        }
        let Some((slot, out, p)) = accepted else {
            break;
        };
        selected[out] = false;
        selected[p] = true;
        positions[slot] = p;
        for ((ri, xo), xp) in r.iter_mut().zip(cands.row(out)).zip(cands.row(p)) {
            *ri += xo - xp;
        }
        current = norm_sq(&r);
        swap_trace.push(current);
    }
    positions.sort_unstable();
    LocalResult {
        positions,
        greedy_trace,
        swap_trace,
    }
}

/// Greedy initialisation plus first-improvement 1-swap descent, at most
/// `max_rounds` accepted swaps (default `50 K_a`). Deterministic.
pub fn ml_decode_local(
    y: &[f64],
    codebook: &Codebook,
    retained: &[usize],
    k: usize,
    max_rounds: Option<usize>,
) -> Result<DecodeOutcome> {
    let cands = Candidates::load(y, codebook, retained, k)?;
    let result = local_search(&cands, k, max_rounds.unwrap_or(50 * k));
    let residual = cands.residual(&result.positions);
    let mut out = outcome(
        &cands,
        &result.positions,
        residual,
        DecodeMethod::LocalSearch,
    );
    out.greedy_trace = result.greedy_trace;
    out.swap_trace = result.swap_trace;
    Ok(out)
}
