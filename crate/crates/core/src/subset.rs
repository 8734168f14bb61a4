//! Best-subset search over candidate terms: branch-and-bound by residual
//! sum of squares, BIC ranking, and the max-VIF < 5 multicollinearity
//! screen.
//!
//! The bound is the classical leaps-and-bounds argument: rss never
//! increases when a column is added, so rss(F + R) is a lower bound for
//! every subset between F and F + R and the branch can be pruned when that
//! bound cannot beat the current m-th best of any reachable size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, Mode, TermSpec};
use crate::regression::{bic, ols_fit, subset_rss, vif, BicScore};

/// One evaluated subset: column indices (ascending) and the fit rss.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetCandidate {
    pub columns: Vec<usize>,
    pub rss: f64,
}

/// Top-m subsets per size k, `per_size[k-1]` sorted best-first.
#[derive(Debug, Clone)]
pub struct BestSubsets {
    pub per_size: Vec<Vec<SubsetCandidate>>,
    /// k_max after clamping to the column count.
    pub k_max_used: usize,
}

fn rank(a: &SubsetCandidate, b: &SubsetCandidate) -> std::cmp::Ordering {
    a.rss.total_cmp(&b.rss).then_with(|| a.columns.cmp(&b.columns))
}

/// Sorted keep-m list; worst entry last.
struct TopList {
    m: usize,
    items: Vec<SubsetCandidate>,
}

impl TopList {
    fn new(m: usize) -> Self {
        TopList { m, items: Vec::new() }
    }

    fn full(&self) -> bool {
        self.items.len() == self.m
    }

    fn worst_rss(&self) -> f64 {
        self.items.last().map(|c| c.rss).unwrap_or(f64::INFINITY)
    }

    fn offer(&mut self, cand: SubsetCandidate) {
        let pos = self.items.partition_point(|c| rank(c, &cand) == std::cmp::Ordering::Less);
        if pos == self.m {
            return;
        }
        self.items.insert(pos, cand);
        if self.items.len() > self.m {
            self.items.pop();
        }
    }
}

fn check_inputs(columns: &[Vec<f64>], y: &[f64], k_max: usize) -> Result<usize> {
    if columns.is_empty() {
        return Err(Error::NoPredictors);
    }
    let k_used = k_max.min(columns.len());
    if y.len() < k_used + 2 {
        return Err(Error::SampleTooSmall { n: y.len(), min: k_used + 2 });
    }
    Ok(k_used)
}

/// Exact top-m subsets of each size 1..=k_max by rss, found by
/// branch-and-bound. Output matches exhaustive enumeration.
pub fn best_subsets_bnb(columns: &[Vec<f64>], y: &[f64], k_max: usize, m: usize) -> Result<BestSubsets> {
    let k_used = check_inputs(columns, y, k_max)?;
    let p = columns.len();
    let lists: Vec<TopList> = (0..k_used).map(|_| TopList::new(m)).collect();

    struct Ctx<'a> {
        columns: &'a [Vec<f64>],
        y: &'a [f64],
        k_max: usize,
        lists: Vec<TopList>,
    }

    fn descend(ctx: &mut Ctx, fixed: &mut Vec<usize>, free: &[usize]) {
        if !free.is_empty() && fixed.len() < ctx.k_max {
            // lower bound for every subset in this subtree
            let mut all: Vec<usize> = fixed.clone();
            all.extend_from_slice(free);
            let bound = subset_rss(ctx.columns, &all, ctx.y);
            let lo = fixed.len() + 1;
            let hi = ctx.k_max.min(fixed.len() + free.len());
            let can_improve = (lo..=hi).any(|k| {
                let list = &ctx.lists[k - 1];
                !list.full() || bound <= list.worst_rss()
            });
            if !can_improve {
                return;
            }
        }
        for (i, &col) in free.iter().enumerate() {
            fixed.push(col);
            let rss = subset_rss(ctx.columns, fixed, ctx.y);
            ctx.lists[fixed.len() - 1].offer(SubsetCandidate { columns: fixed.clone(), rss });
            if fixed.len() < ctx.k_max && i + 1 < free.len() {
                descend(ctx, fixed, &free[i + 1..]);
            }
            fixed.pop();
        }
    }

    let mut ctx = Ctx { columns, y, k_max: k_used, lists };
    let free: Vec<usize> = (0..p).collect();
    descend(&mut ctx, &mut Vec::new(), &free);
    ctx.lists.iter_mut().for_each(|l| l.items.sort_by(rank));

    Ok(BestSubsets {
        per_size: ctx.lists.into_iter().map(|l| l.items).collect(),
        k_max_used: k_used,
    })
}

fn binomial(n: u64, k: u64) -> u64 {
    let mut r: u64 = 1;
    for i in 0..k {
        r = r.saturating_mul(n - i) / (i + 1);
    }
    r
}

const ENUMERATION_LIMIT: u64 = 1 << 20;

/// Independent oracle for `best_subsets_bnb`: plain enumeration of every
/// subset up to size k_max, guarded at 2^20 subsets.
pub fn exhaustive_best_subsets(columns: &[Vec<f64>], y: &[f64], k_max: usize, m: usize) -> Result<BestSubsets> {
    let k_used = check_inputs(columns, y, k_max)?;
    let p = columns.len();
    let total: u64 = (1..=k_used as u64).map(|k| binomial(p as u64, k)).sum();
    if total > ENUMERATION_LIMIT {
        return Err(Error::EnumerationGuard { count: total, limit: ENUMERATION_LIMIT });
    }

    let mut per_size = Vec::with_capacity(k_used);
    for k in 1..=k_used {
        let mut list = TopList::new(m);
        let mut subset: Vec<usize> = (0..k).collect();
        loop {
            let rss = subset_rss(columns, &subset, y);
            list.offer(SubsetCandidate { columns: subset.clone(), rss });
            // next k-combination of 0..p in lexicographic order
            let mut i = k;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                if subset[i] != i + p - k {
                    subset[i] += 1;
                    for j in i + 1..k {
                        subset[j] = subset[j - 1] + 1;
                    }
                    break;
                }
                if i == 0 {
                    subset.clear();
                    break;
                }
            }
            if subset.is_empty() {
                break;
            }
        }
        list.items.sort_by(rank);
        per_size.push(list.items);
    }
    Ok(BestSubsets { per_size, k_max_used: k_used })
}

/// A candidate model after pooling: subset, BIC, and the VIF screen result.
#[derive(Debug, Clone)]
pub struct CandidateModel {
    pub columns: Vec<usize>,
    pub rss: f64,
    pub bic: BicScore,
    pub max_vif: f64,
}

impl CandidateModel {
    pub fn feasible(&self) -> bool {
        self.max_vif < 5.0
    }
}

/// A selected linear ΔAGB model, the contract between fitting and
/// prediction/estimation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFit {
    pub mode: Mode,
    pub terms: Vec<TermSpec>,
    /// t/ha.
    pub intercept: f64,
    /// Aligned to `terms`.
    pub coefficients: Vec<f64>,
    pub n: usize,
    pub adj_r2: f64,
    /// None marks a perfect fit (rss = 0).
    pub bic: Option<f64>,
    pub max_vif: f64,
    /// Per-term training (min, max), aligned to `terms`.
    pub training_ranges: Vec<(f64, f64)>,
}

impl ModelFit {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ModelFit serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("model JSON: {e}")))
    }
}

/// Two-step selection: pool the per-size top-m candidates from the
/// branch-and-bound search, rank by BIC (ties within 1e-9: fewer terms,
/// then lexicographically smaller canonical term names), and return the
/// best candidate passing the max-VIF < 5 screen.
pub fn select_model(
    matrix: &FeatureMatrix,
    y: &[f64],
    mode: Mode,
    k_max: usize,
    m: usize,
) -> Result<ModelFit> {
    let columns = matrix.columns();
    let subsets = best_subsets_bnb(&columns, y, k_max, m)?;
    let n = y.len();

    let mut pool: Vec<CandidateModel> = subsets
        .per_size
        .iter()
        .flatten()
        .map(|c| CandidateModel {
            bic: bic(c.rss, n, c.columns.len()),
            columns: c.columns.clone(),
            rss: c.rss,
            max_vif: f64::NAN, // computed lazily below
        })
        .collect();

    let names = |cand: &CandidateModel| -> Vec<String> {
        cand.columns.iter().map(|&j| matrix.terms[j].name()).collect()
    };
    pool.sort_by(|a, b| {
        a.bic
            .partial_cmp(&b.bic)
            .unwrap()
            .then_with(|| a.columns.len().cmp(&b.columns.len()))
            .then_with(|| names(a).cmp(&names(b)))
    });
    // within a 1e-9 BIC window, prefer fewer predictors then smaller names
    let mut i = 0;
    while i < pool.len() {
        let mut j = i + 1;
        while j < pool.len() {
            let tied = match (pool[i].bic, pool[j].bic) {
                (BicScore::PerfectFit, BicScore::PerfectFit) => true,
                (BicScore::Value(a), BicScore::Value(b)) => (b - a).abs() <= 1e-9,
                _ => false,
            };
            if !tied {
                break;
            }
            j += 1;
        }
        pool[i..j].sort_by(|a, b| {
            a.columns
                .len()
                .cmp(&b.columns.len())
                .then_with(|| names(a).cmp(&names(b)))
        });
        i = j;
    }

    let mut best_infeasible: Option<CandidateModel> = None;
    for cand in &mut pool {
        let selected: Vec<Vec<f64>> = cand.columns.iter().map(|&j| columns[j].clone()).collect();
        let vifs = vif(&selected)?;
        cand.max_vif = vifs.iter().copied().fold(1.0f64, f64::max);
        if cand.feasible() {
            let fit = ols_fit(&selected, y)?;
            let terms: Vec<TermSpec> = cand.columns.iter().map(|&j| matrix.terms[j].clone()).collect();
            let training_ranges: Vec<(f64, f64)> = cand.columns.iter().map(|&j| matrix.ranges[j]).collect();
            return Ok(ModelFit {
                mode,
                terms,
                intercept: fit.intercept,
                coefficients: fit.coefficients,
                n,
                adj_r2: fit.adj_r2,
                bic: fit.bic.as_f64(),
                max_vif: cand.max_vif,
                training_ranges,
            });
        }
        if best_infeasible.is_none() {
            best_infeasible = Some(cand.clone());
        }
    }
    let best = best_infeasible
        .map(|c| format!("terms {:?}, rss {:.6}, max VIF {}", names(&c), c.rss, c.max_vif))
        .unwrap_or_else(|| "none".into());
    Err(Error::SelectionInfeasible { best })
}
