//! Fixed-effect absorption by alternating projections.
//!
//! Each sweep subtracts group means for every term in turn. With a single
//! term one pass is exact; with several the iteration converges to the
//! projection onto the orthogonal complement of all dummy columns.

use super::frame::FeGrouping;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct AbsorbPlan {
    pub terms: Vec<FeGrouping>,
    /// Terms dropped because a finer term already spans them.
    pub nested: Vec<String>,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl AbsorbPlan {
    /// Build a plan, removing every term that is a coarsening of another
    /// (e.g. entity and month under entity×month).
    pub fn new(terms: Vec<FeGrouping>, tol: f64, max_sweeps: usize) -> Result<AbsorbPlan> {
        if terms.is_empty() {
            return Err(Error::Argument("absorption needs at least one fixed-effect term".into()));
        }
        let n = terms[0].ids.len();
        if terms.iter().any(|t| t.ids.len() != n) {
            return Err(Error::Argument("fixed-effect labellings differ in length".into()));
        }
        let mut keep = vec![true; terms.len()];
        for i in 0..terms.len() {
            for j in 0..terms.len() {
                if i == j || !keep[j] || !keep[i] {
                    continue;
                }
                // identical partitions: keep the first
                let same = terms[i].n_groups == terms[j].n_groups;
                if terms[i].is_coarsening_of(&terms[j]) && (!same || i > j) {
                    keep[i] = false;
                }
            }
        }
        let mut kept = Vec::new();
        let mut nested = Vec::new();
        for (t, k) in terms.into_iter().zip(keep) {
            if k {
                kept.push(t);
            } else {
                nested.push(t.label);
            }
        }
        Ok(AbsorbPlan {
            terms: kept,
            nested,
            tol,
            max_sweeps,
        })
    }

    /// Rank of the dummy matrix spanned by the plan's terms. Exact for up to
    /// two terms (groups minus connected components of the bipartite group
    /// graph); each further term contributes its groups minus one.
    pub fn dof_absorbed(&self) -> usize {
        let mut dof = self.terms[0].n_groups;
        if let Some(second) = self.terms.get(1) {
            let components = bipartite_components(&self.terms[0], second);
            dof += second.n_groups - components;
        }
        for t in self.terms.iter().skip(2) {
            dof += t.n_groups.saturating_sub(1);
        }
        dof
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn bipartite_components(a: &FeGrouping, b: &FeGrouping) -> usize {
    let na = a.n_groups;
    let mut parent: Vec<usize> = (0..na + b.n_groups).collect();
    for (&ga, &gb) in a.ids.iter().zip(&b.ids) {
        let ra = find(&mut parent, ga as usize);
        let rb = find(&mut parent, na + gb as usize);
        if ra != rb {
            parent[ra] = rb;
        }
    }
    (0..parent.len()).filter(|&i| find(&mut parent, i) == i).count()
}

struct GroupScratch {
    sums: Vec<f64>,
    counts: Vec<f64>,
}

impl GroupScratch {
    fn for_term(term: &FeGrouping) -> GroupScratch {
        let mut counts = vec![0.0; term.n_groups];
        for &g in &term.ids {
            counts[g as usize] += 1.0;
        }
        GroupScratch {
            sums: vec![0.0; term.n_groups],
            counts,
        }
    }

    /// Subtract group means in place; returns the largest |mean| removed.
    fn demean(&mut self, term: &FeGrouping, col: &mut [f64]) -> f64 {
        self.sums.iter_mut().for_each(|s| *s = 0.0);
        for (&g, &v) in term.ids.iter().zip(col.iter()) {
            self.sums[g as usize] += v;
        }
        let mut max_mean = 0.0f64;
        for (s, &c) in self.sums.iter_mut().zip(&self.counts) {
            *s /= c;
            max_mean = max_mean.max(s.abs());
        }
        for (&g, v) in term.ids.iter().zip(col.iter_mut()) {
            *v -= self.sums[g as usize];
        }
        max_mean
    }
}

/// Demean one column against every term. Returns the number of sweeps.
pub fn absorb_column(col: &mut [f64], plan: &AbsorbPlan) -> Result<usize> {
    let mut scratch: Vec<GroupScratch> = plan.terms.iter().map(GroupScratch::for_term).collect();
    if plan.terms.len() == 1 {
        scratch[0].demean(&plan.terms[0], col);
        return Ok(1);
    }
    // Means removed during a sweep bound the means left after it by their
    // sum over the other terms.
    let threshold = plan.tol / plan.terms.len() as f64;
    let mut last = f64::INFINITY;
    for sweep in 1..=plan.max_sweeps {
        let mut max_mean = 0.0f64;
        for (term, s) in plan.terms.iter().zip(scratch.iter_mut()) {
            max_mean = max_mean.max(s.demean(term, col));
        }
        last = max_mean;
        if sweep > 1 && max_mean < threshold {
            return Ok(sweep);
        }
    }
    Err(Error::NotConverged {
        sweeps: plan.max_sweeps,
        last_delta: last,
    })
}

/// Absorb the fixed effects from every column. Returns the largest sweep
/// count over columns.
pub fn absorb_fixed_effects(columns: &mut [Vec<f64>], plan: &AbsorbPlan) -> Result<usize> {
    if columns.is_empty() {
        return Err(Error::Argument("absorption needs at least one column".into()));
    }
    let mut sweeps = 0;
    for col in columns.iter_mut() {
        sweeps = sweeps.max(absorb_column(col, plan)?);
    }
    Ok(sweeps)
}

/// Largest |group mean| of `col` over every term of the plan.
pub fn max_group_mean(col: &[f64], plan: &AbsorbPlan) -> f64 {
    plan.terms
        .iter()
        .map(|t| {
            let mut scratch = GroupScratch::for_term(t);
            let mut copy = col.to_vec();
            scratch.demean(t, &mut copy)
        })
        .fold(0.0, f64::max)
}
