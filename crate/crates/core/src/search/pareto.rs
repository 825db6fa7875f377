//! Non-dominated sorting with crowding distance.

use std::cmp::Ordering;

/// Minimization objectives of one candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objectives {
    /// `1 - R²`; infinite when the fit failed.
    pub loss: f64,
    /// Node count.
    pub complexity: usize,
    /// Individual parameter count.
    pub k: usize,
}

impl Objectives {
    pub fn new(loss: f64, complexity: usize, k: usize) -> Self {
        Self { loss, complexity, k }
    }

    fn values(&self, use_k: bool) -> ([f64; 3], usize) {
        let v = [self.loss, self.complexity as f64, self.k as f64];
        (v, if use_k { 3 } else { 2 })
    }

    /// No worse in every objective and strictly better in one.
    pub fn dominates(&self, other: &Objectives, use_k: bool) -> bool {
        let (a, n) = self.values(use_k);
        let (b, _) = other.values(use_k);
        let mut strictly = false;
        for i in 0..n {
            if a[i] > b[i] {
                return false;
            }
            strictly |= a[i] < b[i];
        }
        strictly
    }

    /// Equal in every objective considered.
    pub fn ties(&self, other: &Objectives, use_k: bool) -> bool {
        let (a, n) = self.values(use_k);
        let (b, _) = other.values(use_k);
        a[..n] == b[..n]
    }
}

/// Fronts plus per-candidate rank and crowding distance.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    /// Candidate indices, best front first. Inside a front: larger crowding
    /// distance first, then lower `k`, lower complexity, lower index.
    pub fronts: Vec<Vec<usize>>,
    pub rank: Vec<usize>,
    pub crowding: Vec<f64>,
}

impl Ranking {
    /// Indices in selection order.
    pub fn order(&self) -> impl Iterator<Item = usize> + '_ {
        self.fronts.iter().flatten().copied()
    }

    /// Selection preference between two ranked candidates.
    pub fn compare(&self, objectives: &[Objectives], a: usize, b: usize) -> Ordering {
        self.rank[a]
            .cmp(&self.rank[b])
            .then_with(|| self.crowding[b].total_cmp(&self.crowding[a]))
            .then_with(|| objectives[a].k.cmp(&objectives[b].k))
            .then_with(|| objectives[a].complexity.cmp(&objectives[b].complexity))
            .then_with(|| a.cmp(&b))
    }
}

/// Non-dominated sorting over (loss, complexity, k).
pub fn pareto_rank(objectives: &[Objectives]) -> Vec<Vec<usize>> {
    rank(objectives, true).fronts
}

/// Sorting and crowding over (loss, complexity, k), or (loss, complexity)
/// when `use_k` is false.
pub fn rank(objectives: &[Objectives], use_k: bool) -> Ranking {
    let n = objectives.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if objectives[i].dominates(&objectives[j], use_k) {
                dominates[i].push(j);
                dominated_by[j] += 1;
            } else if objectives[j].dominates(&objectives[i], use_k) {
                dominates[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }

    let mut rank = vec![0; n];
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    let mut level = 0;
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            rank[i] = level;
            for &j in &dominates[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
        level += 1;
    }

    let mut crowding = vec![0.0; n];
    for front in &fronts {
        crowding_distance(objectives, front, use_k, &mut crowding);
    }
    let mut ranking = Ranking {
        fronts,
        rank,
        crowding,
    };
    let mut fronts = std::mem::take(&mut ranking.fronts);
    for front in &mut fronts {
        front.sort_by(|&a, &b| ranking.compare(objectives, a, b));
    }
    ranking.fronts = fronts;
    ranking
}

fn crowding_distance(objectives: &[Objectives], front: &[usize], use_k: bool, out: &mut [f64]) {
    if front.len() <= 2 {
        for &i in front {
            out[i] = f64::INFINITY;
        }
        return;
    }
    let n_obj = if use_k { 3 } else { 2 };
    let mut sorted = front.to_vec();
    for m in 0..n_obj {
        let value = |i: usize| objectives[i].values(use_k).0[m];
        sorted.sort_by(|&a, &b| value(a).total_cmp(&value(b)).then(a.cmp(&b)));
        let lo = value(sorted[0]);
        let hi = value(sorted[sorted.len() - 1]);
        out[sorted[0]] = f64::INFINITY;
        out[sorted[sorted.len() - 1]] = f64::INFINITY;
        let range = hi - lo;
        if !(range > 0.0 && range.is_finite()) {
            continue;
        }
        for w in 1..sorted.len() - 1 {
            let gap = value(sorted[w + 1]) - value(sorted[w - 1]);
            out[sorted[w]] += gap / range;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn o(loss: f64, c: usize, k: usize) -> Objectives {
        Objectives::new(loss, c, k)
    }

    #[test]
    fn strict_domination() {
        let objs = [o(0.1, 5, 3), o(0.2, 5, 3)];
        assert!(objs[0].dominates(&objs[1], true));
        assert_eq!(pareto_rank(&objs), vec![vec![0], vec![1]]);
    }

    #[test]
    fn mutual_non_domination() {
        let objs = [o(0.1, 9, 3), o(0.2, 5, 2)];
        assert_eq!(pareto_rank(&objs).len(), 1);
    }

    #[test]
    fn equal_objectives_share_a_front() {
        let objs = [o(0.1, 5, 3), o(0.1, 5, 3)];
        assert!(!objs[0].dominates(&objs[1], true));
        assert_eq!(pareto_rank(&objs), vec![vec![0, 1]]);
    }

    #[test]
    fn k_only_matters_when_enabled() {
        let objs = [o(0.1, 5, 3), o(0.1, 5, 20)];
        assert!(objs[0].dominates(&objs[1], true));
        assert!(!objs[0].dominates(&objs[1], false));
        assert!(objs[0].ties(&objs[1], false));
    }

    #[test]
    fn interior_points_have_finite_crowding() {
        let objs = [o(0.0, 9, 9), o(0.5, 5, 5), o(0.9, 1, 1), o(0.6, 4, 4)];
        let r = rank(&objs, true);
        assert_eq!(r.fronts.len(), 1);
        assert!(r.crowding[0].is_infinite() && r.crowding[2].is_infinite());
        assert!(r.crowding[1].is_finite() && r.crowding[3].is_finite());
        // boundary points first, then the wider gap
        assert_eq!(&r.fronts[0][2..], &[1, 3]);
    }

    #[test]
    fn tie_break_prefers_fewer_parameters() {
        // both boundary points of a two-member front
        let objs = [o(0.1, 3, 10), o(0.2, 2, 2)];
        let r = rank(&objs, true);
        assert_eq!(r.fronts, vec![vec![1, 0]]);
    }
}
