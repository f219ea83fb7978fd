//! Primal heuristics that seed branch-and-bound with good incumbents.
//!
//! The LP relaxation of phase balancing is weak (spreading every load evenly
//! over the phases balances perfectly), so the solver depends on starting
//! incumbents. Everything here is deterministic.

use crate::formulation::{greedy_assignment, ImbalanceObjective};
use crate::model::{BoxUncertaintySet, LookAheadConfig, Phase, PhaseAssignment, PhaseSet};

/// Worst deviation of each phase and sign over the box `[lo, hi]`:
/// `max_{d in box} +-sum_i d_i (p_i - w_i/3)`, exact for boxes.
fn box_deviations(assignment: &PhaseAssignment, widths: &[u8], lo: &[f64], hi: &[f64]) -> [f64; 6] {
    let mut out = [0.0; 6];
    for p in Phase::ALL {
        let on = assignment.vector(p);
        let (mut up, mut down) = (0.0, 0.0);
        for i in 0..on.len() {
            let c = on[i] as u8 as f64 - widths[i] as f64 / 3.0;
            let (a, b) = (c * lo[i], c * hi[i]);
            up += a.max(b);
            down += (-a).max(-b);
        }
        out[2 * p.index()] = up;
        out[2 * p.index() + 1] = down;
    }
    out
}

/// Worst single-phase deviation of `assignment` over the box `[lo, hi]`.
pub fn box_worst_imbalance(assignment: &PhaseAssignment, widths: &[u8], lo: &[f64], hi: &[f64]) -> f64 {
    box_deviations(assignment, widths, lo, hi).into_iter().fold(0.0, f64::max)
}

/// Single-phase deviation for a known demand vector.
pub fn imbalance(assignment: &PhaseAssignment, widths: &[u8], d: &[f64]) -> f64 {
    box_worst_imbalance(assignment, widths, d, d)
}

/// Search score over a box: the worst deviation, then the sum of squared
/// per-phase deviations to break plateaus.
pub fn box_score(assignment: &PhaseAssignment, widths: &[u8], lo: &[f64], hi: &[f64]) -> (f64, f64) {
    let dev = box_deviations(assignment, widths, lo, hi);
    let worst = dev.iter().copied().fold(0.0, f64::max);
    let spread = dev.iter().map(|x| x.max(0.0).powi(2)).sum();
    (worst, spread)
}

fn better(a: (f64, f64), b: (f64, f64)) -> bool {
    const EPS: f64 = 1e-12;
    a.0 < b.0 - EPS || (a.0 <= b.0 + EPS && a.1 < b.1 - EPS)
}

/// Worst pairwise phase difference over the box `[lo, hi]`.
pub fn box_worst_pairwise(assignment: &PhaseAssignment, lo: &[f64], hi: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for (p, q) in [(Phase::A, Phase::B), (Phase::B, Phase::C), (Phase::A, Phase::C)] {
        let (vp, vq) = (assignment.vector(p), assignment.vector(q));
        let (mut up, mut down) = (0.0, 0.0);
        for i in 0..vp.len() {
            let c = vp[i] as u8 as f64 - vq[i] as u8 as f64;
            up += (c * lo[i]).max(c * hi[i]);
            down += (-c * lo[i]).max(-c * hi[i]);
        }
        worst = worst.max(up).max(down);
    }
    worst
}

/// Start for the static problems: greedy on the box centre, then local search
/// on the worst case over `[lo, hi]`.
pub fn static_start(widths: &[u8], lo: &[f64], hi: &[f64], objective: ImbalanceObjective) -> PhaseAssignment {
    let centre: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect();
    let start = greedy_assignment(&centre, widths);
    match objective {
        ImbalanceObjective::SinglePhase => local_search(&start, widths, |a| box_score(a, widths, lo, hi)),
        ImbalanceObjective::Pairwise => local_search(&start, widths, |a| {
            (box_worst_pairwise(a, lo, hi), box_score(a, widths, lo, hi).1)
        }),
    }
}

/// Candidate phase sets a load may move to.
fn alternatives(width: u8, current: PhaseSet) -> impl Iterator<Item = PhaseSet> {
    PhaseSet::of_width(width).into_iter().filter(move |&s| s != current)
}

fn with_set(assignment: &PhaseAssignment, load: usize, set: PhaseSet) -> PhaseAssignment {
    let mut out = assignment.clone();
    let [a, b, c] = set.bits();
    out.a[load] = a;
    out.b[load] = b;
    out.c[load] = c;
    out
}

/// Best-improvement local search over single-load moves and exchanges of two
/// loads' phase sets, minimizing `score` lexicographically.
pub fn local_search(
    start: &PhaseAssignment,
    widths: &[u8],
    score: impl Fn(&PhaseAssignment) -> (f64, f64),
) -> PhaseAssignment {
    const MAX_ROUNDS: usize = 1000;
    let n = start.len();
    let mut cur = start.clone();
    let mut cur_score = score(&cur);
    for _ in 0..MAX_ROUNDS {
        let mut best: Option<((f64, f64), PhaseAssignment)> = None;
        let consider = |cand: PhaseAssignment, best: &mut Option<((f64, f64), PhaseAssignment)>| {
            let s = score(&cand);
            if better(s, cur_score) && best.as_ref().map_or(true, |(bs, _)| better(s, *bs)) {
                *best = Some((s, cand));
            }
        };
        for i in 0..n {
            for set in alternatives(widths[i], cur.phases_of(i)) {
                consider(with_set(&cur, i, set), &mut best);
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let (si, sj) = (cur.phases_of(i), cur.phases_of(j));
                if widths[i] == widths[j] && si != sj {
                    consider(with_set(&with_set(&cur, i, sj), j, si), &mut best);
                }
            }
        }
        match best {
            Some((s, cand)) => {
                cur = cand;
                cur_score = s;
            }
            None => break,
        }
    }
    cur
}

/// Look-ahead objective `u + lambda v` of a plan over box sets, where
/// `plan[t]` is the assignment at snapshot `t + 1` of the committed period.
/// Returns `(u + lambda v, u)`.
pub fn lookahead_objective(
    plan: &[PhaseAssignment],
    widths: &[u8],
    bounds: &[(Vec<f64>, Vec<f64>)],
    lambda: f64,
) -> (f64, f64) {
    let (obj, u, _) = lookahead_score(plan, widths, bounds, lambda);
    (obj, u)
}

fn lookahead_score(
    plan: &[PhaseAssignment],
    widths: &[u8],
    bounds: &[(Vec<f64>, Vec<f64>)],
    lambda: f64,
) -> (f64, f64, f64) {
    let t1 = plan.len();
    let (mut u, mut v, mut spread) = (0.0f64, 0.0f64, 0.0);
    for (t, (lo, hi)) in bounds.iter().enumerate() {
        let a = &plan[t.min(t1 - 1)];
        let (w, s) = box_score(a, widths, lo, hi);
        if t < t1 {
            u = u.max(w);
            spread += s;
        } else {
            v = v.max(w);
            spread += lambda * s;
        }
    }
    (u + lambda * v, u, spread)
}

/// Worst-case deviations one load adds at one snapshot, ordered
/// `[A up, A down, B up, B down, C up, C down]`.
fn contribution(set: PhaseSet, width: u8, lo: f64, hi: f64) -> [f64; 6] {
    let mut out = [0.0; 6];
    for p in Phase::ALL {
        let c = set.contains(p) as u8 as f64 - width as f64 / 3.0;
        out[2 * p.index()] = (c * lo).max(c * hi);
        out[2 * p.index() + 1] = (-c * lo).max(-c * hi);
    }
    out
}

fn worst_and_spread(dev: &[f64; 6]) -> (f64, f64) {
    let worst = dev.iter().copied().fold(0.0, f64::max);
    let spread = dev.iter().map(|x| x.max(0.0).powi(2)).sum();
    (worst, spread)
}

/// Loads in `loads` take their paired set over snapshots `from..to`.
#[derive(Debug, Clone)]
struct Change {
    loads: Vec<(usize, PhaseSet)>,
    from: usize,
    to: usize,
}

/// A committed-period plan with cached per-snapshot deviations, so that the
/// effect of a [`Change`] costs time proportional to the snapshots it touches.
struct PlanState<'a> {
    widths: &'a [u8],
    bounds: &'a [(Vec<f64>, Vec<f64>)],
    lambda: f64,
    t1: usize,
    initial: Vec<PhaseSet>,
    /// `sets[t][i]` for `t < t1`; the advisory period repeats `sets[t1 - 1]`.
    sets: Vec<Vec<PhaseSet>>,
    dev: Vec<[f64; 6]>,
    worst: Vec<f64>,
    /// `prefix[k]` is the worst over committed snapshots `..k`, `suffix[k]` over `k..t1`.
    prefix: Vec<f64>,
    suffix: Vec<f64>,
    v: f64,
    spread: f64,
    swaps: usize,
}

impl<'a> PlanState<'a> {
    fn new(config: &LookAheadConfig, widths: &'a [u8], bounds: &'a [(Vec<f64>, Vec<f64>)]) -> Self {
        let initial = config.initial_assignment.sets();
        let mut state = Self {
            widths,
            bounds,
            lambda: config.lambda,
            t1: config.t1,
            sets: vec![initial.clone(); config.t1],
            initial,
            dev: Vec::new(),
            worst: Vec::new(),
            prefix: Vec::new(),
            suffix: Vec::new(),
            v: 0.0,
            spread: 0.0,
            swaps: 0,
        };
        state.refresh();
        state
    }

    fn set_at(&self, t: usize, i: usize) -> PhaseSet {
        self.sets[t.min(self.t1 - 1)][i]
    }

    fn weight(&self, t: usize) -> f64 {
        if t < self.t1 {
            1.0
        } else {
            self.lambda
        }
    }

    /// Recomputes every cache from `sets`.
    fn refresh(&mut self) {
        let t2 = self.bounds.len();
        self.dev = (0..t2)
            .map(|t| {
                let (lo, hi) = &self.bounds[t];
                let mut d = [0.0; 6];
                for i in 0..self.widths.len() {
                    let c = contribution(self.set_at(t, i), self.widths[i], lo[i], hi[i]);
                    d.iter_mut().zip(c).for_each(|(x, y)| *x += y);
                }
                d
            })
            .collect();
        let ws: Vec<(f64, f64)> = self.dev.iter().map(worst_and_spread).collect();
        self.worst = ws.iter().map(|w| w.0).collect();
        self.spread = ws.iter().enumerate().map(|(t, w)| self.weight(t) * w.1).sum();
        self.v = self.worst[self.t1..].iter().copied().fold(0.0, f64::max);
        self.prefix = vec![0.0; self.t1 + 1];
        self.suffix = vec![0.0; self.t1 + 1];
        for t in 0..self.t1 {
            self.prefix[t + 1] = self.prefix[t].max(self.worst[t]);
        }
        for t in (0..self.t1).rev() {
            self.suffix[t] = self.suffix[t + 1].max(self.worst[t]);
        }
        self.swaps = (0..self.widths.len())
            .map(|i| {
                (0..self.t1)
                    .filter(|&t| self.sets[t][i] != if t == 0 { self.initial[i] } else { self.sets[t - 1][i] })
                    .count()
            })
            .sum();
    }

    fn score(&self) -> (f64, f64) {
        (self.prefix[self.t1] + self.lambda * self.v, self.spread)
    }

    /// Swap count and score after `change`, without applying it.
    fn evaluate(&self, change: &Change) -> (usize, (f64, f64)) {
        let (from, to) = (change.from, change.to);
        let mut swaps = self.swaps as isize;
        for &(i, s) in &change.loads {
            let prev = |t: usize| if t == 0 { self.initial[i] } else { self.sets[t - 1][i] };
            let last = to.min(self.t1 - 1);
            for t in from..=last {
                let old = (prev(t) != self.sets[t][i]) as isize;
                let new_prev = if t > from { s } else { prev(t) };
                let new_cur = if t < to { s } else { self.sets[t][i] };
                swaps += (new_prev != new_cur) as isize - old;
            }
        }
        let touched = if to == self.t1 { from..self.bounds.len() } else { from..to };
        let (mut u_mid, mut v_new, mut spread) = (0.0f64, 0.0f64, self.spread);
        for t in touched {
            let (lo, hi) = &self.bounds[t];
            let mut d = self.dev[t];
            for &(i, s) in &change.loads {
                let w = self.widths[i];
                let old = contribution(self.set_at(t, i), w, lo[i], hi[i]);
                let new = contribution(s, w, lo[i], hi[i]);
                for k in 0..6 {
                    d[k] += new[k] - old[k];
                }
            }
            let (worst, sq) = worst_and_spread(&d);
            let (_, old_sq) = worst_and_spread(&self.dev[t]);
            spread += self.weight(t) * (sq - old_sq);
            if t < self.t1 {
                u_mid = u_mid.max(worst);
            } else {
                v_new = v_new.max(worst);
            }
        }
        let u = self.prefix[from].max(self.suffix[to]).max(u_mid);
        let v = if to == self.t1 { v_new } else { self.v };
        (swaps.max(0) as usize, (u + self.lambda * v, spread))
    }

    fn apply(&mut self, change: &Change) {
        for t in change.from..change.to {
            for &(i, s) in &change.loads {
                self.sets[t][i] = s;
            }
        }
        self.refresh();
    }

    fn candidates(&self) -> Vec<Change> {
        let n = self.widths.len();
        let mut out = Vec::new();
        for i in 0..n {
            for set in PhaseSet::of_width(self.widths[i]) {
                for from in 0..self.t1 {
                    for to in from + 1..=self.t1 {
                        out.push(Change { loads: vec![(i, set)], from, to });
                    }
                }
            }
        }
        for from in 0..self.t1 {
            for i in 0..n {
                for j in i + 1..n {
                    let (si, sj) = (self.sets[from][i], self.sets[from][j]);
                    if self.widths[i] == self.widths[j] && si != sj {
                        out.push(Change { loads: vec![(i, sj), (j, si)], from, to: self.t1 });
                    }
                }
            }
        }
        out
    }

    fn plan(&self) -> Vec<PhaseAssignment> {
        self.sets.iter().map(|s| PhaseAssignment::from_sets(s)).collect()
    }
}

/// Greedy swap planner. Starting from the initial assignment held over the
/// committed period, repeatedly applies the change that lowers `u + lambda v`
/// the most (ties broken by total squared deviation) within the swap budget.
/// Changes are one load taking a phase set over a snapshot interval, which
/// covers both a lasting move and a move followed by a return, or two loads
/// exchanging phase sets for the rest of the period.
pub fn greedy_lookahead(config: &LookAheadConfig, widths: &[u8], sets: &[BoxUncertaintySet]) -> Vec<PhaseAssignment> {
    const MAX_STEPS: usize = 200;
    let bounds: Vec<(Vec<f64>, Vec<f64>)> = sets.iter().map(|s| (s.lower(), s.upper())).collect();
    let mut state = PlanState::new(config, widths, &bounds);
    for _ in 0..MAX_STEPS {
        let current = state.score();
        let mut best: Option<((f64, f64), Change)> = None;
        for change in state.candidates() {
            let (swaps, score) = state.evaluate(&change);
            if swaps <= config.swap_budget
                && better(score, current)
                && best.as_ref().map_or(true, |(b, _)| better(score, *b))
            {
                best = Some((score, change));
            }
        }
        match best {
            Some((_, change)) => state.apply(&change),
            None => break,
        }
    }
    state.plan()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::greedy_assignment;
    use crate::model::count_swaps;
    use Phase::*;

    #[test]
    fn worst_case_matches_vertex_scan() {
        let a = PhaseAssignment::from_phases(&[A, B, A]);
        let lo = [1.0, 2.0, 0.5];
        let hi = [2.0, 3.0, 1.5];
        let mut oracle = 0.0f64;
        for mask in 0..8 {
            let d: Vec<f64> = (0..3).map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] }).collect();
            oracle = oracle.max(imbalance(&a, &[1, 1, 1], &d));
        }
        assert!((box_worst_imbalance(&a, &[1, 1, 1], &lo, &hi) - oracle).abs() < 1e-12);
    }

    #[test]
    fn local_search_reaches_a_local_optimum() {
        let d = [3.0, 3.0, 2.0, 2.0, 1.0, 1.0];
        let w = [1; 6];
        let score = |a: &PhaseAssignment| box_score(a, &w, &d, &d);
        let start = PhaseAssignment::from_phases(&[A; 6]);
        let out = local_search(&start, &w, score);
        assert!(better(score(&out), score(&start)));
        for i in 0..6 {
            for set in alternatives(1, out.phases_of(i)) {
                assert!(!better(score(&with_set(&out, i, set)), score(&out)));
            }
        }
        let greedy = greedy_assignment(&d, &w);
        let polished = local_search(&greedy, &w, score);
        assert!(imbalance(&polished, &w, &d) < 1e-9);
    }

    #[test]
    fn incremental_evaluation_matches_full_recompute() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let widths = [1, 1, 2, 1, 1];
        let init = PhaseAssignment::from_sets(&[
            PhaseSet::single(A),
            PhaseSet::single(B),
            PhaseSet::from_bits([true, false, true]),
            PhaseSet::single(A),
            PhaseSet::single(C),
        ]);
        let mut cfg = LookAheadConfig::new(init);
        cfg.t1 = 4;
        cfg.t2 = 7;
        let bounds: Vec<(Vec<f64>, Vec<f64>)> = (0..7)
            .map(|_| {
                let lo: Vec<f64> = (0..5).map(|_| rng.gen_range(0.0..5.0)).collect();
                let hi = lo.iter().map(|l| l + rng.gen_range(0.0..2.0)).collect();
                (lo, hi)
            })
            .collect();
        let mut state = PlanState::new(&cfg, &widths, &bounds);
        for step in 0..200 {
            let cands = state.candidates();
            let change = cands[rng.gen_range(0..cands.len())].clone();
            let (swaps, score) = state.evaluate(&change);
            let mut fresh = PlanState::new(&cfg, &widths, &bounds);
            fresh.sets = state.sets.clone();
            fresh.apply(&change);
            assert_eq!(swaps, fresh.swaps, "step {step}");
            let (obj, _, spread) = lookahead_score(&fresh.plan(), &widths, &bounds, cfg.lambda);
            assert!((score.0 - obj).abs() < 1e-9 && (score.1 - spread).abs() < 1e-6, "step {step}");
            let mut direct = 0;
            let plan = fresh.plan();
            direct += count_swaps(&cfg.initial_assignment, &plan[0]).unwrap();
            for t in 1..plan.len() {
                direct += count_swaps(&plan[t - 1], &plan[t]).unwrap();
            }
            assert_eq!(swaps, direct);
            if step % 3 == 0 {
                state = fresh;
            }
        }
    }

    #[test]
    fn greedy_plan_respects_budget() {
        let init = PhaseAssignment::from_phases(&[A, A, A, B]);
        let sets: Vec<BoxUncertaintySet> = (0..4)
            .map(|_| BoxUncertaintySet::relative(vec![5.0, 4.0, 3.0, 2.0], 0.1).unwrap())
            .collect();
        let mut cfg = LookAheadConfig::new(init.clone());
        cfg.t1 = 2;
        cfg.t2 = 4;
        for s in 0..3 {
            cfg.swap_budget = s;
            let plan = greedy_lookahead(&cfg, &[1; 4], &sets);
            let mut total = count_swaps(&init, &plan[0]).unwrap();
            total += count_swaps(&plan[0], &plan[1]).unwrap();
            assert!(total <= s);
        }
    }
}
