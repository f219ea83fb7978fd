#![allow(dead_code)]

use phasebal_core::model::{PhaseAssignment, PhaseSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every assignment respecting `widths`, in lexicographic order.
pub fn all_assignments(widths: &[u8]) -> Vec<PhaseAssignment> {
    let choices: Vec<Vec<PhaseSet>> = widths.iter().map(|&w| PhaseSet::of_width(w)).collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; widths.len()];
    loop {
        let sets: Vec<PhaseSet> = idx.iter().zip(&choices).map(|(&k, c)| c[k]).collect();
        out.push(PhaseAssignment::from_sets(&sets));
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return out;
            }
            idx[pos] += 1;
            if idx[pos] < choices[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Phase sums, counting a load's full demand on each phase it occupies.
pub fn sums(a: &PhaseAssignment, d: &[f64]) -> [f64; 3] {
    let mut s = [0.0; 3];
    for (i, &x) in d.iter().enumerate() {
        for (p, on) in [a.a[i], a.b[i], a.c[i]].into_iter().enumerate() {
            if on {
                s[p] += x;
            }
        }
    }
    s
}

/// `3 * max_p |S_p - total/3|` in exact integer arithmetic.
pub fn single_phase_x3(a: &PhaseAssignment, d: &[i64]) -> i64 {
    let mut s = [0i64; 3];
    let mut total = 0;
    for (i, &x) in d.iter().enumerate() {
        for (p, on) in [a.a[i], a.b[i], a.c[i]].into_iter().enumerate() {
            if on {
                s[p] += x;
                total += x;
            }
        }
    }
    s.iter().map(|&p| (3 * p - total).abs()).max().unwrap()
}

/// `max_{p,q} |S_p - S_q|` in exact integer arithmetic.
pub fn pairwise(a: &PhaseAssignment, d: &[i64]) -> i64 {
    let mut s = [0i64; 3];
    for (i, &x) in d.iter().enumerate() {
        for (p, on) in [a.a[i], a.b[i], a.c[i]].into_iter().enumerate() {
            if on {
                s[p] += x;
            }
        }
    }
    (s[0] - s[1]).abs().max((s[1] - s[2]).abs()).max((s[0] - s[2]).abs())
}

/// Single-phase deviation for one demand vector.
pub fn nu(a: &PhaseAssignment, d: &[f64], widths: &[u8]) -> f64 {
    let s = sums(a, d);
    let total: f64 = d.iter().zip(widths).map(|(&x, &w)| x * w as f64).sum();
    s.iter().map(|&p| (p - total / 3.0).abs()).fold(0.0, f64::max)
}

/// Worst single-phase deviation over the vertices of the box `[lo, hi]`.
pub fn vertex_worst(a: &PhaseAssignment, widths: &[u8], lo: &[f64], hi: &[f64]) -> f64 {
    let n = lo.len();
    (0u32..1 << n)
        .map(|mask| {
            let d: Vec<f64> = (0..n).map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] }).collect();
            nu(a, &d, widths)
        })
        .fold(0.0, f64::max)
}

pub fn random_widths(r: &mut ChaCha8Rng, n: usize, multiphase: bool) -> Vec<u8> {
    (0..n)
        .map(|_| if multiphase && r.gen_bool(0.3) { r.gen_range(2..=3) } else { 1 })
        .collect()
}

pub fn random_box(r: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
    let center: Vec<f64> = (0..n).map(|_| r.gen_range(1.0..20.0)).collect();
    let half: Vec<f64> = center.iter().map(|c| c * r.gen_range(0.0..0.5)).collect();
    (center, half)
}

/// Swaps between consecutive assignments, starting from `initial`.
pub fn plan_swaps(initial: &PhaseAssignment, plan: &[PhaseAssignment]) -> usize {
    let mut prev = initial;
    let mut total = 0;
    for a in plan {
        total += (0..a.len()).filter(|&i| prev.phases_of(i) != a.phases_of(i)).count();
        prev = a;
    }
    total
}
