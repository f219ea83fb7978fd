#![allow(dead_code)]

use phasebal_milp::{MilpInstance, RowSense, VarId};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random pure-binary instance with small integer data, so exhaustive
/// enumeration gives exact optima.
pub fn random_binary(seed: u64, n: usize, rows: usize) -> MilpInstance {
    let mut r = rng(seed);
    let mut m = MilpInstance::new(format!("bin{seed}"));
    let vars: Vec<VarId> = (0..n)
        .map(|j| m.add_binary(format!("x{j}"), r.gen_range(-10..=10) as f64).unwrap())
        .collect();
    for i in 0..rows {
        let mut terms = Vec::new();
        for &v in &vars {
            if r.gen_bool(0.6) {
                terms.push((v, r.gen_range(-5..=5) as f64));
            }
        }
        let sense = match r.gen_range(0..5) {
            0 => RowSense::Eq,
            1 | 2 => RowSense::Ge,
            _ => RowSense::Le,
        };
        let total: f64 = terms.iter().map(|t: &(VarId, f64)| t.1.abs()).sum();
        let rhs = match sense {
            // Equalities are anchored at a random point to keep them satisfiable more often.
            RowSense::Eq => {
                let mut s = 0.0;
                for t in &terms {
                    if r.gen_bool(0.5) {
                        s += t.1;
                    }
                }
                s
            }
            _ => (r.gen_range(-0.5..0.5) * total).round(),
        };
        m.add_constraint(format!("r{i}"), terms, sense, rhs).unwrap();
    }
    m
}

/// Random mixed instance: binaries plus bounded continuous variables.
pub fn random_mixed(seed: u64, nb: usize, nc: usize, rows: usize) -> MilpInstance {
    let mut r = rng(seed);
    let mut m = MilpInstance::new(format!("mixed_instance_{seed}"));
    let mut vars = Vec::new();
    for j in 0..nc {
        let v = m.add_continuous(format!("continuous_{j}"), r.gen_range(-3.0..3.0)).unwrap();
        m.add_constraint(format!("cap{j}"), [(v, 1.0)], RowSense::Le, r.gen_range(1.0..5.0))
            .unwrap();
        vars.push(v);
    }
    for j in 0..nb {
        let v = m.add_binary(format!("b{j}"), r.gen_range(-4.0..4.0)).unwrap();
        m.tag(v, format!("tag:{j}"));
        vars.push(v);
    }
    for i in 0..rows {
        let mut terms = Vec::new();
        for &v in &vars {
            if r.gen_bool(0.5) {
                terms.push((v, r.gen_range(-4.0..4.0)));
            }
        }
        let sense = if r.gen_bool(0.3) { RowSense::Ge } else { RowSense::Le };
        let rhs = match sense {
            RowSense::Ge => r.gen_range(-6.0..0.0),
            _ => r.gen_range(0.0..6.0),
        };
        m.add_constraint(format!("row {i}"), terms, sense, rhs).unwrap();
    }
    m
}

/// Exhaustive minimum over all binary assignments of a pure-binary instance.
pub fn enumerate(m: &MilpInstance) -> Option<f64> {
    let n = m.num_vars();
    let mut best: Option<f64> = None;
    let mut x = vec![0.0; n];
    for mask in 0u32..(1 << n) {
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = ((mask >> j) & 1) as f64;
        }
        if m.max_violation(&x) <= 1e-12 {
            let obj = m.objective_value(&x);
            if best.map_or(true, |b| obj < b) {
                best = Some(obj);
            }
        }
    }
    best
}
