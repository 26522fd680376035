//! Seeded generators and independent re-checkers shared by the
//! integration suites. Oracles here deliberately avoid the library's own
//! algorithms: they enumerate definitions directly.

#![allow(dead_code)]

use std::collections::BTreeSet;

use ilw::invariance::{FiniteAction, FiniteSemigroup};
use ilw::logic::{Formula, RelationDecl, Signature, Term};
use ilw::nip::FunctionFamily;
use ilw::rational::{q, q0, q1, Q};
use ilw::stability::PhiMatrix;
use ilw::structures::FiniteStructure;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A rational n/d with |n| <= span and 1 <= d <= 4.
pub fn random_rational(rng: &mut ChaCha8Rng, span: i64) -> Q {
    let n = rng.gen_range(-span..=span);
    let d = rng.gen_range(1..=4);
    q(n, d)
}

/// Random positive weights normalized to a probability vector.
pub fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<Q> {
    let raw: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=4)).collect();
    let total: i64 = raw.iter().sum();
    raw.into_iter().map(|w| q(w, total)).collect()
}

/// A signature with one or two relations of arity 1..=2 and up to two
/// constants, bounds drawn from {1/2, 1, 2}.
pub fn random_signature(rng: &mut ChaCha8Rng) -> Signature {
    let bounds = [q(1, 2), q1(), q(2, 1)];
    let n_rel = rng.gen_range(1..=2);
    let relations = (0..n_rel)
        .map(|i| {
            let arity = rng.gen_range(1..=2);
            let bound = bounds[rng.gen_range(0..bounds.len())].clone();
            RelationDecl::new(&format!("R{i}"), arity, bound)
        })
        .collect();
    let constants = (0..rng.gen_range(0..=2))
        .map(|i| format!("c{i}"))
        .collect();
    Signature::new(relations, constants).expect("generated signature is valid")
}

/// A structure interpreting `sig` on 1..=4 points with random weights and
/// relation values inside the declared bounds.
pub fn random_structure(rng: &mut ChaCha8Rng, sig: &Signature) -> FiniteStructure {
    let n = rng.gen_range(1..=4);
    let points: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
    let weights = random_weights(rng, n);
    let values = sig
        .relations()
        .iter()
        .map(|decl| {
            let cells = n.pow(decl.arity as u32);
            let table = (0..cells)
                .map(|_| {
                    // A random multiple k/4 of the bound keeps |v| <= bound.
                    let k = rng.gen_range(-4..=4i64);
                    decl.bound.clone() * q(k, 4)
                })
                .collect();
            (decl.name.clone(), table)
        })
        .collect();
    let constants = sig
        .constants()
        .iter()
        .map(|c| (c.clone(), format!("p{}", rng.gen_range(0..n))))
        .collect();
    FiniteStructure::new(sig.clone(), points, weights, values, constants)
        .expect("generated structure is valid")
}

/// A random formula over `sig` whose free variables come from `pool`.
/// Integration variables are minted fresh (`v0`, `v1`, ..) so no
/// combination ever shadows; every constructor call is total here.
pub fn random_formula(
    rng: &mut ChaCha8Rng,
    sig: &Signature,
    pool: &[String],
    depth: usize,
    binder: &mut usize,
) -> Formula {
    // Only called when a term exists: pool or constants nonempty.
    let atom = |rng: &mut ChaCha8Rng, pool: &[String]| -> Formula {
        let choices = sig.relations().len();
        let decl = &sig.relations()[rng.gen_range(0..choices)];
        let args = (0..decl.arity)
            .map(|_| {
                let use_const =
                    !sig.constants().is_empty() && (pool.is_empty() || rng.gen_bool(0.3));
                if use_const {
                    Term::Const(sig.constants()[rng.gen_range(0..sig.constants().len())].clone())
                } else {
                    Term::Var(pool[rng.gen_range(0..pool.len())].clone())
                }
            })
            .collect();
        Formula::atom(sig, &decl.name, args).expect("atom arity matches declaration")
    };
    // Leaves: mostly atoms, sometimes constants. Fall back to a constant
    // when no term can fill an atom argument.
    let can_atom = !pool.is_empty() || !sig.constants().is_empty();
    if depth == 0 || rng.gen_bool(0.2) {
        if can_atom && rng.gen_bool(0.8) {
            return atom(rng, pool);
        }
        return Formula::rat(random_rational(rng, 2));
    }
    match rng.gen_range(0..7) {
        0 => {
            let l = random_formula(rng, sig, pool, depth - 1, binder);
            let r = random_formula(rng, sig, pool, depth - 1, binder);
            Formula::add(l, r).expect("fresh binders never shadow")
        }
        1 => {
            let l = random_formula(rng, sig, pool, depth - 1, binder);
            let r = random_formula(rng, sig, pool, depth - 1, binder);
            Formula::sub(l, r).expect("fresh binders never shadow")
        }
        2 => {
            let l = random_formula(rng, sig, pool, depth - 1, binder);
            let r = random_formula(rng, sig, pool, depth - 1, binder);
            Formula::product(l, r).expect("fresh binders never shadow")
        }
        3 => Formula::abs(random_formula(rng, sig, pool, depth - 1, binder)),
        4 => {
            let l = random_formula(rng, sig, pool, depth - 1, binder);
            let r = random_formula(rng, sig, pool, depth - 1, binder);
            if rng.gen_bool(0.5) {
                Formula::max(l, r).expect("fresh binders never shadow")
            } else {
                Formula::min(l, r).expect("fresh binders never shadow")
            }
        }
        _ => {
            let var = format!("v{binder}");
            *binder += 1;
            let mut inner: Vec<String> = pool.to_vec();
            inner.push(var.clone());
            let body = random_formula(rng, sig, &inner, depth - 1, binder);
            Formula::integral(&var, body).expect("minted binder is fresh")
        }
    }
}

/// Random matrix with entries k/2 for k in -2..=2, uniform measures.
pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> PhiMatrix {
    let entries = (0..rows)
        .map(|_| (0..cols).map(|_| q(rng.gen_range(-2..=2), 2)).collect())
        .collect();
    PhiMatrix::from_entries(entries).expect("nonempty matrix")
}

/// Random family of `n_funcs` functions on `n` points, values in
/// {0, 1/4, 1/2, 3/4, 1}, random weights.
pub fn random_family(rng: &mut ChaCha8Rng, n: usize, n_funcs: usize) -> FunctionFamily {
    let points = (0..n).map(|i| format!("x{i}")).collect();
    let weights = random_weights(rng, n);
    let functions = (0..n_funcs)
        .map(|i| {
            let values = (0..n).map(|_| q(rng.gen_range(0..=4), 4)).collect();
            (format!("f{i}"), values)
        })
        .collect();
    FunctionFamily::new(points, weights, functions).expect("generated family is valid")
}

// ---- exhaustive action enumeration ----

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::new();
        for p in out {
            for i in 0..n {
                if !p.contains(&i) {
                    let mut p2 = p.clone();
                    p2.push(i);
                    next.push(p2);
                }
            }
        }
        out = next;
    }
    out
}

/// All multiplication tables on `n` elements, associative ones only.
fn semigroup_tables(n: usize) -> Vec<Vec<Vec<usize>>> {
    let cells = n * n;
    let mut out = Vec::new();
    let total = n.pow(cells as u32);
    'tables: for code in 0..total {
        let mut c = code;
        let mut table = vec![vec![0; n]; n];
        for i in 0..n {
            for j in 0..n {
                table[i][j] = c % n;
                c /= n;
            }
        }
        for a in 0..n {
            for b in 0..n {
                for d in 0..n {
                    if table[table[a][b]][d] != table[a][table[b][d]] {
                        continue 'tables;
                    }
                }
            }
        }
        out.push(table);
    }
    out
}

/// Serializes an action pair under a relabeling of elements and points.
/// `sigma` maps old element index to new, `tau` likewise for points.
fn relabel_key(
    s_table: &[Vec<usize>],
    act: &[Vec<usize>],
    sigma: &[usize],
    tau: &[usize],
) -> Vec<usize> {
    let n = s_table.len();
    let m = act[0].len();
    let mut inv_sigma = vec![0; n];
    for (old, &new) in sigma.iter().enumerate() {
        inv_sigma[new] = old;
    }
    let mut inv_tau = vec![0; m];
    for (old, &new) in tau.iter().enumerate() {
        inv_tau[new] = old;
    }
    let mut key = Vec::with_capacity(n * n + n * m);
    for i in 0..n {
        for j in 0..n {
            key.push(sigma[s_table[inv_sigma[i]][inv_sigma[j]]]);
        }
    }
    for i in 0..n {
        for x in 0..m {
            key.push(tau[act[inv_sigma[i]][inv_tau[x]]]);
        }
    }
    key
}

/// Every action of a semigroup with at most `max_s` elements on a set of
/// at most `max_x` points, one representative per simultaneous relabeling
/// class of elements and points.
pub fn enumerate_actions(max_s: usize, max_x: usize) -> Vec<FiniteAction> {
    let mut actions = Vec::new();
    // Keyed by sizes plus the canonical serialization, so isomorphic
    // labeled semigroups collapse too.
    let mut seen: BTreeSet<(usize, usize, Vec<usize>)> = BTreeSet::new();
    for n in 1..=max_s {
        let elem_perms = permutations(n);
        for s_table in semigroup_tables(n) {
            // A two-sided identity must act as the identity map: actions
            // of monoids are unital by definition here.
            let identity = (0..n)
                .find(|&e| (0..n).all(|x| s_table[e][x] == x && s_table[x][e] == x));
            for m in 1..=max_x {
                let point_perms = permutations(m);
                let total = m.pow((n * m) as u32);
                'acts: for code in 0..total {
                    let mut c = code;
                    let mut act = vec![vec![0; m]; n];
                    for row in act.iter_mut() {
                        for cell in row.iter_mut() {
                            *cell = c % m;
                            c /= m;
                        }
                    }
                    // Compatibility: act[s*t] = act[s] after act[t].
                    for s in 0..n {
                        for t in 0..n {
                            for x in 0..m {
                                if act[s_table[s][t]][x] != act[s][act[t][x]] {
                                    continue 'acts;
                                }
                            }
                        }
                    }
                    if let Some(e) = identity {
                        if (0..m).any(|x| act[e][x] != x) {
                            continue 'acts;
                        }
                    }
                    let s_ref = &s_table;
                    let act_ref = &act;
                    let canonical = elem_perms
                        .iter()
                        .flat_map(|sigma| {
                            point_perms
                                .iter()
                                .map(move |tau| relabel_key(s_ref, act_ref, sigma, tau))
                        })
                        .min()
                        .expect("identity relabeling exists");
                    if !seen.insert((n, m, canonical)) {
                        continue;
                    }
                    let semigroup = FiniteSemigroup::new(
                        (0..n).map(|i| format!("e{i}")).collect(),
                        s_table.clone(),
                    )
                    .expect("table checked associative");
                    let action = FiniteAction::new(
                        semigroup,
                        (0..m).map(|x| format!("x{x}")).collect(),
                        act,
                    )
                    .expect("table checked compatible");
                    actions.push(action);
                }
            }
        }
    }
    actions
}

/// The maps of the action, one per semigroup element.
pub fn action_maps(action: &FiniteAction) -> Vec<Vec<usize>> {
    (0..action.semigroup().len())
        .map(|s| (0..action.len()).map(|x| action.apply(s, x)).collect())
        .collect()
}

/// Direct pushforward check: mu is an invariant probability measure.
/// Re-derives the invariance equations instead of trusting the solver.
pub fn measure_is_invariant(action: &FiniteAction, mu: &[Q]) -> bool {
    if mu.len() != action.len() {
        return false;
    }
    if mu.iter().any(|w| w < &q0()) {
        return false;
    }
    if mu.iter().fold(q0(), |acc, w| acc + w) != q1() {
        return false;
    }
    for map in action_maps(action) {
        for y in 0..action.len() {
            let pulled = (0..action.len())
                .filter(|&x| map[x] == y)
                .fold(q0(), |acc, x| acc + &mu[x]);
            if pulled != mu[y] {
                return false;
            }
        }
    }
    true
}

/// A random finite topometric-shaped space on `n` points: minOpen sets
/// come from a random preorder (reflexive, transitively closed reach
/// sets), the metric is random symmetric with zero diagonal. Shape-valid
/// for the derivative machinery; the topometric axioms may fail.
pub fn random_preorder_space(rng: &mut ChaCha8Rng, n: usize) -> ilw::topometric::FiniteTopoSpace {
    let mut reach = vec![vec![false; n]; n];
    for (x, row) in reach.iter_mut().enumerate() {
        row[x] = true;
        for y in 0..n {
            if y != x && rng.gen_bool(0.3) {
                row[y] = true;
            }
        }
    }
    loop {
        let mut changed = false;
        for x in 0..n {
            for y in 0..n {
                if reach[x][y] {
                    for z in 0..n {
                        if reach[y][z] && !reach[x][z] {
                            reach[x][z] = true;
                            changed = true;
                        }
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let min_open: Vec<BTreeSet<usize>> = (0..n)
        .map(|x| (0..n).filter(|&y| reach[x][y]).collect())
        .collect();
    let mut metric = vec![vec![q0(); n]; n];
    for x in 0..n {
        for y in 0..x {
            let d = [q1(), q(3, 2), q(2, 1)][rng.gen_range(0..3)].clone();
            metric[x][y] = d.clone();
            metric[y][x] = d;
        }
    }
    ilw::topometric::FiniteTopoSpace::new(
        (0..n).map(|i| format!("p{i}")).collect(),
        min_open,
        metric,
    )
    .expect("generated space has valid shape")
}

/// Reduced words over a, A, b, B of length at most `n`, including the
/// empty word, built by plain string recursion.
pub fn reduced_words(n: usize) -> Vec<String> {
    let letters = ['a', 'A', 'b', 'B'];
    let inverse = |c: char| match c {
        'a' => 'A',
        'A' => 'a',
        'b' => 'B',
        _ => 'b',
    };
    let mut out = vec![String::new()];
    let mut frontier = vec![String::new()];
    for _ in 0..n {
        let mut next = Vec::new();
        for w in &frontier {
            for &c in &letters {
                if w.chars().last() == Some(inverse(c)) {
                    continue;
                }
                let mut w2 = w.clone();
                w2.push(c);
                next.push(w2);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}
