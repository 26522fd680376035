//! Paradoxical decompositions over partial injective actions.
//!
//! A certificate claims that a target set `E` is covered twice over: pieces
//! `A_1..A_m` moved by words `g_1..g_m` cover `E`, pieces `B_1..B_k` moved by
//! `h_1..h_k` cover `E` again, and all pieces together are pairwise disjoint
//! subsets of `E`. On a finite target this is impossible when every
//! application is defined (the pieces hold at most `|E|` points but must
//! supply two covers), so exact certificates exist only in the infinite
//! limit; finite balls of the free group exhibit the boundary defects that
//! vanish as the ball grows.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::InvarianceError;
use crate::cancel::CancelToken;
use crate::structures::valid_label;

/// Default ceiling on `|E|` for the exhaustive decomposition search.
pub const SEARCH_LIMIT: usize = 12;

/// Finitely many named injective partial maps on a finite point set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialAction {
    points: Vec<String>,
    generators: Vec<(String, Vec<Option<usize>>)>,
}

impl PartialAction {
    pub fn new(
        points: Vec<String>,
        generators: Vec<(String, Vec<Option<usize>>)>,
    ) -> Result<Self, InvarianceError> {
        if points.is_empty() {
            return Err(InvarianceError::EmptyAction);
        }
        let mut seen = BTreeSet::new();
        for p in &points {
            if !valid_label(p) {
                return Err(InvarianceError::BadLabel(p.clone()));
            }
            if !seen.insert(p.clone()) {
                return Err(InvarianceError::DuplicateLabel(p.clone()));
            }
        }
        let mut gen_names = BTreeSet::new();
        for (name, map) in &generators {
            if !valid_label(name) {
                return Err(InvarianceError::BadLabel(name.clone()));
            }
            if !gen_names.insert(name.clone()) {
                return Err(InvarianceError::DuplicateLabel(name.clone()));
            }
            if map.len() != points.len() {
                return Err(InvarianceError::VectorSize {
                    expected: points.len(),
                    got: map.len(),
                });
            }
            let mut image = BTreeSet::new();
            for (x, target) in map.iter().enumerate() {
                if let Some(y) = target {
                    if *y >= points.len() {
                        return Err(InvarianceError::BadPoint(*y));
                    }
                    if !image.insert(*y) {
                        let other = map[..x]
                            .iter()
                            .position(|t| t == target)
                            .expect("duplicate image seen before");
                        return Err(InvarianceError::NotInjective {
                            name: name.clone(),
                            x: points[other].clone(),
                            y: points[x].clone(),
                        });
                    }
                }
            }
        }
        Ok(Self { points, generators })
    }

    pub fn points(&self) -> &[String] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn generators(&self) -> &[(String, Vec<Option<usize>>)] {
        &self.generators
    }

    pub fn generator_index(&self, name: &str) -> Option<usize> {
        self.generators.iter().position(|(n, _)| n == name)
    }

    pub fn point_index(&self, label: &str) -> Option<usize> {
        self.points.iter().position(|p| p == label)
    }

    /// Applies one generator; `None` when undefined there.
    pub fn apply(&self, generator: usize, x: usize) -> Option<usize> {
        self.generators[generator].1[x]
    }

    /// Applies a word of generator indices, rightmost first, failing as soon
    /// as any step is undefined.
    pub fn apply_word(&self, word: &[usize], x: usize) -> Option<usize> {
        word.iter()
            .rev()
            .try_fold(x, |cur, &g| self.apply(g, cur))
    }
}

/// One piece of a decomposition: the points it holds and the mover word
/// (generator indices, applied rightmost first) that transports them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Piece {
    pub points: BTreeSet<usize>,
    pub mover: Vec<usize>,
}

/// A claimed twofold cover of `target` by moved pieces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParadoxCertificate {
    pub target: BTreeSet<usize>,
    pub a_pieces: Vec<Piece>,
    pub b_pieces: Vec<Piece>,
}

/// What verification found: how many applications were undefined and which
/// target points each side failed to cover. `exact` means no undefined
/// application and both defect sets empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParadoxReport {
    pub exact: bool,
    pub undefined_applications: usize,
    pub uncovered_a: BTreeSet<usize>,
    pub uncovered_b: BTreeSet<usize>,
}

/// Checks a certificate: pieces must be subsets of the target and pairwise
/// disjoint across both sides; movers must name valid generators. The report
/// counts undefined applications and lists the target points missed by each
/// side's cover.
pub fn paradox_verify(
    action: &PartialAction,
    cert: &ParadoxCertificate,
) -> Result<ParadoxReport, InvarianceError> {
    for &x in &cert.target {
        if x >= action.len() {
            return Err(InvarianceError::BadPoint(x));
        }
    }
    let mut used = BTreeSet::new();
    for piece in cert.a_pieces.iter().chain(&cert.b_pieces) {
        for &x in &piece.points {
            if !cert.target.contains(&x) {
                return Err(InvarianceError::PieceOutsideTarget(x));
            }
            if !used.insert(x) {
                return Err(InvarianceError::PieceOverlap(x));
            }
        }
        for &g in &piece.mover {
            if g >= action.generators.len() {
                return Err(InvarianceError::BadGenerator(g));
            }
        }
    }
    let mut undefined = 0usize;
    let mut cover = |pieces: &[Piece]| -> BTreeSet<usize> {
        let mut covered = BTreeSet::new();
        for piece in pieces {
            for &x in &piece.points {
                match action.apply_word(&piece.mover, x) {
                    Some(y) => {
                        covered.insert(y);
                    }
                    None => undefined += 1,
                }
            }
        }
        covered
    };
    let covered_a = cover(&cert.a_pieces);
    let covered_b = cover(&cert.b_pieces);
    let uncovered_a: BTreeSet<usize> =
        cert.target.difference(&covered_a).copied().collect();
    let uncovered_b: BTreeSet<usize> =
        cert.target.difference(&covered_b).copied().collect();
    Ok(ParadoxReport {
        exact: undefined == 0 && uncovered_a.is_empty() && uncovered_b.is_empty(),
        undefined_applications: undefined,
        uncovered_a,
        uncovered_b,
    })
}

const LETTERS: [char; 4] = ['a', 'A', 'b', 'B'];

fn letter_inverse(c: char) -> char {
    match c {
        'a' => 'A',
        'A' => 'a',
        'b' => 'B',
        'B' => 'b',
        _ => unreachable!("free group letters only"),
    }
}

fn reduced_words(max_len: usize) -> Vec<String> {
    // By length, then lexicographically in the rank a < A < b < B: a sorted
    // frontier extended on the right by rank stays sorted.
    let mut out = vec![String::new()];
    let mut frontier = vec![String::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &frontier {
            for &l in &LETTERS {
                if w.chars().last() != Some(letter_inverse(l)) {
                    let mut nw = w.clone();
                    nw.push(l);
                    next.push(nw);
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// The radius-`n` ball of the free group on two generators, as a partial
/// action: points are the reduced words of length at most `n` over
/// `a, A, b, B` (`A`, `B` are the inverses), ordered by length and then
/// lexicographically in that alphabet; the empty word is labeled `e`. Each
/// letter acts by left multiplication followed by reduction, defined exactly
/// when the result stays in the ball.
pub fn f2ball(n: usize) -> PartialAction {
    let words = reduced_words(n);
    let index: std::collections::BTreeMap<&str, usize> = words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.as_str(), i))
        .collect();
    let mut generators = Vec::new();
    for &l in &LETTERS {
        let map: Vec<Option<usize>> = words
            .iter()
            .map(|w| {
                let product = if w.chars().next() == Some(letter_inverse(l)) {
                    w[l.len_utf8()..].to_string()
                } else {
                    let mut p = String::with_capacity(w.len() + 1);
                    p.push(l);
                    p.push_str(w);
                    p
                };
                index.get(product.as_str()).copied()
            })
            .collect();
        generators.push((l.to_string(), map));
    }
    let labels = words
        .into_iter()
        .map(|w| if w.is_empty() { "e".to_string() } else { w })
        .collect();
    PartialAction::new(labels, generators).expect("ball construction is valid")
}

/// The prefix decomposition of a free-group ball: side A uses the words
/// starting with `a` (kept in place) and those starting with `A` (moved by
/// `a`); side B does the same with `b` and `B`. In the full group this is an
/// exact twofold cover; on the radius-`n` ball each side misses exactly the
/// length-`n` words it cannot reach, and no application is undefined.
pub fn f2_prefix_certificate(ball: &PartialAction) -> ParadoxCertificate {
    let target: BTreeSet<usize> = (0..ball.len()).collect();
    let starts_with = |prefix: char| -> BTreeSet<usize> {
        ball.points()
            .iter()
            .enumerate()
            .filter(|(_, w)| w.as_str() != "e" && w.starts_with(prefix))
            .map(|(i, _)| i)
            .collect()
    };
    let gen = |name: &str| ball.generator_index(name).expect("ball generator");
    ParadoxCertificate {
        target,
        a_pieces: vec![
            Piece {
                points: starts_with('a'),
                mover: vec![],
            },
            Piece {
                points: starts_with('A'),
                mover: vec![gen("a")],
            },
        ],
        b_pieces: vec![
            Piece {
                points: starts_with('b'),
                mover: vec![],
            },
            Piece {
                points: starts_with('B'),
                mover: vec![gen("b")],
            },
        ],
    }
}

/// A mover candidate: its word and its partial map restricted to the target.
struct Mover {
    word: Vec<usize>,
    /// Position in the target list of the preimage of each target point.
    preimage: Vec<Option<usize>>,
}

fn enumerate_movers(
    action: &PartialAction,
    target: &[usize],
    max_mover_len: usize,
) -> Vec<Mover> {
    let gen_count = action.generators.len();
    let mut movers: Vec<Mover> = Vec::new();
    let mut seen_maps: BTreeSet<Vec<Option<usize>>> = BTreeSet::new();
    let mut frontier: Vec<Vec<usize>> = vec![vec![]];
    for len in 0..=max_mover_len {
        for word in &frontier {
            // Forward map restricted to the target.
            let map: Vec<Option<usize>> = target
                .iter()
                .map(|&x| {
                    action
                        .apply_word(word, x)
                        .filter(|y| target.contains(y))
                })
                .collect();
            if map.iter().all(|v| v.is_none()) && !word.is_empty() {
                continue;
            }
            if !seen_maps.insert(map.clone()) {
                continue;
            }
            let mut preimage = vec![None; target.len()];
            for (xi, image) in map.iter().enumerate() {
                if let Some(y) = image {
                    let yi = target.iter().position(|t| t == y).expect("in target");
                    preimage[yi] = Some(xi);
                }
            }
            movers.push(Mover {
                word: word.clone(),
                preimage,
            });
        }
        if len == max_mover_len {
            break;
        }
        frontier = frontier
            .iter()
            .flat_map(|w| {
                (0..gen_count).map(move |g| {
                    let mut nw = Vec::with_capacity(w.len() + 1);
                    nw.push(g);
                    nw.extend_from_slice(w);
                    nw
                })
            })
            .collect();
    }
    movers
}

struct SearchState<'a> {
    movers: &'a [Mover],
    order: &'a [usize],
    target: &'a [usize],
    max_pieces: usize,
    /// Assignment per slot: slots 0..t are side A targets, t..2t side B.
    choice: Vec<(usize, usize)>,
    used: Vec<bool>,
    budget: Option<u64>,
    token: &'a CancelToken,
}

enum SearchEnd {
    Exhausted,
    Found,
    OutOfBudget,
}

impl<'a> SearchState<'a> {
    fn side_movers(&self, side: usize) -> BTreeSet<usize> {
        let t = self.target.len();
        self.choice[side * t..]
            .iter()
            .take(t)
            .filter(|(m, _)| *m != usize::MAX)
            .map(|(m, _)| *m)
            .collect()
    }

    fn dfs(&mut self, slot: usize) -> Result<SearchEnd, InvarianceError> {
        self.token.check()?;
        if let Some(b) = &mut self.budget {
            if *b == 0 {
                return Ok(SearchEnd::OutOfBudget);
            }
            *b -= 1;
        }
        let t = self.target.len();
        if slot == 2 * t {
            return Ok(SearchEnd::Found);
        }
        let side = slot / t;
        let y = slot % t;
        let side_used = self.side_movers(side);
        for &m in self.order {
            let x = match self.movers[m].preimage[y] {
                Some(x) => x,
                None => continue,
            };
            if self.used[x] {
                continue;
            }
            if !side_used.contains(&m) && side_used.len() == self.max_pieces {
                continue;
            }
            self.used[x] = true;
            self.choice[slot] = (m, x);
            match self.dfs(slot + 1)? {
                SearchEnd::Exhausted => {}
                done => return Ok(done),
            }
            self.used[x] = false;
            self.choice[slot] = (usize::MAX, usize::MAX);
        }
        Ok(SearchEnd::Exhausted)
    }
}

fn run_search(
    action: &PartialAction,
    target: &BTreeSet<usize>,
    max_pieces: usize,
    max_mover_len: usize,
    order_seed: Option<u64>,
    budget: Option<u64>,
    token: &CancelToken,
) -> Result<(Option<ParadoxCertificate>, bool), InvarianceError> {
    for &x in target {
        if x >= action.len() {
            return Err(InvarianceError::BadPoint(x));
        }
    }
    // An empty target admits only vacuous covers, which certify nothing.
    if target.is_empty() || max_pieces == 0 {
        return Ok((None, true));
    }
    let target_vec: Vec<usize> = target.iter().copied().collect();
    let movers = enumerate_movers(action, &target_vec, max_mover_len);
    let mut order: Vec<usize> = (0..movers.len()).collect();
    if let Some(seed) = order_seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
    }
    let t = target_vec.len();
    let mut state = SearchState {
        movers: &movers,
        order: &order,
        target: &target_vec,
        max_pieces,
        choice: vec![(usize::MAX, usize::MAX); 2 * t],
        used: vec![false; t],
        budget,
        token,
    };
    match state.dfs(0)? {
        SearchEnd::Exhausted => Ok((None, true)),
        SearchEnd::OutOfBudget => Ok((None, false)),
        SearchEnd::Found => {
            let mut sides = [Vec::new(), Vec::new()];
            for side in 0..2 {
                let mut by_mover: Vec<(usize, BTreeSet<usize>)> = Vec::new();
                for slot in side * t..(side + 1) * t {
                    let (m, x) = state.choice[slot];
                    let point = target_vec[x];
                    match by_mover.iter_mut().find(|(mm, _)| *mm == m) {
                        Some((_, pts)) => {
                            pts.insert(point);
                        }
                        None => {
                            by_mover.push((m, BTreeSet::from([point])));
                        }
                    }
                }
                sides[side] = by_mover
                    .into_iter()
                    .map(|(m, points)| Piece {
                        points,
                        mover: movers[m].word.clone(),
                    })
                    .collect();
            }
            let [a_pieces, b_pieces] = sides;
            let cert = ParadoxCertificate {
                target: target.clone(),
                a_pieces,
                b_pieces,
            };
            let report = paradox_verify(action, &cert)?;
            assert!(report.exact, "search produced a non-exact certificate");
            Ok((Some(cert), true))
        }
    }
}

/// Exhaustive search for an exact decomposition of `target` using at most
/// `max_pieces` pieces per side and mover words of length at most
/// `max_mover_len`. The target size is capped by `limit` (see
/// [`SEARCH_LIMIT`]). Finding nothing is definitive at these bounds; on
/// finite targets with everywhere-defined movers the counting obstruction
/// means nothing can be found, and the search confirms it.
pub fn paradox_search(
    action: &PartialAction,
    target: &BTreeSet<usize>,
    max_pieces: usize,
    max_mover_len: usize,
    limit: usize,
    token: &CancelToken,
) -> Result<Option<ParadoxCertificate>, InvarianceError> {
    if target.len() > limit {
        return Err(InvarianceError::TargetTooLarge {
            got: target.len(),
            limit,
        });
    }
    let (found, complete) =
        run_search(action, target, max_pieces, max_mover_len, None, None, token)?;
    debug_assert!(complete);
    Ok(found)
}

/// Budgeted randomized variant: mover preference order is shuffled with the
/// seed, and the search stops after `budget` nodes. Returns the certificate
/// (if found) and whether the space was fully explored; `(None, false)`
/// means the budget ran out before exhausting the space.
pub fn paradox_search_heuristic(
    action: &PartialAction,
    target: &BTreeSet<usize>,
    max_pieces: usize,
    max_mover_len: usize,
    seed: u64,
    budget: u64,
    token: &CancelToken,
) -> Result<(Option<ParadoxCertificate>, bool), InvarianceError> {
    run_search(
        action,
        target,
        max_pieces,
        max_mover_len,
        Some(seed),
        Some(budget),
        token,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, Q};

    #[test]
    fn ball_sizes_and_order_match_the_word_census() {
        for n in 0..4 {
            let ball = f2ball(n);
            assert_eq!(ball.len(), 2 * 3usize.pow(n as u32) - 1, "radius {n}");
        }
        let ball = f2ball(2);
        let labels = ball.points();
        assert_eq!(&labels[..5], &["e", "a", "A", "b", "B"]);
        // Length-2 words in rank-lexicographic order by first letter a<A<b<B.
        assert_eq!(&labels[5..9], &["aa", "ab", "aB", "AA"]);
    }

    /// Independent reconstruction of the ball by string rewriting: every
    /// label must be reduced, within length, unique, and ordered by length
    /// then rank.
    #[test]
    fn ball_labels_are_exactly_the_reduced_words() {
        let rank = |c: char| LETTERS.iter().position(|&l| l == c).unwrap();
        let ball = f2ball(3);
        let mut seen = BTreeSet::new();
        let mut prev: Option<&String> = None;
        for w in ball.points() {
            let word = if w == "e" { "" } else { w.as_str() };
            assert!(word.len() <= 3);
            let chars: Vec<char> = word.chars().collect();
            for pair in chars.windows(2) {
                assert_ne!(pair[1], letter_inverse(pair[0]), "unreduced {w}");
            }
            assert!(seen.insert(w.clone()), "duplicate {w}");
            if let Some(p) = prev {
                let pw = if p == "e" { "" } else { p.as_str() };
                let key = |s: &str| (s.len(), s.chars().map(rank).collect::<Vec<_>>());
                assert!(key(pw) < key(word), "{p} !< {w}");
            }
            prev = Some(w);
        }
    }

    #[test]
    fn generators_cancel_and_respect_the_radius() {
        let ball = f2ball(1);
        let a = ball.generator_index("a").unwrap();
        let e = ball.point_index("e").unwrap();
        let pa = ball.point_index("a").unwrap();
        let pia = ball.point_index("A").unwrap();
        let pb = ball.point_index("b").unwrap();
        assert_eq!(ball.apply(a, e), Some(pa));
        assert_eq!(ball.apply(a, pia), Some(e));
        // aa and ab leave the radius-1 ball.
        assert_eq!(ball.apply(a, pa), None);
        assert_eq!(ball.apply(a, pb), None);
    }

    #[test]
    fn prefix_certificate_defects_shrink_relative_to_the_ball() {
        for n in 1..4usize {
            let ball = f2ball(n);
            let cert = f2_prefix_certificate(&ball);
            let report = paradox_verify(&ball, &cert).unwrap();
            assert_eq!(report.undefined_applications, 0, "radius {n}");
            let expected = 3usize.pow(n as u32);
            assert_eq!(report.uncovered_a.len(), expected, "radius {n}");
            assert_eq!(report.uncovered_b.len(), expected, "radius {n}");
            assert!(!report.exact);
            // Relative defect (3^n out of 2*3^n - 1) tends to 1/2 from
            // above; it must strictly decrease with the radius.
            let size = 2 * 3usize.pow(n as u32) - 1;
            let ratio = q(expected as i64, size as i64);
            assert!(ratio > q(1, 2));
            if n > 1 {
                let prev_ratio = q(
                    3i64.pow(n as u32 - 1),
                    2 * 3i64.pow(n as u32 - 1) - 1,
                );
                assert!(ratio < prev_ratio);
            }
        }
    }

    #[test]
    fn verify_rejects_malformed_certificates() {
        let ball = f2ball(1);
        let overlap = ParadoxCertificate {
            target: BTreeSet::from([0, 1]),
            a_pieces: vec![Piece {
                points: BTreeSet::from([0]),
                mover: vec![],
            }],
            b_pieces: vec![Piece {
                points: BTreeSet::from([0]),
                mover: vec![],
            }],
        };
        assert_eq!(
            paradox_verify(&ball, &overlap).unwrap_err(),
            InvarianceError::PieceOverlap(0)
        );
        let outside = ParadoxCertificate {
            target: BTreeSet::from([0]),
            a_pieces: vec![Piece {
                points: BTreeSet::from([2]),
                mover: vec![],
            }],
            b_pieces: vec![],
        };
        assert_eq!(
            paradox_verify(&ball, &outside).unwrap_err(),
            InvarianceError::PieceOutsideTarget(2)
        );
    }

    #[test]
    fn search_finds_nothing_on_total_injective_actions() {
        // The identity on three points, as a total injective partial action.
        let pa = PartialAction::new(
            vec!["x0".into(), "x1".into(), "x2".into()],
            vec![("id".into(), vec![Some(0), Some(1), Some(2)])],
        )
        .unwrap();
        let target: BTreeSet<usize> = (0..3).collect();
        let token = CancelToken::new();
        let found = paradox_search(&pa, &target, 3, 2, SEARCH_LIMIT, &token).unwrap();
        assert!(found.is_none());
    }

    #[test]
    fn search_respects_limits_and_empty_targets() {
        let ball = f2ball(1);
        let token = CancelToken::new();
        let empty = paradox_search(&ball, &BTreeSet::new(), 2, 1, SEARCH_LIMIT, &token).unwrap();
        assert!(empty.is_none());
        let big: BTreeSet<usize> = (0..5).collect();
        assert!(matches!(
            paradox_search(&ball, &big, 2, 1, 3, &token).unwrap_err(),
            InvarianceError::TargetTooLarge { got: 5, limit: 3 }
        ));
    }

    #[test]
    fn search_on_the_small_ball_is_exhaustive_and_empty() {
        let ball = f2ball(1);
        let target: BTreeSet<usize> = (0..ball.len()).collect();
        let token = CancelToken::new();
        let found = paradox_search(&ball, &target, 2, 1, SEARCH_LIMIT, &token).unwrap();
        // The counting obstruction: pieces disjoint in E cannot cover E twice.
        assert!(found.is_none());
    }

    #[test]
    fn heuristic_search_reports_budget_exhaustion() {
        let ball = f2ball(1);
        let target: BTreeSet<usize> = (0..ball.len()).collect();
        let token = CancelToken::new();
        let (found, complete) =
            paradox_search_heuristic(&ball, &target, 2, 1, 7, 10, &token).unwrap();
        assert!(found.is_none());
        assert!(!complete, "ten nodes cannot exhaust this space");
        let (found2, complete2) =
            paradox_search_heuristic(&ball, &target, 2, 1, 7, u64::MAX, &token).unwrap();
        assert!(found2.is_none());
        assert!(complete2);
    }

    #[test]
    fn counting_argument_bounds_piece_mass() {
        // For any collection of pairwise disjoint pieces inside a finite E,
        // the two covers demand sum >= 2|E| while disjointness allows at
        // most |E|; verify the arithmetic once on the radius-2 ball pieces.
        let ball = f2ball(2);
        let cert = f2_prefix_certificate(&ball);
        let total: usize = cert
            .a_pieces
            .iter()
            .chain(&cert.b_pieces)
            .map(|p| p.points.len())
            .sum();
        assert!(total <= cert.target.len());
        let needed = 2 * cert.target.len();
        assert!(Q::from_integer((total as i64).into()) < q(needed as i64, 1));
    }
}
