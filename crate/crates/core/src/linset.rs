//! Rank 3, 4 and 5 linear sets of internal points through x.
//!
//! Rank-3 sets come from pairs of sublines through x: two sublines on
//! distinct lines span a subplane, two on a common line span a set inside
//! that line, and in both cases internality of the span reduces to the same
//! finite list of extra combinations.  Higher rank is a clique problem: fix
//! a first subline ℓ, collect every subline m that forms an internal rank-3
//! set with it, join two of them when they do the same with each other, and
//! read rank-r sets off cliques of the right size.  Equivalence between
//! results is decided by a canonical form under the conic stabilizer,
//! optionally extended by the q-power Frobenius collineation.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;

use crate::conic::{
    add3, apply, compose, cross3, det3, scale, ConicFrame, GroupElement, ProjPoint, Vec3,
};
use crate::error::{Error, Result};
use crate::field::{FieldElement, FieldTower};
use crate::subline::{
    first_ratio, span_points, sublines_through_x, HostLine, LineScan, SublineWitness,
};

/// An F_q-linear set of rank 3, 4 or 5, stored with generating vectors and
/// the sorted indices of its points.  Search results keep x as the first
/// generator; sets built from other data (a semifield pair, a subspace of a
/// larger set) need not contain x at all.
#[derive(Clone, Debug)]
pub struct LinearSet {
    pub rank: usize,
    pub generators: Vec<Vec3>,
    /// Sorted indices of { normalize(Σ λ_i g_i) : λ ∈ F_q^rank, λ ≠ 0 }.
    pub points: Vec<u64>,
    /// 1 when the whole set lies on a line of PG(2, q^n), else 2.
    pub host_dimension: u8,
}

impl LinearSet {
    pub fn from_generators(frame: &ConicFrame, generators: Vec<Vec3>) -> Result<LinearSet> {
        let t = &frame.tower;
        let rank = generators.len();
        let combos = (t.q as u128).pow(rank as u32);
        if combos > 1 << 20 {
            return Err(Error::SizeGuard(format!(
                "linear set span has q^rank = {combos} combinations"
            )));
        }
        let mut points: Vec<u64> = span_vectors(t, &generators)
            .into_iter()
            .map(|v| frame.point_index(&ProjPoint::new(t, v)))
            .collect();
        points.sort_unstable();
        points.dedup();
        let host_dimension = host_dimension_of(frame, &points);
        Ok(LinearSet {
            rank,
            generators,
            points,
            host_dimension,
        })
    }

    pub fn contains(&self, point: u64) -> bool {
        self.points.binary_search(&point).is_ok()
    }

    pub fn is_fully_internal(&self, frame: &ConicFrame) -> bool {
        self.points
            .iter()
            .all(|&i| frame.is_internal(frame.point_of_index(i).coords()))
    }
}

/// All nonzero F_q-combinations of the generators, as vectors.
pub fn span_vectors(t: &FieldTower, gens: &[Vec3]) -> Vec<Vec3> {
    let lams = t.subfield_elements();
    let mut out = Vec::new();
    span_rec(t, gens, &lams, 0, [FieldElement::ZERO; 3], &mut out);
    out
}

fn span_rec(
    t: &FieldTower,
    gens: &[Vec3],
    lams: &[FieldElement],
    i: usize,
    acc: Vec3,
    out: &mut Vec<Vec3>,
) {
    if i == gens.len() {
        if acc.iter().any(|c| !c.is_zero()) {
            out.push(acc);
        }
        return;
    }
    for &lam in lams {
        span_rec(t, gens, lams, i + 1, add3(t, acc, scale(t, lam, gens[i])), out);
    }
}

fn host_dimension_of(frame: &ConicFrame, points: &[u64]) -> u8 {
    if points.len() < 2 {
        return 1;
    }
    let t = &frame.tower;
    let p0 = frame.point_of_index(points[0]).coords();
    let p1 = frame.point_of_index(points[1]).coords();
    let line = cross3(t, p0, p1);
    let on_line = points
        .iter()
        .all(|&i| crate::conic::dot3(t, line, frame.point_of_index(i).coords()).is_zero());
    if on_line {
        1
    } else {
        2
    }
}

/// Whether g lies outside the F_q-span of the base vectors (as vectors, not
/// projectively).  Only for small spans.
pub fn fq_independent(frame: &ConicFrame, base: &[Vec3], g: Vec3) -> bool {
    let t = &frame.tower;
    let gk = [g[0].key(), g[1].key(), g[2].key()];
    !span_vectors(t, base)
        .iter()
        .any(|v| [v[0].key(), v[1].key(), v[2].key()] == gk)
}

/// The pair test: λ·g1 + g2 for λ ∈ F_q* and x + λ1·g1 + λ2·g2 for λ1, λ2
/// ∈ F_q* must all be internal.  Together with the points of the two
/// sublines ⟨x, g1⟩ and ⟨x, g2⟩ these cover every point of ⟨x, g1, g2⟩_q,
/// so a passing pair spans a fully internal rank-3 set.
pub fn compatible(frame: &ConicFrame, g1: Vec3, g2: Vec3) -> bool {
    let t = &frame.tower;
    let star = t.subfield_star();
    for &lam in &star {
        if !frame.is_internal(add3(t, scale(t, lam, g1), g2)) {
            return false;
        }
    }
    for &l1 in &star {
        let base = add3(t, frame.x, scale(t, l1, g1));
        for &l2 in &star {
            if !frame.is_internal(add3(t, base, scale(t, l2, g2))) {
                return false;
            }
        }
    }
    true
}

/// ⟨x, g1, g2⟩_q when fully internal, None otherwise.  Callers guarantee
/// that both sublines through x are internal and that g2 is F_q-independent
/// of {x, g1}.
pub fn rank3_from_pair(frame: &ConicFrame, g1: Vec3, g2: Vec3) -> Result<Option<LinearSet>> {
    if !compatible(frame, g1, g2) {
        return Ok(None);
    }
    let set = LinearSet::from_generators(frame, vec![frame.x, g1, g2])?;
    debug_assert!(set.is_fully_internal(frame));
    Ok(Some(set))
}

/// The subplane spanned by two sublines through x on distinct lines, when it
/// is fully internal.  The stored second generators already absorb the
/// scalars aligning each subline with the span, so the test runs on them
/// directly.  Same-line pairs are rejected; those belong to the
/// line-contained handling.
pub fn pair_subplane(
    frame: &ConicFrame,
    l1: &SublineWitness,
    l2: &SublineWitness,
) -> Result<Option<LinearSet>> {
    let t = &frame.tower;
    if det3(t, [frame.x, l1.gen2, l2.gen2]).is_zero() {
        return Err(Error::SearchInvariant(
            "subline pair spans a single line, not a subplane candidate".into(),
        ));
    }
    let out = rank3_from_pair(frame, l1.gen2, l2.gen2)?;
    if let Some(s) = &out {
        debug_assert!(l1.points.iter().all(|p| s.contains(*p)));
        debug_assert!(l2.points.iter().all(|p| s.contains(*p)));
        debug_assert_eq!(s.host_dimension, 2);
    }
    Ok(out)
}

/// The rank-3 set spanned by two sublines through x on a common line, when
/// the second generator is independent and the span is fully internal.
pub fn line_contained_rank3(
    frame: &ConicFrame,
    l1: &SublineWitness,
    l2: &SublineWitness,
) -> Result<Option<LinearSet>> {
    let t = &frame.tower;
    if !det3(t, [frame.x, l1.gen2, l2.gen2]).is_zero() {
        return Err(Error::SearchInvariant(
            "subline pair spans a plane, not a line-contained candidate".into(),
        ));
    }
    if !fq_independent(frame, &[frame.x, l1.gen2], l2.gen2) {
        return Ok(None);
    }
    let out = rank3_from_pair(frame, l1.gen2, l2.gen2)?;
    if let Some(s) = &out {
        debug_assert_eq!(s.host_dimension, 1);
    }
    Ok(out)
}

/// Every subline through x contained in I(C), over all lines through x.
pub fn full_inventory(frame: &ConicFrame) -> Result<Vec<SublineWitness>> {
    let mut inv = sublines_through_x(frame, HostLine::External)?;
    inv.extend(sublines_through_x(frame, HostLine::Secant)?);
    inv.sort_by(|a, b| a.points.cmp(&b.points));
    Ok(inv)
}

/// One representative index per orbit of the inventory under the stabilizer
/// of x.  The clique search only needs one graph per orbit; stabilizer
/// images of its results recover everything else.
pub fn subline_orbit_representatives(
    frame: &ConicFrame,
    inventory: &[SublineWitness],
) -> Vec<usize> {
    let t = &frame.tower;
    let index_of: HashMap<&[u64], usize> = inventory
        .iter()
        .enumerate()
        .map(|(i, w)| (w.points.as_slice(), i))
        .collect();
    let mut visited = vec![false; inventory.len()];
    let mut reps = Vec::new();
    for i in 0..inventory.len() {
        if visited[i] {
            continue;
        }
        reps.push(i);
        for g in frame.stabilizer_of_x() {
            let gx = apply(t, g, frame.x);
            let kappa_inv = t.inv(first_ratio(t, gx, frame.x));
            let gen2 = scale(t, kappa_inv, apply(t, g, inventory[i].gen2));
            let pts = span_points(frame, frame.x, gen2);
            let j = *index_of
                .get(pts.as_slice())
                .expect("stabilizer image of an inventory subline must be in the inventory");
            visited[j] = true;
        }
    }
    reps
}

/// The vertex list Π_ℓ: one rank-3 set per inventory subline m that spans a
/// fully internal rank-3 set with ℓ, stored as the ordered pair (ℓ, m) in
/// the generators.
pub fn vertex_sets(
    frame: &ConicFrame,
    ell: &SublineWitness,
    inventory: &[SublineWitness],
) -> Result<Vec<LinearSet>> {
    let picked: Vec<&SublineWitness> = inventory
        .par_iter()
        .filter(|m| {
            m.points != ell.points
                && fq_independent(frame, &[frame.x, ell.gen2], m.gen2)
                && compatible(frame, ell.gen2, m.gen2)
        })
        .collect();
    picked
        .into_iter()
        .map(|m| LinearSet::from_generators(frame, vec![frame.x, ell.gen2, m.gen2]))
        .collect()
}

/// Γ_ℓ: the vertices of Π_ℓ with the adjacency bitmatrix.  Two vertices are
/// adjacent when their second generating lines together generate a rank-3
/// set contained in I(C).
pub struct CompatibilityGraph {
    pub vertices: Vec<LinearSet>,
    words: usize,
    rows: Vec<u64>,
}

impl CompatibilityGraph {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.rows[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    /// All cliques of exactly `size` vertices, as sorted index lists.
    pub fn cliques_of_size(&self, size: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        cliques_exact(self.len(), self.words, &self.rows, size, &mut out);
        out
    }
}

pub fn build_graph(
    frame: &ConicFrame,
    ell: &SublineWitness,
    pi: Vec<LinearSet>,
) -> Result<CompatibilityGraph> {
    for v in &pi {
        if v.rank != 3
            || v.generators[0] != frame.x
            || fq_independent(frame, &[frame.x, ell.gen2], v.generators[1])
        {
            return Err(Error::SearchInvariant(
                "graph vertex does not have first generating line ℓ".into(),
            ));
        }
    }
    let n = pi.len();
    let words = n.div_ceil(64);
    let rows: Vec<u64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut row = vec![0u64; words];
            let gi = pi[i].generators[2];
            for (j, v) in pi.iter().enumerate() {
                let gj = v.generators[2];
                if j != i
                    && fq_independent(frame, &[frame.x, gi], gj)
                    && compatible(frame, gi, gj)
                {
                    row[j / 64] |= 1 << (j % 64);
                }
            }
            row
        })
        .collect();
    Ok(CompatibilityGraph {
        vertices: pi,
        words,
        rows,
    })
}

/// All cliques of exactly `size` vertices, as sorted index lists.  Vertices
/// are peeled in degeneracy order so candidate sets stay small; exact-size
/// cliques need not be maximal, so there is no pivoting.
fn cliques_exact(n: usize, words: usize, rows: &[u64], size: usize, out: &mut Vec<Vec<usize>>) {
    if size == 0 || n == 0 {
        return;
    }
    let order = degeneracy_order(n, words, rows);
    let mut pos = vec![0usize; n];
    for (k, &v) in order.iter().enumerate() {
        pos[v] = k;
    }
    // re-index adjacency by peel position
    let mut perm = vec![0u64; n * words];
    for i in 0..n {
        for j in 0..n {
            if rows[i * words + j / 64] >> (j % 64) & 1 == 1 {
                perm[pos[i] * words + pos[j] / 64] |= 1 << (pos[j] % 64);
            }
        }
    }
    let mut stack = Vec::with_capacity(size);
    for v in 0..n {
        // candidates strictly after v in the order
        let mut cand = vec![0u64; words];
        for w in 0..words {
            cand[w] = perm[v * words + w];
        }
        mask_below(&mut cand, v + 1);
        stack.push(v);
        extend_cliques(&perm, words, size, &mut stack, cand, out);
        stack.pop();
    }
    for clique in out.iter_mut() {
        for v in clique.iter_mut() {
            *v = order[*v];
        }
        clique.sort_unstable();
    }
}

fn extend_cliques(
    perm: &[u64],
    words: usize,
    size: usize,
    stack: &mut Vec<usize>,
    cand: Vec<u64>,
    out: &mut Vec<Vec<usize>>,
) {
    if stack.len() == size {
        out.push(stack.clone());
        return;
    }
    let remaining: u32 = cand.iter().map(|w| w.count_ones()).sum();
    if stack.len() + (remaining as usize) < size {
        return;
    }
    for u in bits(&cand) {
        let mut next = vec![0u64; words];
        for w in 0..words {
            next[w] = cand[w] & perm[u * words + w];
        }
        mask_below(&mut next, u + 1);
        stack.push(u);
        extend_cliques(perm, words, size, stack, next, out);
        stack.pop();
    }
}

fn mask_below(bits: &mut [u64], from: usize) {
    for (w, word) in bits.iter_mut().enumerate() {
        if (w + 1) * 64 <= from {
            *word = 0;
        } else if w * 64 < from {
            *word &= !0u64 << (from - w * 64);
        }
    }
}

fn bits(words: &[u64]) -> impl Iterator<Item = usize> + '_ {
    words.iter().enumerate().flat_map(|(w, &word)| {
        let mut rest = word;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(w * 64 + b)
            }
        })
    })
}

fn degeneracy_order(n: usize, words: usize, rows: &[u64]) -> Vec<usize> {
    let mut degree: Vec<u32> = (0..n)
        .map(|i| rows[i * words..(i + 1) * words].iter().map(|w| w.count_ones()).sum())
        .collect();
    let mut removed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let v = (0..n)
            .filter(|&i| !removed[i])
            .min_by_key(|&i| degree[i])
            .unwrap();
        removed[v] = true;
        order.push(v);
        for u in bits(&rows[v * words..(v + 1) * words]) {
            if !removed[u] {
                degree[u] -= 1;
            }
        }
    }
    order
}

/// Outcome of a rank-4 or rank-5 clique search.
pub struct RankSearch {
    /// Every distinct set through x, after stabilizer closure.
    pub sets: Vec<LinearSet>,
    /// Distinct sets materialized from cliques before closure.
    pub direct: usize,
    /// Cliques inspected; several can yield the same set.
    pub cliques: usize,
    /// Cliques whose span exceeded the target rank (possible in principle,
    /// since pairwise compatibility does not bound the joint span).
    pub spurious: usize,
}

pub fn find_rank4(frame: &ConicFrame) -> Result<RankSearch> {
    find_rank_sets(frame, 4)
}

pub fn find_rank5(frame: &ConicFrame) -> Result<RankSearch> {
    find_rank_sets(frame, 5)
}

fn find_rank_sets(frame: &ConicFrame, rank: usize) -> Result<RankSearch> {
    let t = &frame.tower;
    let q = t.q;
    // a rank-r set through x holds (q^{r-1} - 1)/(q - 1) sublines through x;
    // the clique is all of them except ℓ itself
    let clique_size = ((q.pow(rank as u32 - 1) - 1) / (q - 1) - 1) as usize;
    let inventory = full_inventory(frame)?;
    let reps = subline_orbit_representatives(frame, &inventory);
    let mut found: BTreeMap<Vec<u64>, LinearSet> = BTreeMap::new();
    let mut cliques = 0usize;
    let mut spurious = 0usize;
    for &r in &reps {
        let ell = &inventory[r];
        let pi = vertex_sets(frame, ell, &inventory)?;
        if pi.len() < clique_size {
            continue;
        }
        let graph = build_graph(frame, ell, pi)?;
        for clique in graph.cliques_of_size(clique_size) {
            cliques += 1;
            match clique_set(frame, ell, &graph.vertices, &clique, rank)? {
                Some(s) => {
                    found.entry(s.points.clone()).or_insert(s);
                }
                None => spurious += 1,
            }
        }
    }
    let direct = found.len();
    let sets = stabilizer_closure(frame, found.into_values().collect());
    Ok(RankSearch {
        sets,
        direct,
        cliques,
        spurious,
    })
}

/// Materialize the rank-r set behind a clique: greedy basis extraction over
/// ℓ and the clique's second generators, None when the joint span misses the
/// target rank.  A span of the right rank failing internality is an
/// adjacency bug and errors out.
pub fn clique_set(
    frame: &ConicFrame,
    ell: &SublineWitness,
    vertices: &[LinearSet],
    clique: &[usize],
    rank: usize,
) -> Result<Option<LinearSet>> {
    let mut basis = vec![frame.x, ell.gen2];
    for &i in clique {
        let g = vertices[i].generators[2];
        if fq_independent(frame, &basis, g) {
            basis.push(g);
            if basis.len() > rank {
                return Ok(None);
            }
        }
    }
    if basis.len() < rank {
        return Ok(None);
    }
    let set = LinearSet::from_generators(frame, basis)?;
    if !set.is_fully_internal(frame) {
        // every point lies on ℓ or on a clique subline, so this can only
        // fire if the adjacency rule let a bad pair through
        return Err(Error::SearchInvariant(
            "materialized clique set leaves I(C); adjacency rule violated".into(),
        ));
    }
    debug_assert!(clique
        .iter()
        .all(|&i| vertices[i].points.iter().all(|p| set.contains(*p))));
    Ok(Some(set))
}

/// All images of the given sets under the stabilizer of x, deduplicated by
/// point set.  Generators are rescaled so the first stays exactly x.
pub fn stabilizer_closure(frame: &ConicFrame, sets: Vec<LinearSet>) -> Vec<LinearSet> {
    let t = &frame.tower;
    let mut out: BTreeMap<Vec<u64>, LinearSet> = BTreeMap::new();
    for s in sets {
        for g in frame.stabilizer_of_x() {
            let gx = apply(t, g, frame.x);
            let kappa_inv = t.inv(first_ratio(t, gx, frame.x));
            let generators: Vec<Vec3> = s
                .generators
                .iter()
                .map(|&v| scale(t, kappa_inv, apply(t, g, v)))
                .collect();
            debug_assert_eq!(generators[0], frame.x);
            let mut points: Vec<u64> = s
                .points
                .iter()
                .map(|&i| {
                    let v = frame.point_of_index(i).coords();
                    frame.point_index(&ProjPoint::new(t, apply(t, g, v)))
                })
                .collect();
            points.sort_unstable();
            out.entry(points.clone()).or_insert(LinearSet {
                rank: s.rank,
                generators,
                points,
                host_dimension: s.host_dimension,
            });
        }
    }
    out.into_values().collect()
}

/// All rank-3 linear sets through x contained in I(C): subplanes from pairs
/// of sublines on distinct lines, line-contained sets from same-line pairs.
pub fn enumerate_rank3(frame: &ConicFrame) -> Result<Vec<LinearSet>> {
    let inventory = full_inventory(frame)?;
    if inventory.len() > 20_000 {
        return Err(Error::SizeGuard(format!(
            "rank-3 enumeration over {} sublines is too large; use the streaming existence scan",
            inventory.len()
        )));
    }
    let t = &frame.tower;
    let chunks: Vec<Vec<LinearSet>> = (0..inventory.len())
        .into_par_iter()
        .map(|i| {
            let mut local = Vec::new();
            for j in i + 1..inventory.len() {
                let (a, b) = (&inventory[i], &inventory[j]);
                let set = if det3(t, [frame.x, a.gen2, b.gen2]).is_zero() {
                    line_contained_rank3(frame, a, b)
                } else {
                    pair_subplane(frame, a, b)
                };
                if let Some(s) = set.expect("pair routing matches the span test") {
                    local.push(s);
                }
            }
            local
        })
        .collect();
    let mut dedup: BTreeMap<Vec<u64>, LinearSet> = BTreeMap::new();
    for s in chunks.into_iter().flatten() {
        dedup.entry(s.points.clone()).or_insert(s);
    }
    Ok(dedup.into_values().collect())
}

/// One stabilizer element per line through x of the host's kind, keyed by
/// the image line.
pub(crate) fn line_transversal(frame: &ConicFrame, host: HostLine) -> Vec<GroupElement> {
    let t = &frame.tower;
    let dir = host.dir(frame);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for g in frame.stabilizer_of_x() {
        let image_dir = apply(t, g, dir);
        let key = ProjPoint::new(t, cross3(t, frame.x, image_dir));
        if seen.insert(key) {
            out.push(*g);
        }
    }
    debug_assert_eq!(out.len() as u64, (t.size + 1) / 2);
    out
}

/// Streaming subplane existence scan, usable at field sizes where the full
/// inventory does not fit.  The first subline runs over the distinct
/// sublines of the reference external line: any internal subplane has a
/// conjugate through x containing a fully internal subline on an external
/// line (the subline such a subplane must carry survives transport), and
/// the stabilizer of x moves that line onto the reference one.  The second
/// subline streams over stabilizer images of the canonical witnesses of
/// both line kinds.
pub fn subplane_exists(
    frame: &ConicFrame,
) -> Result<Option<(SublineWitness, SublineWitness)>> {
    let t = &frame.tower;
    let firsts = distinct_line_sublines(frame, HostLine::External);
    if firsts.is_empty() {
        return Ok(None);
    }
    let ell_e_key = ProjPoint::new(t, cross3(t, frame.x, HostLine::External.dir(frame)));
    for host in [HostLine::External, HostLine::Secant] {
        let canon = distinct_line_sublines(frame, host);
        if canon.is_empty() {
            continue;
        }
        let trans = line_transversal(frame, host);
        let hit = trans.par_iter().find_map_any(|g| {
            let image_dir = apply(t, g, host.dir(frame));
            if host == HostLine::External
                && ProjPoint::new(t, cross3(t, frame.x, image_dir)) == ell_e_key
            {
                // same line as every first subline; no subplane from those
                return None;
            }
            let gx = apply(t, g, frame.x);
            let kappa_inv = t.inv(first_ratio(t, gx, frame.x));
            for w in &canon {
                let m = scale(t, kappa_inv, apply(t, g, w.gen2));
                for l in &firsts {
                    if compatible(frame, l.gen2, m) {
                        let witness = SublineWitness {
                            b: w.b,
                            mu: w.mu,
                            host,
                            gen2: m,
                            points: span_points(frame, frame.x, m),
                        };
                        return Some((l.clone(), witness));
                    }
                }
            }
            None
        });
        if let Some((l, m)) = hit {
            let check = pair_subplane(frame, &l, &m)?;
            if check.is_none() {
                return Err(Error::SearchInvariant(
                    "streamed subplane witness failed the pair test on replay".into(),
                ));
            }
            return Ok(Some((l, m)));
        }
    }
    Ok(None)
}

/// The distinct fully internal sublines through x on the reference line of
/// the given kind.
pub fn distinct_line_sublines(frame: &ConicFrame, host: HostLine) -> Vec<SublineWitness> {
    let scan = LineScan::new(frame, host);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (b, mu) in scan.enumerate_pairs() {
        let w = scan.materialize(b, mu);
        if seen.insert(w.points.clone()) {
            out.push(w);
        }
    }
    out
}

/// Equivalence witness: apply the q-power Frobenius j times, then the group
/// element; the sorted images are the canonical point set.
#[derive(Clone, Debug)]
pub struct EquivWitness {
    pub frobenius: u32,
    pub map: GroupElement,
}

#[derive(Clone, Debug)]
pub struct EquivClass {
    pub canonical: Vec<u64>,
    /// Indices into the classified input list.
    pub members: Vec<usize>,
    /// One witness per member, mapping it onto the canonical points.
    pub witnesses: Vec<EquivWitness>,
}

/// Canonical form of an internal point set under the conic stabilizer,
/// extended by the q-power Frobenius collineation when `semilinear` is set.
/// Minimizes the sorted image ids over Frobenius power, transported point
/// and stabilizer element; two sets are equivalent exactly when their
/// canonical forms agree.
pub fn canonical_form(
    frame: &ConicFrame,
    points: &[u64],
    semilinear: bool,
) -> Result<(Vec<u64>, EquivWitness)> {
    let t = &frame.tower;
    if points.is_empty() {
        return Err(Error::SearchInvariant(
            "canonical form of an empty point set".into(),
        ));
    }
    let vecs: Vec<Vec3> = points
        .iter()
        .map(|&i| frame.point_of_index(i).coords())
        .collect();
    let jmax = if semilinear { t.n } else { 1 };
    let mut best: Option<(Vec<u64>, EquivWitness)> = None;
    for j in 0..jmax {
        let fro: Vec<Vec3> = vecs
            .iter()
            .map(|&v| frame.frobenius_point(v, j * t.e))
            .collect();
        for y in &fro {
            let h = frame.transporter_to_x(*y)?;
            let moved: Vec<Vec3> = fro.iter().map(|&v| apply(t, &h, v)).collect();
            for k in frame.stabilizer_of_x() {
                let mut ids: Vec<u64> = moved
                    .iter()
                    .map(|&v| frame.point_index(&ProjPoint::new(t, apply(t, k, v))))
                    .collect();
                ids.sort_unstable();
                let better = match &best {
                    None => true,
                    Some((cur, _)) => ids < *cur,
                };
                if better {
                    best = Some((
                        ids,
                        EquivWitness {
                            frobenius: j,
                            map: compose(t, &h, k),
                        },
                    ));
                }
            }
        }
    }
    Ok(best.unwrap())
}

/// Re-apply a stored witness and check it lands on the canonical points.
pub fn verify_equivalence_witness(
    frame: &ConicFrame,
    points: &[u64],
    witness: &EquivWitness,
    canonical: &[u64],
) -> Result<()> {
    let t = &frame.tower;
    let mut ids: Vec<u64> = points
        .iter()
        .map(|&i| {
            let v = frame.point_of_index(i).coords();
            let f = frame.frobenius_point(v, witness.frobenius * t.e);
            frame.point_index(&ProjPoint::new(t, apply(t, &witness.map, f)))
        })
        .collect();
    ids.sort_unstable();
    if ids != canonical {
        return Err(Error::BadWitness(
            "equivalence witness does not map the set onto its canonical form".into(),
        ));
    }
    Ok(())
}

/// Group the sets by canonical form.  Witnesses are re-verified before the
/// classes are assembled; classes come out sorted by canonical point set.
pub fn classify_up_to_equivalence(
    frame: &ConicFrame,
    sets: &[LinearSet],
    semilinear: bool,
) -> Result<Vec<EquivClass>> {
    let canons: Vec<(Vec<u64>, EquivWitness)> = sets
        .par_iter()
        .map(|s| canonical_form(frame, &s.points, semilinear))
        .collect::<Result<_>>()?;
    let mut registry: BTreeMap<Vec<u64>, EquivClass> = BTreeMap::new();
    for (i, (canonical, witness)) in canons.into_iter().enumerate() {
        verify_equivalence_witness(frame, &sets[i].points, &witness, &canonical)?;
        let class = registry
            .entry(canonical.clone())
            .or_insert_with(|| EquivClass {
                canonical,
                members: Vec::new(),
                witnesses: Vec::new(),
            });
        class.members.push(i);
        class.witnesses.push(witness);
    }
    Ok(registry.into_values().collect())
}

/// The rank-3 F_q-subspaces of a higher-rank set, one per hyperplane of its
/// coefficient space.
pub fn rank3_subspaces(frame: &ConicFrame, set: &LinearSet) -> Result<Vec<LinearSet>> {
    let t = &frame.tower;
    let r = set.rank;
    if r < 4 {
        return Err(Error::SearchInvariant(
            "rank-3 subspace enumeration needs rank at least 4".into(),
        ));
    }
    let lams = t.subfield_elements();
    let one = t.one();
    let mut out = Vec::new();
    let mut covector = vec![FieldElement::ZERO; r];
    loop {
        // advance the odometer
        let mut i = 0;
        loop {
            if i == r {
                return Ok(out);
            }
            let pos = lams.iter().position(|&l| l == covector[i]).unwrap();
            if pos + 1 < lams.len() {
                covector[i] = lams[pos + 1];
                break;
            }
            covector[i] = lams[0];
            i += 1;
        }
        let pivot = match covector.iter().position(|c| !c.is_zero()) {
            Some(p) => p,
            None => continue,
        };
        if covector[pivot] != one {
            // one representative per projective covector
            continue;
        }
        let mut basis = Vec::with_capacity(r - 1);
        for j in 0..r {
            if j == pivot {
                continue;
            }
            let correction = scale(t, t.neg(covector[j]), set.generators[pivot]);
            basis.push(add3(t, set.generators[j], correction));
        }
        out.push(LinearSet::from_generators(frame, basis)?);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::PointClass;
    use crate::field::FieldTower;

    fn frame(p: u64, e: u32, n: u32) -> ConicFrame {
        ConicFrame::new(FieldTower::new(p, e, n, None).unwrap()).unwrap()
    }

    #[test]
    fn span_membership_and_size() {
        let f = frame(3, 1, 2);
        let t = &f.tower;
        let a = t.alpha();
        let gens = vec![f.x, [t.one(), a, t.one()]];
        let set = LinearSet::from_generators(&f, gens.clone()).unwrap();
        assert!(set.points.len() as u64 <= t.q + 1);
        // every combination lands in the stored points
        for v in span_vectors(t, &gens) {
            assert!(set.contains(f.point_index(&ProjPoint::new(t, v))));
        }
    }

    #[test]
    fn rank3_size_bound_and_internality() {
        let f = frame(3, 1, 3);
        let q = f.tower.q;
        let sets = enumerate_rank3(&f).unwrap();
        for s in &sets {
            assert!(s.points.len() as u64 <= q * q + q + 1);
            assert!(s.is_fully_internal(&f));
            assert!(s.host_dimension == 1 || s.host_dimension == 2);
        }
        // the list is closed under the stabilizer of x
        let closed = stabilizer_closure(&f, sets.clone());
        assert_eq!(closed.len(), sets.len());
    }

    #[test]
    fn no_rank3_at_n2() {
        // one subline per secant line and no external ones leaves no pairs
        let f = frame(3, 1, 2);
        assert!(enumerate_rank3(&f).unwrap().is_empty());
        assert!(subplane_exists(&f).unwrap().is_none());
    }

    #[test]
    fn same_span_pair_is_rejected() {
        let f = frame(3, 1, 3);
        let firsts = distinct_line_sublines(&f, HostLine::External);
        assert!(firsts.len() >= 2);
        assert!(matches!(
            pair_subplane(&f, &firsts[0], &firsts[1]),
            Err(Error::SearchInvariant(_))
        ));
        assert!(matches!(
            line_contained_rank3(&f, &firsts[0], &firsts[0]),
            Ok(None)
        ));
    }

    #[test]
    fn streaming_scan_matches_enumeration() {
        for (p, e, n) in [(3u64, 1u32, 2u32), (3, 1, 3), (5, 1, 2)] {
            let f = frame(p, e, n);
            let direct = enumerate_rank3(&f)
                .unwrap()
                .iter()
                .any(|s| s.host_dimension == 2);
            assert_eq!(subplane_exists(&f).unwrap().is_some(), direct);
        }
    }

    #[test]
    fn orbit_representatives_cover_inventory() {
        let f = frame(3, 1, 3);
        let inv = full_inventory(&f).unwrap();
        let reps = subline_orbit_representatives(&f, &inv);
        assert!(!reps.is_empty());
        // expanding the representatives regenerates the whole inventory
        let t = &f.tower;
        let mut covered = HashSet::new();
        for &r in &reps {
            for g in f.stabilizer_of_x() {
                let gx = apply(t, g, f.x);
                let kappa_inv = t.inv(first_ratio(t, gx, f.x));
                let gen2 = scale(t, kappa_inv, apply(t, g, inv[r].gen2));
                covered.insert(span_points(&f, f.x, gen2));
            }
        }
        assert_eq!(covered.len(), inv.len());
    }

    #[test]
    fn exact_cliques_on_a_known_graph() {
        // K5 minus one edge: the 4-cliques are the two 4-subsets avoiding
        // the missing edge, and there is no 5-clique
        let n = 5;
        let words = 1;
        let mut rows = vec![0u64; n];
        for i in 0..n {
            for j in 0..n {
                if i != j && !(i == 0 && j == 1) && !(i == 1 && j == 0) {
                    rows[i] |= 1 << j;
                }
            }
        }
        let mut got = Vec::new();
        cliques_exact(n, words, &rows, 4, &mut got);
        got.sort();
        assert_eq!(got, vec![vec![0, 2, 3, 4], vec![1, 2, 3, 4]]);
        let mut five = Vec::new();
        cliques_exact(n, words, &rows, 5, &mut five);
        assert!(five.is_empty());
        // size 3: all triangles avoiding the missing edge
        let mut tri = Vec::new();
        cliques_exact(n, words, &rows, 3, &mut tri);
        assert_eq!(tri.len(), 7);
    }

    #[test]
    fn classification_groups_stabilizer_images() {
        let f = frame(3, 1, 3);
        let sets = enumerate_rank3(&f).unwrap();
        if sets.is_empty() {
            return;
        }
        let t = &f.tower;
        let s = &sets[0];
        let g = &f.stabilizer_of_x()[3];
        let mut moved: Vec<u64> = s
            .points
            .iter()
            .map(|&i| {
                let v = f.point_of_index(i).coords();
                f.point_index(&ProjPoint::new(t, apply(t, g, v)))
            })
            .collect();
        moved.sort_unstable();
        let image = LinearSet {
            rank: s.rank,
            generators: s.generators.clone(),
            points: moved,
            host_dimension: s.host_dimension,
        };
        let pair = [s.clone(), image];
        let classes = classify_up_to_equivalence(&f, &pair, false).unwrap();
        assert_eq!(classes.len(), 1);
        assert_eq!(classes[0].members, vec![0, 1]);
    }

    #[test]
    fn frobenius_only_joins_classes() {
        let f = frame(3, 1, 3);
        let sets = enumerate_rank3(&f).unwrap();
        if sets.is_empty() {
            return;
        }
        let linear = classify_up_to_equivalence(&f, &sets, false).unwrap();
        let semi = classify_up_to_equivalence(&f, &sets, true).unwrap();
        assert!(semi.len() <= linear.len());
    }

    #[test]
    fn internal_points_stay_internal_under_closure() {
        let f = frame(3, 1, 2);
        let inv = full_inventory(&f).unwrap();
        assert!(!inv.is_empty());
        for w in &inv {
            for &i in &w.points {
                assert_eq!(
                    f.classify(f.point_of_index(i).coords()),
                    PointClass::Internal
                );
            }
        }
    }
}
