//! F_q-sublines through x contained in the internal points, scanned on the
//! external reference line and on the secant reference line.
//!
//! A subline through x on the host line is determined by a pair (b, mu):
//! y_b = x + b*dir is a second internal point of the line, and the subline is
//! the F_q-span { y_b } ∪ { x + λ mu y_b : λ ∈ F_q }.  Scaling mu by F_q*
//! gives the same point set, so mu ranges over a transversal of
//! F_{q^n}* / F_q*.  Each subline through x arises from exactly q pairs (one
//! per choice of y_b among its non-x points), which the counting convention
//! has to account for.

use crate::conic::{add3, scale, ConicFrame, ProjPoint, Vec3};
use crate::error::{Error, Result};
use crate::field::{FieldElement, FieldTower};
use rayon::prelude::*;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum HostLine {
    External,
    Secant,
}

impl HostLine {
    pub fn dir(self, frame: &ConicFrame) -> Vec3 {
        match self {
            HostLine::External => frame.ext_dir,
            HostLine::Secant => frame.sec_dir,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            HostLine::External => "external",
            HostLine::Secant => "secant",
        }
    }
}

/// Bitset over element keys (see [`FieldElement::key`]).
#[derive(Clone)]
pub struct BSet {
    bits: Vec<u64>,
    len: usize,
}

impl BSet {
    fn with_capacity(n: usize) -> BSet {
        BSet {
            bits: vec![0; n / 64 + 1],
            len: 0,
        }
    }

    fn insert(&mut self, key: u32) {
        let (w, m) = (key as usize / 64, 1u64 << (key % 64));
        if self.bits[w] & m == 0 {
            self.bits[w] |= m;
            self.len += 1;
        }
    }

    #[inline]
    pub fn contains(&self, key: u32) -> bool {
        self.bits[key as usize / 64] & (1 << (key % 64)) != 0
    }

    pub fn contains_element(&self, e: FieldElement) -> bool {
        self.contains(e.key())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// The set B of parameters s with x + s*dir internal.  On the external line
/// this agrees with { s : s² + 2ηs − η non-square }, which is asserted.
pub fn compute_b_set(frame: &ConicFrame, host: HostLine) -> BSet {
    let t = &frame.tower;
    let dir = host.dir(frame);
    let mut b = BSet::with_capacity(t.size as usize + 1);
    for s in t.elements() {
        let p = add3(t, frame.x, scale(t, s, dir));
        let internal = frame.is_internal(p);
        if host == HostLine::External {
            // s² + 2ηs − η
            let two_eta = t.add(frame.eta, frame.eta);
            let v = t.sub(t.add(t.mul(s, s), t.mul(two_eta, s)), frame.eta);
            assert_eq!(t.is_nonsquare(v), internal, "B-set formula mismatch");
        }
        if internal {
            b.insert(s.key());
        }
    }
    b
}

/// A subline through x, with the pair that produced it and its point set.
#[derive(Clone, Debug)]
pub struct SublineWitness {
    pub b: FieldElement,
    pub mu: FieldElement,
    pub host: HostLine,
    /// Second generator: the subline is P(F_q·x + F_q·gen2).
    pub gen2: Vec3,
    /// Sorted point indices; length q + 1.
    pub points: Vec<u64>,
}

/// Scan state for one host line: the frame, the direction vector and the
/// internality bitset of the line's parameterization.
pub struct LineScan<'a> {
    pub frame: &'a ConicFrame,
    pub host: HostLine,
    pub dir: Vec3,
    pub b_set: BSet,
    /// Per-mu weight lists w_λ = λmu/(1+λmu), built once on first use.
    weights: std::sync::OnceLock<Vec<(FieldElement, Vec<FieldElement>)>>,
}

impl<'a> LineScan<'a> {
    pub fn new(frame: &'a ConicFrame, host: HostLine) -> LineScan<'a> {
        LineScan {
            frame,
            host,
            dir: host.dir(frame),
            b_set: compute_b_set(frame, host),
            weights: std::sync::OnceLock::new(),
        }
    }

    pub fn y_point(&self, b: FieldElement) -> Vec3 {
        let t = &self.frame.tower;
        add3(t, self.frame.x, scale(t, b, self.dir))
    }

    /// Nonzero members of B in ascending element order.
    pub fn b_values(&self) -> Vec<FieldElement> {
        self.frame
            .tower
            .elements()
            .filter(|s| !s.is_zero() && self.b_set.contains(s.key()))
            .collect()
    }

    /// True iff every point x + λ mu y_b (λ ∈ F_q) is internal, i.e. the
    /// subline determined by (b, mu) lies in I(C).  Evaluated through the
    /// quadratic -Q(x + λ mu y_b) in λ, which has no singular case.
    pub fn condition(&self, b: FieldElement, mu: FieldElement) -> bool {
        let f = self.frame;
        let t = &f.tower;
        let y = self.y_point(b);
        let a2 = t.neg(t.mul(t.mul(mu, mu), f.q_form(y)));
        let a1 = t.neg(t.mul(mu, f.polar(f.x, y)));
        let a0 = t.neg(f.q_form(f.x));
        for lam in t.subfield_elements() {
            let e = t.add(t.mul(t.add(t.mul(a2, lam), a1), lam), a0);
            if !t.is_nonsquare(e) {
                return false;
            }
        }
        true
    }

    /// The paper's normalized test: x + λ mu y_b is projectively
    /// x + (λmu/(1+λmu))·b·dir, so the point is internal iff that rescaled
    /// parameter lies in B.  Where 1 + λmu = 0 the point is ⟨dir⟩ itself,
    /// which is never internal, so the pair fails outright.
    pub fn condition_fraction(&self, b: FieldElement, mu: FieldElement) -> bool {
        let t = &self.frame.tower;
        for lam in t.subfield_elements() {
            if lam.is_zero() {
                continue;
            }
            let c = t.mul(lam, mu);
            let denom = t.add(t.one(), c);
            if denom.is_zero() {
                return false;
            }
            let w = t.div(c, denom);
            if !self.b_set.contains(t.mul(w, b).key()) {
                return false;
            }
        }
        true
    }

    /// All (b, mu) pairs whose subline lies in I(C), b ascending then mu
    /// ascending.  mu runs over the F_{q^n}*/F_q* transversal minus the
    /// subfield class: λmu = −1 is reachable for subfield mu, and the point
    /// there is ⟨dir⟩ ∉ I(C), so that class never passes.
    /// Per-mu weight list: w_λ = λmu / (1 + λmu); b passes mu iff
    /// w_λ·b ∈ B for every λ.
    fn mu_weights(&self) -> &[(FieldElement, Vec<FieldElement>)] {
        self.weights.get_or_init(|| {
            let t = &self.frame.tower;
            let lambdas: Vec<FieldElement> = t.subfield_star();
            t.quotient_transversal()
                .into_iter()
                .filter(|&mu| !t.in_subfield(mu))
                .map(|mu| {
                    let ws = lambdas
                        .iter()
                        .map(|&lam| {
                            let c = t.mul(lam, mu);
                            t.div(c, t.add(t.one(), c))
                        })
                        .collect();
                    (mu, ws)
                })
                .collect()
        })
    }

    /// The passing pairs with first coordinate b, mu ascending.
    pub fn pairs_for_b(&self, b: FieldElement) -> Vec<(FieldElement, FieldElement)> {
        let t = &self.frame.tower;
        let mut out = Vec::new();
        for (mu, ws) in self.mu_weights() {
            if ws.iter().all(|&w| self.b_set.contains(t.mul(w, b).key())) {
                out.push((b, *mu));
            }
        }
        out
    }

    pub fn enumerate_pairs(&self) -> Vec<(FieldElement, FieldElement)> {
        self.mu_weights(); // materialize outside the parallel region
        let bs = self.b_values();
        bs.par_iter()
            .map(|&b| self.pairs_for_b(b))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    }

    /// Materialize the q+1 points of the subline for a passing pair.
    pub fn materialize(&self, b: FieldElement, mu: FieldElement) -> SublineWitness {
        let f = self.frame;
        let t = &f.tower;
        let gen2 = scale(t, mu, self.y_point(b));
        let points = span_points(f, f.x, gen2);
        debug_assert_eq!(points.len() as u64, t.q + 1);
        SublineWitness {
            b,
            mu,
            host: self.host,
            gen2,
            points,
        }
    }
}

/// Sorted point indices of P(F_q·u + F_q·v), assuming u, v independent
/// over F_{q^n}.
pub fn span_points(frame: &ConicFrame, u: Vec3, v: Vec3) -> Vec<u64> {
    let t = &frame.tower;
    let mut pts: Vec<u64> = vec![frame.point_index(&ProjPoint::new(t, v))];
    for lam in t.subfield_elements() {
        let p = add3(t, u, scale(t, lam, v));
        pts.push(frame.point_index(&ProjPoint::new(t, p)));
    }
    pts.sort_unstable();
    pts.dedup();
    pts
}

/// The pair scan on the external reference line.
pub fn enumerate_subline_pairs(frame: &ConicFrame) -> Vec<(FieldElement, FieldElement)> {
    LineScan::new(frame, HostLine::External).enumerate_pairs()
}

/// Number of distinct sublines (as point sets) through x in I(C) on the given
/// host line.  Each subline is produced by exactly q pairs.
pub fn count_sublines_on(frame: &ConicFrame, host: HostLine) -> usize {
    let scan = LineScan::new(frame, host);
    let pairs = scan.enumerate_pairs();
    let mut sets: Vec<Vec<u64>> = pairs
        .iter()
        .map(|&(b, mu)| scan.materialize(b, mu).points)
        .collect();
    sets.sort_unstable();
    sets.dedup();
    // q pairs per subline is a theorem; cheap to assert.
    assert_eq!(sets.len() * frame.tower.q as usize, pairs.len());
    sets.len()
}

/// The headline statistic: distinct sublines through x on the external line.
pub fn count_sublines(frame: &ConicFrame) -> usize {
    count_sublines_on(frame, HostLine::External)
}

/// All sublines through x contained in I(C) with the given host type, on
/// every line through x of that type: the canonical-line witnesses expanded
/// under the x-stabilizer and deduplicated.  Only for fields small enough to
/// materialize (the large-q searches iterate images lazily instead).
pub fn sublines_through_x(frame: &ConicFrame, host: HostLine) -> Result<Vec<SublineWitness>> {
    let t = &frame.tower;
    if t.size > 2048 {
        return Err(Error::SizeGuard(format!(
            "materializing all sublines through x needs q^n <= 2048, got {}",
            t.size
        )));
    }
    let scan = LineScan::new(frame, host);
    let pairs = scan.enumerate_pairs();
    let canonical: Vec<SublineWitness> = pairs
        .iter()
        .map(|&(b, mu)| scan.materialize(b, mu))
        .collect();

    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for g in frame.stabilizer_of_x() {
        // g scales the x vector by some κ; rescale images so the stored
        // span is F_q·x + F_q·gen2 again.
        let gx = crate::conic::apply(t, g, frame.x);
        let kappa_inv = t.inv(first_ratio(t, gx, frame.x));
        for w in &canonical {
            let gen2 = scale(t, kappa_inv, crate::conic::apply(t, g, w.gen2));
            let points = span_points(frame, frame.x, gen2);
            if seen.insert(points.clone()) {
                out.push(SublineWitness {
                    b: w.b,
                    mu: w.mu,
                    host,
                    gen2,
                    points,
                });
            }
        }
    }
    out.sort_by(|a, b| a.points.cmp(&b.points));
    Ok(out)
}

pub(crate) fn first_ratio(t: &FieldTower, v: Vec3, w: Vec3) -> FieldElement {
    let i = w.iter().position(|c| !c.is_zero()).unwrap();
    t.div(v[i], w[i])
}

/// A class of fully internal sublines through x on the host line, under the
/// joint identification by the point-line flag stabilizer and by coordinate
/// Frobenius on the line.
///
/// In the chart x + s·dir the map s ↦ s^p permutes the F_q-sublines through
/// x (it need not preserve internality).  Two internal sublines are
/// identified when one is a flag-stabilizer image of the other, or when a
/// Frobenius translate of one equals the other.  Every (b, mu) pair of every
/// Frobenius translate of a member is recorded as a label of the class;
/// labels of non-internal translates are not valid pairs themselves but
/// still name the class unambiguously.
#[derive(Clone, Debug)]
pub struct SublineClass {
    /// Sorted point-index sets of the member sublines.
    pub members: Vec<Vec<u64>>,
    /// All raw (b, mu) pairs of the members, sorted.
    pub pairs: Vec<(FieldElement, FieldElement)>,
    /// All (b, mu) labels of all Frobenius translates of the members, sorted.
    pub labels: Vec<(FieldElement, FieldElement)>,
    /// Deterministic emitted row: the lexicographically least valid pair.
    pub representative: (FieldElement, FieldElement),
}

fn pair_key(p: &(FieldElement, FieldElement)) -> (u32, u32) {
    (p.0.key(), p.1.key())
}

/// Classes of the fully internal sublines through x under the flag
/// stabilizer together with coordinate-Frobenius relabeling.
pub fn subline_classes(frame: &ConicFrame, host: HostLine) -> Result<Vec<SublineClass>> {
    let t = &frame.tower;
    let dir = host.dir(frame);
    let scan = LineScan::new(frame, host);
    let raw = scan.enumerate_pairs();

    // Group raw pairs by the subline point set; keep one generator per set.
    let mut by_set: std::collections::BTreeMap<Vec<u64>, Vec<(FieldElement, FieldElement)>> =
        std::collections::BTreeMap::new();
    let mut gen_of: std::collections::BTreeMap<Vec<u64>, Vec3> = std::collections::BTreeMap::new();
    for &(b, mu) in &raw {
        let w = scan.materialize(b, mu);
        gen_of.entry(w.points.clone()).or_insert(w.gen2);
        by_set.entry(w.points).or_default().push((b, mu));
    }
    let sets: Vec<Vec<u64>> = by_set.keys().cloned().collect();
    let set_index: std::collections::BTreeMap<&Vec<u64>, usize> =
        sets.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let mut owner_of_pair: std::collections::BTreeMap<(u32, u32), usize> =
        std::collections::BTreeMap::new();
    for (i, s) in sets.iter().enumerate() {
        for p in &by_set[s] {
            owner_of_pair.insert(pair_key(p), i);
        }
    }

    // Union-find over the member sublines.
    let mut parent: Vec<usize> = (0..sets.len()).collect();
    fn root(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = root(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    fn union(parent: &mut Vec<usize>, a: usize, b: usize) {
        let (ra, rb) = (root(parent, a), root(parent, b));
        if ra != rb {
            parent[ra] = rb;
        }
    }

    let flag_stab = frame.stabilizer_of_x_and_line(dir)?;
    let degree = t.e * t.n;
    let frob_label = |p: &(FieldElement, FieldElement), j: u32| -> (FieldElement, FieldElement) {
        (
            t.frobenius_p(p.0, j),
            t.normalize_mod_subfield(t.frobenius_p(p.1, j)),
        )
    };
    for (i, s) in sets.iter().enumerate() {
        for g in &flag_stab {
            let image = span_points(
                frame,
                crate::conic::apply(t, g, frame.x),
                crate::conic::apply(t, g, gen_of[s]),
            );
            let j = *set_index
                .get(&image)
                .expect("flag stabilizer must permute the internal sublines through x");
            union(&mut parent, i, j);
        }
        for p in &by_set[s] {
            for j in 1..degree {
                let l = frob_label(p, j);
                if let Some(&k) = owner_of_pair.get(&pair_key(&l)) {
                    union(&mut parent, i, k);
                }
            }
        }
    }

    let mut grouped: std::collections::BTreeMap<usize, Vec<usize>> =
        std::collections::BTreeMap::new();
    for i in 0..sets.len() {
        let r = root(&mut parent, i);
        grouped.entry(r).or_default().push(i);
    }

    let mut out = Vec::new();
    for members_idx in grouped.values() {
        let members: Vec<Vec<u64>> = members_idx.iter().map(|&i| sets[i].clone()).collect();
        let mut pairs: Vec<(FieldElement, FieldElement)> = members_idx
            .iter()
            .flat_map(|&i| by_set[&sets[i]].iter().copied())
            .collect();
        pairs.sort_by_key(pair_key);
        let mut labels: Vec<(FieldElement, FieldElement)> = pairs
            .iter()
            .flat_map(|p| (0..degree).map(move |j| frob_label(p, j)))
            .collect();
        labels.sort_by_key(pair_key);
        labels.dedup();
        let representative = pairs[0];
        out.push(SublineClass {
            members,
            pairs,
            labels,
            representative,
        });
    }
    out.sort_by_key(|c| pair_key(&c.representative));
    Ok(out)
}

/// The emitted pair table: one deterministic representative per class.
pub fn pair_table(frame: &ConicFrame, host: HostLine) -> Result<Vec<(FieldElement, FieldElement)>> {
    Ok(subline_classes(frame, host)?
        .iter()
        .map(|c| c.representative)
        .collect())
}

/// Odd prime powers not excluded by the nonexistence bounds: every q with
/// q ≥ 4n²−8n+2 is out, and a prime q is additionally out when
/// q > 2n² − (4−2√3)n + (3−2√3).  The prime bound is evaluated in exact
/// integer arithmetic: with k = q − (2n²−4n+3), it excludes iff k > 0 and
/// k² > 12(n−1)².
pub fn feasible_q_range(n: u32) -> Vec<u64> {
    assert!(n >= 2);
    let n = n as u64;
    let general = 4 * n * n + 2 - 8 * n; // no underflow for n >= 2
    let mut out = Vec::new();
    for q in (3..general).step_by(2) {
        if !is_odd_prime_power(q) {
            continue;
        }
        if crate::conway::is_prime(q) {
            let base = 2 * n * n + 3 - 4 * n;
            if q > base {
                let k = q - base;
                if k * k > 12 * (n - 1) * (n - 1) {
                    continue;
                }
            }
        }
        out.push(q);
    }
    out
}

fn is_odd_prime_power(q: u64) -> bool {
    if q % 2 == 0 || q < 3 {
        return false;
    }
    let p = crate::conway::prime_factors(q);
    p.len() == 1
}
