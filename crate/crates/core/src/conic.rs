//! The conic C: X0*X1 = X2^2 in PG(2, q^n), its point classification, and the
//! subgroup of the conic-preserving collineations stabilizing a fixed internal
//! point x = (1, eta, 0).
//!
//! Collineations preserving C come from GL(2) acting on the space of binary
//! quadratic forms: the image of [[a, b], [c, d]] is
//!
//! ```text
//! M = | a^2   b^2   a b     |
//!     | c^2   d^2   c d     |
//!     | 2ac   2bd   ad + bc |
//! ```
//!
//! acting on row vectors, with Q(v M) = (ad - bc)^2 Q(v).  This is checked on
//! the Gram matrix at every construction.

use crate::error::{Error, Result};
use crate::field::{FieldElement, FieldTower};
use std::fmt;
use std::sync::OnceLock;

pub type Vec3 = [FieldElement; 3];

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PointClass {
    OnConic,
    Internal,
    External,
}

/// A projective point, stored with its first nonzero coordinate scaled to 1.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct ProjPoint(pub Vec3);

impl ProjPoint {
    pub fn new(tower: &FieldTower, v: Vec3) -> ProjPoint {
        ProjPoint(normalize(tower, v))
    }

    pub fn coords(&self) -> Vec3 {
        self.0
    }
}

impl Ord for ProjPoint {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let k = |p: &ProjPoint| [p.0[0].key(), p.0[1].key(), p.0[2].key()];
        k(self).cmp(&k(other))
    }
}

impl PartialOrd for ProjPoint {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

pub fn normalize(tower: &FieldTower, v: Vec3) -> Vec3 {
    let i = v
        .iter()
        .position(|c| !c.is_zero())
        .expect("zero vector is not a projective point");
    let s = tower.inv(v[i]);
    [tower.mul(v[0], s), tower.mul(v[1], s), tower.mul(v[2], s)]
}

pub fn scale(tower: &FieldTower, s: FieldElement, v: Vec3) -> Vec3 {
    [tower.mul(s, v[0]), tower.mul(s, v[1]), tower.mul(s, v[2])]
}

pub fn add3(tower: &FieldTower, a: Vec3, b: Vec3) -> Vec3 {
    [
        tower.add(a[0], b[0]),
        tower.add(a[1], b[1]),
        tower.add(a[2], b[2]),
    ]
}

pub fn det3(tower: &FieldTower, rows: [Vec3; 3]) -> FieldElement {
    let [r0, r1, r2] = rows;
    let minor = |a: FieldElement, b, c, d| tower.sub(tower.mul(a, b), tower.mul(c, d));
    let m0 = minor(r1[1], r2[2], r1[2], r2[1]);
    let m1 = minor(r1[0], r2[2], r1[2], r2[0]);
    let m2 = minor(r1[0], r2[1], r1[1], r2[0]);
    tower.add(
        tower.sub(tower.mul(r0[0], m0), tower.mul(r0[1], m1)),
        tower.mul(r0[2], m2),
    )
}

/// A conic-preserving projective transformation, as a 3x3 matrix acting on
/// row vectors.  Always produced through [`ConicFrame::group_element`], so the
/// conic-preservation identity has been checked.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct GroupElement {
    pub m: [Vec3; 3],
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupElement({:?})", self.m)
    }
}

impl GroupElement {
    /// Scale so the first nonzero entry (row-major) is 1; projective identity.
    pub fn normalized(&self, tower: &FieldTower) -> GroupElement {
        let flat = self.m.iter().flatten().find(|c| !c.is_zero()).unwrap();
        let s = tower.inv(*flat);
        let mut m = self.m;
        for row in m.iter_mut() {
            *row = scale(tower, s, *row);
        }
        GroupElement { m }
    }
}

/// Row vector times matrix.
pub fn apply(tower: &FieldTower, g: &GroupElement, v: Vec3) -> Vec3 {
    let mut out = [FieldElement::ZERO; 3];
    for (j, slot) in out.iter_mut().enumerate() {
        let mut acc = FieldElement::ZERO;
        for i in 0..3 {
            acc = tower.add(acc, tower.mul(v[i], g.m[i][j]));
        }
        *slot = acc;
    }
    out
}

/// Matrix product: applying `compose(a, b)` is applying `a`, then `b`.
pub fn compose(tower: &FieldTower, a: &GroupElement, b: &GroupElement) -> GroupElement {
    let mut m = [[FieldElement::ZERO; 3]; 3];
    for i in 0..3 {
        m[i] = apply(tower, b, a.m[i]);
    }
    GroupElement { m }
}

pub fn inverse(tower: &FieldTower, g: &GroupElement) -> GroupElement {
    let d = det3(tower, g.m);
    assert!(!d.is_zero(), "group element must be invertible");
    let di = tower.inv(d);
    let m = &g.m;
    let cof = |r1: usize, r2: usize, c1: usize, c2: usize| {
        tower.sub(
            tower.mul(m[r1][c1], m[r2][c2]),
            tower.mul(m[r1][c2], m[r2][c1]),
        )
    };
    let mut adj = [[FieldElement::ZERO; 3]; 3];
    let rows = [(1usize, 2usize), (0, 2), (0, 1)];
    let cols = [(1usize, 2usize), (0, 2), (0, 1)];
    for i in 0..3 {
        for j in 0..3 {
            let (r1, r2) = rows[j];
            let (c1, c2) = cols[i];
            let mut c = cof(r1, r2, c1, c2);
            if (i + j) % 2 == 1 {
                c = tower.neg(c);
            }
            adj[i][j] = tower.mul(di, c);
        }
    }
    GroupElement { m: adj }
}

pub fn identity(tower: &FieldTower) -> GroupElement {
    let one = tower.one();
    let z = FieldElement::ZERO;
    GroupElement {
        m: [[one, z, z], [z, one, z], [z, z, one]],
    }
}

/// The conic with a marked internal point and the two reference lines
/// through it.
pub struct ConicFrame {
    pub tower: FieldTower,
    pub eta: FieldElement,
    /// x = (1, eta, 0), internal.
    pub x: Vec3,
    /// Direction vector of the external reference line through x.
    pub ext_dir: Vec3,
    /// Direction vector of the secant reference line through x.
    pub sec_dir: Vec3,
    stab: OnceLock<Vec<GroupElement>>,
}

impl fmt::Debug for ConicFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ConicFrame({:?}, eta={:?})", self.tower, self.eta)
    }
}

impl ConicFrame {
    /// eta is the first power of the generator (from alpha upward) with
    /// -eta a nonsquare (so x is internal) and -eta - 1 a nonzero square (so
    /// the reference line below is external).
    pub fn new(tower: FieldTower) -> Result<ConicFrame> {
        let mut eta = None;
        for k in 1..tower.size as u32 - 1 {
            let cand = FieldElement::from_log(k);
            let neg = tower.neg(cand);
            if tower.is_nonsquare(neg) {
                let m = tower.sub(neg, tower.one());
                if !m.is_zero() && tower.is_square(m) {
                    eta = Some(cand);
                    break;
                }
            }
        }
        let eta = eta.ok_or(Error::InfeasibleField(tower.size))?;
        ConicFrame::with_eta(tower, eta)
    }

    /// Frame with a caller-chosen eta, subject to the same two conditions
    /// the default pick enforces.
    pub fn with_eta(tower: FieldTower, eta: FieldElement) -> Result<ConicFrame> {
        let neg = tower.neg(eta);
        let m = tower.sub(neg, tower.one());
        if !tower.is_nonsquare(neg) || m.is_zero() || !tower.is_square(m) {
            return Err(Error::InfeasibleField(tower.size));
        }
        let one = tower.one();
        let z = FieldElement::ZERO;
        let x = [one, eta, z];
        let ext_dir = [z, tower.neg(tower.add(eta, eta)), one];
        let sec_dir = [z, one, z];
        let frame = ConicFrame {
            tower,
            eta,
            x,
            ext_dir,
            sec_dir,
            stab: OnceLock::new(),
        };
        debug_assert_eq!(frame.classify(frame.x), PointClass::Internal);
        Ok(frame)
    }

    pub fn q_form(&self, v: Vec3) -> FieldElement {
        let t = &self.tower;
        t.sub(t.mul(v[0], v[1]), t.mul(v[2], v[2]))
    }

    /// Polar form of Q: Q(u+v) - Q(u) - Q(v).
    pub fn polar(&self, u: Vec3, v: Vec3) -> FieldElement {
        let t = &self.tower;
        let cross = t.add(t.mul(u[0], v[1]), t.mul(u[1], v[0]));
        let mixed = t.mul(u[2], v[2]);
        t.sub(cross, t.add(mixed, mixed))
    }

    pub fn classify(&self, v: Vec3) -> PointClass {
        let nq = self.tower.neg(self.q_form(v));
        if nq.is_zero() {
            PointClass::OnConic
        } else if self.tower.is_nonsquare(nq) {
            PointClass::Internal
        } else {
            PointClass::External
        }
    }

    pub fn is_internal(&self, v: Vec3) -> bool {
        self.classify(v) == PointClass::Internal
    }

    /// The image of [[a, b], [c, d]] in the conic group.
    pub fn group_element(
        &self,
        a: FieldElement,
        b: FieldElement,
        c: FieldElement,
        d: FieldElement,
    ) -> Result<GroupElement> {
        let t = &self.tower;
        let det = t.sub(t.mul(a, d), t.mul(b, c));
        if det.is_zero() {
            return Err(Error::SingularParameters);
        }
        let two = t.add(t.one(), t.one());
        let g = GroupElement {
            m: [
                [t.mul(a, a), t.mul(b, b), t.mul(a, b)],
                [t.mul(c, c), t.mul(d, d), t.mul(c, d)],
                [
                    t.mul(two, t.mul(a, c)),
                    t.mul(two, t.mul(b, d)),
                    t.add(t.mul(a, d), t.mul(b, c)),
                ],
            ],
        };
        debug_assert!(self.preserves_conic(&g, t.mul(det, det)));
        Ok(g)
    }

    /// M B M^T = det(A)^2 B on the Gram matrix B of Q, where A is the GL(2)
    /// preimage of M.
    fn preserves_conic(&self, g: &GroupElement, d2: FieldElement) -> bool {
        let t = &self.tower;
        let half = t.inv(t.add(t.one(), t.one()));
        let z = FieldElement::ZERO;
        let b = [
            [z, half, z],
            [half, z, z],
            [z, z, t.neg(t.one())],
        ];
        // rows of M B M^T
        let mut mb = [[z; 3]; 3];
        for i in 0..3 {
            mb[i] = apply(t, &GroupElement { m: b }, g.m[i]);
        }
        for i in 0..3 {
            for j in 0..3 {
                // (M B M^T)_{ij} = mb_i . m_j
                let mut acc = z;
                for k in 0..3 {
                    acc = t.add(acc, t.mul(mb[i][k], g.m[j][k]));
                }
                if acc != t.mul(d2, b[i][j]) {
                    return false;
                }
            }
        }
        true
    }

    /// The stabilizer of x in the conic group: a dihedral group of order
    /// 2(q^n + 1), built as the norm-form torus u^2 + eta v^2 together with
    /// its reflection coset.
    pub fn stabilizer_of_x(&self) -> &[GroupElement] {
        self.stab.get_or_init(|| {
            let t = &self.tower;
            let one = t.one();
            let z = FieldElement::ZERO;
            let twist = self
                .group_element(one, z, z, t.neg(one))
                .expect("reflection is invertible");
            let mut out = Vec::with_capacity(2 * (t.size as usize + 1));
            let mut pairs: Vec<(FieldElement, FieldElement)> =
                t.elements().map(|v| (one, v)).collect();
            pairs.push((z, one));
            for (u, v) in pairs {
                let g = self
                    .group_element(u, t.neg(t.mul(self.eta, v)), v, u)
                    .expect("norm form of -eta nonsquare never vanishes");
                debug_assert!(self.fixes_x(&g));
                let gt = compose(t, &g, &twist);
                debug_assert!(self.fixes_x(&gt));
                out.push(g);
                out.push(gt);
            }
            // Pairwise distinct as projective maps.
            let mut seen: Vec<GroupElement> = out.iter().map(|g| g.normalized(t)).collect();
            seen.sort_by_key(|g| {
                let mut k = [[0u32; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        k[i][j] = g.m[i][j].key();
                    }
                }
                k
            });
            seen.dedup();
            assert_eq!(
                seen.len(),
                2 * (t.size as usize + 1),
                "stabilizer of x has wrong order"
            );
            out
        })
    }

    pub fn fixes_x(&self, g: &GroupElement) -> bool {
        ProjPoint::new(&self.tower, apply(&self.tower, g, self.x))
            == ProjPoint::new(&self.tower, self.x)
    }

    /// Elements of the x-stabilizer fixing the line <x, x + dir> setwise.
    pub fn stabilizer_of_x_and_line(&self, dir: Vec3) -> Result<Vec<GroupElement>> {
        let t = &self.tower;
        let w = add3(t, self.x, dir);
        let out: Vec<GroupElement> = self
            .stabilizer_of_x()
            .iter()
            .filter(|g| det3(t, [self.x, w, apply(t, g, w)]).is_zero())
            .cloned()
            .collect();
        if out.len() != 4 {
            return Err(Error::StabilizerSize {
                got: out.len(),
                want: 4,
            });
        }
        Ok(out)
    }

    /// The unique-up-to-stabilizer map sending the internal point y to x.
    pub fn transporter_to_x(&self, y: Vec3) -> Result<GroupElement> {
        let t = &self.tower;
        if self.classify(y) != PointClass::Internal {
            return Err(Error::SearchInvariant(
                "transporter target must be internal".into(),
            ));
        }
        let yn = normalize(t, y);
        // Internal points have nonzero first coordinate.
        let d = t.sub(yn[1], t.mul(yn[2], yn[2]));
        let ratio = t.div(d, self.eta);
        let sigma = t
            .sqrt(ratio)
            .expect("Q(y)/eta is a ratio of nonsquares, hence square");
        let g = self.group_element(t.one(), yn[2], FieldElement::ZERO, sigma)?;
        debug_assert_eq!(
            ProjPoint::new(t, apply(t, &g, self.x)),
            ProjPoint::new(t, yn)
        );
        Ok(inverse(t, &g))
    }

    /// Coordinatewise p-power Frobenius, iterated j times.
    pub fn frobenius_point(&self, v: Vec3, j: u32) -> Vec3 {
        let t = &self.tower;
        [
            t.frobenius_p(v[0], j),
            t.frobenius_p(v[1], j),
            t.frobenius_p(v[2], j),
        ]
    }

    /// All q^n + 1 points of the conic.
    pub fn conic_points(&self) -> Vec<ProjPoint> {
        let t = &self.tower;
        let one = t.one();
        let z = FieldElement::ZERO;
        let mut out = vec![ProjPoint([z, one, z])];
        out.extend(
            t.elements()
                .map(|s| ProjPoint::new(t, [one, t.mul(s, s), s])),
        );
        out
    }

    /// Points of the line through `base` spanned with `dir`.
    pub fn line_points(&self, base: Vec3, dir: Vec3) -> Vec<ProjPoint> {
        let t = &self.tower;
        let mut out = vec![ProjPoint::new(t, dir)];
        out.extend(
            t.elements()
                .map(|s| ProjPoint::new(t, add3(t, base, scale(t, s, dir)))),
        );
        out
    }

    /// Dense injective index of a projective point; fits in u64 for every
    /// supported field.
    pub fn point_index(&self, p: &ProjPoint) -> u64 {
        let n = self.tower.size;
        let v = p.0;
        if !v[0].is_zero() {
            v[1].key() as u64 * n + v[2].key() as u64
        } else if !v[1].is_zero() {
            n * n + v[2].key() as u64
        } else {
            n * n + n
        }
    }

    /// Inverse of `point_index`.
    pub fn point_of_index(&self, id: u64) -> ProjPoint {
        let n = self.tower.size;
        let el = |k: u64| {
            if k == 0 {
                FieldElement::ZERO
            } else {
                FieldElement::from_log(k as u32 - 1)
            }
        };
        let one = self.tower.one();
        let z = FieldElement::ZERO;
        if id < n * n {
            ProjPoint([one, el(id / n), el(id % n)])
        } else if id < n * n + n {
            ProjPoint([z, one, el(id - n * n)])
        } else {
            ProjPoint([z, z, one])
        }
    }

    /// Every point of the plane, for exhaustive small-field sweeps.
    pub fn all_points(&self) -> Vec<ProjPoint> {
        let t = &self.tower;
        let one = t.one();
        let z = FieldElement::ZERO;
        let mut out = Vec::new();
        for y in t.elements() {
            for w in t.elements() {
                out.push(ProjPoint([one, y, w]));
            }
        }
        for w in t.elements() {
            out.push(ProjPoint([z, one, w]));
        }
        out.push(ProjPoint([z, z, one]));
        out
    }

    /// Every line of the plane as a normalized dual covector u, incidence
    /// being u·v = 0.  Lines biject with points of the dual plane, so the
    /// same normalization and indexing apply.
    pub fn all_lines(&self) -> Vec<ProjPoint> {
        self.all_points()
    }

    /// How a line meets the conic: 0, 1, or 2 points.
    pub fn line_kind(&self, u: Vec3) -> LineKind {
        let t = &self.tower;
        let hits = self
            .conic_points()
            .iter()
            .filter(|p| dot3(t, u, p.0).is_zero())
            .count();
        match hits {
            0 => LineKind::External,
            1 => LineKind::Tangent,
            2 => LineKind::Secant,
            _ => unreachable!("a line meets an irreducible conic in at most 2 points"),
        }
    }

    /// Generators of the full group of the conic: the diagonal, unipotent,
    /// and Weyl images of GL(2, q^n).
    pub fn conic_group_generators(&self) -> Vec<GroupElement> {
        let t = &self.tower;
        let one = t.one();
        let z = FieldElement::ZERO;
        let alpha = FieldElement::from_log(1);
        vec![
            self.group_element(alpha, z, z, one).expect("diag"),
            self.group_element(one, one, z, one).expect("unipotent"),
            self.group_element(z, one, one, z).expect("weyl"),
        ]
    }

    /// Closure of `gens` under composition, capped to guard against runaway
    /// sizes.  Elements are deduplicated projectively.
    pub fn generate_group(&self, gens: &[GroupElement], cap: usize) -> Result<Vec<GroupElement>> {
        let t = &self.tower;
        let mut seen = std::collections::HashSet::new();
        let mut out = vec![identity(t)];
        seen.insert(matrix_key(t, &out[0]));
        let mut frontier = out.clone();
        while let Some(g) = frontier.pop() {
            for h in gens {
                let gh = compose(t, &g, h);
                if seen.insert(matrix_key(t, &gh)) {
                    if out.len() >= cap {
                        return Err(Error::SizeGuard(format!(
                            "group closure exceeded cap {cap}"
                        )));
                    }
                    out.push(gh.clone());
                    frontier.push(gh);
                }
            }
        }
        Ok(out)
    }

    /// Orbit of a point index under the group generated by `gens`.
    pub fn point_orbit(&self, gens: &[GroupElement], start: Vec3) -> Vec<u64> {
        self.orbit_by(gens, start, |g, v| apply(&self.tower, g, v))
    }

    /// Orbit of a line (dual covector) under the group generated by `gens`.
    pub fn line_orbit(&self, gens: &[GroupElement], start: Vec3) -> Vec<u64> {
        self.orbit_by(gens, start, |g, u| apply_to_line(&self.tower, g, u))
    }

    fn orbit_by<F: Fn(&GroupElement, Vec3) -> Vec3>(
        &self,
        gens: &[GroupElement],
        start: Vec3,
        act: F,
    ) -> Vec<u64> {
        let t = &self.tower;
        let mut seen = std::collections::HashSet::new();
        let mut frontier = vec![ProjPoint::new(t, start)];
        seen.insert(self.point_index(&frontier[0]));
        while let Some(v) = frontier.pop() {
            for g in gens {
                let w = ProjPoint::new(t, act(g, v.0));
                if seen.insert(self.point_index(&w)) {
                    frontier.push(w);
                }
            }
        }
        let mut out: Vec<u64> = seen.into_iter().collect();
        out.sort_unstable();
        out
    }

    /// Transitivity oracle for the group of the conic on small fields: the
    /// generated group has order q^n(q^{2n}-1) and acts transitively on
    /// internal points, external points, external lines, secant lines,
    /// and tangent lines.
    pub fn payne_oracle(&self) -> Result<()> {
        let t = &self.tower;
        let size = t.size;
        if size > 32 {
            return Err(Error::SizeGuard(format!(
                "transitivity oracle enumerates the full group; q^n <= 32 required, got {size}"
            )));
        }
        let order = (size * (size * size - 1)) as usize;
        let group = self.generate_group(&self.conic_group_generators(), order + 1)?;
        if group.len() != order {
            return Err(Error::SearchInvariant(format!(
                "conic group order {} != q^n(q^{{2n}}-1) = {order}",
                group.len()
            )));
        }
        let internal = size * (size - 1) / 2;
        let external = size * (size + 1) / 2;
        let gens = self.conic_group_generators();
        let expect = |name: &str, got: usize, want: u64| -> Result<()> {
            if got as u64 != want {
                return Err(Error::SearchInvariant(format!(
                    "orbit of {name} has size {got}, expected {want}"
                )));
            }
            Ok(())
        };
        expect("x", self.point_orbit(&gens, self.x).len(), internal)?;
        // an external point: any point of a tangent line off the conic;
        // (1, 0, 0) has Q = 0*1 - 0 = 0? no: Q(1,0,0) = 0. take (1, -1, 0):
        // Q = -1, internal iff 1 nonsquare, so external exactly when 1 is a
        // square, which always holds.
        let one = t.one();
        let ext_pt = [one, t.neg(one), FieldElement::ZERO];
        debug_assert_eq!(self.classify(ext_pt), PointClass::External);
        expect("an external point", self.point_orbit(&gens, ext_pt).len(), external)?;

        // line counts mirror the point counts in the dual
        let ext_line = cross3(t, self.x, self.ext_dir);
        debug_assert_eq!(self.line_kind(ext_line), LineKind::External);
        expect(
            "the external line",
            self.line_orbit(&gens, ext_line).len(),
            internal,
        )?;
        let sec_line = cross3(t, self.x, self.sec_dir);
        debug_assert_eq!(self.line_kind(sec_line), LineKind::Secant);
        expect(
            "the secant line",
            self.line_orbit(&gens, sec_line).len(),
            external,
        )?;
        // tangent at (0, 1, 0) is X0 = 0
        let tan_line = [one, FieldElement::ZERO, FieldElement::ZERO];
        debug_assert_eq!(self.line_kind(tan_line), LineKind::Tangent);
        expect(
            "a tangent line",
            self.line_orbit(&gens, tan_line).len(),
            size + 1,
        )?;

        // every generator preserves the conic and each point class
        for g in &gens {
            for p in self.all_points() {
                let img = apply(t, g, p.0);
                if self.classify(img) != self.classify(p.0) {
                    return Err(Error::SearchInvariant(
                        "generator does not preserve the point partition".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// One-line kinds by conic incidence.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum LineKind {
    External,
    Tangent,
    Secant,
}

pub fn dot3(t: &FieldTower, u: Vec3, v: Vec3) -> FieldElement {
    let mut acc = FieldElement::ZERO;
    for i in 0..3 {
        acc = t.add(acc, t.mul(u[i], v[i]));
    }
    acc
}

/// Line through two points as a dual covector.
pub fn cross3(t: &FieldTower, u: Vec3, v: Vec3) -> Vec3 {
    [
        t.sub(t.mul(u[1], v[2]), t.mul(u[2], v[1])),
        t.sub(t.mul(u[2], v[0]), t.mul(u[0], v[2])),
        t.sub(t.mul(u[0], v[1]), t.mul(u[1], v[0])),
    ]
}

/// Dual action on lines: v ↦ v·M sends {v : u·v = 0} to {w : (u·M⁻ᵀ)·w = 0}.
pub fn apply_to_line(t: &FieldTower, g: &GroupElement, u: Vec3) -> Vec3 {
    let inv = inverse(t, g);
    let mut out = [FieldElement::ZERO; 3];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = FieldElement::ZERO;
        for j in 0..3 {
            acc = t.add(acc, t.mul(inv.m[i][j], u[j]));
        }
        *o = acc;
    }
    out
}

fn matrix_key(t: &FieldTower, g: &GroupElement) -> [u32; 9] {
    let mut flat = [FieldElement::ZERO; 9];
    for i in 0..3 {
        for j in 0..3 {
            flat[3 * i + j] = g.m[i][j];
        }
    }
    let lead = flat.iter().find(|c| !c.is_zero()).copied().unwrap();
    let li = t.inv(lead);
    let mut out = [0u32; 9];
    for (o, c) in out.iter_mut().zip(flat.iter()) {
        *o = t.mul(li, *c).key();
    }
    out
}
