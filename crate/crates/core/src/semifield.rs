//! Rank-two commutative multiplications, their quadratic pairs, and the
//! associated flocks of the quadratic cone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::conic::{ConicFrame, Vec3};
use crate::error::{Error, Result};
use crate::field::{FieldElement, FieldTower};
use crate::linset::LinearSet;

/// q-linearized polynomial: a sum of c * t^(q^k) terms.
pub type Linearized = Vec<(FieldElement, u32)>;

fn eval(t: &FieldTower, poly: &Linearized, s: FieldElement) -> FieldElement {
    t.linearized_eval(poly, s)
}

fn negated(t: &FieldTower, poly: &Linearized) -> Linearized {
    poly.iter().map(|&(c, k)| (t.neg(c), k)).collect()
}

/// Multiplication on K x K given by a pair of q-linearized polynomials:
///
///   (x, y) (u, v)  =  (xv + yu + f(xu),  yv + g(xu))
///
/// The form is symmetric in the two factors, so the product is commutative,
/// and (0, 1) is a two-sided unit. Eliminating v from a vanishing product
/// leaves w^2 + w f(s) - s g(s) = 0 with w = yu, so the structure has no
/// zero divisors (and is therefore a semifield) exactly when the
/// discriminant f(t)^2 + 4 t g(t) is a nonsquare for every nonzero t;
/// equivalently, when [`cg_pair_check`] accepts [`Self::flock_pair`].
#[derive(Debug, Clone)]
pub struct PairPresentation {
    pub f: Linearized,
    pub g: Linearized,
}

impl PairPresentation {
    pub fn multiply(
        &self,
        t: &FieldTower,
        a: (FieldElement, FieldElement),
        b: (FieldElement, FieldElement),
    ) -> (FieldElement, FieldElement) {
        let (x, y) = a;
        let (u, v) = b;
        let xu = t.mul(x, u);
        let first = t.add(t.add(t.mul(x, v), t.mul(y, u)), eval(t, &self.f, xu));
        let second = t.add(t.mul(y, v), eval(t, &self.g, xu));
        (first, second)
    }

    pub fn unit(&self, t: &FieldTower) -> (FieldElement, FieldElement) {
        (FieldElement::ZERO, t.one())
    }

    /// The quadratic pair of the associated flock. Substituting
    /// (F, G) = (-g, f) turns the discriminant f^2 + 4tg of the
    /// multiplication into G^2 - 4tF, the form tested by
    /// [`cg_pair_check`].
    pub fn flock_pair(&self, t: &FieldTower) -> CgPair {
        CgPair {
            f: negated(t, &self.g),
            g: self.f.clone(),
        }
    }
}

/// A pair (f, g) in flock form. The pair is admissible when
/// g(t)^2 - 4 t f(t) is a nonsquare for every nonzero t, in which case
/// the planes of [`flock_from_pair`] form a flock and the point set of
/// [`linear_set_w`] is internal.
#[derive(Debug, Clone)]
pub struct CgPair {
    pub f: Linearized,
    pub g: Linearized,
}

impl CgPair {
    /// The multiplication this pair induces, inverting
    /// [`PairPresentation::flock_pair`].
    pub fn presentation(&self, t: &FieldTower) -> PairPresentation {
        PairPresentation {
            f: self.g.clone(),
            g: negated(t, &self.f),
        }
    }
}

/// Twisted-field multiplication (x,y)(u,v) = (xv + yu, yv + m x^s u^s) with
/// m a nonsquare and s = q^sigma a nontrivial automorphism power.
pub fn dickson(t: &FieldTower, m: FieldElement, sigma: u32) -> Result<PairPresentation> {
    if t.p == 2 || m.is_zero() || t.is_square(m) || sigma % t.n == 0 {
        return Err(Error::SingularParameters);
    }
    Ok(PairPresentation {
        f: vec![],
        g: vec![(m, sigma % t.n)],
    })
}

/// Characteristic-three family over F_{3^n}, n >= 2:
/// (x,y)(u,v) = (xv + yu + (xu)^3, yv + eta (xu)^9 + eta^-1 xu).
pub fn cohen_ganley(t: &FieldTower, eta: FieldElement) -> Result<PairPresentation> {
    if t.p != 3 || t.e != 1 || t.n < 2 || eta.is_zero() || t.is_square(eta) {
        return Err(Error::SingularParameters);
    }
    Ok(PairPresentation {
        f: vec![(t.one(), 1)],
        g: vec![(eta, 2), (t.inv(eta), 0)],
    })
}

/// The sporadic example over F_{3^5}:
/// (x,y)(u,v) = (xv + yu + (xu)^27, yv + (xu)^9).
pub fn penttila_williams(t: &FieldTower) -> Result<PairPresentation> {
    if t.p != 3 || t.e != 1 || t.n != 5 {
        return Err(Error::SingularParameters);
    }
    Ok(PairPresentation {
        f: vec![(t.one(), 3)],
        g: vec![(t.one(), 2)],
    })
}

/// g(t)^2 - 4 t f(t) is a nonsquare for every t != 0. Equivalent to the
/// induced multiplication having no zero divisors, and to the plane family
/// of [`flock_from_pair`] being a flock.
pub fn cg_pair_check(t: &FieldTower, pair: &CgPair) -> bool {
    let four = t.from_int(4);
    t.elements().skip(1).all(|s| {
        let g = eval(t, &pair.g, s);
        let f = eval(t, &pair.f, s);
        let w = t.sub(t.mul(g, g), t.mul(four, t.mul(s, f)));
        t.is_nonsquare(w)
    })
}

/// Whether some product of two nonzero elements vanishes.
///
/// The multiplication is F_p-bilinear, so it suffices to check, for every
/// nonzero (x, y), that left multiplication by (x, y) has trivial kernel;
/// the kernels are computed by Gaussian elimination over F_p. This is a
/// complete check, not a sample.
pub fn has_zero_divisors(t: &FieldTower, pair: &PairPresentation) -> Result<bool> {
    let dim = 2 * (t.e * t.n) as usize;
    if t.size > (1 << 20) {
        return Err(Error::SizeGuard(format!(
            "kernel sweep over {} left factors is out of range",
            t.size * t.size
        )));
    }
    let basis: Vec<(FieldElement, FieldElement)> = field_basis(t)
        .iter()
        .flat_map(|&b| [(b, FieldElement::ZERO), (FieldElement::ZERO, b)])
        .collect();
    let keys: Vec<u32> = (0..t.size as u32).collect();
    let found = keys.par_iter().any(|&xk| {
        let x = decode_key(xk);
        keys.iter().any(|&yk| {
            if xk == 0 && yk == 0 {
                return false;
            }
            let y = decode_key(yk);
            let mut cols: Vec<Vec<u64>> = Vec::with_capacity(dim);
            for &b in &basis {
                let (c0, c1) = pair.multiply(t, (x, y), b);
                let mut col = t.poly_coeffs(c0);
                col.extend(t.poly_coeffs(c1));
                cols.push(col);
            }
            gaussian_rank(cols, t.p) < dim
        })
    });
    Ok(found)
}

/// Random search for a vanishing product; returns the witness if one shows
/// up. Expected to stay empty for the families above; [`has_zero_divisors`]
/// is the complete check.
#[allow(clippy::type_complexity)]
pub fn sample_zero_divisor(
    t: &FieldTower,
    pair: &PairPresentation,
    trials: u64,
    seed: u64,
) -> Option<((FieldElement, FieldElement), (FieldElement, FieldElement))> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| loop {
        let xk = rng.random_range(0..t.size as u32);
        let yk = rng.random_range(0..t.size as u32);
        if xk != 0 || yk != 0 {
            return (decode_key(xk), decode_key(yk));
        }
    };
    for _ in 0..trials {
        let a = draw(&mut rng);
        let b = draw(&mut rng);
        let (c0, c1) = pair.multiply(t, a, b);
        if c0.is_zero() && c1.is_zero() {
            return Some((a, b));
        }
    }
    None
}

/// The projective linear set W = {(t, f(t), g(t)) : t != 0}, carried into
/// the frame of the conic X0 X1 = X2^2 by the change of basis
/// diag(2, 2, 1). Under that map W lands inside the internal points
/// exactly when the pair passes [`cg_pair_check`].
pub fn linear_set_w(frame: &ConicFrame, pair: &CgPair) -> Result<LinearSet> {
    let t = &frame.tower;
    let two = t.from_int(2);
    let mut gens: Vec<Vec3> = Vec::with_capacity(t.n as usize);
    for i in 0..t.n {
        let b = t.pow(t.alpha(), i as u64);
        let fb = eval(t, &pair.f, b);
        let gb = eval(t, &pair.g, b);
        gens.push([t.mul(two, b), t.mul(two, fb), gb]);
    }
    LinearSet::from_generators(frame, gens)
}

/// A family of hyperplanes of PG(3, q^n), stored by coefficient vectors.
#[derive(Debug, Clone)]
pub struct Flock {
    pub planes: Vec<[FieldElement; 4]>,
}

/// Planes t X0 + f(t) X1 + g(t) X2 + X3 = 0, one per element t of the field.
pub fn flock_from_pair(t: &FieldTower, pair: &CgPair) -> Flock {
    let planes = t
        .elements()
        .map(|s| [s, eval(t, &pair.f, s), eval(t, &pair.g, s), t.one()])
        .collect();
    Flock { planes }
}

/// Checks the flock property against the cone over X0 X1 = X2^2 in the
/// hyperplane X3 = 0, with vertex (0,0,0,1): the planes must be distinct,
/// miss the vertex, and partition the rest of the cone, covering each of
/// its points exactly once.
pub fn verify_flock(t: &FieldTower, flock: &Flock) -> bool {
    if flock.planes.len() != t.size as usize {
        return false;
    }
    let mut sorted: Vec<[u32; 4]> = flock
        .planes
        .iter()
        .map(|p| [p[0].key(), p[1].key(), p[2].key(), p[3].key()])
        .collect();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != flock.planes.len() {
        return false;
    }
    if flock.planes.iter().any(|p| p[3].is_zero()) {
        return false;
    }
    let base = conic_points(t);
    base.par_iter().all(|w| {
        t.elements().all(|lambda| {
            let hits = flock
                .planes
                .iter()
                .filter(|p| {
                    let s = t.add(
                        t.add(t.mul(p[0], w[0]), t.mul(p[1], w[1])),
                        t.add(t.mul(p[2], w[2]), t.mul(p[3], lambda)),
                    );
                    s.is_zero()
                })
                .count();
            hits == 1
        })
    })
}

/// Points of X0 X1 = X2^2: (1, u^2, u) for u in the field, plus (0, 1, 0).
fn conic_points(t: &FieldTower) -> Vec<Vec3> {
    let mut pts = vec![[FieldElement::ZERO, t.one(), FieldElement::ZERO]];
    pts.extend(t.elements().map(|u| [t.one(), t.mul(u, u), u]));
    pts
}

/// Power basis of the field over F_p: 1, x, ..., x^(en-1).
fn field_basis(t: &FieldTower) -> Vec<FieldElement> {
    (0..t.e * t.n)
        .map(|i| {
            let mut coeffs = vec![0u64; (t.e * t.n) as usize];
            coeffs[i as usize] = 1;
            t.from_poly_coeffs(&coeffs)
        })
        .collect()
}

fn decode_key(k: u32) -> FieldElement {
    if k == 0 {
        FieldElement::ZERO
    } else {
        FieldElement::from_log(k - 1)
    }
}

fn gaussian_rank(mut cols: Vec<Vec<u64>>, p: u64) -> usize {
    let dim = cols.first().map_or(0, Vec::len);
    let mut rank = 0;
    for row in 0..dim {
        let Some(pivot) = (rank..cols.len()).find(|&j| cols[j][row] % p != 0) else {
            continue;
        };
        cols.swap(rank, pivot);
        let inv = mod_inverse(cols[rank][row], p);
        for j in 0..cols.len() {
            if j == rank || cols[j][row] % p == 0 {
                continue;
            }
            let factor = cols[j][row] * inv % p;
            for r in row..dim {
                cols[j][r] = (cols[j][r] + (p - factor) * cols[rank][r]) % p;
            }
        }
        rank += 1;
    }
    rank
}

fn mod_inverse(a: u64, p: u64) -> u64 {
    // Fermat; p is a small prime.
    let mut result = 1u64;
    let mut base = a % p;
    let mut exp = p - 2;
    while exp > 0 {
        if exp & 1 == 1 {
            result = result * base % p;
        }
        base = base * base % p;
        exp >>= 1;
    }
    result
}
