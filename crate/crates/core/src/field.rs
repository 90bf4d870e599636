//! Finite field towers F_p ⊆ F_q ⊆ F_{q^n} in odd characteristic.
//!
//! Elements are stored by discrete logarithm with respect to a fixed
//! multiplicative generator α (a root of the defining polynomial, which is
//! required to be primitive).  Multiplication is index addition; addition goes
//! through a Zech logarithm table.  This caps fields at a few million
//! elements, which covers every parameter set the searches accept.

use crate::conway::{check_irreducible, conway_polynomial, is_prime};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Largest supported field: tables are three u32 vectors of this length.
pub const MAX_FIELD_SIZE: u64 = 1 << 22;

const ZERO_REPR: u32 = u32::MAX;

/// An element of a fixed [`FieldTower`], stored as a discrete log.
///
/// The value is meaningless without the tower that produced it; all arithmetic
/// goes through tower methods.  `Ord` sorts zero first, then by log, which is
/// the canonical element order used everywhere (point normalization, scan
/// order, report output).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldElement(u32);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(ZERO_REPR);

    pub fn is_zero(self) -> bool {
        self.0 == ZERO_REPR
    }

    /// Discrete log of a nonzero element.
    pub fn log(self) -> Option<u32> {
        (!self.is_zero()).then_some(self.0)
    }

    pub fn from_log(k: u32) -> FieldElement {
        debug_assert!(k != ZERO_REPR);
        FieldElement(k)
    }

    /// Sort key: 0 for zero, log + 1 otherwise.
    pub fn key(self) -> u32 {
        if self.is_zero() {
            0
        } else {
            self.0 + 1
        }
    }
}

impl Ord for FieldElement {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

impl PartialOrd for FieldElement {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            write!(f, "0")
        } else if self.0 == 0 {
            write!(f, "1")
        } else {
            write!(f, "a^{}", self.0)
        }
    }
}

/// The tower F_p ⊆ F_q ⊆ F_{q^n}, q = p^e, with full log/Zech tables.
pub struct FieldTower {
    pub p: u64,
    pub e: u32,
    pub n: u32,
    /// q = p^e
    pub q: u64,
    /// q^n, the size of the big field
    pub size: u64,
    /// Defining polynomial of F_{q^n} over F_p, ascending, degree e*n, monic.
    pub modulus_big: Vec<u64>,
    /// Defining polynomial of the intermediate field F_q over F_p.
    pub modulus_small: Vec<u64>,
    exp: Vec<u32>,
    dlog: Vec<u32>,
    zech: Vec<u32>,
    /// log(-1) = (q^n - 1) / 2
    half: u32,
    /// (q^n - 1) / (q - 1): F_q* is generated by alpha^step.
    pub subfield_step: u32,
}

impl fmt::Debug for FieldTower {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FieldTower(p={}, e={}, n={})", self.p, self.e, self.n)
    }
}

impl FieldTower {
    /// Build the tower, using the Conway polynomial of degree e*n over F_p
    /// unless `modulus` overrides it.  An override must be monic, irreducible
    /// and primitive (x must generate the multiplicative group).
    pub fn new(p: u64, e: u32, n: u32, modulus: Option<Vec<u64>>) -> Result<FieldTower> {
        if p < 3 || p % 2 == 0 || !is_prime(p) {
            return Err(Error::BadCharacteristic(p));
        }
        let deg = e
            .checked_mul(n)
            .filter(|&d| d >= 1)
            .ok_or(Error::WrongDegree { got: 0, want: 1 })? as usize;
        let size = p
            .checked_pow(deg as u32)
            .filter(|&s| s <= MAX_FIELD_SIZE)
            .ok_or(Error::FieldTooLarge(u64::MAX, MAX_FIELD_SIZE))?;
        if size > MAX_FIELD_SIZE {
            return Err(Error::FieldTooLarge(size, MAX_FIELD_SIZE));
        }
        let modulus_big = match modulus {
            Some(m) => {
                let m: Vec<u64> = m.into_iter().map(|c| c % p).collect();
                if m.len() != deg + 1 || m[deg] != 1 {
                    return Err(Error::WrongDegree {
                        got: m.len().saturating_sub(1),
                        want: deg,
                    });
                }
                if !check_irreducible(&m, p) {
                    return Err(Error::ReducibleModulus(p));
                }
                m
            }
            None => conway_polynomial(p, deg as u32),
        };
        let modulus_small = conway_polynomial(p, e);
        let q = p.pow(e);

        let mut tower = FieldTower {
            p,
            e,
            n,
            q,
            size,
            modulus_big,
            modulus_small,
            exp: Vec::new(),
            dlog: Vec::new(),
            zech: Vec::new(),
            half: ((size - 1) / 2) as u32,
            subfield_step: ((size - 1) / (q - 1)) as u32,
        };
        tower.build_tables()?;
        Ok(tower)
    }

    fn build_tables(&mut self) -> Result<()> {
        let p = self.p;
        let deg = (self.e * self.n) as usize;
        let size = self.size as usize;
        let ord = size - 1;

        self.exp = vec![0; ord];
        self.dlog = vec![ZERO_REPR; size];

        // Walk alpha^i as coefficient vectors; encode each as a base-p code.
        let mut cur = vec![0u64; deg];
        cur[0] = 1;
        for i in 0..ord {
            let code = encode(&cur, p);
            if self.dlog[code as usize] != ZERO_REPR {
                // x has order < size - 1: the modulus is not primitive.
                return Err(Error::NotPrimitive);
            }
            self.exp[i] = code;
            self.dlog[code as usize] = i as u32;
            mul_by_x(&mut cur, &self.modulus_big, p);
        }
        // After size-1 steps we must be back at 1.
        if cur.iter().skip(1).any(|&c| c != 0) || cur[0] != 1 {
            return Err(Error::NotPrimitive);
        }

        // Zech table: zech[k] = log(1 + alpha^k), sentinel at alpha^k = -1.
        self.zech = vec![ZERO_REPR; ord];
        for k in 0..ord {
            let code = self.exp[k];
            let plus_one = bump_constant(code, p);
            if plus_one == 0 {
                self.zech[k] = ZERO_REPR;
            } else {
                self.zech[k] = self.dlog[plus_one as usize];
            }
        }
        Ok(())
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement::ZERO
    }

    pub fn one(&self) -> FieldElement {
        FieldElement(0)
    }

    /// The generator alpha (a root of the big modulus).
    pub fn alpha(&self) -> FieldElement {
        FieldElement(1 % (self.size as u32 - 1))
    }

    pub fn order(&self) -> u64 {
        self.size - 1
    }

    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        if a.is_zero() || b.is_zero() {
            return FieldElement::ZERO;
        }
        let ord = self.size as u32 - 1;
        let mut s = a.0 + b.0;
        if s >= ord {
            s -= ord;
        }
        FieldElement(s)
    }

    pub fn inv(&self, a: FieldElement) -> FieldElement {
        assert!(!a.is_zero(), "division by zero");
        let ord = self.size as u32 - 1;
        FieldElement(if a.0 == 0 { 0 } else { ord - a.0 })
    }

    pub fn div(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        self.mul(a, self.inv(b))
    }

    pub fn neg(&self, a: FieldElement) -> FieldElement {
        if a.is_zero() {
            return a;
        }
        let ord = self.size as u32 - 1;
        let mut s = a.0 + self.half;
        if s >= ord {
            s -= ord;
        }
        FieldElement(s)
    }

    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        if a.is_zero() {
            return b;
        }
        if b.is_zero() {
            return a;
        }
        let ord = self.size as u32 - 1;
        // a + b = a * (1 + b/a)
        let delta = if b.0 >= a.0 { b.0 - a.0 } else { b.0 + ord - a.0 };
        let z = self.zech[delta as usize];
        if z == ZERO_REPR {
            return FieldElement::ZERO;
        }
        let mut s = a.0 + z;
        if s >= ord {
            s -= ord;
        }
        FieldElement(s)
    }

    pub fn sub(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        self.add(a, self.neg(b))
    }

    pub fn pow(&self, a: FieldElement, k: u64) -> FieldElement {
        if a.is_zero() {
            return if k == 0 { self.one() } else { a };
        }
        let ord = self.size - 1;
        FieldElement(((a.0 as u64 * (k % ord)) % ord) as u32)
    }

    /// Squares include zero; nonzero squares are the even logs.
    pub fn is_square(&self, a: FieldElement) -> bool {
        a.is_zero() || a.0 % 2 == 0
    }

    /// Strictly a nonzero non-square.
    pub fn is_nonsquare(&self, a: FieldElement) -> bool {
        !a.is_zero() && a.0 % 2 == 1
    }

    pub fn sqrt(&self, a: FieldElement) -> Option<FieldElement> {
        if a.is_zero() {
            return Some(a);
        }
        if a.0 % 2 == 1 {
            return None;
        }
        Some(FieldElement(a.0 / 2))
    }

    /// q-power Frobenius iterated `i` times: a ↦ a^(q^i).
    pub fn frobenius_q(&self, a: FieldElement, i: u32) -> FieldElement {
        match a.log() {
            None => a,
            Some(k) => {
                let ord = self.size - 1;
                let mut f = 1u64;
                for _ in 0..(i % self.n) {
                    f = f * self.q % ord;
                }
                FieldElement((k as u64 * f % ord) as u32)
            }
        }
    }

    /// p-power Frobenius iterated `j` times: a ↦ a^(p^j).
    pub fn frobenius_p(&self, a: FieldElement, j: u32) -> FieldElement {
        match a.log() {
            None => a,
            Some(k) => {
                let ord = self.size - 1;
                let mut f = 1u64;
                for _ in 0..(j % (self.e * self.n)) {
                    f = f * self.p % ord;
                }
                FieldElement((k as u64 * f % ord) as u32)
            }
        }
    }

    /// True when the element lies in the embedded F_q (fixed by x ↦ x^q).
    pub fn in_subfield(&self, a: FieldElement) -> bool {
        match a.log() {
            None => true,
            Some(k) => k % self.subfield_step == 0,
        }
    }

    /// Embed an integer 0..p as an element of the prime field.
    pub fn from_int(&self, c: u64) -> FieldElement {
        let c = c % self.p;
        if c == 0 {
            return FieldElement::ZERO;
        }
        FieldElement(self.dlog[c as usize])
    }

    /// Coefficient vector of the element over F_p in the power basis of x.
    pub fn poly_coeffs(&self, a: FieldElement) -> Vec<u64> {
        let deg = (self.e * self.n) as usize;
        match a.log() {
            None => vec![0; deg],
            Some(k) => decode(self.exp[k as usize], self.p, deg),
        }
    }

    /// Element from an F_p coefficient vector (ascending powers of x).
    pub fn from_poly_coeffs(&self, coeffs: &[u64]) -> FieldElement {
        let deg = (self.e * self.n) as usize;
        assert!(coeffs.len() <= deg, "coefficient vector too long");
        let mut v = coeffs.to_vec();
        v.resize(deg, 0);
        for c in v.iter_mut() {
            *c %= self.p;
        }
        let code = encode(&v, self.p);
        if code == 0 {
            FieldElement::ZERO
        } else {
            FieldElement(self.dlog[code as usize])
        }
    }

    /// All elements in canonical order: zero, then ascending log.
    pub fn elements(&self) -> impl Iterator<Item = FieldElement> + '_ {
        std::iter::once(FieldElement::ZERO).chain((0..self.size as u32 - 1).map(FieldElement))
    }

    /// The embedded subfield F_q in canonical order.
    pub fn subfield_elements(&self) -> Vec<FieldElement> {
        let mut out = vec![FieldElement::ZERO];
        out.extend(self.subfield_star());
        out
    }

    /// Nonzero elements of the embedded F_q, ascending log.
    pub fn subfield_star(&self) -> Vec<FieldElement> {
        (0..self.q as u32 - 1)
            .map(|t| FieldElement(t * self.subfield_step))
            .collect()
    }

    /// Transversal of F_{q^n}* / F_q*, one representative per coset, sorted by
    /// log.  For prime q the representative has its lowest-degree nonzero
    /// coefficient normalized to 1; otherwise it is the coset member of least
    /// log.  Either way the choice is deterministic.
    pub fn quotient_transversal(&self) -> Vec<FieldElement> {
        let r = self.subfield_step;
        let mut reps: Vec<FieldElement> = (0..r).map(|c| self.coset_representative(c)).collect();
        reps.sort();
        reps
    }

    /// Representative of the coset alpha^c * F_q*, c in 0..subfield_step.
    pub fn coset_representative(&self, c: u32) -> FieldElement {
        debug_assert!(c < self.subfield_step);
        if self.e != 1 {
            return FieldElement(c);
        }
        // Scale by an element of F_p* so the lowest nonzero coefficient is 1.
        let deg = (self.e * self.n) as usize;
        let coeffs = decode(self.exp[c as usize], self.p, deg);
        let low = coeffs.iter().copied().find(|&c| c != 0).unwrap();
        let scale = self.from_int(low);
        self.div(FieldElement(c), scale)
    }

    /// Canonical coset representative of an arbitrary nonzero element.
    pub fn normalize_mod_subfield(&self, a: FieldElement) -> FieldElement {
        let k = a.log().expect("zero has no coset");
        self.coset_representative(k % self.subfield_step)
    }

    /// Evaluate a q-linearized polynomial sum c_i * t^(q^(k_i)).
    pub fn linearized_eval(&self, terms: &[(FieldElement, u32)], t: FieldElement) -> FieldElement {
        let mut acc = FieldElement::ZERO;
        for &(c, k) in terms {
            acc = self.add(acc, self.mul(c, self.frobenius_q(t, k)));
        }
        acc
    }
}

fn encode(coeffs: &[u64], p: u64) -> u32 {
    let mut code = 0u64;
    for &c in coeffs.iter().rev() {
        code = code * p + c;
    }
    code as u32
}

fn decode(mut code: u32, p: u64, deg: usize) -> Vec<u64> {
    let mut out = vec![0u64; deg];
    for slot in out.iter_mut() {
        *slot = code as u64 % p;
        code /= p as u32;
    }
    out
}

/// Multiply a coefficient vector by x, reducing by the monic modulus.
fn mul_by_x(cur: &mut Vec<u64>, modulus: &[u64], p: u64) {
    let deg = cur.len();
    let lead = cur[deg - 1];
    for i in (1..deg).rev() {
        cur[i] = cur[i - 1];
    }
    cur[0] = 0;
    if lead != 0 {
        for i in 0..deg {
            cur[i] = (cur[i] + (p - lead) * modulus[i]) % p;
        }
    }
}

/// Add 1: bump the constant coefficient mod p.
fn bump_constant(code: u32, p: u64) -> u32 {
    let d0 = code as u64 % p;
    (code as u64 - d0 + (d0 + 1) % p) as u32
}
