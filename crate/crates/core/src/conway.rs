//! Conway polynomials computed from their definition.
//!
//! The Conway polynomial C(p, m) is the least monic primitive polynomial of
//! degree m over F_p, under the word order that compares
//! ((-1)^(m-i) * a_i)_{i = m-1 .. 0} lexicographically, subject to norm
//! compatibility with C(p, d) for every proper divisor d of m.  Computing them
//! on demand avoids trusting a transcribed table; the degree-4 polynomial over
//! F_3 that the rest of the crate leans on is pinned by a test.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Dense coefficient vector over F_p, ascending degree, always trimmed.
type Poly = Vec<u64>;

fn trim(mut f: Poly) -> Poly {
    while f.last() == Some(&0) {
        f.pop();
    }
    f
}

fn poly_mul_mod(a: &Poly, b: &Poly, m: &Poly, p: u64) -> Poly {
    let mut prod = vec![0u64; a.len() + b.len()];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            prod[i + j] = (prod[i + j] + ai * bj) % p;
        }
    }
    poly_rem(prod, m, p)
}

fn poly_rem(mut f: Poly, m: &Poly, p: u64) -> Poly {
    let dm = m.len() - 1;
    // m is monic.
    while f.len() > dm {
        let lead = *f.last().unwrap() % p;
        let shift = f.len() - 1 - dm;
        if lead != 0 {
            for (i, &mi) in m.iter().enumerate() {
                let idx = shift + i;
                f[idx] = (f[idx] + (p - lead % p) * mi) % p;
            }
        }
        f.pop();
    }
    trim(f)
}

fn poly_pow_mod(base: &Poly, mut exp: u64, m: &Poly, p: u64) -> Poly {
    let mut result = vec![1];
    let mut acc = base.clone();
    while exp > 0 {
        if exp & 1 == 1 {
            result = poly_mul_mod(&result, &acc, m, p);
        }
        acc = poly_mul_mod(&acc, &acc, m, p);
        exp >>= 1;
    }
    result
}

fn poly_gcd(mut a: Poly, mut b: Poly, p: u64) -> Poly {
    while !b.is_empty() {
        let mut monic = b.clone();
        let lead_inv = mod_inv(*monic.last().unwrap(), p);
        for c in monic.iter_mut() {
            *c = *c * lead_inv % p;
        }
        let r = poly_rem(a, &monic, p);
        a = b;
        b = r;
    }
    a
}

fn mod_inv(a: u64, p: u64) -> u64 {
    // Fermat; p prime and a != 0 mod p.
    mod_pow(a % p, p - 2, p)
}

fn mod_pow(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1u64;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    r
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

pub fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// x^(p^k) mod f, by k successive p-th powers.
fn frobenius_power(f: &Poly, p: u64, k: u32) -> Poly {
    let mut g = vec![0, 1];
    for _ in 0..k {
        g = poly_pow_mod(&g, p, f, p);
    }
    g
}

fn is_irreducible(f: &Poly, p: u64) -> bool {
    let m = (f.len() - 1) as u32;
    if m == 0 {
        return false;
    }
    // x^(p^m) == x mod f; for m = 1 both sides reduce to a constant.
    let x_red = poly_rem(vec![0u64, 1], f, p);
    if frobenius_power(f, p, m) != x_red {
        return false;
    }
    for r in prime_factors(m as u64) {
        let mut g = frobenius_power(f, p, m / r as u32);
        // g - x
        if g.len() < 2 {
            g.resize(2, 0);
        }
        g[1] = (g[1] + p - 1) % p;
        let g = trim(g);
        let gcd = poly_gcd(f.clone(), g, p);
        if gcd.len() > 1 {
            return false;
        }
    }
    true
}

fn is_primitive(f: &Poly, p: u64) -> bool {
    let m = (f.len() - 1) as u32;
    if f[0] == 0 || !is_irreducible(f, p) {
        return false;
    }
    let order = p.pow(m) - 1;
    let x = vec![0u64, 1];
    for r in prime_factors(order) {
        let g = poly_pow_mod(&x, order / r, f, p);
        if g == vec![1] {
            return false;
        }
    }
    true
}

fn is_compatible(f: &Poly, p: u64, table: &HashMap<(u64, u32), Poly>) -> bool {
    let m = (f.len() - 1) as u32;
    let order = p.pow(m) - 1;
    for d in 1..m {
        if m % d != 0 {
            continue;
        }
        let sub = &table[&(p, d)];
        let beta = poly_pow_mod(&vec![0, 1], order / (p.pow(d) - 1), f, p);
        // evaluate sub at beta, mod f
        let mut acc: Poly = Vec::new();
        for &c in sub.iter().rev() {
            acc = poly_mul_mod(&acc, &beta, f, p);
            if c != 0 {
                if acc.is_empty() {
                    acc = vec![c];
                } else {
                    acc[0] = (acc[0] + c) % p;
                    acc = trim(acc);
                }
            }
        }
        if !acc.is_empty() {
            return false;
        }
    }
    true
}

/// Candidate polynomials of degree m in the Conway word order.
/// Word w_i = (-1)^(m-i) a_i for i = m-1 .. 0, compared lexicographically.
fn candidate_from_word(word: &[u64], m: u32, p: u64) -> Poly {
    let mut f = vec![0u64; m as usize + 1];
    f[m as usize] = 1;
    for (k, &w) in word.iter().enumerate() {
        let i = m as usize - 1 - k;
        let sign_flip = (m as usize - i) % 2 == 1;
        f[i] = if sign_flip { (p - w) % p } else { w };
    }
    f
}

fn compute(p: u64, m: u32, table: &mut HashMap<(u64, u32), Poly>) -> Poly {
    for d in 1..m {
        if m % d == 0 && !table.contains_key(&(p, d)) {
            let sub = compute(p, d, table);
            table.insert((p, d), sub);
        }
    }
    let mut word = vec![0u64; m as usize];
    loop {
        let f = candidate_from_word(&word, m, p);
        if is_primitive(&f, p) && is_compatible(&f, p, table) {
            return f;
        }
        // increment the word, least significant position last
        let mut k = m as usize;
        loop {
            if k == 0 {
                panic!("no primitive compatible polynomial of degree {m} over F_{p}");
            }
            k -= 1;
            word[k] += 1;
            if word[k] < p {
                break;
            }
            word[k] = 0;
        }
    }
}

/// Conway polynomial of degree `m` over F_p, ascending coefficients.
pub fn conway_polynomial(p: u64, m: u32) -> Vec<u64> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, u32), Poly>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut table = cache.lock().unwrap();
    if let Some(f) = table.get(&(p, m)) {
        return f.clone();
    }
    let f = compute(p, m, &mut table);
    table.insert((p, m), f.clone());
    f
}

/// Irreducibility check for a caller-supplied modulus.
pub fn check_irreducible(f: &[u64], p: u64) -> bool {
    is_irreducible(&f.to_vec(), p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_conway_values() {
        assert_eq!(conway_polynomial(3, 1), vec![1, 1]); // x + 1
        assert_eq!(conway_polynomial(3, 2), vec![2, 2, 1]); // x^2 + 2x + 2
        assert_eq!(conway_polynomial(3, 3), vec![1, 2, 0, 1]); // x^3 + 2x + 1
        assert_eq!(conway_polynomial(5, 1), vec![3, 1]); // x + 3
    }

    #[test]
    fn degree_four_over_f3() {
        // The polynomial the 3^4 searches are built on: x^4 + 2x^3 + 2.
        assert_eq!(conway_polynomial(3, 4), vec![2, 0, 0, 2, 1]);
    }

    #[test]
    fn conway_is_primitive_and_compatible() {
        for (p, m) in [(3u64, 4u32), (5, 2), (7, 2), (3, 6)] {
            let f = conway_polynomial(p, m);
            assert!(is_primitive(&f, p));
        }
    }

    #[test]
    fn factoring() {
        assert_eq!(prime_factors(80), vec![2, 5]);
        assert_eq!(prime_factors(26), vec![2, 13]);
        assert!(is_prime(29));
        assert!(!is_prime(25));
    }
}
