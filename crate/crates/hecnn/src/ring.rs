//! Arithmetic in the negacyclic ring R_Q = Z_Q[X]/(X^N + 1).
//!
//! Polynomials are stored as length-N residue vectors. Multiplication is
//! schoolbook O(N^2) with the X^N = -1 wrap folded in; no NTT is used, so the
//! moduli do not have to be NTT-friendly primes. The default moduli are powers
//! of two, which makes reduction a mask and rescaling a shift-with-rounding.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ring and noise parameters shared by every polynomial of a session.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingParams {
    /// Ring degree N (power of two for crypto use).
    pub n: usize,
    /// Ciphertext modulus Q.
    pub q: u128,
    /// Post-rescale modulus Q' with Q = delta * Q'.
    pub qp: u128,
    /// Fixed-point encoding scale.
    pub delta: u128,
    /// Std deviation of the encryption noise.
    pub sigma: f64,
    /// Hamming weight of the secret key.
    pub h: usize,
}

impl RingParams {
    /// Checked constructor for cryptographic use.
    pub fn new(n: usize, q: u128, qp: u128, delta: u128, sigma: f64, h: usize) -> Result<Self> {
        if !n.is_power_of_two() || n < 8 {
            return Err(Error::Params(format!("N must be a power of two >= 8, got {n}")));
        }
        if qp.checked_mul(delta) != Some(q) {
            return Err(Error::Params("Q must equal delta * Q' exactly".into()));
        }
        if sigma <= 0.0 {
            return Err(Error::Params("sigma must be positive".into()));
        }
        if h == 0 || h > n {
            return Err(Error::Params(format!("h must satisfy 0 < h <= N, got {h}")));
        }
        Ok(Self { n, q, qp, delta, sigma, h })
    }

    /// Unchecked ring for exact-algebra use (integer-mode FC checks, small
    /// symbolic tests). Any N >= 1 and any modulus are accepted; such params
    /// must not be fed to key generation.
    pub fn raw(n: usize, q: u128) -> Self {
        Self { n, q, qp: q, delta: 1, sigma: 1.0, h: 1 }
    }

    /// Paper parameters: N = 2^13, Q = 2^104, Q' = 2^55, delta = 2^49.
    pub fn paper_8k() -> Self {
        Self::new(1 << 13, 1u128 << 104, 1u128 << 55, 1u128 << 49, 3.2, 64).unwrap()
    }

    /// Paper parameters at the large simulation degree N = 2^16.
    pub fn paper_64k() -> Self {
        Self::new(1 << 16, 1u128 << 104, 1u128 << 55, 1u128 << 49, 3.2, 64).unwrap()
    }

    /// Paper moduli with a smaller ring degree, for exhaustive protocol tests.
    pub fn paper_with_n(n: usize) -> Self {
        let h = 64.min(n / 2).max(1);
        Self::new(n, 1u128 << 104, 1u128 << 55, 1u128 << 49, 3.2, h).unwrap()
    }

    /// Desk-scale parameters: N = 2^10, Q = 2^60, delta = 2^25, Q' = 2^35.
    ///
    /// Q keeps its 60 bits but delta is 2^25 rather than 2^30: one multiply
    /// level puts messages at delta^2 scale, and delta^2 = 2^60 would leave
    /// no signed headroom under Q = 2^60.
    pub fn desk() -> Self {
        Self::new(1 << 10, 1u128 << 60, 1u128 << 35, 1u128 << 25, 3.2, 64).unwrap()
    }

    pub fn modulus(&self, tag: ModulusTag) -> u128 {
        match tag {
            ModulusTag::Q => self.q,
            ModulusTag::Qp => self.qp,
        }
    }
}

/// Which modulus the residues of a polynomial currently live under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModulusTag {
    Q,
    Qp,
}

/// Number of bytes of a fixed-width serialized residue under `modulus`.
pub fn residue_width(modulus: u128) -> usize {
    let bits = 128 - (modulus - 1).leading_zeros() as usize;
    (bits + 7) / 8
}

#[inline]
fn add_mod(a: u128, b: u128, m: u128) -> u128 {
    // Residues are < m <= 2^104 < 2^127, so the sum cannot overflow u128.
    let s = a + b;
    if s >= m { s - m } else { s }
}

#[inline]
fn sub_mod(a: u128, b: u128, m: u128) -> u128 {
    if a >= b { a - b } else { a + m - b }
}

#[inline]
fn mul_mod(a: u128, b: u128, m: u128) -> u128 {
    if m.is_power_of_two() {
        a.wrapping_mul(b) & (m - 1)
    } else {
        // Generic moduli are only used at test scale; keep operands small
        // enough that the product fits u128.
        debug_assert!(m <= 1 << 64);
        (a % m) * (b % m) % m
    }
}

/// Map a signed integer into [0, m).
#[inline]
pub fn signed_to_residue(x: i128, m: u128) -> u128 {
    if x >= 0 {
        (x as u128) % m
    } else {
        let r = ((-x) as u128) % m;
        if r == 0 { 0 } else { m - r }
    }
}

/// Center a residue into (-m/2, m/2].
#[inline]
pub fn residue_to_signed(r: u128, m: u128) -> i128 {
    if r > m / 2 {
        -((m - r) as i128)
    } else {
        r as i128
    }
}

/// Divide by `d` rounding half to even, exact for signed integers.
pub fn div_round_half_even(x: i128, d: i128) -> i128 {
    debug_assert!(d > 0);
    let q = x.div_euclid(d);
    let r = x.rem_euclid(d); // 0 <= r < d
    let twice = 2 * r;
    if twice > d || (twice == d && q % 2 != 0) {
        q + 1
    } else {
        q
    }
}

/// A polynomial in R = Z_m[X]/(X^N + 1) with residues under the tagged modulus.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    pub params: RingParams,
    pub tag: ModulusTag,
    pub coeffs: Vec<u128>,
}

impl Poly {
    pub fn zero(params: RingParams, tag: ModulusTag) -> Self {
        Self { params, tag, coeffs: vec![0; params.n] }
    }

    pub fn from_coeffs(params: RingParams, tag: ModulusTag, coeffs: Vec<u128>) -> Result<Self> {
        if coeffs.len() != params.n {
            return Err(Error::Params(format!(
                "coefficient vector length {} != N = {}",
                coeffs.len(),
                params.n
            )));
        }
        let m = params.modulus(tag);
        if coeffs.iter().any(|&c| c >= m) {
            return Err(Error::Params("residue out of range for active modulus".into()));
        }
        Ok(Self { params, tag, coeffs })
    }

    pub fn from_signed(params: RingParams, tag: ModulusTag, vals: &[i128]) -> Result<Self> {
        if vals.len() != params.n {
            return Err(Error::Params("signed vector length != N".into()));
        }
        let m = params.modulus(tag);
        Ok(Self {
            params,
            tag,
            coeffs: vals.iter().map(|&v| signed_to_residue(v, m)).collect(),
        })
    }

    /// The monomial c * X^e (e may be any signed exponent; X^N = -1).
    pub fn monomial(params: RingParams, tag: ModulusTag, e: i64, c: i128) -> Self {
        let mut p = Self::zero(params, tag);
        p.add_term(e, c);
        p
    }

    pub fn modulus(&self) -> u128 {
        self.params.modulus(self.tag)
    }

    /// Add `value * X^exponent` with negacyclic reduction of the exponent.
    ///
    /// This is the primitive every packing scheme builds on: formal exponents
    /// (possibly negative) reduce mod 2N, and exponents in [N, 2N) flip sign.
    pub fn add_term(&mut self, exponent: i64, value: i128) {
        let n = self.params.n as i64;
        let m = self.modulus();
        let mut e = exponent.rem_euclid(2 * n);
        let mut v = value;
        if e >= n {
            e -= n;
            v = -v;
        }
        let idx = e as usize;
        self.coeffs[idx] = add_mod(self.coeffs[idx], signed_to_residue(v, m), m);
    }

    pub fn centered(&self) -> Vec<i128> {
        let m = self.modulus();
        self.coeffs.iter().map(|&c| residue_to_signed(c, m)).collect()
    }

    fn check_compat(&self, other: &Poly) -> Result<()> {
        if self.params != other.params || self.tag != other.tag {
            return Err(Error::Params("mismatched ring params or modulus tag".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Poly) -> Result<Poly> {
        self.check_compat(other)?;
        let m = self.modulus();
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| add_mod(a, b, m))
            .collect();
        Ok(Poly { params: self.params, tag: self.tag, coeffs })
    }

    pub fn sub(&self, other: &Poly) -> Result<Poly> {
        self.check_compat(other)?;
        let m = self.modulus();
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| sub_mod(a, b, m))
            .collect();
        Ok(Poly { params: self.params, tag: self.tag, coeffs })
    }

    pub fn neg(&self) -> Poly {
        let m = self.modulus();
        let coeffs = self.coeffs.iter().map(|&a| sub_mod(0, a, m)).collect();
        Poly { params: self.params, tag: self.tag, coeffs }
    }

    /// Schoolbook negacyclic product:
    /// c_k = sum_{i+j=k} a_i b_j - sum_{i+j=k+N} a_i b_j (mod m).
    pub fn negacyclic_mul(&self, other: &Poly) -> Result<Poly> {
        self.check_compat(other)?;
        let n = self.params.n;
        let m = self.modulus();
        let mut out = vec![0u128; n];
        for i in 0..n {
            let a = self.coeffs[i];
            if a == 0 {
                continue;
            }
            for j in 0..n {
                let b = other.coeffs[j];
                if b == 0 {
                    continue;
                }
                let p = mul_mod(a, b, m);
                let k = i + j;
                if k < n {
                    out[k] = add_mod(out[k], p, m);
                } else {
                    out[k - n] = sub_mod(out[k - n], p, m);
                }
            }
        }
        Ok(Poly { params: self.params, tag: self.tag, coeffs: out })
    }

    /// Compute only the requested coefficients of the negacyclic product.
    ///
    /// Each requested coefficient costs N scalar multiplications; callers that
    /// meter cost account |indices| product coefficients and |indices| * N
    /// scalar multiplications.
    pub fn negacyclic_mul_partial(&self, other: &Poly, indices: &[usize]) -> Result<Vec<u128>> {
        self.check_compat(other)?;
        let n = self.params.n;
        let m = self.modulus();
        let mut out = Vec::with_capacity(indices.len());
        for &k in indices {
            if k >= n {
                return Err(Error::Params(format!("coefficient index {k} out of range")));
            }
            let mut acc = 0u128;
            for i in 0..n {
                let a = self.coeffs[i];
                if a == 0 {
                    continue;
                }
                // b index j with i + j = k (direct) or i + j = k + N (wrapped).
                let p = if i <= k {
                    mul_mod(a, other.coeffs[k - i], m)
                } else {
                    sub_mod(0, mul_mod(a, other.coeffs[k + n - i], m), m)
                };
                acc = add_mod(acc, p, m);
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// Substitute X -> X^s on the stored representation: the coefficient at
    /// slot j moves to exponent s * j, reduced negacyclically.
    pub fn embed_power(&self, s: u64) -> Result<Poly> {
        if s == 0 {
            return Err(Error::Params("power substitution requires s >= 1".into()));
        }
        let mut out = Poly::zero(self.params, self.tag);
        let m = self.modulus();
        for (j, &c) in self.coeffs.iter().enumerate() {
            if c == 0 {
                continue;
            }
            out.add_term((s as i64) * (j as i64), residue_to_signed(c, m));
        }
        Ok(out)
    }

    /// Multiply by X^t for any signed t, with X^{-m} = -X^{N-m}.
    pub fn monomial_shift(&self, t: i64) -> Poly {
        let mut out = Poly::zero(self.params, self.tag);
        let m = self.modulus();
        for (j, &c) in self.coeffs.iter().enumerate() {
            if c == 0 {
                continue;
            }
            out.add_term(j as i64 + t, residue_to_signed(c, m));
        }
        out
    }

    /// Scale coefficients down by delta with round-half-even, moving the
    /// residues from modulus Q to Q'.
    pub fn rescale(&self) -> Result<Poly> {
        if self.tag != ModulusTag::Q {
            return Err(Error::State("polynomial is already rescaled".into()));
        }
        let p = self.params;
        let qp = p.qp;
        let coeffs = self
            .coeffs
            .iter()
            .map(|&c| {
                let v = residue_to_signed(c, p.q);
                signed_to_residue(div_round_half_even(v, p.delta as i128), qp)
            })
            .collect();
        Ok(Poly { params: p, tag: ModulusTag::Qp, coeffs })
    }

    /// Fixed-width little-endian serialization, residue_width(modulus) bytes
    /// per coefficient in index order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let w = residue_width(self.modulus());
        let mut out = Vec::with_capacity(self.params.n * w);
        for &c in &self.coeffs {
            out.extend_from_slice(&c.to_le_bytes()[..w]);
        }
        out
    }

    pub fn from_bytes(params: RingParams, tag: ModulusTag, bytes: &[u8]) -> Result<Poly> {
        let m = params.modulus(tag);
        let w = residue_width(m);
        if bytes.len() != params.n * w {
            return Err(Error::Frame(format!(
                "polynomial payload has {} bytes, expected {}",
                bytes.len(),
                params.n * w
            )));
        }
        let mut coeffs = Vec::with_capacity(params.n);
        for chunk in bytes.chunks_exact(w) {
            let mut buf = [0u8; 16];
            buf[..w].copy_from_slice(chunk);
            let c = u128::from_le_bytes(buf);
            if c >= m {
                return Err(Error::Frame("residue out of range".into()));
            }
            coeffs.push(c);
        }
        Ok(Poly { params, tag, coeffs })
    }
}

/// Rounded discrete Gaussian with the given std deviation, mod Q.
pub fn sample_gaussian<R: Rng>(params: RingParams, stddev: f64, rng: &mut R) -> Result<Poly> {
    if stddev <= 0.0 {
        return Err(Error::Params("stddev must be positive".into()));
    }
    let dist = Normal::new(0.0, stddev).map_err(|e| Error::Params(e.to_string()))?;
    let vals: Vec<i128> = (0..params.n)
        .map(|_| dist.sample(rng).round_ties_even() as i128)
        .collect();
    Poly::from_signed(params, ModulusTag::Q, &vals)
}

/// Encryption randomness v(X): 0 with probability 1/2, +-1 with 1/4 each.
pub fn sample_ternary_v<R: Rng>(params: RingParams, rng: &mut R) -> Poly {
    let vals: Vec<i128> = (0..params.n)
        .map(|_| match rng.gen_range(0u8..4) {
            0 | 1 => 0,
            2 => 1,
            _ => -1,
        })
        .collect();
    Poly::from_signed(params, ModulusTag::Q, &vals).unwrap()
}

/// Secret key polynomial with exactly h nonzero +-1 coefficients.
pub fn sample_sparse_secret<R: Rng>(params: RingParams, rng: &mut R) -> Poly {
    let mut vals = vec![0i128; params.n];
    let positions = rand::seq::index::sample(rng, params.n, params.h);
    for idx in positions.iter() {
        vals[idx] = if rng.gen::<bool>() { 1 } else { -1 };
    }
    Poly::from_signed(params, ModulusTag::Q, &vals).unwrap()
}

/// Uniform polynomial over [0, modulus).
pub fn sample_uniform<R: Rng>(params: RingParams, tag: ModulusTag, rng: &mut R) -> Poly {
    let m = params.modulus(tag);
    let coeffs = (0..params.n).map(|_| rng.gen_range(0..m)).collect();
    Poly { params, tag, coeffs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn small(n: usize, q: u128) -> RingParams {
        RingParams::raw(n, q)
    }

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    fn random_poly(params: RingParams, r: &mut ChaCha20Rng) -> Poly {
        sample_uniform(params, ModulusTag::Q, r)
    }

    /// Brute-force oracle with explicit sign handling, written against the
    /// defining formula rather than the production loop structure.
    fn negacyclic_oracle(a: &Poly, b: &Poly) -> Vec<u128> {
        let n = a.params.n;
        let m = a.modulus();
        let mut out = vec![0u128; n];
        for k in 0..n {
            let mut acc: i128 = 0;
            for i in 0..n {
                for j in 0..n {
                    if i + j == k {
                        acc += residue_to_signed(mul_mod(a.coeffs[i], b.coeffs[j], m), m);
                    } else if i + j == k + n {
                        acc -= residue_to_signed(mul_mod(a.coeffs[i], b.coeffs[j], m), m);
                    }
                    acc = acc.rem_euclid(m as i128);
                }
            }
            out[k] = acc as u128;
        }
        out
    }

    #[test]
    fn add_identity_and_wraparound() {
        let p = small(16, 1 << 40);
        let mut r = rng(1);
        let a = random_poly(p, &mut r);
        let zero = Poly::zero(p, ModulusTag::Q);
        assert_eq!(a.add(&zero).unwrap(), a);

        let m = p.q;
        let x = Poly::from_coeffs(p, ModulusTag::Q, vec![m - 1; 16]).unwrap();
        let one = Poly::from_coeffs(p, ModulusTag::Q, vec![1; 16]).unwrap();
        assert_eq!(x.add(&one).unwrap().coeffs, vec![0; 16]);
    }

    #[test]
    fn add_matches_wide_integer_oracle() {
        let p = small(16, (1 << 61) - 1);
        let mut r = rng(2);
        for _ in 0..50 {
            let a = random_poly(p, &mut r);
            let b = random_poly(p, &mut r);
            let c = a.add(&b).unwrap();
            for i in 0..16 {
                assert_eq!(c.coeffs[i], (a.coeffs[i] + b.coeffs[i]) % p.q);
            }
        }
    }

    #[test]
    fn mul_identity_and_negacyclic_wrap() {
        let p = small(16, 1 << 40);
        let mut r = rng(3);
        let a = random_poly(p, &mut r);
        let one = Poly::monomial(p, ModulusTag::Q, 0, 1);
        assert_eq!(a.negacyclic_mul(&one).unwrap(), a);

        // X^{N-1} * X = X^N = -1
        let xn1 = Poly::monomial(p, ModulusTag::Q, 15, 1);
        let x = Poly::monomial(p, ModulusTag::Q, 1, 1);
        let prod = xn1.negacyclic_mul(&x).unwrap();
        assert_eq!(prod.coeffs[0], p.q - 1);
        assert!(prod.coeffs[1..].iter().all(|&c| c == 0));
    }

    #[test]
    fn mul_matches_bruteforce_n8_q97() {
        let p = small(8, 97);
        let mut r = rng(4);
        for _ in 0..50 {
            let a = random_poly(p, &mut r);
            let b = random_poly(p, &mut r);
            assert_eq!(a.negacyclic_mul(&b).unwrap().coeffs, negacyclic_oracle(&a, &b));
        }
    }

    #[test]
    fn partial_mul_restriction_and_identity() {
        let p = small(32, 1 << 30);
        let mut r = rng(5);
        let a = random_poly(p, &mut r);
        let b = random_poly(p, &mut r);
        let full = a.negacyclic_mul(&b).unwrap();

        let all: Vec<usize> = (0..32).collect();
        assert_eq!(a.negacyclic_mul_partial(&b, &all).unwrap(), full.coeffs);

        let one = Poly::monomial(p, ModulusTag::Q, 0, 1);
        assert_eq!(one.negacyclic_mul_partial(&b, &[0]).unwrap(), vec![b.coeffs[0]]);

        // valid-slot style strided index set
        let stride: Vec<usize> = (0..8).map(|k| k * 4 + 2).collect();
        let got = a.negacyclic_mul_partial(&b, &stride).unwrap();
        let want: Vec<u128> = stride.iter().map(|&k| full.coeffs[k]).collect();
        assert_eq!(got, want);

        assert!(a.negacyclic_mul_partial(&b, &[32]).is_err());
    }

    #[test]
    fn embed_power_trivial_cases() {
        let p = small(16, 1 << 30);
        let mut r = rng(6);
        let a = random_poly(p, &mut r);
        assert_eq!(a.embed_power(1).unwrap(), a);

        let x = Poly::monomial(p, ModulusTag::Q, 1, 1);
        let e = x.embed_power(16).unwrap();
        assert_eq!(e.coeffs[0], p.q - 1);
        assert!(e.coeffs[1..].iter().all(|&c| c == 0));
    }

    #[test]
    fn embed_power_matches_per_term_reduction() {
        let p = small(16, 1 << 30);
        let mut r = rng(7);
        let a = random_poly(p, &mut r);
        let got = a.embed_power(4).unwrap();
        let mut want = Poly::zero(p, ModulusTag::Q);
        for j in 0..16usize {
            let mut e = (4 * j) % 32;
            let mut v = residue_to_signed(a.coeffs[j], p.q);
            if e >= 16 {
                e -= 16;
                v = -v;
            }
            want.add_term(e as i64, v);
        }
        assert_eq!(got, want);
    }

    #[test]
    fn embed_power_agrees_at_2nth_root_of_unity() {
        // At any point z with z^N = -1 the reduced representation evaluates
        // identically to the formal substitution X -> X^s.
        let n = 8usize;
        let p = small(n, 1 << 20);
        let mut r = rng(8);
        for s in 1..=6u64 {
            let a = {
                let vals: Vec<i128> = (0..n).map(|_| r.gen_range(-5i128..=5)).collect();
                Poly::from_signed(p, ModulusTag::Q, &vals).unwrap()
            };
            let e = a.embed_power(s).unwrap();
            let theta = std::f64::consts::PI / n as f64; // primitive 2N-th root angle
            let eval = |poly: &Poly, mult: f64| -> (f64, f64) {
                let mut re = 0.0;
                let mut im = 0.0;
                for (j, v) in poly.centered().iter().enumerate() {
                    let ang = theta * mult * j as f64;
                    re += *v as f64 * ang.cos();
                    im += *v as f64 * ang.sin();
                }
                (re, im)
            };
            let (r1, i1) = eval(&e, 1.0);
            let (r2, i2) = eval(&a, s as f64);
            assert!((r1 - r2).abs() < 1e-6 && (i1 - i2).abs() < 1e-6, "s = {s}");
        }
    }

    #[test]
    fn monomial_shift_examples() {
        let p = small(16, 1 << 30);
        let mut r = rng(9);
        let a = random_poly(p, &mut r);
        assert_eq!(a.monomial_shift(0), a);

        let one = Poly::monomial(p, ModulusTag::Q, 0, 1);
        let shifted = one.monomial_shift(-1);
        assert_eq!(shifted.coeffs[15], p.q - 1);
        assert!(shifted.coeffs[..15].iter().all(|&c| c == 0));
    }

    #[test]
    fn rescale_examples() {
        let p = RingParams::new(8, 1 << 40, 1 << 20, 1 << 20, 3.2, 4).unwrap();
        let zero = Poly::zero(p, ModulusTag::Q);
        assert_eq!(zero.rescale().unwrap().coeffs, vec![0; 8]);

        let d = p.delta as i128;
        let a = Poly::from_signed(p, ModulusTag::Q, &[7 * d, -7 * d, 0, 0, 0, 0, 0, 0]).unwrap();
        let r = a.rescale().unwrap();
        assert_eq!(r.centered()[0], 7);
        assert_eq!(r.centered()[1], -7);

        // 7.5 rounds to 8 under half-even
        let b =
            Poly::from_signed(p, ModulusTag::Q, &[7 * d + d / 2, 6 * d + d / 2, 0, 0, 0, 0, 0, 0])
                .unwrap();
        let rb = b.rescale().unwrap();
        assert_eq!(rb.centered()[0], 8);
        assert_eq!(rb.centered()[1], 6); // 6.5 rounds to 6

        assert!(r.rescale().is_err());
    }

    #[test]
    fn sampling_statistics() {
        let p = RingParams::new(1024, 1 << 60, 1 << 35, 1 << 25, 3.2, 64).unwrap();
        let mut r = rng(10);

        let s = sample_sparse_secret(p, &mut r);
        assert_eq!(s.centered().iter().filter(|&&v| v != 0).count(), p.h);
        assert!(s.centered().iter().all(|&v| v == 0 || v == 1 || v == -1));

        // ternary frequencies over ~1e5 draws
        let draws = 100 * 1024;
        let mut counts = [0u64; 3]; // zero, +1, -1
        for _ in 0..100 {
            let v = sample_ternary_v(p, &mut r);
            for c in v.centered() {
                match c {
                    0 => counts[0] += 1,
                    1 => counts[1] += 1,
                    -1 => counts[2] += 1,
                    _ => panic!("non-ternary draw"),
                }
            }
        }
        let f = |c: u64| c as f64 / draws as f64;
        assert!((f(counts[0]) - 0.5).abs() < 0.02);
        assert!((f(counts[1]) - 0.25).abs() < 0.02);
        assert!((f(counts[2]) - 0.25).abs() < 0.02);

        // gaussian mean under the CLT bound 4*stddev/sqrt(n)
        let stddev = 10.0;
        let mut sum = 0i128;
        let mut n_draws = 0usize;
        for _ in 0..100 {
            let g = sample_gaussian(p, stddev, &mut r).unwrap();
            for v in g.centered() {
                sum += v;
                n_draws += 1;
            }
        }
        let mean = sum as f64 / n_draws as f64;
        assert!(mean.abs() < 4.0 * stddev / (n_draws as f64).sqrt());

        assert!(sample_gaussian(p, 0.0, &mut r).is_err());
    }

    #[test]
    fn serialization_roundtrip_width() {
        let p = RingParams::paper_with_n(8);
        let mut r = rng(11);
        let a = sample_uniform(p, ModulusTag::Q, &mut r);
        let bytes = a.to_bytes();
        assert_eq!(bytes.len(), 8 * 13); // 104-bit residues -> 13 bytes
        let back = Poly::from_bytes(p, ModulusTag::Q, &bytes).unwrap();
        assert_eq!(back, a);

        let b = sample_uniform(p, ModulusTag::Qp, &mut r);
        assert_eq!(b.to_bytes().len(), 8 * 7); // 55-bit residues -> 7 bytes
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn ring_laws(seed in 0u64..1 << 32, pow2 in prop::bool::ANY) {
            let q = if pow2 { 1u128 << 31 } else { 2147483647 }; // 2^31 or Mersenne prime
            let p = small(32, q);
            let mut r = rng(seed);
            let a = random_poly(p, &mut r);
            let b = random_poly(p, &mut r);
            let c = random_poly(p, &mut r);
            // commutativity
            prop_assert_eq!(a.add(&b).unwrap(), b.add(&a).unwrap());
            prop_assert_eq!(a.negacyclic_mul(&b).unwrap(), b.negacyclic_mul(&a).unwrap());
            // associativity
            prop_assert_eq!(
                a.add(&b).unwrap().add(&c).unwrap(),
                a.add(&b.add(&c).unwrap()).unwrap()
            );
            prop_assert_eq!(
                a.negacyclic_mul(&b).unwrap().negacyclic_mul(&c).unwrap(),
                a.negacyclic_mul(&b.negacyclic_mul(&c).unwrap()).unwrap()
            );
            // distributivity
            prop_assert_eq!(
                a.negacyclic_mul(&b.add(&c).unwrap()).unwrap(),
                a.negacyclic_mul(&b).unwrap().add(&a.negacyclic_mul(&c).unwrap()).unwrap()
            );
        }

        #[test]
        fn mul_matches_bruteforce_various_n(seed in 0u64..1 << 32, n_idx in 0usize..3) {
            let n = [8, 16, 32][n_idx];
            let p = small(n, 12289);
            let mut r = rng(seed);
            let a = random_poly(p, &mut r);
            let b = random_poly(p, &mut r);
            prop_assert_eq!(a.negacyclic_mul(&b).unwrap().coeffs, negacyclic_oracle(&a, &b));
        }

        #[test]
        fn shift_roundtrip(seed in 0u64..1 << 32, t in -200i64..200) {
            let p = small(16, 1 << 30);
            let mut r = rng(seed);
            let a = random_poly(p, &mut r);
            prop_assert_eq!(a.monomial_shift(t).monomial_shift(-t), a);
        }

        #[test]
        fn partial_equals_restriction(seed in 0u64..1 << 32) {
            let p = small(16, 1 << 30);
            let mut r = rng(seed);
            let a = random_poly(p, &mut r);
            let b = random_poly(p, &mut r);
            let full = a.negacyclic_mul(&b).unwrap();
            let idx: Vec<usize> = (0..16).filter(|_| r.gen::<bool>()).collect();
            let got = a.negacyclic_mul_partial(&b, &idx).unwrap();
            let want: Vec<u128> = idx.iter().map(|&k| full.coeffs[k]).collect();
            prop_assert_eq!(got, want);
        }
    }
}
