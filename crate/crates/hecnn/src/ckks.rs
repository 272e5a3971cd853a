//! Key generation and the CKKS primitives: encryption, decryption, ciphertext
//! addition, ciphertext-plaintext multiplication, and the c0-only encryption
//! variant used by the half-ciphertext protocols.
//!
//! No ciphertext-ciphertext multiplication, relinearization, or rotation keys
//! exist here; the evaluation protocols need none of them.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::ring::{
    residue_width, sample_gaussian, sample_sparse_secret, sample_ternary_v, sample_uniform,
    signed_to_residue, ModulusTag, Poly, RingParams,
};

#[derive(Clone, Debug)]
pub struct SecretKey {
    pub s: Poly,
}

/// pk = (b, a) with b = -a*s + e mod Q.
#[derive(Clone, Debug)]
pub struct PublicKey {
    pub b: Poly,
    pub a: Poly,
}

#[derive(Clone, Debug)]
pub struct Ciphertext {
    pub c0: Poly,
    pub c1: Poly,
    /// Power of delta the embedded message currently carries.
    pub scale_pow: u32,
    /// Synthetic noiseless ciphertexts are for tests only and are rejected by
    /// the protocol paths.
    pub synthetic: bool,
}

/// The c0 component alone; the client that produced it retains v(X) under
/// `v_id` and can reconstruct the c1 contribution later.
#[derive(Clone, Debug)]
pub struct HalfCiphertext {
    pub c0: Poly,
    pub v_id: u64,
    pub scale_pow: u32,
}

/// Client-side store of the encryption randomness v(X) per half ciphertext.
#[derive(Default, Debug)]
pub struct VStore {
    map: HashMap<u64, Poly>,
    next: u64,
}

impl VStore {
    pub fn insert(&mut self, v: Poly) -> u64 {
        let id = self.next;
        self.next += 1;
        self.map.insert(id, v);
        id
    }

    pub fn get(&self, id: u64) -> Result<&Poly> {
        self.map
            .get(&id)
            .ok_or_else(|| Error::State(format!("unknown v_id {id}")))
    }

    pub fn contains(&self, id: u64) -> bool {
        self.map.contains_key(&id)
    }
}

pub fn keygen<R: Rng>(params: RingParams, rng: &mut R) -> Result<(SecretKey, PublicKey)> {
    if !params.n.is_power_of_two() || params.n < 8 {
        return Err(Error::Params("key generation requires a checked ring".into()));
    }
    let s = sample_sparse_secret(params, rng);
    let a = sample_uniform(params, ModulusTag::Q, rng);
    let e = sample_gaussian(params, params.sigma, rng)?;
    let b = a.negacyclic_mul(&s)?.neg().add(&e)?;
    Ok((SecretKey { s }, PublicKey { b, a }))
}

/// Round real coefficients to ceil(delta * m) residues mod Q.
pub fn encode(params: RingParams, m: &[f64]) -> Result<Poly> {
    if m.len() != params.n {
        return Err(Error::Params("message length != N".into()));
    }
    let limit = (params.q / 2) as f64;
    let mut vals = Vec::with_capacity(params.n);
    for &x in m {
        let scaled = (x * params.delta as f64).round_ties_even();
        if !scaled.is_finite() || scaled.abs() >= limit {
            return Err(Error::Encoding(format!("delta * {x} exceeds the signed range of Q")));
        }
        vals.push(scaled as i128);
    }
    Poly::from_signed(params, ModulusTag::Q, &vals)
}

/// Encode an already delta-scaled integer message (used when re-encrypting
/// masked ReLU outputs, which arrive as integers at message scale).
pub fn encode_scaled_integers(params: RingParams, m: &[i128]) -> Result<Poly> {
    if m.len() != params.n {
        return Err(Error::Params("message length != N".into()));
    }
    let limit = (params.q / 2) as i128;
    if m.iter().any(|&x| x.abs() >= limit) {
        return Err(Error::Encoding("scaled message exceeds the signed range of Q".into()));
    }
    Poly::from_signed(params, ModulusTag::Q, m)
}

fn encrypt_parts<R: Rng>(
    encoded: &Poly,
    pk: &PublicKey,
    params: RingParams,
    rng: &mut R,
    want_c1: bool,
) -> Result<(Poly, Option<Poly>, Poly)> {
    let v = sample_ternary_v(params, rng);
    let e0 = sample_gaussian(params, params.sigma, rng)?;
    let c0 = v.negacyclic_mul(&pk.b)?.add(encoded)?.add(&e0)?;
    let c1 = if want_c1 {
        let e1 = sample_gaussian(params, params.sigma, rng)?;
        Some(v.negacyclic_mul(&pk.a)?.add(&e1)?)
    } else {
        None
    };
    Ok((c0, c1, v))
}

/// Full encryption per the scheme definition; also returns v(X) so callers on
/// the half-ciphertext path can retain it.
pub fn encrypt<R: Rng>(
    m: &[f64],
    pk: &PublicKey,
    params: RingParams,
    rng: &mut R,
) -> Result<(Ciphertext, Poly)> {
    let encoded = encode(params, m)?;
    encrypt_encoded(&encoded, pk, params, rng)
}

/// Encrypt a pre-encoded (delta-scaled residue) message.
pub fn encrypt_encoded<R: Rng>(
    encoded: &Poly,
    pk: &PublicKey,
    params: RingParams,
    rng: &mut R,
) -> Result<(Ciphertext, Poly)> {
    let (c0, c1, v) = encrypt_parts(encoded, pk, params, rng, true)?;
    Ok((Ciphertext { c0, c1: c1.unwrap(), scale_pow: 1, synthetic: false }, v))
}

/// Compute only c0 = v*b + ceil(delta*m) + e0 and deposit v in the store.
///
/// Under an identical seed this produces exactly the c0 of [`encrypt`]: v and
/// e0 are drawn first, e1 only on the full path.
pub fn encrypt_c0_only<R: Rng>(
    encoded: &Poly,
    pk: &PublicKey,
    params: RingParams,
    rng: &mut R,
    store: &mut VStore,
) -> Result<HalfCiphertext> {
    let (c0, _, v) = encrypt_parts(encoded, pk, params, rng, false)?;
    let v_id = store.insert(v);
    Ok(HalfCiphertext { c0, v_id, scale_pow: 1 })
}

/// Decrypt to real coefficients: center (c0 + c1*s) and divide by
/// delta^scale_pow.
pub fn decrypt(ct: &Ciphertext, sk: &SecretKey) -> Result<Vec<f64>> {
    // The ternary secret survives a change of modulus, so decryption works at
    // Q and at the post-rescale modulus Q' alike.
    let s = Poly::from_signed(ct.c0.params, ct.c0.tag, &sk.s.centered())?;
    let raw = ct.c0.add(&ct.c1.negacyclic_mul(&s)?)?;
    let scale = (ct.c0.params.delta as f64).powi(ct.scale_pow as i32);
    Ok(raw.centered().iter().map(|&v| v as f64 / scale).collect())
}

/// Test-only noiseless ciphertext (delta*m, 0); rejected by protocol paths.
pub fn noiseless_ciphertext(params: RingParams, m: &[f64]) -> Result<Ciphertext> {
    let c0 = encode(params, m)?;
    Ok(Ciphertext { c0, c1: Poly::zero(params, ModulusTag::Q), scale_pow: 1, synthetic: true })
}

pub fn ct_add(a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    if a.scale_pow != b.scale_pow {
        return Err(Error::Params("ciphertext scales differ".into()));
    }
    Ok(Ciphertext {
        c0: a.c0.add(&b.c0)?,
        c1: a.c1.add(&b.c1)?,
        scale_pow: a.scale_pow,
        synthetic: a.synthetic || b.synthetic,
    })
}

/// Multiply both components by a plaintext polynomial; the scale power goes up
/// by one when the plaintext encodes delta-scaled reals.
pub fn ct_pt_mul(ct: &Ciphertext, p: &Poly, p_is_scaled: bool) -> Result<Ciphertext> {
    Ok(Ciphertext {
        c0: ct.c0.negacyclic_mul(p)?,
        c1: ct.c1.negacyclic_mul(p)?,
        scale_pow: ct.scale_pow + if p_is_scaled { 1 } else { 0 },
        synthetic: ct.synthetic,
    })
}

/// Noise envelope of a fresh encryption at message scale.
///
/// Decrypting a fresh ciphertext leaves v*e + e0 + e1*s on top of delta*m;
/// with ||v||_0 ~ N/2 and ||s||_0 = h the per-coefficient std deviation is
/// sigma * sqrt(N/2 + h + 1), and a 6-sigma envelope covers the max over the
/// tested sample sizes.
pub fn fresh_noise_bound(params: RingParams) -> f64 {
    6.0 * params.sigma * ((params.n as f64) / 2.0 + params.h as f64 + 1.0).sqrt()
        / params.delta as f64
}

/// Serialize keys with a params header followed by the polynomials.
pub mod keyfile {
    use super::*;

    const MAGIC: &[u8; 4] = b"HEKY";

    fn header(params: &RingParams) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(params.n as u64).to_le_bytes());
        out.extend_from_slice(&(128 - (params.q - 1).leading_zeros() as u64).to_le_bytes());
        out.extend_from_slice(&(128 - (params.qp - 1).leading_zeros() as u64).to_le_bytes());
        out.extend_from_slice(&(params.delta.trailing_zeros() as u64).to_le_bytes());
        out.extend_from_slice(&((params.sigma * 1000.0).round() as u64).to_le_bytes());
        out.extend_from_slice(&(params.h as u64).to_le_bytes());
        out
    }

    fn check_header(params: &RingParams, bytes: &[u8]) -> Result<usize> {
        let hdr = header(params);
        if bytes.len() < hdr.len() || bytes[..4] != *MAGIC {
            return Err(Error::Frame("bad key file header".into()));
        }
        if bytes[..hdr.len()] != hdr[..] {
            return Err(Error::Frame("key file params do not match".into()));
        }
        Ok(hdr.len())
    }

    pub fn write_public(params: &RingParams, pk: &PublicKey) -> Vec<u8> {
        let mut out = header(params);
        out.extend_from_slice(&pk.b.to_bytes());
        out.extend_from_slice(&pk.a.to_bytes());
        out
    }

    pub fn read_public(params: RingParams, bytes: &[u8]) -> Result<PublicKey> {
        let off = check_header(&params, bytes)?;
        let w = params.n * residue_width(params.q);
        if bytes.len() != off + 2 * w {
            return Err(Error::Frame("public key file truncated".into()));
        }
        Ok(PublicKey {
            b: Poly::from_bytes(params, ModulusTag::Q, &bytes[off..off + w])?,
            a: Poly::from_bytes(params, ModulusTag::Q, &bytes[off + w..])?,
        })
    }

    pub fn write_secret(params: &RingParams, sk: &SecretKey) -> Vec<u8> {
        let mut out = header(params);
        out.extend_from_slice(&sk.s.to_bytes());
        out
    }

    pub fn read_secret(params: RingParams, bytes: &[u8]) -> Result<SecretKey> {
        let off = check_header(&params, bytes)?;
        Ok(SecretKey { s: Poly::from_bytes(params, ModulusTag::Q, &bytes[off..])? })
    }
}

/// Reconstruct a ciphertext from a known v: c1 = v*a + e1 is what the full
/// encryption would have produced. Used by tests that chain the half path.
pub fn rebuild_c1_for_test<R: Rng>(
    half: &HalfCiphertext,
    store: &VStore,
    pk: &PublicKey,
    params: RingParams,
    rng: &mut R,
) -> Result<Ciphertext> {
    let v = store.get(half.v_id)?;
    let e1 = sample_gaussian(params, params.sigma, rng)?;
    Ok(Ciphertext {
        c0: half.c0.clone(),
        c1: v.negacyclic_mul(&pk.a)?.add(&e1)?,
        scale_pow: half.scale_pow,
        synthetic: false,
    })
}

/// Subtract a signed integer polynomial from c0 in place (mask removal).
pub fn sub_signed_from_c0(c0: &Poly, vals: &[i128]) -> Result<Poly> {
    let m = c0.modulus();
    let p = Poly::from_coeffs(
        c0.params,
        c0.tag,
        vals.iter().map(|&v| signed_to_residue(v, m)).collect(),
    )?;
    c0.sub(&p)
}
