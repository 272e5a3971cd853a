//! The masked-ReLU handshake. The server hides its rescaled result share
//! behind phi1 before it leaves; the client recovers r + phi1, a garbled
//! circuit computes ReLU(r) + phi2, the client re-encrypts, and the server
//! strips phi2 to obtain a fresh encryption of ReLU(r) that seeds the next
//! layer.
//!
//! SECURITY CAVEAT: the garbled circuit and the oblivious transfer that would
//! deliver phi1/phi2 to it are collapsed into a trusted in-process stub. The
//! stub preserves the exact dataflow and message boundaries of the real
//! protocol but offers no security whatsoever; the masks even travel in the
//! clear inside the ReluMasked message. Do not mistake this path for a secure
//! ReLU.

use std::collections::HashMap;

use rand::Rng;

use crate::ckks::{encrypt_c0_only, Ciphertext, HalfCiphertext, PublicKey, VStore};
use crate::error::{Error, Result};
use crate::ring::{
    residue_width, signed_to_residue, ModulusTag, Poly, RingParams,
};
use crate::transport::{read_residues, write_residues, MsgType, WireMessage};

/// Additive masks with coefficients uniform over [-delta, delta], at the
/// post-rescale message scale. phi2 lives in the output layout.
#[derive(Clone, Debug)]
pub struct MaskPair {
    pub nonce: u64,
    pub phi1: Vec<i128>,
    pub phi2: Vec<i128>,
}

/// Server-side mask issuing and redemption. Every nonce masks at most one
/// share and is redeemed at most once.
pub struct MaskServer {
    params: RingParams,
    next_nonce: u64,
    /// phi2 waiting for the re-encrypted ciphertext to come back.
    pending: HashMap<u64, Vec<i128>>,
    used: std::collections::HashSet<u64>,
}

impl MaskServer {
    pub fn new(params: RingParams) -> Self {
        Self { params, next_nonce: 0, pending: HashMap::new(), used: Default::default() }
    }

    pub fn fresh_masks<R: Rng>(&mut self, rng: &mut R) -> MaskPair {
        let nonce = self.next_nonce;
        self.next_nonce += 1;
        let d = self.params.delta as i128;
        let sample = |rng: &mut R| -> Vec<i128> {
            (0..self.params.n).map(|_| rng.gen_range(-d..=d)).collect()
        };
        MaskPair { nonce, phi1: sample(rng), phi2: sample(rng) }
    }

    /// Add phi1 to the server's rescaled share (residues mod Q') and emit the
    /// ReluMasked message. In stub mode the masks ride along in the payload,
    /// standing in for the oblivious transfer.
    pub fn mask_share(&mut self, share: &[u128], masks: &MaskPair) -> Result<WireMessage> {
        if !self.used.insert(masks.nonce) {
            return Err(Error::Protocol(format!("mask nonce {} already used", masks.nonce)));
        }
        let qp = self.params.qp;
        let masked: Vec<u128> = share
            .iter()
            .zip(&masks.phi1)
            .map(|(&s, &m)| (s + signed_to_residue(m, qp)) % qp)
            .collect();
        self.pending.insert(masks.nonce, masks.phi2.clone());

        let mut payload = Vec::new();
        payload.extend_from_slice(&masks.nonce.to_le_bytes());
        payload.extend_from_slice(&(masked.len() as u64).to_le_bytes());
        write_residues(&mut payload, &masked, residue_width(qp));
        for &v in masks.phi1.iter().chain(&masks.phi2) {
            payload.extend_from_slice(&(v as i64).to_le_bytes());
        }
        Ok(WireMessage { msg_type: MsgType::ReluMasked, payload })
    }

    /// Subtract phi2 from the c0 of the re-encrypted ReLU output, consuming
    /// the nonce. The result is a fresh encryption of ReLU(r).
    pub fn unmask_c0(&mut self, c0: &Poly, nonce: u64) -> Result<Poly> {
        let phi2 = self
            .pending
            .remove(&nonce)
            .ok_or_else(|| Error::Protocol(format!("unknown or consumed mask nonce {nonce}")))?;
        crate::ckks::sub_signed_from_c0(c0, &phi2)
    }

    /// Full-ciphertext variant used outside the half-ciphertext chain.
    pub fn unmask_ct(&mut self, ct: &Ciphertext, nonce: u64) -> Result<Ciphertext> {
        if ct.synthetic {
            return Err(Error::Protocol("synthetic ciphertexts are test-only".into()));
        }
        Ok(Ciphertext {
            c0: self.unmask_c0(&ct.c0, nonce)?,
            c1: ct.c1.clone(),
            scale_pow: ct.scale_pow,
            synthetic: false,
        })
    }
}

/// Client-side view of a parsed ReluMasked message.
#[derive(Clone, Debug)]
pub struct ReluMaskedMsg {
    pub nonce: u64,
    pub masked: Vec<u128>,
    pub phi1: Vec<i128>,
    pub phi2: Vec<i128>,
}

pub fn parse_masked(msg: &WireMessage, params: RingParams) -> Result<ReluMaskedMsg> {
    if msg.msg_type != MsgType::ReluMasked {
        return Err(Error::Protocol("expected ReluMasked".into()));
    }
    let b = &msg.payload;
    if b.len() < 16 {
        return Err(Error::Frame("ReluMasked payload too short".into()));
    }
    let nonce = u64::from_le_bytes(b[..8].try_into().unwrap());
    let count = u64::from_le_bytes(b[8..16].try_into().unwrap()) as usize;
    let width = residue_width(params.qp);
    let res_end = 16 + count * width;
    let mask_len = params.n * 8;
    if b.len() != res_end + 2 * mask_len {
        return Err(Error::Frame("ReluMasked payload has wrong size".into()));
    }
    let masked = read_residues(&b[16..res_end], count, width, params.qp)?;
    let read_ints = |bytes: &[u8]| -> Vec<i128> {
        bytes
            .chunks_exact(8)
            .map(|c| i64::from_le_bytes(c.try_into().unwrap()) as i128)
            .collect()
    };
    Ok(ReluMaskedMsg {
        nonce,
        masked,
        phi1: read_ints(&b[res_end..res_end + mask_len]),
        phi2: read_ints(&b[res_end + mask_len..]),
    })
}

/// TRUSTED STUB for the garbled circuit: removes phi1, applies ReLU
/// coefficient-wise at the message scale, optionally re-routes values into
/// the next layer's input layout, and adds phi2 (sampled in that layout).
///
/// `r_plus_phi1` is the combined plaintext with the mask still on, centered.
/// `repack` maps (source index, destination index, sign); None keeps the
/// layout. The sign handles destinations whose packing exponent wraps
/// negacyclically (X^e with e < 0 reduces to -X^{e+N}).
pub fn gc_stub_relu(
    r_plus_phi1: &[i128],
    phi1: &[i128],
    phi2: &[i128],
    repack: Option<&[(usize, usize, i8)]>,
) -> Vec<i128> {
    let mut out = phi2.to_vec();
    match repack {
        None => {
            for (i, o) in out.iter_mut().enumerate() {
                *o += (r_plus_phi1[i] - phi1[i]).max(0);
            }
        }
        Some(map) => {
            for &(src, dst, sign) in map {
                out[dst] += sign as i128 * (r_plus_phi1[src] - phi1[src]).max(0);
            }
        }
    }
    out
}

/// Re-encrypt the GC output (delta-scaled integers) as a half ciphertext; the
/// stored v lets the next layer continue the half-ciphertext flow. The wire
/// carries nonce + the N c0 residues at Q width.
pub fn client_reencrypt<R: Rng>(
    gc_out: &[i128],
    nonce: u64,
    pk: &PublicKey,
    params: RingParams,
    rng: &mut R,
    store: &mut VStore,
) -> Result<(HalfCiphertext, WireMessage)> {
    let encoded = crate::ckks::encode_scaled_integers(params, gc_out)?;
    let half = encrypt_c0_only(&encoded, pk, params, rng, store)?;
    let mut payload = Vec::with_capacity(8 + params.n * residue_width(params.q));
    payload.extend_from_slice(&nonce.to_le_bytes());
    payload.extend_from_slice(&half.c0.to_bytes());
    Ok((half, WireMessage { msg_type: MsgType::ReluReenc, payload }))
}

pub fn parse_reenc(msg: &WireMessage, params: RingParams) -> Result<(u64, Poly)> {
    if msg.msg_type != MsgType::ReluReenc {
        return Err(Error::Protocol("expected ReluReenc".into()));
    }
    if msg.payload.len() < 8 {
        return Err(Error::Frame("ReluReenc payload too short".into()));
    }
    let nonce = u64::from_le_bytes(msg.payload[..8].try_into().unwrap());
    let c0 = Poly::from_bytes(params, ModulusTag::Q, &msg.payload[8..])?;
    Ok((nonce, c0))
}
