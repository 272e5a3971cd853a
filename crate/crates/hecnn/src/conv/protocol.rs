//! The two-party Conv evaluation: the server multiplies the half ciphertext
//! with packed filters and ships only the gathered slot residues; the client
//! reconstructs the c1 contribution from its stored v(X) and the server's
//! noise-flooded p polynomials, then decodes.

use rand::Rng;

use crate::ckks::{encrypt_c0_only, PublicKey, SecretKey, VStore};
use crate::conv::pack::{
    channel_gather_indices, decode_output, pack_filters_hat, pack_input, ConvShape, FilterBank,
    ImageTensor,
};
use crate::cost::CounterHandle;
use crate::error::{Error, Result};
use crate::ring::{
    div_round_half_even, residue_to_signed, residue_width, sample_gaussian, signed_to_residue,
    ModulusTag, Poly, RingParams,
};
use crate::transport::{read_residues, write_residues, MsgType, WireMessage};

pub struct ServerConvContext {
    pub params: RingParams,
    pub shape: ConvShape,
    f_hat: Vec<Poly>,
    gather: Vec<Vec<usize>>,
    counters: CounterHandle,
}

pub struct ClientConvContext {
    pub params: RingParams,
    pub shape: ConvShape,
    sk: SecretKey,
    /// s(X) * p^(n)(X), computed once per layer.
    sp_cache: Vec<Poly>,
    pub v_store: VStore,
    gather: Vec<Vec<usize>>,
    counters: CounterHandle,
}

/// Residues the server ships per inference: the full gather set.
pub fn result_count(shape: &ConvShape, ring_n: usize) -> usize {
    (ring_n / shape.c_i) * shape.c_o
}

/// Pack filters, flood them behind fresh DG(delta^2 sigma^2) noise, and emit
/// the one-time initialization message (not counted as per-inference traffic).
pub fn server_init<R: Rng>(
    filters: &FilterBank,
    shape: &ConvShape,
    pk: &PublicKey,
    params: RingParams,
    counters: CounterHandle,
    rng: &mut R,
) -> Result<(ServerConvContext, WireMessage)> {
    shape.check_fits(params.n)?;
    let flood_sd = params.delta as f64 * params.sigma;
    let mut f_hat = Vec::with_capacity(shape.c_o);
    let mut payload = Vec::new();
    for n in 0..shape.c_o {
        let f = pack_filters_hat(filters, shape, n, params)?;
        let e_delta = sample_gaussian(params, flood_sd, rng)?;
        let p = f.negacyclic_mul(&pk.a)?.add(&e_delta)?;
        payload.extend_from_slice(&p.to_bytes());
        f_hat.push(f);
    }
    let ctx = ServerConvContext {
        params,
        shape: *shape,
        f_hat,
        gather: channel_gather_indices(shape, params.n),
        counters,
    };
    Ok((ctx, WireMessage { msg_type: MsgType::ConvInit, payload }))
}

/// Parse the p polynomials and pre-multiply them with s once.
pub fn client_init(
    sk: SecretKey,
    shape: &ConvShape,
    params: RingParams,
    init_msg: &WireMessage,
    counters: CounterHandle,
) -> Result<ClientConvContext> {
    if init_msg.msg_type != MsgType::ConvInit {
        return Err(Error::Protocol("expected ConvInit".into()));
    }
    shape.check_fits(params.n)?;
    let poly_len = params.n * residue_width(params.q);
    if init_msg.payload.len() != shape.c_o * poly_len {
        return Err(Error::Frame("ConvInit payload has wrong size".into()));
    }
    let mut sp_cache = Vec::with_capacity(shape.c_o);
    for n in 0..shape.c_o {
        let p = Poly::from_bytes(
            params,
            ModulusTag::Q,
            &init_msg.payload[n * poly_len..(n + 1) * poly_len],
        )?;
        sp_cache.push(sk.s.negacyclic_mul(&p)?);
    }
    Ok(ClientConvContext {
        params,
        shape: *shape,
        sk,
        sp_cache,
        v_store: VStore::default(),
        gather: channel_gather_indices(shape, params.n),
        counters,
    })
}

impl ClientConvContext {
    /// Pack and half-encrypt one image; the wire carries exactly the N
    /// c0 residues at Q width.
    pub fn round1<R: Rng>(
        &mut self,
        img: &ImageTensor,
        pk: &PublicKey,
        rng: &mut R,
    ) -> Result<(WireMessage, u64)> {
        let encoded = pack_input(img, &self.shape, self.params)?;
        let half = encrypt_c0_only(&encoded, pk, self.params, rng, &mut self.v_store)?;
        let payload = half.c0.to_bytes();
        self.counters.lock().unwrap().bytes_c2s += payload.len() as u64;
        Ok((WireMessage { msg_type: MsgType::ConvC0, payload }, half.v_id))
    }

    /// Reconstruct the c1 share for the gathered slots, rescale it, add the
    /// server share, and decode.
    pub fn round2(&mut self, result_msg: &WireMessage, v_id: u64) -> Result<Vec<Vec<Vec<f64>>>> {
        let reals = self.round2_raw(result_msg, v_id)?;
        Ok(decode_output(&reals, &self.shape))
    }

    /// Like [`round2`] but returns the full real coefficient vector (valid
    /// slots filled, everything else zero) for consumers that re-pack it.
    pub fn round2_raw(&mut self, result_msg: &WireMessage, v_id: u64) -> Result<Vec<f64>> {
        let shares = self.combine_shares(result_msg, v_id)?;
        let p = self.params;
        let mut reals = vec![0.0f64; p.n];
        let d = p.delta as f64;
        for (n, gather) in self.gather.iter().enumerate() {
            for (pos, &idx) in gather.iter().enumerate() {
                reals[idx] = residue_to_signed(shares[n][pos], p.qp) as f64 / d;
            }
        }
        Ok(reals)
    }

    /// Per-channel combined plaintext residues mod Qp at the gathered indices.
    fn combine_shares(&mut self, result_msg: &WireMessage, v_id: u64) -> Result<Vec<Vec<u128>>> {
        if result_msg.msg_type != MsgType::ConvResult {
            return Err(Error::Protocol("expected ConvResult".into()));
        }
        let p = self.params;
        let count = result_count(&self.shape, p.n);
        let width = residue_width(p.qp);
        let server_share = read_residues(&result_msg.payload, count, width, p.qp)?;
        self.combine_residues(&server_share, v_id)
    }

    /// Combine a wire-order (group-major) server share with the locally
    /// reconstructed, rescaled c1 share. Works whether or not the server
    /// share is additively masked.
    pub fn combine_residues(&mut self, server_share: &[u128], v_id: u64) -> Result<Vec<Vec<u128>>> {
        let p = self.params;
        if server_share.len() != result_count(&self.shape, p.n) {
            return Err(Error::Protocol("server share has wrong length".into()));
        }
        let v = self.v_store.get(v_id)?.clone();

        let groups = p.n / self.shape.c_i;
        let mut out = Vec::with_capacity(self.shape.c_o);
        for (n, gather) in self.gather.iter().enumerate() {
            let c1_vals = v.negacyclic_mul_partial(&self.sp_cache[n], gather)?;
            self.counters.lock().unwrap().coeff_outputs_client += gather.len() as u64;
            let mut combined = Vec::with_capacity(groups);
            for (j, &val) in c1_vals.iter().enumerate() {
                let own = rescale_residue(val, p);
                // wire order is group-major: all channels of group j adjacent
                let served = server_share[j * self.shape.c_o + n];
                combined.push((own + served) % p.qp);
            }
            out.push(combined);
        }
        Ok(out)
    }

    pub fn secret(&self) -> &SecretKey {
        &self.sk
    }
}

fn rescale_residue(val: u128, p: RingParams) -> u128 {
    let centered = residue_to_signed(val, p.q);
    signed_to_residue(div_round_half_even(centered, p.delta as i128), p.qp)
}

impl ServerConvContext {
    /// Compute only the gathered coefficients of c0 * f_hat^(n) for every
    /// output channel, rescale the share, and ship the residues group-major.
    pub fn eval(&self, c0_msg: &WireMessage) -> Result<WireMessage> {
        if c0_msg.msg_type != MsgType::ConvC0 {
            return Err(Error::Protocol("expected ConvC0".into()));
        }
        let c0 = Poly::from_bytes(self.params, ModulusTag::Q, &c0_msg.payload)?;
        let residues = self.eval_core(&c0)?;
        Ok(self.result_message(&residues))
    }

    /// The share residues in wire order, without framing; used directly when
    /// the result feeds a masked-ReLU round instead of a plain reply.
    pub fn eval_core(&self, c0: &Poly) -> Result<Vec<u128>> {
        let p = self.params;
        let groups = p.n / self.shape.c_i;
        let mut per_channel = Vec::with_capacity(self.shape.c_o);
        for (n, gather) in self.gather.iter().enumerate() {
            let vals = c0.negacyclic_mul_partial(&self.f_hat[n], gather)?;
            self.counters.lock().unwrap().coeff_outputs_server += gather.len() as u64;
            per_channel.push(vals);
        }
        let mut residues = Vec::with_capacity(groups * self.shape.c_o);
        for j in 0..groups {
            for ch in &per_channel {
                residues.push(rescale_residue(ch[j], p));
            }
        }
        Ok(residues)
    }

    /// Frame the share residues as a ConvResult, counting the wire bytes.
    pub fn result_message(&self, residues: &[u128]) -> WireMessage {
        let mut payload = Vec::new();
        write_residues(&mut payload, residues, residue_width(self.params.qp));
        self.counters.lock().unwrap().bytes_s2c += payload.len() as u64;
        WireMessage { msg_type: MsgType::ConvResult, payload }
    }
}
