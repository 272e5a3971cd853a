//! Two-party FC evaluation: the server computes only the first output
//! coefficients of c0 * w + b per tile; the client rebuilds the c1 share from
//! v * (s * p) and decodes. Tiled matrices run one exchange per column tile,
//! with partial sums combined on the client in plaintext.

use rand::Rng;

use crate::ckks::{encrypt_c0_only, PublicKey, SecretKey, VStore};
use crate::cost::CounterHandle;
use crate::error::{Error, Result};
use crate::fc::pack::{
    pack_fc_bias, pack_fc_input, pack_fc_weights, plan_tiles, FcTilePlan,
};
use crate::ring::{
    div_round_half_even, residue_to_signed, residue_width, sample_gaussian, signed_to_residue,
    ModulusTag, Poly, RingParams,
};
use crate::transport::{read_residues, write_residues, MsgType, WireMessage};

pub struct ServerFcContext {
    pub params: RingParams,
    pub plan: FcTilePlan,
    /// Row-major (row tile, column tile) packed weights and biases.
    tiles_w: Vec<Poly>,
    tiles_b: Vec<Poly>,
    counters: CounterHandle,
}

pub struct ClientFcContext {
    pub params: RingParams,
    pub plan: FcTilePlan,
    sk: SecretKey,
    sp_cache: Vec<Poly>,
    pub v_store: VStore,
    counters: CounterHandle,
}

fn tile_index(plan: &FcTilePlan, ri: usize, ci: usize) -> usize {
    ri * plan.col_tiles + ci
}

/// Total residues the server ships per inference.
pub fn result_count(plan: &FcTilePlan) -> usize {
    (0..plan.row_tiles).map(|ri| plan.rows_in(ri)).sum::<usize>() * plan.col_tiles
}

pub fn server_init<R: Rng>(
    w: &[Vec<f64>],
    bias: &[f64],
    n_i: usize,
    n_o: usize,
    pk: &PublicKey,
    params: RingParams,
    counters: CounterHandle,
    rng: &mut R,
) -> Result<(ServerFcContext, WireMessage)> {
    if w.len() != n_o || w.iter().any(|row| row.len() != n_i) {
        return Err(Error::Params("weight matrix dims != n_o x n_i".into()));
    }
    if bias.len() != n_o {
        return Err(Error::Params("bias length != n_o".into()));
    }
    let plan = plan_tiles(n_i, n_o, params.n)?;
    let shape = plan.tile_shape();
    let flood_sd = params.delta as f64 * params.sigma;
    let mut tiles_w = Vec::new();
    let mut tiles_b = Vec::new();
    let mut payload = Vec::new();
    for ri in 0..plan.row_tiles {
        for ci in 0..plan.col_tiles {
            let w_poly = pack_fc_weights(&plan.tile_matrix(w, ri, ci), &shape, params)?;
            let b_poly = pack_fc_bias(&plan.tile_bias(bias, ri, ci), params)?;
            let e_delta = sample_gaussian(params, flood_sd, rng)?;
            let p = w_poly.negacyclic_mul(&pk.a)?.add(&e_delta)?;
            payload.extend_from_slice(&p.to_bytes());
            tiles_w.push(w_poly);
            tiles_b.push(b_poly);
        }
    }
    let ctx = ServerFcContext { params, plan, tiles_w, tiles_b, counters };
    Ok((ctx, WireMessage { msg_type: MsgType::FcInit, payload }))
}

pub fn client_init(
    sk: SecretKey,
    n_i: usize,
    n_o: usize,
    params: RingParams,
    init_msg: &WireMessage,
    counters: CounterHandle,
) -> Result<ClientFcContext> {
    if init_msg.msg_type != MsgType::FcInit {
        return Err(Error::Protocol("expected FcInit".into()));
    }
    let plan = plan_tiles(n_i, n_o, params.n)?;
    let n_tiles = plan.row_tiles * plan.col_tiles;
    let poly_len = params.n * residue_width(params.q);
    if init_msg.payload.len() != n_tiles * poly_len {
        return Err(Error::Frame("FcInit payload has wrong size".into()));
    }
    let mut sp_cache = Vec::with_capacity(n_tiles);
    for t in 0..n_tiles {
        let p = Poly::from_bytes(
            params,
            ModulusTag::Q,
            &init_msg.payload[t * poly_len..(t + 1) * poly_len],
        )?;
        sp_cache.push(sk.s.negacyclic_mul(&p)?);
    }
    Ok(ClientFcContext {
        params,
        plan,
        sk,
        sp_cache,
        v_store: VStore::default(),
        counters,
    })
}

fn rescale_residue(val: u128, p: RingParams) -> u128 {
    let centered = residue_to_signed(val, p.q);
    signed_to_residue(div_round_half_even(centered, p.delta as i128), p.qp)
}

impl ClientFcContext {
    /// Half-encrypt one padded input polynomial per column tile; the wire
    /// carries N residues at Q width per tile.
    pub fn round1<R: Rng>(
        &mut self,
        input: &[f64],
        pk: &PublicKey,
        rng: &mut R,
    ) -> Result<(WireMessage, Vec<u64>)> {
        if input.len() != self.plan.n_i {
            return Err(Error::Params("input length != n_i".into()));
        }
        if input.iter().any(|v| v.abs() > 1.0 + 1e-9) {
            return Err(Error::Params("FC input values must lie in [-1, 1]".into()));
        }
        let shape = self.plan.tile_shape();
        let mut payload = Vec::new();
        let mut v_ids = Vec::with_capacity(self.plan.col_tiles);
        for ci in 0..self.plan.col_tiles {
            let encoded = pack_fc_input(&self.plan.tile_input(input, ci), &shape, self.params)?;
            let half = encrypt_c0_only(&encoded, pk, self.params, rng, &mut self.v_store)?;
            payload.extend_from_slice(&half.c0.to_bytes());
            v_ids.push(half.v_id);
        }
        self.counters.lock().unwrap().bytes_c2s += payload.len() as u64;
        Ok((WireMessage { msg_type: MsgType::FcC0, payload }, v_ids))
    }

    /// Combine the server share with the locally reconstructed c1 share and
    /// return the n_o outputs.
    pub fn round2(&mut self, result_msg: &WireMessage, v_ids: &[u64]) -> Result<Vec<f64>> {
        if result_msg.msg_type != MsgType::FcResult {
            return Err(Error::Protocol("expected FcResult".into()));
        }
        let p = self.params;
        let width = residue_width(p.qp);
        let count = result_count(&self.plan);
        let server_share = read_residues(&result_msg.payload, count, width, p.qp)?;
        let combined = self.combine_residues(&server_share, v_ids)?;

        let d = p.delta as f64;
        let mut out = vec![0.0f64; self.plan.n_o];
        let mut cursor = 0usize;
        for ri in 0..self.plan.row_tiles {
            let rows = self.plan.rows_in(ri);
            for _ci in 0..self.plan.col_tiles {
                for row in 0..rows {
                    out[ri * self.plan.pad_no + row] +=
                        residue_to_signed(combined[cursor + row], p.qp) as f64 / d;
                }
                cursor += rows;
            }
        }
        Ok(out)
    }

    /// Combine a wire-order server share with the locally reconstructed,
    /// rescaled c1 share, returning residues in the same wire order. Works
    /// whether or not the server share is additively masked; when there is a
    /// single column tile the wire order equals the output order.
    pub fn combine_residues(
        &mut self,
        server_share: &[u128],
        v_ids: &[u64],
    ) -> Result<Vec<u128>> {
        if v_ids.len() != self.plan.col_tiles {
            return Err(Error::Params("one v_id per column tile required".into()));
        }
        let p = self.params;
        if server_share.len() != result_count(&self.plan) {
            return Err(Error::Protocol("server share has wrong length".into()));
        }
        let mut out = Vec::with_capacity(server_share.len());
        let mut cursor = 0usize;
        for ri in 0..self.plan.row_tiles {
            let rows = self.plan.rows_in(ri);
            let indices: Vec<usize> = (0..rows).collect();
            for ci in 0..self.plan.col_tiles {
                let v = self.v_store.get(v_ids[ci])?.clone();
                let sp = &self.sp_cache[tile_index(&self.plan, ri, ci)];
                let c1_vals = v.negacyclic_mul_partial(sp, &indices)?;
                self.counters.lock().unwrap().coeff_outputs_client += rows as u64;
                for (row, &val) in c1_vals.iter().enumerate() {
                    let own = rescale_residue(val, p);
                    out.push((own + server_share[cursor + row]) % p.qp);
                }
                cursor += rows;
            }
        }
        Ok(out)
    }

    pub fn secret(&self) -> &SecretKey {
        &self.sk
    }
}

impl ServerFcContext {
    /// Compute only the first rows_in(ri) coefficients of c0 * w + b per
    /// tile, rescale the share, and ship them row-tile-major.
    pub fn eval(&self, c0_msg: &WireMessage) -> Result<WireMessage> {
        if c0_msg.msg_type != MsgType::FcC0 {
            return Err(Error::Protocol("expected FcC0".into()));
        }
        let p = self.params;
        let poly_len = p.n * residue_width(p.q);
        if c0_msg.payload.len() != self.plan.col_tiles * poly_len {
            return Err(Error::Frame("FcC0 payload has wrong size".into()));
        }
        let c0s: Vec<Poly> = (0..self.plan.col_tiles)
            .map(|ci| {
                Poly::from_bytes(p, ModulusTag::Q, &c0_msg.payload[ci * poly_len..(ci + 1) * poly_len])
            })
            .collect::<Result<_>>()?;
        let residues = self.eval_core(&c0s)?;
        Ok(self.result_message(&residues))
    }

    /// The share residues in wire order, without framing; used directly when
    /// the result feeds a masked-ReLU round instead of a plain reply.
    pub fn eval_core(&self, c0s: &[Poly]) -> Result<Vec<u128>> {
        if c0s.len() != self.plan.col_tiles {
            return Err(Error::Params("one c0 per column tile required".into()));
        }
        let p = self.params;
        let mut residues = Vec::with_capacity(result_count(&self.plan));
        for ri in 0..self.plan.row_tiles {
            let rows = self.plan.rows_in(ri);
            let indices: Vec<usize> = (0..rows).collect();
            for ci in 0..self.plan.col_tiles {
                let t = tile_index(&self.plan, ri, ci);
                let vals = c0s[ci].negacyclic_mul_partial(&self.tiles_w[t], &indices)?;
                self.counters.lock().unwrap().coeff_outputs_server += rows as u64;
                let b = &self.tiles_b[t];
                for (row, &val) in vals.iter().enumerate() {
                    let with_bias = (val + b.coeffs[row]) % p.q;
                    residues.push(rescale_residue(with_bias, p));
                }
            }
        }
        Ok(residues)
    }

    /// Frame the share residues as an FcResult, counting the wire bytes.
    pub fn result_message(&self, residues: &[u128]) -> WireMessage {
        let mut payload = Vec::new();
        write_residues(&mut payload, residues, residue_width(self.params.qp));
        self.counters.lock().unwrap().bytes_s2c += payload.len() as u64;
        WireMessage { msg_type: MsgType::FcResult, payload }
    }
}
