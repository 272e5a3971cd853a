//! FC-layer packing: input spread n_o slots apart, the weight matrix packed
//! with column reversal and negated high columns, bias at the low exponents,
//! and tiling for matrices that do not fit one polynomial.
//!
//! The decode rule (output k = coefficient k of i*w + b) is an exact algebraic
//! identity, but only when the ring degree equals n_i*n_o: the negacyclic
//! wrap at X^N = -1 is what cancels the minus signs on the high columns. The
//! pack functions therefore demand N == n_i*n_o; the tile planner pads shapes
//! so this always holds inside the protocol.

use crate::error::{Error, Result};
use crate::ring::{ModulusTag, Poly, RingParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FcShape {
    pub n_i: usize,
    pub n_o: usize,
}

impl FcShape {
    pub fn new(n_i: usize, n_o: usize) -> Result<Self> {
        if n_i == 0 || n_o == 0 {
            return Err(Error::Params("n_i and n_o must be positive".into()));
        }
        Ok(Self { n_i, n_o })
    }

    fn check_exact(&self, ring_n: usize) -> Result<()> {
        if self.n_i * self.n_o != ring_n {
            return Err(Error::Params(format!(
                "FC packing needs n_i*n_o == N ({}*{} != {ring_n}); pad or tile first",
                self.n_i, self.n_o
            )));
        }
        Ok(())
    }
}

/// i(X) = sum_l I_l X^{l*n_o}.
pub fn pack_fc_input_ints(input: &[i128], shape: &FcShape, params: RingParams) -> Result<Poly> {
    shape.check_exact(params.n)?;
    if input.len() != shape.n_i {
        return Err(Error::Params("input length != n_i".into()));
    }
    let mut p = Poly::zero(params, ModulusTag::Q);
    for (l, &v) in input.iter().enumerate() {
        p.add_term((l * shape.n_o) as i64, v);
    }
    Ok(p)
}

/// w(X) = sum_k W_{k,0} X^k - sum_k sum_{l>=1} W_{k,n_i-l} X^{l*n_o+k}.
pub fn pack_fc_weights_ints(w: &[Vec<i128>], shape: &FcShape, params: RingParams) -> Result<Poly> {
    shape.check_exact(params.n)?;
    if w.len() != shape.n_o || w.iter().any(|row| row.len() != shape.n_i) {
        return Err(Error::Params("weight matrix dims != n_o x n_i".into()));
    }
    let mut p = Poly::zero(params, ModulusTag::Q);
    for k in 0..shape.n_o {
        p.add_term(k as i64, w[k][0]);
        for l in 1..shape.n_i {
            p.add_term((l * shape.n_o + k) as i64, -w[k][shape.n_i - l]);
        }
    }
    Ok(p)
}

/// b(X) = sum_k B_k X^k.
pub fn pack_fc_bias_ints(bias: &[i128], params: RingParams) -> Result<Poly> {
    if bias.len() > params.n {
        return Err(Error::Params("bias longer than ring degree".into()));
    }
    let mut p = Poly::zero(params, ModulusTag::Q);
    for (k, &v) in bias.iter().enumerate() {
        p.add_term(k as i64, v);
    }
    Ok(p)
}

fn quantize(vals: &[f64], scale: u128) -> Vec<i128> {
    vals.iter()
        .map(|&x| (x * scale as f64).round_ties_even() as i128)
        .collect()
}

/// Encrypted-mode input at delta scale.
pub fn pack_fc_input(input: &[f64], shape: &FcShape, params: RingParams) -> Result<Poly> {
    pack_fc_input_ints(&quantize(input, params.delta), shape, params)
}

/// Encrypted-mode weights at delta scale.
pub fn pack_fc_weights(w: &[Vec<f64>], shape: &FcShape, params: RingParams) -> Result<Poly> {
    let ints: Vec<Vec<i128>> = w.iter().map(|row| quantize(row, params.delta)).collect();
    pack_fc_weights_ints(&ints, shape, params)
}

/// Encrypted-mode bias at delta^2 (product) scale, so it adds before rescale.
pub fn pack_fc_bias(bias: &[f64], params: RingParams) -> Result<Poly> {
    pack_fc_bias_ints(&quantize(bias, params.delta * params.delta), params)
}

/// Output k is the coefficient of X^k; everything at exponent >= n_o is
/// invalid and ignored.
pub fn decode_fc_ints(r: &Poly, n_o: usize) -> Vec<i128> {
    r.centered().into_iter().take(n_o).collect()
}

pub fn decode_fc(r: &[f64], n_o: usize) -> Vec<f64> {
    r[..n_o].to_vec()
}

/// Decomposition of an n_o x n_i matrix into uniformly sized padded tiles,
/// each exactly filling one degree-N polynomial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FcTilePlan {
    pub n_i: usize,
    pub n_o: usize,
    pub ring_n: usize,
    /// Padded tile input width: smallest power of two >= min(n_i, N).
    pub pad_ni: usize,
    /// Padded tile output height: N / pad_ni.
    pub pad_no: usize,
    pub col_tiles: usize,
    pub row_tiles: usize,
}

pub fn plan_tiles(n_i: usize, n_o: usize, ring_n: usize) -> Result<FcTilePlan> {
    if n_i == 0 || n_o == 0 {
        return Err(Error::Params("n_i and n_o must be positive".into()));
    }
    if !ring_n.is_power_of_two() {
        return Err(Error::Params("tiling requires a power-of-two ring degree".into()));
    }
    let pad_ni = n_i.next_power_of_two().min(ring_n);
    let pad_no = ring_n / pad_ni;
    Ok(FcTilePlan {
        n_i,
        n_o,
        ring_n,
        pad_ni,
        pad_no,
        col_tiles: n_i.div_ceil(pad_ni),
        row_tiles: n_o.div_ceil(pad_no),
    })
}

impl FcTilePlan {
    pub fn tile_shape(&self) -> FcShape {
        FcShape { n_i: self.pad_ni, n_o: self.pad_no }
    }

    /// Number of real (unpadded) output rows in row tile `ri`.
    pub fn rows_in(&self, ri: usize) -> usize {
        (self.n_o - ri * self.pad_no).min(self.pad_no)
    }

    pub fn cols_in(&self, ci: usize) -> usize {
        (self.n_i - ci * self.pad_ni).min(self.pad_ni)
    }

    /// The zero-padded pad_no x pad_ni sub-matrix at (row tile, col tile).
    pub fn tile_matrix(&self, w: &[Vec<f64>], ri: usize, ci: usize) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.pad_ni]; self.pad_no];
        for r in 0..self.rows_in(ri) {
            for c in 0..self.cols_in(ci) {
                out[r][c] = w[ri * self.pad_no + r][ci * self.pad_ni + c];
            }
        }
        out
    }

    /// The zero-padded length-pad_ni input slice for column tile `ci`.
    pub fn tile_input(&self, input: &[f64], ci: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.pad_ni];
        out[..self.cols_in(ci)]
            .copy_from_slice(&input[ci * self.pad_ni..ci * self.pad_ni + self.cols_in(ci)]);
        out
    }

    /// Bias enters exactly once: on the first column tile of each row tile.
    pub fn tile_bias(&self, bias: &[f64], ri: usize, ci: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.pad_no];
        if ci == 0 {
            out[..self.rows_in(ri)]
                .copy_from_slice(&bias[ri * self.pad_no..ri * self.pad_no + self.rows_in(ri)]);
        }
        out
    }
}
