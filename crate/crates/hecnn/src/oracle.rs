//! Exact plaintext reference implementations: valid-padding stride-1
//! convolution with channel summation, matrix-vector FC, coefficient-wise
//! ReLU, and the fixed-point quantization used by the encrypted path.

use crate::error::{Error, Result};

/// `img[m][k][l]`: c_i channels of w_i x h_i; `filters[m][n][i][j]`:
/// c_i x c_o filters of f_w x f_h. Output `[n][k][l]`: c_o x w_o x h_o.
pub fn conv2d_ref(
    img: &[Vec<Vec<f64>>],
    filters: &[Vec<Vec<Vec<f64>>>],
) -> Result<Vec<Vec<Vec<f64>>>> {
    let c_i = img.len();
    if c_i == 0 || filters.len() != c_i {
        return Err(Error::Params("channel counts disagree".into()));
    }
    let c_o = filters[0].len();
    let (w_i, h_i) = (img[0].len(), img[0][0].len());
    let (f_w, f_h) = (filters[0][0].len(), filters[0][0][0].len());
    if w_i < f_w || h_i < f_h {
        return Err(Error::Params("filter larger than image".into()));
    }
    let (w_o, h_o) = (w_i - f_w + 1, h_i - f_h + 1);
    let mut out = vec![vec![vec![0.0f64; h_o]; w_o]; c_o];
    for n in 0..c_o {
        for k in 0..w_o {
            for l in 0..h_o {
                let mut acc = 0.0;
                for m in 0..c_i {
                    for i in 0..f_w {
                        for j in 0..f_h {
                            acc += filters[m][n][i][j] * img[m][k + i][l + j];
                        }
                    }
                }
                out[n][k][l] = acc;
            }
        }
    }
    Ok(out)
}

/// R = W*I + B with W as n_o x n_i.
pub fn fc_ref(w: &[Vec<f64>], input: &[f64], bias: &[f64]) -> Result<Vec<f64>> {
    let n_o = w.len();
    if bias.len() != n_o {
        return Err(Error::Params("bias length != n_o".into()));
    }
    let mut out = Vec::with_capacity(n_o);
    for k in 0..n_o {
        if w[k].len() != input.len() {
            return Err(Error::Params("matrix row length != n_i".into()));
        }
        out.push(w[k].iter().zip(input).map(|(a, b)| a * b).sum::<f64>() + bias[k]);
    }
    Ok(out)
}

pub fn relu_ref(t: &[f64]) -> Vec<f64> {
    t.iter().map(|&x| x.max(0.0)).collect()
}

/// Round to the fixed-point grid 1/delta with ties to even, as the ring does.
pub fn quantize(t: &[f64], delta: u128) -> Vec<i128> {
    t.iter()
        .map(|&x| (x * delta as f64).round_ties_even() as i128)
        .collect()
}

pub fn dequantize(t: &[i128], delta: u128) -> Vec<f64> {
    t.iter().map(|&x| x as f64 / delta as f64).collect()
}

/// Quantize each value onto the 1/delta grid and return it as a real, mirroring
/// what the encrypted path sees after encoding.
pub fn quantize_reals(t: &[f64], delta: u128) -> Vec<f64> {
    dequantize(&quantize(t, delta), delta)
}
