//! Closed-form complexity and bandwidth formulas for the four compared
//! schemes, live counters incremented by the protocol modules, and a
//! reconciler asserting measured == predicted for the proposed scheme.

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::conv::pack::ConvShape;
use crate::error::{Error, Result};
use crate::fc::pack::FcShape;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostCounters {
    /// Product coefficients actually computed on each side.
    pub coeff_outputs_server: u64,
    pub coeff_outputs_client: u64,
    pub rotations_server: u64,
    pub rotations_client: u64,
    /// Semantic residue bytes on the wire (frame overhead excluded).
    pub bytes_c2s: u64,
    pub bytes_s2c: u64,
}

pub type CounterHandle = Arc<Mutex<CostCounters>>;

pub fn new_counters() -> CounterHandle {
    Arc::new(Mutex::new(CostCounters::default()))
}

pub fn snapshot(handle: &CounterHandle) -> CostCounters {
    *handle.lock().unwrap()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeId {
    Gazelle,
    Cheetah,
    Convfhe,
    Proposed,
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "gazelle" => Self::Gazelle,
            "cheetah" => Self::Cheetah,
            "convfhe" => Self::Convfhe,
            "proposed" => Self::Proposed,
            other => return Err(Error::Config(format!("unknown scheme '{other}'"))),
        })
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Gazelle => "gazelle",
            Self::Cheetah => "cheetah",
            Self::Convfhe => "convfhe",
            Self::Proposed => "proposed",
        };
        f.write_str(s)
    }
}

/// Closed-form prediction. For the proposed scheme the server/client split is
/// meaningful; the compared schemes report totals in the server fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostRecord {
    pub coeff_outputs_server: u64,
    pub coeff_outputs_client: u64,
    pub rotations_server: u64,
    pub rotations_client: u64,
    /// Conv: number of length-N polynomials. FC: number of coefficients.
    pub memory_server: u64,
    pub memory_client: u64,
}

/// Table of Conv-layer costs; assumes square images/filters and N = c_i*w^2.
pub fn conv_cost(scheme: SchemeId, shape: &ConvShape, ring_n: usize) -> Result<CostRecord> {
    if shape.w_i != shape.h_i || shape.f_w != shape.f_h {
        return Err(Error::Params("conv cost table assumes square image and filter".into()));
    }
    if shape.c_i * shape.w_i * shape.w_i != ring_n {
        return Err(Error::Params(format!(
            "conv cost table assumes N = c_i*w^2, got N={ring_n}, c_i*w^2={}",
            shape.c_i * shape.w_i * shape.w_i
        )));
    }
    let n = ring_n as u64;
    let (c_o, f) = (shape.c_o as u64, shape.f_w as u64);
    let c_i = shape.c_i as u64;
    Ok(match scheme {
        SchemeId::Gazelle => CostRecord {
            coeff_outputs_server: 4 * f * f * c_o * n,
            coeff_outputs_client: 0,
            rotations_server: 2 * (f * f - 3 + c_o),
            rotations_client: 0,
            memory_server: f * f * c_o + 4 * (f * f - 3 + c_o),
            memory_client: 0,
        },
        SchemeId::Cheetah => CostRecord {
            coeff_outputs_server: 2 * c_o * n,
            coeff_outputs_client: 0,
            rotations_server: 0,
            rotations_client: 0,
            memory_server: c_o,
            memory_client: 0,
        },
        SchemeId::Convfhe => CostRecord {
            coeff_outputs_server: n * (6 * c_o - 4),
            coeff_outputs_client: 0,
            rotations_server: c_o - 1,
            rotations_client: 0,
            memory_server: 2 * (c_i as f64).log2().round() as u64 + c_o,
            memory_client: 0,
        },
        SchemeId::Proposed => CostRecord {
            coeff_outputs_server: n * c_o / c_i,
            coeff_outputs_client: n * c_o / c_i,
            rotations_server: 0,
            rotations_client: 0,
            memory_server: c_o,
            memory_client: c_o + 1,
        },
    })
}

fn ceil_div(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

/// Bandwidth in bytes (client-to-server, server-to-client) of a Conv layer
/// followed by a GC ReLU, per the Table II formulas.
pub fn relu_bandwidth(
    scheme: SchemeId,
    w: u64,
    c_i: u64,
    c_o: u64,
    ring_n: u64,
    qbits: u64,
    qpbits: u64,
) -> (f64, f64) {
    let n = ring_n;
    let (c2s_bits, s2c_bits) = match scheme {
        SchemeId::Gazelle => (
            2 * n * ceil_div(2 * w * w * c_i, n) * qbits,
            2 * n * ceil_div(2 * w * w * c_o, n) * qpbits,
        ),
        SchemeId::Cheetah => (
            2 * n * ceil_div(w * w * c_i, n) * qbits,
            2 * n * c_o * qpbits,
        ),
        SchemeId::Convfhe => (
            2 * n * ceil_div(w * w * c_i, n) * qbits,
            2 * n * ceil_div(w * w * c_o, n) * qpbits,
        ),
        SchemeId::Proposed => (
            n * ceil_div(w * w * c_i, n) * qbits,
            ceil_div(w * w * c_o * c_o, c_i) * qpbits,
        ),
    };
    (c2s_bits as f64 / 8.0, s2c_bits as f64 / 8.0)
}

/// Number of weight polynomials in the paper's FC accounting.
fn fc_polys(n_i: u64, n_o: u64, n: u64) -> u64 {
    ceil_div(n_o, n / n_i.min(n))
}

/// Table of FC-layer costs.
pub fn fc_cost(scheme: SchemeId, shape: &FcShape, ring_n: usize) -> Result<CostRecord> {
    let n = ring_n as u64;
    let (n_i, n_o) = (shape.n_i as u64, shape.n_o as u64);
    if n_i > n {
        return Err(Error::Params("fc cost table assumes n_i <= N".into()));
    }
    let t = fc_polys(n_i, n_o, n);
    Ok(match scheme {
        SchemeId::Gazelle => CostRecord {
            coeff_outputs_server: 2 * n * t,
            coeff_outputs_client: 0,
            rotations_server: (n_o as f64 / (n / n_i.min(n)) as f64 - 1.0
                + (n as f64 / n_o as f64).log2())
            .ceil() as u64,
            rotations_client: 0,
            memory_server: n
                * ((3.0 * n_o as f64 / (n / n_i.min(n)) as f64 - 2.0
                    + 2.0 * (n as f64 / n_o as f64).log2())
                .ceil() as u64),
            memory_client: 0,
        },
        SchemeId::Cheetah => CostRecord {
            coeff_outputs_server: 2 * n * t,
            coeff_outputs_client: 0,
            rotations_server: 0,
            rotations_client: 0,
            memory_server: n * t,
            memory_client: 0,
        },
        SchemeId::Convfhe => CostRecord {
            coeff_outputs_server: 2 * n * t,
            coeff_outputs_client: 0,
            rotations_server: 1 << ((t as f64).log2().ceil() as u32),
            rotations_client: 0,
            memory_server: n * t + 2 * n * ((t as f64).log2().ceil() as u64),
            memory_client: 0,
        },
        SchemeId::Proposed => CostRecord {
            coeff_outputs_server: n_o,
            coeff_outputs_client: n_o,
            rotations_server: 0,
            rotations_client: 0,
            memory_server: n * t,
            memory_client: n * t + n_o,
        },
    })
}

/// Expected wire bytes of one proposed-scheme inference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WirePrediction {
    pub bytes_c2s: u64,
    pub bytes_s2c: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReconcileReport {
    pub scheme: SchemeId,
    pub shape: String,
    pub predicted: CostCounters,
    pub measured: CostCounters,
    pub pass: bool,
    pub diffs: Vec<String>,
}

/// Compare measured counters against the closed-form prediction for the
/// proposed scheme; every field must match exactly.
pub fn reconcile(
    shape_desc: &str,
    predicted_cost: &CostRecord,
    predicted_wire: &WirePrediction,
    measured: &CostCounters,
) -> ReconcileReport {
    let predicted = CostCounters {
        coeff_outputs_server: predicted_cost.coeff_outputs_server,
        coeff_outputs_client: predicted_cost.coeff_outputs_client,
        rotations_server: predicted_cost.rotations_server,
        rotations_client: predicted_cost.rotations_client,
        bytes_c2s: predicted_wire.bytes_c2s,
        bytes_s2c: predicted_wire.bytes_s2c,
    };
    let mut diffs = Vec::new();
    let mut check = |name: &str, p: u64, m: u64| {
        if p != m {
            diffs.push(format!("{name}: predicted {p}, measured {m}"));
        }
    };
    check("coeff_outputs_server", predicted.coeff_outputs_server, measured.coeff_outputs_server);
    check("coeff_outputs_client", predicted.coeff_outputs_client, measured.coeff_outputs_client);
    check("rotations_server", predicted.rotations_server, measured.rotations_server);
    check("rotations_client", predicted.rotations_client, measured.rotations_client);
    check("bytes_c2s", predicted.bytes_c2s, measured.bytes_c2s);
    check("bytes_s2c", predicted.bytes_s2c, measured.bytes_s2c);
    let pass = diffs.is_empty();
    ReconcileReport {
        scheme: SchemeId::Proposed,
        shape: shape_desc.to_string(),
        predicted,
        measured: *measured,
        pass,
        diffs,
    }
}

impl ReconcileReport {
    pub fn into_result(self) -> Result<Self> {
        if self.pass {
            Ok(self)
        } else {
            Err(Error::Reconcile(self.diffs.join("; ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MEGA: f64 = 1e6;

    #[test]
    fn conv_table_rows() {
        let shape = ConvShape::new(4, 4, 8, 8, 3, 3).unwrap();
        let n = 4 * 64;
        let p = conv_cost(SchemeId::Proposed, &shape, n).unwrap();
        assert_eq!(p.coeff_outputs_server, (n * 4 / 4) as u64);
        assert_eq!(p.coeff_outputs_client, (n * 4 / 4) as u64);
        assert_eq!((p.rotations_server, p.rotations_client), (0, 0));
        assert_eq!((p.memory_server, p.memory_client), (4, 5));

        let g = conv_cost(SchemeId::Gazelle, &shape, n).unwrap();
        assert_eq!(g.rotations_server, 2 * (9 - 3 + 4));
        assert_eq!(g.coeff_outputs_server, 4 * 9 * 4 * n as u64);

        let ch = conv_cost(SchemeId::Cheetah, &shape, n).unwrap();
        assert_eq!((ch.coeff_outputs_server, ch.rotations_server), (2 * 4 * n as u64, 0));

        // convfhe, c_o=64 -> 63 rotations
        let shape64 = ConvShape::new(64, 64, 4, 4, 2, 2).unwrap();
        let cf = conv_cost(SchemeId::Convfhe, &shape64, 64 * 16).unwrap();
        assert_eq!(cf.rotations_server, 63);
        assert_eq!(cf.coeff_outputs_server, (64 * 16 * (6 * 64 - 4)) as u64);

        assert!(conv_cost(SchemeId::Proposed, &shape, 4096).is_err());
    }

    #[test]
    fn table2_all_sixteen_cells() {
        let rows: [(u64, u64, u64); 4] =
            [(7, 256, 256), (15, 128, 128), (31, 64, 64), (63, 32, 32)];
        let expect = [
            // (gazelle, cheetah, convfhe, proposed) in MB
            [1.3, 29.26, 0.65, 0.3],
            [2.6, 15.27, 1.3, 0.62],
            [5.21, 8.91, 2.61, 1.27],
            [10.42, 7.01, 5.21, 2.58],
        ];
        let schemes =
            [SchemeId::Gazelle, SchemeId::Cheetah, SchemeId::Convfhe, SchemeId::Proposed];
        for (ri, &(w, c_i, c_o)) in rows.iter().enumerate() {
            for (si, &scheme) in schemes.iter().enumerate() {
                let (c2s, s2c) = relu_bandwidth(scheme, w, c_i, c_o, 1 << 13, 104, 55);
                let mb = (c2s + s2c) / MEGA;
                assert!(
                    (mb - expect[ri][si]).abs() < 0.01,
                    "{scheme} row {ri}: got {mb:.4}, want {}",
                    expect[ri][si]
                );
            }
        }
    }

    #[test]
    fn fc_table_rows() {
        let shape = FcShape::new(64, 64).unwrap();
        let n = 4096;
        let p = fc_cost(SchemeId::Proposed, &shape, n).unwrap();
        assert_eq!((p.coeff_outputs_server, p.coeff_outputs_client), (64, 64));
        assert_eq!((p.rotations_server, p.rotations_client), (0, 0));
        assert_eq!((p.memory_server, p.memory_client), (4096, 4096 + 64));

        let g = fc_cost(SchemeId::Gazelle, &shape, n).unwrap();
        assert_eq!(g.rotations_server, 6); // ceil(1 - 1 + log2(4096/64))
        assert_eq!(g.coeff_outputs_server, 2 * 4096);

        let cf = fc_cost(SchemeId::Convfhe, &shape, n).unwrap();
        assert_eq!(cf.coeff_outputs_server, 2 * 4096);
        let ch = fc_cost(SchemeId::Cheetah, &shape, n).unwrap();
        assert_eq!((ch.coeff_outputs_server, ch.rotations_server), (2 * 4096, 0));

        // multi-poly case: n_i = 2048, n_o = 64, N = 4096 -> floor(N/n_i)=2, t=32
        let big = FcShape::new(2048, 64).unwrap();
        let pb = fc_cost(SchemeId::Proposed, &big, n).unwrap();
        assert_eq!(pb.memory_server, 4096 * 32);
        assert_eq!(pb.memory_client, 4096 * 32 + 64);
    }

    #[test]
    fn reconcile_pass_and_fail() {
        let shape = ConvShape::new(2, 2, 4, 4, 2, 2).unwrap();
        let n = 32;
        let cost = conv_cost(SchemeId::Proposed, &shape, n).unwrap();
        let wire = WirePrediction { bytes_c2s: 32 * 13, bytes_s2c: 32 * 7 };
        let measured = CostCounters {
            coeff_outputs_server: cost.coeff_outputs_server,
            coeff_outputs_client: cost.coeff_outputs_client,
            rotations_server: 0,
            rotations_client: 0,
            bytes_c2s: 32 * 13,
            bytes_s2c: 32 * 7,
        };
        let report = reconcile("conv 2x2", &cost, &wire, &measured);
        assert!(report.pass);
        assert!(report.clone().into_result().is_ok());
        serde_json::to_string(&report).unwrap();

        let mut tampered = measured;
        tampered.coeff_outputs_server += 1;
        let bad = reconcile("conv 2x2", &cost, &wire, &tampered);
        assert!(!bad.pass);
        assert_eq!(bad.diffs.len(), 1);
        assert!(bad.into_result().is_err());
    }
}
