//! Transmitter assembly for every scheme and the noisy channel.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::channel::{lift, ChannelRealization, JsPrecoderSet, PrecoderSet};
use crate::constellation::ConstellationKind;
use crate::error::{Error, Result};
use crate::linalg::{c, frobenius, CMat, CVec};
use crate::rng::complex_normal;
use crate::stbc::{ljj_blocks, msr_blocks, SymbolBlock};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    /// Superposed Alamouti codes over three slots, two antennas.
    Ljj,
    /// Coordinate-interleaved 4x4 code over six slots, four antennas.
    Msr,
    /// Eigenvector alignment over a 3-symbol extension, four antennas.
    Js,
    /// The four-antenna scheme with theta = 0.
    Trivial,
    /// Time sharing with single-user SVD precoding.
    Tdma,
}

impl SchemeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeKind::Ljj => "ljj",
            SchemeKind::Msr => "msr",
            SchemeKind::Js => "js",
            SchemeKind::Trivial => "trivial",
            SchemeKind::Tdma => "tdma",
        }
    }

    /// Antennas per node, or `None` when the scheme works with either size.
    pub fn antennas(self) -> Option<usize> {
        match self {
            SchemeKind::Ljj => Some(2),
            SchemeKind::Msr | SchemeKind::Js | SchemeKind::Trivial => Some(4),
            SchemeKind::Tdma => None,
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ljj" => Ok(SchemeKind::Ljj),
            "msr" => Ok(SchemeKind::Msr),
            "js" => Ok(SchemeKind::Js),
            "trivial" | "trivial_repetition" => Ok(SchemeKind::Trivial),
            "tdma" | "tdma_srp" => Ok(SchemeKind::Tdma),
            _ => Err(Error::Config(format!("unknown scheme '{s}'"))),
        }
    }
}

/// Link parameters shared by transmitter and receiver.
#[derive(Clone, Debug, PartialEq)]
pub struct SchemeConfig {
    pub scheme: SchemeKind,
    pub m: usize,
    pub theta: f64,
    pub phi: f64,
    pub constellation: ConstellationKind,
    /// Linear transmit power; noise has unit variance per complex dimension.
    pub power: f64,
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        match self.scheme.antennas() {
            Some(m) if m != self.m => Err(Error::Config(format!("scheme {} needs m = {m}, got {}", self.scheme, self.m))),
            None if self.m != 2 && self.m != 4 => Err(Error::Config(format!("m = {} not supported", self.m))),
            _ if self.scheme == SchemeKind::Trivial && self.theta != 0.0 => {
                Err(Error::Config("trivial repetition uses theta = 0".into()))
            }
            _ if !(self.power > 0.0) => Err(Error::Config("power must be positive".into())),
            _ => Ok(()),
        }
    }
}

/// Amplitude sqrt(3P/4) shared by the Alamouti-based schemes.
pub fn stbc_amplitude(power: f64) -> f64 {
    (0.75 * power).sqrt()
}

/// Amplitude sqrt(3P/2) of the alignment scheme.
pub fn js_amplitude(power: f64) -> f64 {
    (1.5 * power).sqrt()
}

/// One transmitter's signal, scale * (V_i1 X_i1 + V_i2 X_i2).
///
/// Only the transmitter's own precoders enter, which in turn depend only on
/// its own two outgoing channels.
pub fn superpose(v_i1: &CMat, x_i1: &CMat, v_i2: &CMat, x_i2: &CMat, scale: f64) -> CMat {
    (v_i1 * x_i1 + v_i2 * x_i2) * c(scale, 0.0)
}

fn check_blocks(b: &[&SymbolBlock; 4], len: usize) {
    let order = [(1, 1), (1, 2), (2, 1), (2, 2)];
    for (blk, (tx, rx)) in b.iter().zip(order) {
        assert_eq!(blk.x.len(), len, "block {tx}{rx} has wrong length");
        assert!(blk.source_tx == tx && blk.dest_rx == rx, "blocks must be ordered 11, 12, 21, 22");
    }
}

/// Two-antenna scheme; `b` holds the blocks for (1,1), (1,2), (2,1), (2,2).
pub fn ljj_transmit(prec: &PrecoderSet, b: [&SymbolBlock; 4], power: f64) -> (CMat, CMat) {
    check_blocks(&b, 2);
    let s = stbc_amplitude(power);
    let (x11, x12) = ljj_blocks(b[0], b[1]);
    let (x21, x22) = ljj_blocks(b[2], b[3]);
    (
        superpose(prec.v(1, 1), &x11, prec.v(1, 2), &x12, s),
        superpose(prec.v(2, 1), &x21, prec.v(2, 2), &x22, s),
    )
}

/// Four-antenna scheme over six slots.
pub fn msr_transmit(prec: &PrecoderSet, b: [&SymbolBlock; 4], power: f64, theta: f64) -> (CMat, CMat) {
    check_blocks(&b, 8);
    let s = stbc_amplitude(power);
    let (x11, x12) = msr_blocks(b[0], b[1], theta);
    let (x21, x22) = msr_blocks(b[2], b[3], theta);
    (
        superpose(prec.v(1, 1), &x11, prec.v(1, 2), &x12, s),
        superpose(prec.v(2, 1), &x21, prec.v(2, 2), &x22, s),
    )
}

/// Alignment scheme; `x` holds the 4-symbol streams for (1,1), (1,2), (2,1), (2,2).
///
/// Each precoder is scaled by 1/||V||_F so every stream carries unit energy
/// per extension symbol, giving average power P per slot. Output columns
/// are the three slots of the extension.
pub fn js_transmit(js: &JsPrecoderSet, x: [&[Complex64]; 4], power: f64) -> (CMat, CMat) {
    let a = js_amplitude(power);
    let stream = |v: &CMat, s: &[Complex64]| v * CVec::from_column_slice(s) * c(a / frobenius(v), 0.0);
    let x1 = stream(&js.v11, x[0]) + stream(&js.v12, x[1]);
    let x2 = stream(&js.v21, x[2]) + stream(&js.v22, x[3]);
    (CMat::from_column_slice(4, 3, x1.as_slice()), CMat::from_column_slice(4, 3, x2.as_slice()))
}

/// Normalizers ||V_ik||_F of the alignment precoders in order 11, 12, 21, 22.
pub fn js_norms(js: &JsPrecoderSet) -> [f64; 4] {
    [frobenius(&js.v11), frobenius(&js.v12), frobenius(&js.v21), frobenius(&js.v22)]
}

pub fn noise_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    let mut n = CMat::zeros(rows, cols);
    // filled column by column so the draw order is fixed
    for j in 0..cols {
        for i in 0..rows {
            n[(i, j)] = complex_normal(rng, 1.0);
        }
    }
    n
}

/// Y_j = H_1j X1 + H_2j X2 + N_j with unit-variance circular noise.
///
/// Power scaling is already inside the transmit matrices.
pub fn apply_channel<R: Rng + ?Sized>(ch: &ChannelRealization, x1: &CMat, x2: &CMat, noise: bool, rng: &mut R) -> (CMat, CMat) {
    let mut y1 = ch.h(1, 1) * x1 + ch.h(2, 1) * x2;
    let mut y2 = ch.h(1, 2) * x1 + ch.h(2, 2) * x2;
    if noise {
        y1 += noise_matrix(y1.nrows(), y1.ncols(), rng);
        y2 += noise_matrix(y2.nrows(), y2.ncols(), rng);
    }
    (y1, y2)
}

/// The slot-stacked 12-vector of a 4 x 3 extension matrix.
pub fn stack_slots(y: &CMat) -> CVec {
    CVec::from_column_slice(y.as_slice())
}

/// Lifted channel I_3 (x) H_ij.
pub fn lifted(ch: &ChannelRealization, tx: usize, rx: usize) -> CMat {
    lift(ch.h(tx, rx))
}

/// Rotation parameters (tau, psi, theta) of one 2x2 precoder block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TdmaBlock {
    pub tau: f64,
    pub psi: f64,
    pub theta: f64,
}

impl TdmaBlock {
    /// tau = 1, psi = pi/4, theta = 0 makes the block the identity.
    pub const IDENTITY: TdmaBlock = TdmaBlock { tau: 1.0, psi: std::f64::consts::FRAC_PI_4, theta: 0.0 };

    /// sqrt(2 tau^2) [[cos psi cos theta, -cos psi sin theta], [sin psi sin theta, sin psi cos theta]]
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        let g = (2.0 * self.tau * self.tau).sqrt();
        let (sp, cp) = self.psi.sin_cos();
        let (st, ct) = self.theta.sin_cos();
        [[g * cp * ct, -g * cp * st], [g * sp * st, g * sp * ct]]
    }
}

/// Real precoder P: one block for two antennas; for four antennas block 1
/// sits on indices {1,4} and block 2 on {2,3}.
pub fn tdma_p_matrix(m: usize, blocks: &[TdmaBlock]) -> Result<DMatrix<f64>> {
    let placements: &[[usize; 2]] = match m {
        2 => &[[0, 1]],
        4 => &[[0, 3], [1, 2]],
        _ => return Err(Error::Config(format!("TDMA precoder for m = {m} not defined"))),
    };
    if blocks.len() != placements.len() {
        return Err(Error::Config(format!(
            "TDMA precoder for m = {m} needs {} parameter blocks, got {}",
            placements.len(),
            blocks.len()
        )));
    }
    let mut p = DMatrix::zeros(m, m);
    for (blk, idx) in blocks.iter().zip(placements) {
        let b = blk.matrix();
        for r in 0..2 {
            for s in 0..2 {
                p[(idx[r], idx[s])] = b[r][s];
            }
        }
    }
    Ok(p)
}

/// SVD precoder Q = V P for one single-user link, H = U D V^H.
#[derive(Clone, Debug)]
pub struct TdmaPrecoder {
    pub q: CMat,
    pub u: CMat,
    pub v: CMat,
    /// Singular values, descending.
    pub d: Vec<f64>,
    pub p: DMatrix<f64>,
}

pub fn tdma_precoder(h: &CMat, blocks: Option<&[TdmaBlock]>) -> Result<TdmaPrecoder> {
    let blocks = blocks.ok_or_else(|| Error::Config("TDMA precoder parameters (tau, psi, theta) not supplied".into()))?;
    let m = h.nrows();
    let p = tdma_p_matrix(m, blocks)?;
    let svd = h.clone().svd(true, true);
    let (u0, vt0) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let u = CMat::from_fn(m, m, |i, k| u0[(i, order[k])]);
    let v = CMat::from_fn(m, m, |i, k| vt0[(order[k], i)].conj());
    let d = order.iter().map(|&k| svd.singular_values[k]).collect();
    let q = &v * p.map(|x| c(x, 0.0));
    Ok(TdmaPrecoder { q, u, v, d, p })
}

/// Transmit vector Q x.
pub fn tdma_srp_transmit(pre: &TdmaPrecoder, x: &[Complex64]) -> CVec {
    &pre.q * CVec::from_column_slice(x)
}

/// Effective matrix sqrt(SNR/M) D P seen after the receiver applies U^H.
pub fn tdma_model(pre: &TdmaPrecoder, snr: f64) -> CMat {
    let m = pre.d.len();
    let g = (snr / m as f64).sqrt();
    CMat::from_fn(m, m, |i, j| c(g * pre.d[i] * pre.p[(i, j)], 0.0))
}
