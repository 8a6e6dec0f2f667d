//! Numerical checks of the structural and almost-sure properties the
//! schemes rely on. Every report renders as `key=value` lines.

use num_complex::Complex64;
use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::channel::{
    effective_channels, js_precoders, ljj_precoders, sample_channel_set, ChannelDist, ChannelRealization,
};
use crate::error::Result;
use crate::linalg::{c, cis, frobenius, numeric_rank, sigma_ratio, CMat};
use crate::receiver::ic::{Half, IcChain};
use crate::receiver::ljj::ljj_process;
use crate::rng::stream_rng;
use crate::schemes::{apply_channel, ljj_transmit, lifted};
use crate::stbc::SymbolBlock;

fn fmt_c(z: Complex64) -> String {
    format!("{:.12e}{:+.12e}i", z.re, z.im)
}

/// Smallest sigma_min / sigma_max of R over many draws.
#[derive(Clone, Debug, PartialEq)]
pub struct RankReport {
    pub draws: usize,
    pub min_sigma_ratio: f64,
    pub failures: usize,
    pub threshold: f64,
}

impl RankReport {
    pub fn kv_lines(&self) -> Vec<(String, String)> {
        vec![
            ("draws".into(), self.draws.to_string()),
            ("min_sigma_ratio".into(), format!("{:.6e}", self.min_sigma_ratio)),
            ("failures".into(), self.failures.to_string()),
            ("threshold".into(), format!("{:e}", self.threshold)),
        ]
    }
}

/// R at receiver `rx`, measured by pushing unit symbols through the
/// transmitter, the channel and the zero-forcing step.
pub fn measured_r(ch: &ChannelRealization, rx: usize) -> Result<CMat> {
    let prec = ljj_precoders(ch)?;
    let eff = effective_channels(ch, &prec, rx)?;
    let order = [(1, 1), (1, 2), (2, 1), (2, 2)];
    let mut r = CMat::zeros(4, 4);
    let mut sink = stream_rng(0, 0, 0);
    // P = 4/3 makes the transmit amplitude one
    let power = 4.0 / 3.0;
    for col in 0..4 {
        let blocks: [SymbolBlock; 4] = std::array::from_fn(|i| {
            let mut x = vec![c(0.0, 0.0); 2];
            // columns 1-2 belong to the Tx-1 block, 3-4 to the Tx-2 block
            if order[i] == (col / 2 + 1, rx) {
                x[col % 2] = c(1.0, 0.0);
            }
            SymbolBlock::new(x, order[i].0, order[i].1)
        });
        let (x1, x2) = ljj_transmit(&prec, [&blocks[0], &blocks[1], &blocks[2], &blocks[3]], power);
        let (y1, y2) = apply_channel(ch, &x1, &x2, false, &mut sink);
        let obs = ljj_process(if rx == 1 { &y1 } else { &y2 }, &eff, power);
        for (i, z) in obs.y.iter().enumerate() {
            r[(i, col)] = *z;
        }
    }
    Ok(r)
}

/// Worst conditioning of R over both receivers of one channel.
pub fn r_sigma_ratio(ch: &ChannelRealization) -> Result<f64> {
    Ok(sigma_ratio(&measured_r(ch, 1)?).min(sigma_ratio(&measured_r(ch, 2)?)))
}

/// Full-rank check of R on `n_draws` two-antenna channels.
pub fn check_r_fullrank(n_draws: usize, dist: &ChannelDist, seed: u64, threshold: f64) -> Result<RankReport> {
    let ratios: Vec<f64> = (0..n_draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, 0, i as u64);
            let ch = sample_channel_set(2, dist, &mut rng)?.channel;
            r_sigma_ratio(&ch)
        })
        .collect::<Result<_>>()?;
    Ok(RankReport {
        draws: n_draws,
        min_sigma_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        failures: ratios.iter().filter(|&&r| r < threshold).count(),
        threshold,
    })
}

/// Alignment residuals and the dimension of the desired signal space.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentReport {
    pub align1: f64,
    pub align2: f64,
    pub signal_rank: usize,
}

impl AlignmentReport {
    pub fn kv_lines(&self) -> Vec<(String, String)> {
        vec![
            ("align1".into(), format!("{:.6e}", self.align1)),
            ("align2".into(), format!("{:.6e}", self.align2)),
            ("signal_rank".into(), self.signal_rank.to_string()),
        ]
    }
}

/// Relative tolerance for the rank of the desired signal space.
pub const SIGNAL_RANK_TOL: f64 = 1e-10;

pub fn check_js_alignment(ch: &ChannelRealization) -> Result<AlignmentReport> {
    let js = js_precoders(ch)?;
    let rel = |a: CMat, b: CMat| frobenius(&(&a - &b)) / frobenius(&b).max(f64::MIN_POSITIVE);
    let align1 = rel(lifted(ch, 2, 2) * &js.v21, lifted(ch, 1, 2) * &js.v11);
    let align2 = rel(lifted(ch, 2, 1) * &js.v22, lifted(ch, 1, 1) * &js.v12);
    let mut s = CMat::zeros(12, 12);
    s.columns_mut(0, 4).copy_from(&(lifted(ch, 1, 1) * &js.v11));
    s.columns_mut(4, 4).copy_from(&(lifted(ch, 2, 1) * &js.v21));
    s.columns_mut(8, 4).copy_from(&(lifted(ch, 1, 1) * &js.v12));
    Ok(AlignmentReport { align1, align2, signal_rank: numeric_rank(&s, SIGNAL_RANK_TOL) })
}

/// Pivot quantities of the first-half chain for the Tx-1 user at Rx-1.
#[derive(Clone, Debug, PartialEq)]
pub struct PivotReport {
    pub theta: f64,
    /// (|e1|^2 + |e2|^2)(e^{j theta} conj(v12) v14 + e^{-j theta} v11 conj(v13)).
    pub p_value: Complex64,
    /// Coefficient of Re(h)^2 in [H''_3^H H''_1]_11, h = entry (3,1) of H11,
    /// obtained by finite differences of the full chain.
    pub coeff_re2: Complex64,
    /// Coefficient of Im(h)^2, by the same route.
    pub coeff_im2: Complex64,
    /// Every squared row norm used as a normalizer.
    pub stage_norms: Vec<f64>,
    /// Entry (1,1) of the stage-3 matrix.
    pub final_entry: Complex64,
}

impl PivotReport {
    pub fn kv_lines(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("theta".into(), format!("{:.12}", self.theta)),
            ("p_value".into(), fmt_c(self.p_value)),
            ("coeff_re2".into(), fmt_c(self.coeff_re2)),
            ("coeff_im2".into(), fmt_c(self.coeff_im2)),
            ("final_entry".into(), fmt_c(self.final_entry)),
            ("final_entry_abs".into(), format!("{:.6e}", self.final_entry.norm())),
            ("min_stage_norm".into(), format!("{:.6e}", self.stage_norms.iter().copied().fold(f64::INFINITY, f64::min))),
        ];
        for (i, n) in self.stage_norms.iter().enumerate() {
            out.push((format!("stage_norm_{}", i + 1), format!("{n:.6e}")));
        }
        out
    }
}

fn rx1_chain(ch: &ChannelRealization, theta: f64) -> Result<IcChain> {
    let prec = ljj_precoders(ch)?;
    let eff = effective_channels(ch, &prec, 1)?;
    IcChain::for_user(&eff, Half::First, theta, 1)
}

fn h3h_h1(ch: &ChannelRealization, theta: f64) -> Result<Complex64> {
    let chain = rx1_chain(ch, theta)?;
    Ok((chain.stage2[2].adjoint() * chain.stage2[0])[(0, 0)])
}

/// Second difference of [H''_3^H H''_1]_11 along `dir` in entry (3,1) of H11.
fn quadratic_coefficient(ch: &ChannelRealization, theta: f64, dir: Complex64) -> Result<Complex64> {
    let at = |t: f64| {
        let mut h = ch.h.clone();
        h[0][(2, 0)] += dir * t;
        h3h_h1(&ChannelRealization::new(h)?, theta)
    };
    Ok((at(1.0)? + at(-1.0)? - at(0.0)? * 2.0) / 2.0)
}

/// p from the closed form, next to its finite-difference counterparts.
pub fn check_chain_pivots(ch: &ChannelRealization, theta: f64) -> Result<PivotReport> {
    let chain = rx1_chain(ch, theta)?;
    let prec = ljj_precoders(ch)?;
    let v = prec.v(1, 1);
    let g2p = &chain.stage1_g[1];
    let g3 = &chain.g_blocks[2];
    let e1m = g2p.adjoint() / c(crate::linalg::row0_norm_sqr(g2p), 0.0) * (g3.adjoint() / c(crate::linalg::row0_norm_sqr(g3), 0.0));
    let (e1, e2) = (e1m[(0, 0)], e1m[(0, 1)]);
    let p_value = (e1.norm_sqr() + e2.norm_sqr())
        * (cis(theta) * v[(0, 1)].conj() * v[(0, 3)] + cis(-theta) * v[(0, 0)] * v[(0, 2)].conj());
    Ok(PivotReport {
        theta,
        p_value,
        coeff_re2: quadratic_coefficient(ch, theta, c(1.0, 0.0))?,
        coeff_im2: quadratic_coefficient(ch, theta, c(0.0, 1.0))?,
        stage_norms: chain.pivots.clone(),
        final_entry: chain.stage3[(0, 0)],
    })
}

/// The H22 choice used to show the e-coefficients are non-constant, and
/// its inverse as tabulated alongside.
pub fn h22_examples() -> [(CMat, CMat); 2] {
    let mk = |rows: [[f64; 4]; 4]| CMat::from_fn(4, 4, |i, j| c(rows[i][j], 0.0));
    let h1 = mk([[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0], [1.5, -1.0, -0.5, -0.5], [-1.0, 1.0, 0.0, 0.0]]);
    let h2 = mk([[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0], [1.0, -0.5, -0.5, -0.5], [-0.5, 0.5, 0.0, 0.0]]);
    let i1 = mk([[1.0, 1.0, 2.0, 2.0], [1.0, 1.0, 2.0, 3.0], [1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]]);
    let i2 = mk([[1.0, 1.0, 2.0, 2.0], [1.0, 1.0, 2.0, 4.0], [1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]]);
    [(h1, i1), (h2, i2)]
}

/// Coefficient of |h21_12|^2 in the e-coefficient argument, written in
/// terms of the entries a_ij of H22^{-1}:
/// (|a21|^2 + |a22|^2)(e^{j t} conj(a11) a13 + e^{-j t} a12 conj(a14))
///   - (|a11|^2 + |a12|^2)(e^{j t} conj(a21) a23 + e^{-j t} a22 conj(a24)).
pub fn e_coefficient_expression(h22_inv: &CMat, theta: f64) -> Complex64 {
    let a = |i: usize, j: usize| h22_inv[(i - 1, j - 1)];
    let (e, ei) = (cis(theta), cis(-theta));
    (a(2, 1).norm_sqr() + a(2, 2).norm_sqr()) * (e * a(1, 1).conj() * a(1, 3) + ei * a(1, 2) * a(1, 4).conj())
        - (a(1, 1).norm_sqr() + a(1, 2).norm_sqr()) * (e * a(2, 1).conj() * a(2, 3) + ei * a(2, 2) * a(2, 4).conj())
}

/// Estimated pairwise error probability at one power.
#[derive(Clone, Debug, PartialEq)]
pub struct PepPoint {
    pub p_db: f64,
    pub pep: f64,
    /// Standard error of the Monte Carlo mean.
    pub std_err: f64,
}

pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// E[Q(sqrt(P' ||H11 V11 dX11 + H21 V21 dX21||^2 / 2))], P' = 3P/4, over
/// four-antenna channel draws shared by every power point.
pub fn pep_probe(dx11: &CMat, dx21: &CMat, p_db: &[f64], n_draws: usize, seed: u64) -> Result<Vec<PepPoint>> {
    let dists: Vec<f64> = (0..n_draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, 0, i as u64);
            let ch = sample_channel_set(4, &ChannelDist::Gaussian, &mut rng)?.channel;
            let prec = ljj_precoders(&ch)?;
            let d = ch.h(1, 1) * prec.v(1, 1) * dx11 + ch.h(2, 1) * prec.v(2, 1) * dx21;
            Ok(d.norm_squared())
        })
        .collect::<Result<_>>()?;
    Ok(p_db
        .iter()
        .map(|&db| {
            let pp = 0.75 * 10f64.powf(db / 10.0);
            let q: Vec<f64> = dists.iter().map(|d| q_function((pp * d / 2.0).sqrt())).collect();
            let n = q.len() as f64;
            let mean = q.iter().sum::<f64>() / n;
            let var = q.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            PepPoint { p_db: db, pep: mean, std_err: (var / n).sqrt() }
        })
        .collect())
}

/// Log-log slope of PEP against P between two points.
pub fn pep_slope(a: &PepPoint, b: &PepPoint) -> f64 {
    (b.pep.log10() - a.pep.log10()) / ((b.p_db - a.p_db) / 10.0)
}
