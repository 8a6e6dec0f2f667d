//! Channel draws, LJJ-style precoders, effective channels, and the
//! eigenvector-based alignment precoders over a 3-slot extension.

use std::fmt;
use std::str::FromStr;

use nalgebra::linalg::Schur;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{c, checked_inverse, condition_number, frobenius, CMat, SINGULAR_COND};
use crate::rng::complex_normal;

/// Consecutive singular draws tolerated before sampling gives up.
pub const MAX_REJECTIONS: usize = 100;

/// Symbol extension used by the alignment scheme.
pub const JS_SLOTS: usize = 3;

/// Entry distribution for channel draws.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChannelDist {
    /// CN(0,1) entries.
    Gaussian,
    /// Real and imaginary parts each uniform on [lo, hi].
    UniformBox { lo: f64, hi: f64 },
}

impl ChannelDist {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        match *self {
            ChannelDist::Gaussian => complex_normal(rng, 1.0),
            ChannelDist::UniformBox { lo, hi } => c(rng.random_range(lo..=hi), rng.random_range(lo..=hi)),
        }
    }
}

impl fmt::Display for ChannelDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelDist::Gaussian => f.write_str("gaussian"),
            ChannelDist::UniformBox { lo, hi } => write!(f, "uniform:{lo}:{hi}"),
        }
    }
}

impl FromStr for ChannelDist {
    type Err = Error;

    /// `gaussian` or `uniform:<lo>:<hi>`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "gaussian" {
            return Ok(ChannelDist::Gaussian);
        }
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() == 3 && parts[0] == "uniform" {
            let lo: f64 = parts[1].parse().map_err(|_| Error::Config(format!("bad bound in '{s}'")))?;
            let hi: f64 = parts[2].parse().map_err(|_| Error::Config(format!("bad bound in '{s}'")))?;
            if lo < hi {
                return Ok(ChannelDist::UniformBox { lo, hi });
            }
        }
        Err(Error::Config(format!("unknown channel distribution '{s}'")))
    }
}

/// The four channel matrices of one network draw.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub m: usize,
    /// Stored in the order H11, H12, H21, H22.
    pub h: [CMat; 4],
}

#[inline]
fn slot(tx: usize, rx: usize) -> usize {
    debug_assert!((1..=2).contains(&tx) && (1..=2).contains(&rx));
    2 * (tx - 1) + (rx - 1)
}

impl ChannelRealization {
    /// Wraps matrices given as H11, H12, H21, H22.
    pub fn new(h: [CMat; 4]) -> Result<Self> {
        let m = h[0].nrows();
        for x in &h {
            if x.nrows() != m || x.ncols() != m {
                return Err(Error::Config("channel matrices must be square and equal-sized".into()));
            }
            if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Config("channel matrix has non-finite entries".into()));
            }
        }
        Ok(ChannelRealization { m, h })
    }

    /// H_{tx,rx}, the channel from transmitter `tx` to receiver `rx` (1-based).
    pub fn h(&self, tx: usize, rx: usize) -> &CMat {
        &self.h[slot(tx, rx)]
    }

    pub fn scaled(&self, s: f64) -> Self {
        ChannelRealization { m: self.m, h: self.h.clone().map(|x| x * c(s, 0.0)) }
    }
}

/// A channel draw together with the number of singular draws it replaced.
#[derive(Clone, Debug)]
pub struct SampledChannel {
    pub channel: ChannelRealization,
    pub rejections: usize,
}

fn sample_matrix<R: Rng + ?Sized>(m: usize, dist: &ChannelDist, rng: &mut R, rejections: &mut usize) -> Result<CMat> {
    let mut streak = 0;
    loop {
        let h = CMat::from_fn(m, m, |_, _| dist.draw(rng));
        if condition_number(&h) <= SINGULAR_COND {
            return Ok(h);
        }
        *rejections += 1;
        streak += 1;
        if streak >= MAX_REJECTIONS {
            return Err(Error::SamplingExhausted(streak));
        }
    }
}

/// Draws four independent m x m channels, entries i.i.d. from `dist`.
pub fn sample_channel_set<R: Rng + ?Sized>(m: usize, dist: &ChannelDist, rng: &mut R) -> Result<SampledChannel> {
    if m != 2 && m != 4 {
        return Err(Error::Config(format!("antenna count {m} not supported")));
    }
    let mut rejections = 0;
    let mut draw = || sample_matrix(m, dist, rng, &mut rejections);
    let h = [draw()?, draw()?, draw()?, draw()?];
    Ok(SampledChannel { channel: ChannelRealization { m, h }, rejections })
}

/// Precoders V_ij with unit Frobenius norm.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecoderSet {
    /// V11, V12, V21, V22.
    pub v: [CMat; 4],
    /// sqrt(tr(H^{-1} H^{-H})) that each V_ij was divided by.
    pub norm: [f64; 4],
}

impl PrecoderSet {
    pub fn v(&self, tx: usize, rx: usize) -> &CMat {
        &self.v[slot(tx, rx)]
    }

    pub fn norm(&self, tx: usize, rx: usize) -> f64 {
        self.norm[slot(tx, rx)]
    }
}

/// Normalized inverse H^{-1} / ||H^{-1}||_F and the normalizer.
fn normalized_inverse(h: &CMat) -> Result<(CMat, f64)> {
    let inv = checked_inverse(h)?;
    let n = frobenius(&inv);
    Ok((inv.map(|z| z / n), n))
}

/// Precoders of one transmitter from its own two outgoing channels.
///
/// The signal for Rx-1 is steered with the inverse of the channel to Rx-2
/// and vice versa, so each stream arrives as a scaled identity at the
/// receiver that treats it as interference.
pub fn tx_precoders(h_to_rx1: &CMat, h_to_rx2: &CMat) -> Result<[(CMat, f64); 2]> {
    Ok([normalized_inverse(h_to_rx2)?, normalized_inverse(h_to_rx1)?])
}

pub fn ljj_precoders(ch: &ChannelRealization) -> Result<PrecoderSet> {
    let [(v11, n11), (v12, n12)] = tx_precoders(ch.h(1, 1), ch.h(1, 2))?;
    let [(v21, n21), (v22, n22)] = tx_precoders(ch.h(2, 1), ch.h(2, 2))?;
    Ok(PrecoderSet { v: [v11, v12, v21, v22], norm: [n11, n12, n21, n22] })
}

/// Channels seen by one receiver after precoding.
///
/// At Rx-1, `hhat` = H11 V11 and `ghat` = H21 V21 carry the desired
/// streams, `htilde` = H11 H12^{-1} and `gtilde` = H21 H22^{-1}. Rx-2 is the
/// mirror image with the receiver indices swapped.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveChannels {
    pub rx: usize,
    pub hhat: CMat,
    pub ghat: CMat,
    pub htilde: CMat,
    pub gtilde: CMat,
}

pub fn effective_channels(ch: &ChannelRealization, prec: &PrecoderSet, rx: usize) -> Result<EffectiveChannels> {
    if prec.v[0].nrows() != ch.m {
        return Err(Error::Config("precoder and channel sizes differ".into()));
    }
    let other = 3 - rx;
    Ok(EffectiveChannels {
        rx,
        hhat: ch.h(1, rx) * prec.v(1, rx),
        ghat: ch.h(2, rx) * prec.v(2, rx),
        htilde: ch.h(1, rx) * checked_inverse(ch.h(1, other))?,
        gtilde: ch.h(2, rx) * checked_inverse(ch.h(2, other))?,
    })
}

/// Block-diagonal I_3 (x) H acting on a slot-stacked 12-vector.
pub fn lift(h: &CMat) -> CMat {
    let m = h.nrows();
    let mut out = CMat::zeros(JS_SLOTS * m, JS_SLOTS * m);
    for t in 0..JS_SLOTS {
        out.view_mut((t * m, t * m), (m, m)).copy_from(h);
    }
    out
}

/// Relative eigenvalue gap below which the core matrix counts as defective.
pub const EIG_GAP_TOL: f64 = 1e-8;

/// Alignment precoders over the 3-slot extension.
#[derive(Clone, Debug)]
pub struct JsPrecoderSet {
    pub v11: CMat,
    pub v12: CMat,
    pub v21: CMat,
    pub v22: CMat,
    /// Eigenvector basis of the lifted matrix, 12 x 12.
    pub eigvecs: CMat,
    /// Eigenvalues of the 4 x 4 core, ordered as the core eigenvectors.
    pub eigvals: Vec<Complex64>,
    /// Unit-norm eigenvectors of the core, one per column.
    pub core_eigvecs: CMat,
}

impl JsPrecoderSet {
    pub fn v(&self, tx: usize, rx: usize) -> &CMat {
        match (tx, rx) {
            (1, 1) => &self.v11,
            (1, 2) => &self.v12,
            (2, 1) => &self.v21,
            _ => &self.v22,
        }
    }
}

/// Singular values below this fraction of the spectral scale span a null space.
const NULL_TOL: f64 = 1e-7;

/// Orthonormal basis (columns) of the approximate null space of (f - lambda I),
/// each vector rotated so its largest entry is real positive.
fn eigenspace(f: &CMat, lambda: Complex64, scale: f64) -> Vec<CMat> {
    let n = f.nrows();
    let a = f - CMat::identity(n, n) * lambda;
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let mut out = Vec::new();
    for (rank, &k) in order.iter().enumerate() {
        if rank > 0 && svd.singular_values[k] > NULL_TOL * scale {
            break;
        }
        let mut v = CMat::from_fn(n, 1, |i, _| vt[(k, i)].conj());
        let pivot = (0..n).max_by(|&i, &j| v[(i, 0)].norm().total_cmp(&v[(j, 0)].norm())).unwrap();
        let phase = v[(pivot, 0)] / v[(pivot, 0)].norm();
        let norm = frobenius(&v);
        v.iter_mut().for_each(|z| *z /= phase * norm);
        out.push(v);
    }
    out
}

/// Eigen-decomposition of F = H11^{-1} H21 H22^{-1} H12 and the precoders built from it.
///
/// Eigenvalues are sorted by magnitude (descending) and then by angle. The
/// lifted basis assigns slot t of column group k the core eigenvector
/// (k + t) mod 4, so V11 column k is [f_k; f_{k+1}; 0] and V12 column k is
/// [f_k; 0; f_{k+2}]. Grouping one eigenvector per triple instead makes
/// H21 V21 a column-wise multiple of H11 V11 and the desired signals
/// collapse into a 4-dimensional space.
pub fn js_precoders(ch: &ChannelRealization) -> Result<JsPrecoderSet> {
    if ch.m != 4 {
        return Err(Error::Config("alignment scheme needs 4 antennas".into()));
    }
    let f = checked_inverse(ch.h(1, 1))? * ch.h(2, 1) * checked_inverse(ch.h(2, 2))? * ch.h(1, 2);
    let schur = Schur::new(f.clone());
    let mut eigvals: Vec<Complex64> = schur
        .eigenvalues()
        .ok_or_else(|| Error::Degenerate("Schur form did not converge".into()))?
        .iter()
        .copied()
        .collect();
    eigvals.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(a.arg().total_cmp(&b.arg())));
    let scale = eigvals[0].norm().max(f64::MIN_POSITIVE);
    // Clusters of (numerically) equal eigenvalues share one eigenspace, which
    // must have full dimension; a defective cluster is resampled.
    let mut core = CMat::zeros(4, 4);
    let mut k = 0;
    while k < 4 {
        let mut end = k + 1;
        while end < 4 && (eigvals[end] - eigvals[k]).norm() <= EIG_GAP_TOL * scale {
            end += 1;
        }
        let space = eigenspace(&f, eigvals[k], scale);
        if space.len() < end - k {
            return Err(Error::Degenerate("defective eigenvalue in alignment matrix".into()));
        }
        for (col, v) in (k..end).zip(&space) {
            core.set_column(col, &v.column(0));
        }
        k = end;
    }
    let cond = condition_number(&core);
    if !(cond <= SINGULAR_COND) {
        return Err(Error::Degenerate(format!("eigenvector basis ill-conditioned ({cond:.3e})")));
    }

    let mut eigvecs = CMat::zeros(12, 12);
    for k in 0..4 {
        for t in 0..JS_SLOTS {
            let src = (k + t) % 4;
            eigvecs.view_mut((4 * t, 3 * k + t), (4, 1)).copy_from(&core.column(src));
        }
    }
    let pick = |rows: [usize; 2]| {
        let mut s = CMat::zeros(12, 4);
        for k in 0..4 {
            for r in rows {
                s[(3 * k + r, k)] = c(1.0, 0.0);
            }
        }
        s
    };
    let v11 = &eigvecs * pick([0, 1]);
    let v12 = &eigvecs * pick([0, 2]);
    let v21 = checked_inverse(&lift(ch.h(2, 2)))? * lift(ch.h(1, 2)) * &v11;
    let v22 = checked_inverse(&lift(ch.h(2, 1)))? * lift(ch.h(1, 1)) * &v12;
    Ok(JsPrecoderSet { v11, v12, v21, v22, eigvecs, eigvals, core_eigvecs: core })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rel_diff;
    use crate::rng::stream_rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(d: &[f64]) -> CMat {
        CMat::from_fn(d.len(), d.len(), |i, j| if i == j { c(d[i], 0.0) } else { c(0.0, 0.0) })
    }

    fn gaussian(m: usize, seed: u64) -> ChannelRealization {
        sample_channel_set(m, &ChannelDist::Gaussian, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap().channel
    }

    #[test]
    fn sampling_is_deterministic() {
        assert_eq!(gaussian(2, 7), gaussian(2, 7));
        assert_ne!(gaussian(2, 7), gaussian(2, 8));
    }

    #[test]
    fn uniform_box_support() {
        let d = ChannelDist::UniformBox { lo: -1.0, hi: 1.0 };
        let ch = sample_channel_set(2, &d, &mut ChaCha8Rng::seed_from_u64(3)).unwrap().channel;
        assert!(ch.h.iter().flat_map(|h| h.iter()).all(|z| z.re.abs() <= 1.0 && z.im.abs() <= 1.0));
    }

    #[test]
    fn gaussian_entry_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (mut s, mut n) = (0.0, 0usize);
        for _ in 0..100_000 / 16 {
            let ch = sample_channel_set(4, &ChannelDist::Gaussian, &mut rng).unwrap().channel;
            for z in ch.h.iter().flat_map(|h| h.iter()) {
                s += z.norm_sqr();
                n += 1;
            }
        }
        let var = s / n as f64;
        assert!((var - 1.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn exhausted_sampler_reports_error() {
        let degenerate = ChannelDist::UniformBox { lo: 0.5, hi: 0.5 };
        let r = sample_channel_set(2, &degenerate, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(matches!(r, Err(Error::SamplingExhausted(MAX_REJECTIONS))));
    }

    #[test]
    fn identity_channel_precoder() {
        let i2 = CMat::identity(2, 2);
        let ch = ChannelRealization::new([i2.clone(), i2.clone(), i2.clone(), i2]).unwrap();
        let p = ljj_precoders(&ch).unwrap();
        let expect = CMat::identity(2, 2) * c(1.0 / 2f64.sqrt(), 0.0);
        assert!(rel_diff(p.v(1, 1), &expect) < 1e-15);
    }

    #[test]
    fn diagonal_channel_precoder() {
        let g = gaussian(2, 1);
        let ch = ChannelRealization::new([g.h[0].clone(), diag(&[2.0, 1.0]), g.h[2].clone(), g.h[3].clone()]).unwrap();
        let p = ljj_precoders(&ch).unwrap();
        let expect = diag(&[0.5 / 1.25f64.sqrt(), 1.0 / 1.25f64.sqrt()]);
        assert!(rel_diff(p.v(1, 1), &expect) < 1e-15);
        assert!((p.norm(1, 1) - 1.25f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn precoders_have_unit_norm_and_right_direction() {
        for seed in 0..50 {
            for m in [2, 4] {
                let ch = gaussian(m, seed);
                let p = ljj_precoders(&ch).unwrap();
                for v in &p.v {
                    assert!((frobenius(v) - 1.0).abs() < 1e-12);
                }
                // V11 is proportional to H12^{-1}: H12 V11 is a positive multiple of I
                let prod = ch.h(1, 2) * p.v(1, 1) * c(p.norm(1, 1), 0.0);
                assert!(rel_diff(&prod, &CMat::identity(m, m)) < 1e-10);
                let prod = ch.h(2, 1) * p.v(2, 2) * c(p.norm(2, 2), 0.0);
                assert!(rel_diff(&prod, &CMat::identity(m, m)) < 1e-10);
            }
        }
    }

    #[test]
    fn effective_channel_relations() {
        let ch = gaussian(2, 11);
        let p = ljj_precoders(&ch).unwrap();
        let e = effective_channels(&ch, &p, 1).unwrap();
        assert!(rel_diff(&(&e.hhat * c(p.norm(1, 1), 0.0)), &e.htilde) < 1e-12);
        // independent triple-loop product for G-hat
        let (h, v) = (ch.h(2, 1), p.v(2, 1));
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = c(0.0, 0.0);
                for k in 0..2 {
                    acc += h[(i, k)] * v[(k, j)];
                }
                assert!((acc - e.ghat[(i, j)]).norm() < 1e-14);
            }
        }
        let same = ChannelRealization::new([ch.h[0].clone(), ch.h[0].clone(), ch.h[2].clone(), ch.h[3].clone()]).unwrap();
        let p = ljj_precoders(&same).unwrap();
        let e = effective_channels(&same, &p, 1).unwrap();
        assert!(rel_diff(&e.htilde, &CMat::identity(2, 2)) < 1e-14);
        let e2 = effective_channels(&ch, &ljj_precoders(&ch).unwrap(), 2).unwrap();
        let p = ljj_precoders(&ch).unwrap();
        assert!(rel_diff(&(&e2.hhat * c(p.norm(1, 2), 0.0)), &e2.htilde) < 1e-12);
    }

    fn js_residuals(ch: &ChannelRealization, p: &JsPrecoderSet) -> (f64, f64) {
        let l = |i, j| lift(ch.h(i, j));
        let a1 = rel_diff(&(l(2, 2) * &p.v21), &(l(1, 2) * &p.v11));
        let a2 = rel_diff(&(l(2, 1) * &p.v22), &(l(1, 1) * &p.v12));
        (a1, a2)
    }

    #[test]
    fn js_alignment_and_eigenvectors() {
        let ch = gaussian(4, 5);
        let p = js_precoders(&ch).unwrap();
        let (a1, a2) = js_residuals(&ch, &p);
        assert!(a1 < 1e-10 && a2 < 1e-10, "{a1} {a2}");
        let f = checked_inverse(ch.h(1, 1)).unwrap() * ch.h(2, 1) * checked_inverse(ch.h(2, 2)).unwrap() * ch.h(1, 2);
        let fl = lift(&f);
        for col in 0..12 {
            let e = p.eigvecs.column(col).into_owned();
            let lambda = p.eigvals[(col / 3 + col % 3) % 4];
            let r = &fl * &e - &e * lambda;
            assert!(r.norm() <= 1e-9 * e.norm(), "column {col}");
        }
        let mut block = CMat::zeros(12, 12);
        block.view_mut((0, 0), (12, 4)).copy_from(&(lift(ch.h(1, 1)) * &p.v11));
        block.view_mut((0, 4), (12, 4)).copy_from(&(lift(ch.h(2, 1)) * &p.v21));
        block.view_mut((0, 8), (12, 4)).copy_from(&(lift(ch.h(1, 1)) * &p.v12));
        assert_eq!(crate::linalg::numeric_rank(&block, 1e-10), 12);
    }

    #[test]
    fn js_eigenvalue_order() {
        let p = js_precoders(&gaussian(4, 9)).unwrap();
        for w in p.eigvals.windows(2) {
            assert!(w[0].norm() >= w[1].norm());
        }
    }

    #[test]
    fn js_identity_multiples_align() {
        // F is a multiple of the identity: one eigenvalue with a full eigenspace.
        let i4 = CMat::identity(4, 4);
        let ch = ChannelRealization::new([i4.clone() * c(2.0, 0.0), i4.clone(), i4.clone() * c(0.5, 0.0), i4]).unwrap();
        let p = js_precoders(&ch).unwrap();
        let (a1, a2) = js_residuals(&ch, &p);
        assert!(a1 < 1e-12 && a2 < 1e-12);
    }

    #[test]
    fn js_defective_core_is_rejected() {
        // F = H11^{-1} H21 with H12 = H22 = I; a Jordan block H21 is defective.
        let i4 = CMat::identity(4, 4);
        let mut jordan = CMat::identity(4, 4);
        jordan[(0, 1)] = c(1.0, 0.0);
        let ch = ChannelRealization::new([i4.clone(), i4.clone(), jordan, i4]).unwrap();
        assert!(matches!(js_precoders(&ch), Err(Error::Degenerate(_))));
    }

    #[test]
    fn js_identity_scaled_channels_still_align() {
        // Distinct diagonal entries keep F diagonal with distinct eigenvalues.
        let ch = ChannelRealization::new([
            diag(&[1.0, 2.0, 3.0, 4.0]),
            CMat::identity(4, 4),
            CMat::identity(4, 4) * c(2.0, 0.0),
            CMat::identity(4, 4) * c(3.0, 0.0),
        ])
        .unwrap();
        let p = js_precoders(&ch).unwrap();
        let (a1, a2) = js_residuals(&ch, &p);
        assert!(a1 < 1e-12 && a2 < 1e-12);
    }

    #[test]
    fn stream_channels_differ() {
        let a = sample_channel_set(2, &ChannelDist::Gaussian, &mut stream_rng(1, 0, 0)).unwrap().channel;
        let b = sample_channel_set(2, &ChannelDist::Gaussian, &mut stream_rng(1, 0, 1)).unwrap().channel;
        assert_ne!(a, b);
    }
}
