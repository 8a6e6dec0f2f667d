//! Three-stage successive cancellation on the four-antenna observation.
//!
//! Each column pair of Y' (columns 1-2 or 3-4, the second conjugated) gives
//! four 2-vectors z_i = H_i u + H_{i+4} w + G_i u' + G_{i+4} w', one per
//! receive antenna, where (u, w) are x'-symbol pairs of the user being
//! recovered and (u', w') those of the other user. Stage 1 removes u',
//! stage 2 removes w', stage 3 removes w. Every block is a 2x2 Alamouti
//! matrix, so B^H B is a multiple of the identity at every stage.

use nalgebra::Vector2;
use num_complex::Complex64;

use super::ProcessedObservation;
use crate::channel::EffectiveChannels;
use crate::error::{Error, Result};
use crate::linalg::{c, cis, row0_norm_sqr, CMat, Mat2};
use crate::stbc::{reflected, xprime_inverse};

/// Squared first-row norms below this abort the chain.
pub const PIVOT_TOL: f64 = 1e-14;

type V2 = Vector2<Complex64>;

/// Which column pair of Y' a chain runs on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Half {
    /// Columns 1-2: u = (x'1, x'2), w = (x'5, -conj x'6).
    First,
    /// Columns 3-4: u = (x'3, -conj x'4), w = (x'7, -conj x'8).
    Second,
}

/// All blocks of one cancellation chain.
#[derive(Clone, Debug, PartialEq)]
pub struct IcChain {
    /// H_1..H_8 of the user being recovered.
    pub h_blocks: [Mat2; 8],
    /// G_1..G_8 of the user being cancelled.
    pub g_blocks: [Mat2; 8],
    /// H'_1..H'_6.
    pub stage1_h: [Mat2; 6],
    /// G'_1..G'_3.
    pub stage1_g: [Mat2; 3],
    /// H''_1..H''_4.
    pub stage2: [Mat2; 4],
    /// H''_3^H H''_1 / ||H''_3(1,:)||^2 - H''_4^H H''_2 / ||H''_4(1,:)||^2.
    pub stage3: Mat2,
    /// Every squared row norm used as a normalizer, in order of use.
    pub pivots: Vec<f64>,
}

/// Intermediate observations of one chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainOutput {
    pub stage1: [V2; 3],
    pub stage2: [V2; 2],
    pub stage3: V2,
}

/// A^H / ||A(1,:)||^2, recording the pivot.
fn normalized_adjoint(a: &Mat2, pivots: &mut Vec<f64>) -> Result<Mat2> {
    let n = row0_norm_sqr(a);
    pivots.push(n);
    if n < PIVOT_TOL {
        return Err(Error::Degenerate(format!("cancellation pivot {n:.3e}")));
    }
    Ok(a.adjoint() / c(n, 0.0))
}

/// First-level blocks from one receiver-side effective channel.
pub fn first_blocks(m: &CMat, half: Half, theta: f64) -> [Mat2; 8] {
    assert_eq!(m.shape(), (4, 4));
    let e = cis(theta);
    let (plain, rotated) = match half {
        Half::First => (0, 2),
        Half::Second => (2, 0),
    };
    std::array::from_fn(|k| {
        let i = k % 4;
        if k < 4 {
            reflected(m[(i, plain)], m[(i, plain + 1)])
        } else {
            reflected(e * m[(i, rotated)], e * m[(i, rotated + 1)])
        }
    })
}

/// z_i = [Y'(i, c); conj Y'(i, c+1)] for the column pair of `half`.
pub fn half_observations(yp: &CMat, half: Half) -> [V2; 4] {
    let c0 = match half {
        Half::First => 0,
        Half::Second => 2,
    };
    std::array::from_fn(|i| V2::new(yp[(i, c0)], yp[(i, c0 + 1)].conj()))
}

/// (u, w) pairs of one user's x' symbols for `half`.
pub fn half_symbols(xp: &[Complex64; 8], half: Half) -> (V2, V2) {
    match half {
        Half::First => (V2::new(xp[0], xp[1]), V2::new(xp[4], -xp[5].conj())),
        Half::Second => (V2::new(xp[2], -xp[3].conj()), V2::new(xp[6], -xp[7].conj())),
    }
}

fn store_half(xp: &mut [Complex64; 8], half: Half, u: V2, w: V2) {
    match half {
        Half::First => {
            xp[0] = u[0];
            xp[1] = u[1];
            xp[4] = w[0];
            xp[5] = -w[1].conj();
        }
        Half::Second => {
            xp[2] = u[0];
            xp[3] = -u[1].conj();
            xp[6] = w[0];
            xp[7] = -w[1].conj();
        }
    }
}

impl IcChain {
    pub fn build(h_blocks: [Mat2; 8], g_blocks: [Mat2; 8]) -> Result<Self> {
        let mut pivots = Vec::with_capacity(9);
        let h = &h_blocks;
        let g = &g_blocks;
        let ga: Vec<Mat2> = (0..4).map(|i| normalized_adjoint(&g[i], &mut pivots)).collect::<Result<_>>()?;
        let stage1_h: [Mat2; 6] = std::array::from_fn(|k| {
            let (i, off) = (k % 3 + 1, if k < 3 { 0 } else { 4 });
            ga[i] * h[i + off] - ga[0] * h[off]
        });
        let stage1_g: [Mat2; 3] = std::array::from_fn(|k| ga[k + 1] * g[k + 5] - ga[0] * g[4]);
        let gpa: Vec<Mat2> = (0..3).map(|i| normalized_adjoint(&stage1_g[i], &mut pivots)).collect::<Result<_>>()?;
        let stage2: [Mat2; 4] = std::array::from_fn(|k| {
            let (i, off) = (k % 2 + 1, if k < 2 { 0 } else { 3 });
            gpa[i] * stage1_h[i + off] - gpa[0] * stage1_h[off]
        });
        let h3a = normalized_adjoint(&stage2[2], &mut pivots)?;
        let h4a = normalized_adjoint(&stage2[3], &mut pivots)?;
        let stage3 = h3a * stage2[0] - h4a * stage2[1];
        Ok(IcChain { h_blocks, g_blocks, stage1_h, stage1_g, stage2, stage3, pivots })
    }

    /// The chain that recovers the desired user of `half` at one receiver.
    pub fn for_user(eff: &EffectiveChannels, half: Half, theta: f64, user: usize) -> Result<Self> {
        let hb = first_blocks(&eff.hhat, half, theta);
        let gb = first_blocks(&eff.ghat, half, theta);
        match user {
            1 => Self::build(hb, gb),
            2 => Self::build(gb, hb),
            _ => panic!("user index must be 1 or 2"),
        }
    }

    fn nadj(m: &Mat2) -> Mat2 {
        m.adjoint() / c(row0_norm_sqr(m), 0.0)
    }

    /// Runs the three stages on observations z_1..z_4.
    pub fn apply(&self, z: &[V2; 4]) -> ChainOutput {
        let ga: Vec<Mat2> = self.g_blocks[..4].iter().map(Self::nadj).collect();
        let stage1: [V2; 3] = std::array::from_fn(|k| ga[k + 1] * z[k + 1] - ga[0] * z[0]);
        let gpa: Vec<Mat2> = self.stage1_g.iter().map(Self::nadj).collect();
        let stage2: [V2; 2] = std::array::from_fn(|k| gpa[k + 1] * stage1[k + 1] - gpa[0] * stage1[0]);
        let stage3 = Self::nadj(&self.stage2[2]) * stage2[0] - Self::nadj(&self.stage2[3]) * stage2[1];
        ChainOutput { stage1, stage2, stage3 }
    }

    /// Zero-forcing estimates of (u, w); w is back-substituted from the first stage-2 row.
    pub fn estimate(&self, z: &[V2; 4]) -> (V2, V2) {
        let out = self.apply(z);
        let u = self.stage3.adjoint() * out.stage3 / c(self.stage3.column(0).norm_squared(), 0.0);
        let h3 = &self.stage2[2];
        let w = h3.adjoint() * (out.stage2[0] - self.stage2[0] * u) / c(h3.column(0).norm_squared(), 0.0);
        (u, w)
    }

    /// Same as [`estimate`](Self::estimate) with u fixed to known values.
    pub fn back_substitute(&self, z: &[V2; 4], u: V2) -> V2 {
        let out = self.apply(z);
        let h3 = &self.stage2[2];
        h3.adjoint() * (out.stage2[0] - self.stage2[0] * u) / c(h3.column(0).norm_squared(), 0.0)
    }

    /// Every stored block, for structural checks.
    pub fn blocks(&self) -> impl Iterator<Item = &Mat2> {
        self.h_blocks
            .iter()
            .chain(&self.g_blocks)
            .chain(&self.stage1_h)
            .chain(&self.stage1_g)
            .chain(&self.stage2)
            .chain(std::iter::once(&self.stage3))
    }
}

/// Chains for both halves and both users, with symbol estimates.
#[derive(Clone, Debug)]
pub struct MsrIcOutput {
    /// Indexed [half][user - 1].
    pub chains: [[IcChain; 2]; 2],
    /// Estimated x' symbols of the Tx-1 and Tx-2 codewords.
    pub xprime: [[Complex64; 8]; 2],
    /// The same mapped back to information-symbol coordinates.
    pub symbols: [[Complex64; 8]; 2],
}

/// Symbol-by-symbol recovery of both desired codewords from Y'.
pub fn msr_ic(obs: &ProcessedObservation, eff: &EffectiveChannels, theta: f64) -> Result<MsrIcOutput> {
    assert_eq!(obs.y.len(), 16, "expects a 4x4 cancelled observation");
    let yp = CMat::from_column_slice(4, 4, &obs.y) / c(obs.scale, 0.0);
    let mut xprime = [[c(0.0, 0.0); 8]; 2];
    let mut chains = Vec::with_capacity(2);
    for half in [Half::First, Half::Second] {
        let z = half_observations(&yp, half);
        let pair = [IcChain::for_user(eff, half, theta, 1)?, IcChain::for_user(eff, half, theta, 2)?];
        for (user, chain) in pair.iter().enumerate() {
            let (u, w) = chain.estimate(&z);
            store_half(&mut xprime[user], half, u, w);
        }
        chains.push(pair);
    }
    let second = chains.pop().unwrap();
    let first = chains.pop().unwrap();
    let symbols = [xprime_inverse(&xprime[0]), xprime_inverse(&xprime[1])];
    Ok(MsrIcOutput { chains: [first, second], xprime, symbols })
}
