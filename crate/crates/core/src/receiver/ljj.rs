//! Two-antenna receiver: zero-forcing of the aligned interference and the
//! MAC-style cancellation between the two desired users.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{ProcessedObservation, SymbolSlot};
use crate::channel::EffectiveChannels;
use crate::error::{Error, Result};
use crate::linalg::{c, real_embedding, row0_norm_sqr, CMat, Mat2};
use crate::schemes::stbc_amplitude;

/// Fixed zero-forcing matrix applied at Rx-1 to
/// (Y11, conj Y12, Y13, Y21, conj Y22, Y23).
pub const LJJ_F: [[f64; 6]; 4] = [
    [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0, 0.0, -1.0],
    [0.0, 0.0, 1.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
];

/// Squared row norms below this make the cancellation undefined.
pub const LJJ_PIVOT_TOL: f64 = 1e-14;

/// Rx-1 stacking with the second slot conjugated.
pub fn ljj_stack_rx1(y: &CMat) -> [Complex64; 6] {
    [y[(0, 0)], y[(0, 1)].conj(), y[(0, 2)], y[(1, 0)], y[(1, 1)].conj(), y[(1, 2)]]
}

/// Interference-free samples and their noise variances.
///
/// At Rx-1 the interference occupies slots 2-3 and is removed by [`LJJ_F`].
/// At Rx-2 it occupies slots 1-2 and the mirrored combination
/// (Y12 + conj Y21, conj Y13, conj Y23, Y22 - conj Y11) removes it.
pub fn ljj_zero_force(y: &CMat, rx: usize) -> ([Complex64; 4], [f64; 4]) {
    assert_eq!(y.shape(), (2, 3), "LJJ observations are 2 x 3");
    match rx {
        1 => {
            let s = ljj_stack_rx1(y);
            let mut out = [c(0.0, 0.0); 4];
            for (o, row) in out.iter_mut().zip(LJJ_F.iter()) {
                *o = row.iter().zip(&s).map(|(&f, &v)| v * f).sum();
            }
            (out, [1.0, 2.0, 2.0, 1.0])
        }
        2 => (
            [
                y[(0, 1)] + y[(1, 0)].conj(),
                y[(0, 2)].conj(),
                y[(1, 2)].conj(),
                y[(1, 1)] - y[(0, 0)].conj(),
            ],
            [2.0, 1.0, 1.0, 2.0],
        ),
        _ => panic!("receiver index must be 1 or 2"),
    }
}

/// Unit-power effective matrix R over (x1_1j, x2_1j, x1_2j, x2_2j).
pub fn ljj_r_matrix(eff: &EffectiveChannels) -> CMat {
    let (h, g) = (&eff.hhat, &eff.ghat);
    let row = |m: &CMat, r: usize, conj: bool| -> [Complex64; 2] {
        if conj {
            [m[(r, 1)].conj(), -m[(r, 0)].conj()]
        } else {
            [m[(r, 0)], m[(r, 1)]]
        }
    };
    let mut out = CMat::zeros(4, 4);
    for (i, (r, conj)) in [(0, false), (0, true), (1, true), (1, false)].into_iter().enumerate() {
        let (a, b) = (row(h, r, conj), row(g, r, conj));
        for k in 0..2 {
            out[(i, k)] = a[k];
            out[(i, k + 2)] = b[k];
        }
    }
    out
}

/// Zero-forced observation with its joint-ML model.
pub fn ljj_process(y: &CMat, eff: &EffectiveChannels, power: f64) -> ProcessedObservation {
    assert_eq!(eff.hhat.nrows(), 2, "LJJ processing needs two antennas");
    let (v, var) = ljj_zero_force(y, eff.rx);
    let r = ljj_r_matrix(eff);
    let scale = stbc_amplitude(power);
    let map = real_embedding(&(&r * c(scale, 0.0)));
    ProcessedObservation {
        rx: eff.rx,
        y: v.to_vec(),
        noise_var: var.to_vec(),
        model_matrix: Some(r),
        scale,
        map,
        slots: (1..=2)
            .flat_map(|tx| (0..2).map(move |index| SymbolSlot::Desired { tx, index }))
            .collect(),
    }
}

/// Per-user 2-vector models after cancelling the other user.
#[derive(Clone, Debug, PartialEq)]
pub struct LjjIc {
    /// Observation depending on the Tx-1 pair only.
    pub ytilde: [Complex64; 2],
    /// Its effective matrix, amplitude included.
    pub htilde: Mat2,
    /// Observation depending on the Tx-2 pair only.
    pub ztilde: [Complex64; 2],
    pub gtilde: Mat2,
}

impl LjjIc {
    /// Matched-filter estimates of the Tx-1 and Tx-2 pairs.
    ///
    /// Both effective matrices are Alamouti blocks, so M^H M is a multiple
    /// of the identity and the matched filter equals zero forcing.
    pub fn estimates(&self) -> ([Complex64; 2], [Complex64; 2]) {
        (mf(&self.htilde, &self.ytilde), mf(&self.gtilde, &self.ztilde))
    }
}

fn mf(m: &Mat2, y: &[Complex64; 2]) -> [Complex64; 2] {
    let g = m.adjoint() * nalgebra::Vector2::new(y[0], y[1]) / c(m.column(0).norm_squared(), 0.0);
    [g[0], g[1]]
}

fn block(m: &CMat, rows: [usize; 2], col0: usize) -> Mat2 {
    Mat2::from_fn(|i, j| m[(rows[i], col0 + j)])
}

/// Cancels user `other` from the two sub-observations; returns (observation, matrix of `keep`).
fn cancel(y1: [Complex64; 2], y2: [Complex64; 2], keep: [Mat2; 2], other: [Mat2; 2]) -> Result<([Complex64; 2], Mat2)> {
    let n = [row0_norm_sqr(&other[0]), row0_norm_sqr(&other[1])];
    if n[0] < LJJ_PIVOT_TOL || n[1] < LJJ_PIVOT_TOL {
        return Err(Error::Degenerate(format!("cancellation row norm {:.3e}", n[0].min(n[1]))));
    }
    let a = other[0].adjoint() / c(n[0], 0.0);
    let b = other[1].adjoint() / c(n[1], 0.0);
    let v = a * nalgebra::Vector2::new(y1[0], y1[1]) - b * nalgebra::Vector2::new(y2[0], y2[1]);
    Ok(([v[0], v[1]], a * keep[0] - b * keep[1]))
}

/// Splits the processed samples into rows (1,2) and (4,3) and cancels
/// each user in turn.
pub fn ljj_ic(obs: &ProcessedObservation) -> Result<LjjIc> {
    let r = obs.model_matrix.as_ref().expect("LJJ observation carries R");
    let s = c(obs.scale, 0.0);
    let y1 = [obs.y[0], obs.y[1]];
    let y2 = [obs.y[3], obs.y[2]];
    let h = [block(r, [0, 1], 0), block(r, [3, 2], 0)];
    let g = [block(r, [0, 1], 2), block(r, [3, 2], 2)];
    let (ytilde, htilde) = cancel(y1, y2, h, g)?;
    let (ztilde, gtilde) = cancel(y1, y2, g, h)?;
    Ok(LjjIc { ytilde, htilde: htilde * s, ztilde, gtilde: gtilde * s })
}

/// Complex model in real form for a 2-symbol sub-problem.
pub fn pair_model(m: &Mat2) -> DMatrix<f64> {
    real_embedding(&crate::linalg::mat2_to_dyn(m))
}
