//! Four-antenna receiver: column-pair cancellation of the aligned
//! interference, leaving a 4x4 observation of the compact codewords.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{ProcessedObservation, SymbolSlot};
use crate::channel::EffectiveChannels;
use crate::linalg::{c, cis, CMat};
use crate::schemes::stbc_amplitude;
use crate::stbc::compact_codeword;

/// Removes the interference codeword and returns Y' with its column noise variances.
///
/// The interference is a single compact codeword K sitting in the slots the
/// desired block leaves free, so each interfered column can be cleared
/// with the conjugate of the neighbouring interference-only column. Rows
/// 3-4 (first pair) or rows 1-2 (second pair) need an extra e^{j2 theta}
/// because the off-diagonal blocks of K carry e^{j theta}.
pub fn msr_cancel(y: &CMat, theta: f64, rx: usize) -> (CMat, [f64; 4]) {
    assert_eq!(y.shape(), (4, 6), "MSR observations are 4 x 6");
    let e2 = cis(2.0 * theta);
    let one = c(1.0, 0.0);
    let mut out = CMat::zeros(4, 4);
    // (data column, helper column, sign, phase for rows 1-2, phase for rows 3-4)
    let (cols, var) = match rx {
        // Rx-1: helpers come after the data column, sign pattern (-, +)
        1 => {
            out.set_column(0, &y.column(0));
            out.set_column(2, &y.column(3));
            (vec![(1, 1, 2, -1.0, one, e2), (3, 4, 5, -1.0, e2, one)], [1.0, 2.0, 1.0, 2.0])
        }
        // Rx-2: helpers come before the data column, sign pattern (+, -)
        2 => {
            out.set_column(1, &y.column(2));
            out.set_column(3, &y.column(5));
            (vec![(0, 1, 0, 1.0, one, e2), (2, 4, 3, 1.0, e2, one)], [2.0, 1.0, 2.0, 1.0])
        }
        _ => panic!("receiver index must be 1 or 2"),
    };
    for (dst, data, helper, sign, ph_top, ph_bot) in cols {
        for (r, partner, ph) in [(0, 1, ph_top), (1, 0, ph_top), (2, 3, ph_bot), (3, 2, ph_bot)] {
            // first row of each pair takes `sign`, second the opposite
            let s = if r % 2 == 0 { sign } else { -sign };
            out[(r, dst)] = y[(r, data)] + ph * y[(partner, helper)].conj() * s;
        }
    }
    (out, var)
}

/// The 16 compact-codeword images of the real unit coordinates.
pub fn compact_basis(theta: f64) -> Vec<CMat> {
    (0..16)
        .map(|k| {
            let mut x = [c(0.0, 0.0); 8];
            x[k / 2] = if k % 2 == 0 { c(1.0, 0.0) } else { c(0.0, 1.0) };
            compact_codeword(&x, theta).matrix
        })
        .collect()
}

/// Real map of Y' = s (Hhat C(x_1j) + Ghat C(x_2j)), Y' read column by column.
pub fn msr_map(eff: &EffectiveChannels, theta: f64, scale: f64) -> DMatrix<f64> {
    let basis = compact_basis(theta);
    let mut map = DMatrix::zeros(32, 32);
    for (user, m) in [&eff.hhat, &eff.ghat].into_iter().enumerate() {
        for (k, b) in basis.iter().enumerate() {
            let img = m * b * c(scale, 0.0);
            for (r, z) in img.iter().enumerate() {
                map[(2 * r, 16 * user + k)] = z.re;
                map[(2 * r + 1, 16 * user + k)] = z.im;
            }
        }
    }
    map
}

/// Cancelled observation with its joint-ML model over both desired codewords.
pub fn msr_process(y: &CMat, eff: &EffectiveChannels, theta: f64, power: f64) -> ProcessedObservation {
    assert_eq!(eff.hhat.nrows(), 4, "MSR processing needs four antennas");
    let (yp, var) = msr_cancel(y, theta, eff.rx);
    let scale = stbc_amplitude(power);
    let noise_var: Vec<f64> = var.iter().flat_map(|&v| [v; 4]).collect();
    ProcessedObservation {
        rx: eff.rx,
        y: yp.as_slice().to_vec(),
        noise_var,
        model_matrix: None,
        scale,
        map: msr_map(eff, theta, scale),
        slots: (1..=2)
            .flat_map(|tx| (0..8).map(move |index| SymbolSlot::Desired { tx, index }))
            .collect(),
    }
}

/// Y' as a 4x4 matrix.
pub fn observation_matrix(obs: &ProcessedObservation) -> CMat {
    CMat::from_column_slice(4, 4, &obs.y)
}

/// Noiseless Y' predicted for symbol vectors of both users.
pub fn msr_predict(eff: &EffectiveChannels, theta: f64, scale: f64, x1: &[Complex64], x2: &[Complex64]) -> CMat {
    (&eff.hhat * compact_codeword(x1, theta).matrix + &eff.ghat * compact_codeword(x2, theta).matrix) * c(scale, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{effective_channels, ljj_precoders, sample_channel_set, ChannelDist, ChannelRealization};
    use crate::constellation::{Constellation, ConstellationKind};
    use crate::linalg::{from_real, to_real};
    use crate::schemes::{apply_channel, msr_transmit, noise_matrix};
    use crate::stbc::SymbolBlock;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn draw(seed: u64) -> ChannelRealization {
        sample_channel_set(4, &ChannelDist::Gaussian, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap().channel
    }

    fn blocks<R: Rng>(k: &Constellation, rng: &mut R, active: [bool; 4]) -> [SymbolBlock; 4] {
        let order = [(1, 1), (1, 2), (2, 1), (2, 2)];
        std::array::from_fn(|i| {
            let x = (0..8).map(|_| if active[i] { k.points[rng.random_range(0..k.len())] } else { c(0.0, 0.0) }).collect();
            SymbolBlock::new(x, order[i].0, order[i].1)
        })
    }

    fn receive(ch: &ChannelRealization, b: &[SymbolBlock; 4], theta: f64, power: f64) -> [ProcessedObservation; 2] {
        let prec = ljj_precoders(ch).unwrap();
        let (x1, x2) = msr_transmit(&prec, [&b[0], &b[1], &b[2], &b[3]], power, theta);
        let (y1, y2) = apply_channel(ch, &x1, &x2, false, &mut ChaCha8Rng::seed_from_u64(0));
        [
            msr_process(&y1, &effective_channels(ch, &prec, 1).unwrap(), theta, power),
            msr_process(&y2, &effective_channels(ch, &prec, 2).unwrap(), theta, power),
        ]
    }

    #[test]
    fn interference_only_is_cancelled() {
        let k = Constellation::new(ConstellationKind::Qam16, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for seed in 0..2000 {
            let ch = draw(seed);
            let theta = [std::f64::consts::FRAC_PI_4, 1.0][(seed % 2) as usize];
            let b = blocks(&k, &mut rng, [false, true, false, true]);
            let [o1, _] = receive(&ch, &b, theta, 10.0);
            assert!(o1.y.iter().all(|z| z.norm() < 1e-10), "rx1 residual");
            let b = blocks(&k, &mut rng, [true, false, true, false]);
            let [_, o2] = receive(&ch, &b, theta, 10.0);
            assert!(o2.y.iter().all(|z| z.norm() < 1e-10), "rx2 residual");
        }
    }

    #[test]
    fn cancelled_matches_compact_model() {
        let k = Constellation::new(ConstellationKind::Qam4, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for seed in 0..1000 {
            let ch = draw(seed);
            let theta = 0.7;
            let prec = ljj_precoders(&ch).unwrap();
            let b = blocks(&k, &mut rng, [true; 4]);
            let obs = receive(&ch, &b, theta, 2.0);
            for (j, o) in obs.iter().enumerate() {
                let eff = effective_channels(&ch, &prec, j + 1).unwrap();
                let pred = msr_predict(&eff, theta, o.scale, &b[j].x, &b[2 + j].x);
                let got = observation_matrix(o);
                assert!((got - &pred).norm() < 1e-10 * (1.0 + pred.norm()));
                // the real map reproduces the same prediction
                let s: Vec<f64> = to_real(&b[j].x).into_iter().chain(to_real(&b[2 + j].x)).collect();
                let via_map = from_real((&o.map * nalgebra::DVector::from_vec(s)).as_slice());
                for (a, p) in via_map.iter().zip(pred.iter()) {
                    assert!((a - p).norm() < 1e-10 * (1.0 + p.norm()));
                }
            }
        }
    }

    #[test]
    fn column_noise_variances() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let n = 100_000;
        for rx in 1..=2 {
            let mut acc = [0.0; 4];
            for _ in 0..n {
                let (yp, _) = msr_cancel(&noise_matrix(4, 6, &mut rng), 0.4, rx);
                for (j, a) in acc.iter_mut().enumerate() {
                    *a += yp.column(j).norm_squared() / 4.0;
                }
            }
            let (_, var) = msr_cancel(&CMat::zeros(4, 6), 0.4, rx);
            for (a, v) in acc.iter().zip(var) {
                assert!((a / n as f64 / v - 1.0).abs() < 0.03);
            }
        }
        assert_eq!(msr_cancel(&CMat::zeros(4, 6), 0.0, 1).1, [1.0, 2.0, 1.0, 2.0]);
        assert_eq!(msr_cancel(&CMat::zeros(4, 6), 0.0, 2).1, [2.0, 1.0, 2.0, 1.0]);
    }

    #[test]
    fn rx1_literal_cancellation_rows() {
        let y = CMat::from_fn(4, 6, |i, j| c(1.0 + i as f64 * 0.7 - j as f64, 0.2 * (i * j) as f64 - 0.5));
        let t = 0.9;
        let e2 = cis(2.0 * t);
        let (yp, _) = msr_cancel(&y, t, 1);
        assert_eq!(yp[(0, 1)], y[(0, 1)] - y[(1, 2)].conj());
        assert_eq!(yp[(1, 1)], y[(1, 1)] + y[(0, 2)].conj());
        assert!((yp[(2, 1)] - (y[(2, 1)] - e2 * y[(3, 2)].conj())).norm() < 1e-15);
        assert!((yp[(3, 1)] - (y[(3, 1)] + e2 * y[(2, 2)].conj())).norm() < 1e-15);
        assert!((yp[(0, 3)] - (y[(0, 4)] - e2 * y[(1, 5)].conj())).norm() < 1e-15);
        assert!((yp[(1, 3)] - (y[(1, 4)] + e2 * y[(0, 5)].conj())).norm() < 1e-15);
        assert_eq!(yp[(2, 3)], y[(2, 4)] - y[(3, 5)].conj());
        assert_eq!(yp[(3, 3)], y[(3, 4)] + y[(2, 5)].conj());
    }
}
