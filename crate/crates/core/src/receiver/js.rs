//! Alignment receiver: joint ML over both desired streams and the aligned
//! interference sum.

use num_complex::Complex64;

use super::decode::{ml_decode, DecodeMode, RealModel, SymbolSpace};
use super::SymbolSlot;
use crate::channel::{ChannelRealization, JsPrecoderSet};
use crate::constellation::sumset;
use crate::error::Result;
use crate::linalg::{c, real_embedding, CMat};
use crate::schemes::{js_amplitude, js_norms, lifted, stack_slots};

/// Complex model over (x_1j, x_2j, s) at receiver `rx`, and the scaling of
/// each interfering stream inside the aligned sum s.
///
/// At Rx-1, s = x12 / n12 + x22 / n22 rides on H'11 V12 (equal to H'21 V22
/// by alignment); at Rx-2, s = x11 / n11 + x21 / n21 rides on H'12 V11.
pub fn js_model(ch: &ChannelRealization, js: &JsPrecoderSet, power: f64, rx: usize) -> (CMat, [f64; 2]) {
    let a = js_amplitude(power);
    let n = js_norms(js);
    let other = 3 - rx;
    let idx = |tx: usize, r: usize| 2 * (tx - 1) + (r - 1);
    let d1 = lifted(ch, 1, rx) * js.v(1, rx) * c(a / n[idx(1, rx)], 0.0);
    let d2 = lifted(ch, 2, rx) * js.v(2, rx) * c(a / n[idx(2, rx)], 0.0);
    let intf = lifted(ch, 1, rx) * js.v(1, other) * c(a, 0.0);
    let mut m = CMat::zeros(12, 12);
    m.columns_mut(0, 4).copy_from(&d1);
    m.columns_mut(4, 4).copy_from(&d2);
    m.columns_mut(8, 4).copy_from(&intf);
    (m, [n[idx(1, other)], n[idx(2, other)]])
}

/// Desired decisions at one receiver.
#[derive(Clone, Debug, PartialEq)]
pub struct JsDecision {
    /// Point indices of the Tx-1 stream.
    pub x1: Vec<usize>,
    /// Point indices of the Tx-2 stream.
    pub x2: Vec<usize>,
    pub metric: f64,
}

pub fn js_slots() -> Vec<SymbolSlot> {
    (1..=2)
        .flat_map(|tx| (0..4).map(move |index| SymbolSlot::Desired { tx, index }))
        .chain((0..4).map(|index| SymbolSlot::AlignedSum { index }))
        .collect()
}

/// Joint ML over (x_1j, x_2j, aligned sum); only the desired pair is returned.
///
/// `y` is the 4 x 3 slot matrix at receiver `rx`; `points` is the
/// constellation shared by all streams.
pub fn js_receive(
    y: &CMat,
    ch: &ChannelRealization,
    js: &JsPrecoderSet,
    power: f64,
    rx: usize,
    points: &[Complex64],
    mode: DecodeMode,
) -> Result<JsDecision> {
    let (m, [na, nb]) = js_model(ch, js, power, rx);
    let scaled = |n: f64| points.iter().map(|p| p / n).collect::<Vec<_>>();
    let sums = sumset(&scaled(na), &scaled(nb));
    let alpha: Vec<&[Complex64]> = (0..12).map(|k| if k < 8 { points } else { sums.as_slice() }).collect();
    let space = SymbolSpace::new(&alpha, true);
    let yv = stack_slots(y);
    let model = RealModel::from_complex(yv.as_slice(), real_embedding(&m), &[1.0; 12]);
    let d = ml_decode(&model, &space, mode)?;
    Ok(JsDecision { x1: d.symbols[..4].to_vec(), x2: d.symbols[4..8].to_vec(), metric: d.metric })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{js_precoders, sample_channel_set, ChannelDist};
    use crate::constellation::{Constellation, ConstellationKind};
    use crate::linalg::to_real;
    use crate::schemes::{apply_channel, js_transmit};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64) -> (ChannelRealization, JsPrecoderSet) {
        let ch = sample_channel_set(4, &ChannelDist::Gaussian, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap().channel;
        let js = js_precoders(&ch).unwrap();
        (ch, js)
    }

    fn streams<R: Rng>(k: &Constellation, rng: &mut R) -> [Vec<usize>; 4] {
        std::array::from_fn(|_| (0..4).map(|_| rng.random_range(0..k.len())).collect())
    }

    #[test]
    fn model_reproduces_noiseless_observation() {
        let k = Constellation::new(ConstellationKind::Qam4, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for seed in 0..200 {
            let (ch, js) = setup(seed);
            let idx = streams(&k, &mut rng);
            let x: Vec<Vec<Complex64>> = idx.iter().map(|v| v.iter().map(|&i| k.points[i]).collect()).collect();
            let (x1, x2) = js_transmit(&js, [&x[0], &x[1], &x[2], &x[3]], 7.0);
            let (y1, y2) = apply_channel(&ch, &x1, &x2, false, &mut rng);
            for (rx, y) in [(1, y1), (2, y2)] {
                let (m, [na, nb]) = js_model(&ch, &js, 7.0, rx);
                let o = 2 - rx;
                let mut s = x[rx - 1].clone();
                s.extend_from_slice(&x[2 + rx - 1]);
                s.extend((0..4).map(|t| x[o][t] / na + x[2 + o][t] / nb));
                let pred = &m * nalgebra::DVector::from_vec(s);
                let got = stack_slots(&y);
                assert!((&got - &pred).norm() < 1e-9 * (1.0 + pred.norm()));
            }
        }
    }

    #[test]
    fn noiseless_recovery() {
        let k = Constellation::new(ConstellationKind::Qam4, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for seed in 0..50 {
            let (ch, js) = setup(seed);
            let idx = streams(&k, &mut rng);
            let x: Vec<Vec<Complex64>> = idx.iter().map(|v| v.iter().map(|&i| k.points[i]).collect()).collect();
            let (x1, x2) = js_transmit(&js, [&x[0], &x[1], &x[2], &x[3]], 10.0);
            let (y1, y2) = apply_channel(&ch, &x1, &x2, false, &mut rng);
            for (rx, y) in [(1, y1), (2, y2)] {
                let d = js_receive(&y, &ch, &js, 10.0, rx, &k.points, DecodeMode::Sphere).unwrap();
                assert_eq!(d.x1, idx[rx - 1]);
                assert_eq!(d.x2, idx[2 + rx - 1]);
            }
        }
    }

    /// Brute force over every desired pair and every sum candidate.
    #[test]
    fn bpsk_matches_brute_force() {
        let k = Constellation::new(ConstellationKind::Bpsk, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let power = 100.0;
        for trial in 0..500u64 {
            let (ch, js) = setup(1000 + trial % 25);
            let idx = streams(&k, &mut rng);
            let x: Vec<Vec<Complex64>> = idx.iter().map(|v| v.iter().map(|&i| k.points[i]).collect()).collect();
            let (x1, x2) = js_transmit(&js, [&x[0], &x[1], &x[2], &x[3]], power);
            let (y1, _) = apply_channel(&ch, &x1, &x2, true, &mut rng);
            let d = js_receive(&y1, &ch, &js, power, 1, &k.points, DecodeMode::Sphere).unwrap();

            let (m, [na, nb]) = js_model(&ch, &js, power, 1);
            let sums = sumset(&[k.points[0] / na, k.points[1] / na], &[k.points[0] / nb, k.points[1] / nb]);
            let yv = to_real(stack_slots(&y1).as_slice());
            let a = real_embedding(&m);
            let mut best = (f64::INFINITY, 0usize);
            for code in 0..(1usize << 8) * sums.len().pow(4) {
                let mut rest = code;
                let mut s = Vec::with_capacity(12);
                for _ in 0..8 {
                    s.push(k.points[rest % 2]);
                    rest /= 2;
                }
                for _ in 0..4 {
                    s.push(sums[rest % sums.len()]);
                    rest /= sums.len();
                }
                let r = nalgebra::DVector::from_vec(yv.clone()) - &a * nalgebra::DVector::from_vec(to_real(&s));
                let metric = r.norm_squared();
                if metric < best.0 {
                    best = (metric, code);
                }
            }
            let want: Vec<usize> = (0..8).map(|b| (best.1 >> b) & 1).collect();
            assert_eq!(d.x1, want[..4]);
            assert_eq!(d.x2, want[4..]);
        }
    }
}
