//! One Monte Carlo trial: channel draw, transmission, detection, scoring.

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{effective_channels, js_precoders, ljj_precoders, sample_channel_set, ChannelDist, ChannelRealization};
use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::linalg::{c, real_embedding, CVec};
use crate::receiver::{js_receive, ljj_process, ml_decode, msr_process, DecodeMode, ProcessedObservation, RealModel, SymbolSpace};
use crate::rng::stream_rng;
use crate::schemes::{
    apply_channel, js_transmit, ljj_transmit, msr_transmit, noise_matrix, tdma_model, tdma_precoder, tdma_srp_transmit,
    SchemeConfig, SchemeKind, TdmaBlock,
};
use crate::stbc::SymbolBlock;

use super::config::{SimConfig, WepScope};

/// Degenerate channel events tolerated within one trial.
pub const MAX_RESAMPLES: u64 = 1000;

/// Link order shared by all schemes: (tx, rx) = 11, 12, 21, 22.
const LINKS: [(usize, usize); 4] = [(1, 1), (1, 2), (2, 1), (2, 2)];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TrialOutcome {
    /// Words scored by this trial (1 network-wide, 2 per receiver).
    pub words: u64,
    pub errors: u64,
    /// Singular draws and degenerate channel events that forced a redraw.
    pub resamples: u64,
}

/// Everything fixed across the trials of one power point.
#[derive(Clone, Debug)]
pub struct TrialContext {
    pub link: SchemeConfig,
    pub constellation: Constellation,
    pub noise: bool,
    pub decoder: DecodeMode,
    pub channel: ChannelDist,
    pub scope: WepScope,
    pub tdma_blocks: Option<Vec<TdmaBlock>>,
}

impl TrialContext {
    pub fn new(cfg: &SimConfig, p_db: f64) -> Result<Self> {
        let link = cfg.scheme_config(p_db);
        link.validate()?;
        Ok(TrialContext {
            constellation: Constellation::new(link.constellation, link.phi),
            link,
            noise: cfg.noise,
            decoder: cfg.decoder,
            channel: cfg.channel,
            scope: cfg.wep_scope,
            tdma_blocks: cfg.tdma_blocks.clone(),
        })
    }

    /// Trial `trial` of grid point `point`, on its own random stream.
    pub fn run(&self, seed: u64, point: u64, trial: u64) -> Result<TrialOutcome> {
        let mut rng = stream_rng(seed, point, trial);
        let mut resamples = 0u64;
        loop {
            let sampled = sample_channel_set(self.link.m, &self.channel, &mut rng)?;
            resamples += sampled.rejections as u64;
            match self.attempt(&sampled.channel, &mut rng) {
                Ok(wrong) => {
                    let (words, errors) = match self.scope {
                        WepScope::Network => (1, u64::from(wrong[0] || wrong[1])),
                        WepScope::PerRx => (2, wrong.iter().filter(|&&w| w).count() as u64),
                    };
                    return Ok(TrialOutcome { words, errors, resamples });
                }
                Err(Error::Degenerate(_) | Error::Singular(_)) => {
                    resamples += 1;
                    if resamples > MAX_RESAMPLES {
                        return Err(Error::SamplingExhausted(resamples as usize));
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Sends one word per link over `ch`; returns which receivers erred.
    pub fn attempt<R: Rng + ?Sized>(&self, ch: &ChannelRealization, rng: &mut R) -> Result<[bool; 2]> {
        match self.link.scheme {
            SchemeKind::Ljj => self.stbc_trial(ch, rng, 2),
            SchemeKind::Msr | SchemeKind::Trivial => self.stbc_trial(ch, rng, 8),
            SchemeKind::Js => self.js_trial(ch, rng),
            SchemeKind::Tdma => self.tdma_trial(ch, rng),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        (0..n).map(|_| rng.random_range(0..self.constellation.len())).collect()
    }

    fn points(&self, idx: &[usize]) -> Vec<Complex64> {
        idx.iter().map(|&i| self.constellation.points[i]).collect()
    }

    fn decode(&self, obs: &ProcessedObservation) -> Result<Vec<usize>> {
        let alpha = vec![self.constellation.points.as_slice(); obs.slots.len()];
        let space = SymbolSpace::new(&alpha, true);
        Ok(ml_decode(&obs.real_model(), &space, self.decoder)?.symbols)
    }

    fn stbc_trial<R: Rng + ?Sized>(&self, ch: &ChannelRealization, rng: &mut R, len: usize) -> Result<[bool; 2]> {
        let prec = ljj_precoders(ch)?;
        let eff = [effective_channels(ch, &prec, 1)?, effective_channels(ch, &prec, 2)?];
        let idx: Vec<Vec<usize>> = LINKS.iter().map(|_| self.draw(len, rng)).collect();
        let blocks: Vec<SymbolBlock> =
            LINKS.iter().zip(&idx).map(|(&(tx, rx), i)| SymbolBlock::new(self.points(i), tx, rx)).collect();
        let b = [&blocks[0], &blocks[1], &blocks[2], &blocks[3]];
        let p = self.link.power;
        let (x1, x2) = match self.link.scheme {
            SchemeKind::Ljj => ljj_transmit(&prec, b, p),
            _ => msr_transmit(&prec, b, p, self.link.theta),
        };
        let (y1, y2) = apply_channel(ch, &x1, &x2, self.noise, rng);
        let mut wrong = [false; 2];
        for (rx, y) in [(1, &y1), (2, &y2)] {
            let e = &eff[rx - 1];
            let obs = match self.link.scheme {
                SchemeKind::Ljj => ljj_process(y, e, p),
                _ => msr_process(y, e, self.link.theta, p),
            };
            let got = self.decode(&obs)?;
            let sent = [idx[rx - 1].as_slice(), idx[1 + rx].as_slice()].concat();
            wrong[rx - 1] = got != sent;
        }
        Ok(wrong)
    }

    fn js_trial<R: Rng + ?Sized>(&self, ch: &ChannelRealization, rng: &mut R) -> Result<[bool; 2]> {
        let js = js_precoders(ch)?;
        let idx: Vec<Vec<usize>> = LINKS.iter().map(|_| self.draw(4, rng)).collect();
        let x: Vec<Vec<Complex64>> = idx.iter().map(|i| self.points(i)).collect();
        let p = self.link.power;
        let (x1, x2) = js_transmit(&js, [&x[0], &x[1], &x[2], &x[3]], p);
        let (y1, y2) = apply_channel(ch, &x1, &x2, self.noise, rng);
        let mut wrong = [false; 2];
        for (rx, y) in [(1, &y1), (2, &y2)] {
            let d = js_receive(y, ch, &js, p, rx, &self.constellation.points, self.decoder)?;
            wrong[rx - 1] = d.x1 != idx[rx - 1] || d.x2 != idx[1 + rx];
        }
        Ok(wrong)
    }

    /// Each link gets its own quarter of the time at SNR 2P.
    fn tdma_trial<R: Rng + ?Sized>(&self, ch: &ChannelRealization, rng: &mut R) -> Result<[bool; 2]> {
        let m = self.link.m;
        let snr = 2.0 * self.link.power;
        let gain = c((snr / m as f64).sqrt(), 0.0);
        let mut wrong = [false; 2];
        for (tx, rx) in LINKS {
            let h = ch.h(tx, rx);
            let pre = tdma_precoder(h, self.tdma_blocks.as_deref())?;
            let idx = self.draw(m, rng);
            let mut y: CVec = h * tdma_srp_transmit(&pre, &self.points(&idx)) * gain;
            if self.noise {
                y += noise_matrix(m, 1, rng).column(0);
            }
            let z = pre.u.adjoint() * y;
            let model = RealModel::from_complex(z.as_slice(), real_embedding(&tdma_model(&pre, snr)), &vec![1.0; m]);
            let alpha = vec![self.constellation.points.as_slice(); m];
            let got = ml_decode(&model, &SymbolSpace::new(&alpha, true), self.decoder)?.symbols;
            wrong[rx - 1] |= got != idx;
        }
        Ok(wrong)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::ConstellationKind;

    fn cfg(scheme: &str, constellation: ConstellationKind) -> SimConfig {
        let mut cfg = SimConfig { constellation, ..SimConfig::default() };
        cfg.set("scheme", scheme).unwrap();
        if cfg.scheme == SchemeKind::Tdma {
            cfg.set("tdma", "1:0.7853981633974483:0;1:0.6:0.3").unwrap();
        }
        cfg
    }

    #[test]
    fn noiseless_trials_are_error_free() {
        for scheme in ["ljj", "msr", "trivial", "js", "tdma"] {
            let mut cfg = cfg(scheme, ConstellationKind::Qam4);
            cfg.noise = false;
            let ctx = TrialContext::new(&cfg, -10.0).unwrap();
            for t in 0..20 {
                let o = ctx.run(3, 0, t).unwrap();
                assert_eq!((o.words, o.errors), (1, 0), "{scheme} trial {t}");
            }
        }
    }

    #[test]
    fn trials_are_reproducible() {
        let ctx = TrialContext::new(&cfg("ljj", ConstellationKind::Qam4), 5.0).unwrap();
        let a: Vec<_> = (0..50).map(|t| ctx.run(9, 2, t).unwrap()).collect();
        let b: Vec<_> = (0..50).map(|t| ctx.run(9, 2, t).unwrap()).collect();
        assert_eq!(a, b);
        assert!(a.iter().any(|o| o.errors > 0));
    }

    #[test]
    fn per_rx_scope_scores_two_words() {
        let mut cfg = cfg("ljj", ConstellationKind::Bpsk);
        cfg.wep_scope = WepScope::PerRx;
        let ctx = TrialContext::new(&cfg, -30.0).unwrap();
        let total: u64 = (0..100).map(|t| ctx.run(1, 0, t).unwrap().errors).sum();
        assert!((0..100).all(|t| ctx.run(1, 0, t).unwrap().words == 2));
        // near-random guessing at both receivers
        assert!(total > 120, "{total}");
    }

    #[test]
    fn tdma_requires_parameters() {
        let mut cfg = cfg("tdma", ConstellationKind::Qam4);
        cfg.tdma_blocks = None;
        let ctx = TrialContext::new(&cfg, 0.0).unwrap();
        assert!(matches!(ctx.run(0, 0, 0), Err(Error::Config(_))));
    }
}
