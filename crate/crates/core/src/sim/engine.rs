//! Parallel sweep over the power grid.

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::config::SimConfig;
use super::output::{SimResult, SimRow};
use super::trial::{TrialContext, TrialOutcome};

/// Trials dispatched to the pool at a time.
///
/// Outcomes are scanned in trial order and counting stops at the exact trial
/// that reaches the error target, so neither this value nor the worker count
/// changes the result.
pub const BATCH: u64 = 256;

pub fn run_wep_sweep(cfg: &SimConfig) -> Result<SimResult> {
    run_wep_sweep_with(cfg, |_| {})
}

/// Sweep that reports each finished row to `on_row`.
pub fn run_wep_sweep_with(cfg: &SimConfig, mut on_row: impl FnMut(&SimRow)) -> Result<SimResult> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let mut rows = Vec::with_capacity(cfg.p_db.len());
    for (point, &p_db) in cfg.p_db.iter().enumerate() {
        let ctx = TrialContext::new(cfg, p_db)?;
        let mut acc = TrialOutcome::default();
        let mut next = 0;
        'point: while next < cfg.trials {
            let end = (next + BATCH).min(cfg.trials);
            let batch: Vec<Result<TrialOutcome>> =
                pool.install(|| (next..end).into_par_iter().map(|t| ctx.run(cfg.seed, point as u64, t)).collect());
            for o in batch {
                let o = o?;
                acc.words += o.words;
                acc.errors += o.errors;
                acc.resamples += o.resamples;
                if cfg.target_errors > 0 && acc.errors >= cfg.target_errors {
                    break 'point;
                }
            }
            next = end;
        }
        let row = SimRow::new(p_db, acc.words, acc.errors, acc.resamples);
        on_row(&row);
        rows.push(row);
    }
    Ok(SimResult { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::ConstellationKind;
    use crate::schemes::SchemeKind;

    fn base() -> SimConfig {
        SimConfig {
            scheme: SchemeKind::Ljj,
            constellation: ConstellationKind::Bpsk,
            p_db: vec![0.0, 6.0],
            trials: 700,
            target_errors: 60,
            seed: 11,
            ..SimConfig::default()
        }
    }

    #[test]
    fn worker_count_does_not_matter() {
        let one = run_wep_sweep(&SimConfig { workers: 1, ..base() }).unwrap();
        let many = run_wep_sweep(&SimConfig { workers: 8, ..base() }).unwrap();
        assert_eq!(one, many);
    }

    #[test]
    fn stops_exactly_at_target() {
        let res = run_wep_sweep(&base()).unwrap();
        let r = &res.rows[0];
        assert_eq!(r.word_errors, 60);
        assert!(r.trials < 700);
        // without the early stop the first prefix reaching 60 errors is the same length
        let full = run_wep_sweep(&SimConfig { target_errors: 0, trials: r.trials, ..base() }).unwrap();
        assert_eq!(full.rows[0].word_errors, 60);
    }

    #[test]
    fn noiseless_sweep_has_zero_wep() {
        for scheme in [SchemeKind::Ljj, SchemeKind::Msr, SchemeKind::Js] {
            let cfg = SimConfig { scheme, noise: false, trials: 40, constellation: ConstellationKind::Qam4, ..base() };
            let res = run_wep_sweep(&cfg).unwrap();
            assert!(res.rows.iter().all(|r| r.word_errors == 0 && r.wep == 0.0), "{scheme}");
        }
    }

    #[test]
    fn vanishing_power_guesses() {
        let cfg = SimConfig { p_db: vec![-40.0], trials: 300, target_errors: 0, ..base() };
        let res = run_wep_sweep(&cfg).unwrap();
        assert!(res.rows[0].wep >= 0.9, "{:?}", res.rows[0]);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(run_wep_sweep(&SimConfig { p_db: vec![3.0, 1.0], ..base() }).is_err());
        assert!(run_wep_sweep(&SimConfig { trials: 0, ..base() }).is_err());
    }
}
