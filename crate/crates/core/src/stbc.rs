//! Codeword construction: Alamouti blocks, the coordinate-interleaved 4x4
//! code, zero-column embeddings, and the difference-matrix rank scan.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::constellation::{difference_set, Constellation};
use crate::linalg::{c, cis, CMat, Mat2};

/// Information symbols one transmitter sends to one receiver.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolBlock {
    pub x: Vec<Complex64>,
    pub source_tx: usize,
    pub dest_rx: usize,
}

impl SymbolBlock {
    pub fn new(x: Vec<Complex64>, source_tx: usize, dest_rx: usize) -> Self {
        SymbolBlock { x, source_tx, dest_rx }
    }
}

/// [[s1, -conj(s2)], [s2, conj(s1)]]
pub fn alamouti(s1: Complex64, s2: Complex64) -> Mat2 {
    Mat2::new(s1, -s2.conj(), s2, s1.conj())
}

/// [[a, b], [conj(b), -conj(a)]], the Alamouti block with its second column negated.
pub fn reflected(a: Complex64, b: Complex64) -> Mat2 {
    Mat2::new(a, b, b.conj(), -a.conj())
}

/// The two 2x2 patterns that processed channel blocks take.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlamoutiForm {
    /// [[a, -conj(b)], [b, conj(a)]]
    Standard,
    /// [[a, b], [conj(b), -conj(a)]]
    Reflected,
}

/// Whether `m` matches `form` to `tol` relative to its largest entry.
pub fn has_form(m: &Mat2, form: AlamoutiForm, tol: f64) -> bool {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let close = |a: Complex64, b: Complex64| (a - b).norm() <= tol * scale;
    match form {
        AlamoutiForm::Standard => close(m[(1, 1)], m[(0, 0)].conj()) && close(m[(0, 1)], -m[(1, 0)].conj()),
        AlamoutiForm::Reflected => close(m[(1, 1)], -m[(0, 0)].conj()) && close(m[(1, 0)], m[(0, 1)].conj()),
    }
}

/// Which form a 2x2 block has, if any.
pub fn form_of(m: &Mat2, tol: f64) -> Option<AlamoutiForm> {
    [AlamoutiForm::Standard, AlamoutiForm::Reflected].into_iter().find(|&f| has_form(m, f, tol))
}

/// Two-slot Alamouti blocks padded to three slots: the block for Rx-1
/// occupies slots 1-2, the block for Rx-2 occupies slots 2-3.
pub fn ljj_blocks(b1: &SymbolBlock, b2: &SymbolBlock) -> (CMat, CMat) {
    assert!(b1.x.len() == 2 && b2.x.len() == 2, "LJJ blocks carry two symbols");
    let a1 = alamouti(b1.x[0], b1.x[1]);
    let a2 = alamouti(b2.x[0], b2.x[1]);
    let mut x1 = CMat::zeros(2, 3);
    let mut x2 = CMat::zeros(2, 3);
    x1.view_mut((0, 0), (2, 2)).copy_from(&a1);
    x2.view_mut((0, 1), (2, 2)).copy_from(&a2);
    (x1, x2)
}

/// The 4x4 coordinate-interleaved codeword with e^{j theta}-scaled
/// off-diagonal Alamouti blocks.
pub fn sr_codeword(x: &[Complex64], theta: f64) -> CMat {
    assert_eq!(x.len(), 8, "codeword carries eight symbols");
    let p = xprime_map(x);
    let e = cis(theta);
    let a = alamouti(p[0], p[1]);
    let b = alamouti(p[6], -p[7].conj()) * e;
    let cblk = alamouti(p[4], -p[5].conj()) * e;
    let d = alamouti(p[2], -p[3].conj());
    let mut out = CMat::zeros(4, 4);
    out.view_mut((0, 0), (2, 2)).copy_from(&a);
    out.view_mut((0, 2), (2, 2)).copy_from(&b);
    out.view_mut((2, 0), (2, 2)).copy_from(&cblk);
    out.view_mut((2, 2), (2, 2)).copy_from(&d);
    out
}

/// The 4x4 code with its generating symbols.
#[derive(Clone, Debug, PartialEq)]
pub struct CompactCodeword {
    pub matrix: CMat,
    pub theta: f64,
    pub symbols: Vec<Complex64>,
}

/// Entry-by-entry transcription of the compact codeword.
pub fn compact_codeword(x: &[Complex64], theta: f64) -> CompactCodeword {
    assert_eq!(x.len(), 8);
    let e = cis(theta);
    let r = |k: usize| x[k - 1].re;
    let i = |k: usize| x[k - 1].im;
    let m = CMat::from_row_slice(
        4,
        4,
        &[
            c(r(1), i(3)),
            c(-r(2), i(4)),
            e * c(r(5), i(7)),
            e * c(-r(6), i(8)),
            c(r(2), i(4)),
            c(r(1), -i(3)),
            e * c(r(6), i(8)),
            e * c(r(5), -i(7)),
            e * c(r(7), i(5)),
            e * c(-r(8), i(6)),
            c(r(3), i(1)),
            c(-r(4), i(2)),
            e * c(r(8), i(6)),
            e * c(r(7), -i(5)),
            c(r(4), i(2)),
            c(r(3), -i(1)),
        ],
    );
    CompactCodeword { matrix: m, theta, symbols: x.to_vec() }
}

/// Zero-column embeddings over six slots: data in columns 1,2,4,5 for the
/// block meant for Rx-1 and in columns 2,3,5,6 for the block meant for Rx-2.
pub fn msr_blocks(b1: &SymbolBlock, b2: &SymbolBlock, theta: f64) -> (CMat, CMat) {
    let c1 = compact_codeword(&b1.x, theta).matrix;
    let c2 = compact_codeword(&b2.x, theta).matrix;
    let mut x1 = CMat::zeros(4, 6);
    let mut x2 = CMat::zeros(4, 6);
    for (k, (d1, d2)) in [(0, 1), (1, 2), (3, 4), (4, 5)].into_iter().enumerate() {
        x1.set_column(d1, &c1.column(k));
        x2.set_column(d2, &c2.column(k));
    }
    (x1, x2)
}

/// Coordinate-interleaved symbols x' used by the cancellation chain.
pub fn xprime_map(x: &[Complex64]) -> [Complex64; 8] {
    assert_eq!(x.len(), 8);
    let r = |k: usize| x[k - 1].re;
    let i = |k: usize| x[k - 1].im;
    [
        c(r(1), i(3)),
        c(r(2), i(4)),
        c(r(3), i(1)),
        c(-r(4), i(2)),
        c(r(7), i(5)),
        c(-r(8), i(6)),
        c(r(5), i(7)),
        c(-r(6), i(8)),
    ]
}

/// Inverse of [`xprime_map`]; the map is an involution, so the formula is the same.
pub fn xprime_inverse(p: &[Complex64]) -> [Complex64; 8] {
    assert_eq!(p.len(), 8);
    let r = |k: usize| p[k - 1].re;
    let i = |k: usize| p[k - 1].im;
    [
        c(r(1), i(3)),
        c(r(2), i(4)),
        c(r(3), i(1)),
        c(-r(4), i(2)),
        c(r(7), i(5)),
        c(-r(8), i(6)),
        c(r(5), i(7)),
        c(-r(6), i(8)),
    ]
}

/// |det| below this counts as a singular difference.
pub const SINGULAR_DET: f64 = 1e-12;

/// Largest exhaustive scan allowed.
pub const MAX_EXHAUSTIVE: f64 = 1e8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScanMode {
    Exhaustive,
    /// Uniform draws over nonzero difference tuples.
    Sampled { n: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiffRankReport {
    pub theta: f64,
    pub scanned: u64,
    pub min_abs_det: f64,
    /// Difference tuple attaining the minimum.
    pub argmin: Vec<Complex64>,
    /// A tuple with |det| below [`SINGULAR_DET`], if one was seen.
    pub witness: Option<Vec<Complex64>>,
}

impl DiffRankReport {
    pub fn kv_lines(&self) -> Vec<(String, String)> {
        let tuple = |t: &[Complex64]| t.iter().map(|z| format!("{:+.6}{:+.6}j", z.re, z.im)).collect::<Vec<_>>().join(",");
        vec![
            ("theta".into(), format!("{}", self.theta)),
            ("scanned".into(), self.scanned.to_string()),
            ("min_abs_det".into(), format!("{:e}", self.min_abs_det)),
            ("argmin".into(), tuple(&self.argmin)),
            ("witness".into(), self.witness.as_deref().map(tuple).unwrap_or_else(|| "none".into())),
        ]
    }
}

fn det_abs(m: &CMat) -> f64 {
    m.clone().determinant().norm()
}

struct Partial {
    scanned: u64,
    min: f64,
    argmin: Vec<Complex64>,
    witness: Option<Vec<Complex64>>,
}

impl Partial {
    fn empty() -> Self {
        Partial { scanned: 0, min: f64::INFINITY, argmin: Vec::new(), witness: None }
    }

    fn visit(&mut self, tuple: &[Complex64], theta: f64) {
        let d = det_abs(&compact_codeword(tuple, theta).matrix);
        self.scanned += 1;
        if d < self.min {
            self.min = d;
            self.argmin = tuple.to_vec();
        }
        if d < SINGULAR_DET && self.witness.is_none() {
            self.witness = Some(tuple.to_vec());
        }
    }

    fn merge(mut self, other: Partial) -> Partial {
        self.scanned += other.scanned;
        if other.min < self.min {
            self.min = other.min;
            self.argmin = other.argmin;
        }
        if self.witness.is_none() {
            self.witness = other.witness;
        }
        self
    }
}

/// Minimum |det| of the compact-codeword difference over nonzero tuples of
/// per-symbol differences.
///
/// The codeword is real-linear in its symbols, so a codeword difference is the
/// codeword of the symbol differences. Exhaustive mode visits every nonzero
/// tuple in index order; shards are merged in order, so the witness is the
/// first singular tuple in that order.
pub fn diff_rank_scan(k: &Constellation, theta: f64, mode: ScanMode) -> crate::error::Result<DiffRankReport> {
    let d = difference_set(&k.points);
    let n = d.len() as u64;
    let partial = match mode {
        ScanMode::Exhaustive => {
            let total = (n as f64).powi(8);
            if total > MAX_EXHAUSTIVE {
                return Err(crate::error::Error::CandidateOverflow { size: total, limit: MAX_EXHAUSTIVE as u64 });
            }
            let total = n.pow(8);
            let chunk = (n * n).min(total);
            (0..total.div_ceil(chunk))
                .into_par_iter()
                .map(|s| {
                    let mut p = Partial::empty();
                    let mut t = [c(0.0, 0.0); 8];
                    for idx in (s * chunk).max(1)..((s + 1) * chunk).min(total) {
                        let mut r = idx;
                        for slot in t.iter_mut() {
                            *slot = d[(r % n) as usize];
                            r /= n;
                        }
                        p.visit(&t, theta);
                    }
                    p
                })
                .collect::<Vec<_>>()
                .into_iter()
                .fold(Partial::empty(), Partial::merge)
        }
        ScanMode::Sampled { n: draws, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p = Partial::empty();
            let mut t = [c(0.0, 0.0); 8];
            let mut done = 0;
            while done < draws {
                for slot in t.iter_mut() {
                    *slot = d[rng.random_range(0..d.len())];
                }
                if t.iter().all(|z| z.norm() == 0.0) {
                    continue;
                }
                p.visit(&t, theta);
                done += 1;
            }
            p
        }
    };
    Ok(DiffRankReport {
        theta,
        scanned: partial.scanned,
        min_abs_det: partial.min,
        argmin: partial.argmin,
        witness: partial.witness,
    })
}

/// Candidate angles tried in order by [`admissible_theta`].
pub const THETA_CANDIDATES: [f64; 3] = [std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_6, 1.0];

/// First candidate angle whose scan finds no singular difference.
pub fn admissible_theta(k: &Constellation, mode: ScanMode) -> crate::error::Result<Option<(f64, DiffRankReport)>> {
    for theta in THETA_CANDIDATES {
        let rep = diff_rank_scan(k, theta, mode)?;
        if rep.witness.is_none() && rep.min_abs_det > 0.0 {
            return Ok(Some((theta, rep)));
        }
    }
    Ok(None)
}
