//! Maximum-likelihood detection for real-linear Gaussian models.
//!
//! The model is y = A s + n over interleaved (re, im) coordinates, with
//! independent noise per complex observation. Each complex symbol is either
//! searched as one 2-D point or, when its alphabet is a Cartesian product,
//! as two independent 1-D coordinates. Coordinates that never share an
//! observation row are split into independent sub-problems before searching.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::constellation::{product_axes, ProductAxes};
use crate::error::{Error, Result};

/// Largest exhaustive search allowed per independent sub-problem.
pub const MAX_CANDIDATES: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DecodeMode {
    /// Enumerate every candidate; ties go to the lowest candidate index.
    Exhaustive,
    /// Depth-first sphere search on the QR-reduced model; exact ML.
    #[default]
    Sphere,
}

impl std::str::FromStr for DecodeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(DecodeMode::Exhaustive),
            "sphere" => Ok(DecodeMode::Sphere),
            _ => Err(Error::Config(format!("unknown decoder '{s}'"))),
        }
    }
}

impl std::fmt::Display for DecodeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DecodeMode::Exhaustive => "exhaustive",
            DecodeMode::Sphere => "sphere",
        })
    }
}

/// One search coordinate: a real PAM value or a complex point.
#[derive(Clone, Debug)]
struct Level {
    /// Columns of the model matrix this level drives (1 or 2).
    cols: Vec<usize>,
    /// Candidate values, `cols.len()` reals each.
    points: Vec<[f64; 2]>,
}

#[derive(Clone, Debug)]
enum Coding {
    Joint { level: usize },
    Split { re: usize, im: usize, axes: ProductAxes },
}

/// Candidate structure for a vector of complex symbols.
#[derive(Clone, Debug)]
pub struct SymbolSpace {
    levels: Vec<Level>,
    coding: Vec<Coding>,
}

impl SymbolSpace {
    /// Symbol k (model columns 2k, 2k+1) takes values in `alphabets[k]`.
    ///
    /// With `split_products`, product alphabets become two real levels.
    pub fn new(alphabets: &[&[Complex64]], split_products: bool) -> Self {
        let mut levels = Vec::new();
        let mut coding = Vec::new();
        for (k, alpha) in alphabets.iter().enumerate() {
            let axes = if split_products { product_axes(alpha) } else { None };
            match axes {
                Some(axes) => {
                    let re = levels.len();
                    levels.push(Level { cols: vec![2 * k], points: axes.re.iter().map(|&v| [v, 0.0]).collect() });
                    levels.push(Level { cols: vec![2 * k + 1], points: axes.im.iter().map(|&v| [v, 0.0]).collect() });
                    coding.push(Coding::Split { re, im: re + 1, axes });
                }
                None => {
                    coding.push(Coding::Joint { level: levels.len() });
                    levels.push(Level { cols: vec![2 * k, 2 * k + 1], points: alpha.iter().map(|z| [z.re, z.im]).collect() });
                }
            }
        }
        SymbolSpace { levels, coding }
    }

    pub fn num_symbols(&self) -> usize {
        self.coding.len()
    }

    /// Total number of candidates, as a float to survive overflow.
    pub fn size(&self) -> f64 {
        self.levels.iter().map(|l| l.points.len() as f64).product()
    }

    fn to_symbols(&self, choice: &[usize]) -> Vec<usize> {
        self.coding
            .iter()
            .map(|c| match c {
                Coding::Joint { level } => choice[*level],
                Coding::Split { re, im, axes } => axes.point_of(choice[*re], choice[*im]),
            })
            .collect()
    }

    fn to_levels(&self, symbols: &[usize]) -> Vec<usize> {
        let mut out = vec![0; self.levels.len()];
        for (c, &s) in self.coding.iter().zip(symbols) {
            match c {
                Coding::Joint { level } => out[*level] = s,
                Coding::Split { re, im, axes } => {
                    out[*re] = axes.index[s].0;
                    out[*im] = axes.index[s].1;
                }
            }
        }
        out
    }

    /// Interleaved real coordinates of a symbol-index vector.
    pub fn coordinates(&self, symbols: &[usize]) -> Vec<f64> {
        let mut s = vec![0.0; 2 * self.coding.len()];
        for (lvl, &i) in self.levels.iter().zip(&self.to_levels(symbols)) {
            for (d, &col) in lvl.cols.iter().enumerate() {
                s[col] = lvl.points[i][d];
            }
        }
        s
    }
}

/// Real-valued observation model with per-row noise variances.
#[derive(Clone, Debug)]
pub struct RealModel {
    pub y: DVector<f64>,
    pub a: DMatrix<f64>,
    /// Noise variance of each real row.
    pub row_var: Vec<f64>,
}

impl RealModel {
    /// From complex observations with per-entry complex noise variances.
    pub fn from_complex(y: &[Complex64], a: DMatrix<f64>, complex_var: &[f64]) -> Self {
        assert_eq!(a.nrows(), 2 * y.len());
        assert_eq!(complex_var.len(), y.len());
        RealModel {
            y: DVector::from_iterator(2 * y.len(), y.iter().flat_map(|z| [z.re, z.im])),
            a,
            row_var: complex_var.iter().flat_map(|&v| [v / 2.0, v / 2.0]).collect(),
        }
    }

    /// Sum over complex entries of |y - A s|^2 / var, for real coordinates `s`.
    pub fn metric(&self, s: &[f64]) -> f64 {
        let r = &self.y - &self.a * DVector::from_column_slice(s);
        r.iter().zip(&self.row_var).map(|(e, v)| e * e / (2.0 * v)).sum()
    }
}

/// Output of [`ml_decode`].
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    /// Chosen point index for every complex symbol.
    pub symbols: Vec<usize>,
    /// Whitened metric of the decision, computed directly from the model.
    pub metric: f64,
}

/// Minimizes the whitened metric over the candidate set.
pub fn ml_decode(model: &RealModel, space: &SymbolSpace, mode: DecodeMode) -> Result<Decision> {
    let n = 2 * space.num_symbols();
    assert_eq!(model.a.ncols(), n, "model width must match the symbol space");
    // whitened rows: the metric sums squared residuals of scaled rows
    let w: Vec<f64> = model.row_var.iter().map(|v| (0.5 / v).sqrt()).collect();
    let mut aw = model.a.clone();
    let mut yw = model.y.clone();
    for (r, &wr) in w.iter().enumerate() {
        aw.row_mut(r).scale_mut(wr);
        yw[r] *= wr;
    }

    let mut choice = vec![0usize; space.levels.len()];
    for comp in components(&aw, &space.levels) {
        let sub = SubProblem::new(&aw, &yw, &space.levels, &comp);
        let picked = match mode {
            DecodeMode::Exhaustive => sub.exhaustive()?,
            DecodeMode::Sphere => sub.sphere()?,
        };
        for (&lvl, &p) in comp.levels.iter().zip(&picked) {
            choice[lvl] = p;
        }
    }
    let symbols = space.to_symbols(&choice);
    let metric = model.metric(&space.coordinates(&symbols));
    Ok(Decision { symbols, metric })
}

/// Independent group of levels and the rows they touch.
struct Component {
    levels: Vec<usize>,
    rows: Vec<usize>,
}

fn components(a: &DMatrix<f64>, levels: &[Level]) -> Vec<Component> {
    let nl = levels.len();
    let mut parent: Vec<usize> = (0..nl).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut row_owner: Vec<Option<usize>> = vec![None; a.nrows()];
    for (l, lvl) in levels.iter().enumerate() {
        for &col in &lvl.cols {
            for r in 0..a.nrows() {
                if a[(r, col)] != 0.0 {
                    match row_owner[r] {
                        None => row_owner[r] = Some(l),
                        Some(o) => {
                            let (x, y) = (find(&mut parent, o), find(&mut parent, l));
                            parent[x] = y;
                        }
                    }
                }
            }
        }
    }
    let mut out: Vec<Component> = Vec::new();
    let mut root_idx: Vec<Option<usize>> = vec![None; nl];
    for l in 0..nl {
        let r = find(&mut parent, l);
        let idx = *root_idx[r].get_or_insert_with(|| {
            out.push(Component { levels: Vec::new(), rows: Vec::new() });
            out.len() - 1
        });
        out[idx].levels.push(l);
    }
    for (r, owner) in row_owner.iter().enumerate() {
        if let Some(o) = owner {
            let root = find(&mut parent, *o);
            out[root_idx[root].unwrap()].rows.push(r);
        }
    }
    out
}

/// A component restricted to its own rows and columns, columns grouped by level.
struct SubProblem {
    a: DMatrix<f64>,
    y: DVector<f64>,
    /// (first column, width) of each level inside `a`.
    spans: Vec<(usize, usize)>,
    points: Vec<Vec<[f64; 2]>>,
}

impl SubProblem {
    fn new(aw: &DMatrix<f64>, yw: &DVector<f64>, levels: &[Level], comp: &Component) -> Self {
        let mut cols = Vec::new();
        let mut spans = Vec::new();
        let mut points = Vec::new();
        for &l in &comp.levels {
            spans.push((cols.len(), levels[l].cols.len()));
            cols.extend_from_slice(&levels[l].cols);
            points.push(levels[l].points.clone());
        }
        let a = DMatrix::from_fn(comp.rows.len(), cols.len(), |i, j| aw[(comp.rows[i], cols[j])]);
        let y = DVector::from_fn(comp.rows.len(), |i, _| yw[comp.rows[i]]);
        SubProblem { a, y, spans, points }
    }

    fn size(&self) -> f64 {
        self.points.iter().map(|p| p.len() as f64).product()
    }

    fn residual(&self, choice: &[usize]) -> DVector<f64> {
        let mut r = self.y.clone();
        for (l, &(c0, w)) in self.spans.iter().enumerate() {
            let p = self.points[l][choice[l]];
            for d in 0..w {
                r.axpy(-p[d], &self.a.column(c0 + d), 1.0);
            }
        }
        r
    }

    /// Mixed-radix enumeration, first level most significant.
    fn exhaustive(&self) -> Result<Vec<usize>> {
        let size = self.size();
        if size > MAX_CANDIDATES as f64 {
            return Err(Error::CandidateOverflow { size, limit: MAX_CANDIDATES });
        }
        let nl = self.spans.len();
        let mut digit = vec![0usize; nl];
        let mut r = self.residual(&digit);
        let mut best = f64::INFINITY;
        let mut best_digit = digit.clone();
        loop {
            let metric = r.norm_squared();
            if metric < best {
                best = metric;
                best_digit.clone_from(&digit);
            }
            // advance the odometer from the least significant level
            let mut l = nl;
            loop {
                if l == 0 {
                    return Ok(best_digit);
                }
                l -= 1;
                if digit[l] + 1 < self.points[l].len() {
                    digit[l] += 1;
                    break;
                }
                digit[l] = 0;
            }
            if l == nl - 1 {
                let (c0, w) = self.spans[l];
                let (old, new) = (self.points[l][digit[l] - 1], self.points[l][digit[l]]);
                for d in 0..w {
                    r.axpy(old[d] - new[d], &self.a.column(c0 + d), 1.0);
                }
            } else {
                // a carry: rebuild to keep rounding from accumulating
                r = self.residual(&digit);
            }
        }
    }

    fn sphere(&self) -> Result<Vec<usize>> {
        let (m, n) = self.a.shape();
        if m < n {
            return self.exhaustive();
        }
        let qr = self.a.clone().qr();
        let rmat = qr.r();
        let z = qr.q().transpose() * &self.y;
        let mut search = Sphere {
            r: &rmat,
            z: &z,
            spans: &self.spans,
            points: &self.points,
            s: vec![0.0; n],
            choice: vec![0; self.spans.len()],
            best: f64::INFINITY,
            best_choice: vec![0; self.spans.len()],
            scratch: vec![Vec::new(); self.spans.len()],
        };
        search.descend(self.spans.len(), 0.0);
        Ok(search.best_choice)
    }
}

struct Sphere<'a> {
    r: &'a DMatrix<f64>,
    z: &'a DVector<f64>,
    spans: &'a [(usize, usize)],
    points: &'a [Vec<[f64; 2]>],
    s: Vec<f64>,
    choice: Vec<usize>,
    best: f64,
    best_choice: Vec<usize>,
    scratch: Vec<Vec<(f64, usize)>>,
}

impl Sphere<'_> {
    /// Searches levels below `depth` (levels are fixed from the last one up).
    fn descend(&mut self, depth: usize, partial: f64) {
        let l = depth - 1;
        let (c0, w) = self.spans[l];
        let n = self.s.len();
        // target for this level's rows given all later coordinates
        let mut t = [0.0; 2];
        for d in 0..w {
            let row = c0 + d;
            let mut acc = self.z[row];
            for j in c0 + w..n {
                acc -= self.r[(row, j)] * self.s[j];
            }
            t[d] = acc;
        }
        let mut order = std::mem::take(&mut self.scratch[l]);
        order.clear();
        for (i, p) in self.points[l].iter().enumerate() {
            let mut cost = 0.0;
            for d in 0..w {
                let row = c0 + d;
                let mut e = t[d];
                for k in d..w {
                    e -= self.r[(row, c0 + k)] * p[k];
                }
                cost += e * e;
            }
            order.push((cost, i));
        }
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(cost, i) in &order {
            let total = partial + cost;
            if total >= self.best {
                break;
            }
            let p = self.points[l][i];
            self.s[c0..c0 + w].copy_from_slice(&p[..w]);
            self.choice[l] = i;
            if l == 0 {
                self.best = total;
                self.best_choice.clone_from(&self.choice);
            } else {
                self.descend(l, total);
            }
        }
        self.scratch[l] = order;
    }
}

/// Builds the real matrix of a real-linear map by evaluating it on unit vectors.
pub fn real_linear_map(n_in: usize, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> DMatrix<f64> {
    let mut e = vec![0.0; n_in];
    let mut cols = Vec::with_capacity(n_in);
    for k in 0..n_in {
        e[k] = 1.0;
        cols.push(f(&e));
        e[k] = 0.0;
    }
    let m = cols[0].len();
    DMatrix::from_fn(m, n_in, |i, j| cols[j][i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{full_diversity_rotation, Constellation, ConstellationKind};
    use crate::linalg::{c, real_embedding, CMat};
    use crate::rng::complex_normal;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_complex_model<R: Rng>(rng: &mut R, rows: usize, k: &Constellation, n: usize, noise: f64) -> (RealModel, Vec<usize>) {
        let a = CMat::from_fn(rows, n, |_, _| complex_normal(rng, 1.0));
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k.len())).collect();
        let x: Vec<Complex64> = truth.iter().map(|&i| k.points[i]).collect();
        let y: Vec<Complex64> = (&a * nalgebra::DVector::from_column_slice(&x))
            .iter()
            .map(|v| v + complex_normal(rng, noise))
            .collect();
        let var: Vec<f64> = (0..rows).map(|r| if r % 2 == 0 { 1.0 } else { 2.0 }).collect();
        (RealModel::from_complex(&y, real_embedding(&a), &var), truth)
    }

    #[test]
    fn noiseless_recovers_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for kind in [ConstellationKind::Bpsk, ConstellationKind::Qam4, ConstellationKind::Qam16] {
            for phi in [0.0, full_diversity_rotation()] {
                let k = Constellation::new(kind, phi);
                let alpha = vec![k.points.as_slice(); 4];
                for split in [false, true] {
                    let space = SymbolSpace::new(&alpha, split);
                    let (model, truth) = random_complex_model(&mut rng, 5, &k, 4, 0.0);
                    for mode in [DecodeMode::Exhaustive, DecodeMode::Sphere] {
                        let d = ml_decode(&model, &space, mode).unwrap();
                        assert_eq!(d.symbols, truth, "{kind} {phi} {mode}");
                        assert!(d.metric < 1e-20);
                    }
                }
            }
        }
    }

    #[test]
    fn sphere_matches_exhaustive_on_noisy_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for kind in [ConstellationKind::Qam4, ConstellationKind::Qam8] {
            for phi in [0.0, 0.4] {
                let k = Constellation::new(kind, phi);
                let alpha = vec![k.points.as_slice(); 4];
                let space = SymbolSpace::new(&alpha, true);
                for _ in 0..200 {
                    let (model, _) = random_complex_model(&mut rng, 4, &k, 4, 0.5);
                    let a = ml_decode(&model, &space, DecodeMode::Exhaustive).unwrap();
                    let b = ml_decode(&model, &space, DecodeMode::Sphere).unwrap();
                    assert_eq!(a.symbols, b.symbols);
                }
            }
        }
    }

    /// Brute force without any of the decoder's machinery.
    #[test]
    fn exhaustive_matches_naive_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = Constellation::new(ConstellationKind::Qam4, 0.3);
        let alpha = vec![k.points.as_slice(); 3];
        let space = SymbolSpace::new(&alpha, false);
        for _ in 0..100 {
            let (model, _) = random_complex_model(&mut rng, 3, &k, 3, 1.0);
            let mut best = (f64::INFINITY, vec![]);
            for a in 0..4 {
                for b in 0..4 {
                    for cc in 0..4 {
                        let s: Vec<f64> = [a, b, cc].iter().flat_map(|&i| [k.points[i].re, k.points[i].im]).collect();
                        let m = model.metric(&s);
                        if m < best.0 {
                            best = (m, vec![a, b, cc]);
                        }
                    }
                }
            }
            let d = ml_decode(&model, &space, DecodeMode::Exhaustive).unwrap();
            assert_eq!(d.symbols, best.1);
            assert!((d.metric - best.0).abs() < 1e-9);
        }
    }

    #[test]
    fn ties_go_to_lowest_index() {
        // y = 0 with a single BPSK symbol: +1 and -1 are equidistant.
        let k = Constellation::new(ConstellationKind::Bpsk, 0.0);
        let model = RealModel::from_complex(&[c(0.0, 0.0)], real_embedding(&CMat::from_element(1, 1, c(1.0, 0.0))), &[1.0]);
        let d = ml_decode(&model, &SymbolSpace::new(&[&k.points], false), DecodeMode::Exhaustive).unwrap();
        assert_eq!(d.symbols, vec![0]);
    }

    #[test]
    fn argmin_invariant_to_noise_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let k = Constellation::new(ConstellationKind::Qam4, 0.0);
        let alpha = vec![k.points.as_slice(); 3];
        let space = SymbolSpace::new(&alpha, true);
        for _ in 0..100 {
            let (model, _) = random_complex_model(&mut rng, 4, &k, 3, 1.0);
            let mut doubled = model.clone();
            doubled.row_var.iter_mut().for_each(|v| *v *= 2.0);
            for mode in [DecodeMode::Exhaustive, DecodeMode::Sphere] {
                assert_eq!(ml_decode(&model, &space, mode).unwrap().symbols, ml_decode(&doubled, &space, mode).unwrap().symbols);
            }
        }
    }

    #[test]
    fn overflow_is_reported() {
        let k = Constellation::new(ConstellationKind::Qam16, 0.3);
        let alpha = vec![k.points.as_slice(); 6];
        let space = SymbolSpace::new(&alpha, true);
        let a = CMat::from_fn(6, 6, |i, j| c((i * 7 + j) as f64 % 3.0 + 0.1, (i + j) as f64 * 0.1));
        let y = vec![c(0.0, 0.0); 6];
        let model = RealModel::from_complex(&y, real_embedding(&a), &[1.0; 6]);
        assert!(matches!(ml_decode(&model, &space, DecodeMode::Exhaustive), Err(Error::CandidateOverflow { .. })));
        assert!(ml_decode(&model, &space, DecodeMode::Sphere).is_ok());
    }

    #[test]
    fn block_diagonal_models_split() {
        // two independent 1x1 problems
        let k = Constellation::new(ConstellationKind::Qam4, 0.0);
        let a = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)]);
        let model = RealModel::from_complex(&[k.points[3], k.points[1] * 2.0], real_embedding(&a), &[1.0, 1.0]);
        let alpha = vec![k.points.as_slice(); 2];
        let space = SymbolSpace::new(&alpha, true);
        let comps = components(&model.a, &space.levels);
        assert_eq!(comps.len(), 4);
        let d = ml_decode(&model, &space, DecodeMode::Exhaustive).unwrap();
        assert_eq!(d.symbols, vec![3, 1]);
    }

    #[test]
    fn linear_map_probe() {
        let a = CMat::from_row_slice(2, 2, &[c(1.0, 2.0), c(0.5, -0.3), c(-1.0, 0.0), c(0.2, 0.9)]);
        let m = real_linear_map(4, |s| {
            let x = crate::linalg::from_real(s);
            crate::linalg::to_real((&a * nalgebra::DVector::from_vec(x)).as_slice())
        });
        assert!((m - real_embedding(&a)).norm() < 1e-15);
    }
}
