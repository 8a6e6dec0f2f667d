//! Finite input constellations, rotation, and the coordinate product distance.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::Error;
use crate::linalg::cis;

/// Absolute tolerance used to merge coincident points.
pub const DEDUP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConstellationKind {
    Bpsk,
    Qam4,
    /// 4-PAM real part times 2-PAM imaginary part.
    Qam8,
    Qam16,
}

impl ConstellationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ConstellationKind::Bpsk => "bpsk",
            ConstellationKind::Qam4 => "qam4",
            ConstellationKind::Qam8 => "qam8",
            ConstellationKind::Qam16 => "qam16",
        }
    }

    /// (real levels, imaginary levels) of the unscaled grid.
    fn axes(self) -> (usize, usize) {
        match self {
            ConstellationKind::Bpsk => (2, 1),
            ConstellationKind::Qam4 => (2, 2),
            ConstellationKind::Qam8 => (4, 2),
            ConstellationKind::Qam16 => (4, 4),
        }
    }
}

impl fmt::Display for ConstellationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConstellationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bpsk" => Ok(ConstellationKind::Bpsk),
            "qam4" => Ok(ConstellationKind::Qam4),
            "qam8" => Ok(ConstellationKind::Qam8),
            "qam16" => Ok(ConstellationKind::Qam16),
            _ => Err(Error::Config(format!("unknown constellation '{s}'"))),
        }
    }
}

/// A unit-power point set, possibly rotated.
#[derive(Clone, Debug, PartialEq)]
pub struct Constellation {
    pub kind: ConstellationKind,
    pub points: Vec<Complex64>,
    /// Gray label of each point.
    pub labels: Vec<u32>,
    pub label_bits: u32,
    pub rotation: f64,
    pub avg_power: f64,
}

/// Symmetric PAM levels -(L-1), ..., L-1 in steps of two.
fn pam(levels: usize) -> Vec<f64> {
    (0..levels).map(|i| 2.0 * i as f64 - (levels as f64 - 1.0)).collect()
}

fn gray(i: usize) -> u32 {
    (i ^ (i >> 1)) as u32
}

impl Constellation {
    /// Builds `kind` with unit average power and multiplies every point by e^{j rotation}.
    pub fn new(kind: ConstellationKind, rotation: f64) -> Self {
        let (nr, ni) = kind.axes();
        let re = pam(nr);
        let im = if ni == 1 { vec![0.0] } else { pam(ni) };
        let im_bits = ni.trailing_zeros();
        let mut points = Vec::with_capacity(nr * ni);
        let mut labels = Vec::with_capacity(nr * ni);
        for (a, &r) in re.iter().enumerate() {
            for (b, &i) in im.iter().enumerate() {
                points.push(Complex64::new(r, i));
                labels.push((gray(a) << im_bits) | gray(b));
            }
        }
        let power = points.iter().map(|z| z.norm_sqr()).sum::<f64>() / points.len() as f64;
        let scale = cis(rotation) / power.sqrt();
        for z in &mut points {
            *z *= scale;
        }
        let avg_power = points.iter().map(|z| z.norm_sqr()).sum::<f64>() / points.len() as f64;
        Constellation {
            kind,
            label_bits: (nr * ni).trailing_zeros(),
            points,
            labels,
            rotation,
            avg_power,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Coordinate product distance of the point set.
    pub fn cpd(&self) -> f64 {
        cpd(&self.points)
    }

    /// Index of the point closest to `z`.
    pub fn nearest(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        best
    }
}

/// Minimum over distinct pairs of |d_re| * |d_im|.
pub fn cpd(points: &[Complex64]) -> f64 {
    let mut best = f64::INFINITY;
    for (a, p) in points.iter().enumerate() {
        for q in &points[a + 1..] {
            let d = p - q;
            best = best.min(d.re.abs() * d.im.abs());
        }
    }
    best
}

/// Appends `z` unless a point within [`DEDUP_TOL`] is already present.
fn push_unique(out: &mut Vec<Complex64>, z: Complex64) {
    if !out.iter().any(|p| (p - z).norm() <= DEDUP_TOL) {
        out.push(z);
    }
}

/// All pairwise sums, deduplicated.
pub fn sumset(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for p in a {
        for q in b {
            push_unique(&mut out, p + q);
        }
    }
    out
}

/// Nonzero pairwise differences p - q, deduplicated, plus zero first.
pub fn difference_set(points: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0)];
    for p in points {
        for q in points {
            push_unique(&mut out, p - q);
        }
    }
    out
}

/// Splits a point set into real and imaginary level sets when it is their
/// Cartesian product, listing each point as (real index, imaginary index).
pub fn product_axes(points: &[Complex64]) -> Option<ProductAxes> {
    let mut re: Vec<f64> = Vec::new();
    let mut im: Vec<f64> = Vec::new();
    for z in points {
        if !re.iter().any(|r| (r - z.re).abs() <= DEDUP_TOL) {
            re.push(z.re);
        }
        if !im.iter().any(|i| (i - z.im).abs() <= DEDUP_TOL) {
            im.push(z.im);
        }
    }
    if re.len() * im.len() != points.len() {
        return None;
    }
    let find = |set: &[f64], v: f64| set.iter().position(|s| (s - v).abs() <= DEDUP_TOL).unwrap();
    let index = points.iter().map(|z| (find(&re, z.re), find(&im, z.im))).collect();
    Some(ProductAxes { re, im, index })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProductAxes {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub index: Vec<(usize, usize)>,
}

impl ProductAxes {
    /// Point index for a pair of axis indices.
    pub fn point_of(&self, re_idx: usize, im_idx: usize) -> usize {
        self.index.iter().position(|&p| p == (re_idx, im_idx)).unwrap()
    }
}

/// Rotation angle atan(2)/2 that gives square QAM a nonzero CPD.
pub fn full_diversity_rotation() -> f64 {
    2f64.atan() / 2.0
}
