//! Receiver-side processing and detection.
//!
//! Each scheme's processing turns the raw slot matrix into a
//! [`ProcessedObservation`]: processed samples, their noise variances and a
//! real-linear model from the desired symbols. Detection is joint ML on that
//! model through [`decode::ml_decode`].

pub mod decode;
pub mod ic;
pub mod js;
pub mod ljj;
pub mod msr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::linalg::CMat;

pub use decode::{ml_decode, real_linear_map, Decision, DecodeMode, RealModel, SymbolSpace};
pub use ic::{msr_ic, IcChain, MsrIcOutput, PIVOT_TOL};
pub use js::{js_model, js_receive, JsDecision};
pub use ljj::{ljj_ic, ljj_process, LjjIc};
pub use msr::{msr_cancel, msr_process};

/// Which information symbol a model column pair carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymbolSlot {
    /// Symbol `index` (0-based) of the block from `tx` to this receiver.
    Desired { tx: usize, index: usize },
    /// Entry `index` of the aligned interference sum.
    AlignedSum { index: usize },
}

/// Processed samples with their noise statistics and symbol model.
#[derive(Clone, Debug)]
pub struct ProcessedObservation {
    pub rx: usize,
    /// Processed samples; matrices are stored column by column.
    pub y: Vec<Complex64>,
    /// Variance of the complex noise on each entry of `y`.
    pub noise_var: Vec<f64>,
    /// Unit-power effective matrix when the model is complex-linear.
    pub model_matrix: Option<CMat>,
    /// Amplitude multiplying the effective matrix.
    pub scale: f64,
    /// Real map from interleaved symbol coordinates to interleaved samples, amplitude included.
    pub map: DMatrix<f64>,
    /// Meaning of each complex symbol coordinate, in model column order.
    pub slots: Vec<SymbolSlot>,
}

impl ProcessedObservation {
    pub fn real_model(&self) -> RealModel {
        RealModel::from_complex(&self.y, self.map.clone(), &self.noise_var)
    }
}
