//! Residual summaries shared by the convolution and harmonic checks.

use crate::scalar::Scalar;

/// Largest absolute residual over the checked points.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicReport<S: Scalar> {
    pub max_residual: S,
    /// Where the largest residual occurred, in display form.
    pub argmax: Option<String>,
    /// True only in an exact mode with a literally zero residual.
    pub exact: bool,
    pub checked: usize,
}

impl<S: Scalar> HarmonicReport<S> {
    pub(crate) fn new(ctx: &S::Context) -> Self {
        HarmonicReport {
            max_residual: S::zero_with(ctx),
            argmax: None,
            exact: false,
            checked: 0,
        }
    }

    pub(crate) fn record(&mut self, residual: S, label: impl FnOnce() -> String) {
        self.checked += 1;
        let residual = residual.abs_value();
        if residual > self.max_residual {
            self.argmax = Some(label());
            self.max_residual = residual;
        }
    }

    pub(crate) fn finish(mut self) -> Self {
        self.exact = S::EXACT && self.max_residual.is_zero_value();
        self
    }

    /// Zero residual (exact mode) or below `tol` (float mode).
    pub fn passes(&self, tol: f64) -> bool {
        if S::EXACT {
            self.exact
        } else {
            self.max_residual.as_f64() <= tol
        }
    }
}
