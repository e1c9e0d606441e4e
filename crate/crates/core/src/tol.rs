/// Numerical tolerances shared by every module.
///
/// The defaults are the values the verdicts and property tests are pinned to;
/// a caller that wants a stricter or looser run builds its own record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Absolute Hermiticity tolerance on matrix entries.
    pub hermitian: f64,
    /// Eigenvalue slack when validating density matrices and effects.
    pub psd: f64,
    /// Slack on Bloch-vector norms and effect cone conditions.
    pub bloch: f64,
    /// Maps with `|det M|` at or below this are treated as singular.
    pub invertibility: f64,
    /// Eigenvalue tolerance for CP / negativity verdicts.
    pub verdict: f64,
    /// Allowed excess of `‖Λr + v‖` over 1 in ball-containment tests.
    pub ball: f64,
    /// Allowed deviation from uniform grid spacing.
    pub grid: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            hermitian: 1e-12,
            psd: 1e-10,
            bloch: 1e-12,
            invertibility: 1e-10,
            verdict: 1e-7,
            ball: 1e-9,
            grid: 1e-12,
        }
    }
}
