/// Errors shared by all modules of the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A series evaluation produced no certified remainder bound within the
    /// allowed number of terms.
    #[error("series did not converge: {0}")]
    NonConvergence(String),

    /// Estimated rounding error exceeds what the result can support.
    #[error("precision loss: {0}")]
    PrecisionLoss(String),

    /// The curvature functional has constant sign over the scanned window.
    #[error("no sign change of eta''+2*eta' for a = {a} on ({lo}, {hi}]")]
    NoCrossing { a: f64, lo: f64, hi: f64 },

    /// A quotient denominator is numerically indistinguishable from zero.
    #[error("denominator too close to zero: {0}")]
    NearZeroDenominator(String),

    /// Adaptive quadrature exhausted its depth before reaching the tolerance.
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    /// Invalid melody or document configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Rescaling to the requested playback length needs a tempo outside
    /// [20, 300] bpm.
    #[error("infeasible target duration: required tempo {bpm:.2} bpm is outside [20, 300]")]
    InfeasibleTempo { bpm: f64 },

    /// Input bytes are not a MIDI file this crate can parse.
    #[error("malformed MIDI data: {0}")]
    Midi(String),
}

pub type Result<T> = std::result::Result<T, Error>;
