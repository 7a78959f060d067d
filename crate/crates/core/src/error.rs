use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    // input validation
    #[error("negative mass {0}")]
    NegativeMass(f64),
    #[error("total mass {0} differs from 1")]
    MassNotOne(f64),
    #[error("density pieces overlap near {0}")]
    OverlappingPieces(f64),
    #[error("atom at {0} lies off the carrier")]
    OffCarrierAtom(f64),
    #[error("invalid density piece: {0}")]
    InvalidPiece(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("operation not supported on this carrier")]
    UnsupportedCarrier,
    #[error("operation not supported for this generator kind")]
    UnsupportedKind,
    #[error("measure has an atom at 0")]
    AtomAtZero,
    #[error("scale must be finite and nonzero")]
    InvalidScale,
    #[error("shift must be zero on this carrier")]
    ShiftNotAllowed,
    #[error("order must exceed 1")]
    OrderTooSmall,
    #[error("measure has zero mean on the circle")]
    CircleMeanZero,
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("grid spec: {0}")]
    InvalidGrid(String),

    // numerical failures
    #[error("point {0} lies on the carrier")]
    PointOnCarrier(String),
    #[error("transform undefined at {0}")]
    TransformUndefined(String),
    #[error("point {0} outside the domain")]
    DomainViolation(String),
    #[error("integral is singular at {0}")]
    SingularIntegral(f64),
    #[error("moment of order {0} diverges")]
    DivergentMoment(u32),
    #[error("eta transform vanishes at {0}")]
    EtaVanishes(String),
    #[error("surrogate beta diverges")]
    BetaDivergent,
    #[error("surrogate beta is zero")]
    BetaZero,
    #[error("bracketing failed after {0} doublings")]
    BracketingFailed(usize),
    #[error("grid too coarse near parameter {0}")]
    RefinementNeeded(f64),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("sign pattern is not an interval at {0}")]
    NonIntervalSet(f64),
    #[error("profile support not covered: end values {0}, {1}")]
    SupportNotCovered(f64, f64),
    #[error("point {0} is not a boundary zero")]
    NotAZero(String),
    #[error("classifier integral diverges: {0}")]
    DivergentClassifierIntegral(String),
    #[error("density zero has odd order {0}")]
    OddOrderZero(usize),
    #[error("density near the point is not a polynomial piece")]
    NotPolynomialPiece,
    #[error("b-coefficient integral diverges")]
    DivergentB,
    #[error("only {0} positive points available for the fit")]
    InsufficientPositivePoints(usize),
}

impl Error {
    /// Stable machine-readable name, used in JSON error reports.
    pub fn kind(&self) -> &'static str {
        use Error::*;
        match self {
            NegativeMass(_) => "NegativeMass",
            MassNotOne(_) => "MassNotOne",
            OverlappingPieces(_) => "OverlappingPieces",
            OffCarrierAtom(_) => "OffCarrierAtom",
            InvalidPiece(_) => "InvalidPiece",
            Parse(_) => "Parse",
            UnsupportedCarrier => "UnsupportedCarrier",
            UnsupportedKind => "UnsupportedKind",
            AtomAtZero => "AtomAtZero",
            InvalidScale => "InvalidScale",
            ShiftNotAllowed => "ShiftNotAllowed",
            OrderTooSmall => "OrderTooSmall",
            CircleMeanZero => "CircleMeanZero",
            Degenerate(_) => "Degenerate",
            InvalidGrid(_) => "InvalidGrid",
            PointOnCarrier(_) => "PointOnCarrier",
            TransformUndefined(_) => "TransformUndefined",
            DomainViolation(_) => "DomainViolation",
            SingularIntegral(_) => "SingularIntegral",
            DivergentMoment(_) => "DivergentMoment",
            EtaVanishes(_) => "EtaVanishes",
            BetaDivergent => "BetaDivergent",
            BetaZero => "BetaZero",
            BracketingFailed(_) => "BracketingFailed",
            RefinementNeeded(_) => "RefinementNeeded",
            NoConvergence(_) => "NoConvergence",
            NonIntervalSet(_) => "NonIntervalSet",
            SupportNotCovered(..) => "SupportNotCovered",
            NotAZero(_) => "NotAZero",
            DivergentClassifierIntegral(_) => "DivergentClassifierIntegral",
            OddOrderZero(_) => "OddOrderZero",
            NotPolynomialPiece => "NotPolynomialPiece",
            DivergentB => "DivergentB",
            InsufficientPositivePoints(_) => "InsufficientPositivePoints",
        }
    }

    /// True for malformed input, false for numerical failures.
    pub fn is_validation(&self) -> bool {
        use Error::*;
        matches!(
            self,
            NegativeMass(_)
                | MassNotOne(_)
                | OverlappingPieces(_)
                | OffCarrierAtom(_)
                | InvalidPiece(_)
                | Parse(_)
                | UnsupportedCarrier
                | UnsupportedKind
                | AtomAtZero
                | InvalidScale
                | ShiftNotAllowed
                | OrderTooSmall
                | CircleMeanZero
                | Degenerate(_)
                | InvalidGrid(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
