//! Exact arithmetic for subgroups of the circle characterized by arithmetic
//! sequences.
//!
//! An *arithmetic sequence* (a-sequence) is a strictly increasing sequence of
//! positive integers with `u_n | u_{n+1}` for all `n`. Such a sequence
//! characterizes the subgroup `t_u(T) = { x in R/Z : u_n·x -> 0 mod 1 }` of
//! the circle group. Everything here is computed with arbitrary-precision
//! rationals; no floating point appears on any certified path.
//!
//! * [`aseq`] — lazy, finitely described a-sequences and their asymptotic
//!   data: ratio bounds, p-adic orders, the indices attaining the limsup
//!   ratio.
//! * [`circle`] — points of R/Z as exact rationals in `[0,1)`, mixed-radix
//!   canonical digit expansions relative to an a-sequence, and certified
//!   prefix evaluation with exact tail intervals.
//! * [`membership`] — decide `x ∈ t_u(T)` with replayable certificates, plus
//!   a numeric falsifier producing certified lower bounds on orbit norms.
//! * [`metric`] — the complete group metric `ρ_u`, ball enumeration at grid
//!   resolution `1/u_N`, and the alternating-series points `x_S` together
//!   with their closed-form norm bounds.
//! * [`classify`] — the classification report for `t_u(T)`: countability,
//!   Borel class, torsion structure, and dense torsion approximation.
//! * [`cli`] — command-line front end emitting deterministic JSON reports.

pub mod aseq;
pub mod circle;
pub mod classify;
pub mod cli;
pub mod indices;
pub mod membership;
pub mod metric;
pub(crate) mod rat;

pub use rat::{fmt_rat, parse_rat};

use std::fmt;

/// Exact rational number used throughout the crate.
pub type Rat = num_rational::BigRational;

/// Three-valued answer for questions that symbolic analysis may not settle.
///
/// `Unknown` is an honest "not determined", never a guess.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Tri {
    Yes,
    No,
    Unknown,
}

impl Tri {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Tri::Yes
        } else {
            Tri::No
        }
    }

    pub fn is_yes(self) -> bool {
        self == Tri::Yes
    }
}

/// Resource limits shared by the expensive operations.
///
/// `term_cap` bounds the sequence index materialized by term caches,
/// `enum_cap` bounds grid enumerations (`u_N` many points), and `horizon`
/// bounds digit/orbit scans such as cycle detection and falsification runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caps {
    pub term_cap: u64,
    pub enum_cap: u64,
    pub horizon: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            term_cap: 4096,
            enum_cap: 1 << 24,
            horizon: 512,
        }
    }
}

impl Caps {
    /// Parse overrides of the form `"term=8192,enum=1048576,horizon=256"`.
    /// Unrecognized keys are rejected; omitted keys keep their defaults.
    pub fn with_overrides(mut self, spec: &str) -> Result<Self> {
        for part in spec.split(',').filter(|s| !s.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad caps entry `{part}`")))?;
            let value: u64 = value
                .parse()
                .map_err(|_| Error::Parse(format!("bad caps value `{value}`")))?;
            if value == 0 {
                return Err(Error::Parse("caps must be positive".into()));
            }
            match key {
                "term" => self.term_cap = value,
                "enum" => self.enum_cap = value,
                "horizon" => self.horizon = value,
                _ => return Err(Error::Parse(format!("unknown caps key `{key}`"))),
            }
        }
        Ok(self)
    }
}

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// A configured resource limit was exceeded.
    ResourceCap { what: &'static str, limit: u64 },
    /// Generated data contradicts declared asymptotic metadata.
    InconsistentMetadata(String),
    /// The operation needs asymptotic data the metadata does not pin down.
    UnknownAsymptotics(&'static str),
    /// A sequence rule failed validation.
    InvalidRule(String),
    /// A digit rule failed validation against its sequence.
    InvalidDigits(String),
    /// An x_S gap descriptor failed validation.
    InvalidGaps(String),
    /// Enumeration was requested for a subgroup that is not countable.
    NotCountable,
    /// The dense-approximation algorithm could not certify its bound.
    CannotCertify(String),
    /// The digit descriptor admits no symbolic limit evaluation.
    UnsupportedDescriptor(&'static str),
    /// A spec string failed to parse.
    Parse(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ResourceCap { what, limit } => {
                write!(f, "resource cap exceeded: {what} (limit {limit})")
            }
            Error::InconsistentMetadata(msg) => write!(f, "inconsistent metadata: {msg}"),
            Error::UnknownAsymptotics(what) => write!(f, "unknown asymptotics: {what}"),
            Error::InvalidRule(msg) => write!(f, "invalid sequence rule: {msg}"),
            Error::InvalidDigits(msg) => write!(f, "invalid digit rule: {msg}"),
            Error::InvalidGaps(msg) => write!(f, "invalid gap descriptor: {msg}"),
            Error::NotCountable => write!(f, "subgroup is not countable"),
            Error::CannotCertify(msg) => write!(f, "cannot certify: {msg}"),
            Error::UnsupportedDescriptor(what) => write!(f, "unsupported descriptor: {what}"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
