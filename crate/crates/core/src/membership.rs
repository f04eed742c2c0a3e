//! Membership in `t_u(T) = { x : u_n x -> 0 mod 1 }`, with certificates an
//! independent checker can replay.
//!
//! For rationals the decision is p-adic: `a/b ∈ t_u(T)` iff `v_p(b)` is at
//! most the p-adic order of the sequence for every prime `p | b`
//! (equivalently, `b | u_m` for some `m`). For digit-stream points the
//! decision goes through the support classification: finite support is
//! always in; infinite support over bounded ratios is out; over divergent
//! ratios the symbolic limits of `c_n/q_n` decide — the limit must vanish in
//! the torus over the support, and in the reals over every infinite piece of
//! the support whose predecessors have bounded ratios. Mixed support is
//! deliberately `Unknown`: the fully general criterion is out of scope here.
//!
//! The numeric falsifier complements the symbolic routes: it searches for a
//! certified lower bound `‖u_n x‖ >= ε` at some index, which refutes any
//! claimed decay below `ε` at that index. A missing witness proves nothing.

use crate::aseq::{ArithSeq, POrder, RatioBehavior};
use crate::circle::{
    bounded_exception_set, CanonicalRep, CirclePoint, DigitRule, SupportClass, SupportValue,
};
use crate::indices::IndexFamily;
use crate::metric::orbit_norm_enclosure;
use crate::rat::{rat, rat_big, valuation};
use crate::{Error, Rat, Result, Tri};
use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    In,
    Out,
    Unknown,
}

/// Replayable evidence for a membership decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Certificate {
    /// In: the denominator divides `u_m`.
    RationalDivisibility { m: u64 },
    /// Out: `p` divides the denominator `needed` times but the sequence only
    /// ever accumulates `order` factors of `p`.
    PrimeObstruction { p: u64, order: u64, needed: u64 },
    /// In: all digits vanish beyond `end`.
    BoundedSupportFinite { end: u64 },
    /// Out: infinitely many nonzero digits over bounded ratios; the listed
    /// indices witness the start of the support stream.
    BoundedSupportInfinite { witnesses: Vec<u64> },
    /// In over divergent support: the digit-to-ratio quotients vanish.
    DivergentSupportLimit {
        route: LimitRoute,
        /// When present, the norms obey `‖u_n x‖ <= 2·max_digit / q*_n` with
        /// `q*_n` the smallest ratio past `n` — a checkable decay promise.
        decay_max_digit: Option<u64>,
    },
    /// Out over divergent support: the digit-to-ratio quotients converge to
    /// a non-null value (in T over the support, or in R over a
    /// bounded-predecessor class when `in_real_only`).
    DivergentSupportNonNull { limit: Rat, in_real_only: bool },
    /// A certified lower bound `‖u_index·x‖ >= lower_bound`, computed from
    /// the exact digit prefix at `depth` plus the tail interval.
    NumericWitness {
        index: u64,
        lower_bound: Rat,
        depth: u64,
    },
    /// Unknown: nothing decided within the scan horizon.
    Horizon { scanned: u64 },
}

/// How an In verdict over divergent support was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitRoute {
    /// `c_n/q_n -> 0` in the reals over the whole support.
    RealLimitZero,
    /// `c_n/q_n -> 0` in the torus, and in the reals over every
    /// bounded-predecessor class.
    TorusLimitWithBoundedClasses,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub decision: Decision,
    pub certificate: Certificate,
}

impl Verdict {
    fn since(decision: Decision, certificate: Certificate) -> Self {
        Verdict {
            decision,
            certificate,
        }
    }
}

/// Decide membership of a rational point.
pub fn member_rational(x: &CirclePoint, seq: &Arc<ArithSeq>) -> Result<Verdict> {
    let b = x.denom();
    if b.is_one() {
        return Ok(Verdict::since(
            Decision::In,
            Certificate::RationalDivisibility { m: 0 },
        ));
    }
    // Strip the denominator against a short term prefix first; most
    // denominators die quickly and yield the smallest witness index.
    let mut t = seq.term(0)? % &b;
    let mut m = 0u64;
    let strip_horizon = 64u64.min(seq.term_cap());
    loop {
        if t.is_zero() {
            return Ok(Verdict::since(
                Decision::In,
                Certificate::RationalDivisibility { m },
            ));
        }
        if m >= strip_horizon {
            break;
        }
        match seq.ratio(m + 1) {
            Ok(q) => {
                m += 1;
                t = (t * (q % &b)) % &b;
            }
            // Rules like the double-exponential one stop generating early;
            // fall through to the symbolic analysis with what we have.
            Err(Error::ResourceCap { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    // Residual analysis: factor what is left of b after the scanned prefix
    // and consult the symbolic p-adic orders.
    let residual = {
        let g = num_integer::Integer::gcd(&b, &seq.term(m)?);
        &b / g
    };
    let residual_u64 = match u64::try_from(&residual) {
        Ok(r) => r,
        Err(_) => {
            return Ok(Verdict::since(
                Decision::Unknown,
                Certificate::Horizon {
                    scanned: strip_horizon,
                },
            ))
        }
    };
    let mut stabilization = strip_horizon;
    for (p, _) in crate::rat::factorize_u64(residual_u64) {
        let needed = valuation(&b, p);
        match seq.p_order(p) {
            POrder::Finite { value, .. } if value < needed => {
                return Ok(Verdict::since(
                    Decision::Out,
                    Certificate::PrimeObstruction {
                        p,
                        order: value,
                        needed,
                    },
                ));
            }
            POrder::Finite { .. } | POrder::Infinite { .. } => {
                match index_reaching_valuation(seq, p, needed)? {
                    Some(mp) => stabilization = stabilization.max(mp),
                    None => {
                        return Ok(Verdict::since(
                            Decision::Unknown,
                            Certificate::Horizon {
                                scanned: seq.term_cap(),
                            },
                        ))
                    }
                }
            }
            POrder::LowerBound {
                at_least,
                scanned_to,
            } => {
                if at_least < needed {
                    return Ok(Verdict::since(
                        Decision::Unknown,
                        Certificate::Horizon {
                            scanned: scanned_to,
                        },
                    ));
                }
            }
        }
    }
    // Every prime clears its needed valuation by `stabilization`.
    let t = seq.term(stabilization)?;
    if (&t % &b).is_zero() {
        Ok(Verdict::since(
            Decision::In,
            Certificate::RationalDivisibility { m: stabilization },
        ))
    } else {
        Err(Error::InconsistentMetadata(format!(
            "p-adic orders promised b | u_{stabilization} but division fails"
        )))
    }
}

/// Smallest `m` with `v_p(u_m) >= needed`, walking ratio valuations.
fn index_reaching_valuation(seq: &ArithSeq, p: u64, needed: u64) -> Result<Option<u64>> {
    let mut v = valuation(seq.seed(), p);
    let mut m = 0u64;
    while v < needed {
        m += 1;
        if m > seq.term_cap() {
            return Ok(None);
        }
        match seq.ratio(m) {
            Ok(q) => v += valuation(&q, p),
            Err(Error::ResourceCap { .. }) => return Ok(None),
            Err(e) => return Err(e),
        }
    }
    Ok(Some(m))
}

/// Decide membership of a digit-stream point via the support criteria.
pub fn member_stream(rep: &CanonicalRep) -> Result<Verdict> {
    let seq = rep.seq();
    match rep.support_class()? {
        SupportClass::Finite => {
            let end = rep.finite_support_end()?.unwrap_or(0);
            Ok(Verdict::since(
                Decision::In,
                Certificate::BoundedSupportFinite { end },
            ))
        }
        SupportClass::UBounded => {
            let witnesses = support_witnesses(rep, 8)?;
            Ok(Verdict::since(
                Decision::Out,
                Certificate::BoundedSupportInfinite { witnesses },
            ))
        }
        SupportClass::UDivergent => divergent_verdict(rep, seq),
        SupportClass::Mixed | SupportClass::Unknown => Ok(Verdict::since(
            Decision::Unknown,
            Certificate::Horizon { scanned: 0 },
        )),
    }
}

fn support_witnesses(rep: &CanonicalRep, count: usize) -> Result<Vec<u64>> {
    let fam = match rep.support()? {
        crate::circle::SupportInfo::Infinite(fam) => fam,
        crate::circle::SupportInfo::Finite { .. } => {
            return Err(Error::InvalidDigits("expected infinite support".into()))
        }
    };
    let mut out = Vec::new();
    for n in fam.iter().take(count * 4) {
        if !rep.digit(n)?.is_zero() {
            out.push(n);
            if out.len() == count {
                break;
            }
        }
    }
    Ok(out)
}

/// Limit of `c_n/q_n` over a set where the ratios diverge to infinity,
/// straight from the digit rule.
fn divergent_regime_limit(rule: &DigitRule) -> Option<Rat> {
    match rule {
        DigitRule::Constant(_) => Some(Rat::zero()),
        DigitRule::Periodic { .. } => Some(Rat::zero()),
        DigitRule::FloorFraction(r) => Some(r.clone()),
        DigitRule::SupportIndicator { value, .. } => Some(match value {
            SupportValue::Constant(_) => Rat::zero(),
            SupportValue::MaxDigit => Rat::one(),
        }),
        DigitRule::FiniteList(_) | DigitRule::AlternatingXs(_) => None,
    }
}

fn divergent_verdict(rep: &CanonicalRep, seq: &Arc<ArithSeq>) -> Result<Verdict> {
    let limit = match divergent_regime_limit(rep.rule()) {
        Some(l) => l,
        None => {
            return Err(Error::UnsupportedDescriptor(
                "no symbolic digit-to-ratio limit for this descriptor",
            ))
        }
    };
    // Condition on the torus: the limit must be a null value of the norm.
    let torus_null = limit.is_zero() || limit == Rat::one();
    if !torus_null {
        return Ok(Verdict::since(
            Decision::Out,
            Certificate::DivergentSupportNonNull {
                limit,
                in_real_only: false,
            },
        ));
    }
    if limit.is_zero() {
        // Real-valued null limit over the whole support.
        return Ok(Verdict::since(
            Decision::In,
            Certificate::DivergentSupportLimit {
                route: LimitRoute::RealLimitZero,
                decay_max_digit: decay_digit_bound(rep.rule()),
            },
        ));
    }
    // Torus-null but real limit 1: the bounded-predecessor classes decide.
    match bounded_predecessor_class_infinite(rep, seq)? {
        Tri::Yes => Ok(Verdict::since(
            Decision::Out,
            Certificate::DivergentSupportNonNull {
                limit,
                in_real_only: true,
            },
        )),
        Tri::No => Ok(Verdict::since(
            Decision::In,
            Certificate::DivergentSupportLimit {
                route: LimitRoute::TorusLimitWithBoundedClasses,
                decay_max_digit: None,
            },
        )),
        Tri::Unknown => Ok(Verdict::since(
            Decision::Unknown,
            Certificate::Horizon { scanned: 0 },
        )),
    }
}

/// Is there an infinite piece of the support whose predecessor indices carry
/// bounded ratios? The ratio catalog admits exactly one maximal such piece:
/// the successors of a sparse override's exception set over a divergent
/// base. Everywhere-divergent rules have none.
fn bounded_predecessor_class_infinite(rep: &CanonicalRep, seq: &ArithSeq) -> Result<Tri> {
    match seq.behavior() {
        RatioBehavior::DivergesToInfinity => Ok(Tri::No),
        RatioBehavior::UnboundedMixed => {
            let Some((except, _)) = bounded_exception_set(seq.rule(), 0) else {
                return Ok(Tri::Unknown);
            };
            let supp = match rep.support()? {
                crate::circle::SupportInfo::Infinite(fam) => fam,
                crate::circle::SupportInfo::Finite { .. } => return Ok(Tri::No),
            };
            let shifted = IndexFamily::Shift {
                offset: 1,
                inner: Box::new(except),
            };
            Ok(supp.intersect_is_infinite(&shifted))
        }
        _ => Ok(Tri::Unknown),
    }
}

fn decay_digit_bound(rule: &DigitRule) -> Option<u64> {
    match rule {
        DigitRule::Constant(c) => Some(*c),
        DigitRule::SupportIndicator {
            value: SupportValue::Constant(c),
            ..
        } => Some(*c),
        DigitRule::Periodic { preamble, cycle } => preamble
            .iter()
            .chain(cycle.iter())
            .max()
            .and_then(|m| u64::try_from(m).ok()),
        _ => None,
    }
}

/// Evaluate the decay promise `2·max_digit / q*_n` carried by an In
/// certificate at index `n`.
pub fn decay_bound_at(seq: &ArithSeq, max_digit: u64, n: u64) -> Result<Rat> {
    let tmr = crate::circle::tail_min_ratio(seq, n)?;
    Ok(rat(2, 1) * rat_big(BigUint::from(max_digit), tmr))
}

/// Exact predicate `‖u_n · x‖ <= 1/M`.
pub fn s_nm(x: &CirclePoint, seq: &ArithSeq, n: u64, m: u64) -> Result<bool> {
    if m < 1 {
        return Err(Error::InvalidRule("norm threshold must have M >= 1".into()));
    }
    let u_n = seq.term(n)?;
    let scaled = x.mul_int(&BigInt::from(u_n));
    Ok(scaled.norm() <= rat(1, m as i64))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NumericWitness {
    pub index: u64,
    pub lower_bound: Rat,
    pub depth: u64,
}

/// Outcome of a falsification run: the smallest-index witness when one is
/// certified, plus the indices whose enclosures straddled the threshold and
/// stayed inconclusive after deepening.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FalsifyOutcome {
    pub witness: Option<NumericWitness>,
    pub inconclusive: Vec<u64>,
}

/// Search `n <= horizon` for a certified lower bound `‖u_n x‖ >= ε`. The
/// smallest witness index wins; absence of a witness proves nothing.
pub fn falsify(rep: &CanonicalRep, horizon: u64, eps: &Rat) -> Result<FalsifyOutcome> {
    if eps <= &Rat::zero() {
        return Err(Error::InvalidRule(
            "falsification threshold must be positive".into(),
        ));
    }
    let depth = horizon + 32;
    let mut inconclusive = Vec::new();
    for n in 0..=horizon {
        let enc = orbit_norm_enclosure(rep, n, depth)?;
        if enc.lo() >= eps {
            return Ok(FalsifyOutcome {
                witness: Some(NumericWitness {
                    index: n,
                    lower_bound: enc.lo().clone(),
                    depth,
                }),
                inconclusive,
            });
        }
        if enc.hi() >= eps {
            // Straddles the threshold; one deeper attempt.
            let deeper = orbit_norm_enclosure(rep, n, depth + 64)?;
            if deeper.lo() >= eps {
                return Ok(FalsifyOutcome {
                    witness: Some(NumericWitness {
                        index: n,
                        lower_bound: deeper.lo().clone(),
                        depth: depth + 64,
                    }),
                    inconclusive,
                });
            }
            if deeper.hi() >= eps {
                inconclusive.push(n);
            }
        }
    }
    Ok(FalsifyOutcome {
        witness: None,
        inconclusive,
    })
}

/// Replay a rational-membership certificate against independent
/// computations. Returns `Ok(true)` when the evidence checks out.
pub fn check_rational_certificate(
    x: &CirclePoint,
    seq: &Arc<ArithSeq>,
    verdict: &Verdict,
) -> Result<bool> {
    let b = x.denom();
    match (&verdict.decision, &verdict.certificate) {
        (Decision::In, Certificate::RationalDivisibility { m }) => {
            Ok((seq.term(*m)? % &b).is_zero())
        }
        (Decision::Out, Certificate::PrimeObstruction { p, order, needed }) => {
            if !crate::rat::is_prime_u64(*p) || valuation(&b, *p) != *needed || needed <= order {
                return Ok(false);
            }
            // The p-part of b never divides u_n, so every orbit norm stays
            // at least 1/b; spot-check a prefix numerically.
            for n in 0..=24u64.min(seq.term_cap()) {
                let norm = x.mul_int(&BigInt::from(seq.term(n)?)).norm();
                if norm < rat_big(BigUint::one(), b.clone()) {
                    return Ok(false);
                }
            }
            // And the claimed order must match a rescan of ratio valuations.
            match seq.p_order(*p) {
                POrder::Finite { value, .. } => Ok(value == *order),
                _ => Ok(false),
            }
        }
        (Decision::Unknown, Certificate::Horizon { .. }) => Ok(true),
        _ => Ok(false),
    }
}

/// Replay a stream-membership certificate.
pub fn check_stream_certificate(rep: &CanonicalRep, verdict: &Verdict) -> Result<bool> {
    let seq = rep.seq();
    match (&verdict.decision, &verdict.certificate) {
        (Decision::In, Certificate::BoundedSupportFinite { end }) => {
            for n in (end + 1)..=(end + 16) {
                if !rep.digit(n)?.is_zero() {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        (Decision::Out, Certificate::BoundedSupportInfinite { witnesses }) => {
            if witnesses.is_empty() || seq.bounded_sup().is_none() {
                return Ok(false);
            }
            let increasing = witnesses.windows(2).all(|w| w[0] < w[1]);
            if !increasing {
                return Ok(false);
            }
            for &n in witnesses {
                if rep.digit(n)?.is_zero() {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        (
            Decision::In,
            Certificate::DivergentSupportLimit {
                decay_max_digit, ..
            },
        ) => {
            // Numeric spot check: certified norm enclosures must stay below
            // the decay promise where one is made.
            if let Some(max_digit) = decay_max_digit {
                for n in [1u64, 4, 16, 48] {
                    let enc = orbit_norm_enclosure(rep, n, n + 48)?;
                    let bound = decay_bound_at(seq, *max_digit, n)?;
                    if enc.lo() > &bound {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        }
        (Decision::Out, Certificate::DivergentSupportNonNull { limit, .. }) => {
            // The digit-to-ratio quotients must approach the claimed limit:
            // |c_n/q_n - limit| <= 2/q_n at deep support indices.
            let fam = match rep.support()? {
                crate::circle::SupportInfo::Infinite(fam) => fam,
                crate::circle::SupportInfo::Finite { .. } => return Ok(false),
            };
            let mut checked = 0;
            for n in fam.iter().skip(4).take(8) {
                let c = rep.digit(n)?;
                if c.is_zero() {
                    continue;
                }
                let q = seq.ratio(n)?;
                let quotient = rat_big(c, q.clone());
                let err = (quotient - limit).abs();
                if err > rat(2, 1) * rat_big(BigUint::one(), q) {
                    return Ok(false);
                }
                checked += 1;
            }
            Ok(checked > 0)
        }
        (Decision::Unknown, Certificate::Horizon { .. }) => Ok(true),
        _ => Ok(false),
    }
}

/// Replay a numeric falsification witness.
pub fn check_numeric_witness(rep: &CanonicalRep, w: &NumericWitness) -> Result<bool> {
    let enc = orbit_norm_enclosure(rep, w.index, w.depth)?;
    Ok(enc.lo() >= &w.lower_bound)
}

/// Independent brute-force oracle: does the orbit of a rational reach zero
/// (and hence stay there) within the horizon? Used by tests to cross-check
/// the p-adic route; deliberately avoids it.
pub fn orbit_reaches_zero(x: &CirclePoint, seq: &ArithSeq, horizon: u64) -> Result<bool> {
    let b = x.denom();
    let mut t = seq.term(0)? % &b;
    for n in 0..=horizon {
        if t.is_zero() {
            return Ok(true);
        }
        match seq.ratio(n + 1) {
            Ok(q) => t = (t * (q % &b)) % &b,
            // End of the generatable orbit: no zero seen.
            Err(Error::ResourceCap { .. }) => return Ok(false),
            Err(e) => return Err(e),
        }
    }
    Ok(false)
}
