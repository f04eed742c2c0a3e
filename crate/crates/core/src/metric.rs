//! The complete group metric `ρ_u` and its ball geometry.
//!
//! `ρ_u(x, y) = sup { ‖x-y‖, ‖u_n x - u_n y‖ : n >= 0 }` metrizes the
//! topology witnessing polishability of `t_u(T)`; here the base metric is
//! fixed to the circle norm. On rationals whose denominator divides some
//! `u_m`, or whose orbit is eventually periodic, the sup is an exact
//! rational; otherwise a certified interval is returned. Digit-stream points
//! get certified interval enclosures that tighten with the scan horizon.
//!
//! The alternating-series points `x_S = 1/u_{n_1} - 1/u_{n_2} + ...` over a
//! subset `S` of the limsup-attainment indices realize the ball-geometry
//! facts at radius `1/q_u`: their block norms obey exact closed-form bounds,
//! distinct gap patterns give distinct points, and the distance from zero
//! approaches (bounded gaps) or attains (divergent gaps) `1/q_u`.

use crate::aseq::{ArithSeq, RatioBehavior};
use crate::circle::{
    norm_interval, ratio_period, CanonicalRep, CirclePoint, DigitRule, Interval, SupportValue,
};
use crate::indices::IndexFamily;
use crate::rat::{rat, rat_big};
use crate::{Caps, Error, Rat, Result, Tri};
use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};
use std::collections::HashMap;
use std::sync::Arc;

/// Gap rule for an [`XsDescriptor`]: constant gaps, doubling gaps, or an
/// explicit gap list optionally continued by another rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum XsGapRule {
    Constant(u64),
    Doubling {
        first: u64,
    },
    Explicit {
        gaps: Vec<u64>,
        then: Option<Box<XsGapRule>>,
    },
}

/// Selects `S = { n_1 < n_2 < ... }` inside the limsup-attainment set, with
/// every gap `d_i = n_{i+1} - n_i >= 2`. An explicit rule with no
/// continuation describes a finite alternating sum (the index count must be
/// even so every block is closed).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XsDescriptor {
    start: u64,
    rule: XsGapRule,
}

impl XsDescriptor {
    pub fn new(start: u64, rule: XsGapRule) -> Self {
        XsDescriptor { start, rule }
    }

    pub fn constant_gap(start: u64, gap: u64) -> Self {
        XsDescriptor::new(start, XsGapRule::Constant(gap))
    }

    pub fn doubling(start: u64, first_gap: u64) -> Self {
        XsDescriptor::new(start, XsGapRule::Doubling { first: first_gap })
    }

    pub fn start(&self) -> u64 {
        self.start
    }

    pub fn rule(&self) -> &XsGapRule {
        &self.rule
    }

    /// The index `n_i` (1-based), or `None` past the end of a finite
    /// descriptor. Errors on u64 overflow.
    pub fn nth_index(&self, i: u64) -> Result<Option<u64>> {
        if i == 0 {
            return Err(Error::InvalidGaps("index positions are 1-based".into()));
        }
        let mut n = self.start;
        let mut rule = self.rule.clone();
        let mut remaining = i - 1;
        while remaining > 0 {
            let gap = match rule {
                XsGapRule::Constant(d) => d,
                XsGapRule::Doubling { first } => {
                    rule = XsGapRule::Doubling {
                        first: first.checked_mul(2).ok_or(Error::ResourceCap {
                            what: "doubling gap size",
                            limit: u64::MAX,
                        })?,
                    };
                    first
                }
                XsGapRule::Explicit { ref gaps, ref then } => {
                    if gaps.is_empty() {
                        match then {
                            Some(inner) => {
                                rule = (**inner).clone();
                                continue;
                            }
                            None => return Ok(None),
                        }
                    } else {
                        let g = gaps[0];
                        rule = XsGapRule::Explicit {
                            gaps: gaps[1..].to_vec(),
                            then: then.clone(),
                        };
                        g
                    }
                }
            };
            n = n.checked_add(gap).ok_or(Error::ResourceCap {
                what: "gap descriptor index",
                limit: u64::MAX,
            })?;
            remaining -= 1;
        }
        Ok(Some(n))
    }

    /// Number of indices for finite descriptors.
    pub fn finite_len(&self) -> Option<u64> {
        fn gaps_len(rule: &XsGapRule) -> Option<u64> {
            match rule {
                XsGapRule::Explicit { gaps, then: None } => Some(gaps.len() as u64),
                XsGapRule::Explicit {
                    gaps,
                    then: Some(t),
                } => Some(gaps.len() as u64 + gaps_len(t)?),
                _ => None,
            }
        }
        gaps_len(&self.rule).map(|g| g + 1)
    }

    /// Last block end for finite descriptors.
    pub fn finite_block_end(&self) -> Option<u64> {
        let len = self.finite_len()?;
        self.nth_index(len).ok().flatten()
    }

    /// Is `j` inside a digit block `(n_{2k-1}, n_{2k}]`?
    pub fn in_block(&self, j: u64) -> Result<bool> {
        if j <= self.start {
            return Ok(false);
        }
        let mut k = 1u64;
        loop {
            let lo = match self.nth_index(2 * k - 1)? {
                Some(n) => n,
                None => return Ok(false),
            };
            if lo >= j {
                return Ok(false);
            }
            match self.nth_index(2 * k)? {
                Some(hi) => {
                    if j <= hi {
                        return Ok(true);
                    }
                }
                None => return Ok(false),
            }
            k += 1;
        }
    }

    /// Largest gap, `None` when the gaps are unbounded (doubling rule).
    pub fn max_gap(&self) -> Option<u64> {
        fn go(rule: &XsGapRule) -> Option<u64> {
            match rule {
                XsGapRule::Constant(d) => Some(*d),
                XsGapRule::Doubling { .. } => None,
                XsGapRule::Explicit { gaps, then } => {
                    let m = gaps.iter().copied().max().unwrap_or(0);
                    match then {
                        Some(t) => Some(m.max(go(t)?)),
                        None => Some(m),
                    }
                }
            }
        }
        go(&self.rule)
    }

    /// The descriptor for the indices after the first `steps` ones.
    fn advance(&self, steps: u64) -> Result<Option<XsDescriptor>> {
        let Some(start) = self.nth_index(steps + 1)? else {
            return Ok(None);
        };
        let mut rule = self.rule.clone();
        let mut left = steps;
        while left > 0 {
            match rule {
                XsGapRule::Constant(_) => break,
                XsGapRule::Doubling { first } => {
                    rule = XsGapRule::Doubling {
                        first: first.checked_mul(2).ok_or(Error::ResourceCap {
                            what: "doubling gap size",
                            limit: u64::MAX,
                        })?,
                    };
                    left -= 1;
                }
                XsGapRule::Explicit { gaps, then } => {
                    if gaps.is_empty() {
                        match then {
                            Some(inner) => {
                                rule = *inner;
                                continue;
                            }
                            None => {
                                rule = XsGapRule::Explicit { gaps, then: None };
                                break;
                            }
                        }
                    }
                    let consume = left.min(gaps.len() as u64);
                    left -= consume;
                    rule = XsGapRule::Explicit {
                        gaps: gaps[consume as usize..].to_vec(),
                        then,
                    };
                }
            }
        }
        Ok(Some(XsDescriptor { start, rule }))
    }

    fn min_gap(&self) -> u64 {
        fn go(rule: &XsGapRule) -> u64 {
            match rule {
                XsGapRule::Constant(d) => *d,
                XsGapRule::Doubling { first } => *first,
                XsGapRule::Explicit { gaps, then } => {
                    let m = gaps.iter().copied().min().unwrap_or(u64::MAX);
                    match then {
                        Some(t) => m.min(go(t)),
                        None => m,
                    }
                }
            }
        }
        go(&self.rule)
    }

    /// Validate against a sequence: bounded ratios with known limsup
    /// attainment, gaps >= 2, every index inside the attainment set, and
    /// complete blocks for finite descriptors.
    pub fn validate_against(&self, seq: &ArithSeq) -> Result<()> {
        let fam = match seq.behavior() {
            RatioBehavior::Bounded { attains_limsup, .. } => attains_limsup,
            _ => {
                return Err(Error::UnknownAsymptotics(
                    "x_S construction needs bounded ratios with a known attainment set",
                ))
            }
        };
        if self.min_gap() < 2 {
            return Err(Error::InvalidGaps("every gap must be >= 2".into()));
        }
        if let Some(len) = self.finite_len() {
            if len % 2 != 0 {
                return Err(Error::InvalidGaps(
                    "finite descriptors need an even number of indices".into(),
                ));
            }
        }
        match self.indices_within(fam)? {
            Tri::Yes => Ok(()),
            Tri::No => Err(Error::InvalidGaps(
                "some index lies outside the limsup attainment set".into(),
            )),
            Tri::Unknown => Err(Error::InvalidGaps(
                "cannot certify that all indices attain the limsup ratio".into(),
            )),
        }
    }

    /// Are all indices members of `fam`? Checks a prefix pointwise while
    /// looking for a symbolic certificate covering the rest.
    fn indices_within(&self, fam: &IndexFamily) -> Result<Tri> {
        let mut desc = self.clone();
        for _ in 0..64 {
            if desc.tail_certified_within(fam) {
                return Ok(Tri::Yes);
            }
            if !fam.contains(desc.start) {
                return Ok(Tri::No);
            }
            match desc.advance(1)? {
                Some(next) => desc = next,
                None => return Ok(Tri::Yes),
            }
        }
        Ok(Tri::Unknown)
    }

    /// Symbolic certificate that every index of `self` lies in `fam`.
    fn tail_certified_within(&self, fam: &IndexFamily) -> bool {
        match fam {
            IndexFamily::AllFrom(a) => self.start >= *a,
            IndexFamily::Residues {
                modulus,
                residues,
                from,
            } => {
                if self.start < *from {
                    return false;
                }
                // Walk (index mod m, gap state mod m) until it repeats; only
                // constant and doubling rules carry a finite mod-m state.
                let m = (*modulus).max(1);
                match &self.rule {
                    XsGapRule::Constant(d) => {
                        let mut seen = std::collections::HashSet::new();
                        let mut n = self.start % m;
                        loop {
                            if !residues.contains(&n) {
                                return false;
                            }
                            if !seen.insert(n) {
                                return true;
                            }
                            n = (n + d) % m;
                        }
                    }
                    XsGapRule::Doubling { first } => {
                        let mut seen = std::collections::HashSet::new();
                        let mut n = self.start % m;
                        let mut g = first % m;
                        loop {
                            if !residues.contains(&n) {
                                return false;
                            }
                            if !seen.insert((n, g)) {
                                return true;
                            }
                            n = (n + g) % m;
                            g = g * 2 % m;
                        }
                    }
                    XsGapRule::Explicit { .. } => false, // handled by advancing
                }
            }
            IndexFamily::Powers { base } => {
                // Doubling with first == start over base 2 runs through the
                // powers of two exactly.
                matches!(&self.rule, XsGapRule::Doubling { first }
                    if *base == 2 && *first == self.start
                        && IndexFamily::Powers { base: 2 }.contains(self.start))
            }
            IndexFamily::Shift { offset, inner } => {
                if self.start <= *offset {
                    return false;
                }
                XsDescriptor {
                    start: self.start - offset,
                    rule: self.rule.clone(),
                }
                .tail_certified_within(inner)
            }
            IndexFamily::Union(parts) => parts.iter().any(|p| self.tail_certified_within(p)),
            _ => false,
        }
    }

    /// Parse the gap-pattern grammar:
    ///
    /// ```text
    /// const:<d>:start:<n1> | doubling:first:<g>:start:<n1>
    ///   | list:<n1,n2,...> | list:<n1,...>:then:const:<d>
    ///   | list:<n1,...>:then:doubling
    /// ```
    pub fn parse(s: &str) -> Result<XsDescriptor> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("const:") {
            let (d, start) = rest
                .split_once(":start:")
                .ok_or_else(|| Error::Parse("const gap pattern needs `:start:<n1>`".into()))?;
            return Ok(XsDescriptor::constant_gap(parse_u64(start)?, parse_u64(d)?));
        }
        if let Some(rest) = s.strip_prefix("doubling:first:") {
            let (g, start) = rest
                .split_once(":start:")
                .ok_or_else(|| Error::Parse("doubling pattern needs `:start:<n1>`".into()))?;
            return Ok(XsDescriptor::doubling(parse_u64(start)?, parse_u64(g)?));
        }
        if let Some(rest) = s.strip_prefix("list:") {
            let (list, then) = match rest.split_once(":then:") {
                Some((l, t)) => (l, Some(t)),
                None => (rest, None),
            };
            let indices: Vec<u64> = list.split(',').map(parse_u64).collect::<Result<Vec<_>>>()?;
            if indices.is_empty() || indices.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Parse(
                    "index list must be strictly increasing".into(),
                ));
            }
            let gaps: Vec<u64> = indices.windows(2).map(|w| w[1] - w[0]).collect();
            let then = match then {
                None => None,
                Some(t) => {
                    if let Some(d) = t.strip_prefix("const:") {
                        Some(Box::new(XsGapRule::Constant(parse_u64(d)?)))
                    } else if t == "doubling" {
                        let last = *gaps.last().ok_or_else(|| {
                            Error::Parse("doubling continuation needs at least two indices".into())
                        })?;
                        Some(Box::new(XsGapRule::Doubling { first: last * 2 }))
                    } else {
                        return Err(Error::Parse(format!("bad gap continuation `{t}`")));
                    }
                }
            };
            return Ok(XsDescriptor::new(
                indices[0],
                XsGapRule::Explicit { gaps, then },
            ));
        }
        Err(Error::Parse(format!("unrecognized gap pattern `{s}`")))
    }
}

fn parse_u64(s: &str) -> Result<u64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad integer `{s}`")))
}

/// Build the alternating-series digit stream for `S`: digits `q_j - 1` on
/// the blocks `(n_{2k-1}, n_{2k}]`, zero elsewhere. Prefix evaluation agrees
/// with the alternating partial sums within the certified tail.
pub fn build_xs(desc: &XsDescriptor, seq: &Arc<ArithSeq>) -> Result<CanonicalRep> {
    CanonicalRep::new(seq.clone(), DigitRule::AlternatingXs(desc.clone()))
}

/// Exact alternating partial sum `Σ_{i<=terms} (-1)^{i+1}/u_{n_i}`.
pub fn xs_partial_sum(desc: &XsDescriptor, seq: &ArithSeq, terms: u64) -> Result<Rat> {
    let mut sum = Rat::zero();
    for i in 1..=terms {
        let Some(n) = desc.nth_index(i)? else { break };
        let u = seq.term(n)?;
        let t = rat_big(BigUint::one(), u);
        if i % 2 == 1 {
            sum += t;
        } else {
            sum -= t;
        }
    }
    Ok(sum)
}

/// Closed-form interval for the block norm `‖u_{n_k - 1} x_S‖`:
///
/// `1/q_{n_k} - 1/(q_{n_k}···q_{n_{k+1}})` up to the same plus
/// `1/(q_{n_k}···q_{n_{k+2}})`. The true norm is verified to lie inside by
/// an independent certified enclosure before the interval is returned.
pub fn xs_norm_bounds(desc: &XsDescriptor, seq: &Arc<ArithSeq>, k: u64) -> Result<Interval> {
    if k == 0 {
        return Err(Error::InvalidGaps("block index k is 1-based".into()));
    }
    let need = |i: u64| -> Result<u64> {
        desc.nth_index(i)?.ok_or_else(|| {
            Error::InvalidGaps(format!("descriptor has no index n_{i} for the closed form"))
        })
    };
    let n_k = need(k)?;
    let n_k1 = need(k + 1)?;
    let n_k2 = need(k + 2)?;
    let q_nk = seq.ratio(n_k)?;
    let mut prod1 = BigUint::one();
    for j in n_k..=n_k1 {
        prod1 *= seq.ratio(j)?;
    }
    let mut prod2 = prod1.clone();
    for j in (n_k1 + 1)..=n_k2 {
        prod2 *= seq.ratio(j)?;
    }
    let lower = rat_big(BigUint::one(), q_nk) - rat_big(BigUint::one(), prod1);
    let upper = &lower + rat_big(BigUint::one(), prod2);
    let closed_form = Interval::new(lower, upper);

    // Independent verification: tighten a certified enclosure of the true
    // norm until it fits inside the closed form.
    let rep = build_xs(desc, seq)?;
    let mut depth = n_k2 + 8;
    for _ in 0..4 {
        let enc = orbit_norm_enclosure(&rep, n_k - 1, depth)?;
        if closed_form.contains_interval(&enc) {
            return Ok(closed_form);
        }
        depth += 32;
    }
    Err(Error::CannotCertify(format!(
        "numeric enclosure of the block norm at u_{} did not settle inside the closed form",
        n_k - 1
    )))
}

/// Certified enclosure of `‖u_n · x‖` for a digit-stream point, from the
/// exact prefix at `depth` digits plus the tail interval.
pub fn orbit_norm_enclosure(rep: &CanonicalRep, n: u64, depth: u64) -> Result<Interval> {
    let seq = rep.seq();
    let finite_end = rep.finite_support_end()?;
    if let Some(end) = finite_end {
        if n >= end {
            // u_n x is an integer once n reaches the last support index.
            return Ok(Interval::point(Rat::zero()));
        }
    }
    let depth = depth.max(n + 1).max(finite_end.unwrap_or(0));
    let (num, den) = rep.prefix_numerator(depth)?;
    let u_n = seq.term(n)?;
    // Work over the doubled denominator so the norm peak 1/2 stays integral.
    let den2 = &den * 2u32;
    let r2 = (u_n.clone() * num * 2u32) % &den2;
    let w2 = if finite_end.is_some() {
        BigUint::zero()
    } else {
        u_n * 2u32
    };
    let (lo, hi) = norm_bounds_over(&r2, &w2, &den2);
    Ok(Interval::new(rat_big(lo, den2.clone()), rat_big(hi, den2)))
}

/// Image of the circle norm over the arc `[r, r+w]/den` (mod 1), as
/// numerator bounds over `den`. Integer-only mirror of [`norm_interval`].
fn norm_bounds_over(r: &BigUint, w: &BigUint, den: &BigUint) -> (BigUint, BigUint) {
    let peak = den / 2u32;
    if w >= den {
        return (BigUint::zero(), peak);
    }
    let nrm = |v: &BigUint| -> BigUint {
        let other = den - v;
        if v <= &other {
            v.clone()
        } else {
            other
        }
    };
    let hi = r + w;
    if &hi <= den {
        let (a, b) = (nrm(r), nrm(&hi));
        let straddles = r <= &peak && peak <= hi;
        let lo_n = if a <= b { a.clone() } else { b.clone() };
        let hi_n = if straddles {
            peak
        } else if a >= b {
            a
        } else {
            b
        };
        (lo_n, hi_n)
    } else {
        let tail = &hi - den;
        let hi_n = if r <= &peak || tail >= peak {
            peak
        } else {
            let (a, b) = (nrm(r), nrm(&tail));
            if a >= b {
                a
            } else {
                b
            }
        };
        (BigUint::zero(), hi_n)
    }
}

/// Result of an exact `ρ_u` computation on a rational point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RhoResult {
    Exact(Rat),
    /// The orbit is not finitely resolvable for this rule; the true value
    /// lies in the interval.
    Enclosure(Interval),
}

impl RhoResult {
    pub fn exact(&self) -> Option<&Rat> {
        match self {
            RhoResult::Exact(v) => Some(v),
            RhoResult::Enclosure(_) => None,
        }
    }
}

/// `ρ_u(x, 0)` for a rational point: the sup of `‖x‖` and all orbit norms
/// `‖u_n x‖`.
///
/// Exact when the denominator divides some `u_m` (the orbit dies), or when
/// the multiplier sequence is eventually periodic mod the denominator
/// (constant, periodic-list, affine, and prefixed rules), in which case the
/// sup ranges over one transient plus one full cycle. Otherwise the scan
/// stops at the cap and an interval `[max seen, 1/2]` is returned.
pub fn rho_rational(x: &CirclePoint, seq: &ArithSeq, caps: &Caps) -> Result<RhoResult> {
    if x.is_zero() {
        return Ok(RhoResult::Exact(Rat::zero()));
    }
    let b = x.denom();
    let a = x.numer();
    let mut best = x.norm();
    // Orbit r_n = a·u_n mod b; multiplier at step n+1 is q_{n+1} mod b.
    let mut r = (&a * seq.term(0)?) % &b;
    // Affine multipliers are periodic mod b with period b.
    let phase_len = match ratio_period(seq.rule()) {
        Some(l) => Some(l),
        None => match seq.rule() {
            crate::aseq::RatioRule::AffineInN { .. } => u64::try_from(&b).ok(),
            _ => None,
        },
    };
    let transient = crate::circle::ratio_transient(seq.rule());
    let mut seen: HashMap<(BigUint, u64), u64> = HashMap::new();
    let mut n = 0u64;
    loop {
        if r.is_zero() {
            return Ok(RhoResult::Exact(best));
        }
        let norm = norm_of_residue(&r, &b);
        if norm > best {
            best = norm;
        }
        if let Some(l) = phase_len {
            // States inside the non-periodic head never anchor a cycle.
            let phase = if n < transient {
                u64::MAX - n
            } else {
                n % l.max(1)
            };
            if seen.insert((r.clone(), phase), n).is_some() {
                return Ok(RhoResult::Exact(best));
            }
        }
        if n >= caps.horizon * 8 {
            return Ok(RhoResult::Enclosure(Interval::new(best, rat(1, 2))));
        }
        n += 1;
        let q = seq.ratio(n)?;
        r = (r * (q % &b)) % &b;
    }
}

fn norm_of_residue(r: &BigUint, b: &BigUint) -> Rat {
    let other = b - r;
    let smaller = if r <= &other { r.clone() } else { other };
    rat_big(smaller, b.clone())
}

/// Certified interval enclosing `ρ_u(x, 0)` for a digit-stream point.
///
/// The lower endpoint is the best certified lower bound among `‖x‖` and
/// `‖u_n x‖` for `n <= horizon`; the upper endpoint adds the certified
/// enclosure uppers and a descriptor-level bound on every norm beyond the
/// horizon.
pub fn rho_interval(rep: &CanonicalRep, horizon: u64) -> Result<Interval> {
    rho_interval_shifted(rep, &Rat::zero(), horizon)
}

/// Certified interval enclosing `ρ_u(x - shift, 0)`, where `shift` must be a
/// prefix value of the stream (a rational whose denominator divides `u_m`
/// for some `m <= horizon`), so that `u_s · shift` is an integer beyond the
/// horizon and the descriptor tail bound still applies.
pub fn rho_interval_shifted(rep: &CanonicalRep, shift: &Rat, horizon: u64) -> Result<Interval> {
    let seq = rep.seq();
    if !shift.is_zero() {
        let den = shift.denom().magnitude();
        let ok = (0..=horizon).any(|m| seq.term(m).map(|t| (t % den).is_zero()).unwrap_or(false));
        if !ok {
            return Err(Error::InvalidRule(
                "shift denominator must divide a sequence term within the horizon".into(),
            ));
        }
    }
    let finite_end = rep.finite_support_end()?;
    let scan_to = match finite_end {
        Some(end) => horizon.max(end),
        None => horizon,
    };
    let depth = scan_to + 32;
    let (num, den) = rep.prefix_numerator(depth)?;
    // Everything runs over the doubled common denominator so the norm peak
    // 1/2 stays integral; rationals are only materialized at the end.
    let den2 = &den * 2u32;
    let shift2 = {
        let sd = shift.denom().magnitude();
        let sn = shift.numer().magnitude();
        if !(&den % sd).is_zero() {
            return Err(Error::InvalidRule(
                "shift denominator must divide the evaluation depth term".into(),
            ));
        }
        sn * (&den / sd) * 2u32
    };
    let num2 = num * 2u32;
    if shift2 > num2 {
        return Err(Error::InvalidRule(
            "shift must not exceed the stream prefix".into(),
        ));
    }
    let num2 = num2 - shift2;
    // Finite support within the scan depth means the prefix IS the point.
    let tail_exact = finite_end.is_some_and(|end| depth >= end);

    let mut lower = BigUint::zero();
    let mut orbit_upper = BigUint::zero();

    // The base-metric term ‖x - shift‖.
    let point_width = if tail_exact {
        BigUint::zero()
    } else {
        BigUint::from(2u32)
    };
    let (point_lo, point_hi) = norm_bounds_over(&num2, &point_width, &den2);
    if point_lo > lower {
        lower = point_lo;
    }
    // Orbit terms up to the horizon.
    for n in 0..=scan_to {
        if let Some(end) = finite_end {
            if n >= end && shift.is_zero() {
                break;
            }
        }
        let u_n = seq.term(n)?;
        let r2 = (&u_n * &num2) % &den2;
        let w2 = if tail_exact {
            BigUint::zero()
        } else {
            u_n * 2u32
        };
        let (lo, hi) = norm_bounds_over(&r2, &w2, &den2);
        if lo > lower {
            lower = lo;
        }
        if hi > orbit_upper {
            orbit_upper = hi;
        }
    }

    let lower = rat_big(lower, den2.clone());
    let mut orbit_upper = rat_big(orbit_upper, den2.clone());
    let tail = sup_norm_tail_bound(rep, scan_to)?;
    if tail > orbit_upper {
        orbit_upper = tail;
    }
    // For alternating-series points the block estimates bound every orbit
    // norm, not just those past the horizon, so they may sharpen the scanned
    // enclosures (whose widths would otherwise leak past the supremum).
    if shift.is_zero() {
        if let DigitRule::AlternatingXs(desc) = rep.rule() {
            let uniform = xs_tail_norm_bound(desc, seq, 0)?;
            if uniform < orbit_upper {
                orbit_upper = uniform;
            }
        }
    }
    let point_hi = rat_big(point_hi, den2);
    let mut upper = if point_hi > orbit_upper {
        point_hi
    } else {
        orbit_upper
    };
    if upper < lower {
        upper = lower.clone();
    }
    Ok(Interval::new(lower, upper))
}

/// Sound upper bound on `sup { ‖u_n x‖ : n > beyond }`, from the digit rule.
///
/// The workhorse estimate: the fractional part of `u_n x` is
/// `Σ_{t>=1} c_{n+t} / (q_{n+1}···q_{n+t}) <= 2·sup_{m>n} c_m/q_m`, since
/// every extra factor is at least 2.
fn sup_norm_tail_bound(rep: &CanonicalRep, beyond: u64) -> Result<Rat> {
    let seq = rep.seq();
    let half = rat(1, 2);
    let clamp = |r: Rat| if r > half { half.clone() } else { r };
    Ok(match rep.rule() {
        DigitRule::FiniteList(_) | DigitRule::Periodic { .. } => {
            match rep.finite_support_end()? {
                // Scan already covered the support; nothing beyond.
                Some(end) if beyond >= end => Rat::zero(),
                _ => {
                    let max_digit = match rep.rule() {
                        DigitRule::FiniteList(ds) => ds.iter().max().cloned(),
                        DigitRule::Periodic { preamble, cycle } => {
                            preamble.iter().chain(cycle.iter()).max().cloned()
                        }
                        _ => unreachable!(),
                    }
                    .unwrap_or_default();
                    let tmr = crate::circle::tail_min_ratio(seq, beyond)?;
                    clamp(rat(2, 1) * rat_big(max_digit, tmr))
                }
            }
        }
        DigitRule::Constant(c) => {
            let tmr = crate::circle::tail_min_ratio(seq, beyond)?;
            clamp(rat(2, 1) * rat_big(BigUint::from(*c), tmr))
        }
        DigitRule::FloorFraction(r) => {
            // frac(u_n x) ∈ [r - 1/t, r + 2r/t] with t the tail-min ratio.
            let t = Rat::from_integer(BigInt::from(crate::circle::tail_min_ratio(seq, beyond)?));
            let lo = r - t.recip();
            let lo = if lo.is_negative() { Rat::zero() } else { lo };
            let hi = r + rat(2, 1) * r / &t;
            norm_interval(&lo, &(&hi - &lo)).hi().clone()
        }
        DigitRule::SupportIndicator { value, .. } => match value {
            SupportValue::Constant(c) => {
                let tmr = crate::circle::tail_min_ratio(seq, beyond)?;
                clamp(rat(2, 1) * rat_big(BigUint::from(*c), tmr))
            }
            SupportValue::MaxDigit => half,
        },
        DigitRule::AlternatingXs(desc) => xs_tail_norm_bound(desc, seq, beyond)?,
    })
}

/// Tail bound for alternating-series points: every block norm beyond the
/// horizon is at most `1/q_u - (3/4)/(q_u·Q_u^d)` for gap bound `d`, and at
/// most `1/q_u` without one; between blocks the norms are smaller still.
fn xs_tail_norm_bound(desc: &XsDescriptor, seq: &ArithSeq, beyond: u64) -> Result<Rat> {
    if let Some(end) = desc.finite_block_end() {
        if beyond >= end {
            return Ok(Rat::zero());
        }
    }
    let (limsup, sup) = match seq.behavior() {
        RatioBehavior::Bounded { limsup, sup, .. } => (*limsup, *sup),
        _ => return Ok(rat(1, 2)),
    };
    let q_u = rat(limsup as i64, 1);
    let base = q_u.recip();
    match desc.max_gap() {
        Some(d) if desc.finite_len().is_none() && d <= 64 => {
            let qpow = Rat::from_integer(BigInt::from(sup).pow(d as u32));
            Ok(&base - rat(3, 4) / (&q_u * qpow))
        }
        _ => Ok(base),
    }
}

/// Enumerate the grid points `k/u_N` with `ρ_u(k/u_N, 0) < ε` (or `<= ε`
/// when `closed`). Exact and deterministic, sorted by `k`; the work is
/// partitioned across threads and merged in order.
pub fn ball_points(
    seq: &ArithSeq,
    resolution: u64,
    eps: &Rat,
    closed: bool,
    caps: &Caps,
) -> Result<Vec<CirclePoint>> {
    if resolution < 1 {
        return Err(Error::InvalidRule("resolution must be >= 1".into()));
    }
    if eps <= &Rat::zero() {
        return Err(Error::InvalidRule("radius must be positive".into()));
    }
    let u_n = seq.term(resolution)?;
    let grid = match u64::try_from(&u_n) {
        Ok(g) if g <= caps.enum_cap => g,
        _ => {
            return Err(Error::ResourceCap {
                what: "grid enumeration size",
                limit: caps.enum_cap,
            })
        }
    };
    // Terms u_0..u_{N-1} all divide u_N and fit in u64.
    let mut terms: Vec<u64> = Vec::with_capacity(resolution as usize);
    for n in 0..resolution {
        terms.push(u64::try_from(&seq.term(n)?).expect("terms below the grid size fit in u64"));
    }

    let eps_num = eps.numer().magnitude().clone();
    let eps_den = eps.denom().magnitude().clone();
    let survivors = if let (Ok(num), Ok(den)) = (u64::try_from(&eps_num), u64::try_from(&eps_den)) {
        scan_grid_u128(grid, &terms, num, den, closed)
    } else {
        scan_grid_big(grid, &terms, &eps_num, &eps_den, closed)
    };
    survivors
        .into_iter()
        .map(|k| CirclePoint::from_ratio(BigUint::from(k), BigUint::from(grid)))
        .collect()
}

/// Norm comparison on the grid: keep `k` iff
/// `max(‖k/U‖, ‖u_n k mod U / U‖ for n < N)` is below (or at) the radius.
fn grid_point_survives_u128(
    k: u64,
    grid: u64,
    terms: &[u64],
    num: u64,
    den: u64,
    closed: bool,
) -> bool {
    let below = |r: u64| -> bool {
        let m = r.min(grid - r) as u128;
        let lhs = m * den as u128;
        let rhs = num as u128 * grid as u128;
        if closed {
            lhs <= rhs
        } else {
            lhs < rhs
        }
    };
    if !below(k) {
        return false;
    }
    for &u in terms {
        let r = ((u as u128 * k as u128) % grid as u128) as u64;
        if !below(r) {
            return false;
        }
    }
    true
}

fn scan_grid_u128(grid: u64, terms: &[u64], num: u64, den: u64, closed: bool) -> Vec<u64> {
    run_chunked(grid, |k| {
        grid_point_survives_u128(k, grid, terms, num, den, closed)
    })
}

fn scan_grid_big(grid: u64, terms: &[u64], num: &BigUint, den: &BigUint, closed: bool) -> Vec<u64> {
    let rhs = num * BigUint::from(grid);
    let survives = move |k: u64| -> bool {
        let below = |r: u64| -> bool {
            let m = BigUint::from(r.min(grid - r)) * den;
            if closed {
                m <= rhs
            } else {
                m < rhs
            }
        };
        below(k)
            && terms
                .iter()
                .all(|&u| below(((u as u128 * k as u128) % grid as u128) as u64))
    };
    run_chunked(grid, survives)
}

#[cfg(not(target_arch = "wasm32"))]
fn run_chunked<F: Fn(u64) -> bool + Sync>(grid: u64, survives: F) -> Vec<u64> {
    let workers = std::thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(1)
        .min(8) as u64;
    if grid < 1 << 14 || workers < 2 {
        return (0..grid).filter(|&k| survives(k)).collect();
    }
    let chunk = grid.div_ceil(workers);
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for w in 0..workers {
            let lo = w * chunk;
            let hi = ((w + 1) * chunk).min(grid);
            let survives = &survives;
            handles
                .push(scope.spawn(move || (lo..hi).filter(|&k| survives(k)).collect::<Vec<_>>()));
        }
        let mut out = Vec::new();
        for h in handles {
            out.extend(h.join().expect("grid scan worker panicked"));
        }
        out
    })
}

#[cfg(target_arch = "wasm32")]
fn run_chunked<F: Fn(u64) -> bool>(grid: u64, survives: F) -> Vec<u64> {
    (0..grid).filter(|&k| survives(k)).collect()
}

/// Grid approximation of the test-topology neighborhood `W_n`: the points
/// within closed `ρ_u`-distance `1/n`. The closed radius is a surrogate for
/// the topological closure, which is not grid-computable; it suffices for
/// the discrete/non-discrete dichotomy.
pub fn test_topology_ball(
    seq: &ArithSeq,
    resolution: u64,
    n: u64,
    caps: &Caps,
) -> Result<Vec<CirclePoint>> {
    if n < 1 {
        return Err(Error::InvalidRule("neighborhood index must be >= 1".into()));
    }
    ball_points(seq, resolution, &rat(1, n as i64), true, caps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aseq::ArithSeq;
    use crate::rat::rat;

    fn arc(spec: &str) -> Arc<ArithSeq> {
        Arc::new(ArithSeq::from_spec(spec).unwrap())
    }

    fn pt(a: i64, b: i64) -> CirclePoint {
        CirclePoint::new(rat(a, b))
    }

    #[test]
    fn descriptor_indices() {
        let d = XsDescriptor::constant_gap(2, 2);
        assert_eq!(d.nth_index(1).unwrap(), Some(2));
        assert_eq!(d.nth_index(4).unwrap(), Some(8));

        let dbl = XsDescriptor::doubling(2, 2);
        let idx: Vec<u64> = (1..=5)
            .map(|i| dbl.nth_index(i).unwrap().unwrap())
            .collect();
        assert_eq!(idx, vec![2, 4, 8, 16, 32]);

        let fin = XsDescriptor::parse("list:2,4").unwrap();
        assert_eq!(fin.finite_len(), Some(2));
        assert_eq!(fin.nth_index(3).unwrap(), None);
    }

    #[test]
    fn descriptor_blocks() {
        let d = XsDescriptor::constant_gap(2, 2);
        // Blocks (2,4], (6,8], ...
        for (j, expect) in [(2, false), (3, true), (4, true), (5, false), (7, true)] {
            assert_eq!(d.in_block(j).unwrap(), expect, "j = {j}");
        }
    }

    #[test]
    fn descriptor_validation() {
        let g = arc("geometric:2");
        assert!(XsDescriptor::constant_gap(2, 2)
            .validate_against(&g)
            .is_ok());
        assert!(XsDescriptor::constant_gap(2, 1)
            .validate_against(&g)
            .is_err());

        // For the periodic [2,3] sequence the attainment set is the even
        // indices; a gap-2 descriptor starting at 2 stays inside, starting
        // at 3 does not.
        let p = arc("ratios:2,3:repeat");
        assert!(XsDescriptor::constant_gap(2, 2)
            .validate_against(&p)
            .is_ok());
        assert!(XsDescriptor::constant_gap(3, 2)
            .validate_against(&p)
            .is_err());

        // Doubling through the powers of two for the override sequence.
        let o = arc("override:constant:2;at:powers:2;val:3");
        assert!(XsDescriptor::doubling(2, 2).validate_against(&o).is_ok());
        assert!(XsDescriptor::constant_gap(2, 2)
            .validate_against(&o)
            .is_err());

        // Divergent ratios: no x_S construction.
        let f = arc("factorial");
        assert!(XsDescriptor::constant_gap(2, 2)
            .validate_against(&f)
            .is_err());
    }

    #[test]
    fn xs_evaluates_to_one_fifth() {
        let g = arc("geometric:2");
        let desc = XsDescriptor::constant_gap(2, 2);
        let rep = build_xs(&desc, &g).unwrap();
        // Digits 1 exactly on (2,4], (6,8], ...
        for (n, expect) in [(1u64, 0u32), (2, 0), (3, 1), (4, 1), (5, 0), (6, 0), (7, 1)] {
            assert_eq!(rep.digit(n).unwrap(), BigUint::from(expect), "n = {n}");
        }
        let (partial, tail) = rep.eval_prefix(16).unwrap();
        let err = rat(1, 5) - &partial;
        assert!(err > Rat::zero() && err <= tail.width());
        // Prefix sums agree with the alternating partial sums.
        let alt = xs_partial_sum(&desc, &g, 8).unwrap();
        let diff = (&partial - &alt).abs();
        assert!(diff < rat(1, 1 << 14));
    }

    #[test]
    fn xs_over_periodic_ratios() {
        // Blocks carry q_j - 1 ∈ {1, 2} for the [2,3] ratio cycle, and the
        // prefix sums match the alternating partial sums within 1/u_N.
        let p = arc("ratios:2,3:repeat");
        let desc = XsDescriptor::constant_gap(2, 2);
        let rep = build_xs(&desc, &p).unwrap();
        for n in 1..=16u64 {
            let d = rep.digit(n).unwrap();
            if desc.in_block(n).unwrap() {
                let q = p.ratio(n).unwrap();
                assert_eq!(d, q - BigUint::one());
                assert!(d == BigUint::one() || d == BigUint::from(2u32));
            } else {
                assert!(d.is_zero());
            }
        }
        for big_n in [8u64, 12, 16] {
            let (partial, _) = rep.eval_prefix(big_n).unwrap();
            let alt = xs_partial_sum(&desc, &p, big_n / 2).unwrap();
            let diff = (&partial - &alt).abs();
            let bound = rat_big(BigUint::one(), p.term(big_n).unwrap());
            assert!(diff <= bound, "N = {big_n}");
        }
    }

    #[test]
    fn xs_finite_two_term() {
        let g = arc("geometric:2");
        let desc = XsDescriptor::parse("list:2,4").unwrap();
        let rep = build_xs(&desc, &g).unwrap();
        let (partial, _) = rep.eval_prefix(4).unwrap();
        assert_eq!(partial, rat(3, 16)); // 1/4 - 1/16
    }

    #[test]
    fn xs_norm_bounds_example() {
        let g = arc("geometric:2");
        let desc = XsDescriptor::constant_gap(2, 2);
        let iv = xs_norm_bounds(&desc, &g, 1).unwrap();
        assert_eq!(iv.lo(), &rat(3, 8));
        assert_eq!(iv.hi(), &rat(13, 32));
        // The true norm ‖u_1 x_S‖ = ‖2/5‖ = 2/5 lies inside.
        assert!(iv.contains(&rat(2, 5)));
        for k in 2..=8 {
            let iv = xs_norm_bounds(&desc, &g, k).unwrap();
            assert!(iv.contains(&rat(2, 5)), "k = {k}");
        }
    }

    #[test]
    fn rho_rational_examples() {
        let g = arc("geometric:2");
        let caps = Caps::default();
        assert_eq!(
            rho_rational(&pt(1, 8), &g, &caps).unwrap(),
            RhoResult::Exact(rat(1, 2))
        );
        assert_eq!(
            rho_rational(&CirclePoint::zero(), &g, &caps).unwrap(),
            RhoResult::Exact(Rat::zero())
        );
        assert_eq!(
            rho_rational(&pt(1, 5), &g, &caps).unwrap(),
            RhoResult::Exact(rat(2, 5))
        );
    }

    #[test]
    fn rho_rational_affine_orbit_cycles() {
        let f = arc("factorial");
        let caps = Caps::default();
        // 5 divides 5!, so the orbit dies.
        assert!(matches!(
            rho_rational(&pt(1, 5), &f, &caps).unwrap(),
            RhoResult::Exact(_)
        ));
        // 1/101: the orbit mod 101 with affine multipliers is eventually
        // periodic; exact sup.
        let r = rho_rational(&pt(1, 101), &f, &caps).unwrap();
        assert!(matches!(r, RhoResult::Exact(_)));
    }

    #[test]
    fn rho_interval_xs_contains_two_fifths() {
        let g = arc("geometric:2");
        let rep = build_xs(&XsDescriptor::constant_gap(2, 2), &g).unwrap();
        let iv = rho_interval(&rep, 8).unwrap();
        assert!(iv.contains(&rat(2, 5)));
        assert!(iv.width() <= rat(1, 32));
    }

    #[test]
    fn rho_interval_half_point() {
        let g = arc("geometric:2");
        let rep = CanonicalRep::new(g, DigitRule::FiniteList(vec![BigUint::one()])).unwrap();
        let iv = rho_interval(&rep, 4).unwrap();
        assert_eq!(iv.lo(), &rat(1, 2));
        assert_eq!(iv.hi(), &rat(1, 2));
    }

    #[test]
    fn rho_interval_e_minus_two() {
        let f = arc("factorial");
        let rep = CanonicalRep::new(f, DigitRule::Constant(1)).unwrap();
        let iv = rho_interval(&rep, 10).unwrap();
        // ρ is attained at ‖u_1 x‖ = ‖2(e-2)‖ ≈ 0.4366.
        assert!(iv.lo() >= &rat(43, 100));
        assert!(iv.hi() <= &rat(1, 2));
    }

    #[test]
    fn ball_points_examples() {
        let caps = Caps::default();
        let g = ArithSeq::from_spec("geometric:2").unwrap();
        let b = ball_points(&g, 10, &rat(1, 4), false, &caps).unwrap();
        assert_eq!(b, vec![CirclePoint::zero()]);

        let p = ArithSeq::from_spec("ratios:2,3:repeat").unwrap();
        let b = ball_points(&p, 6, &rat(1, 6), false, &caps).unwrap();
        assert_eq!(b, vec![CirclePoint::zero()]);

        let all = ball_points(&g, 4, &rat(1, 1), false, &caps).unwrap();
        assert_eq!(all.len(), 16);
    }

    #[test]
    fn test_topology_ball_examples() {
        let caps = Caps::default();
        let g = ArithSeq::from_spec("geometric:2").unwrap();
        assert_eq!(
            test_topology_ball(&g, 8, 4, &caps).unwrap(),
            vec![CirclePoint::zero()]
        );
        assert_eq!(test_topology_ball(&g, 4, 1, &caps).unwrap().len(), 16);

        let p = ArithSeq::from_spec("ratios:2,3:repeat").unwrap();
        let closed = test_topology_ball(&p, 6, 6, &caps).unwrap();
        let open = ball_points(&p, 6, &rat(1, 6), false, &caps).unwrap();
        // The closed ball adds exactly the sphere points.
        assert!(closed.len() >= open.len());
        for x in &closed {
            let r = rho_rational(x, &p, &caps).unwrap();
            assert!(r.exact().unwrap() <= &rat(1, 6));
        }
    }

    #[test]
    fn metric_axioms_on_rationals() {
        let g = ArithSeq::from_spec("geometric:2").unwrap();
        let caps = Caps::default();
        let mut state = 0xdeadbeefu64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let rho = |x: &CirclePoint| -> Rat {
            rho_rational(x, &g, &caps).unwrap().exact().unwrap().clone()
        };
        for _ in 0..200 {
            let m = next() % 8 + 1;
            let u = g.term(m).unwrap();
            let uu = u64::try_from(&u).unwrap();
            let x = pt((next() % uu) as i64, uu as i64);
            let y = pt((next() % uu) as i64, uu as i64);
            let z = pt((next() % uu) as i64, uu as i64);
            let dxz = rho(&x.sub(&z));
            let dxy = rho(&x.sub(&y));
            let dyz = rho(&y.sub(&z));
            assert!(dxz <= dxy.clone() + dyz.clone(), "triangle inequality");
            assert!(rho(&x.sub(&y)) >= x.sub(&y).norm(), "dominates the norm");
            assert_eq!(rho(&x.sub(&y)), rho(&y.sub(&x)), "symmetry");
        }
    }

    #[test]
    fn block_norm_monotone_between_blocks() {
        // For n_k <= n < n_{k+1} the norm at u_{n-1} is largest at the block
        // start.
        let g = arc("geometric:2");
        let desc = XsDescriptor::constant_gap(2, 3);
        let rep = build_xs(&desc, &g).unwrap();
        for k in 1..=8u64 {
            let n_k = desc.nth_index(k).unwrap().unwrap();
            let n_k1 = desc.nth_index(k + 1).unwrap().unwrap();
            let start = orbit_norm_enclosure(&rep, n_k - 1, n_k1 + 40).unwrap();
            for n in (n_k + 1)..n_k1 {
                let inner = orbit_norm_enclosure(&rep, n - 1, n_k1 + 40).unwrap();
                assert!(
                    inner.hi() <= start.hi(),
                    "norm at n = {n} should not exceed the block start bound"
                );
            }
        }
    }

    #[test]
    fn distinct_descriptors_diverge_in_digits() {
        // Descriptors differing in gap choice give digit streams that differ
        // at some index within the affected blocks.
        let g = arc("geometric:2");
        let d1 = XsDescriptor::parse("list:2,4,6,8:then:const:2").unwrap();
        let d2 = XsDescriptor::parse("list:2,4,7,9:then:const:2").unwrap();
        let r1 = build_xs(&d1, &g).unwrap();
        let r2 = build_xs(&d2, &g).unwrap();
        let differ = (1..=12u64).any(|n| r1.digit(n).unwrap() != r2.digit(n).unwrap());
        assert!(differ);
    }
}
