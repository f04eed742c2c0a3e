//! Arithmetic sequences as lazy, finitely described infinite objects.
//!
//! A sequence is a seed `u_0 >= 1` together with a ratio generator drawn
//! from a closed catalog of rules, so `u_n = u_0 · q_1 · ... · q_n` with
//! every `q_n >= 2`. Keeping the generators symbolic (rather than arbitrary
//! closures) is what makes the asymptotic questions — boundedness of the
//! ratios, divergence of p-adic valuation sums, the set of indices attaining
//! the limsup ratio — decidable. Prefix scans validate the symbolic answers
//! but never produce them.

use crate::indices::{IndexFamily, SetExpr};
use crate::rat::valuation;
use crate::{Error, Result, Tri};
use num_bigint::BigUint;
use std::sync::RwLock;

/// Ratio generator catalog. For `n >= 1`, `q_n` is:
///
/// * `Constant(q)` — `q`;
/// * `AffineInN { slope, intercept }` — `slope·n + intercept`;
/// * `PeriodicList(rs)` — `rs[(n-1) mod rs.len()]`;
/// * `DoubleExp { base }` — `base^(2^(n-1))`, so `u_n = base^(2^n)` with
///   seed `base`;
/// * `PrefixThen { prefix, rest }` — the listed ratios first, then `rest`
///   re-indexed from 1;
/// * `SparseOverride { base, at, value }` — `value` on the exception set,
///   `base` elsewhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RatioRule {
    Constant(u64),
    AffineInN {
        slope: u64,
        intercept: u64,
    },
    PeriodicList(Vec<u64>),
    DoubleExp {
        base: u64,
    },
    PrefixThen {
        prefix: Vec<u64>,
        rest: Box<RatioRule>,
    },
    SparseOverride {
        base: Box<RatioRule>,
        at: SetExpr,
        value: u64,
    },
}

impl RatioRule {
    /// The ratio `q_n` for `n >= 1`.
    pub fn ratio(&self, n: u64) -> Result<BigUint> {
        debug_assert!(n >= 1);
        match self {
            RatioRule::Constant(q) => Ok(BigUint::from(*q)),
            RatioRule::AffineInN { slope, intercept } => {
                Ok(BigUint::from(*slope) * n + BigUint::from(*intercept))
            }
            RatioRule::PeriodicList(rs) => {
                Ok(BigUint::from(rs[((n - 1) % rs.len() as u64) as usize]))
            }
            RatioRule::DoubleExp { base } => {
                // q_20 alone is a megabit-sized number; refuse to go further.
                let exp: u32 = if n <= 20 {
                    1u32 << (n - 1)
                } else {
                    return Err(Error::ResourceCap {
                        what: "double-exponential ratio index",
                        limit: 20,
                    });
                };
                Ok(BigUint::from(*base).pow(exp))
            }
            RatioRule::PrefixThen { prefix, rest } => {
                let len = prefix.len() as u64;
                if n <= len {
                    Ok(BigUint::from(prefix[(n - 1) as usize]))
                } else {
                    rest.ratio(n - len)
                }
            }
            RatioRule::SparseOverride { base, at, value } => {
                if at.contains(n) {
                    Ok(BigUint::from(*value))
                } else {
                    base.ratio(n)
                }
            }
        }
    }

    /// Exact lower bound on `inf { q_n : n >= 1 }`.
    pub fn min_ratio(&self) -> u64 {
        match self {
            RatioRule::Constant(q) => *q,
            RatioRule::AffineInN { slope, intercept } => slope + intercept,
            RatioRule::PeriodicList(rs) => *rs.iter().min().unwrap(),
            RatioRule::DoubleExp { base } => *base,
            RatioRule::PrefixThen { prefix, rest } => rest
                .min_ratio()
                .min(prefix.iter().copied().min().unwrap_or(u64::MAX)),
            RatioRule::SparseOverride { base, value, .. } => base.min_ratio().min(*value),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            RatioRule::Constant(q) if *q < 2 => {
                Err(Error::InvalidRule("constant ratio must be >= 2".into()))
            }
            RatioRule::AffineInN { slope, intercept } if slope + intercept < 2 => Err(
                Error::InvalidRule("affine rule needs q_1 = slope + intercept >= 2".into()),
            ),
            RatioRule::PeriodicList(rs) if rs.is_empty() || rs.iter().any(|&r| r < 2) => Err(
                Error::InvalidRule("periodic ratio list must be nonempty with entries >= 2".into()),
            ),
            RatioRule::DoubleExp { base } if *base < 2 => Err(Error::InvalidRule(
                "double-exponential base must be >= 2".into(),
            )),
            RatioRule::PrefixThen { prefix, rest } => {
                if prefix.iter().any(|&r| r < 2) {
                    return Err(Error::InvalidRule("prefix ratios must be >= 2".into()));
                }
                rest.validate()
            }
            RatioRule::SparseOverride { base, at, value } => {
                if *value < 2 {
                    return Err(Error::InvalidRule("override value must be >= 2".into()));
                }
                at.validate()?;
                if matches!(
                    **base,
                    RatioRule::PrefixThen { .. } | RatioRule::SparseOverride { .. }
                ) {
                    return Err(Error::InvalidRule(
                        "override base must be a simple rule (constant, affine, periodic, double-exponential)"
                            .into(),
                    ));
                }
                base.validate()
            }
            _ => Ok(()),
        }
    }
}

/// Declared asymptotic behavior of the ratio sequence.
///
/// `Bounded` carries `sup q_n`, `limsup q_n`, and a symbolic description of
/// the (necessarily infinite) index set attaining the limsup. The remaining
/// variants cover divergence to infinity, an unbounded limsup coexisting
/// with infinitely many bounded ratios, and deliberately undeclared
/// asymptotics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RatioBehavior {
    Bounded {
        sup: u64,
        limsup: u64,
        attains_limsup: IndexFamily,
    },
    DivergesToInfinity,
    UnboundedMixed,
    DeclaredUnknown,
}

/// Summary returned by [`ArithSeq::classify_ratios`]. Fields not pinned down
/// by the metadata are `Unknown`, never guessed from a finite prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatioSummary {
    pub bounded: Tri,
    pub divergent: Tri,
    pub sup: Option<u64>,
    pub limsup: Option<u64>,
}

/// p-adic order `n_p(u) = liminf_n v_p(u_n)`, which for an a-sequence equals
/// `v_p(u_0) + Σ_i v_p(q_i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum POrder {
    /// The sum stabilizes: `v_p(u_n) = value` for all `n >= stable_from`.
    Finite { value: u64, stable_from: u64 },
    /// The sum diverges; `divisible_at` is an infinite index family on which
    /// `p | q_n`, replayable by sampling.
    Infinite { divisible_at: IndexFamily },
    /// Only a prefix scan was possible.
    LowerBound { at_least: u64, scanned_to: u64 },
}

impl POrder {
    pub fn is_exact(&self) -> bool {
        !matches!(self, POrder::LowerBound { .. })
    }
}

/// An arithmetic sequence: seed, symbolic ratio rule, derived (or declared)
/// asymptotic metadata, and a memoized term cache.
///
/// Values are immutable after construction; the cache is a pure memo, safe
/// for concurrent readers.
#[derive(Debug)]
pub struct ArithSeq {
    seed: BigUint,
    rule: RatioRule,
    behavior: RatioBehavior,
    term_cap: u64,
    cache: RwLock<Vec<BigUint>>,
}

impl ArithSeq {
    /// Build a sequence, deriving its asymptotic metadata from the rule.
    pub fn new(seed: u64, rule: RatioRule) -> Result<ArithSeq> {
        if seed == 0 {
            return Err(Error::InvalidRule("seed u_0 must be positive".into()));
        }
        rule.validate()?;
        let behavior = analyze(&rule)?;
        Ok(ArithSeq {
            seed: BigUint::from(seed),
            rule,
            behavior,
            term_cap: crate::Caps::default().term_cap,
            cache: RwLock::new(Vec::new()),
        })
    }

    /// Build with explicitly declared behavior instead of the derived one.
    /// The declaration is validated lazily against every generated ratio.
    pub fn with_declared_behavior(
        seed: u64,
        rule: RatioRule,
        behavior: RatioBehavior,
    ) -> Result<ArithSeq> {
        if seed == 0 {
            return Err(Error::InvalidRule("seed u_0 must be positive".into()));
        }
        rule.validate()?;
        Ok(ArithSeq {
            seed: BigUint::from(seed),
            rule,
            behavior,
            term_cap: crate::Caps::default().term_cap,
            cache: RwLock::new(Vec::new()),
        })
    }

    pub fn with_term_cap(mut self, cap: u64) -> Self {
        self.term_cap = cap.max(1);
        self
    }

    pub fn seed(&self) -> &BigUint {
        &self.seed
    }

    pub fn rule(&self) -> &RatioRule {
        &self.rule
    }

    pub fn behavior(&self) -> &RatioBehavior {
        &self.behavior
    }

    /// `u_n`, memoized. Errors only on the configured cap.
    pub fn term(&self, n: u64) -> Result<BigUint> {
        if n > self.term_cap {
            return Err(Error::ResourceCap {
                what: "sequence term index",
                limit: self.term_cap,
            });
        }
        {
            let cache = self.cache.read().unwrap();
            if let Some(t) = cache.get(n as usize) {
                return Ok(t.clone());
            }
        }
        let mut cache = self.cache.write().unwrap();
        if cache.is_empty() {
            cache.push(self.seed.clone());
        }
        while (cache.len() as u64) <= n {
            let i = cache.len() as u64;
            let q = self.checked_ratio(i)?;
            let next = cache.last().unwrap() * &q;
            cache.push(next);
        }
        Ok(cache[n as usize].clone())
    }

    /// `q_n` with `q_0 = u_0`.
    pub fn ratio(&self, n: u64) -> Result<BigUint> {
        if n == 0 {
            return Ok(self.seed.clone());
        }
        self.checked_ratio(n)
    }

    /// Exclusive upper bound for the digit at position `n` in a canonical
    /// expansion. Position 1 absorbs the seed (`c_1 < u_1`), so every point
    /// of `[0,1)` has an expansion even when `u_0 > 1`; elsewhere the bound
    /// is the ratio `q_n`. With seed 1 this is `q_n` everywhere.
    pub fn digit_bound(&self, n: u64) -> Result<BigUint> {
        if n == 1 {
            self.term(1)
        } else {
            self.ratio(n)
        }
    }

    /// Generate `q_n` and check it against declared metadata; a contradiction
    /// is a hard error.
    fn checked_ratio(&self, n: u64) -> Result<BigUint> {
        let q = self.rule.ratio(n)?;
        if q < BigUint::from(2u32) {
            return Err(Error::InvalidRule(format!(
                "generated ratio q_{n} = {q} < 2"
            )));
        }
        if let RatioBehavior::Bounded { sup, .. } = &self.behavior {
            if q > BigUint::from(*sup) {
                return Err(Error::InconsistentMetadata(format!(
                    "q_{n} = {q} exceeds declared sup {sup}"
                )));
            }
        }
        Ok(q)
    }

    /// The `k`-th index (0-based, strictly increasing) with `q_m = limsup q_n`.
    /// Every returned index is re-validated against the generator.
    pub fn s_star(&self, k: u64) -> Result<u64> {
        let (limsup, fam) = match &self.behavior {
            RatioBehavior::Bounded {
                limsup,
                attains_limsup,
                ..
            } => (*limsup, attains_limsup),
            _ => {
                return Err(Error::UnknownAsymptotics(
                    "limsup attainment set requires bounded ratio metadata",
                ))
            }
        };
        let m = fam.kth(k).ok_or(Error::ResourceCap {
            what: "limsup index enumeration",
            limit: k,
        })?;
        let q = self.checked_ratio(m)?;
        if q != BigUint::from(limsup) {
            return Err(Error::InconsistentMetadata(format!(
                "descriptor says q_{m} = {limsup}, generator gives {q}"
            )));
        }
        Ok(m)
    }

    /// Validated metadata summary. When metadata does not pin a field down it
    /// is reported `Unknown`.
    pub fn classify_ratios(&self) -> Result<RatioSummary> {
        // Spot-check a short generated prefix against the metadata.
        for n in 1..=16u64 {
            self.checked_ratio(n)?;
        }
        Ok(match &self.behavior {
            RatioBehavior::Bounded { sup, limsup, .. } => RatioSummary {
                bounded: Tri::Yes,
                divergent: Tri::No,
                sup: Some(*sup),
                limsup: Some(*limsup),
            },
            RatioBehavior::DivergesToInfinity => RatioSummary {
                bounded: Tri::No,
                divergent: Tri::Yes,
                sup: None,
                limsup: None,
            },
            RatioBehavior::UnboundedMixed => RatioSummary {
                bounded: Tri::No,
                divergent: Tri::No,
                sup: None,
                limsup: None,
            },
            RatioBehavior::DeclaredUnknown => RatioSummary {
                bounded: Tri::Unknown,
                divergent: Tri::Unknown,
                sup: None,
                limsup: None,
            },
        })
    }

    /// `n_p(u) = liminf v_p(u_n) = v_p(u_0) + Σ v_p(q_i)`, decided
    /// symbolically from the rule catalog.
    pub fn p_order(&self, p: u64) -> POrder {
        let v0 = valuation(&self.seed, p);
        match ratio_valuation_sum(&self.rule, p) {
            ValSum::Finite { total, stable_from } => POrder::Finite {
                value: v0 + total,
                stable_from,
            },
            ValSum::Infinite { divisible_at } => POrder::Infinite { divisible_at },
            ValSum::Undecided { scan_to } => {
                let mut total = v0;
                let horizon = scan_to.min(self.term_cap);
                for i in 1..=horizon {
                    if let Ok(q) = self.rule.ratio(i) {
                        total += valuation(&q, p);
                    } else {
                        break;
                    }
                }
                POrder::LowerBound {
                    at_least: total,
                    scanned_to: horizon,
                }
            }
        }
    }

    /// An infinite index family along which the ratios diverge monotonically,
    /// when the rule certifies one (used by the dense-approximation
    /// algorithm).
    pub fn divergent_ratio_stream(&self) -> Option<IndexFamily> {
        divergent_stream(&self.rule, 0)
    }

    /// The ratio limsup when the metadata declares the ratios bounded.
    pub fn bounded_limsup(&self) -> Option<u64> {
        match &self.behavior {
            RatioBehavior::Bounded { limsup, .. } => Some(*limsup),
            _ => None,
        }
    }

    /// The ratio sup when the metadata declares the ratios bounded.
    pub fn bounded_sup(&self) -> Option<u64> {
        match &self.behavior {
            RatioBehavior::Bounded { sup, .. } => Some(*sup),
            _ => None,
        }
    }

    pub fn term_cap(&self) -> u64 {
        self.term_cap
    }

    /// Parse the sequence spec grammar:
    ///
    /// ```text
    /// factorial | geometric:<b> | doubleexp:<b> | ratios:<r1,...>:repeat
    ///   | ratios:<r1,...>:then:<rule> | affine:<a>,<b>
    ///   | override:<base>;at:<set-expr>;val:<q>
    /// ```
    ///
    /// with `<set-expr>` one of `powers:<b>`, `multiples:<m>`, or an explicit
    /// comma list, and `<rule>`/`<base>` one of `constant:<q>`,
    /// `geometric:<q>`, `affine:<a>,<b>`, `factorial`, `doubleexp:<b>`, or
    /// `ratios:<r1,...>:repeat`.
    ///
    /// `factorial` is `u_n = (n+1)!` (seed 1, `q_n = n+1`): the literal `n!`
    /// is not strictly increasing at `n = 0, 1`.
    pub fn from_spec(spec: &str) -> Result<ArithSeq> {
        let spec = spec.trim();
        if let Some(rest) = spec.strip_prefix("doubleexp:") {
            let b = parse_u64(rest)?;
            return ArithSeq::new(b, RatioRule::DoubleExp { base: b });
        }
        if let Some(rest) = spec.strip_prefix("override:") {
            return parse_override(rest);
        }
        ArithSeq::new(1, parse_rule(spec)?)
    }
}

fn parse_u64(s: &str) -> Result<u64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad integer `{s}`")))
}

fn parse_u64_list(s: &str) -> Result<Vec<u64>> {
    s.split(',').map(parse_u64).collect()
}

/// Parse a bare ratio rule (used standalone and nested in `then:`/`override:`).
fn parse_rule(spec: &str) -> Result<RatioRule> {
    if spec == "factorial" {
        return Ok(RatioRule::AffineInN {
            slope: 1,
            intercept: 1,
        });
    }
    if let Some(rest) = spec
        .strip_prefix("geometric:")
        .or(spec.strip_prefix("constant:"))
    {
        return Ok(RatioRule::Constant(parse_u64(rest)?));
    }
    if let Some(rest) = spec.strip_prefix("doubleexp:") {
        return Ok(RatioRule::DoubleExp {
            base: parse_u64(rest)?,
        });
    }
    if let Some(rest) = spec.strip_prefix("affine:") {
        let (a, b) = rest
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("affine rule needs `a,b`, got `{rest}`")))?;
        return Ok(RatioRule::AffineInN {
            slope: parse_u64(a)?,
            intercept: parse_u64(b)?,
        });
    }
    if let Some(rest) = spec.strip_prefix("ratios:") {
        if let Some(list) = rest.strip_suffix(":repeat") {
            return Ok(RatioRule::PeriodicList(parse_u64_list(list)?));
        }
        if let Some((list, rule)) = rest.split_once(":then:") {
            return Ok(RatioRule::PrefixThen {
                prefix: parse_u64_list(list)?,
                rest: Box::new(parse_rule(rule)?),
            });
        }
        return Err(Error::Parse(
            "ratios:<list> needs `:repeat` or `:then:<rule>`".into(),
        ));
    }
    Err(Error::Parse(format!("unrecognized sequence spec `{spec}`")))
}

fn parse_set_expr(s: &str) -> Result<SetExpr> {
    let expr = if let Some(rest) = s.strip_prefix("powers:") {
        SetExpr::Powers {
            base: parse_u64(rest)?,
        }
    } else if let Some(rest) = s.strip_prefix("multiples:") {
        SetExpr::Multiples {
            step: parse_u64(rest)?,
        }
    } else {
        SetExpr::Explicit(parse_u64_list(s)?)
    };
    expr.validate()?;
    Ok(expr)
}

fn parse_override(rest: &str) -> Result<ArithSeq> {
    let mut parts = rest.split(';');
    let base = parts
        .next()
        .ok_or_else(|| Error::Parse("override needs a base rule".into()))?;
    let at = parts
        .next()
        .and_then(|s| s.strip_prefix("at:"))
        .ok_or_else(|| Error::Parse("override needs `;at:<set-expr>`".into()))?;
    let val = parts
        .next()
        .and_then(|s| s.strip_prefix("val:"))
        .ok_or_else(|| Error::Parse("override needs `;val:<q>`".into()))?;
    if parts.next().is_some() {
        return Err(Error::Parse("trailing junk in override spec".into()));
    }
    ArithSeq::new(
        1,
        RatioRule::SparseOverride {
            base: Box::new(parse_rule(base)?),
            at: parse_set_expr(at)?,
            value: parse_u64(val)?,
        },
    )
}

/// Derive ratio behavior symbolically from the rule.
fn analyze(rule: &RatioRule) -> Result<RatioBehavior> {
    Ok(match rule {
        RatioRule::Constant(q) => RatioBehavior::Bounded {
            sup: *q,
            limsup: *q,
            attains_limsup: IndexFamily::AllFrom(1),
        },
        RatioRule::AffineInN { slope, intercept } => {
            if *slope == 0 {
                RatioBehavior::Bounded {
                    sup: *intercept,
                    limsup: *intercept,
                    attains_limsup: IndexFamily::AllFrom(1),
                }
            } else {
                RatioBehavior::DivergesToInfinity
            }
        }
        RatioRule::PeriodicList(rs) => {
            let m = *rs.iter().max().unwrap();
            let len = rs.len() as u64;
            let residues: Vec<u64> = rs
                .iter()
                .enumerate()
                .filter(|(_, &r)| r == m)
                .map(|(j, _)| (j as u64 + 1) % len)
                .collect();
            RatioBehavior::Bounded {
                sup: m,
                limsup: m,
                attains_limsup: IndexFamily::Residues {
                    modulus: len,
                    residues,
                    from: 1,
                },
            }
        }
        RatioRule::DoubleExp { .. } => RatioBehavior::DivergesToInfinity,
        RatioRule::PrefixThen { prefix, rest } => match analyze(rest)? {
            RatioBehavior::Bounded {
                sup,
                limsup,
                attains_limsup,
            } => {
                let len = prefix.len() as u64;
                let shifted = IndexFamily::Shift {
                    offset: len,
                    inner: Box::new(attains_limsup),
                };
                let extras: Vec<u64> = prefix
                    .iter()
                    .enumerate()
                    .filter(|(_, &r)| r == limsup)
                    .map(|(j, _)| j as u64 + 1)
                    .collect();
                let attains = if extras.is_empty() {
                    shifted
                } else {
                    IndexFamily::Union(vec![IndexFamily::Explicit(extras), shifted])
                };
                RatioBehavior::Bounded {
                    sup: sup.max(prefix.iter().copied().max().unwrap_or(0)),
                    limsup,
                    attains_limsup: attains,
                }
            }
            other => other,
        },
        RatioRule::SparseOverride { base, at, value } => analyze_override(base, at, *value)?,
    })
}

fn analyze_override(base: &RatioRule, at: &SetExpr, value: u64) -> Result<RatioBehavior> {
    let at_fam = at.to_family();
    match analyze(base)? {
        RatioBehavior::Bounded {
            sup: bsup,
            limsup: blimsup,
            attains_limsup: bstar,
        } => {
            let base_star_left = IndexFamily::Diff {
                base: Box::new(bstar.clone()),
                minus: Box::new(at_fam.clone()),
            };
            if at.is_infinite() {
                if value > blimsup {
                    return Ok(RatioBehavior::Bounded {
                        sup: bsup.max(value),
                        limsup: value,
                        attains_limsup: at_fam,
                    });
                }
                if value == blimsup {
                    return Ok(RatioBehavior::Bounded {
                        sup: bsup,
                        limsup: blimsup,
                        attains_limsup: IndexFamily::Union(vec![at_fam, base_star_left]),
                    });
                }
            }
            // value below the base limsup, or finite exception set: the
            // limsup drops iff the overrides swallow the attainment set.
            match base_star_left.is_infinite() {
                Tri::Yes => Ok(RatioBehavior::Bounded {
                    sup: bsup.max(value),
                    limsup: blimsup,
                    attains_limsup: base_star_left,
                }),
                Tri::No => demoted_override_behavior(base, &at_fam, value),
                Tri::Unknown => Err(Error::InvalidRule(
                    "cannot settle the limsup of this override combination".into(),
                )),
            }
        }
        RatioBehavior::DivergesToInfinity => {
            if at.is_infinite() {
                Ok(RatioBehavior::UnboundedMixed)
            } else {
                Ok(RatioBehavior::DivergesToInfinity)
            }
        }
        RatioBehavior::UnboundedMixed => Ok(RatioBehavior::UnboundedMixed),
        RatioBehavior::DeclaredUnknown => Ok(RatioBehavior::DeclaredUnknown),
    }
}

/// Behavior of an override whose exception set swallows every index
/// attaining the base limsup (only reachable with periodic-type bases and
/// residue-class exceptions).
fn demoted_override_behavior(
    base: &RatioRule,
    at: &IndexFamily,
    value: u64,
) -> Result<RatioBehavior> {
    let (rs, len) = match base {
        RatioRule::PeriodicList(rs) => (rs.clone(), rs.len() as u64),
        RatioRule::Constant(q) => (vec![*q], 1),
        _ => {
            return Err(Error::InvalidRule(
                "cannot settle the limsup of this override combination".into(),
            ))
        }
    };
    let (m, ats) = match at {
        IndexFamily::Residues {
            modulus, residues, ..
        } => (*modulus, residues.clone()),
        _ => {
            return Err(Error::InvalidRule(
                "cannot settle the limsup of this override combination".into(),
            ))
        }
    };
    // Effective ratio values over one joint period.
    let l = num_integer::lcm(len, m);
    let mut limsup = value;
    for n in 1..=l {
        if !ats.contains(&(n % m)) {
            limsup = limsup.max(rs[((n - 1) % len) as usize]);
        }
    }
    let residues: Vec<u64> = (0..l)
        .filter(|&r| {
            let n = if r == 0 { l } else { r };
            let q = if ats.contains(&(n % m)) {
                value
            } else {
                rs[((n - 1) % len) as usize]
            };
            q == limsup
        })
        .collect();
    let sup = rs.iter().copied().max().unwrap().max(value);
    Ok(RatioBehavior::Bounded {
        sup,
        limsup,
        attains_limsup: IndexFamily::Residues {
            modulus: l,
            residues,
            from: 1,
        },
    })
}

/// Tail of the ratio-valuation sum `Σ_i v_p(q_i)` decided from the rule.
enum ValSum {
    Finite { total: u64, stable_from: u64 },
    Infinite { divisible_at: IndexFamily },
    Undecided { scan_to: u64 },
}

/// Indices where `p | q_n`, for bases simple enough to describe exactly.
fn divisible_family(rule: &RatioRule, p: u64) -> Option<IndexFamily> {
    match rule {
        RatioRule::Constant(q) => Some(if q % p == 0 {
            IndexFamily::AllFrom(1)
        } else {
            IndexFamily::empty()
        }),
        RatioRule::AffineInN { slope, intercept } => {
            if slope % p != 0 {
                // slope·n + intercept ≡ 0 (mod p) has a unique root mod p.
                let r = solve_linear_mod(*slope, *intercept, p);
                Some(IndexFamily::Residues {
                    modulus: p,
                    residues: vec![r],
                    from: 1,
                })
            } else if intercept % p == 0 {
                Some(IndexFamily::AllFrom(1))
            } else {
                Some(IndexFamily::empty())
            }
        }
        RatioRule::PeriodicList(rs) => {
            let len = rs.len() as u64;
            let residues: Vec<u64> = rs
                .iter()
                .enumerate()
                .filter(|(_, &r)| r % p == 0)
                .map(|(j, _)| (j as u64 + 1) % len)
                .collect();
            Some(IndexFamily::Residues {
                modulus: len,
                residues,
                from: 1,
            })
        }
        RatioRule::DoubleExp { base } => Some(if base % p == 0 {
            IndexFamily::AllFrom(1)
        } else {
            IndexFamily::empty()
        }),
        _ => None,
    }
}

/// Smallest nonnegative `n` with `slope·n + intercept ≡ 0 (mod p)`, given
/// `p` prime and `p` not dividing `slope`.
fn solve_linear_mod(slope: u64, intercept: u64, p: u64) -> u64 {
    let s = slope % p;
    let i = intercept % p;
    // Brute inverse; p is a small prime here.
    for n in 0..p {
        if (s as u128 * n as u128 + i as u128).is_multiple_of(p as u128) {
            return n;
        }
    }
    unreachable!("no root of linear congruence with invertible slope");
}

fn ratio_valuation_sum(rule: &RatioRule, p: u64) -> ValSum {
    match rule {
        RatioRule::Constant(_)
        | RatioRule::AffineInN { .. }
        | RatioRule::PeriodicList(_)
        | RatioRule::DoubleExp { .. } => {
            let fam = divisible_family(rule, p).unwrap();
            match fam.is_infinite() {
                Tri::Yes => ValSum::Infinite { divisible_at: fam },
                _ => ValSum::Finite {
                    total: 0,
                    stable_from: 0,
                },
            }
        }
        RatioRule::PrefixThen { prefix, rest } => {
            let len = prefix.len() as u64;
            match ratio_valuation_sum(rest, p) {
                ValSum::Infinite { divisible_at } => ValSum::Infinite {
                    divisible_at: IndexFamily::Shift {
                        offset: len,
                        inner: Box::new(divisible_at),
                    },
                },
                ValSum::Finite { total, stable_from } => {
                    let prefix_total: u64 = prefix
                        .iter()
                        .map(|&r| valuation(&BigUint::from(r), p))
                        .sum();
                    ValSum::Finite {
                        total: total + prefix_total,
                        stable_from: stable_from + len,
                    }
                }
                ValSum::Undecided { scan_to } => ValSum::Undecided {
                    scan_to: scan_to + len,
                },
            }
        }
        RatioRule::SparseOverride { base, at, value } => {
            let at_fam = at.to_family();
            // Contribution from the overridden indices.
            if value % p == 0 && at.is_infinite() {
                return ValSum::Infinite {
                    divisible_at: at_fam,
                };
            }
            // Contribution from the base off the exception set.
            let base_div = match divisible_family(base, p) {
                Some(f) => f,
                None => return ValSum::Undecided { scan_to: 256 },
            };
            let base_left = IndexFamily::Diff {
                base: Box::new(base_div),
                minus: Box::new(at_fam.clone()),
            };
            match base_left.is_infinite() {
                Tri::Yes => ValSum::Infinite {
                    divisible_at: base_left,
                },
                Tri::No => {
                    // Finitely many divisible ratios; add them up exactly.
                    let mut total = 0u64;
                    let mut stable_from = 0u64;
                    for n in base_left.iter().take(4096) {
                        if let Ok(q) = rule.ratio(n) {
                            total += valuation(&q, p);
                            stable_from = stable_from.max(n);
                        }
                    }
                    if value % p == 0 {
                        // Exception set must be finite here.
                        for n in at_fam.iter() {
                            if let Ok(q) = rule.ratio(n) {
                                total += valuation(&q, p);
                                stable_from = stable_from.max(n);
                            }
                        }
                    }
                    ValSum::Finite { total, stable_from }
                }
                Tri::Unknown => ValSum::Undecided { scan_to: 256 },
            }
        }
    }
}

/// Index family along which the ratios are certified to diverge
/// monotonically.
fn divergent_stream(rule: &RatioRule, offset: u64) -> Option<IndexFamily> {
    let shift = |fam: IndexFamily| {
        if offset == 0 {
            fam
        } else {
            IndexFamily::Shift {
                offset,
                inner: Box::new(fam),
            }
        }
    };
    match rule {
        RatioRule::AffineInN { slope, .. } if *slope >= 1 => Some(shift(IndexFamily::AllFrom(1))),
        RatioRule::DoubleExp { .. } => Some(shift(IndexFamily::AllFrom(1))),
        RatioRule::PrefixThen { prefix, rest } => {
            divergent_stream(rest, offset + prefix.len() as u64)
        }
        RatioRule::SparseOverride { base, at, .. } => {
            // Off the exception set the base diverges; the base rules above
            // are monotone in n, so the restriction stays monotone.
            let inner = divergent_stream(base, 0)?;
            Some(shift(IndexFamily::Diff {
                base: Box::new(inner),
                minus: Box::new(at.to_family()),
            }))
        }
        _ => None,
    }
}

/// Builtin sequences used by tests and the verification suite.
pub fn builtin_catalog() -> Vec<(&'static str, ArithSeq)> {
    [
        "factorial",
        "geometric:2",
        "doubleexp:2",
        "ratios:2,3:repeat",
        "override:constant:2;at:powers:2;val:3",
        "affine:1,4",
    ]
    .into_iter()
    .map(|spec| (spec, ArithSeq::from_spec(spec).unwrap()))
    .collect()
}
