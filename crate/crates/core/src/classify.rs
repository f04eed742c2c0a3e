//! The classification report for `t_u(T)`.
//!
//! For a-sequences six conditions are equivalent: bounded ratios, the
//! subgroup sits inside Q/Z, it is countable, it is an F_σ subset of the
//! circle, and it is open in the test topology and in the metric topology.
//! Countable is further equivalent to the metric topology being discrete,
//! and the cardinality dichotomy leaves only ℵ0 and the continuum. The
//! torsion subgroup decomposes as a direct sum of p-primary components with
//! exponents `n_p(u) = liminf v_p(u_n)`, holds for arbitrary integer
//! sequences, and is dense for a-sequences — constructively so: the
//! dense-approximation algorithm truncates a canonical representation at an
//! index where the ratios have grown past `2/ε` and certifies the distance.

use crate::aseq::{ArithSeq, POrder, RatioRule};
use crate::circle::{CanonicalRep, CirclePoint, Interval};
use crate::membership::{member_stream, Certificate, Decision};
use crate::metric::rho_interval_shifted;
use crate::rat::{factorize_u64, fmt_rat, is_prime_u64, rat};
use crate::{Caps, Error, Rat, Result, Tri};
use num_bigint::{BigInt, BigUint};
use num_traits::Zero;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Cardinality of a characterized subgroup: countably infinite or the
/// continuum (the Borel dichotomy leaves nothing in between).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Cardinality {
    Aleph0,
    Continuum,
    Unknown,
}

/// The classification facts for `t_u(T)`.
#[derive(Debug, Clone)]
pub struct SubgroupReport {
    pub ratios_bounded: Tri,
    pub countable: Tri,
    pub subgroup_of_q_mod_z: Tri,
    pub f_sigma: Tri,
    pub test_topology_open: Tri,
    pub metric_topology_open: Tri,
    pub cardinality: Cardinality,
    pub metric_topology_discrete: Tri,
    /// Stored fact: a faithfully indexed character sequence forces Haar
    /// measure zero.
    pub measure_zero: bool,
    pub torsion: TorsionStructure,
    /// For a-sequences the torsion subgroup is dense in the metric topology.
    pub torsion_dense: bool,
}

/// Per-prime orders of the torsion subgroup `⊕_p Z(p^{n_p})`.
#[derive(Debug, Clone)]
pub struct TorsionStructure {
    /// Orders for the reported primes; primes with provably zero order are
    /// omitted.
    pub primes: BTreeMap<u64, POrder>,
    /// What happens beyond the reported primes.
    pub other_primes: OtherPrimes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OtherPrimes {
    AllZero,
    AllInfinite,
    Unknown,
}

impl TorsionStructure {
    /// Human-readable rendering `Z(2^∞) ⊕ Z(3^2) ⊕ ...`, `Q/Z`, or
    /// `trivial`.
    pub fn rendering(&self) -> String {
        if self.other_primes == OtherPrimes::AllInfinite
            && self
                .primes
                .values()
                .all(|o| matches!(o, POrder::Infinite { .. }))
        {
            return "Q/Z".to_string();
        }
        let mut parts: Vec<String> = Vec::new();
        for (p, order) in &self.primes {
            match order {
                POrder::Infinite { .. } => parts.push(format!("Z({p}^inf)")),
                POrder::Finite { value, .. } if *value > 0 => parts.push(format!("Z({p}^{value})")),
                POrder::Finite { .. } => {}
                POrder::LowerBound { at_least, .. } => parts.push(format!("Z({p}^>={at_least}?)")),
            }
        }
        if parts.is_empty() {
            if self.other_primes == OtherPrimes::Unknown {
                "trivial as far as scanned".to_string()
            } else {
                "trivial".to_string()
            }
        } else {
            parts.join(" + ")
        }
    }
}

/// An integer sequence acceptable to the torsion computation. Arithmetic
/// sequences get exact symbolic orders; the primes sequence is the stock
/// non-arithmetic example (each prime divides exactly one term, so every
/// order vanishes).
#[derive(Debug, Clone)]
pub enum SeqDescriptor {
    Arith(Arc<ArithSeq>),
    Primes,
}

impl SeqDescriptor {
    pub fn parse(spec: &str) -> Result<SeqDescriptor> {
        if spec.trim() == "primes" {
            return Ok(SeqDescriptor::Primes);
        }
        Ok(SeqDescriptor::Arith(Arc::new(ArithSeq::from_spec(spec)?)))
    }
}

/// Full classification report for an a-sequence.
pub fn report(seq: &Arc<ArithSeq>) -> Result<SubgroupReport> {
    let ratios = seq.classify_ratios()?;
    let bounded = ratios.bounded;
    // The six equivalent conditions all reduce to bounded ratios.
    let six = bounded;
    let cardinality = match bounded {
        Tri::Yes => Cardinality::Aleph0,
        Tri::No => Cardinality::Continuum,
        Tri::Unknown => Cardinality::Unknown,
    };
    Ok(SubgroupReport {
        ratios_bounded: six,
        countable: six,
        subgroup_of_q_mod_z: six,
        f_sigma: six,
        test_topology_open: six,
        metric_topology_open: six,
        cardinality,
        metric_topology_discrete: six,
        measure_zero: true,
        torsion: torsion_structure(&SeqDescriptor::Arith(seq.clone()), 16)?,
        torsion_dense: true,
    })
}

/// Torsion structure `t(t_u(T)) = ⊕_p Z(p^{n_p})` for a general integer
/// sequence descriptor. Reports primes up to the `prime_bound`-th prime plus
/// every prime appearing in the rule's constants; the `other_primes` field
/// settles the rest.
pub fn torsion_structure(desc: &SeqDescriptor, prime_count: usize) -> Result<TorsionStructure> {
    match desc {
        SeqDescriptor::Primes => Ok(TorsionStructure {
            // liminf v_p over the primes sequence is 0 for every p: each
            // prime divides exactly one term.
            primes: BTreeMap::new(),
            other_primes: OtherPrimes::AllZero,
        }),
        SeqDescriptor::Arith(seq) => {
            let mut ps: Vec<u64> = small_primes(prime_count);
            for p in rule_constant_primes(seq.rule(), seq.seed()) {
                if !ps.contains(&p) {
                    ps.push(p);
                }
            }
            ps.sort_unstable();
            let mut primes = BTreeMap::new();
            for p in ps {
                let order = seq.p_order(p);
                let keep = match &order {
                    POrder::Finite { value, .. } => *value > 0,
                    _ => true,
                };
                if keep {
                    primes.insert(p, order);
                }
            }
            Ok(TorsionStructure {
                primes,
                other_primes: other_primes(seq.rule()),
            })
        }
    }
}

fn small_primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut n = 2u64;
    while out.len() < count {
        if is_prime_u64(n) {
            out.push(n);
        }
        n += 1;
    }
    out
}

/// Primes dividing any constant the rule mentions (so nothing hides beyond
/// the small-prime window).
fn rule_constant_primes(rule: &RatioRule, seed: &BigUint) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::new();
    let mut push_factors = |v: u64| {
        for (p, _) in factorize_u64(v) {
            if !out.contains(&p) {
                out.push(p);
            }
        }
    };
    if let Ok(s) = u64::try_from(seed) {
        push_factors(s);
    }
    fn constants(rule: &RatioRule, sink: &mut Vec<u64>) {
        match rule {
            RatioRule::Constant(q) => sink.push(*q),
            RatioRule::AffineInN { .. } => {}
            RatioRule::PeriodicList(rs) => sink.extend(rs.iter().copied()),
            RatioRule::DoubleExp { base } => sink.push(*base),
            RatioRule::PrefixThen { prefix, rest } => {
                sink.extend(prefix.iter().copied());
                constants(rest, sink);
            }
            RatioRule::SparseOverride { base, value, .. } => {
                sink.push(*value);
                constants(base, sink);
            }
        }
    }
    let mut cs = Vec::new();
    constants(rule, &mut cs);
    for c in cs {
        push_factors(c);
    }
    out
}

/// Behavior of `n_p` for primes beyond the reported window: affine ratio
/// components make every large prime divide infinitely many ratios, while
/// constant-based rules never touch primes outside their factorizations.
fn other_primes(rule: &RatioRule) -> OtherPrimes {
    fn has_affine(rule: &RatioRule) -> bool {
        match rule {
            RatioRule::AffineInN { slope, .. } => *slope >= 1,
            RatioRule::PrefixThen { rest, .. } => has_affine(rest),
            RatioRule::SparseOverride { base, .. } => has_affine(base),
            _ => false,
        }
    }
    if has_affine(rule) {
        OtherPrimes::AllInfinite
    } else {
        OtherPrimes::AllZero
    }
}

/// All elements of `t_u(T)` with denominator dividing `u_m`: exactly the
/// grid `{ k/u_m : 0 <= k < u_m }`, sorted. Requires bounded ratios (the
/// countable case); errors with `NotCountable` otherwise.
pub fn enumerate_countable(seq: &ArithSeq, depth: u64, caps: &Caps) -> Result<Vec<CirclePoint>> {
    let ratios = seq.classify_ratios()?;
    if ratios.bounded != Tri::Yes {
        return Err(Error::NotCountable);
    }
    let u_m = seq.term(depth)?;
    let grid = match u64::try_from(&u_m) {
        Ok(g) if g <= caps.enum_cap => g,
        _ => {
            return Err(Error::ResourceCap {
                what: "countable enumeration size",
                limit: caps.enum_cap,
            })
        }
    };
    (0..grid)
        .map(|k| CirclePoint::from_ratio(BigUint::from(k), u_m.clone()))
        .collect()
}

/// Result of the dense-approximation algorithm: a finite-support truncation
/// together with a certified interval around `ρ_u(x - x', 0)`.
#[derive(Debug, Clone)]
pub struct DenseApprox {
    pub truncation: CirclePoint,
    pub truncated_at: u64,
    pub certificate: Interval,
}

/// Approximate a member `x` of `t_u(T)` by a finite-support (hence torsion)
/// point within `ε` in the `ρ_u` metric.
///
/// Bounded ratios force finite support, so `x` itself is returned. With a
/// divergent ratio subsequence, the truncation index `N` is pushed along the
/// certified divergent stream until the ratio exceeds `2/ε` and the decay
/// promise of the membership certificate yields `‖u_n x‖ <= ε/2` for all
/// `n >= N`; the two bounds combine into a certificate `ρ_u(x - x', 0) <=
/// ε/2`.
pub fn approx_dense(rep: &CanonicalRep, eps: &Rat, caps: &Caps) -> Result<DenseApprox> {
    if eps <= &Rat::zero() {
        return Err(Error::InvalidRule(
            "approximation radius must be positive".into(),
        ));
    }
    let seq = rep.seq();
    let verdict = member_stream(rep)?;
    if verdict.decision != Decision::In {
        return Err(Error::CannotCertify(
            "dense approximation needs a certified member of the subgroup".into(),
        ));
    }
    // Finite support: the point is already torsion.
    if let Some(end) = rep.finite_support_end()? {
        let (value, _) = rep.eval_prefix(end)?;
        return Ok(DenseApprox {
            truncation: CirclePoint::new(value),
            truncated_at: end,
            certificate: Interval::point(Rat::zero()),
        });
    }
    let decay_scale = match &verdict.certificate {
        Certificate::DivergentSupportLimit {
            decay_max_digit: Some(d),
            ..
        } => *d,
        _ => {
            return Err(Error::CannotCertify(
                "membership certificate carries no checkable decay promise".into(),
            ))
        }
    };
    let stream = seq.divergent_ratio_stream().ok_or(Error::CannotCertify(
        "sequence metadata declares no divergent ratio subsequence".into(),
    ))?;
    let two_over_eps = rat(2, 1) / eps;
    let half_eps = eps / rat(2, 1);
    let mut cut = None;
    for n in stream.iter().take(caps.horizon as usize) {
        if n > seq.term_cap() {
            break;
        }
        // (i) the ratio at the cut exceeds 2/ε (and stays above: the stream
        // is monotone); (ii) the decay promise is below ε/2 from the cut on.
        let q = Rat::from_integer(BigInt::from(seq.ratio(n)?));
        if q <= two_over_eps {
            continue;
        }
        let decay = crate::membership::decay_bound_at(seq, decay_scale, n)?;
        if decay <= half_eps {
            cut = Some(n);
            break;
        }
    }
    let cut = cut.ok_or(Error::CannotCertify(
        "no certified truncation index within the horizon".into(),
    ))?;
    let (value, _) = rep.eval_prefix(cut)?;
    Ok(DenseApprox {
        truncation: CirclePoint::new(value),
        truncated_at: cut,
        certificate: Interval::new(Rat::zero(), half_eps),
    })
}

/// Independent confirmation of a dense-approximation certificate: recompute
/// `ρ_u(x - x', 0)` by interval arithmetic at double the truncation horizon.
pub fn confirm_dense_approx(rep: &CanonicalRep, approx: &DenseApprox) -> Result<Interval> {
    rho_interval_shifted(
        rep,
        &Rat::new(
            BigInt::from(approx.truncation.numer()),
            BigInt::from(approx.truncation.denom()),
        ),
        approx.truncated_at * 2,
    )
}

/// Provenance notes rendered alongside the report: which classification fact
/// produced each field.
pub fn provenance_notes() -> BTreeMap<&'static str, &'static str> {
    BTreeMap::from([
        (
            "ratios_bounded",
            "declared asymptotic metadata of the ratio generator, validated on a prefix",
        ),
        (
            "countable",
            "for a-sequences: countable iff the ratio sequence is bounded",
        ),
        (
            "subgroup_of_q_mod_z",
            "bounded ratios confine the subgroup to rational points",
        ),
        (
            "f_sigma",
            "for a-sequences the F_sigma subgroups are exactly the countable ones",
        ),
        (
            "test_topology_open",
            "F_sigma is equivalent to openness in the test topology generated by closed metric balls",
        ),
        (
            "metric_topology_open",
            "the test topology refines into the metric topology",
        ),
        (
            "cardinality",
            "Borel subgroups obey the countable/continuum dichotomy",
        ),
        (
            "metric_topology_discrete",
            "countable subgroups are exactly those with discrete metric topology",
        ),
        (
            "measure_zero",
            "stored fact: faithfully indexed character sequences force Haar measure zero",
        ),
        (
            "torsion",
            "p-primary decomposition with exponents liminf of p-adic valuations",
        ),
        (
            "torsion_dense",
            "for a-sequences the torsion subgroup is metric-dense (constructive truncation)",
        ),
    ])
}

/// Render the report's exact values for serialization.
pub fn report_cardinality_str(c: Cardinality) -> &'static str {
    match c {
        Cardinality::Aleph0 => "aleph0",
        Cardinality::Continuum => "continuum",
        Cardinality::Unknown => "unknown",
    }
}

pub fn fmt_interval(iv: &Interval) -> (String, String) {
    (fmt_rat(iv.lo()), fmt_rat(iv.hi()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle::DigitRule;
    use crate::membership::member_rational;
    use crate::rat::rat;
    use num_traits::One;

    fn arc(spec: &str) -> Arc<ArithSeq> {
        Arc::new(ArithSeq::from_spec(spec).unwrap())
    }

    #[test]
    fn report_examples() {
        let g = report(&arc("geometric:2")).unwrap();
        assert_eq!(g.ratios_bounded, Tri::Yes);
        assert_eq!(g.countable, Tri::Yes);
        assert_eq!(g.f_sigma, Tri::Yes);
        assert_eq!(g.cardinality, Cardinality::Aleph0);
        assert_eq!(g.metric_topology_discrete, Tri::Yes);

        let f = report(&arc("factorial")).unwrap();
        assert_eq!(f.ratios_bounded, Tri::No);
        assert_eq!(f.countable, Tri::No);
        assert_eq!(f.f_sigma, Tri::No);
        assert_eq!(f.cardinality, Cardinality::Continuum);

        let d = report(&arc("doubleexp:2")).unwrap();
        assert_eq!(d.f_sigma, Tri::No);
        assert_eq!(d.cardinality, Cardinality::Continuum);
    }

    #[test]
    fn six_conditions_match_boundedness() {
        for (name, seq) in crate::aseq::builtin_catalog() {
            let seq = Arc::new(seq);
            let r = report(&seq).unwrap();
            let fields = [
                r.ratios_bounded,
                r.countable,
                r.subgroup_of_q_mod_z,
                r.f_sigma,
                r.test_topology_open,
                r.metric_topology_open,
            ];
            assert!(
                fields.iter().all(|f| *f == fields[0]),
                "{name}: equivalent conditions disagree"
            );
            assert_eq!(
                fields[0],
                seq.classify_ratios().unwrap().bounded,
                "{name}: conditions detached from boundedness"
            );
            assert_eq!(r.metric_topology_discrete, r.countable, "{name}");
        }
    }

    #[test]
    fn torsion_examples() {
        // Factorial: every p-order diverges, so the torsion is all of Q/Z.
        let f = torsion_structure(&SeqDescriptor::Arith(arc("factorial")), 4).unwrap();
        assert_eq!(f.other_primes, OtherPrimes::AllInfinite);
        for p in [2u64, 3, 5, 7] {
            assert!(matches!(f.primes.get(&p), Some(POrder::Infinite { .. })));
        }
        assert_eq!(f.rendering(), "Q/Z");

        // Geometric base 2: only the 2-primary component survives.
        let g = torsion_structure(&SeqDescriptor::Arith(arc("geometric:2")), 8).unwrap();
        assert!(matches!(g.primes.get(&2), Some(POrder::Infinite { .. })));
        assert_eq!(g.primes.len(), 1);
        assert_eq!(g.other_primes, OtherPrimes::AllZero);
        assert_eq!(g.rendering(), "Z(2^inf)");

        // The primes sequence has trivial torsion.
        let p = torsion_structure(&SeqDescriptor::Primes, 8).unwrap();
        assert!(p.primes.is_empty());
        assert_eq!(p.rendering(), "trivial");
    }

    #[test]
    fn enumerate_examples() {
        let caps = Caps::default();
        let g = ArithSeq::from_spec("geometric:2").unwrap();
        let pts = enumerate_countable(&g, 3, &caps).unwrap();
        assert_eq!(pts.len(), 8);
        assert_eq!(pts[0], CirclePoint::zero());
        assert_eq!(pts[5], CirclePoint::new(rat(5, 8)));

        assert_eq!(
            enumerate_countable(&g, 0, &caps).unwrap(),
            vec![CirclePoint::zero()]
        );

        let p = ArithSeq::from_spec("ratios:2,3:repeat").unwrap();
        assert_eq!(enumerate_countable(&p, 2, &caps).unwrap().len(), 6);

        let f = ArithSeq::from_spec("factorial").unwrap();
        assert!(matches!(
            enumerate_countable(&f, 3, &caps),
            Err(Error::NotCountable)
        ));
    }

    #[test]
    fn torsion_membership_coherence() {
        // Sampled torsion points of order p^j belong iff j <= n_p.
        for (name, seq) in crate::aseq::builtin_catalog() {
            if name == "doubleexp:2" {
                continue; // term cap makes deep witnesses expensive
            }
            let seq = Arc::new(seq);
            for p in [2u64, 3, 5] {
                let order = seq.p_order(p);
                let np = match order {
                    POrder::Finite { value, .. } => value,
                    POrder::Infinite { .. } => 6,
                    POrder::LowerBound { .. } => continue,
                };
                for j in 1..=np.min(6) {
                    let x = CirclePoint::from_ratio(BigUint::one(), BigUint::from(p).pow(j as u32))
                        .unwrap();
                    let v = member_rational(&x, &seq).unwrap();
                    let expected = if j <= np { Decision::In } else { Decision::Out };
                    assert_eq!(v.decision, expected, "{name}: p = {p}, j = {j}");
                }
                if let POrder::Finite { value, .. } = seq.p_order(p) {
                    let x = CirclePoint::from_ratio(
                        BigUint::one(),
                        BigUint::from(p).pow(value as u32 + 1),
                    )
                    .unwrap();
                    assert_eq!(
                        member_rational(&x, &seq).unwrap().decision,
                        Decision::Out,
                        "{name}: p = {p} beyond its order"
                    );
                }
            }
        }
    }

    #[test]
    fn approx_dense_finite_support_returns_point() {
        let g = arc("geometric:2");
        let rep = CanonicalRep::new(
            g,
            DigitRule::FiniteList(vec![BigUint::one(), BigUint::zero(), BigUint::one()]),
        )
        .unwrap();
        let a = approx_dense(&rep, &rat(1, 10), &Caps::default()).unwrap();
        assert_eq!(a.truncation, CirclePoint::new(rat(5, 8)));
        assert!(a.certificate.hi().is_zero());
    }

    #[test]
    fn approx_dense_e_minus_two() {
        let f = Arc::new(ArithSeq::from_spec("factorial").unwrap());
        let rep = CanonicalRep::new(f, DigitRule::Constant(1)).unwrap();
        let caps = Caps::default();

        let a = approx_dense(&rep, &rat(1, 10), &caps).unwrap();
        assert!(a.certificate.hi() <= &rat(1, 10));
        // Independent interval recomputation at double the horizon.
        let confirmed = confirm_dense_approx(&rep, &a).unwrap();
        assert!(confirmed.hi() <= &rat(1, 10), "{:?}", confirmed);

        let tight = approx_dense(&rep, &rat(1, 100), &caps).unwrap();
        assert!(tight.certificate.hi() <= &rat(1, 100));
        // The ratio at the cut must exceed 2/ε = 200, so the index grows
        // towards 200.
        assert!(tight.truncated_at >= 199, "cut at {}", tight.truncated_at);
        assert!(tight.truncated_at > a.truncated_at);
        let confirmed = confirm_dense_approx(&rep, &tight).unwrap();
        assert!(confirmed.hi() <= &rat(1, 100));
    }

    #[test]
    fn approx_dense_rejects_non_members() {
        let g = arc("geometric:2");
        let third = CanonicalRep::new(
            g,
            DigitRule::Periodic {
                preamble: vec![],
                cycle: vec![BigUint::zero(), BigUint::one()],
            },
        )
        .unwrap();
        assert!(matches!(
            approx_dense(&third, &rat(1, 10), &Caps::default()),
            Err(Error::CannotCertify(_))
        ));
    }

    #[test]
    fn cardinality_dichotomy_consistency() {
        let caps = Caps::default();
        for (name, seq) in crate::aseq::builtin_catalog() {
            let seq = Arc::new(seq);
            let r = report(&seq).unwrap();
            match r.cardinality {
                Cardinality::Aleph0 => {
                    assert!(
                        enumerate_countable(&seq, 3, &caps).is_ok(),
                        "{name}: countable but enumeration refused"
                    );
                }
                Cardinality::Continuum => {
                    assert!(
                        matches!(
                            enumerate_countable(&seq, 3, &caps),
                            Err(Error::NotCountable)
                        ),
                        "{name}: uncountable but enumeration accepted"
                    );
                }
                Cardinality::Unknown => {}
            }
        }
    }
}
