//! Symbolic sets of sequence indices.
//!
//! Membership criteria and p-adic orders hinge on questions like "is the set
//! of indices where the ratio is divisible by `p`, minus the overridden
//! indices, infinite?". Finite scans cannot answer such questions, so index
//! sets are kept symbolic and the needed queries (membership, k-th element,
//! infinitude, infinitude of intersections) are answered by case analysis on
//! the closed catalog of set shapes. Queries outside the decidable fragment
//! return [`Tri::Unknown`] rather than guessing.

use crate::rat::factorize_u64;
use crate::Tri;

/// Grammar-facing exception sets for sparse ratio overrides:
/// `powers:<b>`, `multiples:<m>`, or an explicit list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SetExpr {
    /// `{ b^j : j >= 1 }`
    Powers { base: u64 },
    /// `{ m, 2m, 3m, ... }`
    Multiples { step: u64 },
    /// A finite, strictly increasing list.
    Explicit(Vec<u64>),
}

impl SetExpr {
    pub fn validate(&self) -> crate::Result<()> {
        match self {
            SetExpr::Powers { base } if *base < 2 => Err(crate::Error::InvalidRule(
                "powers set needs base >= 2".into(),
            )),
            SetExpr::Multiples { step } if *step < 2 => Err(crate::Error::InvalidRule(
                "multiples set needs step >= 2".into(),
            )),
            SetExpr::Explicit(v)
                if v.is_empty() || v.windows(2).any(|w| w[0] >= w[1]) || v[0] == 0 =>
            {
                Err(crate::Error::InvalidRule(
                    "explicit set must be strictly increasing and positive".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    pub fn contains(&self, n: u64) -> bool {
        self.to_family().contains(n)
    }

    pub fn is_infinite(&self) -> bool {
        !matches!(self, SetExpr::Explicit(_))
    }

    pub fn to_family(&self) -> IndexFamily {
        match self {
            SetExpr::Powers { base } => IndexFamily::Powers { base: *base },
            SetExpr::Multiples { step } => IndexFamily::Residues {
                modulus: *step,
                residues: vec![0],
                from: *step,
            },
            SetExpr::Explicit(v) => IndexFamily::Explicit(v.clone()),
        }
    }
}

/// A symbolic set of indices `n >= 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IndexFamily {
    /// Every index `n >= from`.
    AllFrom(u64),
    /// `{ n >= from : n mod modulus in residues }`.
    Residues {
        modulus: u64,
        residues: Vec<u64>,
        from: u64,
    },
    /// `{ base^j : j >= 1 }`.
    Powers { base: u64 },
    /// A finite, strictly increasing list.
    Explicit(Vec<u64>),
    /// Union of the parts.
    Union(Vec<IndexFamily>),
    /// Elements of `base` not in `minus`.
    Diff {
        base: Box<IndexFamily>,
        minus: Box<IndexFamily>,
    },
    /// `{ n + offset : n in inner }`.
    Shift {
        offset: u64,
        inner: Box<IndexFamily>,
    },
}

/// Scan budget for iterating filtered families; beyond this the iterator
/// gives up (callers surface a resource error, never a wrong answer).
const SCAN_BUDGET: u64 = 1 << 22;

impl IndexFamily {
    pub fn empty() -> Self {
        IndexFamily::Explicit(Vec::new())
    }

    pub fn multiples(step: u64) -> Self {
        IndexFamily::Residues {
            modulus: step,
            residues: vec![0],
            from: step,
        }
    }

    pub fn contains(&self, n: u64) -> bool {
        match self {
            IndexFamily::AllFrom(from) => n >= *from,
            IndexFamily::Residues {
                modulus,
                residues,
                from,
            } => n >= *from && residues.contains(&(n % modulus)),
            IndexFamily::Powers { base } => {
                if n < *base {
                    return false;
                }
                let mut m = n;
                while m.is_multiple_of(*base) {
                    m /= base;
                }
                m == 1
            }
            IndexFamily::Explicit(v) => v.binary_search(&n).is_ok(),
            IndexFamily::Union(parts) => parts.iter().any(|p| p.contains(n)),
            IndexFamily::Diff { base, minus } => base.contains(n) && !minus.contains(n),
            IndexFamily::Shift { offset, inner } => n > *offset && inner.contains(n - offset),
        }
    }

    /// Iterate members in increasing order. Filtered shapes carry a scan
    /// budget; once it is exhausted the iterator ends early.
    pub fn iter(&self) -> Box<dyn Iterator<Item = u64> + '_> {
        match self {
            IndexFamily::AllFrom(from) => Box::new(*from..),
            IndexFamily::Residues {
                modulus,
                residues,
                from,
            } => {
                let (m, from) = (*modulus, *from);
                Box::new((from..).filter(move |n| residues.contains(&(n % m))))
            }
            IndexFamily::Powers { base } => {
                let b = *base;
                Box::new((1u32..).scan((), move |_, j| b.checked_pow(j)))
            }
            IndexFamily::Explicit(v) => Box::new(v.iter().copied()),
            IndexFamily::Union(parts) => {
                let iters: Vec<_> = parts.iter().map(|p| p.iter().peekable()).collect();
                Box::new(MergeIter { iters })
            }
            IndexFamily::Diff { base, minus } => Box::new(
                base.iter()
                    .take(SCAN_BUDGET as usize)
                    .filter(move |&n| !minus.contains(n)),
            ),
            IndexFamily::Shift { offset, inner } => {
                let k = *offset;
                Box::new(inner.iter().map(move |n| n + k))
            }
        }
    }

    /// The `k`-th member (0-based), or `None` when the set has fewer than
    /// `k+1` reachable members within the scan budget.
    pub fn kth(&self, k: u64) -> Option<u64> {
        self.iter().nth(k as usize)
    }

    /// Smallest member `>= n` within the scan budget.
    pub fn next_at_or_after(&self, n: u64) -> Option<u64> {
        self.iter().find(|&m| m >= n)
    }

    /// Is this set infinite? Decided symbolically.
    pub fn is_infinite(&self) -> Tri {
        match self {
            IndexFamily::AllFrom(_) | IndexFamily::Powers { .. } => Tri::Yes,
            IndexFamily::Residues { residues, .. } => Tri::from_bool(!residues.is_empty()),
            IndexFamily::Explicit(_) => Tri::No,
            IndexFamily::Union(parts) => {
                let mut all_no = true;
                for p in parts {
                    match p.is_infinite() {
                        Tri::Yes => return Tri::Yes,
                        Tri::No => {}
                        Tri::Unknown => all_no = false,
                    }
                }
                if all_no {
                    Tri::No
                } else {
                    Tri::Unknown
                }
            }
            IndexFamily::Diff { base, minus } => diff_is_infinite(base, minus),
            IndexFamily::Shift { inner, .. } => inner.is_infinite(),
        }
    }

    /// Is the intersection with `other` infinite? Decided symbolically.
    pub fn intersect_is_infinite(&self, other: &IndexFamily) -> Tri {
        intersect_infinite(self, other)
    }

    /// Normalize to residue-class form when the shape allows it.
    fn as_residues(&self) -> Option<(u64, Vec<u64>, u64)> {
        match self {
            IndexFamily::AllFrom(from) => Some((1, vec![0], *from)),
            IndexFamily::Residues {
                modulus,
                residues,
                from,
            } => Some((*modulus, residues.clone(), *from)),
            IndexFamily::Shift { offset, inner } => {
                let (m, rs, from) = inner.as_residues()?;
                let rs = rs.iter().map(|r| (r + offset) % m).collect();
                Some((m, rs, from + offset))
            }
            _ => None,
        }
    }
}

struct MergeIter<'a> {
    iters: Vec<std::iter::Peekable<Box<dyn Iterator<Item = u64> + 'a>>>,
}

impl Iterator for MergeIter<'_> {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        let min = self
            .iters
            .iter_mut()
            .filter_map(|it| it.peek().copied())
            .min()?;
        for it in &mut self.iters {
            while it.peek() == Some(&min) {
                it.next();
            }
        }
        Some(min)
    }
}

/// Residues that the orbit `base^j mod modulus` (j >= 1) visits infinitely
/// often, i.e. the residues on the eventual cycle of the orbit.
fn power_cycle_residues(base: u64, modulus: u64) -> Vec<u64> {
    debug_assert!(modulus >= 1);
    let mut seen: Vec<u64> = Vec::new();
    let mut r = base % modulus;
    loop {
        if let Some(pos) = seen.iter().position(|&s| s == r) {
            let mut cycle: Vec<u64> = seen[pos..].to_vec();
            cycle.sort_unstable();
            cycle.dedup();
            return cycle;
        }
        seen.push(r);
        r = (r as u128 * base as u128 % modulus as u128) as u64;
    }
}

/// Multiplicative dependence of two bases: true iff `a^i = b^j` has a
/// solution with `i, j >= 1` (equivalently, infinitely many).
fn multiplicatively_dependent(a: u64, b: u64) -> bool {
    if a == b {
        return true;
    }
    let fa = factorize_u64(a);
    let fb = factorize_u64(b);
    if fa.len() != fb.len() {
        return false;
    }
    // Same prime support and proportional exponent vectors.
    let mut ratio: Option<(u32, u32)> = None;
    for ((pa, ea), (pb, eb)) in fa.iter().zip(fb.iter()) {
        if pa != pb {
            return false;
        }
        match ratio {
            None => ratio = Some((*ea, *eb)),
            Some((x, y)) => {
                if (*ea as u64) * (y as u64) != (x as u64) * (*eb as u64) {
                    return false;
                }
            }
        }
    }
    true
}

fn crt_compatible(r1: u64, m1: u64, r2: u64, m2: u64) -> bool {
    let g = gcd(m1, m2);
    (r1 % g) == (r2 % g)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn residues_intersect_infinite(a: (u64, &[u64]), b: (u64, &[u64])) -> bool {
    let (m1, rs1) = a;
    let (m2, rs2) = b;
    rs1.iter()
        .any(|&r1| rs2.iter().any(|&r2| crt_compatible(r1, m1, r2, m2)))
}

/// Does `{ base^j + shift : j >= 1 }` hit the residue classes infinitely often?
fn shifted_powers_hit_residues(base: u64, shift: u64, modulus: u64, residues: &[u64]) -> bool {
    let cycle = power_cycle_residues(base, modulus);
    cycle
        .iter()
        .any(|&c| residues.contains(&((c + shift) % modulus)))
}

fn as_shifted_powers(f: &IndexFamily) -> Option<(u64, u64)> {
    match f {
        IndexFamily::Powers { base } => Some((*base, 0)),
        IndexFamily::Shift { offset, inner } => {
            let (b, s) = as_shifted_powers(inner)?;
            Some((b, s + offset))
        }
        _ => None,
    }
}

fn intersect_infinite(a: &IndexFamily, b: &IndexFamily) -> Tri {
    use IndexFamily::*;

    // Finite on either side settles it.
    if a.is_infinite() == Tri::No || b.is_infinite() == Tri::No {
        return Tri::No;
    }
    if let AllFrom(_) = a {
        return b.is_infinite();
    }
    if let AllFrom(_) = b {
        return a.is_infinite();
    }
    if let Union(parts) = a {
        let mut all_no = true;
        for p in parts {
            match intersect_infinite(p, b) {
                Tri::Yes => return Tri::Yes,
                Tri::No => {}
                Tri::Unknown => all_no = false,
            }
        }
        return if all_no { Tri::No } else { Tri::Unknown };
    }
    if let Union(_) = b {
        return intersect_infinite(b, a);
    }

    match (a.as_residues(), b.as_residues()) {
        (Some((m1, rs1, _)), Some((m2, rs2, _))) => {
            return Tri::from_bool(residues_intersect_infinite((m1, &rs1), (m2, &rs2)));
        }
        (Some((m, rs, _)), None) => {
            if let Some((base, shift)) = as_shifted_powers(b) {
                return Tri::from_bool(shifted_powers_hit_residues(base, shift, m, &rs));
            }
        }
        (None, Some((m, rs, _))) => {
            if let Some((base, shift)) = as_shifted_powers(a) {
                return Tri::from_bool(shifted_powers_hit_residues(base, shift, m, &rs));
            }
        }
        (None, None) => {
            if let (Some((b1, s1)), Some((b2, s2))) = (as_shifted_powers(a), as_shifted_powers(b)) {
                if s1 == s2 {
                    return Tri::from_bool(multiplicatively_dependent(b1, b2));
                }
                // Shifted power coincidences (b1^i + s1 = b2^j + s2) are at
                // most finite for distinct shifts, but proving that here is
                // out of scope.
                return Tri::Unknown;
            }
        }
    }

    // Diff on one side: decide via the base intersection when the removed
    // set is sparse relative to residue classes.
    if let Diff { base, minus } = a {
        match intersect_infinite(base, b) {
            Tri::No => return Tri::No,
            Tri::Yes => {
                if minus.is_infinite() == Tri::No {
                    return Tri::Yes;
                }
                // Removing a power set from an infinite residue-class
                // intersection keeps it infinite: residue classes have
                // positive density, power sets density zero.
                if as_shifted_powers(minus).is_some()
                    && base.as_residues().is_some()
                    && b.as_residues().is_some()
                {
                    return Tri::Yes;
                }
                if let (Some((m1, rs1, _)), Some((m2, rs2, _)), Some((m3, rs3, _))) =
                    (base.as_residues(), b.as_residues(), minus.as_residues())
                {
                    // Classes mod lcm surviving the difference.
                    if let Some(hit) = residue_diff_hits((m1, &rs1), (m3, &rs3), (m2, &rs2)) {
                        return Tri::from_bool(hit);
                    }
                }
                return Tri::Unknown;
            }
            Tri::Unknown => return Tri::Unknown,
        }
    }
    if let Diff { .. } = b {
        return intersect_infinite(b, a);
    }

    Tri::Unknown
}

/// Is `(base \ minus) ∩ other` nonempty on residue classes (hence infinite)?
/// All three arguments are residue-class sets `(modulus, residues)`.
/// Returns `None` when the joint modulus is too large to enumerate.
fn residue_diff_hits(
    base: (u64, &[u64]),
    minus: (u64, &[u64]),
    other: (u64, &[u64]),
) -> Option<bool> {
    let l = lcm(lcm(base.0, minus.0), other.0);
    if l > 1 << 24 {
        return None;
    }
    Some((0..l).any(|r| {
        base.1.contains(&(r % base.0))
            && !minus.1.contains(&(r % minus.0))
            && other.1.contains(&(r % other.0))
    }))
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

fn diff_is_infinite(base: &IndexFamily, minus: &IndexFamily) -> Tri {
    if base.is_infinite() == Tri::No {
        return Tri::No;
    }
    if minus.is_infinite() == Tri::No {
        return base.is_infinite();
    }
    // base residue-like, minus residue-like: exact class analysis.
    if let (Some((m1, rs1, _)), Some((m2, rs2, _))) = (base.as_residues(), minus.as_residues()) {
        let l = lcm(m1, m2);
        if l > 1 << 24 {
            return Tri::Unknown;
        }
        let survives = (0..l).any(|r| rs1.contains(&(r % m1)) && !rs2.contains(&(r % m2)));
        return Tri::from_bool(survives);
    }
    // Removing a density-zero power set from a residue-class set.
    if base.as_residues().is_some() && as_shifted_powers(minus).is_some() {
        return Tri::Yes;
    }
    // Powers minus residue classes: infinite iff the power orbit escapes the
    // removed classes infinitely often.
    if let (Some((b, s)), Some((m, rs, _))) = (as_shifted_powers(base), minus.as_residues()) {
        let cycle = power_cycle_residues(b, m);
        return Tri::from_bool(cycle.iter().any(|&c| !rs.contains(&((c + s) % m))));
    }
    if let (Some((b1, s1)), Some((b2, s2))) = (as_shifted_powers(base), as_shifted_powers(minus)) {
        if s1 == s2 {
            return Tri::from_bool(!multiplicatively_dependent(b1, b2));
        }
        return Tri::Unknown;
    }
    Tri::Unknown
}

#[cfg(test)]
mod tests {
    use super::*;

    fn powers(b: u64) -> IndexFamily {
        IndexFamily::Powers { base: b }
    }

    #[test]
    fn powers_membership_and_iteration() {
        let p2 = powers(2);
        assert!(p2.contains(2) && p2.contains(8) && p2.contains(1024));
        assert!(!p2.contains(1) && !p2.contains(6));
        assert_eq!(p2.iter().take(4).collect::<Vec<_>>(), vec![2, 4, 8, 16]);
        assert_eq!(p2.kth(2), Some(8));
    }

    #[test]
    fn residues_and_union() {
        let evens = IndexFamily::Residues {
            modulus: 2,
            residues: vec![0],
            from: 2,
        };
        let u = IndexFamily::Union(vec![evens.clone(), IndexFamily::Explicit(vec![3])]);
        assert_eq!(u.iter().take(4).collect::<Vec<_>>(), vec![2, 3, 4, 6]);
        assert_eq!(u.is_infinite(), Tri::Yes);
    }

    #[test]
    fn diff_infinitude() {
        let all = IndexFamily::AllFrom(1);
        let evens = IndexFamily::multiples(2);
        let d = IndexFamily::Diff {
            base: Box::new(evens.clone()),
            minus: Box::new(evens.clone()),
        };
        assert_eq!(d.is_infinite(), Tri::No);
        let odds_left = IndexFamily::Diff {
            base: Box::new(all.clone()),
            minus: Box::new(evens),
        };
        assert_eq!(odds_left.is_infinite(), Tri::Yes);
        assert_eq!(odds_left.iter().take(3).collect::<Vec<_>>(), vec![1, 3, 5]);
        let minus_powers = IndexFamily::Diff {
            base: Box::new(all),
            minus: Box::new(powers(2)),
        };
        assert_eq!(minus_powers.is_infinite(), Tri::Yes);
    }

    #[test]
    fn intersections() {
        let evens = IndexFamily::multiples(2);
        let mult3 = IndexFamily::multiples(3);
        assert_eq!(evens.intersect_is_infinite(&mult3), Tri::Yes);

        let odd = IndexFamily::Residues {
            modulus: 2,
            residues: vec![1],
            from: 1,
        };
        // Powers of 2 are eventually even, never odd.
        assert_eq!(odd.intersect_is_infinite(&powers(2)), Tri::No);
        assert_eq!(evens.intersect_is_infinite(&powers(2)), Tri::Yes);

        // 2^j + 1 is odd for all j >= 1.
        let shifted = IndexFamily::Shift {
            offset: 1,
            inner: Box::new(powers(2)),
        };
        assert_eq!(odd.intersect_is_infinite(&shifted), Tri::Yes);
        assert_eq!(evens.intersect_is_infinite(&shifted), Tri::No);

        // Powers of 4 are powers of 2; powers of 6 are not.
        assert_eq!(powers(2).intersect_is_infinite(&powers(4)), Tri::Yes);
        assert_eq!(powers(2).intersect_is_infinite(&powers(6)), Tri::No);
    }

    #[test]
    fn power_cycle_mod() {
        // 2^j mod 7 cycles through 2, 4, 1.
        assert_eq!(power_cycle_residues(2, 7), vec![1, 2, 4]);
        // 2^j mod 4 stabilizes at 0.
        assert_eq!(power_cycle_residues(2, 4), vec![0]);
    }

    #[test]
    fn set_expr_validation() {
        assert!(SetExpr::Powers { base: 2 }.validate().is_ok());
        assert!(SetExpr::Powers { base: 1 }.validate().is_err());
        assert!(SetExpr::Multiples { step: 1 }.validate().is_err());
        assert!(SetExpr::Explicit(vec![3, 2]).validate().is_err());
        assert!(SetExpr::Explicit(vec![2, 5, 9]).validate().is_ok());
    }
}
