//! Boolean and threshold expressions over organization endorsements.
//!
//! Text form (case-insensitive keywords):
//!
//! ```text
//! expr := org | AND(expr, ...) | OR(expr, ...)
//!       | OUTOF(k, org, ...)          k-of-n
//!       | BFT(f, org, ...)            2f+1 of n, n > 3f
//!       | MAJORITY(org, ...)          n/2 + 1 of n
//! ```

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::codec::{Canonical, DecodeError, Reader, Writer};
use crate::names::OrgId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyExprError {
    #[error("empty operand list")]
    Empty,
    #[error("threshold {k} outside 1..={n}")]
    Threshold { k: usize, n: usize },
    #[error("{n} endorsers cannot tolerate {f} faults (need n > 3f)")]
    FaultBound { f: usize, n: usize },
    #[error("organization {0} listed twice")]
    Duplicate(OrgId),
    #[error("syntax error at byte {0}")]
    Syntax(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EndorsementPolicyExpr {
    Org(OrgId),
    And(Vec<EndorsementPolicyExpr>),
    Or(Vec<EndorsementPolicyExpr>),
    KOfN { k: usize, orgs: Vec<OrgId> },
    /// Byzantine quorum: `2f + 1` of the listed orgs, which must number more than `3f`.
    TwoFPlusOne { f: usize, orgs: Vec<OrgId> },
}

fn check_distinct(orgs: &[OrgId]) -> Result<(), PolicyExprError> {
    let mut seen = BTreeSet::new();
    for o in orgs {
        if !seen.insert(o) {
            return Err(PolicyExprError::Duplicate(o.clone()));
        }
    }
    Ok(())
}

impl EndorsementPolicyExpr {
    /// Every listed organization must endorse.
    pub fn all_of(orgs: impl IntoIterator<Item = OrgId>) -> Result<Self, PolicyExprError> {
        let leaves: Vec<_> = orgs.into_iter().map(Self::Org).collect();
        let e = Self::And(leaves);
        e.validate()?;
        Ok(e)
    }

    pub fn k_of_n(k: usize, orgs: Vec<OrgId>) -> Result<Self, PolicyExprError> {
        let e = Self::KOfN { k, orgs };
        e.validate()?;
        Ok(e)
    }

    pub fn two_f_plus_one(f: usize, orgs: Vec<OrgId>) -> Result<Self, PolicyExprError> {
        let e = Self::TwoFPlusOne { f, orgs };
        e.validate()?;
        Ok(e)
    }

    /// Half of the members plus one.
    pub fn majority(orgs: Vec<OrgId>) -> Result<Self, PolicyExprError> {
        let k = orgs.len() / 2 + 1;
        Self::k_of_n(k, orgs)
    }

    pub fn validate(&self) -> Result<(), PolicyExprError> {
        match self {
            Self::Org(_) => Ok(()),
            Self::And(xs) | Self::Or(xs) => {
                if xs.is_empty() {
                    return Err(PolicyExprError::Empty);
                }
                xs.iter().try_for_each(Self::validate)
            }
            Self::KOfN { k, orgs } => {
                check_distinct(orgs)?;
                if *k < 1 || *k > orgs.len() {
                    return Err(PolicyExprError::Threshold { k: *k, n: orgs.len() });
                }
                Ok(())
            }
            Self::TwoFPlusOne { f, orgs } => {
                check_distinct(orgs)?;
                if orgs.len() <= 3 * f {
                    return Err(PolicyExprError::FaultBound { f: *f, n: orgs.len() });
                }
                Ok(())
            }
        }
    }

    /// Evaluate against the set of organizations with verified endorsements.
    /// Repeated endorsements from one organization count once because the
    /// input is a set.
    pub fn is_satisfied(&self, endorsers: &BTreeSet<OrgId>) -> bool {
        match self {
            Self::Org(o) => endorsers.contains(o),
            Self::And(xs) => xs.iter().all(|x| x.is_satisfied(endorsers)),
            Self::Or(xs) => xs.iter().any(|x| x.is_satisfied(endorsers)),
            Self::KOfN { k, orgs } => orgs.iter().filter(|o| endorsers.contains(*o)).count() >= *k,
            Self::TwoFPlusOne { f, orgs } => orgs.iter().filter(|o| endorsers.contains(*o)).count() >= 2 * f + 1,
        }
    }

    /// Every organization mentioned anywhere in the expression.
    pub fn orgs(&self) -> BTreeSet<OrgId> {
        let mut out = BTreeSet::new();
        self.collect_orgs(&mut out);
        out
    }

    fn collect_orgs(&self, out: &mut BTreeSet<OrgId>) {
        match self {
            Self::Org(o) => {
                out.insert(o.clone());
            }
            Self::And(xs) | Self::Or(xs) => xs.iter().for_each(|x| x.collect_orgs(out)),
            Self::KOfN { orgs, .. } | Self::TwoFPlusOne { orgs, .. } => out.extend(orgs.iter().cloned()),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Self::And(xs) | Self::Or(xs) => 1 + xs.iter().map(Self::depth).max().unwrap_or(0),
            _ => 1,
        }
    }

    pub fn parse(text: &str) -> Result<Self, PolicyExprError> {
        let mut p = ExprParser { src: text.as_bytes(), pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(PolicyExprError::Syntax(p.pos));
        }
        e.validate()?;
        Ok(e)
    }
}

struct ExprParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl ExprParser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn word(&mut self) -> Result<&str, PolicyExprError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || matches!(self.src[self.pos], b'-' | b'_'))
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PolicyExprError::Syntax(start));
        }
        Ok(std::str::from_utf8(&self.src[start..self.pos]).expect("ascii"))
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.src.get(self.pos) == Some(&c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn org(&mut self) -> Result<OrgId, PolicyExprError> {
        let at = self.pos;
        OrgId::new(self.word()?).map_err(|_| PolicyExprError::Syntax(at))
    }

    fn number(&mut self) -> Result<usize, PolicyExprError> {
        let at = self.pos;
        self.word()?.parse().map_err(|_| PolicyExprError::Syntax(at))
    }

    fn list<T>(&mut self, mut item: impl FnMut(&mut Self) -> Result<T, PolicyExprError>) -> Result<Vec<T>, PolicyExprError> {
        let mut out = vec![item(self)?];
        while self.eat(b',') {
            out.push(item(self)?);
        }
        Ok(out)
    }

    fn expr(&mut self) -> Result<EndorsementPolicyExpr, PolicyExprError> {
        let at = self.pos;
        let head = self.word()?.to_ascii_lowercase();
        if !self.eat(b'(') {
            return OrgId::new(&head)
                .map(EndorsementPolicyExpr::Org)
                .map_err(|_| PolicyExprError::Syntax(at));
        }
        let e = match head.as_str() {
            "and" => EndorsementPolicyExpr::And(self.list(Self::expr)?),
            "or" => EndorsementPolicyExpr::Or(self.list(Self::expr)?),
            "outof" | "bft" => {
                let n = self.number()?;
                if !self.eat(b',') {
                    return Err(PolicyExprError::Syntax(self.pos));
                }
                let orgs = self.list(Self::org)?;
                if head == "outof" {
                    EndorsementPolicyExpr::KOfN { k: n, orgs }
                } else {
                    EndorsementPolicyExpr::TwoFPlusOne { f: n, orgs }
                }
            }
            "majority" => {
                let orgs = self.list(Self::org)?;
                EndorsementPolicyExpr::KOfN { k: orgs.len() / 2 + 1, orgs }
            }
            _ => return Err(PolicyExprError::Syntax(at)),
        };
        if !self.eat(b')') {
            return Err(PolicyExprError::Syntax(self.pos));
        }
        Ok(e)
    }
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl fmt::Display for EndorsementPolicyExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Org(o) => write!(f, "{o}"),
            Self::And(xs) => write!(f, "AND({})", join(xs)),
            Self::Or(xs) => write!(f, "OR({})", join(xs)),
            Self::KOfN { k, orgs } => write!(f, "OUTOF({k},{})", join(orgs)),
            Self::TwoFPlusOne { f: faults, orgs } => write!(f, "BFT({faults},{})", join(orgs)),
        }
    }
}

impl Canonical for EndorsementPolicyExpr {
    fn encode(&self, w: &mut Writer) {
        match self {
            Self::Org(o) => {
                w.u8(1).str(o.as_str());
            }
            Self::And(xs) => {
                w.u8(2).seq(xs, |w, x| x.encode(w));
            }
            Self::Or(xs) => {
                w.u8(3).seq(xs, |w, x| x.encode(w));
            }
            Self::KOfN { k, orgs } => {
                w.u8(4).u32(*k as u32).seq(orgs, |w, o| {
                    w.str(o.as_str());
                });
            }
            Self::TwoFPlusOne { f, orgs } => {
                w.u8(5).u32(*f as u32).seq(orgs, |w, o| {
                    w.str(o.as_str());
                });
            }
        }
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        fn org(r: &mut Reader<'_>) -> Result<OrgId, DecodeError> {
            OrgId::new(&r.string("org")?).map_err(|_| DecodeError::Invalid("org id"))
        }
        let e = match r.u8("policy tag")? {
            1 => Self::Org(org(r)?),
            2 => Self::And(r.seq("and", Self::decode)?),
            3 => Self::Or(r.seq("or", Self::decode)?),
            4 => Self::KOfN {
                k: r.u32("k")? as usize,
                orgs: r.seq("orgs", org)?,
            },
            5 => Self::TwoFPlusOne {
                f: r.u32("f")? as usize,
                orgs: r.seq("orgs", org)?,
            },
            tag => return Err(DecodeError::UnknownTag { what: "policy", tag }),
        };
        e.validate().map_err(|_| DecodeError::Invalid("endorsement policy"))?;
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn org(s: &str) -> OrgId {
        OrgId::new(s).unwrap()
    }

    fn set(names: &[&str]) -> BTreeSet<OrgId> {
        names.iter().map(|n| org(n)).collect()
    }

    fn orgs(n: usize) -> Vec<OrgId> {
        (1..=n).map(|i| org(&format!("org{i}"))).collect()
    }

    #[test]
    fn and_requires_everyone() {
        let e = EndorsementPolicyExpr::all_of(orgs(4)).unwrap();
        assert!(!e.is_satisfied(&set(&["org1", "org2", "org3"])));
        assert!(e.is_satisfied(&set(&["org1", "org2", "org3", "org4"])));
    }

    #[test]
    fn two_f_plus_one_threshold() {
        let e = EndorsementPolicyExpr::two_f_plus_one(2, orgs(7)).unwrap();
        assert!(e.is_satisfied(&set(&["org1", "org2", "org3", "org4", "org5"])));
        assert!(!e.is_satisfied(&set(&["org1", "org2", "org3", "org4"])));
        assert_eq!(
            EndorsementPolicyExpr::two_f_plus_one(2, orgs(6)),
            Err(PolicyExprError::FaultBound { f: 2, n: 6 })
        );
    }

    #[test]
    fn member_a_or_members_bcd() {
        let e = EndorsementPolicyExpr::parse("OR(org-a, AND(org-b, org-c, org-d))").unwrap();
        assert!(e.is_satisfied(&set(&["org-b", "org-c", "org-d"])));
        assert!(e.is_satisfied(&set(&["org-a"])));
        assert!(!e.is_satisfied(&set(&["org-b", "org-c"])));
    }

    #[test]
    fn majority_is_half_plus_one() {
        let e = EndorsementPolicyExpr::majority(orgs(4)).unwrap();
        assert_eq!(e, EndorsementPolicyExpr::KOfN { k: 3, orgs: orgs(4) });
        let e = EndorsementPolicyExpr::majority(orgs(5)).unwrap();
        assert!(e.is_satisfied(&set(&["org1", "org2", "org5"])));
        assert!(!e.is_satisfied(&set(&["org1", "org2"])));
    }

    #[test]
    fn invalid_shapes_rejected() {
        assert_eq!(EndorsementPolicyExpr::k_of_n(0, orgs(3)), Err(PolicyExprError::Threshold { k: 0, n: 3 }));
        assert_eq!(EndorsementPolicyExpr::k_of_n(4, orgs(3)), Err(PolicyExprError::Threshold { k: 4, n: 3 }));
        assert_eq!(
            EndorsementPolicyExpr::k_of_n(1, vec![org("a"), org("a")]),
            Err(PolicyExprError::Duplicate(org("a")))
        );
        assert_eq!(EndorsementPolicyExpr::parse("AND()"), Err(PolicyExprError::Syntax(4)));
        assert!(EndorsementPolicyExpr::parse("AND(a").is_err());
        assert!(EndorsementPolicyExpr::parse("XOR(a,b)").is_err());
    }

    #[test]
    fn text_and_binary_round_trip() {
        for text in ["org1", "AND(org1,OR(org2,org3))", "OUTOF(2,a,b,c)", "BFT(1,a,b,c,d)"] {
            let e = EndorsementPolicyExpr::parse(text).unwrap();
            assert_eq!(e.to_string(), text);
            assert_eq!(EndorsementPolicyExpr::from_bytes(&e.to_bytes()).unwrap(), e);
        }
    }
}
