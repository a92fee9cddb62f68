//! Organization ids and `<org>.<name>` references.
//!
//! Names are case-insensitive and stored lowercase. A segment is a non-empty
//! run of ASCII letters, digits, `-` or `_`, not starting with `-`, at most [`MAX_SEGMENT`] bytes.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;

pub const MAX_SEGMENT: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NameError {
    #[error("empty name segment")]
    Empty,
    #[error("name segment longer than {MAX_SEGMENT} bytes")]
    TooLong,
    #[error("invalid character {0:?} in name")]
    BadChar(char),
    #[error("expected <org>.<name>, got {0:?}")]
    NotQualified(String),
}

fn normalize_segment(raw: &str) -> Result<String, NameError> {
    if raw.is_empty() {
        return Err(NameError::Empty);
    }
    if raw.len() > MAX_SEGMENT {
        return Err(NameError::TooLong);
    }
    if let Some(c) = raw
        .chars()
        .find(|c| !(c.is_ascii_alphanumeric() || *c == '-' || *c == '_'))
    {
        return Err(NameError::BadChar(c));
    }
    // A leading dash would read as an option flag on the command line.
    if raw.starts_with('-') {
        return Err(NameError::BadChar('-'));
    }
    Ok(raw.to_ascii_lowercase())
}

/// Organization identity as registered with the membership service.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OrgId(String);

impl OrgId {
    pub fn new(raw: &str) -> Result<Self, NameError> {
        normalize_segment(raw).map(OrgId)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for OrgId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for OrgId {
    type Err = NameError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OrgId::new(s)
    }
}

impl Serialize for OrgId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

/// A bare (unqualified) asset name.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Name(String);

impl Name {
    pub fn new(raw: &str) -> Result<Self, NameError> {
        normalize_segment(raw).map(Name)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Name {
    type Err = NameError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Name::new(s)
    }
}

impl Serialize for Name {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

/// `<org>.<name>`: the globally unique reference to an endpoint or group.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QualifiedName {
    pub org: OrgId,
    pub name: Name,
}

impl QualifiedName {
    pub fn new(org: OrgId, name: Name) -> Self {
        QualifiedName { org, name }
    }

    pub fn parse(raw: &str) -> Result<Self, NameError> {
        let (org, name) = raw
            .split_once('.')
            .ok_or_else(|| NameError::NotQualified(raw.to_owned()))?;
        if name.contains('.') {
            return Err(NameError::NotQualified(raw.to_owned()));
        }
        Ok(QualifiedName {
            org: OrgId::new(org)?,
            name: Name::new(name)?,
        })
    }
}

impl fmt::Display for QualifiedName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.org, self.name)
    }
}

impl FromStr for QualifiedName {
    type Err = NameError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        QualifiedName::parse(s)
    }
}

impl Serialize for QualifiedName {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A reference as written by an administrator: either already qualified or
/// a bare name to be resolved against the issuing organization.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum NameRef {
    Bare(Name),
    Qualified(QualifiedName),
}

impl NameRef {
    pub fn parse(raw: &str) -> Result<Self, NameError> {
        if raw.contains('.') {
            QualifiedName::parse(raw).map(NameRef::Qualified)
        } else {
            Name::new(raw).map(NameRef::Bare)
        }
    }

    /// Qualify a bare name with `org`; qualified names pass through.
    pub fn qualify(&self, org: &OrgId) -> QualifiedName {
        match self {
            NameRef::Bare(n) => QualifiedName::new(org.clone(), n.clone()),
            NameRef::Qualified(q) => q.clone(),
        }
    }
}

impl fmt::Display for NameRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NameRef::Bare(n) => n.fmt(f),
            NameRef::Qualified(q) => q.fmt(f),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qualified_names_lowercase() {
        let q = QualifiedName::parse("OrgA.Alice").unwrap();
        assert_eq!(q.to_string(), "orga.alice");
        assert_eq!(q.org.as_str(), "orga");
    }

    #[test]
    fn rejects_bad_qualified_forms() {
        assert!(matches!(QualifiedName::parse("alice"), Err(NameError::NotQualified(_))));
        assert_eq!(QualifiedName::parse(".alice"), Err(NameError::Empty));
        assert_eq!(QualifiedName::parse("orga."), Err(NameError::Empty));
        assert!(QualifiedName::parse("a.b.c").is_err());
        assert_eq!(Name::new("al ice"), Err(NameError::BadChar(' ')));
        assert_eq!(Name::new(&"x".repeat(65)), Err(NameError::TooLong));
    }

    #[test]
    fn bare_refs_take_issuer_org() {
        let org = OrgId::new("orgb").unwrap();
        assert_eq!(NameRef::parse("internalDB").unwrap().qualify(&org).to_string(), "orgb.internaldb");
        assert_eq!(NameRef::parse("orga.alice").unwrap().qualify(&org).to_string(), "orga.alice");
    }
}
