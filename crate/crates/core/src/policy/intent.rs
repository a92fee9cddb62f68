use std::fmt;

use crate::crypto::PublicKey;
use crate::eid::Eid;
use crate::ledger::{Action, AssetKind};
use crate::names::{Name, NameRef, QualifiedName};

use super::duration::DurationLiteral;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verb {
    CreateMember,
    CreateGroup,
    CreateResource,
    CreatePolicyRule,
    Delete(AssetKind),
    Query(AssetKind),
}

impl Verb {
    pub(crate) fn kind_word(kind: AssetKind) -> &'static str {
        match kind {
            AssetKind::User => "member",
            AssetKind::Department => "group",
            AssetKind::Resource => "resource",
            AssetKind::Policy => "policy-rule",
        }
    }

    /// Whether the subject name may be omitted (policy rules addressed by
    /// their `--src`/`--dst` pair).
    pub fn subject_optional(self) -> bool {
        matches!(self, Verb::Delete(AssetKind::Policy) | Verb::Query(AssetKind::Policy))
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verb::CreateMember => f.write_str("member-create"),
            Verb::CreateGroup => f.write_str("group-create"),
            Verb::CreateResource => f.write_str("resource-create"),
            Verb::CreatePolicyRule => f.write_str("policy-rule-create"),
            Verb::Delete(k) => write!(f, "{}-delete", Self::kind_word(*k)),
            Verb::Query(AssetKind::Policy) => f.write_str("show policy"),
            Verb::Query(k) => write!(f, "show {}", Self::kind_word(*k)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OptionKey {
    Add,
    Src,
    Dst,
    Actions,
    Timeout,
    Ip,
    Pubkey,
    Dept,
}

impl OptionKey {
    pub const ALL: [OptionKey; 8] = [
        OptionKey::Add,
        OptionKey::Src,
        OptionKey::Dst,
        OptionKey::Actions,
        OptionKey::Timeout,
        OptionKey::Ip,
        OptionKey::Pubkey,
        OptionKey::Dept,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OptionKey::Add => "add",
            OptionKey::Src => "src",
            OptionKey::Dst => "dst",
            OptionKey::Actions => "actions",
            OptionKey::Timeout => "timeout",
            OptionKey::Ip => "ip",
            OptionKey::Pubkey => "pubkey",
            OptionKey::Dept => "dept",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn allowed_for(self, verb: Verb) -> bool {
        use OptionKey::*;
        match verb {
            Verb::CreateMember => matches!(self, Ip | Pubkey | Dept),
            Verb::CreateResource => matches!(self, Ip),
            Verb::CreateGroup => matches!(self, Add | Timeout),
            Verb::CreatePolicyRule => matches!(self, Src | Dst | Actions | Timeout),
            Verb::Delete(AssetKind::Policy) | Verb::Query(AssetKind::Policy) => matches!(self, Src | Dst),
            Verb::Delete(_) | Verb::Query(_) => false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OptionSet {
    pub add_members: Vec<QualifiedName>,
    pub src: Option<NameRef>,
    pub dst: Option<NameRef>,
    pub actions: Option<Action>,
    /// Seconds, strictly positive.
    pub timeout: Option<u64>,
    pub ip: Option<Eid>,
    pub pubkey: Option<PublicKey>,
    pub dept: Option<Name>,
}

impl OptionSet {
    pub fn is_empty(&self) -> bool {
        *self == OptionSet::default()
    }
}

/// A validated administrative command.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Intent {
    pub verb: Verb,
    /// Always present except for policy rules addressed by `--src`/`--dst`.
    pub subject: Option<NameRef>,
    pub options: OptionSet,
}

impl Intent {
    pub fn is_query(&self) -> bool {
        matches!(self.verb, Verb::Query(_))
    }
}

/// Canonical command text; parsing it yields the same intent.
impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "gbp {}", self.verb)?;
        if let Some(s) = &self.subject {
            write!(f, " {s}")?;
        }
        let o = &self.options;
        if !o.add_members.is_empty() {
            let list: Vec<_> = o.add_members.iter().map(ToString::to_string).collect();
            write!(f, " --add:{}", list.join(","))?;
        }
        if let Some(v) = &o.src {
            write!(f, " --src:{v}")?;
        }
        if let Some(v) = &o.dst {
            write!(f, " --dst:{v}")?;
        }
        if let Some(v) = o.actions {
            write!(f, " --actions {v}")?;
        }
        if let Some(secs) = o.timeout {
            let lit = DurationLiteral::from_seconds(secs).expect("timeout is positive");
            write!(f, " --timeout {lit}")?;
        }
        if let Some(v) = o.ip {
            write!(f, " --ip:{v}")?;
        }
        if let Some(v) = &o.pubkey {
            write!(f, " --pubkey:{}", v.to_hex())?;
        }
        if let Some(v) = &o.dept {
            write!(f, " --dept:{v}")?;
        }
        Ok(())
    }
}
