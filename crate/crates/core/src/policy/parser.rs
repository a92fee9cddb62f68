//! Line-oriented command grammar:
//!
//! ```text
//! command := "gbp" verb [name] option*
//! verb    := member-create | group-create | resource-create | policy-rule-create
//!          | member-delete | group-delete | resource-delete | policy-rule-delete
//!          | show (member | group | resource | policy)
//! option  := "--" key ":" value | "--" key " " value
//! ```

use std::collections::BTreeSet;

use thiserror::Error;

use crate::crypto::PublicKey;
use crate::ledger::{Action, AssetKind};
use crate::names::{Name, NameError, NameRef, QualifiedName};

use super::duration::parse_duration;
use super::intent::{Intent, OptionKey, OptionSet, Verb};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("unknown command {0:?}")]
    UnknownVerb(String),
    #[error("malformed value for --{option}: {reason}")]
    MalformedOption { option: String, reason: String },
    #[error("option --{option} is not allowed for {verb}")]
    IllegalOption { option: String, verb: String },
    #[error("missing required {0}")]
    MissingRequired(&'static str),
    #[error("invalid name: {0}")]
    InvalidSubject(NameError),
    #[error("unexpected argument {0:?}")]
    UnexpectedToken(String),
    #[error("command is not valid utf-8")]
    InvalidUtf8,
}

fn malformed(option: OptionKey, reason: impl ToString) -> ParseError {
    ParseError::MalformedOption {
        option: option.name().to_owned(),
        reason: reason.to_string(),
    }
}

fn kind_from_word(word: &str) -> Option<AssetKind> {
    match word {
        "member" => Some(AssetKind::User),
        "group" => Some(AssetKind::Department),
        "resource" => Some(AssetKind::Resource),
        "policy" | "policy-rule" => Some(AssetKind::Policy),
        _ => None,
    }
}

fn verb_from_word(word: &str) -> Option<Verb> {
    Some(match word {
        "member-create" => Verb::CreateMember,
        "group-create" => Verb::CreateGroup,
        "resource-create" => Verb::CreateResource,
        "policy-rule-create" => Verb::CreatePolicyRule,
        w => {
            let kind = kind_from_word(w.strip_suffix("-delete")?)?;
            // `policy-delete` is not a verb; the rule form is `policy-rule-delete`.
            if kind == AssetKind::Policy && w != "policy-rule-delete" {
                return None;
            }
            Verb::Delete(kind)
        }
    })
}

/// Parse arbitrary bytes; anything that is not UTF-8 is a typed error.
pub fn parse_command_bytes(line: &[u8]) -> Result<Intent, ParseError> {
    std::str::from_utf8(line)
        .map_err(|_| ParseError::InvalidUtf8)
        .and_then(parse_command)
}

pub fn parse_command(line: &str) -> Result<Intent, ParseError> {
    let mut tokens = line.split_whitespace().peekable();
    match tokens.next() {
        Some(p) if p.eq_ignore_ascii_case("gbp") => {}
        other => return Err(ParseError::UnknownVerb(other.unwrap_or("").to_owned())),
    }
    let word = tokens.next().unwrap_or("").to_ascii_lowercase();
    let verb = if word == "show" {
        let what = tokens.next().unwrap_or("").to_ascii_lowercase();
        match kind_from_word(&what) {
            Some(kind) => Verb::Query(kind),
            None => return Err(ParseError::UnknownVerb(format!("show {what}").trim_end().to_owned())),
        }
    } else {
        verb_from_word(&word).ok_or_else(|| ParseError::UnknownVerb(word.clone()))?
    };

    let subject = match tokens.peek() {
        Some(t) if !t.starts_with("--") => {
            let t = tokens.next().expect("peeked");
            Some(NameRef::parse(t).map_err(ParseError::InvalidSubject)?)
        }
        _ => None,
    };

    let mut options = OptionSet::default();
    let mut seen = BTreeSet::new();
    while let Some(tok) = tokens.next() {
        let Some(body) = tok.strip_prefix("--") else {
            return Err(ParseError::UnexpectedToken(tok.to_owned()));
        };
        let (raw_key, inline) = match body.split_once(':') {
            Some((k, v)) => (k, Some(v)),
            None => (body, None),
        };
        let key_name = raw_key.to_ascii_lowercase();
        let key = OptionKey::from_name(&key_name).filter(|k| k.allowed_for(verb)).ok_or_else(|| {
            ParseError::IllegalOption {
                option: key_name.clone(),
                verb: verb.to_string(),
            }
        })?;
        let value = match inline {
            Some(v) => v,
            None => match tokens.peek() {
                Some(v) if !v.starts_with("--") => tokens.next().expect("peeked"),
                _ => return Err(malformed(key, "missing value")),
            },
        };
        if value.is_empty() {
            return Err(malformed(key, "empty value"));
        }
        if !seen.insert(key) {
            return Err(malformed(key, "option given more than once"));
        }
        apply_option(&mut options, key, value)?;
    }

    let intent = Intent { verb, subject, options };
    check_required(&intent)?;
    Ok(intent)
}

fn apply_option(o: &mut OptionSet, key: OptionKey, value: &str) -> Result<(), ParseError> {
    match key {
        OptionKey::Add => {
            for item in value.split(',') {
                let q = QualifiedName::parse(item).map_err(|e| malformed(key, e))?;
                if o.add_members.contains(&q) {
                    return Err(malformed(key, format!("{q} listed twice")));
                }
                o.add_members.push(q);
            }
        }
        OptionKey::Src => o.src = Some(NameRef::parse(value).map_err(|e| malformed(key, e))?),
        OptionKey::Dst => o.dst = Some(NameRef::parse(value).map_err(|e| malformed(key, e))?),
        OptionKey::Actions => {
            o.actions = Some(match value.to_ascii_lowercase().as_str() {
                "allow" => Action::Allow,
                "deny" => Action::Deny,
                _ => return Err(malformed(key, "expected allow or deny")),
            })
        }
        OptionKey::Timeout => o.timeout = Some(parse_duration(value).map_err(|e| malformed(key, e))?.seconds()),
        OptionKey::Ip => o.ip = Some(value.parse().map_err(|e| malformed(key, e))?),
        OptionKey::Pubkey => o.pubkey = Some(PublicKey::from_hex(value).map_err(|e| malformed(key, e))?),
        OptionKey::Dept => o.dept = Some(Name::new(value).map_err(|e| malformed(key, e))?),
    }
    Ok(())
}

fn check_required(intent: &Intent) -> Result<(), ParseError> {
    if intent.subject.is_none() && !intent.verb.subject_optional() {
        return Err(ParseError::MissingRequired("name"));
    }
    let needs_pair = matches!(
        intent.verb,
        Verb::CreatePolicyRule | Verb::Delete(AssetKind::Policy) | Verb::Query(AssetKind::Policy)
    );
    if needs_pair {
        if intent.options.src.is_none() {
            return Err(ParseError::MissingRequired("--src"));
        }
        if intent.options.dst.is_none() {
            return Err(ParseError::MissingRequired("--dst"));
        }
    }
    // A rule label names the rule; it is never org-qualified.
    if intent.verb == Verb::CreatePolicyRule && matches!(intent.subject, Some(NameRef::Qualified(_))) {
        return Err(ParseError::InvalidSubject(NameError::BadChar('.')));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> QualifiedName {
        QualifiedName::parse(s).unwrap()
    }

    fn bare(s: &str) -> Option<NameRef> {
        Some(NameRef::Bare(Name::new(s).unwrap()))
    }

    #[test]
    fn member_create() {
        let i = parse_command("gbp member-create alice").unwrap();
        assert_eq!(
            i,
            Intent {
                verb: Verb::CreateMember,
                subject: bare("alice"),
                options: OptionSet::default()
            }
        );
    }

    #[test]
    fn group_create_with_timeout() {
        let i = parse_command("gbp group-create dbaccess --add:orga.alice --timeout 1w").unwrap();
        assert_eq!(i.verb, Verb::CreateGroup);
        assert_eq!(i.subject, bare("dbaccess"));
        assert_eq!(i.options.add_members, vec![q("orga.alice")]);
        assert_eq!(i.options.timeout, Some(604_800));
    }

    #[test]
    fn policy_rule_create() {
        let i = parse_command("gbp policy-rule-create external-human-res --src:dbaccess --dst:internalDB  --actions allow")
            .unwrap();
        assert_eq!(i.verb, Verb::CreatePolicyRule);
        assert_eq!(i.subject, bare("external-human-res"));
        assert_eq!(i.options.src, bare("dbaccess"));
        assert_eq!(i.options.dst, bare("internaldb"));
        assert_eq!(i.options.actions, Some(Action::Allow));
    }

    #[test]
    fn missing_subject() {
        assert_eq!(parse_command("gbp member-create"), Err(ParseError::MissingRequired("name")));
    }

    #[test]
    fn both_option_forms_accepted() {
        let a = parse_command("gbp policy-rule-create r --src orga.x --dst:orgb.y --actions:deny").unwrap();
        let b = parse_command("gbp policy-rule-create r --src:orga.x --dst orgb.y --actions DENY").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn error_taxonomy() {
        assert_eq!(parse_command("gbp member-explode x"), Err(ParseError::UnknownVerb("member-explode".into())));
        assert_eq!(parse_command("neutron member-create x"), Err(ParseError::UnknownVerb("neutron".into())));
        assert_eq!(parse_command(""), Err(ParseError::UnknownVerb("".into())));
        assert!(matches!(
            parse_command("gbp member-create x --actions allow"),
            Err(ParseError::IllegalOption { .. })
        ));
        assert!(matches!(parse_command("gbp member-create x --bogus 1"), Err(ParseError::IllegalOption { .. })));
        assert!(matches!(
            parse_command("gbp group-create g --timeout 0d"),
            Err(ParseError::MalformedOption { .. })
        ));
        assert!(matches!(
            parse_command("gbp group-create g --add:alice"),
            Err(ParseError::MalformedOption { .. })
        ));
        assert!(matches!(
            parse_command("gbp group-create g --timeout 1w --timeout 2w"),
            Err(ParseError::MalformedOption { .. })
        ));
        assert!(matches!(parse_command("gbp group-create g --timeout"), Err(ParseError::MalformedOption { .. })));
        assert_eq!(
            parse_command("gbp policy-rule-create r --src:a"),
            Err(ParseError::MissingRequired("--dst"))
        );
        assert_eq!(parse_command("gbp policy-rule-create r --dst:a"), Err(ParseError::MissingRequired("--src")));
        assert!(matches!(parse_command("gbp member-create a b"), Err(ParseError::UnexpectedToken(_))));
        assert!(matches!(parse_command("gbp member-create a!"), Err(ParseError::InvalidSubject(_))));
        assert_eq!(parse_command_bytes(&[0x67, 0xff]), Err(ParseError::InvalidUtf8));
    }

    #[test]
    fn deletes_and_shows() {
        let i = parse_command("gbp member-delete orga.alice").unwrap();
        assert_eq!(i.verb, Verb::Delete(AssetKind::User));
        let i = parse_command("gbp show policy --src orga.dbaccess --dst orgb.internaldb").unwrap();
        assert_eq!(i.verb, Verb::Query(AssetKind::Policy));
        assert_eq!(i.subject, None);
        assert_eq!(parse_command("gbp show member"), Err(ParseError::MissingRequired("name")));
        assert!(matches!(parse_command("gbp show widget x"), Err(ParseError::UnknownVerb(_))));
        assert!(matches!(parse_command("gbp policy-delete x"), Err(ParseError::UnknownVerb(_))));
        let i = parse_command("gbp policy-rule-delete --src:a.b --dst:c.d").unwrap();
        assert_eq!(i.verb, Verb::Delete(AssetKind::Policy));
    }

    #[test]
    fn names_are_lowercased() {
        let i = parse_command("GBP Member-Create ALICE --IP 10.0.0.2").unwrap();
        assert_eq!(i.subject, bare("alice"));
        assert_eq!(i.options.ip, Some("10.0.0.2".parse().unwrap()));
    }
}
