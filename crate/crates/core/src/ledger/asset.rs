//! Ledger-resident assets and the state-key scheme.
//!
//! Keys: `user:<org>.<name>`, `dept:<org>.<name>`, `res:<org>.<name>` and the
//! composite `policy:<src>|<dst>`.

use std::fmt;

use serde::Serialize;

use crate::clock::Timestamp;
use crate::codec::{Canonical, DecodeError, Reader, Writer};
use crate::crypto::PUBLIC_KEY_LEN;
use crate::eid::Eid;
use crate::names::{Name, OrgId, QualifiedName};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AssetKind {
    User,
    Department,
    Resource,
    Policy,
}

impl AssetKind {
    pub const ALL: [AssetKind; 4] = [AssetKind::User, AssetKind::Department, AssetKind::Resource, AssetKind::Policy];
    /// Kinds addressed by a single qualified name.
    pub const NAMED: [AssetKind; 3] = [AssetKind::User, AssetKind::Department, AssetKind::Resource];

    pub fn prefix(self) -> &'static str {
        match self {
            AssetKind::User => "user",
            AssetKind::Department => "dept",
            AssetKind::Resource => "res",
            AssetKind::Policy => "policy",
        }
    }

    fn tag(self) -> u8 {
        match self {
            AssetKind::User => 1,
            AssetKind::Department => 2,
            AssetKind::Resource => 3,
            AssetKind::Policy => 4,
        }
    }
}

impl fmt::Display for AssetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.prefix())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct StateKey(String);

impl StateKey {
    pub fn named(kind: AssetKind, name: &QualifiedName) -> Self {
        debug_assert!(kind != AssetKind::Policy);
        StateKey(format!("{}:{}", kind.prefix(), name))
    }

    pub fn user(name: &QualifiedName) -> Self {
        Self::named(AssetKind::User, name)
    }

    pub fn department(name: &QualifiedName) -> Self {
        Self::named(AssetKind::Department, name)
    }

    pub fn resource(name: &QualifiedName) -> Self {
        Self::named(AssetKind::Resource, name)
    }

    pub fn policy(src: &QualifiedName, dst: &QualifiedName) -> Self {
        StateKey(format!("policy:{src}|{dst}"))
    }

    /// Wrap a raw key string; only the codec and tests need this.
    pub fn from_raw(raw: String) -> Self {
        StateKey(raw)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn kind(&self) -> Option<AssetKind> {
        let (prefix, _) = self.0.split_once(':')?;
        AssetKind::ALL.into_iter().find(|k| k.prefix() == prefix)
    }
}

impl fmt::Display for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Allow,
    Deny,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Allow => "allow",
            Action::Deny => "deny",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct User {
    pub name: QualifiedName,
    #[serde(serialize_with = "ser_opt_hex")]
    pub public_key: Option<[u8; PUBLIC_KEY_LEN]>,
    #[serde(serialize_with = "ser_opt_display")]
    pub ip: Option<Eid>,
    pub department: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Member {
    pub name: QualifiedName,
    pub expiry: Option<u64>,
}

impl Member {
    pub fn active_at(&self, now: Timestamp) -> bool {
        self.expiry.map_or(true, |e| now.0 < e)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Department {
    pub name: QualifiedName,
    pub members: Vec<Member>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Resource {
    pub name: QualifiedName,
    #[serde(serialize_with = "ser_opt_display")]
    pub ip: Option<Eid>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Policy {
    pub label: Name,
    pub src: QualifiedName,
    pub dst: QualifiedName,
    pub action: Action,
    pub valid_from: Option<u64>,
    pub expiry: Option<u64>,
}

impl Policy {
    pub fn in_force_at(&self, now: Timestamp) -> bool {
        self.valid_from.map_or(true, |v| now.0 >= v) && self.expiry.map_or(true, |e| now.0 < e)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AssetBody {
    User(User),
    Department(Department),
    Resource(Resource),
    Policy(Policy),
}

/// A state value: body plus the organization that created it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Asset {
    pub owner: OrgId,
    pub created: u64,
    #[serde(flatten)]
    pub body: AssetBody,
}

impl Asset {
    pub fn kind(&self) -> AssetKind {
        match self.body {
            AssetBody::User(_) => AssetKind::User,
            AssetBody::Department(_) => AssetKind::Department,
            AssetBody::Resource(_) => AssetKind::Resource,
            AssetBody::Policy(_) => AssetKind::Policy,
        }
    }

    pub fn key(&self) -> StateKey {
        match &self.body {
            AssetBody::User(u) => StateKey::user(&u.name),
            AssetBody::Department(d) => StateKey::department(&d.name),
            AssetBody::Resource(r) => StateKey::resource(&r.name),
            AssetBody::Policy(p) => StateKey::policy(&p.src, &p.dst),
        }
    }

    /// Organization named inside the body; `None` for policies, which may
    /// legitimately reference endpoints of other organizations.
    pub fn body_org(&self) -> Option<&OrgId> {
        match &self.body {
            AssetBody::User(u) => Some(&u.name.org),
            AssetBody::Department(d) => Some(&d.name.org),
            AssetBody::Resource(r) => Some(&r.name.org),
            AssetBody::Policy(_) => None,
        }
    }

    pub fn as_user(&self) -> Option<&User> {
        match &self.body {
            AssetBody::User(u) => Some(u),
            _ => None,
        }
    }

    pub fn as_department(&self) -> Option<&Department> {
        match &self.body {
            AssetBody::Department(d) => Some(d),
            _ => None,
        }
    }

    pub fn as_policy(&self) -> Option<&Policy> {
        match &self.body {
            AssetBody::Policy(p) => Some(p),
            _ => None,
        }
    }

    pub fn endpoint_ip(&self) -> Option<Eid> {
        match &self.body {
            AssetBody::User(u) => u.ip,
            AssetBody::Resource(r) => r.ip,
            _ => None,
        }
    }
}

fn ser_opt_hex<S: serde::Serializer>(v: &Option<[u8; PUBLIC_KEY_LEN]>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(k) => s.serialize_str(&hex::encode(k)),
        None => s.serialize_none(),
    }
}

fn ser_opt_display<S: serde::Serializer, T: fmt::Display>(v: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) => s.collect_str(x),
        None => s.serialize_none(),
    }
}

pub(crate) fn put_qname(w: &mut Writer, q: &QualifiedName) {
    w.str(q.org.as_str()).str(q.name.as_str());
}

pub(crate) fn get_qname(r: &mut Reader<'_>) -> Result<QualifiedName, DecodeError> {
    let org = OrgId::new(&r.string("org")?).map_err(|_| DecodeError::Invalid("org id"))?;
    let name = Name::new(&r.string("name")?).map_err(|_| DecodeError::Invalid("name"))?;
    Ok(QualifiedName::new(org, name))
}

fn put_opt_u64(w: &mut Writer, v: Option<u64>) {
    w.option(v.as_ref(), |w, x| {
        w.u64(*x);
    });
}

fn put_opt_eid(w: &mut Writer, v: Option<Eid>) {
    w.option(v.as_ref(), |w, e| {
        w.u32(e.get());
    });
}

fn get_opt_eid(r: &mut Reader<'_>) -> Result<Option<Eid>, DecodeError> {
    r.option("ip", |r| Eid::new(r.u32("ip")?).map_err(|_| DecodeError::Invalid("ip")))
}

impl Canonical for Asset {
    fn encode(&self, w: &mut Writer) {
        w.u8(self.kind().tag()).str(self.owner.as_str()).u64(self.created);
        match &self.body {
            AssetBody::User(u) => {
                put_qname(w, &u.name);
                w.option(u.public_key.as_ref(), |w, k| {
                    w.fixed(k);
                });
                put_opt_eid(w, u.ip);
                w.option(u.department.as_ref(), |w, d| {
                    w.str(d);
                });
            }
            AssetBody::Department(d) => {
                put_qname(w, &d.name);
                w.seq(&d.members, |w, m| {
                    put_qname(w, &m.name);
                    put_opt_u64(w, m.expiry);
                });
            }
            AssetBody::Resource(res) => {
                put_qname(w, &res.name);
                put_opt_eid(w, res.ip);
            }
            AssetBody::Policy(p) => {
                w.str(p.label.as_str());
                put_qname(w, &p.src);
                put_qname(w, &p.dst);
                w.u8(match p.action {
                    Action::Allow => 1,
                    Action::Deny => 2,
                });
                put_opt_u64(w, p.valid_from);
                put_opt_u64(w, p.expiry);
            }
        }
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let tag = r.u8("asset kind")?;
        let owner = OrgId::new(&r.string("owner")?).map_err(|_| DecodeError::Invalid("owner"))?;
        let created = r.u64("created")?;
        let body = match tag {
            1 => AssetBody::User(User {
                name: get_qname(r)?,
                public_key: r.option("public key", |r| r.array::<PUBLIC_KEY_LEN>("public key"))?,
                ip: get_opt_eid(r)?,
                department: r.option("department", |r| r.string("department"))?,
            }),
            2 => AssetBody::Department(Department {
                name: get_qname(r)?,
                members: r.seq("members", |r| {
                    Ok(Member {
                        name: get_qname(r)?,
                        expiry: r.option("expiry", |r| r.u64("expiry"))?,
                    })
                })?,
            }),
            3 => AssetBody::Resource(Resource {
                name: get_qname(r)?,
                ip: get_opt_eid(r)?,
            }),
            4 => AssetBody::Policy(Policy {
                label: Name::new(&r.string("label")?).map_err(|_| DecodeError::Invalid("label"))?,
                src: get_qname(r)?,
                dst: get_qname(r)?,
                action: match r.u8("action")? {
                    1 => Action::Allow,
                    2 => Action::Deny,
                    tag => return Err(DecodeError::UnknownTag { what: "action", tag }),
                },
                valid_from: r.option("valid from", |r| r.u64("valid from"))?,
                expiry: r.option("expiry", |r| r.u64("expiry"))?,
            }),
            tag => return Err(DecodeError::UnknownTag { what: "asset kind", tag }),
        };
        Ok(Asset { owner, created, body })
    }
}
