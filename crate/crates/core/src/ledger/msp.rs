//! Membership service: which organizations exist and which keys speak for them.

use std::collections::BTreeMap;

use crate::codec::{Canonical, DecodeError, Reader, Writer};
use crate::crypto::{KeyPair, PublicKey, Signature};
use crate::names::OrgId;

use super::LedgerError;

/// An organization's signing identity; held only by that organization's peers.
#[derive(Clone, Debug)]
pub struct OrgIdentity {
    pub id: OrgId,
    keys: KeyPair,
}

impl OrgIdentity {
    pub fn new(id: OrgId, keys: KeyPair) -> Self {
        OrgIdentity { id, keys }
    }

    /// Deterministic identity derived from the org id (tests, scenarios).
    pub fn from_label(id: &str) -> Self {
        let id = OrgId::new(id).expect("valid org label");
        let keys = KeyPair::from_label(&format!("org:{id}"));
        OrgIdentity { id, keys }
    }

    pub fn public_key(&self) -> PublicKey {
        self.keys.public()
    }

    pub fn keys(&self) -> &KeyPair {
        &self.keys
    }

    pub fn sign(&self, msg: &[u8]) -> Signature {
        self.keys.sign(msg)
    }
}

/// Registry of organizations and their public keys.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Msp {
    orgs: BTreeMap<OrgId, PublicKey>,
}

impl Msp {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_org(&mut self, id: OrgId, public_key: &[u8]) -> Result<(), LedgerError> {
        if self.orgs.contains_key(&id) {
            return Err(LedgerError::DuplicateOrg(id));
        }
        let key = PublicKey::from_bytes(public_key).map_err(|_| LedgerError::InvalidKey(id.clone()))?;
        self.orgs.insert(id, key);
        Ok(())
    }

    pub fn register_identity(&mut self, identity: &OrgIdentity) -> Result<(), LedgerError> {
        self.register_org(identity.id.clone(), &identity.public_key().to_bytes())
    }

    pub fn public_key(&self, id: &OrgId) -> Option<&PublicKey> {
        self.orgs.get(id)
    }

    pub fn contains(&self, id: &OrgId) -> bool {
        self.orgs.contains_key(id)
    }

    pub fn orgs(&self) -> impl Iterator<Item = &OrgId> {
        self.orgs.keys()
    }

    pub fn len(&self) -> usize {
        self.orgs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orgs.is_empty()
    }
}

impl Canonical for Msp {
    fn encode(&self, w: &mut Writer) {
        let entries: Vec<_> = self.orgs.iter().collect();
        w.seq(&entries, |w, (id, key)| {
            w.str(id.as_str()).fixed(&key.to_bytes());
        });
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let mut msp = Msp::new();
        for (id, key) in r.seq("msp", |r| {
            let id = OrgId::new(&r.string("org id")?).map_err(|_| DecodeError::Invalid("org id"))?;
            Ok((id, r.array::<32>("org key")?))
        })? {
            msp.register_org(id, &key).map_err(|_| DecodeError::Invalid("msp entry"))?;
        }
        Ok(msp)
    }
}
