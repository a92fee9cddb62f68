use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use thiserror::Error;

/// Endpoint identifier: a non-zero IPv4 address naming a user or resource.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Eid(u32);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EidError {
    #[error("endpoint identifier must be non-zero")]
    Zero,
    #[error("not a dotted-quad address: {0:?}")]
    Syntax(String),
}

impl Eid {
    pub fn new(raw: u32) -> Result<Self, EidError> {
        if raw == 0 {
            Err(EidError::Zero)
        } else {
            Ok(Eid(raw))
        }
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn octets(self) -> [u8; 4] {
        self.0.to_be_bytes()
    }
}

impl fmt::Display for Eid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Ipv4Addr::from(self.0).fmt(f)
    }
}

impl FromStr for Eid {
    type Err = EidError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let addr: Ipv4Addr = s.parse().map_err(|_| EidError::Syntax(s.to_owned()))?;
        Eid::new(u32::from(addr))
    }
}

impl From<Eid> for Ipv4Addr {
    fn from(e: Eid) -> Self {
        Ipv4Addr::from(e.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_rejected() {
        assert_eq!(Eid::new(0), Err(EidError::Zero));
        assert_eq!("0.0.0.0".parse::<Eid>(), Err(EidError::Zero));
        assert!("10.0.0".parse::<Eid>().is_err());
    }

    proptest! {
        #[test]
        fn dotted_quad_round_trips(raw in 1u32..) {
            let eid = Eid::new(raw).unwrap();
            prop_assert_eq!(eid.to_string().parse::<Eid>().unwrap(), eid);
        }
    }
}
