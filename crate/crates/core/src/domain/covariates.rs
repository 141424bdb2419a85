use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on `|X| * |W|`.
pub const MAX_COVARIATE_CELLS: u64 = 1_000_000;

/// A point of a finite covariate space, stored as its flat index in the
/// row-major product of the role domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CovariateValue(pub u32);

/// One categorical covariate column and its interned level names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateRole {
    pub name: String,
    pub levels: Vec<String>,
}

/// A finite covariate domain: the product of one or more categorical roles.
/// With no roles the space holds a single unit value.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateSpace {
    roles: Vec<CovariateRole>,
    lookup: Vec<HashMap<String, u32>>,
    size: u64,
}

impl CovariateSpace {
    pub fn new(roles: Vec<CovariateRole>) -> Result<Self> {
        let mut size: u64 = 1;
        let mut lookup = Vec::with_capacity(roles.len());
        for (i, role) in roles.iter().enumerate() {
            if role.levels.is_empty() {
                return Err(Error::InvalidConfig(format!("covariate {} has no levels", role.name)));
            }
            if roles[..i].iter().any(|r| r.name == role.name) {
                return Err(Error::InvalidConfig(format!("duplicate covariate name {}", role.name)));
            }
            let mut map = HashMap::with_capacity(role.levels.len());
            for (code, level) in role.levels.iter().enumerate() {
                if map.insert(level.clone(), code as u32).is_some() {
                    return Err(Error::InvalidConfig(format!(
                        "duplicate level {level} in covariate {}",
                        role.name
                    )));
                }
            }
            lookup.push(map);
            size = size.saturating_mul(role.levels.len() as u64);
        }
        if size > MAX_COVARIATE_CELLS {
            return Err(Error::TooManyCells {
                cells: size,
                cap: MAX_COVARIATE_CELLS,
            });
        }
        Ok(Self { roles, lookup, size })
    }

    /// The space with no roles (a single unit value).
    pub fn unit() -> Self {
        Self {
            roles: Vec::new(),
            lookup: Vec::new(),
            size: 1,
        }
    }

    /// Convenience constructor for a single role.
    pub fn single<S: Into<String>>(name: S, levels: &[&str]) -> Result<Self> {
        Self::new(vec![CovariateRole {
            name: name.into(),
            levels: levels.iter().map(|s| s.to_string()).collect(),
        }])
    }

    pub fn roles(&self) -> &[CovariateRole] {
        &self.roles
    }

    pub fn is_unit(&self) -> bool {
        self.roles.is_empty()
    }

    pub fn size(&self) -> u32 {
        self.size as u32
    }

    pub fn contains(&self, v: CovariateValue) -> bool {
        u64::from(v.0) < self.size
    }

    pub fn values(&self) -> impl Iterator<Item = CovariateValue> {
        (0..self.size()).map(CovariateValue)
    }

    pub fn encode(&self, codes: &[u32]) -> Result<CovariateValue> {
        if codes.len() != self.roles.len() {
            return Err(Error::CovariateOutOfDomain(format!(
                "expected {} codes, got {}",
                self.roles.len(),
                codes.len()
            )));
        }
        let mut flat: u64 = 0;
        for (role, &code) in self.roles.iter().zip(codes) {
            if code as usize >= role.levels.len() {
                return Err(Error::CovariateOutOfDomain(role.name.clone()));
            }
            flat = flat * role.levels.len() as u64 + u64::from(code);
        }
        Ok(CovariateValue(flat as u32))
    }

    pub fn decode(&self, v: CovariateValue) -> Vec<u32> {
        let mut rest = v.0;
        let mut codes = vec![0; self.roles.len()];
        for (slot, role) in codes.iter_mut().zip(&self.roles).rev() {
            let k = role.levels.len() as u32;
            *slot = rest % k;
            rest /= k;
        }
        codes
    }

    pub fn level_code(&self, role: usize, level: &str) -> Option<u32> {
        self.lookup.get(role)?.get(level).copied()
    }

    /// Parses `name=level[,name=level...]`; every role must be assigned once.
    /// The empty string denotes the unit value of a role-less space.
    pub fn parse(&self, text: &str) -> Result<CovariateValue> {
        let text = text.trim();
        let mut codes: Vec<Option<u32>> = vec![None; self.roles.len()];
        if !text.is_empty() {
            for pair in text.split(',') {
                let (name, level) = pair
                    .split_once('=')
                    .ok_or_else(|| Error::BadAssignment(text.to_string()))?;
                let (name, level) = (name.trim(), level.trim());
                let role = self
                    .roles
                    .iter()
                    .position(|r| r.name == name)
                    .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
                let code = self
                    .level_code(role, level)
                    .ok_or_else(|| Error::CovariateOutOfDomain(format!("{name}={level}")))?;
                if codes[role].replace(code).is_some() {
                    return Err(Error::BadAssignment(text.to_string()));
                }
            }
        }
        let codes: Option<Vec<u32>> = codes.into_iter().collect();
        let codes = codes.ok_or_else(|| Error::BadAssignment(text.to_string()))?;
        self.encode(&codes)
    }

    /// Inverse of [`CovariateSpace::parse`].
    pub fn label(&self, v: CovariateValue) -> String {
        self.decode(v)
            .iter()
            .zip(&self.roles)
            .map(|(&c, r)| format!("{}={}", r.name, r.levels[c as usize]))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn labeled(&self, v: CovariateValue) -> Labeled<'_> {
        Labeled { space: self, value: v }
    }
}

pub struct Labeled<'a> {
    space: &'a CovariateSpace,
    value: CovariateValue,
}

impl fmt::Display for Labeled<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.space.label(self.value))
    }
}

impl Serialize for CovariateSpace {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.roles.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CovariateSpace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let roles = Vec::<CovariateRole>::deserialize(d)?;
        CovariateSpace::new(roles).map_err(serde::de::Error::custom)
    }
}

/// Checks the joint cap on `|X| * |W|`.
pub fn check_cell_cap(x: &CovariateSpace, w: &CovariateSpace) -> Result<()> {
    let cells = u64::from(x.size()) * u64::from(w.size());
    if cells > MAX_COVARIATE_CELLS {
        return Err(Error::TooManyCells {
            cells,
            cap: MAX_COVARIATE_CELLS,
        });
    }
    Ok(())
}
