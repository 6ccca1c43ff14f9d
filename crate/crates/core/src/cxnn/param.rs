use std::fmt;

use super::array::CxArray;

/// Whether a parameter is kept across systems or refit per system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Shared,
    Adaptive,
}

impl Role {
    pub fn code(self) -> u8 {
        match self {
            Role::Shared => 0,
            Role::Adaptive => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Role::Shared),
            1 => Some(Role::Adaptive),
            _ => None,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Shared => "shared",
            Role::Adaptive => "adaptive",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub role: Role,
    pub values: CxArray,
    pub gradient: CxArray,
}

impl Parameter {
    pub fn new(name: impl Into<String>, role: Role, values: CxArray) -> Self {
        let gradient = values.zeros_like();
        Self {
            name: name.into(),
            role,
            values,
            gradient,
        }
    }

    /// Number of complex weights.
    pub fn count(&self) -> usize {
        self.values.len()
    }
}
