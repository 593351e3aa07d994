//! System dimensions, resource mapping and bit-label conventions.
//!
//! Labels: a transmission of all `J` users is identified by a label index
//! `L ∈ [0, M^J)` whose base-`M` digits are the users' symbol indices, user
//! 0 being the most significant digit. User `j` owns bits
//! `[j·log2 M, (j+1)·log2 M)` of the `J·log2 M`-bit vector and the first bit
//! of each slice is the most significant bit of the symbol index, so the bit
//! vector is simply `L` written in binary, MSB first.

use std::fmt;

use crate::error::{check_dim, Error, Result};

/// Power normalization applied to encoder outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum PnlLevel {
    /// Every active codeword element has power `P / N`.
    Element = 1,
    /// Every codeword has squared norm `P`.
    Codeword = 2,
    /// The sum of the users' average codebook powers is `J · P`.
    SumPower = 3,
}

impl PnlLevel {
    pub fn number(self) -> u8 {
        self as u8
    }
}

impl TryFrom<u8> for PnlLevel {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(PnlLevel::Element),
            2 => Ok(PnlLevel::Codeword),
            3 => Ok(PnlLevel::SumPower),
            other => Err(format!("power normalization level must be 1, 2 or 3, got {other}")),
        }
    }
}

impl From<PnlLevel> for u8 {
    fn from(level: PnlLevel) -> u8 {
        level as u8
    }
}

impl fmt::Display for PnlLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Binary `K × J` matrix; column `j` marks the resources user `j` occupies.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MappingMatrix {
    resources: usize,
    users: usize,
    entries: Vec<bool>,
}

impl MappingMatrix {
    pub fn dense(resources: usize, users: usize) -> Self {
        Self {
            resources,
            users,
            entries: vec![true; resources * users],
        }
    }

    /// The standard 4-resource, 6-user sparse pattern with two resources per
    /// user and three users per resource.
    pub fn sparse_4x6() -> Self {
        Self::from_rows(&[
            vec![0, 1, 1, 0, 0, 1],
            vec![1, 0, 1, 0, 1, 0],
            vec![1, 0, 0, 1, 0, 1],
            vec![0, 1, 0, 1, 1, 0],
        ])
        .expect("static pattern is well formed")
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let resources = rows.len();
        if resources == 0 {
            return Err(Error::config("mapping matrix has no rows"));
        }
        let users = rows[0].len();
        let mut entries = Vec::with_capacity(resources * users);
        for row in rows {
            check_dim("mapping matrix row", users, row.len())?;
            for &v in row {
                match v {
                    0 => entries.push(false),
                    1 => entries.push(true),
                    other => {
                        return Err(Error::config(format!("mapping entries must be 0/1, got {other}")))
                    }
                }
            }
        }
        Ok(Self {
            resources,
            users,
            entries,
        })
    }

    pub fn resources(&self) -> usize {
        self.resources
    }

    pub fn users(&self) -> usize {
        self.users
    }

    #[inline]
    pub fn get(&self, resource: usize, user: usize) -> bool {
        self.entries[resource * self.users + user]
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        (0..self.resources)
            .map(|k| (0..self.users).map(|j| self.get(k, j) as u8).collect())
            .collect()
    }

    pub fn active_resources(&self, user: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.resources).filter(move |&k| self.get(k, user))
    }

    pub fn column_weight(&self, user: usize) -> usize {
        self.active_resources(user).count()
    }

    pub fn row_weight(&self, resource: usize) -> usize {
        (0..self.users).filter(|&j| self.get(resource, j)).count()
    }

    pub fn is_dense(&self) -> bool {
        self.entries.iter().all(|&e| e)
    }
}

/// One design instance: dimensions, mapping, power budget and PNL level.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    users: usize,
    resources: usize,
    per_user: usize,
    order: usize,
    mapping: MappingMatrix,
    pnl: PnlLevel,
    power: f64,
}

impl SystemConfig {
    /// Validates the instance. `per_user` (N) is taken from the mapping's
    /// column weight, which must be equal for all users.
    pub fn new(order: usize, mapping: MappingMatrix, pnl: PnlLevel, power: f64) -> Result<Self> {
        let users = mapping.users();
        let resources = mapping.resources();
        if users == 0 || resources == 0 {
            return Err(Error::config("need at least one user and one resource"));
        }
        if order < 2 || !order.is_power_of_two() {
            return Err(Error::config(format!(
                "modulation order must be a power of two >= 2, got {order}"
            )));
        }
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::config(format!("power budget must be positive, got {power}")));
        }
        let per_user = mapping.column_weight(0);
        for j in 0..users {
            let w = mapping.column_weight(j);
            if w != per_user {
                return Err(Error::config(format!(
                    "user {j} occupies {w} resources but user 0 occupies {per_user}"
                )));
            }
        }
        if per_user == 0 {
            return Err(Error::config("users must occupy at least one resource"));
        }
        let bits = users * order.trailing_zeros() as usize;
        if bits > 40 {
            return Err(Error::config(format!("{bits} bits per transmission is too many to label")));
        }
        Ok(Self {
            users,
            resources,
            per_user,
            order,
            mapping,
            pnl,
            power,
        })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn resources(&self) -> usize {
        self.resources
    }

    pub fn per_user(&self) -> usize {
        self.per_user
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn mapping(&self) -> &MappingMatrix {
        &self.mapping
    }

    pub fn pnl(&self) -> PnlLevel {
        self.pnl
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn with_pnl(&self, pnl: PnlLevel) -> Self {
        Self {
            pnl,
            ..self.clone()
        }
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.order.trailing_zeros() as usize
    }

    pub fn total_bits(&self) -> usize {
        self.users * self.bits_per_symbol()
    }

    /// `M^J`, the number of distinct joint transmissions.
    pub fn num_labels(&self) -> usize {
        1usize << self.total_bits()
    }

    /// Information bits carried per complex resource.
    pub fn bits_per_resource(&self) -> f64 {
        self.total_bits() as f64 / self.resources as f64
    }

    pub fn is_overloaded(&self) -> bool {
        self.users > self.resources
    }

    /// Symbol index of `user` inside label `label`.
    #[inline]
    pub fn symbol_of(&self, label: usize, user: usize) -> usize {
        let shift = (self.users - 1 - user) * self.bits_per_symbol();
        (label >> shift) & (self.order - 1)
    }

    pub fn symbols_of(&self, label: usize) -> Vec<usize> {
        (0..self.users).map(|j| self.symbol_of(label, j)).collect()
    }

    pub fn label_of(&self, symbols: &[usize]) -> usize {
        symbols
            .iter()
            .fold(0, |acc, &s| (acc << self.bits_per_symbol()) | s)
    }

    pub fn label_to_bits(&self, label: usize) -> Vec<u8> {
        let n = self.total_bits();
        (0..n).map(|i| ((label >> (n - 1 - i)) & 1) as u8).collect()
    }

    pub fn bits_to_label(&self, bits: &[u8]) -> Result<usize> {
        check_dim("bit vector", self.total_bits(), bits.len())?;
        bits.iter().try_fold(0usize, |acc, &b| match b {
            0 | 1 => Ok((acc << 1) | b as usize),
            other => Err(Error::config(format!("bit values must be 0/1, got {other}"))),
        })
    }
}

/// Number of differing bits between two labels.
#[inline]
pub fn hamming(a: u64, b: u64) -> u32 {
    (a ^ b).count_ones()
}
