//! Morgan (circular) fingerprints and Tanimoto similarity.
//!
//! Atom seeds hash (atomic number, heavy degree, formal charge, total H,
//! aromatic flag, ring membership). Each round hashes the round number, the
//! atom's previous identifier and the sorted `(bond code, neighbor id)` list.
//! An environment is emitted only if its bond set was not already emitted at
//! a smaller radius or by a smaller identifier at the same radius. Bits are
//! `id mod nbits`.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hashing::{combine, hash_values};
use crate::molgraph::rings::atom_ring_flags;
use crate::molgraph::{hydrogen_counts, validate, MolGraph};

pub const DEFAULT_RADIUS: u32 = 2;
pub const DEFAULT_NBITS: usize = 2048;
/// Default similarity threshold for a valid optimization outcome.
pub const DEFAULT_TAU: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FingerprintError {
    #[error("molecule fails validation: {0}")]
    InvalidInput(String),
    #[error("nbits must be a power of two >= 256, got {0}")]
    BadWidth(usize),
    #[error("fingerprint shapes differ: ({0}, r{1}) vs ({2}, r{3})")]
    ShapeMismatch(usize, u32, usize, u32),
    #[error("bad fingerprint hex: {0}")]
    BadHex(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FingerprintParams {
    pub radius: u32,
    pub nbits: usize,
}

impl Default for FingerprintParams {
    fn default() -> Self {
        FingerprintParams {
            radius: DEFAULT_RADIUS,
            nbits: DEFAULT_NBITS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    words: Vec<u64>,
    nbits: usize,
    radius: u32,
}

impl Fingerprint {
    pub fn empty(nbits: usize, radius: u32) -> Result<Self, FingerprintError> {
        check_width(nbits)?;
        Ok(Fingerprint {
            words: vec![0; nbits / 64],
            nbits,
            radius,
        })
    }

    pub fn from_bits(nbits: usize, radius: u32, bits: &[usize]) -> Result<Self, FingerprintError> {
        let mut fp = Fingerprint::empty(nbits, radius)?;
        for &b in bits {
            fp.set(b % nbits);
        }
        Ok(fp)
    }

    pub fn nbits(&self) -> usize {
        self.nbits
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn params(&self) -> FingerprintParams {
        FingerprintParams {
            radius: self.radius,
            nbits: self.nbits,
        }
    }

    fn set(&mut self, bit: usize) {
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        bit < self.nbits && self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn popcount(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn on_bits(&self) -> Vec<usize> {
        (0..self.nbits).filter(|&b| self.get(b)).collect()
    }

    /// Lowercase hex, byte `i` holding bits `8i..8i+8` with bit `8i` as its LSB.
    pub fn to_hex(&self) -> String {
        let bytes: Vec<u8> = self.words.iter().flat_map(|w| w.to_le_bytes()).collect();
        hex::encode(bytes)
    }

    pub fn from_hex(s: &str, nbits: usize, radius: u32) -> Result<Self, FingerprintError> {
        check_width(nbits)?;
        let bytes = hex::decode(s).map_err(|e| FingerprintError::BadHex(e.to_string()))?;
        if bytes.len() * 8 != nbits {
            return Err(FingerprintError::BadHex(format!(
                "{} hex bytes for {nbits} bits",
                bytes.len()
            )));
        }
        let words = bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(Fingerprint {
            words,
            nbits,
            radius,
        })
    }
}

/// Tanimoto similarity, guaranteed to lie in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Similarity(f64);

impl Similarity {
    pub fn new(value: f64) -> Option<Self> {
        (0.0..=1.0).contains(&value).then_some(Similarity(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Similarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4}", self.0)
    }
}

fn check_width(nbits: usize) -> Result<(), FingerprintError> {
    if nbits < 256 || !nbits.is_power_of_two() {
        return Err(FingerprintError::BadWidth(nbits));
    }
    Ok(())
}

pub fn morgan_fp(mol: &MolGraph, radius: u32, nbits: usize) -> Result<Fingerprint, FingerprintError> {
    check_width(nbits)?;
    let report = validate(mol);
    if !report.valid {
        let msg = report
            .violations
            .first()
            .map(|v| v.message.clone())
            .unwrap_or_default();
        return Err(FingerprintError::InvalidInput(msg));
    }
    let mut fp = Fingerprint::empty(nbits, radius)?;
    let n = mol.len();
    let nb = mol.bonds().len();
    let hs = hydrogen_counts(mol);
    let in_ring = atom_ring_flags(mol);

    let mut ids: Vec<u64> = (0..n)
        .map(|i| {
            let a = mol.atom(i);
            hash_values(&[
                a.element.atomic_number() as u64,
                mol.degree(i) as u64,
                a.formal_charge as i64 as u64,
                hs[i] as u64,
                a.aromatic as u64,
                in_ring[i] as u64,
            ])
        })
        .collect();
    for &id in &ids {
        fp.set((id % nbits as u64) as usize);
    }

    let words = nb.div_ceil(64).max(1);
    let mut envs: Vec<Vec<u64>> = vec![vec![0; words]; n];
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    seen.insert(vec![0; words]);

    for round in 1..=radius {
        let mut next_ids = Vec::with_capacity(n);
        let mut next_envs = Vec::with_capacity(n);
        for i in 0..n {
            let mut nbrs: Vec<(u64, u64)> = mol
                .neighbors(i)
                .iter()
                .map(|&(j, bi)| (mol.bonds()[bi].order.code() as u64, ids[j]))
                .collect();
            nbrs.sort_unstable();
            let mut h = combine(round as u64, ids[i]);
            for (code, id) in nbrs {
                h = combine(combine(h, code), id);
            }
            next_ids.push(h);

            let mut env = envs[i].clone();
            for &(j, bi) in mol.neighbors(i) {
                env[bi / 64] |= 1 << (bi % 64);
                for (w, o) in env.iter_mut().zip(&envs[j]) {
                    *w |= *o;
                }
            }
            next_envs.push(env);
        }
        let mut fresh: Vec<(&Vec<u64>, u64)> = next_envs
            .iter()
            .zip(&next_ids)
            .map(|(e, &id)| (e, id))
            .collect();
        fresh.sort();
        for (env, id) in fresh {
            if seen.insert(env.clone()) {
                fp.set((id % nbits as u64) as usize);
            }
        }
        ids = next_ids;
        envs = next_envs;
    }
    Ok(fp)
}

pub fn morgan_fp_with(mol: &MolGraph, params: FingerprintParams) -> Result<Fingerprint, FingerprintError> {
    morgan_fp(mol, params.radius, params.nbits)
}

pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<Similarity, FingerprintError> {
    if a.nbits != b.nbits || a.radius != b.radius {
        return Err(FingerprintError::ShapeMismatch(a.nbits, a.radius, b.nbits, b.radius));
    }
    let (mut both, mut either) = (0u32, 0u32);
    for (x, y) in a.words.iter().zip(&b.words) {
        both += (x & y).count_ones();
        either += (x | y).count_ones();
    }
    if either == 0 {
        return Ok(Similarity(0.0));
    }
    Ok(Similarity(both as f64 / either as f64))
}

/// Whether `m` stays within `tau` Tanimoto similarity of the reference `m0`.
pub fn meets_constraint(
    m: &MolGraph,
    m0: &MolGraph,
    tau: Similarity,
    params: FingerprintParams,
) -> Result<bool, FingerprintError> {
    let a = morgan_fp_with(m, params)?;
    let b = morgan_fp_with(m0, params)?;
    Ok(tanimoto(&a, &b)? >= tau)
}
