//! Dense quantum states over qubits and exact reference quantities.
//!
//! Basis ordering: qubit 1 is the most-significant bit of the basis index.
//! For `n` qubits, site `q` (1-based) occupies bit `n - q`. A set bit means the
//! site is excited (`|↑⟩`, σᶻ = +1); a clear bit means `|↓⟩` (σᶻ = −1).

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{Mat2, C64, ONE, ZERO};

pub const MAX_PURE_QUBITS: usize = 14;
pub const MAX_MIXED_QUBITS: usize = 10;

const NORM_TOL: f64 = 1e-10;

/// Bit of the basis index that carries site `site` (1-based) in an `n`-qubit register.
#[inline]
pub fn site_bit(n_qubits: usize, site: usize) -> u64 {
    1u64 << (n_qubits - site)
}

/// A nonempty set of sites. Bit `q - 1` of the raw value is site `q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubsystemMask(u64);

impl SubsystemMask {
    pub fn new(bits: u64) -> Result<Self> {
        if bits == 0 {
            return Err(Error::InvalidMask("mask is empty".into()));
        }
        Ok(SubsystemMask(bits))
    }

    pub fn from_sites(sites: &[usize]) -> Result<Self> {
        let mut bits = 0u64;
        for &s in sites {
            if s == 0 || s > 64 {
                return Err(Error::InvalidMask(format!("site {s} out of range 1..=64")));
            }
            bits |= 1 << (s - 1);
        }
        Self::new(bits)
    }

    /// All sites `1..=n`.
    pub fn full(n_qubits: usize) -> Self {
        assert!((1..=64).contains(&n_qubits));
        SubsystemMask(if n_qubits == 64 { u64::MAX } else { (1u64 << n_qubits) - 1 })
    }

    /// Sites `first..=last`.
    pub fn range(first: usize, last: usize) -> Result<Self> {
        if first == 0 || last < first {
            return Err(Error::InvalidMask(format!("bad site range {first}-{last}")));
        }
        Self::from_sites(&(first..=last).collect::<Vec<_>>())
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, site: usize) -> bool {
        site >= 1 && site <= 64 && self.0 & (1 << (site - 1)) != 0
    }

    /// Sites in ascending order.
    pub fn sites(self) -> Vec<usize> {
        (1..=64).filter(|&s| self.contains(s)).collect()
    }

    pub fn highest_site(self) -> usize {
        64 - self.0.leading_zeros() as usize
    }

    pub fn check_within(self, n_qubits: usize) -> Result<()> {
        if self.highest_site() > n_qubits {
            return Err(Error::InvalidMask(format!(
                "mask {self} is not a subset of sites 1..={n_qubits}"
            )));
        }
        Ok(())
    }

    pub fn union(self, other: SubsystemMask) -> SubsystemMask {
        SubsystemMask(self.0 | other.0)
    }

    pub fn is_disjoint(self, other: SubsystemMask) -> bool {
        self.0 & other.0 == 0
    }

    pub fn is_subset_of(self, other: SubsystemMask) -> bool {
        self.0 & !other.0 == 0
    }

    /// Sites of `1..=n` not in `self`; `None` when `self` covers everything.
    pub fn complement(self, n_qubits: usize) -> Option<SubsystemMask> {
        let rest = SubsystemMask::full(n_qubits).0 & !self.0;
        (rest != 0).then_some(SubsystemMask(rest))
    }

    /// Basis-index bit positions of the sites, most-significant first.
    pub fn index_bits(self, n_qubits: usize) -> Vec<u32> {
        self.sites().into_iter().map(|s| (n_qubits - s) as u32).collect()
    }
}

impl fmt::Display for SubsystemMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sites: Vec<String> = self.sites().iter().map(|s| s.to_string()).collect();
        f.write_str(&sites.join(","))
    }
}

impl FromStr for SubsystemMask {
    type Err = Error;

    /// Parses `"1,2,5"` or ranges such as `"1-4,7"`.
    fn from_str(s: &str) -> Result<Self> {
        let mut sites = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let parse = |t: &str| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidMask(format!("bad site `{t}` in `{s}`")))
            };
            if let Some((a, b)) = part.split_once('-') {
                let (a, b) = (parse(a)?, parse(b)?);
                if b < a {
                    return Err(Error::InvalidMask(format!("bad range `{part}`")));
                }
                sites.extend(a..=b);
            } else {
                sites.push(parse(part)?);
            }
        }
        SubsystemMask::from_sites(&sites)
    }
}

/// Extract the bits at `positions` (most-significant first) into a compact index.
#[inline]
pub fn gather_bits(index: u64, positions: &[u32]) -> u64 {
    positions
        .iter()
        .fold(0u64, |acc, &p| (acc << 1) | ((index >> p) & 1))
}

#[derive(Clone, Debug, PartialEq)]
enum Repr {
    Pure(Vec<C64>),
    /// Row-major `dim × dim`.
    Mixed(Vec<C64>),
}

/// Dense pure state vector or density matrix over `n_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    n_qubits: usize,
    repr: Repr,
}

impl QuantumState {
    pub fn from_amplitudes(n_qubits: usize, amps: Vec<C64>) -> Result<Self> {
        check_size(n_qubits, MAX_PURE_QUBITS, "pure state")?;
        if amps.len() != 1 << n_qubits {
            return Err(Error::InvalidState(format!(
                "expected {} amplitudes, got {}",
                1usize << n_qubits,
                amps.len()
            )));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("norm² is {norm}, expected 1")));
        }
        Ok(QuantumState { n_qubits, repr: Repr::Pure(amps) })
    }

    /// Validates hermiticity, unit trace and, for up to 8 qubits, positivity.
    pub fn from_density_matrix(n_qubits: usize, rho: Vec<C64>) -> Result<Self> {
        check_size(n_qubits, MAX_MIXED_QUBITS, "mixed state")?;
        let dim = 1usize << n_qubits;
        if rho.len() != dim * dim {
            return Err(Error::InvalidState(format!(
                "expected {} matrix entries, got {}",
                dim * dim,
                rho.len()
            )));
        }
        let mut trace = ZERO;
        for i in 0..dim {
            trace += rho[i * dim + i];
            for j in i..dim {
                if (rho[i * dim + j] - rho[j * dim + i].conj()).norm() > NORM_TOL {
                    return Err(Error::InvalidState(format!("not Hermitian at ({i},{j})")));
                }
            }
        }
        if (trace - ONE).norm() > NORM_TOL {
            return Err(Error::InvalidState(format!("trace is {trace}, expected 1")));
        }
        if n_qubits <= 8 {
            let m = DMatrix::from_row_slice(dim, dim, &rho);
            let min_eig = m
                .symmetric_eigenvalues()
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            if min_eig < -NORM_TOL {
                return Err(Error::InvalidState(format!("negative eigenvalue {min_eig}")));
            }
        }
        Ok(QuantumState { n_qubits, repr: Repr::Mixed(rho) })
    }

    pub(crate) fn mixed_unchecked(n_qubits: usize, rho: Vec<C64>) -> Self {
        debug_assert_eq!(rho.len(), 1 << (2 * n_qubits));
        QuantumState { n_qubits, repr: Repr::Mixed(rho) }
    }

    pub(crate) fn pure_unchecked(n_qubits: usize, amps: Vec<C64>) -> Self {
        debug_assert_eq!(amps.len(), 1 << n_qubits);
        QuantumState { n_qubits, repr: Repr::Pure(amps) }
    }

    pub fn basis(n_qubits: usize, index: u64) -> Result<Self> {
        check_size(n_qubits, MAX_PURE_QUBITS, "pure state")?;
        let dim = 1usize << n_qubits;
        if index as usize >= dim {
            return Err(Error::InvalidState(format!("basis index {index} ≥ {dim}")));
        }
        let mut amps = vec![ZERO; dim];
        amps[index as usize] = ONE;
        Ok(QuantumState { n_qubits, repr: Repr::Pure(amps) })
    }

    /// Parse a bitstring such as `"0101"` (leftmost = site 1, `1` = excited).
    pub fn from_bitstring(bits: &str) -> Result<Self> {
        let index = parse_bitstring(bits)?;
        Self::basis(bits.len(), index)
    }

    /// `|↓↑↓↑…⟩`, site 1 down.
    pub fn neel(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidArgument("Néel state needs at least one qubit".into()));
        }
        Self::basis(n_qubits, neel_index(n_qubits))
    }

    /// Tensor product of normalized single-qubit states `(a|↓⟩ + b|↑⟩)`.
    pub fn product(qubits: &[[C64; 2]]) -> Result<Self> {
        let n = qubits.len();
        check_size(n, MAX_PURE_QUBITS, "pure state")?;
        let mut amps = vec![ONE];
        for q in qubits {
            let norm = q[0].norm_sqr() + q[1].norm_sqr();
            if (norm - 1.0).abs() > NORM_TOL {
                return Err(Error::InvalidState(format!("single-qubit norm² {norm}")));
            }
            amps = amps.iter().flat_map(|a| [a * q[0], a * q[1]]).collect();
        }
        Self::from_amplitudes(n, amps)
    }

    /// GHZ state `(|0…0⟩ + |1…1⟩)/√2`.
    pub fn ghz(n_qubits: usize) -> Result<Self> {
        check_size(n_qubits, MAX_PURE_QUBITS, "pure state")?;
        let dim = 1usize << n_qubits;
        let mut amps = vec![ZERO; dim];
        let h = std::f64::consts::FRAC_1_SQRT_2;
        amps[0] = C64::new(h, 0.0);
        amps[dim - 1] = C64::new(h, 0.0);
        Self::from_amplitudes(n_qubits, amps)
    }

    /// Haar-random pure state.
    pub fn haar_random<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Result<Self> {
        check_size(n_qubits, MAX_PURE_QUBITS, "pure state")?;
        let mut amps: Vec<C64> = (0..1usize << n_qubits)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(QuantumState { n_qubits, repr: Repr::Pure(amps) })
    }

    /// Reduced state of the first `n_qubits` sites of a Haar-random state on
    /// `n_qubits + env_qubits` sites.
    pub fn random_mixed<R: Rng + ?Sized>(
        n_qubits: usize,
        env_qubits: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let total = Self::haar_random(n_qubits + env_qubits, rng)?;
        if env_qubits == 0 {
            return Ok(total.into_mixed());
        }
        total.partial_trace(SubsystemMask::range(1, n_qubits)?)
    }

    /// Maximally mixed state `I / 2^n`.
    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        check_size(n_qubits, MAX_MIXED_QUBITS, "mixed state")?;
        let dim = 1usize << n_qubits;
        let mut rho = vec![ZERO; dim * dim];
        for i in 0..dim {
            rho[i * dim + i] = C64::new(1.0 / dim as f64, 0.0);
        }
        Ok(QuantumState { n_qubits, repr: Repr::Mixed(rho) })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.repr, Repr::Pure(_))
    }

    pub fn amplitudes(&self) -> Option<&[C64]> {
        match &self.repr {
            Repr::Pure(a) => Some(a),
            Repr::Mixed(_) => None,
        }
    }

    /// Row-major density matrix, if stored as mixed.
    pub fn density(&self) -> Option<&[C64]> {
        match &self.repr {
            Repr::Mixed(r) => Some(r),
            Repr::Pure(_) => None,
        }
    }

    pub fn to_density_matrix(&self) -> Vec<C64> {
        match &self.repr {
            Repr::Mixed(r) => r.clone(),
            Repr::Pure(a) => {
                let dim = a.len();
                let mut rho = vec![ZERO; dim * dim];
                for i in 0..dim {
                    if a[i] == ZERO {
                        continue;
                    }
                    for j in 0..dim {
                        rho[i * dim + j] = a[i] * a[j].conj();
                    }
                }
                rho
            }
        }
    }

    pub fn into_mixed(self) -> QuantumState {
        match self.repr {
            Repr::Mixed(_) => self,
            Repr::Pure(_) => {
                let rho = self.to_density_matrix();
                QuantumState { n_qubits: self.n_qubits, repr: Repr::Mixed(rho) }
            }
        }
    }

    /// Diagonal of the density matrix in the computational basis.
    pub fn basis_probabilities(&self) -> Vec<f64> {
        match &self.repr {
            Repr::Pure(a) => a.iter().map(|x| x.norm_sqr()).collect(),
            Repr::Mixed(r) => {
                let dim = self.dim();
                (0..dim).map(|i| r[i * dim + i].re).collect()
            }
        }
    }

    pub fn trace(&self) -> f64 {
        self.basis_probabilities().iter().sum()
    }

    /// Reduced density matrix on `keep`; kept sites retain their relative order.
    pub fn partial_trace(&self, keep: SubsystemMask) -> Result<QuantumState> {
        keep.check_within(self.n_qubits)?;
        let n = self.n_qubits;
        let n_a = keep.len();
        check_size(n_a, MAX_MIXED_QUBITS, "reduced state")?;
        let keep_bits = keep.index_bits(n);
        let rest_bits = keep
            .complement(n)
            .map(|m| m.index_bits(n))
            .unwrap_or_default();
        let dim_a = 1usize << n_a;
        let dim_b = 1usize << (n - n_a);
        // full index for (a, b)
        let mut full = vec![0usize; dim_a * dim_b];
        for s in 0..(1u64 << n) {
            let a = gather_bits(s, &keep_bits) as usize;
            let b = gather_bits(s, &rest_bits) as usize;
            full[a * dim_b + b] = s as usize;
        }
        let mut out = vec![ZERO; dim_a * dim_a];
        match &self.repr {
            Repr::Pure(psi) => {
                for a in 0..dim_a {
                    for a2 in a..dim_a {
                        let mut acc = ZERO;
                        for b in 0..dim_b {
                            acc += psi[full[a * dim_b + b]] * psi[full[a2 * dim_b + b]].conj();
                        }
                        out[a * dim_a + a2] = acc;
                        out[a2 * dim_a + a] = acc.conj();
                    }
                }
            }
            Repr::Mixed(rho) => {
                let dim = self.dim();
                for a in 0..dim_a {
                    for a2 in 0..dim_a {
                        let mut acc = ZERO;
                        for b in 0..dim_b {
                            acc += rho[full[a * dim_b + b] * dim + full[a2 * dim_b + b]];
                        }
                        out[a * dim_a + a2] = acc;
                    }
                }
            }
        }
        Ok(QuantumState { n_qubits: n_a, repr: Repr::Mixed(out) })
    }

    /// `Tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        match &self.repr {
            Repr::Pure(a) => {
                let n: f64 = a.iter().map(|x| x.norm_sqr()).sum();
                n * n
            }
            Repr::Mixed(r) => r.iter().map(|x| x.norm_sqr()).sum(),
        }
    }

    /// `-log₂ Tr(ρ²)`.
    pub fn renyi2(&self) -> f64 {
        -self.purity().log2()
    }

    /// Exact second-order Rényi entropy of the reduced state on `mask`.
    pub fn subsystem_renyi2(&self, mask: SubsystemMask) -> Result<f64> {
        Ok(self.partial_trace(mask)?.renyi2())
    }

    /// `ρ → λρ + (1−λ) Tr_site(ρ) ⊗ I/2`. Pure inputs are promoted to mixed.
    pub fn apply_depolarizing(&self, site: usize, lambda: f64) -> Result<QuantumState> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidArgument(format!("depolarizing λ = {lambda} outside [0,1]")));
        }
        if site == 0 || site > self.n_qubits {
            return Err(Error::InvalidArgument(format!("site {site} out of range")));
        }
        check_size(self.n_qubits, MAX_MIXED_QUBITS, "mixed state")?;
        let mut out = self.clone().into_mixed();
        if lambda == 1.0 {
            return Ok(out);
        }
        let dim = self.dim();
        let bit = site_bit(self.n_qubits, site) as usize;
        let mix = (1.0 - lambda) / 2.0;
        if let Repr::Mixed(rho) = &mut out.repr {
            for i in 0..dim {
                if i & bit != 0 {
                    continue;
                }
                for j in 0..dim {
                    if j & bit != 0 {
                        continue;
                    }
                    let (i1, j1) = (i | bit, j | bit);
                    let avg = (rho[i * dim + j] + rho[i1 * dim + j1]) * mix;
                    let (d00, d11) = (rho[i * dim + j], rho[i1 * dim + j1]);
                    rho[i * dim + j] = d00 * lambda + avg;
                    rho[i1 * dim + j1] = d11 * lambda + avg;
                    rho[i * dim + j1] *= lambda;
                    rho[i1 * dim + j] *= lambda;
                }
            }
        }
        Ok(out)
    }

    /// Depolarize every site `q` with strength `lambdas[q-1]`.
    pub fn apply_depolarizing_all(&self, lambdas: &[f64]) -> Result<QuantumState> {
        if lambdas.len() != self.n_qubits {
            return Err(Error::InvalidArgument(format!(
                "{} depolarizing strengths for {} qubits",
                lambdas.len(),
                self.n_qubits
            )));
        }
        let mut s = self.clone();
        for (i, &l) in lambdas.iter().enumerate() {
            if l != 1.0 {
                s = s.apply_depolarizing(i + 1, l)?;
            }
        }
        Ok(s)
    }

    /// Apply the single-qubit gate `u` on `site` (ρ → uρu† for mixed states).
    pub fn apply_single_qubit(&mut self, site: usize, u: &Mat2) {
        assert!(site >= 1 && site <= self.n_qubits);
        let bit = site_bit(self.n_qubits, site) as usize;
        let dim = self.dim();
        let m = &u.0;
        match &mut self.repr {
            Repr::Pure(psi) => apply_gate_vec(psi, bit, m),
            Repr::Mixed(rho) => {
                // rows: ρ → uρ
                for c in 0..dim {
                    for i in 0..dim {
                        if i & bit != 0 {
                            continue;
                        }
                        let (a, b) = (rho[i * dim + c], rho[(i | bit) * dim + c]);
                        rho[i * dim + c] = m[0][0] * a + m[0][1] * b;
                        rho[(i | bit) * dim + c] = m[1][0] * a + m[1][1] * b;
                    }
                }
                // columns: ρ → ρu†
                for r in 0..dim {
                    let row = &mut rho[r * dim..(r + 1) * dim];
                    for j in 0..dim {
                        if j & bit != 0 {
                            continue;
                        }
                        let (a, b) = (row[j], row[j | bit]);
                        row[j] = a * m[0][0].conj() + b * m[0][1].conj();
                        row[j | bit] = a * m[1][0].conj() + b * m[1][1].conj();
                    }
                }
            }
        }
    }
}

/// In-place `ψ → (u on the qubit carried by `bit`) ψ`.
#[inline]
pub(crate) fn apply_gate_vec(psi: &mut [C64], bit: usize, m: &[[C64; 2]; 2]) {
    let dim = psi.len();
    let mut i = 0;
    while i < dim {
        if i & bit != 0 {
            i += bit;
            continue;
        }
        let (a, b) = (psi[i], psi[i | bit]);
        psi[i] = m[0][0] * a + m[0][1] * b;
        psi[i | bit] = m[1][0] * a + m[1][1] * b;
        i += 1;
    }
}

pub fn neel_index(n_qubits: usize) -> u64 {
    (1..=n_qubits)
        .filter(|q| q % 2 == 0)
        .fold(0u64, |acc, q| acc | site_bit(n_qubits, q))
}

/// Bitstring (leftmost = site 1) to basis index.
pub fn parse_bitstring(bits: &str) -> Result<u64> {
    if bits.is_empty() || bits.len() > 64 {
        return Err(Error::InvalidArgument(format!("bitstring length {} not in 1..=64", bits.len())));
    }
    bits.bytes().try_fold(0u64, |acc, b| match b {
        b'0' => Ok(acc << 1),
        b'1' => Ok((acc << 1) | 1),
        _ => Err(Error::InvalidArgument(format!("invalid character in bitstring `{bits}`"))),
    })
}

pub fn format_bitstring(index: u64, n_qubits: usize) -> String {
    (1..=n_qubits)
        .map(|q| if index & site_bit(n_qubits, q) != 0 { '1' } else { '0' })
        .collect()
}

fn check_size(n: usize, limit: usize, what: &'static str) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidState("zero qubits".into()));
    }
    if n > limit {
        return Err(Error::TooLarge { what, n, limit });
    }
    Ok(())
}
