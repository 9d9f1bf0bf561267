//! Long-range XY Hamiltonian with transverse field and on-site disorder,
//! exact block-structured time evolution and the analytic excitation-number
//! decay model. ħ = 1; couplings, fields and disorder are in s⁻¹.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};
use crate::qstate::{site_bit, QuantumState};
use crate::randunitary::{Domain, SeedStream};

/// Per-qubit depolarizing strengths and the incoherent rates of the
/// excitation model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub lambda_prep: Vec<f64>,
    pub lambda_meas: Vec<f64>,
    /// Spontaneous decay rate Γ, s⁻¹.
    pub decay_rate: f64,
    /// Incoherent spin-flip rate, s⁻¹.
    pub flip_rate: f64,
}

impl NoiseParams {
    pub fn noiseless(n_qubits: usize) -> Self {
        NoiseParams {
            lambda_prep: vec![1.0; n_qubits],
            lambda_meas: vec![1.0; n_qubits],
            decay_rate: 0.0,
            flip_rate: 0.0,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.lambda_prep.iter().chain(&self.lambda_meas).all(|&l| l == 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuenchConfig {
    pub n_qubits: usize,
    /// Nearest-neighbour coupling J₀, s⁻¹.
    pub j0: f64,
    /// Power-law exponent of J_ij = J₀/|i−j|^α.
    pub alpha: f64,
    /// Transverse field B, rad/s.
    pub b_field: f64,
    /// On-site disorder Δ_j, rad/s.
    pub disorder: Vec<f64>,
    /// Evolution times, s.
    pub times: Vec<f64>,
    pub noise: NoiseParams,
    pub master_seed: u64,
}

impl QuenchConfig {
    /// Clean, noiseless configuration with `disorder = 0` and `times = [0]`.
    pub fn new(n_qubits: usize, j0: f64, alpha: f64) -> Self {
        QuenchConfig {
            n_qubits,
            j0,
            alpha,
            b_field: 0.0,
            disorder: vec![0.0; n_qubits],
            times: vec![0.0],
            noise: NoiseParams::noiseless(n_qubits),
            master_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_qubits;
        if n < 2 {
            return Err(Error::Config(format!("n_qubits = {n}, need at least 2")));
        }
        if n > crate::qstate::MAX_PURE_QUBITS {
            return Err(Error::TooLarge { what: "quench", n, limit: crate::qstate::MAX_PURE_QUBITS });
        }
        if !self.j0.is_finite() || !self.b_field.is_finite() {
            return Err(Error::Config("j0 and b_field must be finite".into()));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::Config(format!("alpha = {} must be ≥ 0", self.alpha)));
        }
        if self.disorder.len() != n {
            return Err(Error::Config(format!("disorder has {} entries for {n} qubits", self.disorder.len())));
        }
        if self.times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(Error::Config("times must be finite and nonnegative".into()));
        }
        if self.times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("times must be sorted".into()));
        }
        let nz = &self.noise;
        if nz.lambda_prep.len() != n || nz.lambda_meas.len() != n {
            return Err(Error::Config("noise λ vectors must have one entry per qubit".into()));
        }
        if nz.lambda_prep.iter().chain(&nz.lambda_meas).any(|l| !(0.0..=1.0).contains(l)) {
            return Err(Error::Config("noise λ values must lie in [0, 1]".into()));
        }
        if !(nz.decay_rate >= 0.0) || !(nz.flip_rate >= 0.0) {
            return Err(Error::Config("rates must be nonnegative".into()));
        }
        Ok(())
    }
}

/// `J_ij = J₀/|i−j|^α`, zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMatrix {
    n: usize,
    values: Vec<f64>,
}

impl CouplingMatrix {
    pub fn power_law(n: usize, j0: f64, alpha: f64) -> Self {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    values[i * n + j] = j0 / (i.abs_diff(j) as f64).powf(alpha);
                }
            }
        }
        CouplingMatrix { n, values }
    }

    /// Coupling between sites `i` and `j` (1-based).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i - 1) * self.n + (j - 1)]
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Fixed-excitation-number sector of the Hamiltonian.
#[derive(Debug)]
pub struct Block {
    pub excitations: usize,
    /// Basis indices of the sector, ascending.
    pub states: Vec<u64>,
    pub matrix: DMatrix<f64>,
    eigen: OnceLock<SymmetricEigen<f64, nalgebra::Dyn>>,
}

impl Block {
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    /// Eigendecomposition, computed once and cached.
    pub fn eigen(&self) -> &SymmetricEigen<f64, nalgebra::Dyn> {
        self.eigen.get_or_init(|| self.matrix.clone().symmetric_eigen())
    }

    /// `(Re, Im)` of `exp(−iHt)` restricted to the sector.
    pub fn propagator(&self, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let eig = self.eigen();
        let v = &eig.eigenvectors;
        let mut vc = v.clone();
        let mut vs = v.clone();
        for (k, &e) in eig.eigenvalues.iter().enumerate() {
            let (s, c) = (e * t).sin_cos();
            vc.column_mut(k).scale_mut(c);
            vs.column_mut(k).scale_mut(-s);
        }
        (&vc * v.transpose(), &vs * v.transpose())
    }
}

/// XY Hamiltonian with field and disorder, stored as excitation-number blocks.
#[derive(Debug)]
pub struct XyHamiltonian {
    n_qubits: usize,
    blocks: Vec<Block>,
    /// Position of each basis index inside its block.
    position: Vec<u32>,
}

impl XyHamiltonian {
    pub fn new(couplings: &CouplingMatrix, b_field: f64, disorder: &[f64]) -> Result<Self> {
        let n = couplings.n();
        if disorder.len() != n {
            return Err(Error::InvalidArgument(format!("{} disorder values for {n} sites", disorder.len())));
        }
        if n == 0 || n > crate::qstate::MAX_PURE_QUBITS {
            return Err(Error::TooLarge { what: "Hamiltonian", n, limit: crate::qstate::MAX_PURE_QUBITS });
        }
        let dim = 1usize << n;
        let mut sectors: Vec<Vec<u64>> = vec![Vec::new(); n + 1];
        let mut position = vec![0u32; dim];
        for s in 0..dim as u64 {
            let k = s.count_ones() as usize;
            position[s as usize] = sectors[k].len() as u32;
            sectors[k].push(s);
        }
        let blocks = sectors
            .into_iter()
            .enumerate()
            .map(|(k, states)| {
                let d = states.len();
                let mut m = DMatrix::<f64>::zeros(d, d);
                for (col, &s) in states.iter().enumerate() {
                    let mut diag = 0.0;
                    for q in 1..=n {
                        let z = if s & site_bit(n, q) != 0 { 1.0 } else { -1.0 };
                        diag += (b_field + disorder[q - 1]) * z;
                    }
                    m[(col, col)] = diag;
                    for i in 1..=n {
                        for j in (i + 1)..=n {
                            let (bi, bj) = (site_bit(n, i), site_bit(n, j));
                            if ((s & bi) != 0) != ((s & bj) != 0) {
                                let t = s ^ bi ^ bj;
                                m[(position[t as usize] as usize, col)] += couplings.get(i, j);
                            }
                        }
                    }
                }
                Block { excitations: k, states, matrix: m, eigen: OnceLock::new() }
            })
            .collect();
        Ok(XyHamiltonian { n_qubits: n, blocks, position })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Full `2^N × 2^N` matrix.
    pub fn dense_matrix(&self) -> DMatrix<f64> {
        let dim = 1usize << self.n_qubits;
        let mut h = DMatrix::zeros(dim, dim);
        for b in &self.blocks {
            for (r, &sr) in b.states.iter().enumerate() {
                for (c, &sc) in b.states.iter().enumerate() {
                    h[(sr as usize, sc as usize)] = b.matrix[(r, c)];
                }
            }
        }
        h
    }

    /// Matrix element `⟨row|H|col⟩`.
    pub fn element(&self, row: u64, col: u64) -> f64 {
        if row.count_ones() != col.count_ones() {
            return 0.0;
        }
        let b = &self.blocks[row.count_ones() as usize];
        b.matrix[(self.position[row as usize] as usize, self.position[col as usize] as usize)]
    }

    /// `exp(−iHt)` applied to `state` (`ρ → UρU†` for mixed states).
    pub fn evolve(&self, state: &QuantumState, t: f64) -> Result<QuantumState> {
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(format!("evolution time {t} must be ≥ 0")));
        }
        if state.n_qubits() != self.n_qubits {
            return Err(Error::InvalidArgument(format!(
                "state has {} qubits, Hamiltonian {}",
                state.n_qubits(),
                self.n_qubits
            )));
        }
        if t == 0.0 {
            return Ok(state.clone());
        }
        match state.amplitudes() {
            Some(psi) => Ok(QuantumState::pure_unchecked(self.n_qubits, self.evolve_vector(psi, t))),
            None => {
                let rho = state.density().expect("mixed state");
                Ok(QuantumState::mixed_unchecked(self.n_qubits, self.evolve_density(rho, t)))
            }
        }
    }

    fn evolve_vector(&self, psi: &[C64], t: f64) -> Vec<C64> {
        let mut out = vec![ZERO; psi.len()];
        for b in &self.blocks {
            let d = b.dim();
            let re = DVector::from_iterator(d, b.states.iter().map(|&s| psi[s as usize].re));
            let im = DVector::from_iterator(d, b.states.iter().map(|&s| psi[s as usize].im));
            if re.iter().chain(im.iter()).all(|x| *x == 0.0) {
                continue;
            }
            let eig = b.eigen();
            let v = &eig.eigenvectors;
            let (mut yr, mut yi) = (v.tr_mul(&re), v.tr_mul(&im));
            for k in 0..d {
                let (s, c) = (eig.eigenvalues[k] * t).sin_cos();
                let (a, bb) = (yr[k], yi[k]);
                // (a + i b)(c − i s)
                yr[k] = a * c + bb * s;
                yi[k] = bb * c - a * s;
            }
            let (or, oi) = (v * yr, v * yi);
            for (k, &s) in b.states.iter().enumerate() {
                out[s as usize] = C64::new(or[k], oi[k]);
            }
        }
        out
    }

    fn evolve_density(&self, rho: &[C64], t: f64) -> Vec<C64> {
        let dim = rho.len().isqrt();
        let props: Vec<_> = self.blocks.iter().map(|b| b.propagator(t)).collect();
        let mut out = vec![ZERO; rho.len()];
        for (bk, (ukr, uki)) in self.blocks.iter().zip(&props) {
            for (bl, (ulr, uli)) in self.blocks.iter().zip(&props) {
                let (dk, dl) = (bk.dim(), bl.dim());
                let mut pr = DMatrix::<f64>::zeros(dk, dl);
                let mut pi = DMatrix::<f64>::zeros(dk, dl);
                let mut nonzero = false;
                for (a, &sa) in bk.states.iter().enumerate() {
                    for (b, &sb) in bl.states.iter().enumerate() {
                        let z = rho[sa as usize * dim + sb as usize];
                        pr[(a, b)] = z.re;
                        pi[(a, b)] = z.im;
                        nonzero |= z != ZERO;
                    }
                }
                if !nonzero {
                    continue;
                }
                // A = U_k ρ_kl ; ρ' = A U_l† with U symmetric so U† = conj(U)
                let ar = ukr * &pr - uki * &pi;
                let ai = ukr * &pi + uki * &pr;
                let rr = &ar * ulr + &ai * uli;
                let ri = &ai * ulr - &ar * uli;
                for (a, &sa) in bk.states.iter().enumerate() {
                    for (b, &sb) in bl.states.iter().enumerate() {
                        out[sa as usize * dim + sb as usize] = C64::new(rr[(a, b)], ri[(a, b)]);
                    }
                }
            }
        }
        out
    }

    /// `⟨H⟩` (`Tr ρH` for mixed states).
    pub fn energy(&self, state: &QuantumState) -> f64 {
        let mut e = 0.0;
        match state.amplitudes() {
            Some(psi) => {
                for b in &self.blocks {
                    for (r, &sr) in b.states.iter().enumerate() {
                        for (c, &sc) in b.states.iter().enumerate() {
                            let h = b.matrix[(r, c)];
                            if h != 0.0 {
                                e += (psi[sr as usize].conj() * psi[sc as usize]).re * h;
                            }
                        }
                    }
                }
            }
            None => {
                let rho = state.density().expect("mixed");
                let dim = state.dim();
                for b in &self.blocks {
                    for (r, &sr) in b.states.iter().enumerate() {
                        for (c, &sc) in b.states.iter().enumerate() {
                            let h = b.matrix[(r, c)];
                            if h != 0.0 {
                                e += rho[sc as usize * dim + sr as usize].re * h;
                            }
                        }
                    }
                }
            }
        }
        e
    }
}

/// Hamiltonian for the configuration's coupling, field and disorder.
pub fn build_hamiltonian(config: &QuenchConfig) -> Result<XyHamiltonian> {
    let j = CouplingMatrix::power_law(config.n_qubits, config.j0, config.alpha);
    XyHamiltonian::new(&j, config.b_field, &config.disorder)
}

/// Per-site `⟨σᶻ_q⟩` (σᶻ|↑⟩ = +|↑⟩).
pub fn magnetization(state: &QuantumState) -> Vec<f64> {
    let n = state.n_qubits();
    let probs = state.basis_probabilities();
    (1..=n)
        .map(|q| {
            let bit = site_bit(n, q);
            probs
                .iter()
                .enumerate()
                .map(|(s, p)| if s as u64 & bit != 0 { *p } else { -*p })
                .sum()
        })
        .collect()
}

/// `(1/N) Σ_q (−1)^q ⟨σᶻ_q⟩`; equals 1 for the Néel state with site 1 down.
pub fn staggered_magnetization(mag: &[f64]) -> f64 {
    let n = mag.len() as f64;
    mag.iter()
        .enumerate()
        .map(|(i, m)| if (i + 1) % 2 == 0 { *m } else { -*m })
        .sum::<f64>()
        / n
}

/// Probability of finding `k` excitations, `k = 0..=N`.
pub fn excitation_histogram(state: &QuantumState) -> Vec<f64> {
    let mut h = vec![0.0; state.n_qubits() + 1];
    for (s, p) in state.basis_probabilities().iter().enumerate() {
        h[s.count_ones() as usize] += p;
    }
    h
}

/// Disorder pattern with Δ_j uniform in `[−width, width]`.
pub fn draw_disorder(stream: &SeedStream, pattern: u64, n_qubits: usize, width: f64) -> Vec<f64> {
    let mut rng = stream.rng(Domain::Disorder, [pattern, 0, 0, 0]);
    (0..n_qubits).map(|_| rng.random_range(-width..=width)).collect()
}

/// Excited-state probability of one ion under decay Γ and spin flips:
/// `p(t) = p_eq + (p_i − p_eq) e^{−λt}`, `λ = 2γ_flip + Γ`, `p_eq = γ_flip/λ`.
pub fn excitation_decay_p(t: f64, p_initial: f64, decay_rate: f64, flip_rate: f64) -> f64 {
    let lambda = 2.0 * flip_rate + decay_rate;
    if lambda == 0.0 {
        return p_initial;
    }
    let p_eq = flip_rate / lambda;
    p_eq + (p_initial - p_eq) * (-lambda * t).exp()
}

fn binomial_coefficient(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Distribution of the number of excited ions at time `t` when `n_excited`
/// of `n` ions start excited and all decay/flip independently.
pub fn excitation_number_dist(
    t: f64,
    n: usize,
    n_excited: usize,
    decay_rate: f64,
    flip_rate: f64,
) -> Result<Vec<f64>> {
    if n_excited > n {
        return Err(Error::InvalidArgument(format!("{n_excited} excited ions out of {n}")));
    }
    let p1 = excitation_decay_p(t, 1.0, decay_rate, flip_rate);
    let p2 = excitation_decay_p(t, 0.0, decay_rate, flip_rate);
    let n1 = n_excited;
    let n2 = n - n1;
    Ok((0..=n)
        .map(|k| {
            let lo = k.saturating_sub(n2);
            let hi = k.min(n1);
            (lo..=hi)
                .map(|k1| {
                    let k2 = k - k1;
                    binomial_coefficient(n1, k1)
                        * binomial_coefficient(n2, k2)
                        * p1.powi(k1 as i32)
                        * (1.0 - p1).powi((n1 - k1) as i32)
                        * p2.powi(k2 as i32)
                        * (1.0 - p2).powi((n2 - k2) as i32)
                })
                .sum()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::SubsystemMask;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ham(n: usize, j0: f64, alpha: f64, b: f64, disorder: Option<Vec<f64>>) -> XyHamiltonian {
        let j = CouplingMatrix::power_law(n, j0, alpha);
        XyHamiltonian::new(&j, b, &disorder.unwrap_or_else(|| vec![0.0; n])).unwrap()
    }

    /// Dense propagator from the full-space eigendecomposition.
    fn dense_evolve(h: &XyHamiltonian, psi: &[C64], t: f64) -> Vec<C64> {
        let eig = h.dense_matrix().symmetric_eigen();
        let v = &eig.eigenvectors;
        let dim = psi.len();
        let mut out = vec![ZERO; dim];
        for k in 0..dim {
            let mut ov = ZERO;
            for s in 0..dim {
                ov += psi[s] * v[(s, k)];
            }
            let ph = C64::from_polar(1.0, -eig.eigenvalues[k] * t);
            for s in 0..dim {
                out[s] += ov * ph * v[(s, k)];
            }
        }
        out
    }

    #[test]
    fn hopping_element_and_power_law() {
        let h = ham(2, 420.0, 1.24, 0.0, None);
        assert_eq!(h.element(0b10, 0b01), 420.0);
        let j = CouplingMatrix::power_law(3, 100.0, 1.0);
        assert_eq!(j.get(1, 3), 50.0);
        assert_eq!(j.get(3, 1), 50.0);
        assert_eq!(j.get(2, 2), 0.0);
    }

    #[test]
    fn blocks_conserve_excitations_and_match_dense() {
        let h = ham(5, 1.0, 0.8, 0.3, Some(vec![0.1, -0.2, 0.5, 0.0, 0.7]));
        let dense = h.dense_matrix();
        assert!((dense.clone() - dense.transpose()).abs().max() < 1e-15);
        for r in 0..32u64 {
            for c in 0..32u64 {
                if r.count_ones() != c.count_ones() {
                    assert_eq!(dense[(r as usize, c as usize)], 0.0);
                }
            }
        }
        let dims: Vec<usize> = h.blocks().iter().map(|b| b.dim()).collect();
        assert_eq!(dims, vec![1, 5, 10, 10, 5, 1]);
    }

    #[test]
    fn zero_time_is_identity() {
        let h = ham(4, 1.0, 1.0, 0.0, None);
        let s = QuantumState::neel(4).unwrap();
        assert_eq!(h.evolve(&s, 0.0).unwrap(), s);
        assert!(h.evolve(&s, -1.0).is_err());
    }

    #[test]
    fn two_site_swap() {
        // |↓↑⟩ ↔ |↑↓⟩ exchange at rate J₀: full transfer at t = π/(2J₀)
        let j0 = 420.0;
        let h = ham(2, j0, 1.24, 0.0, None);
        let s = QuantumState::neel(2).unwrap();
        let out = h.evolve(&s, std::f64::consts::PI / (2.0 * j0)).unwrap();
        let m = magnetization(&out);
        assert!((m[0] - 1.0).abs() < 1e-10 && (m[1] + 1.0).abs() < 1e-10);
    }

    #[test]
    fn block_evolution_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [3usize, 6, 8] {
            let dis: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h = ham(n, 1.0, 1.1, 0.4, Some(dis));
            let s = QuantumState::haar_random(n, &mut rng).unwrap();
            let t = 0.73;
            let a = h.evolve(&s, t).unwrap();
            let b = dense_evolve(&h, s.amplitudes().unwrap(), t);
            for (x, y) in a.amplitudes().unwrap().iter().zip(&b) {
                assert!((x - y).norm() < 1e-9);
            }
            assert!((a.purity() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn mixed_evolution_matches_pure_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = ham(4, 1.0, 1.3, 0.2, Some(vec![0.3, -0.1, 0.0, 0.2]));
        let psi = QuantumState::haar_random(4, &mut rng).unwrap();
        let a = h.evolve(&psi, 1.1).unwrap().to_density_matrix();
        let b = h.evolve(&psi.clone().into_mixed(), 1.1).unwrap();
        for (x, y) in a.iter().zip(b.density().unwrap()) {
            assert!((x - y).norm() < 1e-10);
        }
        let noisy = psi.apply_depolarizing(2, 0.6).unwrap();
        let e = h.evolve(&noisy, 0.9).unwrap();
        assert!((e.purity() - noisy.purity()).abs() < 1e-10);
        assert!((e.trace() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn conservation_laws() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = ham(7, 420.0, 1.24, 50.0, Some(draw_disorder(&SeedStream::new(1), 0, 7, 1260.0)));
        let s = QuantumState::haar_random(7, &mut rng).unwrap();
        let e0 = h.energy(&s);
        let m0: f64 = magnetization(&s).iter().sum();
        let hist0 = excitation_histogram(&s);
        for &t in &[1e-4, 1e-3, 5e-3] {
            let st = h.evolve(&s, t).unwrap();
            assert!((h.energy(&st) - e0).abs() < 1e-9 * e0.abs().max(1.0));
            assert!((magnetization(&st).iter().sum::<f64>() - m0).abs() < 1e-9);
            for (a, b) in excitation_histogram(&st).iter().zip(&hist0) {
                assert!((a - b).abs() < 1e-10);
            }
        }
        let mixed = s.apply_depolarizing(3, 0.5).unwrap();
        let em = h.energy(&mixed);
        assert!((h.energy(&h.evolve(&mixed, 2e-3).unwrap()) - em).abs() < 1e-9 * em.abs().max(1.0));
    }

    #[test]
    fn field_alone_leaves_entropies_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = ham(5, 0.0, 1.0, 2.0 * std::f64::consts::PI * 3000.0, None);
        let s = QuantumState::haar_random(5, &mut rng).unwrap();
        let st = h.evolve(&s, 0.37e-3).unwrap();
        for bits in 1u64..32 {
            let m = SubsystemMask::new(bits).unwrap();
            assert!((s.subsystem_renyi2(m).unwrap() - st.subsystem_renyi2(m).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn neel_magnetization() {
        let m = magnetization(&QuantumState::neel(4).unwrap());
        assert_eq!(m, vec![-1.0, 1.0, -1.0, 1.0]);
        assert_eq!(staggered_magnetization(&m), 1.0);
    }

    #[test]
    fn decay_model_limits() {
        let (gamma, flip) = (1.0 / 1.17, 0.69);
        assert_eq!(excitation_decay_p(0.0, 0.8, gamma, flip), 0.8);
        let p_eq = flip / (2.0 * flip + gamma);
        assert!((excitation_decay_p(1e4, 1.0, gamma, flip) - p_eq).abs() < 1e-12);
        assert!((p_eq - 0.3088).abs() < 5e-4, "{p_eq}");
        assert_eq!(excitation_decay_p(3.0, 0.4, 0.0, 0.0), 0.4);
    }

    #[test]
    fn decay_model_matches_ode_integration() {
        // RK4 on ṗ = −(Γ+γ)p + γ(1−p)
        let (gamma, flip, p0) = (1.0 / 1.17, 0.69, 0.9);
        let f = |p: f64| -(gamma + flip) * p + flip * (1.0 - p);
        let (mut p, dt) = (p0, 1e-4);
        for step in 1..=20_000 {
            let k1 = f(p);
            let k2 = f(p + 0.5 * dt * k1);
            let k3 = f(p + 0.5 * dt * k2);
            let k4 = f(p + dt * k3);
            p += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if step % 5000 == 0 {
                let t = step as f64 * dt;
                assert!((p - excitation_decay_p(t, p0, gamma, flip)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn excitation_distribution() {
        let (gamma, flip) = (1.0 / 1.17, 0.69);
        let d0 = excitation_number_dist(0.0, 6, 3, gamma, flip).unwrap();
        assert_eq!(d0, vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        // two ions, one excited: enumerate the four joint outcomes
        let t = 0.4;
        let p1 = excitation_decay_p(t, 1.0, gamma, flip);
        let p2 = excitation_decay_p(t, 0.0, gamma, flip);
        let brute = [
            (1.0 - p1) * (1.0 - p2),
            p1 * (1.0 - p2) + (1.0 - p1) * p2,
            p1 * p2,
        ];
        let d = excitation_number_dist(t, 2, 1, gamma, flip).unwrap();
        for (a, b) in d.iter().zip(&brute) {
            assert!((a - b).abs() < 1e-14);
        }
        for t in [0.01, 0.3, 2.0] {
            let d = excitation_number_dist(t, 20, 10, gamma, flip).unwrap();
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let p_eq = flip / (2.0 * flip + gamma);
        let late = excitation_number_dist(1e3, 8, 4, gamma, flip).unwrap();
        for (k, v) in late.iter().enumerate() {
            let b = binomial_coefficient(8, k) * p_eq.powi(k as i32) * (1.0 - p_eq).powi(8 - k as i32);
            assert!((v - b).abs() < 1e-12);
        }
        assert!(excitation_number_dist(1.0, 3, 4, gamma, flip).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = QuenchConfig::new(4, 420.0, 1.24);
        assert!(c.validate().is_ok());
        c.times = vec![0.002, 0.001];
        assert!(c.validate().is_err());
        let mut c = QuenchConfig::new(4, 420.0, 1.24);
        c.noise.lambda_meas[0] = 1.5;
        assert!(c.validate().is_err());
        assert!(QuenchConfig::new(1, 1.0, 1.0).validate().is_err());
    }
}
