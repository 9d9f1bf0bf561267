//! Haar (CUE) sampling of local unitaries, rotation-angle decomposition,
//! pulse-sequence compilation and statistical moment checks.

use std::f64::consts::{FRAC_PI_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{Mat2, C64, ONE, ZERO};

/// Purpose tag mixed into every derived random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Unitary = 0x756e_6974,
    Shots = 0x7368_6f74,
    Disorder = 0x6469_736f,
    State = 0x7374_6174,
    Trial = 0x7472_6961,
    Test = 0x7465_7374,
}

/// Counter-based seed stream: every `(domain, keys)` tuple maps to an
/// independent ChaCha generator, independent of draw order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedStream {
    master: u64,
}

impl SeedStream {
    pub fn new(master_seed: u64) -> Self {
        SeedStream { master: master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master
    }

    pub fn rng(&self, domain: Domain, keys: [u64; 4]) -> ChaCha12Rng {
        let mut h = splitmix(self.master ^ splitmix(domain as u64));
        let mut seed = [0u8; 32];
        for (i, k) in keys.iter().enumerate() {
            h = splitmix(h ^ k.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i as u64));
        }
        for chunk in seed.chunks_mut(8) {
            h = splitmix(h);
            chunk.copy_from_slice(&h.to_le_bytes());
        }
        ChaCha12Rng::from_seed(seed)
    }

    /// Generator for unitary `draw` of `qubit` in set `unitary_index`.
    pub fn unitary_rng(&self, unitary_index: u64, qubit: usize, draw: u64) -> ChaCha12Rng {
        self.rng(Domain::Unitary, [unitary_index, qubit as u64, draw, 0])
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-random `d × d` unitary (row-major), via QR of a complex Ginibre matrix
/// with the diagonal of R made real-positive (Gram–Schmidt on columns).
pub fn sample_cue<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<C64> {
    assert!(d >= 2, "CUE dimension must be at least 2");
    let mut z: Vec<C64> = (0..d * d).map(|_| complex_gaussian(rng)).collect();
    for c in 0..d {
        for prev in 0..c {
            let mut ov = ZERO;
            for r in 0..d {
                ov += z[r * d + prev].conj() * z[r * d + c];
            }
            for r in 0..d {
                let p = z[r * d + prev];
                z[r * d + c] -= ov * p;
            }
        }
        let norm = (0..d).map(|r| z[r * d + c].norm_sqr()).sum::<f64>().sqrt();
        for r in 0..d {
            z[r * d + c] /= norm;
        }
    }
    z
}

/// Haar-random 2x2 unitary.
pub fn sample_cue2<R: Rng + ?Sized>(rng: &mut R) -> Mat2 {
    let v = sample_cue(rng, 2);
    Mat2([[v[0], v[1]], [v[2], v[3]]])
}

/// Euler angles with `U ∝ R_z(θ₃) R_y(θ₂) R_z(θ₁)`; θ₁, θ₃ in `[0, 2π)`, θ₂ in `[0, π]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZyzAngles {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
}

impl ZyzAngles {
    pub fn new(theta1: f64, theta2: f64, theta3: f64) -> Self {
        ZyzAngles { theta1, theta2, theta3 }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.theta1, self.theta2, self.theta3]
    }

    pub fn recompose(self) -> Mat2 {
        Mat2::rz(self.theta3) * Mat2::ry(self.theta2) * Mat2::rz(self.theta1)
    }
}

fn wrap_tau(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

const DEGENERATE: f64 = 1e-12;

/// Decompose a 2x2 unitary into ZYZ angles (global phase discarded).
pub fn decompose_zyz(u: &Mat2) -> Result<ZyzAngles> {
    if u.unitarity_error() > 1e-8 {
        return Err(Error::InvalidArgument(format!(
            "matrix is not unitary (error {:.3e})",
            u.unitarity_error()
        )));
    }
    // v = u / sqrt(det u) is ±R_z(θ3)R_y(θ2)R_z(θ1); the sign is a global phase
    let det = u.0[0][0] * u.0[1][1] - u.0[0][1] * u.0[1][0];
    let v = u.scale(ONE / det.sqrt());
    let m = &v.0;
    let theta2 = 2.0 * m[1][0].norm().atan2(m[1][1].norm());
    // v11 = e^{i(θ1+θ3)/2} cos(θ2/2), v10 = e^{i(θ3−θ1)/2} sin(θ2/2)
    let (theta1, theta3) = if m[1][0].norm() < DEGENERATE {
        (0.0, 2.0 * m[1][1].arg())
    } else if m[1][1].norm() < DEGENERATE {
        (0.0, 2.0 * m[1][0].arg())
    } else {
        let (half_sum, half_diff) = (m[1][1].arg(), m[1][0].arg());
        (half_sum - half_diff, half_sum + half_diff)
    };
    Ok(ZyzAngles { theta1: wrap_tau(theta1), theta2, theta3: wrap_tau(theta3) })
}

/// Multiply by the phase that makes the largest-modulus entry real-positive.
/// Ties (within 1e-12) go to the first entry in row-major order.
pub fn canonical_phase(u: &Mat2) -> Mat2 {
    let max = u.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return *u;
    }
    let best = *u.0.iter().flatten().find(|z| z.norm() >= max - 1e-12).expect("nonempty");
    u.scale(best.conj() / best.norm())
}

/// One qubit's unitary together with its rotation angles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalUnitary {
    pub matrix: Mat2,
    pub angles: ZyzAngles,
}

impl LocalUnitary {
    pub fn from_matrix(u: &Mat2) -> Result<Self> {
        let angles = decompose_zyz(u)?;
        Ok(LocalUnitary { matrix: canonical_phase(u), angles })
    }

    pub fn from_angles(angles: ZyzAngles) -> Self {
        LocalUnitary { matrix: canonical_phase(&angles.recompose()), angles }
    }

    pub fn identity() -> Self {
        Self::from_angles(ZyzAngles::new(0.0, 0.0, 0.0))
    }

    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::from_matrix(&sample_cue2(rng)).expect("Haar sample is unitary")
    }
}

/// Product unitary `u₁ ⊗ … ⊗ u_N` for one measurement setting.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalUnitarySet {
    pub unitary_index: u64,
    pub unitaries: Vec<LocalUnitary>,
}

impl LocalUnitarySet {
    /// Deterministic in `(master seed, unitary_index, qubit)`.
    pub fn sample(stream: &SeedStream, unitary_index: u64, n_qubits: usize) -> Self {
        let unitaries = (0..n_qubits)
            .map(|q| LocalUnitary::sample(&mut stream.unitary_rng(unitary_index, q, 0)))
            .collect();
        LocalUnitarySet { unitary_index, unitaries }
    }

    /// Two independent draws per qubit, `(first applied, second applied)`,
    /// for the concatenated pulse-level implementation.
    pub fn sample_pairs(
        stream: &SeedStream,
        unitary_index: u64,
        n_qubits: usize,
    ) -> Vec<(LocalUnitary, LocalUnitary)> {
        (0..n_qubits)
            .map(|q| {
                (
                    LocalUnitary::sample(&mut stream.unitary_rng(unitary_index, q, 0)),
                    LocalUnitary::sample(&mut stream.unitary_rng(unitary_index, q, 1)),
                )
            })
            .collect()
    }

    pub fn from_angles(unitary_index: u64, angles: &[ZyzAngles]) -> Self {
        LocalUnitarySet {
            unitary_index,
            unitaries: angles.iter().map(|&a| LocalUnitary::from_angles(a)).collect(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.unitaries.len()
    }

    pub fn angles(&self) -> Vec<ZyzAngles> {
        self.unitaries.iter().map(|u| u.angles).collect()
    }
}

/// One element of the compiled experimental sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Pulse {
    /// Resonant pulse on every qubit: rotation by `angle` about
    /// `cos(phase) x + sin(phase) y`.
    Global { angle: f64, phase: f64 },
    /// Light-shift z rotation on one qubit (0-based), angle in `[0, 2π)`.
    Addressed { qubit: usize, angle: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PulseSequence {
    pub n_qubits: usize,
    /// Time order: first element acts first.
    pub pulses: Vec<Pulse>,
    /// Sum of addressed angles per z layer.
    pub layer_totals: [f64; 4],
}

pub const ALPHA_GRID: usize = 720;
const ZERO_ANGLE: f64 = 1e-12;

impl PulseSequence {
    /// Per-qubit operator realised by the sequence.
    pub fn per_qubit_operators(&self) -> Vec<Mat2> {
        let mut ops = vec![Mat2::identity(); self.n_qubits];
        for p in &self.pulses {
            match *p {
                Pulse::Global { angle, phase } => {
                    let g = Mat2::r_equatorial(angle, phase);
                    ops.iter_mut().for_each(|o| *o = g * *o);
                }
                Pulse::Addressed { qubit, angle } => {
                    ops[qubit] = Mat2::rz(angle) * ops[qubit];
                }
            }
        }
        ops
    }

    pub fn addressed_count(&self) -> usize {
        self.pulses
            .iter()
            .filter(|p| matches!(p, Pulse::Addressed { .. }))
            .count()
    }
}

/// Sum over the layer of `mod(θ − α, 2π)`.
fn shifted_total(angles: &[f64], alpha: f64) -> f64 {
    angles.iter().map(|&t| wrap_tau(t - alpha)).sum()
}

/// Compile `u_i = second_i · first_i` for every qubit into global ±π/2 x pulses
/// sandwiching addressed z layers. The final z layer is dropped (it does not
/// affect z-basis outcomes). With `normalize`, each addressed layer is shifted
/// by the grid value of α minimising its total angle and the shift is pushed
/// into the phases of the following global pulses.
pub fn compile_pulse_sequence(
    targets: &[(LocalUnitary, LocalUnitary)],
    normalize: bool,
) -> PulseSequence {
    let n = targets.len();
    // U = Rx(−π/2) Rz(θ4) Rx(π/2) Rz(θ3) Rx(−π/2) Rz(θ2) Rx(π/2) Rz(θ1)
    //   = Ry(θ4) Rz(θ3) Ry(θ2) Rz(θ1)
    let mut layers = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for (q, (first, second)) in targets.iter().enumerate() {
        let (a, b) = (second.angles, first.angles);
        layers[0][q] = wrap_tau(b.theta1);
        layers[1][q] = wrap_tau(b.theta2);
        layers[2][q] = wrap_tau(a.theta1 + b.theta3);
        layers[3][q] = wrap_tau(a.theta2);
    }
    let globals = [FRAC_PI_2, -FRAC_PI_2, FRAC_PI_2, -FRAC_PI_2];
    let mut pulses = Vec::new();
    let mut shift = 0.0;
    let mut layer_totals = [0.0; 4];
    for (l, layer) in layers.iter().enumerate() {
        let alpha = if normalize {
            (0..ALPHA_GRID)
                .map(|k| TAU * k as f64 / ALPHA_GRID as f64)
                .fold((0.0, f64::INFINITY), |best, a| {
                    let t = shifted_total(layer, a);
                    if t < best.1 - 1e-12 {
                        (a, t)
                    } else {
                        best
                    }
                })
                .0
        } else {
            0.0
        };
        shift += alpha;
        for (q, &t) in layer.iter().enumerate() {
            let a = wrap_tau(t - alpha);
            layer_totals[l] += a;
            if a > ZERO_ANGLE && TAU - a > ZERO_ANGLE {
                pulses.push(Pulse::Addressed { qubit: q, angle: a });
            }
        }
        // G·Rz(A) = Rz(A)·G_{phase − A}
        pulses.push(Pulse::Global { angle: globals[l], phase: wrap_tau(-shift) });
    }
    PulseSequence { n_qubits: n, pulses, layer_totals }
}

/// Closed-form Haar average of `u_{s s'} u*_{s s''} u_{t t'} u*_{t t''}`.
pub fn two_design_moment(d: usize, s: usize, s1: usize, s2: usize, t: usize, t1: usize, t2: usize) -> f64 {
    let dl = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let d = d as f64;
    (dl(s1, s2) * dl(t1, t2) + dl(s, t) * dl(s1, t2) * dl(t1, s2)) / (d * d - 1.0)
        - (dl(s1, t2) * dl(t1, s2) + dl(s, t) * dl(s1, s2) * dl(t1, t2)) / (d * (d * d - 1.0))
}

/// Closed-form Haar average of `u_{i1 j1} u_{i2 j2} u*_{k1 l1} u*_{k2 l2}` (Weingarten).
pub fn weingarten_moment(d: usize, idx: [usize; 8]) -> f64 {
    let [i1, j1, i2, j2, k1, l1, k2, l2] = idx;
    let dl = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let d = d as f64;
    let wg_id = 1.0 / (d * d - 1.0);
    let wg_sw = -1.0 / (d * (d * d - 1.0));
    // σ pairs rows, τ pairs columns; Wg depends on whether σ and τ agree
    let rows_id = dl(i1, k1) * dl(i2, k2);
    let rows_sw = dl(i1, k2) * dl(i2, k1);
    let cols_id = dl(j1, l1) * dl(j2, l2);
    let cols_sw = dl(j1, l2) * dl(j2, l1);
    rows_id * cols_id * wg_id
        + rows_sw * cols_sw * wg_id
        + rows_id * cols_sw * wg_sw
        + rows_sw * cols_id * wg_sw
}

#[derive(Clone, Debug)]
pub struct MomentCheck {
    pub indices: Vec<usize>,
    pub expected: f64,
    pub mean: C64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    /// Largest deviation of real or imaginary part in standard errors.
    pub z: f64,
}

#[derive(Clone, Debug)]
pub struct TwoDesignReport {
    pub d: usize,
    pub n_samples: usize,
    pub sigma_level: f64,
    pub checks: Vec<MomentCheck>,
    pub max_abs_deviation: f64,
    pub max_z: f64,
    pub passed: bool,
}

pub const MIN_DESIGN_SAMPLES: usize = 10_000;

fn moment_check(values: impl Iterator<Item = C64>, n: usize, expected: f64, indices: Vec<usize>) -> MomentCheck {
    let (mut sum, mut sq_re, mut sq_im) = (ZERO, 0.0, 0.0);
    for v in values {
        sum += v;
        sq_re += v.re * v.re;
        sq_im += v.im * v.im;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var_re = ((sq_re - nf * mean.re * mean.re) / (nf - 1.0)).max(0.0);
    let var_im = ((sq_im - nf * mean.im * mean.im) / (nf - 1.0)).max(0.0);
    let (se_re, se_im) = ((var_re / nf).sqrt(), (var_im / nf).sqrt());
    let zscore = |dev: f64, se: f64| {
        if se > 0.0 {
            dev.abs() / se
        } else if dev.abs() < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    };
    let z = zscore(mean.re - expected, se_re).max(zscore(mean.im, se_im));
    MomentCheck { indices, expected, mean, stderr_re: se_re, stderr_im: se_im, z }
}

/// Compare empirical fourth-order moments of `samples` (row-major `d × d`)
/// with the Haar closed forms: every row-paired pattern
/// `(s, s', s'', s̃, s̃', s̃'')` and every general index pattern
/// `(i1 j1, i2 j2, k1 l1, k2 l2)`.
pub fn check_two_design(samples: &[Vec<C64>], d: usize, sigma_level: f64) -> Result<TwoDesignReport> {
    if samples.len() < MIN_DESIGN_SAMPLES {
        return Err(Error::InsufficientSamples { needed: MIN_DESIGN_SAMPLES, got: samples.len() });
    }
    let n = samples.len();
    let mut checks = Vec::new();
    let at = |u: &Vec<C64>, r: usize, c: usize| u[r * d + c];
    for code in 0..d.pow(6) {
        let mut k = code;
        let mut ix = [0usize; 6];
        for v in ix.iter_mut() {
            *v = k % d;
            k /= d;
        }
        let [s, s1, s2, t, t1, t2] = ix;
        let expected = two_design_moment(d, s, s1, s2, t, t1, t2);
        let vals = samples
            .iter()
            .map(|u| at(u, s, s1) * at(u, s, s2).conj() * at(u, t, t1) * at(u, t, t2).conj());
        checks.push(moment_check(vals, n, expected, ix.to_vec()));
    }
    for code in 0..d.pow(8) {
        let mut k = code;
        let mut ix = [0usize; 8];
        for v in ix.iter_mut() {
            *v = k % d;
            k /= d;
        }
        let expected = weingarten_moment(d, ix);
        let [i1, j1, i2, j2, k1, l1, k2, l2] = ix;
        let vals = samples
            .iter()
            .map(|u| at(u, i1, j1) * at(u, i2, j2) * at(u, k1, l1).conj() * at(u, k2, l2).conj());
        checks.push(moment_check(vals, n, expected, ix.to_vec()));
    }
    let max_abs_deviation = checks
        .iter()
        .map(|c| (c.mean - C64::new(c.expected, 0.0)).norm())
        .fold(0.0, f64::max);
    let max_z = checks.iter().map(|c| c.z).fold(0.0, f64::max);
    Ok(TwoDesignReport {
        d,
        n_samples: n,
        sigma_level,
        checks,
        max_abs_deviation,
        max_z,
        passed: max_z <= sigma_level,
    })
}

/// `P(↑)` after rotating the single-qubit state `(a|↓⟩ + b|↑⟩)` by `u`.
pub fn excited_probability(u: &Mat2, state: [C64; 2]) -> f64 {
    (u.0[1][0] * state[0] + u.0[1][1] * state[1]).norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cue_samples_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            assert!(sample_cue2(&mut rng).unitarity_error() < 1e-12);
        }
        for d in [3, 5] {
            let u = sample_cue(&mut rng, d);
            for r in 0..d {
                for c in 0..d {
                    let ip: C64 = (0..d).map(|k| u[r * d + k] * u[c * d + k].conj()).sum();
                    let expect = if r == c { 1.0 } else { 0.0 };
                    assert!((ip - C64::new(expect, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn first_and_second_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let (mut sum_abs2, mut sq_abs2, mut sum_u) = (0.0, 0.0, ZERO);
        let (mut sq_re, mut sq_im) = (0.0, 0.0);
        for _ in 0..n {
            let u = sample_cue2(&mut rng);
            let a = u.0[0][0].norm_sqr();
            sum_abs2 += a;
            sq_abs2 += a * a;
            sum_u += u.0[0][0];
            sq_re += u.0[0][0].re.powi(2);
            sq_im += u.0[0][0].im.powi(2);
        }
        let nf = n as f64;
        let mean = sum_abs2 / nf;
        let se = ((sq_abs2 / nf - mean * mean) / nf).sqrt();
        assert!((mean - 0.5).abs() < 5.0 * se, "E|U11|² = {mean} ± {se}");
        let m = sum_u / nf;
        assert!(m.re.abs() < 5.0 * (sq_re / nf / nf).sqrt());
        assert!(m.im.abs() < 5.0 * (sq_im / nf / nf).sqrt());
    }

    #[test]
    fn seed_stream_is_deterministic_and_keyed() {
        let s = SeedStream::new(42);
        let a = LocalUnitarySet::sample(&s, 7, 3);
        let b = LocalUnitarySet::sample(&s, 7, 3);
        assert_eq!(a, b);
        let c = LocalUnitarySet::sample(&s, 8, 3);
        assert_ne!(a, c);
        // qubit 1 of a 3-qubit set equals qubit 1 of a 5-qubit set
        let d = LocalUnitarySet::sample(&s, 7, 5);
        assert_eq!(a.unitaries[..], d.unitaries[..3]);
        assert_ne!(LocalUnitarySet::sample(&SeedStream::new(43), 7, 3), a);
    }

    #[test]
    fn zyz_examples() {
        let id = decompose_zyz(&Mat2::identity()).unwrap();
        assert_eq!(id.to_array(), [0.0, 0.0, 0.0]);
        let ry = decompose_zyz(&Mat2::ry(FRAC_PI_2)).unwrap();
        assert!((ry.theta2 - FRAC_PI_2).abs() < 1e-12);
        assert!(ry.theta1.min(TAU - ry.theta1) < 1e-12);
        assert!(ry.theta3.min(TAU - ry.theta3) < 1e-12);
        let bad = Mat2([[ONE, ONE], [ZERO, ONE]]);
        assert!(decompose_zyz(&bad).is_err());
    }

    #[test]
    fn zyz_round_trip_on_haar_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let u = sample_cue2(&mut rng);
            let a = decompose_zyz(&u).unwrap();
            assert!((0.0..=PI).contains(&a.theta2));
            assert!((0.0..TAU).contains(&a.theta1) && (0.0..TAU).contains(&a.theta3));
            assert!(a.recompose().distance_up_to_phase(&u) < 1e-8);
        }
        // degenerate branches
        for u in [Mat2::rz(1.3), Mat2::ry(PI) * Mat2::rz(0.4), Mat2::rx(PI)] {
            let a = decompose_zyz(&u).unwrap();
            assert!(a.recompose().distance_up_to_phase(&u) < 1e-8);
        }
    }

    #[test]
    fn canonical_phase_makes_largest_entry_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let u = canonical_phase(&sample_cue2(&mut rng));
            let max = u.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
            let first = u.0.iter().flatten().find(|z| z.norm() >= max - 1e-12).unwrap();
            assert!(first.im.abs() < 1e-12 && first.re > 0.0);
        }
    }

    #[test]
    fn identity_targets_compile_to_no_addressed_pulses() {
        let id = LocalUnitary::identity();
        let seq = compile_pulse_sequence(&[(id, id), (id, id)], true);
        assert_eq!(seq.addressed_count(), 0);
        assert_eq!(seq.pulses.len(), 4);
    }

    #[test]
    fn single_z_target_compiles_to_one_pulse() {
        let theta = 1.234;
        let target = LocalUnitary::from_matrix(&Mat2::rz(theta)).unwrap();
        let seq = compile_pulse_sequence(&[(target, LocalUnitary::identity())], false);
        let addressed: Vec<_> = seq
            .pulses
            .iter()
            .filter_map(|p| match p {
                Pulse::Addressed { angle, .. } => Some(*angle),
                _ => None,
            })
            .collect();
        assert_eq!(addressed.len(), 1);
        assert!((addressed[0] - theta).abs() < 1e-12);
        // a single qubit can always be normalised to zero addressed angle
        let norm = compile_pulse_sequence(&[(target, LocalUnitary::identity())], true);
        assert!(norm.layer_totals.iter().sum::<f64>() < TAU / ALPHA_GRID as f64 + 1e-12);
    }

    fn check_compiled(targets: &[(LocalUnitary, LocalUnitary)], seq: &PulseSequence) {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for (q, op) in seq.per_qubit_operators().iter().enumerate() {
            let target = targets[q].1.matrix * targets[q].0.matrix;
            // target · op† is a pure z rotation (the dropped trailing layer)
            let d = target * op.dagger();
            assert!(d.0[0][1].norm() < 1e-8 && d.0[1][0].norm() < 1e-8);
            assert!((d.0[0][0].norm() - 1.0).abs() < 1e-8);
            assert!((d.0[1][1].norm() - 1.0).abs() < 1e-8);
            for _ in 0..5 {
                let psi = sample_cue2(&mut rng).0[0];
                let p_t = excited_probability(&target, psi);
                let p_o = excited_probability(op, psi);
                assert!((p_t - p_o).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn random_targets_compile_faithfully() {
        let stream = SeedStream::new(5);
        for idx in 0..20 {
            let targets = LocalUnitarySet::sample_pairs(&stream, idx, 3);
            let plain = compile_pulse_sequence(&targets, false);
            let normalized = compile_pulse_sequence(&targets, true);
            check_compiled(&targets, &plain);
            check_compiled(&targets, &normalized);
            for l in 0..4 {
                assert!(normalized.layer_totals[l] <= plain.layer_totals[l] + 1e-9);
            }
            for p in &normalized.pulses {
                if let Pulse::Addressed { angle, .. } = p {
                    assert!((0.0..TAU).contains(angle));
                }
            }
        }
    }

    #[test]
    fn normalization_minimises_over_the_grid() {
        let stream = SeedStream::new(6);
        let targets = LocalUnitarySet::sample_pairs(&stream, 0, 5);
        let seq = compile_pulse_sequence(&targets, true);
        let plain = compile_pulse_sequence(&targets, false);
        // reconstruct raw layer 0 angles from the unnormalised sequence
        let raw: Vec<f64> = targets.iter().map(|(f, _)| wrap_tau(f.angles.theta1)).collect();
        let brute = (0..ALPHA_GRID)
            .map(|k| shifted_total(&raw, TAU * k as f64 / ALPHA_GRID as f64))
            .fold(f64::INFINITY, f64::min);
        assert!((seq.layer_totals[0] - brute).abs() < 1e-9);
        assert!((plain.layer_totals[0] - raw.iter().sum::<f64>()).abs() < 1e-9);
    }

    #[test]
    fn closed_forms_agree() {
        // the row-paired pattern is a special case of the Weingarten form
        for d in [2usize, 3] {
            for code in 0..d.pow(6) {
                let mut k = code;
                let mut ix = [0usize; 6];
                for v in ix.iter_mut() {
                    *v = k % d;
                    k /= d;
                }
                let [s, s1, s2, t, t1, t2] = ix;
                let a = two_design_moment(d, s, s1, s2, t, t1, t2);
                // u_{s s1} u_{t t1} u*_{s s2} u*_{t t2}
                let b = weingarten_moment(d, [s, s1, t, t1, s, s2, t, t2]);
                assert!((a - b).abs() < 1e-15, "{ix:?}");
            }
        }
        assert!((two_design_moment(2, 0, 0, 0, 0, 0, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((two_design_moment(2, 0, 0, 0, 1, 0, 0) - 1.0 / 6.0).abs() < 1e-15);
        assert!((two_design_moment(2, 0, 0, 0, 1, 1, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(two_design_moment(2, 0, 0, 1, 0, 0, 0), 0.0);
    }

    #[test]
    fn two_design_needs_enough_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s: Vec<Vec<C64>> = (0..100).map(|_| sample_cue(&mut rng, 2)).collect();
        assert!(matches!(check_two_design(&s, 2, 5.0), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn concatenated_samples_pass_moment_checks() {
        let stream = SeedStream::new(9);
        let samples: Vec<Vec<C64>> = (0..20_000u64)
            .map(|i| {
                let p = LocalUnitarySet::sample_pairs(&stream, i, 1)[0];
                let m = p.1.matrix * p.0.matrix;
                vec![m.0[0][0], m.0[0][1], m.0[1][0], m.0[1][1]]
            })
            .collect();
        let report = check_two_design(&samples, 2, 5.0).unwrap();
        assert!(report.passed, "max z {}", report.max_z);
    }
}
