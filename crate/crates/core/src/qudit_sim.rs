//! Exact pure-state simulation of mixed-dimension qudit registers.
//!
//! [`StateVector`] is a single joint state with registers in big-endian
//! order: register 0 is the most significant digit of the basis index.
//! [`QuantumSystem`] tracks many registers by stable [`RegisterId`] and keeps
//! independent subsystems in separate factors, merging them only when an
//! operation acts across factors.
//!
//! Generalized Paulis are `X|q⟩ = |q+1⟩` and `Z|q⟩ = ω^q|q⟩` with
//! `ω = e^{2πi/d}`. The Bell basis is
//! `|Φ_ab⟩ = d^{-1/2} Σ_q ω^{aq} |q⟩|q+b⟩`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest Hilbert dimension of one joint state.
pub const MAX_STATE_DIM: usize = 1 << 20;

const NORM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("cannot normalize the zero vector")]
    ZeroVector,
    #[error("expected {expected} amplitudes, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("register dimension {0} is below 2")]
    InvalidDimension(usize),
    #[error("register dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("register {0} used twice in one operation")]
    RepeatedRegister(usize),
    #[error("no register {0}")]
    UnknownRegister(u64),
    #[error("joint dimension {dim} exceeds the cap of {cap}")]
    TooLarge { dim: usize, cap: usize },
    #[error("map is not a bijection on the register values")]
    NotPermutation,
    #[error("state has weight {0:e} outside the target subspace")]
    Leakage(f64),
}

/// Result of a generalized Bell measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BellOutcome {
    pub a: u32,
    pub b: u32,
}

fn omega_pow(d: usize, k: i64) -> Complex64 {
    let k = k.rem_euclid(d as i64) as f64;
    Complex64::from_polar(1.0, 2.0 * PI * k / d as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    dims: Vec<usize>,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// Normalizes `amps` into a state on registers of the given dimensions.
    pub fn prepare(dims: &[usize], amps: Vec<Complex64>) -> Result<Self, SimError> {
        let expected = total_dim(dims)?;
        if amps.len() != expected {
            return Err(SimError::LengthMismatch { expected, got: amps.len() });
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(SimError::ZeroVector);
        }
        Ok(Self {
            dims: dims.to_vec(),
            amps: amps.into_iter().map(|a| a / norm).collect(),
        })
    }

    pub fn basis(dims: &[usize], digits: &[usize]) -> Result<Self, SimError> {
        let n = total_dim(dims)?;
        if digits.len() != dims.len() {
            return Err(SimError::LengthMismatch { expected: dims.len(), got: digits.len() });
        }
        let mut index = 0;
        for (&v, &d) in digits.iter().zip(dims) {
            if v >= d {
                return Err(SimError::DimensionMismatch(v, d));
            }
            index = index * d + v;
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); n];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { dims: dims.to_vec(), amps })
    }

    /// Haar-random pure state (normalized complex Gaussian vector).
    pub fn random<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self, SimError> {
        let n = total_dim(dims)?;
        let amps = (0..n)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        Self::prepare(dims, amps)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn num_registers(&self) -> usize {
        self.dims.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &Self) -> Result<Complex64, SimError> {
        if self.dims != other.dims {
            return Err(SimError::LengthMismatch {
                expected: self.amps.len(),
                got: other.amps.len(),
            });
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn tensor(&self, other: &Self) -> Result<Self, SimError> {
        let dim = self.amps.len() * other.amps.len();
        if dim > MAX_STATE_DIM {
            return Err(SimError::TooLarge { dim, cap: MAX_STATE_DIM });
        }
        let mut amps = Vec::with_capacity(dim);
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Ok(Self { dims, amps })
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.dims[k + 1];
        }
        s
    }

    fn check_reg(&self, reg: usize) -> Result<usize, SimError> {
        self.dims
            .get(reg)
            .copied()
            .ok_or(SimError::UnknownRegister(reg as u64))
    }

    fn check_distinct(&self, regs: &[usize]) -> Result<(), SimError> {
        for (i, &r) in regs.iter().enumerate() {
            self.check_reg(r)?;
            if regs[..i].contains(&r) {
                return Err(SimError::RepeatedRegister(r));
            }
        }
        Ok(())
    }

    /// Base offsets of every basis state of the registers not in `excluded`,
    /// in big-endian order of those registers.
    fn rest_offsets(&self, excluded: &[usize]) -> Vec<usize> {
        let strides = self.strides();
        let mut offsets = vec![0usize];
        for (k, (&d, &stride)) in self.dims.iter().zip(&strides).enumerate() {
            if excluded.contains(&k) {
                continue;
            }
            offsets = offsets
                .iter()
                .flat_map(|&o| (0..d).map(move |v| o + v * stride))
                .collect();
        }
        offsets
    }

    /// Applies a `d×d` matrix (row-major) to one register. Unitarity is the caller's concern.
    pub fn apply_matrix(&mut self, reg: usize, matrix: &[Complex64]) -> Result<(), SimError> {
        let d = self.check_reg(reg)?;
        if matrix.len() != d * d {
            return Err(SimError::LengthMismatch { expected: d * d, got: matrix.len() });
        }
        let stride = self.strides()[reg];
        let mut col = vec![Complex64::new(0.0, 0.0); d];
        for base in self.rest_offsets(&[reg]) {
            for (q, c) in col.iter_mut().enumerate() {
                *c = self.amps[base + q * stride];
            }
            for r in 0..d {
                self.amps[base + r * stride] = (0..d).map(|q| matrix[r * d + q] * col[q]).sum();
            }
        }
        Ok(())
    }

    /// Applies the basis permutation `|v⟩ ↦ |f(v)⟩` on the listed registers.
    pub fn apply_permutation<F>(&mut self, regs: &[usize], f: F) -> Result<(), SimError>
    where
        F: Fn(&[usize]) -> Vec<usize>,
    {
        self.check_distinct(regs)?;
        let strides = self.strides();
        let local_dims: Vec<usize> = regs.iter().map(|&r| self.dims[r]).collect();
        let local_size: usize = local_dims.iter().product();
        // Offsets of each local basis state, and where each one goes.
        let mut offset_of = Vec::with_capacity(local_size);
        let mut target = vec![usize::MAX; local_size];
        let mut digits = vec![0usize; regs.len()];
        for (idx, slot) in target.iter_mut().enumerate() {
            let mut rem = idx;
            for k in (0..regs.len()).rev() {
                digits[k] = rem % local_dims[k];
                rem /= local_dims[k];
            }
            offset_of.push(digits.iter().zip(regs).map(|(&v, &r)| v * strides[r]).sum::<usize>());
            let image = f(&digits);
            if image.len() != regs.len() || image.iter().zip(&local_dims).any(|(&v, &d)| v >= d) {
                return Err(SimError::NotPermutation);
            }
            *slot = image.iter().zip(&local_dims).fold(0, |acc, (&v, &d)| acc * d + v);
        }
        let mut hit = vec![false; local_size];
        for &t in &target {
            if std::mem::replace(&mut hit[t], true) {
                return Err(SimError::NotPermutation);
            }
        }
        let mut scratch = vec![Complex64::new(0.0, 0.0); local_size];
        for base in self.rest_offsets(regs) {
            for (idx, &off) in offset_of.iter().enumerate() {
                scratch[target[idx]] = self.amps[base + off];
            }
            for (idx, &off) in offset_of.iter().enumerate() {
                self.amps[base + off] = scratch[idx];
            }
        }
        Ok(())
    }

    /// Multiplies `|q⟩` on `reg` by `phase(q)`.
    pub fn apply_phase<F: Fn(usize) -> Complex64>(&mut self, reg: usize, phase: F) -> Result<(), SimError> {
        let d = self.check_reg(reg)?;
        let stride = self.strides()[reg];
        let phases: Vec<Complex64> = (0..d).map(phase).collect();
        for base in self.rest_offsets(&[reg]) {
            for (q, p) in phases.iter().enumerate() {
                self.amps[base + q * stride] *= p;
            }
        }
        Ok(())
    }

    /// `X^k` on one register.
    pub fn apply_x(&mut self, reg: usize, k: i64) -> Result<(), SimError> {
        let d = self.check_reg(reg)? as i64;
        self.apply_permutation(&[reg], |v| vec![(v[0] as i64 + k).rem_euclid(d) as usize])
    }

    /// `Z^k` on one register.
    pub fn apply_z(&mut self, reg: usize, k: i64) -> Result<(), SimError> {
        let d = self.check_reg(reg)?;
        self.apply_phase(reg, |q| omega_pow(d, k * q as i64))
    }

    /// Exact probability of every Bell outcome on `(reg_a, reg_b)`, ordered by `(a, b)`.
    pub fn bell_distribution(&self, reg_a: usize, reg_b: usize) -> Result<Vec<(BellOutcome, f64)>, SimError> {
        self.bell_check(reg_a, reg_b)?;
        let d = self.dims[reg_a];
        let mut out = Vec::with_capacity(d * d);
        for a in 0..d {
            for b in 0..d {
                let o = BellOutcome { a: a as u32, b: b as u32 };
                let p = self.bell_project(reg_a, reg_b, o).iter().map(|c| c.norm_sqr()).sum();
                out.push((o, p));
            }
        }
        Ok(out)
    }

    fn bell_check(&self, reg_a: usize, reg_b: usize) -> Result<(), SimError> {
        self.check_distinct(&[reg_a, reg_b])?;
        let (da, db) = (self.dims[reg_a], self.dims[reg_b]);
        if da != db {
            return Err(SimError::DimensionMismatch(da, db));
        }
        Ok(())
    }

    /// Unnormalized remaining state after projecting onto `⟨Φ_ab|`.
    fn bell_project(&self, reg_a: usize, reg_b: usize, o: BellOutcome) -> Vec<Complex64> {
        let d = self.dims[reg_a];
        let strides = self.strides();
        let scale = 1.0 / (d as f64).sqrt();
        let coeffs: Vec<(usize, Complex64)> = (0..d)
            .map(|q| {
                let off = q * strides[reg_a] + ((q + o.b as usize) % d) * strides[reg_b];
                (off, omega_pow(d, -(o.a as i64) * q as i64) * scale)
            })
            .collect();
        self.rest_offsets(&[reg_a, reg_b])
            .into_iter()
            .map(|base| coeffs.iter().map(|&(off, c)| c * self.amps[base + off]).sum())
            .collect()
    }

    fn without(&self, regs: &[usize]) -> Vec<usize> {
        (0..self.dims.len())
            .filter(|k| !regs.contains(k))
            .map(|k| self.dims[k])
            .collect()
    }

    /// Reduced density matrix of the listed registers, in the listed order.
    pub fn reduced_density_matrix(&self, regs: &[usize]) -> Result<DMatrix<Complex64>, SimError> {
        self.check_distinct(regs)?;
        let strides = self.strides();
        let local_dims: Vec<usize> = regs.iter().map(|&r| self.dims[r]).collect();
        let n: usize = local_dims.iter().product();
        let offsets: Vec<usize> = (0..n)
            .map(|idx| {
                let mut rem = idx;
                let mut off = 0;
                for k in (0..regs.len()).rev() {
                    off += (rem % local_dims[k]) * strides[regs[k]];
                    rem /= local_dims[k];
                }
                off
            })
            .collect();
        let mut rho = DMatrix::<Complex64>::zeros(n, n);
        for base in self.rest_offsets(regs) {
            for (r, &or) in offsets.iter().enumerate() {
                let ar = self.amps[base + or];
                if ar == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (c, &oc) in offsets.iter().enumerate() {
                    rho[(r, c)] += ar * self.amps[base + oc].conj();
                }
            }
        }
        Ok(rho)
    }
}

fn total_dim(dims: &[usize]) -> Result<usize, SimError> {
    let mut n: usize = 1;
    for &d in dims {
        if d < 2 {
            return Err(SimError::InvalidDimension(d));
        }
        n = n.checked_mul(d).filter(|&n| n <= MAX_STATE_DIM).ok_or(SimError::TooLarge {
            dim: usize::MAX,
            cap: MAX_STATE_DIM,
        })?;
    }
    Ok(n)
}

/// `d^{-1/2} Σ_q |q⟩|q⟩`.
pub fn bell_pair(d: usize) -> Result<StateVector, SimError> {
    if d < 2 {
        return Err(SimError::InvalidDimension(d));
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); d * d];
    for q in 0..d {
        amps[q * d + q] = Complex64::new(1.0, 0.0);
    }
    StateVector::prepare(&[d, d], amps)
}

/// Samples an outcome from `probs` with one uniform draw.
fn sample<R: Rng + ?Sized>(probs: &[(BellOutcome, f64)], rng: &mut R) -> BellOutcome {
    let total: f64 = probs.iter().map(|p| p.1).sum();
    let mut u = rng.random::<f64>() * total;
    for &(o, p) in probs {
        if u < p {
            return o;
        }
        u -= p;
    }
    probs.iter().rev().find(|p| p.1 > 0.0).map_or(probs[0].0, |p| p.0)
}

/// Measures `(reg_a, reg_b)` in the Bell basis and removes both registers.
pub fn bell_measure<R: Rng + ?Sized>(
    state: &StateVector,
    reg_a: usize,
    reg_b: usize,
    rng: &mut R,
) -> Result<(BellOutcome, StateVector), SimError> {
    let probs = state.bell_distribution(reg_a, reg_b)?;
    let o = sample(&probs, rng);
    let amps = state.bell_project(reg_a, reg_b, o);
    let dims = state.without(&[reg_a, reg_b]);
    if dims.is_empty() {
        // Nothing left; keep a one-dimensional placeholder out of the API.
        return Ok((o, StateVector { dims, amps: vec![Complex64::new(1.0, 0.0)] }));
    }
    Ok((o, StateVector::prepare(&dims, amps)?))
}

/// Undoes the Pauli frame a teleportation leaves behind: `X^{-b}` followed by `Z^{a}`.
pub fn apply_correction(state: &mut StateVector, reg: usize, outcome: BellOutcome) -> Result<(), SimError> {
    let d = state.check_reg(reg)?;
    if outcome.a as usize >= d || outcome.b as usize >= d {
        return Err(SimError::DimensionMismatch(outcome.a.max(outcome.b) as usize, d));
    }
    state.apply_x(reg, -(outcome.b as i64))?;
    state.apply_z(reg, outcome.a as i64)
}

/// Bell-measures `src` with the near half of a shared pair. The far half then
/// holds the source state up to the correction for the returned outcome.
/// Register indices above the removed ones shift down by two.
pub fn teleport<R: Rng + ?Sized>(
    state: &StateVector,
    src: usize,
    near_half: usize,
    rng: &mut R,
) -> Result<(BellOutcome, StateVector), SimError> {
    bell_measure(state, src, near_half, rng)
}

/// `|⟨a|b⟩|²`, insensitive to global phase.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64, SimError> {
    Ok(a.inner(b)?.norm_sqr())
}

/// `⟨ψ|ρ|ψ⟩` for a density matrix and a pure state of matching dimension.
pub fn fidelity_with_density(rho: &DMatrix<Complex64>, psi: &StateVector) -> Result<f64, SimError> {
    let n = psi.amps.len();
    if rho.nrows() != n {
        return Err(SimError::DimensionMismatch(rho.nrows(), n));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for r in 0..n {
        for c in 0..n {
            acc += psi.amps[r].conj() * rho[(r, c)] * psi.amps[c];
        }
    }
    Ok(acc.re)
}

/// `½ ‖ρ − σ‖₁` for Hermitian matrices of equal size.
pub fn trace_distance(rho: &DMatrix<Complex64>, sigma: &DMatrix<Complex64>) -> f64 {
    let diff = rho - sigma;
    let eig = diff.symmetric_eigen();
    0.5 * eig.eigenvalues.iter().map(|l| l.abs()).sum::<f64>()
}

/// `I/d`.
pub fn maximally_mixed(d: usize) -> DMatrix<Complex64> {
    DMatrix::from_diagonal_element(d, d, Complex64::new(1.0 / d as f64, 0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegisterId(pub u64);

#[derive(Clone, Debug)]
struct Factor {
    regs: Vec<RegisterId>,
    state: StateVector,
}

/// Registers with stable identities, stored as a product of independent factors.
#[derive(Clone, Debug, Default)]
pub struct QuantumSystem {
    factors: BTreeMap<u64, Factor>,
    location: BTreeMap<RegisterId, u64>,
    next_factor: u64,
    next_register: u64,
}

impl QuantumSystem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a state as a new independent factor and returns its register ids.
    pub fn add(&mut self, state: StateVector) -> Vec<RegisterId> {
        let regs: Vec<RegisterId> = (0..state.num_registers())
            .map(|_| {
                self.next_register += 1;
                RegisterId(self.next_register)
            })
            .collect();
        let f = self.next_factor;
        self.next_factor += 1;
        for &r in &regs {
            self.location.insert(r, f);
        }
        self.factors.insert(f, Factor { regs: regs.clone(), state });
        regs
    }

    pub fn add_bell_pair(&mut self, d: usize) -> Result<(RegisterId, RegisterId), SimError> {
        let regs = self.add(bell_pair(d)?);
        Ok((regs[0], regs[1]))
    }

    pub fn contains(&self, reg: RegisterId) -> bool {
        self.location.contains_key(&reg)
    }

    pub fn num_registers(&self) -> usize {
        self.location.len()
    }

    pub fn dim(&self, reg: RegisterId) -> Result<usize, SimError> {
        let (f, k) = self.find(reg)?;
        Ok(self.factors[&f].state.dims[k])
    }

    fn find(&self, reg: RegisterId) -> Result<(u64, usize), SimError> {
        let f = *self.location.get(&reg).ok_or(SimError::UnknownRegister(reg.0))?;
        let k = self.factors[&f].regs.iter().position(|&r| r == reg).expect("location index out of sync");
        Ok((f, k))
    }

    /// Brings all listed registers into one factor; returns it and their local positions.
    fn gather(&mut self, regs: &[RegisterId]) -> Result<(u64, Vec<usize>), SimError> {
        for (i, r) in regs.iter().enumerate() {
            if regs[..i].contains(r) {
                return Err(SimError::RepeatedRegister(i));
            }
        }
        let mut ids: Vec<u64> = regs
            .iter()
            .map(|r| self.location.get(r).copied().ok_or(SimError::UnknownRegister(r.0)))
            .collect::<Result<_, _>>()?;
        ids.sort_unstable();
        ids.dedup();
        let dim: usize = ids.iter().map(|f| self.factors[f].state.amps.len()).product();
        if dim > MAX_STATE_DIM {
            return Err(SimError::TooLarge { dim, cap: MAX_STATE_DIM });
        }
        let target = ids[0];
        for f in &ids[1..] {
            let other = self.factors.remove(f).expect("factor vanished");
            let host = self.factors.get_mut(&target).expect("factor vanished");
            host.state = host.state.tensor(&other.state)?;
            for &r in &other.regs {
                self.location.insert(r, target);
            }
            host.regs.extend(other.regs);
        }
        let host = &self.factors[&target];
        let local = regs
            .iter()
            .map(|r| host.regs.iter().position(|x| x == r).expect("register not merged"))
            .collect();
        Ok((target, local))
    }

    fn state_mut(&mut self, f: u64) -> &mut StateVector {
        &mut self.factors.get_mut(&f).expect("factor vanished").state
    }

    pub fn apply_matrix(&mut self, reg: RegisterId, matrix: &[Complex64]) -> Result<(), SimError> {
        let (f, k) = self.find(reg)?;
        self.state_mut(f).apply_matrix(k, matrix)
    }

    pub fn apply_permutation<F>(&mut self, regs: &[RegisterId], map: F) -> Result<(), SimError>
    where
        F: Fn(&[usize]) -> Vec<usize>,
    {
        let (f, local) = self.gather(regs)?;
        self.state_mut(f).apply_permutation(&local, map)
    }

    pub fn apply_correction(&mut self, reg: RegisterId, outcome: BellOutcome) -> Result<(), SimError> {
        let (f, k) = self.find(reg)?;
        apply_correction(self.state_mut(f), k, outcome)
    }

    pub fn bell_distribution(&mut self, a: RegisterId, b: RegisterId) -> Result<Vec<(BellOutcome, f64)>, SimError> {
        let (f, local) = self.gather(&[a, b])?;
        self.factors[&f].state.bell_distribution(local[0], local[1])
    }

    /// Bell-measures two registers and discards them.
    pub fn bell_measure<R: Rng + ?Sized>(
        &mut self,
        a: RegisterId,
        b: RegisterId,
        rng: &mut R,
    ) -> Result<BellOutcome, SimError> {
        if self.dim(a)? != self.dim(b)? {
            return Err(SimError::DimensionMismatch(self.dim(a)?, self.dim(b)?));
        }
        let (f, local) = self.gather(&[a, b])?;
        let mut factor = self.factors.remove(&f).expect("factor vanished");
        let (o, state) = bell_measure(&factor.state, local[0], local[1], rng)?;
        self.location.remove(&a);
        self.location.remove(&b);
        factor.regs.retain(|r| *r != a && *r != b);
        if !factor.regs.is_empty() {
            factor.state = state;
            self.factors.insert(f, factor);
        }
        Ok(o)
    }

    /// Teleports `src` through the pair `(near, far)`; the content of `src`
    /// now sits on `far` pending [`Self::apply_correction`].
    pub fn teleport<R: Rng + ?Sized>(
        &mut self,
        src: RegisterId,
        near: RegisterId,
        rng: &mut R,
    ) -> Result<BellOutcome, SimError> {
        self.bell_measure(src, near, rng)
    }

    /// Reduced density matrix of the listed registers.
    pub fn reduced_density_matrix(&mut self, regs: &[RegisterId]) -> Result<DMatrix<Complex64>, SimError> {
        let (f, local) = self.gather(regs)?;
        self.factors[&f].state.reduced_density_matrix(&local)
    }

    /// `⟨ψ|ρ_reg|ψ⟩` where `ρ_reg` is the reduced state of `reg`.
    pub fn fidelity_with(&mut self, reg: RegisterId, psi: &StateVector) -> Result<f64, SimError> {
        let rho = self.reduced_density_matrix(&[reg])?;
        fidelity_with_density(&rho, psi)
    }

    /// Grows `reg` to dimension `new_dim`, with the new levels unpopulated.
    pub fn embed_register(&mut self, reg: RegisterId, new_dim: usize) -> Result<(), SimError> {
        self.resize(reg, new_dim, true)
    }

    /// Shrinks `reg` to its first `new_dim` levels; fails if the others carry weight.
    pub fn restrict_register(&mut self, reg: RegisterId, new_dim: usize) -> Result<(), SimError> {
        self.resize(reg, new_dim, false)
    }

    fn resize(&mut self, reg: RegisterId, new_dim: usize, grow: bool) -> Result<(), SimError> {
        let (f, k) = self.find(reg)?;
        let state = &self.factors[&f].state;
        let old = state.dims[k];
        if (grow && new_dim < old) || (!grow && new_dim > old) || new_dim < 2 {
            return Err(SimError::DimensionMismatch(old, new_dim));
        }
        let mut dims = state.dims.clone();
        dims[k] = new_dim;
        let n = total_dim(&dims)?;
        let old_strides = state.strides();
        let mut amps = vec![Complex64::new(0.0, 0.0); n];
        let mut leaked = 0.0;
        for (idx, amp) in state.amps.iter().enumerate() {
            let digit = (idx / old_strides[k]) % old;
            if digit >= new_dim {
                leaked += amp.norm_sqr();
                continue;
            }
            let mut out = 0;
            let mut rem = idx;
            let mut scale = 1;
            for r in (0..dims.len()).rev() {
                let v = rem % state.dims[r];
                rem /= state.dims[r];
                out += v * scale;
                scale *= dims[r];
            }
            amps[out] = *amp;
        }
        if leaked > 1e-10 {
            return Err(SimError::Leakage(leaked));
        }
        let state = StateVector::prepare(&dims, amps)?;
        self.state_mut(f).clone_from(&state);
        Ok(())
    }

    /// The pure state of `regs` when they form a whole factor on their own, in the given order.
    pub fn isolated_state(&self, regs: &[RegisterId]) -> Option<StateVector> {
        let f = *self.location.get(regs.first()?)?;
        let factor = &self.factors[&f];
        if factor.regs.len() != regs.len() || !regs.iter().all(|r| self.location.get(r) == Some(&f)) {
            return None;
        }
        let local: Vec<usize> = regs
            .iter()
            .map(|r| factor.regs.iter().position(|x| x == r))
            .collect::<Option<_>>()?;
        let mut state = factor.state.clone();
        let dims: Vec<usize> = local.iter().map(|&k| state.dims[k]).collect();
        let strides = state.strides();
        let mut amps = vec![Complex64::new(0.0, 0.0); state.amps.len()];
        for (out, amp) in amps.iter_mut().enumerate() {
            let mut rem = out;
            let mut src = 0;
            for pos in (0..local.len()).rev() {
                src += (rem % dims[pos]) * strides[local[pos]];
                rem /= dims[pos];
            }
            *amp = state.amps[src];
        }
        state.dims = dims;
        state.amps = amps;
        Some(state)
    }

    /// Largest deviation of any factor's norm from 1.
    pub fn norm_drift(&self) -> f64 {
        self.factors.values().map(|f| (f.state.norm() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Whether a state is normalized to within the simulator's tolerance.
pub fn is_normalized(state: &StateVector) -> bool {
    (state.norm() - 1.0).abs() <= NORM_TOLERANCE
}
