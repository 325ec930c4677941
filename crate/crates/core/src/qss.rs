//! Quantum secret sharing over the star access structure.
//!
//! Shares are labelled by unordered pairs `{i, j}` of return points. The
//! star of `i` is the set of shares whose label contains `i`; any star
//! reconstructs the secret, and no two stars are disjoint, so two return
//! points can never both hold an authorized set.
//!
//! Two constructions are available: for two points the single share is the
//! secret itself, and for three points the stars are exactly the 2-subsets of
//! three shares, realised by the qudit threshold code
//! `|s⟩ ↦ p^{-1/2} Σ_j |j, j+s, j+2s⟩` over `Z_p` (`p = d` for odd `d`,
//! otherwise the secret is embedded into `p = d + 1`).

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::qudit_sim::{trace_distance, QuantumSystem, RegisterId, SimError, StateVector};

/// Minimum reconstruction fidelity accepted by [`validate_scheme`].
pub const RECONSTRUCTION_TOLERANCE: f64 = 1e-10;
/// Largest trace distance between single-share states of two secrets.
pub const SECRECY_TOLERANCE: f64 = 1e-9;

/// A share label `{i, j}` with `i < j`, 0-based.
pub type ShareLabel = (usize, usize);

#[derive(Debug, Error, PartialEq)]
pub enum QssError {
    #[error("star access structures need at least two return points, got {0}")]
    TooFewPoints(usize),
    #[error("no verified star-sharing construction for {n} return points (secret dimension {d})")]
    Unsupported { n: usize, d: usize },
    #[error("secret register has dimension {got}, scheme expects {expected}")]
    SecretDimension { expected: usize, got: usize },
    #[error("star {star} is missing share {{{},{}}}", .label.0 + 1, .label.1 + 1)]
    MissingShare { star: usize, label: ShareLabel },
    #[error("no star {0}")]
    NoSuchStar(usize),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AccessStructure {
    pub n: usize,
    #[serde(serialize_with = "crate::index::one_based_pairs::serialize")]
    pub labels: Vec<ShareLabel>,
    /// Minimal authorized sets, as indices into `labels`; `stars[i]` belongs to point `i`.
    pub stars: Vec<Vec<usize>>,
}

impl AccessStructure {
    pub fn star_labels(&self, i: usize) -> Vec<ShareLabel> {
        self.stars[i].iter().map(|&k| self.labels[k]).collect()
    }

    /// A set of labels is authorized when it contains some star.
    pub fn is_authorized(&self, set: &[ShareLabel]) -> bool {
        self.stars
            .iter()
            .any(|star| star.iter().all(|&k| set.contains(&self.labels[k])))
    }

    /// No two authorized sets are disjoint. For a monotone structure it is
    /// enough to check the minimal sets pairwise.
    pub fn no_cloning_holds(&self) -> bool {
        self.stars
            .iter()
            .enumerate()
            .all(|(a, sa)| self.stars[a + 1..].iter().all(|sb| sa.iter().any(|k| sb.contains(k))))
    }
}

pub fn star_structure(n: usize) -> Result<AccessStructure, QssError> {
    if n < 2 {
        return Err(QssError::TooFewPoints(n));
    }
    let labels: Vec<ShareLabel> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let stars = (0..n)
        .map(|i| {
            labels
                .iter()
                .enumerate()
                .filter(|(_, &(a, b))| a == i || b == i)
                .map(|(k, _)| k)
                .collect()
        })
        .collect();
    Ok(AccessStructure { n, labels, stars })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SchemeDescriptor {
    pub n: usize,
    pub secret_dim: usize,
    pub share_dim: usize,
    pub construction: String,
}

/// Shares produced by an encoding, each a list of registers.
#[derive(Clone, Debug, PartialEq)]
pub struct ShareBundle {
    pub n: usize,
    pub secret_dim: usize,
    pub shares: BTreeMap<ShareLabel, Vec<RegisterId>>,
}

impl ShareBundle {
    /// The shares of one star, the only input reconstruction is allowed to see.
    pub fn star(&self, i: usize) -> BTreeMap<ShareLabel, Vec<RegisterId>> {
        self.shares
            .iter()
            .filter(|((a, b), _)| *a == i || *b == i)
            .map(|(l, r)| (*l, r.clone()))
            .collect()
    }
}

pub trait StarScheme: Send + Sync {
    fn descriptor(&self) -> SchemeDescriptor;

    /// Consumes the secret register and spreads it over the shares.
    fn encode(&self, sys: &mut QuantumSystem, secret: RegisterId) -> Result<ShareBundle, QssError>;

    /// Rebuilds the secret from the shares of star `star` and returns the
    /// register that holds it.
    fn reconstruct(
        &self,
        sys: &mut QuantumSystem,
        star: usize,
        shares: &BTreeMap<ShareLabel, Vec<RegisterId>>,
    ) -> Result<RegisterId, QssError>;
}

fn check_star(n: usize, star: usize, shares: &BTreeMap<ShareLabel, Vec<RegisterId>>) -> Result<(), QssError> {
    if star >= n {
        return Err(QssError::NoSuchStar(star));
    }
    for label in star_structure(n)?.star_labels(star) {
        if shares.get(&label).is_none_or(|r| r.is_empty()) {
            return Err(QssError::MissingShare { star, label });
        }
    }
    Ok(())
}

/// Two return points: one share, the secret itself.
#[derive(Clone, Debug)]
pub struct Direct {
    pub secret_dim: usize,
}

impl StarScheme for Direct {
    fn descriptor(&self) -> SchemeDescriptor {
        SchemeDescriptor {
            n: 2,
            secret_dim: self.secret_dim,
            share_dim: self.secret_dim,
            construction: "direct".into(),
        }
    }

    fn encode(&self, sys: &mut QuantumSystem, secret: RegisterId) -> Result<ShareBundle, QssError> {
        let got = sys.dim(secret)?;
        if got != self.secret_dim {
            return Err(QssError::SecretDimension { expected: self.secret_dim, got });
        }
        Ok(ShareBundle {
            n: 2,
            secret_dim: self.secret_dim,
            shares: BTreeMap::from([((0, 1), vec![secret])]),
        })
    }

    fn reconstruct(
        &self,
        _sys: &mut QuantumSystem,
        star: usize,
        shares: &BTreeMap<ShareLabel, Vec<RegisterId>>,
    ) -> Result<RegisterId, QssError> {
        check_star(2, star, shares)?;
        Ok(shares[&(0, 1)][0])
    }
}

/// Three return points: the 2-of-3 qudit threshold code.
#[derive(Clone, Debug)]
pub struct Threshold23 {
    pub secret_dim: usize,
}

impl Threshold23 {
    /// Odd working dimension the code runs over.
    pub fn share_dim(&self) -> usize {
        if self.secret_dim % 2 == 1 {
            self.secret_dim
        } else {
            self.secret_dim + 1
        }
    }

    /// Coefficient of `s` in the share with this label.
    fn alpha(label: ShareLabel) -> usize {
        match label {
            (0, 1) => 0,
            (0, 2) => 1,
            _ => 2,
        }
    }
}

fn inverse_mod(a: usize, p: usize) -> usize {
    (1..p).find(|&x| (a * x) % p == 1).expect("coefficient differences are units for odd p")
}

impl StarScheme for Threshold23 {
    fn descriptor(&self) -> SchemeDescriptor {
        SchemeDescriptor {
            n: 3,
            secret_dim: self.secret_dim,
            share_dim: self.share_dim(),
            construction: "threshold-2-of-3".into(),
        }
    }

    fn encode(&self, sys: &mut QuantumSystem, secret: RegisterId) -> Result<ShareBundle, QssError> {
        let got = sys.dim(secret)?;
        if got != self.secret_dim {
            return Err(QssError::SecretDimension { expected: self.secret_dim, got });
        }
        let p = self.share_dim();
        if p != got {
            sys.embed_register(secret, p)?;
        }
        let ancilla = sys.add(StateVector::basis(&[p, p], &[0, 0])?);
        let (j_reg, z_reg) = (ancilla[0], ancilla[1]);
        // Fourier transform of |0⟩: uniform superposition over j.
        let scale = 1.0 / (p as f64).sqrt();
        let dft: Vec<Complex64> = (0..p * p)
            .map(|k| Complex64::from_polar(scale, 2.0 * PI * ((k / p) * (k % p) % p) as f64 / p as f64))
            .collect();
        sys.apply_matrix(j_reg, &dft)?;
        sys.apply_permutation(&[secret, j_reg, z_reg], |v| {
            let (s, j, z) = (v[0], v[1], v[2]);
            vec![j, (j + s) % p, (j + 2 * s + z) % p]
        })?;
        Ok(ShareBundle {
            n: 3,
            secret_dim: self.secret_dim,
            shares: BTreeMap::from([((0, 1), vec![secret]), ((0, 2), vec![j_reg]), ((1, 2), vec![z_reg])]),
        })
    }

    fn reconstruct(
        &self,
        sys: &mut QuantumSystem,
        star: usize,
        shares: &BTreeMap<ShareLabel, Vec<RegisterId>>,
    ) -> Result<RegisterId, QssError> {
        check_star(3, star, shares)?;
        let p = self.share_dim();
        let labels = star_structure(3)?.star_labels(star);
        let (lx, ly) = (labels[0], labels[1]);
        let (ax, ay) = (Self::alpha(lx), Self::alpha(ly));
        let missing = 3 - ax - ay;
        let c = inverse_mod((ay + p - ax) % p, p);
        let shift = (missing + p - ax) % p;
        let (x, y) = (shares[&lx][0], shares[&ly][0]);
        // y ← s, x ← the value of the missing share, which leaves (x, missing)
        // in a maximally entangled state independent of s.
        sys.apply_permutation(&[x, y], |v| {
            let s = (c * ((v[1] + p - v[0]) % p)) % p;
            vec![(v[0] + shift * s) % p, s]
        })?;
        if p != self.secret_dim {
            sys.restrict_register(y, self.secret_dim)?;
        }
        Ok(y)
    }
}

/// The verified construction for `n` return points and secret dimension `d`.
pub fn scheme_for(n: usize, d: usize) -> Result<Box<dyn StarScheme>, QssError> {
    if d < 2 {
        return Err(QssError::Sim(SimError::InvalidDimension(d)));
    }
    match n {
        0 | 1 => Err(QssError::TooFewPoints(n)),
        2 => Ok(Box::new(Direct { secret_dim: d })),
        3 => Ok(Box::new(Threshold23 { secret_dim: d })),
        _ => Err(QssError::Unsupported { n, d }),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FidelityWitness {
    pub secret: usize,
    #[serde(with = "crate::index::one_based")]
    pub star: usize,
    pub fidelity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchemeValidation {
    pub descriptor: SchemeDescriptor,
    pub secrets_tested: usize,
    pub min_fidelity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst: Option<FidelityWitness>,
    /// Largest trace distance between one share's states for two secrets.
    pub secrecy_distance: f64,
    /// Set when a single share is itself authorized, so secrecy cannot hold.
    pub secrecy_informational: bool,
    pub no_cloning: bool,
    pub passed: bool,
}

pub fn validate_scheme(n: usize, d: usize, trials: usize, seed: u64) -> Result<SchemeValidation, QssError> {
    validate_scheme_with(scheme_for(n, d)?.as_ref(), trials, seed)
}

/// Encodes every basis secret plus `trials` random ones and checks
/// reconstruction from each star, single-share secrecy and the
/// combinatorial no-cloning condition.
pub fn validate_scheme_with(
    scheme: &dyn StarScheme,
    trials: usize,
    seed: u64,
) -> Result<SchemeValidation, QssError> {
    let desc = scheme.descriptor();
    let structure = star_structure(desc.n)?;
    let d = desc.secret_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut secrets: Vec<StateVector> = (0..d)
        .map(|q| StateVector::basis(&[d], &[q]))
        .collect::<Result<_, _>>()?;
    for _ in 0..trials {
        secrets.push(StateVector::random(&[d], &mut rng)?);
    }

    let mut min_fidelity = f64::INFINITY;
    let mut worst = None;
    let mut share_states: BTreeMap<ShareLabel, Vec<_>> = BTreeMap::new();
    for (k, secret) in secrets.iter().enumerate() {
        for star in 0..desc.n {
            let mut sys = QuantumSystem::new();
            let reg = sys.add(secret.clone())[0];
            let bundle = scheme.encode(&mut sys, reg)?;
            if star == 0 {
                for (label, regs) in &bundle.shares {
                    share_states
                        .entry(*label)
                        .or_default()
                        .push(sys.reduced_density_matrix(regs)?);
                }
            }
            let out = scheme.reconstruct(&mut sys, star, &bundle.star(star))?;
            let f = sys.fidelity_with(out, secret)?;
            if f < min_fidelity {
                min_fidelity = f;
                worst = Some(FidelityWitness { secret: k, star, fidelity: f });
            }
        }
    }

    let mut secrecy_distance: f64 = 0.0;
    for states in share_states.values() {
        for a in 0..states.len() {
            for b in a + 1..states.len() {
                secrecy_distance = secrecy_distance.max(trace_distance(&states[a], &states[b]));
            }
        }
    }
    let secrecy_informational = structure.labels.iter().any(|l| structure.is_authorized(&[*l]));
    let no_cloning = structure.no_cloning_holds();
    let fidelity_ok = min_fidelity >= 1.0 - RECONSTRUCTION_TOLERANCE;
    let passed = fidelity_ok && no_cloning && (secrecy_informational || secrecy_distance <= SECRECY_TOLERANCE);
    Ok(SchemeValidation {
        descriptor: desc,
        secrets_tested: secrets.len(),
        min_fidelity,
        worst: (!fidelity_ok).then_some(worst).flatten(),
        secrecy_distance,
        secrecy_informational,
        no_cloning,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_labels_and_stars() {
        let s = star_structure(3).unwrap();
        assert_eq!(s.labels, vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(s.star_labels(0), vec![(0, 1), (0, 2)]);
        assert_eq!(s.star_labels(2), vec![(0, 2), (1, 2)]);
        assert!(s.no_cloning_holds());
        assert!(s.is_authorized(&[(1, 2), (0, 1)]));
        assert!(!s.is_authorized(&[(1, 2)]));
        let two = star_structure(2).unwrap();
        assert_eq!(two.stars, vec![vec![0], vec![0]]);
        assert!(star_structure(1).is_err());
    }

    #[test]
    fn larger_structures_keep_no_cloning() {
        let s = star_structure(4).unwrap();
        assert_eq!(s.labels.len(), 6);
        assert!(s.stars.iter().all(|st| st.len() == 3));
        assert!(s.no_cloning_holds());
    }

    #[test]
    fn threshold_reconstructs_from_each_star() {
        for d in [2, 3, 4, 5] {
            let v = validate_scheme(3, d, 5, 9).unwrap();
            assert!(v.passed, "{v:?}");
            assert!(!v.secrecy_informational);
        }
    }

    #[test]
    fn direct_scheme_secrecy_is_informational() {
        let v = validate_scheme(2, 3, 5, 1).unwrap();
        assert!(v.passed && v.secrecy_informational);
    }

    #[test]
    fn four_points_unsupported() {
        assert_eq!(validate_scheme(4, 3, 1, 0).unwrap_err(), QssError::Unsupported { n: 4, d: 3 });
    }

    #[test]
    fn reconstruction_needs_the_whole_star() {
        let scheme = Threshold23 { secret_dim: 3 };
        let mut sys = QuantumSystem::new();
        let reg = sys.add(StateVector::basis(&[3], &[1]).unwrap())[0];
        let bundle = scheme.encode(&mut sys, reg).unwrap();
        let mut partial = bundle.star(0);
        partial.remove(&(0, 2));
        assert_eq!(
            scheme.reconstruct(&mut sys, 0, &partial),
            Err(QssError::MissingShare { star: 0, label: (0, 2) })
        );
    }
}
