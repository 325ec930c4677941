use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use summoning::qss::{
    scheme_for, star_structure, validate_scheme, validate_scheme_with, QssError, SchemeDescriptor, ShareBundle,
    ShareLabel, StarScheme,
};
use summoning::qudit_sim::{
    apply_correction, bell_pair, fidelity, teleport, QuantumSystem, RegisterId, StateVector,
};

/// `Φ_ab = d^{-1/2} Σ_q ω^{aq} |q⟩|q+b⟩`, built by hand.
fn bell_vector(d: usize, a: usize, b: usize) -> StateVector {
    let mut amps = vec![Complex64::new(0.0, 0.0); d * d];
    for q in 0..d {
        let phase = 2.0 * std::f64::consts::PI * (a * q) as f64 / d as f64;
        amps[q * d + (q + b) % d] = Complex64::from_polar(1.0 / (d as f64).sqrt(), phase);
    }
    StateVector::prepare(&[d, d], amps).unwrap()
}

#[test]
fn bell_basis_convention_matches_measurement() {
    for d in 2..=4 {
        for a in 0..d {
            for b in 0..d {
                let dist = bell_vector(d, a, b).bell_distribution(0, 1).unwrap();
                for (o, p) in dist {
                    let want = if (o.a as usize, o.b as usize) == (a, b) { 1.0 } else { 0.0 };
                    assert!((p - want).abs() < 1e-12, "d={d} ({a},{b}) saw {o:?} with {p}");
                }
            }
        }
    }
    assert!(fidelity(&bell_pair(3).unwrap(), &bell_vector(3, 0, 0)).unwrap() > 1.0 - 1e-14);
}

#[test]
fn teleportation_is_exact_and_outcomes_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for d in [2usize, 3, 5] {
        for _ in 0..100 {
            let secret = StateVector::random(&[d], &mut rng).unwrap();
            let joint = secret.tensor(&bell_pair(d).unwrap()).unwrap();
            let dist = joint.bell_distribution(0, 1).unwrap();
            assert_eq!(dist.len(), d * d);
            for (_, p) in &dist {
                assert!((p - 1.0 / (d * d) as f64).abs() < 1e-12);
            }
            let (outcome, mut rest) = teleport(&joint, 0, 1, &mut rng).unwrap();
            apply_correction(&mut rest, 0, outcome).unwrap();
            assert!(fidelity(&rest, &secret).unwrap() > 1.0 - 1e-10);
        }
    }
}

#[test]
fn every_outcome_is_corrected() {
    // force each outcome by projecting onto it through a fresh rng per branch
    let d = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let secret = StateVector::random(&[d], &mut rng).unwrap();
    let mut seen = std::collections::BTreeSet::new();
    for seed in 0..400 {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let joint = secret.tensor(&bell_pair(d).unwrap()).unwrap();
        let (o, mut rest) = teleport(&joint, 0, 1, &mut r).unwrap();
        apply_correction(&mut rest, 0, o).unwrap();
        assert!(fidelity(&rest, &secret).unwrap() > 1.0 - 1e-10);
        seen.insert((o.a, o.b));
    }
    assert_eq!(seen.len(), d * d);
}

#[test]
fn chained_teleports_keep_entanglement() {
    let d = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut sys = QuantumSystem::new();
    let (keep, travel) = sys.add_bell_pair(d).unwrap();
    let mut current = travel;
    for _ in 0..4 {
        let (near, far) = sys.add_bell_pair(d).unwrap();
        let o = sys.teleport(current, near, &mut rng).unwrap();
        sys.apply_correction(far, o).unwrap();
        current = far;
    }
    let state = sys.isolated_state(&[keep, current]).expect("pair is its own factor");
    assert!(fidelity(&state, &bell_pair(d).unwrap()).unwrap() > 1.0 - 1e-10);
    assert!(sys.norm_drift() < 1e-12);
}

#[test]
fn threshold_scheme_validates() {
    for d in 2..=5 {
        let v = validate_scheme(3, d, 20, d as u64).unwrap();
        assert!(v.passed, "d={d}: {v:?}");
        assert!(v.min_fidelity > 1.0 - 1e-10);
        assert!(v.secrecy_distance < 1e-9);
        assert!(!v.secrecy_informational);
        assert!(v.no_cloning);
    }
    let two = validate_scheme(2, 3, 10, 1).unwrap();
    assert!(two.passed && two.secrecy_informational);
}

#[test]
fn access_structures() {
    let s = star_structure(3).unwrap();
    assert!(s.no_cloning_holds());
    assert!(s.is_authorized(&[(0, 1), (0, 2)]));
    assert!(!s.is_authorized(&[(0, 1)]));
    assert!(matches!(scheme_for(4, 3), Err(QssError::Unsupported { .. })));
}

/// Puts the secret on share (0,1) in the clear and blanks the others.
struct Leaky;

impl StarScheme for Leaky {
    fn descriptor(&self) -> SchemeDescriptor {
        SchemeDescriptor { n: 3, secret_dim: 3, share_dim: 3, construction: "leaky".into() }
    }

    fn encode(&self, sys: &mut QuantumSystem, secret: RegisterId) -> Result<ShareBundle, QssError> {
        let blank = |sys: &mut QuantumSystem| sys.add(StateVector::basis(&[3], &[0]).unwrap())[0];
        let shares = BTreeMap::from([((0, 1), vec![secret]), ((0, 2), vec![blank(sys)]), ((1, 2), vec![blank(sys)])]);
        Ok(ShareBundle { n: 3, secret_dim: 3, shares })
    }

    fn reconstruct(
        &self,
        _sys: &mut QuantumSystem,
        star: usize,
        shares: &BTreeMap<ShareLabel, Vec<RegisterId>>,
    ) -> Result<RegisterId, QssError> {
        let label = if star == 2 { (0, 2) } else { (0, 1) };
        shares
            .get(&label)
            .map(|r| r[0])
            .ok_or(QssError::MissingShare { star, label })
    }
}

#[test]
fn validation_catches_a_leaky_scheme() {
    let v = validate_scheme_with(&Leaky, 10, 4).unwrap();
    assert!(!v.passed);
    assert!(v.min_fidelity < 0.99);
    assert!(v.secrecy_distance > 0.5);
}
