//! Simulator checks against dense reference computations: matrix
//! exponentials by scaled Taylor series, explicit Kronecker products and
//! brute-force traces on small chains.

use cclab_core::cumulant::{cumulant, CumulantKind};
use cclab_core::sim::{
    build_hamiltonian, commutator_norm, evolve, expectation, gibbs_state, localize, moment_provider, translate,
    ChainModel, CMat, Hamiltonian, LocalOperator, SimError, Space,
};
use cclab_core::C64;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dense(m: &CMat) -> Array2<C64> {
    m.to_complex()
}

fn expm(a: &Array2<C64>) -> Array2<C64> {
    let norm: f64 = a.iter().map(|z| z.norm()).sum::<f64>().max(1e-300);
    let squarings = (norm.log2().ceil().max(0.0) as i32) + 2;
    let scaled = a.mapv(|z| z / 2f64.powi(squarings));
    let n = a.nrows();
    let mut result = Array2::<C64>::eye(n);
    let mut term = Array2::<C64>::eye(n);
    for k in 1..30 {
        term = term.dot(&scaled).mapv(|z| z / k as f64);
        result += &term;
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

fn max_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn trace(a: &Array2<C64>) -> C64 {
    a.diag().sum()
}

/// Reference Gibbs state and evolution operator built from matrix exponentials.
struct Reference {
    h: Array2<C64>,
    rho: Array2<C64>,
}

impl Reference {
    fn new(h: &CMat, beta: f64) -> Self {
        let h = dense(h);
        let w = expm(&h.mapv(|z| -beta * z));
        let z = trace(&w);
        Reference { rho: w.mapv(|x| x / z), h }
    }

    fn evolved(&self, a: &Array2<C64>, t: f64) -> Array2<C64> {
        let u = expm(&self.h.mapv(|z| C64::new(0.0, t) * z));
        let ud = u.t().mapv(|z| z.conj());
        u.dot(a).dot(&ud)
    }

    fn moment(&self, ops: &[Array2<C64>]) -> C64 {
        let prod = ops.iter().skip(1).fold(ops[0].clone(), |acc, o| acc.dot(o));
        trace(&self.rho.dot(&prod))
    }
}

#[test]
fn infinite_temperature_state_is_maximally_mixed() {
    let model = ChainModel::tfim(5, 1.0, 0.7, 0.0);
    let ens = gibbs_state(build_hamiltonian(&model).unwrap(), 0.0).unwrap();
    let rho = ens.density_matrix();
    let mut id = CMat::identity(32);
    id.scale(1.0 / 32.0);
    assert!(rho.max_abs_diff(&id) < 1e-15);
    let z = LocalOperator::parse(ens.space(), "Z@2").unwrap();
    assert!(expectation(&ens, &z).unwrap().norm() < 1e-15);
}

#[test]
fn low_temperature_state_projects_on_ground_space() {
    // h = 2 puts the chain deep in the paramagnet: unique, gapped ground state
    let model = ChainModel::tfim(6, 1.0, 2.0, 1e3);
    let h = build_hamiltonian(&model).unwrap();
    let (vals, vecs) = cclab_core::sim::linalg::eigh(h.matrix(), true).unwrap();
    assert!(vals[1] - vals[0] > 1.0);
    let ground = dense(&vecs).column(0).to_owned();
    let ens = gibbs_state(h, 1e3).unwrap();
    let rho = dense(&ens.density_matrix());
    let fidelity = ground.iter().enumerate().fold(C64::new(0.0, 0.0), |acc, (i, gi)| {
        acc + gi.conj() * ground.iter().enumerate().map(|(j, gj)| rho[[i, j]] * gj).sum::<C64>()
    });
    assert!(fidelity.re > 1.0 - 1e-6, "fidelity {fidelity}");
}

#[test]
fn random_hermitian_state_matches_exponential() {
    let space = Space::new(3, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut raw = Array2::<C64>::zeros((8, 8));
    for i in 0..8 {
        for j in 0..=i {
            let v = if i == j {
                C64::new(rng.gen_range(-1.0..1.0), 0.0)
            } else {
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            };
            raw[[i, j]] = v;
            raw[[j, i]] = v.conj();
        }
    }
    let h = CMat::from_complex(&raw);
    let reference = Reference::new(&h, 0.5);
    let ens = gibbs_state(Hamiltonian::from_matrix(space, h).unwrap(), 0.5).unwrap();
    let rho = ens.density_matrix();
    assert!((rho.trace() - 1.0).norm() < 1e-10);
    assert!(max_diff(&dense(&rho), &reference.rho) < 1e-12);
    let report = ens.check_invariants().unwrap();
    assert!(report.stationarity < 1e-10 * report.hamiltonian_norm);
}

#[test]
fn non_hermitian_matrix_rejected() {
    let space = Space::new(2, 2).unwrap();
    let mut m = Array2::<f64>::zeros((4, 4));
    m[[0, 1]] = 1.0;
    assert!(matches!(Hamiltonian::from_matrix(space, CMat::from_real(m)), Err(SimError::NonHermitian { .. })));
}

#[test]
fn evolution_matches_exponential_and_preserves_norm() {
    let model = ChainModel::tfim(4, 1.0, 1.05, 0.3);
    let h = build_hamiltonian(&model).unwrap();
    let reference = Reference::new(h.matrix(), 0.3);
    let ens = gibbs_state(h, 0.3).unwrap();
    let space = ens.space().clone();
    let a = LocalOperator::parse(&space, "ZX@1").unwrap();
    assert_eq!(evolve(&a, 0.0, &ens).unwrap(), a);
    let at = evolve(&a, 1.7, &ens).unwrap();
    let expect = reference.evolved(&dense(&a.materialize().unwrap()), 1.7);
    assert!(max_diff(&dense(&at.materialize().unwrap()), &expect) < 1e-10);
    let norm_t = at.materialize().unwrap().spectral_norm().unwrap();
    assert!((norm_t - a.norm().unwrap()).abs() < 1e-10);
    // H commutes with itself
    let hop = LocalOperator::from_full(&space, ens.hamiltonian().matrix().clone()).unwrap();
    let ht = evolve(&hop, 0.9, &ens).unwrap();
    assert!(ht.materialize().unwrap().max_abs_diff(ens.hamiltonian().matrix()) < 1e-10);
    // evolving back returns the original operator
    assert_eq!(evolve(&at, -1.7, &ens).unwrap(), a);
}

#[test]
fn evolved_moments_match_reference() {
    let model = ChainModel::tfim(4, 1.0, 1.05, 0.4);
    let h = build_hamiltonian(&model).unwrap();
    let reference = Reference::new(h.matrix(), 0.4);
    let ens = gibbs_state(h, 0.4).unwrap();
    let space = ens.space().clone();
    let z0 = LocalOperator::parse(&space, "Z@0").unwrap();
    let x1 = LocalOperator::parse(&space, "X@1").unwrap();
    let y2 = LocalOperator::parse(&space, "YZ@2").unwrap();
    let dz0 = dense(&z0.materialize().unwrap());
    let dx1 = dense(&x1.materialize().unwrap());
    let dy2 = dense(&y2.materialize().unwrap());
    for &t in &[0.0, 0.35, -1.2] {
        let zt = evolve(&z0, t, &ens).unwrap();
        let dzt = reference.evolved(&dz0, t);
        let cases: Vec<(Vec<&LocalOperator>, Vec<Array2<C64>>)> = vec![
            (vec![&zt], vec![dzt.clone()]),
            (vec![&zt, &x1], vec![dzt.clone(), dx1.clone()]),
            (vec![&x1, &zt], vec![dx1.clone(), dzt.clone()]),
            (vec![&x1, &zt, &y2], vec![dx1.clone(), dzt.clone(), dy2.clone()]),
            (vec![&zt, &y2, &x1, &zt], vec![dzt.clone(), dy2.clone(), dx1.clone(), dzt.clone()]),
        ];
        for (ops, mats) in cases {
            let got = ens.moment(&ops).unwrap();
            let want = reference.moment(&mats);
            assert!((got - want).norm() < 1e-11, "t={t}: {got} vs {want}");
        }
    }
    // two differently evolved operands
    let xt = evolve(&x1, 0.8, &ens).unwrap();
    let zt = evolve(&z0, -0.3, &ens).unwrap();
    let got = ens.moment(&[&zt, &xt, &y2]).unwrap();
    let want = reference.moment(&[reference.evolved(&dz0, -0.3), reference.evolved(&dx1, 0.8), dy2.clone()]);
    assert!((got - want).norm() < 1e-11);
}

#[test]
fn batched_times_match_the_reference() {
    let model = ChainModel::tfim(4, 1.0, 0.7, 0.5);
    let h = build_hamiltonian(&model).unwrap();
    let reference = Reference::new(h.matrix(), 0.5);
    let ens = gibbs_state(h, 0.5).unwrap();
    let space = ens.space().clone();
    let x0 = LocalOperator::parse(&space, "X@0").unwrap();
    let z2 = LocalOperator::parse(&space, "Z@2").unwrap();
    let y1 = LocalOperator::parse(&space, "Y@1").unwrap();
    let times = [0.0, 0.1, 0.45, -0.9, 2.0];
    ens.prefetch_moments(&[&x0, &z2, &y1], 1, &times).unwrap();
    let mats: Vec<Array2<C64>> = [&x0, &z2, &y1].iter().map(|o| dense(&o.materialize().unwrap())).collect();
    for &t in &times {
        let zt = evolve(&z2, t, &ens).unwrap();
        let got = ens.moment(&[&x0, &zt, &y1]).unwrap();
        let want = reference.moment(&[mats[0].clone(), reference.evolved(&mats[1], t), mats[2].clone()]);
        assert!((got - want).norm() < 1e-11, "t={t}: {got} vs {want}");
    }
}

#[test]
fn wide_supports_use_full_space_route() {
    let model = ChainModel::tfim(10, 1.0, 0.9, 0.25);
    let ens = gibbs_state(build_hamiltonian(&model).unwrap(), 0.25).unwrap();
    let space = ens.space().clone();
    let wide = LocalOperator::parse(&space, "ZZZZZZZZZ@0").unwrap();
    let narrow = LocalOperator::parse(&space, "X@4").unwrap();
    assert_eq!(wide.support().len(), 9);
    let got = ens.moment(&[&narrow, &wide]).unwrap();
    let rho = ens.density_matrix();
    let prod = narrow.materialize().unwrap().matmul(&wide.materialize().unwrap());
    let want = rho.matmul(&prod).trace();
    assert!((got - want).norm() < 1e-12);
    let small = ens.moment(&[&narrow, &LocalOperator::parse(&space, "ZZ@4").unwrap()]).unwrap();
    let prod = narrow.materialize().unwrap().matmul(&LocalOperator::parse(&space, "ZZ@4").unwrap().materialize().unwrap());
    assert!((small - rho.matmul(&prod).trace()).norm() < 1e-12);
}

#[test]
fn symmetries_of_the_thermal_state() {
    let model = ChainModel::tfim(8, 1.0, 1.05, 0.2);
    let ens = gibbs_state(build_hamiltonian(&model).unwrap(), 0.2).unwrap();
    let space = ens.space().clone();
    let x0 = LocalOperator::parse(&space, "X@0").unwrap();
    let base = expectation(&ens, &x0).unwrap();
    for x in 1..8 {
        let ex = expectation(&ens, &translate(&x0, x).unwrap()).unwrap();
        assert!((ex - base).norm() < 1e-10);
    }
    for t in [0.3, 2.0, 5.5] {
        let et = expectation(&ens, &evolve(&x0, t, &ens).unwrap()).unwrap();
        assert!((et - base).norm() < 1e-8);
    }
    let report = ens.check_invariants().unwrap();
    assert!(report.passed, "{report:?}");
}

#[test]
fn evolved_translation_commutes_with_evolution() {
    let model = ChainModel::tfim(6, 1.0, 0.8, 0.2);
    let ens = gibbs_state(build_hamiltonian(&model).unwrap(), 0.2).unwrap();
    let space = ens.space().clone();
    let a = LocalOperator::parse(&space, "Z@0").unwrap();
    let shifted_then_evolved = evolve(&translate(&a, 2).unwrap(), 0.7, &ens).unwrap();
    let evolved_then_shifted = translate(&evolve(&a, 0.7, &ens).unwrap(), 2).unwrap();
    assert_eq!(shifted_then_evolved, evolved_then_shifted);
    let map = space.translation_map(2);
    let direct = space.permute_full(&evolve(&a, 0.7, &ens).unwrap().materialize().unwrap(), &map);
    assert!(direct.max_abs_diff(&evolved_then_shifted.materialize().unwrap()) < 1e-12);
}

#[test]
fn localization_error_shrinks_with_radius() {
    let model = ChainModel::tfim(10, 1.0, 1.05, 0.2);
    let ens = gibbs_state(build_hamiltonian(&model).unwrap(), 0.2).unwrap();
    let space = ens.space().clone();
    let a = LocalOperator::parse(&space, "Z@0").unwrap();
    let at = evolve(&a, 0.5, &ens).unwrap();
    let full = at.materialize().unwrap();
    let mut errors = Vec::new();
    for nu in 0..=5 {
        let loc = localize(&at, nu).unwrap();
        assert!(loc.norm().unwrap() <= a.norm().unwrap() + 1e-10);
        let err = loc.materialize().unwrap().sub(&full).spectral_norm().unwrap();
        errors.push(err);
    }
    assert!(errors.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{errors:?}");
    // the Lieb-Robinson speed of this chain is about 2, so nu > 2 t + 2 suffices
    for nu in 4..=5 {
        assert!(errors[nu] < 0.05 * a.norm().unwrap(), "{errors:?}");
    }
    assert!(errors[5] < 1e-12);
    // unevolved operators are fixed by localization
    let b = LocalOperator::parse(&space, "XZ@3").unwrap();
    assert_eq!(localize(&b, 0).unwrap(), b);
}

#[test]
fn commutator_norms_of_evolved_operators() {
    let model = ChainModel::tfim(6, 1.0, 1.05, 0.2);
    let ens = gibbs_state(build_hamiltonian(&model).unwrap(), 0.2).unwrap();
    let space = ens.space().clone();
    let a = LocalOperator::parse(&space, "Z@0").unwrap();
    let b = LocalOperator::parse(&space, "Z@3").unwrap();
    assert_eq!(commutator_norm(&a, &b).unwrap(), 0.0);
    let at = evolve(&a, 0.6, &ens).unwrap();
    let got = commutator_norm(&at, &b).unwrap();
    let ma = at.materialize().unwrap();
    let mb = b.materialize().unwrap();
    let want = ma.matmul(&mb).sub(&mb.matmul(&ma)).spectral_norm().unwrap();
    assert!((got - want).abs() < 1e-8 * want.max(1e-12), "{got} vs {want}");
    // time-reversal symmetry of a real Hamiltonian with real observables
    let back = commutator_norm(&evolve(&a, -0.6, &ens).unwrap(), &b).unwrap();
    assert!((back - got).abs() < 1e-10);
}

#[test]
fn provider_feeds_the_cumulant_engine() {
    let model = ChainModel::tfim(6, 1.0, 1.05, 0.3);
    let ens = gibbs_state(build_hamiltonian(&model).unwrap(), 0.3).unwrap();
    let space = ens.space().clone();
    let a = LocalOperator::parse(&space, "Z@2").unwrap();
    let b = LocalOperator::parse(&space, "Z@0").unwrap();
    let provider = moment_provider(&ens, vec![a.clone(), b.clone()]).unwrap();
    let c2 = cumulant(CumulantKind::Classical, &provider, &[0, 1]).unwrap();
    let raw = ens.moment(&[&a, &b]).unwrap() - expectation(&ens, &a).unwrap() * expectation(&ens, &b).unwrap();
    assert_eq!(c2, raw);
    let other = Space::new(4, 2).unwrap();
    let foreign = LocalOperator::parse(&other, "Z@0").unwrap();
    assert!(matches!(ens.moment(&[&foreign]), Err(SimError::DimensionMismatch { .. })));
}
