use mvchain::chains::{qn_run, ExchangeableSource};
use mvchain::ergodicity::{drift_grid, drift_verify, small_set_radius, DriftSpec};
use mvchain::measure::BaseMeasure;
use mvchain::newton::{expected_chain_update, newton_run};
use mvchain::stats::Estimate;
use mvchain::{par_replicas, GaussianKernel, NewtonState, PredictiveUpdate, QnState, StreamRng};
use rand_distr::{Distribution, StandardNormal};

#[test]
fn drift_holds_on_the_documented_grid() {
    for (i, a) in [1.0, 10.0, 100.0].into_iter().enumerate() {
        let base = BaseMeasure::uniform(0.0, 1.0, a).unwrap();
        for n in [1, 2, 10, 20] {
            let spec = DriftSpec::from_base(n, &base, DriftSpec::midway_lambda(n, a, 1.0), 1.0).unwrap();
            let grid = drift_grid(&spec, 41).unwrap();
            assert!((grid[40] - 3.0 * small_set_radius(&spec)).abs() < 1e-12);
            let report = drift_verify(&spec, &base, &grid, 20_000, &StreamRng::new(400 + 10 * i as u64 + n as u64)).unwrap();
            assert!(report.pass, "n={n} a={a}: {:?}", report.points.iter().find(|p| !p.pass));
        }
    }
}

#[test]
fn expected_chain_is_the_mean_of_simulated_chains() {
    // Q_i over the distinct points 1, …, i: E[weight of atom j] = 1/i
    let i = 6;
    let reps = 100_000;
    let zs: Vec<f64> = (1..=i).map(|j| j as f64).collect();
    let weights = par_replicas(&StreamRng::new(410), reps, |_, r| {
        let mut q = QnState::new();
        for &z in &zs {
            q.advance(z, r).unwrap();
        }
        let mu = q.measure().unwrap();
        zs.iter().map(|&z| mu.mass_where(|x| x == z)).collect::<Vec<f64>>()
    });
    let mut expected = PredictiveUpdate::new();
    for &z in &zs {
        expected = expected_chain_update(expected, z);
    }
    let target = expected.measure().unwrap();
    for (j, &z) in zs.iter().enumerate() {
        let (s1, s2) = weights.iter().fold((0.0, 0.0), |(a, b), w| (a + w[j], b + w[j] * w[j]));
        let est = Estimate::from_sums(s1, s2, reps);
        let want = target.mass_where(|x| x == z);
        assert!((est.value - want).abs() <= 3.0 * est.std_error, "atom {z}: {est:?} vs {want}");
    }
}

#[test]
fn qn_run_from_an_iid_source_has_n_atoms() {
    let source = ExchangeableSource::Iid(BaseMeasure::gaussian(0.0, 1.0, 1.0).unwrap());
    let q = qn_run(9, &source, &mut StreamRng::new(411)).unwrap();
    assert_eq!(q.measure().unwrap().len(), 9);
}

#[test]
fn newton_concentrates_on_the_true_atom() {
    let k = GaussianKernel::new(1.0).unwrap();
    let prior = NewtonState::new(vec![-2.0, 2.0], vec![1.0, 1.0]).unwrap();
    let mut rng = StreamRng::new(412);
    let data: Vec<f64> = (0..200)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            2.0 + z
        })
        .collect();
    let fit = newton_run(&data, &k, prior).unwrap();
    let masses = fit.masses();
    assert!(masses[1] > 0.95, "{masses:?}");
}

#[test]
fn newton_with_no_data_returns_the_prior() {
    let k = GaussianKernel::new(1.0).unwrap();
    let prior = NewtonState::uniform(-3.0, 3.0, 64).unwrap();
    assert_eq!(newton_run(&[], &k, prior.clone()).unwrap(), prior);
}

#[test]
fn newton_depends_on_data_order() {
    let k = GaussianKernel::new(1.0).unwrap();
    let prior = NewtonState::uniform(-4.0, 4.0, 81).unwrap();
    let ab = newton_run(&[0.0, 3.0], &k, prior.clone()).unwrap();
    let ba = newton_run(&[3.0, 0.0], &k, prior).unwrap();
    // w_1 = 1, w_2 = 1/2: q_ab ∝ φ_0 (1 + φ_3 / c_0) while q_ba ∝ φ_3 (1 + φ_0 / c_3)
    let gap: f64 = ab.values().iter().zip(ba.values()).map(|(x, y)| (x - y).abs()).sum();
    assert!(gap > 1e-3, "{gap}");
}
