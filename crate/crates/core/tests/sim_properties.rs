use banditfit::dloc::dloc_objective;
use banditfit::sim::{make_dataset, sample_params, Bandit, EnvSpec, Setup};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn true_parameters_explain_data_better_than_random_ones() {
    for setup in [Setup::Bsc, Setup::Ind, Setup::Sub] {
        let spec = EnvSpec::preset(setup, Bandit::TwoArm, 200, 77);
        let ds = make_dataset(&spec, 100).unwrap();
        let cfg = spec.model_config();
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        let (mut at_truth, mut at_random) = (0.0, 0.0);
        for ep in &ds.episodes {
            let t = dloc_objective(ep.true_params.as_ref().unwrap(), ep, &cfg).unwrap();
            assert!(t.is_finite());
            at_truth += t;
            at_random += dloc_objective(&sample_params(&spec, &mut rng).unwrap(), ep, &cfg).unwrap();
        }
        assert!(at_truth < at_random, "{setup:?}: {at_truth} vs {at_random}");
    }
}

#[test]
fn identical_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = EnvSpec::preset(Setup::Sub, Bandit::TenArm, 50, 3);
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    make_dataset(&spec, 5).unwrap().write(&a).unwrap();
    make_dataset(&spec, 5).unwrap().write(&b).unwrap();
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn full_scale_dataset_shape() {
    let spec = EnvSpec::preset(Setup::Bsc, Bandit::TwoArm, 200, 1);
    let ds = make_dataset(&spec, 1000).unwrap();
    assert_eq!(ds.episodes.len(), 1000);
    assert!(ds.episodes.iter().all(|e| e.n() == 200 && e.k() == 1 && e.m() == 2));
}
