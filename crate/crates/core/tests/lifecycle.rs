use odr_core::learner::conformance::{check_lifecycle, fixtures, ConformanceFixture};
use odr_core::learner::{Hyperparams, Learner, Registry};
use odr_core::Scalar;

fn run(name: &str, hp: Hyperparams, fixture: ConformanceFixture) {
    let registry = Registry::with_builtins();
    let dir = tempfile::tempdir().unwrap();
    let make = || registry.create(name, &hp).unwrap();
    let report = check_lifecycle(&make, &fixture, dir.path()).unwrap_or_else(|e| panic!("{name}: {e}"));
    assert_eq!(report.save_load_checked, fixture.probes.len());
    assert_eq!(report.optimize_checked, fixture.probes.len());
    assert_eq!(report.reset_checked, fixture.probes.len());
}

#[test]
fn centroid_conforms() {
    run("centroid", Hyperparams::new(), fixtures::centroid(11, 100));
}

#[test]
fn ewma_conforms() {
    let hp = Hyperparams::from([
        ("alpha".to_string(), Scalar::Float(0.3)),
        ("threshold".to_string(), Scalar::Float(1.0)),
    ]);
    run("ewma", hp, fixtures::ewma(12, 100));
}

#[test]
fn active_bearing_conforms() {
    run("active_bearing", Hyperparams::new(), fixtures::active_bearing(13, 100));
}

#[test]
fn ewma_probes_include_anomalies() {
    // the reset comparison is only meaningful if verdicts depend on history
    let hp = Hyperparams::from([
        ("alpha".to_string(), Scalar::Float(0.3)),
        ("threshold".to_string(), Scalar::Float(1.0)),
    ]);
    let registry = Registry::with_builtins();
    let mut l = registry.create("ewma", &hp).unwrap();
    let fx = fixtures::ewma(12, 100);
    l.fit(fx.train.as_deref().unwrap()).unwrap();
    let verdicts: Vec<String> = fx
        .probes
        .iter()
        .map(|p| l.infer(p).unwrap()[0].to_string())
        .collect();
    assert!(verdicts.iter().any(|v| v.contains("anomaly")));
    assert!(verdicts.iter().any(|v| v.contains("normal")));
}

#[test]
fn broken_learner_is_caught() {
    // a learner whose reload loses its temperature must fail save/load identity
    struct Forgetful(odr_core::learners::CentroidLearner);
    impl Learner for Forgetful {
        fn name(&self) -> &str { "forgetful" }
        fn state(&self) -> odr_core::learner::LearnerState { self.0.state() }
        fn fit(&mut self, ds: &dyn odr_core::datasets::DatasetIterator) -> odr_core::learner::Result<odr_core::learner::TrainStats> { self.0.fit(ds) }
        fn eval(&mut self, ds: &dyn odr_core::datasets::DatasetIterator) -> odr_core::learner::Result<odr_core::learner::TrainStats> { self.0.eval(ds) }
        fn infer(&mut self, d: &odr_core::engine::Data) -> odr_core::learner::Result<Vec<odr_core::engine::Target>> { self.0.infer(d) }
        fn save(&self, p: &std::path::Path) -> odr_core::learner::Result<odr_core::package::ModelPackage> { self.0.save(p) }
        fn load(&mut self, p: &std::path::Path) -> odr_core::learner::Result<()> {
            self.0.load(p)?;
            let c = self.0.centroids().unwrap().to_vec();
            self.0 = odr_core::learners::CentroidLearner::from_centroids(c, None, 7.0)?;
            Ok(())
        }
        fn optimize(&mut self) -> odr_core::learner::Result<()> { self.0.optimize() }
        fn reset(&mut self) {}
    }
    let dir = tempfile::tempdir().unwrap();
    let make = || -> Box<dyn Learner> {
        Box::new(Forgetful(odr_core::learners::CentroidLearner::new(&Hyperparams::new()).unwrap()))
    };
    let err = check_lifecycle(&make, &fixtures::centroid(1, 20), dir.path()).unwrap_err();
    assert!(err.starts_with("save/load"), "{err}");
}
