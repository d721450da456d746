use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use super::{Hyperparams, Learner, LearnerError, Result};

pub type LearnerFactory = Arc<dyn Fn(&Hyperparams) -> Result<Box<dyn Learner>> + Send + Sync>;

/// Name to factory map used by the CLI and the FFI layer.
///
/// Lookups may run concurrently; registration is expected at startup.
#[derive(Default)]
pub struct Registry {
    factories: RwLock<HashMap<String, LearnerFactory>>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// A registry holding `centroid`, `ewma` and `active_bearing`.
    pub fn with_builtins() -> Self {
        let reg = Self::new();
        reg.register("centroid", |hp| {
            Ok(Box::new(crate::learners::CentroidLearner::new(hp)?))
        })
        .expect("fresh registry");
        reg.register("ewma", |hp| Ok(Box::new(crate::learners::EwmaLearner::new(hp)?)))
            .expect("fresh registry");
        reg.register("active_bearing", |hp| {
            Ok(Box::new(crate::active::ActiveBearingLearner::new(hp)?))
        })
        .expect("fresh registry");
        reg
    }

    pub fn register<F>(&self, name: &str, factory: F) -> Result<()>
    where
        F: Fn(&Hyperparams) -> Result<Box<dyn Learner>> + Send + Sync + 'static,
    {
        if name.is_empty() {
            return Err(LearnerError::InvalidName);
        }
        let mut map = self.factories.write().unwrap_or_else(|e| e.into_inner());
        if map.contains_key(name) {
            return Err(LearnerError::DuplicateName(name.to_string()));
        }
        map.insert(name.to_string(), Arc::new(factory));
        Ok(())
    }

    pub fn create(&self, name: &str, hp: &Hyperparams) -> Result<Box<dyn Learner>> {
        let factory = {
            let map = self.factories.read().unwrap_or_else(|e| e.into_inner());
            map.get(name)
                .cloned()
                .ok_or_else(|| LearnerError::UnknownLearner(name.to_string()))?
        };
        factory(hp)
    }

    /// Registered names in sorted order.
    pub fn names(&self) -> Vec<String> {
        let map = self.factories.read().unwrap_or_else(|e| e.into_inner());
        let mut names: Vec<String> = map.keys().cloned().collect();
        names.sort();
        names
    }
}

impl std::fmt::Debug for Registry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Registry").field("names", &self.names()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::LearnerState;
    use crate::Scalar;

    #[test]
    fn register_and_create() {
        let reg = Registry::new();
        reg.register("centroid", |hp| {
            Ok(Box::new(crate::learners::CentroidLearner::new(hp)?))
        })
        .unwrap();
        let l = reg.create("centroid", &Hyperparams::new()).unwrap();
        assert_eq!(l.state(), LearnerState::Untrained);
        assert!(matches!(
            reg.register("centroid", |_| unreachable!()),
            Err(LearnerError::DuplicateName(_))
        ));
        assert!(matches!(
            reg.create("missing", &Hyperparams::new()),
            Err(LearnerError::UnknownLearner(_))
        ));
        assert!(matches!(reg.register("", |_| unreachable!()), Err(LearnerError::InvalidName)));
    }

    #[test]
    fn builtins_apply_strict_hyperparams() {
        let reg = Registry::with_builtins();
        assert_eq!(reg.names(), ["active_bearing", "centroid", "ewma"]);
        let hp: Hyperparams = [("temperature".to_string(), Scalar::Float(1.0))].into();
        assert_eq!(reg.create("centroid", &hp).unwrap().name(), "centroid");
        let bad: Hyperparams = [("bogus_key".to_string(), Scalar::Int(1))].into();
        assert!(matches!(reg.create("centroid", &bad), Err(LearnerError::BadHyperparam(_))));
        let ewma: Hyperparams = [
            ("alpha".to_string(), Scalar::Float(0.5)),
            ("threshold".to_string(), Scalar::Float(2.0)),
        ]
        .into();
        assert_eq!(reg.create("ewma", &ewma).unwrap().name(), "ewma");
    }

    #[test]
    fn concurrent_lookups() {
        let reg = Arc::new(Registry::with_builtins());
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let reg = Arc::clone(&reg);
                std::thread::spawn(move || reg.create("ewma", &Hyperparams::new()).is_ok())
            })
            .collect();
        assert!(handles.into_iter().all(|h| h.join().unwrap()));
    }
}
