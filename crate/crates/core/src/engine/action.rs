use serde::{Deserialize, Serialize};

use super::EngineError;

pub const MAX_AXES: usize = 4;

/// A suggested next motion for active perception.
///
/// Between one and four axes, each component in `[-1, 1]`; the sign selects
/// the direction of travel along that axis and the magnitude how far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Action {
    axes: Vec<f64>,
}

impl Action {
    /// Strict constructor: out-of-range components are an error, never clamped.
    pub fn new(axes: &[f64]) -> Result<Self, EngineError> {
        check_arity(axes.len())?;
        for (axis, &value) in axes.iter().enumerate() {
            // NaN fails the range test as well
            if !(-1.0..=1.0).contains(&value) {
                return Err(EngineError::ComponentOutOfRange { axis, value });
            }
        }
        Ok(Self {
            axes: axes.to_vec(),
        })
    }

    /// Clamps every component into `[-1, 1]`. Non-finite input is rejected.
    pub fn clamped(axes: &[f64]) -> Result<Self, EngineError> {
        check_arity(axes.len())?;
        if let Some(v) = axes.iter().find(|v| !v.is_finite()) {
            return Err(EngineError::NonFinite(format!("action component {v}")));
        }
        let clamped: Vec<f64> = axes.iter().map(|v| v.clamp(-1.0, 1.0)).collect();
        Self::new(&clamped)
    }

    pub fn axes(&self) -> &[f64] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.axes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axes.is_empty()
    }
}

fn check_arity(k: usize) -> Result<(), EngineError> {
    if (1..=MAX_AXES).contains(&k) {
        Ok(())
    } else {
        Err(EngineError::AxisCountInvalid(k))
    }
}

impl TryFrom<Vec<f64>> for Action {
    type Error = EngineError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Action::new(&v)
    }
}

impl From<Action> for Vec<f64> {
    fn from(a: Action) -> Self {
        a.axes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn validate_examples() {
        assert_eq!(Action::new(&[0.0]).unwrap().axes(), &[0.0]);
        assert_eq!(Action::new(&[1.0, -1.0, 0.5, -0.25]).unwrap().len(), 4);
        assert!(matches!(
            Action::new(&[1.5, 0.0]),
            Err(EngineError::ComponentOutOfRange { axis: 0, .. })
        ));
        assert!(matches!(Action::new(&[]), Err(EngineError::AxisCountInvalid(0))));
        assert!(matches!(
            Action::new(&[0.0; 5]),
            Err(EngineError::AxisCountInvalid(5))
        ));
        assert!(Action::new(&[f64::NAN]).is_err());
    }

    #[test]
    fn clamp_examples() {
        assert_eq!(Action::clamped(&[1.5, -2.0]).unwrap().axes(), &[1.0, -1.0]);
        assert_eq!(Action::clamped(&[0.3]).unwrap().axes(), &[0.3]);
        assert!(matches!(
            Action::clamped(&[f64::NAN]),
            Err(EngineError::NonFinite(_))
        ));
        assert!(matches!(
            Action::clamped(&[f64::INFINITY]),
            Err(EngineError::NonFinite(_))
        ));
    }

    #[test]
    fn deserialization_is_validated() {
        let ok: Action = serde_json::from_str("[0.5,-0.5]").unwrap();
        assert_eq!(ok.axes(), &[0.5, -0.5]);
        assert!(serde_json::from_str::<Action>("[2.0]").is_err());
    }

    proptest! {
        #[test]
        fn components_stay_in_range(axes in prop::collection::vec(-1e6f64..1e6, 1..=4)) {
            let a = Action::clamped(&axes).unwrap();
            prop_assert!(a.axes().iter().all(|v| (-1.0..=1.0).contains(v)));
            if let Ok(strict) = Action::new(&axes) {
                prop_assert_eq!(strict, a);
            }
        }
    }
}
