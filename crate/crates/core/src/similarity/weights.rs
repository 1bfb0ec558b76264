use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::Feature;
use crate::error::{Error, Result};

/// Tolerance on the weight sum.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Fusion weights, one per feature, on the probability simplex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights")]
pub struct WeightVector {
    api: f64,
    permission: f64,
    activity: f64,
    file: f64,
}

#[derive(Deserialize)]
struct RawWeights {
    api: f64,
    permission: f64,
    activity: f64,
    file: f64,
}

impl TryFrom<RawWeights> for WeightVector {
    type Error = Error;

    fn try_from(r: RawWeights) -> Result<Self> {
        WeightVector::new(r.api, r.permission, r.activity, r.file)
    }
}

impl WeightVector {
    pub fn new(api: f64, permission: f64, activity: f64, file: f64) -> Result<Self> {
        Self::from_array([api, permission, activity, file])
    }

    pub fn from_array(w: [f64; 4]) -> Result<Self> {
        if let Some(bad) = w.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::InvalidWeights(format!(
                "weight {bad} is negative or not finite"
            )));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidWeights(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(WeightVector {
            api: w[0],
            permission: w[1],
            activity: w[2],
            file: w[3],
        })
    }

    /// Scales nonnegative values onto the simplex. Fails if they sum to zero.
    pub fn normalized(w: [f64; 4]) -> Result<Self> {
        let clamped = w.map(|x| x.max(0.0));
        let sum: f64 = clamped.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(Error::InvalidWeights(
                "cannot normalize a zero vector".into(),
            ));
        }
        let mut out = clamped.map(|x| x / sum);
        // push rounding residue into the largest coordinate
        let residue = 1.0 - out.iter().sum::<f64>();
        let max = (0..4).max_by(|&a, &b| out[a].total_cmp(&out[b])).unwrap();
        out[max] = (out[max] + residue).max(0.0);
        Self::from_array(out)
    }

    pub fn uniform() -> Self {
        WeightVector {
            api: 0.25,
            permission: 0.25,
            activity: 0.25,
            file: 0.25,
        }
    }

    /// The vertex putting all weight on `feature`.
    pub fn vertex(feature: Feature) -> Self {
        let mut w = [0.0; 4];
        w[feature.index()] = 1.0;
        Self::from_array(w).unwrap()
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.api, self.permission, self.activity, self.file]
    }

    pub fn get(&self, feature: Feature) -> f64 {
        self.to_array()[feature.index()]
    }

    pub fn api(&self) -> f64 {
        self.api
    }

    pub fn permission(&self) -> f64 {
        self.permission
    }

    pub fn activity(&self) -> f64 {
        self.activity
    }

    pub fn file(&self) -> f64 {
        self.file
    }
}

impl Default for WeightVector {
    fn default() -> Self {
        Self::uniform()
    }
}

impl fmt::Display for WeightVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "api={:.3} permission={:.3} activity={:.3} file={:.3}",
            self.api, self.permission, self.activity, self.file
        )
    }
}

impl std::str::FromStr for WeightVector {
    type Err = Error;

    /// Parses `api,permission,activity,file`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidWeights(format!("`{p}`: {e}")))
            })
            .collect::<Result<_>>()?;
        let arr: [f64; 4] = parts.try_into().map_err(|_| {
            Error::InvalidWeights(format!("expected four comma-separated weights, got `{s}`"))
        })?;
        Self::from_array(arr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(WeightVector::new(0.166, 0.423, 0.295, 0.116).is_ok());
        assert!(WeightVector::new(0.5, 0.5, 0.5, 0.0).is_err());
        assert!(WeightVector::new(-0.1, 0.5, 0.5, 0.1).is_err());
        assert!(WeightVector::new(f64::NAN, 0.5, 0.5, 0.0).is_err());
    }

    #[test]
    fn normalize() {
        let w = WeightVector::normalized([0.3, 0.25, 0.25, 0.25]).unwrap();
        assert!((w.to_array().iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOLERANCE);
        assert!(WeightVector::normalized([0.0; 4]).is_err());
        assert_eq!(
            WeightVector::normalized([-1.0, 2.0, 0.0, 0.0]).unwrap(),
            WeightVector::vertex(Feature::Permission)
        );
    }

    #[test]
    fn parse_and_serde() {
        let w: WeightVector = "0.1, 0.2, 0.3, 0.4".parse().unwrap();
        assert_eq!(w.file(), 0.4);
        assert!("0.1,0.2".parse::<WeightVector>().is_err());
        let json = serde_json::to_string(&w).unwrap();
        assert_eq!(
            json,
            r#"{"api":0.1,"permission":0.2,"activity":0.3,"file":0.4}"#
        );
        assert_eq!(serde_json::from_str::<WeightVector>(&json).unwrap(), w);
        assert!(serde_json::from_str::<WeightVector>(
            r#"{"api":1,"permission":1,"activity":0,"file":0}"#
        )
        .is_err());
    }
}
