use crate::error::{ModelError, Result};
use crate::model::{AarchParams, ModelSpec, TarParams, ThresholdPartition};

/// A published threshold autoregression for a classic data set.
#[derive(Debug, Clone, PartialEq)]
pub struct CannedSpec {
    pub name: String,
    pub source: String,
    pub partition: ThresholdPartition,
    pub tar: TarParams,
    /// Per-regime innovation standard deviations, when published.
    pub noise_sd: Option<Vec<f64>>,
}

impl CannedSpec {
    /// Full model with the given variance recursion attached.
    pub fn to_model_spec(&self, aarch: AarchParams) -> Result<ModelSpec> {
        ModelSpec::new(self.partition.clone(), self.tar.clone(), aarch)
    }

    /// Model with constant variance equal to the square of the first
    /// regime's standard deviation (unit variance when none is published).
    pub fn homoskedastic_spec(&self) -> Result<ModelSpec> {
        let sd = self.noise_sd.as_ref().map_or(1.0, |v| v[0]);
        self.to_model_spec(AarchParams::homoskedastic(sd * sd, 1)?)
    }
}

fn lynx() -> CannedSpec {
    CannedSpec {
        name: "lynx".into(),
        source: "Tong (1983), Canadian lynx, log10 scale".into(),
        partition: ThresholdPartition::new(2, vec![3.25]).expect("valid"),
        tar: TarParams::new(vec![vec![0.62, 1.25, -0.43], vec![2.25, 1.52, -1.24]]).expect("valid"),
        noise_sd: Some(vec![0.2, 0.25]),
    }
}

fn sunspot() -> CannedSpec {
    let low = vec![
        1.9191, 0.8416, 0.0728, -0.3153, 0.1479, -1.985, -0.0005, 0.1875, -0.2701, 0.2116,
        0.0091, 0.0873,
    ];
    let mut high = vec![4.2746, 1.4431, -0.8408, 0.0554];
    high.resize(low.len(), 0.0);
    CannedSpec {
        name: "sunspot".into(),
        source: "Tong (1983), Wolf sunspot numbers 1749-1924, 2(sqrt(w) - 1) scale".into(),
        partition: ThresholdPartition::new(8, vec![11.9824]).expect("valid"),
        tar: TarParams::new(vec![low, high]).expect("valid"),
        noise_sd: None,
    }
}

/// The lynx and sunspot fits.
pub fn canned_specs() -> Vec<CannedSpec> {
    vec![lynx(), sunspot()]
}

pub fn canned_spec(name: &str) -> Result<CannedSpec> {
    canned_specs()
        .into_iter()
        .find(|c| c.name == name)
        .ok_or_else(|| ModelError::InvalidParameter(format!("unknown canned spec '{name}'")))
}
