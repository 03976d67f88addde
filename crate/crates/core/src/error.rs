use thiserror::Error;

use crate::dataset::DatasetError;
use crate::implicit::FitError;
use crate::mesh::MeshError;
use crate::metrics::MetricsError;
use crate::microscope::MicroscopeError;
use crate::occupancy::OccupancyError;
use crate::volume::VolumeError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-level error, tagged with the module that raised it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("volume: {0}")]
    Volume(#[from] VolumeError),
    #[error("mesh: {0}")]
    Mesh(#[from] MeshError),
    #[error("occupancy: {0}")]
    Occupancy(#[from] OccupancyError),
    #[error("implicit fit: {0}")]
    Fit(#[from] FitError),
    #[error("microscope: {0}")]
    Microscope(#[from] MicroscopeError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
    #[error("dataset: {0}")]
    Dataset(#[from] DatasetError),
}

/// Coarse failure class, used by the CLI to choose an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Input,
    Numeric,
}

impl Error {
    pub fn module(&self) -> &'static str {
        match self {
            Error::Volume(_) => "volume",
            Error::Mesh(_) => "mesh",
            Error::Occupancy(_) => "occupancy",
            Error::Fit(_) => "implicit_fit",
            Error::Microscope(_) => "microscope",
            Error::Metrics(_) => "metrics",
            Error::Dataset(_) => "datasetgen",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Fit(e) => fit_class(e),
            Error::Microscope(e) => microscope_class(e),
            Error::Metrics(MetricsError::EmptyUnion) => ErrorClass::Numeric,
            Error::Metrics(MetricsError::InvalidSampleCount) => ErrorClass::Config,
            Error::Volume(VolumeError::InvalidFactor(_) | VolumeError::InvalidConnectivity(_)) => ErrorClass::Config,
            Error::Mesh(MeshError::InvalidIso(_) | MeshError::InvalidDensity(_)) => ErrorClass::Config,
            Error::Dataset(e) => match e {
                DatasetError::InvalidConfig(_) | DatasetError::InvalidSplit(_) | DatasetError::OutputNotEmpty(_) => {
                    ErrorClass::Config
                }
                DatasetError::Microscope(m) => microscope_class(m),
                DatasetError::Fit(f) => fit_class(f),
                _ => ErrorClass::Input,
            },
            _ => ErrorClass::Input,
        }
    }
}

fn fit_class(e: &FitError) -> ErrorClass {
    match e {
        FitError::Diverged { .. } => ErrorClass::Numeric,
        FitError::InvalidConfig(_) => ErrorClass::Config,
        _ => ErrorClass::Input,
    }
}

fn microscope_class(e: &MicroscopeError) -> ErrorClass {
    match e {
        MicroscopeError::InvalidConfig(_) | MicroscopeError::UnknownPreset(_) => ErrorClass::Config,
        MicroscopeError::ZeroSignal | MicroscopeError::CountOverflow(_) => ErrorClass::Numeric,
        _ => ErrorClass::Input,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_dataset_errors_keep_their_class() {
        let e: Error = DatasetError::Microscope(MicroscopeError::UnknownPreset("x".into())).into();
        assert_eq!(e.class(), ErrorClass::Config);
        let e: Error = DatasetError::Fit(FitError::Diverged { epoch: 3 }).into();
        assert_eq!(e.class(), ErrorClass::Numeric);
        let e: Error = VolumeError::SizeMismatch { expected: 64, actual: 63 }.into();
        assert_eq!(e.class(), ErrorClass::Input);
        assert_eq!(e.module(), "volume");
    }
}
