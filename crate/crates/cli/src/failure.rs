use mitoforge::error::ErrorClass;
use serde_json::json;

/// A failed run: what went wrong, where, and which exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub class: ErrorClass,
    pub module: &'static str,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            class: ErrorClass::Config,
            module: "cli",
            message: message.into(),
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self {
            class: ErrorClass::Input,
            module: "cli",
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.class {
            ErrorClass::Config => 2,
            ErrorClass::Input => 3,
            ErrorClass::Numeric => 4,
        }
    }

    pub fn record(&self) -> serde_json::Value {
        let class = match self.class {
            ErrorClass::Config => "config",
            ErrorClass::Input => "input",
            ErrorClass::Numeric => "numeric",
        };
        json!({
            "class": class,
            "exit_code": self.exit_code(),
            "module": self.module,
            "message": self.message,
        })
    }
}

impl From<mitoforge::Error> for Failure {
    fn from(e: mitoforge::Error) -> Self {
        Self {
            class: e.class(),
            module: e.module(),
            message: e.to_string(),
        }
    }
}

macro_rules! via_core {
    ($($t:ty),*) => {
        $(impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                mitoforge::Error::from(e).into()
            }
        })*
    };
}

via_core!(
    mitoforge::volume::VolumeError,
    mitoforge::mesh::MeshError,
    mitoforge::occupancy::OccupancyError,
    mitoforge::implicit::FitError,
    mitoforge::microscope::MicroscopeError,
    mitoforge::metrics::MetricsError,
    mitoforge::dataset::DatasetError
);

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, Failure>;
