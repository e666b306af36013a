pub mod body;
pub mod config;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod io;
pub mod snapshot;
pub mod spectral;
pub mod speeds;
pub mod symmetric;
pub mod verify;

pub use body::{curvature, embed, pinching_status, recenter, CurvatureField, SupportFunction};
pub use error::{Error, Result};
pub use snapshot::Snapshot;
pub use spectral::{SpectralField, SphereGrid};
pub use speeds::SpeedSpec;
pub use config::ExperimentConfig;
pub use flow::{Flow, FlowConfig, RunStatus, Trajectory};
