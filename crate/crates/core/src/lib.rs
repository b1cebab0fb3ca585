//! Alloy classification from prompt-gamma spectra.
//!
//! The crate covers the whole pipeline: categorical sampling of short-term
//! measurements from long-term spectra, channel preprocessing, six
//! classifiers behind one interface, a conditional variational autoencoder
//! used as an alternative training-data generator, a synthetic alloy
//! library, and the accuracy-versus-measurement-time benchmark protocol.

pub mod classifiers;
pub mod cvae;
pub mod error;
pub mod experiment;
pub mod io;
pub mod preprocess;
pub mod rng;
pub mod sampling;
pub mod spectrum;
pub mod synth;

pub use error::{Error, Result};
pub use preprocess::{BandWeighting, PeakParams, Preprocessing};
pub use sampling::{build_training_set, LabeledDataset, Mode, SamplingConfig};
pub use spectrum::{
    AlloyEntry, AlloyLibrary, Calibration, CategoricalDistribution, DetectorProfile, Peak, PeakSet,
    Spectrum,
};
