//! Shared fixtures for the criterion benchmarks.

use pgnaa_core::sampling::{build_dataset, Mode};
use pgnaa_core::synth::{default_library, DetectorResponse, MaterialKind};
use pgnaa_core::{AlloyLibrary, DetectorProfile, LabeledDataset};

/// The built-in aluminium library under the named detector preset.
pub fn aluminium(profile: &str) -> AlloyLibrary {
    let det = DetectorProfile::by_name(profile).expect("known preset");
    default_library(MaterialKind::Aluminium, &det, &DetectorResponse::for_profile(&det)).expect("built-in library renders")
}

/// `n` spectra per alloy of `time_s` seconds.
pub fn spectra(lib: &AlloyLibrary, time_s: f64, n: usize, mode: Mode, seed: u64) -> LabeledDataset {
    build_dataset(lib, time_s, n, seed, mode, mode.stream()).expect("valid sampling parameters")
}
