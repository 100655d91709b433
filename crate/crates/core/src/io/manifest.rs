//! TOML dataset manifests.
//!
//! ```toml
//! seed = 0
//! multiplex_group = 1
//!
//! [geometry]
//! led_pitch_mm = 4.0
//! ...
//!
//! [grid]
//! n1 = 64
//! ...
//!
//! [noise]
//! kind = "none"            # or kind = "gaussian", sigma = 0.01
//!
//! [[measurement]]          # one per image, optional
//! leds = [{ led_index = 4, freq_cycles_per_um = [0.0, 0.0], pixel_offset = [0, 0] }]
//! ```
//!
//! A manifest without `[[measurement]]` entries is a template: the LED plan
//! is generated from `geometry`, `grid`, `multiplex_group` and `seed`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, FormatError, Result};
use crate::optics::{validate_plan, IlluminationGeometry, LedOffset, MultiplexPlan};
use crate::phantom::{DatasetManifest, GridSize, NoiseModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestDoc {
    pub seed: u64,
    #[serde(default = "default_group")]
    pub multiplex_group: usize,
    pub geometry: IlluminationGeometry,
    pub grid: GridSize,
    #[serde(default = "default_noise")]
    pub noise: NoiseModel,
    #[serde(default, rename = "measurement", skip_serializing_if = "Vec::is_empty")]
    pub measurements: Vec<MeasurementEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementEntry {
    pub leds: Vec<LedOffset>,
}

fn default_group() -> usize {
    1
}

fn default_noise() -> NoiseModel {
    NoiseModel::None
}

impl ManifestDoc {
    pub fn has_plan(&self) -> bool {
        !self.measurements.is_empty()
    }

    /// Builds the manifest, generating the plan when none is listed.
    pub fn resolve(self) -> Result<DatasetManifest> {
        if !self.has_plan() {
            return DatasetManifest::resolve(
                self.geometry,
                self.grid,
                self.multiplex_group,
                self.seed,
                self.noise,
            );
        }
        let plan = MultiplexPlan::new(self.measurements.into_iter().map(|m| m.leds).collect())?;
        let g = self.grid;
        validate_plan(&plan, g.n1, g.n2, g.m1, g.m2).map_err(Error::PlanValidation)?;
        let manifest = DatasetManifest {
            geometry: self.geometry,
            grid: self.grid,
            multiplex_group: self.multiplex_group,
            seed: self.seed,
            noise: self.noise,
            plan,
        };
        manifest.validate()?;
        Ok(manifest)
    }
}

impl From<&DatasetManifest> for ManifestDoc {
    fn from(m: &DatasetManifest) -> Self {
        Self {
            seed: m.seed,
            multiplex_group: m.multiplex_group,
            geometry: m.geometry.clone(),
            grid: m.grid,
            noise: m.noise,
            measurements: m
                .plan
                .sets()
                .iter()
                .map(|set| MeasurementEntry { leds: set.clone() })
                .collect(),
        }
    }
}

fn parse_doc(text: &str) -> Result<ManifestDoc> {
    toml::from_str(text).map_err(|e| FormatError::Manifest(e.to_string()).into())
}

pub fn manifest_to_string(manifest: &DatasetManifest) -> String {
    toml::to_string(&ManifestDoc::from(manifest)).expect("manifest serializes to TOML")
}

pub fn manifest_from_str(text: &str) -> Result<DatasetManifest> {
    parse_doc(text)?.resolve()
}

pub fn write_manifest(path: impl AsRef<Path>, manifest: &DatasetManifest) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, manifest_to_string(manifest)).map_err(|e| Error::io(path, e))
}

/// Parses a manifest without resolving it, e.g. to override the seed first.
pub fn read_manifest_doc(path: impl AsRef<Path>) -> Result<ManifestDoc> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_doc(&text).map_err(|e| match e {
        Error::Format(source) => Error::Decode {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    read_manifest_doc(path)?.resolve()
}
