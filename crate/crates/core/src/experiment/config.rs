use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibration::{CalibrationParams, LoadCellModel};
use crate::error::{Error, Result};
use crate::geometry::RoiBox;
use crate::palpation::{ControllerGains, Mode, PolicyConfig, ProbeParams, Strategy};
use crate::phantom::{PhantomConfig, TumorGeometry, TumorShape};
use crate::registration::PreprocessParams;
use crate::search::GpHyper;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub dx: f64,
    pub dy: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { dx: 0.002, dy: 0.002 }
    }
}

/// Simulated depth-camera scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    pub region: RoiBox,
    /// Samples per square metre.
    pub density: f64,
    pub noise_sigma: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            region: RoiBox {
                min_xy: [-0.05, -0.05],
                max_xy: [0.05, 0.05],
            },
            density: 1.0e6,
            noise_sigma: 0.0003,
        }
    }
}

/// One experimental condition, loaded from TOML. Every key is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub phantom: PhantomConfig,
    pub tumor: TumorGeometry,
    /// Search region. When absent, the tumor footprint grown by
    /// `roi_padding` on every side.
    pub roi: Option<RoiBox>,
    pub roi_padding: f64,
    pub grid: GridSpec,
    pub scan: ScanConfig,
    pub filter: PreprocessParams,
    pub strategy: Strategy,
    pub mode: Mode,
    pub budget: usize,
    pub n_init: usize,
    pub trials: usize,
    pub seed: u64,
    pub gp: GpHyper,
    pub xi: f64,
    pub gains: ControllerGains,
    pub probe: ProbeParams,
    pub cal: CalibrationParams,
    pub load_cell: LoadCellModel,
    pub offset_samples: usize,
    /// F-score distance threshold, m.
    pub r_eval: f64,
    pub gt_samples: usize,
    /// Trials run on the rayon pool when true.
    pub parallel: bool,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let policy = PolicyConfig::default();
        ExperimentConfig {
            phantom: PhantomConfig::default(),
            tumor: TumorGeometry::default(),
            roi: None,
            roi_padding: 0.005,
            grid: GridSpec::default(),
            scan: ScanConfig::default(),
            filter: PreprocessParams::default(),
            strategy: policy.strategy,
            mode: policy.mode,
            budget: policy.budget,
            n_init: policy.n_init,
            trials: 10,
            seed: 0,
            gp: policy.gp,
            xi: policy.xi,
            gains: policy.gains,
            probe: policy.probe,
            cal: policy.cal,
            load_cell: policy.load_cell,
            offset_samples: policy.offset_samples,
            r_eval: 0.003,
            gt_samples: 2000,
            parallel: true,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    /// Swaps in the default geometry of `shape`, keeping radius and center.
    pub fn set_shape(&mut self, shape: &str) -> Result<()> {
        self.tumor.shape = match shape {
            "hemisphere" => TumorShape::Hemisphere,
            "ellipsoid" => TumorShape::default_ellipsoid(),
            "crescent" => TumorShape::default_crescent(),
            other => return Err(Error::ConfigInvalid(format!("unknown shape `{other}`"))),
        };
        Ok(())
    }

    pub fn effective_roi(&self) -> Result<RoiBox> {
        match self.roi {
            Some(r) => {
                r.validate()?;
                Ok(r)
            }
            None => {
                let f = self.tumor.footprint_bounds();
                let p = self.roi_padding;
                RoiBox::new(
                    [f.min_xy[0] - p, f.min_xy[1] - p],
                    [f.max_xy[0] + p, f.max_xy[1] + p],
                )
            }
        }
    }

    pub fn policy(&self) -> PolicyConfig {
        PolicyConfig {
            strategy: self.strategy,
            mode: self.mode,
            budget: self.budget,
            n_init: self.n_init,
            gp: self.gp,
            xi: self.xi,
            probe: self.probe,
            gains: self.gains,
            load_cell: self.load_cell,
            cal: self.cal,
            offset_samples: self.offset_samples,
        }
    }

    /// Short condition label such as `BO+CF`.
    pub fn label(&self) -> String {
        format!("{}+{}", self.strategy.label(), self.mode.label())
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::ConfigInvalid("trials must be at least 1".into()));
        }
        if !(self.grid.dx > 0.0 && self.grid.dy > 0.0) {
            return Err(Error::ConfigInvalid("grid spacing must be positive".into()));
        }
        if !(self.r_eval > 0.0) || self.gt_samples == 0 {
            return Err(Error::ConfigInvalid(
                "r_eval must be positive and gt_samples at least 1".into(),
            ));
        }
        if !(self.roi_padding >= 0.0) {
            return Err(Error::ConfigInvalid("roi_padding must be >= 0".into()));
        }
        if self.filter.voxel <= 0.0 || self.filter.outlier_sigma <= 0.0 {
            return Err(Error::ConfigInvalid("bad filter parameters".into()));
        }
        self.scan.region.validate()?;
        self.effective_roi()?;
        self.phantom.validate()?;
        self.tumor.validate(self.phantom.stack_depth())?;
        self.policy().validate()
    }
}
