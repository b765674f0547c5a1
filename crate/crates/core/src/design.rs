//! Design description: cutoff, treated side, design kind, kernel, bandwidth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which side of the cutoff receives treatment. Ties `x == c` belong to the
/// treated side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreatedSide {
    Above,
    Below,
}

impl TreatedSide {
    pub fn flip(self) -> TreatedSide {
        match self {
            TreatedSide::Above => TreatedSide::Below,
            TreatedSide::Below => TreatedSide::Above,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Sharp,
    Fuzzy,
    Kink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Triangular,
    Uniform,
    Epanechnikov,
}

/// Bandwidth is either user-fixed or selected by leave-one-out cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthSpec {
    Fixed(f64),
    CrossValidated,
}

/// Full description of one RD analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdDesign {
    pub cutoff: f64,
    pub treated_side: TreatedSide,
    pub kind: DesignKind,
    pub kernel: Kernel,
    /// Local polynomial order, capped at 2: higher orders overfit at the boundary.
    pub order: usize,
    pub bandwidth: BandwidthSpec,
    pub donut_radius: f64,
    pub covariate_adjust: bool,
    /// Covariate names used for adjustment (must exist in the dataset).
    #[serde(default)]
    pub covariates: Vec<String>,
}

impl RdDesign {
    /// Local-linear sharp design with triangular kernel, the conventional default.
    pub fn sharp(cutoff: f64, treated_side: TreatedSide) -> RdDesign {
        RdDesign {
            cutoff,
            treated_side,
            kind: DesignKind::Sharp,
            kernel: Kernel::Triangular,
            order: 1,
            bandwidth: BandwidthSpec::CrossValidated,
            donut_radius: 0.0,
            covariate_adjust: false,
            covariates: Vec::new(),
        }
    }

    pub fn with_kind(mut self, kind: DesignKind) -> RdDesign {
        self.kind = kind;
        self
    }

    pub fn with_kernel(mut self, kernel: Kernel) -> RdDesign {
        self.kernel = kernel;
        self
    }

    pub fn with_order(mut self, order: usize) -> RdDesign {
        self.order = order;
        self
    }

    pub fn with_bandwidth(mut self, bw: BandwidthSpec) -> RdDesign {
        self.bandwidth = bw;
        self
    }

    pub fn with_donut(mut self, radius: f64) -> RdDesign {
        self.donut_radius = radius;
        self
    }

    /// True when `x` falls on the treated side; ties go to the treated side.
    pub fn is_treated_value(&self, x: f64) -> bool {
        match self.treated_side {
            TreatedSide::Above => x >= self.cutoff,
            TreatedSide::Below => x <= self.cutoff,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.cutoff.is_finite() {
            return Err(Error::InvalidConfig("cutoff must be finite".into()));
        }
        if self.order > 2 {
            return Err(Error::InvalidConfig(format!(
                "polynomial order {} exceeds the supported maximum of 2",
                self.order
            )));
        }
        if let BandwidthSpec::Fixed(h) = self.bandwidth {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "fixed bandwidth must be a positive finite number, got {h}"
                )));
            }
        }
        if !(self.donut_radius >= 0.0) || !self.donut_radius.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "donut radius must be non-negative, got {}",
                self.donut_radius
            )));
        }
        if self.kind == DesignKind::Kink && self.order < 1 {
            return Err(Error::InvalidConfig(
                "kink designs need polynomial order >= 1".into(),
            ));
        }
        Ok(())
    }
}
