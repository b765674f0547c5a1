//! End-to-end analysis pipeline and the machine-readable report.
//!
//! The report always contains every assumption row and every diagnostics
//! section; sections that cannot be computed carry an error code instead of
//! aborting the run. JSON output uses stable key order and serializes every
//! float with 17 significant digits so reports are byte-reproducible and
//! round-trip exactly.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::balance::{covariate_balance, BalanceTable, Correction};
use crate::bandwidth::resolve_bandwidth;
use crate::data::{load_dataset, validate_design, ColumnMapping, ValidationReport};
use crate::density::{density_bins, density_test, DensityBins, DensityTestResult};
use crate::design::RdDesign;
use crate::error::{Error, Result};
use crate::estimate::{estimate_main, RdEstimate};
use crate::localrand::{lr_window_estimate, LrResult};
use crate::plot::{binned_scatter, BinnedPlot, BinsSpec};
use crate::sim::default_placebo_cutoffs;
use crate::sweeps::{
    bandwidth_sweep, default_scan_grid, donut_sweep, exposure_discontinuity_scan,
    placebo_cutoffs, BandwidthSweep, ScanResult, SweepResult,
};
use crate::wls::FitTarget;

pub const SCHEMA_VERSION: &str = "1";

/// A report section that either holds a result or records why it is missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section<T> {
    pub result: Option<T>,
    pub error: Option<String>,
}

impl<T> Section<T> {
    pub fn from_result(r: Result<T>) -> Section<T> {
        match r {
            Ok(v) => Section {
                result: Some(v),
                error: None,
            },
            Err(e) => Section {
                result: None,
                error: Some(e.code().to_string()),
            },
        }
    }

    pub fn ok(&self) -> Option<&T> {
        self.result.as_ref()
    }
}

/// Fully resolved pipeline configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub data: String,
    pub mapping: ColumnMapping,
    pub design: RdDesign,
    /// Placebo cutoffs; empty means per-side quantile defaults.
    #[serde(default)]
    pub placebos: Vec<f64>,
    /// Donut radii; empty means `[0, h/20, h/10, h/5]`.
    #[serde(default)]
    pub donut_radii: Vec<f64>,
    /// Sensitivity bandwidths; empty means `[h/2, 3h/4, h, 3h/2, 2h]`.
    #[serde(default)]
    pub bandwidths: Vec<f64>,
    pub correction: Correction,
    pub bins: BinsSpec,
    pub lr_max_permutations: u64,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(data: impl Into<String>, mapping: ColumnMapping, design: RdDesign) -> PipelineConfig {
        PipelineConfig {
            data: data.into(),
            mapping,
            design,
            placebos: Vec::new(),
            donut_radii: Vec::new(),
            bandwidths: Vec::new(),
            correction: Correction::BenjaminiHochberg,
            bins: BinsSpec::DataDriven,
            lr_max_permutations: 20_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub input_sha256: String,
    pub seed: u64,
    pub toolkit_version: String,
}

/// One row of the design-assumption matrix. Untestable assumptions appear
/// with an explicit `theoretical_only` marker instead of being dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionRow {
    pub id: String,
    pub description: String,
    /// "yes", "yes_indirect", or "theoretical_only".
    pub testable: String,
    /// Report section holding the evidence, when testable.
    pub evidence: Option<String>,
    /// "tested" or "not_testable".
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub density: Section<DensityTestResult>,
    pub balance: Section<BalanceTable>,
    pub placebo: Section<SweepResult>,
    pub donut: Section<SweepResult>,
    pub bandwidth: Section<BandwidthSweep>,
    pub exposure_scan: Section<ScanResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedPlot {
    pub name: String,
    pub plot: Section<BinnedPlot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plots {
    pub outcome: Section<BinnedPlot>,
    pub treatment: Section<BinnedPlot>,
    pub density: Section<DensityBins>,
    pub covariates: Vec<NamedPlot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: String,
    /// Unix seconds at generation time; the only non-deterministic field.
    pub generated_at: u64,
    pub provenance: Provenance,
    pub design: RdDesign,
    pub validation: ValidationReport,
    pub bandwidth_used: f64,
    pub estimate: RdEstimate,
    pub diagnostics: Diagnostics,
    pub local_randomization: Section<LrResult>,
    pub assumptions: Vec<AssumptionRow>,
    pub plots: Plots,
}

fn assumption_matrix(
    has_treatment: bool,
    has_covariates: bool,
) -> Vec<AssumptionRow> {
    let row = |id: &str, description: &str, testable: &str, evidence: Option<&str>| {
        let status = if evidence.is_some() { "tested" } else { "not_testable" };
        AssumptionRow {
            id: id.into(),
            description: description.into(),
            testable: testable.into(),
            evidence: evidence.map(String::from),
            status: status.into(),
        }
    };
    vec![
        row(
            "assignment_rule",
            "A continuous pre-exposure assignment variable with a clearly defined cutoff determines eligibility",
            "yes",
            Some("validation, plots.treatment"),
        ),
        row(
            "cutoff_not_reused",
            "The same cutoff does not assign individuals to other exposures or interventions",
            "theoretical_only",
            None,
        ),
        row(
            "no_other_discontinuities",
            "Exposure probability is free of discontinuities away from the cutoff",
            "yes",
            if has_treatment {
                Some("diagnostics.exposure_scan")
            } else {
                None
            },
        ),
        row(
            "no_manipulation",
            "Units cannot sort themselves across the cutoff; the assignment density is continuous there",
            "yes_indirect",
            Some("diagnostics.density"),
        ),
        row(
            "exchangeability_observed",
            "Units close to the cutoff are comparable in observed characteristics",
            "yes",
            if has_covariates {
                Some("diagnostics.balance")
            } else {
                None
            },
        ),
        row(
            "exchangeability_unobserved",
            "Units close to the cutoff are comparable in unobserved characteristics",
            "theoretical_only",
            None,
        ),
        row(
            "outcome_continuity",
            "Absent the exposure, the conditional outcome mean is continuous at the cutoff",
            "yes",
            Some("diagnostics.placebo, diagnostics.donut, diagnostics.bandwidth"),
        ),
    ]
}

/// Runs the full pipeline on raw CSV bytes: validate, select bandwidth,
/// estimate, run the diagnostics suite, and assemble plots.
pub fn run_pipeline_on_bytes(config: &PipelineConfig, bytes: &[u8]) -> Result<AnalysisReport> {
    config.design.validate()?;
    let data = load_dataset(bytes, &config.mapping)?;
    let design = &config.design;
    let validation = validate_design(&data, design)?;
    let h = resolve_bandwidth(&data, design)?;
    let estimate = estimate_main(&data, design)?;

    let placebos = if config.placebos.is_empty() {
        default_placebo_cutoffs(&data, design)
    } else {
        config.placebos.clone()
    };
    let donut_radii = if config.donut_radii.is_empty() {
        vec![0.0, h / 20.0, h / 10.0, h / 5.0]
    } else {
        config.donut_radii.clone()
    };
    let bandwidths = if config.bandwidths.is_empty() {
        vec![h / 2.0, 0.75 * h, h, 1.5 * h, 2.0 * h]
    } else {
        config.bandwidths.clone()
    };

    let scan = if data.has_treatment() {
        let grid = default_scan_grid(&data, design, h);
        Section::from_result(exposure_discontinuity_scan(&data, design, &grid))
    } else {
        Section::from_result(Err(Error::FuzzyWithoutTreatment))
    };

    let diagnostics = Diagnostics {
        density: Section::from_result(density_test(&data, design.cutoff)),
        balance: Section::from_result(covariate_balance(&data, design, config.correction)),
        placebo: Section::from_result(placebo_cutoffs(&data, design, &placebos)),
        donut: Section::from_result(donut_sweep(&data, design, &donut_radii)),
        bandwidth: Section::from_result(bandwidth_sweep(&data, design, &bandwidths)),
        exposure_scan: scan,
    };

    // default local-randomization window: the inner half of the bandwidth
    let lr = Section::from_result(lr_window_estimate(
        &data,
        design.cutoff,
        design.treated_side,
        (design.cutoff - h / 2.0, design.cutoff + h / 2.0),
        config.lr_max_permutations,
        config.seed,
    ));

    let treatment_plot = if data.has_treatment() {
        Section::from_result(binned_scatter(&data, design, FitTarget::Treatment, config.bins))
    } else {
        Section::from_result(Err(Error::FuzzyWithoutTreatment))
    };
    let covariate_plots = data
        .covariate_names
        .iter()
        .enumerate()
        .map(|(i, name)| NamedPlot {
            name: name.clone(),
            plot: Section::from_result(binned_scatter(
                &data,
                design,
                FitTarget::Covariate(i),
                config.bins,
            )),
        })
        .collect();
    let plots = Plots {
        outcome: Section::from_result(binned_scatter(
            &data,
            design,
            FitTarget::Outcome,
            config.bins,
        )),
        treatment: treatment_plot,
        density: Section::from_result(density_bins(&data, design.cutoff)),
        covariates: covariate_plots,
    };

    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let input_sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();

    Ok(AnalysisReport {
        schema_version: SCHEMA_VERSION.to_string(),
        generated_at: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        provenance: Provenance {
            input_sha256,
            seed: config.seed,
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        },
        design: design.clone(),
        validation,
        bandwidth_used: h,
        estimate,
        diagnostics,
        local_randomization: lr,
        assumptions: assumption_matrix(data.has_treatment(), !data.covariate_names.is_empty()),
        plots,
    })
}

/// Reads the configured CSV file and runs the pipeline.
pub fn run_pipeline(config: &PipelineConfig) -> Result<AnalysisReport> {
    let bytes = std::fs::read(&config.data)?;
    run_pipeline_on_bytes(config, &bytes)
}

/// JSON formatter writing every finite float with 17 significant digits, so
/// serialization round-trips f64 exactly and identical reports are
/// byte-identical.
struct SigFigFormatter;

impl serde_json::ser::Formatter for SigFigFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.8e}")
    }
}

/// Serializes any report value with stable key order and 17-significant-digit
/// floats.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigFigFormatter);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::InvalidConfig(format!("serialization failed: {e}")))?;
    String::from_utf8(out).map_err(|e| Error::InvalidConfig(format!("invalid utf-8: {e}")))
}
