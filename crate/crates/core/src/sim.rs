//! Seeded data-generating processes and a Monte Carlo harness for estimator
//! operating characteristics (bias, spread, coverage, size, power).
//!
//! Generation uses ChaCha8, a counter-based stream cipher RNG, so datasets
//! are bit-identical across platforms and run counts given `(spec, seed)`.
//! Monte Carlo replication seeds are derived with splitmix64, which makes the
//! rep streams independent: changing one rep's seed leaves the others alone.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balance::{covariate_balance, Correction};
use crate::data::{Observation, RdDataset};
use crate::density::density_test;
use crate::design::{BandwidthSpec, DesignKind, RdDesign, TreatedSide};
use crate::error::{Error, Result};
use crate::estimate::{estimate_fuzzy, estimate_kink, estimate_sharp};
use crate::sweeps::placebo_cutoffs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpFamily {
    /// Poverty index with a cash-transfer eligibility cutoff at 30; treatment
    /// jumps 0 -> 1 at the cutoff.
    SharpCashTransfer,
    /// Gestational age in days with obstetrician supervision recommended
    /// below 259 days (37 weeks); the treatment probability jumps partially.
    FuzzyObstetrician,
    /// Standard-normal assignment with 30% of the mass just below the cutoff
    /// relocated just above it.
    Manipulation,
    /// Same base distribution as `Manipulation` without relocation.
    NoManipulation,
    /// Linear conditional mean plus a level jump of `true_tau` at the cutoff.
    OutcomeJump,
    /// Flat outcome with no jump anywhere.
    NullFlat,
    /// Continuous outcome whose slope changes by `true_tau` at the cutoff.
    Kink,
    /// `OutcomeJump` plus a point mass exactly at the cutoff with shifted
    /// outcomes.
    Heaped,
    /// Parameter-driven family; see the `parameters` keys in the README.
    Custom,
}

/// Seeded data-generating-process description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub family: DgpFamily,
    pub n: usize,
    pub true_tau: f64,
    pub noise_sd: f64,
    /// Jump in the treatment probability at the cutoff (fuzzy families).
    pub compliance_jump: f64,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
}

impl DgpSpec {
    pub fn preset(family: DgpFamily) -> DgpSpec {
        let (true_tau, noise_sd, compliance_jump) = match family {
            DgpFamily::SharpCashTransfer => (2.0, 1.0, 1.0),
            DgpFamily::FuzzyObstetrician => (1.0, 1.0, 0.5),
            DgpFamily::Manipulation | DgpFamily::NoManipulation => (0.0, 1.0, 1.0),
            DgpFamily::OutcomeJump => (2.0, 1.0, 1.0),
            DgpFamily::NullFlat => (0.0, 1.0, 1.0),
            DgpFamily::Kink => (1.5, 1.0, 1.0),
            DgpFamily::Heaped => (2.0, 1.0, 1.0),
            DgpFamily::Custom => (0.0, 1.0, 1.0),
        };
        DgpSpec {
            family,
            n: 2000,
            true_tau,
            noise_sd,
            compliance_jump,
            parameters: BTreeMap::new(),
        }
    }

    /// Named presets for common birth-cohort assignment rules.
    pub fn preset_alias(name: &str) -> Option<DgpSpec> {
        // family names themselves resolve first (snake_case serde names)
        if let Ok(family) =
            serde_json::from_value::<DgpFamily>(serde_json::Value::String(name.into()))
        {
            return Some(DgpSpec::preset(family));
        }
        match name {
            // birth weight in grams, intensive neonatal care below 2500 g
            "birthweight-2500" => {
                let mut spec = DgpSpec::preset(DgpFamily::Custom);
                spec.parameters = BTreeMap::from([
                    ("x_mean".into(), 3300.0),
                    ("x_sd".into(), 550.0),
                    ("cutoff".into(), 2500.0),
                    ("treated_below".into(), 1.0),
                    ("intercept".into(), 10.0),
                    ("slope".into(), 0.001),
                    ("jump".into(), 1.0),
                    ("d_base".into(), 0.1),
                    ("d_jump".into(), 0.8),
                ]);
                spec.true_tau = 1.0;
                Some(spec)
            }
            // gestational age in days, obstetrician supervision below 259
            "gestage-259" => Some(DgpSpec::preset(DgpFamily::FuzzyObstetrician)),
            // poverty index, conditional cash transfer at 30 and above
            "cash-transfer-30" => Some(DgpSpec::preset(DgpFamily::SharpCashTransfer)),
            _ => None,
        }
    }

    pub fn param(&self, key: &str, default: f64) -> f64 {
        self.parameters.get(key).copied().unwrap_or(default)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::InvalidSpec("n must be at least 1".into()));
        }
        if !(self.noise_sd > 0.0) {
            return Err(Error::InvalidSpec("noise_sd must be positive".into()));
        }
        if !(self.compliance_jump > 0.0 && self.compliance_jump <= 1.0) {
            return Err(Error::InvalidSpec(
                "compliance_jump must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Cutoff implied by the family (or its `cutoff` parameter).
    pub fn cutoff(&self) -> f64 {
        match self.family {
            DgpFamily::SharpCashTransfer => 30.0,
            DgpFamily::FuzzyObstetrician => 259.0,
            _ => self.param("cutoff", 0.0),
        }
    }

    /// A design matched to the family's cutoff, side, and scale.
    pub fn default_design(&self) -> RdDesign {
        match self.family {
            DgpFamily::SharpCashTransfer => RdDesign::sharp(30.0, TreatedSide::Above)
                .with_bandwidth(BandwidthSpec::Fixed(10.0)),
            DgpFamily::FuzzyObstetrician => RdDesign::sharp(259.0, TreatedSide::Below)
                .with_kind(DesignKind::Fuzzy)
                .with_bandwidth(BandwidthSpec::Fixed(15.0)),
            DgpFamily::Kink => RdDesign::sharp(self.cutoff(), TreatedSide::Above)
                .with_kind(DesignKind::Kink)
                .with_bandwidth(BandwidthSpec::Fixed(1.0)),
            DgpFamily::Custom => {
                let side = if self.param("treated_below", 0.0) != 0.0 {
                    TreatedSide::Below
                } else {
                    TreatedSide::Above
                };
                RdDesign::sharp(self.cutoff(), side)
                    .with_bandwidth(BandwidthSpec::Fixed(self.param("x_sd", 1.0)))
            }
            _ => RdDesign::sharp(self.cutoff(), TreatedSide::Above)
                .with_bandwidth(BandwidthSpec::Fixed(1.0)),
        }
    }
}

fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Covariates shared by several families: smooth in x, plus an optional jump
/// in the first covariate (`covariate_jump` parameter).
fn gen_covariates(
    spec: &DgpSpec,
    rng: &mut ChaCha8Rng,
    x: f64,
    treated: bool,
) -> Vec<Option<f64>> {
    let k = spec.param("n_covariates", 0.0).max(0.0) as usize;
    (0..k)
        .map(|i| {
            let e: f64 = rng.sample(StandardNormal);
            let jump = if i == 0 && treated {
                spec.param("covariate_jump", 0.0)
            } else {
                0.0
            };
            Some(0.3 * x + e + jump)
        })
        .collect()
}

fn covariate_names(spec: &DgpSpec) -> Vec<String> {
    let k = spec.param("n_covariates", 0.0).max(0.0) as usize;
    (1..=k).map(|i| format!("c{i}")).collect()
}

/// Deterministic dataset generation: `(spec, seed)` fully determines the
/// output.
pub fn generate(spec: &DgpSpec, seed: u64) -> Result<RdDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.n;
    let mut rows = Vec::with_capacity(n);

    match spec.family {
        DgpFamily::SharpCashTransfer => {
            for _ in 0..n {
                let z: f64 = rng.sample(StandardNormal);
                let x = 35.0 + 10.0 * z;
                let treated = x >= 30.0;
                let e: f64 = rng.sample(StandardNormal);
                let y = 5.0 + 0.08 * (x - 30.0)
                    + if treated { spec.true_tau } else { 0.0 }
                    + spec.noise_sd * e;
                let covariates = gen_covariates(spec, &mut rng, x - 30.0, treated);
                rows.push(Observation {
                    x,
                    d: Some(u8::from(treated)),
                    y,
                    covariates,
                });
            }
        }
        DgpFamily::FuzzyObstetrician => {
            for _ in 0..n {
                let z: f64 = rng.sample(StandardNormal);
                let x = 270.0 + 12.0 * z;
                let eligible = x <= 259.0;
                // smooth baseline supervision probability, rising as
                // gestational age falls, plus the compliance jump below 259
                let base = 0.12 + 0.25 * logistic((259.0 - x) / 10.0);
                let p = (base + if eligible { spec.compliance_jump } else { 0.0 })
                    .clamp(0.01, 0.99);
                let d = u8::from(rng.gen::<f64>() < p);
                let e: f64 = rng.sample(StandardNormal);
                let y = 10.0 - 0.01 * (x - 259.0)
                    + spec.true_tau * f64::from(d)
                    + spec.noise_sd * e;
                let covariates = gen_covariates(spec, &mut rng, x - 259.0, eligible);
                rows.push(Observation {
                    x,
                    d: Some(d),
                    y,
                    covariates,
                });
            }
        }
        DgpFamily::Manipulation | DgpFamily::NoManipulation => {
            let c = spec.cutoff();
            for _ in 0..n {
                let z: f64 = rng.sample(StandardNormal);
                let mut x = c + z;
                let manipulate = rng.gen::<f64>() < 0.3;
                if spec.family == DgpFamily::Manipulation
                    && x >= c - 0.1
                    && x < c
                    && manipulate
                {
                    // relocate across the cutoff, mirrored into [c, c + 0.1)
                    x = 2.0 * c - x;
                }
                let treated = x >= c;
                let e: f64 = rng.sample(StandardNormal);
                let covariates = gen_covariates(spec, &mut rng, x - c, treated);
                rows.push(Observation {
                    x,
                    d: Some(u8::from(treated)),
                    y: spec.noise_sd * e,
                    covariates,
                });
            }
        }
        DgpFamily::OutcomeJump | DgpFamily::NullFlat | DgpFamily::Heaped => {
            let c = spec.cutoff();
            let heap_count = if spec.family == DgpFamily::Heaped {
                ((spec.param("heap_share", 0.04)) * n as f64).round() as usize
            } else {
                0
            };
            for i in 0..n {
                let z: f64 = rng.sample(StandardNormal);
                let e: f64 = rng.sample(StandardNormal);
                let (x, heaped) = if i < heap_count {
                    (c, true)
                } else {
                    (c + z, false)
                };
                let treated = x >= c;
                let mean = match spec.family {
                    DgpFamily::NullFlat => 2.0,
                    _ => {
                        1.0 + 0.4 * (x - c)
                            + if treated { spec.true_tau } else { 0.0 }
                    }
                };
                let y = mean
                    + if heaped { spec.param("heap_shift", 3.0) } else { 0.0 }
                    + spec.noise_sd * e;
                // the flat null has no discontinuity anywhere: exposure is an
                // independent coin flip, not a function of x
                let d = if spec.family == DgpFamily::NullFlat {
                    u8::from(rng.gen::<f64>() < 0.5)
                } else {
                    u8::from(treated)
                };
                let covariates = gen_covariates(spec, &mut rng, x - c, treated);
                rows.push(Observation {
                    x,
                    d: Some(d),
                    y,
                    covariates,
                });
            }
        }
        DgpFamily::Kink => {
            let c = spec.cutoff();
            for _ in 0..n {
                let z: f64 = rng.sample(StandardNormal);
                let x = c + z;
                let treated = x >= c;
                let e: f64 = rng.sample(StandardNormal);
                let y = 1.0 + 0.5 * (x - c)
                    + if treated { spec.true_tau * (x - c) } else { 0.0 }
                    + spec.noise_sd * e;
                let covariates = gen_covariates(spec, &mut rng, x - c, treated);
                rows.push(Observation {
                    x,
                    d: Some(u8::from(treated)),
                    y,
                    covariates,
                });
            }
        }
        DgpFamily::Custom => {
            let c = spec.cutoff();
            let x_mean = spec.param("x_mean", 0.0);
            let x_sd = spec.param("x_sd", 1.0);
            if !(x_sd > 0.0) {
                return Err(Error::InvalidSpec("x_sd must be positive".into()));
            }
            let treated_below = spec.param("treated_below", 0.0) != 0.0;
            for _ in 0..n {
                let z: f64 = rng.sample(StandardNormal);
                let x = x_mean + x_sd * z;
                let treated = if treated_below { x <= c } else { x >= c };
                let p = (spec.param("d_base", 0.5)
                    + spec.param("d_gain", 0.0)
                        * logistic((x - c) / spec.param("d_scale", 1.0))
                    + if treated { spec.param("d_jump", 0.0) } else { 0.0 }
                    + if x >= spec.param("d_jump2_at", f64::INFINITY) {
                        spec.param("d_jump2", 0.0)
                    } else {
                        0.0
                    })
                .clamp(0.0, 1.0);
                let d = u8::from(rng.gen::<f64>() < p);
                let e: f64 = rng.sample(StandardNormal);
                let y = spec.param("intercept", 0.0)
                    + spec.param("slope", 0.0) * (x - c)
                    + spec.param("jump", 0.0) * f64::from(u8::from(treated))
                    + spec.true_tau * f64::from(d) * spec.param("effect_through_d", 0.0)
                    + spec.noise_sd * e;
                let covariates = gen_covariates(spec, &mut rng, x - c, treated);
                rows.push(Observation {
                    x,
                    d: Some(d),
                    y,
                    covariates,
                });
            }
        }
    }

    let mut data = RdDataset::new(rows, covariate_names(spec))?;
    data.n_dropped_missing = 0;
    Ok(data)
}

/// splitmix64 step, used to derive independent per-replication seeds.
pub fn derive_seed(seed: u64, rep: u64) -> u64 {
    let mut z = seed.wrapping_add((rep.wrapping_add(1)).wrapping_mul(0x9E3779B97F4A7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McAnalysis {
    Sharp,
    Fuzzy,
    Kink,
    DensityTest,
    Placebo,
    Balance,
}

/// Monte Carlo operating characteristics over seeded replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub reps: usize,
    pub mean_tau: f64,
    pub sd_tau: f64,
    pub mean_se: f64,
    /// Fraction of replications whose 95% CI contains the true effect.
    pub coverage_95: f64,
    /// Fraction rejecting the relevant null at the 5% level.
    pub rejection_rate: f64,
    pub failures: usize,
}

struct RepOutcome {
    tau: f64,
    se: f64,
    covered: bool,
    rejected: bool,
}

fn run_rep(
    spec: &DgpSpec,
    design: &RdDesign,
    analysis: McAnalysis,
    seed: u64,
) -> Result<RepOutcome> {
    let data = generate(spec, seed)?;
    match analysis {
        McAnalysis::Sharp | McAnalysis::Fuzzy | McAnalysis::Kink => {
            let est = match analysis {
                McAnalysis::Sharp => estimate_sharp(&data, design)?,
                McAnalysis::Fuzzy => estimate_fuzzy(&data, design)?,
                _ => estimate_kink(&data, design)?,
            };
            Ok(RepOutcome {
                tau: est.tau,
                se: est.se,
                covered: est.ci_low <= spec.true_tau && spec.true_tau <= est.ci_high,
                rejected: est.p_value < 0.05,
            })
        }
        McAnalysis::DensityTest => {
            let r = density_test(&data, design.cutoff)?;
            Ok(RepOutcome {
                tau: r.theta,
                se: r.se,
                covered: r.p >= 0.05,
                rejected: r.p < 0.05,
            })
        }
        McAnalysis::Placebo => {
            let cutoffs = default_placebo_cutoffs(&data, design);
            let sweep = placebo_cutoffs(&data, design, &cutoffs)?;
            let mut tested = 0usize;
            let mut rejected = 0usize;
            let mut tau_sum = 0.0;
            let mut se_sum = 0.0;
            for e in &sweep.entries {
                if let Some(est) = &e.estimate {
                    tested += 1;
                    tau_sum += est.tau;
                    se_sum += est.se;
                    if est.p_value < 0.05 {
                        rejected += 1;
                    }
                }
            }
            if tested == 0 {
                return Err(Error::InsufficientData("no placebo estimate succeeded".into()));
            }
            Ok(RepOutcome {
                tau: tau_sum / tested as f64,
                se: se_sum / tested as f64,
                covered: rejected == 0,
                rejected: rejected > 0,
            })
        }
        McAnalysis::Balance => {
            let table = covariate_balance(&data, design, Correction::BenjaminiHochberg)?;
            let mut tested = 0usize;
            let mut rejected = 0usize;
            let mut tau_sum = 0.0;
            let mut se_sum = 0.0;
            for row in &table.rows {
                if let (Some(est), Some(p)) = (&row.estimate, row.p_raw) {
                    tested += 1;
                    tau_sum += est.tau;
                    se_sum += est.se;
                    if p < 0.05 {
                        rejected += 1;
                    }
                }
            }
            if tested == 0 {
                return Err(Error::InsufficientData("no covariate test succeeded".into()));
            }
            Ok(RepOutcome {
                tau: tau_sum / tested as f64,
                se: se_sum / tested as f64,
                covered: rejected == 0,
                rejected: rejected > 0,
            })
        }
    }
}

/// Placebo locations used by the Monte Carlo harness: the per-side quantiles
/// 0.2, 0.35, 0.65, 0.8 of the assignment variable, away from the cutoff.
pub fn default_placebo_cutoffs(data: &RdDataset, design: &RdDesign) -> Vec<f64> {
    let mut xs: Vec<f64> = data.x_values().collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    [0.2, 0.35, 0.65, 0.8]
        .iter()
        .map(|q| xs[(((n as f64 - 1.0) * q).round() as usize).min(n - 1)])
        .filter(|&c| c != design.cutoff)
        .collect()
}

/// Runs `reps` seeded replications concurrently; results are assembled in
/// replication order so the summary is independent of scheduling.
pub fn monte_carlo(
    spec: &DgpSpec,
    design: &RdDesign,
    analysis: McAnalysis,
    reps: usize,
    seed: u64,
) -> Result<McSummary> {
    spec.validate()?;
    design.validate()?;
    if reps < 1 {
        return Err(Error::InvalidSpec("reps must be at least 1".into()));
    }
    let outcomes: Vec<Result<RepOutcome>> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| run_rep(spec, design, analysis, derive_seed(seed, rep)))
        .collect();

    let mut taus = Vec::new();
    let mut ses = Vec::new();
    let mut covered = 0usize;
    let mut rejected = 0usize;
    let mut failures = 0usize;
    for outcome in outcomes {
        match outcome {
            Ok(o) => {
                taus.push(o.tau);
                ses.push(o.se);
                if o.covered {
                    covered += 1;
                }
                if o.rejected {
                    rejected += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    let k = taus.len();
    if k == 0 {
        return Err(Error::InsufficientData(format!(
            "all {reps} replications failed"
        )));
    }
    let mean_tau = taus.iter().sum::<f64>() / k as f64;
    let sd_tau = if k > 1 {
        (taus.iter().map(|t| (t - mean_tau) * (t - mean_tau)).sum::<f64>() / (k as f64 - 1.0))
            .sqrt()
    } else {
        0.0
    };
    Ok(McSummary {
        reps,
        mean_tau,
        sd_tau,
        mean_se: ses.iter().sum::<f64>() / k as f64,
        coverage_95: covered as f64 / k as f64,
        rejection_rate: rejected as f64 / k as f64,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::validate_design;

    #[test]
    fn sharp_cash_transfer_has_no_crossovers() {
        let spec = DgpSpec::preset(DgpFamily::SharpCashTransfer);
        let data = generate(&spec, 1).unwrap();
        for row in &data.rows {
            assert_eq!(row.d, Some(u8::from(row.x >= 30.0)));
        }
        let report = validate_design(&data, &spec.default_design()).unwrap();
        assert_eq!(report.eligibility_consistency, 1.0);
    }

    #[test]
    fn fuzzy_obstetrician_has_both_states_on_both_sides() {
        let mut spec = DgpSpec::preset(DgpFamily::FuzzyObstetrician);
        spec.n = 4000;
        let data = generate(&spec, 2).unwrap();
        let mut states = [[false; 2]; 2];
        for row in &data.rows {
            let below = usize::from(row.x <= 259.0);
            states[below][usize::from(row.d.unwrap())] = true;
        }
        assert!(states.iter().flatten().all(|&b| b), "states: {states:?}");
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = DgpSpec::preset(DgpFamily::OutcomeJump);
        assert_eq!(generate(&spec, 9).unwrap(), generate(&spec, 9).unwrap());
        assert_ne!(generate(&spec, 9).unwrap(), generate(&spec, 10).unwrap());
    }

    #[test]
    fn derived_rep_seeds_are_independent() {
        let a = derive_seed(42, 0);
        let b = derive_seed(42, 1);
        assert_ne!(a, b);
        // changing one rep index never changes another rep's seed
        assert_eq!(derive_seed(42, 1), b);
    }

    #[test]
    fn single_rep_summary_equals_single_run() {
        let mut spec = DgpSpec::preset(DgpFamily::OutcomeJump);
        spec.n = 800;
        let design = spec.default_design();
        let summary = monte_carlo(&spec, &design, McAnalysis::Sharp, 1, 5).unwrap();
        let data = generate(&spec, derive_seed(5, 0)).unwrap();
        let est = estimate_sharp(&data, &design).unwrap();
        assert_eq!(summary.mean_tau, est.tau);
        assert_eq!(summary.sd_tau, 0.0);
    }

    #[test]
    fn invalid_spec_is_rejected() {
        let mut spec = DgpSpec::preset(DgpFamily::OutcomeJump);
        spec.n = 0;
        assert!(matches!(generate(&spec, 0), Err(Error::InvalidSpec(_))));
        let mut spec = DgpSpec::preset(DgpFamily::OutcomeJump);
        spec.noise_sd = -1.0;
        assert!(matches!(generate(&spec, 0), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn heaped_family_stacks_mass_at_the_cutoff() {
        let mut spec = DgpSpec::preset(DgpFamily::Heaped);
        spec.n = 1000;
        let data = generate(&spec, 3).unwrap();
        let at_c = data.rows.iter().filter(|r| r.x == 0.0).count();
        assert_eq!(at_c, 40);
    }

    #[test]
    fn preset_aliases_resolve() {
        assert!(DgpSpec::preset_alias("birthweight-2500").is_some());
        assert!(DgpSpec::preset_alias("gestage-259").is_some());
        assert!(DgpSpec::preset_alias("nope").is_none());
    }
}
