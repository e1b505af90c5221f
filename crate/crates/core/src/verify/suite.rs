//! Config-driven runner: expands checks over models, runs them in parallel and writes reports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::algebraic::{self, CdParams, CommutationParams, CondBParams, ConstantsParams, RicciParams};
use super::analytic::{self, FidelityParams, GradientParams, HarnackParams, KernelDecayParams, LiYauParams, PoincareParams, MIN_PATHS};
use super::result::{CheckResult, Verdict};
use super::schedule::{builtin_schedules, check_ratio_increasing, check_schedule_on, SCHEDULE_INTERVALS};
use super::spectral::spectral_gap_su2_pair;
use crate::geometry::canonical_constants;
use crate::model_zoo::{model_by_name, LieModel};
use crate::util::{mix_seed, sha256_hex};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralParams {
    pub rho: f64,
    pub j_max: f64,
}

impl Default for SpectralParams {
    fn default() -> Self {
        SpectralParams { rho: 1.0, j_max: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleParams {
    pub models: Vec<String>,
    pub horizon: f64,
    pub intervals: usize,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        ScheduleParams {
            models: vec!["heisenberg".into(), "free_nilpotent_3".into(), "free_nilpotent_4".into(), "su2_pair".into()],
            horizon: 1.0,
            intervals: SCHEDULE_INTERVALS,
        }
    }
}

/// One entry of the `checks` list, selected by its `id` field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case")]
pub enum CheckSpec {
    CdInequality(CdParams),
    Constants(ConstantsParams),
    ConditionB(CondBParams),
    Commutation(CommutationParams),
    RicciComparison(RicciParams),
    SpectralGap(SpectralParams),
    Schedules(ScheduleParams),
    SemigroupFidelity(FidelityParams),
    GradientBounds(GradientParams),
    EntropyLiYau(LiYauParams),
    Harnack(HarnackParams),
    KernelDecay(KernelDecayParams),
    PoincareDecay(PoincareParams),
}

impl CheckSpec {
    pub fn id(&self) -> &'static str {
        match self {
            CheckSpec::CdInequality(_) => "cd_inequality",
            CheckSpec::Constants(_) => "constants",
            CheckSpec::ConditionB(_) => "condition_b",
            CheckSpec::Commutation(_) => "commutation",
            CheckSpec::RicciComparison(_) => "ricci_comparison",
            CheckSpec::SpectralGap(_) => "spectral_gap",
            CheckSpec::Schedules(_) => "schedules",
            CheckSpec::SemigroupFidelity(_) => "semigroup_fidelity",
            CheckSpec::GradientBounds(_) => "gradient_bounds",
            CheckSpec::EntropyLiYau(_) => "entropy_li_yau",
            CheckSpec::Harnack(_) => "harnack",
            CheckSpec::KernelDecay(_) => "kernel_decay",
            CheckSpec::PoincareDecay(_) => "poincare_decay",
        }
    }

    /// Models this check runs on.
    pub fn models(&self) -> Vec<String> {
        match self {
            CheckSpec::CdInequality(p) => p.models.clone(),
            CheckSpec::Constants(p) => p.models.clone(),
            CheckSpec::ConditionB(p) => p.models.clone(),
            CheckSpec::Commutation(p) => p.models.clone(),
            CheckSpec::RicciComparison(p) => p.models.clone(),
            CheckSpec::SpectralGap(p) => vec![format!("su2_pair_{}", p.rho)],
            CheckSpec::Schedules(p) => p.models.clone(),
            CheckSpec::SemigroupFidelity(p) => p.models.clone(),
            CheckSpec::GradientBounds(p) => p.models.clone(),
            CheckSpec::EntropyLiYau(p) => p.models.clone(),
            CheckSpec::Harnack(p) => p.models.clone(),
            CheckSpec::KernelDecay(p) => p.models.clone(),
            CheckSpec::PoincareDecay(p) => p.models.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        let paths = match self {
            CheckSpec::SemigroupFidelity(p) => Some(p.paths),
            CheckSpec::GradientBounds(p) => Some(p.paths),
            _ => None,
        };
        if let Some(n) = paths {
            if n < MIN_PATHS {
                return Err(Error::Config(format!("{}: at least {MIN_PATHS} paths are required, got {n}", self.id())));
            }
        }
        for name in self.models() {
            model_by_name(&name).map_err(|e| Error::Config(format!("{}: {e}", self.id())))?;
        }
        Ok(())
    }

    fn run(&self, model: &LieModel, seed: u64) -> Result<Vec<CheckResult>> {
        Ok(match self {
            CheckSpec::CdInequality(p) => vec![algebraic::check_cd_inequality(model, p, seed)?, algebraic::check_cd_witness(model, p)?],
            CheckSpec::Constants(p) => algebraic::check_constants(model, p)?,
            CheckSpec::ConditionB(p) => vec![algebraic::check_condition_b(model, p, seed)?],
            CheckSpec::Commutation(p) => vec![algebraic::check_commutation(model, p, seed)?],
            CheckSpec::RicciComparison(p) => algebraic::check_ricci(model, p, seed)?,
            CheckSpec::SpectralGap(p) => {
                let (_, a, b) = spectral_gap_su2_pair(p.rho, p.j_max)?;
                vec![a, b]
            }
            CheckSpec::Schedules(p) => run_schedules(model, p)?,
            CheckSpec::SemigroupFidelity(p) => analytic::check_semigroup_fidelity(model, p, seed)?,
            CheckSpec::GradientBounds(p) => analytic::check_gradient_bounds(model, p, seed)?,
            CheckSpec::EntropyLiYau(p) => analytic::check_entropy_li_yau(model, p)?,
            CheckSpec::Harnack(p) => analytic::check_harnack(model, p, seed)?,
            CheckSpec::KernelDecay(p) => analytic::check_kernel_decay(model, p)?,
            CheckSpec::PoincareDecay(p) => analytic::check_poincare_decay(model, p)?,
        })
    }
}

fn run_schedules(model: &LieModel, p: &ScheduleParams) -> Result<Vec<CheckResult>> {
    let (_, k) = canonical_constants(model)?;
    let (schedules, omitted) = builtin_schedules(&k, p.horizon);
    let mut out = Vec::new();
    for s in &schedules {
        let mut r = check_schedule_on(s, &k, p.intervals)?;
        for o in &omitted {
            r = r.note(format!("omitted: {o}"));
        }
        out.push(r);
        if s.ratio_increasing {
            out.push(check_ratio_increasing(s, p.intervals)?);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub json: Option<PathBuf>,
    pub csv_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Default for SuiteConfig {
    /// Every check with its default parameters.
    fn default() -> Self {
        SuiteConfig {
            seed: 0,
            checks: vec![
                CheckSpec::CdInequality(CdParams::default()),
                CheckSpec::Constants(ConstantsParams::default()),
                CheckSpec::ConditionB(CondBParams::default()),
                CheckSpec::Commutation(CommutationParams::default()),
                CheckSpec::RicciComparison(RicciParams::default()),
                CheckSpec::SpectralGap(SpectralParams::default()),
                CheckSpec::Schedules(ScheduleParams::default()),
                CheckSpec::SemigroupFidelity(FidelityParams::default()),
                CheckSpec::GradientBounds(GradientParams::default()),
                CheckSpec::EntropyLiYau(LiYauParams::default()),
                CheckSpec::Harnack(HarnackParams::default()),
                CheckSpec::KernelDecay(KernelDecayParams::default()),
                CheckSpec::PoincareDecay(PoincareParams::default()),
            ],
            output: OutputConfig::default(),
        }
    }
}

impl SuiteConfig {
    /// Parses and validates; every failure is an [`Error::Config`].
    pub fn from_json(text: &str) -> Result<SuiteConfig> {
        let config: SuiteConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<SuiteConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        SuiteConfig::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.checks.iter().try_for_each(CheckSpec::validate)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub pass: usize,
    pub fail: usize,
    pub inconclusive: usize,
}

/// Suite outcome. The JSON report is the `results` array alone, with no wall-clock times.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub seed: u64,
    pub config_digest: String,
    pub tally: Tally,
    pub results: Vec<CheckResult>,
}

impl Report {
    pub fn from_results(seed: u64, config_digest: String, results: Vec<CheckResult>) -> Report {
        let mut tally = Tally::default();
        for r in &results {
            match r.verdict {
                Verdict::Pass => tally.pass += 1,
                Verdict::Fail => tally.fail += 1,
                Verdict::Inconclusive => tally.inconclusive += 1,
            }
        }
        Report { seed, config_digest, tally, results }
    }

    pub fn failed(&self) -> bool {
        self.tally.fail > 0
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.results)? + "\n")
    }

    /// `summary.csv` plus one `<check_id>.csv` of per-case rows for each check.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut summary = csv::Writer::from_path(dir.join("summary.csv"))?;
        summary.write_record(["check_id", "anchor", "model", "verdict", "margin", "tolerance", "stat_error", "inputs_digest"])?;
        let mut by_check: BTreeMap<&str, Vec<&CheckResult>> = BTreeMap::new();
        for r in &self.results {
            summary.write_record([
                r.check_id.as_str(),
                &r.anchor,
                &r.model,
                verdict_label(r.verdict),
                &r.margin.to_string(),
                &r.tolerance.to_string(),
                &r.stat_error.to_string(),
                &r.inputs_digest,
            ])?;
            by_check.entry(&r.check_id).or_default().push(r);
        }
        summary.flush()?;
        for (id, results) in by_check {
            let mut w = csv::Writer::from_path(dir.join(format!("{id}.csv")))?;
            w.write_record(["anchor", "model", "case", "lhs", "rhs", "margin", "error"])?;
            for r in results {
                for row in &r.rows {
                    w.write_record([
                        r.anchor.as_str(),
                        &r.model,
                        &row.case,
                        &row.lhs.to_string(),
                        &row.rhs.to_string(),
                        &row.margin.to_string(),
                        &row.error.to_string(),
                    ])?;
                }
            }
            w.flush()?;
        }
        Ok(())
    }
}

pub fn verdict_label(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::Inconclusive => "inconclusive",
    }
}

/// Runs every `(check, model)` job. Runtime errors become failed results; only config errors are returned.
pub fn run_suite(config: &SuiteConfig) -> Result<Report> {
    config.validate()?;
    let mut jobs = Vec::new();
    for (ci, spec) in config.checks.iter().enumerate() {
        for (mi, name) in spec.models().into_iter().enumerate() {
            jobs.push((spec, name, mix_seed(mix_seed(config.seed, ci as u64), mi as u64)));
        }
    }
    let batches: Vec<Vec<CheckResult>> = jobs
        .par_iter()
        .map(|(spec, name, seed)| {
            let outcome = model_by_name(name).and_then(|m| spec.run(&m, *seed));
            match outcome {
                Ok(mut results) => {
                    for r in &mut results {
                        r.model = name.clone();
                    }
                    results
                }
                Err(e) => vec![CheckResult::new(spec.id(), spec.id(), name, &(spec, name, seed), f64::NAN, 0.0, 0.0)
                    .note(format!("check could not run: {e}"))],
            }
        })
        .collect();
    let results: Vec<CheckResult> = batches.into_iter().flatten().collect();
    let digest = sha256_hex(serde_json::to_string(&config.checks)?.as_bytes());
    Ok(Report::from_results(config.seed, digest, results))
}

/// Runs the suite and writes whatever outputs the config names.
pub fn run_and_write(config: &SuiteConfig) -> Result<Report> {
    let report = run_suite(config)?;
    if let Some(path) = &config.output.json {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, report.to_json()?)?;
    }
    if let Some(dir) = &config.output.csv_dir {
        report.write_csv(dir)?;
    }
    Ok(report)
}
