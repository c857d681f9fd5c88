//! One function per subcommand. Each parses its block, runs the library, and
//! writes the report with the resolved config embedded.

use std::path::{Path, PathBuf};

use hdclt_core::bounds::{empirical_bounds, population_bounds, BoundParams, BoundReport};
use hdclt_core::datagen::{population_moments, read_dataset, sample_dataset, write_dataset_bin, write_dataset_csv, CovModel, Dataset, DesignSpec, MomentReport};
use hdclt_core::experiments::{nazarov_scan, rate_scan, smoothmax_check, ScanSpec};
use hdclt_core::geometry::{sample_rectangle_family, SetFamily};
use hdclt_core::montecarlo::{estimate_rho, estimate_rho_boot, estimate_varrho, BootMode, RhoEstimate, VarrhoEstimate};
use hdclt_core::report::{emit_report, Cell, Report, Table, WithConfig};
use hdclt_core::sums::{empirical_covariance, CovMatrix};
use hdclt_core::Error;
use serde::{Deserialize, Serialize};
use toml::Value;

use crate::config::Config;
use crate::error::{CliError, CliResult};

fn default_m_replications() -> usize {
    10_000
}

fn emit<R: Report>(cfg: &Config, result: &R) -> CliResult<()> {
    let wrapped = WithConfig {
        config: &cfg.echo,
        result,
    };
    emit_report(&wrapped, &cfg.output, cfg.format)?;
    Ok(())
}

/// Tags a library error with the command block it came from.
fn in_block(cfg: &Config) -> impl Fn(Error) -> CliError + '_ {
    move |e| CliError::Core(e.at(cfg.block_name))
}

/// A dataset file, or a design and sample size to draw one from the run seed.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum DatasetSource {
    Path(PathBuf),
    Generate { design: DesignSpec, n: usize },
}

impl DatasetSource {
    fn load(&self, seed: u64) -> hdclt_core::Result<Dataset> {
        match self {
            DatasetSource::Path(p) => read_dataset(p),
            DatasetSource::Generate { design, n } => sample_dataset(design, *n, seed),
        }
    }
}

/// Where the comparison covariance comes from.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
enum SigmaSource {
    /// The population covariance of the command's design, or of an explicit one.
    Design { design: Option<DesignSpec> },
    Identity,
    /// `Σ̂` of the dataset.
    Empirical,
    /// A `{"p": .., "data": [..]}` JSON file.
    File { path: PathBuf },
}

impl SigmaSource {
    fn resolve(&self, design: Option<&DesignSpec>, dataset: Option<&Dataset>, p: usize) -> CliResult<CovMatrix> {
        let cov = match self {
            SigmaSource::Design { design: Some(d) } => {
                d.validate()?;
                d.covariance_matrix()
            }
            SigmaSource::Design { design: None } => match design.or_else(|| dataset.and_then(Dataset::design)) {
                Some(d) => d.covariance_matrix(),
                None => return Err(CliError::config("sigma.design", "no design is available; give one explicitly")),
            },
            SigmaSource::Identity => CovMatrix::identity(p),
            SigmaSource::Empirical => match dataset {
                Some(ds) => empirical_covariance(ds)?,
                None => return Err(CliError::config("sigma.source", "`empirical` needs a dataset")),
            },
            SigmaSource::File { path } => read_json(path)?,
        };
        if cov.p() != p {
            return Err(Error::Dimension { expected: p, got: cov.p() }.into());
        }
        Ok(cov)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum FamilyConfig {
    /// `K` random rectangles scaled to the comparison covariance.
    Rectangles {
        #[serde(rename = "K")]
        k: usize,
    },
    /// A set family JSON file.
    File { path: PathBuf },
}

impl FamilyConfig {
    fn build(&self, sigma: &CovMatrix, seed: u64) -> CliResult<SetFamily> {
        let family = match self {
            FamilyConfig::Rectangles { k } => sample_rectangle_family(sigma.p(), *k, &sigma.diagonal(), seed)?,
            FamilyConfig::File { path } => read_json(path)?,
        };
        if family.p() != sigma.p() {
            return Err(Error::Dimension {
                expected: sigma.p(),
                got: family.p(),
            }
            .into());
        }
        Ok(family)
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())).into())
}

// ---------------------------------------------------------------- simulate

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateBlock {
    design: DesignSpec,
    n: usize,
    /// Dataset path; `.csv` selects CSV, anything else the binary format.
    out: PathBuf,
}

#[derive(Serialize)]
struct SimulateReport {
    dataset: String,
    n: usize,
    p: usize,
    column_means: Vec<f64>,
    moments: MomentReport,
}

impl Report for SimulateReport {
    fn table(&self) -> Option<Table> {
        let mut t = Table::new(vec!["column", "mean", "third_moment", "fourth_moment"]);
        for (j, m) in self.column_means.iter().enumerate() {
            t.push(vec![
                Cell::Int(j as i64 + 1),
                (*m).into(),
                self.moments.third_moments[j].into(),
                self.moments.fourth_moments[j].into(),
            ]);
        }
        Some(t)
    }
}

pub fn simulate(cfg: &Config) -> CliResult<()> {
    let block: SimulateBlock = cfg.parse_block()?;
    let err = in_block(cfg);
    let ds = sample_dataset(&block.design, block.n, cfg.seed).map_err(&err)?;
    let moments = population_moments(&block.design).map_err(&err)?;
    let is_csv = block.out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        write_dataset_csv(&ds, &block.out)?;
    } else {
        write_dataset_bin(&ds, &block.out)?;
    }
    emit(
        cfg,
        &SimulateReport {
            dataset: block.out.display().to_string(),
            n: ds.n(),
            p: ds.p(),
            column_means: ds.column_means(),
            moments,
        },
    )
}

// ------------------------------------------------------------------ bounds

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsBlock {
    /// Empirical bounds from data when present; population bounds otherwise.
    dataset: Option<DatasetSource>,
    design: Option<DesignSpec>,
    n: Option<usize>,
    params: BoundParams,
    #[serde(rename = "R", default = "default_m_replications")]
    r: usize,
    /// Covariance for `Δ_{n,r}` (empirical mode only).
    sigma: Option<SigmaSource>,
}

pub fn bounds(cfg: &Config) -> CliResult<()> {
    let block: BoundsBlock = cfg.parse_block()?;
    let err = in_block(cfg);
    let report: BoundReport = match (&block.dataset, &block.design, block.n) {
        (Some(src), None, None) => {
            let ds = src.load(cfg.seed).map_err(&err)?;
            let sigma = match &block.sigma {
                Some(s) => Some(s.resolve(None, Some(&ds), ds.p())?),
                None => None,
            };
            empirical_bounds(&ds, &block.params, sigma.as_ref(), block.r, cfg.seed).map_err(&err)?
        }
        (None, Some(design), Some(n)) => {
            if block.sigma.is_some() {
                return Err(CliError::config("bounds.sigma", "only used with a dataset"));
            }
            population_bounds(design, n, &block.params, block.r, cfg.seed).map_err(&err)?
        }
        (Some(_), _, _) => return Err(CliError::config("bounds.dataset", "give either `dataset` or `design` and `n`, not both")),
        _ => return Err(CliError::config("bounds", "needs `dataset`, or both `design` and `n`")),
    };
    emit(cfg, &report)
}

// ------------------------------------------------------------ estimate-rho

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EstimateRhoBlock {
    design: DesignSpec,
    n: usize,
    family: FamilyConfig,
    #[serde(rename = "R")]
    r: usize,
    /// Defaults to the design's covariance.
    sigma: Option<SigmaSource>,
    /// Adds `ϱ_n` over this interpolation grid; the family must be lower orthants.
    v_grid: Option<Vec<f64>>,
    /// Adds population bounds for the same `(design, n)`.
    params: Option<BoundParams>,
    #[serde(default = "default_m_replications")]
    m_replications: usize,
}

#[derive(Serialize)]
struct EstimateRhoReport {
    rho: RhoEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    varrho: Option<VarrhoEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bounds: Option<BoundReport>,
}

impl Report for EstimateRhoReport {
    fn table(&self) -> Option<Table> {
        self.rho.table()
    }
}

pub fn estimate_rho_cmd(cfg: &Config) -> CliResult<()> {
    let block: EstimateRhoBlock = cfg.parse_block()?;
    let err = in_block(cfg);
    // Parameter checks come first so a bad config fails before any simulation.
    if let Some(params) = &block.params {
        params.validate().map_err(&err)?;
    }
    block.design.validate().map_err(&err)?;
    let sigma = block
        .sigma
        .clone()
        .unwrap_or(SigmaSource::Design { design: None })
        .resolve(Some(&block.design), None, block.design.p)?;
    let family = block.family.build(&sigma, cfg.seed)?;
    let rho = estimate_rho(&block.design, block.n, &sigma, &family, block.r, cfg.seed).map_err(&err)?;
    let varrho = match &block.v_grid {
        Some(grid) => Some(estimate_varrho(&block.design, block.n, &sigma, &family, grid, block.r, cfg.seed).map_err(&err)?),
        None => None,
    };
    let bounds = match &block.params {
        Some(params) => Some(population_bounds(&block.design, block.n, params, block.m_replications, cfg.seed).map_err(&err)?),
        None => None,
    };
    emit(cfg, &EstimateRhoReport { rho, varrho, bounds })
}

// --------------------------------------------------------------- bootstrap

#[derive(Clone, Copy, Debug, Deserialize)]
enum ModeChoice {
    #[serde(rename = "MB", alias = "mb")]
    Multiplier,
    #[serde(rename = "EB", alias = "eb")]
    Empirical,
    #[serde(rename = "both")]
    Both,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BootstrapBlock {
    dataset: DatasetSource,
    mode: ModeChoice,
    family: FamilyConfig,
    #[serde(rename = "R")]
    r: usize,
    sigma: SigmaSource,
}

#[derive(Serialize)]
struct BootstrapReport {
    #[serde(rename = "MB", skip_serializing_if = "Option::is_none")]
    mb: Option<RhoEstimate>,
    #[serde(rename = "EB", skip_serializing_if = "Option::is_none")]
    eb: Option<RhoEstimate>,
    /// `|ρ̂^EB - ρ̂^MB|` when both modes ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    mode_gap: Option<f64>,
}

impl Report for BootstrapReport {
    fn table(&self) -> Option<Table> {
        let mut out: Option<Table> = None;
        for (mode, est) in [("MB", &self.mb), ("EB", &self.eb)] {
            let Some(t) = est.as_ref().and_then(|e| e.table()) else {
                continue;
            };
            let table = out.get_or_insert_with(|| {
                let mut cols = vec!["mode"];
                cols.extend(t.columns.iter().copied());
                Table::new(cols)
            });
            for row in t.rows {
                let mut r = vec![Cell::Text(mode.into())];
                r.extend(row);
                table.push(r);
            }
        }
        out
    }
}

pub fn bootstrap(cfg: &Config) -> CliResult<()> {
    let block: BootstrapBlock = cfg.parse_block()?;
    let err = in_block(cfg);
    let ds = block.dataset.load(cfg.seed).map_err(&err)?;
    let sigma = block.sigma.resolve(None, Some(&ds), ds.p())?;
    let family = block.family.build(&sigma, cfg.seed)?;
    let run = |mode| estimate_rho_boot(&ds, &sigma, &family, block.r, cfg.seed, mode).map_err(&err);
    let (mb, eb) = match block.mode {
        ModeChoice::Multiplier => (Some(run(BootMode::Multiplier)?), None),
        ModeChoice::Empirical => (None, Some(run(BootMode::Empirical)?)),
        ModeChoice::Both => (Some(run(BootMode::Multiplier)?), Some(run(BootMode::Empirical)?)),
    };
    let mode_gap = match (&mb, &eb) {
        (Some(m), Some(e)) => Some((e.sup_diff - m.sup_diff).abs()),
        _ => None,
    };
    emit(cfg, &BootstrapReport { mb, eb, mode_gap })
}

// --------------------------------------------------------------- rate-scan

pub fn rate_scan_cmd(cfg: &Config) -> CliResult<()> {
    if cfg.block.contains_key("seed") {
        return Err(CliError::config("rate_scan.seed", "the seed is set at the top level"));
    }
    let mut block = cfg.block.clone();
    block.insert("seed".into(), Value::Integer(cfg.seed as i64));
    let spec: ScanSpec = Value::Table(block)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::config(cfg.block_name, e.message().to_string()))?;
    let result = rate_scan(&spec).map_err(in_block(cfg))?;
    emit(cfg, &result)
}

// ----------------------------------------------------------------- nazarov

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NazarovBlock {
    #[serde(default)]
    covariance: CovModel,
    p_grid: Vec<usize>,
    y_count: usize,
    a_grid: Vec<f64>,
    #[serde(rename = "R")]
    r: usize,
}

pub fn nazarov(cfg: &Config) -> CliResult<()> {
    let b: NazarovBlock = cfg.parse_block()?;
    let result = nazarov_scan(&b.covariance, &b.p_grid, b.y_count, &b.a_grid, b.r, cfg.seed).map_err(in_block(cfg))?;
    emit(cfg, &result)
}

// --------------------------------------------------------------- smoothmax

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SmoothmaxBlock {
    beta_grid: Vec<f64>,
    p_grid: Vec<usize>,
    trials: usize,
}

pub fn smoothmax(cfg: &Config) -> CliResult<()> {
    let b: SmoothmaxBlock = cfg.parse_block()?;
    let result = smoothmax_check(&b.beta_grid, &b.p_grid, b.trials, cfg.seed).map_err(in_block(cfg))?;
    emit(cfg, &result)
}
