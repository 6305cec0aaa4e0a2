use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use flatness::datasets::{generate as generate_set, FamilyParams, SetMeta};
use flatness::extrinsic::{sampling_slack, GrassmannSearchConfig, SCALE_FLOOR_FACTOR};
use flatness::io::{read_cloud, write_cloud};
use flatness::profile::{
    dyadic_profile, dyadic_profile_extrinsic, dyadic_profile_intrinsic, CloudMeta, DyadicConfig, FlatnessProfile,
};
use flatness::verification::{
    intrinsic_slack, slope_analysis, verify_converse_alpha, verify_converse_beta, verify_precise_a, verify_precise_b,
    verify_sum_a, verify_sum_b, SlopeFit, Statement, VerificationRecord,
};
use flatness::PointCloud;

use super::{AnalyzeArgs, Format, GenerateArgs, Numbers, ProfileArgs, ReportArgs, VerifyArgs};
use crate::table;

pub const THREADS_ENV: &str = "FLATNESS_THREADS";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Generate,
    Analyze,
    Verify,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: CommandKind,
    pub inputs: Vec<String>,
    pub output: String,
    pub config: Option<DyadicConfig>,
    pub search: Option<GrassmannSearchConfig>,
    pub seed: u64,
    pub tool_version: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    manifest: RunManifest,
    meta: SetMeta,
    len: usize,
    dim: usize,
    spacing: f64,
}

/// Per-scale sampling slack of the extrinsic and intrinsic upper bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleSlack {
    pub i: i32,
    pub extrinsic: f64,
    pub intrinsic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub kind: String,
    pub manifest: RunManifest,
    pub profile: FlatnessProfile,
    /// `8 * spacing`; scales with smaller radius are skipped.
    pub floor: f64,
    pub skipped_scales: Vec<i32>,
    pub slack: Vec<ScaleSlack>,
    pub timing_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyInput {
    pub path: String,
    pub cloud: CloudMeta,
    pub profile: FlatnessProfile,
    pub records: Vec<VerificationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub kind: String,
    pub manifest: RunManifest,
    pub statements: Vec<Statement>,
    pub lambdas: Vec<f64>,
    pub inputs: Vec<VerifyInput>,
    /// Regression of `ln a` on `ln alpha` over the `converse_alpha` records.
    pub slope: Option<SlopeFit>,
    pub slope_pairs: Vec<(f64, f64)>,
    /// Checks that could not be evaluated, with the reason.
    pub failures: Vec<String>,
    pub timing_ms: u128,
}

fn configs(p: &ProfileArgs) -> Result<(DyadicConfig, GrassmannSearchConfig)> {
    let cfg = DyadicConfig {
        eps_margin: p.eps_margin,
        i_min: p.i_min,
        i_max: p.i_max,
        n: p.n,
        center_sample_cap: p.centers,
        net_resolution: p.net_resolution,
        pair_cap: p.pair_cap,
        lower_bound_draws: p.draws,
        enforce_gate: p.enforce_gate,
        seed: p.seed,
        theta_c: DyadicConfig::default().theta_c,
    };
    let search = GrassmannSearchConfig {
        restarts: p.restarts,
        seed: p.seed,
        ..GrassmannSearchConfig::default()
    };
    cfg.validate()?;
    search.validate()?;
    Ok((cfg, search))
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Parses `name=value` pairs into the tagged parameter object of a family.
fn family_params(family: &str, pairs: &[String]) -> Result<FamilyParams> {
    let mut obj = Map::new();
    obj.insert("family".into(), Value::String(family.into()));
    for pair in pairs {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| anyhow!("parameter `{pair}` is not of the form name=value"))?;
        let value = if let Ok(u) = v.parse::<u64>() {
            Value::from(u)
        } else if let Ok(f) = v.parse::<f64>() {
            Value::from(f)
        } else {
            bail!("parameter `{k}` has non-numeric value `{v}`");
        };
        if obj.insert(k.into(), value).is_some() {
            bail!("parameter `{k}` given twice");
        }
    }
    serde_json::from_value(Value::Object(obj)).map_err(|e| anyhow!("invalid parameters for family `{family}`: {e}"))
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let params = family_params(&args.family, &args.params)?;
    let set = generate_set(&params, args.seed)?;
    write_cloud(set.cloud(), &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    let sidecar = Sidecar {
        manifest: RunManifest {
            command: CommandKind::Generate,
            inputs: Vec::new(),
            output: display(&args.out),
            config: None,
            search: None,
            seed: args.seed,
            tool_version: TOOL_VERSION.into(),
        },
        len: set.cloud.len(),
        dim: set.cloud.dim(),
        spacing: set.cloud.spacing(),
        meta: set.meta,
    };
    write_json(&sidecar, &sidecar_path(&args.out))
}

fn load_cloud(path: &Path) -> Result<PointCloud> {
    read_cloud(path).with_context(|| format!("reading {}", path.display()))
}

fn profile_of(s: &PointCloud, cfg: &DyadicConfig, search: &GrassmannSearchConfig, numbers: Numbers) -> Result<FlatnessProfile> {
    Ok(match numbers {
        Numbers::All => dyadic_profile(s, cfg, search)?,
        Numbers::Extrinsic => dyadic_profile_extrinsic(s, cfg, search)?,
        Numbers::Intrinsic => dyadic_profile_intrinsic(s, cfg, search)?,
    })
}

fn slack_table(profile: &FlatnessProfile) -> Vec<ScaleSlack> {
    profile
        .scales
        .iter()
        .map(|rec| ScaleSlack {
            i: rec.i,
            extrinsic: sampling_slack(profile.cloud.spacing, rec.radius, profile.config.n, &profile.search),
            intrinsic: intrinsic_slack(profile.cloud.spacing, rec.radius, &profile.config, &profile.search),
        })
        .collect()
}

pub fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let start = Instant::now();
    let (cfg, search) = configs(&args.profile)?;
    let s = load_cloud(&args.input)?;
    let profile = profile_of(&s, &cfg, &search, args.numbers)?;
    let report = AnalyzeReport {
        kind: "analyze".into(),
        manifest: RunManifest {
            command: CommandKind::Analyze,
            inputs: vec![display(&args.input)],
            output: display(&args.out),
            config: Some(cfg.clone()),
            search: Some(search),
            seed: cfg.seed,
            tool_version: TOOL_VERSION.into(),
        },
        floor: SCALE_FLOOR_FACTOR * s.spacing(),
        skipped_scales: profile.scales.iter().filter(|r| r.below_floor).map(|r| r.i).collect(),
        slack: slack_table(&profile),
        profile,
        timing_ms: start.elapsed().as_millis(),
    };
    write_json(&report, &args.out)
}

/// Resolves the cloud behind a verify input: either the file itself or the
/// input recorded in an analyze report.
fn verify_source(path: &Path) -> Result<(PointCloud, Option<FlatnessProfile>)> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if value.get("kind").and_then(Value::as_str) == Some("analyze") {
            let report: AnalyzeReport = serde_json::from_value(value)?;
            let recorded = PathBuf::from(report.manifest.inputs.first().ok_or_else(|| anyhow!("report lists no input"))?);
            let cloud_path = if recorded.exists() || recorded.is_absolute() {
                recorded
            } else {
                path.parent().unwrap_or(Path::new(".")).join(recorded)
            };
            return Ok((load_cloud(&cloud_path)?, Some(report.profile)));
        }
    }
    Ok((load_cloud(path)?, None))
}

fn parse_statements(list: &str) -> Result<Vec<Statement>> {
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let st: Statement = name.parse()?;
        if !out.contains(&st) {
            out.push(st);
        }
    }
    if out.is_empty() {
        bail!("the statement list is empty; choose from precise_A, precise_B, sum_A, sum_B, converse_alpha, converse_beta");
    }
    Ok(out)
}

fn needs(st: &[Statement], numbers: &[Statement]) -> bool {
    st.iter().any(|s| numbers.contains(s))
}

fn origin_center(s: &PointCloud) -> Vec<f64> {
    let (idx, _) = s.nearest(&vec![0.0; s.dim()]);
    s.point(idx).to_vec()
}

fn records_for(
    s: &PointCloud,
    profile: &FlatnessProfile,
    statements: &[Statement],
    lambdas: &[f64],
    failures: &mut Vec<String>,
    label: &str,
) -> Vec<VerificationRecord> {
    let search = &profile.search;
    let cfg = &profile.config;
    let x = origin_center(s);
    let mut out = Vec::new();
    let mut push = |what: String, r: flatness::Result<VerificationRecord>| match r {
        Ok(rec) => out.push(rec),
        Err(e) => failures.push(format!("{label}: {what}: {e}")),
    };
    for &st in statements {
        match st {
            Statement::PreciseA | Statement::PreciseB => {
                for rec in profile.scales.iter().filter(|r| r.i >= cfg.i_min && !r.below_floor) {
                    let result = if st == Statement::PreciseA {
                        verify_precise_a(s, &x, rec.i, profile, search)
                    } else {
                        verify_precise_b(s, &x, rec.i, profile, search)
                    };
                    push(format!("{st} at i = {}", rec.i), result);
                }
            }
            Statement::SumA | Statement::SumB => {
                for &lambda in lambdas {
                    let result = if st == Statement::SumA {
                        verify_sum_a(profile, lambda)
                    } else {
                        verify_sum_b(profile, lambda)
                    };
                    push(format!("{st} with lambda = {lambda}"), result);
                }
            }
            Statement::ConverseAlpha | Statement::ConverseBeta => {
                for rec in profile.scales.iter().filter(|r| !r.below_floor && r.radius <= 1.0) {
                    let result = if st == Statement::ConverseAlpha {
                        verify_converse_alpha(s, &x, rec.radius, cfg, search)
                    } else {
                        verify_converse_beta(s, &x, rec.radius, cfg, search)
                    };
                    push(format!("{st} at i = {}", rec.i), result.map(|mut v| {
                        v.i = Some(rec.i);
                        v
                    }));
                }
            }
        }
    }
    out
}

/// `converse_alpha` log pairs at radius 1 when several inputs are given,
/// otherwise at every radius.
fn slope_pairs(inputs: &[VerifyInput]) -> Vec<(f64, f64)> {
    let pairs = |unit_only: bool| -> Vec<(f64, f64)> {
        inputs
            .iter()
            .flat_map(|inp| inp.records.iter())
            .filter(|r| r.statement == Statement::ConverseAlpha)
            .filter(|r| !unit_only || r.i == Some(0))
            .filter_map(|r| r.log_pair)
            .map(|(la, lb)| (la.exp(), lb.exp()))
            .collect()
    };
    if inputs.len() >= 3 {
        pairs(true)
    } else {
        pairs(false)
    }
}

/// Returns `Ok(false)` when some check could not be evaluated; the report is
/// written either way.
pub fn verify(args: &VerifyArgs) -> Result<bool> {
    let start = Instant::now();
    let statements = parse_statements(&args.statements)?;
    if needs(&statements, &[Statement::SumA, Statement::SumB]) && args.lambda.is_empty() {
        bail!("sum checks need at least one --lambda");
    }
    let (cfg, search) = configs(&args.profile)?;
    let mut failures = Vec::new();
    let mut inputs = Vec::new();
    for path in &args.inputs {
        let (s, stored) = verify_source(path)?;
        let profile = match stored {
            Some(p) => p,
            None => profile_of(&s, &cfg, &search, Numbers::All)?,
        };
        let label = display(path);
        let records = records_for(&s, &profile, &statements, &args.lambda, &mut failures, &label);
        inputs.push(VerifyInput {
            path: label,
            cloud: profile.cloud.clone(),
            profile,
            records,
        });
    }
    let pairs = if statements.contains(&Statement::ConverseAlpha) { slope_pairs(&inputs) } else { Vec::new() };
    let slope = if pairs.len() >= 3 {
        match slope_analysis(&pairs) {
            Ok(fit) => Some(fit),
            Err(e) => {
                failures.push(format!("slope: {e}"));
                None
            }
        }
    } else {
        None
    };
    let report = VerifyReport {
        kind: "verify".into(),
        manifest: RunManifest {
            command: CommandKind::Verify,
            inputs: args.inputs.iter().map(|p| display(p)).collect(),
            output: display(&args.out),
            config: Some(cfg.clone()),
            search: Some(search),
            seed: cfg.seed,
            tool_version: TOOL_VERSION.into(),
        },
        statements,
        lambdas: args.lambda.clone(),
        inputs,
        slope,
        slope_pairs: pairs,
        failures,
        timing_ms: start.elapsed().as_millis(),
    };
    write_json(&report, &args.out)?;
    let csv = args.out.with_extension("csv");
    fs::write(&csv, table::verify_table(&report)).with_context(|| format!("writing {}", csv.display()))?;
    for f in &report.failures {
        eprintln!("failed: {f}");
    }
    Ok(report.failures.is_empty())
}

pub fn report(args: &ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", args.input.display()))?;
    let out = match (value.get("kind").and_then(Value::as_str), args.format) {
        (_, Format::Json) => serde_json::to_string_pretty(&value)? + "\n",
        (Some("analyze"), Format::Csv) => table::profile_table(&serde_json::from_value::<AnalyzeReport>(value)?),
        (Some("verify"), Format::Csv) => table::verify_table(&serde_json::from_value::<VerifyReport>(value)?),
        _ => bail!("{} is neither an analyze nor a verify report", args.input.display()),
    };
    print!("{out}");
    Ok(())
}
