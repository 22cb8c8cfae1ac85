use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use sqm_core::manyworlds::{density_at, manifold_dimension, sample_decomposition};
use sqm_core::operator::State;
use sqm_core::reproduce;
use sqm_core::sqmn;
use sqm_core::toy::{self, Direction};

use crate::config::FileConfig;
use crate::error::{usage, CliError};

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the battery of reference constants and property suites.
    Reproduce(ReproduceArgs),
    /// Density and typicalities in the circle, sphere or ball model.
    Typicality(TypicalityArgs),
    /// Posterior inference for the gaussian and digit models.
    Sqmn {
        #[command(subcommand)]
        sub: SqmnCommand,
    },
    /// EPR pair and cat measures.
    Epr(EprArgs),
    /// Sample an ordered projector decomposition.
    Flag(FlagArgs),
    /// Two-step sequence conditions, or the Monte Carlo fraction with `--mc`.
    Twostep(TwostepArgs),
}

#[derive(Subcommand, Debug)]
pub enum SqmnCommand {
    /// Posterior density of n given p.
    Posterior(PosteriorArgs),
    /// Posterior mean and standard deviation.
    Moments(MomentsArgs),
    /// Range of p accepted by the dual typicality.
    Band(BandArgs),
    /// Posterior probability in the digit experiment.
    Experiment(ExperimentArgs),
    /// Confidence bound on |n − 1| in the digit experiment.
    Bound(BoundArgs),
    /// Normalization of the dual posterior.
    Dual(DualArgs),
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ReproduceArgs {
    /// Check group to run; repeat for several.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(reproduce::GROUPS))]
    pub only: Option<Vec<String>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Circle,
    Sphere,
    Ball,
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct TypicalityArgs {
    #[arg(long, value_enum)]
    pub model: Option<Model>,
    /// State polar angle.
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    /// Circle perception angle, or ball state azimuth.
    #[arg(long, allow_negative_numbers = true)]
    pub phi: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub vartheta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub varphi: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub u: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub v: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub w: Option<f64>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct PosteriorArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub p: Option<f64>,
    /// One or more values of n, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub n: Option<Vec<f64>>,
    /// Use the dual typicality as likelihood.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub dual: Option<bool>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct MomentsArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub p: Option<f64>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct BandArgs {
    #[arg(long)]
    pub level: Option<f64>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    pub n: Option<f64>,
    /// Counts and densities; all five or none (then N1 = 1, N2 = 10^(k/2), m = 1/N).
    #[arg(long)]
    pub n1: Option<u64>,
    #[arg(long)]
    pub n2: Option<u64>,
    #[arg(long)]
    pub m1: Option<f64>,
    #[arg(long)]
    pub m2: Option<f64>,
    #[arg(long)]
    pub m3: Option<f64>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct BoundArgs {
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub level: Option<f64>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct DualArgs {}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct EprArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    /// Number of cat parts.
    #[arg(long)]
    pub parts: Option<usize>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FlagArgs {
    #[arg(long)]
    pub dim: Option<usize>,
    /// Comma-separated ranks summing to `dim`.
    #[arg(long, value_delimiter = ',')]
    pub ranks: Option<Vec<usize>>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct TwostepArgs {
    /// State direction as polar,azimuth.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub state: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub q: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub r: Option<Vec<f64>>,
    /// Number of Monte Carlo samples for the linear-positivity fraction.
    #[arg(long)]
    pub mc: Option<u64>,
}

fn need<T>(v: Option<T>, name: &str) -> Result<T, CliError> {
    v.ok_or_else(|| usage(format!("missing --{name}")))
}

fn direction(v: Option<Vec<f64>>, name: &str) -> Result<Direction, CliError> {
    let v = need(v, name)?;
    match v.as_slice() {
        [p, a] => Direction::new(*p, *a).map_err(|e| usage(format!("--{name}: {e}"))),
        _ => Err(usage(format!("--{name} takes polar,azimuth"))),
    }
}

/// Runs a command; returns its name, the result value and the names of
/// failed checks.
pub fn run(cmd: &Command, cfg: &FileConfig, seed: u64) -> Result<(String, Value, Vec<String>), CliError> {
    Ok(match cmd {
        Command::Reproduce(a) => {
            let a = cfg.merge("reproduce", a)?;
            let checks = reproduce::run(&a.only.unwrap_or_default(), seed)?;
            let failed: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
            let result = json!({
                "passed": checks.len() - failed.len(),
                "failed": failed.len(),
                "rows": checks,
            });
            ("reproduce".into(), result, failed)
        }
        Command::Typicality(a) => {
            let a = cfg.merge("typicality", a)?;
            let result = match need(a.model, "model")? {
                Model::Circle => serde_json::to_value(toy::circle_model(need(a.theta, "theta")?, need(a.phi, "phi")?)?)?,
                Model::Sphere => {
                    let (t, vt, vp) = (need(a.theta, "theta")?, need(a.vartheta, "vartheta")?, need(a.varphi, "varphi")?);
                    let mut v = serde_json::to_value(toy::sphere_model(t, vt, vp)?)?;
                    v["theta"] = json!(t);
                    v["vartheta"] = json!(vt);
                    v["varphi"] = json!(vp);
                    v
                }
                Model::Ball => {
                    let (u, v, w) = (need(a.u, "u")?, need(a.v, "v")?, need(a.w, "w")?);
                    let state = Direction::new(a.theta.unwrap_or(0.0), a.phi.unwrap_or(0.0))?.state();
                    let mut out = serde_json::to_value(toy::ball_model_density(&state, u, v, w)?)?;
                    out["u"] = json!(u);
                    out["v"] = json!(v);
                    out["w"] = json!(w);
                    out
                }
            };
            ("typicality".into(), result, vec![])
        }
        Command::Sqmn { sub } => run_sqmn(sub, cfg)?,
        Command::Epr(a) => {
            let a = cfg.merge("epr", a)?;
            let r = toy::epr_cat_model(need(a.theta, "theta")?, a.parts.unwrap_or(2))?;
            ("epr".into(), serde_json::to_value(r)?, vec![])
        }
        Command::Flag(a) => {
            let a = cfg.merge("flag", a)?;
            let (dim, ranks) = (need(a.dim, "dim")?, need(a.ranks, "ranks")?);
            let md = manifold_dimension(dim, &ranks)?;
            let d = sample_decomposition(dim, &ranks, seed)?;
            let mixed = density_at(&d, &State::maximally_mixed(dim))?;
            let result = json!({
                "dim": dim,
                "ranks": ranks,
                "manifoldDimension": md,
                "mixedStateDensity": mixed,
                "decomposition": d,
            });
            ("flag".into(), result, vec![])
        }
        Command::Twostep(a) => {
            let a = cfg.merge("twostep", a)?;
            if let Some(n) = a.mc {
                if a.q.is_some() || a.r.is_some() {
                    return Err(usage("--mc samples directions itself; drop --q/--r"));
                }
                let est = toy::linear_positivity_fraction(n, seed)?;
                ("twostep --mc".into(), serde_json::to_value(est)?, vec![])
            } else {
                let (s, q, r) = (direction(a.state, "state")?, direction(a.q, "q")?, direction(a.r, "r")?);
                let result = json!({
                    "report": toy::two_step_analysis(s, q, r, None)?,
                    "triangles": toy::triangle_equivalence(s, q, r),
                });
                ("twostep".into(), result, vec![])
            }
        }
    })
}

fn run_sqmn(sub: &SqmnCommand, cfg: &FileConfig) -> Result<(String, Value, Vec<String>), CliError> {
    let (name, result) = match sub {
        SqmnCommand::Posterior(a) => {
            let a = cfg.merge("sqmn.posterior", a)?;
            let (p, ns, dual) = (need(a.p, "p")?, need(a.n, "n")?, a.dual.unwrap_or(false));
            let rows = ns
                .iter()
                .map(|&n| {
                    let density = if dual { sqmn::dual_posterior(p, n)? } else { sqmn::posterior_density(p, n)? };
                    let asymptotic = (!dual && n > 0.0).then(|| sqmn::posterior_asymptotic(p, n));
                    Ok(json!({"n": n, "density": density, "asymptotic": asymptotic}))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            ("posterior", json!({"p": p, "dual": dual, "rows": rows}))
        }
        SqmnCommand::Moments(a) => {
            let a = cfg.merge("sqmn.moments", a)?;
            let p = need(a.p, "p")?;
            let result = json!({
                "p": p,
                "posterior": sqmn::posterior_mean_std(p)?,
                "posteriorMeanQuadrature": sqmn::posterior_moment_quadrature(p, 1)?,
                "dual": sqmn::dual_posterior_mean_std(p)?,
            });
            ("moments", result)
        }
        SqmnCommand::Band(a) => {
            let a = cfg.merge("sqmn.band", a)?;
            ("band", serde_json::to_value(sqmn::gaussian_dual_band(a.level.unwrap_or(0.99))?)?)
        }
        SqmnCommand::Experiment(a) => {
            let a = cfg.merge("sqmn.experiment", a)?;
            let (k, n) = (need(a.k, "k")?, need(a.n, "n")?);
            let custom = [a.n1.is_some(), a.n2.is_some(), a.m1.is_some(), a.m2.is_some(), a.m3.is_some()];
            let result = if custom.iter().all(|&c| c) {
                let m = [a.m1.unwrap(), a.m2.unwrap(), a.m3.unwrap()];
                let pr = sqmn::digit_experiment(k, a.n1.unwrap(), a.n2.unwrap(), m, n)?;
                json!({"k": k, "n": n, "probability": pr, "approximation": null})
            } else if custom.iter().any(|&c| c) {
                return Err(usage("give all of --n1 --n2 --m1 --m2 --m3, or none"));
            } else {
                let pr = sqmn::digit_experiment_canonical(k, n)?;
                json!({"k": k, "n": n, "probability": pr, "approximation": sqmn::digit_experiment_approx(k, n)})
            };
            ("experiment", result)
        }
        SqmnCommand::Bound(a) => {
            let a = cfg.merge("sqmn.bound", a)?;
            ("bound", serde_json::to_value(sqmn::confidence_bound(need(a.k, "k")?, a.level.unwrap_or(0.99))?)?)
        }
        SqmnCommand::Dual(a) => {
            cfg.merge("sqmn.dual", a)?;
            ("dual", serde_json::to_value(sqmn::dual_normalization())?)
        }
    };
    Ok((format!("sqmn {name}"), result, vec![]))
}
