//! Batch front end for `rgg1d`: tables, simulations, comparisons and λ sweeps.
//!
//! [`run`] turns a parsed [`RunSpec`] into a [`Document`]; `main` only parses
//! flags, writes the document and maps errors to exit statuses.

pub mod output;

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rgg1d::cluster_laws::{law_b, law_u, mean_b, MixedLaw};
use rgg1d::component_counts::{
    coverage_prob, coverage_prob_closed, mean_beta0, moment_beta0, pmf_beta0, pmf_beta0_table,
    pmf_circle_table, pmf_incomplete_table, var_beta0, DistributionTable,
};
use rgg1d::laplace_check::residual_table;
use rgg1d::mc_engine::{estimate, Estimate, SampleConfig, Scenario};
use rgg1d::stats_compare::{compare_continuous, compare_pmf, ComparisonReport, DEFAULT_Z_MAX};
use rgg1d::{IntervalModel, ModelParams};

pub use output::{Cell, Document, Format};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] rgg1d::Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn positive(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        Ok(v) => Err(format!("must be finite and > 0, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn at_least_one(s: &str) -> std::result::Result<u64, String> {
    match s.parse::<u64>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn scenario(s: &str) -> std::result::Result<Scenario, String> {
    Scenario::from_str(s).map_err(|e| e.to_string())
}

/// Inclusive grid `min:max:step`; `max` is kept when within 1e-12 of a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.max - self.min) / self.step + 1e-12).floor() as usize;
        (0..=count).map(|i| self.min + i as f64 * self.step).collect()
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [min, max, step] = parts[..] else {
            return Err(format!("expected min:max:step, got {s:?}"));
        };
        let (min, max, step) = (positive(min)?, positive(max)?, positive(step)?);
        if max < min {
            return Err(format!("grid maximum {max} is below minimum {min}"));
        }
        Ok(Grid { min, max, step })
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Point intensity.
    #[arg(long, value_parser = positive)]
    pub lambda: f64,
    /// Connection radius.
    #[arg(long, value_parser = positive)]
    pub epsilon: f64,
    /// Interval length or circle circumference.
    #[arg(long, value_parser = positive)]
    pub length: f64,
}

impl ModelArgs {
    fn model(&self) -> CliResult<IntervalModel> {
        Ok(IntervalModel::from_parts(self.lambda, self.epsilon, self.length)?)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    /// complete, incomplete, circle, coverage, B or U<n>.
    #[arg(long, value_parser = scenario)]
    pub scenario: Scenario,
    #[arg(long, default_value_t = 100_000, value_parser = at_least_one)]
    pub samples: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LawName {
    #[value(name = "B", alias = "b")]
    B,
    #[value(name = "U", alias = "u")]
    U,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Curve {
    Mean,
    Var,
    Pmf,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Complete-cluster pmf. Columns: n,p
    Pmf(ModelArgs),
    /// Pmf of clusters meeting the interval. Columns: n,p
    Incomplete(ModelArgs),
    /// Circle count pmf. Columns: n,p
    Circle(ModelArgs),
    /// Moments 1..=m of the complete count. Columns: m,moment
    Moments {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 4)]
        m: usize,
    },
    /// Coverage probability. Columns: quadrature,closed_form,difference,mismatch
    Coverage(ModelArgs),
    /// Density grid of B or U_n. Columns: kind,x,value (kind is atom or density)
    Density {
        #[arg(long, value_parser = positive)]
        lambda: f64,
        #[arg(long, value_parser = positive)]
        epsilon: f64,
        #[arg(long, value_enum)]
        law: LawName,
        /// Index of U_n.
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 201)]
        points: usize,
        /// Right end of the grid; defaults to a point past almost all the mass.
        #[arg(long, value_parser = positive)]
        upper: Option<f64>,
    },
    /// Closed transforms against quadrature. Columns: quantity,index,s,closed,numeric,residual
    LaplaceCheck {
        #[arg(long, value_parser = positive)]
        lambda: f64,
        #[arg(long, value_parser = positive)]
        epsilon: f64,
        /// Largest cluster count checked.
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Largest moment checked.
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 1.0, 2.0], value_parser = positive)]
        s: Vec<f64>,
    },
    /// Monte Carlo outcomes. Columns: outcome,count,estimate,std_error (index,value for B and U<n>)
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Monte Carlo against the closed form.
    /// Columns: outcome,analytic,empirical,z,chi_square,dof,ks,verdict with a final row "all"
    Compare {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value_t = DEFAULT_Z_MAX, value_parser = positive)]
        z_max: f64,
    },
    /// Curves over a λ grid. Columns: lambda,mean | lambda,var | lambda,p<n>...
    Sweep {
        #[arg(long, value_enum)]
        curve: Curve,
        /// min:max:step, endpoints included.
        #[arg(long)]
        lambda: Grid,
        #[arg(long, value_parser = positive)]
        epsilon: f64,
        #[arg(long, value_parser = positive)]
        length: f64,
        /// Counts for the pmf curve.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0usize, 1, 2, 3])]
        n: Vec<usize>,
    },
}

/// Everything one invocation needs.
#[derive(Debug, Clone, Parser)]
#[command(name = "rgg1d", version, about = "Cluster counts of the 1-D Poisson random geometric graph")]
pub struct RunSpec {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

fn model_params(d: Document, m: &ModelArgs) -> Document {
    d.param("lambda", m.lambda)
        .param("epsilon", m.epsilon)
        .param("length", m.length)
}

fn pmf_document(command: &'static str, m: &ModelArgs, table: DistributionTable) -> Document {
    let mut d = model_params(Document::new(command, &["n", "p"]), m);
    for (n, p) in table.probs.iter().enumerate() {
        d.push(vec![n.into(), (*p).into()]);
    }
    d.warnings = table
        .warnings
        .iter()
        .map(|(n, w)| format!("n = {n}: {w}"))
        .collect();
    d
}

fn density_grid(law: &MixedLaw, upper: f64, points: usize, d: &mut Document) {
    if law.atom_mass > 0.0 {
        d.push(vec!["atom".into(), law.atom_location.into(), law.atom_mass.into()]);
    }
    let lower = law.support_lower;
    let points = points.max(2);
    for i in 0..points {
        let x = lower + (upper - lower) * i as f64 / (points - 1) as f64;
        d.push(vec!["density".into(), x.into(), law.density(x).into()]);
    }
}

fn config(sim: &SimArgs) -> CliResult<SampleConfig> {
    Ok(SampleConfig::new(sim.seed, sim.samples)?.with_parallelism(sim.threads as usize))
}

fn sim_params(d: Document, m: &ModelArgs, sim: &SimArgs) -> Document {
    model_params(d, m)
        .param("scenario", sim.scenario.to_string().as_str())
        .param("samples", sim.samples)
        .param("seed", sim.seed)
}

/// Closed-form pmf matching a discrete scenario.
pub fn analytic_table(model: &IntervalModel, scenario: Scenario) -> rgg1d::Result<DistributionTable> {
    match scenario {
        Scenario::Complete => pmf_beta0_table(model),
        Scenario::Incomplete => pmf_incomplete_table(model),
        Scenario::Circle => pmf_circle_table(model),
        Scenario::Coverage => {
            let c = coverage_prob(model)?;
            DistributionTable::from_probs(vec![1.0 - c, c])
        }
        Scenario::BLaw | Scenario::ULaw(_) => Err(rgg1d::Error::Contract(format!(
            "{scenario} is continuous and has no pmf"
        ))),
    }
}

/// Simulates `scenario` and compares it with its closed form.
pub fn compare_scenario(
    model: &IntervalModel,
    scenario: Scenario,
    config: &SampleConfig,
    z_max: f64,
) -> rgg1d::Result<ComparisonReport> {
    match estimate(&model.params, scenario, model.length(), config)? {
        Estimate::Counts(e) => compare_pmf(&e, &analytic_table(model, scenario)?, z_max),
        Estimate::Sample(s) => {
            let law = match scenario {
                Scenario::ULaw(n) => law_u(&model.params, n),
                _ => law_b(&model.params),
            };
            compare_continuous(&s, &law)
        }
    }
}

fn report_document(d: &mut Document, r: &ComparisonReport) {
    for o in &r.per_outcome {
        d.push(vec![
            o.outcome.into(),
            o.analytic.into(),
            o.empirical.into(),
            o.z.into(),
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
        ]);
    }
    d.push(vec![
        "all".into(),
        Cell::Empty,
        Cell::Empty,
        if r.per_outcome.is_empty() { Cell::Empty } else { r.max_abs_z.into() },
        r.chi_square.into(),
        r.dof.into(),
        r.ks.into(),
        r.verdict.as_str().into(),
    ]);
}

/// Computes the document for one invocation.
pub fn run(spec: &RunSpec) -> CliResult<Document> {
    Ok(match &spec.command {
        Command::Pmf(m) => pmf_document("pmf", m, pmf_beta0_table(&m.model()?)?),
        Command::Incomplete(m) => pmf_document("incomplete", m, pmf_incomplete_table(&m.model()?)?),
        Command::Circle(m) => pmf_document("circle", m, pmf_circle_table(&m.model()?)?),
        Command::Moments { model, m } => {
            let im = model.model()?;
            let mut d = model_params(Document::new("moments", &["m", "moment"]), model).param("m", *m);
            for k in 1..=*m {
                d.push(vec![k.into(), moment_beta0(&im, k)?.into()]);
            }
            d
        }
        Command::Coverage(m) => {
            let c = coverage_prob_closed(&m.model()?)?;
            let mut d = model_params(
                Document::new("coverage", &["quadrature", "closed_form", "difference", "mismatch"]),
                m,
            );
            d.push(vec![c.quadrature.into(), c.closed_form.into(), c.difference.into(), c.mismatch.into()]);
            if c.mismatch {
                d.warnings.push(format!(
                    "closed-form coverage differs from quadrature by {:e}",
                    c.difference
                ));
            }
            d
        }
        Command::Density {
            lambda,
            epsilon,
            law,
            n,
            points,
            upper,
        } => {
            let p = ModelParams::new(*lambda, *epsilon)?;
            let (mixed, default_upper) = match law {
                LawName::B => (law_b(&p), *epsilon + 8.0 * mean_b(&p)),
                LawName::U => {
                    if *n == 0 {
                        return Err(rgg1d::Error::InvalidParameter {
                            name: "n",
                            reason: "U_n needs n >= 1".into(),
                        }
                        .into());
                    }
                    let spacing = mean_b(&p) + 1.0 / lambda;
                    (law_u(&p, *n), *epsilon + 4.0 * *n as f64 * spacing)
                }
            };
            let mut d = Document::new("density", &["kind", "x", "value"])
                .param("lambda", *lambda)
                .param("epsilon", *epsilon)
                .param("law", if *law == LawName::B { "B" } else { "U" })
                .param("n", *n);
            density_grid(&mixed, upper.unwrap_or(default_upper), *points, &mut d);
            d
        }
        Command::LaplaceCheck {
            lambda,
            epsilon,
            n,
            m,
            s,
        } => {
            let p = ModelParams::new(*lambda, *epsilon)?;
            let counts: Vec<usize> = (0..=*n).collect();
            let mut d = Document::new(
                "laplace-check",
                &["quantity", "index", "s", "closed", "numeric", "residual"],
            )
            .param("lambda", *lambda)
            .param("epsilon", *epsilon);
            for r in residual_table(&p, &counts, *m, s)? {
                d.push(vec![
                    r.quantity.into(),
                    r.index.into(),
                    r.s.into(),
                    r.closed.into(),
                    r.numeric.into(),
                    r.residual.into(),
                ]);
            }
            d
        }
        Command::Simulate { model, sim } => {
            let im = model.model()?;
            match estimate(&im.params, sim.scenario, im.length(), &config(sim)?)? {
                Estimate::Counts(e) => {
                    let mut d = sim_params(
                        Document::new("simulate", &["outcome", "count", "estimate", "std_error"]),
                        model,
                        sim,
                    );
                    for (&n, &c) in &e.counts {
                        d.push(vec![n.into(), c.into(), e.estimate(n).into(), e.std_error(n).into()]);
                    }
                    d
                }
                Estimate::Sample(s) => {
                    let mut d = sim_params(Document::new("simulate", &["index", "value"]), model, sim);
                    for (i, x) in s.into_iter().enumerate() {
                        d.push(vec![i.into(), x.into()]);
                    }
                    d
                }
            }
        }
        Command::Compare { model, sim, z_max } => {
            let im = model.model()?;
            let r = compare_scenario(&im, sim.scenario, &config(sim)?, *z_max)?;
            let mut d = sim_params(
                Document::new(
                    "compare",
                    &["outcome", "analytic", "empirical", "z", "chi_square", "dof", "ks", "verdict"],
                ),
                model,
                sim,
            )
            .param("z_max", *z_max)
            .param("tolerance_policy", r.tolerance_policy.as_str());
            report_document(&mut d, &r);
            d
        }
        Command::Sweep {
            curve,
            lambda,
            epsilon,
            length,
            n,
        } => {
            let mut columns = vec!["lambda".to_owned()];
            match curve {
                Curve::Mean => columns.push("mean".into()),
                Curve::Var => columns.push("var".into()),
                Curve::Pmf => columns.extend(n.iter().map(|k| format!("p{k}"))),
            }
            let mut d = Document::new("sweep", &columns)
                .param(
                    "curve",
                    match curve {
                        Curve::Mean => "mean",
                        Curve::Var => "var",
                        Curve::Pmf => "pmf",
                    },
                )
                .param("lambda_min", lambda.min)
                .param("lambda_max", lambda.max)
                .param("lambda_step", lambda.step)
                .param("epsilon", *epsilon)
                .param("length", *length);
            for l in lambda.values() {
                let im = IntervalModel::from_parts(l, *epsilon, *length)?;
                let mut row: Vec<Cell> = vec![l.into()];
                match curve {
                    Curve::Mean => row.push(mean_beta0(&im).into()),
                    Curve::Var => row.push(var_beta0(&im).into()),
                    Curve::Pmf => row.extend(n.iter().map(|&k| Cell::from(pmf_beta0(&im, k)))),
                }
                d.push(row);
            }
            d
        }
    })
}

/// Runs and writes the document where `--out` says.
pub fn execute(spec: &RunSpec) -> CliResult<Document> {
    let doc = run(spec)?;
    let text = doc.render(spec.format);
    match &spec.out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?,
        None => print!("{text}"),
    }
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_includes_endpoint() {
        let g: Grid = "0.25:5:0.25".parse().unwrap();
        let v = g.values();
        assert_eq!(v.len(), 20);
        assert!((v[19] - 5.0).abs() < 1e-12);
        assert_eq!("0.1:0.3:0.1".parse::<Grid>().unwrap().values().len(), 3);
        assert!("1:0.5:0.1".parse::<Grid>().is_err());
        assert!("1:2".parse::<Grid>().is_err());
    }

    #[test]
    fn flags_are_validated_before_dispatch() {
        let bad = RunSpec::try_parse_from(["rgg1d", "pmf", "--lambda", "-1", "--epsilon", "1", "--length", "4"]);
        assert!(bad.is_err());
        let bad = RunSpec::try_parse_from(["rgg1d", "simulate", "--lambda", "1", "--epsilon", "1", "--length", "4", "--scenario", "torus"]);
        assert!(bad.is_err());
        let ok = RunSpec::try_parse_from(["rgg1d", "pmf", "--lambda", "1", "--epsilon", "1", "--length", "4", "--format", "json"]);
        assert_eq!(ok.unwrap().format, Format::Json);
    }
}
