use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crowdagg::aggregators::{self, CaseStats, MethodId};
use crowdagg::evaluation::{
    self, ablation_table, amp_grid, coverage_analysis, dap_grid, loo_evaluate, mcnemar_from_counts,
    nested_model_selection, proportion_test, render_ablation, render_grid, sig6,
    standard_ablation_rows, uniform_success, with_workers, EvalError, Exclusion, McNemarVariant,
    PreparedCorpus, Technique,
};
use crowdagg::io::{self, Artifact, IoError, RunConfig};
use crowdagg::pipelines::{Approach, MethodSet};
use crowdagg::synth::{self, SynthError};
use crowdagg::DecisionCase;

#[derive(Parser)]
#[command(
    name = "crowdagg",
    version,
    about = "One-shot aggregation of collective decisions"
)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; overrides the config and CROWDAGG_WORKERS.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Write the structured (JSON) report here.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset file (JSON lines with a schema header).
    data: PathBuf,
    /// Keep cases that everyone or no one answered correctly.
    #[arg(long)]
    keep_degenerate: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a dataset and report degenerate cases.
    Validate(DataArgs),
    /// Export the feature matrix as CSV.
    Featurize {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        approach: Option<Approach>,
        /// Withheld inputs, e.g. `confidence,ps`.
        #[arg(long, default_value = "")]
        exclude: String,
        /// CSV output path.
        #[arg(long)]
        matrix: PathBuf,
    },
    /// Apply rule-based methods to every case.
    Aggregate {
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated methods; MR is always included.
        #[arg(long, default_value = "mr,hac,wc,sp,da")]
        methods: String,
    },
    /// Nested cross-validation over a candidate grid.
    ModelSelect {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        approach: Option<Approach>,
        /// Comma-separated candidates (e.g. `BR+RF,LP+KNN`); defaults to the full grid.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Leave-one-out evaluation of one technique.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        approach: Option<Approach>,
        #[arg(long)]
        technique: Option<String>,
    },
    /// Leave-one-out evaluation with parts of the input withheld.
    Ablate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        approach: Option<Approach>,
        #[arg(long)]
        technique: Option<String>,
        /// Withheld inputs: confidence, ps, wc_hac, sp, da.
        #[arg(long, default_value = "")]
        exclude: String,
        /// Run the eleven standard rows instead of a single one.
        #[arg(long, conflicts_with = "exclude")]
        standard: bool,
    },
    /// Which cases each method solves and how the sets overlap.
    Coverage(DataArgs),
    /// Significance tests from counts.
    Stats {
        #[command(subcommand)]
        test: StatsCommand,
    },
    /// Generate a synthetic dataset.
    Synth {
        /// `default` or a JSON file listing {"spec": ..., "count": ...} entries.
        #[arg(long, default_value = "default")]
        mixture: String,
        /// Total cases when scaling the default mixture.
        #[arg(long)]
        n: Option<usize>,
        /// Dataset output path; standard output when omitted.
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum StatsCommand {
    /// McNemar test from the discordant counts b and c.
    Mcnemar {
        b: usize,
        c: usize,
        /// Exact binomial p-value instead of chi-squared.
        #[arg(long)]
        exact: bool,
    },
    /// Pooled two-proportion z-test.
    Proportion {
        s1: usize,
        n1: usize,
        s2: usize,
        n2: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            emit_error("UsageError", &e.to_string(), None);
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, case_id) = classify(&e);
            emit_error(&kind, &format!("{e:#}"), case_id.as_deref());
            ExitCode::FAILURE
        }
    }
}

/// Writes a one-line JSON error record to standard error.
fn emit_error(kind: &str, message: &str, case_id: Option<&str>) {
    let mut record = serde_json::json!({ "kind": kind, "message": message.trim_end() });
    if let Some(id) = case_id {
        record["case_id"] = id.into();
    }
    eprintln!("{}", serde_json::json!({ "error": record }));
}

fn variant_name(debug: String) -> String {
    debug
        .split(|c: char| !c.is_alphanumeric() && c != '_')
        .next()
        .unwrap_or_default()
        .to_string()
}

fn classify(e: &anyhow::Error) -> (String, Option<String>) {
    if let Some(io) = e.downcast_ref::<IoError>() {
        let kind = match io {
            IoError::Parse { .. } => "ParseError".to_string(),
            other => variant_name(format!("{other:?}")),
        };
        return (kind, io.case_id().map(String::from));
    }
    if let Some(ev) = e.downcast_ref::<EvalError>() {
        let case_id = match ev {
            EvalError::Case { case_id, .. }
            | EvalError::MissingGroundTruth(case_id)
            | EvalError::MixedAnswerCounts { case_id, .. } => Some(case_id.clone()),
            _ => None,
        };
        return (variant_name(format!("{ev:?}")), case_id);
    }
    if let Some(se) = e.downcast_ref::<SynthError>() {
        return (variant_name(format!("{se:?}")), None);
    }
    ("Error".to_string(), None)
}

struct Ctx {
    config: RunConfig,
    out: Option<PathBuf>,
}

impl Ctx {
    fn load(&self, data: &DataArgs) -> Result<Vec<DecisionCase>> {
        let exclude = self.config.exclude_degenerate && !data.keep_degenerate;
        let loaded = io::load_and_filter(&data.data, exclude)?;
        for x in &loaded.excluded {
            eprintln!(
                "excluded {} (correct share {})",
                x.case_id,
                sig6(x.correct_share)
            );
        }
        Ok(loaded.cases)
    }

    fn prepare(&self, data: &DataArgs) -> Result<PreparedCorpus> {
        let cases = self.load(data)?;
        Ok(PreparedCorpus::prepare(&cases, &self.config.features)?)
    }

    fn approach(&self, flag: Option<Approach>) -> Approach {
        flag.unwrap_or(self.config.approach)
    }

    fn technique(&self, approach: Approach, flag: &Option<String>) -> Result<Technique> {
        match flag {
            Some(name) => Technique::parse(approach, name).map_err(|e| IoError::Config(e).into()),
            None => Ok(self.config.technique(approach)?),
        }
    }

    fn emit<T: Serialize>(&self, kind: &str, body: &T, table: &str) -> Result<()> {
        print!("{table}");
        if let Some(path) = &self.out {
            Artifact::new(kind, &self.config, body).write(path)?;
        }
        Ok(())
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(w) = cli.workers {
        config.workers = Some(w);
    }
    let workers = config.effective_workers();
    let ctx = Ctx {
        config,
        out: cli.out,
    };
    with_workers(workers, || dispatch(&ctx, cli.command))
}

fn parse_methods(s: &str) -> Result<MethodSet> {
    let mut methods = vec![MethodId::Mr];
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        methods.push(part.parse().map_err(|e: String| IoError::Config(e))?);
    }
    Ok(MethodSet::new(&methods)?)
}

fn exclusions_config(ctx: &Ctx, exclude: &str) -> Result<evaluation::EvalConfig> {
    let list = Exclusion::parse_list(exclude)?;
    Ok(evaluation::apply_exclusions(
        &ctx.config.eval_config(),
        &list,
    )?)
}

fn dispatch(ctx: &Ctx, command: Command) -> Result<()> {
    let seed = ctx.config.seed;
    match command {
        Command::Validate(data) => {
            let exclude = ctx.config.exclude_degenerate && !data.keep_degenerate;
            let loaded = io::load_and_filter(&data.data, exclude)?;
            #[derive(Serialize)]
            struct Summary<'a> {
                cases: usize,
                excluded: &'a [io::ExcludedCase],
            }
            let mut table = format!(
                "valid cases: {}\nexcluded: {}\n",
                loaded.cases.len(),
                loaded.excluded.len()
            );
            for x in &loaded.excluded {
                table.push_str(&format!(
                    "  {}  correct share {}\n",
                    x.case_id,
                    sig6(x.correct_share)
                ));
            }
            ctx.emit(
                "validation",
                &Summary {
                    cases: loaded.cases.len(),
                    excluded: &loaded.excluded,
                },
                &table,
            )
        }
        Command::Featurize {
            data,
            approach,
            exclude,
            matrix,
        } => {
            let corpus = ctx.prepare(&data)?;
            let config = exclusions_config(ctx, &exclude)?;
            io::export_feature_matrix(&matrix, &corpus, ctx.approach(approach), &config)?;
            println!("wrote {} rows to {}", corpus.len(), matrix.display());
            Ok(())
        }
        Command::Aggregate { data, methods } => {
            let cases = ctx.load(&data)?;
            let set = parse_methods(&methods)?;
            aggregate(ctx, &cases, &set)
        }
        Command::ModelSelect {
            data,
            approach,
            grid,
        } => {
            let corpus = ctx.prepare(&data)?;
            let approach = ctx.approach(approach);
            let grid = match grid {
                Some(list) => list
                    .split(',')
                    .map(|t| Technique::parse(approach, t.trim()).map_err(IoError::Config))
                    .collect::<Result<Vec<_>, _>>()?,
                None => match approach {
                    Approach::Amp => amp_grid(),
                    Approach::Dap => dap_grid(),
                },
            };
            let report =
                nested_model_selection(&corpus, approach, &grid, &ctx.config.eval_config(), seed)?;
            ctx.emit("model_selection", &report, &render_grid(&report))
        }
        Command::Evaluate {
            data,
            approach,
            technique,
        } => {
            let corpus = ctx.prepare(&data)?;
            let technique = ctx.technique(ctx.approach(approach), &technique)?;
            let report = loo_evaluate(&corpus, technique, &ctx.config.eval_config(), seed)?;
            ctx.emit("evaluation", &report, &report.render())
        }
        Command::Ablate {
            data,
            approach,
            technique,
            exclude,
            standard,
        } => {
            let corpus = ctx.prepare(&data)?;
            let technique = ctx.technique(ctx.approach(approach), &technique)?;
            let rows = if standard {
                standard_ablation_rows()
            } else {
                vec![Exclusion::parse_list(&exclude)?]
            };
            let table = ablation_table(&corpus, technique, &ctx.config.eval_config(), &rows, seed)?;
            ctx.emit("ablation", &table, &render_ablation(&table))
        }
        Command::Coverage(data) => {
            let corpus = ctx.prepare(&data)?;
            let report = coverage_analysis(&corpus);
            let mut table = String::new();
            for m in &report.per_method {
                table.push_str(&format!("{:<5}{:>8}\n", m.method.name(), m.solved));
            }
            for r in report.regions.iter().filter(|r| r.count > 0) {
                let name = if r.methods.is_empty() {
                    "(none)".to_string()
                } else {
                    r.methods
                        .iter()
                        .map(|m| m.name())
                        .collect::<Vec<_>>()
                        .join("+")
                };
                table.push_str(&format!("  exactly {name:<20}{:>8}\n", r.count));
            }
            table.push_str(&format!(
                "union with DA {} ({}), without DA {} ({})\n",
                report.union_with_da,
                sig6(report.rate_with_da),
                report.union_without_da,
                sig6(report.rate_without_da)
            ));
            ctx.emit("coverage", &report, &table)
        }
        Command::Stats { test } => match test {
            StatsCommand::Mcnemar { b, c, exact } => {
                let variant = if exact {
                    McNemarVariant::ExactBinomial
                } else {
                    ctx.config.evaluation.mcnemar
                };
                let r = mcnemar_from_counts(b, c, variant);
                let table = format!("statistic {}  p {}\n", sig6(r.statistic), sig6(r.p_value));
                ctx.emit("mcnemar", &r, &table)
            }
            StatsCommand::Proportion { s1, n1, s2, n2 } => {
                let r = proportion_test(s1, n1, s2, n2)?;
                let table = format!("z {}  p {}\n", sig6(r.z), sig6(r.p_value));
                ctx.emit("proportion", &r, &table)
            }
        },
        Command::Synth { mixture, n, output } => {
            let mix = match mixture.as_str() {
                "default" => synth::scaled_mixture(n.unwrap_or(500)),
                path => {
                    if n.is_some() {
                        bail!("--n only applies to the default mixture");
                    }
                    read_mixture(Path::new(path))?
                }
            };
            let corpus = synth::generate_corpus(&mix, seed)?;
            match output {
                Some(path) => {
                    io::write_dataset(&path, &corpus.cases)?;
                    eprintln!("wrote {} cases to {}", corpus.cases.len(), path.display());
                }
                None => {
                    let stdout = std::io::stdout();
                    io::write_dataset_to(stdout.lock(), &corpus.cases)?;
                }
            }
            Ok(())
        }
    }
}

fn read_mixture(path: &Path) -> Result<synth::Mixture> {
    #[derive(serde::Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Entry {
        spec: synth::RegimeSpec,
        count: usize,
    }
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let entries: Vec<Entry> = serde_json::from_str(&text).map_err(|e| IoError::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    Ok(entries.into_iter().map(|e| (e.spec, e.count)).collect())
}

fn aggregate(ctx: &Ctx, cases: &[DecisionCase], set: &MethodSet) -> Result<()> {
    #[derive(Serialize)]
    struct CaseChoices {
        case_id: String,
        chosen: Vec<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        outcomes: Option<Vec<bool>>,
    }
    #[derive(Serialize)]
    struct Report {
        methods: Vec<MethodId>,
        cases: Vec<CaseChoices>,
        /// Present when every case has a known answer.
        #[serde(skip_serializing_if = "Option::is_none")]
        uniform: Option<Vec<evaluation::MethodRate>>,
    }
    let mut rows = Vec::with_capacity(cases.len());
    for case in cases {
        let stats = CaseStats::of(case);
        let results = aggregators::aggregate_all(case, &stats, set.methods());
        rows.push(CaseChoices {
            case_id: case.case_id.clone(),
            chosen: results
                .iter()
                .map(|r| case.answers[r.chosen].clone())
                .collect(),
            outcomes: case
                .correct
                .map(|c| results.iter().map(|r| r.chosen == c).collect()),
        });
    }
    let uniform = if !cases.is_empty() && cases.iter().all(|c| c.correct.is_some()) {
        let corpus = PreparedCorpus::prepare(cases, &ctx.config.features)?;
        Some(uniform_success(&corpus, set))
    } else {
        None
    };
    let mut table = format!("{:<16}", "case");
    for m in set.methods() {
        table.push_str(&format!(" {:>9}", m.name()));
    }
    table.push('\n');
    for r in &rows {
        table.push_str(&format!("{:<16}", r.case_id));
        for a in &r.chosen {
            table.push_str(&format!(" {a:>9}"));
        }
        table.push('\n');
    }
    if let Some(u) = &uniform {
        table.push_str(&format!("{:<16}", "success"));
        for m in u {
            table.push_str(&format!(" {:>9}", sig6(m.rate)));
        }
        table.push('\n');
    }
    let report = Report {
        methods: set.methods().to_vec(),
        cases: rows,
        uniform,
    };
    ctx.emit("aggregation", &report, &table)?;
    std::io::stdout().flush()?;
    Ok(())
}
