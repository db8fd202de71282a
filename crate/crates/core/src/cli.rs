//! The `qsm` command line.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::boxes::{arrangement_cells, realizable_partitions, realize_from_instances, realize_query, synthesize_query};
use crate::enumerate::{all_dps, EnumOptions, DEFAULT_CAP};
use crate::error::Error;
use crate::measure::{approx_eq, ent_z_threshold, Direction, MeasureSpec, MpsRule};
use crate::relations::{
    check_compliance_with, check_equivalence, check_superiority, dpo_preferred_constructive, dpo_preferred_direct,
    min_answer_probability, ComplianceReport, DpoPairs,
};
use crate::report::{Cell, Format, Report};
use crate::scenario::{named_partition, named_set, resolve_names, AnyScenario, BoxScenarioSpec, Scenario};
use crate::sim::{
    benchmark, draw_oracle, run_session, BenchScenario, OracleSpec, SessionMode, StopRule, DEFAULT_MASS_THRESHOLD,
};
use crate::space::{Answer, Distribution, HypothesisSet, Partition, PartitionStats};
use crate::synthesis::{direct_optimum, synthesize_partition, SearchConfig, SearchTrace, DEFAULT_EPSILON};

pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "qsm", version, about = "Query selection measures: evaluation, DPO checks, synthesis and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario JSON file (repeatable for `benchmark`).
    #[arg(long, global = true)]
    pub scenario: Vec<PathBuf>,
    /// Measure spec such as `ENT`, `SPL_z=1.1` or `RIO_n=2` (repeatable).
    #[arg(long = "measure", global = true)]
    pub measures: Vec<String>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Goal tolerance on |p(V+) - p(V-)| for synthesis.
    #[arg(long, global = true, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Worker threads for parallel verbs.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Use the literal cardinality rule for MPS and MPS'.
    #[arg(long, global = true)]
    pub mps_literal: bool,
    /// Write the report here instead of standard output.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DomainArgs {
    /// Use every discriminating partition of the universe instead of the scenario's queries.
    #[arg(long)]
    pub all_dps: bool,
    /// Keep only strong partitions (empty V0).
    #[arg(long)]
    pub strong_only: bool,
    /// Universe size when no scenario is given (implies --all-dps).
    #[arg(long)]
    pub size: Option<usize>,
    /// Number of seeded random distributions; 0 uses the scenario prior.
    #[arg(long, default_value_t = 0)]
    pub random_dists: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measure values of the scenario's queries.
    Eval,
    /// Queries ordered by preference under each measure.
    Rank,
    /// DPO verdicts between queries.
    Dpo {
        #[arg(long)]
        first: Option<String>,
        #[arg(long)]
        second: Option<String>,
    },
    /// Satisfaction of and consistency with the DPO.
    Compliance(DomainArgs),
    /// Whether two measures induce the same preferences.
    Equiv(DomainArgs),
    /// Superiority of the first measure over the second.
    Superior(DomainArgs),
    /// List discriminating partitions.
    Enumerate {
        #[arg(long)]
        size: Option<usize>,
        /// Keep only strong partitions (empty V0).
        #[arg(long)]
        strong_only: bool,
        #[arg(long)]
        canonical: bool,
    },
    /// Search for an optimal strong partition (and a point query in box scenarios).
    Synthesize {
        /// Continue past the first goal to the measure-optimal partition.
        #[arg(long)]
        exhaustive: bool,
        #[arg(long)]
        max_expansions: Option<usize>,
    },
    /// Realize a partition as a point of a box scenario.
    Realize {
        /// Names of the boxes that must contain the point; the rest must not.
        #[arg(long, value_delimiter = ',')]
        plus: Vec<String>,
        /// Emit one representative point per arrangement cell.
        #[arg(long)]
        cells: bool,
    },
    /// Run one query session against a simulated oracle.
    Simulate {
        #[arg(long)]
        target: Option<String>,
        /// `singleton`, `mass` or `mass:THETA`.
        #[arg(long, default_value = "singleton")]
        stop: String,
    },
    /// Sessions over every measure and scenario.
    Benchmark {
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long, default_value = "singleton")]
        stop: String,
        /// Pool of all strong DPs instead of the scenario's queries.
        #[arg(long)]
        all_strong: bool,
        /// Also write one CSV row per run here.
        #[arg(long)]
        runs_out: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(Error::Io(_)) => EXIT_IO,
            CliError::Core(Error::NoRealizableGoal { .. }) => EXIT_INFEASIBLE,
            CliError::Core(_) => EXIT_VALIDATION,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

impl Cli {
    fn measures(&self) -> CliResult<Vec<MeasureSpec>> {
        let rule = if self.mps_literal { MpsRule::Literal } else { MpsRule::Singleton };
        self.measures.iter().map(|s| Ok(s.parse::<MeasureSpec>()?.with_mps_rule(rule))).collect()
    }

    fn some_measures(&self) -> CliResult<Vec<MeasureSpec>> {
        let ms = self.measures()?;
        if ms.is_empty() {
            return usage("at least one --measure is required");
        }
        Ok(ms)
    }

    fn one_measure(&self) -> CliResult<MeasureSpec> {
        match self.measures()?.as_slice() {
            [m] => Ok(*m),
            _ => usage("exactly one --measure is required"),
        }
    }

    fn two_measures(&self) -> CliResult<(MeasureSpec, MeasureSpec)> {
        match self.measures()?.as_slice() {
            [a, b] => Ok((*a, *b)),
            _ => usage("exactly two --measure options are required"),
        }
    }

    fn optional_scenario(&self) -> CliResult<Option<AnyScenario>> {
        match self.scenario.as_slice() {
            [] => Ok(None),
            [path] => Ok(Some(AnyScenario::load(path)?)),
            _ => usage("this verb takes a single --scenario"),
        }
    }

    fn any_scenario(&self) -> CliResult<AnyScenario> {
        self.optional_scenario()?.map_or_else(|| usage("--scenario is required"), Ok)
    }

    fn partition_scenario(&self) -> CliResult<Scenario> {
        match self.any_scenario()? {
            AnyScenario::Partitions(s) => Ok(s),
            AnyScenario::Boxes(_) => usage("this verb needs a partition scenario, not a box scenario"),
        }
    }

    fn box_scenario(&self) -> CliResult<BoxScenarioSpec> {
        match self.any_scenario()? {
            AnyScenario::Boxes(b) => Ok(b),
            AnyScenario::Partitions(_) => usage("this verb needs a box scenario"),
        }
    }

    fn report(&self, command: &str, columns: &[&str], scenario: Option<&AnyScenario>) -> Report {
        let mut r = Report::new(command, columns);
        r.scenario_digest = scenario.map(|s| s.digest().to_string());
        if !self.measures.is_empty() {
            r.param("measures", self.measures.join(" "));
        }
        let mps_family = self.measures.iter().any(|m| m.trim().to_ascii_uppercase().starts_with("MPS"));
        if self.mps_literal || mps_family {
            r.param("mps_rule", if self.mps_literal { "literal" } else { "singleton" });
        }
        r
    }
}

fn default_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("h{i}")).collect()
}

fn parse_stop(spec: &str) -> CliResult<StopRule> {
    match spec.split_once(':') {
        None if spec == "singleton" => Ok(StopRule::SingletonSupport),
        None if spec == "mass" => Ok(StopRule::MassThreshold(DEFAULT_MASS_THRESHOLD)),
        Some(("mass", theta)) => match theta.parse::<f64>() {
            Ok(t) if t > 0.0 && t <= 1.0 => Ok(StopRule::MassThreshold(t)),
            _ => usage(format!("--stop: invalid mass threshold `{theta}`")),
        },
        _ => usage(format!("--stop: expected singleton, mass or mass:THETA, got `{spec}`")),
    }
}

fn stop_label(stop: StopRule) -> String {
    match stop {
        StopRule::SingletonSupport => "singleton".into(),
        StopRule::MassThreshold(t) => format!("mass:{t}"),
    }
}

fn value_cell(m: &MeasureSpec, part: &Partition, dist: &Distribution) -> CliResult<Cell> {
    if !part.is_discriminating() {
        return Ok(Cell::Empty);
    }
    Ok(m.evaluate(part, dist)?.into())
}

fn cmd_eval(cli: &Cli) -> CliResult<Report> {
    let s = cli.partition_scenario()?;
    let ms = cli.some_measures()?;
    let labels: Vec<String> = ms.iter().map(MeasureSpec::label).collect();
    let mut columns = vec!["query", "partition", "class", "p_yes", "p_no"];
    columns.extend(labels.iter().map(String::as_str));
    let any = AnyScenario::Partitions(s.clone());
    let mut r = cli.report("eval", &columns, Some(&any));
    for (name, part) in &s.queries {
        let st = PartitionStats::new(part, &s.dist)?;
        let mut row: Vec<Cell> = vec![
            name.as_str().into(),
            named_partition(&s.names, part).into(),
            format!("{:?}", part.classify()).into(),
            st.p_yes.into(),
            st.p_no.into(),
        ];
        for m in &ms {
            row.push(value_cell(m, part, &s.dist)?);
        }
        r.push(row);
    }
    Ok(r)
}

fn cmd_rank(cli: &Cli) -> CliResult<Report> {
    let s = cli.partition_scenario()?;
    let ms = cli.some_measures()?;
    let any = AnyScenario::Partitions(s.clone());
    let mut r = cli.report("rank", &["measure", "rank", "query", "partition", "value"], Some(&any));
    let dqs: Vec<&(String, Partition)> = s.queries.iter().filter(|(_, p)| p.is_discriminating()).collect();
    for m in &ms {
        let mut scored: Vec<(usize, f64)> =
            dqs.iter().enumerate().map(|(i, (_, p))| Ok((i, m.evaluate(p, &s.dist)?))).collect::<CliResult<_>>()?;
        let key = |v: f64| if m.direction() == Direction::Minimize { v } else { -v };
        scored.sort_by(|a, b| key(a.1).total_cmp(&key(b.1)).then(a.0.cmp(&b.0)));
        let mut rank = 0;
        let mut prev: Option<f64> = None;
        for (pos, &(i, v)) in scored.iter().enumerate() {
            if prev.is_none_or(|pv| !approx_eq(pv, v)) {
                rank = pos + 1;
            }
            prev = Some(v);
            let (name, part) = dqs[i];
            r.push(vec![
                m.label().into(),
                rank.into(),
                name.as_str().into(),
                named_partition(&s.names, part).into(),
                v.into(),
            ]);
        }
    }
    r.note("skipped_non_discriminating", s.queries.len() - dqs.len());
    Ok(r)
}

/// Preferred, witness set, swapped, checkers agree, verdict text.
type DpoRow = (bool, Option<String>, Option<bool>, bool, String);

fn dpo_verdict_text(names: &[String], q: &Partition, q2: &Partition) -> CliResult<DpoRow> {
    let direct = dpo_preferred_direct(q, q2)?;
    let constructive = dpo_preferred_constructive(q, q2)?;
    let agree = direct.preferred == constructive.preferred;
    let Some(w) = constructive.witness.filter(|_| constructive.preferred) else {
        return Ok((direct.preferred, None, None, agree, "not preferred".into()));
    };
    let x = named_set(names, w.transfer);
    let mut text = format!("preferred, witness X={x}");
    if w.swapped {
        text.push_str(", swapped");
    }
    Ok((direct.preferred, Some(x), Some(w.swapped), agree, text))
}

fn cmd_dpo(cli: &Cli, first: &Option<String>, second: &Option<String>) -> CliResult<Report> {
    let s = cli.partition_scenario()?;
    let any = AnyScenario::Partitions(s.clone());
    let mut r = cli.report(
        "dpo",
        &["first", "second", "preferred", "witness", "swapped", "checkers_agree", "verdict"],
        Some(&any),
    );
    let pairs: Vec<(String, String)> = match (first, second) {
        (Some(a), Some(b)) => vec![(a.clone(), b.clone())],
        (None, None) => {
            let names: Vec<&String> = s.queries.iter().map(|(n, _)| n).collect();
            names
                .iter()
                .flat_map(|a| names.iter().filter(move |b| a != *b).map(move |b| ((*a).clone(), (*b).clone())))
                .collect()
        }
        _ => return usage("--first and --second go together"),
    };
    for (a, b) in &pairs {
        let (preferred, x, swapped, agree, text) = dpo_verdict_text(&s.names, &s.query(a)?, &s.query(b)?)?;
        r.push(vec![
            a.as_str().into(),
            b.as_str().into(),
            preferred.into(),
            x.into(),
            swapped.into(),
            agree.into(),
            text.into(),
        ]);
    }
    if let [(_, _)] = pairs.as_slice() {
        let verdict = r.rows[0][6].clone();
        r.note("verdict", verdict);
    }
    Ok(r)
}

/// Partitions and distributions a relation check runs over.
struct Domain {
    names: Vec<String>,
    parts: Vec<Partition>,
    dists: Vec<Distribution>,
    scenario: Option<AnyScenario>,
    description: String,
}

fn domain(cli: &Cli, args: &DomainArgs) -> CliResult<Domain> {
    let scenario = cli.optional_scenario()?;
    let (names, universe) = match (&scenario, args.size) {
        (Some(s), None) => (s.names().to_vec(), s.dist().support()),
        (None, Some(n)) => (default_names(n), HypothesisSet::first(n)?),
        (Some(_), Some(_)) => return usage("--size and --scenario are exclusive"),
        (None, None) => return usage("give --scenario or --size"),
    };
    let use_all = args.all_dps || args.size.is_some();
    let parts: Vec<Partition> = if use_all {
        let opts = EnumOptions { strong_only: args.strong_only, canonical_dedup: false, cap: DEFAULT_CAP };
        all_dps(universe, opts)?.collect()
    } else {
        match &scenario {
            Some(AnyScenario::Partitions(s)) => s
                .partitions()
                .into_iter()
                .filter(|p| p.is_discriminating() && (!args.strong_only || p.is_strong()))
                .collect(),
            _ => return usage("box scenarios need --all-dps"),
        }
    };
    let dists = if args.random_dists > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
        (0..args.random_dists)
            .map(|_| {
                let d = Distribution::random(universe.len(), 0.01, &mut rng)?;
                Ok(d)
            })
            .collect::<CliResult<Vec<_>>>()?
    } else {
        match &scenario {
            Some(s) => vec![s.dist().clone()],
            None => return usage("--size needs --random-dists N"),
        }
    };
    let description = format!(
        "{}{}, {} distribution(s){}",
        if use_all { "all DPs" } else { "scenario queries" },
        if args.strong_only { " (strong only)" } else { "" },
        dists.len(),
        if args.random_dists > 0 { " seeded" } else { " (scenario prior)" }
    );
    Ok(Domain { names, parts, dists, scenario, description })
}

fn cmd_compliance(cli: &Cli, args: &DomainArgs) -> CliResult<Report> {
    let ms = cli.some_measures()?;
    let d = domain(cli, args)?;
    let mut r = cli.report(
        "compliance",
        &["measure", "mode", "pairs_checked", "unsatisfied", "inverted", "example_preferred", "example_dispreferred"],
        d.scenario.as_ref(),
    );
    r.param("domain", &d.description);
    r.param("seed", cli.seed);
    let dpo = DpoPairs::new(&d.parts)?;
    for m in &ms {
        let mut total: Option<ComplianceReport> = None;
        for dist in &d.dists {
            let rep = check_compliance_with(m, &d.parts, &dpo, dist)?;
            match &mut total {
                Some(t) => t.merge(rep),
                None => total = Some(rep),
            }
        }
        let t = total.expect("at least one distribution");
        let example = t.violations.first();
        r.push(vec![
            t.measure.as_str().into(),
            format!("{:?}", t.mode).into(),
            t.pairs_checked.into(),
            t.unsatisfied.into(),
            t.inverted.into(),
            example.map(|v| named_partition(&d.names, &v.preferred)).into(),
            example.map(|v| named_partition(&d.names, &v.dispreferred)).into(),
        ]);
    }
    r.note("dpo_pairs", dpo.len());
    let t_min = d.dists.iter().map(|dist| min_answer_probability(&d.parts, dist)).collect::<Result<Vec<_>, _>>()?;
    if let Some(t) = t_min.into_iter().reduce(f64::min) {
        r.note("min_answer_probability", t);
        if t > 0.0 && t < 0.5 {
            r.note("ent_z_threshold", ent_z_threshold(0.99 * t)?);
        }
    }
    Ok(r)
}

fn cmd_equiv(cli: &Cli, args: &DomainArgs) -> CliResult<Report> {
    let (m1, m2) = cli.two_measures()?;
    let d = domain(cli, args)?;
    let mut r = cli.report(
        "equiv",
        &["first", "second", "equivalent", "pairs_checked", "witness_first", "witness_second"],
        d.scenario.as_ref(),
    );
    r.param("domain", &d.description);
    r.param("seed", cli.seed);
    let mut pairs = 0;
    let mut witness = None;
    for dist in &d.dists {
        let rep = check_equivalence(&m1, &m2, &d.parts, dist)?;
        pairs += rep.pairs_checked;
        if let Some(w) = rep.witness {
            witness = Some(w);
            break;
        }
    }
    r.push(vec![
        m1.label().into(),
        m2.label().into(),
        witness.is_none().into(),
        pairs.into(),
        witness.map(|(a, _)| named_partition(&d.names, &a)).into(),
        witness.map(|(_, b)| named_partition(&d.names, &b)).into(),
    ]);
    Ok(r)
}

fn cmd_superior(cli: &Cli, args: &DomainArgs) -> CliResult<Report> {
    let (m1, m2) = cli.two_measures()?;
    let d = domain(cli, args)?;
    let mut r = cli.report(
        "superior",
        &["first", "second", "verdict", "first_only", "second_only", "pairs_checked"],
        d.scenario.as_ref(),
    );
    r.param("domain", &d.description);
    r.param("seed", cli.seed);
    let v = check_superiority(&m1, &m2, &d.parts, &d.dists)?;
    r.push(vec![
        m1.label().into(),
        m2.label().into(),
        format!("{:?}", v.value).into(),
        v.first_only.into(),
        v.second_only.into(),
        v.pairs_checked.into(),
    ]);
    Ok(r)
}

fn cmd_enumerate(cli: &Cli, size: Option<usize>, strong_only: bool, canonical: bool) -> CliResult<Report> {
    let scenario = cli.optional_scenario()?;
    let ms = cli.measures()?;
    let (names, universe, dist) = match (&scenario, size) {
        (Some(s), None) => (s.names().to_vec(), s.dist().support(), Some(s.dist().clone())),
        (None, Some(n)) => (default_names(n), HypothesisSet::first(n)?, None),
        (Some(_), Some(_)) => return usage("--size and --scenario are exclusive"),
        (None, None) => return usage("give --scenario or --size"),
    };
    if !ms.is_empty() && dist.is_none() {
        return usage("measure values need a --scenario");
    }
    let labels: Vec<String> = ms.iter().map(MeasureSpec::label).collect();
    let mut columns = vec!["index", "partition", "class"];
    columns.extend(labels.iter().map(String::as_str));
    let mut r = cli.report("enumerate", &columns, scenario.as_ref());
    r.param("strong_only", strong_only);
    r.param("canonical", canonical);
    let opts = EnumOptions { strong_only, canonical_dedup: canonical, cap: DEFAULT_CAP };
    for (i, part) in all_dps(universe, opts)?.enumerate() {
        let mut row: Vec<Cell> =
            vec![i.into(), named_partition(&names, &part).into(), format!("{:?}", part.classify()).into()];
        for m in &ms {
            row.push(value_cell(m, &part, dist.as_ref().expect("checked above"))?);
        }
        r.push(row);
    }
    r.note("count", r.rows.len());
    Ok(r)
}

fn trace_rows(r: &mut Report, names: &[String], trace: &SearchTrace) {
    for (i, node) in trace.expanded.iter().enumerate() {
        r.push(vec![
            i.into(),
            node.depth.into(),
            node.parent.into(),
            node.moved.map(|h| names[h.0].clone()).into(),
            named_partition(names, &node.part).into(),
            node.g.into(),
            node.value.into(),
            node.goal.into(),
        ]);
    }
    r.note("expansions", trace.expanded.len());
    r.note("backtracks", trace.backtracks);
    r.note("pruned", trace.pruned);
    r.note("budget_exhausted", trace.budget_exhausted);
}

fn cmd_synthesize(cli: &Cli, exhaustive: bool, max_expansions: Option<usize>) -> CliResult<Report> {
    let scenario = cli.any_scenario()?;
    let m = cli.one_measure()?;
    let mut config = SearchConfig::new(m).epsilon(cli.epsilon).exhaustive(exhaustive);
    config.max_expansions = max_expansions;
    let mut r = cli.report(
        "synthesize",
        &["step", "depth", "parent", "moved", "partition", "g", "value", "goal"],
        Some(&scenario),
    );
    r.param("epsilon", cli.epsilon);
    r.param("exhaustive", exhaustive);
    r.param("class", format!("{:?}", config.ec));
    if let Some(b) = max_expansions {
        r.param("max_expansions", b);
    }
    let names = scenario.names().to_vec();
    match &scenario {
        AnyScenario::Boxes(spec) => {
            let q = synthesize_query(&config, &spec.scenario)?;
            trace_rows(&mut r, &names, &q.trace);
            r.note("goal", named_partition(&names, &q.partition));
            r.note("point_x", q.point.x);
            r.note("point_y", q.point.y);
            r.note("rejected_goals", q.rejected.len());
        }
        AnyScenario::Partitions(s) => {
            let trace = synthesize_partition(&config, &s.dist)?;
            trace_rows(&mut r, &names, &trace);
            r.note("goal", trace.goal.map(|g| named_partition(&names, &g)));
            if let Some((best, v)) = trace.best_found {
                r.note("best_found", named_partition(&names, &best));
                r.note("best_value", v);
            }
        }
    }
    if config.ec.has_direct_construction() {
        let d = direct_optimum(&m, scenario.dist())?;
        r.note("direct_optimum", named_partition(&names, &d.partition));
        r.note("direct_value", d.value);
        r.note("direct_infeasible", d.infeasible);
    }
    Ok(r)
}

fn cmd_realize(cli: &Cli, plus: &[String], cells: bool) -> CliResult<Report> {
    let spec = cli.box_scenario()?;
    let names = spec.names.clone();
    let any = AnyScenario::Boxes(spec.clone());
    let s = &spec.scenario;
    if cells {
        let mut r = cli.report("realize", &["x", "y", "partition", "discriminating"], Some(&any));
        for (p, part) in arrangement_cells(s) {
            r.push(vec![
                p.x.into(),
                p.y.into(),
                named_partition(&names, &part).into(),
                part.is_discriminating().into(),
            ]);
        }
        return Ok(r);
    }
    let mut r = cli.report("realize", &["partition", "realizable", "x", "y"], Some(&any));
    if plus.is_empty() {
        for (part, p) in realizable_partitions(s) {
            r.push(vec![named_partition(&names, &part).into(), true.into(), p.x.into(), p.y.into()]);
        }
        return Ok(r);
    }
    let goal = Partition::split(s.universe(), resolve_names(&names, plus, "--plus")?)?;
    let point = match s.instances() {
        Some(pool) => realize_from_instances(&goal, s, pool)?,
        None => realize_query(&goal, s)?,
    };
    r.push(vec![
        named_partition(&names, &goal).into(),
        point.is_some().into(),
        point.map(|p| p.x).into(),
        point.map(|p| p.y).into(),
    ]);
    Ok(r)
}

fn oracle_for(cli: &Cli, names: &[String], dist: &Distribution, target: &Option<String>) -> CliResult<OracleSpec> {
    match target {
        Some(t) => {
            let set = resolve_names(names, std::slice::from_ref(t), "--target")?;
            let h = set.min().expect("one name resolves to one hypothesis");
            Ok(OracleSpec { target: h, completion_seed: cli.seed })
        }
        None => Ok(draw_oracle(dist, cli.seed)),
    }
}

fn cmd_simulate(cli: &Cli, target: &Option<String>, stop: &str) -> CliResult<Report> {
    let scenario = cli.any_scenario()?;
    let m = cli.one_measure()?;
    let stop = parse_stop(stop)?;
    let names = scenario.names().to_vec();
    let dist = scenario.dist().clone();
    let mode = match &scenario {
        AnyScenario::Partitions(s) => {
            SessionMode::Pool(s.partitions().into_iter().filter(Partition::is_discriminating).collect())
        }
        AnyScenario::Boxes(b) => {
            SessionMode::Synthesis { scenario: b.scenario.clone(), epsilon: cli.epsilon, exhaustive: false }
        }
    };
    let oracle = oracle_for(cli, &names, &dist, target)?;
    let mut r = cli.report("simulate", &["step", "partition", "answer", "value", "x", "y"], Some(&scenario));
    r.param("seed", cli.seed);
    r.param("stop", stop_label(stop));
    r.param("epsilon", cli.epsilon);
    let run = run_session(&dist, &m, &mode, oracle, stop)?;
    for (i, step) in run.history.iter().enumerate() {
        r.push(vec![
            (i + 1).into(),
            named_partition(&names, &step.partition).into(),
            (if step.answer == Answer::Yes { 1 } else { 0 }).to_string().into(),
            step.value.into(),
            step.point.map(|p| p.x).into(),
            step.point.map(|p| p.y).into(),
        ]);
    }
    r.note("target", names[oracle.target.0].as_str());
    r.note("queries", run.queries_asked);
    r.note("identified", run.identified);
    r.note("survivors", named_set(&names, run.final_dist.support()));
    let top = run.final_dist.argmax();
    r.note("top_hypothesis", names[top.0].as_str());
    r.note("top_mass", run.final_dist.p(top));
    Ok(r)
}

fn cmd_benchmark(
    cli: &Cli,
    reps: usize,
    stop: &str,
    all_strong: bool,
    runs_out: &Option<PathBuf>,
) -> CliResult<Report> {
    let ms = cli.some_measures()?;
    let stop = parse_stop(stop)?;
    if cli.scenario.is_empty() {
        return usage("benchmark needs at least one --scenario");
    }
    let mut scenarios = Vec::new();
    let mut digests = Vec::new();
    for path in &cli.scenario {
        let any = AnyScenario::load(path)?;
        digests.push(any.digest().to_string());
        let name = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        let mode = match &any {
            AnyScenario::Partitions(s) if all_strong => {
                SessionMode::Pool(all_dps(s.dist.support(), EnumOptions::strong())?.collect())
            }
            AnyScenario::Partitions(s) => {
                SessionMode::Pool(s.partitions().into_iter().filter(Partition::is_discriminating).collect())
            }
            AnyScenario::Boxes(b) => {
                SessionMode::Synthesis { scenario: b.scenario.clone(), epsilon: cli.epsilon, exhaustive: false }
            }
        };
        scenarios.push(BenchScenario { name, dist: any.dist().clone(), mode });
    }
    let mut r = cli.report(
        "benchmark",
        &["measure", "scenario", "runs", "mean_queries", "median_queries", "max_queries", "identification_rate"],
        None,
    );
    r.scenario_digest = Some(digests.join(","));
    r.param("seed", cli.seed);
    r.param("reps", reps);
    r.param("stop", stop_label(stop));
    r.param("pool", if all_strong { "all strong DPs" } else { "scenario queries" });
    let report = benchmark(&ms, &scenarios, reps, cli.seed, stop)?;
    for row in &report.rows {
        r.push(vec![
            row.measure.as_str().into(),
            row.scenario.as_str().into(),
            row.runs.into(),
            row.mean_queries.into(),
            row.median_queries.into(),
            row.max_queries.into(),
            row.identification_rate.into(),
        ]);
    }
    if let Some(path) = runs_out {
        let mut detail =
            Report::new("benchmark-runs", &["measure", "scenario", "repetition", "target", "queries", "identified"]);
        for run in &report.runs {
            detail.push(vec![
                run.measure.as_str().into(),
                run.scenario.as_str().into(),
                run.repetition.into(),
                run.target.to_string().into(),
                run.queries.into(),
                run.identified.into(),
            ]);
        }
        write_file(path, &detail.render(Format::Csv)?)?;
    }
    Ok(r)
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::Core(Error::Io(format!("{}: {e}", path.display()))))
}

/// Executes a parsed command and returns the rendered report.
pub fn run(cli: &Cli) -> CliResult<String> {
    if cli.epsilon.is_nan() || cli.epsilon <= 0.0 {
        return usage(format!("--epsilon must be positive, got {}", cli.epsilon));
    }
    let report = match &cli.command {
        Command::Eval => cmd_eval(cli)?,
        Command::Rank => cmd_rank(cli)?,
        Command::Dpo { first, second } => cmd_dpo(cli, first, second)?,
        Command::Compliance(args) => cmd_compliance(cli, args)?,
        Command::Equiv(args) => cmd_equiv(cli, args)?,
        Command::Superior(args) => cmd_superior(cli, args)?,
        Command::Enumerate { size, strong_only, canonical } => cmd_enumerate(cli, *size, *strong_only, *canonical)?,
        Command::Synthesize { exhaustive, max_expansions } => cmd_synthesize(cli, *exhaustive, *max_expansions)?,
        Command::Realize { plus, cells } => cmd_realize(cli, plus, *cells)?,
        Command::Simulate { target, stop } => cmd_simulate(cli, target, stop)?,
        Command::Benchmark { reps, stop, all_strong, runs_out } => {
            cmd_benchmark(cli, *reps, stop, *all_strong, runs_out)?
        }
    };
    Ok(report.render(cli.format)?)
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: usage: --jobs must be at least 1");
            return EXIT_USAGE;
        }
        // A pool built earlier in the process stays in place.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let result = run(&cli).and_then(|text| match &cli.output {
        Some(path) => write_file(path, &text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| CliError::Core(Error::Io(e.to_string())))
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
