use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use aqlmr::aql::{analyze, explain, parse};
use aqlmr::array_store::{
    data_path, generate_array, metadata_path, write_schema, ArraySchema, Dimension, ElementType,
    Fill,
};
use aqlmr::engine::run_job;
use aqlmr::planner::{emit_param_config, plan, ModeRequest, ParamConfig, PlanOutcome};
use aqlmr::{AggregatorRegistry, Catalog, StoreError};

use crate::args::{
    BenchArgs, Command, ExplainArgs, GenDataArgs, ModeArg, QuerySource, RunArgs, TranslateArgs,
    TypeArg,
};
use crate::report::{max_relative_difference, BenchTiming, CompareReport, RunReport};
use crate::CliError;

/// Largest naive-vs-optimized relative difference `bench` accepts.
pub const BENCH_TOLERANCE: f64 = 1e-9;

pub fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::GenData(a) => gen_data(&a, out),
        Command::Translate(a) => translate(&a, out, err),
        Command::Run(a) => run(&a, out, err),
        Command::Bench(a) => bench_command(&a, out),
        Command::Explain(a) => explain_command(&a, out, err),
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("cannot write {}: {e}", path.display()))
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Runtime(format!("cannot write output: {e}")))
}

fn parse_shape<T: std::str::FromStr>(flag: &str, text: &str) -> Result<Vec<T>, CliError> {
    text.split('x')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("--{flag}: cannot parse {p:?} in {text:?}")))
        })
        .collect()
}

pub fn parse_fill(text: &str, seed: u64) -> Result<Fill, CliError> {
    match text {
        "ramp" => Ok(Fill::Ramp),
        "uniform" => Ok(Fill::Uniform { seed }),
        _ => text
            .strip_prefix("constant:")
            .and_then(|v| v.parse::<f64>().ok())
            .filter(|v| v.is_finite())
            .map(Fill::Constant)
            .ok_or_else(|| {
                CliError::Usage(format!(
                    "--fill: expected constant:<value>, ramp, or uniform, got {text:?}"
                ))
            }),
    }
}

/// Builds the schema described by the `gen-data` flags.
pub fn gen_schema(a: &GenDataArgs) -> Result<ArraySchema, CliError> {
    let extents: Vec<u64> = parse_shape("dims", &a.dims)?;
    let rank = extents.len();
    let chunks: Vec<u64> = match &a.chunk {
        Some(c) => parse_shape("chunk", c)?,
        None => extents.iter().map(|&e| e.clamp(1, 128)).collect(),
    };
    let origin: Vec<i64> = match &a.origin {
        Some(o) => parse_shape("origin", o)?,
        None => vec![0; rank],
    };
    let names: Vec<String> = match &a.dim_names {
        Some(n) => n.split(',').map(|s| s.trim().to_string()).collect(),
        None => (0..rank)
            .map(|i| match i {
                0 => "x".to_string(),
                1 => "y".to_string(),
                2 => "z".to_string(),
                3 => "w".to_string(),
                _ => format!("d{i}"),
            })
            .collect(),
    };
    if chunks.len() != rank || origin.len() != rank || names.len() != rank {
        return Err(CliError::Usage(format!(
            "--dims has {rank} dimensions but --chunk, --origin, or --dim-names does not"
        )));
    }
    if let Some(i) = extents.iter().position(|&e| e == 0) {
        return Err(CliError::Usage(format!(
            "--dims: extent of dimension {i} is 0"
        )));
    }
    if let Some(i) = chunks.iter().position(|&c| c == 0) {
        return Err(CliError::Usage(format!(
            "--chunk: chunk of dimension {i} is 0"
        )));
    }
    let dims = (0..rank)
        .map(|i| {
            Dimension::new(
                names[i].clone(),
                origin[i],
                origin[i] + extents[i] as i64 - 1,
                chunks[i],
            )
        })
        .collect();
    let element_type = match a.element_type {
        TypeArg::Float64 => ElementType::Float64,
        TypeArg::Int64 => ElementType::Int64,
    };
    ArraySchema::new(a.name.clone(), element_type, a.attribute.clone(), dims).map_err(|e| match e {
        StoreError::InvalidSchema(m) => CliError::Usage(m),
        other => other.into(),
    })
}

fn gen_data(a: &GenDataArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let schema = gen_schema(a)?;
    let fill = parse_fill(&a.fill, a.seed)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| io_error(&a.out_dir, e))?;
    let bin = data_path(&a.out_dir, &schema.name);
    let meta = metadata_path(&a.out_dir, &schema.name);
    generate_array(&schema, fill, &bin)?;
    write_schema(&schema, &meta)?;
    write_out(
        out,
        &format!(
            "wrote {} ({} bytes, {} cells) and {}\n",
            bin.display(),
            schema.byte_len(),
            schema.cell_count(),
            meta.display()
        ),
    )
}

pub fn query_text(source: &QuerySource) -> Result<String, CliError> {
    match (&source.query, &source.query_file) {
        (Some(q), _) => Ok(q.clone()),
        (None, Some(path)) => fs::read_to_string(path)
            .map(|s| s.trim().to_string())
            .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display()))),
        (None, None) => Err(CliError::Usage(
            "one of --query or --query-file is required".into(),
        )),
    }
}

pub fn mode_request(m: ModeArg) -> ModeRequest {
    match m {
        ModeArg::Auto => ModeRequest::Auto,
        ModeArg::Naive => ModeRequest::Naive,
        ModeArg::Optimized => ModeRequest::Optimized,
    }
}

pub fn load_catalog(dir: &Path) -> Result<Catalog, CliError> {
    Catalog::load_dir(dir)
        .map_err(|e| CliError::Runtime(format!("cannot load arrays from {}: {e}", dir.display())))
}

/// Parses, analyzes, and plans `query` against `catalog`.
pub fn compile(query: &str, catalog: &Catalog, mode: ModeRequest) -> Result<PlanOutcome, CliError> {
    let ast = parse(query).map_err(|e| CliError::parse(&e, query))?;
    let obj = analyze(&ast, catalog, &AggregatorRegistry::with_builtins())?;
    Ok(plan(&obj, mode)?)
}

fn warn(err: &mut dyn Write, warnings: &[String]) {
    for w in warnings {
        let _ = writeln!(err, "warning: {w}");
    }
}

fn plan_lines(outcome: &PlanOutcome) -> String {
    let p = &outcome.plan;
    format!(
        "template: {}\nexecution: {}\ngroups: {}\nsplits: {}\n",
        p.template,
        p.mode,
        p.geometry.group_count(),
        p.splits.len()
    )
}

fn translate(a: &TranslateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    if a.workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    let query = query_text(&a.source)?;
    let catalog = load_catalog(&a.data_dir)?;
    let outcome = compile(&query, &catalog, mode_request(a.mode))?;
    warn(err, &outcome.warnings);
    let plan = outcome.plan.clone().with_workers(a.workers);
    emit_param_config(&plan, &a.out)?;
    write_out(
        out,
        &format!(
            "{}{}wrote {}\n",
            explain(&plan.query),
            plan_lines(&outcome),
            a.out.display()
        ),
    )
}

/// Runs one query in-process and builds its report.
pub fn run_query(
    query: &str,
    catalog: &Catalog,
    mode: ModeRequest,
    workers: usize,
) -> Result<(RunReport, Vec<String>), CliError> {
    let outcome = compile(query, catalog, mode)?;
    let result = run_job(&outcome.plan, workers)?;
    Ok((
        RunReport::new(Some(query), &outcome.plan, workers, &result),
        outcome.warnings,
    ))
}

fn run(a: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    if a.workers == Some(0) {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    let report = if let Some(config) = &a.config {
        let text = fs::read_to_string(config)
            .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", config.display())))?;
        let cfg = ParamConfig::parse(&text)?;
        let dir = match (&a.data_dir, cfg.get("array.path")) {
            (Some(d), _) => d.clone(),
            (None, Some(p)) => Path::new(p)
                .parent()
                .map(Path::to_path_buf)
                .filter(|p| !p.as_os_str().is_empty())
                .unwrap_or_else(|| PathBuf::from(".")),
            (None, None) => PathBuf::from("."),
        };
        let catalog = load_catalog(&dir)?;
        let plan = cfg.to_plan(&catalog, &AggregatorRegistry::with_builtins())?;
        let workers = a.workers.unwrap_or(plan.workers);
        let result = run_job(&plan, workers)?;
        RunReport::new(None, &plan, workers, &result)
    } else {
        let query = query_text(&a.source)?;
        let catalog = load_catalog(a.data_dir.as_deref().unwrap_or(Path::new(".")))?;
        let (report, warnings) = run_query(
            &query,
            &catalog,
            mode_request(a.mode),
            a.workers.unwrap_or(1),
        )?;
        warn(err, &warnings);
        report
    };
    if let Some(path) = &a.report {
        fs::write(path, report.to_json()).map_err(|e| io_error(path, e))?;
    }
    let c = &report.counters;
    let empty = report.groups.iter().filter(|g| g.value.is_none()).count();
    write_out(
        out,
        &format!(
            "template: {}\ngroups: {} ({} empty)\nmap_input_records: {}\nmap_output_records: {}\nshuffle_groups: {}\nreduce_input_records: {}\nbytes_read: {}\nbytes_shuffled: {}\nwall time: {:.3} ms\n",
            report.plan.template,
            report.group_count,
            empty,
            c.map_input_records,
            c.map_output_records,
            c.shuffle_groups,
            c.reduce_input_records,
            c.bytes_read,
            c.bytes_shuffled,
            report.timings.total_ms
        ),
    )
}

pub fn parse_workers_list(text: &str) -> Result<Vec<usize>, CliError> {
    let list: Vec<usize> =
        text.split(',')
            .map(|w| {
                w.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
                    CliError::Usage(format!("--workers-list: bad worker count {w:?}"))
                })
            })
            .collect::<Result<_, _>>()?;
    if list.is_empty() {
        return Err(CliError::Usage("--workers-list is empty".into()));
    }
    Ok(list)
}

/// Runs `query` naive and optimized for every worker count and compares the results.
pub fn bench(
    query: &str,
    catalog: &Catalog,
    workers_list: &[usize],
) -> Result<CompareReport, CliError> {
    let naive = compile(query, catalog, ModeRequest::Naive)?.plan;
    let optimized = compile(query, catalog, ModeRequest::Optimized)?;
    if !optimized.warnings.is_empty() {
        return Err(CliError::Semantic(format!(
            "bench needs an algebraic aggregator; {} is holistic",
            naive.aggregator().name()
        )));
    }
    let optimized = optimized.plan;
    let mut first: Option<(RunReport, RunReport)> = None;
    let mut timings = Vec::new();
    for &w in workers_list {
        let n = RunReport::new(Some(query), &naive, w, &run_job(&naive, w)?);
        let o = RunReport::new(Some(query), &optimized, w, &run_job(&optimized, w)?);
        let diff = max_relative_difference(&n.values(), &o.values());
        if diff.is_nan() || diff > BENCH_TOLERANCE {
            return Err(CliError::Runtime(format!(
                "engine defect: naive and optimized results differ by {diff:e} (relative) with {w} workers"
            )));
        }
        timings.push(BenchTiming {
            workers: w,
            naive: n.timings,
            optimized: o.timings,
        });
        match &first {
            None => first = Some((n, o)),
            Some((n0, o0)) => {
                let same = |a: &RunReport, b: &RunReport| {
                    a.counters == b.counters
                        && a.values()
                            .iter()
                            .map(|v| v.map(f64::to_bits))
                            .eq(b.values().iter().map(|v| v.map(f64::to_bits)))
                };
                if !same(n0, &n) || !same(o0, &o) {
                    return Err(CliError::Runtime(format!(
                        "engine defect: results with {w} workers differ from {} workers",
                        workers_list[0]
                    )));
                }
            }
        }
    }
    let (n, o) = first.expect("workers list is non-empty");
    Ok(CompareReport::new(n, o, workers_list.to_vec(), timings))
}

fn bench_command(a: &BenchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let query = query_text(&a.source)?;
    let workers = parse_workers_list(&a.workers_list)?;
    let catalog = load_catalog(&a.data_dir)?;
    let report = bench(&query, &catalog, &workers)?;
    if let Some(path) = &a.report {
        fs::write(path, report.to_json()).map_err(|e| io_error(path, e))?;
    }
    let fmt_ratio = |r: Option<f64>| r.map_or("n/a".to_string(), |r| format!("{r:.3}"));
    let mut text = format!(
        "groups: {}\nmax relative difference: {:e}\nmap_output_records: naive {} optimized {} (ratio {})\nbytes_shuffled: naive {} optimized {} (ratio {})\n",
        report.naive.group_count,
        report.max_relative_difference,
        report.naive.counters.map_output_records,
        report.optimized.counters.map_output_records,
        fmt_ratio(report.map_output_ratio),
        report.naive.counters.bytes_shuffled,
        report.optimized.counters.bytes_shuffled,
        fmt_ratio(report.bytes_shuffled_ratio),
    );
    for t in &report.timings {
        text.push_str(&format!(
            "workers {}: naive {:.3} ms, optimized {:.3} ms\n",
            t.workers, t.naive.total_ms, t.optimized.total_ms
        ));
    }
    write_out(out, &text)
}

fn explain_command(
    a: &ExplainArgs,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let query = query_text(&a.source)?;
    let catalog = load_catalog(&a.data_dir)?;
    let outcome = compile(&query, &catalog, mode_request(a.mode))?;
    warn(err, &outcome.warnings);
    write_out(
        out,
        &format!("{}{}", explain(&outcome.plan.query), plan_lines(&outcome)),
    )
}
