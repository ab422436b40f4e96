use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use pcdm_core::datagen::{generate_lasso, generate_tightness_matrix};
use pcdm_core::eso::{eso_for, eso_for_problem, monte_carlo_validate, McConfig};
use pcdm_core::experiments::{bench_speedup, equal_row_least_squares, sampling_stats, BenchConfig};
use pcdm_core::io::{format_f64, read_instance, read_libsvm, write_instance, Instance};
use pcdm_core::solver::{speedup_from_certificate, Solver, SolverConfig};
use pcdm_core::{CompositeProblem, EsoParams, ExecutionMode, LossKind, Regularizer, SamplingLaw, Variant};

use crate::output::{emit, Format};
use crate::{
    AnalyzeArgs, BenchArgs, Cli, Command, GenerateArgs, Kind, Loss, Mode, ProblemArgs, Reg, SolveArgs, StatsArgs,
    ValidateArgs,
};

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Generate(a) => generate(a, cli.seed, out),
        Command::Analyze(a) => analyze(a, cli.format, out),
        Command::Solve(a) => solve(a, cli, out),
        Command::ValidateEso(a) => validate(a, cli.seed, cli.format, out),
        Command::SamplingStats(a) => stats(a, cli.seed, cli.format, out),
        Command::BenchSpeedup(a) => bench(a, cli.seed, cli.format, out),
    }
}

fn load_problem(args: &ProblemArgs) -> Result<CompositeProblem> {
    if let Some(path) = &args.instance {
        let inst = read_instance(path).with_context(|| format!("reading {}", path.display()))?;
        return Ok(inst.lasso_problem()?);
    }
    let Some(path) = &args.libsvm else {
        bail!("one of --instance or --libsvm is required");
    };
    let (a, y) = read_libsvm(path).with_context(|| format!("reading {}", path.display()))?;
    let reg = match args.reg {
        Reg::Zero => Regularizer::Zero,
        Reg::L1 => Regularizer::L1 { lambda: args.lambda },
        Reg::L2 => Regularizer::L2Squared { lambda: args.lambda },
    };
    Ok(match args.loss {
        Loss::Square => CompositeProblem::unit_blocks(a, LossKind::square(y), reg)?,
        Loss::Logistic => CompositeProblem::unit_blocks(a, LossKind::logistic(y), reg)?,
        Loss::SvmDual => CompositeProblem::svm_dual(&a, &y, args.lambda)?,
    })
}

fn generate(args: &GenerateArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    let inst = match args.kind {
        Kind::Lasso => {
            let g = generate_lasso(args.n, args.m, args.nnz_per_col, args.support, args.lambda, seed)?;
            eprintln!("kkt violation {:e}, F* = {}", g.kkt_violation(), format_f64(g.f_star));
            Instance::from(g)
        }
        Kind::Tight => Instance::new(generate_tightness_matrix(args.n, args.m, args.omega)?),
        Kind::Eqrow => {
            let p = equal_row_least_squares(args.m, args.n, args.omega, seed)?;
            let LossKind::Square { targets } = p.loss() else {
                unreachable!("equal-row problems use the square loss")
            };
            let opt = p.known_optimum().expect("planted optimum");
            Instance {
                matrix: p.matrix().clone(),
                b: Some(targets.clone()),
                x_star: Some(opt.x.clone()),
                lambda: None,
                f_star: Some(opt.value),
            }
        }
    };
    match out {
        Some(path) => write_instance(path, &inst).with_context(|| format!("writing {}", path.display()))?,
        None => {
            let text = pcdm_core::io::format_instance(&inst);
            std::io::stdout().lock().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct AnalyzeRow {
    family: String,
    n: usize,
    m: Option<usize>,
    nnz: Option<usize>,
    omega: usize,
    l_min: f64,
    l_mean: f64,
    l_max: f64,
    e_card: f64,
    beta: f64,
    w_min: f64,
    w_mean: f64,
    w_max: f64,
    monotonic: bool,
    speedup: f64,
}

fn summary(v: &[f64]) -> (f64, f64, f64) {
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (min, v.iter().sum::<f64>() / v.len() as f64, max)
}

fn analyze(args: &AnalyzeArgs, format: Format, out: Option<&Path>) -> Result<()> {
    let problem = match (args.n, args.omega) {
        (Some(_), Some(_)) => None,
        _ => Some(load_problem(&args.problem)?),
    };
    let (n, omega) = match &problem {
        Some(p) => (p.n(), p.omega()),
        None => (args.n.unwrap(), args.omega.unwrap()),
    };
    let unit;
    let lipschitz: &[f64] = match &problem {
        Some(p) => p.lipschitz(),
        None => {
            unit = vec![1.0; n];
            &unit
        }
    };
    let mut rows = Vec::new();
    for spec in &args.laws {
        let law = SamplingLaw::parse(spec, n).with_context(|| format!("law {spec:?}"))?;
        let eso = match &problem {
            Some(p) => eso_for_problem(&law, p)?,
            None => eso_for(&law, omega, lipschitz)?,
        };
        let (l_min, l_mean, l_max) = summary(lipschitz);
        let (w_min, w_mean, w_max) = summary(eso.w());
        rows.push(AnalyzeRow {
            family: law.label(),
            n,
            m: problem.as_ref().map(|p| p.m()),
            nnz: problem.as_ref().map(|p| p.matrix().nnz()),
            omega,
            l_min,
            l_mean,
            l_max,
            e_card: law.moments().e1,
            beta: eso.beta(),
            w_min,
            w_mean,
            w_max,
            monotonic: eso.monotonic(),
            speedup: speedup_from_certificate(&law, &eso, lipschitz, None)?,
        });
    }
    emit(&rows, format, out)
}

#[derive(Serialize)]
struct SolveRow {
    law: String,
    variant: String,
    mode: String,
    iterations: u64,
    epochs: f64,
    final_objective: f64,
    gap: Option<f64>,
    converged: bool,
    rejected_steps: u64,
    elapsed_s: f64,
}

fn solve(args: &SolveArgs, cli: &Cli, out: Option<&Path>) -> Result<()> {
    let problem = load_problem(&args.problem)?;
    let law = SamplingLaw::parse(&args.law, problem.n()).with_context(|| format!("law {:?}", args.law))?;
    let variant: Variant = args.variant.parse()?;
    let mode = match args.mode {
        Mode::Sim => ExecutionMode::SequentialSimulation,
        Mode::Par => ExecutionMode::ParallelThreads(
            cli.threads
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |t| t.get())),
        ),
    };
    let mut config = SolverConfig::new(law.clone())
        .with_variant(variant)
        .with_mode(mode)
        .with_max_iters(args.max_iters)
        .with_seed(cli.seed)
        .with_trace_every(args.trace_every);
    if let Some(e) = args.max_epochs {
        config = config.with_max_epochs(e);
    }
    if let Some(e) = args.eps {
        config = config.with_target_gap(e);
    }
    if let Some(f) = args.f_star {
        config = config.with_f_star(f);
    }
    let mut solver = Solver::new(&problem, config)?;
    let trace = solver.run()?;
    if let Some(path) = &args.trace {
        let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        trace.write_csv(std::io::BufWriter::new(file))?;
    }
    if let Some(path) = &args.x_out {
        let text: String = solver.x().iter().map(|v| format_f64(*v) + "\n").collect();
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    let f_star = args.f_star.or_else(|| problem.known_optimum().map(|o| o.value));
    let row = SolveRow {
        law: law.label(),
        variant: args.variant.to_lowercase(),
        mode: format!("{:?}", args.mode).to_lowercase(),
        iterations: trace.iterations,
        epochs: trace.epochs,
        final_objective: trace.final_objective,
        gap: f_star.map(|fs| trace.final_objective - fs),
        converged: trace.converged,
        rejected_steps: trace.rejected_steps,
        elapsed_s: trace.last().map_or(0.0, |r| r.elapsed_s),
    };
    emit(&[row], cli.format, out)
}

#[derive(Serialize)]
struct ValidateRow {
    family: String,
    beta: f64,
    points: usize,
    trials: usize,
    violations: usize,
    max_gap_sigma: f64,
    valid: bool,
}

fn validate(args: &ValidateArgs, seed: u64, format: Format, out: Option<&Path>) -> Result<()> {
    if !(args.beta_scale > 0.0) {
        bail!("--beta-scale must be positive");
    }
    let problem = load_problem(&args.problem)?;
    let cfg = McConfig {
        trials: args.trials,
        points: args.points,
        seed,
        sigmas: args.sigmas,
    };
    let mut rows = Vec::new();
    for spec in &args.laws {
        let law = SamplingLaw::parse(spec, problem.n()).with_context(|| format!("law {spec:?}"))?;
        let base = eso_for_problem(&law, &problem)?;
        let eso = EsoParams::new(base.beta() * args.beta_scale, base.w().to_vec(), false)?;
        let report = monte_carlo_validate(&problem, &law, &eso, &cfg)?;
        rows.push(ValidateRow {
            family: law.label(),
            beta: eso.beta(),
            points: args.points,
            trials: args.trials,
            violations: report.violations,
            max_gap_sigma: report.max_gap_sigma,
            valid: report.violations == 0,
        });
    }
    emit(&rows, format, out)
}

/// Long-format row: one quantity per line.
#[derive(Serialize)]
struct StatsRow {
    quantity: &'static str,
    i: Option<usize>,
    j: Option<usize>,
    exact: Option<f64>,
    empirical: Option<f64>,
    p_value: Option<f64>,
}

impl StatsRow {
    fn new(quantity: &'static str, exact: f64, empirical: f64) -> Self {
        Self {
            quantity,
            i: None,
            j: None,
            exact: Some(exact),
            empirical: Some(empirical),
            p_value: None,
        }
    }
}

fn stats(args: &StatsArgs, seed: u64, format: Format, out: Option<&Path>) -> Result<()> {
    if args.draws < 10_000 {
        bail!("--draws must be at least 10000");
    }
    let law = SamplingLaw::parse(&args.law, args.n).with_context(|| format!("law {:?}", args.law))?;
    let s = sampling_stats(&law, args.draws, args.pairs, seed)?;
    let mut rows = vec![
        StatsRow::new("e_card", s.e1_exact, s.e1_empirical),
        StatsRow::new("e_card_sq", s.e2_exact, s.e2_empirical),
        StatsRow::new("p_min", s.p_exact, s.p_empirical_min),
        StatsRow::new("p_max", s.p_exact, s.p_empirical_max),
        StatsRow {
            quantity: "inclusion_test",
            i: None,
            j: None,
            exact: Some(s.p_exact),
            empirical: None,
            p_value: Some(s.inclusion_p_value),
        },
        StatsRow {
            quantity: "cardinality_test",
            i: None,
            j: None,
            exact: None,
            empirical: None,
            p_value: Some(s.cardinality_p_value),
        },
    ];
    for (k, (e, x)) in s.cardinality_exact.iter().zip(&s.cardinality_empirical).enumerate() {
        if *e > 0.0 || *x > 0.0 {
            rows.push(StatsRow {
                i: Some(k),
                ..StatsRow::new("cardinality", *e, *x)
            });
        }
    }
    for p in &s.pairs {
        rows.push(StatsRow {
            i: Some(p.i),
            j: Some(p.j),
            ..StatsRow::new("pair", p.exact, p.empirical)
        });
    }
    emit(&rows, format, out)
}

fn bench(args: &BenchArgs, seed: u64, format: Format, out: Option<&Path>) -> Result<()> {
    let cfg = BenchConfig {
        m: args.m,
        n: args.n,
        omegas: args.omegas.clone(),
        taus: args.taus.clone(),
        eps: args.eps,
        seed,
        max_epochs: args.max_epochs,
        runs: args.runs,
    };
    let rows = bench_speedup(&cfg)?;
    emit(&rows, format, out)
}
