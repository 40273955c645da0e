//! `dcmodel`: command-line access to divide-and-color operator computations.
//!
//! Exit codes: 0 when the analysis completed, 1 when `verify` finds a failing
//! check, 2 for usage and domain errors.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use dc_core::asymptotics::{
    family_from_name, limit_for_family, small_p_dc_check, small_p_solve, LimitSolution,
    SystemRhs,
};
use dc_core::error::DcError;
use dc_core::ising;
use dc_core::linalg;
use dc_core::operators;
use dc_core::partition::{bell_number, integer_partitions, DEFAULT_PARTITION_CAP};
use dc_core::rational::{format_rational, is_half, parse_rational, Rational};
use dc_core::solver::{self, MeasureVector};
use dc_core::verify;

#[derive(Parser)]
#[command(name = "dcmodel", version, about = "Exact linear algebra of divide-and-color models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Common {
    /// Output format.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Rank and nullity of A_{n,p} (or of the invariant operator).
    Rank {
        #[arg(long)]
        n: usize,
        /// Color parameter as "a/b".
        #[arg(long)]
        p: String,
        /// Use the permutation-invariant operator over integer partitions.
        #[arg(long)]
        invariant: bool,
        /// Largest n for which set partitions are enumerated.
        #[arg(long, default_value_t = DEFAULT_PARTITION_CAP)]
        cap: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Kernel basis of A_{n,p} in reduced column echelon form.
    Kernel {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: String,
        #[command(flatten)]
        common: Common,
    },
    /// Formal and nonnegative solutions of A_{n,p} q = nu.
    Solve {
        #[arg(long)]
        p: String,
        /// JSON file: a map from bit strings to "a/b", or {"n", "values"}.
        #[arg(long)]
        input: PathBuf,
        /// Ground-set size, when it cannot be read from the input.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Runs the self-check table; exits 1 if any check fails.
    Verify {
        #[arg(long, default_value_t = 6)]
        n_max: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Limiting system at p = 1/2 for a measure family and its solutions.
    LimitHalf {
        #[command(flatten)]
        family: FamilyArgs,
    },
    /// Single-block solutions for small p.
    SmallP {
        #[command(flatten)]
        family: FamilyArgs,
        /// Comma-separated grid of rational p values in (0, 1/2).
        #[arg(long, value_delimiter = ',', default_value = "1/10,1/100,1/1000")]
        grid: Vec<String>,
        /// Solve one measure from a file instead of a family grid.
        #[arg(long, requires = "p")]
        input: Option<PathBuf>,
        #[arg(long)]
        p: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Ising triangle: h -> 0 limit against the random-cluster representation.
    Ising {
        /// Comma-separated couplings.
        #[arg(long = "J", value_delimiter = ',', default_value = "0.1,0.5,1,2,5")]
        j: Vec<f64>,
        /// Comma-separated field values for the convergence columns.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.01,0.001")]
        h: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Permutation-invariant system for level totals nu_0..nu_n.
    Invariant {
        #[arg(long)]
        p: String,
        /// Comma-separated level totals "a/b,...", n + 1 values.
        #[arg(long, value_delimiter = ',')]
        levels: Vec<String>,
    },
    /// Monte-Carlo sample of the DC model.
    Sample {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: String,
        /// Comma-separated partition law over the enumeration order.
        #[arg(long, value_delimiter = ',')]
        q: Vec<String>,
        #[arg(long, default_value_t = 1_000_000)]
        trials: u64,
        #[arg(long)]
        seed: u64,
    },
    /// Exports one of the operators.
    Operator {
        #[arg(long, value_enum)]
        kind: OperatorKind,
        #[arg(long)]
        n: usize,
        /// Required for every kind except `c` and `parity`.
        #[arg(long)]
        p: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct FamilyArgs {
    /// Family name: product, single-block-mixture, ising-triangle.
    #[arg(long)]
    family: Option<String>,
    /// Family parameters as key=value (repeatable), e.g. n=3, w.12=1/10, J=1.
    #[arg(long = "param", value_parser = parse_key_value)]
    params: Vec<(String, String)>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OperatorKind {
    Color,
    Moment,
    SingleBlock,
    B,
    C,
    D,
    Invariant,
    Parity,
}

fn parse_key_value(text: &str) -> Result<(String, String), String> {
    text.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected key=value, got {text:?}"))
}

enum Failure {
    Domain(String),
    Verification,
}

impl From<DcError> for Failure {
    fn from(e: DcError) -> Self {
        Failure::Domain(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn rational(text: &str) -> CliResult<Rational> {
    Ok(parse_rational(text)?)
}

fn rationals(texts: &[String]) -> CliResult<Vec<Rational>> {
    texts.iter().map(|t| rational(t)).collect()
}

fn strings(v: &[Rational]) -> Vec<String> {
    v.iter().map(format_rational).collect()
}

fn read_json(path: &PathBuf) -> CliResult<Value> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Domain(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Domain(format!("bad JSON in {}: {e}", path.display())))
}

fn print_json(value: &Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn build_family(args: &FamilyArgs) -> CliResult<Box<dyn dc_core::asymptotics::MeasureFamily>> {
    let name = args
        .family
        .as_deref()
        .ok_or_else(|| Failure::Domain("--family is required".into()))?;
    let params: BTreeMap<String, String> = args.params.iter().cloned().collect();
    Ok(family_from_name(name, &params)?)
}

fn cmd_rank(n: usize, p: &str, invariant: bool, cap: usize, format: Format) -> CliResult<()> {
    let p = rational(p)?;
    let (rank, columns, label) = if invariant {
        let a = operators::build_invariant_operator(n, &p)?;
        (linalg::rank(&a), integer_partitions(n).len(), "integer_partitions")
    } else {
        let a = operators::build_color_operator_capped(n, &p, cap)?;
        (linalg::rank(&a), a.cols(), "bell_n")
    };
    match format {
        Format::Json => {
            let mut out = json!({
                "n": n,
                "p": format_rational(&p),
                "invariant": invariant,
                "rank": rank,
                "nullity": columns - rank,
            });
            out[label] = json!(columns);
            print_json(&out);
        }
        Format::Csv => {
            println!("n,p,invariant,rank,nullity,columns");
            println!("{n},{},{invariant},{rank},{},{columns}", format_rational(&p), columns - rank);
        }
    }
    Ok(())
}

fn cmd_kernel(n: usize, p: &str, format: Format) -> CliResult<()> {
    let p = rational(p)?;
    let a = operators::build_color_operator(n, &p)?;
    let kernel = linalg::kernel(&a);
    let partitions: Vec<String> = a.col_labels().iter().map(ToString::to_string).collect();
    match format {
        Format::Json => print_json(&json!({
            "n": n,
            "p": format_rational(&p),
            "partitions": partitions,
            "bell_n": bell_number(n) as u64,
            "dimension": kernel.len(),
            "kernel_basis": kernel.iter().map(|k| strings(k)).collect::<Vec<_>>(),
        })),
        Format::Csv => {
            println!("vector,{}", partitions.join(","));
            for (i, k) in kernel.iter().enumerate() {
                println!("{i},{}", strings(k).join(","));
            }
        }
    }
    Ok(())
}

fn cmd_solve(p: &str, input: &PathBuf, n: Option<usize>) -> CliResult<()> {
    let p = rational(p)?;
    let nu = MeasureVector::from_json(&read_json(input)?, n)?;
    let report = solver::solve_dc(&nu, &p)?;
    let mut out = report.to_json();
    if is_half(&p) && report.in_range {
        let witness = solver::half_solution(&nu)?;
        out["half_solution"] = json!(strings(&witness));
    }
    print_json(&out);
    Ok(())
}

fn cmd_verify(n_max: usize, seed: u64, format: Format) -> CliResult<()> {
    if n_max == 0 || n_max > 8 {
        return Err(Failure::Domain("--n-max must be between 1 and 8".into()));
    }
    let checks = verify::run_checks(n_max, seed)?;
    match format {
        Format::Json => print_json(&json!({
            "checks": checks.iter().map(|c| json!({
                "name": c.name,
                "passed": c.passed,
                "detail": c.detail,
            })).collect::<Vec<_>>(),
            "all_passed": checks.iter().all(|c| c.passed),
        })),
        Format::Csv => {
            println!("check,passed,detail");
            for c in &checks {
                println!("\"{}\",{},\"{}\"", c.name, c.passed, c.detail);
            }
        }
    }
    if checks.iter().all(|c| c.passed) {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn cmd_limit_half(family: &FamilyArgs) -> CliResult<()> {
    let family = build_family(family)?;
    let (system, solution) = limit_for_family(family.as_ref())?;
    let partitions: Vec<String> = system.coefficients.col_labels().iter().map(ToString::to_string).collect();
    let rows: Vec<Value> = system.rows.iter().map(|s| json!(s.elements())).collect();
    let rhs = match &system.rhs {
        SystemRhs::Exact(v) => json!(strings(v)),
        SystemRhs::Numeric(v) => json!(v),
    };
    let solution = match solution {
        LimitSolution::Exact(set) => json!({
            "exact": true,
            "particular": set.particular.as_deref().map(strings),
            "kernel_basis": set.kernel_basis.iter().map(|k| strings(k)).collect::<Vec<_>>(),
            "dimension": set.dimension,
            "rank": set.rank,
        }),
        LimitSolution::Numeric(sol) => json!({
            "exact": false,
            "particular": sol.particular,
            "kernel_basis": sol.kernel_basis,
            "dimension": sol.kernel_basis.len(),
            "residual": sol.residual,
        }),
    };
    print_json(&json!({
        "family": family.name(),
        "n": system.n,
        "partitions": partitions,
        "rows": rows,
        "rhs": rhs,
        "solution": solution,
    }));
    Ok(())
}

fn cmd_small_p(family: &FamilyArgs, grid: &[String], input: Option<&PathBuf>, p: Option<&str>, format: Format) -> CliResult<()> {
    if let Some(path) = input {
        let p = rational(p.expect("clap requires p with input"))?;
        let nu = MeasureVector::from_json(&read_json(path)?, None)?;
        let solution = small_p_solve(&nu, &p)?;
        print_json(&solution.to_json());
        return Ok(());
    }
    let family = build_family(family)?;
    let grid = rationals(grid)?;
    let rows = small_p_dc_check(family.as_ref(), &grid)?;
    match format {
        Format::Json => print_json(&json!({
            "family": family.name(),
            "blocks": operators::single_block_index(family.n()).iter().map(|t| t.elements()).collect::<Vec<_>>(),
            "rows": rows.iter().map(|r| json!({
                "p": format_rational(&r.p),
                "q": r.q,
                "all_nonnegative": r.all_nonnegative,
                "mass_sum": r.mass_sum,
                "error": r.error,
            })).collect::<Vec<_>>(),
        })),
        Format::Csv => {
            println!("p,all_nonnegative,mass_sum,error");
            for r in &rows {
                println!(
                    "{},{},{:.12e},{}",
                    format_rational(&r.p),
                    r.all_nonnegative,
                    r.mass_sum,
                    r.error.as_deref().unwrap_or("")
                );
            }
        }
    }
    Ok(())
}

fn cmd_ising(j: &[f64], h: &[f64], format: Format) -> CliResult<()> {
    let rows = ising::corollary_report(j, h)?;
    match format {
        Format::Json => print_json(&json!({
            "rows": rows.iter().map(ising::CorollaryRow::to_json).collect::<Vec<_>>(),
        })),
        Format::Csv => print!("{}", ising::corollary_csv(&rows)),
    }
    Ok(())
}

fn cmd_invariant(p: &str, levels: &[String]) -> CliResult<()> {
    let p = rational(p)?;
    let levels = rationals(levels)?;
    let report = solver::solve_invariant(&levels, &p)?;
    print_json(&report.to_json());
    Ok(())
}

fn cmd_sample(n: usize, p: &str, q: &[String], trials: u64, seed: u64) -> CliResult<()> {
    let p = rational(p)?;
    let q = rationals(q)?;
    let empirical = solver::sample_dc(&q, n, &p, trials, seed)?;
    let exact = solver::dc_image(&q, n, &p)?;
    let tv = empirical.total_variation(&exact)?;
    print_json(&json!({
        "n": n,
        "p": format_rational(&p),
        "trials": trials,
        "seed": seed,
        "empirical": empirical.to_json(),
        "exact": exact.to_json(),
        "total_variation": tv,
    }));
    Ok(())
}

fn cmd_operator(kind: OperatorKind, n: usize, p: Option<&str>, format: Format) -> CliResult<()> {
    let needs_p = || -> CliResult<Rational> {
        rational(p.ok_or_else(|| Failure::Domain("--p is required for this operator".into()))?)
    };
    let m = match kind {
        OperatorKind::Color => operators::build_color_operator(n, &needs_p()?)?,
        OperatorKind::Moment => operators::build_moment_operator(n, &needs_p()?)?,
        OperatorKind::SingleBlock => operators::build_single_block_operator(n, &needs_p()?)?,
        OperatorKind::B => operators::build_b_matrix(n, &needs_p()?)?,
        OperatorKind::C => operators::build_c_matrix(n),
        OperatorKind::D => operators::build_d_matrix(n, &needs_p()?)?,
        OperatorKind::Invariant => operators::build_invariant_operator(n, &needs_p()?)?,
        OperatorKind::Parity => operators::build_parity_matrix(n)?,
    };
    match format {
        Format::Json => print_json(&m.to_json()),
        Format::Csv => print!("{}", m.to_csv()),
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Rank { n, p, invariant, cap, common } => cmd_rank(n, &p, invariant, cap, common.format),
        Command::Kernel { n, p, common } => cmd_kernel(n, &p, common.format),
        Command::Solve { p, input, n } => cmd_solve(&p, &input, n),
        Command::Verify { n_max, seed, common } => cmd_verify(n_max, seed, common.format),
        Command::LimitHalf { family } => cmd_limit_half(&family),
        Command::SmallP { family, grid, input, p, common } => {
            cmd_small_p(&family, &grid, input.as_ref(), p.as_deref(), common.format)
        }
        Command::Ising { j, h, common } => cmd_ising(&j, &h, common.format),
        Command::Invariant { p, levels } => cmd_invariant(&p, &levels),
        Command::Sample { n, p, q, trials, seed } => cmd_sample(n, &p, &q, trials, seed),
        Command::Operator { kind, n, p, common } => cmd_operator(kind, n, p.as_deref(), common.format),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => {
            eprintln!("verification failed");
            ExitCode::from(1)
        }
        Err(Failure::Domain(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
