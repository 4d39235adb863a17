//! Command-line interface: parse, eliminate, decide, differential-test,
//! project, and decompose formulas in the three-sorted valued-field
//! language over the truncated Laurent-series model.
//!
//! Exit codes: 0 success/consistent, 1 counterexample found, 2 usage or
//! parse error, 3 budget/mode/canonicalization limits.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ovfqe::borel;
use ovfqe::embed;
use ovfqe::error::Error;
use ovfqe::eval::{
    differential_test, evaluate_qf, partial_eval, report_json, Assignment, EquivStatus,
    ReportRecord, SearchBudget, Value,
};
use ovfqe::formula::{Formula, Sort, Term, Var};
use ovfqe::group::GroupMode;
use ovfqe::laurent::{LaurentSeries, ModelConfig};
use ovfqe::qe::{eliminate_field_quantifiers_traced, Budget};
use ovfqe::syntax;

const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "ovfqe",
    about = "Relative field-quantifier elimination for ordered henselian valued fields",
    version
)]
struct Cli {
    /// Model configuration file (key=value lines: residue_mode,
    /// default_prec, sample_exp_min, sample_exp_max, sample_coeff_bound,
    /// seed)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Degree cap for quantified variables
    #[arg(long, global = true, default_value_t = 2)]
    max_degree: u32,

    /// Case-split budget
    #[arg(long, global = true, default_value_t = 100_000)]
    max_splits: usize,

    /// Value-group theory for decisions
    #[arg(long, global = true, default_value = "int", value_parser = ["int", "divisible"])]
    group: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eliminate field quantifiers and print the normal form
    Qe {
        file: PathBuf,
        /// Print each rewrite step with its rule name
        #[arg(long)]
        trace: bool,
    },
    /// Evaluate a formula under an assignment file
    Eval {
        file: PathBuf,
        /// Assignment file: one `var = value` per line
        #[arg(long)]
        assign: PathBuf,
    },
    /// Differential test: eliminate, then sample input vs output
    Check {
        file: PathBuf,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Decide a residue-sort sentence
    DecideR { file: PathBuf },
    /// Decide a group-sort sentence
    DecideS { file: PathBuf },
    /// Project a residue-definable set to a pure residue formula
    EmbedR { file: PathBuf },
    /// Project a group-definable set to a pure group formula
    EmbedS { file: PathBuf },
    /// Decompose a mixed residue/group set into rectangles
    Rectangles { file: PathBuf },
    /// Images of a parameter-free field set under res and v
    Strip { file: PathBuf },
    /// Canonical Swiss-cheese form and Borel construction tree
    Borel { file: PathBuf },
    /// Batch differential run over every .fml file in a directory
    Corpus {
        dir: PathBuf,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::SyntaxError { .. } | Error::SortError(_) => 2,
        Error::BudgetExceeded(_)
        | Error::DegreeUnsupported(_)
        | Error::DegreeCapExceeded(_)
        | Error::ModeUnsupported(_)
        | Error::NonlinearOccurrence(_)
        | Error::CanonicalizationFailed(_)
        | Error::NonParameterFreeInput(_)
        | Error::CongruenceAtomInDivisibleMode
        | Error::InsufficientPrecision(_) => 3,
        _ => 3,
    }
}

fn read_file(path: &Path) -> Result<String, u8> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        2
    })
}

fn parse_file(path: &Path) -> Result<Formula, u8> {
    let text = read_file(path)?;
    syntax::parse(&text).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        2
    })
}

fn load_config(cli: &Cli) -> Result<ModelConfig, u8> {
    match &cli.config {
        None => Ok(ModelConfig::default()),
        Some(p) => {
            let text = read_file(p)?;
            ModelConfig::parse(&text).map_err(|e| {
                eprintln!("error: {}: {e}", p.display());
                2
            })
        }
    }
}

fn group_mode(cli: &Cli) -> GroupMode {
    if cli.group == "divisible" {
        GroupMode::Divisible
    } else {
        GroupMode::Int
    }
}

fn budget(cli: &Cli) -> Budget {
    Budget { max_degree: cli.max_degree, max_splits: cli.max_splits }
}

fn fail(e: &Error) -> u8 {
    eprintln!("error: {e}");
    exit_code_for(e)
}

/// Parses an assignment file: one `var = value` per line (`#` comments).
/// Values: series literals for field variables, rationals for residue
/// variables, integers for group variables.
fn parse_assignment(text: &str) -> Result<Assignment, Error> {
    let mut asg = Assignment::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f = syntax::parse(line).map_err(|_| Error::SyntaxError {
            line: ln + 1,
            col: 1,
            msg: format!("expected `var = value`, got `{line}`"),
        })?;
        let Formula::Eq(lhs, rhs) = f else {
            return Err(Error::SyntaxError {
                line: ln + 1,
                col: 1,
                msg: "assignment lines must be equalities".into(),
            });
        };
        let Term::Var(v) = lhs else {
            return Err(Error::SyntaxError {
                line: ln + 1,
                col: 1,
                msg: "left-hand side must be a variable".into(),
            });
        };
        let value = term_to_value(&v, &rhs).ok_or_else(|| Error::SyntaxError {
            line: ln + 1,
            col: 1,
            msg: format!("right-hand side is not a {}-sort constant", v.sort),
        })?;
        asg.insert(v, value)?;
    }
    Ok(asg)
}

fn term_to_value(v: &Var, t: &Term) -> Option<Value> {
    match (v.sort, t) {
        (Sort::Field, Term::Series(s)) => Some(Value::Field(s.clone())),
        (Sort::Field, Term::Int(n, _)) => Some(Value::Field(LaurentSeries::from_rational(
            num::BigRational::from(n.clone()),
        ))),
        (Sort::Field, Term::Rat(q)) => Some(Value::Field(LaurentSeries::from_rational(q.clone()))),
        (Sort::Residue, Term::Rat(q)) => Some(Value::Residue(q.clone())),
        (Sort::Residue, Term::Int(n, _)) => {
            Some(Value::Residue(num::BigRational::from(n.clone())))
        }
        (Sort::Group, Term::Int(n, _)) => n.to_string().parse().ok().map(Value::Group),
        (_, Term::Neg(inner)) => match term_to_value(v, inner)? {
            Value::Field(s) => Some(Value::Field(s.neg())),
            Value::Residue(q) => Some(Value::Residue(-q)),
            Value::Group(g) => Some(Value::Group(-g)),
        },
        _ => None,
    }
}

fn run() -> u8 {
    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let gmode = group_mode(&cli);
    let rmode = cfg.residue_mode;
    let bdg = budget(&cli);
    match &cli.command {
        Command::Qe { file, trace } => {
            let f = match parse_file(file) {
                Ok(f) => f,
                Err(c) => return c,
            };
            match eliminate_field_quantifiers_traced(&f, &bdg, *trace) {
                Ok(out) => {
                    if *trace {
                        for line in &out.trace {
                            println!("trace: {line}");
                        }
                    }
                    println!("{}", syntax::print(&out.formula));
                    println!("N = {}", out.pas.n());
                    0
                }
                Err(e) => fail(&e),
            }
        }
        Command::Eval { file, assign } => {
            let f = match parse_file(file) {
                Ok(f) => f,
                Err(c) => return c,
            };
            let asg = match read_file(assign).and_then(|t| {
                parse_assignment(&t).map_err(|e| {
                    eprintln!("error: {}: {e}", assign.display());
                    2
                })
            }) {
                Ok(a) => a,
                Err(c) => return c,
            };
            let result = if ovfqe::formula::has_field_quantifier(&f) {
                partial_eval(&f, &asg, &SearchBudget::default(), rmode, gmode)
                    .map(|r| match r {
                        Some(b) => b.to_string(),
                        None => "unconfirmed".to_string(),
                    })
            } else {
                evaluate_qf(&f, &asg, rmode, gmode).map(|b| b.to_string())
            };
            match result {
                Ok(s) => {
                    println!("{s}");
                    0
                }
                Err(e) => fail(&e),
            }
        }
        Command::Check { file, samples, seed } => {
            let f = match parse_file(file) {
                Ok(f) => f,
                Err(c) => return c,
            };
            let out = match eliminate_field_quantifiers_traced(&f, &bdg, false) {
                Ok(o) => o,
                Err(e) => return fail(&e),
            };
            match differential_test(&f, &out.formula, *samples, &cfg, *seed, gmode) {
                Ok(v) => {
                    let record = ReportRecord::from_verdict(
                        &file.display().to_string(),
                        &v,
                    );
                    println!("{}", record.line());
                    match v.status {
                        EquivStatus::Counterexample { .. } => {
                            println!("counterexample found");
                            1
                        }
                        _ => {
                            println!("{}, 0 counterexamples", record.status);
                            0
                        }
                    }
                }
                Err(e) => fail(&e),
            }
        }
        Command::DecideR { file } => {
            let f = match parse_file(file) {
                Ok(f) => f,
                Err(c) => return c,
            };
            match ovfqe::residue::decide_residue_sentence(&f, rmode) {
                Ok(b) => {
                    println!("{b}");
                    0
                }
                Err(e) => fail(&e),
            }
        }
        Command::DecideS { file } => {
            let f = match parse_file(file) {
                Ok(f) => f,
                Err(c) => return c,
            };
            match ovfqe::group::decide_group_sentence(&f, gmode) {
                Ok(b) => {
                    println!("{b}");
                    0
                }
                Err(e) => fail(&e),
            }
        }
        Command::EmbedR { file } => {
            let f = match parse_file(file) {
                Ok(f) => f,
                Err(c) => return c,
            };
            match embed::project_residue_definable(&f, &bdg, rmode, gmode) {
                Ok(g) => {
                    println!("# stable embeddedness: induced structure on the residue sort");
                    println!("{}", syntax::print(&g));
                    0
                }
                Err(e) => fail(&e),
            }
        }
        Command::EmbedS { file } => {
            let f = match parse_file(file) {
                Ok(f) => f,
                Err(c) => return c,
            };
            match embed::project_group_definable(&f, &bdg, rmode, gmode) {
                Ok(g) => {
                    println!("# stable embeddedness: induced structure on the value group");
                    println!("{}", syntax::print(&g));
                    0
                }
                Err(e) => fail(&e),
            }
        }
        Command::Rectangles { file } => {
            let f = match parse_file(file) {
                Ok(f) => f,
                Err(c) => return c,
            };
            match embed::rectangle_decompose(&f, &bdg) {
                Ok(pairs) => {
                    println!("# orthogonality: rectangle decomposition of a mixed-sort set");
                    for (i, (psi, theta)) in pairs.iter().enumerate() {
                        println!(
                            "rectangle {}: ({}) x ({})",
                            i + 1,
                            syntax::print(psi),
                            syntax::print(theta)
                        );
                    }
                    println!("count = {}", pairs.len());
                    0
                }
                Err(e) => fail(&e),
            }
        }
        Command::Strip { file } => {
            let f = match parse_file(file) {
                Ok(f) => f,
                Err(c) => return c,
            };
            match embed::strip_parameters(&f, &bdg, rmode, gmode) {
                Ok((res_img, val_img)) => {
                    println!("# parameter-free projection: images under res and v");
                    println!("res image: {}", syntax::print(&res_img));
                    println!("v image:   {}", syntax::print(&val_img));
                    0
                }
                Err(e) => fail(&e),
            }
        }
        Command::Borel { file } => {
            let f = match parse_file(file) {
                Ok(f) => f,
                Err(c) => return c,
            };
            match borel::canonicalize(&f).and_then(|set| {
                let tree = borel::borel_tree(&set)?;
                Ok((set, tree))
            }) {
                Ok((set, tree)) => {
                    println!("dim = {}", set.dim());
                    println!("canonical: {}", syntax::print(&set.to_formula()));
                    print!("{}", tree.render_text(&|g| syntax::print(g)));
                    println!(
                        "{}",
                        serde_json::to_string(&tree.to_json(&|g| syntax::print(g)))
                            .expect("json rendering is infallible")
                    );
                    0
                }
                Err(e) => fail(&e),
            }
        }
        Command::Corpus { dir, samples, seed } => {
            let mut files: Vec<PathBuf> = match std::fs::read_dir(dir) {
                Ok(rd) => rd
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().map(|x| x == "fml").unwrap_or(false))
                    .collect(),
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", dir.display());
                    return 2;
                }
            };
            files.sort();
            let mut records = Vec::new();
            let mut failures = 0usize;
            let mut counterexamples = 0usize;
            for (i, path) in files.iter().enumerate() {
                let id = path.display().to_string();
                let f = match parse_file(path) {
                    Ok(f) => f,
                    Err(_) => {
                        failures += 1;
                        records.push(ReportRecord {
                            id,
                            status: "parse-error".into(),
                            samples: 0,
                            unconfirmed: 0,
                            skipped: 0,
                            counterexample: None,
                        });
                        continue;
                    }
                };
                let out = match eliminate_field_quantifiers_traced(&f, &bdg, false) {
                    Ok(o) => o,
                    Err(e) => {
                        failures += 1;
                        records.push(ReportRecord {
                            id,
                            status: format!("qe-error: {e}"),
                            samples: 0,
                            unconfirmed: 0,
                            skipped: 0,
                            counterexample: None,
                        });
                        continue;
                    }
                };
                let file_seed = seed.wrapping_add(i as u64);
                match differential_test(&f, &out.formula, *samples, &cfg, file_seed, gmode) {
                    Ok(v) => {
                        if matches!(v.status, EquivStatus::Counterexample { .. }) {
                            counterexamples += 1;
                        }
                        records.push(ReportRecord::from_verdict(&id, &v));
                    }
                    Err(e) => {
                        failures += 1;
                        records.push(ReportRecord {
                            id,
                            status: format!("eval-error: {e}"),
                            samples: 0,
                            unconfirmed: 0,
                            skipped: 0,
                            counterexample: None,
                        });
                    }
                }
            }
            for r in &records {
                println!("{}", r.line());
            }
            println!(
                "summary: {} files, {} failures, {} counterexamples, seed={seed}",
                records.len(),
                failures,
                counterexamples
            );
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "version": REPORT_SCHEMA_VERSION,
                    "seed": seed,
                    "samples": samples,
                    "records": serde_json::from_str::<serde_json::Value>(&report_json(&records))
                        .expect("records serialize"),
                }))
                .expect("summary serialization is infallible")
            );
            if counterexamples > 0 {
                1
            } else {
                0
            }
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run())
}
