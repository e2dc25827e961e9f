//! `opcsp`: command-line front end.
//!
//! Exit codes: 0 for SAT / consistent / ACCEPT / SATISFYING, 1 for UNSAT /
//! refuted / REJECT / VIOLATING, 2 for usage or input errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use opcsp::certificates::{build_certificate, check_certificate, GapCertificate, Verdict};
use opcsp::consistency::slac;
use opcsp::csp::{brute_force_solve, Instance, ValueSet};
use opcsp::fourier::relation_polynomial;
use opcsp::gap_instances::{self, linear_system_instance, magic_square, pauli_fixture, random_instance, LinearSystem};
use opcsp::operators::{verify_assignment, OperatorAssignment, DEFAULT_TOL};
use opcsp::reductions::{
    self, add_commutativity_gadget, collapse_equalities, constants_assignment, constants_reduction, core,
    core_instance, factor_transport, gadgetize, lift_gadget_assignment, restrict_assignment, restrict_transport,
    subalgebra_map, with_rt, Congruence, OpTransport, PPFormula,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "opcsp", version, about = "Constraint satisfaction with operator assignments")]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exhaustive classical search.
    Solve { instance: PathBuf },
    /// Singleton Linear Arc-Consistency.
    Slac {
        instance: PathBuf,
        /// Write the removal trace (JSON) here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Check an operator assignment against an instance.
    VerifyOps {
        instance: PathBuf,
        ops: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Build a gap certificate for a SLAC-refuted instance, or check one.
    Audit {
        instance: PathBuf,
        /// Write the certificate here (default: standard output).
        #[arg(long, short, conflicts_with = "check")]
        out: Option<PathBuf>,
        /// Check this certificate instead of building one.
        #[arg(long)]
        check: Option<PathBuf>,
    },
    /// Print the characteristic polynomial of a relation.
    Poly {
        instance: PathBuf,
        #[arg(long)]
        rel: String,
    },
    /// Apply a reduction; writes the output instance.
    Reduce {
        #[command(subcommand)]
        step: ReduceCmd,
    },
    /// Generate an instance or operator document.
    Gen {
        #[command(subcommand)]
        kind: GenCmd,
    },
}

#[derive(clap::Args)]
struct ReduceIo {
    instance: PathBuf,
    /// Output instance (default: standard output).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Transport an operator assignment: input document, output document.
    #[arg(long, num_args = 2, value_names = ["IN", "OUT"])]
    transport_ops: Option<Vec<PathBuf>>,
}

#[derive(Subcommand)]
enum ReduceCmd {
    /// Replace a relation by its pp-definition.
    Gadget {
        #[command(flatten)]
        io: ReduceIo,
        #[arg(long)]
        rel: String,
        /// pp-formula document.
        #[arg(long)]
        formula: PathBuf,
    },
    /// Identify variables joined by EQ constraints.
    Collapse {
        #[command(flatten)]
        io: ReduceIo,
    },
    /// Add RT constraints between all pairs of every scope.
    Commgadget {
        #[command(flatten)]
        io: ReduceIo,
        /// Add RT to the language if missing.
        #[arg(long)]
        add_rt: bool,
    },
    /// Rewrite the instance over the core of its language.
    Core {
        #[command(flatten)]
        io: ReduceIo,
    },
    /// Eliminate constant relations via R_GAMMA.
    Constants {
        #[command(flatten)]
        io: ReduceIo,
        /// Comma-separated constant relation names.
        #[arg(long, value_delimiter = ',')]
        constants: Vec<String>,
    },
    /// Relabel onto a subset B of a larger domain.
    Restrict {
        #[command(flatten)]
        io: ReduceIo,
        /// Target domain size.
        #[arg(long)]
        d: usize,
        /// Comma-separated elements of B.
        #[arg(long, value_delimiter = ',')]
        subset: Vec<usize>,
    },
    /// Pull back along the quotient by a congruence.
    Factor {
        #[command(flatten)]
        io: ReduceIo,
        /// Classes, e.g. "0,2;1,3".
        #[arg(long)]
        classes: String,
    },
}

#[derive(Subcommand)]
enum GenCmd {
    /// The magic-square instance.
    MagicSquare {
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// The 4-dimensional Pauli solution of the magic square.
    Pauli {
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// A linear system over Z_p from an equations file.
    Linsys {
        #[arg(long)]
        p: usize,
        #[arg(long)]
        file: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// A random instance over a bundled bounded-width language.
    Random {
        /// two-clause, horn or max-closed.
        #[arg(long)]
        lang: String,
        #[arg(long, default_value_t = 6)]
        vars: usize,
        #[arg(long, default_value_t = 8)]
        constraints: usize,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_instance(path: &Path) -> Result<Instance> {
    Instance::from_json(&read(path)?).with_context(|| format!("parsing instance {}", path.display()))
}

fn load_ops(path: &Path) -> Result<OperatorAssignment> {
    OperatorAssignment::from_json(&read(path)?).with_context(|| format!("parsing operators {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, format!("{text}\n")).with_context(|| format!("writing {}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Solve { instance } => {
            let p = load_instance(&instance)?;
            let r = brute_force_solve(&p)?;
            match r.witness {
                Some(w) => {
                    println!("SAT ({} assignments)", r.assignments);
                    for (var, k) in w {
                        println!("{var} = {k}");
                    }
                    Ok(0)
                }
                None => {
                    println!("UNSAT ({} assignments)", r.assignments);
                    Ok(1)
                }
            }
        }
        Command::Slac { instance, trace } => {
            let p = load_instance(&instance)?;
            let r = slac(&p);
            if let Some(path) = trace {
                emit(Some(&path), &r.to_trace_json(&p))?;
            }
            if r.consistent {
                if r.domains.iter().all(|&s| s == ValueSet::full(p.d())) {
                    println!("SLAC-consistent; domains full");
                } else {
                    println!("SLAC-consistent; {} values removed", r.removals.len());
                    for (v, s) in p.variables().iter().zip(&r.domains) {
                        println!("{v} {s}");
                    }
                }
                Ok(0)
            } else {
                let v = r.emptied_var().expect("refuted run empties a domain");
                println!("SLAC-refuted; domain of {} emptied after {} removals", p.variables()[v], r.removals.len());
                Ok(1)
            }
        }
        Command::VerifyOps { instance, ops, tol } => {
            let p = load_instance(&instance)?;
            let ops = load_ops(&ops)?;
            let report = verify_assignment(&p, &ops, tol)?;
            println!("{}", report.to_table().trim_end());
            Ok(if report.is_satisfying() { 0 } else { 1 })
        }
        Command::Audit { instance, out, check } => {
            let p = load_instance(&instance)?;
            if let Some(path) = check {
                let cert = GapCertificate::from_json(&read(&path)?).context("parsing certificate")?;
                match check_certificate(&p, &cert) {
                    Verdict::Accept => {
                        println!("ACCEPT");
                        Ok(0)
                    }
                    Verdict::Reject {
                        step,
                        lemma,
                        link,
                        reason,
                    } => {
                        let at = |x: Option<usize>| x.map_or("-".to_string(), |i| i.to_string());
                        println!("REJECT step={step:?} lemma={} link={} reason={reason}", at(lemma), at(link));
                        Ok(1)
                    }
                }
            } else {
                let r = slac(&p);
                if r.consistent {
                    println!("NO-CERTIFICATE SLAC-consistent");
                    return Ok(1);
                }
                let cert = build_certificate(&p, &r)?;
                let verdict = check_certificate(&p, &cert);
                emit(out.as_deref(), &cert.to_json())?;
                if out.is_some() {
                    println!("CERTIFICATE lemmas={} self-check={}", cert.lemmas.len(), if verdict.is_accept() { "ACCEPT" } else { "REJECT" });
                }
                Ok(if verdict.is_accept() { 0 } else { 1 })
            }
        }
        Command::Poly { instance, rel } => {
            let p = load_instance(&instance)?;
            let r = p.language().get(&rel).with_context(|| format!("unknown relation {rel:?}"))?;
            println!("{}", relation_polynomial(r));
            Ok(0)
        }
        Command::Reduce { step } => reduce(step),
        Command::Gen { kind } => {
            match kind {
                GenCmd::MagicSquare { out } => emit(out.as_deref(), &magic_square().to_json())?,
                GenCmd::Pauli { out } => emit(out.as_deref(), &pauli_fixture().to_json())?,
                GenCmd::Linsys { p, file, out } => {
                    let sys = LinearSystem::parse(p, &read(&file)?)?;
                    emit(out.as_deref(), &linear_system_instance(&sys)?.to_json())?;
                }
                GenCmd::Random {
                    lang,
                    vars,
                    constraints,
                    out,
                } => {
                    let (_, language) = gap_instances::bounded_width_languages()
                        .into_iter()
                        .find(|(name, _)| *name == lang)
                        .with_context(|| format!("unknown language {lang:?}"))?;
                    if vars == 0 {
                        bail!("--vars must be positive");
                    }
                    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
                    emit(out.as_deref(), &random_instance(&language, vars, constraints, &mut rng).to_json())?;
                }
            }
            Ok(0)
        }
    }
}

fn reduce(step: ReduceCmd) -> Result<u8> {
    let (io, output, transport): (ReduceIo, Instance, Box<dyn Fn(&OperatorAssignment) -> Result<OperatorAssignment>>) =
        match step {
            ReduceCmd::Gadget { io, rel, formula } => {
                let p = load_instance(&io.instance)?;
                let phi = PPFormula::from_json(&read(&formula)?)?;
                let out = gadgetize(&p, &rel, &phi)?;
                let t = move |ops: &OperatorAssignment| Ok(lift_gadget_assignment(&p, &rel, &phi, ops, DEFAULT_TOL)?);
                (io, out, Box::new(t))
            }
            ReduceCmd::Collapse { io } => {
                let p = load_instance(&io.instance)?;
                let out = collapse_equalities(&p);
                let vars = out.variables().to_vec();
                (io, out, Box::new(move |ops| Ok(restrict_assignment(ops, &vars)?)))
            }
            ReduceCmd::Commgadget { io, add_rt } => {
                let mut p = load_instance(&io.instance)?;
                if add_rt && p.language().get(reductions::RT).is_none() {
                    p = Instance::new(with_rt(p.language()), p.variables().to_vec(), p.constraints().to_vec())?;
                }
                let out = add_commutativity_gadget(&p)?;
                (io, out, Box::new(|ops| Ok(ops.clone())))
            }
            ReduceCmd::Core { io } => {
                let p = load_instance(&io.instance)?;
                let c = core(p.language())?;
                let out = core_instance(&p, &c)?;
                let t = OpTransport::new(c.retraction())?;
                (io, out, Box::new(move |ops| Ok(t.apply(ops)?)))
            }
            ReduceCmd::Constants { io, constants } => {
                let p = load_instance(&io.instance)?;
                let names: Vec<&str> = constants.iter().map(String::as_str).collect();
                let out = constants_reduction(&p, &names)?;
                let d = p.d();
                (io, out, Box::new(move |ops| Ok(constants_assignment(ops, d)?)))
            }
            ReduceCmd::Restrict { io, d, subset } => {
                let p = load_instance(&io.instance)?;
                let b: ValueSet = subset.iter().copied().collect();
                if b.len() != subset.len() || subset.iter().any(|&k| k >= d) {
                    bail!("--subset must list distinct elements below --d");
                }
                let (out, t) = restrict_transport(&p, &subalgebra_map(b, d)?)?;
                (io, out, Box::new(move |ops| Ok(t.apply(ops)?)))
            }
            ReduceCmd::Factor { io, classes } => {
                let parsed: Vec<Vec<usize>> = classes
                    .split(';')
                    .map(|c| c.split(',').map(|k| k.trim().parse::<usize>()).collect::<Result<_, _>>())
                    .collect::<Result<_, _>>()
                    .context("parsing --classes")?;
                let d = parsed.iter().map(Vec::len).sum();
                let theta = Congruence::new(d, parsed)?;
                let p = load_instance(&io.instance)?;
                let (out, t) = factor_transport(&p, &theta)?;
                (io, out, Box::new(move |ops| Ok(t.apply(ops)?)))
            }
        };
    emit(io.out.as_deref(), &output.to_json())?;
    if let Some(paths) = &io.transport_ops {
        let ops = load_ops(&paths[0])?;
        let moved = transport(&ops)?;
        emit(Some(&paths[1]), &moved.to_json())?;
        if io.out.is_some() {
            println!("transported {} operators of dimension {}", moved.assign.len(), moved.dim);
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
