//! Command-line front end: validate systems, compute chain components,
//! check and build covers, decompose metric spaces, and run the pipeline
//! experiment.
//!
//! Exit status: 0 on certified success, 1 on a certificate violation (the
//! violation is printed), 2 on usage or parse errors.  Outputs on stdout
//! are deterministic for fixed arguments; wall-clock timings go to stderr.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dadim_core::action::{
    approximate_action, build_action, pipeline_experiment, ActionKind, PipelineParams,
};
use dadim_core::caps::Caps;
use dadim_core::coloring::greedy_color;
use dadim_core::cover::{
    brute_min_cover, poly_growth_cover, refine_cover, transport_cover, union_covers,
    BrickChartProvider, BruteOutcome, ControlFn,
};
use dadim_core::error::Error;
use dadim_core::files;
use dadim_core::geometry::ZdBrickCover;
use dadim_core::metric::{cantor_decompose, validate_decomposition, Rat};
use dadim_core::system::{CoverCheck, Scale};

#[derive(Parser)]
#[command(
    name = "dadim",
    version,
    about = "covers and decompositions for finite partial dynamical systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutFile {
    /// Write the produced artifact to this file as well as stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the partial-action axioms of a system file.
    Validate {
        system: PathBuf,
        /// Word length up to which composition coherence is checked.
        #[arg(long, default_value_t = 4)]
        horizon: u64,
    },
    /// Chain components of a subset at a scale.
    Components {
        system: PathBuf,
        #[arg(long, default_value_t = 1)]
        radius: u64,
        /// Comma-separated point ids; the whole ground set if omitted.
        #[arg(long)]
        subset: Option<String>,
    },
    /// Check a cover file against a scale and cardinality bound.
    CheckCover {
        system: PathBuf,
        cover: PathBuf,
        #[arg(long)]
        radius: u64,
        #[arg(long)]
        bound: u64,
    },
    /// Greedily sort related items into degree-plus-one classes.
    GreedyColor {
        /// File of `item <id>` and `rel <a> <b>` lines.
        relation: PathBuf,
        #[arg(long)]
        degree: usize,
    },
    /// Pull a brick cover of the Cayley graph back through orbit charts.
    Transport {
        system: PathBuf,
        /// Lattice rank of the brick cover.
        #[arg(long)]
        dim: u32,
        #[arg(long, default_value_t = 1)]
        radius: u64,
        #[command(flatten)]
        out: OutFile,
    },
    /// Union scheduled piece covers family-wise and certify the result.
    Union {
        system: PathBuf,
        #[arg(long, default_value_t = 1)]
        radius: u64,
        /// Cover file for each piece, repeatable; the piece is its ground.
        #[arg(long = "piece", required = true)]
        pieces: Vec<PathBuf>,
        /// Constant control value for each piece, repeatable.
        #[arg(long = "control", required = true)]
        controls: Vec<u64>,
        #[command(flatten)]
        out: OutFile,
    },
    /// Cover a polynomially growing system by classes of net balls.
    PolyCover {
        system: PathBuf,
        #[arg(long, default_value_t = 2)]
        radius: u64,
        /// Growth envelope: counts at radius s stay within constant * s^degree.
        #[arg(long)]
        constant: u64,
        #[arg(long)]
        degree: u32,
        #[command(flatten)]
        out: OutFile,
    },
    /// Refine an outer cover through brick charts.
    Refine {
        system: PathBuf,
        outer: PathBuf,
        #[arg(long, default_value_t = 1)]
        radius: u64,
        /// Scale the outer cover is certified at.
        #[arg(long)]
        outer_scale: u64,
        /// Lattice rank of the local brick covers.
        #[arg(long)]
        dim: u32,
        #[command(flatten)]
        out: OutFile,
    },
    /// Exhaustively decide whether a cover with the given shape exists.
    BruteMin {
        system: PathBuf,
        #[arg(long, default_value_t = 1)]
        radius: u64,
        #[arg(long)]
        dim: u32,
        #[arg(long)]
        bound: u64,
    },
    /// Separated decomposition of a finite metric space.
    Decompose {
        space: PathBuf,
        /// Diameter bound, e.g. 1/20.
        #[arg(long)]
        epsilon: String,
        /// Separation factor: same-family sets end up over k * epsilon apart.
        #[arg(long, default_value_t = 15)]
        k: u64,
        /// Doubling constant; estimated greedily if omitted.
        #[arg(long)]
        doubling: Option<u64>,
        #[command(flatten)]
        out: OutFile,
    },
    /// Finite approximating action of a rotation, torus translation or
    /// cyclic translation.
    Approx {
        /// `rot:13/89`, `torus:13/89,17/101` or `cyclic:24`.
        #[arg(long)]
        action: String,
        #[arg(long)]
        epsilon: String,
        #[arg(long, default_value_t = 1)]
        fscale: u64,
        /// Write the approximating system here.
        #[arg(long)]
        out_system: Option<PathBuf>,
        /// Write the sample space here.
        #[arg(long)]
        out_space: Option<PathBuf>,
    },
    /// Run the full experiment: decompose, approximate, build piece
    /// systems, cover, merge, and report with certificates.
    Pipeline {
        /// `rot:13/89`, `torus:5/53,7/59` or `cyclic:24`.
        #[arg(long)]
        action: String,
        #[arg(long, default_value_t = 1)]
        radius: u64,
        #[arg(long)]
        epsilon: Option<String>,
        #[arg(long, default_value_t = 15)]
        k: u64,
        /// Faithfulness word horizon for the piece systems.
        #[arg(long, default_value_t = 6)]
        horizon: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutFile,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &PathBuf) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse {
        line: 0,
        msg: format!("cannot read {}: {e}", path.display()),
    })
}

fn write_file(path: &PathBuf, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::Parse {
        line: 0,
        msg: format!("cannot write {}: {e}", path.display()),
    })
}

fn emit(out: &OutFile, text: &str) -> Result<(), Error> {
    print!("{text}");
    if let Some(path) = &out.out {
        write_file(path, text)?;
    }
    Ok(())
}

fn parse_action(spec: &str) -> Result<ActionKind, Error> {
    let (kind, rest) = spec
        .split_once(':')
        .ok_or_else(|| Error::precondition(format!("bad action spec `{spec}`")))?;
    match kind {
        "rot" => Ok(ActionKind::CircleRotation { angle: files::parse_rational(rest)? }),
        "torus" => {
            let shifts: Result<Vec<Rat>, Error> =
                rest.split(',').map(files::parse_rational).collect();
            Ok(ActionKind::TorusTranslation { shifts: shifts? })
        }
        "cyclic" => {
            let n: u64 = rest
                .parse()
                .map_err(|_| Error::precondition(format!("bad cyclic order `{rest}`")))?;
            Ok(ActionKind::CyclicTranslation { n })
        }
        other => Err(Error::precondition(format!("unknown action kind `{other}`"))),
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let caps = Caps::from_env();
    match cli.command {
        Command::Validate { system, horizon } => {
            let mut sys = files::parse_system(&read(&system)?)?;
            let report = sys.validate(horizon);
            if report.is_valid() {
                println!("valid at horizon {horizon}");
                Ok(ExitCode::SUCCESS)
            } else {
                for violation in &report.violations {
                    println!("violation: {violation:?}");
                }
                Ok(ExitCode::from(1))
            }
        }
        Command::Components { system, radius, subset } => {
            let sys = files::parse_system(&read(&system)?)?;
            let points: BTreeSet<u32> = match subset {
                Some(list) => list
                    .split(',')
                    .map(|t| {
                        t.trim()
                            .parse()
                            .map_err(|_| Error::precondition(format!("bad point id `{t}`")))
                    })
                    .collect::<Result<_, _>>()?,
                None => sys.points().iter().copied().collect(),
            };
            let partition = sys.components(&points, Scale::Finite(radius))?;
            println!("classes {}", partition.classes.len());
            println!("max-cardinality {}", partition.max_cardinality());
            for (i, class) in partition.classes.iter().enumerate() {
                let members = class.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" ");
                println!("class {i}: {members}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::CheckCover { system, cover, radius, bound } => {
            let sys = files::parse_system(&read(&system)?)?;
            let cov = files::parse_cover(&read(&cover)?)?;
            match sys.check_cover(&cov, Scale::Finite(radius), bound)? {
                CoverCheck::Certified(cert) => {
                    println!(
                        "certified scale {} bound {} observed {}",
                        cert.scale, cert.bound, cert.observed
                    );
                    for (f, observed) in cert.per_family_observed.iter().enumerate() {
                        println!("family {f} observed {observed}");
                    }
                    Ok(ExitCode::SUCCESS)
                }
                CoverCheck::Uncovered { point } => {
                    println!("violation: point {point} is not covered");
                    Ok(ExitCode::from(1))
                }
                CoverCheck::ComponentTooBig { family, component, cardinality } => {
                    let members =
                        component.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" ");
                    println!(
                        "violation: family {family} component of cardinality {cardinality}: {members}"
                    );
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::GreedyColor { relation, degree } => {
            let text = read(&relation)?;
            let mut items: Vec<u32> = Vec::new();
            let mut edges: BTreeSet<(u32, u32)> = BTreeSet::new();
            for (lineno, raw) in text.lines().enumerate() {
                let line = lineno + 1;
                let trimmed = raw.trim();
                if trimmed.is_empty() || trimmed.starts_with('#') {
                    continue;
                }
                let mut tokens = trimmed.split_whitespace();
                match tokens.next() {
                    Some("item") => {
                        let id = tokens
                            .next()
                            .and_then(|t| t.parse().ok())
                            .ok_or(Error::Parse { line, msg: "bad item".into() })?;
                        items.push(id);
                    }
                    Some("rel") => {
                        let a = tokens
                            .next()
                            .and_then(|t| t.parse().ok())
                            .ok_or(Error::Parse { line, msg: "bad relation".into() })?;
                        let b = tokens
                            .next()
                            .and_then(|t| t.parse().ok())
                            .ok_or(Error::Parse { line, msg: "bad relation".into() })?;
                        edges.insert((a, b));
                        edges.insert((b, a));
                    }
                    _ => return Err(Error::Parse { line, msg: "unknown directive".into() }),
                }
            }
            items.sort_unstable();
            items.dedup();
            match greedy_color(&items, |a, b| edges.contains(&(*a, *b)), degree) {
                Ok(classes) => {
                    for (i, class) in classes.iter().enumerate() {
                        let members =
                            class.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" ");
                        println!("class {i}: {members}");
                    }
                    Ok(ExitCode::SUCCESS)
                }
                Err(Error::DegreeExceeded { item, degree, max_degree }) => {
                    println!("violation: item {item} has degree {degree} > {max_degree}");
                    Ok(ExitCode::from(1))
                }
                Err(e) => Err(e),
            }
        }
        Command::Transport { system, dim, radius, out } => {
            let sys = files::parse_system(&read(&system)?)?;
            let brick = ZdBrickCover::new(dim, radius)?;
            let (cover, cert) = transport_cover(&brick, &sys, &caps)?;
            eprintln!(
                "certified scale {} observed {} bound {}",
                cert.scale, cert.observed, cert.formula_bound
            );
            emit(&out, &files::serialize_cover(&cover))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Union { system, radius, pieces, controls, out } => {
            if pieces.len() != controls.len() {
                return Err(Error::precondition("one --control per --piece"));
            }
            let sys = files::parse_system(&read(&system)?)?;
            let mut parts = Vec::new();
            for path in &pieces {
                let cover = files::parse_cover(&read(path)?)?;
                parts.push((cover.ground.clone(), cover));
            }
            let control_fns: Vec<ControlFn> =
                controls.iter().map(|&c| ControlFn::Constant(c)).collect();
            let (cover, cert) = union_covers(&sys, &parts, &control_fns, radius, &caps)?;
            eprintln!(
                "certified scale {} observed {} bound {}",
                cert.scale, cert.observed, cert.formula_bound
            );
            emit(&out, &files::serialize_cover(&cover))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::PolyCover { system, radius, constant, degree, out } => {
            let sys = files::parse_system(&read(&system)?)?;
            let poly = poly_growth_cover(&sys, radius, constant, degree, &caps)?;
            eprintln!(
                "classes {} doubling-scale {} observed {} bound {}",
                poly.classes,
                poly.doubling_scale,
                poly.certificate.observed,
                poly.certificate.formula_bound
            );
            emit(&out, &files::serialize_cover(&poly.cover))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Refine { system, outer, radius, outer_scale, dim, out } => {
            let sys = files::parse_system(&read(&system)?)?;
            let outer_cover = files::parse_cover(&read(&outer)?)?;
            let provider = BrickChartProvider { dim, anchor: None, brick_scale: None };
            let refined = refine_cover(
                &sys,
                &outer_cover,
                Scale::Finite(outer_scale),
                &provider,
                radius,
                &caps,
            )?;
            eprintln!(
                "families {} certified scale {} observed {} bound {}",
                refined.cover.families.len(),
                refined.certificate.scale,
                refined.certificate.observed,
                refined.certificate.formula_bound
            );
            emit(&out, &files::serialize_cover(&refined.cover))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::BruteMin { system, radius, dim, bound } => {
            let sys = files::parse_system(&read(&system)?)?;
            match brute_min_cover(&sys, radius, dim, bound, &caps)? {
                BruteOutcome::Exists(cover) => {
                    println!("exists");
                    print!("{}", files::serialize_cover(&cover));
                    Ok(ExitCode::SUCCESS)
                }
                BruteOutcome::NotExists => {
                    println!("no cover exists at dim {dim} scale {radius} bound {bound}");
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::Decompose { space, epsilon, k, doubling, out } => {
            let sp = files::parse_space(&read(&space)?)?;
            let eps = files::parse_rational(&epsilon)?;
            let result = cantor_decompose(&sp, eps, k, doubling)?;
            let check = validate_decomposition(&sp, &result.decomposition)?;
            eprintln!(
                "families {} sets {} doubling {} family-bound {} bound-miss {} check {:?}",
                result.decomposition.families.len(),
                result.decomposition.set_count(),
                result.doubling,
                result.family_bound,
                result.bound_miss,
                check
            );
            emit(&out, &files::serialize_decomposition(&result.decomposition))?;
            if check.is_certified() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
        Command::Approx { action, epsilon, fscale, out_system, out_space } => {
            let kind = parse_action(&action)?;
            let model = build_action(kind, 2 * fscale)?;
            let eps = files::parse_rational(&epsilon)?;
            let approx = approximate_action(&model, fscale, eps)?;
            println!(
                "grid {:?} density {} epsilon {} equivariance-error 0",
                approx.dims, approx.density, approx.epsilon
            );
            if let Some(path) = out_system {
                write_file(&path, &files::serialize_system(&approx.system(1)))?;
            }
            if let Some(path) = out_space {
                write_file(&path, &files::serialize_space(&approx.space))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Pipeline { action, radius, epsilon, k, horizon, seed, out } => {
            let kind = parse_action(&action)?;
            let params = PipelineParams {
                scale: radius,
                epsilon: epsilon.as_deref().map(files::parse_rational).transpose()?,
                separation_factor: k,
                word_horizon: horizon,
                poly_radius: 2,
                seed,
            };
            let report = pipeline_experiment(kind, &params, &caps)?;
            emit(&out, &report.render())?;
            eprint!("{}", report.render_timings());
            if report.final_certificate.holds() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
    }
}
