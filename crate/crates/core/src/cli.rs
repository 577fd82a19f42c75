//! The `dsem` command line.
//!
//! Exit codes: 0 success or check passed, 1 check failed, 2 usage or format error,
//! 3 enumeration budget exceeded.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::error::{Budget, Error, Result};
use crate::gplp::{
    check_commuting_square, check_trace_functoriality, induced_dist, induced_marginal, reduct_family, GeneralizedPlp,
    Strategy,
};
use crate::measures::{check_projective, format_rational, free_dist, free_prob, parse_rational, Dist, Family, TableFamily, WeightFn};
use crate::relational::{Signature, World};
use crate::rules::{apply_program, parse_program};
use crate::sip::{
    check_essential_asymmetry, check_ip, check_sip_direct, fit_params, sip_family, sip_prob, SipParams, SipSampler,
};
use crate::synth::{synthesize, verify_global, verify_synthesis, VerifyMode};

#[derive(Parser, Debug)]
#[command(name = "dsem", version, about = "Exact distribution semantics for probabilistic logic programs")]
struct Cli {
    /// Largest number of ground atoms an exhaustive enumeration may range over.
    #[arg(long, global = true, default_value_t = Budget::DEFAULT_ATOMS)]
    budget: u32,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Perfect model of a rule program on a world over its free signature.
    Eval {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        world: String,
        #[arg(long)]
        n: usize,
    },
    /// Free product distributions.
    #[command(subcommand)]
    Free(FreeCmd),
    /// Induced distribution over the program's full signature, as a dump.
    Induced {
        #[arg(long)]
        plp: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "auto")]
        strategy: Strategy,
    },
    /// Induced distribution marginalized to the target signature, as a dump.
    Reduct {
        #[arg(long)]
        plp: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "auto")]
        strategy: Strategy,
    },
    /// Checkers; the first output line is `PASS` or `FAIL <witness>`.
    #[command(subcommand)]
    Check(CheckCmd),
    /// SIP parameter files.
    #[command(subcommand)]
    Sip(SipCmd),
    /// Compile SIP parameters into a PLP bundle.
    Synth {
        #[arg(long)]
        params: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Where to write the plan report (default: standard output).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Check a bundle against the parameters it was synthesized from.
    Verify {
        #[arg(long)]
        plp: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[arg(long, conflicts_with = "global", required_unless_present = "global")]
        local: bool,
        #[arg(long)]
        global: Option<usize>,
    },
}

#[derive(Subcommand, Debug)]
enum FreeCmd {
    Prob {
        #[command(flatten)]
        free: FreeArgs,
        #[arg(long)]
        world: String,
        #[arg(long)]
        n: usize,
    },
    Dist {
        #[command(flatten)]
        free: FreeArgs,
        #[arg(long)]
        n: usize,
    },
}

#[derive(Args, Debug)]
struct FreeArgs {
    /// Signature, e.g. `P/1 E/2`.
    #[arg(long)]
    sig: String,
    /// Weights, e.g. `P=1/3,E=1/2`.
    #[arg(long)]
    weights: String,
}

/// Where a family comes from.
#[derive(Args, Debug)]
struct Source {
    /// Reduct family of a PLP bundle.
    #[arg(long, group = "source")]
    plp: Option<PathBuf>,
    /// Family constructed from SIP parameters.
    #[arg(long, group = "source")]
    params: Option<PathBuf>,
    /// Dist dumps for n = 1, 2, … in order (needs `--sig`).
    #[arg(long, group = "source", num_args = 1..)]
    dumps: Vec<PathBuf>,
    #[arg(long, requires = "dumps")]
    sig: Option<String>,
}

#[derive(Subcommand, Debug)]
enum CheckCmd {
    /// Rule expansion commutes with restrictions and permutations.
    Square {
        #[arg(long)]
        plp: PathBuf,
        #[arg(long, default_value_t = 3)]
        max_n: usize,
    },
    /// Equal g-traces of inputs give equal g-traces of outputs.
    Trace {
        #[arg(long)]
        plp: PathBuf,
        #[arg(long, default_value_t = 3)]
        max_n: usize,
        #[arg(long, default_value_t = 1)]
        g: usize,
    },
    Projective {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 3)]
        max_n: usize,
    },
    Sip {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Largest number of literals per conjunction.
        #[arg(long, default_value_t = 2)]
        literals: usize,
    },
    Ip {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        literals: usize,
    },
    /// Essential asymmetry; FAIL means asymmetric.
    Asym {
        #[command(flatten)]
        source: Source,
    },
}

#[derive(Subcommand, Debug)]
enum SipCmd {
    /// Validate parameters, fill orbits, and write them in canonical form.
    Build {
        #[arg(long)]
        params: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    Prob {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        world: String,
        #[arg(long)]
        n: usize,
    },
    /// Parameters reproducing a family, if it is SIP.
    Fit {
        #[command(flatten)]
        source: Source,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    Sample {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
}

/// Result of one invocation.
#[derive(Debug, Default)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Budget { .. } => 3,
        Error::NotRepresentable(_) => 1,
        _ => 2,
    }
}

pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Outcome { code, stdout: text, ..Default::default() }
            } else {
                Outcome { code, stderr: text, ..Default::default() }
            };
        }
    };
    if let Some(j) = cli.jobs {
        // a second call in one process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global();
    }
    let mut out = Outcome::default();
    match dispatch(&cli, &mut out) {
        Ok(passed) => out.code = if passed { 0 } else { 1 },
        Err(e) => {
            out.code = exit_code(&e);
            if matches!(e, Error::NotRepresentable(_)) {
                let _ = writeln!(out.stdout, "FAIL {e}");
            }
            let _ = writeln!(out.stderr, "error: {e}");
        }
    }
    out
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn load_plp(path: &Path) -> Result<GeneralizedPlp> {
    GeneralizedPlp::from_json(&read(path)?)
}

fn load_params(path: &Path) -> Result<SipParams> {
    SipParams::from_json(&read(path)?)
}

fn parse_weights(text: &str) -> Result<WeightFn> {
    let pairs = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("weight `{kv}` is not of the form NAME=p/q")))?;
            Ok((k.trim().to_string(), parse_rational(v.trim())?))
        })
        .collect::<Result<Vec<_>>>()?;
    WeightFn::strict(pairs)
}

fn family(src: &Source, budget: Budget) -> Result<Box<dyn Family + Send>> {
    if let Some(p) = &src.plp {
        return Ok(Box::new(reduct_family(&load_plp(p)?)));
    }
    if let Some(p) = &src.params {
        let mut f = sip_family(&load_params(p)?)?;
        f.budget = budget;
        return Ok(Box::new(f));
    }
    if !src.dumps.is_empty() {
        let sig = Arc::new(Signature::parse(src.sig.as_deref().unwrap_or_default())?);
        let dists = src
            .dumps
            .iter()
            .enumerate()
            .map(|(i, p)| Dist::parse_dump(&read(p)?, sig.clone(), i + 1))
            .collect::<Result<Vec<_>>>()?;
        return Ok(Box::new(TableFamily::new(sig, dists)?));
    }
    Err(Error::Format("no family given: use --plp, --params or --dumps".into()))
}

/// Prints a checker report and returns whether it passed.
fn report(out: &mut Outcome, passed: bool, text: impl std::fmt::Display) -> bool {
    let _ = writeln!(out.stdout, "{}", text.to_string().trim_end());
    passed
}

fn dispatch(cli: &Cli, out: &mut Outcome) -> Result<bool> {
    let budget = Budget::new(cli.budget);
    match &cli.cmd {
        Cmd::Eval { program, world, n } => {
            let p = parse_program(&read(program)?)?;
            let w = World::parse(world, p.free_signature().clone(), *n)?;
            let _ = writeln!(out.stdout, "{}", apply_program(&p, &w)?);
        }
        Cmd::Free(FreeCmd::Prob { free, world, n }) => {
            let sig = Signature::parse(&free.sig)?;
            let w = World::parse(world, Arc::new(sig), *n)?;
            let _ = writeln!(out.stdout, "{}", format_rational(&free_prob(&parse_weights(&free.weights)?, &w)?));
        }
        Cmd::Free(FreeCmd::Dist { free, n }) => {
            let sig = Arc::new(Signature::parse(&free.sig)?);
            out.stdout.push_str(&free_dist(&parse_weights(&free.weights)?, &sig, *n, budget)?.dump());
        }
        Cmd::Induced { plp, n, strategy } => {
            out.stdout.push_str(&induced_dist(&load_plp(plp)?, *n, *strategy, budget)?.dump());
        }
        Cmd::Reduct { plp, n, strategy } => {
            let plp = load_plp(plp)?;
            let target = plp.target().clone();
            out.stdout.push_str(&induced_marginal(&plp, *n, &target, *strategy, budget)?.dump());
        }
        Cmd::Check(c) => return check(c, budget, out),
        Cmd::Sip(c) => return sip(c, budget, out),
        Cmd::Synth { params, output, report: rpath } => {
            let plan = synthesize(&load_params(params)?)?;
            write_file(output, &plan.plp.to_json())?;
            match rpath {
                Some(r) => write_file(r, &plan.report())?,
                None => out.stdout.push_str(&plan.report()),
            }
        }
        Cmd::Verify { plp, params, local, global } => {
            let bundle = load_plp(plp)?;
            let params = load_params(params)?;
            let rep = if *local {
                let plan = synthesize(&params)?;
                if plan.plp.to_json() != bundle.to_json() {
                    return Ok(report(
                        out,
                        false,
                        "FAIL bundle differs from the synthesis of these parameters; local verification needs the synthesized plan",
                    ));
                }
                verify_synthesis(&plan, &params, VerifyMode::Local)?
            } else {
                verify_global(&bundle, &params, global.expect("clap requires one mode"), budget)?
            };
            return Ok(report(out, rep.passed(), &rep));
        }
    }
    Ok(true)
}

fn check(c: &CheckCmd, budget: Budget, out: &mut Outcome) -> Result<bool> {
    match c {
        CheckCmd::Square { plp, max_n } => {
            let r = check_commuting_square(&load_plp(plp)?, *max_n, budget)?;
            Ok(report(out, r.passed(), &r))
        }
        CheckCmd::Trace { plp, max_n, g } => {
            let r = check_trace_functoriality(&load_plp(plp)?, *max_n, *g, budget)?;
            Ok(report(out, r.passed(), &r))
        }
        CheckCmd::Projective { source, max_n } => {
            let r = check_projective(&family(source, budget)?, *max_n)?;
            Ok(report(out, r.passed(), &r))
        }
        CheckCmd::Sip { source, n, literals } => {
            let r = check_sip_direct(&family(source, budget)?, *n, *literals)?;
            Ok(report(out, r.passed(), &r))
        }
        CheckCmd::Ip { source, n, literals } => {
            let r = check_ip(&family(source, budget)?, *n, *literals)?;
            Ok(report(out, r.passed(), &r))
        }
        CheckCmd::Asym { source } => match check_essential_asymmetry(&family(source, budget)?)? {
            Some(w) => Ok(report(out, false, format!("FAIL essentially asymmetric: {w}"))),
            None => Ok(report(out, true, "PASS\nnot essentially asymmetric")),
        },
    }
}

fn sip(c: &SipCmd, budget: Budget, out: &mut Outcome) -> Result<bool> {
    match c {
        SipCmd::Build { params, output } => {
            let mut p = load_params(params)?;
            p.orbit_fill();
            let v = p.validate();
            let passed = report(out, v.passed(), &v);
            if passed {
                match output {
                    Some(o) => write_file(o, &p.to_json())?,
                    None => out.stdout.push_str(&p.to_json()),
                }
            }
            Ok(passed)
        }
        SipCmd::Prob { params, world, n } => {
            let p = load_params(params)?;
            let w = World::parse(world, p.signature().clone(), *n)?;
            let _ = writeln!(out.stdout, "{}", format_rational(&sip_prob(&p, &w)?));
            Ok(true)
        }
        SipCmd::Fit { source, output } => {
            let p = fit_params(&family(source, budget)?)?;
            match output {
                Some(o) => write_file(o, &p.to_json())?,
                None => out.stdout.push_str(&p.to_json()),
            }
            Ok(true)
        }
        SipCmd::Sample { params, n, seed, count } => {
            let p = load_params(params)?;
            let sampler = SipSampler::new(&p)?;
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(*seed);
            for _ in 0..*count {
                let _ = writeln!(out.stdout, "{}", sampler.sample_with(*n, &mut rng)?);
            }
            Ok(true)
        }
    }
}
