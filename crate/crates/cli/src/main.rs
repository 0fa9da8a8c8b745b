use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use bundlealg::bundle::{atlas, ConjugacyMode, FlatBundle, DECISION_TOL, DEFAULT_CHARTS};
use bundlealg::io::{BlockJson, BundleJson, MatrixJson, SectionJson, TupleJson};
use bundlealg::isomorphism::{classify_pair, ClassificationReport, ClassifyConfig};
use bundlealg::multidomain::{tuple_pu_equivalent, CommutingTuple, TupleEquivalenceReport, COMMUTING_TOL};
use bundlealg::norms::{complete_norm, export_grid, sup_norm, GridSpec, SupNorm};
use bundlealg::numerics::{haar_unitary, random_phase, UnitaryMatrix, UNITARITY_TOL};
use bundlealg::sections::{default_samples, Section, DEFAULT_K_RANGE};
use bundlealg::Error;
use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

const EXIT_OK: u8 = 0;
const EXIT_INPUT: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_NOT_EQUIVALENT: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "bundlealg",
    version,
    about = "Classify flat unitary bundles over an annulus and their section algebras"
)]
struct Cli {
    #[command(flatten)]
    run: RunConfig,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct RunConfig {
    /// Decision tolerance for conjugacy verdicts.
    #[arg(long, global = true, env = "BUNDLEALG_TOL", default_value_t = DECISION_TOL)]
    tol: f64,
    /// Tolerance for accepting input matrices as unitary.
    #[arg(long, global = true, env = "BUNDLEALG_UNITARITY_TOL", default_value_t = UNITARITY_TOL)]
    unitarity_tol: f64,
    /// Bound on verification residuals.
    #[arg(long, global = true, env = "BUNDLEALG_RESIDUAL_TOL", default_value_t = 1e-9)]
    residual_tol: f64,
    /// Boundary samples per circle.
    #[arg(long, global = true, env = "BUNDLEALG_GRID", default_value_t = 512)]
    grid: usize,
    #[arg(long, global = true, env = "BUNDLEALG_SEED", default_value_t = 0)]
    seed: u64,
    /// Outer radius; a bundle document's own `r1` wins when this is not given.
    #[arg(long, global = true, env = "BUNDLEALG_R1")]
    r1: Option<f64>,
    #[arg(long, global = true, env = "BUNDLEALG_FORMAT", value_enum, default_value_t = Format::Human)]
    format: Format,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Json,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Pu,
    Strict,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Branch {
    Both,
    Equivalent,
    Inequivalent,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide equivalence of two bundles and verify the induced isomorphism.
    Classify {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, env = "BUNDLEALG_MODE", value_enum, default_value_t = Mode::Pu)]
        mode: Mode,
        /// Highest matrix level checked for complete isometry.
        #[arg(long, env = "BUNDLEALG_LEVELS", default_value_t = 3)]
        levels: usize,
        /// Random test sections used for verification.
        #[arg(long, default_value_t = 4)]
        sections: usize,
    },
    /// Decide equivalence of two commuting tuples.
    ClassifyTuple {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Check a section against the concomitant law, multipliers and charts.
    Verify {
        #[arg(long)]
        section: PathBuf,
    },
    /// Sup-norm of a section, or complete norm of a block of sections.
    Norm {
        #[arg(long, required_unless_present = "block", conflicts_with = "block")]
        section: Option<PathBuf>,
        #[arg(long)]
        block: Option<PathBuf>,
        /// Also report the norm of the diagonal amplification at this level.
        #[arg(long, env = "BUNDLEALG_LEVELS", default_value_t = 1)]
        levels: usize,
    },
    /// Write pointwise norms and entry magnitudes over an annulus grid as CSV.
    ExportGrid {
        #[arg(long)]
        section: PathBuf,
        #[arg(long, default_value_t = 16)]
        radial: usize,
        #[arg(long, default_value_t = 64)]
        angular: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded end-to-end run on a constructed equivalent and inequivalent pair.
    Demo {
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, value_enum, default_value_t = Branch::Both)]
        branch: Branch,
        #[arg(long, env = "BUNDLEALG_LEVELS", default_value_t = 2)]
        levels: usize,
    },
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Numerical(_) | Error::InvalidWitness { .. } | Error::FrameMismatch(_) => EXIT_NUMERICAL,
            _ => EXIT_INPUT,
        };
        Self { code, message: e.to_string() }
    }
}

fn context(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |e| {
        let f = Failure::from(e);
        Failure { message: format!("{}: {}", path.display(), f.message), ..f }
    }
}

type CmdResult = Result<u8, Failure>;

impl RunConfig {
    fn validate(&self) -> Result<(), Failure> {
        for (name, v) in [("tol", self.tol), ("unitarity-tol", self.unitarity_tol), ("residual-tol", self.residual_tol)]
        {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Failure::input(format!("--{name} must be a positive number, got {v}")));
            }
        }
        if let Some(r1) = self.r1 {
            if !(r1 > 1.0 && r1.is_finite()) {
                return Err(Failure::input(format!("--r1 must exceed 1, got {r1}")));
            }
        }
        self.grid_spec().validate()?;
        Ok(())
    }

    fn grid_spec(&self) -> GridSpec {
        GridSpec::with_boundary(self.grid)
    }

    fn r1_or(&self, doc: Option<f64>) -> f64 {
        self.r1.or(doc).unwrap_or(2.0)
    }

    fn emit<T: Serialize>(&self, value: &T, human: impl FnOnce(&mut String)) -> Result<(), Failure> {
        let text = match self.format {
            Format::Json => serde_json::to_string_pretty(value).map_err(|e| Failure::input(e.to_string()))? + "\n",
            Format::Human => {
                let mut s = String::new();
                human(&mut s);
                s
            }
        };
        io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::input(e.to_string()))
    }
}

fn read_json(path: &Path) -> Result<serde_json::Value, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: malformed JSON: {e}", path.display())))
}

fn parse_field<T: serde::de::DeserializeOwned>(
    path: &Path,
    value: serde_json::Value,
    what: &str,
) -> Result<T, Failure> {
    serde_json::from_value(value).map_err(|e| Failure::input(format!("{}: invalid {what}: {e}", path.display())))
}

/// A bare matrix, or a bundle document `{ "r1": .., "A": .. }`.
fn load_generator(path: &Path, tol: f64) -> Result<(UnitaryMatrix, Option<f64>), Failure> {
    let value = read_json(path)?;
    let (matrix, r1) = if value.is_object() {
        let doc: BundleJson = parse_field(path, value, "bundle document")?;
        (doc.generator, Some(doc.r1))
    } else {
        let MatrixJson(m) = parse_field(path, value, "matrix")?;
        (m, None)
    };
    let u = UnitaryMatrix::with_tolerance(matrix, tol)
        .map_err(|e| Failure::input(format!("{}: field `A`: {e}", path.display())))?;
    Ok((u, r1))
}

fn load_tuple(path: &Path, tol: f64) -> Result<CommutingTuple, Failure> {
    let value = read_json(path)?;
    if value.get("generators").is_none() {
        return Err(Failure::input(format!("{}: tuple document needs a `generators` field", path.display())));
    }
    let doc: TupleJson = parse_field(path, value, "tuple document")?;
    let gens = doc
        .generators
        .into_iter()
        .enumerate()
        .map(|(i, MatrixJson(m))| {
            UnitaryMatrix::with_tolerance(m, tol)
                .map_err(|e| Failure::input(format!("{}: field `generators[{i}]`: {e}", path.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    CommutingTuple::with_tolerance(gens, COMMUTING_TOL).map_err(context(path))
}

fn load_section(path: &Path, strict: bool) -> Result<Section, Failure> {
    let doc: SectionJson = parse_field(path, read_json(path)?, "section document")?;
    Section::from_json(&doc, strict).map_err(context(path))
}

fn fmt_c(z: Complex64) -> String {
    format!("{:.12}{:+.12}i", z.re, z.im)
}

fn verdict_code(equivalent: bool) -> u8 {
    if equivalent {
        EXIT_OK
    } else {
        EXIT_NOT_EQUIVALENT
    }
}

fn describe_classification(out: &mut String, r: &ClassificationReport) {
    use std::fmt::Write as _;
    let e = &r.equivalence;
    let _ = writeln!(out, "verdict: {}", if e.is_equivalent() { "equivalent" } else { "not equivalent" });
    let _ = writeln!(out, "invariant A: {:?}", e.invariant_a);
    let _ = writeln!(out, "invariant B: {:?}", e.invariant_b);
    let _ = writeln!(out, "invariant gap: {:.3e}", e.gap);
    if let (Some(l), Some(res)) = (e.lambda, e.residual) {
        let _ = writeln!(out, "lambda: {}", fmt_c(l));
        let _ = writeln!(out, "witness residual: {res:.3e}");
    }
    if let Some(v) = &r.verification {
        for (i, d) in v.isometry_deviation.iter().enumerate() {
            let _ = writeln!(out, "isometry deviation, level {}: {d:.3e}", i + 1);
        }
        let _ = writeln!(out, "center residual: {:.3e}", v.center_residual);
        let _ = writeln!(out, "conjugation residual: {:.3e}", v.conjugation_residual);
        let _ = writeln!(out, "concomitant residual of images: {:.3e}", v.concomitant_residual);
        let _ = writeln!(out, "homomorphism residual: {:.3e}", v.homomorphism_residual);
    }
}

fn classify_config(run: &RunConfig, mode: Mode, levels: usize, sections: usize) -> ClassifyConfig {
    ClassifyConfig {
        tol: run.tol,
        mode: match mode {
            Mode::Pu => ConjugacyMode::Projective,
            Mode::Strict => ConjugacyMode::Strict,
        },
        levels,
        seed: run.seed,
        grid: run.grid_spec(),
        sections,
        ..ClassifyConfig::default()
    }
}

fn cmd_classify(run: &RunConfig, a: &Path, b: &Path, mode: Mode, levels: usize, sections: usize) -> CmdResult {
    let (ga, ra) = load_generator(a, run.unitarity_tol)?;
    let (gb, rb) = load_generator(b, run.unitarity_tol)?;
    if ga.dim() != gb.dim() {
        return Err(Failure::input(format!(
            "{} is {}x{} but {} is {}x{}",
            a.display(),
            ga.dim(),
            ga.dim(),
            b.display(),
            gb.dim(),
            gb.dim()
        )));
    }
    if run.r1.is_none() && ra.is_some() && rb.is_some() && ra != rb {
        return Err(Failure::input("the two bundle documents disagree on `r1`"));
    }
    let r1 = run.r1_or(ra.or(rb));
    let report = classify_pair(&ga, &gb, r1, &classify_config(run, mode, levels, sections))?;
    run.emit(&report, |s| describe_classification(s, &report))?;
    Ok(verdict_code(report.is_equivalent()))
}

fn cmd_classify_tuple(run: &RunConfig, a: &Path, b: &Path) -> CmdResult {
    let ta = load_tuple(a, run.unitarity_tol)?;
    let tb = load_tuple(b, run.unitarity_tol)?;
    let report: TupleEquivalenceReport = tuple_pu_equivalent(&ta, &tb, run.tol)?;
    run.emit(&report, |s| {
        use std::fmt::Write as _;
        let _ = writeln!(s, "verdict: {}", if report.is_equivalent() { "equivalent" } else { "not equivalent" });
        let _ = writeln!(s, "joint spectrum gap: {:.3e}", report.gap);
        for (i, (l, r)) in report.lambdas.iter().zip(&report.residuals).enumerate() {
            let _ = writeln!(s, "generator {}: lambda {}, residual {r:.3e}", i + 1, fmt_c(*l));
        }
    })?;
    Ok(verdict_code(report.is_equivalent()))
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    value: f64,
    bound: f64,
    pass: bool,
}

#[derive(Serialize)]
struct VerifyReport {
    pass: bool,
    checks: Vec<Check>,
}

fn annulus_points(r1: f64) -> Vec<Complex64> {
    let mut pts = Vec::new();
    for i in 0..5 {
        let r = 1.0 + (r1 - 1.0) * i as f64 / 4.0;
        for j in 0..16 {
            pts.push(Complex64::from_polar(r, 0.1 + std::f64::consts::TAU * j as f64 / 16.0));
        }
    }
    pts
}

fn cmd_verify(run: &RunConfig, path: &Path) -> CmdResult {
    let section = load_section(path, false)?;
    let bundle = section.bundle();
    let samples = default_samples(bundle);
    let charts = atlas(&bundle.annulus(), DEFAULT_CHARTS)?;
    let mult = section.multiplier_residual(&samples);
    let bound = run.residual_tol;
    let checks = vec![
        ("frame residual", section.frame_residual()),
        ("exponent conformance", section.exponent_conformance()),
        ("concomitant residual", section.concomitant_residual(&samples, DEFAULT_K_RANGE)),
        ("multiplier residual", mult.residual),
        ("multiplier modulus defect", mult.modulus_defect),
        ("chart consistency", section.chart_consistency(&charts, &annulus_points(bundle.annulus().r1()))?),
    ]
    .into_iter()
    .map(|(name, value)| Check { name, value, bound, pass: value <= bound })
    .collect::<Vec<_>>();
    let report = VerifyReport { pass: checks.iter().all(|c| c.pass), checks };
    run.emit(&report, |s| {
        use std::fmt::Write as _;
        let _ = writeln!(s, "{:<28} {:>12} {:>10}  status", "check", "value", "bound");
        for c in &report.checks {
            let _ = writeln!(
                s,
                "{:<28} {:>12.3e} {:>10.1e}  {}",
                c.name,
                c.value,
                c.bound,
                if c.pass { "ok" } else { "FAIL" }
            );
        }
    })?;
    Ok(if report.pass { EXIT_OK } else { EXIT_NUMERICAL })
}

#[derive(Serialize)]
struct NormReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    sup: Option<SupNorm>,
    level: usize,
    complete: f64,
}

fn diagonal_amplification(section: &Section, level: usize) -> Vec<Vec<Section>> {
    let zero = Section::zero(section.bundle());
    (0..level).map(|p| (0..level).map(|q| if p == q { section.clone() } else { zero.clone() }).collect()).collect()
}

fn cmd_norm(run: &RunConfig, section: Option<&Path>, block: Option<&Path>, levels: usize) -> CmdResult {
    let grid = run.grid_spec();
    let report = if let Some(path) = block {
        let doc: BlockJson = parse_field(path, read_json(path)?, "block document")?;
        let mut bundle: Option<Arc<FlatBundle>> = None;
        let mut rows = Vec::with_capacity(doc.blocks.len());
        for row in &doc.blocks {
            let mut out = Vec::with_capacity(row.len());
            for s in row {
                let b = match &bundle {
                    Some(b) => b.clone(),
                    None => Arc::new(FlatBundle::from_json(&s.bundle).map_err(context(path))?),
                };
                let sec = Section::from_json_in(b.clone(), s, true).map_err(context(path))?;
                bundle = Some(b);
                out.push(sec);
            }
            rows.push(out);
        }
        NormReport { sup: None, level: rows.len(), complete: complete_norm(&rows, &grid).map_err(context(path))? }
    } else {
        let path = section.expect("clap requires --section or --block");
        if levels == 0 {
            return Err(Failure::input("--levels must be at least 1"));
        }
        let s = load_section(path, true)?;
        let sup = sup_norm(&s, &grid)?;
        let complete = complete_norm(&diagonal_amplification(&s, levels), &grid)?;
        NormReport { sup: Some(sup), level: levels, complete }
    };
    run.emit(&report, |out| {
        use std::fmt::Write as _;
        if let Some(s) = &report.sup {
            let _ = writeln!(out, "sup norm: {:.15}", s.value);
            let _ = writeln!(
                out,
                "refinement delta: {:.3e} after {} refinements ({} samples per circle)",
                s.delta, s.refinements, s.samples
            );
        }
        let _ = writeln!(out, "complete norm, level {}: {:.15}", report.level, report.complete);
    })?;
    Ok(EXIT_OK)
}

fn cmd_export_grid(path: &Path, radial: usize, angular: usize, out: Option<&Path>) -> CmdResult {
    if radial < 2 || angular == 0 {
        return Err(Failure::input("--radial must be at least 2 and --angular at least 1"));
    }
    let section = load_section(path, true)?;
    let io_fail = |e: io::Error| Failure::input(e.to_string());
    match out {
        Some(p) => {
            let mut f = io::BufWriter::new(fs::File::create(p).map_err(io_fail)?);
            export_grid(&section, radial, angular, &mut f).map_err(io_fail)?;
            f.flush().map_err(io_fail)?;
        }
        None => {
            let mut lock = io::stdout().lock();
            export_grid(&section, radial, angular, &mut lock).map_err(io_fail)?;
        }
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct DemoPair {
    #[serde(rename = "B")]
    b: UnitaryMatrix,
    report: ClassificationReport,
}

#[derive(Serialize)]
struct DemoReport {
    seed: u64,
    n: usize,
    r1: f64,
    #[serde(rename = "A")]
    a: UnitaryMatrix,
    #[serde(skip_serializing_if = "Option::is_none")]
    equivalent: Option<DemoPair>,
    #[serde(skip_serializing_if = "Option::is_none")]
    inequivalent: Option<DemoPair>,
}

fn cmd_demo(run: &RunConfig, n: usize, branch: Branch, levels: usize) -> CmdResult {
    if n == 0 {
        return Err(Failure::input("--n must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    let r1 = run.r1_or(None);
    let a = haar_unitary(&mut rng, n);
    let u = haar_unitary(&mut rng, n);
    let lambda = random_phase(&mut rng);
    let b = UnitaryMatrix::new(u.conjugate(&(a.matrix() * lambda)))?;
    let c = haar_unitary(&mut rng, n);
    let config = classify_config(run, Mode::Pu, levels, 4);
    let run_pair = |other: UnitaryMatrix| -> Result<DemoPair, Failure> {
        let report = classify_pair(&a, &other, r1, &config)?;
        Ok(DemoPair { b: other, report })
    };
    let equivalent = matches!(branch, Branch::Both | Branch::Equivalent).then(|| run_pair(b)).transpose()?;
    let inequivalent = matches!(branch, Branch::Both | Branch::Inequivalent).then(|| run_pair(c)).transpose()?;
    let report = DemoReport { seed: run.seed, n, r1, a: a.clone(), equivalent, inequivalent };
    run.emit(&report, |s| {
        use std::fmt::Write as _;
        let _ = writeln!(s, "seed {}, n = {n}, r1 = {r1}", run.seed);
        for (name, pair) in
            [("constructed pair B = U(λA)U*", &report.equivalent), ("independent pair", &report.inequivalent)]
        {
            if let Some(p) = pair {
                let _ = writeln!(s, "\n== {name}");
                describe_classification(s, &p.report);
            }
        }
    })?;
    let eq_ok = report.equivalent.as_ref().map(|p| p.report.is_equivalent());
    let ineq_ok = report.inequivalent.as_ref().map(|p| !p.report.is_equivalent());
    Ok(match (eq_ok, ineq_ok) {
        (Some(e), None) => verdict_code(e),
        (None, Some(i)) => verdict_code(!i),
        (Some(true), Some(true)) => EXIT_OK,
        _ => EXIT_NUMERICAL,
    })
}

fn run(cli: Cli) -> CmdResult {
    let run = &cli.run;
    run.validate()?;
    match &cli.command {
        Command::Classify { a, b, mode, levels, sections } => cmd_classify(run, a, b, *mode, *levels, *sections),
        Command::ClassifyTuple { a, b } => cmd_classify_tuple(run, a, b),
        Command::Verify { section } => cmd_verify(run, section),
        Command::Norm { section, block, levels } => cmd_norm(run, section.as_deref(), block.as_deref(), *levels),
        Command::ExportGrid { section, radial, angular, out } => {
            cmd_export_grid(section, *radial, *angular, out.as_deref())
        }
        Command::Demo { n, branch, levels } => cmd_demo(run, *n, *branch, *levels),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { EXIT_OK });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
