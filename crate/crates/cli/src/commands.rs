//! Subcommand implementations.

use std::io::Write;
use std::path::Path;

use chfif::basis::{BasisRecord, ScalingBasis};
use chfif::eval::refine;
use chfif::ifs::SystemSpec;
use chfif::report::{verify, Check, ReportOptions, VerificationReport};
use chfif::transform::{project, synthesize, FilterBank, MultilevelCoefficients, PROJECTION_DEPTH};
use chfif::wavelet::{jacobian_nullity, max_abs, sample_psi, solve_wavelets, Seed, SolveOptions, WaveletSolution, WaveletSystem};
use serde::de::DeserializeOwned;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::{Metadata, Resolved};
use crate::error::{CliError, EXIT_FAILURE};
use crate::{Cli, Command, Format, TransformCommand, WaveletsCommand};

/// Default depth for `sample --system`.
pub const SAMPLE_DEPTH: u32 = 4;
/// Default depth for `sample --wavelets`.
pub const PSI_DEPTH: u32 = 6;
/// Default acceptance threshold of `wavelets verify`.
pub const TABLE_TOL: f64 = 5e-3;

struct Ctx<'a> {
    cli: &'a Cli,
    cfg: Resolved,
    name: &'static str,
    inputs: Vec<String>,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

pub fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let cfg = Resolved::from_args(&cli.global)?;
    let name = match &cli.command {
        Command::BuildBasis => "build-basis",
        Command::Gram { .. } => "gram",
        Command::VerifyBasis { .. } => "verify-basis",
        Command::Wavelets(WaveletsCommand::Solve { .. }) => "wavelets solve",
        Command::Wavelets(WaveletsCommand::Verify { .. }) => "wavelets verify",
        Command::Wavelets(WaveletsCommand::Table) => "wavelets table",
        Command::Sample { .. } => "sample",
        Command::Transform(TransformCommand::Decompose { .. }) => "transform decompose",
        Command::Transform(TransformCommand::Reconstruct { .. }) => "transform reconstruct",
        Command::Report => "report",
    };
    let mut ctx = Ctx {
        cli,
        cfg,
        name,
        inputs: Vec::new(),
        out,
        err,
    };
    match &cli.command {
        Command::BuildBasis => build_basis(&mut ctx),
        Command::Gram { basis } => gram(&mut ctx, basis.as_deref()),
        Command::VerifyBasis { basis } => verify_basis(&mut ctx, basis.as_deref()),
        Command::Wavelets(WaveletsCommand::Solve { basis }) => wavelets_solve(&mut ctx, basis.as_deref()),
        Command::Wavelets(WaveletsCommand::Verify { solution, basis, .. }) => wavelets_verify(&mut ctx, solution.as_deref(), basis.as_deref()),
        Command::Wavelets(WaveletsCommand::Table) => {
            let doc = fields([("wavelets", to_value(&WaveletSolution::published_table()))]);
            ctx.write_json(doc)?;
            Ok(0)
        }
        Command::Sample { system, wavelets, basis } => sample(&mut ctx, system.as_deref(), wavelets.as_deref(), basis.as_deref()),
        Command::Transform(TransformCommand::Decompose {
            input,
            basis,
            wavelets,
            levels,
            level,
        }) => decompose(&mut ctx, input, basis.as_deref(), wavelets, *levels, *level),
        Command::Transform(TransformCommand::Reconstruct { input, basis, wavelets }) => {
            reconstruct(&mut ctx, input, basis.as_deref(), wavelets)
        }
        Command::Report => report(&mut ctx),
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("artifact serializes")
}

fn fields<const K: usize>(items: [(&str, Value); K]) -> Map<String, Value> {
    items.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

impl Ctx<'_> {
    fn format(&self) -> Option<Format> {
        self.cli.global.format
    }

    fn metadata(&self) -> Metadata {
        Metadata::new(self.name, &self.cfg, &json!(self.inputs))
    }

    /// Reads a JSON artifact, accepting either the bare value or a document
    /// holding it under `key`.
    fn read_json<T: DeserializeOwned>(&mut self, path: &Path, key: &str) -> Result<T, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        self.inputs.push(format!("{:x}", Sha256::digest(&bytes)));
        let mut v: Value = serde_json::from_slice(&bytes).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        if let Some(inner) = v.get_mut(key) {
            v = inner.take();
        }
        serde_json::from_value(v).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }

    fn emit(&mut self, bytes: &[u8]) -> Result<(), CliError> {
        match &self.cfg.output {
            Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::input(format!("{p}: {e}"))),
            None => self.out.write_all(bytes).map_err(CliError::from),
        }
    }

    fn write_json(&mut self, mut doc: Map<String, Value>) -> Result<(), CliError> {
        doc.insert("metadata".into(), to_value(&self.metadata()));
        let mut text = serde_json::to_string_pretty(&doc).expect("artifact serializes");
        text.push('\n');
        self.emit(text.as_bytes())
    }

    /// CSV goes to the output path with the metadata in `<path>.meta.json`,
    /// or to stdout without metadata.
    fn write_csv(&mut self, bytes: Vec<u8>) -> Result<(), CliError> {
        if let Some(p) = self.cfg.output.clone() {
            let meta = serde_json::to_string_pretty(&json!({ "metadata": self.metadata() })).expect("metadata serializes");
            std::fs::write(format!("{p}.meta.json"), meta + "\n")?;
        }
        self.emit(&bytes)
    }

    fn basis(&mut self, path: Option<&Path>) -> Result<ScalingBasis, CliError> {
        let basis = match path {
            Some(p) => {
                let rec: BasisRecord = self.read_json(p, "basis")?;
                ScalingBasis::from_record(&rec)?
            }
            None => ScalingBasis::build(self.cfg.params()?, true)?,
        };
        if let Some(n) = self.cli.global.n {
            if n != basis.n() {
                return Err(CliError::input(format!("--n {n} disagrees with the parameters (N = {})", basis.n())));
            }
        }
        Ok(basis)
    }

    fn solution(&mut self, path: &Path) -> Result<WaveletSolution, CliError> {
        let sol: WaveletSolution = self.read_json(path, "wavelets")?;
        sol.validate()?;
        Ok(sol)
    }

    /// Text summary on stdout plus the JSON artifact at `--output`, or the
    /// JSON alone on stdout with `--format json`.
    fn write_summary(&mut self, text: &str, doc: Map<String, Value>) -> Result<(), CliError> {
        if self.format() == Some(Format::Json) || self.cfg.output.is_some() {
            self.write_json(doc)?;
        }
        if self.format() != Some(Format::Json) || self.cfg.output.is_some() {
            self.out.write_all(text.as_bytes())?;
        }
        Ok(())
    }
}

fn build_basis(ctx: &mut Ctx) -> Result<i32, CliError> {
    let basis = ctx.basis(None)?;
    ctx.write_json(fields([("basis", to_value(&basis.to_record()))]))?;
    Ok(0)
}

fn gram(ctx: &mut Ctx, path: Option<&Path>) -> Result<i32, CliError> {
    let basis = ctx.basis(path)?;
    let sp = basis.space();
    let t = basis.templates();
    let coords = (0..t.count()).map(|k| sp.coords(&t.data(k)).map(|c| c.0)).collect::<Result<Vec<_>, _>>()?;
    let templates: Vec<Vec<f64>> = coords.iter().map(|a| coords.iter().map(|b| sp.inner(a, b)).collect()).collect();
    let translates: Vec<Value> = (-2..=2).map(|l| {
            let g: Vec<Vec<f64>> = basis.translate_gram(l).row_iter().map(|r| r.iter().copied().collect()).collect();
            json!({ "shift": l, "gram": g })
        }).collect();
    let (zeta, eta) = t.zeta_eta(sp)?;
    ctx.write_json(fields([
        ("labels", to_value(&basis.labels())),
        ("template_gram", to_value(&templates)),
        ("translate_gram", Value::Array(translates)),
        ("zeta", to_value(&zeta)),
        ("eta", to_value(&eta)),
    ]))?;
    Ok(0)
}

fn check_line(c: &Check) -> String {
    format!(
        "  {}  {:<40} {:>12.3e}  (tol {:.1e})\n",
        if c.pass { "PASS" } else { "FAIL" },
        c.name,
        c.value,
        c.tolerance
    )
}

fn render(title: &str, rep: &VerificationReport) -> String {
    let mut s = format!("{title}: N = {}\ngating checks\n", rep.n);
    rep.gating().for_each(|c| s.push_str(&check_line(c)));
    if rep.diagnostics().next().is_some() {
        s.push_str("diagnostics (not gating)\n");
        rep.diagnostics().for_each(|c| s.push_str(&check_line(c)));
    }
    s.push_str(if rep.pass { "result: PASS\n" } else { "result: FAIL\n" });
    s
}

fn run_verification(ctx: &mut Ctx, path: Option<&Path>, wavelets: bool) -> Result<i32, CliError> {
    let basis = ctx.basis(path)?;
    let mut opts = ReportOptions {
        wavelets,
        published_comparisons: ctx.cfg.is_published_preset() && path.is_none(),
        ..ReportOptions::default()
    };
    if let Some(seed) = ctx.cfg.seed {
        opts.mra.seed = seed;
    }
    let rep = verify(basis.params(), &opts)?;
    let text = render(ctx.name, &rep);
    ctx.write_summary(&text, fields([("report", to_value(&rep))]))?;
    Ok(if rep.pass { 0 } else { EXIT_FAILURE })
}

fn verify_basis(ctx: &mut Ctx, path: Option<&Path>) -> Result<i32, CliError> {
    run_verification(ctx, path, false)
}

fn report(ctx: &mut Ctx) -> Result<i32, CliError> {
    run_verification(ctx, None, true)
}

fn solve_options(ctx: &Ctx) -> SolveOptions {
    let mut opts = SolveOptions::default();
    if let Some(seed) = ctx.cfg.seed {
        opts.seed = Seed::Random(seed);
    }
    if let Some(tol) = ctx.cfg.tol {
        opts.tol = tol;
    }
    opts
}

fn wavelets_solve(ctx: &mut Ctx, path: Option<&Path>) -> Result<i32, CliError> {
    let basis = ctx.basis(path)?;
    let opts = solve_options(ctx);
    let rep = solve_wavelets(&basis, &opts)?;
    let nr = jacobian_nullity(&basis, &rep.solution, opts.fd_step, 1e-8)?;
    writeln!(
        ctx.err,
        "max residual {:.3e} after {} iterations (start {}), Jacobian rank {} nullity {}",
        rep.max_residual, rep.iterations, rep.start_index, nr.rank, nr.nullity
    )?;
    ctx.write_json(fields([
        ("wavelets", to_value(&rep.solution)),
        ("max_residual", json!(rep.max_residual)),
        ("iterations", json!(rep.iterations)),
        ("start_index", json!(rep.start_index)),
        ("jacobian_rank", json!(nr.rank)),
        ("jacobian_nullity", json!(nr.nullity)),
    ]))?;
    Ok(0)
}

/// Without `--solution` the published table is scored (`--published`).
fn wavelets_verify(ctx: &mut Ctx, solution: Option<&Path>, path: Option<&Path>) -> Result<i32, CliError> {
    let basis = ctx.basis(path)?;
    let sol = match solution {
        Some(p) => ctx.solution(p)?,
        None => WaveletSolution::published_table(),
    };
    let sys = WaveletSystem::new(&basis)?;
    let res = sys.residuals(&sol)?;
    let max = max_abs(&res);
    let tol = ctx.cfg.tol.unwrap_or(TABLE_TOL);
    let pass = max < tol;
    let mut text = String::new();
    let labels = sys.labels();
    let worst = res.iter().zip(&labels).max_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));
    if let Some((v, l)) = worst {
        text.push_str(&format!("largest residual: {l} = {v:.6e}\n"));
    }
    text.push_str(&format!("max residual {max:.6e} (tol {tol:.1e}) {}\n", if pass { "PASS" } else { "FAIL" }));
    let table: Vec<Value> = labels.iter().zip(&res).map(|(l, v)| json!({ "condition": l, "residual": v })).collect();
    ctx.write_summary(
        &text,
        fields([
            ("max_residual", json!(max)),
            ("tolerance", json!(tol)),
            ("pass", json!(pass)),
            ("residuals", Value::Array(table)),
        ]),
    )?;
    Ok(if pass { 0 } else { EXIT_FAILURE })
}

fn sample(ctx: &mut Ctx, system: Option<&Path>, wavelets: Option<&Path>, basis: Option<&Path>) -> Result<i32, CliError> {
    let json_out = ctx.format() == Some(Format::Json);
    match (system, wavelets) {
        (Some(p), _) => {
            let spec: SystemSpec = ctx.read_json(p, "system")?;
            let s = refine(&spec.build()?, ctx.cfg.depth.unwrap_or(SAMPLE_DEPTH))?;
            if json_out {
                ctx.write_json(fields([("samples", to_value(&s))]))?;
            } else {
                let mut buf = Vec::new();
                s.write_csv(&mut buf)?;
                ctx.write_csv(buf)?;
            }
        }
        (None, Some(w)) => {
            let basis = ctx.basis(basis)?;
            let sol = ctx.solution(w)?;
            let s = sample_psi(&sol, &basis, ctx.cfg.depth.unwrap_or(PSI_DEPTH))?;
            if json_out {
                ctx.write_json(fields([("samples", to_value(&s))]))?;
            } else {
                let mut buf = Vec::new();
                s.write_csv(&mut buf)?;
                ctx.write_csv(buf)?;
            }
        }
        (None, None) => return Err(CliError::input("sample needs --system or --wavelets")),
    }
    Ok(0)
}

fn read_signal(ctx: &mut Ctx, path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    ctx.inputs.push(format!("{:x}", Sha256::digest(&bytes)));
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    let headers = r.headers().map_err(|e| CliError::input(format!("{}: {e}", path.display())))?.clone();
    let col = |name: &str, fallback: usize| headers.iter().position(|h| h.trim() == name).unwrap_or(fallback);
    let (cx, cv) = (col("x", 0), col("value", 1));
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let num = |i: usize| -> Result<f64, CliError> {
            let s = rec.get(i).ok_or_else(|| CliError::input(format!("{}: missing column {i}", path.display())))?;
            s.trim().parse().map_err(|_| CliError::input(format!("{}: not a number: {s:?}", path.display())))
        };
        out.push((num(cx)?, num(cv)?));
    }
    Ok(out)
}

fn filter_bank(ctx: &mut Ctx, basis: &ScalingBasis, wavelets: &Path) -> Result<FilterBank, CliError> {
    let sol = ctx.solution(wavelets)?;
    Ok(FilterBank::from_basis(basis, Some(&sol))?)
}

fn decompose(ctx: &mut Ctx, input: &Path, basis: Option<&Path>, wavelets: &Path, levels: usize, level: i32) -> Result<i32, CliError> {
    let signal = read_signal(ctx, input)?;
    let basis = ctx.basis(basis)?;
    let fb = filter_bank(ctx, &basis, wavelets)?;
    let proj = project(&signal, &basis, level, ctx.cfg.depth.unwrap_or(PROJECTION_DEPTH))?;
    for w in &proj.warnings {
        writeln!(ctx.err, "warning: {w}")?;
    }
    let m = fb.multilevel(&proj.coefficients, levels)?;
    ctx.write_json(fields([
        ("levels", json!(levels)),
        ("projection_warnings", to_value(&proj.warnings)),
        ("coefficients", to_value(&m)),
    ]))?;
    Ok(0)
}

fn reconstruct(ctx: &mut Ctx, input: &Path, basis: Option<&Path>, wavelets: &Path) -> Result<i32, CliError> {
    let m: MultilevelCoefficients = ctx.read_json(input, "coefficients")?;
    let basis = ctx.basis(basis)?;
    let fb = filter_bank(ctx, &basis, wavelets)?;
    let c = fb.multilevel_inverse(&m)?;
    if ctx.format() != Some(Format::Csv) {
        ctx.write_json(fields([("coefficients", to_value(&c))]))?;
        return Ok(0);
    }
    let (Some(&lo), Some(&hi)) = (c.scaling.keys().next(), c.scaling.keys().next_back()) else {
        return ctx.write_csv(b"x,value\n".to_vec()).map(|_| 0);
    };
    let n = basis.n() as f64;
    let unit = n.powi(c.level);
    let h = unit / n.powi(4);
    let steps = (((hi - lo + 2) as f64) * n.powi(4)).round() as usize;
    let xs: Vec<f64> = (0..=steps).map(|j| lo as f64 * unit + j as f64 * h).collect();
    let vals = synthesize(&c, &basis, &xs, ctx.cfg.depth.unwrap_or(PROJECTION_DEPTH))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "value"]).map_err(|e| CliError::failure(e.to_string()))?;
    for (x, v) in xs.iter().zip(&vals) {
        w.serialize((x, v)).map_err(|e| CliError::failure(e.to_string()))?;
    }
    let buf = w.into_inner().map_err(|e| CliError::failure(e.to_string()))?;
    ctx.write_csv(buf)?;
    Ok(0)
}
