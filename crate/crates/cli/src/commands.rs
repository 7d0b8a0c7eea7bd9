use crate::{Command, Format, Options};
use polystab::affine::AffineFunction;
use polystab::fibration::{build_fiber_model, verify_identities};
use polystab::functionals::{futaki, j_norm, j_norm_closed_form, na_convert, NaKind, NaQuantity};
use polystab::integrate::integrate_polynomial;
use polystab::io::{InputError, ProblemInput, ToricProblem};
use polystab::mabuchi::{
    compatible_lift_check, mabuchi_energy, normalized_l1, MabuchiError, MabuchiValue, SymplecticPotential,
};
use polystab::pl::{donaldson_polytope, Classification, PLConvexFunction};
use polystab::poly::Polynomial;
use polystab::polytope::DelzantVerdict;
use polystab::rational::{format_rational, int, serde_rational, Rational};
use polystab::search::{bundle_stability, stability_search, sweep, Norm, StabilityReport};
use polystab::weights::WeightExpr;
use num_traits::Zero;
use serde::Serialize;
use serde_json::json;
use std::fmt::Display;
use std::fs;
use std::path::Path;

pub const USAGE: u8 = 1;
pub const INPUT: u8 = 2;
pub const IDENTITY: u8 = 3;
pub const TOLERANCE: u8 = 4;

/// Residual bounds for the compatible-lift check.
const DET_TOLERANCE: f64 = 1e-4;
const CONSTANT_TOLERANCE: f64 = 1e-5;

pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Display) -> Self {
        Self {
            code,
            message: message.to_string(),
        }
    }
}

fn input_error(e: impl Display) -> Failure {
    Failure::new(INPUT, e)
}

fn mabuchi_failure(e: MabuchiError) -> Failure {
    match e {
        MabuchiError::ToleranceNotReached(_) | MabuchiError::FdInstability(_) => Failure::new(TOLERANCE, e),
        other => Failure::new(INPUT, other),
    }
}

fn load(options: &Options) -> Result<ProblemInput, Failure> {
    let path = options.input.as_ref().ok_or_else(|| Failure::new(USAGE, "--input is required"))?;
    let text = fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    ProblemInput::parse(&text).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn to_json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| input_error(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn emit(options: &Options, name: &str, contents: &str) -> Result<(), Failure> {
    match &options.out {
        Some(dir) => write_file(dir, name, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn emit_report(options: &Options, command: Command, report: &impl Serialize) -> Result<(), Failure> {
    emit(options, &format!("{}.json", command.name()), &to_json(report))
}

pub fn run(command: Command, options: &Options) -> Result<(), Failure> {
    let format = options.format.unwrap_or(if command == Command::Sweep { Format::Csv } else { Format::Json });
    if format == Format::Csv && command != Command::Sweep {
        return Err(Failure::new(USAGE, "--format csv is only available for sweep"));
    }
    if let Some(ns) = &options.resolutions {
        if let Some(n) = ns.iter().find(|&&n| n < 2) {
            return Err(Failure::new(USAGE, format!("--N values must be at least 2, got {n}")));
        }
    }
    if let Some(tol) = options.tol {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Failure::new(USAGE, "--tol must lie in (0, 1)"));
        }
    }
    let input = load(options)?;
    match command {
        Command::Extremal => extremal(&input, options),
        Command::Df => df(&input, options),
        Command::Jnorm => jnorm(&input, options),
        Command::Delzant => delzant(&input, options),
        Command::Identities => identities(&input, options),
        Command::Mabuchi => mabuchi(&input, options),
        Command::Stability => stability(&input, options),
        Command::Sweep => run_sweep(&input, options, format),
    }
}

#[derive(Serialize)]
struct Residual {
    direction: AffineFunction,
    #[serde(with = "serde_rational")]
    value: Rational,
}

fn coordinate_directions(n: usize) -> Vec<AffineFunction> {
    let mut out = vec![AffineFunction::constant_fn(n, int(1))];
    out.extend((0..n).map(|k| AffineFunction::coordinate(n, k)));
    out
}

fn extremal(input: &ProblemInput, options: &Options) -> Result<(), Failure> {
    input.require_bundle().map_err(input_error)?;
    let problem = input.toric_problem().map_err(input_error)?;
    let bundle = problem.bundle.as_ref().expect("bundle input");
    let mut residuals = Vec::new();
    for g in coordinate_directions(problem.polytope.dim()) {
        let value = futaki(&problem.polytope, &problem.density, &problem.weight, &PLConvexFunction::affine(g.clone()))
            .map_err(input_error)?;
        residuals.push(Residual { direction: g, value });
    }
    let report = json!({
        "l_ext": bundle.l_ext,
        "p_bar": bundle.weights.p_bar,
        "density": bundle.weights.density,
        "residuals": residuals,
    });
    emit_report(options, Command::Extremal, &report)?;
    if residuals.iter().any(|r| !r.value.is_zero()) {
        return Err(Failure::new(IDENTITY, "nonzero extremal residual"));
    }
    Ok(())
}

fn weighted_volume(problem: &ToricProblem) -> Rational {
    integrate_polynomial(&problem.polytope, &problem.density).expect("dimensions agree")
}

fn df(input: &ProblemInput, options: &Options) -> Result<(), Failure> {
    let problem = input.toric_problem().map_err(input_error)?;
    let f = input.require_f().map_err(input_error)?;
    let value = futaki(&problem.polytope, &problem.density, &problem.weight, f).map_err(input_error)?;
    let n = problem.polytope.dim();
    let report = match &problem.bundle {
        Some(bundle) => json!({
            "futaki": format_rational(&value),
            "fiber_donaldson_futaki": bundle.transfer.fiber_df_multiplier.scale(&value).value(),
            "bundle_donaldson_futaki": bundle.transfer.bundle_df_multiplier.scale(&value).value(),
        }),
        None => json!({
            "futaki": format_rational(&value),
            "donaldson_futaki": na_convert(&value, NaQuantity::DonaldsonFutaki, NaKind::Toric, n, &weighted_volume(&problem), &int(1)),
        }),
    };
    emit_report(options, Command::Df, &report)
}

fn jnorm(input: &ProblemInput, options: &Options) -> Result<(), Failure> {
    let problem = input.toric_problem().map_err(input_error)?;
    let f = input.require_f().map_err(input_error)?;
    let j = j_norm(&problem.polytope, &problem.density, f).map_err(input_error)?;
    let closed = j_norm_closed_form(&problem.polytope, &problem.density, f).map_err(input_error)?;
    if j != closed {
        emit_report(options, Command::Jnorm, &json!({"j_norm": format_rational(&j), "closed_form": format_rational(&closed)}))?;
        return Err(Failure::new(IDENTITY, "LP and closed-form J-norms differ"));
    }
    let n = problem.polytope.dim();
    let volume = weighted_volume(&problem);
    let mut report = json!({
        "j_norm": format_rational(&j),
        "closed_form": format_rational(&closed),
    });
    match &problem.bundle {
        Some(bundle) => {
            let (_, lower) = bundle.j_norms(f).map_err(input_error)?;
            report["lower_bound"] = json!(format_rational(&lower));
            report["j_na"] = json!(na_convert(&j, NaQuantity::J, NaKind::Compatible, bundle.model.n(), &volume, &bundle.model.vol_b));
        }
        None => {
            report["j_na"] = json!(na_convert(&j, NaQuantity::J, NaKind::Toric, n, &volume, &int(1)));
        }
    }
    emit_report(options, Command::Jnorm, &report)
}

#[derive(Serialize)]
struct DelzantReport {
    #[serde(flatten)]
    verdict: DelzantVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    classification: Option<Classification>,
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    r: Option<String>,
    vertices: Vec<Vec<String>>,
}

fn format_points(points: &[Vec<Rational>]) -> Vec<Vec<String>> {
    points.iter().map(|p| p.iter().map(format_rational).collect()).collect()
}

fn delzant(input: &ProblemInput, options: &Options) -> Result<(), Failure> {
    let base = input.polytope().ok_or_else(|| input_error(InputError::Missing("polytope")))?;
    let report = match &input.f {
        Some(f) => {
            let tc = donaldson_polytope(&base, f, input.r.as_ref().map(|r| r.0.clone())).map_err(input_error)?;
            DelzantReport {
                verdict: tc.verdict.clone(),
                classification: Some(tc.classification),
                r: Some(format_rational(&tc.r)),
                vertices: format_points(tc.polytope.vertices()),
            }
        }
        None => DelzantReport {
            verdict: base.delzant(),
            classification: None,
            r: None,
            vertices: format_points(base.vertices()),
        },
    };
    emit_report(options, Command::Delzant, &report)
}

fn identities(input: &ProblemInput, options: &Options) -> Result<(), Failure> {
    let ranks = input.ranks.as_ref().ok_or_else(|| input_error(InputError::Missing("ranks")))?;
    let model = build_fiber_model(ranks).map_err(input_error)?;
    let f = input.require_f().map_err(input_error)?;
    let l = model.ell();
    let v = input.density.clone().unwrap_or_else(|| Polynomial::one(l));
    let w = WeightExpr::polynomial(input.weight.clone().unwrap_or_else(|| Polynomial::one(l)));
    if f.dim() != l || v.dim() != l || w.dim() != l {
        return Err(input_error(format!("inputs must live in dimension {l}")));
    }
    let report = verify_identities(&model, f, &v, &w).map_err(input_error)?;
    emit_report(options, Command::Identities, &report)?;
    if !report.all_hold() {
        return Err(Failure::new(IDENTITY, "nonzero identity difference"));
    }
    Ok(())
}

#[derive(Serialize)]
struct PotentialEnergy {
    phi: Polynomial,
    energy: MabuchiValue,
    normalized_l1: polystab::logint::LogValue,
}

fn mabuchi(input: &ProblemInput, options: &Options) -> Result<(), Failure> {
    let tol = options.tol.unwrap_or(1e-9);
    let seed = options.seed.unwrap_or(0);
    match &input.ranks {
        Some(ranks) => {
            let model = build_fiber_model(ranks).map_err(input_error)?;
            let l = model.ell();
            let v = input.density.clone().unwrap_or_else(|| Polynomial::one(l));
            let w = WeightExpr::polynomial(input.weight.clone().unwrap_or_else(|| Polynomial::one(l)));
            let phis = input.potentials.clone().unwrap_or_else(|| vec![Polynomial::zero(l)]);
            let mut potentials = Vec::new();
            for phi in phis {
                let u = SymplecticPotential::new(&model.delta, phi).map_err(mabuchi_failure)?;
                u.check_convex(64, seed).map_err(mabuchi_failure)?;
                potentials.push(u);
            }
            let report = compatible_lift_check(&model, &potentials, &v, &w, 20, seed, tol).map_err(mabuchi_failure)?;
            emit_report(options, Command::Mabuchi, &report)?;
            if !report.linear_differences_exact {
                return Err(Failure::new(IDENTITY, "linear parts do not differ by the lift constant"));
            }
            if report.max_det_relative_error > DET_TOLERANCE || report.max_constant_deviation > CONSTANT_TOLERANCE {
                return Err(Failure::new(TOLERANCE, "compatible-lift residual above tolerance"));
            }
            Ok(())
        }
        None => {
            let problem = input.toric_problem().map_err(input_error)?;
            let n = problem.polytope.dim();
            let x0 = polystab::functionals::weighted_barycenter(&problem.polytope, &problem.density).map_err(input_error)?;
            let phis = input.potentials.clone().unwrap_or_else(|| vec![Polynomial::zero(n)]);
            let mut rows = Vec::new();
            for phi in phis {
                let u = SymplecticPotential::new(&problem.polytope, phi.clone()).map_err(mabuchi_failure)?;
                u.check_convex(64, seed).map_err(mabuchi_failure)?;
                rows.push(PotentialEnergy {
                    energy: mabuchi_energy(&u, &problem.density, &problem.weight, tol).map_err(mabuchi_failure)?,
                    normalized_l1: normalized_l1(&u, &problem.density, &x0).map_err(mabuchi_failure)?,
                    phi,
                });
            }
            emit_report(options, Command::Mabuchi, &json!({ "potentials": rows }))
        }
    }
}

fn resolutions(options: &Options) -> Vec<usize> {
    options.resolutions.clone().unwrap_or_else(|| vec![4, 8, 16])
}

fn stability(input: &ProblemInput, options: &Options) -> Result<(), Failure> {
    let problem = input.toric_problem().map_err(input_error)?;
    let norm = options.norm.unwrap_or(Norm::L1Star);
    let ns = resolutions(options);
    let report: StabilityReport = match &problem.bundle {
        Some(bundle) => bundle_stability(bundle, &ns, norm),
        None => stability_search(&problem.polytope, &problem.density, &problem.weight, &ns, norm),
    }
    .map_err(input_error)?;
    let summary = json!({
        "norm_used": report.norm_used,
        "lambda": report.estimates.iter().map(|e| json!({"N": e.resolution, "lambda": format_rational(&e.lambda)})).collect::<Vec<_>>(),
        "non_increasing": report.non_increasing(),
        "verdict": report.verdict,
        "destabilizer": report.destabilizer,
        "estimates": report.estimates,
    });
    if let (Some(dir), Some(cert)) = (&options.out, &report.destabilizer) {
        write_file(dir, "destabilizer.json", &to_json(&cert.function))?;
    }
    emit_report(options, Command::Stability, &summary)
}

fn run_sweep(input: &ProblemInput, options: &Options, format: Format) -> Result<(), Failure> {
    let template = input.require_bundle().map_err(input_error)?;
    let cs: Vec<Rational> = input
        .c_values
        .as_ref()
        .ok_or_else(|| input_error(InputError::Missing("c_values")))?
        .iter()
        .map(|c| c.0.clone())
        .collect();
    let report = sweep(template, &cs, &resolutions(options), options.norm.unwrap_or(Norm::L1Star));
    if let Some(dir) = &options.out {
        for i in 0..report.rows.len() {
            if let (Some(name), Some(f)) = (report.destabilizer_ref(i), &report.rows[i].destabilizer) {
                write_file(dir, &name, &to_json(f))?;
            }
        }
        write_file(dir, "sweep.svg", &report.to_svg())?;
    }
    match format {
        Format::Csv => emit(options, "sweep.csv", &report.to_csv()),
        Format::Json => emit(options, "sweep.json", &to_json(&report)),
    }
}
