use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use spectral_shift::boxspec::{energy_inclusive, free_spectrum, perturbed_spectrum};
use spectral_shift::detkit::{box_determinant, factorization_check, jost_pais_check};
use spectral_shift::fse::{
    arccosh_closed_form, arccosh_quadrature, fse_closed, fse_integral, gebert_coefficient, halfline_fse, halfline_length,
    halfline_spectra, richardson, FsePhase, HalfLineShift,
};
use spectral_shift::jost::{scattering, JostOptions};
use spectral_shift::ssf::{fumi_contour, ContourOptions, SpectralShift};
use spectral_shift::{Error, C64};

use crate::config::RunConfig;

/// Why a run did not succeed.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numeric(Error),
    Tolerance(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numeric(
                Error::SupportViolation { .. } | Error::InvalidArgument(_) | Error::InvalidPotential(_) | Error::InvalidBoundaryCondition(_),
            ) => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Numeric(e) => write!(f, "numerical failure: {e}"),
            Failure::Tolerance(m) => write!(f, "tolerance failure: {m}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Numeric(e)
    }
}

pub type Outcome = Result<(), Failure>;

pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
    pub tol: f64,
}

fn io<E: std::fmt::Display>(path: &Path) -> impl Fn(E) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn write_csv<T: Serialize>(ctx: &Context, name: &str, rows: &[T]) -> Outcome {
    std::fs::create_dir_all(&ctx.out).map_err(io(&ctx.out))?;
    let path = ctx.out.join(name);
    let mut w = csv::Writer::from_path(&path).map_err(io(&path))?;
    for r in rows {
        w.serialize(r).map_err(io(&path))?;
    }
    w.flush().map_err(io(&path))?;
    println!("wrote {} ({} rows)", path.display(), rows.len());
    Ok(())
}

fn write_json<T: Serialize>(ctx: &Context, name: &str, value: &T) -> Outcome {
    std::fs::create_dir_all(&ctx.out).map_err(io(&ctx.out))?;
    let path = ctx.out.join(name);
    let text = serde_json::to_string_pretty(value).map_err(io(&path))?;
    std::fs::write(&path, format!("{text}\n")).map_err(io(&path))?;
    println!("{text}");
    Ok(())
}

#[derive(Serialize)]
struct ScatterRow {
    k: f64,
    re_t: f64,
    im_t: f64,
    re_r1: f64,
    im_r1: f64,
    re_r2: f64,
    im_r2: f64,
    unitarity_defect: f64,
}

pub fn scatter(ctx: &Context) -> Outcome {
    let s = &ctx.config.raw.scatter;
    let n = ((s.k_max - s.k_min) / s.k_step + 1e-9).floor() as usize + 1;
    let ks: Vec<f64> = (0..n).map(|i| s.k_min + i as f64 * s.k_step).collect();
    let p = &ctx.config.potential;
    let rows = ks
        .par_iter()
        .map(|&k| {
            let d = scattering(p, C64::new(k, 0.0), &JostOptions::default())?;
            Ok(ScatterRow {
                k,
                re_t: d.t.re,
                im_t: d.t.im,
                re_r1: d.r1.re,
                im_r1: d.r1.im,
                re_r2: d.r2.re,
                im_r2: d.r2.im,
                unitarity_defect: d.unitarity_defect(),
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    write_csv(ctx, "scatter.csv", &rows)
}

#[derive(Serialize)]
struct SsfRow {
    lambda: f64,
    xi: f64,
}

pub fn ssf(ctx: &Context) -> Outcome {
    let s = &ctx.config.raw.ssf;
    let shift = SpectralShift::new(&ctx.config.potential)?;
    let mut rows = Vec::with_capacity(s.points);
    for i in 0..s.points {
        let lambda = s.lambda_min + (s.lambda_max - s.lambda_min) * i as f64 / (s.points - 1) as f64;
        match shift.xi(lambda) {
            Ok(xi) => rows.push(SsfRow { lambda, xi }),
            // threshold and jump points carry no single value
            Err(Error::InvalidArgument(_)) | Err(Error::JumpPoint(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    write_csv(ctx, "ssf.csv", &rows)
}

#[derive(Serialize)]
struct FumiReport {
    nu: f64,
    f: String,
    fumi_xi_form: f64,
    fumi_contour_form: f64,
    b: f64,
}

pub fn fumi(ctx: &Context) -> Outcome {
    let c = &ctx.config;
    let b = c.contour_height();
    let opts = ContourOptions { nodes: c.raw.contour.nodes, n_det: c.raw.contour.n_det };
    let xi_form = spectral_shift::ssf::fumi(&c.potential, c.nu(), &c.f)?;
    let contour = fumi_contour(&c.potential, c.nu(), b, &c.f, opts)?;
    write_json(ctx, "fumi.json", &FumiReport { nu: c.nu(), f: c.f.name().into(), fumi_xi_form: xi_form, fumi_contour_form: contour, b })
}

#[derive(Serialize)]
struct LevelRow {
    index: usize,
    eigenvalue: f64,
    multiplicity: usize,
}

pub fn boxspec(ctx: &Context) -> Outcome {
    let c = &ctx.config;
    let l = c.raw.box_.l;
    let cutoff = c.raw.box_.cutoff.unwrap_or(c.nu());
    let support = c.potential.support();
    if !c.potential.is_zero() && (support.0 < -l || support.1 > l) {
        return Err(Failure::Config(format!("box.l: potential support {support:?} does not fit in [-{l}, {l}]")));
    }
    let rows = |levels: &[spectral_shift::boxspec::Level]| -> Vec<LevelRow> {
        levels.iter().enumerate().map(|(i, lv)| LevelRow { index: i, eigenvalue: lv.value, multiplicity: lv.multiplicity }).collect()
    };
    let pert = perturbed_spectrum(&c.potential, &c.bc, l, cutoff)?;
    let free = free_spectrum(&c.bc, l, cutoff)?;
    write_csv(ctx, "boxspec.csv", &rows(&pert.levels))?;
    write_csv(ctx, "boxspec_free.csv", &rows(&free.levels))
}

#[derive(Serialize, Clone)]
struct ConvergeRow {
    #[serde(rename = "L")]
    l: f64,
    #[serde(rename = "E_L")]
    e_l: f64,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "xi_L")]
    xi_l: i64,
    compensated: f64,
    scaled_residual: f64,
}

#[derive(Serialize)]
struct ConvergeSummary {
    nu: f64,
    eta: f64,
    bc: String,
    fumi: f64,
    fse_closed: f64,
    fse_extrapolated: Option<f64>,
}

/// Box runs along the η-fixed sequence, in order of L.
fn box_sequence(ctx: &Context, lengths: &[f64], halfline: bool, fumi: f64) -> Result<Vec<ConvergeRow>, Failure> {
    let c = &ctx.config;
    let cutoff = c.nu() + 1e-6 * (1.0 + c.nu());
    let rows = lengths
        .par_iter()
        .map(|&l| {
            let (free, pert) = if halfline {
                halfline_spectra(&c.potential, &c.halfline, l, cutoff)?
            } else {
                (free_spectrum(&c.bc, l, cutoff)?, perturbed_spectrum(&c.potential, &c.bc, l, cutoff)?)
            };
            let d = energy_inclusive(&free, &pert, c.nu(), &c.f);
            Ok(ConvergeRow {
                l,
                e_l: d.e_l,
                m: d.m,
                n: d.n,
                xi_l: d.xi_l,
                compensated: d.compensated(),
                scaled_residual: l * (d.compensated() - fumi),
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(rows)
}

fn check_fits(ctx: &Context, l_min: f64, halfline: bool) -> Outcome {
    let p = &ctx.config.potential;
    if p.is_zero() {
        return Ok(());
    }
    let (lo, hi) = p.support();
    let fits = if halfline { lo >= 0.0 && hi <= l_min } else { lo >= -l_min && hi <= l_min };
    if !fits {
        return Err(Failure::Config(format!("converge.n_min: the shortest box (L = {l_min}) does not contain the support [{lo}, {hi}]")));
    }
    Ok(())
}

pub fn converge(ctx: &Context) -> Outcome {
    let c = &ctx.config;
    let phase = FsePhase::new(c.eta())?;
    let lengths = phase.lengths(c.nu(), c.raw.converge.indices());
    check_fits(ctx, lengths[0], false)?;
    let fumi = spectral_shift::ssf::fumi(&c.potential, c.nu(), &c.f)?;
    let rows = box_sequence(ctx, &lengths, false, fumi)?;
    let closed = fse_closed(&c.potential, &c.bc, c.nu(), phase.phi(), &c.f)?;
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.l, r.scaled_residual)).collect();
    write_csv(ctx, "converge.csv", &rows)?;
    write_json(
        ctx,
        "converge_summary.json",
        &ConvergeSummary { nu: c.nu(), eta: c.eta(), bc: c.bc.name().into(), fumi, fse_closed: closed, fse_extrapolated: richardson(&pts) },
    )
}

#[derive(Serialize)]
struct FseReport {
    nu: f64,
    eta: f64,
    bc: String,
    fse_closed: f64,
    fse_integral: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    fse_box_extrapolated: Option<f64>,
}

#[derive(Serialize)]
struct HalfLineReport {
    nu: f64,
    eta: f64,
    bc: String,
    xi: f64,
    fumi: f64,
    fse_halfline: f64,
    gebert_coefficient: f64,
    /// π√ν f′(ν) times the Gebert coefficient.
    gebert_form: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    fse_box_extrapolated: Option<f64>,
}

pub fn fse(ctx: &Context, halfline: bool, extrapolate: bool) -> Outcome {
    let c = &ctx.config;
    let (nu, eta) = (c.nu(), c.eta());
    let indices = c.raw.converge.indices();
    if halfline {
        let shift = HalfLineShift::new(&c.potential, &c.halfline)?;
        let xi = shift.xi(nu)?;
        let fumi = shift.fumi(nu, &c.f)?;
        let value = halfline_fse(&c.potential, &c.halfline, nu, eta, &c.f)?;
        let g = gebert_coefficient(xi, eta, 0.0);
        let extrapolated = if extrapolate {
            let lengths: Vec<f64> = indices.iter().map(|&n| halfline_length(nu, eta, n)).collect();
            check_fits(ctx, lengths[0], true)?;
            let rows = box_sequence(ctx, &lengths, true, fumi)?;
            richardson(&rows.iter().map(|r| (r.l, r.scaled_residual)).collect::<Vec<_>>())
        } else {
            None
        };
        let report = HalfLineReport {
            nu,
            eta,
            bc: "halfline".into(),
            xi,
            fumi,
            fse_halfline: value,
            gebert_coefficient: g,
            gebert_form: std::f64::consts::PI * nu.sqrt() * c.f.derivative_real(nu) * g,
            fse_box_extrapolated: extrapolated,
        };
        return write_json(ctx, "fse_halfline.json", &report);
    }
    let phi = FsePhase::new(eta)?.phi();
    let closed = fse_closed(&c.potential, &c.bc, nu, phi, &c.f)?;
    let integral = fse_integral(&c.potential, &c.bc, nu, phi, &c.f)?;
    let extrapolated = if extrapolate {
        let lengths = FsePhase::new(eta)?.lengths(nu, indices);
        check_fits(ctx, lengths[0], false)?;
        let fumi = spectral_shift::ssf::fumi(&c.potential, nu, &c.f)?;
        let rows = box_sequence(ctx, &lengths, false, fumi)?;
        richardson(&rows.iter().map(|r| (r.l, r.scaled_residual)).collect::<Vec<_>>())
    } else {
        None
    };
    write_json(
        ctx,
        "fse.json",
        &FseReport { nu, eta, bc: c.bc.name().into(), fse_closed: closed, fse_integral: integral, fse_box_extrapolated: extrapolated },
    )
}

#[derive(Serialize)]
struct Check {
    name: String,
    defect: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    pass: bool,
}

#[derive(Serialize)]
struct VerifyReport {
    tolerance: f64,
    pass: bool,
    checks: Vec<Check>,
}

fn check(name: String, tol: f64, r: Result<f64, Error>) -> Check {
    match r {
        Ok(d) => Check { name, defect: Some(d), error: None, pass: d <= tol },
        Err(e) => Check { name, defect: None, error: Some(e.to_string()), pass: false },
    }
}

/// H1 = 0.2 + A A*, H1 + H2 = 0.2 + B B* with Gaussian-free uniform entries.
pub fn admissible_pair(rng: &mut ChaCha8Rng, n: usize) -> (DMatrix<C64>, DMatrix<C64>) {
    let mut draw = || DMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let shift = DMatrix::<C64>::identity(n, n).scale(0.2);
    let a = draw();
    let b = draw();
    let h1 = &shift + &a * a.adjoint();
    let h12 = &shift + &b * b.adjoint();
    let h2 = &h12 - &h1;
    (h1, h2)
}

pub fn verify(ctx: &Context) -> Outcome {
    let c = &ctx.config;
    let v = &c.raw.verify;
    let tol = ctx.tol;
    let mut checks = Vec::new();
    for &k in &v.ks {
        checks.push(check(format!("jost_pais k={k}"), tol, jost_pais_check(&c.potential, k, v.n).map(|r| r.defect)));
    }
    let z = C64::new(v.z[0], v.z[1]);
    checks.push(check(
        format!("factorization z={z} L={}", v.l),
        tol,
        factorization_check(&c.potential, &c.bc, z, v.l, v.n).map(|r| r.defect),
    ));
    let conj = box_determinant(&c.potential, &c.bc, z, v.l, v.n)
        .and_then(|d| box_determinant(&c.potential, &c.bc, z.conj(), v.l, v.n).map(|e| (d.conj() - e).norm()));
    checks.push(check(format!("conjugation symmetry z={z}"), tol, conj));
    let twin = |h1: &DMatrix<C64>, h2: &DMatrix<C64>| -> Result<f64, Error> {
        Ok((arccosh_closed_form(h1, h2)? - arccosh_quadrature(h1, h2)?).abs())
    };
    let scalar = |x: f64| DMatrix::from_element(1, 1, C64::new(x, 0.0));
    checks.push(check("arccosh twin scalar".into(), tol, twin(&scalar(1.5), &scalar(0.3))));
    checks.push(check("arccosh twin H2=0".into(), tol, twin(&scalar(1.5), &scalar(0.0))));
    let mut rng = ChaCha8Rng::seed_from_u64(v.seed);
    for i in 0..v.draws {
        let (h1, h2) = admissible_pair(&mut rng, 2);
        checks.push(check(format!("arccosh twin draw {i}"), tol, twin(&h1, &h2)));
    }
    let pass = checks.iter().all(|c| c.pass);
    write_json(ctx, "verify.json", &VerifyReport { tolerance: tol, pass, checks })?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Tolerance("one or more identities exceed the tolerance".into()))
    }
}
