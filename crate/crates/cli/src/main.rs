mod config;

use clap::{Args, Parser, Subcommand};
use kinetic_selfsim::boltzmann::{BoltzmannOperator, CollisionParams};
use kinetic_selfsim::bounds::{
    exponent_window, random_fields, verify_bound_a1hi, verify_bound_agrad, verify_bound_aloinf, verify_bound_c, verify_splitting, BoundKind,
    BoundReport,
};
use kinetic_selfsim::evolve::{blowup_indicator, conservation_drift, manufactured_history, max_entropy_increase, BlowupVerdict, Evolver, Monitor};
use kinetic_selfsim::grid::{sym_eigenvalues, Gaussian, GridSpec, ScalarField};
use kinetic_selfsim::landau::{LandauOperator, LandauParams};
use kinetic_selfsim::profile::{refutation_verdict, CollisionFunctional, FunctionalConfig, ProfileDecomposition, SeparableTerm, VerdictKind, YProfile};
use kinetic_selfsim::report::{write_csv, write_svg_loglog};
use kinetic_selfsim::selfsim::{check_theta_admissible, verify_error_decay, ErrorSampler, Mode, PhiModel, SelfSimParams};
use kinetic_selfsim::vpl::{compute_force, gauss_law, vpl_entropy_functional, VPL_GAMMA, VPL_THETA};
use kinetic_selfsim::{Density, Error};
use serde::Serialize;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "kinetic-selfsim", version, about = "Self-similar blow-up experiments for Landau, Boltzmann and Vlasov-Poisson-Landau")]
#[command(args_override_self = true)]
struct Cli {
    /// flat `key = value` run file; command-line flags override its entries
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// directory receiving every output file
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// worker threads (default: available cores)
    #[arg(long, global = true, env = "KINETIC_SELFSIM_THREADS")]
    threads: Option<usize>,
    /// seed for random fields and Monte-Carlo streams
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Landau coefficients ā and c̄ of a velocity field
    Coeffs(FieldArgs),
    /// Divergence-form Landau operator with conservation report
    Qlandau(FieldArgs),
    /// Coefficient estimates in Lebesgue norms over random fields
    Bounds(BoundsArgs),
    /// Decay of the self-similar error terms as t -> 0
    SelfsimErrors(SelfsimArgs),
    /// Moment-functional refutation for the Landau profile equation
    RefuteLandau(RefuteArgs),
    /// Moment-functional refutation for the non-cutoff Boltzmann profile equation
    RefuteBoltzmann(BoltzmannArgs),
    /// Entropy-weighted refutation for the Vlasov-Poisson-Landau profile equation
    RefuteVpl(VplArgs),
    /// Explicit time integration with conservation and entropy monitors
    Evolve(EvolveArgs),
    /// Type I rate fit on a monitor history or a manufactured one
    BlowupFit(BlowupArgs),
    /// Admissibility of (γ, θ, s) for a mode
    CheckTheta(ThetaArgs),
}

#[derive(Args, Debug)]
struct GridArgs {
    /// points per axis
    #[arg(long, default_value_t = 32)]
    n: usize,
    /// half-width of the velocity box
    #[arg(long, default_value_t = 8.0)]
    extent: f64,
}

impl GridArgs {
    fn grid(&self) -> Result<GridSpec, Failure> {
        Ok(GridSpec::new(self.n, self.extent)?)
    }
}

#[derive(Args, Debug)]
struct FieldArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = -2.5, allow_negative_numbers = true)]
    gamma: f64,
    /// maxwellian, shifted or two-gaussian
    #[arg(long, default_value = "maxwellian")]
    profile: String,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = -2.5, allow_negative_numbers = true)]
    gamma: f64,
    /// number of random fields per estimate
    #[arg(long, default_value_t = 10)]
    fields: usize,
    #[arg(long)]
    p_a1hi: Option<f64>,
    #[arg(long)]
    q_aloinf: Option<f64>,
    #[arg(long)]
    p_agrad: Option<f64>,
    #[arg(long)]
    p_c: Option<f64>,
    /// convolution exponent of the splitting estimate
    #[arg(long, default_value_t = -1.5, allow_negative_numbers = true)]
    splitting_s: f64,
    #[arg(long, default_value_t = 1.0)]
    splitting_p: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1,2")]
    splitting_radii: Vec<f64>,
}

#[derive(Args, Debug)]
struct SelfsimArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = -2.5, allow_negative_numbers = true)]
    gamma: f64,
    #[arg(long, default_value_t = 0.2, allow_negative_numbers = true)]
    theta: f64,
    /// growth rate of the background amplitude
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    beta: f64,
    #[arg(long, value_delimiter = ',', default_value = "-0.1,-0.01,-0.001", allow_negative_numbers = true)]
    times: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    y_radius: f64,
    #[arg(long, default_value_t = 3.0)]
    w_max: f64,
}

#[derive(Args, Debug)]
struct RefuteArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = -2.5, allow_negative_numbers = true)]
    gamma: f64,
    #[arg(long, default_value_t = 0.2, allow_negative_numbers = true)]
    theta: f64,
    /// gaussian, separable, mixed, power-tail or zero
    #[arg(long, default_value = "gaussian")]
    profile: String,
    #[arg(long, value_delimiter = ',')]
    w_radii: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct BoltzmannArgs {
    #[arg(long, default_value_t = 14)]
    n: usize,
    #[arg(long, default_value_t = 6.0)]
    extent: f64,
    #[arg(long, default_value_t = -2.2, allow_negative_numbers = true)]
    gamma: f64,
    /// angular singularity exponent
    #[arg(long, default_value_t = 0.4)]
    s: f64,
    #[arg(long, default_value_t = 0.2, allow_negative_numbers = true)]
    theta: f64,
    /// gaussian, separable, mixed, power-tail or zero
    #[arg(long, default_value = "gaussian")]
    profile: String,
    #[arg(long, value_delimiter = ',', default_value = "2.5,3.5,4.5")]
    w_radii: Vec<f64>,
}

#[derive(Args, Debug)]
struct VplArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// coupling constant of the force
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    constant: f64,
    /// gaussian or zero
    #[arg(long, default_value = "gaussian")]
    profile: String,
    #[arg(long, value_delimiter = ',', default_value = "2.5,3.25,4")]
    w_radii: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
    y_radii: Vec<f64>,
    /// floor inside the logarithm
    #[arg(long, default_value_t = 1e-30)]
    floor: f64,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    gauss_radii: Vec<f64>,
}

#[derive(Args, Debug)]
struct EvolveArgs {
    #[command(flatten)]
    field: FieldArgs,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    /// fixed time step; adaptive from the stability bound when absent
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = kinetic_selfsim::evolve::DEFAULT_CFL)]
    cfl: f64,
}

#[derive(Args, Debug)]
struct BlowupArgs {
    /// monitor CSV written by `evolve`
    #[arg(long, conflicts_with = "manufactured_theta")]
    history: Option<PathBuf>,
    /// fit a history following the Type I rates exactly with this θ
    #[arg(long, allow_negative_numbers = true)]
    manufactured_theta: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    blowup_time: f64,
    #[arg(long, default_value_t = 40)]
    samples: usize,
    #[arg(long, default_value_t = -2.5, allow_negative_numbers = true)]
    gamma: f64,
    /// accepted deviation of the recovered θ
    #[arg(long, default_value_t = 0.02)]
    tolerance: f64,
}

#[derive(Args, Debug)]
struct ThetaArgs {
    #[arg(long, allow_negative_numbers = true)]
    theta: f64,
    #[arg(long, default_value_t = -2.5, allow_negative_numbers = true)]
    gamma: f64,
    /// landau-inhom, landau-hom, boltzmann-inhom, boltzmann-hom or vpl
    #[arg(long)]
    mode: String,
    #[arg(long)]
    s: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl Status {
    fn code(self) -> u8 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Inconclusive => 2,
        }
    }

    fn from_bool(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::GridMismatch(_) | Error::OutOfRange(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

const EXIT_USAGE: u8 = 64;

fn usage<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

struct Ctx {
    out: PathBuf,
    seed: u64,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn velocity_field(name: &str, grid: GridSpec) -> Result<ScalarField, Failure> {
    let parts: Vec<Gaussian> = match name {
        "maxwellian" => vec![Gaussian::maxwellian()],
        "shifted" => vec![Gaussian { center: [0.5, -0.25, 0.0], sigma: [0.8, 1.0, 1.2], mass: 1.0 }],
        "two-gaussian" => vec![
            Gaussian { center: [1.0, 0.0, 0.0], sigma: [0.8; 3], mass: 0.5 },
            Gaussian { center: [-1.0, 0.3, 0.0], sigma: [0.7; 3], mass: 0.5 },
        ],
        _ => return usage(format!("unknown velocity profile {name}; use maxwellian, shifted or two-gaussian")),
    };
    Ok(ScalarField::from_fn(grid, |v| parts.iter().map(|g| g.eval(v)).sum()))
}

fn inner_profile(name: &str, grid: GridSpec) -> Result<ProfileDecomposition, Failure> {
    let m = ScalarField::sample(grid, &Gaussian::maxwellian());
    let h = |a: YProfile| vec![SeparableTerm { a, b: m.clone() }];
    let g = match name {
        "gaussian" => ProfileDecomposition::homogeneous(m.clone()),
        "separable" => ProfileDecomposition::new(grid, None, h(YProfile::gaussian(1.0, 1.0)))?,
        "mixed" => ProfileDecomposition::new(grid, Some(m.clone()), h(YProfile::gaussian(1.0, 0.5)))?,
        "power-tail" => ProfileDecomposition::new(grid, None, h(YProfile::PowerTail { width: 1.0, amplitude: 1.0, exponent: 2.0 }))?,
        "zero" => ProfileDecomposition::zero(grid),
        _ => return usage(format!("unknown profile {name}; use gaussian, separable, mixed, power-tail or zero")),
    };
    Ok(g)
}

/// Rows `(v, values…)` along the first axis through the origin.
fn axis_rows(grid: GridSpec, cols: &[&dyn Fn(usize) -> f64]) -> Vec<Vec<f64>> {
    let c = grid.n / 2;
    (1..grid.n)
        .map(|i| {
            let idx = grid.index(i, c, c);
            let mut row = vec![grid.coord1(i)];
            row.extend(cols.iter().map(|f| f(idx)));
            row
        })
        .collect()
}

fn coeffs(ctx: &Ctx, a: &FieldArgs) -> Result<(Status, Value), Failure> {
    let grid = a.grid.grid()?;
    let op = LandauOperator::new(grid, LandauParams::new(a.gamma)?)?;
    let f = velocity_field(&a.profile, grid)?;
    let co = op.coefficients(&f)?;
    let mut min_eig = f64::INFINITY;
    let mut max_norm: f64 = 0.0;
    for i in (0..grid.len()).filter(|&i| !grid.is_ghost(i)) {
        let e = sym_eigenvalues(&co.a.data[i]);
        min_eig = min_eig.min(e[0].min(e[1]).min(e[2]));
        max_norm = max_norm.max(e.iter().fold(0.0, |m: f64, x| m.max(x.abs())));
    }
    let rows = axis_rows(
        grid,
        &[&|i| co.a.data[i][0], &|i| co.a.data[i][3], &|i| co.a.data[i][5], &|i| co.a.data[i][1], &|i| co.c.data[i]],
    );
    write_csv(&ctx.path("coeffs.csv"), &["v1", "a11", "a22", "a33", "a12", "c"], &rows)?;
    let pass = min_eig >= -1e-8 * max_norm;
    Ok((
        Status::from_bool(pass),
        json!({
            "n": grid.n, "extent": grid.extent, "gamma": a.gamma, "profile": a.profile,
            "sup_a": max_norm, "sup_c": co.c.max_abs(), "min_eigenvalue_a": min_eig,
        }),
    ))
}

fn qlandau(ctx: &Ctx, a: &FieldArgs) -> Result<(Status, Value), Failure> {
    let grid = a.grid.grid()?;
    let op = LandauOperator::new(grid, LandauParams::new(a.gamma)?)?;
    let f = velocity_field(&a.profile, grid)?;
    let q = op.q_divergence(&f)?;
    let mut m = [0.0f64; 5];
    let mut s = [0.0f64; 3];
    for i in 0..grid.len() {
        let w = grid.weight(i);
        let v = grid.point(i);
        let r2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        let x = q.data[i] * w;
        m[0] += x;
        for d in 0..3 {
            m[1 + d] += x * v[d];
        }
        m[4] += x * r2;
        s[0] += x.abs();
        s[1] += x.abs() * r2.sqrt();
        s[2] += x.abs() * r2;
    }
    let mass = m[0].abs() / s[0].max(1e-300);
    let momentum = (m[1] * m[1] + m[2] * m[2] + m[3] * m[3]).sqrt() / s[1].max(1e-300);
    let energy = m[4].abs() / s[2].max(1e-300);
    let rows = axis_rows(grid, &[&|i| f.data[i], &|i| q.data[i]]);
    write_csv(&ctx.path("qlandau.csv"), &["v1", "f", "q"], &rows)?;
    let pass = mass <= 1e-12 && momentum <= 1e-3 && energy <= 1e-3;
    Ok((
        Status::from_bool(pass),
        json!({
            "n": grid.n, "extent": grid.extent, "gamma": a.gamma, "profile": a.profile,
            "relative_mass": mass, "relative_momentum": momentum, "relative_energy": energy,
            "sup_q_over_sup_f": q.max_abs() / f.max_abs(),
        }),
    ))
}

fn interior_exponent(kind: BoundKind, gamma: f64) -> Result<f64, Failure> {
    let (lo, hi) = exponent_window(kind, gamma)?;
    Ok(lo + 0.5 * (hi.min(lo + 2.0) - lo))
}

fn bounds(ctx: &Ctx, a: &BoundsArgs) -> Result<(Status, Value), Failure> {
    if a.fields == 0 {
        return usage("need at least one field");
    }
    let grid = a.grid.grid()?;
    let params = LandauParams::new(a.gamma)?;
    let fields = random_fields(grid, a.fields, ctx.seed);
    let pick = |given: Option<f64>, kind| given.map(Ok).unwrap_or_else(|| interior_exponent(kind, a.gamma));
    let mut reports: Vec<BoundReport> = vec![
        verify_bound_a1hi(&fields, pick(a.p_a1hi, BoundKind::A1Hi)?, params)?,
        verify_bound_aloinf(&fields, pick(a.q_aloinf, BoundKind::ALoInf)?, params)?,
        verify_bound_agrad(&fields, pick(a.p_agrad, BoundKind::AGrad)?, params)?,
    ];
    if a.gamma <= -2.0 {
        reports.push(verify_bound_c(&fields, pick(a.p_c, BoundKind::C)?, params)?);
    }
    reports.push(verify_splitting(&fields[0], a.splitting_s, a.splitting_p, f64::INFINITY, &a.splitting_radii)?);
    let mut w = csv::Writer::from_path(ctx.path("bounds.csv")).map_err(|e| Failure::Runtime(e.to_string()))?;
    let io = |e: csv::Error| Failure::Runtime(e.to_string());
    w.write_record(["kind", "exponent", "label", "lhs", "rhs", "ratio"]).map_err(io)?;
    for r in &reports {
        for s in &r.samples {
            w.write_record([
                format!("{:?}", r.kind),
                format!("{:.12e}", r.exponent),
                s.label.clone(),
                format!("{:.12e}", s.lhs),
                format!("{:.12e}", s.rhs),
                format!("{:.12e}", s.ratio),
            ])
            .map_err(io)?;
        }
    }
    w.flush()?;
    let pass = reports.iter().all(|r| r.pass);
    let summary: Vec<Value> = reports
        .iter()
        .map(|r| json!({"kind": r.kind, "exponent": r.exponent, "fitted_constant": r.fitted_constant, "spread": r.spread, "pass": r.pass}))
        .collect();
    Ok((Status::from_bool(pass), json!({"n": grid.n, "extent": grid.extent, "gamma": a.gamma, "fields": a.fields, "estimates": summary})))
}

fn require_admissible(gamma: f64, theta: f64, s: Option<f64>, mode: Mode) -> Result<(), Failure> {
    let mut p = SelfSimParams::new(gamma, theta, -1.0);
    p.s_exp = s;
    let adm = check_theta_admissible(&p, mode);
    if !adm.accepted {
        return usage(format!("(γ, θ) = ({gamma}, {theta}) rejected: {}", adm.violations.join("; ")));
    }
    Ok(())
}

fn selfsim_errors(ctx: &Ctx, a: &SelfsimArgs) -> Result<(Status, Value), Failure> {
    require_admissible(a.gamma, a.theta, None, Mode::LandauInhom)?;
    let grid = a.grid.grid()?;
    let g = inner_profile("separable", grid)?;
    let phi = PhiModel::with_beta(a.beta);
    let sampler = ErrorSampler::new(&g, &phi, LandauParams::new(a.gamma)?, a.y_radius, a.w_max)?;
    let rep = verify_error_decay(&sampler, &phi, a.theta, &a.times)?;
    write_csv(&ctx.path("selfsim_errors.csv"), &["t", "sup_e1", "sup_e2", "slope_e1", "slope_e2"], &rep.csv_rows())?;
    let pts = |s: &[f64]| a.times.iter().zip(s).map(|(t, v)| (-t, *v)).collect::<Vec<_>>();
    write_svg_loglog(&ctx.path("selfsim_errors.svg"), "sup |E| against -t", &[("E1", pts(&rep.e1.sups)), ("E2", pts(&rep.e2.sups))])?;
    Ok((Status::from_bool(rep.pass), json!({"gamma": a.gamma, "theta": a.theta, "beta": a.beta, "report": rep})))
}

fn verdict_status(v: VerdictKind) -> Status {
    match v {
        VerdictKind::Refuted | VerdictKind::Consistent => Status::Pass,
        VerdictKind::Inconclusive => Status::Inconclusive,
    }
}

fn refute(op: &dyn CollisionFunctional, g: &ProfileDecomposition, theta: f64, cfg: &FunctionalConfig) -> Result<(Status, Value), Failure> {
    let v = refutation_verdict(g, theta, op, cfg)?;
    Ok((verdict_status(v.verdict), serde_json::to_value(&v).map_err(|e| Failure::Runtime(e.to_string()))?))
}

fn refute_landau(ctx: &Ctx, a: &RefuteArgs) -> Result<(Status, Value), Failure> {
    let _ = ctx;
    let grid = a.grid.grid()?;
    let op = LandauOperator::new(grid, LandauParams::new(a.gamma)?)?;
    require_admissible(a.gamma, a.theta, None, op.mode(false))?;
    let g = inner_profile(&a.profile, grid)?;
    let mut cfg = FunctionalConfig::for_grid(grid);
    if let Some(r) = &a.w_radii {
        cfg.w_radii = r.clone();
    }
    refute(&op, &g, a.theta, &cfg)
}

fn refute_boltzmann(ctx: &Ctx, a: &BoltzmannArgs) -> Result<(Status, Value), Failure> {
    let _ = ctx;
    let grid = GridSpec::new(a.n, a.extent)?;
    let op = BoltzmannOperator::new(grid, CollisionParams::new(a.gamma, a.s)?);
    require_admissible(a.gamma, a.theta, Some(a.s), op.mode(false))?;
    let g = inner_profile(&a.profile, grid)?;
    let mut cfg = FunctionalConfig::for_grid(grid);
    cfg.w_radii = a.w_radii.clone();
    refute(&op, &g, a.theta, &cfg)
}

fn refute_vpl(ctx: &Ctx, a: &VplArgs) -> Result<(Status, Value), Failure> {
    let grid = a.grid.grid()?;
    let g = match a.profile.as_str() {
        "gaussian" => {
            let b = ScalarField::sample(grid, &Gaussian { center: [0.0; 3], sigma: [1.0, 0.7, 0.9], mass: 1.0 });
            ProfileDecomposition::new(grid, None, vec![SeparableTerm { a: YProfile::gaussian(1.0, 1.0), b }])?
        }
        "zero" => ProfileDecomposition::zero(grid),
        _ => return usage(format!("unknown profile {}; use gaussian or zero", a.profile)),
    };
    let ent = vpl_entropy_functional(&g, a.constant, &a.w_radii, &a.y_radii, a.floor)?;
    let rows: Vec<Vec<f64>> = ent
        .table
        .y_radii
        .iter()
        .enumerate()
        .flat_map(|(j, r2)| {
            let t = &ent.table;
            t.w_radii.iter().enumerate().map(move |(i, r1)| vec![*r2, *r1, t.mass[j][i], t.pairing[j][i], t.remainder[j][i], t.collision[j][i]])
        })
        .collect();
    write_csv(&ctx.path("vpl_entropy.csv"), &["y_radius", "w_radius", "mass", "pairing", "remainder", "collision"], &rows)?;
    let decay: Vec<(f64, f64)> = a.y_radii.iter().zip(&ent.remainder_decay).map(|(r, v)| (*r, v.abs())).collect();
    if decay.iter().any(|p| p.1 > 0.0) {
        write_svg_loglog(&ctx.path("vpl_remainder.svg"), "remainder after the w limit against R2", &[("remainder", decay)])?;
    }
    let gauss = if g.is_zero() || a.constant == 0.0 {
        None
    } else {
        let rho = ScalarField::from_fn(grid, |y| g.terms.iter().map(|t| t.a.eval(y) * t.b.integral()).sum());
        let force = compute_force(&rho, a.constant)?;
        Some(gauss_law(&rho, &force, &a.gauss_radii, 0.02)?)
    };
    let status = if gauss.as_ref().is_some_and(|r| !r.pass) {
        Status::Fail
    } else if ent.refuted || g.is_zero() {
        Status::Pass
    } else {
        Status::Inconclusive
    };
    let verdict = if ent.refuted { "refuted" } else if g.is_zero() { "consistent" } else { "inconclusive" };
    Ok((
        status,
        json!({
            "gamma": VPL_GAMMA, "theta": VPL_THETA, "profile": a.profile, "verdict": verdict,
            "total_mass": ent.total_mass, "mass_limit": ent.mass.limit, "dissipation": ent.dissipation,
            "gap": ent.gap, "remainder_slope": ent.remainder_slope, "gauss_law": gauss,
        }),
    ))
}

fn evolve(ctx: &Ctx, a: &EvolveArgs) -> Result<(Status, Value), Failure> {
    let grid = a.field.grid.grid()?;
    let ev = Evolver::new(grid, LandauParams::new(a.field.gamma)?)?.with_cfl(a.cfl)?;
    let f0 = velocity_field(&a.field.profile, grid)?;
    let mut st = ev.init(f0, a.dt)?;
    ev.run(&mut st, a.steps)?;
    st.write_csv(&ctx.path("evolve.csv"))?;
    st.f.write_snapshot(&ctx.path("final.f64"))?;
    let drift = conservation_drift(&st.history);
    let dh = max_entropy_increase(&st.history);
    let blowup = if st.history.len() >= 10 { Some(blowup_indicator(&st.history, a.field.gamma)?) } else { None };
    let pass = drift.mass <= 1e-12 && dh <= 1e-10;
    Ok((
        Status::from_bool(pass),
        json!({
            "n": grid.n, "extent": grid.extent, "gamma": a.field.gamma, "profile": a.field.profile,
            "steps": a.steps, "time": st.time, "dt": st.dt, "clipped_mass": st.clipped_mass,
            "drift": drift, "max_entropy_increase": dh, "blowup": blowup,
        }),
    ))
}

fn read_history(path: &Path) -> Result<Vec<Monitor>, Failure> {
    let bad = |e: csv::Error| Failure::Usage(format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(bad)?;
    let head = r.headers().map_err(bad)?.clone();
    let col = |name: &str| head.iter().position(|h| h == name).ok_or_else(|| Failure::Usage(format!("{}: missing column {name}", path.display())));
    let (ct, cs, c2, c3) = (col("t")?, col("sup")?, col("l2")?, col("l3")?);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(bad)?;
        let num = |c: usize| rec.get(c).and_then(|x| x.trim().parse::<f64>().ok()).ok_or_else(|| Failure::Usage(format!("{}: bad number", path.display())));
        out.push(Monitor {
            t: num(ct)?,
            mass: 0.0,
            momentum: [0.0; 3],
            energy: 0.0,
            entropy: 0.0,
            sup: num(cs)?,
            l2: num(c2)?,
            l3: num(c3)?,
            clipped: 0.0,
            clipped_momentum: [0.0; 3],
            clipped_energy: 0.0,
        });
    }
    Ok(out)
}

fn blowup_fit(ctx: &Ctx, a: &BlowupArgs) -> Result<(Status, Value), Failure> {
    let _ = ctx;
    let (history, truth) = match (&a.history, a.manufactured_theta) {
        (Some(p), None) => (read_history(p)?, None),
        (None, Some(theta)) => {
            if a.samples < 10 || !(a.blowup_time > 0.0) {
                return usage("manufactured history needs at least 10 samples and a positive blow-up time");
            }
            let m = a.samples - 1;
            let times: Vec<f64> = (0..a.samples).map(|k| a.blowup_time * (1.0 - 10f64.powf(-2.0 * k as f64 / m as f64))).collect();
            (manufactured_history(theta, a.gamma, a.blowup_time, &times), Some(theta))
        }
        _ => return usage("give exactly one of --history or --manufactured-theta"),
    };
    let rep = blowup_indicator(&history, a.gamma)?;
    let status = match truth {
        Some(theta) => Status::from_bool(rep.theta.is_some_and(|t| (t - theta).abs() <= a.tolerance)),
        None => match rep.verdict {
            BlowupVerdict::TypeI | BlowupVerdict::NoBlowUpTrend => Status::Pass,
            BlowupVerdict::Inconclusive => Status::Inconclusive,
        },
    };
    Ok((status, json!({"gamma": a.gamma, "manufactured_theta": truth, "verdict": rep.verdict.to_string(), "report": rep})))
}

fn check_theta(a: &ThetaArgs) -> Result<(Status, Value), Failure> {
    let mode: Mode = a.mode.parse()?;
    let mut p = SelfSimParams::new(a.gamma, a.theta, -1.0);
    p.s_exp = a.s;
    let adm = check_theta_admissible(&p, mode);
    Ok((Status::from_bool(adm.accepted), json!({"gamma": a.gamma, "theta": a.theta, "s": a.s, "mode": mode, "report": adm})))
}

fn subcommand_name(cmd: &Cmd) -> &'static str {
    match cmd {
        Cmd::Coeffs(_) => "coeffs",
        Cmd::Qlandau(_) => "qlandau",
        Cmd::Bounds(_) => "bounds",
        Cmd::SelfsimErrors(_) => "selfsim-errors",
        Cmd::RefuteLandau(_) => "refute-landau",
        Cmd::RefuteBoltzmann(_) => "refute-boltzmann",
        Cmd::RefuteVpl(_) => "refute-vpl",
        Cmd::Evolve(_) => "evolve",
        Cmd::BlowupFit(_) => "blowup-fit",
        Cmd::CheckTheta(_) => "check-theta",
    }
}

fn run(cli: &Cli) -> Result<(Status, Value), Failure> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return usage("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    std::fs::create_dir_all(&cli.out)?;
    let ctx = Ctx { out: cli.out.clone(), seed: cli.seed };
    match &cli.cmd {
        Cmd::Coeffs(a) => coeffs(&ctx, a),
        Cmd::Qlandau(a) => qlandau(&ctx, a),
        Cmd::Bounds(a) => bounds(&ctx, a),
        Cmd::SelfsimErrors(a) => selfsim_errors(&ctx, a),
        Cmd::RefuteLandau(a) => refute_landau(&ctx, a),
        Cmd::RefuteBoltzmann(a) => refute_boltzmann(&ctx, a),
        Cmd::RefuteVpl(a) => refute_vpl(&ctx, a),
        Cmd::Evolve(a) => evolve(&ctx, a),
        Cmd::BlowupFit(a) => blowup_fit(&ctx, a),
        Cmd::CheckTheta(a) => check_theta(a),
    }
}

fn main() -> ExitCode {
    let args = match config::merge(std::env::args().collect()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let name = subcommand_name(&cli.cmd);
    match run(&cli) {
        Ok((status, mut body)) => {
            if let Value::Object(map) = &mut body {
                map.insert("subcommand".into(), json!(name));
                map.insert("status".into(), json!(status));
            }
            let text = serde_json::to_string_pretty(&body).unwrap_or_default();
            println!("{text}");
            if let Err(e) = std::fs::write(cli.out.join(format!("{name}.json")), format!("{text}\n")) {
                eprintln!("error: cannot write report: {e}");
                return ExitCode::from(Status::Fail.code());
            }
            ExitCode::from(status.code())
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run `kinetic-selfsim {name} --help` for usage");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(Status::Inconclusive.code())
        }
    }
}
