//! Named verification suites and fixture loading.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::Value;

use crate::dynamics::swell::{swell_check, swell_family, SwellParams};
use crate::dynamics::vortex::{
    compressible_counterexample, curl_parametrization_check, pressure_recovery, random_divergence_free,
    rigid_rotation, vortex_residual, vortex_residual_unchecked,
};
use crate::dynamics::{random_family, MotionFamily};
use crate::elasticity::{self as el, Displacement, StressState, PLANE_VARS};
use crate::error::{Error, Result};
use crate::expr::{Expr, ExprMap};
use crate::lie_group::{self as lg, LieGroupSpec, Side};
use crate::poly::{random_polynomial, var_names};
use crate::pseudogroup::{self as pg, LieEquationSystem};
use crate::report::{CheckRecord, Report, Status};
use crate::sampling::{rng, Grid, SampleBox};
use crate::taylor::Dual;

pub const SUITES: [&str; 6] = ["group", "pseudogroup", "dynamics", "swell", "elasticity", "all"];
pub const FIXTURE_ENV: &str = "JETGAUGE_FIXTURES";

const BUNDLED: [(&str, &str); 2] = [
    ("affine.json", include_str!("../fixtures/affine.json")),
    ("e2.json", include_str!("../fixtures/e2.json")),
];

/// A user-supplied fixture; the kind is recognized from its keys.
#[derive(Debug, Clone)]
pub enum Fixture {
    Group(LieGroupSpec),
    System(LieEquationSystem),
    Family(MotionFamily),
}

impl Fixture {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text)?;
        let has = |k: &str| doc.get(k).is_some();
        if has("compose") {
            Ok(Fixture::Group(LieGroupSpec::from_json(text)?))
        } else if has("phi") {
            Ok(Fixture::System(LieEquationSystem::from_json(text)?))
        } else if has("f") && has("box") {
            Ok(Fixture::Family(MotionFamily::from_json(text)?))
        } else {
            Err(Error::Fixture(
                "expected a group (`compose`), a Lie equation system (`phi`) or a motion family (`f`, `box`)".into(),
            ))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Io(_) => e,
            other => Error::Fixture(format!("{}: {other}", path.display())),
        })
    }

    /// Suite that exercises this fixture.
    pub fn suite(&self) -> &'static str {
        match self {
            Fixture::Group(_) => "group",
            Fixture::System(_) => "pseudogroup",
            Fixture::Family(_) => "dynamics",
        }
    }
}

/// Bundled groups, read from `$JETGAUGE_FIXTURES` when it is set.
pub fn bundled_groups() -> Result<Vec<LieGroupSpec>> {
    let dir = std::env::var_os(FIXTURE_ENV).map(PathBuf::from);
    BUNDLED
        .iter()
        .map(|(file, text)| match &dir {
            Some(d) => {
                let path = d.join(file);
                let text = std::fs::read_to_string(&path).map_err(|e| Error::Fixture(format!("{}: {e}", path.display())))?;
                LieGroupSpec::from_json(&text).map_err(|e| Error::Fixture(format!("{}: {e}", path.display())))
            }
            None => LieGroupSpec::from_json(text),
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Low-discrepancy points per box.
    pub samples: usize,
    pub tol_scale: f64,
    pub timestamps: bool,
    pub fixture: Option<Fixture>,
    pub swell: SwellParams,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 42,
            samples: 64,
            tol_scale: 1.0,
            timestamps: true,
            fixture: None,
            swell: SwellParams::default(),
        }
    }
}

struct Measured {
    residual: f64,
    samples: usize,
}

fn measured(residual: f64, samples: usize) -> Measured {
    Measured { residual, samples }
}

struct Item {
    id: String,
    tolerance: f64,
    /// Negative control: the residual is `tolerance / observed` against 1.
    control: bool,
}

type Runner<'a> = Box<dyn Fn(&mut ChaCha8Rng) -> Result<Vec<Measured>> + Send + Sync + 'a>;

struct Task<'a> {
    anchor: &'static str,
    items: Vec<Item>,
    run: Runner<'a>,
}

fn single<'a, F>(id: &str, anchor: &'static str, tolerance: f64, run: F) -> Task<'a>
where
    F: Fn(&mut ChaCha8Rng) -> Result<Measured> + Send + Sync + 'a,
{
    Task {
        anchor,
        items: vec![Item {
            id: id.into(),
            tolerance,
            control: false,
        }],
        run: Box::new(move |r| Ok(vec![run(r)?])),
    }
}

/// Passes when the observed gap exceeds `threshold`.
fn control<'a, F>(id: &str, anchor: &'static str, threshold: f64, run: F) -> Task<'a>
where
    F: Fn(&mut ChaCha8Rng) -> Result<Measured> + Send + Sync + 'a,
{
    Task {
        anchor,
        items: vec![Item {
            id: id.into(),
            tolerance: threshold,
            control: true,
        }],
        run: Box::new(move |r| Ok(vec![run(r)?])),
    }
}

fn multi<'a, F>(anchor: &'static str, items: &[(String, f64)], run: F) -> Task<'a>
where
    F: Fn(&mut ChaCha8Rng) -> Result<Vec<Measured>> + Send + Sync + 'a,
{
    Task {
        anchor,
        items: items
            .iter()
            .map(|(id, tol)| Item {
                id: id.clone(),
                tolerance: *tol,
                control: false,
            })
            .collect(),
        run: Box::new(run),
    }
}

fn id_seed(seed: u64, id: &str) -> u64 {
    // FNV-1a, stable across platforms and releases
    id.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
        ^ seed
}

fn execute(task: &Task, cfg: &SuiteConfig) -> Vec<CheckRecord> {
    let start = Instant::now();
    let mut r = rng(id_seed(cfg.seed, &task.items[0].id));
    let outcome = (task.run)(&mut r);
    let runtime = cfg.timestamps.then(|| start.elapsed().as_millis() as u64);
    task.items
        .iter()
        .enumerate()
        .map(|(k, item)| {
            let (tolerance, result) = if item.control {
                let ratio = outcome.as_ref().map(|m| {
                    let observed = m[k].residual.abs();
                    measured(item.tolerance / observed, m[k].samples)
                });
                (1.0, ratio.map(Some))
            } else {
                (item.tolerance * cfg.tol_scale, outcome.as_ref().map(|m| Some(measured(m[k].residual, m[k].samples))))
            };
            match result {
                Ok(Some(m)) => CheckRecord {
                    id: item.id.clone(),
                    paper_anchor: task.anchor.into(),
                    status: if m.residual <= tolerance { Status::Pass } else { Status::Fail },
                    max_residual: m.residual.is_finite().then_some(m.residual),
                    tolerance,
                    samples: m.samples,
                    runtime_ms: runtime,
                    error: None,
                },
                Ok(None) | Err(_) => CheckRecord {
                    id: item.id.clone(),
                    paper_anchor: task.anchor.into(),
                    status: Status::Fail,
                    max_residual: None,
                    tolerance,
                    samples: 0,
                    runtime_ms: runtime,
                    error: outcome.as_ref().err().map(|e| e.to_string()),
                },
            }
        })
        .collect()
}

/// Runs a named suite. Errors only for an unknown suite or a bad fixture;
/// failing checks are reported in the returned [`Report`].
pub fn run_suite(name: &str, cfg: &SuiteConfig) -> Result<Report> {
    let groups = group_list(cfg)?;
    let mut tasks = Vec::new();
    let mut add = |suite: &str| -> Result<()> {
        match suite {
            "group" => tasks.extend(group_tasks(&groups, cfg)),
            "pseudogroup" => tasks.extend(pseudogroup_tasks(cfg)),
            "dynamics" => tasks.extend(dynamics_tasks(cfg)),
            "swell" => tasks.extend(swell_tasks(cfg)),
            "elasticity" => tasks.extend(elasticity_tasks(cfg)),
            other => return Err(Error::UnknownSuite(other.into())),
        }
        Ok(())
    };
    if name == "all" {
        for s in &SUITES[..5] {
            add(s)?;
        }
    } else {
        add(name)?;
    }
    let records: Vec<CheckRecord> = tasks.par_iter().flat_map_iter(|t| execute(t, cfg)).collect();
    Ok(Report::new(name, cfg.seed, cfg.samples, cfg.tol_scale, records))
}

fn group_list(cfg: &SuiteConfig) -> Result<Vec<LieGroupSpec>> {
    let mut groups = bundled_groups()?;
    if let Some(Fixture::Group(g)) = &cfg.fixture {
        groups.push(g.clone());
    }
    Ok(groups)
}

fn per_axis(samples: usize, dim: usize) -> usize {
    ((samples as f64).powf(1.0 / dim as f64).ceil() as usize).max(2)
}

fn max_abs<'a, I: IntoIterator<Item = &'a f64>>(xs: I) -> f64 {
    xs.into_iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn plane_map(outputs: Vec<Expr>) -> Result<ExprMap> {
    ExprMap::new(&PLANE_VARS, outputs)
}

/// Gauging `identity + small quadratic` on `x1, x2`.
fn random_gauging<R: Rng>(g: &LieGroupSpec, rng: &mut R) -> Result<ExprMap> {
    let out = g
        .identity()
        .iter()
        .map(|&e| Expr::num(e) + random_polynomial(&PLANE_VARS, 2, 0.25, rng))
        .collect();
    plane_map(out)
}

fn group_tasks<'a>(groups: &'a [LieGroupSpec], cfg: &SuiteConfig) -> Vec<Task<'a>> {
    let samples = cfg.samples;
    let seed = cfg.seed;
    let gauge_box = || SampleBox::cube(2, -0.5, 0.5);
    let mut tasks = vec![
        single("group_law", "group composition law", 1e-10, move |_| {
            let mut worst = 0.0f64;
            for g in groups {
                worst = worst.max(g.group_law_residual(samples, 0.3, seed)?);
            }
            Ok(measured(worst, samples * groups.len()))
        }),
        single("structure_jacobi", "structure constants", 1e-10, move |_| {
            Ok(measured(groups.iter().map(|g| g.jacobi_residual()).fold(0.0, f64::max), groups.len()))
        }),
        single("curvature_of_pullback", "Theorem 1", 1e-9, move |r| {
            let grid = Grid::uniform(gauge_box(), per_axis(samples, 2))?;
            let mut worst = 0.0f64;
            let mut count = 0;
            for g in groups {
                for _ in 0..10 {
                    let a = random_gauging(g, r)?;
                    for field in [lg::maurer_cartan_pullback(g, &a, &grid)?, lg::right_pullback(g, &a, &grid)?] {
                        worst = worst.max(lg::curvature(g, &field)?.max_abs());
                        count += grid.len();
                    }
                }
            }
            Ok(measured(worst, count))
        }),
    ];
    for side in [Side::Left, Side::Right] {
        let (id, anchor) = match side {
            Side::Left => ("variation_body_halving", "variation of A"),
            Side::Right => ("variation_space_halving", "variation of B"),
        };
        tasks.push(single(id, anchor, 0.2, move |r| {
            let grid = Grid::uniform(SampleBox::new(vec![0.1, -0.5], vec![0.9, 0.5])?, 3)?;
            let mut worst = 0.0f64;
            for g in groups {
                let a = random_gauging(g, r)?;
                let l = plane_map((0..g.dim()).map(|_| random_polynomial(&PLANE_VARS, 2, 1.0, r)).collect())?;
                let (field, formula) = match side {
                    Side::Left => {
                        let f = lg::maurer_cartan_pullback(g, &a, &grid)?;
                        let v = lg::variation_body(g, &f, &l)?;
                        (f, v)
                    }
                    Side::Right => {
                        let f = lg::right_pullback(g, &a, &grid)?;
                        let v = lg::variation_space(g, &f, &l)?;
                        (f, v)
                    }
                };
                debug_assert_eq!(field.grid().len(), formula.len());
                let mut errs = [0.0f64; 2];
                for (e, eps) in errs.iter_mut().zip([1e-3, 5e-4]) {
                    for (x, f) in grid.points().iter().zip(&formula) {
                        let fd = lg::finite_variation(g, &a, &l, x, eps, side)?;
                        *e = e.max(fd.iter().zip(f).fold(0.0, |m, (u, v)| m.max((u - v).abs())));
                    }
                }
                worst = worst.max((errs[0] / errs[1] - 2.0).abs());
            }
            Ok(measured(worst, 2 * 9 * groups.len()))
        }));
    }
    tasks.push(single("linear_gauge_dd", "linear gauge sequence", 1e-9, move |r| {
        let vars = var_names("x", 3);
        let pts = SampleBox::cube(3, -1.0, 1.0).points(samples, seed);
        let mut worst = 0.0f64;
        for g in groups {
            let p = g.dim();
            for (deg, comps) in [(0usize, 1usize), (1, 3)] {
                let outs = (0..p * comps)
                    .map(|_| {
                        let c: f64 = r.gen_range(-0.5..0.5);
                        let e = ExprMap::parse_with_vars(&vars, &format!("exp({c:.6}*x2)"))?;
                        Ok(random_polynomial(&vars, 3, 1.0, r) * e.outputs()[0].clone())
                    })
                    .collect::<Result<Vec<_>>>()?;
                let omega = ExprMap::new(&vars, outs)?;
                for x in &pts {
                    worst = worst.max(max_abs(&lg::linear_gauge_dd(p, &omega, deg, x)?));
                }
            }
        }
        Ok(measured(worst, 2 * pts.len() * groups.len()))
    }));
    let acting: Vec<&LieGroupSpec> = groups.iter().filter(|g| g.action().is_some()).collect();
    if !acting.is_empty() {
        let acting2 = acting.clone();
        tasks.push(single("generator_brackets", "action generators", 1e-12, move |_| {
            let mut worst = 0.0f64;
            let mut count = 0;
            for g in &acting2 {
                let n = g.action().map_or(0, |a| a.n);
                let pts = SampleBox::cube(n, -1.0, 1.0).points(samples, seed);
                worst = worst.max(g.generator_bracket_residual(&pts)?);
                count += pts.len();
            }
            Ok(measured(worst, count))
        }));
        tasks.push(single("spencer_gauge_isomorphism", "Spencer and gauge sequences", 1e-10, move |r| {
            let mut worst = 0.0f64;
            let mut count = 0;
            for g in &acting {
                let n = g.action().map_or(0, |a| a.n);
                let vars = var_names("x", n);
                let lambda = ExprMap::new(&vars, (0..g.dim()).map(|_| random_polynomial(&vars, 3, 1.0, r)).collect())?;
                let pts = SampleBox::cube(n, -1.0, 1.0).points(samples, seed);
                for s in lg::spencer_from_action(g, &lambda, 2, &pts)? {
                    worst = worst.max(s.spencer.iter().zip(&s.contracted).fold(0.0, |m, (a, b)| m.max((a - b).abs())));
                }
                count += pts.len();
            }
            Ok(measured(worst, count))
        }));
    }
    if let Some(affine) = groups.iter().find(|g| g.name == "affine") {
        tasks.push(single("maurer_cartan_affine", "Example 8", 1e-12, move |r| {
            let grid = Grid::uniform(gauge_box(), per_axis(samples, 2))?;
            let mut worst = 0.0f64;
            for _ in 0..10 {
                let a = random_gauging(affine, r)?;
                let field = lg::maurer_cartan_pullback(affine, &a, &grid)?;
                for (node, x) in grid.points().iter().enumerate() {
                    let j = a.taylor_lift(x, 1)?;
                    let a1 = j.value()[0];
                    for t in 0..2 {
                        for i in 0..2 {
                            let want = j.components()[t].gradient()[i] / a1;
                            worst = worst.max((field.at(node, t, i) - want).abs());
                        }
                    }
                }
            }
            Ok(measured(worst, 10 * grid.len()))
        }));
        tasks.push(single("structure_constants_affine", "Example 8", 0.0, move |_| {
            let mut worst = 0.0f64;
            for t in 0..2 {
                for r in 0..2 {
                    for s in 0..2 {
                        let want = match (t, r, s) {
                            (1, 0, 1) => -1.0,
                            (1, 1, 0) => 1.0,
                            _ => 0.0,
                        };
                        worst = worst.max((affine.c(t, r, s) - want).abs());
                    }
                }
            }
            Ok(measured(worst, 8))
        }));
    }
    tasks
}

fn systems(cfg: &SuiteConfig) -> Vec<LieEquationSystem> {
    let mut out = vec![
        LieEquationSystem::affine(),
        LieEquationSystem::projective(),
        LieEquationSystem::volume(2),
        LieEquationSystem::volume(3),
        LieEquationSystem::example4(),
        LieEquationSystem::example4_prime(),
    ];
    if let Some(Fixture::System(s)) = &cfg.fixture {
        out.push(s.clone());
    }
    out
}

const CLOSURE_PAIRS: usize = 50;
const CLOSURE_POINTS: usize = 4;

fn pseudogroup_tasks<'a>(cfg: &SuiteConfig) -> Vec<Task<'a>> {
    let samples = cfg.samples;
    let seed = cfg.seed;
    let mut tasks = Vec::new();
    for sys in systems(cfg) {
        let label = sys.label.clone();
        let ids = [
            (format!("closure_{label}"), 1e-9),
            (format!("lift_independence_{label}"), 1e-10),
            (format!("bracket_antisymmetry_{label}"), 1e-12),
            (format!("bracket_jacobi_{label}"), 1e-8),
            (format!("section_constraints_{label}"), 1e-12),
        ];
        let s2 = sys.clone();
        tasks.push(multi("algebroid bracket", &ids, move |r| {
            let pts = SampleBox::cube(s2.n(), -1.0, 1.0).points(CLOSURE_POINTS, seed);
            let rep = pg::closure_check(&s2, CLOSURE_PAIRS, &pts, r)?;
            let n = rep.evaluations;
            Ok(vec![
                measured(rep.max_violation, n),
                measured(rep.max_lift_gap, n),
                measured(rep.max_antisymmetry, n),
                measured(rep.max_jacobi, n),
                measured(rep.max_section_residual, n),
            ])
        }));
        tasks.push(single(&format!("linearization_{label}"), "linearized Lie equations", 1e-8, move |r| {
            let pts = SampleBox::cube(sys.n(), -1.0, 1.0).points(samples.min(16), seed);
            Ok(measured(sys.linearization_gap(&pts, 1e-5, r)?, pts.len()))
        }));
    }
    tasks.push(single("schwarzian_variation_halving", "Example 3", 0.2, |_| {
        let z = ExprMap::parse_with_vars(&["y"], "exp(y)")?;
        let eta = ExprMap::parse_with_vars(&["z"], "z^3")?;
        let (l1, rhs) = pg::schwarzian_variation_check(&z, &eta, 0.2, 1e-3)?;
        let (l2, _) = pg::schwarzian_variation_check(&z, &eta, 0.2, 5e-4)?;
        Ok(measured(((l1 - rhs) / (l2 - rhs) - 2.0).abs(), 2))
    }));
    tasks.push(single("schwarzian_projective_invariance", "Example 3", 0.0, |_| {
        let z = ExprMap::parse_with_vars(&["y"], "exp(y)")?;
        let mut worst = 0.0f64;
        for gen in ["1", "z", "z^2"] {
            let eta = ExprMap::parse_with_vars(&["z"], gen)?;
            worst = worst.max(pg::schwarzian_variation_check(&z, &eta, 0.2, 1e-3)?.1.abs());
        }
        Ok(measured(worst, 3))
    }));
    tasks.push(single("geometric_object_integrability", "Example 4", 1e-12, move |_| {
        let pts = SampleBox::cube(2, -1.0, 1.0).points(samples, seed);
        let mut worst = 0.0f64;
        for x in &pts {
            worst = worst.max(pg::example4_object_gap(x)?);
        }
        Ok(measured(worst, pts.len()))
    }));
    tasks
}

fn theorem3_family() -> Result<MotionFamily> {
    MotionFamily::new(
        "theorem3",
        2,
        2,
        "exp(0.3*x1)*(y1 + x2*y2^2), y2 + sin(x1)*y1",
        None,
        Some("exp(0.3*x1)*(y1 + x2*y2^2) + eps*y2*x1, y2 + sin(x1)*y1 + eps*cos(y1 + x2)"),
        SampleBox::new(vec![-0.5; 4], vec![0.5; 4])?,
    )
}

fn dynamics_tasks<'a>(cfg: &SuiteConfig) -> Vec<Task<'a>> {
    let samples = cfg.samples;
    let seed = cfg.seed;
    let per_family = (samples / 4).max(4);
    let mut tasks = vec![
        multi(
            "Theorem 2",
            &[
                ("compatibility_v".to_string(), 1e-8),
                ("compatibility_u".to_string(), 1e-8),
                ("mass_conservation".to_string(), 1e-8),
            ],
            move |r| {
                let mut worst = [0.0f64; 3];
                for i in 0..10 {
                    let f = random_family(&format!("random{i}"), r)?;
                    let pts = f.samples(per_family, seed.wrapping_add(i));
                    let (rv, ru) = f
                        .compatibility_residual(&pts)?
                        .ok_or_else(|| Error::InvalidParameter("family without parameters".into()))?;
                    worst[0] = worst[0].max(rv);
                    worst[1] = worst[1].max(ru);
                    worst[2] = worst[2].max(f.mass_conservation_residual(&pts)?);
                }
                Ok(worst.iter().map(|&w| measured(w, 10 * per_family)).collect())
            },
        ),
        multi(
            "Theorem 3",
            &[
                ("theorem3_exact".to_string(), 1e-10),
                ("theorem3_halving".to_string(), 0.2),
                ("density_variation".to_string(), 1e-10),
            ],
            move |_| {
                let f = theorem3_family()?;
                let pts = f.samples(per_family, seed);
                let rep = f.theorem3_check(&pts, &[1e-3, 5e-4])?;
                let ratio = rep.convergence_ratio().map_or(f64::INFINITY, |q| (q - 2.0).abs());
                let dens = f.density_variation_residual(&pts)?;
                Ok(vec![
                    measured(rep.exact_gap.max(rep.formula_gap), pts.len()),
                    measured(ratio, pts.len()),
                    measured(dens, pts.len()),
                ])
            },
        ),
        single("euler_lagrange_pairing", "Euler-Lagrange equations", 1e-10, move |r| {
            let w = ExprMap::parse("0.5*(v1_1^2 + v2_1^2 + v3_1^2)")?;
            let rot = MotionFamily::new(
                "rotation",
                3,
                1,
                "cos(2*x1)*y1 - sin(2*x1)*y2 + 0.2*x1*y3^2, sin(2*x1)*y1 + cos(2*x1)*y2, y3 + 0.1*x1*y1",
                None,
                None,
                SampleBox::new(vec![-1.0, -1.0, -1.0, 0.0], vec![1.0, 1.0, 1.0, 1.0])?,
            )?;
            let pts = rot.samples(per_family, seed);
            Ok(measured(rot.el_residual(&w, &pts, r)?.max_pairing_gap, pts.len()))
        }),
        single("vortex_identity", "Example 6", 1e-8, move |r| {
            let pts = SampleBox::cube(4, -1.0, 1.0).points(samples, seed);
            let mut worst = 0.0f64;
            for i in 0..10 {
                let v = random_divergence_free(i, r)?;
                worst = worst.max(vortex_residual(&v, &pts, 1e-10)?);
            }
            Ok(measured(worst, 10 * pts.len()))
        }),
        control("vortex_compressible_control", "Example 6", 1e-3, move |_| {
            let pts = SampleBox::cube(4, -1.0, 1.0).points(samples, seed);
            let (_, res) = vortex_residual_unchecked(&compressible_counterexample(), &pts)?;
            Ok(measured(res, pts.len()))
        }),
        single("pressure_path_independence", "Example 5", 1e-7, move |_| {
            let targets = SampleBox::cube(3, -1.0, 1.0).points(samples, seed);
            let rep = pressure_recovery(&rigid_rotation(1.0), 0.0, &[0.0; 3], &targets, 1e-8)?;
            Ok(measured(rep.path_gap, targets.len()))
        }),
        single("curl_parametrization", "Example 5", 1e-10, move |r| {
            let b = SampleBox::cube(3, -1.0, 1.0);
            let vars = var_names("z", 3);
            let theta = ExprMap::new(&vars, (0..3).map(|_| random_polynomial(&vars, 3, 1.0, r)).collect())?;
            let rep = curl_parametrization_check(&theta, &b.points(samples, seed), &b, r)?;
            Ok(measured(rep.max_divergence.max(rep.pairing_gap() / (1.0 + rep.lhs.abs())), samples))
        }),
    ];
    if let Some(Fixture::Family(f)) = &cfg.fixture {
        let f = f.clone();
        let id = format!("fixture_{}", f.label);
        tasks.push(multi(
            "Theorem 2",
            &[(format!("{id}_compatibility"), 1e-8), (format!("{id}_mass_conservation"), 1e-8)],
            move |_| {
                let pts = f.samples(per_family, seed);
                let comp = f.compatibility_residual(&pts)?.map_or(0.0, |(a, b)| a.max(b));
                Ok(vec![
                    measured(comp, pts.len()),
                    measured(f.mass_conservation_residual(&pts)?, pts.len()),
                ])
            },
        ));
    }
    tasks
}

fn swell_samples(samples: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    Ok(SampleBox::new(vec![0.0, 0.0, 0.0], vec![20.0, 5.0, 2.0 * std::f64::consts::PI])?.points(samples, seed))
}

fn swell_tasks<'a>(cfg: &SuiteConfig) -> Vec<Task<'a>> {
    let samples = cfg.samples;
    let seed = cfg.seed;
    let p = cfg.swell;
    let (p2, p3) = (p, p);
    vec![
        multi(
            "Example 7",
            &[
                ("swell_jacobian".to_string(), 1e-9),
                ("swell_circularity".to_string(), 1e-10),
                ("swell_moving_frame".to_string(), 1e-9),
            ],
            move |_| {
                let rep = swell_check(&p, &swell_samples(samples, seed)?)?;
                Ok(vec![
                    measured(rep.jacobian_drift, rep.samples),
                    measured(rep.circle_deviation, rep.samples),
                    measured(rep.moving_frame_drift, rep.samples),
                ])
            },
        ),
        single("swell_mass_conservation", "Example 7", 1e-10, move |_| {
            let fam = swell_family(&p2, SampleBox::new(vec![-3.0, 0.5, 0.0], vec![3.0, 3.0, 3.0])?)?;
            let pts = fam.samples((samples / 4).max(4), seed);
            Ok(measured(fam.mass_conservation_residual(&pts)?, pts.len()))
        }),
        control("swell_decay_mismatch_control", "Example 7", 1e-3, move |_| {
            let bad = SwellParams {
                k_r: Some(3.0 * p3.k.max(0.1)),
                ..p3
            };
            let rep = swell_check(&bad, &swell_samples(samples, seed)?)?;
            Ok(measured(rep.jacobian_drift, rep.samples))
        }),
    ]
}

fn dual_point(x: &[f64]) -> Vec<Dual<f64>> {
    (0..x.len()).map(|i| Dual::seed(x[i], i, x.len())).collect()
}

fn elasticity_tasks<'a>(cfg: &SuiteConfig) -> Vec<Task<'a>> {
    let samples = cfg.samples;
    let seed = cfg.seed;
    let pts = move || SampleBox::cube(2, -1.0, 1.0).points(samples, seed);
    let pair_box = || SampleBox::new(vec![-1.0, -0.5], vec![0.5, 1.0]);
    vec![
        single("killing_riemann", "Killing operator", 1e-9, move |r| {
            let mut worst = 0.0f64;
            for _ in 0..10 {
                let xi = Displacement::random(4, r)?;
                for x in pts() {
                    worst = worst.max(el::killing_compatibility(&xi, &x)?.abs());
                }
            }
            Ok(measured(worst, 10 * samples))
        }),
        single("pairing_identity_2d", "stress equations", 1e-10, move |r| {
            let mut worst = 0.0f64;
            for _ in 0..10 {
                let st = StressState::random(4, r)?;
                let xi = Displacement::random(4, r)?;
                worst = worst.max(el::pairing_identity_check(&st, &xi, &pair_box()?, 9)?.gap);
            }
            Ok(measured(worst, 10 * 81))
        }),
        control("pairing_dropped_antisymmetry_control", "couple-stress equations", 1e-6, move |r| {
            let st = StressState::random(4, r)?;
            let xi = Displacement::random(4, r)?;
            Ok(measured(el::pairing_without_antisymmetric_stress(&st, &xi, &pair_box()?, 9)?.gap, 81))
        }),
        single("adjoint_printed_equations", "stress equations", 1e-12, move |r| {
            let mut worst = 0.0f64;
            for _ in 0..10 {
                let st = StressState::random(4, r)?;
                for x in pts() {
                    let got = el::adjoint_spencer(&st, &x)?;
                    let d = dual_point(&x);
                    let proto = Dual::constant(0.0, 2);
                    let s = st.stress_map().eval_generic(&d, &proto)?;
                    let m = st.couple_map().eval_generic(&d, &proto)?;
                    let f1 = s[0].tangent[0] + s[2].tangent[1];
                    let f2 = s[1].tangent[0] + s[3].tangent[1];
                    let m12 = m[0].tangent[0] + m[1].tangent[1] + s[1].value - s[2].value;
                    worst = worst
                        .max((got.f[0] - f1).abs())
                        .max((got.f[1] - f2).abs())
                        .max((got.m12 - m12).abs());
                }
            }
            Ok(measured(worst, 10 * samples))
        }),
        single("torsor_balance", "torsor equilibrium", 1e-10, move |r| {
            let b = SampleBox::new(vec![-1.0, -0.5], vec![2.0, 1.0])?;
            let mut worst = 0.0f64;
            for _ in 0..10 {
                let st = StressState::random(4, r)?;
                worst = worst.max(el::torsor_equilibrium_check(&st, &b, 4)?.max_gap());
            }
            Ok(measured(worst, 10 * 16))
        }),
        single("symmetry_without_couple_stress", "couple-stress equations", 0.0, move |r| {
            let mut worst = 0.0f64;
            for _ in 0..10 {
                let sigma = plane_map((0..4).map(|_| random_polynomial(&PLANE_VARS, 3, 1.0, r)).collect())?;
                let st = StressState::new(sigma, plane_map(vec![Expr::num(0.0), Expr::num(0.0)])?)?;
                for x in pts() {
                    let s = st.sigma(&x)?;
                    worst = worst.max((el::adjoint_spencer(&st, &x)?.m12 - (s[0][1] - s[1][0])).abs());
                }
            }
            Ok(measured(worst, 10 * samples))
        }),
        single("rigid_kernel_dimension", "rigid motions", 0.0, |_| {
            let worst = (1..=4).map(|d| (el::rigid_kernel(d).len() as f64 - 3.0).abs()).fold(0.0, f64::max);
            let count = (el::adjoint_equation_count(2) as f64 - 3.0).abs();
            Ok(measured(worst.max(count), 4))
        }),
        multi(
            "Example 8",
            &[("affine_1d_adjoint".to_string(), 1e-12), ("affine_1d_pairing".to_string(), 1e-10)],
            move |r| {
                let poly = |r: &mut ChaCha8Rng| ExprMap::new(&["x"], vec![random_polynomial(&["x"], 4, 1.0, r)]);
                let xs = SampleBox::new(vec![-0.5], vec![1.0])?.points(samples, seed);
                let (mut adj, mut gap) = (0.0f64, 0.0f64);
                for _ in 0..10 {
                    let (s, m, l1, l2) = (poly(r)?, poly(r)?, poly(r)?, poly(r)?);
                    for x in &xs {
                        let (f, mm) = el::affine_1d_adjoint(&s, &m, x[0])?;
                        let d = dual_point(x);
                        let proto = Dual::constant(0.0, 1);
                        let sd = &s.eval_generic(&d, &proto)?[0];
                        let md = &m.eval_generic(&d, &proto)?[0];
                        adj = adj.max((f - sd.tangent[0]).abs()).max((mm - (md.tangent[0] + sd.value)).abs());
                    }
                    gap = gap.max(el::affine_1d_pairing_check(&s, &m, &l1, &l2, -0.5, 1.0, 8)?.gap);
                }
                Ok(vec![measured(adj, 10 * xs.len()), measured(gap, 10 * 8)])
            },
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> SuiteConfig {
        SuiteConfig {
            samples: 16,
            timestamps: false,
            ..Default::default()
        }
    }

    #[test]
    fn unknown_suite() {
        assert!(matches!(run_suite("nope", &quick()), Err(Error::UnknownSuite(_))));
    }

    #[test]
    fn fixture_kinds() {
        let g = Fixture::from_json(include_str!("../fixtures/affine.json")).unwrap();
        assert_eq!(g.suite(), "group");
        let s = Fixture::from_json(r#"{"n": 1, "q": 2, "phi": ["y1_11"]}"#).unwrap();
        assert_eq!(s.suite(), "pseudogroup");
        assert!(matches!(Fixture::from_json(r#"{"x": 1}"#), Err(Error::Fixture(_))));
        assert!(matches!(Fixture::from_json("{"), Err(Error::Fixture(_))));
    }

    #[test]
    fn seeds_differ_per_check() {
        assert_ne!(id_seed(1, "a"), id_seed(1, "b"));
        assert_ne!(id_seed(1, "a"), id_seed(2, "a"));
    }

    #[test]
    fn group_suite_passes() {
        let rep = run_suite("group", &quick()).unwrap();
        for c in &rep.checks {
            assert!(c.passed(), "{c:?}");
            assert!(c.runtime_ms.is_none());
        }
        assert!(rep.check("curvature_of_pullback").unwrap().max_residual.unwrap() <= 1e-9);
    }

    #[test]
    fn elasticity_suite_passes() {
        let rep = run_suite("elasticity", &quick()).unwrap();
        for c in &rep.checks {
            assert!(c.passed(), "{c:?}");
        }
    }
}
