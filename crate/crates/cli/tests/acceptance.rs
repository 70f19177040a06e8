//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::Instant;

use anyhow::Result;
use layerfield::{
    add_noise, conditioning, err_at_index, err_inf, err_l2, grid_rel_l2, invert, reconstruct, retrieval_rhs,
    retrieve_dataset, solve_phase, synthesize_dataset, synthesize_phaseless, AdmissibleSet, Complex64, Dim,
    FarFieldDataset, FourierSeries, Index, InversionOptions, LatticeParams, Medium, NoiseSpec, PreparedSource,
    RetrievalReport, Source, SourceBox,
};
use layerfield_cli::commands::truth_grid;
use layerfield_cli::config::{preset, ExperimentConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Tolerances, fixed here and nowhere else.
const NOISELESS_RETRIEVAL: f64 = 1e-10;
const NOISY_L2_FACTOR: f64 = 2.0;
const NOISY_INF_FACTOR: f64 = 3.0;
const PER_INDEX_NOISY: f64 = 0.03;
const ROUND_TRIP: f64 = 1e-8;
const QUADRATURE_REL: f64 = 1e-10;
const IDENTITY: f64 = 1e-12;
const IMAG_PART: f64 = 1e-10;

const NOISY_EPSILONS: [f64; 5] = [0.005, 0.01, 0.02, 0.05, 0.1];
const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = fn() -> Result<Outcome>;

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

struct Run {
    exact: FarFieldDataset,
    clean: layerfield::PhaselessDataset,
    cfg: ExperimentConfig,
}

impl Run {
    fn new(cfg: ExperimentConfig) -> Result<Self> {
        let set = cfg.admissible_set()?;
        let rule = cfg.quadrature(&set)?;
        let exact = synthesize_dataset(set.medium(), &rule, &cfg.source()?, set.clone())?;
        let clean = synthesize_phaseless(&exact, &cfg.reference_config())?;
        Ok(Run { exact, clean, cfg })
    }

    fn retrieve(&self, epsilon: f64, seed: u64) -> Result<RetrievalReport> {
        let spec = NoiseSpec {
            epsilon,
            seed,
            scope: self.cfg.noise.scope,
        };
        let noisy = add_noise(&self.clean, &spec)?;
        Ok(retrieve_dataset(&noisy, self.cfg.retrieval_options())?)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn noiseless_2d() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["table1", "table2"] {
        let run = Run::new(preset(name)?)?;
        let r = run.retrieve(0.0, 1)?;
        let (l2, inf) = (err_l2(&run.exact, r.values())?, err_inf(&run.exact, r.values())?);
        pass &= l2 <= NOISELESS_RETRIEVAL && inf <= NOISELESS_RETRIEVAL;
        parts.push(format!(
            "{:?} entries={} err_l2={l2:.2e} err_inf={inf:.2e}",
            run.cfg.references.placement,
            run.exact.values().len()
        ));
    }
    Ok(outcome(pass, format!("{} (tol {NOISELESS_RETRIEVAL:e})", parts.join("; "))))
}

fn noisy_2d() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["table1", "table2"] {
        let run = Run::new(preset(name)?)?;
        let mut worst = (0.0f64, 0.0f64);
        for eps in NOISY_EPSILONS {
            let mut l2 = Vec::new();
            let mut inf = Vec::new();
            for seed in SEEDS {
                let r = run.retrieve(eps, seed)?;
                l2.push(err_l2(&run.exact, r.values())?);
                inf.push(err_inf(&run.exact, r.values())?);
            }
            let (m2, mi) = (median(l2), median(inf));
            pass &= m2 <= NOISY_L2_FACTOR * eps && mi <= NOISY_INF_FACTOR * eps;
            worst = (worst.0.max(m2 / eps), worst.1.max(mi / eps));
        }
        parts.push(format!(
            "{:?} max median err_l2/eps={:.2} err_inf/eps={:.2}",
            run.cfg.references.placement,
            worst.0,
            worst.1
        ));
    }
    Ok(outcome(
        pass,
        format!("{} (limits {NOISY_L2_FACTOR}, {NOISY_INF_FACTOR})", parts.join("; ")),
    ))
}

fn per_index_3d() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["table3", "table4"] {
        let cfg = preset(name)?;
        let run = Run::new(cfg.clone())?;
        let clean = run.retrieve(0.0, 1)?;
        let noisy: Vec<RetrievalReport> = SEEDS.iter().map(|&s| run.retrieve(0.01, s)).collect::<Result<_>>()?;
        let set = run.exact.set();
        for l in cfg.listed_indices() {
            let e0 = err_at_index(&run.exact, clean.values(), &l)?;
            let e1 = noisy
                .iter()
                .map(|r| err_at_index(&run.exact, r.values(), &l))
                .collect::<layerfield::Result<Vec<f64>>>()?;
            let worst = e1.iter().cloned().fold(0.0, f64::max);
            pass &= e0 <= NOISELESS_RETRIEVAL && worst <= PER_INDEX_NOISY;
            let pos = set.position(&l).expect("listed index measured");
            let e = &set.entries()[pos];
            let inside = set.medium().aperture_contains(set.dim(), e.observation.theta());
            parts.push(format!(
                "{}{l} |u|={:.1e}{} err0={e0:.1e} err1%max={worst:.2e}",
                &name[5..],
                run.exact.values()[pos].norm(),
                if inside { "" } else { " (grazing)" }
            ));
        }
    }
    Ok(outcome(
        pass,
        format!("{} (tol {NOISELESS_RETRIEVAL:e}, {PER_INDEX_NOISY})", parts.join("; ")),
    ))
}

/// Random Hermitian series on `count` admissible indices, pushed through
/// synthesis and inversion on the full-period box.
fn round_trip(dim: Dim, order: u32, count: usize, seed: u64) -> Result<f64> {
    let medium = Medium::new(2.0, 2.0 - std::f64::consts::PI / 1000.0)?;
    let params = LatticeParams::new(dim, order, 1.0, 1e-3).with_full_aperture(true);
    let set = Arc::new(AdmissibleSet::build(&medium, &params)?);
    let bx = SourceBox::new(dim, 1.0, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let candidates: Vec<Index> = set.entries().iter().map(|e| e.index).filter(|l| !l.is_zero()).collect();
    let mut truth = BTreeMap::new();
    while truth.len() < 2 * count {
        let l = candidates[rng.random_range(0..candidates.len())];
        if truth.contains_key(&l) {
            continue;
        }
        let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        truth.insert(l, c);
        truth.insert(l.neg(), c.conj());
    }
    let series = FourierSeries::new(1.0, truth.iter().map(|(l, c)| (*l, *c)))?;
    let rule = layerfield::default_rule(&set, &bx)?;
    let data = synthesize_dataset(&medium, &rule, &Source::Fourier(series), set.clone())?;
    let table = invert(data.values(), &set, &bx, InversionOptions::default())?;
    let mut worst = 0.0f64;
    for (l, c) in &truth {
        let got = table.get(l).unwrap_or_default();
        worst = worst.max((got - c).norm() / c.norm());
    }
    Ok(worst)
}

fn round_trip_2d() -> Result<Outcome> {
    let err = round_trip(Dim::Two, 20, 20, 11)?;
    Ok(outcome(
        err <= ROUND_TRIP,
        format!("2D N=20, 20 indices + conjugates: max rel err {err:.2e} (tol {ROUND_TRIP:e})"),
    ))
}

fn aperture_comparison() -> Result<Outcome> {
    let cfg = preset("fig2")?;
    let truth = truth_grid(&cfg)?;
    let bx = cfg.source_box()?;
    let rel = |cfg: &ExperimentConfig| -> Result<(usize, f64)> {
        let run = Run::new(cfg.clone())?;
        let r = run.retrieve(0.0, 1)?;
        let set = run.exact.set();
        let table = invert(r.values(), set, &bx, InversionOptions::default())?;
        let grid = reconstruct(&table, &bx, &cfg.resolution())?;
        Ok((set.len(), grid_rel_l2(&grid, &truth)?))
    };
    let mut limited = cfg.clone();
    limited.lattice.full_aperture = false;
    let mut full = cfg.clone();
    full.lattice.full_aperture = true;
    full.lattice.grazing = false;
    let mut grazing = full.clone();
    grazing.lattice.grazing = true;
    let (nl, el) = rel(&limited)?;
    let (nf, ef) = rel(&full)?;
    let (ng, eg) = rel(&grazing)?;
    Ok(outcome(
        ef < el,
        format!(
            "limited ({nl}) {el:.6e}; full aperture ({nf}) {ef:.6e}, gap {:.1e}; with grazing row ({ng}) {eg:.4e}",
            el - ef
        ),
    ))
}

fn quadrature_doubling() -> Result<Outcome> {
    let cfg = ExperimentConfig::default();
    let set = cfg.admissible_set()?;
    let rule = cfg.quadrature(&set)?;
    let fine = rule.doubled()?;
    let src = cfg.source()?;
    let (a, b) = (PreparedSource::new(&rule, &src)?, PreparedSource::new(&fine, &src)?);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut worst_abs = 0.0f64;
    let mut worst_at = (Index::zero(Dim::Two), 0.0);
    for _ in 0..10 {
        let e = &set.entries()[rng.random_range(0..set.len())];
        let (u, v) = (a.far_field(set.medium(), e)?, b.far_field(set.medium(), e)?);
        worst_abs = worst_abs.max((u - v).norm());
        let rel = (u - v).norm() / v.norm();
        if rel > worst {
            worst = rel;
            worst_at = (e.index, v.norm());
        }
    }
    Ok(outcome(
        worst <= QUADRATURE_REL,
        format!(
            "orders {:?} vs {:?}: max rel diff {worst:.2e} at {} with |u|={:.1e}, max abs diff {worst_abs:.1e} (tol {QUADRATURE_REL:e})",
            rule.orders(),
            fine.orders(),
            worst_at.0,
            worst_at.1
        ),
    ))
}

fn identities() -> Result<Outcome> {
    let medium = Medium::new(2.0, 2.0 - std::f64::consts::PI / 1000.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let tc = medium.critical_angle();
    let mut t_err = 0.0f64;
    for _ in 0..1000 {
        let theta = rng.random_range(tc..std::f64::consts::PI - tc);
        let (t, h) = (medium.transmission(theta)?, medium.reflection(theta)?);
        t_err = t_err.max((t - 1.0 - h).abs());
    }
    let unit = |rng: &mut ChaCha8Rng| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let mut f_err = 0.0f64;
    for _ in 0..10_000 {
        let (u, phi) = (unit(&mut rng), unit(&mut rng));
        let c = rng.random_range(0.5..2.0);
        let f = retrieval_rhs(u.norm(), (u - phi * c).norm(), c, phi)?;
        f_err = f_err.max((f - (u.re * phi.re + u.im * phi.im)).abs());
    }
    let mut s_err = 0.0f64;
    let mut solved = 0;
    while solved < 10_000 {
        let (u, p1, p2) = (unit(&mut rng), unit(&mut rng), unit(&mut rng));
        if conditioning(p1, p2) < 0.5 || p1.norm() < 0.1 || p2.norm() < 0.1 {
            continue;
        }
        let f = |p: Complex64| u.re * p.re + u.im * p.im;
        let got = solve_phase(p1, p2, f(p1), f(p2), 1e-12)?;
        s_err = s_err.max((got - u).norm());
        solved += 1;
    }
    Ok(outcome(
        t_err <= IDENTITY && f_err <= IDENTITY && s_err <= IDENTITY,
        format!("T-1-H {t_err:.1e}, f_j {f_err:.1e}, Cramer {s_err:.1e} (tol {IDENTITY:e})"),
    ))
}

fn run_pipeline(dir: &Path, config: &Path, workers: usize) -> Result<()> {
    let status = Command::new(env!("CARGO_BIN_EXE_layerfield"))
        .arg("--config")
        .arg(config)
        .arg("--output")
        .arg(dir)
        .arg("--workers")
        .arg(workers.to_string())
        .arg("pipeline")
        .stdout(std::process::Stdio::null())
        .status()?;
    anyhow::ensure!(status.success(), "pipeline exited with {status}");
    Ok(())
}

fn artifacts(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir)? {
        let p = e?.path();
        let name = p.file_name().unwrap_or_default().to_string_lossy().to_string();
        if name != "run_metadata.json" {
            out.insert(name, std::fs::read(&p)?);
        }
    }
    Ok(out)
}

fn determinism() -> Result<Outcome> {
    let tmp = tempfile::tempdir()?;
    let config = tmp.path().join("run.toml");
    std::fs::write(&config, "[noise]\nepsilons = [0.01]\nseeds = [3]\n")?;
    let dirs: Vec<_> = ["a", "b", "c"].iter().map(|d| tmp.path().join(d)).collect();
    run_pipeline(&dirs[0], &config, 1)?;
    run_pipeline(&dirs[1], &config, 1)?;
    run_pipeline(&dirs[2], &config, 4)?;
    let sets: Vec<_> = dirs.iter().map(|d| artifacts(d)).collect::<Result<_>>()?;
    let same_run = sets[0] == sets[1];
    let same_workers = sets[0] == sets[2];
    Ok(outcome(
        same_run && same_workers && sets[0].len() >= 6,
        format!(
            "{} artifacts; rerun identical: {same_run}; workers 1 vs 4 identical: {same_workers}",
            sets[0].len()
        ),
    ))
}

fn reconstruction_3d() -> Result<Outcome> {
    let cfg = preset("fig3")?;
    let run = Run::new(cfg.clone())?;
    let r = run.retrieve(0.0, 1)?;
    let bx = cfg.source_box()?;
    let table = invert(r.values(), run.exact.set(), &bx, InversionOptions::default())?;
    let grid = reconstruct(&table, &bx, &cfg.resolution())?;
    let imag = grid.max_imag();
    let rt = round_trip(Dim::Three, 4, 20, 12)?;
    Ok(outcome(
        imag <= IMAG_PART && rt <= ROUND_TRIP,
        format!(
            "N=10 grid max |Im|={imag:.1e} (tol {IMAG_PART:e}); 3D N=4 round trip max rel err {rt:.2e} (tol {ROUND_TRIP:e})"
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 9] = [
        ("1 noiseless 2D retrieval", noiseless_2d),
        ("2 noisy 2D retrieval trend", noisy_2d),
        ("3 3D per-index retrieval", per_index_3d),
        ("4 Fourier round trip", round_trip_2d),
        ("5 limited vs full aperture", aperture_comparison),
        ("6 quadrature doubling", quadrature_doubling),
        ("7 identity suite", identities),
        ("8 determinism", determinism),
        ("3D substitute", reconstruction_3d),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let t0 = Instant::now();
        let (pass, detail) = match f() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e:#}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} [{name}] {detail} ({:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
