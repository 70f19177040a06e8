use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use layerfield::io::{self, FileMeta};
use layerfield::{
    add_noise, err_at_index, err_inf, err_l2, grid_rel_l2, invert, oracle_table, reconstruct, resolving_orders,
    retrieve_dataset, synthesize_dataset, synthesize_phaseless, AdmissibleSet, FarFieldDataset, GridField,
    InversionOptions, MetricRecord, NoiseSpec, PhaselessDataset, QuadratureRule, RetrievalFlag, RetrievalReport,
};
use serde_json::{json, Value};

use crate::config::ExperimentConfig;

pub struct RunContext {
    pub cfg: ExperimentConfig,
    pub hash: String,
}

impl RunContext {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let hash = cfg.hash();
        Ok(RunContext { cfg, hash })
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cfg.output.join(name)
    }

    fn write(&self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> layerfield::Result<()>) -> Result<()> {
        std::fs::create_dir_all(&self.cfg.output)
            .with_context(|| format!("creating {}", self.cfg.output.display()))?;
        let path = self.out(name);
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        f(&mut w).with_context(|| format!("writing {}", path.display()))?;
        w.flush()?;
        Ok(())
    }

    fn write_json(&self, name: &str, v: &Value) -> Result<()> {
        self.write(name, |w| {
            let s = serde_json::to_string_pretty(v).expect("json value");
            writeln!(w, "{s}")?;
            Ok(())
        })
    }

    fn check_hash(&self, meta: &FileMeta, path: &Path) -> Result<()> {
        match &meta.config_hash {
            Some(h) if *h == self.hash => Ok(()),
            Some(h) => bail!(
                "{} was produced by config {h}, current config is {}; refusing to mix artifacts",
                path.display(),
                self.hash
            ),
            None => bail!("{} has no config hash", path.display()),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

struct Synthesis {
    set: Arc<AdmissibleSet>,
    rule: QuadratureRule,
    exact: FarFieldDataset,
    clean: PhaselessDataset,
}

fn synthesize_all(ctx: &RunContext, set: Arc<AdmissibleSet>) -> Result<Synthesis> {
    let cfg = &ctx.cfg;
    let rule = cfg.quadrature(&set)?;
    let source = cfg.source()?;
    let exact = synthesize_dataset(set.medium(), &rule, &source, set.clone())?;
    let clean = synthesize_phaseless(&exact, &cfg.reference_config())?;
    Ok(Synthesis {
        set,
        rule,
        exact,
        clean,
    })
}

fn noise_spec(cfg: &ExperimentConfig, epsilon: f64, seed: u64) -> NoiseSpec<f64> {
    NoiseSpec {
        epsilon,
        seed,
        scope: cfg.noise.scope,
    }
}

pub fn synthesize(ctx: &RunContext) -> Result<()> {
    let t0 = Instant::now();
    let s = synthesize_all(ctx, ctx.cfg.admissible_set()?)?;
    let (eps, seed) = (ctx.cfg.noise.epsilons[0], ctx.cfg.noise.seeds[0]);
    let measured = add_noise(&s.clean, &noise_spec(&ctx.cfg, eps, seed))?;
    ctx.write("lattice.csv", |w| io::write_lattice(w, &s.set, &ctx.hash))?;
    ctx.write("farfield.csv", |w| io::write_farfield(w, &s.exact, &ctx.hash))?;
    ctx.write("phaseless.csv", |w| io::write_phaseless(w, &measured, &ctx.hash))?;
    println!(
        "synthesized {} lattice entries ({} non-zero), quadrature {:?}, noise {eps} (seed {seed}), {:.2}s",
        s.set.len(),
        s.set.len() - 1,
        s.rule.orders(),
        t0.elapsed().as_secs_f64()
    );
    Ok(())
}

fn retrieval_metrics(ctx: &RunContext, exact: &FarFieldDataset, r: &RetrievalReport, epsilon: f64, seed: u64) -> Vec<MetricRecord> {
    let rec = |metric: String, value: f64| MetricRecord {
        metric,
        value,
        epsilon,
        seed,
        config_hash: ctx.hash.clone(),
    };
    let mut out = Vec::new();
    if let Ok(v) = err_l2(exact, r.values()) {
        out.push(rec("err_l2".into(), v));
    }
    if let Ok(v) = err_inf(exact, r.values()) {
        out.push(rec("err_inf".into(), v));
    }
    for l in ctx.cfg.listed_indices() {
        if let Ok(v) = err_at_index(exact, r.values(), &l) {
            out.push(rec(format!("err_at_index{l}"), v));
        }
    }
    out
}

pub fn retrieve(ctx: &RunContext, input: Option<PathBuf>, exact: Option<PathBuf>) -> Result<()> {
    let set = ctx.cfg.admissible_set()?;
    let input = input.unwrap_or_else(|| ctx.out("phaseless.csv"));
    let (data, meta) = io::read_phaseless(&read(&input)?, set.clone(), ctx.cfg.reference_config())
        .with_context(|| format!("parsing {}", input.display()))?;
    ctx.check_hash(&meta, &input)?;
    let report = retrieve_dataset(&data, ctx.cfg.retrieval_options())?;
    ctx.write("retrieval.csv", |w| io::write_retrieval(w, &report, &ctx.hash))?;
    println!(
        "retrieved {} entries: {} ok, {} degenerate, {} near-singular",
        report.values().len(),
        report.count(RetrievalFlag::Ok),
        report.count(RetrievalFlag::Degenerate),
        report.count(RetrievalFlag::NearSingular)
    );
    let exact_path = exact.unwrap_or_else(|| ctx.out("farfield.csv"));
    if exact_path.exists() {
        let (ex, meta) = io::read_farfield(&read(&exact_path)?, set)
            .with_context(|| format!("parsing {}", exact_path.display()))?;
        ctx.check_hash(&meta, &exact_path)?;
        let m = retrieval_metrics(ctx, &ex, &report, ctx.cfg.noise.epsilons[0], ctx.cfg.noise.seeds[0]);
        for r in &m {
            println!("{} = {:e}", r.metric, r.value);
        }
        ctx.write_json("retrieve_metrics.json", &serde_json::to_value(&m)?)?;
    }
    Ok(())
}

/// Far-field values from a phased (`farfield`) or retrieved (`retrieval`) file.
fn read_values(ctx: &RunContext, path: &Path, set: Arc<AdmissibleSet>) -> Result<Vec<num_complex::Complex<f64>>> {
    let text = read(path)?;
    let first = text.lines().next().unwrap_or("");
    let (values, meta) = if first.starts_with("# layerfield retrieval") {
        let (r, m) = io::read_retrieval(&text, set).with_context(|| format!("parsing {}", path.display()))?;
        (r.values().to_vec(), m)
    } else {
        let (d, m) = io::read_farfield(&text, set).with_context(|| format!("parsing {}", path.display()))?;
        (d.values().to_vec(), m)
    };
    ctx.check_hash(&meta, path)?;
    Ok(values)
}

fn inversion_options(cfg: &ExperimentConfig) -> InversionOptions {
    InversionOptions {
        real_source: cfg.inversion.real_source,
        zero_mode: cfg.inversion.zero_mode,
    }
}

pub fn invert_cmd(ctx: &RunContext, input: Option<PathBuf>) -> Result<()> {
    if !ctx.cfg.lattice.indices.is_empty() {
        bail!("lattice.indices: inversion needs the full lattice");
    }
    let set = ctx.cfg.admissible_set()?;
    let input = input.unwrap_or_else(|| {
        let r = ctx.out("retrieval.csv");
        if r.exists() {
            r
        } else {
            ctx.out("farfield.csv")
        }
    });
    let values = read_values(ctx, &input, set.clone())?;
    let bx = ctx.cfg.source_box()?;
    let table = invert(&values, &set, &bx, inversion_options(&ctx.cfg))?;
    let grid = reconstruct(&table, &bx, &ctx.cfg.resolution())?;
    ctx.write("coefficients.csv", |w| io::write_coefficients(w, &table, &ctx.hash))?;
    ctx.write("reconstruction.csv", |w| io::write_grid(w, &grid, &ctx.hash))?;
    let counts = table.counts();
    println!(
        "{} coefficients: {} measured, {} symmetry-completed, {} zeroed (unobservable), {} zero-mode",
        table.len(),
        counts.measured,
        counts.symmetry_completed,
        counts.zeroed_unobservable,
        counts.zero_mode_corrected
    );
    ctx.write_json(
        "invert_summary.json",
        &json!({
            "config_hash": ctx.hash,
            "input": input.file_name().map(|f| f.to_string_lossy().to_string()),
            "provenance": counts,
            "incomplete": table.is_incomplete(),
            "max_imag": grid.max_imag(),
        }),
    )
}

pub fn evaluate(ctx: &RunContext, input: Option<PathBuf>, exact: Option<PathBuf>) -> Result<()> {
    let set = ctx.cfg.admissible_set()?;
    let exact_path = exact.unwrap_or_else(|| ctx.out("farfield.csv"));
    let (ex, meta) = io::read_farfield(&read(&exact_path)?, set.clone())
        .with_context(|| format!("parsing {}", exact_path.display()))?;
    ctx.check_hash(&meta, &exact_path)?;
    let input = input.unwrap_or_else(|| ctx.out("retrieval.csv"));
    let (r, meta) = io::read_retrieval(&read(&input)?, set).with_context(|| format!("parsing {}", input.display()))?;
    ctx.check_hash(&meta, &input)?;
    let m = retrieval_metrics(ctx, &ex, &r, ctx.cfg.noise.epsilons[0], ctx.cfg.noise.seeds[0]);
    let v = serde_json::to_value(&m)?;
    println!("{}", serde_json::to_string_pretty(&v)?);
    ctx.write_json("evaluate.json", &v)
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Retrieval for one `(ε, seed)` pair.
fn noisy_retrieval(ctx: &RunContext, s: &Synthesis, epsilon: f64, seed: u64) -> Result<(RetrievalReport, usize)> {
    let noisy = add_noise(&s.clean, &noise_spec(&ctx.cfg, epsilon, seed))?;
    let clamped = noisy.rows().iter().filter(|r| r.clamped).count();
    Ok((retrieve_dataset(&noisy, ctx.cfg.retrieval_options())?, clamped))
}

struct Reconstruction {
    grid: GridField,
    value: Value,
}

fn reconstruct_from(ctx: &RunContext, set: &AdmissibleSet, values: &[num_complex::Complex<f64>]) -> Result<(layerfield::CoefficientTable, Reconstruction)> {
    let bx = ctx.cfg.source_box()?;
    let table = invert(values, set, &bx, inversion_options(&ctx.cfg))?;
    let grid = reconstruct(&table, &bx, &ctx.cfg.resolution())?;
    let value = json!({
        "provenance": table.counts(),
        "incomplete": table.is_incomplete(),
        "max_imag": grid.max_imag(),
    });
    Ok((table, Reconstruction { grid, value }))
}

/// Grid of the truncated series whose coefficients are quadrature integrals
/// of the true source.
pub fn truth_grid(cfg: &ExperimentConfig) -> Result<GridField> {
    let bx = cfg.source_box()?;
    let order = cfg.order();
    let k = std::f64::consts::TAU * order as f64 / cfg.source_box.period;
    let base = layerfield::quadrature::default_orders(cfg.dimension());
    let rule = QuadratureRule::new(bx, &resolving_orders(&bx, &vec![k; cfg.dim], &base))?;
    let table = oracle_table(&cfg.source()?, &rule, order, cfg.source_box.period)?;
    Ok(reconstruct(&table, &bx, &cfg.resolution())?)
}

pub fn pipeline(ctx: &RunContext) -> Result<()> {
    let cfg = &ctx.cfg;
    let t0 = Instant::now();
    let mut stage = "synthesize";
    let result = (|| -> Result<()> {
        let s = synthesize_all(ctx, cfg.admissible_set()?)?;
        ctx.write("lattice.csv", |w| io::write_lattice(w, &s.set, &ctx.hash))?;
        ctx.write("farfield.csv", |w| io::write_farfield(w, &s.exact, &ctx.hash))?;
        ctx.write("phaseless.csv", |w| io::write_phaseless(w, &s.clean, &ctx.hash))?;

        stage = "retrieve";
        let mut records = Vec::new();
        let mut rows = Vec::new();
        let mut first: Option<RetrievalReport> = None;
        for &eps in &cfg.noise.epsilons {
            let mut per_seed: Vec<Vec<MetricRecord>> = Vec::new();
            let (mut clamped, mut singular, mut degenerate) = (0, 0, 0);
            for &seed in &cfg.noise.seeds {
                let (r, c) = noisy_retrieval(ctx, &s, eps, seed)?;
                clamped += c;
                singular += r.count(RetrievalFlag::NearSingular);
                degenerate += r.count(RetrievalFlag::Degenerate);
                per_seed.push(retrieval_metrics(ctx, &s.exact, &r, eps, seed));
                if first.is_none() {
                    first = Some(r);
                }
            }
            let names: Vec<String> = per_seed[0].iter().map(|m| m.metric.clone()).collect();
            let mut medians = serde_json::Map::new();
            for name in names {
                let vals: Vec<f64> = per_seed
                    .iter()
                    .filter_map(|ms| ms.iter().find(|m| m.metric == name).map(|m| m.value))
                    .collect();
                medians.insert(name, json!(median(vals)));
            }
            rows.push(json!({
                "epsilon": eps,
                "median": medians,
                "clamped": clamped,
                "near_singular": singular,
                "degenerate": degenerate,
            }));
            records.extend(per_seed.into_iter().flatten());
        }
        let first = first.expect("at least one epsilon and seed");
        ctx.write("retrieval.csv", |w| io::write_retrieval(w, &first, &ctx.hash))?;

        let mut inversion = Value::Null;
        if cfg.inversion.enabled {
            stage = "invert";
            let (table, rec) = reconstruct_from(ctx, &s.set, first.values())?;
            ctx.write("coefficients.csv", |w| io::write_coefficients(w, &table, &ctx.hash))?;
            ctx.write("reconstruction.csv", |w| io::write_grid(w, &rec.grid, &ctx.hash))?;
            let mut inv = rec.value;
            let truth = if cfg.inversion.truth {
                let t = truth_grid(cfg)?;
                ctx.write("truth.csv", |w| io::write_grid(w, &t, &ctx.hash))?;
                inv["grid_rel_l2"] = json!(grid_rel_l2(&rec.grid, &t)?);
                Some(t)
            } else {
                None
            };
            if cfg.inversion.compare_full_aperture {
                let mut full_cfg = cfg.clone();
                full_cfg.lattice.full_aperture = true;
                full_cfg.lattice.grazing = cfg.inversion.compare_grazing;
                let fs = synthesize_all(ctx, full_cfg.admissible_set()?)?;
                let (r, _) = noisy_retrieval(ctx, &fs, cfg.noise.epsilons[0], cfg.noise.seeds[0])?;
                let (_, frec) = reconstruct_from(ctx, &fs.set, r.values())?;
                ctx.write("reconstruction_full_aperture.csv", |w| io::write_grid(w, &frec.grid, &ctx.hash))?;
                let mut fv = frec.value;
                fv["entries"] = json!(fs.set.len());
                if let Some(t) = &truth {
                    fv["grid_rel_l2"] = json!(grid_rel_l2(&frec.grid, t)?);
                }
                inv["full_aperture"] = fv;
            }
            inversion = inv;
        }

        stage = "evaluate";
        let summary = json!({
            "config_hash": ctx.hash,
            "dim": cfg.dim,
            "order": cfg.order(),
            "placement": cfg.references.placement,
            "entries": s.set.len(),
            "quadrature_orders": s.rule.orders(),
            "table": rows,
            "inversion": inversion,
            "metrics": records,
        });
        ctx.write_json("summary.json", &summary)?;
        for row in &rows_summary(&summary) {
            println!("{row}");
        }
        Ok(())
    })();
    let status = match &result {
        Ok(()) => json!({"status": "complete"}),
        Err(e) => json!({"status": "failed", "stage": stage, "error": format!("{e:#}")}),
    };
    let started = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut meta = json!({
        "finished_unix": started,
        "elapsed_seconds": t0.elapsed().as_secs_f64(),
        "workers": rayon::current_num_threads(),
        "version": env!("CARGO_PKG_VERSION"),
    });
    meta.as_object_mut().expect("object").extend(status.as_object().expect("object").clone());
    ctx.write_json("run_metadata.json", &meta)?;
    result
}

fn rows_summary(summary: &Value) -> Vec<String> {
    let mut out = vec![format!("config {}", summary["config_hash"].as_str().unwrap_or(""))];
    if let Some(rows) = summary["table"].as_array() {
        for r in rows {
            let med = r["median"].as_object().cloned().unwrap_or_default();
            let parts: Vec<String> = med
                .iter()
                .map(|(k, v)| format!("{k}={}", v.as_f64().map(|x| format!("{x:.3e}")).unwrap_or("n/a".into())))
                .collect();
            out.push(format!("eps={:<6} {}", r["epsilon"], parts.join(" ")));
        }
    }
    if let Some(g) = summary["inversion"]["grid_rel_l2"].as_f64() {
        out.push(format!("grid_rel_l2={g:.4e}"));
    }
    if let Some(g) = summary["inversion"]["full_aperture"]["grid_rel_l2"].as_f64() {
        out.push(format!("grid_rel_l2_full_aperture={g:.4e}"));
    }
    out
}
