//! Experiment configuration: TOML files layered over built-in presets.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use layerfield::inversion::ZeroModeScheme;
use layerfield::{
    AdmissibleSet, Dim, FourierSeries, Index, LatticeParams, Medium, NoiseScope, Placement, QuadratureRule,
    ReferenceConfig, RetrievalOptions, Source, SourceBox, ZeroDirection,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const PRESETS: [&str; 6] = ["table1", "table2", "table3", "table4", "fig2", "fig3"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub medium: MediumConfig,
    #[serde(rename = "box")]
    pub source_box: BoxConfig,
    pub lattice: LatticeConfig,
    pub quadrature: QuadratureConfig,
    pub source: SourceConfig,
    pub references: ReferenceSettings,
    pub noise: NoiseConfig,
    pub retrieval: RetrievalConfig,
    pub inversion: InversionConfig,
    pub output: PathBuf,
    pub workers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MediumConfig {
    pub c_minus: f64,
    pub c_plus: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoxConfig {
    /// Horizontal period `a`.
    pub period: f64,
    /// Depth `L` of the source box below the interface.
    pub depth: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeConfig {
    /// Truncation order; 50 in 2D and 10 in 3D when unset.
    pub order: Option<u32>,
    pub lambda: f64,
    pub full_aperture: bool,
    /// With `full_aperture`, also measure `l_n = 0` indices at grazing
    /// observation angles.
    pub grazing: bool,
    pub zero_direction: ZeroDirection,
    /// Restrict the measurement set to these indices (plus the zero index).
    pub indices: Vec<Vec<i32>>,
    /// With `indices`, also measure every admissible index sharing a
    /// frequency with a listed one, so reference scaling sees the whole
    /// frequency.
    pub include_shells: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    /// Per-axis Gauss–Legendre orders. Empty selects orders that resolve the
    /// highest frequency of the lattice (never below 100 in 2D, 50 in 3D).
    pub orders: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Analytic2d,
    Analytic3d,
    Fourier,
    Zero,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    /// Defaults to the analytic source of the configured dimension.
    pub kind: Option<SourceKind>,
    /// Coefficient CSV for `kind = "fourier"`.
    pub file: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSettings {
    pub placement: Placement,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    pub alpha2_zero_index: Option<f64>,
    pub det_threshold: f64,
    pub conditioning_target: f64,
    pub max_halvings: u32,
    /// Frequencies whose largest `|u|` is at or below this are flagged
    /// degenerate.
    pub degenerate_threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub epsilons: Vec<f64>,
    pub seeds: Vec<u64>,
    pub scope: NoiseScope,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    pub rescale_from_measurements: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InversionConfig {
    pub enabled: bool,
    pub real_source: bool,
    pub zero_mode: ZeroModeScheme,
    /// Grid resolution; 100×50 in 2D, 40×40×20 in 3D when empty.
    pub resolution: Vec<usize>,
    /// Also reconstruct from the full-aperture lattice and compare.
    pub compare_full_aperture: bool,
    /// In that comparison, also measure `l_n = 0` at grazing angles.
    pub compare_grazing: bool,
    /// Compare against the truncated series built from quadrature
    /// coefficients of the true source.
    pub truth: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dim: 2,
            medium: MediumConfig::default(),
            source_box: BoxConfig::default(),
            lattice: LatticeConfig::default(),
            quadrature: QuadratureConfig::default(),
            source: SourceConfig::default(),
            references: ReferenceSettings::default(),
            noise: NoiseConfig::default(),
            retrieval: RetrievalConfig::default(),
            inversion: InversionConfig::default(),
            output: PathBuf::from("out"),
            workers: 0,
        }
    }
}

impl Default for MediumConfig {
    fn default() -> Self {
        MediumConfig {
            c_minus: 2.0,
            c_plus: 2.0 - std::f64::consts::PI / 1000.0,
        }
    }
}

impl Default for BoxConfig {
    fn default() -> Self {
        BoxConfig { period: 1.0, depth: 0.5 }
    }
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig {
            order: None,
            lambda: 1e-3,
            full_aperture: false,
            grazing: false,
            zero_direction: ZeroDirection::Vertical,
            indices: Vec::new(),
            include_shells: false,
        }
    }
}

impl Default for ReferenceSettings {
    fn default() -> Self {
        let r = ReferenceConfig::lower();
        ReferenceSettings {
            placement: Placement::Lower,
            alpha1: None,
            alpha2: None,
            alpha2_zero_index: None,
            det_threshold: r.det_threshold,
            conditioning_target: r.conditioning_target,
            max_halvings: r.max_halvings,
            degenerate_threshold: r.degenerate_threshold,
        }
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            epsilons: vec![0.0],
            seeds: vec![1],
            scope: NoiseScope::FarField,
        }
    }
}

impl Default for InversionConfig {
    fn default() -> Self {
        InversionConfig {
            enabled: true,
            real_source: true,
            zero_mode: ZeroModeScheme::ExactBox,
            resolution: Vec::new(),
            compare_full_aperture: false,
            compare_grazing: false,
            truth: true,
        }
    }
}

const TABLE_EPSILONS: [f64; 6] = [0.0, 0.005, 0.01, 0.02, 0.05, 0.1];
const TABLE_3D_INDICES: [[i32; 3]; 5] = [[-2, 0, 1], [1, 0, 3], [17, -13, 0], [-27, 9, 14], [-30, -10, 23]];

/// Built-in experiment presets.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig::default();
    match name {
        "table1" | "table2" => {
            c.noise.epsilons = TABLE_EPSILONS.to_vec();
            c.noise.seeds = (1..=5).collect();
            c.inversion.enabled = false;
            if name == "table2" {
                c.references.placement = Placement::Upper;
            }
        }
        "table3" | "table4" => {
            c.dim = 3;
            c.lattice.order = Some(30);
            c.lattice.indices = TABLE_3D_INDICES.iter().map(|l| l.to_vec()).collect();
            c.noise.epsilons = TABLE_EPSILONS.to_vec();
            c.noise.seeds = (1..=5).collect();
            c.inversion.enabled = false;
            // The deep listed indices have |u| far below any absolute floor.
            c.references.degenerate_threshold = 0.0;
            if name == "table4" {
                c.references.placement = Placement::Upper;
            }
        }
        "fig2" => {
            c.inversion.compare_full_aperture = true;
            c.inversion.compare_grazing = true;
        }
        "fig3" => {
            c.dim = 3;
        }
        other => bail!("unknown preset '{other}' (expected one of {})", PRESETS.join(", ")),
    }
    Ok(c)
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Preset (or defaults) overlaid with the keys present in `file`.
pub fn load(file: Option<&Path>, preset_name: Option<&str>) -> Result<ExperimentConfig> {
    let base = match preset_name {
        Some(p) => preset(p)?,
        None => ExperimentConfig::default(),
    };
    let Some(path) = file else {
        return Ok(base);
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let over: toml::Value = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    let mut merged = toml::Value::try_from(&base).context("serialising base config")?;
    merge(&mut merged, over);
    let mut cfg: ExperimentConfig = merged
        .try_into()
        .with_context(|| format!("invalid config {}", path.display()))?;
    if let (Some(f), Some(dir)) = (cfg.source.file.as_mut(), path.parent()) {
        if f.is_relative() {
            *f = dir.join(&*f);
        }
    }
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn dimension(&self) -> Dim {
        Dim::new(self.dim).expect("validated")
    }

    pub fn order(&self) -> u32 {
        self.lattice.order.unwrap_or(if self.dim == 2 { 50 } else { 10 })
    }

    pub fn source_kind(&self) -> SourceKind {
        self.source
            .kind
            .unwrap_or(if self.dim == 2 { SourceKind::Analytic2d } else { SourceKind::Analytic3d })
    }

    pub fn resolution(&self) -> Vec<usize> {
        if self.inversion.resolution.is_empty() {
            if self.dim == 2 {
                vec![100, 50]
            } else {
                vec![40, 40, 20]
            }
        } else {
            self.inversion.resolution.clone()
        }
    }

    /// Checks every field before any computation; messages name the field.
    pub fn validate(&self) -> Result<()> {
        let mut errs: Vec<String> = Vec::new();
        let mut need = |ok: bool, msg: &str| {
            if !ok {
                errs.push(msg.to_string());
            }
        };
        let pos = |v: f64| v.is_finite() && v > 0.0;
        need(self.dim == 2 || self.dim == 3, "dim: must be 2 or 3");
        need(pos(self.medium.c_minus), "medium.c_minus: must be positive and finite");
        need(pos(self.medium.c_plus), "medium.c_plus: must be positive and finite");
        need(pos(self.source_box.period), "box.period: must be positive");
        need(pos(self.source_box.depth), "box.depth: must be positive");
        need(self.order() >= 1, "lattice.order: must be at least 1");
        need(
            self.lattice.lambda > 0.0 && self.lattice.lambda < 1.0,
            "lattice.lambda: must lie in (0, 1)",
        );
        need(
            self.lattice.indices.iter().all(|l| l.len() == self.dim),
            "lattice.indices: every index needs `dim` components",
        );
        need(
            self.lattice
                .indices
                .iter()
                .all(|l| l.iter().all(|v| v.unsigned_abs() <= self.order())),
            "lattice.indices: components must not exceed lattice.order",
        );
        need(
            self.quadrature.orders.is_empty() || self.quadrature.orders.len() == self.dim,
            "quadrature.orders: needs one order per axis",
        );
        need(
            self.quadrature.orders.iter().all(|&o| o >= 1),
            "quadrature.orders: orders must be at least 1",
        );
        let kind_ok = match self.source_kind() {
            SourceKind::Analytic2d => self.dim == 2,
            SourceKind::Analytic3d => self.dim == 3,
            SourceKind::Fourier => self.source.file.as_ref().is_some_and(|f| f.exists()),
            SourceKind::Zero => true,
        };
        need(
            kind_ok,
            "source.kind: must match dim (analytic_2d/analytic_3d) or name an existing source.file",
        );
        need(!self.noise.epsilons.is_empty(), "noise.epsilons: must not be empty");
        need(
            self.noise.epsilons.iter().all(|&e| e.is_finite() && e >= 0.0),
            "noise.epsilons: must be non-negative",
        );
        need(!self.noise.seeds.is_empty(), "noise.seeds: must not be empty");
        need(pos(self.references.det_threshold), "references.det_threshold: must be positive");
        need(
            pos(self.references.conditioning_target),
            "references.conditioning_target: must be positive",
        );
        let res = self.resolution();
        need(
            res.len() == self.dim && res.iter().all(|&r| r >= 2),
            "inversion.resolution: needs `dim` entries, each at least 2",
        );
        need(
            !(self.inversion.enabled && !self.lattice.indices.is_empty()),
            "inversion.enabled: reconstruction needs the full lattice (clear lattice.indices)",
        );
        if errs.is_empty() {
            if let Err(e) = self.reference_config().validate() {
                errs.push(format!("references: {e}"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            bail!("invalid configuration:\n  {}", errs.join("\n  "))
        }
    }

    /// Hex SHA-256 of everything that affects numerical output.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = PathBuf::new();
        c.workers = 0;
        let canon = serde_json::to_vec(&c).expect("config serialises");
        let mut h = Sha256::new();
        h.update(&canon);
        if let Some(f) = &self.source.file {
            if let Ok(bytes) = std::fs::read(f) {
                h.update(&bytes);
            }
        }
        hex::encode(h.finalize())[..16].to_string()
    }

    pub fn medium(&self) -> Result<Medium> {
        Ok(Medium::new(self.medium.c_minus, self.medium.c_plus)?)
    }

    pub fn source_box(&self) -> Result<SourceBox> {
        Ok(SourceBox::new(self.dimension(), self.source_box.period, self.source_box.depth)?)
    }

    pub fn lattice_params(&self) -> LatticeParams<f64> {
        LatticeParams::new(self.dimension(), self.order(), self.source_box.period, self.lattice.lambda)
            .with_full_aperture(self.lattice.full_aperture)
            .with_grazing(self.lattice.grazing)
            .with_zero_direction(self.lattice.zero_direction)
    }

    /// The measurement lattice: the full admissible set, or the listed
    /// indices together with their frequency shells.
    pub fn admissible_set(&self) -> Result<Arc<AdmissibleSet>> {
        let medium = self.medium()?;
        let params = self.lattice_params();
        if self.lattice.indices.is_empty() {
            return Ok(Arc::new(AdmissibleSet::build(&medium, &params)?));
        }
        let listed: Vec<Index> = self
            .lattice
            .indices
            .iter()
            .map(|l| Index::new(l))
            .collect::<layerfield::Result<_>>()?;
        let mut all = listed.clone();
        if self.lattice.include_shells {
            let shells: Vec<i64> = listed.iter().map(Index::norm_sq).collect();
            let full = AdmissibleSet::build(&medium, &params)?;
            all.extend(
                full.entries()
                    .iter()
                    .map(|e| e.index)
                    .filter(|l| !l.is_zero() && shells.contains(&l.norm_sq())),
            );
        }
        Ok(Arc::new(AdmissibleSet::probes(&medium, &params, &all)?))
    }

    pub fn listed_indices(&self) -> Vec<Index> {
        self.lattice.indices.iter().filter_map(|l| Index::new(l).ok()).collect()
    }

    pub fn quadrature(&self, set: &AdmissibleSet) -> Result<QuadratureRule> {
        let bx = self.source_box()?;
        if self.quadrature.orders.is_empty() {
            Ok(layerfield::default_rule(set, &bx)?)
        } else {
            Ok(QuadratureRule::new(bx, &self.quadrature.orders)?)
        }
    }

    pub fn source(&self) -> Result<Source<f64>> {
        Ok(match self.source_kind() {
            SourceKind::Analytic2d => Source::Analytic2D,
            SourceKind::Analytic3d => Source::Analytic3D,
            SourceKind::Zero => Source::zero(),
            SourceKind::Fourier => {
                let path = self.source.file.as_ref().context("source.file: required for fourier sources")?;
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let (table, _) = layerfield::io::read_coefficients(&text, self.source_box.period)
                    .with_context(|| format!("parsing {}", path.display()))?;
                if table.dim() != self.dimension() {
                    bail!("source.file: coefficient dimension does not match dim");
                }
                let series: FourierSeries = table.to_series()?;
                Source::Fourier(series)
            }
        })
    }

    pub fn reference_config(&self) -> ReferenceConfig {
        let r = &self.references;
        let mut c = ReferenceConfig::for_placement(r.placement);
        if let Some(a) = r.alpha1 {
            c.alpha1 = a;
        }
        if let Some(a) = r.alpha2 {
            c.alpha2 = a;
        }
        if let Some(a) = r.alpha2_zero_index {
            c.alpha2_zero_index = a;
        }
        c.det_threshold = r.det_threshold;
        c.conditioning_target = r.conditioning_target;
        c.max_halvings = r.max_halvings;
        c.degenerate_threshold = r.degenerate_threshold;
        c
    }

    pub fn retrieval_options(&self) -> RetrievalOptions {
        RetrievalOptions {
            rescale_from_measurements: self.retrieval.rescale_from_measurements,
        }
    }
}
