//! Run configuration: TOML files with includes, checked against a closed
//! schema and turned into library objects before anything is computed.
//!
//! A file may name other files in a top-level `include` array, relative to
//! itself. Included files are merged in order, then the including file is
//! merged on top: tables merge key by key, every other value (arrays too)
//! replaces what was there.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use fcfb::complexity::{reference_groups, SubbandGroup};
use fcfb::fcfb::WeightMask;
use fcfb::linksim::{
    Channel, ChannelTaps, Framing, Interferer, LinkScenario, MaskSegment, Modulation, PowerConstraints, Processing,
    SignalSpec, SubbandSpec, WindowPlacement,
};
use fcfb::ofdm::filters::{f_ofdm_filter, uf_ofdm_filter};
use fcfb::ofdm::{ActiveMapping, OfdmNumerology};
use fcfb::optimizer::{optimize_weights, read_mask_file, Budget, DesignProblem, FilterMode};
use fcfb::rfmodels::{PaModel, PolyPa, RappPa};
use fcfb::transforms::C64;
use serde::Deserialize;
use toml::{Table, Value};

/// Rejected configuration; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<fcfb::error::Error> for ConfigError {
    fn from(e: fcfb::error::Error) -> Self {
        ConfigError(e.to_string())
    }
}

pub type CfgResult<T> = Result<T, ConfigError>;

fn bad<T>(msg: impl Into<String>) -> CfgResult<T> {
    Err(ConfigError(msg.into()))
}

fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn load_table(path: &Path, seen: &mut HashSet<PathBuf>) -> CfgResult<Table> {
    let canon = fs::canonicalize(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    if !seen.insert(canon.clone()) {
        return bad(format!("{}: include cycle", path.display()));
    }
    let text = fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let mut table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError(format!("{}: {e}", path.display())))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut merged = Table::new();
    if let Some(inc) = table.remove("include") {
        let Value::Array(items) = inc else {
            return bad(format!("{}: `include` must be an array of paths", path.display()));
        };
        for item in items {
            let Value::String(p) = item else {
                return bad(format!("{}: `include` entries must be strings", path.display()));
            };
            merge(&mut merged, load_table(&dir.join(p), seen)?);
        }
    }
    rebase_paths(&mut table, dir);
    merge(&mut merged, table);
    seen.remove(&canon);
    Ok(merged)
}

/// Makes every `mask` path relative to the file that wrote it.
fn rebase_paths(t: &mut Table, dir: &Path) {
    for (k, v) in t.iter_mut() {
        match v {
            Value::String(s) if k == "mask" => {
                let p = Path::new(s.as_str());
                if p.is_relative() {
                    *s = dir.join(p).to_string_lossy().into_owned();
                }
            }
            Value::Table(sub) => rebase_paths(sub, dir),
            Value::Array(items) => {
                for it in items {
                    if let Value::Table(sub) = it {
                        rebase_paths(sub, dir);
                    }
                }
            }
            _ => {}
        }
    }
}

/// Loads `path` with its includes. The merged TOML text is returned too; its
/// hash identifies the run.
pub fn load(path: Option<&Path>) -> CfgResult<(Config, String)> {
    let table = match path {
        Some(p) => load_table(p, &mut HashSet::new())?,
        None => Table::new(),
    };
    let text = toml::to_string(&table).map_err(|e| ConfigError(e.to_string()))?;
    let cfg: Config = Config::deserialize(Value::Table(table)).map_err(|e| ConfigError(e.to_string()))?;
    Ok((cfg, text))
}

fn default_n() -> usize {
    1024
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    /// Long transform length shared by every subband.
    #[serde(default = "default_n")]
    pub n: usize,
    pub design: Option<DesignCfg>,
    pub analyze: Option<AnalyzeCfg>,
    pub psd: Option<PsdCfg>,
    pub link: Option<LinkCfg>,
    pub complexity: Option<ComplexityCfg>,
}

/// Either a reference row (`scs_khz`, `prbs`) or explicit lengths.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumerologyCfg {
    pub scs_khz: Option<u32>,
    pub prbs: Option<usize>,
    pub l_ofdm: Option<usize>,
    pub l_cp: Option<usize>,
    pub active: Option<usize>,
    pub l: Option<usize>,
    pub eta: Option<u32>,
    pub first_cp_ext: Option<usize>,
    pub mapping: Option<ActiveMapping>,
}

impl NumerologyCfg {
    pub fn resolve(&self, n: usize) -> CfgResult<OfdmNumerology> {
        let mut num = match (self.prbs, self.l_ofdm, self.l_cp, self.active, self.l) {
            (Some(prbs), None, None, None, None) => {
                let num = OfdmNumerology::table_row(self.scs_khz.unwrap_or(15), prbs)?;
                if num.n != n {
                    return bad(format!("reference numerologies use N = {}, configured N = {n}", num.n));
                }
                num
            }
            (None, Some(l_ofdm), Some(l_cp), Some(active), Some(l)) => {
                let num = OfdmNumerology::new(l_ofdm, l_cp, self.eta.unwrap_or(0), active, n, l)?;
                match self.first_cp_ext {
                    Some(ext) => num.with_first_cp_ext(ext),
                    None => num.aligned()?,
                }
            }
            _ => {
                return bad(
                    "numerology needs either `prbs` (with optional `scs_khz`) or all of `l_ofdm`, `l_cp`, `active`, `l`",
                )
            }
        };
        if let Some(m) = self.mapping {
            num = num.with_mapping(m)?;
        }
        num.validate()?;
        Ok(num)
    }
}

/// Short-side hop: `ls` directly or an overlap factor.
fn resolve_ls(ls: Option<usize>, overlap: Option<f64>, l: usize) -> CfgResult<usize> {
    match (ls, overlap) {
        (Some(v), None) => Ok(v),
        (None, o) => {
            let o = o.unwrap_or(0.5);
            if !(0.0..1.0).contains(&o) {
                return bad(format!("overlap factor {o} outside [0, 1)"));
            }
            let v = (1.0 - o) * l as f64;
            if (v - v.round()).abs() > 1e-9 {
                return bad(format!("overlap {o} does not give an integer L_S for L = {l}"));
            }
            Ok(v.round() as usize)
        }
        (Some(_), Some(_)) => bad("give either `ls` or `overlap`, not both"),
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetCfg {
    pub restarts: Option<usize>,
    pub max_iters: Option<u64>,
    pub tol_db: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignCfg {
    pub numerology: NumerologyCfg,
    pub ls: Option<usize>,
    pub overlap: Option<f64>,
    #[serde(default)]
    pub center: usize,
    pub tbw: usize,
    pub as_db: f64,
    #[serde(default)]
    pub mode: FilterMode,
    pub wideband: Option<NumerologyCfg>,
    #[serde(default)]
    pub window_offset: usize,
    pub points_per_bin: Option<usize>,
    #[serde(default)]
    pub budget: BudgetCfg,
}

impl DesignCfg {
    pub fn problem(&self, n: usize, seed: u64) -> CfgResult<DesignProblem> {
        let num = self.numerology.resolve(n)?;
        let ls = resolve_ls(self.ls, self.overlap, num.l)?;
        let mut p = DesignProblem::new(num, ls, self.center, self.tbw, self.as_db)
            .with_mode(self.mode)
            .with_seed(seed);
        if let Some(w) = &self.wideband {
            p = p.with_wideband(w.resolve(n)?);
        }
        p.window_offset = self.window_offset;
        if let Some(d) = self.points_per_bin {
            p.points_per_bin = d;
        }
        let def = Budget::default();
        p.budget = Budget {
            restarts: self.budget.restarts.unwrap_or(def.restarts),
            max_iters: self.budget.max_iters.unwrap_or(def.max_iters),
            tol_db: self.budget.tol_db.unwrap_or(def.tol_db),
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateCfg {
    pub trials: usize,
    pub subframes: usize,
    #[serde(default)]
    pub modulation: Modulation,
}

fn default_guards() -> Vec<usize> {
    (0..=10).collect()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeCfg {
    /// Mask file; without it the mask is designed first.
    pub mask: Option<String>,
    /// Subband centers to evaluate; the design center by default.
    pub centers: Option<Vec<usize>>,
    #[serde(default = "default_guards")]
    pub guards: Vec<usize>,
    pub points_per_bin: Option<usize>,
    pub simulate: Option<SimulateCfg>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum PaCfg {
    #[default]
    None,
    Rapp {
        g: Option<f64>,
        v_sat: Option<f64>,
        p: Option<f64>,
        q: Option<f64>,
        a: Option<f64>,
        b: Option<f64>,
    },
    Poly,
}

impl PaCfg {
    fn resolve(&self) -> PaModel {
        match self {
            PaCfg::None => PaModel::None,
            PaCfg::Rapp { g, v_sat, p, q, a, b } => {
                let d = RappPa::default();
                PaModel::Rapp(RappPa {
                    g: g.unwrap_or(d.g),
                    v_sat: v_sat.unwrap_or(d.v_sat),
                    p: p.unwrap_or(d.p),
                    q: q.unwrap_or(d.q),
                    a: a.unwrap_or(d.a),
                    b: b.unwrap_or(d.b),
                })
            }
            PaCfg::Poly => PaModel::Poly(PolyPa::new()),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum ProcCfg {
    Plain,
    /// Fast-convolution filtering with a mask file or a mask designed on
    /// the spot for matched two-sided use.
    Fc {
        ls: Option<usize>,
        overlap: Option<f64>,
        mask: Option<String>,
        tbw: Option<usize>,
        as_db: Option<f64>,
    },
    Wola {
        n_ws: usize,
    },
    Filter {
        taps: Vec<f64>,
    },
    FOfdm {
        n_fir: usize,
        #[serde(default)]
        tone_offset: f64,
    },
    UfOfdm {
        n_fir: usize,
        atten_db: f64,
    },
}

impl Default for ProcCfg {
    fn default() -> Self {
        ProcCfg::Plain
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubbandCfg {
    pub numerology: NumerologyCfg,
    #[serde(default)]
    pub center: usize,
    #[serde(default)]
    pub modulation: Modulation,
    #[serde(default)]
    pub dft_spread: bool,
    #[serde(default)]
    pub tx: ProcCfg,
    #[serde(default)]
    pub rx: ProcCfg,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalCfg {
    pub subbands: Vec<SubbandCfg>,
    #[serde(default)]
    pub pa: PaCfg,
    pub ibo_db: Option<f64>,
}

/// Work left for the run stage: masks that still have to be designed.
#[derive(Debug, Clone)]
pub struct PendingDesign {
    pub subband: usize,
    pub tx: bool,
    pub problem: DesignProblem,
}

/// A signal whose checks have passed; `pending` masks are filled in by
/// [`Resolved::realize`].
#[derive(Debug, Clone)]
pub struct Resolved<T> {
    pub value: T,
    pub pending: Vec<PendingDesign>,
}

fn read_mask(path: &str, l: usize) -> CfgResult<WeightMask> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError(format!("{path}: {e}")))?;
    let m = read_mask_file(&text).map_err(|e| ConfigError(format!("{path}: {e}")))?;
    if m.mask.l != l {
        return bad(format!("{path}: mask for L = {}, subband uses L = {l}", m.mask.l));
    }
    Ok(m.mask)
}

impl SignalCfg {
    pub fn resolve(&self, n: usize, seed: u64) -> CfgResult<Resolved<SignalSpec>> {
        if self.subbands.is_empty() {
            return bad("empty subband list");
        }
        let mut subbands = Vec::new();
        let mut pending = Vec::new();
        for (i, sb) in self.subbands.iter().enumerate() {
            let num = sb.numerology.resolve(n)?;
            let high = num.at_high_rate()?;
            let mut side = |p: &ProcCfg, is_tx: bool| -> CfgResult<Processing> {
                Ok(match p {
                    ProcCfg::Plain => Processing::Plain,
                    ProcCfg::Wola { n_ws } => Processing::Wola { n_ws: *n_ws },
                    ProcCfg::Filter { taps } => Processing::Filter { taps: taps.clone() },
                    ProcCfg::FOfdm { n_fir, tone_offset } => Processing::Filter {
                        taps: f_ofdm_filter(num.active, *tone_offset, high.l_ofdm, *n_fir)?,
                    },
                    ProcCfg::UfOfdm { n_fir, atten_db } => Processing::Filter { taps: uf_ofdm_filter(*atten_db, *n_fir)? },
                    ProcCfg::Fc { ls, overlap, mask, tbw, as_db } => {
                        let ls = resolve_ls(*ls, *overlap, num.l)?;
                        match (mask, tbw, as_db) {
                            (Some(path), None, None) => Processing::Fc { ls, mask: read_mask(path, num.l)? },
                            (None, Some(tbw), Some(as_db)) => {
                                let p = DesignProblem::new(num, ls, sb.center, *tbw, *as_db).with_seed(seed);
                                p.validate()?;
                                let placeholder = p.mask(vec![0.0; *tbw])?;
                                pending.push(PendingDesign { subband: i, tx: is_tx, problem: p });
                                Processing::Fc { ls, mask: placeholder }
                            }
                            _ => return bad("fc processing needs `mask`, or `tbw` and `as_db`"),
                        }
                    }
                })
            };
            let tx = side(&sb.tx, true)?;
            let rx = side(&sb.rx, false)?;
            subbands.push(SubbandSpec { num, center: sb.center, modulation: sb.modulation, dft_spread: sb.dft_spread, tx, rx });
        }
        let pa = self.pa.resolve();
        if self.ibo_db.is_some() && matches!(pa, PaModel::None) {
            return bad("`ibo_db` needs an amplifier");
        }
        Ok(Resolved { value: SignalSpec { subbands, pa, ibo_db: self.ibo_db }, pending })
    }
}

impl Resolved<SignalSpec> {
    /// Designs the pending masks; identical problems are solved once.
    pub fn realize(self) -> Result<SignalSpec, fcfb::error::Error> {
        let mut sig = self.value;
        let mut done: Vec<(DesignProblem, WeightMask)> = Vec::new();
        for d in self.pending {
            let mask = match done.iter().find(|(p, _)| *p == d.problem) {
                Some((_, m)) => m.clone(),
                None => {
                    let m = optimize_weights(&d.problem)?.mask;
                    done.push((d.problem, m.clone()));
                    m
                }
            };
            let sb = &mut sig.subbands[d.subband];
            let side = if d.tx { &mut sb.tx } else { &mut sb.rx };
            if let Processing::Fc { mask: m, .. } = side {
                *m = mask;
            }
        }
        Ok(sig)
    }
}

fn default_framing() -> Framing {
    Framing::Guarded(72)
}

fn default_one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsdCfg {
    pub signal: SignalCfg,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default = "default_rbw")]
    pub rbw_hz: f64,
    #[serde(default = "default_one")]
    pub subframes: usize,
    #[serde(default = "default_framing")]
    pub framing: Framing,
}

fn default_realizations() -> usize {
    100
}

fn default_rbw() -> f64 {
    30e3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfererCfg {
    pub signal: SignalCfg,
    #[serde(default)]
    pub offset: i64,
    #[serde(default)]
    pub power_offset_db: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentialCfg {
    pub rms_delay: f64,
    pub len: usize,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelCfg {
    /// Fixed taps as `[re, im]` pairs.
    pub taps: Option<Vec<[f64; 2]>>,
    pub exponential: Option<ExponentialCfg>,
    pub snr_db: Option<f64>,
}

impl ChannelCfg {
    fn resolve(&self) -> CfgResult<Channel> {
        let taps = match (&self.taps, &self.exponential) {
            (Some(_), Some(_)) => return bad("channel takes `taps` or `exponential`, not both"),
            (Some(t), None) => ChannelTaps::Fixed { taps: t.iter().map(|v| C64::new(v[0], v[1])).collect() },
            (None, Some(e)) => ChannelTaps::Exponential { rms_delay: e.rms_delay, len: e.len },
            (None, None) => ChannelTaps::Fixed { taps: vec![C64::new(1.0, 0.0)] },
        };
        Ok(Channel { taps, snr_db: self.snr_db })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSearchCfg {
    pub evm_limit_db: Option<f64>,
    #[serde(default)]
    pub mask: Vec<MaskSegment>,
    #[serde(default = "default_rbw")]
    pub rbw_hz: f64,
    /// Back-off range in dB; the amplifier's default range otherwise.
    pub ibo_range: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkCfg {
    pub target: SignalCfg,
    pub interferer: Option<InterfererCfg>,
    #[serde(default)]
    pub channel: ChannelCfg,
    #[serde(default)]
    pub window: WindowPlacement,
    #[serde(default = "default_framing")]
    pub framing: Framing,
    #[serde(default)]
    pub equalize: bool,
    #[serde(default = "default_one")]
    pub subframes: usize,
    #[serde(default = "default_one")]
    pub trials: usize,
    #[serde(default)]
    pub constellation: usize,
    pub power_search: Option<PowerSearchCfg>,
}

/// A link scenario plus the designs both signals still need.
#[derive(Debug, Clone)]
pub struct LinkPlan {
    pub scenario: LinkScenario,
    pub target: Resolved<SignalSpec>,
    pub interferer: Option<Resolved<SignalSpec>>,
    pub power: Option<(PowerConstraints, Option<(f64, f64)>)>,
}

impl LinkPlan {
    pub fn realize(mut self) -> Result<(LinkScenario, Option<(PowerConstraints, Option<(f64, f64)>)>), fcfb::error::Error> {
        self.scenario.target = self.target.realize()?;
        if let (Some(i), Some(r)) = (self.scenario.interferer.as_mut(), self.interferer) {
            i.signal = r.realize()?;
        }
        Ok((self.scenario, self.power))
    }
}

impl LinkCfg {
    pub fn plan(&self, n: usize, seed: u64) -> CfgResult<LinkPlan> {
        let target = self.target.resolve(n, seed)?;
        let interferer = match &self.interferer {
            Some(i) => Some((i, i.signal.resolve(n, seed)?)),
            None => None,
        };
        let mut s = LinkScenario::new(n, target.value.clone());
        s.interferer = interferer.as_ref().map(|(i, r)| Interferer {
            signal: r.value.clone(),
            offset: i.offset,
            power_offset_db: i.power_offset_db,
        });
        s.channel = self.channel.resolve()?;
        s.window = self.window;
        s.framing = self.framing;
        s.equalize = self.equalize;
        s.subframes = self.subframes;
        s.trials = self.trials;
        s.seed = seed;
        s.constellation = self.constellation;
        s.validate()?;
        let power = match &self.power_search {
            Some(p) => {
                if matches!(s.target.pa, PaModel::None) {
                    return bad("power search needs an amplifier on the target");
                }
                if p.evm_limit_db.is_none() && p.mask.is_empty() {
                    return bad("power search needs `evm_limit_db` or a `mask`");
                }
                let range = p.ibo_range.map(|r| (r[0], r[1]));
                if let Some((a, b)) = range {
                    if !(a <= b) {
                        return bad("`ibo_range` must be ascending");
                    }
                }
                Some((PowerConstraints { evm_limit_db: p.evm_limit_db, mask: p.mask.clone(), rbw_hz: p.rbw_hz }, range))
            }
            None => None,
        };
        Ok(LinkPlan { scenario: s, target, interferer: interferer.map(|(_, r)| r), power })
    }
}

impl PsdCfg {
    pub fn plan(&self, n: usize, seed: u64) -> CfgResult<(LinkScenario, Resolved<SignalSpec>)> {
        let sig = self.signal.resolve(n, seed)?;
        if self.realizations == 0 {
            return bad("at least one realization is needed");
        }
        if !(self.rbw_hz > 0.0) {
            return bad("`rbw_hz` must be positive");
        }
        let mut s = LinkScenario::new(n, sig.value.clone());
        s.trials = self.realizations;
        s.subframes = self.subframes;
        s.framing = self.framing;
        s.seed = seed;
        s.validate()?;
        Ok((s, sig))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexityCfg {
    #[serde(default = "reference_groups")]
    pub groups: Vec<SubbandGroup>,
    #[serde(default = "default_overlaps")]
    pub overlaps: Vec<f64>,
}

impl Default for ComplexityCfg {
    fn default() -> Self {
        ComplexityCfg { groups: reference_groups(), overlaps: default_overlaps() }
    }
}

fn default_overlaps() -> Vec<f64> {
    vec![0.5, 0.25]
}
