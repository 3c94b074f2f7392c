//! `fcfb` command line: mask design, analysis, spectra, link simulation and
//! complexity tables from a TOML run configuration.
//!
//! Exit status is 0 when every output was written, 2 when the command line
//! or configuration was rejected (nothing is computed then) and 1 when the
//! computation or writing failed.

mod config;
mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fcfb::complexity::comparison_table;
use fcfb::fcfb::{Side, WeightMask};
use fcfb::linksim::{default_ibo_range, max_power_search, run_link, tx_psd, Framing, LinkScenario, Processing, SignalSpec, SubbandSpec};
use fcfb::metrics::export::config_hash;
use fcfb::metrics::magnitude::magnitude_response;
use fcfb::metrics::{evm_avg, evm_max, mse_per_subcarrier, sblr, to_db, ErrorForm, SideModel, TmuxModel};
use fcfb::optimizer::{optimize_weights, read_mask_file, write_mask_file, DesignProblem, Evaluator, FilterMode, MaskFile};
use serde_json::json;

use config::{load, Config, ConfigError};
use output::{num, Format, Table, Writer};

#[derive(Parser)]
#[command(name = "fcfb", version, about = "Fast-convolution filter bank design and evaluation")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, global = true, default_value = "out")]
    out: PathBuf,
    /// Random seed; overrides `seed` in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "FCFB_THREADS")]
    threads: Option<usize>,
    /// Table format.
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize transition-band weights and write a mask file.
    Design,
    /// Per-subcarrier EVM, leakage and magnitude response of a mask.
    Analyze {
        /// Mask file to analyze instead of `analyze.mask`.
        #[arg(long)]
        mask: Option<PathBuf>,
    },
    /// Transmit power spectral density.
    Psd,
    /// End-to-end link simulation.
    Linksim,
    /// Multiplication counts per QAM symbol.
    Complexity,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Design => "design",
            Command::Analyze { .. } => "analyze",
            Command::Psd => "psd",
            Command::Linksim => "linksim",
            Command::Complexity => "complexity",
        }
    }
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<fcfb::error::Error> for Failure {
    fn from(e: fcfb::error::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("fcfb: invalid configuration: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Run(m)) => {
            eprintln!("fcfb: {m}");
            ExitCode::from(1)
        }
    }
}

/// Everything a command needs, checked before any computation.
enum Plan {
    Design(DesignProblem),
    Analyze(Box<AnalyzePlan>),
    Psd(LinkScenario, config::Resolved<SignalSpec>, f64),
    Link(Box<config::LinkPlan>),
    Complexity(config::ComplexityCfg),
}

struct AnalyzePlan {
    problem: DesignProblem,
    mask: Option<WeightMask>,
    centers: Vec<usize>,
    guards: Vec<usize>,
    points_per_bin: usize,
    simulate: Option<config::SimulateCfg>,
}

fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T, ConfigError> {
    s.as_ref().ok_or_else(|| ConfigError(format!("missing [{name}] section")))
}

fn plan(cli: &Cli, cfg: &Config, seed: u64) -> Result<Plan, ConfigError> {
    if let Some(0) = cli.threads {
        return Err(ConfigError("--threads must be at least 1".into()));
    }
    Ok(match &cli.command {
        Command::Design => Plan::Design(section(&cfg.design, "design")?.problem(cfg.n, seed)?),
        Command::Analyze { mask } => {
            let problem = section(&cfg.design, "design")?.problem(cfg.n, seed)?;
            let a = cfg.analyze.clone().unwrap_or(config::AnalyzeCfg {
                mask: None,
                centers: None,
                guards: (0..=10).collect(),
                points_per_bin: None,
                simulate: None,
            });
            let path = mask.as_ref().map(|p| p.display().to_string()).or(a.mask.clone());
            let mask = match path {
                Some(p) => Some(mask_for(&p, &problem)?),
                None => None,
            };
            let centers = a.centers.clone().unwrap_or_else(|| vec![problem.center]);
            if centers.is_empty() {
                return Err(ConfigError("empty subband list: `analyze.centers` has no entries".into()));
            }
            for c in &centers {
                DesignProblem { center: *c, ..problem.clone() }.validate()?;
            }
            let points_per_bin = a.points_per_bin.unwrap_or(problem.points_per_bin);
            if points_per_bin == 0 {
                return Err(ConfigError("`points_per_bin` must be at least 1".into()));
            }
            if let Some(s) = &a.simulate {
                if problem.mode != FilterMode::TwoSided {
                    return Err(ConfigError("`analyze.simulate` covers two-sided masks only".into()));
                }
                if s.trials == 0 || s.subframes < 3 {
                    return Err(ConfigError("`analyze.simulate` needs trials >= 1 and subframes >= 3".into()));
                }
            }
            Plan::Analyze(Box::new(AnalyzePlan {
                problem,
                mask,
                centers,
                guards: a.guards.clone(),
                points_per_bin,
                simulate: a.simulate.clone(),
            }))
        }
        Command::Psd => {
            let p = section(&cfg.psd, "psd")?;
            let (s, sig) = p.plan(cfg.n, seed)?;
            Plan::Psd(s, sig, p.rbw_hz)
        }
        Command::Linksim => Plan::Link(Box::new(section(&cfg.link, "link")?.plan(cfg.n, seed)?)),
        Command::Complexity => {
            let c = cfg.complexity.clone().unwrap_or_default();
            if c.groups.is_empty() {
                return Err(ConfigError("empty subband list: `complexity.groups` has no entries".into()));
            }
            if c.overlaps.iter().any(|o| !(0.0..1.0).contains(o)) {
                return Err(ConfigError("overlap factors must lie in [0, 1)".into()));
            }
            Plan::Complexity(c)
        }
    })
}

/// Reads a mask file and checks it against the problem it is analyzed in.
fn mask_for(path: &str, p: &DesignProblem) -> Result<WeightMask, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError(format!("{path}: {e}")))?;
    let m = read_mask_file(&text).map_err(|e| ConfigError(format!("{path}: {e}")))?;
    let checks = [
        ("n", m.n, p.num.n),
        ("l", m.l, p.num.l),
        ("ls", m.ls, p.ls),
        ("active", m.mask.active, p.mask_active()),
        ("tbw", m.mask.tbw(), p.tbw),
    ];
    for (key, file, want) in checks {
        if file != want {
            return Err(ConfigError(format!("{path}: mask has {key} = {file}, the design section gives {want}")));
        }
    }
    Ok(m.mask)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let (cfg, text) = load(cli.config.as_deref())?;
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let plan = plan(cli, &cfg, seed)?;
    if let Some(t) = cli.threads {
        // only fails when a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let mask_override = match &cli.command {
        Command::Analyze { mask: Some(m) } => m.display().to_string(),
        _ => String::new(),
    };
    let name = cli.command.name();
    let run_id = config_hash(&format!("{name}\n{seed}\n{mask_override}\n{text}"));
    let mut w = Writer::new(&cli.out, cli.format, run_id)?;
    match plan {
        Plan::Design(p) => design(&mut w, &p)?,
        Plan::Analyze(a) => analyze(&mut w, &a)?,
        Plan::Psd(s, sig, rbw) => psd(&mut w, s, sig, rbw)?,
        Plan::Link(l) => linksim(&mut w, *l)?,
        Plan::Complexity(c) => complexity(&mut w, &c)?,
    }
    w.finish(name, cli.config.as_deref(), seed, rayon::current_num_threads())?;
    Ok(())
}

fn summary(w: &Writer, rows: &[(String, f64)]) -> Table {
    let mut t = Table::new("summary", &["config_hash", "metric", "value_db"]);
    for (m, v) in rows {
        t.push(vec![json!(w.run_id), json!(m), num(*v)]);
    }
    t
}

fn design(w: &mut Writer, p: &DesignProblem) -> Result<(), Failure> {
    let d = optimize_weights(p)?;
    let file = MaskFile { n: p.num.n, l: p.num.l, ls: p.ls, center: p.center, as_db: p.as_db, mode: p.mode, mask: d.mask.clone() };
    w.text("mask.txt", &write_mask_file(&file))?;
    let r = &d.report;
    let mut t = Table::new("design", &["key", "value"]);
    t.push(vec![json!("status"), json!(serde_json::to_value(r.status).unwrap_or_default())]);
    t.push(vec![json!("evm_max_db"), num(r.evm_max_db)]);
    t.push(vec![json!("evm_avg_db"), num(r.evm_avg_db)]);
    t.push(vec![json!("stop_max_db"), num(r.stop_max_db)]);
    t.push(vec![json!("stop_max_fine_db"), num(r.stop_max_fine_db)]);
    t.push(vec![json!("iterations"), json!(r.iterations)]);
    t.push(vec![json!("evaluations"), json!(r.evaluations)]);
    for (i, v) in d.mask.d.iter().enumerate() {
        t.push(vec![json!(format!("weight_{i}")), num(*v)]);
    }
    w.table(&t)?;
    if r.status == fcfb::optimizer::DesignStatus::Infeasible {
        eprintln!("fcfb: warning: no design met the stopband bound; the least violating mask was written");
    }
    Ok(())
}

/// Transmit and receive coefficient vectors of a mask in a mode.
fn layout(mode: FilterMode, mask: &WeightMask) -> (Vec<f64>, Vec<f64>) {
    let c = mask.coefficients();
    match mode {
        FilterMode::TwoSided => (c.clone(), c),
        FilterMode::RxOnly => (vec![1.0], c),
        FilterMode::TxOnly => (c, vec![1.0]),
    }
}

fn side_model(p: &DesignProblem, mask: &WeightMask, side: Side, center: usize) -> fcfb::error::Result<SideModel> {
    let filtered = match side {
        Side::Synthesis => p.mode != FilterMode::RxOnly,
        Side::Analysis => p.mode != FilterMode::TxOnly,
    };
    if filtered {
        SideModel::with_mask(p.num.clone(), DesignProblem { center, ..p.clone() }.cfg(side)?, mask)
    } else {
        SideModel::unfiltered(p.num.clone(), side, center)
    }
}

fn analyze(w: &mut Writer, a: &AnalyzePlan) -> Result<(), Failure> {
    let p = &a.problem;
    let mask = match &a.mask {
        Some(m) => m.clone(),
        None => optimize_weights(p)?.mask,
    };
    let (tc, rc) = layout(p.mode, &mask);
    let mut evm = Table::new("evm_subcarriers", &["center", "subcarrier", "offset", "evm_from_db", "evm_into_db"]);
    let mut sum = Vec::new();
    for &center in &a.centers {
        let ev = Evaluator::new(&DesignProblem { center, ..p.clone() })?;
        let from = mse_per_subcarrier(&ev.model, &tc, &rc, ErrorForm::From)?;
        let into = mse_per_subcarrier(&ev.model, &tc, &rc, ErrorForm::Into)?;
        let offsets = p.num.subcarrier_offsets();
        for (k, (f, i)) in from.iter().zip(&into).enumerate() {
            evm.push(vec![json!(center), json!(k), json!(offsets[k]), num(to_db(*f)), num(to_db(*i))]);
        }
        let form = ev.form;
        let used = if form == ErrorForm::From { &from } else { &into };
        sum.push((format!("evm_avg_center_{center}"), evm_avg(used)));
        sum.push((format!("evm_max_center_{center}"), evm_max(used)));
        sum.push((format!("stop_max_center_{center}"), ev.magnitude.max_db(&mask.coefficients())));
    }
    w.table(&evm)?;

    let tx = side_model(p, &mask, Side::Synthesis, p.center)?;
    let own = TmuxModel::build(&tx, &side_model(p, &mask, Side::Analysis, p.center)?)?;
    let step = p.num.bin_ratio();
    let mut leak_t = Table::new("sblr", &["guard_subcarriers", "rx_center", "sblr_db"]);
    for &g in &a.guards {
        let rx_center = (p.center + (p.num.active + g) * step) % p.num.n;
        let leak = TmuxModel::build(&tx, &side_model(p, &mask, Side::Analysis, rx_center)?)?;
        let v = sblr(&leak, &own, &tc, &rc, &rc)?;
        leak_t.push(vec![json!(g), json!(rx_center), num(v)]);
        sum.push((format!("sblr_guard_{g}"), v));
    }
    w.table(&leak_t)?;

    let cfg = p.cfg(Side::Synthesis)?;
    let (grid, m) = magnitude_response(&cfg, &mask.diagonal(), a.points_per_bin)?;
    let mut mag = Table::new("magnitude", &["bin", "magnitude_db"]);
    for (i, v) in m.iter().enumerate() {
        mag.push(vec![num(grid.bin(i)), num(to_db(*v))]);
    }
    w.table(&mag)?;

    if let Some(s) = &a.simulate {
        let fc = Processing::Fc { ls: p.ls, mask: mask.clone() };
        let sb = SubbandSpec { num: p.num.clone(), center: p.center, modulation: s.modulation, dft_spread: false, tx: fc.clone(), rx: fc };
        let mut sc = LinkScenario::new(p.num.n, SignalSpec { subbands: vec![sb], ..Default::default() });
        sc.framing = Framing::Continuous;
        sc.trials = s.trials;
        sc.subframes = s.subframes;
        sc.seed = p.seed;
        let r = run_link(&sc)?;
        let mut t = Table::new("evm_simulated", &["subcarrier", "evm_db"]);
        for (k, v) in r.subbands[0].evm_per_subcarrier_db.iter().enumerate() {
            t.push(vec![json!(k), num(*v)]);
        }
        w.table(&t)?;
        sum.push(("evm_avg_simulated".into(), r.evm_db));
    }
    let t = summary(w, &sum);
    w.table(&t)?;
    Ok(())
}

fn psd(w: &mut Writer, mut s: LinkScenario, sig: config::Resolved<SignalSpec>, rbw: f64) -> Result<(), Failure> {
    s.target = sig.realize()?;
    let p = tx_psd(&s, rbw)?;
    let in_bw = p.in_bandwidth_db(rbw);
    let mut t = Table::new("psd", &["freq_hz", "density_db_per_hz", "power_in_rbw_db"]);
    for ((f, d), b) in p.freq_hz.iter().zip(&p.density_db).zip(&in_bw) {
        t.push(vec![num(*f), num(*d), num(*b)]);
    }
    w.table(&t)?;
    let t = summary(w, &[("total_power_dbm".into(), to_db(p.total_power()))]);
    w.table(&t)?;
    Ok(())
}

fn linksim(w: &mut Writer, plan: config::LinkPlan) -> Result<(), Failure> {
    let (s, power) = plan.realize()?;
    let r = run_link(&s)?;
    let mut sum = vec![("evm_db".to_string(), r.evm_db)];
    let mut bands = Table::new("subbands", &["subband", "evm_db", "ser", "symbols", "symbol_errors"]);
    let mut per = Table::new("evm_subcarriers", &["subband", "subcarrier", "evm_db"]);
    for (i, sb) in r.subbands.iter().enumerate() {
        sum.push((format!("evm_subband_{i}"), sb.evm_db));
        bands.push(vec![json!(i), num(sb.evm_db), num(sb.ser), json!(sb.symbols), json!(sb.symbol_errors)]);
        for (k, v) in sb.evm_per_subcarrier_db.iter().enumerate() {
            per.push(vec![json!(i), json!(k), num(*v)]);
        }
    }
    if let Some(o) = r.pa_output_dbm {
        sum.push(("pa_output_dbm".into(), o));
    }
    w.table(&bands)?;
    w.table(&per)?;
    if s.constellation > 0 {
        let mut c = Table::new("constellation", &["sent_re", "sent_im", "received_re", "received_im"]);
        for (a, b) in &r.constellation {
            c.push(vec![num(a.re), num(a.im), num(b.re), num(b.im)]);
        }
        w.table(&c)?;
    }
    if r.clamped_samples > 0 {
        eprintln!("fcfb: warning: {} amplifier input samples fell outside the model range", r.clamped_samples);
    }
    if r.interferer_overlaps {
        eprintln!("fcfb: warning: the interferer overlaps the target's subcarriers");
    }
    if let Some((c, range)) = power {
        let range = match range {
            Some(r) => r,
            None => default_ibo_range(&s.target.pa)?,
        };
        let p = max_power_search(&s, &c, range)?;
        let mut t = Table::new("power_search", &["ibo_db", "output_dbm", "evm_db", "binding"]);
        t.push(vec![num(p.ibo_db), num(p.output_dbm), num(p.evm_db), json!(p.binding)]);
        w.table(&t)?;
        sum.push(("max_output_dbm".into(), p.output_dbm));
    }
    let t = summary(w, &sum);
    w.table(&t)?;
    Ok(())
}

fn complexity(w: &mut Writer, c: &config::ComplexityCfg) -> Result<(), Failure> {
    let rows = comparison_table(&c.groups, &c.overlaps)?;
    let mut t = Table::new("complexity", &["config", "overlap", "fc_muls", "fc_ratio", "cp_uf_muls", "f_ofdm_muls"]);
    for r in rows {
        t.push(vec![json!(r.config), num(r.overlap), num(r.fc_muls), num(r.fc_ratio), num(r.cp_uf_muls), num(r.f_ofdm_muls)]);
    }
    w.table(&t)?;
    Ok(())
}
