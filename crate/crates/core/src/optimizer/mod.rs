//! Design of the transition weights of a subband mask.
//!
//! The worst-case passband EVM is minimized over the `L_TBW` free weights
//! subject to a stopband bound on the synthesis magnitude response. The
//! weights are searched as `d_i = sin^2(u_i)`, which keeps them in `[0, 1]`
//! without bounds, with a Nelder-Mead simplex on `u`. The stopband bound
//! enters as an exact penalty `mu * max(0, max M(w) + A_s)` in dB whose
//! coefficient is raised until the bound holds. Several starts, the first
//! at the raised-cosine ramp and the rest perturbed around it, run in
//! parallel and the best feasible result wins.
//!
//! The result is checked on a grid twice as dense as the design grid; if
//! the bound is violated there, the search is repeated from the best point
//! against the dense grid.

pub mod maskfile;

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fcfb::{mask::raised_cosine_ramp, FcConfig, Side, WeightMask};
use crate::metrics::{evm_avg, evm_max, mse_per_subcarrier, ErrorForm, MagnitudeModel, SideModel, TmuxModel};
use crate::ofdm::OfdmNumerology;

pub use maskfile::{read_mask_file, write_mask_file, MaskFile};

/// Where the designed mask is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterMode {
    /// Matched masks on both sides.
    #[default]
    TwoSided,
    /// Plain wideband transmitter, filtered receiver.
    RxOnly,
    /// Filtered transmitter, plain wideband receiver.
    TxOnly,
}

impl FilterMode {
    pub fn name(&self) -> &'static str {
        match self {
            FilterMode::TwoSided => "two-sided",
            FilterMode::RxOnly => "rx-only",
            FilterMode::TxOnly => "tx-only",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    /// Number of starting points, at least 8.
    pub restarts: usize,
    /// Simplex iterations per local search.
    pub max_iters: u64,
    /// Spread of the simplex objective values at convergence, dB.
    pub tol_db: f64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { restarts: 8, max_iters: 600, tol_db: 1e-4 }
    }
}

/// One mask design task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignProblem {
    /// Numerology of the filtered subband; carries `N` and `L`.
    pub num: OfdmNumerology,
    /// Short-side hop `L_S`.
    pub ls: usize,
    /// Long bin of subcarrier offset zero.
    pub center: usize,
    /// Transition weights per band edge, `0..=7`.
    pub tbw: usize,
    /// Minimum stopband attenuation in dB.
    pub as_db: f64,
    pub mode: FilterMode,
    /// Numerology of the plain side in one-sided modes; by default the same
    /// allocation at the high rate.
    pub wideband: Option<OfdmNumerology>,
    /// Receiver FFT window advance before the end of the CP.
    pub window_offset: usize,
    /// Design grid density in points per long-transform bin.
    pub points_per_bin: usize,
    pub budget: Budget,
    pub seed: u64,
}

impl DesignProblem {
    pub fn new(num: OfdmNumerology, ls: usize, center: usize, tbw: usize, as_db: f64) -> Self {
        DesignProblem {
            num,
            ls,
            center,
            tbw,
            as_db,
            mode: FilterMode::TwoSided,
            wideband: None,
            window_offset: 0,
            points_per_bin: 16,
            budget: Budget::default(),
            seed: 0,
        }
    }

    pub fn with_mode(mut self, mode: FilterMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_wideband(mut self, num: OfdmNumerology) -> Self {
        self.wideband = Some(num);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.num.validate()?;
        self.cfg(Side::Synthesis)?;
        if self.tbw > 7 {
            return Err(Error::Config(format!("L_TBW = {} outside 0..=7", self.tbw)));
        }
        if !(self.as_db.is_finite() && self.as_db >= 0.0) {
            return Err(Error::Config("A_s must be a non-negative number of dB".into()));
        }
        if self.budget.restarts < 8 {
            return Err(Error::Config("at least 8 restarts are required".into()));
        }
        if self.points_per_bin == 0 {
            return Err(Error::Config("grid density must be positive".into()));
        }
        self.mask(vec![0.0; self.tbw])?;
        Ok(())
    }

    pub fn cfg(&self, side: Side) -> Result<FcConfig> {
        let cfg = match side {
            Side::Synthesis => FcConfig::synthesis(self.num.n, self.num.l, self.ls, self.center)?,
            Side::Analysis => FcConfig::analysis(self.num.n, self.num.l, self.ls, self.center)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Passband bins of the mask: every short bin between the outermost
    /// subcarriers, `L / L_OFDM` per subcarrier.
    pub fn mask_active(&self) -> usize {
        self.num.bin_ratio() * self.num.active
    }

    pub fn mask(&self, d: Vec<f64>) -> Result<WeightMask> {
        WeightMask::new(self.num.l, self.mask_active(), d)
    }

    /// The unfiltered side of one-sided modes.
    pub fn wideband_numerology(&self) -> Result<OfdmNumerology> {
        if let Some(w) = &self.wideband {
            return Ok(w.clone());
        }
        self.num.at_high_rate()
    }
}

/// Outcome of a design run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignStatus {
    /// Feasible and every local search converged.
    Converged,
    /// Feasible, but some local search stopped at its iteration limit.
    BudgetExhausted,
    /// No start reached the stopband bound; the mask is the least violating.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub evm_max_db: f64,
    pub evm_avg_db: f64,
    /// Stopband maximum on the design grid, dB.
    pub stop_max_db: f64,
    /// Stopband maximum on the verification grid, dB.
    pub stop_max_fine_db: f64,
    pub iterations: u64,
    pub evaluations: u64,
    pub penalty: f64,
    pub status: DesignStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub mask: WeightMask,
    pub report: DesignReport,
}

impl Design {
    /// Fails with [`Error::Infeasible`] unless the stopband bound holds.
    pub fn require_feasible(self) -> Result<Self> {
        if self.report.status == DesignStatus::Infeasible {
            return Err(Error::Infeasible(format!(
                "best stopband level {:.2} dB misses the bound",
                self.report.stop_max_fine_db
            )));
        }
        Ok(self)
    }
}

/// Quality figures of one set of transition weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub mse: Vec<f64>,
    pub evm_max_db: f64,
    pub evm_avg_db: f64,
    pub stop_max_db: f64,
}

/// Precomputed models of a problem; evaluation only forms quadratic
/// expressions in the weights.
#[derive(Debug, Clone)]
pub struct Evaluator {
    pub problem: DesignProblem,
    pub model: TmuxModel,
    pub magnitude: MagnitudeModel,
    pub form: ErrorForm,
}

impl Evaluator {
    pub fn new(problem: &DesignProblem) -> Result<Self> {
        Self::with_density(problem, problem.points_per_bin)
    }

    fn with_density(problem: &DesignProblem, points_per_bin: usize) -> Result<Self> {
        problem.validate()?;
        let mask = problem.mask(vec![0.0; problem.tbw])?;
        let syn = problem.cfg(Side::Synthesis)?;
        let ana = problem.cfg(Side::Analysis)?;
        let filtered = |cfg| SideModel::with_mask(problem.num.clone(), cfg, &mask);
        let (tx, rx, form) = match problem.mode {
            FilterMode::TwoSided => (filtered(syn)?, filtered(ana)?, ErrorForm::From),
            FilterMode::RxOnly => (
                SideModel::unfiltered(problem.wideband_numerology()?, Side::Synthesis, problem.center)?,
                filtered(ana)?,
                ErrorForm::Into,
            ),
            FilterMode::TxOnly => (
                filtered(syn)?,
                SideModel::unfiltered(problem.wideband_numerology()?, Side::Analysis, problem.center)?,
                ErrorForm::From,
            ),
        };
        let rx = rx.with_window_offset(problem.window_offset)?;
        let model = TmuxModel::build(&tx, &rx)?;
        let magnitude = MagnitudeModel::stopband(&syn, &mask, points_per_bin)?;
        Ok(Evaluator { problem: problem.clone(), model, magnitude, form })
    }

    fn coefficients(&self, d: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut c = vec![1.0];
        c.extend_from_slice(d);
        match self.problem.mode {
            FilterMode::TwoSided => (c.clone(), c),
            FilterMode::RxOnly => (vec![1.0], c),
            FilterMode::TxOnly => (c, vec![1.0]),
        }
    }

    pub fn evaluate(&self, d: &[f64]) -> Result<Evaluation> {
        if d.len() != self.problem.tbw {
            return Err(Error::Mask(format!("{} weights for L_TBW = {}", d.len(), self.problem.tbw)));
        }
        let (t, r) = self.coefficients(d);
        let mse = mse_per_subcarrier(&self.model, &t, &r, self.form)?;
        let mut c = vec![1.0];
        c.extend_from_slice(d);
        Ok(Evaluation {
            evm_max_db: evm_max(&mse),
            evm_avg_db: evm_avg(&mse),
            stop_max_db: self.magnitude.max_db(&c),
            mse,
        })
    }
}

fn weights(u: &[f64]) -> Vec<f64> {
    u.iter().map(|v| v.sin().powi(2)).collect()
}

struct Penalized<'a> {
    eval: &'a Evaluator,
    mu: f64,
}

impl CostFunction for Penalized<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, u: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        let e = self.eval.evaluate(&weights(u))?;
        Ok(e.evm_max_db + self.mu * (e.stop_max_db + self.eval.problem.as_db).max(0.0))
    }
}

struct LocalResult {
    u: Vec<f64>,
    eval: Evaluation,
    mu: f64,
    iterations: u64,
    evaluations: u64,
    converged: bool,
}

/// Violation allowed on the grid the search runs against, dB.
const FEASIBLE_DB: f64 = 0.002;
const MU_START: f64 = 10.0;
const MU_MAX: f64 = 1e7;

fn nelder_mead(eval: &Evaluator, u0: &[f64], mu: f64) -> Result<(Vec<f64>, u64, u64, bool)> {
    let b = &eval.problem.budget;
    let step = 0.05;
    let mut simplex = vec![u0.to_vec()];
    for i in 0..u0.len() {
        let mut v = u0.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(b.tol_db)
        .map_err(|e| Error::Config(e.to_string()))?;
    let res = Executor::new(Penalized { eval, mu }, solver)
        .configure(|s| s.max_iters(b.max_iters).counting(true))
        .run()
        .map_err(|e| Error::Config(e.to_string()))?;
    let st = res.state();
    let u = st.get_best_param().cloned().unwrap_or_else(|| u0.to_vec());
    let evals = st.get_func_counts().get("cost_count").copied().unwrap_or(0);
    let converged = st.get_iter() < b.max_iters;
    Ok((u, st.get_iter(), evals, converged))
}

/// Local search with an escalating penalty, restarted from its own result
/// until the objective stops moving.
fn local_search(eval: &Evaluator, u0: Vec<f64>, mu0: f64) -> Result<LocalResult> {
    let target = -eval.problem.as_db;
    let mut mu = mu0;
    let mut u = u0;
    let (mut iterations, mut evaluations, mut converged) = (0, 0, true);
    let mut last = f64::INFINITY;
    loop {
        let (next, it, ev, conv) = nelder_mead(eval, &u, mu)?;
        iterations += it;
        evaluations += ev;
        converged &= conv;
        u = next;
        let e = eval.evaluate(&weights(&u))?;
        let obj = e.evm_max_db + mu * (e.stop_max_db - target).max(0.0);
        if e.stop_max_db > target + FEASIBLE_DB && mu < MU_MAX {
            mu *= 10.0;
            last = f64::INFINITY;
            continue;
        }
        if (last - obj).abs() < eval.problem.budget.tol_db * 10.0 || !conv {
            return Ok(LocalResult { u, eval: e, mu, iterations, evaluations, converged });
        }
        last = obj;
    }
}

fn better(a: &LocalResult, b: &LocalResult, target: f64) -> bool {
    let fa = a.eval.stop_max_db <= target + FEASIBLE_DB;
    let fb = b.eval.stop_max_db <= target + FEASIBLE_DB;
    match (fa, fb) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => a.eval.evm_max_db < b.eval.evm_max_db,
        (false, false) => a.eval.stop_max_db < b.eval.stop_max_db,
    }
}

fn starts(problem: &DesignProblem) -> Vec<Vec<f64>> {
    let p = problem.tbw;
    let base: Vec<f64> = raised_cosine_ramp(p).iter().map(|d| d.sqrt().asin()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(problem.seed);
    (0..problem.budget.restarts)
        .map(|k| {
            if k == 0 {
                base.clone()
            } else {
                base.iter().map(|u| u + rng.gen_range(-0.35..0.35)).collect()
            }
        })
        .collect()
}

/// Runs the constrained design.
pub fn optimize_weights(problem: &DesignProblem) -> Result<Design> {
    let coarse = Evaluator::new(problem)?;
    optimize_with(&coarse, problem)
}

/// Same as [`optimize_weights`] with a prebuilt evaluator.
pub fn optimize_with(coarse: &Evaluator, problem: &DesignProblem) -> Result<Design> {
    let target = -problem.as_db;
    let syn = problem.cfg(Side::Synthesis)?;
    let fine_density = 2 * problem.points_per_bin;
    let verify = |d: &[f64]| -> Result<f64> {
        let mask = problem.mask(d.to_vec())?;
        Ok(MagnitudeModel::stopband(&syn, &mask, fine_density)?.max_db(&mask.coefficients()))
    };

    if problem.tbw == 0 {
        let e = coarse.evaluate(&[])?;
        let fine = verify(&[])?;
        let status = if fine <= target + 0.01 { DesignStatus::Converged } else { DesignStatus::Infeasible };
        return Ok(Design {
            mask: problem.mask(Vec::new())?,
            report: DesignReport {
                evm_max_db: e.evm_max_db,
                evm_avg_db: e.evm_avg_db,
                stop_max_db: e.stop_max_db,
                stop_max_fine_db: fine,
                iterations: 0,
                evaluations: 1,
                penalty: 0.0,
                status,
            },
        });
    }

    // fixed start list, results gathered in start order
    let runs: Vec<Result<LocalResult>> = starts(problem)
        .into_par_iter()
        .map(|u0| local_search(coarse, u0, MU_START))
        .collect();
    let mut best: Option<LocalResult> = None;
    let (mut iterations, mut evaluations, mut converged) = (0, 0, true);
    for r in runs {
        let r = r?;
        iterations += r.iterations;
        evaluations += r.evaluations;
        converged &= r.converged;
        if best.as_ref().map_or(true, |b| better(&r, b, target)) {
            best = Some(r);
        }
    }
    let mut best = best.expect("at least one start");
    let mut fine = verify(&weights(&best.u))?;

    if fine > target + 0.01 {
        let mut dense = problem.clone();
        dense.points_per_bin = fine_density;
        let fine_eval = Evaluator {
            problem: dense,
            model: coarse.model.clone(),
            magnitude: MagnitudeModel::stopband(&syn, &problem.mask(vec![0.0; problem.tbw])?, fine_density)?,
            form: coarse.form,
        };
        let r = local_search(&fine_eval, best.u.clone(), best.mu)?;
        iterations += r.iterations;
        evaluations += r.evaluations;
        converged &= r.converged;
        best = LocalResult { eval: coarse.evaluate(&weights(&r.u))?, ..r };
        fine = verify(&weights(&best.u))?;
    }

    let d = weights(&best.u);
    let status = if fine > target + 0.01 {
        DesignStatus::Infeasible
    } else if converged {
        DesignStatus::Converged
    } else {
        DesignStatus::BudgetExhausted
    };
    Ok(Design {
        mask: problem.mask(d)?,
        report: DesignReport {
            evm_max_db: best.eval.evm_max_db,
            evm_avg_db: best.eval.evm_avg_db,
            stop_max_db: best.eval.stop_max_db,
            stop_max_fine_db: fine,
            iterations,
            evaluations,
            penalty: best.mu,
            status,
        },
    })
}
