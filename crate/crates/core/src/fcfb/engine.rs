//! Streaming block engine.
//!
//! The range functions take absolute block indices and accept inputs that
//! start at an arbitrary sample time; samples outside the supplied slice are
//! zero. Negative block indices are allowed, which is how the leading filter
//! transient in front of time zero is obtained.

use crate::error::{Error, Result};
use crate::fcfb::{block_phase, FcConfig, Side, WeightMask};
use crate::transforms::{fft_in_place, ifft_in_place, C64};

/// One subband: its configuration and the mask diagonal in shifted order.
#[derive(Debug, Clone, PartialEq)]
pub struct Subband {
    pub cfg: FcConfig,
    pub weights: Vec<f64>,
}

impl Subband {
    pub fn new(cfg: FcConfig, mask: &WeightMask) -> Result<Self> {
        if mask.l != cfg.l {
            return Err(Error::Mask(format!(
                "mask length {} does not match transform length {}",
                mask.l, cfg.l
            )));
        }
        Self::from_weights(cfg, mask.diagonal())
    }

    /// Arbitrary diagonal weights, e.g. a single basis vector of a mask.
    pub fn from_weights(cfg: FcConfig, weights: Vec<f64>) -> Result<Self> {
        cfg.validate()?;
        if weights.len() != cfg.l {
            return Err(Error::Mask(format!(
                "weight vector length {} does not match transform length {}",
                weights.len(),
                cfg.l
            )));
        }
        Ok(Subband { cfg, weights })
    }
}

#[derive(Debug, Clone)]
struct Plan {
    cfg: FcConfig,
    // (short bin, long bin, weight) for every nonzero weight
    entries: Vec<(usize, usize, f64)>,
    lead: i64,
}

impl Plan {
    fn new(sub: &Subband) -> Self {
        let l = sub.cfg.l;
        let entries = sub
            .weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(q, &w)| ((q + l / 2) % l, sub.cfg.long_bin(q), w))
            .collect();
        Plan {
            cfg: sub.cfg,
            entries,
            lead: sub.cfg.short_overlap().0 as i64,
        }
    }
}

fn check_shared(subs: &[Subband], side: Side) -> Result<(usize, usize)> {
    let first = subs
        .first()
        .ok_or_else(|| Error::Config("filter bank needs at least one subband".into()))?;
    let (n, ns) = (first.cfg.n, first.cfg.ns);
    for s in subs {
        if s.cfg.n != n || s.cfg.ns != ns {
            return Err(Error::Config(format!(
                "subbands disagree on long transform: ({}, {}) vs ({n}, {ns})",
                s.cfg.n, s.cfg.ns
            )));
        }
        if s.cfg.side != side {
            return Err(Error::Config(format!("subband configured for {:?} side", s.cfg.side)));
        }
    }
    Ok((n, ns))
}

fn fill_window(buf: &mut [C64], x: &[C64], x_start: i64, t0: i64) -> bool {
    let mut any = false;
    for (j, b) in buf.iter_mut().enumerate() {
        let idx = t0 + j as i64 - x_start;
        *b = if idx >= 0 && (idx as usize) < x.len() {
            any = true;
            x[idx as usize]
        } else {
            C64::new(0.0, 0.0)
        };
    }
    any
}

/// Multi-subband synthesis bank sharing one long inverse transform.
#[derive(Debug, Clone)]
pub struct SynthesisBank {
    n: usize,
    ns: usize,
    plans: Vec<Plan>,
}

impl SynthesisBank {
    pub fn new(subbands: &[Subband]) -> Result<Self> {
        let (n, ns) = check_shared(subbands, Side::Synthesis)?;
        Ok(SynthesisBank {
            n,
            ns,
            plans: subbands.iter().map(Plan::new).collect(),
        })
    }

    pub fn long_len(&self) -> usize {
        self.n
    }

    pub fn hop(&self) -> usize {
        self.ns
    }

    /// Processes streams that start at time zero. Output covers the blocks
    /// `0 .. max ceil(len_m / L_S,m)`.
    pub fn process(&self, inputs: &[&[C64]]) -> Result<Vec<C64>> {
        let blocks = inputs
            .iter()
            .zip(&self.plans)
            .map(|(x, p)| x.len().div_ceil(p.cfg.ls))
            .max()
            .unwrap_or(0);
        let placed: Vec<(&[C64], i64)> = inputs.iter().map(|x| (*x, 0)).collect();
        self.process_range(&placed, 0, blocks)
    }

    /// Output samples `r_first * N_S .. (r_first + count) * N_S` for inputs
    /// given as `(samples, start time)` pairs on each subband's low-rate grid.
    pub fn process_range(
        &self,
        inputs: &[(&[C64], i64)],
        r_first: i64,
        count: usize,
    ) -> Result<Vec<C64>> {
        if inputs.len() != self.plans.len() {
            return Err(Error::Config(format!(
                "{} input streams for {} subbands",
                inputs.len(),
                self.plans.len()
            )));
        }
        let (nl, _) = crate::transforms::overlap_split(self.n, self.ns);
        let mut out = Vec::with_capacity(count * self.ns);
        let mut spec = vec![C64::new(0.0, 0.0); self.n];
        let mut short: Vec<Vec<C64>> =
            self.plans.iter().map(|p| vec![C64::new(0.0, 0.0); p.cfg.l]).collect();
        for r in r_first..r_first + count as i64 {
            spec.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            let mut any = false;
            for ((plan, buf), (x, start)) in self.plans.iter().zip(&mut short).zip(inputs) {
                let t0 = r * plan.cfg.ls as i64 - plan.lead;
                if !fill_window(buf, x, *start, t0) {
                    continue;
                }
                any = true;
                fft_in_place(buf);
                let rot = block_phase(r, &plan.cfg);
                for &(s, k, w) in &plan.entries {
                    spec[k] += buf[s] * rot * w;
                }
            }
            if any {
                ifft_in_place(&mut spec);
                out.extend_from_slice(&spec[nl..nl + self.ns]);
            } else {
                out.extend(std::iter::repeat(C64::new(0.0, 0.0)).take(self.ns));
            }
        }
        Ok(out)
    }
}

/// Multi-subband analysis bank sharing one long forward transform.
#[derive(Debug, Clone)]
pub struct AnalysisBank {
    n: usize,
    ns: usize,
    plans: Vec<Plan>,
}

impl AnalysisBank {
    pub fn new(subbands: &[Subband]) -> Result<Self> {
        let (n, ns) = check_shared(subbands, Side::Analysis)?;
        Ok(AnalysisBank {
            n,
            ns,
            plans: subbands.iter().map(Plan::new).collect(),
        })
    }

    pub fn long_len(&self) -> usize {
        self.n
    }

    pub fn hop(&self) -> usize {
        self.ns
    }

    /// Processes a stream starting at time zero over blocks `0 .. ceil(len / N_S)`.
    pub fn process(&self, y: &[C64]) -> Result<Vec<Vec<C64>>> {
        self.process_range(y, 0, 0, y.len().div_ceil(self.ns))
    }

    /// Low-rate outputs `r_first * L_S,m .. (r_first + count) * L_S,m` of
    /// every subband for an input starting at high-rate time `y_start`.
    pub fn process_range(
        &self,
        y: &[C64],
        y_start: i64,
        r_first: i64,
        count: usize,
    ) -> Result<Vec<Vec<C64>>> {
        let (nl, _) = crate::transforms::overlap_split(self.n, self.ns);
        let mut outs: Vec<Vec<C64>> = self
            .plans
            .iter()
            .map(|p| Vec::with_capacity(count * p.cfg.ls))
            .collect();
        let mut spec = vec![C64::new(0.0, 0.0); self.n];
        let mut short: Vec<Vec<C64>> =
            self.plans.iter().map(|p| vec![C64::new(0.0, 0.0); p.cfg.l]).collect();
        for r in r_first..r_first + count as i64 {
            let t0 = r * self.ns as i64 - nl as i64;
            let any = fill_window(&mut spec, y, y_start, t0);
            if any {
                fft_in_place(&mut spec);
            }
            for ((plan, buf), out) in self.plans.iter().zip(&mut short).zip(&mut outs) {
                let ls = plan.cfg.ls;
                if !any {
                    out.extend(std::iter::repeat(C64::new(0.0, 0.0)).take(ls));
                    continue;
                }
                buf.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
                let rot = block_phase(r, &plan.cfg).conj();
                for &(s, k, w) in &plan.entries {
                    buf[s] = spec[k] * rot * w;
                }
                ifft_in_place(buf);
                let lead = plan.lead as usize;
                out.extend_from_slice(&buf[lead..lead + ls]);
            }
        }
        Ok(outs)
    }
}
