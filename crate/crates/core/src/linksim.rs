//! Uncoded link and spectrum simulation on the high-rate grid.
//!
//! A signal is a set of subbands, each a CP-OFDM (optionally DFT-spread)
//! stream with its own transmit and receive processing, summed at the high
//! rate and passed through an amplifier. The target signal may be mixed
//! with a delayed interferer, convolved with a channel and disturbed by
//! noise before every target subband is detected.
//!
//! Two framings exist. [`Framing::Continuous`] runs the subframes back to
//! back, as the analytical model assumes; the first and last subframe only
//! warm the filters up and are not scored when there are three or more.
//! [`Framing::Guarded`] processes each subframe on its own, adds a guard
//! period and tapers everything that spills outside the subframe with a
//! raised-cosine slope spread over the guard.
//!
//! Trials run in parallel; trial `i` draws from stream `i` of the seeded
//! generator and results are reduced in trial order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fcfb::{AnalysisBank, FcConfig, Subband, SynthesisBank, WeightMask};
use crate::metrics::{psd_estimate, to_db, Psd};
use crate::ofdm::filters::modulate_taps;
use crate::ofdm::{demodulate, dft_despread, dft_spread, modulate, wola_rx, wola_tx, OfdmNumerology, WolaParams};
use crate::rfmodels::{mean_power_dbm, PaModel};
use crate::transforms::C64;

/// Square QAM alphabets with unit mean energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    #[default]
    Qpsk,
    Qam16,
    Qam64,
    Qam256,
}

impl Modulation {
    /// Levels per axis.
    pub fn levels(&self) -> usize {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 8,
            Modulation::Qam256 => 16,
        }
    }

    fn scale(&self) -> f64 {
        let m = (self.levels() * self.levels()) as f64;
        (1.5 / (m - 1.0)).sqrt()
    }

    fn level(&self, i: usize) -> f64 {
        (2.0 * i as f64 - (self.levels() - 1) as f64) * self.scale()
    }

    pub fn random(&self, rng: &mut impl Rng, count: usize) -> Vec<C64> {
        let m = self.levels();
        (0..count)
            .map(|_| C64::new(self.level(rng.gen_range(0..m)), self.level(rng.gen_range(0..m))))
            .collect()
    }

    /// Nearest constellation point.
    pub fn slice(&self, v: C64) -> C64 {
        let m = self.levels() as f64;
        let axis = |x: f64| {
            let i = ((x / self.scale() + m - 1.0) / 2.0).round().clamp(0.0, m - 1.0);
            self.level(i as usize)
        };
        C64::new(axis(v.re), axis(v.im))
    }
}

/// Processing of one subband on one side of the link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Processing {
    /// Plain CP-OFDM at the high rate.
    Plain,
    /// Fast-convolution filtering with the given mask.
    Fc { ls: usize, mask: WeightMask },
    /// Windowed overlap-and-add at the high rate.
    Wola { n_ws: usize },
    /// Linear-phase lowpass prototype, odd length, shifted to the subband
    /// and applied at the high rate.
    Filter { taps: Vec<f64> },
}

/// One subband of a signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubbandSpec {
    /// Numerology on the subband's own low-rate grid (`L` is the short
    /// transform length, equal to `N` for plain processing).
    pub num: OfdmNumerology,
    /// Long-transform bin of subcarrier offset zero.
    pub center: usize,
    pub modulation: Modulation,
    pub dft_spread: bool,
    pub tx: Processing,
    pub rx: Processing,
}

impl SubbandSpec {
    fn spacing(&self) -> f64 {
        self.num.n as f64 / self.num.at_high_rate().map(|h| h.l_ofdm).unwrap_or(self.num.n) as f64
    }

    /// Long bin (possibly outside `0..N` before wrapping) of each subcarrier.
    pub fn subcarrier_bins(&self) -> Vec<f64> {
        let rho = self.spacing();
        self.num
            .subcarrier_offsets()
            .into_iter()
            .map(|o| self.center as f64 + o as f64 * rho)
            .collect()
    }

    /// Occupied interval in long bins, half a subcarrier beyond the edges.
    fn occupied(&self) -> (f64, f64) {
        let bins = self.subcarrier_bins();
        let rho = self.spacing();
        let lo = bins.iter().cloned().fold(f64::MAX, f64::min) - rho / 2.0;
        let hi = bins.iter().cloned().fold(f64::MIN, f64::max) + rho / 2.0;
        (lo, hi)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SignalSpec {
    pub subbands: Vec<SubbandSpec>,
    pub pa: PaModel,
    /// Back-off below the amplifier's input 1 dB compression point. Without
    /// an amplifier the signal keeps its natural level.
    pub ibo_db: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Interferer {
    pub signal: SignalSpec,
    /// Delay in high-rate samples relative to the target.
    pub offset: i64,
    /// Gain applied after the interferer's amplifier, dB.
    pub power_offset_db: f64,
}

/// Channel impulse response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ChannelTaps {
    Fixed { taps: Vec<C64> },
    /// A new random exponential power-delay profile every trial.
    Exponential { rms_delay: f64, len: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub taps: ChannelTaps,
    /// Signal to noise ratio inside the target's occupied band, dB.
    pub snr_db: Option<f64>,
}

impl Default for Channel {
    fn default() -> Self {
        Channel { taps: ChannelTaps::Fixed { taps: vec![C64::new(1.0, 0.0)] }, snr_db: None }
    }
}

/// Receiver FFT window position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowPlacement {
    #[default]
    EndOfCp,
    CenterOfCp,
    /// Advance before the end of the CP in high-rate samples.
    Advance(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Framing {
    Continuous,
    /// Guard period in high-rate samples.
    Guarded(usize),
}

#[derive(Debug, Clone)]
pub struct LinkScenario {
    /// Long transform length; the high rate is `N` times the 15 kHz spacing.
    pub n: usize,
    pub target: SignalSpec,
    pub interferer: Option<Interferer>,
    pub channel: Channel,
    pub window: WindowPlacement,
    pub framing: Framing,
    /// Divide by the channel response at each subcarrier.
    pub equalize: bool,
    pub subframes: usize,
    pub trials: usize,
    pub seed: u64,
    /// Keep up to this many `(sent, received)` pairs of the first subband.
    pub constellation: usize,
}

impl LinkScenario {
    pub fn new(n: usize, target: SignalSpec) -> Self {
        LinkScenario {
            n,
            target,
            interferer: None,
            channel: Channel::default(),
            window: WindowPlacement::EndOfCp,
            framing: Framing::Guarded(72),
            equalize: false,
            subframes: 1,
            trials: 1,
            seed: 0,
            constellation: 0,
        }
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.n as f64 * 15e3
    }

    pub fn validate(&self) -> Result<()> {
        if self.target.subbands.is_empty() {
            return Err(Error::Config("no target subband".into()));
        }
        if self.subframes == 0 || self.trials == 0 {
            return Err(Error::Config("at least one subframe and one trial are needed".into()));
        }
        let mut signals = vec![&self.target];
        if let Some(i) = &self.interferer {
            signals.push(&i.signal);
        }
        for sig in signals {
            for sb in &sig.subbands {
                check_subband(sb, self.n)?;
            }
        }
        if let ChannelTaps::Fixed { taps } = &self.channel.taps {
            if taps.is_empty() {
                return Err(Error::Config("empty channel".into()));
            }
        }
        if let ChannelTaps::Exponential { rms_delay, len } = &self.channel.taps {
            if !(*rms_delay >= 0.0) || *len == 0 {
                return Err(Error::Config("exponential profile needs a delay spread and a length".into()));
            }
        }
        Ok(())
    }
}

fn check_subband(sb: &SubbandSpec, n: usize) -> Result<()> {
    sb.num.validate()?;
    if sb.num.n != n {
        return Err(Error::Config(format!("subband uses N = {}, scenario N = {n}", sb.num.n)));
    }
    let high = sb.num.at_high_rate()?;
    for p in [&sb.tx, &sb.rx] {
        match p {
            Processing::Fc { ls, mask } => {
                FcConfig::synthesis(n, sb.num.l, *ls, sb.center)?.validate()?;
                if mask.l != sb.num.l {
                    return Err(Error::Mask(format!("mask for L = {}, numerology L = {}", mask.l, sb.num.l)));
                }
            }
            Processing::Wola { n_ws } => {
                if *n_ws > high.l_cp {
                    return Err(Error::Config(format!("window slope {n_ws} longer than the CP {}", high.l_cp)));
                }
            }
            Processing::Filter { taps } => {
                if taps.len() % 2 == 0 {
                    return Err(Error::Config("filter length must be odd".into()));
                }
            }
            Processing::Plain => {}
        }
    }
    if sb.center >= n {
        return Err(Error::Config(format!("center bin {} outside 0..{n}", sb.center)));
    }
    Ok(())
}

/// Linear convolution with `taps` plus complex white noise of variance
/// `noise_var`. The output is `taps.len() - 1` samples longer.
pub fn apply_channel(stream: &[C64], taps: &[C64], seed: u64, noise_var: f64) -> Vec<C64> {
    let mut out = convolve(stream, taps);
    if noise_var > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        add_noise(&mut out, noise_var, &mut rng);
    }
    out
}

fn convolve(x: &[C64], h: &[C64]) -> Vec<C64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let mut out = vec![C64::new(0.0, 0.0); x.len() + h.len() - 1];
    for (i, &xi) in x.iter().enumerate() {
        if xi == C64::new(0.0, 0.0) {
            continue;
        }
        for (j, &hj) in h.iter().enumerate() {
            out[i + j] += xi * hj;
        }
    }
    out
}

fn add_noise(x: &mut [C64], var: f64, rng: &mut impl Rng) {
    let s = (var / 2.0).sqrt();
    for v in x {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *v += C64::new(re, im) * s;
    }
}

/// Random taps with an exponential power-delay profile of the given RMS
/// delay spread (samples), Rayleigh amplitudes and unit total energy.
pub fn exponential_profile(rms_delay: f64, len: usize, rng: &mut impl Rng) -> Vec<C64> {
    let mut taps: Vec<C64> = (0..len.max(1))
        .map(|k| {
            let p = if rms_delay > 0.0 { (-(k as f64) / rms_delay).exp() } else if k == 0 { 1.0 } else { 0.0 };
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re, im) * (p / 2.0).sqrt()
        })
        .collect();
    let e: f64 = taps.iter().map(|t| t.norm_sqr()).sum();
    if e > 0.0 {
        taps.iter_mut().for_each(|t| *t /= e.sqrt());
    }
    taps
}

/// `target + g * interferer(t - offset)` over the length of `target`, with
/// `g` the amplitude of `power_offset_db`.
pub fn asynchronous_mix(target: &[C64], interferer: &[C64], offset: i64, power_offset_db: f64) -> Vec<C64> {
    let g = 10f64.powf(power_offset_db / 20.0);
    let mut out = target.to_vec();
    if g == 0.0 {
        return out;
    }
    for (t, v) in out.iter_mut().enumerate() {
        let s = t as i64 - offset;
        if s >= 0 && (s as usize) < interferer.len() {
            *v += interferer[s as usize] * g;
        }
    }
    out
}

fn mix(x: &mut [C64], bin: f64, n: usize, t0: i64, sign: f64) {
    for (i, v) in x.iter_mut().enumerate() {
        let t = t0 + i as i64;
        let turn = (bin * t as f64 / n as f64).rem_euclid(1.0);
        *v *= C64::from_polar(1.0, sign * 2.0 * std::f64::consts::PI * turn);
    }
}

/// Zero-phase filtering with a real odd-length prototype moved to `f0`.
fn filter_centered(x: &[C64], taps: &[f64], f0: f64) -> Vec<C64> {
    let h = modulate_taps(taps, f0);
    let mid = (taps.len() - 1) / 2;
    let full = convolve(x, &h);
    full[mid..mid + x.len()].to_vec()
}

/// High-rate transmit samples of one subband for time `t_lo .. t_hi`
/// relative to the start of its first symbol.
fn tx_subband(sb: &SubbandSpec, qam: &[C64], first: usize, t_lo: i64, t_hi: i64) -> Result<Vec<C64>> {
    let n = sb.num.n;
    let len = (t_hi - t_lo) as usize;
    let data = if sb.dft_spread {
        let mut v = Vec::with_capacity(qam.len());
        for c in qam.chunks(sb.num.active) {
            v.extend(dft_spread(c)?);
        }
        v
    } else {
        qam.to_vec()
    };
    let place = |x: &[C64]| -> Vec<C64> {
        (t_lo..t_hi)
            .map(|t| if t >= 0 && (t as usize) < x.len() { x[t as usize] } else { C64::new(0.0, 0.0) })
            .collect()
    };
    let high = sb.num.at_high_rate()?;
    let mut out = match &sb.tx {
        Processing::Plain => {
            let mut y = place(&modulate(&data, &high, first)?);
            mix(&mut y, sb.center as f64, n, t_lo, 1.0);
            y
        }
        Processing::Wola { n_ws } => {
            let mut y = place(&wola_tx(&data, &high, &WolaParams { n_ws: *n_ws }, first)?);
            mix(&mut y, sb.center as f64, n, t_lo, 1.0);
            y
        }
        Processing::Filter { taps } => {
            // filter the whole burst so the transients are complete
            let x = modulate(&data, &high, first)?;
            let pad = taps.len();
            let mut ext = vec![C64::new(0.0, 0.0); pad];
            ext.extend_from_slice(&x);
            ext.extend(std::iter::repeat(C64::new(0.0, 0.0)).take(pad));
            mix(&mut ext, sb.center as f64, n, -(pad as i64), 1.0);
            let (lo, hi) = sb.occupied();
            let y = filter_centered(&ext, taps, 0.5 * (lo + hi) / n as f64);
            (t_lo..t_hi)
                .map(|t| {
                    let i = t + pad as i64;
                    if i >= 0 && (i as usize) < y.len() { y[i as usize] } else { C64::new(0.0, 0.0) }
                })
                .collect()
        }
        Processing::Fc { ls, mask } => {
            let cfg = FcConfig::synthesis(n, sb.num.l, *ls, sb.center)?;
            let bank = SynthesisBank::new(&[Subband::new(cfg, mask)?])?;
            let x = modulate(&data, &sb.num, first)?;
            let ns = cfg.ns as i64;
            let r0 = t_lo.div_euclid(ns);
            let r1 = (t_hi + ns - 1).div_euclid(ns);
            let y = bank.process_range(&[(&x, 0)], r0, (r1 - r0) as usize)?;
            let skip = (t_lo - r0 * ns) as usize;
            y[skip..skip + len].to_vec()
        }
    };
    out.truncate(len);
    Ok(out)
}

fn advance(w: WindowPlacement, l_cp: usize, rate: usize) -> Result<usize> {
    let a = match w {
        WindowPlacement::EndOfCp => 0,
        WindowPlacement::CenterOfCp => l_cp / 2,
        WindowPlacement::Advance(h) => {
            if h % rate != 0 {
                return Err(Error::Config(format!("window advance {h} is not a multiple of {rate}")));
            }
            h / rate
        }
    };
    if a > l_cp {
        return Err(Error::OutOfRange(format!("window advance beyond the CP of {l_cp} samples")));
    }
    Ok(a)
}

/// Detected subcarrier values of `count` symbols; `y[0]` is at time `y_start`
/// relative to the first symbol.
fn rx_subband(
    sb: &SubbandSpec,
    y: &[C64],
    y_start: i64,
    first: usize,
    count: usize,
    window: WindowPlacement,
) -> Result<Vec<C64>> {
    let n = sb.num.n;
    let high = sb.num.at_high_rate()?;
    let body_len: usize = (first..first + count).map(|i| high.cp_len(i) + high.l_ofdm).sum();
    let body = |x: &[C64]| -> Vec<C64> {
        (0..body_len as i64)
            .map(|t| {
                let i = t - y_start;
                if i >= 0 && (i as usize) < x.len() { x[i as usize] } else { C64::new(0.0, 0.0) }
            })
            .collect()
    };
    let values = match &sb.rx {
        Processing::Plain => {
            let mut b = body(y);
            mix(&mut b, sb.center as f64, n, 0, -1.0);
            demodulate(&b, &high, advance(window, high.l_cp, 1)?, first)?
        }
        Processing::Wola { n_ws } => {
            let mut b = body(y);
            mix(&mut b, sb.center as f64, n, 0, -1.0);
            let p = WolaParams { n_ws: *n_ws };
            let folded = wola_rx(&b, &high, &p, first)?;
            demodulate(&folded, &high, p.rx_advance(&high), first)?
        }
        Processing::Filter { taps } => {
            let (lo, hi) = sb.occupied();
            let filtered = filter_centered(y, taps, 0.5 * (lo + hi) / n as f64);
            let mut b = body(&filtered);
            mix(&mut b, sb.center as f64, n, 0, -1.0);
            demodulate(&b, &high, advance(window, high.l_cp, 1)?, first)?
        }
        Processing::Fc { ls, mask } => {
            let cfg = FcConfig::analysis(n, sb.num.l, *ls, sb.center)?;
            let bank = AnalysisBank::new(&[Subband::new(cfg, mask)?])?;
            let low_len = body_len * sb.num.l / n;
            let blocks = low_len.div_ceil(*ls);
            let low = bank.process_range(y, y_start, 0, blocks)?.remove(0);
            demodulate(&low[..low_len.min(low.len())], &sb.num, advance(window, sb.num.l_cp, n / sb.num.l)?, first)?
        }
    };
    Ok(values)
}

/// One subframe-aligned burst of a signal.
struct Burst {
    stream: Vec<C64>,
    /// Time of `stream[0]` relative to the first symbol.
    start: i64,
    /// Transmitted QAM values per subband.
    qam: Vec<Vec<C64>>,
}

fn subframe_len_high(sb: &SubbandSpec) -> Result<usize> {
    Ok(sb.num.at_high_rate()?.subframe_len())
}

fn rc_taper(len: usize, rising: bool) -> Vec<f64> {
    (0..len)
        .map(|j| {
            let w = (std::f64::consts::PI * (j as f64 + 0.5) / (2.0 * len as f64)).sin().powi(2);
            if rising { w } else { 1.0 - w }
        })
        .collect()
}

/// Generates `subframes` subframes of `sig` over `t_lo .. t_hi`; samples
/// outside `0 .. body` are tapered when `taper` is set.
fn burst(
    sig: &SignalSpec,
    subframes: usize,
    t_lo: i64,
    t_hi: i64,
    taper: bool,
    rng: &mut impl Rng,
) -> Result<Burst> {
    let len = (t_hi - t_lo) as usize;
    let mut stream = vec![C64::new(0.0, 0.0); len];
    let mut qam = Vec::new();
    for sb in &sig.subbands {
        let count = sb.num.symbols_per_subframe() * subframes;
        let q = sb.modulation.random(rng, count * sb.num.active);
        let y = tx_subband(sb, &q, 0, t_lo, t_hi)?;
        stream.iter_mut().zip(&y).for_each(|(a, b)| *a += b);
        qam.push(q);
    }
    if taper {
        let body = subframes as i64 * subframe_len_high(&sig.subbands[0])? as i64;
        let lead = (-t_lo).max(0) as usize;
        let trail = (t_hi - body).max(0) as usize;
        for (i, w) in rc_taper(lead, true).into_iter().enumerate() {
            stream[i] *= w;
        }
        let tail = rc_taper(trail, false);
        for (j, w) in tail.into_iter().enumerate() {
            stream[len - trail + j] *= w;
        }
    }
    Ok(Burst { stream, start: t_lo, qam })
}

/// Scales to the back-off and applies the amplifier. The drive level is
/// set from the mean power over `body`. Returns the output and the linear
/// gain a small signal sees end to end.
fn amplify(sig: &SignalSpec, x: &[C64], bodies: &[std::ops::Range<usize>]) -> Result<(Vec<C64>, f64)> {
    let gain = sig.pa.small_signal_gain();
    let (p1, ibo) = match (sig.pa.p1db_input_dbm(), sig.ibo_db) {
        (Some(p1), Some(ibo)) => (p1, ibo),
        _ => return Ok((sig.pa.apply(x), gain)),
    };
    let p = mean_square(x, bodies);
    if p == 0.0 {
        return Err(Error::Config("a silent signal cannot be driven".into()));
    }
    let drive = crate::rfmodels::dbm_to_amplitude(p1 - ibo) / p.sqrt();
    let scaled: Vec<C64> = x.iter().map(|v| v * drive).collect();
    Ok((sig.pa.apply(&scaled), drive * gain))
}

fn mean_square(x: &[C64], bodies: &[std::ops::Range<usize>]) -> f64 {
    let n: usize = bodies.iter().map(|b| b.len()).sum();
    let p: f64 = bodies.iter().flat_map(|b| x[b.clone()].iter()).map(|v| v.norm_sqr()).sum();
    p / n.max(1) as f64
}

/// A run of consecutive subframes inside a transmitted stream.
struct Segment {
    /// Stream index of the first symbol.
    body: usize,
    subframes: usize,
    /// Scored subframes.
    scored: std::ops::Range<usize>,
    qam: Vec<Vec<C64>>,
}

struct Transmitted {
    stream: Vec<C64>,
    segments: Vec<Segment>,
    bodies: Vec<std::ops::Range<usize>>,
    chain_gain: f64,
}

fn target_subframe_len(sig: &SignalSpec) -> Result<usize> {
    let s = subframe_len_high(&sig.subbands[0])?;
    for sb in &sig.subbands[1..] {
        if subframe_len_high(sb)? != s {
            return Err(Error::Framing("target subbands differ in subframe length".into()));
        }
    }
    Ok(s)
}

fn transmit(sig: &SignalSpec, n: usize, framing: Framing, subframes: usize, rng: &mut impl Rng) -> Result<Transmitted> {
    let sf = target_subframe_len(sig)?;
    let mut stream = Vec::new();
    let mut segments = Vec::new();
    let mut bodies = Vec::new();
    match framing {
        Framing::Continuous => {
            let pad = n as i64;
            let body = (subframes * sf) as i64;
            let b = burst(sig, subframes, -pad, body + pad, false, rng)?;
            stream = b.stream;
            let scored = if subframes >= 3 { 1..subframes - 1 } else { 0..subframes };
            bodies.push(pad as usize..(pad + body) as usize);
            segments.push(Segment { body: pad as usize, subframes, scored, qam: b.qam });
        }
        Framing::Guarded(g) => {
            let (lead, trail) = (g / 2, g - g / 2);
            for _ in 0..subframes {
                let b = burst(sig, 1, -(lead as i64), (sf + trail) as i64, true, rng)?;
                let body = stream.len() + lead;
                bodies.push(body..body + sf);
                segments.push(Segment { body, subframes: 1, scored: 0..1, qam: b.qam });
                stream.extend(b.stream);
            }
        }
    }
    let (stream, chain_gain) = amplify(sig, &stream, &bodies)?;
    Ok(Transmitted { stream, segments, bodies, chain_gain })
}

/// Per-subband result of a link run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubbandResult {
    pub evm_per_subcarrier_db: Vec<f64>,
    pub evm_db: f64,
    pub ser: f64,
    pub symbols: u64,
    pub symbol_errors: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkResult {
    pub subbands: Vec<SubbandResult>,
    /// EVM over every scored symbol of every target subband, dB.
    pub evm_db: f64,
    pub ser: f64,
    /// Mean target amplifier output over the subframes, when an amplifier
    /// with a back-off is configured.
    pub pa_output_dbm: Option<f64>,
    /// Samples outside the amplifier model's valid input range.
    pub clamped_samples: u64,
    /// Whether the interferer occupies frequencies of a target subband.
    pub interferer_overlaps: bool,
    pub constellation: Vec<(C64, C64)>,
}

#[derive(Debug, Clone, Default)]
struct Acc {
    err: Vec<Vec<f64>>,
    count: Vec<Vec<u64>>,
    errors: Vec<u64>,
    power_dbm: Vec<f64>,
    constellation: Vec<(C64, C64)>,
}

impl Acc {
    fn new(sig: &SignalSpec) -> Self {
        Acc {
            err: sig.subbands.iter().map(|s| vec![0.0; s.num.active]).collect(),
            count: sig.subbands.iter().map(|s| vec![0; s.num.active]).collect(),
            errors: vec![0; sig.subbands.len()],
            power_dbm: Vec::new(),
            constellation: Vec::new(),
        }
    }

    fn merge(mut self, o: Acc, keep: usize) -> Acc {
        for (a, b) in self.err.iter_mut().zip(&o.err) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.count.iter_mut().zip(&o.count) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.errors.iter_mut().zip(&o.errors).for_each(|(x, y)| *x += y);
        self.power_dbm.extend(o.power_dbm);
        let room = keep.saturating_sub(self.constellation.len());
        self.constellation.extend(o.constellation.into_iter().take(room));
        self
    }
}

fn channel_response(taps: &[C64], bin: f64, n: usize) -> C64 {
    taps.iter()
        .enumerate()
        .map(|(k, h)| h * C64::from_polar(1.0, -2.0 * std::f64::consts::PI * (bin * k as f64 / n as f64).rem_euclid(1.0)))
        .sum()
}

fn circular_overlap(a: (f64, f64), b: (f64, f64), n: f64) -> bool {
    // shift b by multiples of N next to a
    let mid_a = 0.5 * (a.0 + a.1);
    let mid_b = 0.5 * (b.0 + b.1);
    let k = ((mid_a - mid_b) / n).round();
    let (lo, hi) = (b.0 + k * n, b.1 + k * n);
    lo < a.1 - 1e-9 && hi > a.0 + 1e-9
}

fn trial(s: &LinkScenario, index: usize) -> Result<Acc> {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    rng.set_stream(index as u64);
    let tx = transmit(&s.target, s.n, s.framing, s.subframes, &mut rng)?;
    let mut acc = Acc::new(&s.target);
    if s.target.ibo_db.is_some() && s.target.pa.p1db_input_dbm().is_some() {
        let p = mean_square(&tx.stream, &tx.bodies);
        acc.power_dbm.push(10.0 * (p / 100.0).max(1e-300).log10() + 30.0);
    }
    let mut y = tx.stream.clone();
    if let Some(intf) = &s.interferer {
        let sf = target_subframe_len(&intf.signal)?;
        let pad = s.n as i64;
        let need = y.len() as i64 + intf.offset.abs() + pad;
        let count = (need as usize).div_ceil(sf) + 1;
        let b = burst(&intf.signal, count, -pad, (count * sf) as i64 + pad, false, &mut rng)?;
        let whole = 0..b.stream.len();
        let (iy, _) = amplify(&intf.signal, &b.stream, &[whole])?;
        // interferer time zero sits at the first target symbol
        let shift = tx.bodies[0].start as i64 + b.start + intf.offset;
        y = asynchronous_mix(&y, &iy, shift, intf.power_offset_db);
    }
    let taps = match &s.channel.taps {
        ChannelTaps::Fixed { taps } => taps.clone(),
        ChannelTaps::Exponential { rms_delay, len } => exponential_profile(*rms_delay, *len, &mut rng),
    };
    let energy: f64 = taps.iter().map(|t| t.norm_sqr()).sum();
    let mut y = convolve(&y, &taps);
    y.truncate(tx.stream.len());
    if let Some(snr) = s.channel.snr_db {
        let occupied: f64 = s
            .target
            .subbands
            .iter()
            .map(|sb| sb.num.active as f64 * sb.spacing())
            .sum::<f64>()
            / s.n as f64;
        let p = mean_square(&tx.stream, &tx.bodies) * energy;
        add_noise(&mut y, p / (occupied * 10f64.powf(snr / 10.0)), &mut rng);
    }

    for seg in &tx.segments {
        for (k, sb) in s.target.subbands.iter().enumerate() {
            let per = sb.num.symbols_per_subframe();
            let count = per * seg.subframes;
            let rx = rx_subband(sb, &y, -(seg.body as i64), 0, count, s.window)?;
            let eq: Vec<C64> = sb
                .subcarrier_bins()
                .iter()
                .map(|&b| {
                    let h = if s.equalize { channel_response(&taps, b, s.n) } else { C64::new(1.0, 0.0) };
                    h * tx.chain_gain
                })
                .collect();
            let a = sb.num.active;
            for sym in seg.scored.start * per..seg.scored.end * per {
                let got = &rx[sym * a..(sym + 1) * a];
                let mut v: Vec<C64> = got.iter().zip(&eq).map(|(r, e)| r / e).collect();
                if sb.dft_spread {
                    v = dft_despread(&v)?;
                }
                let sent = &seg.qam[k][sym * a..(sym + 1) * a];
                for (j, (r, t)) in v.iter().zip(sent).enumerate() {
                    acc.err[k][j] += (r - t).norm_sqr();
                    acc.count[k][j] += 1;
                    if sb.modulation.slice(*r) != *t {
                        acc.errors[k] += 1;
                    }
                    if k == 0 && acc.constellation.len() < s.constellation {
                        acc.constellation.push((*t, *r));
                    }
                }
            }
        }
    }
    Ok(acc)
}

/// Runs every trial of `s` and scores the target subbands.
pub fn run_link(s: &LinkScenario) -> Result<LinkResult> {
    s.validate()?;
    let mut pas = vec![&s.target.pa];
    if let Some(i) = &s.interferer {
        pas.push(&i.signal.pa);
    }
    let clamped_before: u64 = pas.iter().map(|p| p.clamped()).sum();
    let accs: Vec<Acc> = (0..s.trials).into_par_iter().map(|i| trial(s, i)).collect::<Result<_>>()?;
    let clamped_samples = pas.iter().map(|p| p.clamped()).sum::<u64>() - clamped_before;
    let acc = accs
        .into_iter()
        .reduce(|a, b| a.merge(b, s.constellation))
        .unwrap_or_else(|| Acc::new(&s.target));

    let mut subbands = Vec::new();
    let (mut err_all, mut n_all, mut e_all) = (0.0, 0u64, 0u64);
    for k in 0..s.target.subbands.len() {
        let per: Vec<f64> = acc.err[k]
            .iter()
            .zip(&acc.count[k])
            .map(|(e, &c)| to_db(e / c.max(1) as f64))
            .collect();
        let err: f64 = acc.err[k].iter().sum();
        let n: u64 = acc.count[k].iter().sum();
        err_all += err;
        n_all += n;
        e_all += acc.errors[k];
        subbands.push(SubbandResult {
            evm_per_subcarrier_db: per,
            evm_db: to_db(err / n.max(1) as f64),
            ser: acc.errors[k] as f64 / n.max(1) as f64,
            symbols: n,
            symbol_errors: acc.errors[k],
        });
    }
    let pa_output_dbm = if acc.power_dbm.is_empty() {
        None
    } else {
        let lin: f64 = acc.power_dbm.iter().map(|d| 10f64.powf(d / 10.0)).sum::<f64>() / acc.power_dbm.len() as f64;
        Some(10.0 * lin.log10())
    };
    let interferer_overlaps = match &s.interferer {
        None => false,
        Some(i) => s.target.subbands.iter().any(|t| {
            i.signal.subbands.iter().any(|o| {
                let shift = 0.0;
                let (lo, hi) = o.occupied();
                circular_overlap(t.occupied(), (lo + shift, hi + shift), s.n as f64)
            })
        }),
    };
    Ok(LinkResult {
        subbands,
        evm_db: to_db(err_all / n_all.max(1) as f64),
        ser: e_all as f64 / n_all.max(1) as f64,
        pa_output_dbm,
        clamped_samples,
        interferer_overlaps,
        constellation: acc.constellation,
    })
}

/// Spectrum of the target amplifier output, one realization per trial.
/// Densities are in dBm/Hz when an amplifier with a back-off is set.
pub fn tx_psd(s: &LinkScenario, rbw_hz: f64) -> Result<Psd> {
    s.validate()?;
    let streams: Vec<Vec<C64>> = (0..s.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
            rng.set_stream(i as u64);
            transmit(&s.target, s.n, s.framing, s.subframes, &mut rng).map(|t| t.stream)
        })
        .collect::<Result<_>>()?;
    let mut psd = psd_estimate(&streams, rbw_hz, s.sample_rate_hz())?;
    // |x|^2 / 100 W in mW
    psd.density_db.iter_mut().for_each(|d| *d += 10.0);
    Ok(psd)
}

/// A spectral limit between two baseband frequencies, in dBm per `rbw_hz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskSegment {
    pub f_lo_hz: f64,
    pub f_hi_hz: f64,
    pub limit_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerConstraints {
    pub evm_limit_db: Option<f64>,
    pub mask: Vec<MaskSegment>,
    pub rbw_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSearchResult {
    pub ibo_db: f64,
    pub output_dbm: f64,
    pub evm_db: f64,
    /// Constraint that stopped the next 0.1 dB step: `evm`, `mask` or
    /// `range` when the strongest drive already passes.
    pub binding: String,
}

/// Back-off range searched by default: from the top of the amplifier's
/// valid input range, or from the compression point, down by 30 dB.
pub fn default_ibo_range(pa: &PaModel) -> Result<(f64, f64)> {
    match pa {
        PaModel::None => Err(Error::Config("power search needs an amplifier".into())),
        PaModel::Rapp(_) => Ok((0.0, 30.0)),
        PaModel::Poly(p) => {
            let start = p.p1db_input_dbm() - crate::rfmodels::POLY_RANGE_DBM.1;
            Ok((start, start + 30.0))
        }
    }
}

fn check_constraints(s: &LinkScenario, c: &PowerConstraints) -> Result<(Option<&'static str>, f64, f64)> {
    let link = run_link(s)?;
    let out = link.pa_output_dbm.unwrap_or(f64::NAN);
    if let Some(limit) = c.evm_limit_db {
        if link.evm_db > limit {
            return Ok((Some("evm"), out, link.evm_db));
        }
    }
    if !c.mask.is_empty() {
        let psd = tx_psd(s, c.rbw_hz)?;
        let in_bw = psd.in_bandwidth_db(c.rbw_hz);
        for seg in &c.mask {
            let bad = psd
                .freq_hz
                .iter()
                .zip(&in_bw)
                .any(|(f, p)| *f >= seg.f_lo_hz && *f <= seg.f_hi_hz && *p > seg.limit_dbm);
            if bad {
                return Ok((Some("mask"), out, link.evm_db));
            }
        }
    }
    Ok((None, out, link.evm_db))
}

/// Smallest back-off, in 0.1 dB steps over `ibo_range`, at which the
/// target meets every constraint.
pub fn max_power_search(s: &LinkScenario, c: &PowerConstraints, ibo_range: (f64, f64)) -> Result<PowerSearchResult> {
    if s.target.pa.p1db_input_dbm().is_none() {
        return Err(Error::Config("power search needs an amplifier".into()));
    }
    let steps = ((ibo_range.1 - ibo_range.0) / 0.1).round() as i64;
    if steps < 0 {
        return Err(Error::Config("empty back-off range".into()));
    }
    let mut last_fail: Option<&'static str> = None;
    for k in 0..=steps {
        let ibo = ibo_range.0 + 0.1 * k as f64;
        let mut sc = s.clone();
        sc.target.ibo_db = Some(ibo);
        let (fail, out, evm) = check_constraints(&sc, c)?;
        match fail {
            None => {
                return Ok(PowerSearchResult {
                    ibo_db: ibo,
                    output_dbm: out,
                    evm_db: evm,
                    binding: last_fail.unwrap_or("range").to_string(),
                })
            }
            Some(f) => last_fail = Some(f),
        }
    }
    Err(Error::Infeasible(format!(
        "no back-off in {:.1}..={:.1} dB meets the constraints",
        ibo_range.0, ibo_range.1
    )))
}

/// Mean power in dBm of a stream, re-exported for reports.
pub fn stream_power_dbm(x: &[C64]) -> f64 {
    mean_power_dbm(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain(active: usize, center: usize) -> SubbandSpec {
        SubbandSpec {
            num: OfdmNumerology::new(64, 8, 0, active, 64, 64).unwrap(),
            center,
            modulation: Modulation::Qam16,
            dft_spread: false,
            tx: Processing::Plain,
            rx: Processing::Plain,
        }
    }

    #[test]
    fn slicer_returns_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for m in [Modulation::Qpsk, Modulation::Qam16, Modulation::Qam64, Modulation::Qam256] {
            let pts = m.random(&mut rng, 4000);
            let e = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / 4000.0;
            assert!((e - 1.0).abs() < 0.1);
            assert!(pts.iter().all(|p| m.slice(*p) == *p));
        }
    }

    #[test]
    fn plain_chain_is_exact() {
        let mut s = LinkScenario::new(64, SignalSpec { subbands: vec![plain(20, 5)], ..Default::default() });
        s.framing = Framing::Guarded(0);
        s.subframes = 2;
        let r = run_link(&s).unwrap();
        assert!(r.evm_db < -100.0, "{}", r.evm_db);
        assert_eq!(r.ser, 0.0);
    }

    #[test]
    fn channel_identity_and_two_tap() {
        let x: Vec<C64> = (0..16).map(|i| C64::new(i as f64, -(i as f64))).collect();
        assert_eq!(apply_channel(&x, &[C64::new(1.0, 0.0)], 0, 0.0), x);
        let y = apply_channel(&x, &[C64::new(1.0, 0.0), C64::new(0.5, 0.0)], 0, 0.0);
        assert_eq!(y.len(), 17);
        assert_eq!(y[3], x[3] + x[2] * 0.5);
    }

    #[test]
    fn mix_without_interferer_power() {
        let x = vec![C64::new(1.0, 2.0); 8];
        assert_eq!(asynchronous_mix(&x, &x, 0, f64::NEG_INFINITY), x);
        let y = asynchronous_mix(&x, &x, 3, 0.0);
        assert_eq!(y[2], x[2]);
        assert_eq!(y[3], x[3] * 2.0);
    }

    #[test]
    fn profile_has_unit_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = exponential_profile(4.0, 40, &mut rng);
        let e: f64 = t.iter().map(|v| v.norm_sqr()).sum();
        assert!((e - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_empty_target() {
        let s = LinkScenario::new(64, SignalSpec::default());
        assert!(run_link(&s).is_err());
    }
}
