//! Gaussian kernel density estimation and Parzen mode search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Kernel contributions beyond this many bandwidths are below 1e-22 of the
/// kernel peak and are skipped.
const KERNEL_CUTOFF: f64 = 10.0;

/// The search grid is densified until its spacing is at most this fraction
/// of the bandwidth.
const MAX_GRID_STEP_IN_BANDWIDTHS: f64 = 0.5;
const MAX_GRID_POINTS: usize = 1 << 20;

/// Grid local maxima within this fraction of the grid maximum are refined.
const CANDIDATE_FRACTION: f64 = 0.9;

const TIE_TOLERANCE: f64 = 1e-12;

/// A Gaussian KDE evaluated over a finite interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KdeSpec {
    pub bandwidth: f64,
    pub eval_interval: (f64, f64),
    pub grid_size: usize,
}

impl KdeSpec {
    pub fn new(bandwidth: f64, eval_interval: (f64, f64), grid_size: usize) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidConfig(format!("bandwidth must be positive, got {bandwidth}")));
        }
        let (lo, hi) = eval_interval;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidConfig(format!("interval must satisfy t_l < t_u, got [{lo}, {hi}]")));
        }
        if grid_size < 16 {
            return Err(Error::InvalidConfig(format!("grid_size must be at least 16, got {grid_size}")));
        }
        Ok(KdeSpec {
            bandwidth,
            eval_interval,
            grid_size,
        })
    }

    /// Number of grid points actually scanned: at least `grid_size`, and
    /// dense enough that no kernel bump falls between grid points.
    pub fn effective_grid_points(&self) -> usize {
        let (lo, hi) = self.eval_interval;
        let needed = ((hi - lo) / (MAX_GRID_STEP_IN_BANDWIDTHS * self.bandwidth)).ceil() + 1.0;
        let needed = if needed.is_finite() { needed as usize } else { MAX_GRID_POINTS };
        self.grid_size.max(needed.min(MAX_GRID_POINTS))
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub(crate) fn sample_sd(values: &[f64]) -> f64 {
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() as f64 - 1.0)).sqrt()
}

/// Linear-interpolation quantile of already sorted data.
pub(crate) fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn silverman(sd: f64, iqr: f64, d: usize) -> f64 {
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        (false, true) => iqr / 1.34,
        (false, false) => 0.0,
    };
    0.9 * spread * (d as f64).powf(-0.2)
}

/// Silverman's rule `0.9 * min(sd, IQR/1.34) * D^(-1/5)`. When one of the
/// two spread measures is zero the other is used alone.
pub fn default_bandwidth(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InvalidInput("bandwidth needs at least two values".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("bandwidth input contains non-finite values".into()));
    }
    let sorted = sorted_copy(values);
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::InvalidInput("all values are identical; bandwidth is degenerate".into()));
    }
    let iqr = sorted_quantile(&sorted, 0.75) - sorted_quantile(&sorted, 0.25);
    let h = silverman(sample_sd(values), iqr, values.len());
    if h > 0.0 {
        Ok(h)
    } else {
        Err(Error::InvalidInput("all values are identical; bandwidth is degenerate".into()))
    }
}

/// Bandwidth used when every value is identical.
pub fn fallback_bandwidth(values: &[f64]) -> f64 {
    1e-6 * mean(values).abs().max(1.0)
}

/// Silverman bandwidth, or the point-mass fallback. The flag reports
/// whether the fallback was used.
pub fn bandwidth_or_fallback(values: &[f64]) -> (f64, bool) {
    match default_bandwidth(values) {
        Ok(h) => (h, false),
        Err(_) => (fallback_bandwidth(values), true),
    }
}

/// Gaussian KDE over a sorted copy of the data.
#[derive(Clone, Debug)]
pub struct Kde {
    sorted: Vec<f64>,
    bandwidth: f64,
}

/// Kernel moment sums at a point: `sum phi(z)`, `sum z phi(z)`,
/// `sum z^2 phi(z)` with `z = (t - x) / h` and unnormalized `phi`.
#[derive(Clone, Copy, Debug)]
struct KernelSums {
    s0: f64,
    s1: f64,
    s2: f64,
}

impl Kde {
    pub fn new(values: &[f64], bandwidth: f64) -> Self {
        Kde {
            sorted: sorted_copy(values),
            bandwidth,
        }
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    fn norm(&self) -> f64 {
        INV_SQRT_2PI / (self.sorted.len() as f64 * self.bandwidth)
    }

    fn window(&self, t: f64) -> &[f64] {
        let reach = KERNEL_CUTOFF * self.bandwidth;
        let lo = self.sorted.partition_point(|&x| x < t - reach);
        let hi = self.sorted.partition_point(|&x| x <= t + reach);
        &self.sorted[lo..hi]
    }

    fn sums(&self, t: f64) -> KernelSums {
        let h = self.bandwidth;
        let mut s = KernelSums { s0: 0.0, s1: 0.0, s2: 0.0 };
        for &x in self.window(t) {
            let z = (t - x) / h;
            let k = (-0.5 * z * z).exp();
            s.s0 += k;
            s.s1 += z * k;
            s.s2 += z * z * k;
        }
        s
    }

    pub fn density(&self, t: f64) -> f64 {
        let h = self.bandwidth;
        let s: f64 = self
            .window(t)
            .iter()
            .map(|&x| {
                let z = (t - x) / h;
                (-0.5 * z * z).exp()
            })
            .sum();
        s * self.norm()
    }

    /// `(p, p', p'')` at `t`.
    pub fn derivatives(&self, t: f64) -> (f64, f64, f64) {
        let h = self.bandwidth;
        let s = self.sums(t);
        let c = self.norm();
        (c * s.s0, -c * s.s1 / h, c * (s.s2 - s.s0) / (h * h))
    }

    pub fn log_density(&self, t: f64) -> f64 {
        self.density(t).ln()
    }

    /// Second derivative of `ln p` at `t`, from the kernel moments.
    pub fn log_density_second_derivative(&self, t: f64) -> f64 {
        let h = self.bandwidth;
        let s = self.sums(t);
        (s.s2 * s.s0 - s.s0 * s.s0 - s.s1 * s.s1) / (h * h * s.s0 * s.s0)
    }

    /// Density at each point of an ascending grid, sharing one sliding
    /// window over the sorted data.
    pub fn density_on_grid(&self, grid: &[f64]) -> Vec<f64> {
        let h = self.bandwidth;
        let reach = KERNEL_CUTOFF * h;
        let c = self.norm();
        let mut lo = 0;
        let mut hi = 0;
        let n = self.sorted.len();
        grid.iter()
            .map(|&t| {
                while lo < n && self.sorted[lo] < t - reach {
                    lo += 1;
                }
                if hi < lo {
                    hi = lo;
                }
                while hi < n && self.sorted[hi] <= t + reach {
                    hi += 1;
                }
                let s: f64 = self.sorted[lo..hi]
                    .iter()
                    .map(|&x| {
                        let z = (t - x) / h;
                        (-0.5 * z * z).exp()
                    })
                    .sum();
                s * c
            })
            .collect()
    }
}

/// `p_D(t)` for the given values and bandwidth.
pub fn kde_density(values: &[f64], spec: &KdeSpec, t: f64) -> f64 {
    Kde::new(values, spec.bandwidth).density(t)
}

/// `count` equally spaced points from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let step = (hi - lo) / (count - 1) as f64;
    (0..count)
        .map(|i| if i + 1 == count { hi } else { lo + step * i as f64 })
        .collect()
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iterations = 0;
    while (b - a) > tol && iterations < 200 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
        iterations += 1;
    }
    0.5 * (a + b)
}

/// Prefers the higher density; near-ties go to the smaller `|t|`, then the
/// smaller `t`.
fn better(candidate: (f64, f64), incumbent: (f64, f64)) -> bool {
    let (t, p) = candidate;
    let (t0, p0) = incumbent;
    let scale = p.abs().max(p0.abs());
    if (p - p0).abs() <= TIE_TOLERANCE * scale {
        t.abs() < t0.abs() || (t.abs() == t0.abs() && t < t0)
    } else {
        p > p0
    }
}

fn argmax_on_interval(kde: &Kde, spec: &KdeSpec) -> f64 {
    let (lo, hi) = spec.eval_interval;
    let grid = linear_grid(lo, hi, spec.effective_grid_points());
    let dens = kde.density_on_grid(&grid);
    let top = dens.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top.is_nan() || top <= 0.0 {
        // No data within reach of the interval: the density is flat zero.
        return grid
            .iter()
            .copied()
            .fold(grid[0], |best, t| if t.abs() < best.abs() { t } else { best });
    }
    let tol = 1e-8 * (hi - lo);
    let last = grid.len() - 1;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..=last {
        let left = if i > 0 { dens[i - 1] } else { f64::NEG_INFINITY };
        let right = if i < last { dens[i + 1] } else { f64::NEG_INFINITY };
        if dens[i] < CANDIDATE_FRACTION * top || dens[i] < left || dens[i] < right {
            continue;
        }
        let a = grid[i.saturating_sub(1)];
        let b = grid[(i + 1).min(last)];
        let refined = golden_section_max(|t| kde.density(t), a, b, tol);
        let mut local = (grid[i], dens[i]);
        let p = kde.density(refined);
        if p >= local.1 {
            local = (refined, p);
        }
        if best.is_none_or(|b| better(local, b)) {
            best = Some(local);
        }
    }
    best.expect("the grid maximum is always a candidate").0
}

/// The point of `spec.eval_interval` maximizing the KDE: a dense grid scan,
/// then golden-section refinement inside the cells around each competitive
/// grid maximum (tolerance `1e-8 * (t_u - t_l)`).
pub fn parzen_mode(values: &[f64], spec: &KdeSpec) -> f64 {
    argmax_on_interval(&Kde::new(values, spec.bandwidth), spec)
}

/// How the mode search picks its bandwidth and interval for a given vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSearch {
    pub interval: Option<(f64, f64)>,
    pub grid_size: usize,
}

impl Default for ModeSearch {
    fn default() -> Self {
        ModeSearch {
            interval: None,
            grid_size: 512,
        }
    }
}

impl ModeSearch {
    /// Bandwidth from the data and interval `[min - 3h, max + 3h]` unless
    /// fixed. The flag reports a degenerate (point-mass) bandwidth.
    pub fn spec_for(&self, values: &[f64]) -> (KdeSpec, bool) {
        let (h, degenerate) = bandwidth_or_fallback(values);
        let interval = self.interval.unwrap_or_else(|| {
            let (min, max) = values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            (min - 3.0 * h, max + 3.0 * h)
        });
        (
            KdeSpec {
                bandwidth: h,
                eval_interval: interval,
                grid_size: self.grid_size.max(16),
            },
            degenerate,
        )
    }
}

/// A located mode together with the density it was read from.
#[derive(Clone, Debug)]
pub struct ModeEstimate {
    pub mode: f64,
    pub spec: KdeSpec,
    pub degenerate: bool,
    pub kde: Kde,
}

pub fn locate_mode(values: &[f64], search: &ModeSearch) -> ModeEstimate {
    let (spec, degenerate) = search.spec_for(values);
    let kde = Kde::new(values, spec.bandwidth);
    let mode = argmax_on_interval(&kde, &spec);
    ModeEstimate {
        mode,
        spec,
        degenerate,
        kde,
    }
}
