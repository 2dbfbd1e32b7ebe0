//! Information-theoretic difficulty metrics over a return matrix.
//!
//! All logarithms are natural. Sums over rows, episodes and bins are taken
//! in sorted order so that every metric is bit-identical under any
//! permutation of particles or of episodes within a particle.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{StreamKey, Tag};
use crate::rollout::ReturnMatrix;

pub const DEFAULT_BINS: usize = 100_000;

/// Sums after sorting, so the result ignores input order.
pub fn sorted_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

fn sorted_mean(v: Vec<f64>) -> f64 {
    let n = v.len() as f64;
    sorted_sum(v) / n
}

fn bin_index(v: f64, r_min: f64, r_max: f64, bins: usize) -> usize {
    if r_max <= r_min {
        return 0;
    }
    let k = ((v - r_min) / (r_max - r_min) * bins as f64).floor();
    if k <= 0.0 {
        0
    } else {
        (k as usize).min(bins - 1)
    }
}

/// Equal-width histogram over `[r_min, r_max]`; `r_max` falls in the last bin.
pub fn histogram(values: &[f64], r_min: f64, r_max: f64, bins: usize) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Empty("histogram values"));
    }
    if bins < 2 || !(r_min <= r_max) {
        return Err(Error::InvalidSpec(format!("histogram needs B >= 2 and r_min <= r_max, got B={bins}")));
    }
    let mut p = vec![0.0; bins];
    for &v in values {
        p[bin_index(v, r_min, r_max, bins)] += 1.0;
    }
    let n = values.len() as f64;
    p.iter_mut().for_each(|x| *x /= n);
    Ok(p)
}

/// Shannon entropy of a probability vector, `0 ln 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// Plug-in entropy of the binned values without materialising all B bins.
fn binned_entropy(values: &[f64], r_min: f64, r_max: f64, bins: usize) -> f64 {
    let mut idx: Vec<usize> = values.iter().map(|&v| bin_index(v, r_min, r_max, bins)).collect();
    idx.sort_unstable();
    let n = idx.len() as f64;
    let mut h = 0.0;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start;
        while end < idx.len() && idx[end] == idx[start] {
            end += 1;
        }
        let p = (end - start) as f64 / n;
        h -= p * p.ln();
        start = end;
    }
    h
}

/// Entropy of a Bernoulli(p), `0 ln 0 = 0`.
pub fn bernoulli_entropy(p: f64) -> f64 {
    let mut h = 0.0;
    if p > 0.0 {
        h -= p * p.ln();
    }
    if p < 1.0 {
        h -= (1.0 - p) * (-p).ln_1p();
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicEstimate {
    pub pic: f64,
    pub h_r: f64,
    pub h_r_given_theta: f64,
}

/// What to do when B <= M.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinCheck {
    #[default]
    Strict,
    Warn,
}

/// Mutual information between return and parameters via shared-edge histograms.
pub fn estimate_pic(m: &ReturnMatrix, bins: usize, check: BinCheck) -> Result<PicEstimate> {
    if bins < 2 {
        return Err(Error::InvalidSpec(format!("need at least 2 bins, got {bins}")));
    }
    if bins <= m.m() {
        match check {
            BinCheck::Strict => return Err(Error::TooFewBins { bins, episodes: m.m() }),
            BinCheck::Warn => log::warn!("bin count {bins} does not exceed episodes per particle {}", m.m()),
        }
    }
    if m.r_max <= m.r_min {
        return Ok(PicEstimate { pic: 0.0, h_r: 0.0, h_r_given_theta: 0.0 });
    }
    let (lo, hi) = (m.r_min, m.r_max);
    let h_r = binned_entropy(m.values(), lo, hi, bins);
    let rows: Vec<f64> = m.rows().collect::<Vec<_>>().par_iter().map(|r| binned_entropy(r, lo, hi, bins)).collect();
    let h_cond = sorted_mean(rows);
    Ok(PicEstimate { pic: (h_r - h_cond).max(0.0), h_r, h_r_given_theta: h_cond })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoicEstimate {
    pub poic: f64,
    pub h_o: f64,
    pub h_o_given_theta: f64,
}

/// Rows sorted ascending, reused across temperatures.
struct SortedRows {
    rows: Vec<Vec<f64>>,
    degenerate: bool,
}

impl SortedRows {
    fn new(m: &ReturnMatrix) -> Self {
        let rows = m
            .rows()
            .map(|r| {
                let mut r = r.to_vec();
                r.sort_by(f64::total_cmp);
                r
            })
            .collect();
        Self { rows, degenerate: m.r_max <= m.r_min }
    }

    /// `(1/M) sum_j exp((r_j - r_ref)/eta)` via a shift by the row maximum.
    fn optimality_prob(row: &[f64], eta: f64, r_ref: f64) -> f64 {
        let top = (row[row.len() - 1] - r_ref) / eta;
        let s: f64 = row.iter().map(|&r| ((r - r_ref) / eta - top).exp()).sum();
        (top + (s / row.len() as f64).ln()).exp().min(1.0)
    }

    fn poic(&self, eta: f64, r_ref: f64) -> PoicEstimate {
        let p: Vec<f64> = self.rows.iter().map(|r| Self::optimality_prob(r, eta, r_ref)).collect();
        let h_cond = sorted_mean(p.iter().map(|&x| bernoulli_entropy(x)).collect());
        let h_o = bernoulli_entropy(sorted_mean(p));
        let poic = if self.degenerate { 0.0 } else { (h_o - h_cond).max(0.0) };
        PoicEstimate { poic, h_o, h_o_given_theta: h_cond }
    }
}

/// Mutual information between the optimality variable and parameters at a
/// fixed temperature `eta`.
pub fn estimate_poic_at(m: &ReturnMatrix, eta: f64, r_max_ref: f64) -> Result<PoicEstimate> {
    if !(eta > 0.0) {
        return Err(Error::NonPositiveTemperature(eta));
    }
    if r_max_ref < m.r_max {
        return Err(Error::InvalidSpec(format!("reference maximum {r_max_ref} below observed {}", m.r_max)));
    }
    Ok(SortedRows::new(m).poic(eta, r_max_ref))
}

/// Log-spaced temperature grid in units of the return range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TemperatureGrid {
    pub log10_min: f64,
    pub log10_max: f64,
    pub points: usize,
    /// Golden-section iterations after the grid pass; 0 disables refinement.
    pub refine_iters: usize,
}

impl Default for TemperatureGrid {
    fn default() -> Self {
        Self { log10_min: -6.0, log10_max: 3.0, points: 128, refine_iters: 60 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSearch {
    pub grid: Vec<f64>,
    /// `(eta, poic)` for every evaluation, grid first then refinement.
    pub evaluated: Vec<(f64, f64)>,
    pub eta_star: f64,
    pub poic_star: f64,
    pub h_o: f64,
    pub h_o_given_theta: f64,
}

/// True when the sequence rises then falls (plateaus allowed).
pub fn is_unimodal(v: &[f64]) -> bool {
    let mut falling = false;
    for w in v.windows(2) {
        if w[1] < w[0] {
            falling = true;
        } else if w[1] > w[0] && falling {
            return false;
        }
    }
    true
}

/// Grid search plus golden-section refinement of the temperature maximising POIC.
pub fn optimize_temperature(
    m: &ReturnMatrix,
    grid: &TemperatureGrid,
    r_max_ref: Option<f64>,
) -> Result<TemperatureSearch> {
    let r_ref = r_max_ref.unwrap_or(m.r_max);
    if r_ref < m.r_max {
        return Err(Error::InvalidSpec(format!("reference maximum {r_ref} below observed {}", m.r_max)));
    }
    if grid.points < 2 || !(grid.log10_min < grid.log10_max) {
        return Err(Error::InvalidSpec("temperature grid needs >= 2 points and min < max".into()));
    }
    let range = m.r_max - m.r_min;
    if !(range > 0.0) {
        return Ok(TemperatureSearch {
            grid: Vec::new(),
            evaluated: Vec::new(),
            eta_star: 1.0,
            poic_star: 0.0,
            h_o: 0.0,
            h_o_given_theta: 0.0,
        });
    }
    let rows = SortedRows::new(m);
    let step = (grid.log10_max - grid.log10_min) / (grid.points - 1) as f64;
    let etas: Vec<f64> = (0..grid.points).map(|k| range * 10f64.powf(grid.log10_min + step * k as f64)).collect();
    let values: Vec<PoicEstimate> = etas.par_iter().map(|&eta| rows.poic(eta, r_ref)).collect();
    let mut evaluated: Vec<(f64, f64)> = etas.iter().zip(&values).map(|(&e, v)| (e, v.poic)).collect();
    let poics: Vec<f64> = values.iter().map(|v| v.poic).collect();
    if !is_unimodal(&poics) {
        log::warn!("POIC is not unimodal over the temperature grid");
    }
    // first index attaining the maximum
    let mut best = 0;
    for (k, &p) in poics.iter().enumerate() {
        if p > poics[best] {
            best = k;
        }
    }
    let (mut eta_star, mut est) = (etas[best], values[best]);

    if grid.refine_iters > 0 {
        let mut a = etas[best.saturating_sub(1)].ln();
        let mut b = etas[(best + 1).min(grid.points - 1)].ln();
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let f = |x: f64| rows.poic(x.exp(), r_ref);
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        evaluated.push((c.exp(), fc.poic));
        evaluated.push((d.exp(), fd.poic));
        for _ in 0..grid.refine_iters {
            if fc.poic >= fd.poic {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = f(c);
                evaluated.push((c.exp(), fc.poic));
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = f(d);
                evaluated.push((d.exp(), fd.poic));
            }
        }
        for (x, v) in [(c, fc), (d, fd)] {
            if v.poic > est.poic {
                eta_star = x.exp();
                est = v;
            }
        }
    }
    Ok(TemperatureSearch {
        grid: etas,
        evaluated,
        eta_star,
        poic_star: est.poic,
        h_o: est.h_o,
        h_o_given_theta: est.h_o_given_theta,
    })
}

/// Population variance of all returns divided by the return range.
pub fn normalized_variance(m: &ReturnMatrix) -> f64 {
    let range = m.r_max - m.r_min;
    if !(range > 0.0) {
        return 0.0;
    }
    let mean = m.mean();
    let n = m.values().len() as f64;
    sorted_sum(m.values().iter().map(|r| (r - mean) * (r - mean)).collect()) / n / range
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricOptions {
    pub bins: usize,
    pub bin_check: BinCheck,
    /// Fixed temperature; skips the search when set.
    pub eta: Option<f64>,
    pub r_max_ref: Option<f64>,
    pub grid: TemperatureGrid,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            bins: DEFAULT_BINS,
            bin_check: BinCheck::Strict,
            eta: None,
            r_max_ref: None,
            grid: TemperatureGrid::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub env: String,
    pub policies: Vec<String>,
    pub n_particles: usize,
    pub episodes_per_particle: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub pic: f64,
    pub h_r: f64,
    pub h_r_given_theta: f64,
    pub poic: f64,
    pub h_o: f64,
    pub h_o_given_theta: f64,
    pub eta_star: f64,
    pub normalized_variance: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub mean_return: f64,
    pub bins: usize,
    pub provenance: Provenance,
}

/// Every metric of one matrix.
pub fn compute_report(m: &ReturnMatrix, opts: &MetricOptions) -> Result<MetricsReport> {
    let pic = estimate_pic(m, opts.bins, opts.bin_check)?;
    let (eta_star, poic) = match opts.eta {
        Some(eta) => (eta, estimate_poic_at(m, eta, opts.r_max_ref.unwrap_or(m.r_max))?),
        None => {
            let s = optimize_temperature(m, &opts.grid, opts.r_max_ref)?;
            (s.eta_star, PoicEstimate { poic: s.poic_star, h_o: s.h_o, h_o_given_theta: s.h_o_given_theta })
        }
    };
    Ok(MetricsReport {
        pic: pic.pic,
        h_r: pic.h_r,
        h_r_given_theta: pic.h_r_given_theta,
        poic: poic.poic,
        h_o: poic.h_o,
        h_o_given_theta: poic.h_o_given_theta,
        eta_star,
        normalized_variance: normalized_variance(m),
        r_min: m.r_min,
        r_max: m.r_max,
        mean_return: m.mean(),
        bins: opts.bins,
        provenance: Provenance {
            env: m.env_spec.name(),
            policies: m.policy_specs.iter().map(|p| p.label()).collect(),
            n_particles: m.n(),
            episodes_per_particle: m.m(),
            master_seed: m.plan.master_seed,
        },
    })
}

/// Per-prior maxima of PIC and POIC.
pub fn channel_capacity(reports: &[MetricsReport]) -> Result<(f64, f64)> {
    let first = reports.first().ok_or(Error::Empty("report list"))?;
    if reports.iter().any(|r| r.provenance.env != first.provenance.env) {
        return Err(Error::SpecMismatch("channel capacity needs reports from one environment".into()));
    }
    let pic = reports.iter().map(|r| r.pic).fold(f64::NEG_INFINITY, f64::max);
    let poic = reports.iter().map(|r| r.poic).fold(f64::NEG_INFINITY, f64::max);
    Ok((pic, poic))
}

/// Differential entropy of a normal with standard deviation `sigma`.
pub fn gaussian_entropy(sigma: f64) -> f64 {
    (sigma * (2.0 * std::f64::consts::PI * std::f64::consts::E).sqrt()).ln()
}

/// Upper bound on the probability that N-sample means misorder two policies.
pub fn prop1_bound(mu1: f64, mu2: f64, h1: f64, h2: f64, n: usize) -> f64 {
    let gap = (mu1 - mu2).abs() / (h1.exp() + h2.exp());
    (-std::f64::consts::PI * std::f64::consts::E * n as f64 * gap * gap).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prop1Check {
    pub empirical_rate: f64,
    pub bound: f64,
    pub std_error: f64,
    pub trials: usize,
}

impl Prop1Check {
    pub fn holds(&self) -> bool {
        self.empirical_rate <= self.bound + 3.0 * self.std_error
    }
}

/// Monte Carlo misordering frequency of two Gaussian return distributions.
pub fn verify_prop1(
    mu1: f64,
    sigma1: f64,
    mu2: f64,
    sigma2: f64,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<Prop1Check> {
    if !(sigma1 > 0.0 && sigma2 > 0.0) {
        return Err(Error::InvalidSpec(format!("standard deviations must be positive: {sigma1}, {sigma2}")));
    }
    if n == 0 || trials == 0 {
        return Err(Error::Empty("samples or trials"));
    }
    let (mu1, sigma1, mu2, sigma2) = if mu1 >= mu2 { (mu1, sigma1, mu2, sigma2) } else { (mu2, sigma2, mu1, sigma1) };
    const CHUNK: usize = 1024;
    let chunks = trials.div_ceil(CHUNK);
    let misses: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = StreamKey::new(seed, n as u64, c as u64, 0).rng(Tag::Prop1);
            let mut miss = 0;
            for _ in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let mut s1 = 0.0;
                let mut s2 = 0.0;
                for _ in 0..n {
                    let z1: f64 = StandardNormal.sample(&mut rng);
                    let z2: f64 = StandardNormal.sample(&mut rng);
                    s1 += mu1 + sigma1 * z1;
                    s2 += mu2 + sigma2 * z2;
                }
                if s1 < s2 {
                    miss += 1;
                }
            }
            miss
        })
        .sum();
    let rate = misses as f64 / trials as f64;
    let bound = prop1_bound(mu1, mu2, gaussian_entropy(sigma1), gaussian_entropy(sigma2), n);
    let p = bound.min(1.0);
    Ok(Prop1Check { empirical_rate: rate, bound, std_error: (p * (1.0 - p) / trials as f64).sqrt(), trials })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: Vec<Vec<f64>>) -> ReturnMatrix {
        ReturnMatrix::from_values(rows).unwrap()
    }

    #[test]
    fn histogram_cases() {
        assert_eq!(histogram(&[0.0, 0.0, 1.0, 1.0], 0.0, 1.0, 4).unwrap(), vec![0.5, 0.0, 0.0, 0.5]);
        assert_eq!(histogram(&[0.0, 0.3, 0.6, 1.0], 0.0, 1.0, 2).unwrap(), vec![0.5, 0.5]);
        let h = histogram(&[2.0; 5], 2.0, 2.0, 3).unwrap();
        assert_eq!(h, vec![1.0, 0.0, 0.0]);
        assert_eq!(entropy(&h), 0.0);
        assert!(histogram(&[], 0.0, 1.0, 2).is_err());
    }

    #[test]
    fn pic_cases() {
        let e = estimate_pic(&mat(vec![vec![0.0, 0.0], vec![1.0, 1.0]]), 4, BinCheck::Strict).unwrap();
        assert!((e.pic - 2f64.ln()).abs() < 1e-15 && (e.h_r - 2f64.ln()).abs() < 1e-15);
        assert_eq!(e.h_r_given_theta, 0.0);
        let e = estimate_pic(&mat(vec![vec![0.0, 1.0], vec![0.0, 1.0]]), 4, BinCheck::Strict).unwrap();
        assert_eq!(e.pic, 0.0);
        assert!(matches!(
            estimate_pic(&mat(vec![vec![0.0, 1.0], vec![0.0, 1.0]]), 2, BinCheck::Strict),
            Err(Error::TooFewBins { .. })
        ));
        assert!(estimate_pic(&mat(vec![vec![0.0, 1.0], vec![0.0, 1.0]]), 2, BinCheck::Warn).is_ok());
    }

    #[test]
    fn poic_cases() {
        let m = mat(vec![vec![1.0, 1.0], vec![0.0, 0.0]]);
        let e = estimate_poic_at(&m, 1.0, 1.0).unwrap();
        let p = [1.0, (-1f64).exp()];
        let h_o = bernoulli_entropy((p[0] + p[1]) / 2.0);
        let h_c = (bernoulli_entropy(p[0]) + bernoulli_entropy(p[1])) / 2.0;
        assert!((e.h_o - h_o).abs() < 1e-15 && (e.h_o_given_theta - h_c).abs() < 1e-15);
        assert!((e.poic - 0.2950).abs() < 1e-4, "{}", e.poic);
        let tiny = estimate_poic_at(&m, 1e-6, 1.0).unwrap();
        assert!((tiny.poic - 2f64.ln()).abs() < 1e-12);
        assert!(estimate_poic_at(&m, 0.0, 1.0).is_err());
        assert!(estimate_poic_at(&m, 1.0, 0.5).is_err());
        let flat = mat(vec![vec![3.0; 4]; 3]);
        for eta in [1e-3, 1.0, 1e3] {
            assert_eq!(estimate_poic_at(&flat, eta, 3.0).unwrap().poic, 0.0);
        }
    }

    #[test]
    fn temperature_search_cases() {
        let flat = mat(vec![vec![3.0; 4]; 3]);
        let s = optimize_temperature(&flat, &TemperatureGrid::default(), None).unwrap();
        assert_eq!((s.eta_star, s.poic_star), (1.0, 0.0));

        let m = mat(vec![vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]]);
        let s = optimize_temperature(&m, &TemperatureGrid::default(), None).unwrap();
        let pic = estimate_pic(&m, 16, BinCheck::Strict).unwrap().pic;
        assert!((s.poic_star - pic).abs() < 1e-9, "{} vs {}", s.poic_star, pic);
        assert_eq!(s.grid.len(), 128);
        assert!(s.evaluated.iter().all(|&(_, p)| p <= s.poic_star));
        assert!(s.eta_star <= s.grid[1]);
    }

    #[test]
    fn variance_cases() {
        assert_eq!(normalized_variance(&mat(vec![vec![0.0, 1.0], vec![1.0, 0.0]])), 0.25);
        assert_eq!(normalized_variance(&mat(vec![vec![2.0, 2.0]; 2])), 0.0);
    }

    #[test]
    fn channel_capacity_is_max() {
        let base = compute_report(
            &mat(vec![vec![0.0, 1.0], vec![1.0, 1.0]]),
            &MetricOptions { bins: 8, ..Default::default() },
        )
        .unwrap();
        let reports: Vec<MetricsReport> =
            [1.2, 3.7, 0.5].iter().map(|&p| MetricsReport { pic: p, poic: p / 10.0, ..base.clone() }).collect();
        assert_eq!(channel_capacity(&reports).unwrap(), (3.7, 0.37));
        assert_eq!(channel_capacity(&reports[..1]).unwrap(), (1.2, 0.12));
        assert!(channel_capacity(&[]).is_err());
    }

    #[test]
    fn prop1_worked_case() {
        let h = gaussian_entropy(1.0);
        let b = prop1_bound(1.0, 0.0, h, h, 10);
        assert!((b - 0.2865).abs() < 1e-4, "{b}");
        assert_eq!(prop1_bound(0.3, 0.3, h, h, 10), 1.0);
        assert!(prop1_bound(1.0, 0.0, h, h, 100_000) < 1e-300);
        assert!(verify_prop1(0.0, 0.0, 1.0, 1.0, 1, 10, 0).is_err());
    }
}
