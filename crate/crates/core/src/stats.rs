//! Pearson correlation with a two-sided t-test, and ingestion of reference
//! metric tables.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reference pooled metrics on 13 benchmark environments.
pub const TABLE_POOLED: &str = include_str!("../data/pooled.csv");
/// Same environments with per-prior maxima instead of pooling.
pub const TABLE_CHANNEL_CAPACITY: &str = include_str!("../data/channel_capacity.csv");
/// Reference point-maze reward-shaping results.
pub const TABLE_SHAPING: &str = include_str!("../data/pointmaze_shaping.csv");
/// Reference CartPole reset/transition noise sweep.
pub const TABLE_CARTPOLE_NOISE: &str = include_str!("../data/cartpole_noise.csv");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Lanczos approximation (g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut a = C[0];
    for (k, c) in C.iter().enumerate().skip(1) {
        a += c / (x + k as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-12;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Two-sided p-value of Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    inc_beta(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Sample Pearson correlation and its two-sided significance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<CorrelationResult> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::InvalidSpec(format!("correlation needs n >= 3, got {n}")));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(Error::Degenerate("zero variance in correlation input".into()));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p_value = if r.abs() >= 1.0 { 0.0 } else { student_t_two_sided(r * (df / (1.0 - r * r)).sqrt(), df) };
    Ok(CorrelationResult { r, p_value, n })
}

/// Rows keyed by their text columns, with every all-numeric column as a metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub keys: Vec<String>,
    pub columns: Vec<String>,
    /// `values[row][column]`
    pub values: Vec<Vec<f64>>,
}

impl MetricTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut raw: Vec<Vec<String>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            raw.push(rec.iter().map(str::to_string).collect());
        }
        if raw.is_empty() {
            return Err(Error::Empty("metric table"));
        }
        let numeric: Vec<bool> = (0..header.len()).map(|c| raw.iter().all(|r| r[c].parse::<f64>().is_ok())).collect();
        let keys = raw
            .iter()
            .map(|r| (0..header.len()).filter(|&c| !numeric[c]).map(|c| r[c].as_str()).collect::<Vec<_>>().join("/"))
            .collect();
        let cols: Vec<usize> = (0..header.len()).filter(|&c| numeric[c]).collect();
        let table = Self {
            keys,
            columns: cols.iter().map(|&c| header[c].clone()).collect(),
            values: raw.iter().map(|r| cols.iter().map(|&c| r[c].parse().unwrap_or(f64::NAN)).collect()).collect(),
        };
        table.column("score_a")?;
        Ok(table)
    }

    pub fn ingest(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let c = self
            .columns
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::InvalidSpec(format!("metric table has no numeric column `{name}`")))?;
        Ok(self.values.iter().map(|r| r[c]).collect())
    }

    /// Drops rows whose key is listed (case-insensitive).
    pub fn without(&self, exclude: &[String]) -> Self {
        let keep: Vec<usize> =
            (0..self.keys.len()).filter(|&i| !exclude.iter().any(|e| e.eq_ignore_ascii_case(&self.keys[i]))).collect();
        Self {
            keys: keep.iter().map(|&i| self.keys[i].clone()).collect(),
            columns: self.columns.clone(),
            values: keep.iter().map(|&i| self.values[i].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub target: String,
    pub metric: String,
    pub result: CorrelationResult,
}

/// Correlates every other column against `score_a` and, when present, `score_r`.
pub fn correlate_all(table: &MetricTable) -> Result<Vec<CorrelationEntry>> {
    let mut out = Vec::new();
    for target in ["score_a", "score_r"] {
        let Ok(ys) = table.column(target) else { continue };
        for metric in &table.columns {
            if metric == target {
                continue;
            }
            let xs = table.column(metric)?;
            match pearson(&xs, &ys) {
                Ok(result) => out.push(CorrelationEntry { target: target.into(), metric: metric.clone(), result }),
                Err(Error::Degenerate(_)) => continue,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}
