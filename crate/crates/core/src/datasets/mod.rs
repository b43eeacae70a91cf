//! Target distributions: bars-and-stripes and a discretized Gaussian, with
//! empirical-distribution helpers and a plain-text dataset format.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{BitString, VisibleDistribution, MAX_ENUMERATED_VISIBLE};
use crate::sampling::{categorical, RngStream};

const HEADER: &str = "sqrbm-dataset v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<BitString>,
    empirical: VisibleDistribution,
    exact_target: Option<VisibleDistribution>,
}

impl Dataset {
    pub fn new(samples: Vec<BitString>, exact_target: Option<VisibleDistribution>) -> Result<Self> {
        let empirical = empirical_distribution(&samples)?;
        if let Some(t) = &exact_target {
            if t.n() != empirical.n() {
                return Err(Error::Dimension(format!(
                    "exact target over n={}, samples have n={}",
                    t.n(),
                    empirical.n()
                )));
            }
        }
        Ok(Dataset { samples, empirical, exact_target })
    }

    pub fn n(&self) -> usize {
        self.empirical.n()
    }

    pub fn samples(&self) -> &[BitString] {
        &self.samples
    }

    pub fn empirical(&self) -> &VisibleDistribution {
        &self.empirical
    }

    pub fn exact_target(&self) -> Option<&VisibleDistribution> {
        self.exact_target.as_ref()
    }

    /// The exact target when known, otherwise the empirical distribution.
    pub fn reference(&self) -> &VisibleDistribution {
        self.exact_target.as_ref().unwrap_or(&self.empirical)
    }

    /// Per-bitstring sample counts.
    pub fn counts(&self) -> Vec<u64> {
        let mut counts = vec![0; 1 << self.n()];
        for s in &self.samples {
            counts[s.index() as usize] += 1;
        }
        counts
    }

    /// Keep only samples whose bitstring occurs at least `min_count` times.
    /// Singletons in a large draw are mostly tail noise; dropping them leaves
    /// the bins that carry a reliable signal.
    pub fn reliable_subset(&self, min_count: u64) -> Result<Dataset> {
        let counts = self.counts();
        let kept: Vec<BitString> = self
            .samples
            .iter()
            .copied()
            .filter(|s| counts[s.index() as usize] >= min_count)
            .collect();
        if kept.is_empty() {
            return Err(Error::Contract(format!("no bitstring occurs {min_count} times")));
        }
        Dataset::new(kept, self.exact_target.clone())
    }
}

/// Normalized frequency vector of `samples` over `2^n`.
pub fn empirical_distribution(samples: &[BitString]) -> Result<VisibleDistribution> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Contract("empirical distribution of no samples".into()))?;
    let n = first.len();
    if n == 0 || n > MAX_ENUMERATED_VISIBLE {
        return Err(Error::Capacity(format!("cannot enumerate n={n}")));
    }
    let mut counts = vec![0.0; 1 << n];
    for s in samples {
        if s.len() != n {
            return Err(Error::Dimension(format!("mixed sample lengths {n} and {}", s.len())));
        }
        counts[s.index() as usize] += 1.0;
    }
    let total = samples.len() as f64;
    VisibleDistribution::new(n, counts.into_iter().map(|c| c / total).collect())
}

/// Bars and stripes on a `rows × cols` grid, pixel `(r, c)` at bit
/// `r·cols + c`. The two uniform patterns are left out, so 3×3 gives 12.
pub fn gen_bas(rows: usize, cols: usize) -> Result<Dataset> {
    let n = rows * cols;
    if rows < 2 || cols < 2 || n > MAX_ENUMERATED_VISIBLE {
        return Err(Error::Config(format!("unsupported grid {rows}×{cols}")));
    }
    let full = (1u64 << n) - 1;
    let mut codes = Vec::new();
    for mask in 0..1u64 << rows {
        // each selected row filled
        let code = (0..rows).filter(|r| (mask >> r) & 1 == 1).fold(0, |acc, r| acc | (((1 << cols) - 1) << (r * cols)));
        codes.push(code);
    }
    for mask in 0..1u64 << cols {
        let code = (0..cols)
            .filter(|c| (mask >> c) & 1 == 1)
            .fold(0, |acc, c| acc | (0..rows).fold(0, |col, r| col | 1 << (r * cols + c)));
        codes.push(code);
    }
    codes.retain(|&c| c != 0 && c != full);
    codes.sort_unstable();
    codes.dedup();
    let samples: Vec<BitString> = codes.iter().map(|&c| BitString::from_index(c, n)).collect::<Result<_>>()?;
    let target = empirical_distribution(&samples)?;
    Dataset::new(samples, Some(target))
}

/// Gaussian density at integer bin centres `0..bins`, normalized over the
/// bins, plus `draws` samples from it. Bin `x` is encoded as the `log2(bins)`
/// bit binary representation of `x`.
pub fn gen_gaussian(bins: usize, mu: f64, sigma: f64, draws: usize, seed: u64) -> Result<Dataset> {
    if !bins.is_power_of_two() || bins < 2 {
        return Err(Error::Config(format!("bin count {bins} is not a power of two")));
    }
    if !(sigma > 0.0) || draws == 0 {
        return Err(Error::Config("need sigma > 0 and at least one draw".into()));
    }
    let n = bins.trailing_zeros() as usize;
    let weights: Vec<f64> = (0..bins).map(|x| (-0.5 * ((x as f64 - mu) / sigma).powi(2)).exp()).collect();
    let target = VisibleDistribution::from_weights(n, weights)?;
    let cdf = categorical::cumulative(target.probs());
    let mut rng = RngStream::new(seed, 0);
    let samples: Vec<BitString> = (0..draws)
        .map(|_| BitString::from_index(categorical::sample(&cdf, &mut rng) as u64, n))
        .collect::<Result<_>>()?;
    Dataset::new(samples, Some(target))
}

pub fn dataset_string(data: &Dataset) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "# bit 0 first; bit i has weight 2^i in the integer index");
    let _ = writeln!(out, "n {}", data.n());
    let _ = writeln!(out, "count {}", data.samples.len());
    let _ = writeln!(out, "exact-target {}", u8::from(data.exact_target.is_some()));
    for s in &data.samples {
        let _ = writeln!(out, "{}", s.to_text());
    }
    if let Some(t) = &data.exact_target {
        for (i, p) in t.probs().iter().enumerate() {
            if *p > 0.0 {
                let _ = writeln!(out, "{i} {p:.17e}");
            }
        }
    }
    out
}

pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let err = |msg: String| Error::parse("dataset", msg);
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    if lines.next().map(str::trim) != Some(HEADER) {
        return Err(err(format!("missing `{HEADER}` header")));
    }
    let mut field = |name: &str| -> Result<usize> {
        let line = lines.next().ok_or_else(|| err(format!("missing `{name}` line")))?;
        let (key, value) = line.trim().split_once(' ').ok_or_else(|| err(format!("bad line `{line}`")))?;
        if key != name {
            return Err(err(format!("expected `{name}`, found `{key}`")));
        }
        value.trim().parse().map_err(|_| err(format!("bad value for `{name}`: `{value}`")))
    };
    let n = field("n")?;
    let count = field("count")?;
    let has_target = field("exact-target")? == 1;
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let line = lines.next().ok_or_else(|| err(format!("expected {count} samples")))?;
        let s = BitString::parse(line.trim())?;
        if s.len() != n {
            return Err(err(format!("sample `{line}` is not {n} bits")));
        }
        samples.push(s);
    }
    let target = if has_target {
        if n > MAX_ENUMERATED_VISIBLE {
            return Err(Error::Capacity(format!("cannot enumerate n={n}")));
        }
        let mut probs = vec![0.0; 1 << n];
        for line in lines {
            let (i, p) = line.trim().split_once(' ').ok_or_else(|| err(format!("bad target line `{line}`")))?;
            let i: usize = i.parse().map_err(|_| err(format!("bad index `{i}`")))?;
            let p: f64 = p.trim().parse().map_err(|_| err(format!("bad probability `{p}`")))?;
            *probs.get_mut(i).ok_or_else(|| err(format!("index {i} out of range")))? = p;
        }
        Some(VisibleDistribution::new(n, probs)?)
    } else {
        if lines.next().is_some() {
            return Err(err("trailing lines after samples".into()));
        }
        None
    };
    Dataset::new(samples, target)
}

pub fn write_dataset(data: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, dataset_string(data)).map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text)
}
