//! Duration datasets and empirical diagnostics: binned PMF/CDF, empirical
//! factor sequences, and QQ / CDF overlays against a fitted model.

use crate::dist::SojournPmf;
use crate::estimation::FitResult;
use serde::Serialize;
use std::io::BufRead;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: cannot parse {token:?} as a positive integer")]
    Parse { line: usize, token: String },
    #[error("dataset is empty")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DataFormat {
    /// One integer per line; blank lines skipped.
    #[default]
    Lines,
    /// First column of a CSV, with an optional non-numeric header row.
    CsvColumn,
}

/// Observed positive integer durations.
#[derive(Debug, Clone)]
pub struct DurationDataset {
    pub name: String,
    pub values: Vec<u32>,
}

impl DurationDataset {
    pub fn new(name: impl Into<String>, values: Vec<u32>) -> Result<Self, DataError> {
        if values.is_empty() {
            return Err(DataError::Empty);
        }
        Ok(Self {
            name: name.into(),
            values,
        })
    }

    pub fn from_path(path: &Path, format: DataFormat) -> Result<Self, DataError> {
        let file = std::fs::File::open(path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".to_string());
        Self::from_reader(name, std::io::BufReader::new(file), format)
    }

    pub fn from_reader<R: BufRead>(
        name: impl Into<String>,
        reader: R,
        format: DataFormat,
    ) -> Result<Self, DataError> {
        let mut values = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let raw = line.trim();
            if raw.is_empty() {
                continue;
            }
            let token = match format {
                DataFormat::Lines => raw,
                DataFormat::CsvColumn => raw.split(',').next().unwrap_or("").trim(),
            };
            match token.parse::<u32>() {
                Ok(v) if v >= 1 => values.push(v),
                Ok(_) | Err(_) => {
                    // a non-numeric first row in CSV mode is a header
                    if format == DataFormat::CsvColumn
                        && values.is_empty()
                        && idx == 0
                        && token.parse::<f64>().is_err()
                    {
                        continue;
                    }
                    return Err(DataError::Parse {
                        line: idx + 1,
                        token: token.to_string(),
                    });
                }
            }
        }
        Self::new(name, values)
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn min(&self) -> u32 {
        *self.values.iter().min().expect("non-empty")
    }

    pub fn max(&self) -> u32 {
        *self.values.iter().max().expect("non-empty")
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum::<f64>() / self.n() as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        let n = self.n();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        self.values
            .iter()
            .map(|&v| (v as f64 - m) * (v as f64 - m))
            .sum::<f64>()
            / (n - 1) as f64
    }

    /// Empirical diagnostics; with a fit attached the bundle also carries
    /// QQ pairs and the fitted PMF/CDF overlay.
    pub fn diagnose(&self, fit: Option<&FitResult>) -> DiagnosticsBundle {
        let shift = fit.map(|f| f.shift_hat as u32).unwrap_or(0);
        let shift = if shift < self.min() { shift } else { 0 };
        let max_w = (self.max() - shift) as usize;
        let n = self.n() as f64;

        let mut counts = vec![0u64; max_w];
        for &v in &self.values {
            counts[(v - shift - 1) as usize] += 1;
        }
        let pmf_hat: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
        let mut cdf_hat = Vec::with_capacity(max_w);
        let mut acc = 0.0;
        for &p in &pmf_hat {
            acc += p;
            cdf_hat.push(acc);
        }
        if let Some(last) = cdf_hat.last_mut() {
            *last = 1.0;
        }

        // rho(k) = tail(k+1) / tail(k); bins with no mass pin it to one
        let mut tail = vec![0.0f64; max_w + 1];
        for k in (0..max_w).rev() {
            tail[k] = tail[k + 1] + pmf_hat[k];
        }
        let mut rho_hat = Vec::with_capacity(max_w);
        let mut rho_informative = Vec::with_capacity(max_w);
        for k in 0..max_w {
            let r = if tail[k] > 0.0 {
                tail[k + 1] / tail[k]
            } else {
                1.0
            };
            rho_informative.push(r != 1.0);
            rho_hat.push(r);
        }
        let rho_smooth: Vec<f64> = (0..max_w)
            .map(|k| {
                let lo = k.saturating_sub(1);
                let hi = (k + 2).min(max_w);
                rho_hat[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
            })
            .collect();

        let fitted = fit.and_then(|f| f.params().pmf().ok());
        let (qq, overlay) = match &fitted {
            Some(model) => {
                let mut sorted = self.values.clone();
                sorted.sort_unstable();
                let cdf = model.cdf();
                let lo_abs = *model.support().start();
                let qq: Vec<QqPair> = sorted
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| {
                        let level = (i as f64 + 0.5) / n;
                        let pos = cdf.partition_point(|&f| f < level);
                        QqPair {
                            level,
                            empirical: x as f64,
                            fitted: (lo_abs + pos).min(*model.support().end()) as f64,
                        }
                    })
                    .collect();
                let overlay: Vec<OverlayPoint> = (1..=max_w)
                    .map(|k| {
                        let abs = k + shift as usize;
                        OverlayPoint {
                            k: abs as u32,
                            pmf_hat: pmf_hat[k - 1],
                            cdf_hat: cdf_hat[k - 1],
                            pmf_fit: model.prob_at(abs),
                            cdf_fit: model.cdf_at(abs),
                        }
                    })
                    .collect();
                (qq, overlay)
            }
            None => (Vec::new(), Vec::new()),
        };

        DiagnosticsBundle {
            name: self.name.clone(),
            n: self.n(),
            min: self.min(),
            max: self.max(),
            mean: self.mean(),
            variance: self.variance(),
            shift,
            pmf_hat,
            cdf_hat,
            rho_hat,
            rho_informative,
            rho_smooth,
            qq,
            overlay,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QqPair {
    pub level: f64,
    pub empirical: f64,
    pub fitted: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OverlayPoint {
    pub k: u32,
    pub pmf_hat: f64,
    pub cdf_hat: f64,
    pub pmf_fit: f64,
    pub cdf_fit: f64,
}

/// Empirical summaries on the working scale `k = value - shift`.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsBundle {
    pub name: String,
    pub n: usize,
    pub min: u32,
    pub max: u32,
    pub mean: f64,
    pub variance: f64,
    pub shift: u32,
    pub pmf_hat: Vec<f64>,
    pub cdf_hat: Vec<f64>,
    pub rho_hat: Vec<f64>,
    /// False where an empty tail bin pins the ratio to one; plots skip those.
    pub rho_informative: Vec<bool>,
    pub rho_smooth: Vec<f64>,
    pub qq: Vec<QqPair>,
    pub overlay: Vec<OverlayPoint>,
}

impl DiagnosticsBundle {
    /// `k,rho,rho_smooth` rows, absolute k, informative bins only.
    pub fn write_rho_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,rho,rho_smooth")?;
        for k in 0..self.rho_hat.len() {
            if self.rho_informative[k] {
                writeln!(
                    w,
                    "{},{},{}",
                    k as u32 + 1 + self.shift,
                    self.rho_hat[k],
                    self.rho_smooth[k]
                )?;
            }
        }
        Ok(())
    }

    /// `k,pmf,cdf` rows on the absolute scale.
    pub fn write_pmf_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,pmf,cdf")?;
        for k in 0..self.pmf_hat.len() {
            writeln!(
                w,
                "{},{},{}",
                k as u32 + 1 + self.shift,
                self.pmf_hat[k],
                self.cdf_hat[k]
            )?;
        }
        Ok(())
    }

    pub fn write_qq_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "level,empirical,fitted")?;
        for p in &self.qq {
            writeln!(w, "{},{},{}", p.level, p.empirical, p.fitted)?;
        }
        Ok(())
    }

    pub fn write_overlay_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,pmf_hat,cdf_hat,pmf_fit,cdf_fit")?;
        for p in &self.overlay {
            writeln!(
                w,
                "{},{},{},{},{}",
                p.k, p.pmf_hat, p.cdf_hat, p.pmf_fit, p.cdf_fit
            )?;
        }
        Ok(())
    }
}

/// Convenience wrapper so callers can hand a fitted model in directly.
pub fn fitted_support_pmf(fit: &FitResult) -> Option<SojournPmf> {
    fit.params().pmf().ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::FamilyParams;
    use crate::sampling::{sample_inverse, trial_rng};
    use std::io::Cursor;

    #[test]
    fn parses_newline_integers() {
        let ds = DurationDataset::from_reader("t", Cursor::new("3\n\n 5 \n2\n"), DataFormat::Lines)
            .unwrap();
        assert_eq!(ds.values, vec![3, 5, 2]);
        assert_eq!(ds.min(), 2);
        assert_eq!(ds.max(), 5);
    }

    #[test]
    fn parses_csv_column_with_header() {
        let ds = DurationDataset::from_reader(
            "t",
            Cursor::new("duration,label\n4,a\n7,b\n"),
            DataFormat::CsvColumn,
        )
        .unwrap();
        assert_eq!(ds.values, vec![4, 7]);
    }

    #[test]
    fn bad_token_names_the_line() {
        let err = DurationDataset::from_reader("t", Cursor::new("3\nx\n5\n"), DataFormat::Lines)
            .unwrap_err();
        match err {
            DataError::Parse { line, token } => {
                assert_eq!(line, 2);
                assert_eq!(token, "x");
            }
            other => panic!("unexpected {other:?}"),
        }
        let zero = DurationDataset::from_reader("t", Cursor::new("3\n0\n"), DataFormat::Lines)
            .unwrap_err();
        assert!(matches!(zero, DataError::Parse { line: 2, .. }));
    }

    #[test]
    fn empty_input_is_rejected() {
        let err =
            DurationDataset::from_reader("t", Cursor::new("\n\n"), DataFormat::Lines).unwrap_err();
        assert!(matches!(err, DataError::Empty));
    }

    #[test]
    fn empirical_cdf_climbs_to_one_and_rho_stays_in_range() {
        let ds = DurationDataset::new("t", vec![1, 1, 2, 4, 4, 4, 6]).unwrap();
        let d = ds.diagnose(None);
        for w in d.cdf_hat.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert_eq!(*d.cdf_hat.last().unwrap(), 1.0);
        for (&r, &info) in d.rho_hat.iter().zip(&d.rho_informative) {
            assert!((0.0..=1.0).contains(&r));
            assert_eq!(info, r != 1.0);
        }
        // bins 3 and 5 are empty: their ratios are pinned to one
        assert!(!d.rho_informative[2]);
        assert!(!d.rho_informative[4]);
        assert_eq!(d.rho_hat[d.rho_hat.len() - 1], 0.0);
    }

    #[test]
    fn constant_factor_data_yields_flat_smoothed_rho() {
        let rho = crate::dist::RhoSequence::new(vec![0.6; 19].into_iter().chain([0.0]).collect())
            .unwrap();
        let pmf = rho.pmf();
        let mut rng = trial_rng(7, 0, 0);
        let values = sample_inverse(&pmf, 20_000, &mut rng);
        let ds = DurationDataset::new("geom", values).unwrap();
        let d = ds.diagnose(None);
        let mid = &d.rho_smooth[2..12];
        for &r in mid {
            assert!((r - 0.6).abs() < 0.05, "smoothed factor {r}");
        }
    }

    #[test]
    fn qq_is_near_the_diagonal_when_the_fit_is_the_truth() {
        let truth = FamilyParams::Linear {
            a: -0.04,
            t_max: 25,
            shift: 2,
        };
        let pmf = truth.pmf().unwrap();
        let mut rng = trial_rng(11, 0, 0);
        let values = sample_inverse(&pmf, 4000, &mut rng);
        let ds = DurationDataset::new("syn", values).unwrap();
        let stats = crate::estimation::SampleStats::new(&ds.values, 2).unwrap();
        let fit = crate::estimation::linear::fit_fixed_t(&stats, 25).unwrap();
        let d = ds.diagnose(Some(&fit));
        assert_eq!(d.qq.len(), 4000);
        let worst =
            d.qq.iter()
                .map(|p| (p.empirical - p.fitted).abs())
                .fold(0.0f64, f64::max);
        assert!(worst <= 3.0, "worst QQ gap {worst}");
        let last = d.overlay.last().unwrap();
        assert!((last.cdf_hat - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_writers_emit_parse_clean_rows() {
        let ds = DurationDataset::new("t", vec![2, 2, 3, 5]).unwrap();
        let d = ds.diagnose(None);
        let mut buf = Vec::new();
        d.write_rho_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for line in text.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 3);
            fields[0].parse::<u32>().unwrap();
            fields[1].parse::<f64>().unwrap();
            fields[2].parse::<f64>().unwrap();
        }
        let mut buf = Vec::new();
        d.write_pmf_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().lines().count() == 1 + 5);
    }
}
