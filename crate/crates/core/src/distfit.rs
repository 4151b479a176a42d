//! Log-binned distance distributions and power-law fitting.
//!
//! Distances are histogrammed on geometrically spaced edges (a fixed
//! number of bins per decade) and normalized to a per-km probability
//! density. Fits are ordinary least squares in log10-log10 space over the
//! non-empty bins. The double fit scans every interior bin edge as a
//! candidate separation point, fits the two sides independently, and
//! keeps the candidate with the smallest total residual; a single-law
//! fallback guards against asserting a breakpoint the data does not
//! support.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("no distances to bin")]
    EmptyInput,
    #[error("invalid binning: d_min {d_min}, d_max {d_max}, bins_per_decade {bins_per_decade}")]
    InvalidRange {
        d_min: f64,
        d_max: f64,
        bins_per_decade: u32,
    },
    #[error("need at least {needed} non-empty bins, found {found}")]
    TooFewBins { needed: usize, found: usize },
    #[error("inconsistent distribution: {0}")]
    Malformed(String),
}

/// Log-binned empirical density of friend distances.
///
/// For distributions built by [`log_bin`], `densities[i] =
/// counts[i] / (n_total * (edges[i+1] - edges[i]))`, so density times bin
/// width sums to one. Distributions built from explicit densities (for
/// noiseless fitting) carry zero counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinnedDistribution {
    /// n+1 strictly increasing bin edges in km.
    pub edges: Vec<f64>,
    /// Geometric mean of adjacent edges.
    pub centers: Vec<f64>,
    pub counts: Vec<u64>,
    /// Per-km probability density.
    pub densities: Vec<f64>,
    pub n_total: u64,
}

impl BinnedDistribution {
    /// Bins with zero density never contribute regression points.
    pub fn is_empty_bin(&self, i: usize) -> bool {
        self.densities[i] <= 0.0
    }

    pub fn n_bins(&self) -> usize {
        self.centers.len()
    }

    /// Build a distribution from analytically computed densities, e.g.
    /// a model evaluated at bin centers. Counts are not meaningful here.
    pub fn from_densities(edges: Vec<f64>, densities: Vec<f64>) -> Result<Self, FitError> {
        if edges.len() != densities.len() + 1 || densities.is_empty() {
            return Err(FitError::Malformed(format!(
                "{} edges for {} densities",
                edges.len(),
                densities.len()
            )));
        }
        if !edges.windows(2).all(|w| w[0] < w[1]) || edges[0] <= 0.0 {
            return Err(FitError::Malformed("edges must be positive and increasing".into()));
        }
        if !densities.iter().all(|d| d.is_finite() && *d >= 0.0) {
            return Err(FitError::Malformed("densities must be finite and non-negative".into()));
        }
        let centers = geometric_centers(&edges);
        let counts = vec![0; densities.len()];
        Ok(Self {
            edges,
            centers,
            counts,
            densities,
            n_total: 0,
        })
    }
}

fn geometric_centers(edges: &[f64]) -> Vec<f64> {
    edges.windows(2).map(|w| (w[0] * w[1]).sqrt()).collect()
}

/// Histogram distances onto geometrically spaced edges covering
/// [d_min, d_max] at `bins_per_decade` resolution.
///
/// Values below d_min clamp into the first bin and values above d_max
/// into the last; interior membership is left-inclusive, right-exclusive,
/// with the last bin right-inclusive.
pub fn log_bin(
    distances: &[f64],
    bins_per_decade: u32,
    d_min: f64,
    d_max: f64,
) -> Result<BinnedDistribution, FitError> {
    if bins_per_decade < 1 || !(d_min > 0.0) || !(d_min < d_max) || !d_max.is_finite() {
        return Err(FitError::InvalidRange {
            d_min,
            d_max,
            bins_per_decade,
        });
    }
    if distances.is_empty() {
        return Err(FitError::EmptyInput);
    }

    let raw = bins_per_decade as f64 * (d_max / d_min).log10();
    let n_bins = if (raw - raw.round()).abs() < 1e-9 {
        raw.round() as usize
    } else {
        raw.ceil() as usize
    }
    .max(1);

    let mut edges: Vec<f64> = (0..=n_bins)
        .map(|i| d_min * 10f64.powf(i as f64 / bins_per_decade as f64))
        .collect();
    // Guard the last edge against an ulp of downward rounding.
    let last = *edges.last().expect("at least two edges");
    if last < d_max {
        *edges.last_mut().expect("at least two edges") = d_max;
    }

    let mut counts = vec![0u64; n_bins];
    for &d in distances {
        debug_assert!(d.is_finite() && d >= 0.0, "distance {d} out of domain");
        let idx = edges.partition_point(|&e| e <= d);
        let bin = idx.saturating_sub(1).min(n_bins - 1);
        counts[bin] += 1;
    }

    let n_total = distances.len() as u64;
    let densities = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, w)| c as f64 / (n_total as f64 * (w[1] - w[0])))
        .collect();
    Ok(BinnedDistribution {
        centers: geometric_centers(&edges),
        edges,
        counts,
        densities,
        n_total,
    })
}

/// One fitted power-law segment: density ~ 10^log_c * d^-gamma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawSegment {
    pub gamma: f64,
    /// Intercept in log10 space.
    pub log_c: f64,
    /// Residual sum of squares in log10 space.
    pub rss: f64,
    /// Non-empty bins used by the regression.
    pub n_bins: usize,
}

impl PowerLawSegment {
    /// Model density at distance d.
    pub fn density_at(&self, d: f64) -> f64 {
        10f64.powf(self.log_c - self.gamma * d.log10())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    Double,
    Single,
}

impl std::fmt::Display for ModelChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelChoice::Double => "double",
            ModelChoice::Single => "single",
        })
    }
}

/// Double power-law fit with the separation point located at a bin edge.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoublePowerLawFit {
    /// Segment below the separation point (gamma1).
    pub intra: PowerLawSegment,
    /// Segment at and above the separation point (gamma2).
    pub inter: PowerLawSegment,
    /// Separation point, an interior bin edge.
    pub d_s: f64,
    /// intra.rss + inter.rss.
    pub rss_total: f64,
    /// Whole-range single power law, used for model selection.
    pub single_fallback: Option<PowerLawSegment>,
    pub model_choice: ModelChoice,
}

fn ols_log10(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in points {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let rss = points
        .iter()
        .map(|&(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    (slope, intercept, rss)
}

/// Least squares of log10(density) on log10(center) over the non-empty
/// bins whose index falls in `range`. gamma is the negated slope.
pub fn fit_single_power_law(
    binned: &BinnedDistribution,
    range: Range<usize>,
) -> Result<PowerLawSegment, FitError> {
    let points: Vec<(f64, f64)> = range
        .clone()
        .filter(|&i| !binned.is_empty_bin(i))
        .map(|i| (binned.centers[i].log10(), binned.densities[i].log10()))
        .collect();
    if points.len() < 2 {
        return Err(FitError::TooFewBins {
            needed: 2,
            found: points.len(),
        });
    }
    let (slope, intercept, rss) = ols_log10(&points);
    Ok(PowerLawSegment {
        gamma: -slope,
        log_c: intercept,
        rss,
        n_bins: points.len(),
    })
}

/// Exhaustive breakpoint scan.
///
/// Every interior bin edge leaving at least `min_bins_per_segment`
/// non-empty bins on each side is a candidate; the two sides are fitted
/// independently and the candidate with the smallest total residual wins,
/// ties going to the smallest separation point. A whole-range single fit
/// is kept as fallback and [`model_selection`] decides between them with
/// `improvement_threshold`.
pub fn fit_double_power_law(
    binned: &BinnedDistribution,
    min_bins_per_segment: usize,
    improvement_threshold: f64,
) -> Result<DoublePowerLawFit, FitError> {
    let n = binned.n_bins();
    let min_side = min_bins_per_segment.max(2);
    let non_empty_total = (0..n).filter(|&i| !binned.is_empty_bin(i)).count();
    if non_empty_total < 2 * min_side {
        return Err(FitError::TooFewBins {
            needed: 2 * min_side,
            found: non_empty_total,
        });
    }

    let single = fit_single_power_law(binned, 0..n)?;

    let mut best: Option<(f64, usize, PowerLawSegment, PowerLawSegment)> = None;
    let mut non_empty_left = 0usize;
    for k in 1..n {
        if !binned.is_empty_bin(k - 1) {
            non_empty_left += 1;
        }
        let non_empty_right = non_empty_total - non_empty_left;
        if non_empty_left < min_side || non_empty_right < min_side {
            continue;
        }
        let left = fit_single_power_law(binned, 0..k)?;
        let right = fit_single_power_law(binned, k..n)?;
        let rss_total = left.rss + right.rss;
        // Strict improvement only: scanning edges in ascending order thus
        // breaks ties toward the smallest separation point.
        if best.as_ref().is_none_or(|(b, _, _, _)| rss_total < *b) {
            best = Some((rss_total, k, left, right));
        }
    }

    let (rss_total, k, intra, inter) = best.ok_or(FitError::TooFewBins {
        needed: 2 * min_side,
        found: non_empty_total,
    })?;
    let mut fit = DoublePowerLawFit {
        intra,
        inter,
        d_s: binned.edges[k],
        rss_total,
        single_fallback: None,
        model_choice: ModelChoice::Double,
    };
    fit.model_choice = model_selection(&single, &fit, improvement_threshold);
    fit.single_fallback = Some(single);
    Ok(fit)
}

/// Keep the double model only when it beats the single fit's residual by
/// more than the threshold fraction: double iff
/// `double.rss_total < (1 - improvement_threshold) * single.rss`.
pub fn model_selection(
    single: &PowerLawSegment,
    double: &DoublePowerLawFit,
    improvement_threshold: f64,
) -> ModelChoice {
    if double.rss_total < (1.0 - improvement_threshold) * single.rss {
        ModelChoice::Double
    } else {
        ModelChoice::Single
    }
}

/// Binning and fitting parameters for the full distance-distribution fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitConfig {
    pub bins_per_decade: u32,
    pub d_min: f64,
    pub d_max: f64,
    pub min_bins_per_segment: usize,
    pub improvement_threshold: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            bins_per_decade: 10,
            d_min: 0.1,
            d_max: 1000.0,
            min_bins_per_segment: 3,
            improvement_threshold: 0.5,
        }
    }
}

/// Bin distances and fit the double power law in one step.
pub fn fit_distance_distribution(
    distances: &[f64],
    config: &FitConfig,
) -> Result<(BinnedDistribution, DoublePowerLawFit), FitError> {
    let binned = log_bin(distances, config.bins_per_decade, config.d_min, config.d_max)?;
    let fit = fit_double_power_law(
        &binned,
        config.min_bins_per_segment,
        config.improvement_threshold,
    )?;
    Ok((binned, fit))
}

/// Flat, serializable summary of a fit and the configuration behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub gamma1: f64,
    pub gamma2: f64,
    pub d_s_km: f64,
    pub intercept1_log10: f64,
    pub intercept2_log10: f64,
    pub rss_intra: f64,
    pub rss_inter: f64,
    pub rss_total: f64,
    pub single_gamma: f64,
    pub single_intercept_log10: f64,
    pub single_rss: f64,
    pub model_choice: ModelChoice,
    pub improvement_threshold: f64,
    pub bins_per_decade: u32,
    pub d_min_km: f64,
    pub d_max_km: f64,
    pub n_distances: u64,
}

impl FitReport {
    pub fn new(fit: &DoublePowerLawFit, config: &FitConfig, n_distances: u64) -> Self {
        let single = fit.single_fallback.unwrap_or(PowerLawSegment {
            gamma: f64::NAN,
            log_c: f64::NAN,
            rss: f64::NAN,
            n_bins: 0,
        });
        Self {
            gamma1: fit.intra.gamma,
            gamma2: fit.inter.gamma,
            d_s_km: fit.d_s,
            intercept1_log10: fit.intra.log_c,
            intercept2_log10: fit.inter.log_c,
            rss_intra: fit.intra.rss,
            rss_inter: fit.inter.rss,
            rss_total: fit.rss_total,
            single_gamma: single.gamma,
            single_intercept_log10: single.log_c,
            single_rss: single.rss,
            model_choice: fit.model_choice,
            improvement_threshold: config.improvement_threshold,
            bins_per_decade: config.bins_per_decade,
            d_min_km: config.d_min,
            d_max_km: config.d_max,
            n_distances,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub const DISTRIBUTION_TABLE_HEADER: &str = "bin\tedge_lo_km\tedge_hi_km\tcenter_km\tcount\tdensity_per_km";

pub fn write_distribution_table(binned: &BinnedDistribution) -> String {
    let mut out = String::from(DISTRIBUTION_TABLE_HEADER);
    out.push('\n');
    for i in 0..binned.n_bins() {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            i,
            binned.edges[i],
            binned.edges[i + 1],
            binned.centers[i],
            binned.counts[i],
            binned.densities[i]
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Densities proportional to center^-gamma over the given edges.
    fn power_law_distribution(edges: Vec<f64>, gamma: f64, c: f64) -> BinnedDistribution {
        let centers = geometric_centers(&edges);
        let densities = centers.iter().map(|&x| c * x.powf(-gamma)).collect();
        BinnedDistribution::from_densities(edges, densities).unwrap()
    }

    fn geometric_edges(d_min: f64, bins_per_decade: u32, n_bins: usize) -> Vec<f64> {
        (0..=n_bins)
            .map(|i| d_min * 10f64.powf(i as f64 / bins_per_decade as f64))
            .collect()
    }

    /// Continuous-at-d_s double law evaluated at the centers.
    fn double_law_distribution(
        edges: Vec<f64>,
        gamma1: f64,
        gamma2: f64,
        d_s: f64,
    ) -> BinnedDistribution {
        let centers = geometric_centers(&edges);
        let scale = d_s.powf(gamma2 - gamma1);
        let densities = centers
            .iter()
            .map(|&x| {
                if x < d_s {
                    x.powf(-gamma1)
                } else {
                    scale * x.powf(-gamma2)
                }
            })
            .collect();
        BinnedDistribution::from_densities(edges, densities).unwrap()
    }

    #[test]
    fn six_decades_at_ten_per_decade_gives_sixty_bins() {
        let b = log_bin(&[1.0], 10, 0.001, 1000.0).unwrap();
        assert_eq!(b.n_bins(), 60);
        assert_eq!(b.edges.len(), 61);
        assert!(*b.edges.last().unwrap() >= 1000.0);
    }

    #[test]
    fn single_occupied_bin_has_density_one_over_width() {
        let b = log_bin(&[5.0, 5.1, 5.2], 10, 1.0, 100.0).unwrap();
        let idx = b.counts.iter().position(|&c| c > 0).unwrap();
        assert_eq!(b.counts[idx], 3);
        let width = b.edges[idx + 1] - b.edges[idx];
        assert!((b.densities[idx] - 1.0 / width).abs() < 1e-12);
        assert!(b.densities.iter().enumerate().all(|(i, &d)| i == idx || d == 0.0));
    }

    #[test]
    fn out_of_range_values_clamp_into_end_bins() {
        let b = log_bin(&[0.0001, 0.05, 5000.0], 10, 0.1, 1000.0).unwrap();
        assert_eq!(b.counts[0], 2);
        assert_eq!(*b.counts.last().unwrap(), 1);
        assert_eq!(b.n_total, 3);
    }

    #[test]
    fn membership_is_left_inclusive() {
        let b = log_bin(&[1.0, 10.0, 100.0], 1, 1.0, 100.0).unwrap();
        // edges [1, 10, 100]; 10 goes into [10, 100); 100 into the last bin
        assert_eq!(b.counts, vec![1, 2]);
    }

    #[test]
    fn mass_is_conserved() {
        let ds: Vec<f64> = (1..500).map(|i| 0.12 * i as f64).collect();
        let b = log_bin(&ds, 10, 0.1, 100.0).unwrap();
        assert_eq!(b.counts.iter().sum::<u64>(), b.n_total);
        let mass: f64 = b
            .densities
            .iter()
            .zip(b.edges.windows(2))
            .map(|(&d, w)| d * (w[1] - w[0]))
            .sum();
        assert!((mass - 1.0).abs() < 1e-9, "mass={mass}");
    }

    #[test]
    fn binning_errors() {
        assert_eq!(log_bin(&[], 10, 0.1, 100.0).unwrap_err(), FitError::EmptyInput);
        assert!(matches!(
            log_bin(&[1.0], 10, -1.0, 100.0).unwrap_err(),
            FitError::InvalidRange { .. }
        ));
        assert!(matches!(
            log_bin(&[1.0], 10, 10.0, 1.0).unwrap_err(),
            FitError::InvalidRange { .. }
        ));
        assert!(matches!(
            log_bin(&[1.0], 0, 0.1, 100.0).unwrap_err(),
            FitError::InvalidRange { .. }
        ));
    }

    #[test]
    fn exact_power_law_fits_exactly() {
        let b = power_law_distribution(geometric_edges(1.0, 10, 10), 2.0, 3.5);
        let seg = fit_single_power_law(&b, 0..b.n_bins()).unwrap();
        assert!((seg.gamma - 2.0).abs() < 1e-9, "gamma={}", seg.gamma);
        assert!(seg.rss < 1e-9, "rss={}", seg.rss);
        assert_eq!(seg.n_bins, 10);
    }

    #[test]
    fn two_points_interpolate_with_zero_rss() {
        let b = power_law_distribution(geometric_edges(1.0, 10, 2), 1.3, 1.0);
        let seg = fit_single_power_law(&b, 0..2).unwrap();
        assert!((seg.gamma - 1.3).abs() < 1e-9);
        assert!(seg.rss < 1e-12);
    }

    #[test]
    fn single_fit_requires_two_nonempty_bins() {
        let b = BinnedDistribution::from_densities(vec![1.0, 2.0, 4.0], vec![0.5, 0.0]).unwrap();
        assert!(matches!(
            fit_single_power_law(&b, 0..2).unwrap_err(),
            FitError::TooFewBins { needed: 2, found: 1 }
        ));
    }

    #[test]
    fn intra_segment_of_la_model_recovers_gamma1() {
        // Only the part below the separation point, pure gamma1 = 0.60.
        let edges = geometric_edges(0.1, 10, 23); // up to ~20 km
        let b = power_law_distribution(edges, 0.60, 1.0);
        let seg = fit_single_power_law(&b, 0..b.n_bins()).unwrap();
        assert!((seg.gamma - 0.60).abs() < 1e-6, "gamma={}", seg.gamma);
    }

    #[test]
    fn noiseless_double_law_recovers_parameters_exactly() {
        let edges = geometric_edges(0.1, 10, 40); // 0.1 .. 1000 km
        let b = double_law_distribution(edges, 0.60, 6.23, 22.0);
        let fit = fit_double_power_law(&b, 3, 0.5).unwrap();
        assert!((fit.intra.gamma - 0.60).abs() < 1e-6, "g1={}", fit.intra.gamma);
        assert!((fit.inter.gamma - 6.23).abs() < 1e-6, "g2={}", fit.inter.gamma);
        assert!(fit.rss_total < 1e-12, "rss={}", fit.rss_total);
        assert_eq!(fit.model_choice, ModelChoice::Double);
        // d_s lands on the bin edge nearest 22 km (one bin in log space)
        assert!(
            (fit.d_s.log10() - 22f64.log10()).abs() <= 0.1 + 1e-12,
            "d_s={}",
            fit.d_s
        );
    }

    #[test]
    fn noiseless_single_law_selects_single_model() {
        let b = power_law_distribution(geometric_edges(0.1, 10, 40), 1.5, 2.0);
        let fit = fit_double_power_law(&b, 3, 0.5).unwrap();
        assert_eq!(fit.model_choice, ModelChoice::Single);
        let single = fit.single_fallback.unwrap();
        assert!((single.gamma - 1.5).abs() < 1e-9);
        assert!(single.rss < 1e-12);
    }

    #[test]
    fn model_selection_threshold_rule() {
        let seg = |rss| PowerLawSegment {
            gamma: 1.0,
            log_c: 0.0,
            rss,
            n_bins: 5,
        };
        let double = |rss_total| DoublePowerLawFit {
            intra: seg(rss_total / 2.0),
            inter: seg(rss_total / 2.0),
            d_s: 10.0,
            rss_total,
            single_fallback: None,
            model_choice: ModelChoice::Double,
        };
        assert_eq!(model_selection(&seg(10.0), &double(2.0), 0.5), ModelChoice::Double);
        assert_eq!(model_selection(&seg(10.0), &double(6.0), 0.5), ModelChoice::Single);
        assert_eq!(model_selection(&seg(0.0), &double(0.0), 0.5), ModelChoice::Single);
    }

    #[test]
    fn double_fit_requires_enough_nonempty_bins() {
        let edges = geometric_edges(1.0, 10, 5);
        let b = power_law_distribution(edges, 1.0, 1.0);
        assert!(matches!(
            fit_double_power_law(&b, 3, 0.5).unwrap_err(),
            FitError::TooFewBins { needed: 6, found: 5 }
        ));
    }

    #[test]
    fn scan_skips_candidates_with_thin_sides() {
        // 8 non-empty bins, min 4 per side: only the middle edge admits.
        let edges = geometric_edges(1.0, 10, 8);
        let b = double_law_distribution(edges, 0.5, 4.0, edges_nearest(&geometric_edges(1.0, 10, 8), 2.5));
        let fit = fit_double_power_law(&b, 4, 0.5).unwrap();
        assert_eq!(fit.intra.n_bins, 4);
        assert_eq!(fit.inter.n_bins, 4);
    }

    fn edges_nearest(edges: &[f64], target: f64) -> f64 {
        *edges
            .iter()
            .min_by(|a, b| (*a - target).abs().total_cmp(&(*b - target).abs()))
            .unwrap()
    }

    #[test]
    fn report_serializes_with_stable_fields() {
        let edges = geometric_edges(0.1, 10, 40);
        let b = double_law_distribution(edges, 0.60, 6.23, 22.0);
        let fit = fit_double_power_law(&b, 3, 0.5).unwrap();
        let report = FitReport::new(&fit, &FitConfig::default(), 0);
        let json = report.to_json();
        let back: FitReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
        assert!(json.contains("\"model_choice\": \"double\""));
    }

    #[test]
    fn distribution_table_lists_every_bin() {
        let b = log_bin(&[1.0, 2.0, 50.0], 2, 1.0, 100.0).unwrap();
        let table = write_distribution_table(&b);
        assert_eq!(table.lines().count(), 1 + b.n_bins());
        assert!(table.starts_with(DISTRIBUTION_TABLE_HEADER));
    }
}
