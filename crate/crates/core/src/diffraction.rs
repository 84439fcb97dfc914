//! Diffraction estimators: autocorrelation coefficients, Fourier-Bohr
//! amplitudes, Bragg intensities via atom extraction, consistent-phase
//! checks, peak scans, averaging-window stability probes, and Fourier-Bohr
//! series reconstruction.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::apfunctions::{Grid, SampledFunction, TestFunction, TrigPolynomial};
use crate::error::{coverage, invalid, Error, Result};
use crate::numeric::{cis, fmt_f64, golden_section_max, Kahan};
use crate::pointsets::{PointSet, PHI, SQRT5};
use crate::seminorms::{scan_almost_periods_at, AlmostPeriodReport, SeminormKind};

/// Default difference span kept by autocorrelations.
pub const ACF_SPAN: f64 = 50.0;
/// Default bin tolerance. The difference sets of the bundled generators are
/// discrete with separations far above this, so bins are effectively exact.
pub const BIN_TOLERANCE: f64 = 1e-9;
/// Peak-scan keep threshold as a fraction of the point density.
pub const PEAK_THRESHOLD_DENSITY_FACTOR: f64 = 0.05;

const COVER_SLACK: f64 = 1e-9;

/// Finite-sample autocorrelation: coefficients eta(z) = (ordered pairs at
/// difference z) / (2n) for binned differences |z| <= max_difference, from
/// the sample on [-n, n].
#[derive(Debug, Clone, PartialEq)]
pub struct Autocorrelation {
    entries: Vec<(f64, f64)>,
    half_width: f64,
    max_difference: f64,
    bin_tolerance: f64,
    warnings: Vec<String>,
}

impl Autocorrelation {
    /// (z, eta) pairs sorted by z; symmetric under z -> -z.
    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn max_difference(&self) -> f64 {
        self.max_difference
    }

    pub fn bin_tolerance(&self) -> f64 {
        self.bin_tolerance
    }

    /// Bins that crowded closer than twice the bin tolerance.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Coefficient of the bin containing z, or 0 when no difference was
    /// observed there.
    pub fn eta(&self, z: f64) -> f64 {
        let i = self.entries.partition_point(|(c, _)| *c < z - self.bin_tolerance);
        match self.entries.get(i) {
            Some((c, eta)) if (c - z).abs() <= self.bin_tolerance => *eta,
            _ => 0.0,
        }
    }

    /// CSV: metadata comments, `z,eta` header, one row per bin.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# autocorrelation n {} max_difference {} bin_tolerance {}",
            fmt_f64(self.half_width),
            fmt_f64(self.max_difference),
            fmt_f64(self.bin_tolerance)
        )?;
        for warning in &self.warnings {
            writeln!(w, "# warning {warning}")?;
        }
        writeln!(w, "z,eta")?;
        for (z, eta) in &self.entries {
            writeln!(w, "{},{}", fmt_f64(*z), fmt_f64(*eta))?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut meta = None;
        let mut warnings = Vec::new();
        let mut entries = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line == "z,eta" {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(m) = rest.strip_prefix("autocorrelation") {
                    let toks: Vec<&str> = m.split_whitespace().collect();
                    if toks.len() != 6 || toks[0] != "n" || toks[2] != "max_difference" || toks[4] != "bin_tolerance" {
                        return Err(Error::Parse(format!("line {}: bad autocorrelation header", idx + 1)));
                    }
                    let num = |s: &str| -> Result<f64> {
                        s.parse().map_err(|e| Error::Parse(format!("line {}: {e}", idx + 1)))
                    };
                    meta = Some((num(toks[1])?, num(toks[3])?, num(toks[5])?));
                } else if let Some(text) = rest.strip_prefix("warning") {
                    warnings.push(text.trim().to_string());
                }
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 2 {
                return Err(Error::Parse(format!("line {}: expected z,eta", idx + 1)));
            }
            let num = |s: &str| -> Result<f64> {
                s.trim().parse().map_err(|e| Error::Parse(format!("line {}: {e}", idx + 1)))
            };
            entries.push((num(cols[0])?, num(cols[1])?));
        }
        let (half_width, max_difference, bin_tolerance) =
            meta.ok_or_else(|| Error::Parse("missing autocorrelation header".into()))?;
        Ok(Self { entries, half_width, max_difference, bin_tolerance, warnings })
    }

    pub fn read_csv_str(s: &str) -> Result<Self> {
        Self::read_csv(s.as_bytes())
    }
}

/// Counts ordered pair differences of the sample on [-n, n], binned to
/// `bin_tolerance`, for |z| <= max_difference.
///
/// eta(0) comes from the self-pairs and equals count/(2n), the density
/// estimate. Differences come in +- pairs, so the entries are exactly
/// symmetric. Bins whose final centers crowd closer than twice the bin
/// tolerance are reported in `warnings`.
pub fn autocorrelation(
    set: &PointSet,
    n: f64,
    bin_tolerance: f64,
    max_difference: f64,
) -> Result<Autocorrelation> {
    if !(n > 0.0) || !n.is_finite() {
        return Err(invalid("half-width must be positive"));
    }
    if !set.covers(-n, n) {
        let (lo, hi) = set.window();
        return Err(coverage(format!(
            "sample window [{lo}, {hi}] does not cover [-{n}, {n}]"
        )));
    }
    if !(max_difference > 0.0) || max_difference > 2.0 * n + COVER_SLACK {
        return Err(invalid("max_difference must lie in (0, 2n]"));
    }
    if !(bin_tolerance > 0.0) || !(bin_tolerance <= 1.0) {
        return Err(invalid("bin_tolerance must lie in (0, 1]"));
    }
    let pts: Vec<f64> = set.points_in(-n, n).collect();
    let count = pts.len();
    let inv_tol = 1.0 / bin_tolerance;
    // key -> (pair count, compensated sum of differences).
    let mut bins: HashMap<i64, (u64, Kahan)> = HashMap::new();
    {
        let mut zero = Kahan::new();
        zero.add(0.0);
        bins.insert(0, (count as u64, zero));
    }
    for i in 0..count {
        for j in i + 1..count {
            let z = pts[j] - pts[i];
            if z > max_difference {
                break;
            }
            let key = (z * inv_tol).round() as i64;
            let bin = bins.entry(key).or_insert((0, Kahan::new()));
            bin.0 += 1;
            bin.1.add(z);
        }
    }
    let mut raw: Vec<(i64, u64, f64)> = bins
        .into_iter()
        .map(|(key, (c, sum))| (key, c, sum.value()))
        .collect();
    raw.sort_by_key(|e| e.0);
    // Merge bins whose centers ended up within one tolerance of each other.
    let mut merged: Vec<(u64, f64)> = Vec::with_capacity(raw.len());
    for (_, c, sum) in raw {
        if let Some((pc, psum)) = merged.last_mut() {
            let prev_center = *psum / *pc as f64;
            let center = sum / c as f64;
            if center - prev_center <= bin_tolerance {
                *pc += c;
                *psum += sum;
                continue;
            }
        }
        merged.push((c, sum));
    }
    let two_n = 2.0 * n;
    let mut warnings = Vec::new();
    let mut entries: Vec<(f64, f64)> = Vec::with_capacity(2 * merged.len());
    let mut prev_center: Option<f64> = None;
    for &(c, sum) in &merged {
        let center = sum / c as f64;
        if let Some(p) = prev_center {
            if center - p < 2.0 * bin_tolerance {
                warnings.push(format!(
                    "differences {p} and {center} crowd within twice the bin tolerance"
                ));
            }
        }
        prev_center = Some(center);
        let eta = c as f64 / two_n;
        if center.abs() <= bin_tolerance {
            entries.push((center, eta));
        } else {
            entries.push((center, eta));
            entries.push((-center, eta));
        }
    }
    entries.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite differences"));
    Ok(Autocorrelation {
        entries,
        half_width: n,
        max_difference,
        bin_tolerance,
        warnings,
    })
}

fn amplitude_of_points(pts: &[f64], y: f64, two_n: f64) -> Complex64 {
    let omega = -std::f64::consts::TAU * y;
    let mut re = Kahan::new();
    let mut im = Kahan::new();
    for &x in pts {
        let w = cis(omega * x);
        re.add(w.re);
        im.add(w.im);
    }
    Complex64::new(re.value(), im.value()) / two_n
}

/// Fourier-Bohr amplitude (1/2n) sum over the sample on [-n, n] of
/// e^(-2 pi i x y).
pub fn amplitude(set: &PointSet, y: f64, n: f64) -> Result<Complex64> {
    amplitude_in(set, y, 0.0, n)
}

/// Amplitude over the translated window [center - n, center + n], still
/// normalized by 2n. The averaging-sequence probes compare these across
/// centers.
pub fn amplitude_in(set: &PointSet, y: f64, center: f64, n: f64) -> Result<Complex64> {
    if !(n > 0.0) || !n.is_finite() {
        return Err(invalid("half-width must be positive"));
    }
    let (lo, hi) = (center - n, center + n);
    if !set.covers(lo, hi) {
        let (wlo, whi) = set.window();
        return Err(coverage(format!(
            "sample window [{wlo}, {whi}] does not cover [{lo}, {hi}]"
        )));
    }
    let pts: Vec<f64> = set.points_in(lo, hi).collect();
    Ok(amplitude_of_points(&pts, y, 2.0 * n))
}

/// Bragg intensity estimate at y by atom extraction from the
/// autocorrelation: (1/2L) sum over |z| <= L of eta(z) e^(-2 pi i z y),
/// with each eta first divided by the finite-sample triangular weight
/// (1 - |z|/2n). Unclamped.
pub fn bragg_intensity_raw(acf: &Autocorrelation, y: f64, l: f64) -> Result<f64> {
    if !(l > 0.0) || l > acf.max_difference + acf.bin_tolerance {
        return Err(invalid(format!(
            "averaging span {l} outside the recorded difference span {}",
            acf.max_difference
        )));
    }
    let two_n = 2.0 * acf.half_width;
    let mut acc = Kahan::new();
    for &(z, eta) in &acf.entries {
        if z.abs() > l + acf.bin_tolerance {
            continue;
        }
        let weight = 1.0 - z.abs() / two_n;
        if weight < 1e-3 {
            return Err(invalid(
                "averaging span too close to the sample diameter for the triangular correction",
            ));
        }
        acc.add(eta / weight * (std::f64::consts::TAU * z * y).cos());
    }
    Ok(acc.value() / (2.0 * l))
}

/// [`bragg_intensity_raw`] clamped at zero: small negative estimates are
/// finite-size noise.
pub fn bragg_intensity(acf: &Autocorrelation, y: f64, l: f64) -> Result<f64> {
    bragg_intensity_raw(acf, y, l).map(|v| v.max(0.0))
}

/// One frequency of a consistent-phase check.
#[derive(Debug, Clone, PartialEq)]
pub struct CppRecord {
    pub frequency: f64,
    /// Atom-extraction intensity I(y).
    pub intensity: f64,
    /// |A_y|^2 from the direct exponential sum.
    pub amplitude_sq: f64,
    /// |I - |A|^2|; zero for sets with the consistent phase property.
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CppReport {
    pub records: Vec<CppRecord>,
    pub warnings: Vec<String>,
    pub half_width: f64,
    pub averaging_span: f64,
}

/// Compares the two intensity estimators at each frequency: atom extraction
/// from the autocorrelation against the squared amplitude.
pub fn cpp_check(set: &PointSet, ys: &[f64], n: f64, l: f64) -> Result<CppReport> {
    let acf = autocorrelation(set, n, BIN_TOLERANCE, l)?;
    let mut records = Vec::with_capacity(ys.len());
    for &y in ys {
        let intensity = bragg_intensity(&acf, y, l)?;
        let amp = amplitude(set, y, n)?;
        let amplitude_sq = amp.norm_sqr();
        records.push(CppRecord {
            frequency: y,
            intensity,
            amplitude_sq,
            discrepancy: (intensity - amplitude_sq).abs(),
        });
    }
    Ok(CppReport {
        records,
        warnings: acf.warnings().to_vec(),
        half_width: n,
        averaging_span: l,
    })
}

/// One diffraction peak: frequency, complex amplitude, extracted intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPeak {
    pub frequency: f64,
    pub amplitude: Complex64,
    pub intensity: f64,
}

/// A list of diffraction peaks with the sample half-width and a description
/// of how they were found.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub peaks: Vec<SpectralPeak>,
    pub half_width: f64,
    pub method: String,
}

impl Spectrum {
    /// The k peaks of largest |amplitude|, re-sorted by frequency.
    pub fn top_k(&self, k: usize) -> Spectrum {
        let mut peaks = self.peaks.clone();
        peaks.sort_by(|a, b| {
            b.amplitude
                .norm()
                .partial_cmp(&a.amplitude.norm())
                .expect("finite amplitudes")
        });
        peaks.truncate(k);
        peaks.sort_by(|a, b| a.frequency.partial_cmp(&b.frequency).expect("finite frequencies"));
        Spectrum {
            peaks,
            half_width: self.half_width,
            method: format!("{}; top {k} by |amplitude|", self.method),
        }
    }

    /// Adds the mirror peak (-y, conj A) for every strictly positive
    /// frequency, turning a one-sided scan into a conjugate-symmetric list.
    pub fn symmetrized(&self) -> Spectrum {
        let mut peaks = Vec::with_capacity(2 * self.peaks.len());
        for p in &self.peaks {
            peaks.push(p.clone());
            if p.frequency > 1e-9 {
                peaks.push(SpectralPeak {
                    frequency: -p.frequency,
                    amplitude: p.amplitude.conj(),
                    intensity: p.intensity,
                });
            }
        }
        peaks.sort_by(|a, b| a.frequency.partial_cmp(&b.frequency).expect("finite frequencies"));
        Spectrum {
            peaks,
            half_width: self.half_width,
            method: format!("{}; symmetrized", self.method),
        }
    }

    /// CSV: metadata comments, `y,re_A,im_A,intensity` header, one row per
    /// peak.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# spectrum n {}", fmt_f64(self.half_width))?;
        writeln!(w, "# method {}", self.method)?;
        writeln!(w, "y,re_A,im_A,intensity")?;
        for p in &self.peaks {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_f64(p.frequency),
                fmt_f64(p.amplitude.re),
                fmt_f64(p.amplitude.im),
                fmt_f64(p.intensity)
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut half_width = None;
        let mut method = String::new();
        let mut peaks = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line == "y,re_A,im_A,intensity" {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(m) = rest.strip_prefix("spectrum n") {
                    half_width = Some(m.trim().parse::<f64>().map_err(|e| {
                        Error::Parse(format!("line {}: {e}", idx + 1))
                    })?);
                } else if let Some(m) = rest.strip_prefix("method") {
                    method = m.trim().to_string();
                }
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(Error::Parse(format!(
                    "line {}: expected y,re_A,im_A,intensity",
                    idx + 1
                )));
            }
            let num = |s: &str| -> Result<f64> {
                s.trim().parse().map_err(|e| Error::Parse(format!("line {}: {e}", idx + 1)))
            };
            peaks.push(SpectralPeak {
                frequency: num(cols[0])?,
                amplitude: Complex64::new(num(cols[1])?, num(cols[2])?),
                intensity: num(cols[3])?,
            });
        }
        Ok(Spectrum {
            peaks,
            half_width: half_width.ok_or_else(|| Error::Parse("missing spectrum header".into()))?,
            method,
        })
    }

    pub fn read_csv_str(s: &str) -> Result<Self> {
        Self::read_csv(s.as_bytes())
    }
}

/// Maximizes |amplitude| inside `bracket` at sample half-width n: a fine
/// sub-scan at roughly quarter-lobe spacing (the main lobe width is about
/// 1/2n) picks the best neighbourhood, then golden-section search finishes.
/// Returns the refined frequency and its amplitude.
pub fn refine_peak(set: &PointSet, bracket: (f64, f64), n: f64) -> Result<(f64, Complex64)> {
    let (lo, hi) = bracket;
    if !(lo < hi) {
        return Err(invalid("empty refinement bracket"));
    }
    if !set.covers(-n, n) {
        return Err(coverage("sample window does not cover the averaging window"));
    }
    let pts: Vec<f64> = set.points_in(-n, n).collect();
    let two_n = 2.0 * n;
    let cells = ((hi - lo) * 4.0 * n).ceil().clamp(8.0, 512.0) as usize;
    let step = (hi - lo) / cells as f64;
    let mut best_i = 0;
    let mut best = -1.0f64;
    for i in 0..=cells {
        let y = lo + i as f64 * step;
        let v = amplitude_of_points(&pts, y, two_n).norm();
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let sub_lo = lo + step * best_i.saturating_sub(1) as f64;
    let sub_hi = (lo + step * (best_i + 1) as f64).min(hi);
    let (y_star, _) = golden_section_max(
        |y| amplitude_of_points(&pts, y, two_n).norm(),
        sub_lo,
        sub_hi,
        1e-9,
    );
    Ok((y_star, amplitude_of_points(&pts, y_star, two_n)))
}

/// Grid scan of |amplitude| over `y_range`: local maxima above half the
/// threshold are refined with [`refine_peak`] over one grid step on each
/// side, and refined peaks with |A| >= threshold are kept. Each kept peak
/// also records its atom-extraction intensity over the difference span
/// min([`ACF_SPAN`], n).
///
/// The grid only sees peaks whose main lobe (width about 1/2n) comes close
/// to a grid point; for dense point sets scan first at moderate n, then
/// chase individual peaks to larger n with [`refine_peak`].
pub fn peak_scan(
    set: &PointSet,
    y_range: (f64, f64),
    y_step: f64,
    n: f64,
    threshold: f64,
) -> Result<Spectrum> {
    peak_scan_threaded(set, y_range, y_step, n, threshold, 1)
}

/// [`peak_scan`] with the magnitude pass split over `threads` workers.
/// Chunks are disjoint index ranges of the frequency grid and every
/// frequency is evaluated with the same arithmetic as the sequential path,
/// so the output is bit-identical for every thread count.
pub fn peak_scan_threaded(
    set: &PointSet,
    y_range: (f64, f64),
    y_step: f64,
    n: f64,
    threshold: f64,
    threads: usize,
) -> Result<Spectrum> {
    let (lo, hi) = y_range;
    if threads == 0 {
        return Err(invalid("thread count must be at least 1"));
    }
    if !(y_step > 0.0) || !(lo <= hi) {
        return Err(invalid("bad frequency range or step"));
    }
    if !(threshold > 0.0) {
        return Err(invalid("threshold must be positive"));
    }
    let cells = ((hi - lo) / y_step).ceil();
    if cells > 1e7 {
        return Err(invalid("frequency grid enumerates more than 1e7 points"));
    }
    if !set.covers(-n, n) {
        return Err(coverage("sample window does not cover the averaging window"));
    }
    let pts: Vec<f64> = set.points_in(-n, n).collect();
    let two_n = 2.0 * n;
    let count = cells as usize + 1;
    let mag_at = |i: usize| {
        let y = (i as f64).mul_add(y_step, lo).min(hi);
        amplitude_of_points(&pts, y, two_n).norm()
    };
    let mags: Vec<f64> = if threads == 1 || count < 2 * threads {
        (0..count).map(mag_at).collect()
    } else {
        let chunk = count.div_ceil(threads);
        let mut mags = vec![0.0; count];
        std::thread::scope(|scope| {
            for (c, slice) in mags.chunks_mut(chunk).enumerate() {
                let mag_at = &mag_at;
                scope.spawn(move || {
                    for (j, m) in slice.iter_mut().enumerate() {
                        *m = mag_at(c * chunk + j);
                    }
                });
            }
        });
        mags
    };
    let prefilter = 0.5 * threshold;
    let mut candidates = Vec::new();
    for i in 0..count {
        if mags[i] < prefilter {
            continue;
        }
        let left_ok = i == 0 || mags[i] >= mags[i - 1];
        let right_ok = i + 1 == count || mags[i] >= mags[i + 1];
        if left_ok && right_ok {
            candidates.push(i);
        }
    }
    let mut peaks: Vec<SpectralPeak> = Vec::new();
    let l = ACF_SPAN.min(n);
    let acf = autocorrelation(set, n, BIN_TOLERANCE, l)?;
    for i in candidates {
        let y = (i as f64).mul_add(y_step, lo).min(hi);
        let bracket = ((y - y_step).max(lo), (y + y_step).min(hi));
        let (y_star, amp) = refine_peak(set, bracket, n)?;
        if amp.norm() < threshold {
            continue;
        }
        if peaks.iter().any(|p| (p.frequency - y_star).abs() <= 1e-9) {
            continue;
        }
        let intensity = bragg_intensity(&acf, y_star, l)?;
        peaks.push(SpectralPeak { frequency: y_star, amplitude: amp, intensity });
    }
    peaks.sort_by(|a, b| a.frequency.partial_cmp(&b.frequency).expect("finite frequencies"));
    Ok(Spectrum {
        peaks,
        half_width: n,
        method: format!(
            "grid scan step {} threshold {} acf span {}",
            fmt_f64(y_step),
            fmt_f64(threshold),
            fmt_f64(l)
        ),
    })
}

/// Amplitude estimate at one (half-width, center) cell of the stability
/// probe.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityEstimate {
    pub half_width: f64,
    pub center: f64,
    pub amplitude: Complex64,
}

/// Amplitude estimates across averaging half-widths and window centers.
/// Both spreads compare |amplitude|: across half-widths for a fixed center
/// (does the limit exist?), and across centers for a fixed half-width (is
/// the limit homogeneous?).
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub frequency: f64,
    pub estimates: Vec<StabilityEstimate>,
    pub spread_over_half_widths: f64,
    pub spread_over_centers: f64,
}

pub fn amplitude_stability(
    set: &PointSet,
    y: f64,
    half_widths: &[f64],
    centers: &[f64],
) -> Result<StabilityReport> {
    if half_widths.is_empty() || centers.is_empty() {
        return Err(invalid("need at least one half-width and one center"));
    }
    let mut estimates = Vec::with_capacity(half_widths.len() * centers.len());
    for &c in centers {
        for &n in half_widths {
            estimates.push(StabilityEstimate {
                half_width: n,
                center: c,
                amplitude: amplitude_in(set, y, c, n)?,
            });
        }
    }
    let spread = |same_cell: &dyn Fn(&StabilityEstimate, &StabilityEstimate) -> bool| -> f64 {
        let mut worst = 0.0f64;
        for e in &estimates {
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for other in &estimates {
                if same_cell(e, other) {
                    min = min.min(other.amplitude.norm());
                    max = max.max(other.amplitude.norm());
                }
            }
            worst = worst.max(max - min);
        }
        worst
    };
    let spread_over_half_widths = spread(&|a, b| a.center == b.center);
    let spread_over_centers = spread(&|a, b| a.half_width == b.half_width);
    Ok(StabilityReport { frequency: y, estimates, spread_over_half_widths, spread_over_centers })
}

/// Fourier-Bohr partial series of the comb convolution: the polynomial with
/// one term A_y phihat(y) e^(2 pi i y x) per peak, tabulated on `grid`.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub function: SampledFunction,
    pub polynomial: TrigPolynomial,
    /// Largest |imaginary part| over the grid; near zero when the peak list
    /// is conjugate-symmetric.
    pub max_imag: f64,
}

pub fn fourier_bohr_reconstruction(
    phi: &TestFunction,
    peaks: &Spectrum,
    grid: Grid,
) -> Result<Reconstruction> {
    if peaks.peaks.is_empty() {
        return Err(invalid("peak list is empty"));
    }
    let terms: Vec<(f64, Complex64)> = peaks
        .peaks
        .iter()
        .map(|p| (p.frequency, p.amplitude * phi.transform(p.frequency)))
        .collect();
    let polynomial = TrigPolynomial::new(terms)?;
    let (function, max_imag) = polynomial.sample(grid);
    Ok(Reconstruction { function, polynomial, max_imag })
}

/// Mean almost-periodicity certificate: builds N_phi on a grid wide enough
/// for every candidate translate, then runs the Besicovitch almost-period
/// test over the candidate list. The scan range in the report spans the
/// candidate extremes.
pub fn mean_ap_certificate(
    set: &PointSet,
    phi: &TestFunction,
    candidates: &[f64],
    epsilon: f64,
    n: f64,
    grid_step: f64,
) -> Result<AlmostPeriodReport> {
    if candidates.is_empty() {
        return Err(invalid("candidate list is empty"));
    }
    if !(n > 0.0) || !(grid_step > 0.0) {
        return Err(invalid("half-width and grid step must be positive"));
    }
    let t_abs = candidates.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    if !t_abs.is_finite() {
        return Err(invalid("candidates must be finite"));
    }
    let pad = t_abs + grid_step;
    let grid = Grid::from_range(-n - pad, n + pad, grid_step)?;
    let f = crate::apfunctions::comb_convolve(set, phi, grid)?;
    let lo = candidates.iter().fold(f64::INFINITY, |m, t| m.min(*t));
    let hi = candidates.iter().fold(f64::NEG_INFINITY, |m, t| m.max(*t));
    scan_almost_periods_at(
        &f,
        epsilon,
        SeminormKind::Besicovitch { half_width: n },
        candidates,
        (lo, hi),
    )
}

/// Frequencies (m + n phi)/sqrt5 with |m| <= m_max, |n| <= n_max inside
/// `y_range`: the candidate positions of the Fibonacci chain's Bragg peaks.
pub fn fibonacci_peak_candidates(m_max: i64, n_max: i64, y_range: (f64, f64)) -> Vec<f64> {
    let mut out = Vec::new();
    for m in -m_max..=m_max {
        for n in -n_max..=n_max {
            let y = (m as f64).mul_add(1.0 / SQRT5, n as f64 * (PHI / SQRT5));
            if y >= y_range.0 && y <= y_range.1 {
                out.push(y);
            }
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite frequencies"));
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-9);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointsets::{
        digit_parity_points, fibonacci_model_set, integer_lattice, shifted_halves,
        squarefree_points, HALF_SHIFT,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lattice_autocorrelation_has_exact_triangular_counts() {
        let lat = integer_lattice(1000);
        let acf = autocorrelation(&lat, 1000.0, BIN_TOLERANCE, 50.0).unwrap();
        assert_eq!(acf.entries().len(), 101);
        assert!(acf.warnings().is_empty());
        for k in -50i64..=50 {
            let expect = (2001 - k.abs()) as f64 / 2000.0;
            let got = acf.eta(k as f64);
            assert!((got - expect).abs() < 1e-12, "k = {k}: {got} vs {expect}");
        }
        assert_eq!(acf.eta(0.5), 0.0);
    }

    #[test]
    fn single_point_autocorrelation() {
        let set = PointSet::new(vec![0.0], (-10.0, 10.0)).unwrap();
        let acf = autocorrelation(&set, 10.0, BIN_TOLERANCE, 5.0).unwrap();
        assert_eq!(acf.entries().len(), 1);
        assert!((acf.eta(0.0) - 1.0 / 20.0).abs() < 1e-15);
    }

    #[test]
    fn shifted_halves_autocorrelation_splits_lattice_and_cross_lines() {
        let set = shifted_halves(10_000);
        let acf = autocorrelation(&set, 10_000.0, BIN_TOLERANCE, 50.0).unwrap();
        for k in 1..=50 {
            let got = acf.eta(k as f64);
            assert!((got - 1.0).abs() <= 0.02, "eta({k}) = {got}");
        }
        // Cross-branch differences carry vanishing pair density.
        for m in 0..50 {
            let z = HALF_SHIFT + m as f64;
            let got = acf.eta(z);
            assert!(got <= 0.01, "eta({z}) = {got}");
            assert!((acf.eta(-z) - got).abs() < 1e-15);
        }
    }

    #[test]
    fn crowded_bins_warn() {
        let set = PointSet::new(vec![0.0, 1.0, 2.0 + 1.5e-9, 4.0], (-4.0, 4.0)).unwrap();
        let acf = autocorrelation(&set, 4.0, BIN_TOLERANCE, 4.0).unwrap();
        // Differences 2 (from 2+eps to 4) and 2+1.5e-9 (from 0) sit closer
        // than twice the bin tolerance.
        assert!(!acf.warnings().is_empty());
    }

    #[test]
    fn autocorrelation_rejects_bad_windows() {
        let lat = integer_lattice(10);
        assert!(matches!(
            autocorrelation(&lat, 50.0, BIN_TOLERANCE, 10.0),
            Err(Error::Coverage(_))
        ));
        assert!(autocorrelation(&lat, 10.0, BIN_TOLERANCE, 30.0).is_err());
    }

    #[test]
    fn amplitude_at_zero_is_the_density() {
        let lat = integer_lattice(1000);
        let a = amplitude(&lat, 0.0, 1000.0).unwrap();
        assert!((a.re - 2001.0 / 2000.0).abs() < 1e-12);
        assert!(a.im.abs() < 1e-15);
        let fib = fibonacci_model_set((-10_000.0, 10_000.0)).unwrap();
        let a = amplitude(&fib, 0.0, 10_000.0).unwrap();
        assert!((a.re - PHI / SQRT5).abs() < 1e-3, "got {}", a.re);
    }

    #[test]
    fn shifted_halves_amplitude_matches_the_direct_sum_form() {
        // Two interleaved half-lattices: A_m = (1 + e^(-2 pi i m s))/2 with
        // s = 1/(2 sqrt 2), up to O(1/n) boundary terms.
        let set = shifted_halves(10_000);
        let n = 10_000.0;
        for m in 1..=3 {
            let a = amplitude(&set, m as f64, n).unwrap();
            let oracle = (Complex64::new(1.0, 0.0)
                + cis(-std::f64::consts::TAU * m as f64 * HALF_SHIFT))
                / 2.0;
            assert!((a - oracle).norm() < 1e-3, "m = {m}: {a} vs {oracle}");
        }
    }

    #[test]
    fn amplitude_conjugate_symmetry_and_bound() {
        let fib = fibonacci_model_set((-2000.0, 2000.0)).unwrap();
        let n = 2000.0;
        let count = fib.count_in(-n, n) as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let y: f64 = rng.gen_range(-5.0..5.0);
            let a = amplitude(&fib, y, n).unwrap();
            let b = amplitude(&fib, -y, n).unwrap();
            assert!((b - a.conj()).norm() < 1e-12);
            assert!(a.norm() <= count / (2.0 * n) + 1e-12);
        }
    }

    #[test]
    fn translation_moves_the_window_not_the_modulus() {
        let fib = fibonacci_model_set((-10_010.0, 10_010.0)).unwrap();
        let n = 10_000.0;
        let y = 1.0 / SQRT5;
        let base = amplitude(&fib, y, n).unwrap().norm();
        for &t in &[1.0, 2.5, 5.0] {
            let moved = amplitude(&fib.translate(t), y, n).unwrap().norm();
            assert!((moved - base).abs() < 0.01, "t = {t}: {moved} vs {base}");
        }
    }

    #[test]
    fn lattice_bragg_intensities() {
        let lat = integer_lattice(1000);
        let acf = autocorrelation(&lat, 1000.0, BIN_TOLERANCE, 50.0).unwrap();
        for m in 0..=2 {
            let i = bragg_intensity(&acf, m as f64, 50.0).unwrap();
            assert!((i - 1.0).abs() <= 0.02, "I({m}) = {i}");
        }
        let off = bragg_intensity(&acf, 0.5, 50.0).unwrap();
        assert!(off <= 0.02, "I(0.5) = {off}");
        // Corrected atom extraction removes the triangular bias: without
        // the correction the lattice would read 1 - L/(4n) instead.
        let raw = bragg_intensity_raw(&acf, 0.5, 50.0).unwrap();
        assert!(raw.abs() <= 0.02);
    }

    #[test]
    fn intensity_estimates_stay_above_finite_size_noise_floor() {
        // Truncating the difference span rings like a Dirichlet kernel, so
        // within ~0.03 of a strong Bragg position the raw estimate dips to
        // about -0.22 times the peak intensity no matter the span. Away
        // from the strong positions the finite-size negativity stays within
        // tolerance once the span is wide enough.
        let fib = fibonacci_model_set((-2000.0, 2000.0)).unwrap();
        let l = 200.0;
        let acf = autocorrelation(&fib, 2000.0, BIN_TOLERANCE, l).unwrap();
        let mut strong = Vec::new();
        for m in -20i64..=20 {
            for k in -20i64..=20 {
                let y = (m as f64 + k as f64 * PHI) / SQRT5;
                let star = (m as f64 + k as f64 * crate::pointsets::PHI_CONJ).abs();
                if (-0.1..=3.1).contains(&y) && star < 1.5 {
                    strong.push(y);
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 200 {
            let y: f64 = rng.gen_range(0.0..3.0);
            let near = strong.iter().any(|c| (c - y).abs() <= 0.03);
            if near {
                continue;
            }
            let raw = bragg_intensity_raw(&acf, y, l).unwrap();
            assert!(raw >= -0.02, "raw intensity {raw} at y = {y}");
            checked += 1;
        }
    }

    #[test]
    fn wiener_identity_on_three_generators() {
        let sets = [
            fibonacci_model_set((-1400.0, 1400.0)).unwrap(),
            squarefree_points(1700),
            shifted_halves(1000),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for set in &sets {
            let (wlo, whi) = set.window();
            let n = wlo.abs().min(whi).floor();
            let acf = autocorrelation(set, n, BIN_TOLERANCE, 2.0 * n).unwrap();
            let pts: Vec<f64> = set.points_in(-n, n).collect();
            let count = pts.len() as f64;
            for _ in 0..20 {
                let y: f64 = rng.gen_range(-4.0..4.0);
                let periodogram = amplitude_of_points(&pts, y, 1.0).norm_sqr() / (2.0 * n);
                let mut re = Kahan::new();
                for &(z, eta) in acf.entries() {
                    re.add(eta * (std::f64::consts::TAU * z * y).cos());
                }
                let pair_sum = re.value();
                assert!(
                    (periodogram - pair_sum).abs() <= 1e-6 * count,
                    "y = {y}: {periodogram} vs {pair_sum}"
                );
            }
        }
    }

    #[test]
    fn cpp_holds_on_the_lattice_and_fails_on_shifted_halves() {
        let lat = integer_lattice(1000);
        let report = cpp_check(&lat, &[0.0, 1.0, 2.0], 1000.0, 50.0).unwrap();
        for r in &report.records {
            assert!(r.discrepancy <= 0.03, "lattice discrepancy {} at {}", r.discrepancy, r.frequency);
        }
        let set = shifted_halves(10_000);
        let report = cpp_check(&set, &[1.0], 10_000.0, 50.0).unwrap();
        let r = &report.records[0];
        assert!((r.intensity - 1.0).abs() <= 0.02, "I(1) = {}", r.intensity);
        let oracle = (std::f64::consts::PI * HALF_SHIFT).cos().powi(2);
        assert!((r.amplitude_sq - oracle).abs() < 1e-3, "got {}", r.amplitude_sq);
        assert!(r.discrepancy >= 0.3);
    }

    #[test]
    fn lattice_peak_scan_finds_the_integers() {
        let lat = integer_lattice(1000);
        let spectrum = peak_scan(&lat, (-0.5, 3.5), 1e-3, 1000.0, 0.5).unwrap();
        assert_eq!(spectrum.peaks.len(), 4);
        for (p, expect) in spectrum.peaks.iter().zip([0.0, 1.0, 2.0, 3.0]) {
            assert!((p.frequency - expect).abs() < 1e-4, "{} vs {expect}", p.frequency);
            assert!((p.amplitude.norm() - 1.0).abs() < 0.01);
            assert!((p.intensity - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn threaded_scan_is_bit_identical_to_sequential() {
        let fib = fibonacci_model_set((-400.0, 400.0)).unwrap();
        let seq = peak_scan(&fib, (0.1, 2.1), 2e-3, 400.0, 0.2).unwrap();
        for threads in [2, 3, 7] {
            let par = peak_scan_threaded(&fib, (0.1, 2.1), 2e-3, 400.0, 0.2, threads).unwrap();
            assert_eq!(par.peaks.len(), seq.peaks.len());
            for (a, b) in par.peaks.iter().zip(&seq.peaks) {
                assert_eq!(a.frequency.to_bits(), b.frequency.to_bits());
                assert_eq!(a.amplitude, b.amplitude);
                assert_eq!(a.intensity.to_bits(), b.intensity.to_bits());
            }
        }
        assert!(peak_scan_threaded(&fib, (0.1, 2.1), 2e-3, 400.0, 0.2, 0).is_err());
    }

    #[test]
    fn fibonacci_peaks_land_on_projected_module_positions() {
        let fib = fibonacci_model_set((-2000.0, 2000.0)).unwrap();
        let spectrum = peak_scan(&fib, (0.0, 3.0), 1e-3, 2000.0, 0.1).unwrap();
        assert!(!spectrum.peaks.is_empty());
        let candidates = fibonacci_peak_candidates(12, 12, (-0.1, 3.1));
        for p in &spectrum.peaks {
            let near = candidates.iter().any(|c| (c - p.frequency).abs() < 1e-3);
            assert!(near, "stray peak at {}", p.frequency);
        }
    }

    #[test]
    fn multiscale_refinement_sharpens_a_fibonacci_peak() {
        // Strongest nonzero peak: frequency (1 + phi)/sqrt5.
        let fib = fibonacci_model_set((-10_000.0, 10_000.0)).unwrap();
        let target = (1.0 + PHI) / SQRT5;
        let mut y = target + 4e-4;
        let mut bracket_half = 1e-3;
        for &n in &[2000.0, 10_000.0] {
            let (refined, _) = refine_peak(&fib, (y - bracket_half, y + bracket_half), n).unwrap();
            y = refined;
            bracket_half = 1.0 / n;
        }
        assert!((y - target).abs() < 2e-5, "refined to {y}, target {target}");
        let amp = amplitude(&fib, y, 10_000.0).unwrap();
        assert!(amp.norm() > 0.5, "peak amplitude {}", amp.norm());
    }

    #[test]
    fn stability_is_flat_for_the_lattice_and_oscillates_for_digit_parity() {
        let lat = integer_lattice(2000);
        let report =
            amplitude_stability(&lat, 1.0, &[500.0, 1000.0], &[-100.0, 0.0, 100.0]).unwrap();
        assert!(report.spread_over_half_widths <= 0.01);
        assert!(report.spread_over_centers <= 0.01);

        let n1 = 4f64.powi(4);
        let n2 = 2.0 * n1;
        let n3 = 4f64.powi(5);
        let n4 = 2.0 * n3;
        let set = digit_parity_points(4u64.pow(5) * 2);
        let report = amplitude_stability(&set, 0.0, &[n1, n2, n3, n4], &[0.0]).unwrap();
        // Exact block counts: A_0 = 1/3 + (2/3) 4^-k at N = 4^k and
        // 2/3 - 1/(6 4^k) at N = 2*4^k.
        assert!(report.spread_over_half_widths >= 0.25);
        for e in &report.estimates {
            let third = (e.amplitude.norm() - 1.0 / 3.0).abs() < 0.02;
            let two_thirds = (e.amplitude.norm() - 2.0 / 3.0).abs() < 0.02;
            assert!(third || two_thirds, "estimate {} at n = {}", e.amplitude.norm(), e.half_width);
        }
    }

    #[test]
    fn reconstruction_with_only_the_zero_peak_is_constant() {
        let phi = TestFunction::tent(0.4, 1.0).unwrap();
        let spectrum = Spectrum {
            peaks: vec![SpectralPeak {
                frequency: 0.0,
                amplitude: Complex64::new(0.7236, 0.0),
                intensity: 0.5236,
            }],
            half_width: 100.0,
            method: "manual".into(),
        };
        let grid = Grid::from_range(-5.0, 5.0, 0.1).unwrap();
        let rec = fourier_bohr_reconstruction(&phi, &spectrum, grid).unwrap();
        let expect = 0.7236 * 0.4;
        for &v in rec.function.values() {
            assert!((v - expect).abs() < 1e-12);
        }
        assert!(rec.max_imag < 1e-15);
    }

    #[test]
    fn lattice_reconstruction_matches_the_comb_within_the_spectral_tail() {
        let lat = integer_lattice(10_000);
        let n = 10_000.0;
        let phi = TestFunction::tent(0.4, 1.0).unwrap();
        let mut peaks = Vec::new();
        for m in -3i64..=3 {
            let a = amplitude(&lat, m as f64, n).unwrap();
            peaks.push(SpectralPeak { frequency: m as f64, amplitude: a, intensity: a.norm_sqr() });
        }
        let spectrum = Spectrum { peaks, half_width: n, method: "manual".into() };
        let grid = Grid::from_range(-10.0, 10.0, 0.01).unwrap();
        let rec = fourier_bohr_reconstruction(&phi, &spectrum, grid).unwrap();
        let comb = crate::apfunctions::comb_convolve(&lat, &phi, grid).unwrap();
        let sup = rec
            .function
            .values()
            .iter()
            .zip(comb.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        // Dropped coefficients: |phihat(m)| for |m| >= 4, plus an integral
        // bound for the tail beyond the summation cutoff.
        let mut tail = 0.0;
        for m in 4..=1000 {
            tail += 2.0 * phi.transform(m as f64).norm();
        }
        tail += 0.8 * 0.4 / (0.4 * std::f64::consts::PI).powi(2) / 1000.0;
        assert!(sup <= tail + 1e-3, "sup {sup} vs tail bound {tail}");
        assert!(rec.max_imag < 1e-9, "imaginary residue {}", rec.max_imag);
    }

    #[test]
    fn mean_ap_certificate_accepts_lattice_translates() {
        let lat = integer_lattice(600);
        let phi = TestFunction::tent(0.4, 1.0).unwrap();
        let candidates: Vec<f64> = (1..=20).map(|k| k as f64).collect();
        let report = mean_ap_certificate(&lat, &phi, &candidates, 0.1, 500.0, 0.01).unwrap();
        assert_eq!(report.periods.len(), 20);
        assert!((report.max_gap - 1.0).abs() < 1e-9);
    }

    #[test]
    fn spectrum_top_k_and_symmetrized() {
        let peaks = vec![
            SpectralPeak { frequency: 0.0, amplitude: Complex64::new(0.7, 0.0), intensity: 0.49 },
            SpectralPeak { frequency: 1.2, amplitude: Complex64::new(0.1, 0.2), intensity: 0.05 },
            SpectralPeak { frequency: 2.4, amplitude: Complex64::new(0.4, 0.0), intensity: 0.16 },
        ];
        let s = Spectrum { peaks, half_width: 100.0, method: "manual".into() };
        let top = s.top_k(2);
        assert_eq!(top.peaks.len(), 2);
        assert_eq!(top.peaks[0].frequency, 0.0);
        assert_eq!(top.peaks[1].frequency, 2.4);
        let sym = s.symmetrized();
        assert_eq!(sym.peaks.len(), 5);
        assert_eq!(sym.peaks[0].frequency, -2.4);
        assert!((sym.peaks[1].amplitude - Complex64::new(0.1, -0.2)).norm() < 1e-15);
    }

    #[test]
    fn autocorrelation_csv_round_trip() {
        let lat = integer_lattice(100);
        let acf = autocorrelation(&lat, 100.0, BIN_TOLERANCE, 10.0).unwrap();
        let text = acf.to_csv();
        let parsed = Autocorrelation::read_csv_str(&text).unwrap();
        assert_eq!(parsed, acf);
        assert_eq!(parsed.to_csv(), text);
        assert!(Autocorrelation::read_csv_str("z,eta\n1,0.5\n").is_err());
    }

    #[test]
    fn spectrum_csv_round_trip() {
        let lat = integer_lattice(500);
        let spectrum = peak_scan(&lat, (-0.5, 1.5), 1e-3, 500.0, 0.5).unwrap();
        let text = spectrum.to_csv();
        let parsed = Spectrum::read_csv_str(&text).unwrap();
        assert_eq!(parsed, spectrum);
        assert_eq!(parsed.to_csv(), text);
        assert!(Spectrum::read_csv_str("y,re_A,im_A,intensity\n0,1,0,1\n").is_err());
    }

    #[test]
    fn fibonacci_candidates_are_sorted_and_within_range() {
        let ys = fibonacci_peak_candidates(8, 8, (0.0, 3.0));
        assert!(!ys.is_empty());
        assert!(ys.windows(2).all(|w| w[1] > w[0]));
        assert!(ys.iter().all(|&y| (0.0..=3.0).contains(&y)));
        // The projected module contains 1/sqrt5 and phi/sqrt5.
        assert!(ys.iter().any(|&y| (y - 1.0 / SQRT5).abs() < 1e-12));
        assert!(ys.iter().any(|&y| (y - PHI / SQRT5).abs() < 1e-12));
    }
}
