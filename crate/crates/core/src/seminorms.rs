//! Sup, Besicovitch, and Weyl seminorm estimators, translate-difference
//! seminorms, almost-period scans with local refinement, and relative
//! denseness statistics.
//!
//! The Besicovitch and Weyl seminorms are limits over growing averaging
//! windows; everything here is a finite-window estimator and the window
//! half-width always travels with the result (inside [`SeminormKind`]).

use std::io::{BufRead, Write};

use crate::apfunctions::{SampledFunction, TrigPolynomial};
use crate::error::{coverage, invalid, Error, Result};
use crate::numeric::{fmt_f64, golden_section_min, Kahan};

/// Default translate grid step for the Weyl estimator.
pub const WEYL_TRANSLATE_STEP: f64 = 0.1;
/// Golden-section refinement tolerance for almost-period positions.
pub const REFINE_TOL: f64 = 1e-6;

/// Translates within this relative distance of a whole number of grid steps
/// are treated as grid-aligned and applied as exact index shifts.
const ALIGN_TOL: f64 = 1e-9;
const COVER_SLACK: f64 = 1e-9;

/// Which seminorm a value was estimated under.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeminormKind {
    /// max |f| over the whole grid.
    Sup,
    /// (1/2n) integral of |f| over [-n, n], n = half_width.
    Besicovitch { half_width: f64 },
    /// max over translates t in {0, step, ..., max} of the Besicovitch
    /// average over the shifted window [-n - t, n - t].
    Weyl { half_width: f64, translate_step: f64, translate_max: f64 },
}

impl SeminormKind {
    pub fn sup() -> Self {
        Self::Sup
    }

    pub fn besicovitch(half_width: f64) -> Self {
        Self::Besicovitch { half_width }
    }

    /// Weyl kind with the default translate grid: step
    /// [`WEYL_TRANSLATE_STEP`] over [0, 2 half_width].
    pub fn weyl(half_width: f64) -> Self {
        Self::Weyl {
            half_width,
            translate_step: WEYL_TRANSLATE_STEP,
            translate_max: 2.0 * half_width,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::Sup => Ok(()),
            Self::Besicovitch { half_width } => {
                if half_width > 0.0 && half_width.is_finite() {
                    Ok(())
                } else {
                    Err(invalid("averaging half-width must be positive"))
                }
            }
            Self::Weyl { half_width, translate_step, translate_max } => {
                if !(half_width > 0.0)
                    || !half_width.is_finite()
                    || !(translate_step > 0.0)
                    || !translate_step.is_finite()
                    || !(translate_max >= 0.0)
                    || !translate_max.is_finite()
                {
                    return Err(invalid("bad Weyl window or translate grid"));
                }
                if translate_max / translate_step > 1e8 {
                    return Err(invalid("Weyl translate grid enumerates more than 1e8 points"));
                }
                Ok(())
            }
        }
    }

    /// One-line form used in report files: `sup`, `besicovitch <n>` or
    /// `weyl <n> <step> <max>`.
    pub fn to_text(&self) -> String {
        match *self {
            Self::Sup => "sup".to_string(),
            Self::Besicovitch { half_width } => format!("besicovitch {}", fmt_f64(half_width)),
            Self::Weyl { half_width, translate_step, translate_max } => format!(
                "weyl {} {} {}",
                fmt_f64(half_width),
                fmt_f64(translate_step),
                fmt_f64(translate_max)
            ),
        }
    }

    pub fn parse_text(s: &str) -> Result<Self> {
        let toks: Vec<&str> = s.split_whitespace().collect();
        let num = |t: &str| -> Result<f64> {
            t.parse().map_err(|e| Error::Parse(format!("bad seminorm kind number: {e}")))
        };
        let kind = match toks.as_slice() {
            ["sup"] => Self::Sup,
            ["besicovitch", n] => Self::Besicovitch { half_width: num(n)? },
            ["weyl", n, step, max] => Self::Weyl {
                half_width: num(n)?,
                translate_step: num(step)?,
                translate_max: num(max)?,
            },
            _ => return Err(Error::Parse(format!("unknown seminorm kind `{s}`"))),
        };
        kind.validate()?;
        Ok(kind)
    }
}

/// Prefix trapezoid integral of |f|: F(x) = integral of the linear
/// interpolant of the node values |f(x_i)| from the grid start to x.
/// Windowed averages for the Besicovitch and Weyl estimators come from two
/// profile lookups, so a translate scan costs O(1) per window.
struct AbsProfile<'a> {
    f: &'a SampledFunction,
    prefix: Vec<f64>,
}

impl<'a> AbsProfile<'a> {
    fn new(f: &'a SampledFunction) -> Self {
        let values = f.values();
        let step = f.grid().step();
        let mut prefix = Vec::with_capacity(values.len());
        let mut acc = Kahan::new();
        prefix.push(0.0);
        for pair in values.windows(2) {
            acc.add(0.5 * step * (pair[0].abs() + pair[1].abs()));
            prefix.push(acc.value());
        }
        Self { f, prefix }
    }

    /// F at an arbitrary point of the grid span.
    fn at(&self, x: f64) -> Result<f64> {
        let grid = self.f.grid();
        if x < grid.start() - COVER_SLACK {
            return Err(coverage(format!(
                "averaging window reaches {x}, left of the grid start {}",
                grid.start()
            )));
        }
        if x > grid.end() + COVER_SLACK {
            return Err(coverage(format!(
                "averaging window reaches {x}, right of the grid end {}",
                grid.end()
            )));
        }
        let last = grid.len() - 1;
        if last == 0 {
            return Ok(0.0);
        }
        let rel = ((x - grid.start()) / grid.step()).clamp(0.0, last as f64);
        let i = (rel as usize).min(last - 1);
        let values = self.f.values();
        let (g0, g1) = (values[i].abs(), values[i + 1].abs());
        let frac = rel - i as f64;
        let gx = g0 + (g1 - g0) * frac;
        Ok(self.prefix[i] + 0.5 * frac * grid.step() * (g0 + gx))
    }

    fn average(&self, lo: f64, hi: f64) -> Result<f64> {
        if !(hi > lo) {
            return Err(invalid(format!("bad averaging window [{lo}, {hi}]")));
        }
        Ok((self.at(hi)? - self.at(lo)?) / (hi - lo))
    }
}

/// Finite-window estimate of the chosen seminorm of `f`.
pub fn seminorm_estimate(f: &SampledFunction, kind: SeminormKind) -> Result<f64> {
    kind.validate()?;
    match kind {
        SeminormKind::Sup => Ok(f.values().iter().fold(0.0f64, |m, v| m.max(v.abs()))),
        SeminormKind::Besicovitch { half_width } => {
            AbsProfile::new(f).average(-half_width, half_width)
        }
        SeminormKind::Weyl { half_width, translate_step, translate_max } => {
            let profile = AbsProfile::new(f);
            let mut best = 0.0f64;
            let mut k = 0u64;
            loop {
                let t = k as f64 * translate_step;
                if t > translate_max + 1e-12 {
                    break;
                }
                best = best.max(profile.average(-half_width - t, half_width - t)?);
                k += 1;
            }
            Ok(best)
        }
    }
}

/// f - tau_t f on the overlap of the grid with its own t-shift. Grid-aligned
/// translates (within [`ALIGN_TOL`] steps of a whole index shift) subtract
/// samples directly; otherwise the shifted copy is interpolated.
fn difference_function(f: &SampledFunction, t: f64) -> Result<SampledFunction> {
    let grid = f.grid();
    let step = grid.step();
    let len = grid.len();
    let ratio = t / step;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= ALIGN_TOL && nearest.abs() < len as f64 {
        let k = nearest as i64;
        let (i0, i1) = if k >= 0 { (k as usize, len - 1) } else { (0, (len as i64 - 1 + k) as usize) };
        if i1 < i0 {
            return Err(invalid(format!("translate {t} leaves no grid overlap")));
        }
        let values = f.values();
        let diff: Vec<f64> = (i0..=i1).map(|i| values[i] - values[(i as i64 - k) as usize]).collect();
        let sub = crate::apfunctions::Grid::new(grid.x(i0), step, diff.len())?;
        return SampledFunction::new(sub, diff);
    }
    let trim_left = (t.max(0.0) / step - ALIGN_TOL).ceil().max(0.0) as usize;
    let trim_right = ((-t).max(0.0) / step - ALIGN_TOL).ceil().max(0.0) as usize;
    if trim_left + trim_right >= len {
        return Err(invalid(format!("translate {t} leaves no grid overlap")));
    }
    let i1 = len - 1 - trim_right;
    let mut diff = Vec::with_capacity(i1 - trim_left + 1);
    for i in trim_left..=i1 {
        let x = grid.x(i);
        diff.push(f.values()[i] - f.eval(x - t)?);
    }
    let sub = crate::apfunctions::Grid::new(grid.x(trim_left), step, diff.len())?;
    SampledFunction::new(sub, diff)
}

/// Estimate of ||f - tau_t f|| under `kind`. The grid must cover the
/// averaging window with margin |t|.
pub fn seminorm_of_difference(f: &SampledFunction, t: f64, kind: SeminormKind) -> Result<f64> {
    kind.validate()?;
    if !t.is_finite() {
        return Err(invalid("translate must be finite"));
    }
    let d = difference_function(f, t)?;
    seminorm_estimate(&d, kind)
}

/// Largest gap between consecutive elements of `sorted` inside `range`,
/// with the range end points as sentinels. Infinite when no element falls
/// inside the range.
pub fn max_gap(sorted: &[f64], range: (f64, f64)) -> f64 {
    let (lo, hi) = range;
    let mut prev = lo;
    let mut best = 0.0f64;
    let mut seen = false;
    for &s in sorted {
        if s < lo || s > hi {
            continue;
        }
        best = best.max(s - prev);
        prev = s;
        seen = true;
    }
    if !seen {
        return f64::INFINITY;
    }
    best.max(hi - prev)
}

/// Result of an almost-period search.
#[derive(Debug, Clone, PartialEq)]
pub struct AlmostPeriodReport {
    pub epsilon: f64,
    pub kind: SeminormKind,
    /// Translates t with ||f - tau_t f|| strictly below epsilon, sorted.
    pub periods: Vec<f64>,
    pub scan_range: (f64, f64),
    /// 0 when the scan ran over an explicit candidate list.
    pub scan_step: f64,
    /// Sentinel-based largest gap over the scan range; infinite when fewer
    /// than two periods were found.
    pub max_gap: f64,
}

fn report_gap(periods: &[f64], range: (f64, f64)) -> f64 {
    if periods.len() < 2 {
        f64::INFINITY
    } else {
        max_gap(periods, range)
    }
}

/// Grid scan for epsilon-almost periods: evaluates the difference seminorm
/// at every t = lo + k step in `scan_range`, keeps values strictly below
/// epsilon, and refines each run of hits by a golden-section minimum search
/// (tolerance [`REFINE_TOL`]) over the bracketing grid points.
pub fn scan_almost_periods(
    f: &SampledFunction,
    epsilon: f64,
    kind: SeminormKind,
    scan_range: (f64, f64),
    scan_step: f64,
) -> Result<AlmostPeriodReport> {
    kind.validate()?;
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(invalid("epsilon must be positive"));
    }
    if !(scan_step > 0.0) || !(scan_range.0 <= scan_range.1) {
        return Err(invalid("bad scan range or step"));
    }
    let (lo, hi) = scan_range;
    let cells = ((hi - lo) / scan_step * (1.0 + 1e-12)).floor();
    if cells > 1e8 {
        return Err(invalid("scan grid enumerates more than 1e8 points"));
    }
    let count = cells as usize + 1;
    let mut ts = Vec::with_capacity(count);
    let mut ds = Vec::with_capacity(count);
    for k in 0..count {
        let t = (k as f64).mul_add(scan_step, lo).min(hi);
        ts.push(t);
        ds.push(seminorm_of_difference(f, t, kind)?);
    }
    let mut periods: Vec<f64> = Vec::new();
    let mut run_start: Option<usize> = None;
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for i in 0..count {
        if ds[i] < epsilon {
            periods.push(ts[i]);
            if run_start.is_none() {
                run_start = Some(i);
            }
        } else if let Some(s) = run_start.take() {
            runs.push((s, i - 1));
        }
    }
    if let Some(s) = run_start {
        runs.push((s, count - 1));
    }
    // Refinement stays inside the evaluated grid span so coverage cannot
    // get worse than at the already-evaluated bracket ends.
    for (s, e) in runs {
        let bracket_lo = if s > 0 { ts[s - 1] } else { ts[0] };
        let bracket_hi = if e + 1 < count { ts[e + 1] } else { ts[count - 1] };
        if bracket_hi - bracket_lo < 2.0 * REFINE_TOL {
            continue;
        }
        let (t_min, d_min) = golden_section_min(
            |t| seminorm_of_difference(f, t, kind).unwrap_or(f64::INFINITY),
            bracket_lo,
            bracket_hi,
            REFINE_TOL,
        );
        if d_min < epsilon {
            periods.push(t_min);
        }
    }
    periods.sort_by(|a, b| a.partial_cmp(b).expect("finite translates"));
    periods.dedup_by(|a, b| (*a - *b).abs() <= 1e-9);
    let max_gap = report_gap(&periods, scan_range);
    Ok(AlmostPeriodReport { epsilon, kind, periods, scan_range, scan_step, max_gap })
}

/// Almost-period test over an explicit candidate list (no refinement).
/// Candidates outside `scan_range` are ignored.
pub fn scan_almost_periods_at(
    f: &SampledFunction,
    epsilon: f64,
    kind: SeminormKind,
    candidates: &[f64],
    scan_range: (f64, f64),
) -> Result<AlmostPeriodReport> {
    kind.validate()?;
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(invalid("epsilon must be positive"));
    }
    if !(scan_range.0 <= scan_range.1) {
        return Err(invalid("bad scan range"));
    }
    let mut ts: Vec<f64> = candidates
        .iter()
        .copied()
        .filter(|t| *t >= scan_range.0 && *t <= scan_range.1)
        .collect();
    ts.sort_by(|a, b| a.partial_cmp(b).expect("finite candidates"));
    let mut periods = Vec::new();
    for &t in &ts {
        if seminorm_of_difference(f, t, kind)? < epsilon {
            periods.push(t);
        }
    }
    let max_gap = report_gap(&periods, scan_range);
    Ok(AlmostPeriodReport { epsilon, kind, periods, scan_range, scan_step: 0.0, max_gap })
}

/// Seminorm of f minus the real part of P, tabulated on f's grid.
pub fn approximation_error(
    f: &SampledFunction,
    p: &TrigPolynomial,
    kind: SeminormKind,
) -> Result<f64> {
    let (sampled, _max_imag) = p.sample(f.grid());
    let diff = f.sub(&sampled)?;
    seminorm_estimate(&diff, kind)
}

impl AlmostPeriodReport {
    /// Key-value header, then one period per line.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# almost-periods")?;
        writeln!(w, "epsilon {}", fmt_f64(self.epsilon))?;
        writeln!(w, "kind {}", self.kind.to_text())?;
        writeln!(
            w,
            "scan_range {} {}",
            fmt_f64(self.scan_range.0),
            fmt_f64(self.scan_range.1)
        )?;
        writeln!(w, "scan_step {}", fmt_f64(self.scan_step))?;
        writeln!(w, "max_gap {}", fmt_f64(self.max_gap))?;
        writeln!(w, "periods {}", self.periods.len())?;
        for t in &self.periods {
            writeln!(w, "{}", fmt_f64(*t))?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("report text is ASCII")
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut epsilon = None;
        let mut kind = None;
        let mut scan_range = None;
        let mut scan_step = None;
        let mut max_gap = None;
        let mut expected = None;
        let mut periods = Vec::new();
        let parse_num = |s: &str| -> Result<f64> {
            s.trim().parse().map_err(|e| Error::Parse(format!("bad number `{s}`: {e}")))
        };
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((key, rest)) = line.split_once(' ') {
                match key {
                    "epsilon" => {
                        epsilon = Some(parse_num(rest)?);
                        continue;
                    }
                    "kind" => {
                        kind = Some(SeminormKind::parse_text(rest)?);
                        continue;
                    }
                    "scan_range" => {
                        let vals: Vec<f64> = rest
                            .split_whitespace()
                            .map(parse_num)
                            .collect::<Result<_>>()?;
                        if vals.len() != 2 {
                            return Err(Error::Parse("scan_range needs two values".into()));
                        }
                        scan_range = Some((vals[0], vals[1]));
                        continue;
                    }
                    "scan_step" => {
                        scan_step = Some(parse_num(rest)?);
                        continue;
                    }
                    "max_gap" => {
                        max_gap = Some(parse_num(rest)?);
                        continue;
                    }
                    "periods" => {
                        expected = Some(rest.trim().parse::<usize>().map_err(|e| {
                            Error::Parse(format!("bad period count `{rest}`: {e}"))
                        })?);
                        continue;
                    }
                    _ => {}
                }
            }
            periods.push(parse_num(line)?);
        }
        let report = AlmostPeriodReport {
            epsilon: epsilon.ok_or_else(|| Error::Parse("missing epsilon".into()))?,
            kind: kind.ok_or_else(|| Error::Parse("missing kind".into()))?,
            scan_range: scan_range.ok_or_else(|| Error::Parse("missing scan_range".into()))?,
            scan_step: scan_step.ok_or_else(|| Error::Parse("missing scan_step".into()))?,
            max_gap: max_gap.ok_or_else(|| Error::Parse("missing max_gap".into()))?,
            periods,
        };
        if let Some(n) = expected {
            if n != report.periods.len() {
                return Err(Error::Parse(format!(
                    "header says {n} periods but {} listed",
                    report.periods.len()
                )));
            }
        }
        Ok(report)
    }

    pub fn read_text_str(s: &str) -> Result<Self> {
        Self::read_text(s.as_bytes())
    }
}
