//! Functions on the line: uniform-grid samples, trigonometric polynomials,
//! compactly supported test functions with closed-form Fourier transforms,
//! comb convolutions N_phi, the triangle profile over a two-length tiling,
//! and averaged Fourier coefficient estimation.

use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::error::{coverage, invalid, Error, Result};
use crate::numeric::{cis, fmt_f64, Kahan};
use crate::pointsets::{PointSet, PHI};

/// Frequencies closer than this are merged when building a polynomial.
pub const FREQ_MERGE_TOL: f64 = 1e-12;

/// Slack for window-coverage comparisons.
const COVER_SLACK: f64 = 1e-9;

/// A uniform grid x_i = start + i * step, i = 0..len.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    start: f64,
    step: f64,
    len: usize,
}

impl Grid {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        if !start.is_finite() || !step.is_finite() || step <= 0.0 {
            return Err(invalid(format!("bad grid: start {start}, step {step}")));
        }
        if len == 0 {
            return Err(invalid("grid needs at least one sample"));
        }
        let end = (len as f64 - 1.0).mul_add(step, start);
        if !end.is_finite() {
            return Err(invalid("grid end overflows"));
        }
        Ok(Self { start, step, len })
    }

    /// Grid covering [lo, hi] with the given step; the last sample sits at
    /// or just past hi.
    pub fn from_range(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(invalid(format!("bad grid range [{lo}, {hi}]")));
        }
        let span = hi - lo;
        let cells = (span / step).ceil() as usize;
        Self::new(lo, step, cells + 1)
    }

    /// Symmetric grid covering [-half_width, half_width].
    pub fn centered(half_width: f64, step: f64) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(invalid("half_width must be positive"));
        }
        Self::from_range(-half_width, half_width, step)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn end(&self) -> f64 {
        self.x(self.len - 1)
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64).mul_add(self.step, self.start)
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |i| self.x(i))
    }

    /// Shifted copy: same step and length, start moved by t.
    pub fn translated(&self, t: f64) -> Self {
        Self { start: self.start + t, step: self.step, len: self.len }
    }
}

/// A real-valued function tabulated on a uniform grid. Off-grid evaluation
/// is linear interpolation between the two neighbouring samples; this is
/// part of the contract so every estimator built on top is deterministic.
#[derive(Debug, Clone)]
pub struct SampledFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "grid has {} samples but {} values given",
                grid.len(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite sample value {bad}")));
        }
        Ok(Self { grid, values })
    }

    /// Tabulates `f` on `grid`. The closure must return finite values on the
    /// grid; non-finite samples surface later as estimator errors.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.xs().map(f).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Linear interpolation; points within a small slack of the grid ends
    /// clamp to the end samples, anything further out is a coverage error.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let rel = (x - self.grid.start) / self.grid.step;
        if rel < 0.0 {
            if x >= self.grid.start - COVER_SLACK {
                return Ok(self.values[0]);
            }
            return Err(coverage(format!("{x} is left of the grid start {}", self.grid.start)));
        }
        let last = self.grid.len - 1;
        let i = rel as usize;
        if i >= last {
            if x <= self.grid.end() + COVER_SLACK {
                return Ok(self.values[last]);
            }
            return Err(coverage(format!("{x} is right of the grid end {}", self.grid.end())));
        }
        let frac = rel - i as f64;
        Ok(self.values[i] + frac * (self.values[i + 1] - self.values[i]))
    }

    /// The translate (tau_t f)(x) = f(x - t): same samples on the shifted
    /// grid. Exactly invertible.
    pub fn translated(&self, t: f64) -> Self {
        Self { grid: self.grid.translated(t), values: self.values.clone() }
    }

    /// Pointwise difference; both functions must share the grid.
    pub fn sub(&self, other: &SampledFunction) -> Result<SampledFunction> {
        if self.grid != other.grid {
            return Err(invalid("grids differ; resample first"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self { grid: self.grid, values })
    }

    /// Writes the CSV form: a grid metadata comment, a `x,re,im` header,
    /// one row per sample (17 significant digits).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# grid {} {} {}",
            fmt_f64(self.grid.start),
            fmt_f64(self.grid.step),
            self.grid.len
        )?;
        writeln!(w, "x,re,im")?;
        for (x, v) in self.grid.xs().zip(&self.values) {
            writeln!(w, "{},{},0", fmt_f64(x), fmt_f64(*v))?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }

    /// Parses [`SampledFunction::write_csv`] output. Imaginary parts must
    /// vanish: this type holds real-valued samples only.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut grid = None;
        let mut values = Vec::new();
        let mut row = 0usize;
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line == "x,re,im" {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(meta) = rest.strip_prefix("grid") {
                    let toks: Vec<&str> = meta.split_whitespace().collect();
                    if toks.len() != 3 {
                        return Err(Error::Parse(format!("line {}: grid needs 3 fields", idx + 1)));
                    }
                    let start: f64 = toks[0]
                        .parse()
                        .map_err(|e| Error::Parse(format!("line {}: {e}", idx + 1)))?;
                    let step: f64 = toks[1]
                        .parse()
                        .map_err(|e| Error::Parse(format!("line {}: {e}", idx + 1)))?;
                    let len: usize = toks[2]
                        .parse()
                        .map_err(|e| Error::Parse(format!("line {}: {e}", idx + 1)))?;
                    grid = Some(Grid::new(start, step, len)?);
                }
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(Error::Parse(format!("line {}: expected x,re,im", idx + 1)));
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim()
                    .parse()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", idx + 1)))
            };
            let x = parse(cols[0])?;
            let re = parse(cols[1])?;
            let im = parse(cols[2])?;
            if im.abs() > 1e-9 {
                return Err(Error::Parse(format!(
                    "line {}: imaginary sample {im}; only real-valued functions are supported",
                    idx + 1
                )));
            }
            if let Some(g) = &grid {
                if row < g.len() && (x - g.x(row)).abs() > 1e-9 * (1.0 + x.abs()) {
                    return Err(Error::Parse(format!(
                        "line {}: x = {x} disagrees with the grid metadata",
                        idx + 1
                    )));
                }
            }
            values.push(re);
            row += 1;
        }
        let grid = grid.ok_or_else(|| Error::Parse("missing `# grid start step len` header".into()))?;
        Self::new(grid, values)
    }

    pub fn read_csv_str(s: &str) -> Result<Self> {
        Self::read_csv(s.as_bytes())
    }
}

impl PartialEq for SampledFunction {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}

/// A finite sum of waves sum_k c_k e^(2 pi i y_k x), stored as (frequency,
/// coefficient) pairs sorted by frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPolynomial {
    terms: Vec<(f64, Complex64)>,
}

impl TrigPolynomial {
    /// Sorts by frequency and merges terms whose frequencies agree within
    /// [`FREQ_MERGE_TOL`] by summing their coefficients.
    pub fn new(mut terms: Vec<(f64, Complex64)>) -> Result<Self> {
        for (y, c) in &terms {
            if !y.is_finite() || !c.re.is_finite() || !c.im.is_finite() {
                return Err(invalid("non-finite frequency or coefficient"));
            }
        }
        terms.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite frequencies"));
        let mut merged: Vec<(f64, Complex64)> = Vec::with_capacity(terms.len());
        for (y, c) in terms {
            match merged.last_mut() {
                Some((py, pc)) if y - *py <= FREQ_MERGE_TOL => *pc += c,
                _ => merged.push((y, c)),
            }
        }
        Ok(Self { terms: merged })
    }

    /// Real cosine wave cos(2 pi y x) as the pair of conjugate terms.
    pub fn cosine(y: f64) -> Self {
        let half = Complex64::new(0.5, 0.0);
        Self::new(vec![(y, half), (-y, half)]).expect("fixed terms are finite")
    }

    /// The four-term polynomial equal to cos(2 pi x) + cos(2 pi sqrt2 x).
    pub fn quasiperiodic_example() -> Self {
        let half = Complex64::new(0.5, 0.0);
        let r2 = std::f64::consts::SQRT_2;
        Self::new(vec![(1.0, half), (-1.0, half), (r2, half), (-r2, half)])
            .expect("fixed terms are finite")
    }

    pub fn terms(&self) -> &[(f64, Complex64)] {
        &self.terms
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let mut sum = Complex64::new(0.0, 0.0);
        for &(y, c) in &self.terms {
            sum += c * cis(std::f64::consts::TAU * y * x);
        }
        sum
    }

    /// Tabulates the real part on `grid`; the second component is the
    /// largest |imaginary part| seen, which is ~0 for conjugate-symmetric
    /// coefficient lists.
    pub fn sample(&self, grid: Grid) -> (SampledFunction, f64) {
        let mut max_imag: f64 = 0.0;
        let mut values = Vec::with_capacity(grid.len());
        for x in grid.xs() {
            let v = self.eval(x);
            max_imag = max_imag.max(v.im.abs());
            values.push(v.re);
        }
        (SampledFunction { grid, values }, max_imag)
    }

    /// CSV columns `re_coeff,im_coeff,frequency`, one term per row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "re_coeff,im_coeff,frequency")?;
        for &(y, c) in &self.terms {
            writeln!(w, "{},{},{}", fmt_f64(c.re), fmt_f64(c.im), fmt_f64(y))?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut terms = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line == "re_coeff,im_coeff,frequency" {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(Error::Parse(format!(
                    "line {}: expected re_coeff,im_coeff,frequency",
                    idx + 1
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim()
                    .parse()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", idx + 1)))
            };
            terms.push((parse(cols[2])?, Complex64::new(parse(cols[0])?, parse(cols[1])?)));
        }
        Self::new(terms)
    }

    pub fn read_csv_str(s: &str) -> Result<Self> {
        Self::read_csv(s.as_bytes())
    }
}

/// Shape of a compactly supported bump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunctionKind {
    /// Piecewise linear: h (1 - |x - c| / w) on the support.
    Tent,
    /// Smooth: (h/2)(1 + cos(pi (x - c) / w)) on the support.
    RaisedCosine,
}

/// A continuous bump supported on [center - half_width, center + half_width]
/// with peak value `height`, with a closed-form Fourier transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunction {
    pub kind: TestFunctionKind,
    pub center: f64,
    pub half_width: f64,
    pub height: f64,
}

/// sin(u)/u continued through u = 0.
fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-8 {
        1.0 - u * u / 6.0
    } else {
        u.sin() / u
    }
}

impl TestFunction {
    pub fn new(kind: TestFunctionKind, center: f64, half_width: f64, height: f64) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(invalid("half_width must be positive"));
        }
        if !(height > 0.0) || !height.is_finite() || !center.is_finite() {
            return Err(invalid("height must be positive and center finite"));
        }
        Ok(Self { kind, center, half_width, height })
    }

    /// Centered tent with the given support half-width and peak height.
    pub fn tent(half_width: f64, height: f64) -> Result<Self> {
        Self::new(TestFunctionKind::Tent, 0.0, half_width, height)
    }

    /// Centered raised cosine (Hann bump).
    pub fn raised_cosine(half_width: f64, height: f64) -> Result<Self> {
        Self::new(TestFunctionKind::RaisedCosine, 0.0, half_width, height)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let u = (x - self.center) / self.half_width;
        if u.abs() >= 1.0 {
            return 0.0;
        }
        match self.kind {
            TestFunctionKind::Tent => self.height * (1.0 - u.abs()),
            TestFunctionKind::RaisedCosine => {
                0.5 * self.height * (1.0 + (std::f64::consts::PI * u).cos())
            }
        }
    }

    /// Closed-form transform int e^(-2 pi i x y) phi(x) dx. Real for
    /// centered bumps; an off-center bump picks up the phase
    /// e^(-2 pi i center y).
    pub fn transform(&self, y: f64) -> Complex64 {
        let w = self.half_width;
        let h = self.height;
        let magnitude = match self.kind {
            TestFunctionKind::Tent => {
                let s = sinc(std::f64::consts::PI * w * y);
                h * w * s * s
            }
            TestFunctionKind::RaisedCosine => {
                let u = 2.0 * w * y;
                let denom = 1.0 - u * u;
                if denom.abs() < 1e-8 {
                    // Limit of sinc(pi u)/(1 - u^2) at |u| = 1.
                    0.5 * h * w
                } else {
                    h * w * sinc(std::f64::consts::PI * u) / denom
                }
            }
        };
        if self.center == 0.0 {
            Complex64::new(magnitude, 0.0)
        } else {
            magnitude * cis(-std::f64::consts::TAU * self.center * y)
        }
    }
}

/// The comb convolution N_phi(x) = sum over p in Lambda of phi(x - p),
/// tabulated on `grid`.
///
/// The set's window must cover the grid extent padded by the bump support,
/// otherwise missing points outside the window would corrupt values near
/// the grid ends.
pub fn comb_convolve(set: &PointSet, phi: &TestFunction, grid: Grid) -> Result<SampledFunction> {
    let lo = grid.start() - phi.center - phi.half_width;
    let hi = grid.end() - phi.center + phi.half_width;
    if !set.covers(lo, hi) {
        let (wlo, whi) = set.window();
        return Err(coverage(format!(
            "comb convolution needs points on [{lo}, {hi}] but the set window is [{wlo}, {whi}]"
        )));
    }
    let mut values = vec![0.0; grid.len()];
    for p in set.points_in(lo, hi) {
        let first = (p + phi.center - phi.half_width - grid.start()) / grid.step();
        let last = (p + phi.center + phi.half_width - grid.start()) / grid.step();
        let i0 = first.ceil().max(0.0) as usize;
        let i1 = (last.floor() as isize).min(grid.len() as isize - 1);
        let mut i = i0;
        while (i as isize) <= i1 {
            values[i] += phi.eval(grid.x(i) - p);
            i += 1;
        }
    }
    SampledFunction::new(grid, values)
}

/// Triangle height over a long tile.
const LONG_TILE_HEIGHT: f64 = 1.0;
/// Triangle height over a short tile.
const SHORT_TILE_HEIGHT: f64 = 0.5;
/// Gap classification tolerance for the two tile lengths.
const TILE_TOL: f64 = 1e-9;

fn tile_height(gap: f64) -> Result<f64> {
    if (gap - PHI).abs() < TILE_TOL {
        Ok(LONG_TILE_HEIGHT)
    } else if (gap - 1.0).abs() < TILE_TOL {
        Ok(SHORT_TILE_HEIGHT)
    } else {
        Err(invalid(format!("tile of length {gap} is neither 1 nor phi")))
    }
}

fn triangle_on_tile(a: f64, b: f64, height: f64, x: f64) -> f64 {
    // Isosceles tent on [a, b]: zero at both ends, `height` at the middle.
    let u = 2.0 * (x - a) / (b - a) - 1.0;
    height * (1.0 - u.abs()).max(0.0)
}

/// The triangle profile of a two-length tiling: an isosceles triangle of
/// height 1 over each long (phi) tile and height 1/2 over each short (1)
/// tile, zero at every tile end point. `tiling` holds the tile end points,
/// e.g. the output of [`fibonacci_substitution_points`].
///
/// [`fibonacci_substitution_points`]: crate::pointsets::fibonacci_substitution_points
pub fn fibonacci_triangle(tiling: &PointSet, grid: Grid) -> Result<SampledFunction> {
    if tiling.len() < 2 {
        return Err(invalid("tiling needs at least two end points"));
    }
    let first = tiling.point(0);
    let last = tiling.point(tiling.len() - 1);
    if grid.start() < first - COVER_SLACK || grid.end() > last + COVER_SLACK {
        return Err(coverage(format!(
            "grid [{}, {}] is not covered by the tiling [{first}, {last}]",
            grid.start(),
            grid.end()
        )));
    }
    let mut values = vec![0.0; grid.len()];
    let points: Vec<f64> = tiling.iter().collect();
    for pair in points.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let height = tile_height(b - a)?;
        let i0 = ((a - grid.start()) / grid.step()).ceil().max(0.0) as usize;
        let i1 = (((b - grid.start()) / grid.step()).floor() as isize).min(grid.len() as isize - 1);
        let mut i = i0;
        while (i as isize) <= i1 {
            let v = triangle_on_tile(a, b, height, grid.x(i));
            if v > values[i] {
                values[i] = v;
            }
            i += 1;
        }
    }
    SampledFunction::new(grid, values)
}

/// Pointwise value of the triangle profile, without tabulation. Exact at
/// tile end points (returns 0 there).
pub fn fibonacci_triangle_value(tiling: &PointSet, x: f64) -> Result<f64> {
    if tiling.len() < 2 {
        return Err(invalid("tiling needs at least two end points"));
    }
    let first = tiling.point(0);
    let last = tiling.point(tiling.len() - 1);
    if x < first - COVER_SLACK || x > last + COVER_SLACK {
        return Err(coverage(format!("{x} outside the tiling [{first}, {last}]")));
    }
    // Tile index: the last end point <= x.
    let mut lo = 0usize;
    let mut hi = tiling.len() - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if tiling.point(mid) <= x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = tiling.point(lo);
    let b = tiling.point(lo + 1);
    let height = tile_height(b - a)?;
    Ok(triangle_on_tile(a, b, height, x.clamp(a, b)))
}

/// Averaged Fourier coefficient (1/2T) int_{-T}^{T} e^(-2 pi i k x) f(x) dx
/// by the trapezoid rule on f's grid, with interpolated end slivers so the
/// integration range is exactly [-T, T].
pub fn fourier_bohr_coefficient(f: &SampledFunction, k: f64, t_half: f64) -> Result<Complex64> {
    if !(t_half > 0.0) {
        return Err(invalid("averaging half-length T must be positive"));
    }
    let grid = f.grid();
    if grid.start() > -t_half + COVER_SLACK || grid.end() < t_half - COVER_SLACK {
        return Err(coverage(format!(
            "grid [{}, {}] does not cover [-{t_half}, {t_half}]",
            grid.start(),
            grid.end()
        )));
    }
    let omega = -std::f64::consts::TAU * k;
    let node = |x: f64, v: f64| cis(omega * x) * v;
    // Interior grid nodes strictly inside (-T, T).
    let i0 = ((-t_half - grid.start()) / grid.step()).ceil().max(0.0) as usize;
    let i0 = if grid.x(i0) <= -t_half { i0 + 1 } else { i0 };
    let i1 = (((t_half - grid.start()) / grid.step()).floor() as isize).min(grid.len() as isize - 1);
    let i1 = if i1 >= 0 && grid.x(i1 as usize) >= t_half { i1 - 1 } else { i1 };

    let mut re = Kahan::new();
    let mut im = Kahan::new();
    let mut prev_x = -t_half;
    let mut prev_g = node(-t_half, f.eval(-t_half)?);
    let mut push = |x: f64, g: Complex64, prev_x: &mut f64, prev_g: &mut Complex64| {
        let dx = x - *prev_x;
        let avg = (*prev_g + g) * 0.5;
        re.add(dx * avg.re);
        im.add(dx * avg.im);
        *prev_x = x;
        *prev_g = g;
    };
    if i1 >= i0 as isize {
        for i in i0..=(i1 as usize) {
            let x = grid.x(i);
            push(x, node(x, f.values()[i]), &mut prev_x, &mut prev_g);
        }
    }
    push(t_half, node(t_half, f.eval(t_half)?), &mut prev_x, &mut prev_g);
    Ok(Complex64::new(re.value(), im.value()) / (2.0 * t_half))
}

/// cos(2 pi x) + cos(2 pi sqrt2 x): continuous with two rationally
/// independent frequencies; reaches 2 only at x = 0.
pub fn zoo_quasiperiodic(grid: Grid) -> SampledFunction {
    let r2 = std::f64::consts::SQRT_2;
    SampledFunction::from_fn(grid, |x| {
        (std::f64::consts::TAU * x).cos() + (std::f64::consts::TAU * r2 * x).cos()
    })
}

/// Truncation of sum_{n >= 1} n^-2 sin(2 pi x / 2^n): a limit-periodic
/// function built from period-doubling harmonics. Sup-norm truncation error
/// is below sum_{n > n_terms} n^-2 < 1/n_terms.
pub fn zoo_limit_periodic(grid: Grid, n_terms: usize) -> Result<SampledFunction> {
    if n_terms == 0 {
        return Err(invalid("series needs at least one term"));
    }
    Ok(SampledFunction::from_fn(grid, |x| {
        let mut sum = Kahan::new();
        for n in 1..=n_terms {
            let scale = 1.0 / (n * n) as f64;
            sum.add(scale * (std::f64::consts::TAU * x / 2.0f64.powi(n as i32)).sin());
        }
        sum.value()
    }))
}

/// Truncation of sum_{n >= 1} n^-3 (sin(2 pi x / 2^n) + sin(2 pi sqrt5 x / 2^n)):
/// period-doubling harmonics at two rationally independent base frequencies.
/// Sup-norm truncation error is below 2 sum_{n > n_terms} n^-3 < 1/n_terms^2.
pub fn zoo_limit_quasiperiodic(grid: Grid, n_terms: usize) -> Result<SampledFunction> {
    if n_terms == 0 {
        return Err(invalid("series needs at least one term"));
    }
    let r5 = crate::pointsets::SQRT5;
    Ok(SampledFunction::from_fn(grid, |x| {
        let mut sum = Kahan::new();
        for n in 1..=n_terms {
            let scale = 1.0 / (n * n * n) as f64;
            let base = std::f64::consts::TAU * x / 2.0f64.powi(n as i32);
            sum.add(scale * (base.sin() + (base * r5).sin()));
        }
        sum.value()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointsets::{fibonacci_substitution_points, integer_lattice};

    const EPS: f64 = 1e-12;

    /// Composite Simpson quadrature, test-side oracle.
    fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, cells: usize) -> f64 {
        let n = cells * 2;
        let h = (hi - lo) / n as f64;
        let mut sum = f(lo) + f(hi);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * f(lo + i as f64 * h);
        }
        sum * h / 3.0
    }

    #[test]
    fn grid_basics() {
        let g = Grid::from_range(-1.0, 1.0, 0.25).unwrap();
        assert_eq!(g.len(), 9);
        assert!((g.end() - 1.0).abs() < EPS);
        assert!(Grid::new(0.0, -0.1, 5).is_err());
        assert!(Grid::new(0.0, 0.1, 0).is_err());
    }

    #[test]
    fn eval_interpolates_and_clamps() {
        let g = Grid::new(0.0, 1.0, 3).unwrap();
        let f = SampledFunction::new(g, vec![0.0, 2.0, 1.0]).unwrap();
        assert!((f.eval(0.5).unwrap() - 1.0).abs() < EPS);
        assert!((f.eval(1.75).unwrap() - 1.25).abs() < EPS);
        assert!((f.eval(2.0 + 5e-10).unwrap() - 1.0).abs() < EPS);
        assert!(f.eval(2.1).is_err());
        assert!(f.eval(-0.1).is_err());
    }

    #[test]
    fn translated_function_shifts_the_graph() {
        let g = Grid::from_range(-2.0, 2.0, 0.5).unwrap();
        let f = SampledFunction::from_fn(g, |x| x * x);
        let shifted = f.translated(1.5);
        assert!((shifted.eval(1.5).unwrap() - 0.0).abs() < EPS);
        assert!((shifted.eval(0.5).unwrap() - 1.0).abs() < EPS);
        let back = shifted.translated(-1.5);
        assert_eq!(back, f);
    }

    #[test]
    fn trig_poly_constant_and_cosine() {
        let one = TrigPolynomial::new(vec![(0.0, Complex64::new(1.0, 0.0))]).unwrap();
        assert!((one.eval(12.34) - Complex64::new(1.0, 0.0)).norm() < EPS);
        let cos = TrigPolynomial::cosine(1.0);
        assert!((cos.eval(0.0).re - 1.0).abs() < EPS);
        for &x in &[0.1, 0.37, 2.0] {
            let direct = (std::f64::consts::TAU * x).cos();
            assert!((cos.eval(x).re - direct).abs() < 1e-14);
            assert!(cos.eval(x).im.abs() < 1e-14);
        }
    }

    #[test]
    fn quasiperiodic_four_term_form() {
        let p = TrigPolynomial::quasiperiodic_example();
        assert_eq!(p.terms().len(), 4);
        let x = 0.25;
        let direct = (std::f64::consts::TAU * x).cos()
            + (std::f64::consts::TAU * std::f64::consts::SQRT_2 * x).cos();
        assert!((p.eval(x).re - direct).abs() < 1e-14);
        assert!(direct < -0.60 && direct > -0.61, "direct {direct}");
    }

    #[test]
    fn trig_poly_merges_close_frequencies() {
        let c = Complex64::new(0.25, 0.0);
        let p = TrigPolynomial::new(vec![(1.0, c), (1.0 + 1e-13, c), (2.0, c)]).unwrap();
        assert_eq!(p.terms().len(), 2);
        assert!((p.terms()[0].1.re - 0.5).abs() < EPS);
    }

    #[test]
    fn tent_transform_matches_quadrature() {
        let phi = TestFunction::tent(0.4, 1.0).unwrap();
        assert!((phi.transform(0.0).re - 0.4).abs() < EPS);
        // Zero crossing at y = 1/w.
        assert!(phi.transform(2.5).re.abs() < 1e-12);
        for &y in &[0.3, 1.7, -2.2] {
            let oracle = simpson(|x| phi.eval(x) * (std::f64::consts::TAU * x * y).cos(), -0.4, 0.4, 4000);
            assert!((phi.transform(y).re - oracle).abs() < 1e-9, "y = {y}");
            assert!(phi.transform(y).im.abs() < EPS);
        }
    }

    #[test]
    fn raised_cosine_transform_matches_quadrature() {
        let phi = TestFunction::raised_cosine(0.7, 1.3).unwrap();
        assert!((phi.transform(0.0).re - 1.3 * 0.7).abs() < EPS);
        for &y in &[0.2, 0.9, 3.1] {
            let oracle = simpson(|x| phi.eval(x) * (std::f64::consts::TAU * x * y).cos(), -0.7, 0.7, 4000);
            assert!((phi.transform(y).re - oracle).abs() < 1e-9, "y = {y}");
        }
        // The removable singularity at u = 2wy = 1, i.e. y = 1/(2w).
        let y = 1.0 / 1.4;
        let oracle = simpson(|x| phi.eval(x) * (std::f64::consts::TAU * x * y).cos(), -0.7, 0.7, 4000);
        assert!((phi.transform(y).re - oracle).abs() < 1e-8);
        assert!((phi.transform(y).re - 0.5 * 1.3 * 0.7).abs() < 1e-8);
    }

    #[test]
    fn off_center_transform_carries_a_phase() {
        let centered = TestFunction::tent(0.4, 1.0).unwrap();
        let moved = TestFunction::new(TestFunctionKind::Tent, 2.5, 0.4, 1.0).unwrap();
        for &y in &[0.3, 1.1] {
            let a = centered.transform(y);
            let b = moved.transform(y);
            assert!((a.norm() - b.norm()).abs() < EPS);
            let expected = a * cis(-std::f64::consts::TAU * 2.5 * y);
            assert!((b - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn comb_single_point_reproduces_the_bump() {
        let set = PointSet::new(vec![0.0], (-2.0, 2.0)).unwrap();
        let phi = TestFunction::tent(1.0, 1.0).unwrap();
        let grid = Grid::from_range(-1.0, 1.0, 0.125).unwrap();
        let f = comb_convolve(&set, &phi, grid).unwrap();
        assert!((f.eval(0.0).unwrap() - 1.0).abs() < EPS);
        assert!((f.eval(0.5).unwrap() - 0.5).abs() < EPS);
        assert!((f.eval(1.0).unwrap() - 0.0).abs() < EPS);
    }

    #[test]
    fn comb_on_lattice_is_periodic_sawtooth() {
        let set = integer_lattice(10);
        let phi = TestFunction::tent(0.5, 1.0).unwrap();
        let grid = Grid::from_range(-5.0, 5.0, 0.05).unwrap();
        let f = comb_convolve(&set, &phi, grid).unwrap();
        assert!((f.eval(0.25).unwrap() - 0.5).abs() < EPS);
        for &x in &[-3.0, 0.0, 2.0] {
            assert!((f.eval(x).unwrap() - 1.0).abs() < EPS);
        }
        // Tents with half_width 0.5 tile the line: N_phi is 1-periodic.
        for i in 0..f.grid().len() {
            let x = f.grid().x(i);
            if x + 1.0 <= 5.0 + 1e-9 {
                assert!((f.eval(x + 1.0).unwrap() - f.values()[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn comb_coverage_is_enforced() {
        let set = integer_lattice(3);
        let phi = TestFunction::tent(0.5, 1.0).unwrap();
        let grid = Grid::from_range(-3.0, 3.0, 0.1).unwrap();
        assert!(matches!(comb_convolve(&set, &phi, grid), Err(Error::Coverage(_))));
    }

    #[test]
    fn comb_on_fibonacci_stays_in_range() {
        let set = fibonacci_substitution_points(10);
        let phi = TestFunction::tent(0.4, 1.0).unwrap();
        let grid = Grid::from_range(-100.0, 100.0, 0.01).unwrap();
        let f = comb_convolve(&set, &phi, grid).unwrap();
        // Minimal gap 1 > 2 * 0.4: bumps never overlap.
        for &v in f.values() {
            assert!((0.0..=1.0).contains(&v), "value {v}");
        }
    }

    #[test]
    fn comb_is_additive_over_disjoint_sets() {
        let a = integer_lattice(10);
        let b = integer_lattice(10).translate(0.5);
        let u = a.union(&b).unwrap();
        let phi = TestFunction::tent(0.4, 1.0).unwrap();
        let grid = Grid::from_range(-5.0, 5.0, 0.01).unwrap();
        let fa = comb_convolve(&a, &phi, grid).unwrap();
        let fb = comb_convolve(&b, &phi, grid).unwrap();
        let fu = comb_convolve(&u, &phi, grid).unwrap();
        for i in 0..grid.len() {
            assert!((fu.values()[i] - fa.values()[i] - fb.values()[i]).abs() < EPS);
        }
    }

    #[test]
    fn comb_translation_covariance_on_aligned_shifts() {
        let set = fibonacci_substitution_points(9);
        let phi = TestFunction::tent(0.4, 1.0).unwrap();
        let grid = Grid::from_range(-20.0, 20.0, 0.01).unwrap();
        let f = comb_convolve(&set, &phi, grid).unwrap();
        let t = 3.0;
        let shifted = comb_convolve(&set.translate(t), &phi, grid).unwrap();
        // tau_t N_phi sampled where both grids have nodes.
        let k = (t / 0.01).round() as usize;
        for i in k..grid.len() {
            assert!((shifted.values()[i] - f.values()[i - k]).abs() < 1e-12);
        }
    }

    #[test]
    fn triangle_vanishes_at_tile_ends_and_peaks_at_midpoints() {
        let tiling = fibonacci_substitution_points(8);
        for i in 0..tiling.len() {
            let v = fibonacci_triangle_value(&tiling, tiling.point(i)).unwrap();
            assert_eq!(v, 0.0);
        }
        let pts: Vec<f64> = tiling.iter().collect();
        for pair in pts.windows(2) {
            let mid = 0.5 * (pair[0] + pair[1]);
            let v = fibonacci_triangle_value(&tiling, mid).unwrap();
            let gap = pair[1] - pair[0];
            let expect = if (gap - PHI).abs() < 1e-9 { 1.0 } else { 0.5 };
            assert!((v - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn triangle_tabulation_matches_pointwise_values() {
        let tiling = fibonacci_substitution_points(8);
        let grid = Grid::from_range(-20.0, 20.0, 0.01).unwrap();
        let f = fibonacci_triangle(&tiling, grid).unwrap();
        for i in (0..grid.len()).step_by(7) {
            let direct = fibonacci_triangle_value(&tiling, grid.x(i)).unwrap();
            assert!((f.values()[i] - direct).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&f.values()[i]));
        }
    }

    #[test]
    fn triangle_rejects_foreign_tilings() {
        let lat = integer_lattice(5);
        let grid = Grid::from_range(-2.0, 2.0, 0.1).unwrap();
        // All gaps are 1: fine (all short tiles).
        assert!(fibonacci_triangle(&lat, grid).is_ok());
        let bad = PointSet::new(vec![0.0, 0.5, 1.0], (0.0, 1.0)).unwrap();
        let small = Grid::from_range(0.0, 1.0, 0.1).unwrap();
        assert!(fibonacci_triangle(&bad, small).is_err());
    }

    #[test]
    fn triangle_mean_matches_tile_area_oracle() {
        // Long:short tile counts converge to phi : 1 with areas phi/2 and
        // 1/4, so the mean converges to (phi^2/2 + 1/4) / (phi^2 + 1).
        let tiling = fibonacci_substitution_points(21);
        let half = 10_000.0;
        let grid = Grid::from_range(-half - 1.0, half + 1.0, 0.01).unwrap();
        let f = fibonacci_triangle(&tiling, grid).unwrap();
        let a0 = fourier_bohr_coefficient(&f, 0.0, half).unwrap();
        let phi2 = PHI * PHI;
        let oracle = (PHI * PHI / 2.0 + 0.25) / (phi2 + 1.0);
        assert!((a0.re - oracle).abs() < 1e-3, "mean {} vs {oracle}", a0.re);
        assert!(a0.im.abs() < 1e-12);
    }

    #[test]
    fn fourier_coefficient_picks_out_cosine_weight() {
        let grid = Grid::from_range(-101.0, 101.0, 0.01).unwrap();
        let f = SampledFunction::from_fn(grid, |x| (std::f64::consts::TAU * x).cos());
        let at_one = fourier_bohr_coefficient(&f, 1.0, 100.0).unwrap();
        assert!((at_one.re - 0.5).abs() < 1e-3, "got {at_one}");
        let at_zero = fourier_bohr_coefficient(&f, 0.0, 100.0).unwrap();
        assert!(at_zero.norm() < 1e-3);
        assert!(fourier_bohr_coefficient(&f, 1.0, 200.0).is_err());
    }

    #[test]
    fn fourier_coefficient_converges_like_one_over_t() {
        let terms = vec![
            (0.3, Complex64::new(0.8, 0.0)),
            (1.0, Complex64::new(-0.25, 0.4)),
            (std::f64::consts::SQRT_2, Complex64::new(0.5, 0.0)),
        ];
        let p = TrigPolynomial::new(terms.clone()).unwrap();
        let grid = Grid::from_range(-10_001.0, 10_001.0, 0.005).unwrap();
        let (f, _) = p.sample(grid);
        // Sampling the real part folds each term into a conjugate pair, so
        // the coefficient read off at y_k is c_k/2 plus leakage
        // |c_j|/(2 (4 pi) |y_j -+ y_k| T) summed over the other halves.
        for &(yk, ck) in &terms {
            let mut leak_scale = 0.0;
            for &(yj, cj) in &terms {
                let c = cj.norm() / 2.0;
                if (yj - yk).abs() > 1e-9 {
                    leak_scale += c / (std::f64::consts::TAU * (yj - yk).abs());
                }
                leak_scale += c / (std::f64::consts::TAU * (yj + yk).abs());
            }
            for &t in &[100.0, 1000.0, 10_000.0] {
                let est = fourier_bohr_coefficient(&f, yk, t).unwrap();
                let err = (est - ck / 2.0).norm();
                let bound = 1.05 * leak_scale / t + 1e-6;
                assert!(err <= bound, "y = {yk}, T = {t}: err {err} > bound {bound}");
            }
        }
    }

    #[test]
    fn zoo_values() {
        let grid = Grid::from_range(-2.0, 2.0, 0.5).unwrap();
        let q = zoo_quasiperiodic(grid);
        assert!((q.eval(0.0).unwrap() - 2.0).abs() < EPS);
        let lp = zoo_limit_periodic(grid, 20).unwrap();
        assert!(lp.eval(0.0).unwrap().abs() < EPS);
        let direct: f64 = (1..=20)
            .map(|n| (std::f64::consts::TAU / (1u64 << n) as f64).sin() / (n * n) as f64)
            .sum();
        assert!((lp.eval(1.0).unwrap() - direct).abs() < 1e-12);
        assert!(zoo_limit_periodic(grid, 0).is_err());
    }

    #[test]
    fn zoo_truncation_tails_are_bounded() {
        let grid = Grid::from_range(-100.0, 100.0, 0.05).unwrap();
        let a = zoo_limit_periodic(grid, 30).unwrap();
        let b = zoo_limit_periodic(grid, 40).unwrap();
        let tail: f64 = (31..=40).map(|n| 1.0 / (n * n) as f64).sum();
        let sup = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max);
        assert!(sup <= tail + EPS, "sup {sup} vs tail {tail}");
        let a = zoo_limit_quasiperiodic(grid, 30).unwrap();
        let b = zoo_limit_quasiperiodic(grid, 40).unwrap();
        let tail: f64 = (31..=40).map(|n| 2.0 / (n * n * n) as f64).sum();
        let sup = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max);
        assert!(sup <= tail + EPS);
    }

    #[test]
    fn sampled_function_csv_round_trip() {
        let grid = Grid::from_range(-1.0, 1.0, 0.25).unwrap();
        let f = SampledFunction::from_fn(grid, |x| x * x - 0.3);
        let text = f.to_csv();
        let parsed = SampledFunction::read_csv_str(&text).unwrap();
        assert_eq!(parsed, f);
        assert_eq!(parsed.to_csv(), text);
        assert!(SampledFunction::read_csv_str("x,re,im\n0,1,0\n").is_err());
        assert!(SampledFunction::read_csv_str("# grid 0 0.5 2\nx,re,im\n0,1,0.5\n0.5,1,0\n").is_err());
    }

    #[test]
    fn trig_poly_csv_round_trip() {
        let p = TrigPolynomial::new(vec![
            (std::f64::consts::SQRT_2, Complex64::new(0.5, -0.25)),
            (-1.0, Complex64::new(0.1, 0.0)),
        ])
        .unwrap();
        let text = p.to_csv();
        let parsed = TrigPolynomial::read_csv_str(&text).unwrap();
        assert_eq!(parsed, p);
        assert_eq!(parsed.to_csv(), text);
        assert!(TrigPolynomial::read_csv_str("re_coeff,im_coeff,frequency\n1,2\n").is_err());
    }
}
