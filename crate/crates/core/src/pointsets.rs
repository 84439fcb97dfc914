//! Generators for one-dimensional point sets with controlled diffraction
//! behaviour: substitution tilings, cut-and-project (model) sets, and a few
//! arithmetic sets (square-free integers, shifted half-lattices, digit-parity
//! integers, the integer lattice itself).
//!
//! All sets are represented as finite, strictly increasing coordinate lists
//! together with the window of the line they were generated on, so that
//! downstream averages know how much of the line is actually covered.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{invalid, Error, Result};
use crate::numeric::fmt_f64;

/// sqrt(5), nearest f64.
pub const SQRT5: f64 = 2.236_067_977_499_789_696_409_173_668_731_276;
/// Golden ratio, the positive root of x^2 = x + 1.
pub const PHI: f64 = (1.0 + SQRT5) / 2.0;
/// Algebraic conjugate of the golden ratio, (1 - sqrt 5)/2.
pub const PHI_CONJ: f64 = (1.0 - SQRT5) / 2.0;

/// Two points closer than this are considered duplicates and rejected.
pub const DISTINCT_TOL: f64 = 1e-12;

/// Star values within this distance of the upper window edge count as
/// boundary hits and are excluded (the acceptance window is half-open).
pub const BOUNDARY_EXCLUSION: f64 = 1e-12;

/// Slack used when checking whether a window covers a requested interval.
const WINDOW_SLACK: f64 = 1e-9;

/// A finite, strictly increasing set of points on the line, together with
/// the interval of the line it was generated on.
///
/// Translation is stored as an offset and applied on access, so that
/// `translate(t)` followed by `translate(-t)` restores the original
/// coordinates bit for bit.
#[derive(Debug, Clone)]
pub struct PointSet {
    base: Vec<f64>,
    offset: f64,
    window: (f64, f64),
}

impl PointSet {
    /// Builds a point set from sorted coordinates.
    ///
    /// Rejects non-finite values, coordinates that are not strictly
    /// increasing with separation above [`DISTINCT_TOL`], and points outside
    /// `window`.
    pub fn new(points: Vec<f64>, window: (f64, f64)) -> Result<Self> {
        let (lo, hi) = window;
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(invalid(format!("bad window [{lo}, {hi}]")));
        }
        for pair in points.windows(2) {
            if !(pair[1] - pair[0] > DISTINCT_TOL) {
                return Err(invalid(format!(
                    "points must be strictly increasing with separation > {DISTINCT_TOL}: \
                     {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        if let (Some(&first), Some(&last)) = (points.first(), points.last()) {
            if !first.is_finite() || !last.is_finite() {
                return Err(invalid("non-finite point coordinate"));
            }
            if first < lo || last > hi {
                return Err(invalid(format!(
                    "points [{first}, {last}] stick out of window [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { base: points, offset: 0.0, window })
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    /// Interval of the line this set was generated on.
    pub fn window(&self) -> (f64, f64) {
        (self.window.0 + self.offset, self.window.1 + self.offset)
    }

    pub fn point(&self, i: usize) -> f64 {
        self.base[i] + self.offset
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        let off = self.offset;
        self.base.iter().map(move |p| p + off)
    }

    /// Points per unit length of the window.
    pub fn density(&self) -> f64 {
        let (lo, hi) = self.window;
        if hi > lo {
            self.base.len() as f64 / (hi - lo)
        } else {
            0.0
        }
    }

    /// Index range of points inside the closed interval [lo, hi].
    fn index_range(&self, lo: f64, hi: f64) -> (usize, usize) {
        let off = self.offset;
        let a = self.base.partition_point(|p| p + off < lo);
        let b = self.base.partition_point(|p| p + off <= hi);
        (a, b)
    }

    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        let (a, b) = self.index_range(lo, hi);
        b - a
    }

    pub fn points_in(&self, lo: f64, hi: f64) -> impl Iterator<Item = f64> + '_ {
        let (a, b) = self.index_range(lo, hi);
        let off = self.offset;
        self.base[a..b].iter().map(move |p| p + off)
    }

    /// True when the window covers [lo, hi] (up to a small slack).
    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        let (wlo, whi) = self.window();
        wlo <= lo + WINDOW_SLACK && whi >= hi - WINDOW_SLACK
    }

    /// Shifts every point and the window by `t`. Exactly invertible:
    /// translating by `t` and then `-t` restores the original set.
    pub fn translate(&self, t: f64) -> Self {
        Self { base: self.base.clone(), offset: self.offset + t, window: self.window }
    }

    /// Keeps the points inside `interval`; the window shrinks to the
    /// intersection of the old window with `interval`.
    pub fn restrict(&self, interval: (f64, f64)) -> Result<Self> {
        let (lo, hi) = interval;
        if !(lo <= hi) {
            return Err(invalid(format!("bad interval [{lo}, {hi}]")));
        }
        let (wlo, whi) = self.window();
        let points: Vec<f64> = self.points_in(lo, hi).collect();
        Self::new(points, (lo.max(wlo), hi.min(whi)))
    }

    /// Disjoint union of two sets; the window is the hull of both windows.
    /// Fails when the sets overlap (two points within [`DISTINCT_TOL`]).
    pub fn union(&self, other: &PointSet) -> Result<Self> {
        let mut merged = Vec::with_capacity(self.len() + other.len());
        let (mut a, mut b) = (self.iter().peekable(), other.iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (Some(&x), Some(&y)) => merged.push(if x <= y { a.next() } else { b.next() }.unwrap()),
                (Some(_), None) => merged.push(a.next().unwrap()),
                (None, Some(_)) => merged.push(b.next().unwrap()),
                (None, None) => break,
            }
        }
        let (slo, shi) = self.window();
        let (olo, ohi) = other.window();
        Self::new(merged, (slo.min(olo), shi.max(ohi)))
    }

    /// Consecutive differences.
    pub fn gaps(&self) -> impl Iterator<Item = f64> + '_ {
        self.base.windows(2).map(|w| w[1] - w[0])
    }

    /// Largest gap between consecutive points inside `interval`, reported as
    /// (center, width). `None` when fewer than two points lie inside.
    pub fn largest_gap(&self, interval: (f64, f64)) -> Option<(f64, f64)> {
        let (a, b) = self.index_range(interval.0, interval.1);
        if b - a < 2 {
            return None;
        }
        let off = self.offset;
        let mut best = (0.0, f64::NEG_INFINITY);
        for w in self.base[a..b].windows(2) {
            let width = w[1] - w[0];
            if width > best.1 {
                best = (0.5 * (w[0] + w[1]) + off, width);
            }
        }
        Some(best)
    }

    /// Writes the plain text format: a `# window a b` header, then one
    /// coordinate per line with 17 significant digits (lossless for f64).
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let (lo, hi) = self.window();
        writeln!(w, "# window {} {}", fmt_f64(lo), fmt_f64(hi))?;
        for p in self.iter() {
            writeln!(w, "{}", fmt_f64(p))?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("text format is ASCII")
    }

    /// Parses the format produced by [`PointSet::write_text`]. Unknown `#`
    /// comment lines are ignored.
    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut window = None;
        let mut points = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(spec) = rest.strip_prefix("window") {
                    let vals: Vec<f64> = spec
                        .split_whitespace()
                        .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", idx + 1))))
                        .collect::<Result<_>>()?;
                    if vals.len() != 2 {
                        return Err(Error::Parse(format!("line {}: window needs two values", idx + 1)));
                    }
                    window = Some((vals[0], vals[1]));
                }
                continue;
            }
            let x: f64 = line
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", idx + 1)))?;
            points.push(x);
        }
        let window = window.ok_or_else(|| Error::Parse("missing `# window a b` header".into()))?;
        Self::new(points, window)
    }

    pub fn read_text_str(s: &str) -> Result<Self> {
        Self::read_text(s.as_bytes())
    }
}

impl PartialEq for PointSet {
    /// Compares materialized coordinates and windows.
    fn eq(&self, other: &Self) -> bool {
        self.window() == other.window()
            && self.len() == other.len()
            && self.iter().zip(other.iter()).all(|(a, b)| a == b)
    }
}

/// A letter-to-word substitution with a tile length per letter.
#[derive(Debug, Clone)]
pub struct SubstitutionRule {
    images: BTreeMap<char, String>,
    lengths: BTreeMap<char, f64>,
}

/// Cap on word growth; repeated substitution is exponential.
const MAX_WORD_LEN: usize = 1 << 27;

impl SubstitutionRule {
    pub fn new(images: BTreeMap<char, String>, lengths: BTreeMap<char, f64>) -> Result<Self> {
        if images.is_empty() {
            return Err(invalid("empty substitution alphabet"));
        }
        for (letter, image) in &images {
            if image.is_empty() {
                return Err(invalid(format!("letter '{letter}' maps to the empty word")));
            }
            for ch in image.chars() {
                if !images.contains_key(&ch) {
                    return Err(invalid(format!("image of '{letter}' uses unknown letter '{ch}'")));
                }
            }
        }
        for letter in images.keys() {
            match lengths.get(letter) {
                Some(len) if len.is_finite() && *len > 0.0 => {}
                _ => return Err(invalid(format!("letter '{letter}' needs a positive tile length"))),
            }
        }
        Ok(Self { images, lengths })
    }

    /// The golden-mean rule L -> LS, S -> L with tile lengths phi and 1.
    pub fn fibonacci() -> Self {
        let images = BTreeMap::from([('L', "LS".to_string()), ('S', "L".to_string())]);
        let lengths = BTreeMap::from([('L', PHI), ('S', 1.0)]);
        Self::new(images, lengths).expect("fixed rule is valid")
    }

    pub fn tile_length(&self, letter: char) -> Result<f64> {
        self.lengths
            .get(&letter)
            .copied()
            .ok_or_else(|| invalid(format!("unknown letter '{letter}'")))
    }

    /// Applies the rule `iterations` times to `word`.
    pub fn substitute(&self, word: &str, iterations: usize) -> Result<String> {
        let mut current = word.to_string();
        for ch in current.chars() {
            if !self.images.contains_key(&ch) {
                return Err(invalid(format!("unknown letter '{ch}' in word")));
            }
        }
        if current.is_empty() {
            return Err(invalid("empty word"));
        }
        for _ in 0..iterations {
            let mut next = String::with_capacity(current.len() * 2);
            for ch in current.chars() {
                next.push_str(&self.images[&ch]);
                if next.len() > MAX_WORD_LEN {
                    return Err(invalid(format!("substituted word exceeds {MAX_WORD_LEN} letters")));
                }
            }
            current = next;
        }
        Ok(current)
    }

    /// Left end points of the consecutive tiles spelled by `word`, starting
    /// at `origin`. The window is the interval the tiles cover; the closing
    /// right end point is not a member.
    pub fn word_to_points(&self, word: &str, origin: f64) -> Result<PointSet> {
        if word.is_empty() {
            return Err(invalid("empty word"));
        }
        let mut points = Vec::with_capacity(word.chars().count());
        let mut pos = origin;
        for ch in word.chars() {
            points.push(pos);
            pos += self.tile_length(ch)?;
        }
        PointSet::new(points, (origin, pos))
    }
}

/// Two-sided Fibonacci chain grown from the seed `w|w` where `w` is the
/// `iterations`-fold substitution image of L.
///
/// The right half spells `w` rightward from the cut at 0; the left half lays
/// the same tiles leftward so the word ends flush against the cut. Points
/// are all tile end points inside the covered interval (both boundary end
/// points included), so gaps alternate in {1, phi}.
pub fn fibonacci_substitution_points(iterations: usize) -> PointSet {
    let rule = SubstitutionRule::fibonacci();
    let word = rule.substitute("L", iterations).expect("fixed alphabet");
    let mut left = Vec::with_capacity(word.len());
    let mut end = 0.0;
    for ch in word.chars().rev() {
        let start = end - rule.tile_length(ch).expect("fixed alphabet");
        left.push(start);
        end = start;
    }
    left.reverse();
    let left_end = left[0];
    let mut points = left;
    let mut pos = 0.0;
    for ch in word.chars() {
        points.push(pos);
        pos += rule.tile_length(ch).expect("fixed alphabet");
    }
    points.push(pos);
    PointSet::new(points, (left_end, pos)).expect("substitution tiling is strictly increasing")
}

/// A planar lattice with a physical and an internal projection, plus the
/// half-open acceptance window [lo, hi) in internal space.
#[derive(Debug, Clone)]
pub struct CutProjectScheme {
    /// Generator images as (physical, internal) pairs.
    pub basis: [(f64, f64); 2],
    /// Acceptance window in internal space; closed at lo, open at hi.
    pub window: (f64, f64),
}

impl CutProjectScheme {
    pub fn new(basis: [(f64, f64); 2], window: (f64, f64)) -> Result<Self> {
        let det = basis[0].0 * basis[1].1 - basis[0].1 * basis[1].0;
        if det.abs() < 1e-12 {
            return Err(invalid("degenerate lattice basis (projections are collinear)"));
        }
        if !(window.0 < window.1) || !window.0.is_finite() || !window.1.is_finite() {
            return Err(invalid(format!("bad acceptance window [{}, {})", window.0, window.1)));
        }
        Ok(Self { basis, window })
    }

    /// The scheme whose model set is the Fibonacci chain: lattice generated
    /// by (1, 1) and (phi, phi'), window [-1, phi - 1).
    pub fn fibonacci() -> Self {
        Self::new([(1.0, 1.0), (PHI, PHI_CONJ)], (-1.0, PHI - 1.0)).expect("fixed scheme is valid")
    }

    pub fn physical(&self, m: i64, n: i64) -> f64 {
        (m as f64).mul_add(self.basis[0].0, n as f64 * self.basis[1].0)
    }

    pub fn internal(&self, m: i64, n: i64) -> f64 {
        (m as f64).mul_add(self.basis[0].1, n as f64 * self.basis[1].1)
    }

    /// Half-open window test. Star values within [`BOUNDARY_EXCLUSION`] of
    /// the upper edge are treated as boundary hits and rejected, so the
    /// selection does not flip on the last floating-point bit.
    pub fn accepts(&self, internal: f64) -> bool {
        internal >= self.window.0 && self.window.1 - internal > BOUNDARY_EXCLUSION
    }
}

/// Projects every lattice point `m b0 + n b1` with (m, n) in the given
/// inclusive ranges whose internal part falls in the acceptance window and
/// whose physical part falls in `physical_window`.
///
/// The ranges must over-enumerate: points outside `physical_window` are
/// dropped, points on the internal boundary follow the half-open convention.
pub fn model_set(
    cps: &CutProjectScheme,
    m_range: (i64, i64),
    n_range: (i64, i64),
    physical_window: (f64, f64),
) -> Result<PointSet> {
    let (m_lo, m_hi) = m_range;
    let (n_lo, n_hi) = n_range;
    if m_lo > m_hi || n_lo > n_hi {
        return Err(invalid("empty coefficient range"));
    }
    if !(physical_window.0 <= physical_window.1) {
        return Err(invalid("bad physical window"));
    }
    let cells = (m_hi - m_lo + 1) as i128 * (n_hi - n_lo + 1) as i128;
    if cells > 1_000_000_000 {
        return Err(invalid("coefficient ranges enumerate more than 1e9 lattice points"));
    }
    let mut points = Vec::new();
    for n in n_lo..=n_hi {
        for m in m_lo..=m_hi {
            if !cps.accepts(cps.internal(m, n)) {
                continue;
            }
            let x = cps.physical(m, n);
            if x >= physical_window.0 && x <= physical_window.1 {
                points.push(x);
            }
        }
    }
    points.sort_by(|a, b| a.partial_cmp(b).expect("finite projections"));
    PointSet::new(points, physical_window)
}

/// Fibonacci model set on `physical_window`, with the coefficient ranges
/// sized automatically from the window geometry.
pub fn fibonacci_model_set(physical_window: (f64, f64)) -> Result<PointSet> {
    let cps = CutProjectScheme::fibonacci();
    let (p_lo, p_hi) = physical_window;
    if !(p_lo <= p_hi) || !p_lo.is_finite() || !p_hi.is_finite() {
        return Err(invalid(format!("bad physical window [{p_lo}, {p_hi}]")));
    }
    // physical - internal = n (phi - phi') = n sqrt5 pins the n range; the
    // margin follows the window extent so boundary coefficients are kept.
    let margin = 2.0 * (cps.window.0.abs() + cps.window.1.abs()) * PHI_CONJ.abs().max(1.0);
    let n_lo = ((p_lo - cps.window.1 - margin) / SQRT5).floor() as i64;
    let n_hi = ((p_hi - cps.window.0 + margin) / SQRT5).ceil() as i64;
    let mut points = Vec::new();
    for n in n_lo..=n_hi {
        // m + n phi' in [w_lo, w_hi) allows at most a couple of m values.
        let m_first = (cps.window.0 - n as f64 * PHI_CONJ).floor() as i64 - 1;
        let m_last = (cps.window.1 - n as f64 * PHI_CONJ).ceil() as i64 + 1;
        for m in m_first..=m_last {
            if !cps.accepts(cps.internal(m, n)) {
                continue;
            }
            let x = cps.physical(m, n);
            if x >= p_lo && x <= p_hi {
                points.push(x);
            }
        }
    }
    points.sort_by(|a, b| a.partial_cmp(b).expect("finite projections"));
    PointSet::new(points, physical_window)
}

/// Square-free integers m with 0 < |m| <= n_max. Zero is excluded: it is
/// divisible by every square.
pub fn squarefree_points(n_max: u64) -> PointSet {
    let n = n_max as usize;
    let mut squarefree = vec![true; n + 1];
    let mut d = 2usize;
    while d * d <= n {
        let step = d * d;
        let mut k = step;
        while k <= n {
            squarefree[k] = false;
            k += step;
        }
        d += 1;
    }
    let mut points = Vec::new();
    for m in (1..=n).rev() {
        if squarefree[m] {
            points.push(-(m as f64));
        }
    }
    for m in 1..=n {
        if squarefree[m] {
            points.push(m as f64);
        }
    }
    PointSet::new(points, (-(n_max as f64), n_max as f64)).expect("sieve output is sorted")
}

/// Offset of the right half-lattice: 1/(2 sqrt 2).
pub const HALF_SHIFT: f64 = std::f64::consts::SQRT_2 / 4.0;

/// The union of {-n : 0 <= n <= n_max} and {1/(2 sqrt 2) + n : 0 <= n <= n_max}:
/// two half-lattices whose relative shift is irrational.
pub fn shifted_halves(n_max: u64) -> PointSet {
    let n = n_max as i64;
    let mut points = Vec::with_capacity(2 * (n as usize + 1));
    for m in -n..=0 {
        points.push(m as f64);
    }
    for m in 0..=n {
        points.push(HALF_SHIFT + m as f64);
    }
    PointSet::new(points, (-(n as f64), HALF_SHIFT + n as f64)).expect("halves are ordered")
}

/// Integers m with |m| <= n_max whose base-4 leading digit is 1, i.e.
/// 4^k <= |m| < 2*4^k for some k >= 0.
pub fn digit_parity_points(n_max: u64) -> PointSet {
    let mut blocks = Vec::new();
    let mut lo = 1u64;
    while lo <= n_max {
        let hi = (2 * lo - 1).min(n_max);
        blocks.push((lo, hi));
        match lo.checked_mul(4) {
            Some(next) => lo = next,
            None => break,
        }
    }
    let mut points = Vec::new();
    for &(lo, hi) in blocks.iter().rev() {
        for m in (lo..=hi).rev() {
            points.push(-(m as f64));
        }
    }
    for &(lo, hi) in &blocks {
        for m in lo..=hi {
            points.push(m as f64);
        }
    }
    PointSet::new(points, (-(n_max as f64), n_max as f64)).expect("blocks are ordered")
}

/// The integers in [-n_max, n_max].
pub fn integer_lattice(n_max: u64) -> PointSet {
    let n = n_max as i64;
    let points = (-n..=n).map(|m| m as f64).collect();
    PointSet::new(points, (-(n as f64), n as f64)).expect("lattice is sorted")
}
