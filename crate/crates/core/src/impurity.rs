//! Gini impurity, the weighted split score, and the worst-case split score
//! when an attacker may reallocate samples that lie close to the threshold.
//!
//! The attacker places `x` of the `i1` movable label-1 samples and `y` of the
//! `i0` movable label-0 samples on the left side and the rest on the right,
//! choosing `(x, y)` to maximize the split score. The objective is concave in
//! `(x, y)` and its unconstrained maximizers form a straight line, so the
//! integer maximizer is recovered from a handful of points next to the
//! constrained continuous maximum instead of by iterating over samples.

/// Slack used when snapping fractional movable counts to integers.
const INT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassCounts {
    pub n0: f64,
    pub n1: f64,
}

impl ClassCounts {
    pub fn new(n0: f64, n1: f64) -> Self {
        ClassCounts { n0, n1 }
    }

    pub fn total(self) -> f64 {
        self.n0 + self.n1
    }
}

/// Counts on both sides of a candidate split.
///
/// `l*`, `r*` and `i*` are the (possibly fractional) counts that feed the
/// score; `li*` and `ri*` are the raw numbers of movable samples that
/// naturally sit left and right of the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SplitCounts {
    pub l0: f64,
    pub l1: f64,
    pub r0: f64,
    pub r1: f64,
    pub i0: f64,
    pub i1: f64,
    pub li0: f64,
    pub li1: f64,
    pub ri0: f64,
    pub ri1: f64,
}

impl SplitCounts {
    /// Counts with no movable samples.
    pub fn plain(l0: f64, l1: f64, r0: f64, r1: f64) -> Self {
        SplitCounts {
            l0,
            l1,
            r0,
            r1,
            ..Default::default()
        }
    }

    /// Counts where every movable sample is attacker controlled and the
    /// movable samples on the left are `(li0, li1)`.
    #[allow(clippy::too_many_arguments)]
    pub fn with_intersection(l0: f64, l1: f64, r0: f64, r1: f64, li0: f64, li1: f64, ri0: f64, ri1: f64) -> Self {
        SplitCounts {
            l0,
            l1,
            r0,
            r1,
            i0: li0 + ri0,
            i1: li1 + ri1,
            li0,
            li1,
            ri0,
            ri1,
        }
    }

    /// Point the attacker starts from: the share of the movable mass that
    /// currently sits on the left, as `(x, y)` = (label 1, label 0).
    pub fn start_point(&self) -> (f64, f64) {
        let share = |i: f64, li: f64, ri: f64| if li + ri > 0.0 { i * li / (li + ri) } else { 0.0 };
        (share(self.i1, self.li1, self.ri1), share(self.i0, self.li0, self.ri0))
    }

    pub fn totals(&self) -> ClassCounts {
        ClassCounts::new(self.l0 + self.r0 + self.i0, self.l1 + self.r1 + self.i1)
    }

    /// Split score after the attacker places `x` movable label-1 and `y`
    /// movable label-0 samples on the left.
    pub fn score_at(&self, x: f64, y: f64) -> f64 {
        split_score(
            ClassCounts::new(self.l0 + y, self.l1 + x),
            ClassCounts::new(self.r0 + self.i0 - y, self.r1 + self.i1 - x),
        )
    }

    fn swapped(&self) -> SplitCounts {
        SplitCounts {
            l0: self.l1,
            l1: self.l0,
            r0: self.r1,
            r1: self.r0,
            i0: self.i1,
            i1: self.i0,
            li0: self.li1,
            li1: self.li0,
            ri0: self.ri1,
            ri1: self.ri0,
        }
    }
}

pub fn gini(c: ClassCounts) -> f64 {
    let n = c.total();
    if n <= 0.0 {
        return 0.0;
    }
    let p0 = c.n0 / n;
    let p1 = c.n1 / n;
    1.0 - p0 * p0 - p1 * p1
}

/// Size-weighted mean of the Gini impurity of both sides. Lower is better.
pub fn split_score(left: ClassCounts, right: ClassCounts) -> f64 {
    let n = left.total() + right.total();
    if n <= 0.0 {
        return 0.0;
    }
    (left.total() * gini(left) + right.total() * gini(right)) / n
}

/// The line `y = intercept + slope * x` of unconstrained maximizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionLine {
    pub slope: f64,
    pub intercept: f64,
}

impl SolutionLine {
    pub fn at(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("solution line undefined: no label-1 mass")]
pub struct DegenerateLine;

pub fn solution_line(c: &SplitCounts) -> Result<SolutionLine, DegenerateLine> {
    let ones = c.l1 + c.r1 + c.i1;
    if ones <= 0.0 {
        return Err(DegenerateLine);
    }
    Ok(SolutionLine {
        slope: (c.l0 + c.r0 + c.i0) / ones,
        intercept: (c.l1 * (c.r0 + c.i0) - c.l0 * (c.r1 + c.i1)) / ones,
    })
}

/// Orthogonal projection of `start` onto `line`.
pub fn project_to_line(line: SolutionLine, start: (f64, f64)) -> (f64, f64) {
    let (x0, y0) = start;
    let b = line.slope;
    let x = (x0 + b * (y0 - line.intercept)) / (1.0 + b * b);
    (x, line.at(x))
}

/// Upper bound on the attacker's score: the parent impurity, which every
/// point of the solution line attains.
pub fn line_value(c: &SplitCounts) -> f64 {
    gini(c.totals())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdversarialScore {
    pub score: f64,
    /// Movable label-1 samples placed on the left.
    pub x_star: u32,
    /// Movable label-0 samples placed on the left.
    pub y_star: u32,
}

/// Worst-case split score when both labels may move.
pub fn adversarial_score_two_class(c: &SplitCounts) -> AdversarialScore {
    if c.i0 <= 0.0 && c.i1 <= 0.0 {
        return plain(c);
    }
    let x_max = int_floor(c.i1);
    let y_max = int_floor(c.i0);
    let start = c.start_point();
    let line = solution_line(c).ok();
    let (xc, yc) = box_maximizer(c, line, start);

    let mut picker = Picker::new(c, start, x_max, y_max);
    // The natural placement is always available to the attacker.
    picker.offer(start.0.round(), start.1.round());
    for x in [xc.floor(), xc.ceil()] {
        for y in [yc.floor(), yc.ceil()] {
            picker.offer(x, y);
        }
    }
    // The objective is flat along the line, so the ends of the segment inside
    // the box can hold better integer points than the projection does.
    if let Some((line, lo, hi)) = line.and_then(|l| segment_in_box(c, l)) {
        for end in [lo, hi] {
            for x in [end.floor(), end.ceil()] {
                let y = line.at(x);
                picker.offer(x, y.floor());
                picker.offer(x, y.ceil());
            }
        }
    }
    if let Some(line) = line {
        // Integer points next to the line at the neighbouring integer x and y.
        for x in [xc.floor(), xc.ceil()] {
            let y = line.at(x);
            picker.offer(x, y.floor());
            picker.offer(x, y.ceil());
        }
        if line.slope > 0.0 {
            for y in [yc.floor(), yc.ceil()] {
                let x = (y - line.intercept) / line.slope;
                picker.offer(x.floor(), y);
                picker.offer(x.ceil(), y);
            }
        }
    }
    picker.best()
}

/// Worst-case split score when only label 1 may move (`i0` must be 0).
pub fn adversarial_score_one_class(c: &SplitCounts) -> AdversarialScore {
    debug_assert!(c.i0 <= 0.0, "label 0 must not be movable");
    if c.i1 <= 0.0 {
        return plain(c);
    }
    let x_max = int_floor(c.i1);
    let start = c.start_point();
    let mut picker = Picker::new(c, start, x_max, 0.0);
    let zeros = c.l0 + c.r0;
    if zeros > 0.0 {
        let x = (c.l0 * c.r1 + c.l0 * c.i1 - c.l1 * c.r0) / zeros;
        picker.offer(x.floor(), 0.0);
        picker.offer(x.ceil(), 0.0);
    } else {
        picker.offer(0.0, 0.0);
        picker.offer(x_max, 0.0);
    }
    picker.best()
}

/// Same as [`adversarial_score_one_class`] with the roles of the labels swapped.
pub fn adversarial_score_benign_only(c: &SplitCounts) -> AdversarialScore {
    let s = adversarial_score_one_class(&c.swapped());
    AdversarialScore {
        score: s.score,
        x_star: 0,
        y_star: s.x_star,
    }
}

/// Dispatches on which labels the attacker controls.
pub fn adversarial_score(c: &SplitCounts, attack0: bool, attack1: bool) -> AdversarialScore {
    match (attack0, attack1) {
        (true, true) => adversarial_score_two_class(c),
        (false, true) => adversarial_score_one_class(c),
        (true, false) => adversarial_score_benign_only(c),
        (false, false) => plain(c),
    }
}

fn plain(c: &SplitCounts) -> AdversarialScore {
    AdversarialScore {
        score: c.score_at(0.0, 0.0),
        x_star: 0,
        y_star: 0,
    }
}

fn int_floor(v: f64) -> f64 {
    (v + INT_EPS).floor().max(0.0)
}

/// Continuous maximizer of the objective over `[0, i1] x [0, i0]`.
///
/// If the solution line crosses the box, the answer is the point of the
/// crossing segment closest to `start`. Otherwise the maximum lies on the
/// boundary, where each edge has a closed-form 1-D critical point.
fn box_maximizer(c: &SplitCounts, line: Option<SolutionLine>, start: (f64, f64)) -> (f64, f64) {
    let ym = c.i0.max(0.0);
    if let Some((line, lo, hi)) = line.and_then(|l| segment_in_box(c, l)) {
        let (xp, _) = project_to_line(line, start);
        let x = xp.clamp(lo, hi);
        return (x, line.at(x).clamp(0.0, ym));
    }
    let xm = c.i1.max(0.0);
    let edges = [
        (edge_x(c, 0.0), 0.0),
        (edge_x(c, ym), ym),
        (0.0, edge_y(c, 0.0)),
        (xm, edge_y(c, xm)),
    ];
    let mut best = edges[0];
    let mut best_score = c.score_at(best.0, best.1);
    for &p in &edges[1..] {
        let s = c.score_at(p.0, p.1);
        if s > best_score {
            best = p;
            best_score = s;
        }
    }
    best
}

/// The x-range `[lo, hi]` over which the solution line lies inside the box.
fn segment_in_box(c: &SplitCounts, line: SolutionLine) -> Option<(SolutionLine, f64, f64)> {
    let (xm, ym) = (c.i1.max(0.0), c.i0.max(0.0));
    let (mut lo, mut hi) = (0.0f64, xm);
    if line.slope > 0.0 {
        lo = lo.max(-line.intercept / line.slope);
        hi = hi.min((ym - line.intercept) / line.slope);
    } else if !(-INT_EPS..=ym + INT_EPS).contains(&line.intercept) {
        return None;
    }
    (lo <= hi + INT_EPS).then_some((line, lo, hi.max(lo)))
}

/// Maximizer over x in `[0, i1]` with y fixed.
fn edge_x(c: &SplitCounts, y: f64) -> f64 {
    let a = c.l0 + y;
    let b = c.r0 + c.i0 - y;
    if a + b <= 0.0 {
        return 0.0;
    }
    ((a * (c.r1 + c.i1) - b * c.l1) / (a + b)).clamp(0.0, c.i1.max(0.0))
}

/// Maximizer over y in `[0, i0]` with x fixed.
fn edge_y(c: &SplitCounts, x: f64) -> f64 {
    let a = c.l1 + x;
    let b = c.r1 + c.i1 - x;
    if a + b <= 0.0 {
        return 0.0;
    }
    ((a * (c.r0 + c.i0) - b * c.l0) / (a + b)).clamp(0.0, c.i0.max(0.0))
}

/// Keeps the best integer candidate. Ties go to the candidate closest to the
/// start point, then to the smaller `(x, y)`.
struct Picker<'a> {
    counts: &'a SplitCounts,
    start: (f64, f64),
    x_max: f64,
    y_max: f64,
    best: Option<(f64, f64, f64, f64)>,
}

impl<'a> Picker<'a> {
    fn new(counts: &'a SplitCounts, start: (f64, f64), x_max: f64, y_max: f64) -> Self {
        Picker {
            counts,
            start,
            x_max,
            y_max,
            best: None,
        }
    }

    fn offer(&mut self, x: f64, y: f64) {
        if !x.is_finite() || !y.is_finite() {
            return;
        }
        let x = x.clamp(0.0, self.x_max);
        let y = y.clamp(0.0, self.y_max);
        let score = self.counts.score_at(x, y);
        let dist = (x - self.start.0).powi(2) + (y - self.start.1).powi(2);
        let better = match self.best {
            None => true,
            Some((bs, bd, bx, by)) => {
                score > bs || (score == bs && (dist < bd || (dist == bd && (x, y) < (bx, by))))
            }
        };
        if better {
            self.best = Some((score, dist, x, y));
        }
    }

    fn best(self) -> AdversarialScore {
        let (score, _, x, y) = self.best.expect("at least one candidate offered");
        AdversarialScore {
            score,
            x_star: x as u32,
            y_star: y as u32,
        }
    }
}
