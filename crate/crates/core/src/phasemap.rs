//! Three-level phase diagrams over x = Γ₀₂/Γ₀₁ and y = Γ₁₂/Γ₀₁.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distances::Measure;
use crate::quench::{
    classify_with, find_equidistant_pair, time_unit_rate, EquidistantPair, QuenchError, Relaxation, Verdict,
    VerdictKind, DEFAULT_SYM_TOL, DEFAULT_T_EVAL,
};
use crate::system::LevelSystem;

/// Target on |gap| relative to the larger of the two distances.
pub const BOUNDARY_REL_TOL: f64 = 1e-10;
const BOUNDARY_MAX_STEPS: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseMapError {
    #[error("invalid axis {0:?}: expected MIN:MAX:N with 0 <= MIN <= MAX and N >= 1")]
    InvalidAxis(String),
    #[error("invalid grid {0:?}: expected XMIN:XMAX:NX,YMIN:YMAX:NY")]
    InvalidGrid(String),
    #[error("invalid pairing {0:?}: expected per-measure or fixed-<measure>")]
    InvalidPairing(String),
    #[error("no measures requested")]
    NoMeasures,
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, n: usize) -> Result<Self, PhaseMapError> {
        let ok = min.is_finite() && max.is_finite() && min >= 0.0 && max >= min && n >= 1 && (n == 1 || max > min);
        if !ok {
            return Err(PhaseMapError::InvalidAxis(format!("{min}:{max}:{n}")));
        }
        Ok(Self { min, max, n })
    }

    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.min];
        }
        (0..self.n)
            .map(|k| {
                if k == self.n - 1 {
                    self.max
                } else {
                    self.min + (self.max - self.min) * k as f64 / (self.n - 1) as f64
                }
            })
            .collect()
    }
}

impl FromStr for Axis {
    type Err = PhaseMapError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PhaseMapError::InvalidAxis(s.to_string());
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let min: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let max: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        Axis::new(min, max, n).map_err(|_| bad())
    }
}

/// Parses `XMIN:XMAX:NX,YMIN:YMAX:NY`.
pub fn parse_grid(s: &str) -> Result<(Axis, Axis), PhaseMapError> {
    let (a, b) = s.split_once(',').ok_or_else(|| PhaseMapError::InvalidGrid(s.to_string()))?;
    Ok((a.parse()?, b.parse()?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pairing {
    /// Each measure classifies the pair equidistant under itself.
    PerMeasure,
    /// Every measure classifies the pair equidistant under this one.
    FixedPair(Measure),
}

impl Pairing {
    pub fn name(&self) -> String {
        match self {
            Pairing::PerMeasure => "per-measure".into(),
            Pairing::FixedPair(m) => format!("fixed-{m}"),
        }
    }
}

impl FromStr for Pairing {
    type Err = PhaseMapError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "per-measure" {
            return Ok(Pairing::PerMeasure);
        }
        s.strip_prefix("fixed-")
            .and_then(|m| m.parse().ok())
            .map(Pairing::FixedPair)
            .ok_or_else(|| PhaseMapError::InvalidPairing(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub energies: [f64; 3],
    pub beta: f64,
    pub x: Axis,
    pub y: Axis,
    pub target: f64,
    pub measures: Vec<Measure>,
    pub pairing: Pairing,
    /// Evaluation time in units of 1/Γ₀₁ (Γ₀₁ = 1 here).
    pub t_eval: f64,
    pub sym_tol: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            energies: [0.0, 1.0, 2.0],
            beta: 1.0,
            x: Axis { min: 0.0, max: 3.0, n: 61 },
            y: Axis { min: 0.0, max: 3.0, n: 61 },
            target: 0.1,
            measures: Measure::ALL.to_vec(),
            pairing: Pairing::PerMeasure,
            t_eval: DEFAULT_T_EVAL,
            sym_tol: DEFAULT_SYM_TOL,
        }
    }
}

impl SweepSpec {
    pub fn system_at(&self, x: f64, y: f64) -> Result<LevelSystem, QuenchError> {
        Ok(LevelSystem::three_level(self.energies, self.beta, 1.0, x, y)?)
    }

    fn pair_measure(&self, m: Measure) -> Measure {
        match self.pairing {
            Pairing::PerMeasure => m,
            Pairing::FixedPair(p) => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub x: f64,
    pub y: f64,
    /// One entry per requested measure, in request order.
    pub verdicts: Vec<Result<Verdict, String>>,
}

impl Cell {
    /// True when every measure produced the same verdict.
    pub fn unanimous(&self) -> Option<bool> {
        let kinds: Vec<VerdictKind> = self.verdicts.iter().map(|v| v.as_ref().ok().map(|v| v.kind)).collect::<Option<_>>()?;
        Some(kinds.windows(2).all(|w| w[0] == w[1]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub x: f64,
    pub y: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub measure: Measure,
    pub points: Vec<BoundaryPoint>,
    /// Rows without a sign change.
    pub skipped: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub spec: SweepSpec,
    /// Row-major: y outer, x inner.
    pub cells: Vec<Cell>,
    pub boundaries: Vec<Boundary>,
}

fn evaluate_cell(spec: &SweepSpec, x: f64, y: f64) -> Cell {
    let failed = |e: String| Cell { x, y, verdicts: vec![Err(e); spec.measures.len()] };
    let sys = match spec.system_at(x, y) {
        Ok(s) => s,
        Err(e) => return failed(e.to_string()),
    };
    let relax = match Relaxation::new(&sys) {
        Ok(r) => r,
        Err(e) => return failed(e.to_string()),
    };
    let t_star = spec.t_eval / time_unit_rate(&sys);
    let mut pairs: Vec<(Measure, Result<EquidistantPair, String>)> = Vec::new();
    let verdicts = spec
        .measures
        .iter()
        .map(|&m| {
            let pm = spec.pair_measure(m);
            let pair = match pairs.iter().find(|(k, _)| *k == pm) {
                Some((_, p)) => p.clone(),
                None => {
                    let p = find_equidistant_pair(&sys, pm, spec.target).map_err(|e| e.to_string());
                    pairs.push((pm, p.clone()));
                    p
                }
            };
            let pair = pair?;
            classify_with(&relax, &pair, m, t_star, spec.sym_tol).map_err(|e| e.to_string())
        })
        .collect();
    Cell { x, y, verdicts }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, PhaseMapError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| PhaseMapError::Pool(e.to_string()))
}

/// Classifies every grid cell under every requested measure using `jobs`
/// workers. Output order and content do not depend on `jobs`.
pub fn sweep(spec: &SweepSpec, jobs: usize) -> Result<PhaseDiagram, PhaseMapError> {
    if spec.measures.is_empty() {
        return Err(PhaseMapError::NoMeasures);
    }
    let coords: Vec<(f64, f64)> = spec
        .y
        .values()
        .into_iter()
        .flat_map(|y| spec.x.values().into_iter().map(move |x| (x, y)))
        .collect();
    let cells = pool(jobs)?.install(|| coords.par_iter().map(|&(x, y)| evaluate_cell(spec, x, y)).collect());
    Ok(PhaseDiagram { spec: spec.clone(), cells, boundaries: Vec::new() })
}

/// gap(x) = D_down(t*) − D_up(t*) at fixed y.
pub fn gap_at(spec: &SweepSpec, m: Measure, x: f64, y: f64) -> Result<Verdict, QuenchError> {
    let sys = spec.system_at(x, y)?;
    let relax = Relaxation::new(&sys)?;
    let pair = find_equidistant_pair(&sys, spec.pair_measure(m), spec.target)?;
    classify_with(&relax, &pair, m, spec.t_eval / time_unit_rate(&sys), spec.sym_tol)
}

fn refine_crossing(spec: &SweepSpec, m: Measure, y: f64, mut a: f64, mut ga: f64, mut b: f64) -> Result<BoundaryPoint, QuenchError> {
    let mut best = BoundaryPoint { x: a, y, gap: ga };
    for _ in 0..BOUNDARY_MAX_STEPS {
        let mid = 0.5 * (a + b);
        if mid <= a.min(b) || mid >= a.max(b) {
            break;
        }
        let v = gap_at(spec, m, mid, y)?;
        if v.gap.abs() < best.gap.abs() {
            best = BoundaryPoint { x: mid, y, gap: v.gap };
        }
        let scale = v.distance_downhill.max(v.distance_uphill);
        if v.gap.abs() <= BOUNDARY_REL_TOL * scale {
            break;
        }
        if v.gap.signum() == ga.signum() {
            a = mid;
            ga = v.gap;
        } else {
            b = mid;
        }
    }
    Ok(best)
}

/// Per row y, every x-interval of the spec grid across which the gap
/// changes sign is refined by bisection.
pub fn boundary(spec: &SweepSpec, m: Measure, y_values: &[f64]) -> Boundary {
    boundary_rows(spec, m, y_values, |_, _| None)
}

fn boundary_rows(spec: &SweepSpec, m: Measure, y_values: &[f64], known: impl Fn(f64, f64) -> Option<f64>) -> Boundary {
    let xs = spec.x.values();
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for &y in y_values {
        let gaps: Vec<Option<f64>> = xs
            .iter()
            .map(|&x| known(x, y).or_else(|| gap_at(spec, m, x, y).ok().map(|v| v.gap)))
            .collect();
        let mut found = false;
        for k in 0..xs.len().saturating_sub(1) {
            let (Some(g0), Some(g1)) = (gaps[k], gaps[k + 1]) else { continue };
            if g0 == 0.0 {
                points.push(BoundaryPoint { x: xs[k], y, gap: 0.0 });
                found = true;
            } else if g0.signum() != g1.signum() && g1 != 0.0 {
                if let Ok(p) = refine_crossing(spec, m, y, xs[k], g0, xs[k + 1]) {
                    points.push(p);
                    found = true;
                }
            }
        }
        if !found {
            skipped.push(y);
        }
    }
    Boundary { measure: m, points, skipped }
}

impl PhaseDiagram {
    pub fn cell(&self, ix: usize, iy: usize) -> &Cell {
        &self.cells[iy * self.spec.x.n + ix]
    }

    fn measure_index(&self, m: Measure) -> Option<usize> {
        self.spec.measures.iter().position(|&k| k == m)
    }

    /// Extracts boundaries for every measure on every grid row, reusing the
    /// gaps already computed by the sweep.
    pub fn with_boundaries(mut self, jobs: usize) -> Result<Self, PhaseMapError> {
        let ys = self.spec.y.values();
        let xs = self.spec.x.values();
        let this = &self;
        let boundaries: Vec<Boundary> = pool(jobs)?.install(|| {
            this.spec
                .measures
                .par_iter()
                .map(|&m| {
                    let mi = this.measure_index(m).unwrap();
                    let rows: Vec<Boundary> = ys
                        .par_iter()
                        .map(|&y| {
                            boundary_rows(&this.spec, m, &[y], |x, yy| {
                                let ix = xs.iter().position(|&v| v == x)?;
                                let iy = ys.iter().position(|&v| v == yy)?;
                                this.cell(ix, iy).verdicts[mi].as_ref().ok().map(|v| v.gap)
                            })
                        })
                        .collect();
                    let mut b = Boundary { measure: m, points: Vec::new(), skipped: Vec::new() };
                    for r in rows {
                        b.points.extend(r.points);
                        b.skipped.extend(r.skipped);
                    }
                    b
                })
                .collect()
        });
        self.boundaries = boundaries;
        Ok(self)
    }

    /// Fraction of error-free cells on which all measures agree.
    pub fn unanimity(&self) -> f64 {
        let votes: Vec<bool> = self.cells.iter().filter_map(Cell::unanimous).collect();
        if votes.is_empty() {
            return f64::NAN;
        }
        votes.iter().filter(|&&u| u).count() as f64 / votes.len() as f64
    }

    pub fn error_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.verdicts.iter().any(|v| v.is_err())).count()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,measure,verdict,gap\n");
        for c in &self.cells {
            for (m, v) in self.spec.measures.iter().zip(&c.verdicts) {
                match v {
                    Ok(v) => writeln!(s, "{},{},{},{},{:.16e}", c.x, c.y, m, v.kind.name(), v.gap).unwrap(),
                    Err(_) => writeln!(s, "{},{},{},Error,NaN", c.x, c.y, m).unwrap(),
                }
            }
        }
        s
    }

    pub fn boundaries_csv(&self) -> String {
        let mut s = String::from("measure,x,y\n");
        for b in &self.boundaries {
            for p in &b.points {
                writeln!(s, "{},{:.16e},{:.16e}", b.measure, p.x, p.y).unwrap();
            }
        }
        s
    }

    /// Cells colored by the verdicts of the first two measures (regions
    /// A/B/C) with boundary polylines on top.
    pub fn to_svg(&self) -> String {
        const W: f64 = 600.0;
        const M: f64 = 60.0;
        let (nx, ny) = (self.spec.x.n, self.spec.y.n);
        let span = |a: &Axis| if a.max > a.min { a.max - a.min } else { 1.0 };
        let (sx, sy) = (span(&self.spec.x), span(&self.spec.y));
        let px = |x: f64| M + (x - self.spec.x.min) / sx * W;
        let py = |y: f64| M + W - (y - self.spec.y.min) / sy * W;
        let (cw, ch) = (W / nx as f64, W / ny as f64);
        let mut s = String::new();
        writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="14">"#, W + 2.0 * M, W + 2.0 * M).unwrap();
        for (i, c) in self.cells.iter().enumerate() {
            let (ix, iy) = (i % nx, i / nx);
            let kinds: Vec<Option<VerdictKind>> = c.verdicts.iter().take(2).map(|v| v.as_ref().ok().map(|v| v.kind)).collect();
            let color = match kinds.as_slice() {
                [Some(a), Some(b)] if a == b && *a == VerdictKind::UphillFaster => "#d9534f",
                [Some(a), Some(b)] if a == b && *a == VerdictKind::DownhillFaster => "#428bca",
                [Some(a), Some(b)] if a == b => "#aaaaaa",
                [Some(_), Some(_)] => "#f0ad4e",
                [Some(VerdictKind::UphillFaster)] => "#d9534f",
                [Some(VerdictKind::DownhillFaster)] => "#428bca",
                [Some(_)] => "#aaaaaa",
                _ => "#ffffff",
            };
            writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#,
                M + ix as f64 * cw,
                M + W - (iy + 1) as f64 * ch,
                cw,
                ch
            )
            .unwrap();
        }
        let strokes = ["#000000", "#7b3294", "#1a9641", "#e66101"];
        for (k, b) in self.boundaries.iter().enumerate() {
            let pts: Vec<String> = b.points.iter().map(|p| format!("{:.2},{:.2}", px(p.x), py(p.y))).collect();
            if !pts.is_empty() {
                writeln!(s, r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#, pts.join(" "), strokes[k % strokes.len()]).unwrap();
                writeln!(s, r#"<text x="{}" y="{}" fill="{}">{}</text>"#, M + W + 8.0, M + 20.0 * (k + 1) as f64, strokes[k % strokes.len()], b.measure).unwrap();
            }
        }
        writeln!(s, r#"<rect x="{M}" y="{M}" width="{W}" height="{W}" fill="none" stroke="black"/>"#).unwrap();
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">Γ02/Γ01</text>"#, M + W / 2.0, W + 1.6 * M).unwrap();
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" transform="rotate(-90 {} {})">Γ12/Γ01</text>"#, M / 3.0, M + W / 2.0, M / 3.0, M + W / 2.0).unwrap();
        for (v, pos) in [(self.spec.x.min, px(self.spec.x.min)), (self.spec.x.max, px(self.spec.x.max))] {
            writeln!(s, r#"<text x="{pos:.2}" y="{}" text-anchor="middle">{v}</text>"#, M + W + 18.0).unwrap();
        }
        for (v, pos) in [(self.spec.y.min, py(self.spec.y.min)), (self.spec.y.max, py(self.spec.y.max))] {
            writeln!(s, r#"<text x="{}" y="{pos:.2}" text-anchor="end">{v}</text>"#, M - 6.0).unwrap();
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(x: f64, y: f64) -> SweepSpec {
        SweepSpec { x: Axis::new(x, x, 1).unwrap(), y: Axis::new(y, y, 1).unwrap(), measures: vec![Measure::Kl, Measure::Trace], ..Default::default() }
    }

    #[test]
    fn parsing() {
        let (x, y) = parse_grid("0:3:61,0.5:1:3").unwrap();
        assert_eq!((x.min, x.max, x.n), (0.0, 3.0, 61));
        assert_eq!(y.values(), vec![0.5, 0.75, 1.0]);
        assert!(parse_grid("0:3:61").is_err());
        assert!("3:0:5".parse::<Axis>().is_err());
        assert!("-1:0:5".parse::<Axis>().is_err());
        assert_eq!("fixed-kl".parse::<Pairing>().unwrap(), Pairing::FixedPair(Measure::Kl));
        assert_eq!("per-measure".parse::<Pairing>().unwrap(), Pairing::PerMeasure);
        assert!("fixed-x".parse::<Pairing>().is_err());
        assert_eq!(Axis::new(0.0, 3.0, 61).unwrap().values()[20], 1.0);
    }

    #[test]
    fn fig5_cells() {
        for (x, y, want) in [
            (0.0, 1.0, [VerdictKind::UphillFaster, VerdictKind::UphillFaster]),
            (2.0, 0.0, [VerdictKind::DownhillFaster, VerdictKind::DownhillFaster]),
            (1.1, 1.5, [VerdictKind::UphillFaster, VerdictKind::DownhillFaster]),
        ] {
            let d = sweep(&single(x, y), 1).unwrap();
            let got: Vec<VerdictKind> = d.cells[0].verdicts.iter().map(|v| v.as_ref().unwrap().kind).collect();
            assert_eq!(got, want, "({x},{y})");
        }
    }

    #[test]
    fn disconnected_origin_is_recorded() {
        let d = sweep(&single(0.0, 0.0), 1).unwrap();
        assert!(d.cells[0].verdicts.iter().all(|v| v.is_err()));
        assert!(d.to_csv().contains("0,0,kl,Error,NaN"));
        assert_eq!(d.error_cells(), 1);
        assert!(d.unanimity().is_nan());
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let spec = SweepSpec { x: Axis::new(0.0, 3.0, 5).unwrap(), y: Axis::new(0.0, 3.0, 4).unwrap(), ..Default::default() };
        let a = sweep(&spec, 1).unwrap().with_boundaries(1).unwrap();
        let b = sweep(&spec, 4).unwrap().with_boundaries(3).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.boundaries_csv(), b.boundaries_csv());
    }

    #[test]
    fn boundary_points_are_symmetric() {
        let spec = SweepSpec { x: Axis::new(0.0, 3.0, 7).unwrap(), measures: vec![Measure::Kl, Measure::Trace], ..Default::default() };
        let kl = boundary(&spec, Measure::Kl, &[1.5]);
        let tr = boundary(&spec, Measure::Trace, &[1.5]);
        assert!(!kl.points.is_empty() && !tr.points.is_empty());
        for p in kl.points.iter().chain(&tr.points) {
            let m = if kl.points.contains(p) { Measure::Kl } else { Measure::Trace };
            let v = gap_at(&spec, m, p.x, p.y).unwrap();
            assert_eq!(v.kind, VerdictKind::Symmetric, "{p:?}");
        }
        // region C separates the two boundaries
        assert!(kl.points[0].x > 1.1 && tr.points[0].x < 1.1, "{kl:?} {tr:?}");
    }

    #[test]
    fn svg_renders() {
        let d = sweep(&single(1.1, 1.5), 1).unwrap();
        let svg = d.to_svg();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("#f0ad4e"));
    }
}
