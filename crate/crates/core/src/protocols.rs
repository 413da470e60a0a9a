//! Advantage ratios, the optimal operating points, heatmap scans and a
//! derivative-free maximizer of the noise gain.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{qfi_cat, qfi_closed_cat, Parameter};
use crate::hilbert::CatSpec;
use crate::schedule::NoiseSchedule;

use std::f64::consts::{LN_2, SQRT_2};

/// `F_open / F_cl` from the closed forms; `> 1` is a noise advantage.
pub fn advantage_ratio(spec: &CatSpec, schedule: &NoiseSchedule, t: f64, parameter: Parameter) -> Result<f64> {
    let closed = qfi_closed_cat(spec, t, parameter)?;
    if closed == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "closed-system QFI vanishes (δE = {}, t = {t}); ratio undefined",
            spec.delta_e
        )));
    }
    let open = qfi_cat(spec, schedule, t, parameter)?;
    Ok(open.value / closed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowReport {
    /// `Δt = √(ln2/(γ̇δL²))`.
    pub window: f64,
    /// Largest window with a time-estimation advantage, `√2·ln2/δE`.
    pub threshold: f64,
    /// `√(2 ln2)/δE`, a necessary condition only.
    pub necessary_bound: f64,
    /// Advantage ratio at the window.
    pub ratio: f64,
    pub advantage: bool,
}

/// Ramp window that sets `e^{−2δL²∫γ} = 1/2`.
pub fn optimal_window_ramp(spec: &CatSpec, gamma_dot: f64) -> Result<WindowReport> {
    if !(gamma_dot > 0.0 && gamma_dot.is_finite()) {
        return Err(Error::InvalidParameter(format!("γ̇ must be > 0, got {gamma_dot}")));
    }
    if spec.delta_l == 0.0 {
        return Err(Error::InvalidParameter("δL = 0: no dephasing coupling".into()));
    }
    let window = (LN_2 / (gamma_dot * spec.delta_l * spec.delta_l)).sqrt();
    let sched = NoiseSchedule::ramp(gamma_dot, 0.0)?;
    let ratio = advantage_ratio(spec, &sched, window, Parameter::Time)?;
    let (threshold, necessary_bound) = if spec.delta_e > 0.0 {
        (SQRT_2 * LN_2 / spec.delta_e, (2.0 * LN_2).sqrt() / spec.delta_e)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Ok(WindowReport { window, threshold, necessary_bound, ratio, advantage: window < threshold })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensingTimeReport {
    /// `t = ln2/(2γδE²)`.
    pub time: f64,
    /// `4γ²δE²`; an advantage needs it above 1/2.
    pub precondition: f64,
    /// `√2·ln2/δE`.
    pub time_bound: f64,
    pub ratio: f64,
    pub advantage: bool,
}

/// Sensing time for ω estimation under constant dephasing.
pub fn optimal_time_constant(spec: &CatSpec, gamma: f64) -> Result<SensingTimeReport> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("γ must be > 0, got {gamma}")));
    }
    if spec.delta_e <= 0.0 {
        return Err(Error::InvalidParameter("δE must be > 0".into()));
    }
    let de = spec.delta_e;
    let time = LN_2 / (2.0 * gamma * de * de);
    let precondition = 4.0 * gamma * gamma * de * de;
    let ratio = 0.5 + precondition;
    Ok(SensingTimeReport {
        time,
        precondition,
        time_bound: SQRT_2 * LN_2 / de,
        ratio,
        advantage: precondition > 0.5,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
    pub scale: Scale,
}

impl Axis {
    pub fn new(name: &str, min: f64, max: f64, steps: usize, scale: Scale) -> Result<Self> {
        let a = Axis { name: name.to_string(), min, max, steps, scale };
        a.validate()?;
        Ok(a)
    }

    fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::InvalidParameter(format!("axis {}: steps must be >= 2", self.name)));
        }
        if !(self.min < self.max) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::InvalidParameter(format!("axis {}: need min < max", self.name)));
        }
        if self.scale == Scale::Log && self.min <= 0.0 {
            return Err(Error::InvalidParameter(format!("axis {}: log scale needs min > 0", self.name)));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.steps - 1;
        (0..self.steps)
            .map(|i| {
                if i == 0 {
                    return self.min;
                }
                if i == n {
                    return self.max;
                }
                let f = i as f64 / n as f64;
                match self.scale {
                    Scale::Linear => self.min + f * (self.max - self.min),
                    Scale::Log => (self.min.ln() + f * (self.max.ln() - self.min.ln())).exp(),
                }
            })
            .collect()
    }

    /// Position in `[0, 1]` along the axis.
    pub fn fraction(&self, v: f64) -> f64 {
        match self.scale {
            Scale::Linear => (v - self.min) / (self.max - self.min),
            Scale::Log => (v.ln() - self.min.ln()) / (self.max.ln() - self.min.ln()),
        }
    }
}

/// Noise family scanned on the y axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// y is a constant rate `γ` switched on at `t = 0`.
    Constant,
    /// y is a ramp slope `γ̇` starting at `t = 0`.
    Ramp,
}

impl Family {
    pub fn schedule(self, y: f64) -> Result<NoiseSchedule> {
        match self {
            Family::Constant => NoiseSchedule::constant(y, 0.0),
            Family::Ramp => NoiseSchedule::ramp(y, 0.0),
        }
    }
}

/// Scan grid: x is `ω·t`, y is the noise strength of `family`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_axis: Axis,
    pub y_axis: Axis,
    pub fixed: CatSpec,
    pub family: Family,
}

impl GridSpec {
    /// `ω·t ∈ [10⁻³, 10]`, `γ ∈ [10⁻², 10²]`, both log with 81 points,
    /// `δE = 2ω`, `ω = 1`, constant dephasing from `t = 0`.
    pub fn default_fig1() -> Self {
        GridSpec {
            x_axis: Axis::new("omega_t", 1e-3, 10.0, 81, Scale::Log).unwrap(),
            y_axis: Axis::new("gamma", 1e-2, 1e2, 81, Scale::Log).unwrap(),
            fixed: CatSpec::energy(2.0, 1.0).unwrap(),
            family: Family::Constant,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.x_axis.validate()?;
        self.y_axis.validate()?;
        if self.fixed.delta_e <= 0.0 {
            return Err(Error::InvalidParameter("grid needs δE > 0".into()));
        }
        Ok(())
    }

    /// A named grid, inline JSON, or a path to a JSON file.
    pub fn resolve(text: &str) -> Result<Self> {
        let grid: GridSpec = match text {
            "default_fig1" | "default" | "fig1" => Self::default_fig1(),
            s if s.trim_start().starts_with('{') => serde_json::from_str(s)?,
            path => serde_json::from_str(&std::fs::read_to_string(Path::new(path))?)?,
        };
        grid.validate()?;
        Ok(grid)
    }
}

impl FromStr for GridSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::resolve(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// Noise lowers the precision (`ratio < 1`).
    Hindered,
    Enhanced,
}

impl Region {
    pub fn of(ratio: f64) -> Self {
        if ratio < 1.0 {
            Region::Hindered
        } else {
            Region::Enhanced
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Region::Hindered => "hindered",
            Region::Enhanced => "enhanced",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub x: f64,
    pub y: f64,
    pub ratio: f64,
    pub region: Region,
}

#[derive(Debug, Clone, Serialize)]
pub struct Heatmap {
    pub grid: GridSpec,
    pub parameter: Parameter,
    /// Row-major with y outer.
    pub cells: Vec<Cell>,
}

impl Heatmap {
    pub fn nx(&self) -> usize {
        self.grid.x_axis.steps
    }

    pub fn ny(&self) -> usize {
        self.grid.y_axis.steps
    }

    pub fn at(&self, ix: usize, iy: usize) -> &Cell {
        &self.cells[iy * self.nx() + ix]
    }

    pub fn max_ratio(&self) -> f64 {
        self.cells.iter().map(|c| c.ratio).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn count(&self, region: Region) -> usize {
        self.cells.iter().filter(|c| c.region == region).count()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,y,ratio,region")?;
        for c in &self.cells {
            writeln!(out, "{},{},{},{}", c.x, c.y, c.ratio, c.region.as_str())?;
        }
        Ok(())
    }
}

/// Advantage ratio over the grid. Cells are evaluated in parallel and
/// returned in y-outer, x-inner order.
pub fn heatmap_scan(grid: &GridSpec, parameter: Parameter) -> Result<Heatmap> {
    grid.validate()?;
    let xs = grid.x_axis.values();
    let ys = grid.y_axis.values();
    let spec = grid.fixed;
    let nx = xs.len();
    let cells = (0..xs.len() * ys.len())
        .into_par_iter()
        .map(|i| {
            let (x, y) = (xs[i % nx], ys[i / nx]);
            let t = x / spec.omega;
            let ratio = advantage_ratio(&spec, &grid.family.schedule(y)?, t, parameter)?;
            Ok(Cell { x, y, ratio, region: Region::of(ratio) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Heatmap { grid: grid.clone(), parameter, cells })
}

/// Inclusive search range; `min == max` pins the coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub fn fixed(v: f64) -> Self {
        Range { min: v, max: v }
    }

    pub fn span(min: f64, max: f64) -> Self {
        Range { min, max }
    }

    fn is_free(&self) -> bool {
        self.max > self.min
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub t: Range,
    /// `γ` for a constant family, `γ̇` for a ramp.
    pub noise: Range,
    pub family: Family,
}

impl SearchBox {
    fn validate(&self) -> Result<()> {
        for (name, r) in [("t", self.t), ("noise", self.noise)] {
            if !(r.min > 0.0 && r.max.is_finite()) || r.max < r.min {
                return Err(Error::InvalidParameter(format!(
                    "search range {name} = [{}, {}] must satisfy 0 < min <= max",
                    r.min, r.max
                )));
            }
        }
        if !self.t.is_free() && !self.noise.is_free() {
            return Err(Error::InvalidParameter("search box is a single point".into()));
        }
        Ok(())
    }
}

impl FromStr for SearchBox {
    type Err = Error;

    /// `t=<a>[:<b>],gamma=<a>[:<b>][,family=constant|ramp]`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("malformed search box `{s}`"));
        let range = |v: &str| -> Result<Range> {
            let mut it = v.split(':');
            let a: f64 = it.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
            let b: f64 = match it.next() {
                Some(x) => x.trim().parse().map_err(|_| bad())?,
                None => a,
            };
            Ok(Range::span(a, b))
        };
        let (mut t, mut noise, mut family) = (None, None, Family::Constant);
        for part in s.split(',') {
            let (k, v) = part.split_once('=').ok_or_else(bad)?;
            match k.trim() {
                "t" => t = Some(range(v)?),
                "gamma" | "gamma_dot" | "noise" => noise = Some(range(v)?),
                "family" => {
                    family = match v.trim() {
                        "constant" | "const" => Family::Constant,
                        "ramp" => Family::Ramp,
                        _ => return Err(bad()),
                    }
                }
                _ => return Err(bad()),
            }
        }
        let b = SearchBox { t: t.ok_or_else(bad)?, noise: noise.ok_or_else(bad)?, family };
        b.validate()?;
        Ok(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerMethod {
    Grid,
    GoldenSection,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimumReport {
    pub best_params: BTreeMap<String, f64>,
    pub best_ratio: f64,
    /// Number of ratio evaluations.
    pub iterations: usize,
    pub method: OptimizerMethod,
    pub advantage: bool,
}

const COARSE_POINTS: usize = 64;
const REL_TOL: f64 = 1e-6;
const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Maximizes the advantage ratio over `search_box`: a log-spaced coarse grid
/// followed by alternating golden-section refinement of each free axis.
pub fn maximize_ratio(spec: &CatSpec, parameter: Parameter, search_box: &SearchBox) -> Result<OptimumReport> {
    search_box.validate()?;
    let family = search_box.family;
    let mut evals = 0usize;
    let mut eval = |lt: f64, lg: f64| -> Result<f64> {
        evals += 1;
        let r = advantage_ratio(spec, &family.schedule(lg.exp())?, lt.exp(), parameter)?;
        Ok(if r.is_nan() { f64::NEG_INFINITY } else { r })
    };

    let axis = |r: Range| -> Vec<f64> {
        if !r.is_free() {
            return vec![r.min.ln()];
        }
        let (a, b) = (r.min.ln(), r.max.ln());
        (0..COARSE_POINTS).map(|i| a + (b - a) * i as f64 / (COARSE_POINTS - 1) as f64).collect()
    };
    let ts = axis(search_box.t);
    let gs = axis(search_box.noise);

    let mut best = (f64::NEG_INFINITY, 0usize, 0usize);
    for (i, &lt) in ts.iter().enumerate() {
        for (j, &lg) in gs.iter().enumerate() {
            let r = eval(lt, lg)?;
            if r > best.0 {
                best = (r, i, j);
            }
        }
    }
    let (mut best_ratio, bi, bj) = best;
    let mut lt = ts[bi];
    let mut lg = gs[bj];
    let bracket = |v: &[f64], i: usize| (v[i.saturating_sub(1)], v[(i + 1).min(v.len() - 1)]);
    let (mut t_lo, mut t_hi) = bracket(&ts, bi);
    let (mut g_lo, mut g_hi) = bracket(&gs, bj);

    let mut method = OptimizerMethod::Grid;
    for _ in 0..60 {
        let before = best_ratio;
        if search_box.t.is_free() {
            let (x, r) = golden(|x| eval(x, lg), t_lo, t_hi)?;
            if r >= best_ratio {
                lt = x;
                best_ratio = r;
                method = OptimizerMethod::GoldenSection;
            }
        }
        if search_box.noise.is_free() {
            let (x, r) = golden(|x| eval(lt, x), g_lo, g_hi)?;
            if r >= best_ratio {
                lg = x;
                best_ratio = r;
                method = OptimizerMethod::GoldenSection;
            }
        }
        if (best_ratio - before).abs() <= REL_TOL * best_ratio.abs() * 1e-3 {
            break;
        }
        // re-centre the brackets on the current point, keeping their width
        let (wt, wg) = ((t_hi - t_lo) / 2.0, (g_hi - g_lo) / 2.0);
        (t_lo, t_hi) = clamp_bracket(lt, wt, &ts);
        (g_lo, g_hi) = clamp_bracket(lg, wg, &gs);
    }

    let mut best_params = BTreeMap::new();
    best_params.insert("t".to_string(), lt.exp().clamp(search_box.t.min, search_box.t.max));
    let key = match family {
        Family::Constant => "gamma",
        Family::Ramp => "gamma_dot",
    };
    best_params.insert(key.to_string(), lg.exp().clamp(search_box.noise.min, search_box.noise.max));
    Ok(OptimumReport { best_params, best_ratio, iterations: evals, method, advantage: best_ratio > 1.0 })
}

fn clamp_bracket(c: f64, half: f64, axis: &[f64]) -> (f64, f64) {
    let (a, b) = (axis[0], axis[axis.len() - 1]);
    ((c - half).max(a), (c + half).min(b))
}

/// Golden-section maximization on `[a, b]`; returns the best point seen,
/// endpoints included.
fn golden(mut f: impl FnMut(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let fa = f(a)?;
    if b <= a {
        return Ok((a, fa));
    }
    let fb = f(b)?;
    let ends = if fa >= fb { (a, fa) } else { (b, fb) };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a) > 1e-12 * (1.0 + a.abs().max(b.abs())) {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    let inner = if fc >= fd { (c, fc) } else { (d, fd) };
    Ok(if ends.1 > inner.1 { ends } else { inner })
}
