//! Configured experiment runs: sweeps over degrees, figure profiles and
//! checks, written as `results.csv` plus `meta.json`.

use std::f64::consts::TAU;
use std::fmt;
use std::fs;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gauss_quad::GaussLegendre;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chebyshev::{chebyshev_monic, random_monic_mesh_norms, widom_row, ChebyshevOptions, TableSettings};
use crate::curve::{CurveSpec, ExteriorMap};
use crate::error::{Error, Result};
use crate::faber::{faber_norms, FaberBasis};
use crate::precise::precise_value;
use crate::variation::{lemma_checks, pommerenke_faber_value, riemann_lebesgue_rows, LemmaRow, QuadOptions, LEMMA_DELTAS};
use crate::weighted::{weight_plan, weighted_norms, WeightPlan};

/// Refinement tolerance for Faber and weighted Faber norms.
const NORM_TOL: f64 = 1e-9;
const FIGURE1_POINTS: usize = 8192;
const FIGURE2_POINTS: usize = 1024;
const ARC_PANELS: usize = 64;
const TAIL_DELTA: f64 = 0.3;
const ORACLE_POINTS: usize = 20;
const ORACLE_DEGREES: [usize; 3] = [5, 25, 50];
const MINIMALITY_TRIALS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    FaberNorms,
    WeightedNorms,
    ChebyshevWidom,
    PointwiseProfile,
    VariationChecks,
    Figure1,
    Figure2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub base_count: usize,
    pub corner_refine_levels: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        let t = TableSettings::default();
        MeshConfig {
            base_count: t.base_count,
            corner_refine_levels: t.corner_refine_levels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub curve: CurveSpec,
    pub task: Task,
    #[serde(default)]
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub mesh: MeshConfig,
    /// Minimax solver options; the table defaults apply when absent.
    #[serde(default)]
    pub solver: Option<ChebyshevOptions>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_list must be strictly ascending".into()));
        }
        if self.n_list.contains(&0) {
            return Err(Error::Config("degrees must be at least 1".into()));
        }
        match self.task {
            Task::FaberNorms | Task::WeightedNorms | Task::ChebyshevWidom | Task::PointwiseProfile if self.n_list.is_empty() => {
                Err(Error::Config("n_list must not be empty for this task".into()))
            }
            Task::Figure1 | Task::Figure2 if self.n_list.len() > 1 => {
                Err(Error::Config("figure tasks take a single degree".into()))
            }
            Task::WeightedNorms if self.m.is_none() => Err(Error::Config("weighted_norms needs m".into())),
            _ if self.m == Some(0) => Err(Error::Config("m must be at least 1".into())),
            _ => Ok(()),
        }
    }

    /// Degrees with the task defaults filled in.
    pub fn degrees(&self) -> Vec<usize> {
        if !self.n_list.is_empty() {
            return self.n_list.clone();
        }
        match self.task {
            Task::Figure1 => vec![401],
            Task::Figure2 => vec![30],
            Task::VariationChecks => vec![25, 50, 100, 200],
            _ => Vec::new(),
        }
    }

    pub fn settings(&self) -> TableSettings {
        let d = TableSettings::default();
        TableSettings {
            base_count: self.mesh.base_count,
            corner_refine_levels: self.mesh.corner_refine_levels,
            solver: self.solver.unwrap_or(d.solver),
        }
    }
}

/// SHA-256 of the config serialized with sorted keys, without `output_dir`.
pub fn cache_key(config: &ExperimentConfig) -> String {
    let mut v = serde_json::to_value(config).expect("config serializes");
    if let Some(obj) = v.as_object_mut() {
        obj.remove("output_dir");
    }
    // serde_json maps are ordered by key, so this text is canonical
    let text = serde_json::to_string(&v).expect("value serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Bool(bool),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(i) => write!(f, "{i}"),
            Cell::Num(x) if *x != 0.0 && (x.abs() < 1e-4 || x.abs() >= 1e16) => write!(f, "{x:e}"),
            Cell::Num(x) => write!(f, "{x}"),
            Cell::Bool(b) => write!(f, "{b}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

fn num(x: f64) -> Cell {
    if x.is_finite() {
        Cell::Num(x)
    } else {
        Cell::Text(format!("{x}"))
    }
}

fn int(i: usize) -> Cell {
    Cell::Int(i as i64)
}

fn text(s: impl Into<String>) -> Cell {
    Cell::Text(s.into())
}

fn blank() -> Cell {
    text("")
}

const OK: &str = "ok";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    fn new(columns: &[&str]) -> Self {
        ResultTable {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric values of a column; blanks and text become `None`.
    pub fn numbers(&self, name: &str) -> Vec<Option<f64>> {
        let Some(i) = self.column(name) else {
            return Vec::new();
        };
        self.rows
            .iter()
            .map(|r| match &r[i] {
                Cell::Num(x) => Some(*x),
                Cell::Int(k) => Some(*k as f64),
                _ => None,
            })
            .collect()
    }

    pub fn cells(&self, name: &str) -> Vec<&Cell> {
        match self.column(name) {
            Some(i) => self.rows.iter().map(|r| &r[i]).collect(),
            None => Vec::new(),
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|c| c.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV written by [`ResultTable::write_csv`]; every cell comes back as text.
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let columns = r.headers()?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec?.iter().map(text).collect());
        }
        Ok(ResultTable { columns, rows })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub cache_key: String,
    pub version: String,
    pub task: Task,
    pub rows: usize,
    pub wall_time_s: f64,
    pub cached: bool,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub table: ResultTable,
    pub meta: Meta,
    pub dir: PathBuf,
}

/// Runs the configured task, or reuses a cached table with the same key,
/// and writes `results.csv` and `meta.json` into the output directory.
pub fn run_experiment(config: &ExperimentConfig, use_cache: bool) -> Result<RunOutput> {
    config.validate()?;
    let key = cache_key(config);
    let dir = config.output_dir.clone();
    fs::create_dir_all(&dir)?;
    let cache_file = dir.join("cache").join(format!("{key}.json"));
    let start = Instant::now();
    let cached = if use_cache && cache_file.exists() {
        serde_json::from_str::<ResultTable>(&fs::read_to_string(&cache_file)?).ok()
    } else {
        None
    };
    let was_cached = cached.is_some();
    let table = match cached {
        Some(t) => t,
        None => {
            let t = compute_table(config)?;
            fs::create_dir_all(cache_file.parent().expect("cache dir"))?;
            fs::write(&cache_file, serde_json::to_string(&t)?)?;
            t
        }
    };
    let meta = Meta {
        cache_key: key,
        version: env!("CARGO_PKG_VERSION").to_string(),
        task: config.task,
        rows: table.rows.len(),
        wall_time_s: start.elapsed().as_secs_f64(),
        cached: was_cached,
        config: config.clone(),
    };
    table.write_csv(fs::File::create(dir.join("results.csv"))?)?;
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(RunOutput { table, meta, dir })
}

/// Computes the task's table without touching the file system.
pub fn compute_table(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let map = ExteriorMap::from_spec(&config.curve)?;
    let ns = config.degrees();
    match config.task {
        Task::FaberNorms => Ok(faber_task(&map, &ns, config)),
        Task::WeightedNorms => Ok(weighted_task(&map, &ns, config)),
        Task::ChebyshevWidom => Ok(widom_task(&map, &ns, config)),
        Task::PointwiseProfile => pointwise_task(&map, &ns),
        Task::VariationChecks => variation_task(&map, &ns),
        Task::Figure1 => figure1_task(&map, ns[0]),
        Task::Figure2 => figure2_task(&map, ns[0], config),
    }
}

fn faber_task(map: &ExteriorMap, ns: &[usize], config: &ExperimentConfig) -> ResultTable {
    let mut t = ResultTable::new(&["n", "faber_norm", "argmax_theta", "refine_levels", "status"]);
    let n_max = *ns.last().expect("nonempty");
    let mesh = config.settings().mesh_for(map, n_max);
    let res = FaberBasis::new(map, n_max).and_then(|b| faber_norms(&b, ns, &mesh, NORM_TOL));
    match res {
        Ok(est) => {
            for (&n, e) in ns.iter().zip(est) {
                t.push(vec![int(n), num(e.value), num(e.argmax_theta), int(e.refine_levels_used), text(OK)]);
            }
        }
        Err(e) => {
            for &n in ns {
                t.push(vec![int(n), blank(), blank(), blank(), text(e.to_string())]);
            }
        }
    }
    t
}

fn weighted_task(map: &ExteriorMap, ns: &[usize], config: &ExperimentConfig) -> ResultTable {
    let mut t = ResultTable::new(&["n", "faber_norm", "weighted_norm", "d_m", "status"]);
    let m = config.m.expect("validated");
    let n_max = *ns.last().expect("nonempty");
    let mesh = config.settings().mesh_for(map, n_max);
    let run = || -> Result<(WeightPlan, Vec<f64>, Vec<Option<f64>>)> {
        let plan = weight_plan(map, m)?;
        let basis = FaberBasis::new(map, n_max)?;
        let fab: Vec<f64> = faber_norms(&basis, ns, &mesh, NORM_TOL)?.iter().map(|e| e.value).collect();
        let valid: Vec<usize> = ns.iter().copied().filter(|&n| n > plan.d_m).collect();
        let q = if valid.is_empty() {
            Vec::new()
        } else {
            weighted_norms(&basis, &plan, &valid, &mesh, NORM_TOL)?
        };
        let mut it = q.into_iter();
        let w = ns.iter().map(|&n| if n > plan.d_m { it.next().map(|e| e.value) } else { None }).collect();
        Ok((plan, fab, w))
    };
    match run() {
        Ok((plan, fab, w)) => {
            for ((&n, f), q) in ns.iter().zip(fab).zip(w) {
                let status = if q.is_some() { OK.to_string() } else { Error::DegreeTooLow { n, d: plan.d_m }.to_string() };
                t.push(vec![int(n), num(f), q.map_or_else(blank, num), int(plan.d_m), text(status)]);
            }
        }
        Err(e) => {
            for &n in ns {
                t.push(vec![int(n), blank(), blank(), blank(), text(e.to_string())]);
            }
        }
    }
    t
}

fn widom_task(map: &ExteriorMap, ns: &[usize], config: &ExperimentConfig) -> ResultTable {
    let mut t = ResultTable::new(&[
        "n",
        "faber_norm",
        "weighted_norm",
        "cheb_norm",
        "widom",
        "sandwich_ok",
        "converged",
        "iterations",
        "status",
    ]);
    let settings = config.settings();
    let plan = match config.m {
        Some(m) if !map.corners().is_empty() => Some(weight_plan(map, m)),
        _ => None,
    };
    let plan_note = match &plan {
        Some(Err(e)) => format!("weight: {e}"),
        _ => OK.to_string(),
    };
    let plan = plan.and_then(|p| p.ok());
    let rows: Vec<_> = ns.par_iter().map(|&n| widom_row(map, n, plan.as_ref(), &settings)).collect();
    for (&n, r) in ns.iter().zip(rows) {
        match r {
            Ok(r) => t.push(vec![
                int(n),
                num(r.faber_norm),
                r.weighted_norm.map_or_else(blank, num),
                num(r.cheb_norm),
                num(r.widom),
                Cell::Bool(r.sandwich_ok),
                Cell::Bool(r.converged),
                int(r.iterations),
                text(plan_note.clone()),
            ]),
            Err(e) => t.push(vec![
                int(n),
                blank(),
                blank(),
                blank(),
                blank(),
                Cell::Bool(false),
                Cell::Bool(false),
                int(0),
                text(e.to_string()),
            ]),
        }
    }
    t
}

/// Corner preimages plus ten smooth points spread over the middle of the
/// arcs between corners (or evenly around a corner-free curve).
pub fn profile_points(map: &ExteriorMap) -> Vec<(f64, bool)> {
    let mut pts: Vec<(f64, bool)> = map.corners().iter().map(|c| (c.theta, true)).collect();
    let mut corners = map.corner_thetas();
    corners.sort_by(|a, b| a.total_cmp(b));
    let count: usize = 10;
    if corners.is_empty() {
        pts.extend((0..count).map(|j| (TAU * (j as f64 + 0.5) / count as f64, false)));
        return pts;
    }
    let arcs = corners.len();
    let per_arc = count.div_ceil(arcs);
    for j in 0..count {
        let arc = j % arcs;
        let slot = j / arcs;
        let a = corners[arc];
        let b = if arc + 1 < arcs { corners[arc + 1] } else { corners[0] + TAU };
        let frac = 0.2 + 0.6 * (slot as f64 + 0.5) / per_arc as f64;
        pts.push(((a + frac * (b - a)).rem_euclid(TAU), false));
    }
    pts
}

fn pointwise_task(map: &ExteriorMap, ns: &[usize]) -> Result<ResultTable> {
    let mut t = ResultTable::new(&["n", "theta", "point", "value", "limit", "distance", "status"]);
    let n_max = *ns.last().expect("nonempty");
    let basis = FaberBasis::new(map, n_max)?;
    let pts = profile_points(map);
    for &n in ns {
        for &(theta, corner) in &pts {
            let limit = map.lambda_at(theta);
            let precise = precise_value(map, theta, n)?;
            let (v, distance) = match precise {
                Some(c) => (c.modulus, c.distance),
                None => {
                    let v = basis.normalized_value_at(theta, n).norm();
                    (v, (v - limit).abs())
                }
            };
            t.push(vec![
                int(n),
                num(theta),
                text(if corner { "corner" } else { "smooth" }),
                num(v),
                num(limit),
                num(distance),
                text(OK),
            ]);
        }
    }
    Ok(t)
}

fn lemma_cells(r: &LemmaRow) -> Vec<Cell> {
    vec![
        text(r.check.clone()),
        num(r.theta),
        num(r.param),
        num(r.lhs),
        text(r.bound_form.clone()),
        Cell::Bool(r.pass),
    ]
}

/// Smooth sample points for the cross-check with the recurrence.
pub fn oracle_points(map: &ExteriorMap, count: usize) -> Vec<f64> {
    (0..)
        .map(|j| TAU * (j as f64 + 0.37) / count as f64)
        .filter(|&t| map.corners().iter().all(|c| crate::curve::angle_distance(c.theta, t) > 0.05))
        .take(count)
        .collect()
}

fn variation_task(map: &ExteriorMap, ns: &[usize]) -> Result<ResultTable> {
    let mut t = ResultTable::new(&["check", "theta", "param", "lhs", "bound_form", "pass"]);
    let opts = QuadOptions::default();
    for r in lemma_checks(map, &LEMMA_DELTAS, &opts)? {
        t.push(lemma_cells(&r));
    }
    for r in riemann_lebesgue_rows(map, ns, TAIL_DELTA, &opts)? {
        t.push(lemma_cells(&r));
    }
    let n_max = *ORACLE_DEGREES.last().expect("nonempty");
    let basis = FaberBasis::new(map, n_max)?;
    let pts = oracle_points(map, ORACLE_POINTS);
    let jobs: Vec<(f64, usize)> = pts.iter().flat_map(|&th| ORACLE_DEGREES.iter().map(move |&n| (th, n))).collect();
    let diffs: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(th, n)| Ok((pommerenke_faber_value(map, th, n, &opts)?.value - basis.value_at(th, n)).norm()))
        .collect();
    for (&(th, n), d) in jobs.iter().zip(diffs) {
        let d = d?;
        t.push(lemma_cells(&LemmaRow {
            check: "faber_oracle".into(),
            theta: th,
            param: n as f64,
            lhs: d,
            bound_form: "1e-3".into(),
            pass: d < 1e-3,
        }));
    }
    Ok(t)
}

fn figure1_task(map: &ExteriorMap, n: usize) -> Result<ResultTable> {
    let mut t = ResultTable::new(&["t", "abs_f"]);
    let basis = FaberBasis::new(map, n)?;
    let vals: Vec<f64> = (0..FIGURE1_POINTS)
        .into_par_iter()
        .map(|j| basis.value_at(TAU * j as f64 / FIGURE1_POINTS as f64, n).norm())
        .collect();
    for (j, v) in vals.into_iter().enumerate() {
        t.push(vec![num(j as f64 / FIGURE1_POINTS as f64), num(v)]);
    }
    Ok(t)
}

/// Arc length `s(theta) = int_a^theta |psi'(e^{it})| dt` on `[a, b]`, with
/// its inverse by bisection.
pub struct ArcLength<'a> {
    map: &'a ExteriorMap,
    cuts: Vec<f64>,
    cumulative: Vec<f64>,
    rule: GaussLegendre,
}

impl<'a> ArcLength<'a> {
    pub fn new(map: &'a ExteriorMap, a: f64, b: f64, panels: usize) -> Result<Self> {
        if !(b > a) || panels == 0 {
            return Err(Error::InvalidParams("arc needs a < b and at least one panel".into()));
        }
        let rule = GaussLegendre::new(NonZeroUsize::new(20).expect("nonzero"));
        let cuts: Vec<f64> = (0..=panels).map(|i| a + (b - a) * i as f64 / panels as f64).collect();
        let mut arc = ArcLength {
            map,
            cuts,
            cumulative: vec![0.0],
            rule,
        };
        let mut acc = 0.0;
        for i in 0..panels {
            acc += arc.piece(arc.cuts[i], arc.cuts[i + 1]);
            arc.cumulative.push(acc);
        }
        Ok(arc)
    }

    fn speed(&self, t: f64) -> f64 {
        let w = num_complex::Complex64::from_polar(1.0, t);
        self.map.psi_prime_unchecked(w).norm()
    }

    fn piece(&self, x0: f64, x1: f64) -> f64 {
        self.rule.integrate(x0, x1, |t| self.speed(t))
    }

    pub fn total(&self) -> f64 {
        *self.cumulative.last().expect("nonempty")
    }

    pub fn length_to(&self, theta: f64) -> f64 {
        let i = match self.cuts.iter().rposition(|&c| c <= theta) {
            Some(i) => i.min(self.cuts.len() - 2),
            None => return 0.0,
        };
        self.cumulative[i] + self.piece(self.cuts[i], theta.min(self.cuts[self.cuts.len() - 1]))
    }

    /// Parameter at arc length `s` from the start.
    pub fn theta_at(&self, s: f64) -> f64 {
        let (mut lo, mut hi) = (self.cuts[0], self.cuts[self.cuts.len() - 1]);
        if s <= 0.0 {
            return lo;
        }
        if s >= self.total() {
            return hi;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.length_to(mid) < s {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-14 {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

fn figure2_task(map: &ExteriorMap, n: usize, config: &ExperimentConfig) -> Result<ResultTable> {
    let mut corners = map.corner_thetas();
    corners.sort_by(|a, b| a.total_cmp(b));
    if corners.len() < 2 {
        return Err(Error::Config("figure2 needs a curve with at least two corners".into()));
    }
    let settings = config.settings();
    let mesh = settings.mesh_for(map, n);
    let cheb = chebyshev_monic(map, n, &mesh, &settings.solver)?;
    let basis = FaberBasis::new(map, n)?;
    let arc = ArcLength::new(map, corners[0], corners[1], ARC_PANELS)?;
    let total = arc.total();
    let mut t = ResultTable::new(&["s", "theta", "abs_t", "abs_f"]);
    let rows: Vec<(f64, f64, f64, f64)> = (0..=FIGURE2_POINTS)
        .into_par_iter()
        .map(|j| {
            let s = total * j as f64 / FIGURE2_POINTS as f64;
            let th = arc.theta_at(s);
            (s, th, cheb.value_at(th).norm(), basis.value_at(th, n).norm())
        })
        .collect();
    for (s, th, a, b) in rows {
        t.push(vec![num(s), num(th), num(a), num(b)]);
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &str, pass: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        pass,
        detail,
    }
}

fn max_of(v: &[Option<f64>]) -> f64 {
    v.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Task-specific invariants of a computed table.
pub fn verify_table(config: &ExperimentConfig, table: &ResultTable) -> Result<Vec<Check>> {
    let map = ExteriorMap::from_spec(&config.curve)?;
    let mut out = Vec::new();
    let statuses_ok = |t: &ResultTable| t.cells("status").iter().all(|c| matches!(c, Cell::Text(s) if s == OK));
    match config.task {
        Task::FaberNorms => {
            let v = table.numbers("faber_norm");
            out.push(check("status", statuses_ok(table), String::new()));
            let low = v.iter().flatten().copied().fold(f64::INFINITY, f64::min);
            out.push(check("faber_norm >= 1", v.iter().all(|x| x.is_some_and(|x| x >= 1.0 - 1e-9)), format!("min {low}")));
        }
        Task::WeightedNorms => {
            let f = table.numbers("faber_norm");
            let q = table.numbers("weighted_norm");
            out.push(check("faber rows", f.iter().all(|x| x.is_some()), String::new()));
            let low = q.iter().flatten().copied().fold(f64::INFINITY, f64::min);
            out.push(check("weighted_norm >= 1", q.iter().flatten().all(|&x| x >= 1.0 - 1e-9), format!("min {low}")));
        }
        Task::ChebyshevWidom => {
            let w = table.numbers("widom");
            out.push(check("status", statuses_ok(table), String::new()));
            let low = w.iter().flatten().copied().fold(f64::INFINITY, f64::min);
            out.push(check("widom >= 1 - 1e-6", w.iter().all(|x| x.is_some_and(|x| x >= 1.0 - 1e-6)), format!("min {low}")));
            let sandwich = table.cells("sandwich_ok").iter().all(|c| **c == Cell::Bool(true));
            out.push(check("sandwich", sandwich, String::new()));
            let conv = table.cells("converged").iter().all(|c| **c == Cell::Bool(true));
            out.push(check("converged", conv, String::new()));
            let settings = config.settings();
            for &n in &config.degrees() {
                let mesh = settings.mesh_for(&map, n);
                let r = chebyshev_monic(&map, n, &mesh, &settings.solver)?;
                let tm = r.max_on(&mesh.thetas);
                let best = random_monic_mesh_norms(&map, n, &mesh.thetas, MINIMALITY_TRIALS, config.seed)
                    .into_iter()
                    .fold(f64::INFINITY, f64::min);
                out.push(check(&format!("minimality n={n}"), tm <= best + 1e-9, format!("{tm} vs best trial {best}")));
            }
        }
        Task::PointwiseProfile => {
            let v = table.numbers("value");
            out.push(check("finite values", v.iter().all(|x| x.is_some()), String::new()));
            let (n, th, pt, val, dist) = (
                table.numbers("n"),
                table.numbers("theta"),
                table.cells("point"),
                table.numbers("value"),
                table.numbers("distance"),
            );
            let n_max = n.iter().flatten().fold(0.0, |a: f64, &b| a.max(b));
            let mut bad_trend = Vec::new();
            let mut bad_final = Vec::new();
            let mut seen: Vec<f64> = Vec::new();
            for i in 0..table.rows.len() {
                let (Some(t), Some(d)) = (th[i], dist[i]) else { continue };
                // rows are grouped by ascending n, so the previous row for
                // this theta is the next lower degree
                if let Some(j) = (0..i).rev().find(|&j| th[j] == Some(t)) {
                    if dist[j].is_none_or(|p| d >= p) {
                        bad_trend.push(format!("theta={t} n={}", n[i].unwrap_or(f64::NAN)));
                    }
                }
                if n[i] == Some(n_max) {
                    let corner = matches!(pt[i], Cell::Text(s) if s == "corner");
                    let lam = map.lambda_at(t);
                    let ok = if corner {
                        val[i].is_some_and(|x| x >= lam - 0.2 && x <= lam + 0.1)
                    } else {
                        d < 0.1
                    };
                    if !ok {
                        bad_final.push(format!("theta={t}"));
                    }
                }
                if !seen.contains(&t) {
                    seen.push(t);
                }
            }
            out.push(check("distance to limit decreases in n", bad_trend.is_empty(), bad_trend.join("; ")));
            out.push(check(
                &format!("values near limits at n={n_max}"),
                bad_final.is_empty(),
                if bad_final.is_empty() {
                    format!("{} points", seen.len())
                } else {
                    bad_final.join("; ")
                },
            ));
        }
        Task::VariationChecks => {
            let i = table.column("pass").expect("pass column");
            let fails: Vec<String> = table
                .rows
                .iter()
                .filter(|r| r[i] != Cell::Bool(true))
                .map(|r| format!("{} theta={} param={}", r[0], r[1], r[2]))
                .collect();
            out.push(check("all variation checks", fails.is_empty(), fails.join("; ")));
        }
        Task::Figure1 => {
            let m = max_of(&table.numbers("abs_f"));
            out.push(check("max |F_n| in (1, 1.55)", m > 1.0 && m < 1.55, format!("max {m}")));
            let (peaks, away) = corner_lobes(&map, table);
            let elevated = !peaks.is_empty() && peaks.iter().all(|&p| p > 1.0 && p > away + 0.05);
            out.push(check(
                "elevated lobe at every corner",
                elevated,
                format!("corner peaks {peaks:?}, max away from corners {away}"),
            ));
        }
        Task::Figure2 => {
            let mt = max_of(&table.numbers("abs_t"));
            let mf = max_of(&table.numbers("abs_f"));
            out.push(check("max|F_n| > max|T_n|", mf > mt, format!("{mf} vs {mt}")));
        }
    }
    Ok(out)
}

/// Peak of a figure1 profile within `0.05` (in `t = theta / 2pi`) of each
/// corner, and its maximum at distance `>= 0.1` from every corner.
pub fn corner_lobes(map: &ExteriorMap, table: &ResultTable) -> (Vec<f64>, f64) {
    let pts: Vec<(f64, f64)> = table
        .numbers("t")
        .into_iter()
        .zip(table.numbers("abs_f"))
        .filter_map(|(t, v)| Some((t?, v?)))
        .collect();
    let dist = |a: f64, b: f64| {
        let d = (a - b).rem_euclid(1.0);
        d.min(1.0 - d)
    };
    let corners: Vec<f64> = map.corner_thetas().iter().map(|c| c / TAU).collect();
    let peaks = corners
        .iter()
        .map(|&c| pts.iter().filter(|p| dist(p.0, c) < 0.05).map(|p| p.1).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let away = pts
        .iter()
        .filter(|p| corners.iter().all(|&c| dist(p.0, c) >= 0.1))
        .map(|p| p.1)
        .fold(f64::NEG_INFINITY, f64::max);
    (peaks, away)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(text).unwrap()
    }

    #[test]
    fn strict_schema() {
        assert!(ExperimentConfig::from_json(r#"{"curve":{"kind":"deltoid"},"task":"faber_norms","n_list":[1],"extra":1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"curve":{"kind":"deltoid"},"task":"faber_norms","n_list":[3,2]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"curve":{"kind":"deltoid"},"task":"weighted_norms","n_list":[3]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"curve":{"kind":"deltoid"},"task":"faber_norms"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"curve":{"kind":"deltoid"},"task":"nope","n_list":[1]}"#).is_err());
        let c = cfg(r#"{"curve":{"kind":"lune"},"task":"figure1"}"#);
        assert_eq!(c.degrees(), vec![401]);
        assert_eq!(c.output_dir, PathBuf::from("results"));
    }

    #[test]
    fn cache_key_examples() {
        let a = cfg(r#"{"curve":{"kind":"ellipse","c":0.5},"task":"faber_norms","n_list":[1,2],"seed":3}"#);
        let b = cfg(r#"{"seed":3,"n_list":[1,2],"task":"faber_norms","curve":{"c":0.5,"kind":"ellipse"}}"#);
        assert_eq!(cache_key(&a), cache_key(&b));
        let c = cfg(r#"{"curve":{"kind":"ellipse","c":0.5},"task":"faber_norms","n_list":[1,3],"seed":3}"#);
        assert_ne!(cache_key(&a), cache_key(&c));
        let d = ExperimentConfig {
            output_dir: PathBuf::from("/elsewhere"),
            ..a.clone()
        };
        assert_eq!(cache_key(&a), cache_key(&d));
        assert_eq!(cache_key(&a).len(), 64);
    }

    #[test]
    fn faber_task_on_ellipse() {
        let c = cfg(r#"{"curve":{"kind":"ellipse","c":0.5},"task":"faber_norms","n_list":[1,5,10]}"#);
        let t = compute_table(&c).unwrap();
        for (n, v) in [1, 5, 10].iter().zip(t.numbers("faber_norm")) {
            assert!((v.unwrap() - (1.0 + 0.5f64.powi(*n))).abs() < 1e-8);
        }
        assert!(verify_table(&c, &t).unwrap().iter().all(|c| c.pass));
    }

    #[test]
    fn weighted_rows_below_weight_length() {
        let c = cfg(r#"{"curve":{"kind":"deltoid"},"task":"weighted_norms","n_list":[2,10],"m":2}"#);
        let t = compute_table(&c).unwrap();
        let q = t.numbers("weighted_norm");
        assert!(q[0].is_none() && q[1].is_some());
        let status = t.cells("status");
        assert!(matches!(status[0], Cell::Text(s) if s.contains("d_m")));
        assert_eq!(*status[1], Cell::Text("ok".into()));
    }

    #[test]
    fn widom_on_circle() {
        let c = cfg(r#"{"curve":{"kind":"circle"},"task":"chebyshev_widom","n_list":[1,2,3,4,5,6,7,8]}"#);
        let t = compute_table(&c).unwrap();
        for w in t.numbers("widom") {
            assert!((w.unwrap() - 1.0).abs() < 1e-6);
        }
        assert!(verify_table(&c, &t).unwrap().iter().all(|c| c.pass));
    }

    #[test]
    fn solver_failures_become_row_status() {
        // the ellipse has no corners, so no weight can be built
        let c = cfg(r#"{"curve":{"kind":"ellipse","c":0.5},"task":"weighted_norms","n_list":[5],"m":2}"#);
        let t = compute_table(&c).unwrap();
        assert!(matches!(t.cells("status")[0], Cell::Text(s) if s.contains("no corners")));
    }

    #[test]
    fn profile_points_avoid_corners() {
        let d = ExteriorMap::deltoid();
        let pts = profile_points(&d);
        assert_eq!(pts.iter().filter(|p| p.1).count(), 3);
        assert_eq!(pts.iter().filter(|p| !p.1).count(), 10);
        for (t, corner) in pts {
            if !corner {
                assert!(d.corners().iter().all(|c| crate::curve::angle_distance(c.theta, t) > 0.35));
            }
        }
    }

    #[test]
    fn arc_length_of_circle_and_deltoid() {
        let c = ExteriorMap::circle(2.0).unwrap();
        let a = ArcLength::new(&c, 0.0, 1.0, 8).unwrap();
        assert!((a.total() - 2.0).abs() < 1e-12);
        assert!((a.theta_at(1.0) - 0.5).abs() < 1e-12);
        let d = ExteriorMap::deltoid();
        let a1 = ArcLength::new(&d, 0.0, TAU / 3.0, 64).unwrap();
        let a2 = ArcLength::new(&d, 0.0, TAU / 3.0, 128).unwrap();
        // the three-cusped hypocycloid with r = 1/2 has perimeter 16r
        assert!((a1.total() - 8.0 / 3.0).abs() < 1e-9, "{}", a1.total());
        assert!((a1.total() - a2.total()).abs() < 1e-6);
        let th = a1.theta_at(0.7);
        assert!((a1.length_to(th) - 0.7).abs() < 1e-10);
    }

    #[test]
    fn runs_write_outputs_and_reuse_cache() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            r#"{{"curve":{{"kind":"ellipse","c":0.5}},"task":"pointwise_profile","n_list":[5,10],"output_dir":{}}}"#,
            serde_json::to_string(dir.path()).unwrap()
        );
        let c = cfg(&text);
        let first = run_experiment(&c, true).unwrap();
        assert!(!first.meta.cached);
        let body1 = fs::read_to_string(dir.path().join("results.csv")).unwrap();
        let second = run_experiment(&c, true).unwrap();
        assert!(second.meta.cached);
        let body2 = fs::read_to_string(dir.path().join("results.csv")).unwrap();
        assert_eq!(body1, body2);
        let fresh = run_experiment(&c, false).unwrap();
        assert!(!fresh.meta.cached);
        assert_eq!(body1, fs::read_to_string(dir.path().join("results.csv")).unwrap());
        let meta: Meta = serde_json::from_str(&fs::read_to_string(dir.path().join("meta.json")).unwrap()).unwrap();
        assert_eq!(meta.cache_key, cache_key(&c));
        let back = ResultTable::read_csv(body1.as_bytes()).unwrap();
        assert_eq!(back.columns, first.table.columns);
        assert_eq!(back.rows.len(), 2 * 10);
    }


    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn cache_key_ignores_field_order_and_output_dir(
                ns in prop::collection::btree_set(1usize..50, 1..6),
                seed in any::<u64>(),
                c in 0.05f64..0.95,
            ) {
                let list = ns.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",");
                let a = format!(r#"{{"curve":{{"kind":"ellipse","c":{c}}},"task":"faber_norms","n_list":[{list}],"seed":{seed}}}"#);
                let b = format!(r#"{{"output_dir":"elsewhere","seed":{seed},"n_list":[{list}],"task":"faber_norms","curve":{{"c":{c},"kind":"ellipse"}}}}"#);
                prop_assert_eq!(cache_key(&cfg(&a)), cache_key(&cfg(&b)));
                let other = format!(r#"{{"curve":{{"kind":"ellipse","c":{c}}},"task":"faber_norms","n_list":[{list}],"seed":{}}}"#, seed ^ 1);
                prop_assert_ne!(cache_key(&cfg(&a)), cache_key(&cfg(&other)));
            }
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(12))]
            #[test]
            fn tables_are_rectangular(ns in prop::collection::btree_set(1usize..30, 1..5), task in 0usize..3) {
                let list = ns.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",");
                let task = ["faber_norms", "pointwise_profile", "chebyshev_widom"][task];
                let c = cfg(&format!(r#"{{"curve":{{"kind":"deltoid"}},"task":"{task}","n_list":[{list}]}}"#));
                let t = compute_table(&c).unwrap();
                prop_assert!(!t.rows.is_empty());
                prop_assert!(t.rows.iter().all(|r| r.len() == t.columns.len()));
            }
        }
    }
}
