//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Each criterion also has a wall-clock budget.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use faberlab::chebyshev::random_monic_mesh_norms;
use faberlab::experiment::{compute_table, oracle_points, profile_points, verify_table, Cell, ExperimentConfig, ResultTable};
use faberlab::faber::{faber_norms, faber_sequence, map_series};
use faberlab::precise::precise_value;
use faberlab::variation::{lemma_checks, pommerenke_faber_value, riemann_lebesgue_rows, QuadOptions, LEMMA_DELTAS};
use faberlab::{chebyshev_monic, ExteriorMap, FaberBasis, TableSettings};
use num_complex::Complex64;
use rayon::prelude::*;

type Outcome = (bool, String);
/// Name, wall-clock budget in seconds, check.
type Criterion = (&'static str, u64, fn() -> Outcome);

fn config(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json).expect("valid config")
}

fn table(json: &str) -> (ExperimentConfig, ResultTable) {
    let cfg = config(json);
    let t = compute_table(&cfg).expect("table");
    (cfg, t)
}

fn col(t: &ResultTable, name: &str) -> Vec<f64> {
    t.numbers(name).into_iter().map(|x| x.unwrap_or(f64::NAN)).collect()
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn all_ok(t: &ResultTable) -> bool {
    t.cells("status").iter().all(|c| matches!(c, Cell::Text(s) if s == "ok"))
}

fn circle_exactness() -> Outcome {
    let map = ExteriorMap::circle(1.0).unwrap();
    // the default stopping gap of 1e-6 bounds the coefficients only to ~1e-6
    let mut s = TableSettings::default();
    s.solver.tol = 1e-9;
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for n in 1..=20 {
        let r = chebyshev_monic(&map, n, &s.mesh_for(&map, n), &s.solver).unwrap();
        let lower = r.t.coeffs[..n].iter().map(|c| c.norm()).fold(0.0, f64::max);
        worst.0 = worst.0.max(lower);
        worst.1 = worst.1.max((r.norm - 1.0).abs());
        worst.2 = worst.2.max((r.widom - 1.0).abs());
    }
    let ok = worst.0 < 1e-7 && worst.1 <= 1e-6 && worst.2 <= 1e-6;
    (ok, format!("solver tol 1e-9, max lower coeff {:.1e}, max |norm-1| {:.1e}, max |W-1| {:.1e}", worst.0, worst.1, worst.2))
}

fn ellipse_closed_form() -> Outcome {
    let c = 0.5;
    let map = ExteriorMap::ellipse(c).unwrap();
    // power sums s_n = w^n + (c/w)^n obey s_{n+1} = z s_n - c s_{n-1}
    let polys = faber_sequence(&map_series(&map, 6).unwrap(), 6).unwrap();
    let mut s: Vec<Vec<f64>> = vec![vec![2.0], vec![0.0, 1.0]];
    for k in 1..6 {
        let mut next = vec![0.0; k + 2];
        for (j, a) in s[k].iter().enumerate() {
            next[j + 1] += a;
        }
        for (j, a) in s[k - 1].iter().enumerate() {
            next[j] -= c * a;
        }
        s.push(next);
    }
    let coeff_err = (1..=6)
        .flat_map(|n| polys[n].coeffs.iter().zip(&s[n]).map(|(a, b)| (a - Complex64::new(*b, 0.0)).norm()).collect::<Vec<_>>())
        .fold(0.0, f64::max);
    let ns: Vec<usize> = (1..=40).collect();
    let basis = FaberBasis::new(&map, 40).unwrap();
    let mesh = map.boundary_mesh(1024, 0);
    let norms = faber_norms(&basis, &ns, &mesh, 1e-10).unwrap();
    let norm_err = ns
        .iter()
        .zip(&norms)
        .map(|(&n, e)| (e.value - (1.0 + c.powi(n as i32))).abs())
        .fold(0.0, f64::max);
    (
        coeff_err < 1e-12 && norm_err < 1e-6,
        format!("coefficients n<=6 off by {coeff_err:.1e}, max |norm - (1+c^n)| {norm_err:.1e}"),
    )
}

fn cross_oracle() -> Outcome {
    let opts = QuadOptions::default();
    let mut worst = 0.0f64;
    let mut count = 0;
    for map in [ExteriorMap::ellipse(0.5).unwrap(), ExteriorMap::deltoid()] {
        let basis = FaberBasis::new(&map, 50).unwrap();
        let pts = oracle_points(&map, 20);
        assert_eq!(pts.len(), 20);
        let jobs: Vec<(f64, usize)> = pts.iter().flat_map(|&t| [5usize, 25, 50].map(|n| (t, n))).collect();
        let diffs: Vec<f64> = jobs
            .par_iter()
            .map(|&(t, n)| (pommerenke_faber_value(&map, t, n, &opts).unwrap().value - basis.value_at(t, n)).norm())
            .collect();
        count += diffs.len();
        worst = worst.max(max(&diffs));
    }
    (worst < 1e-3, format!("{count} comparisons, max difference {worst:.2e}"))
}

fn pointwise_limits() -> Outcome {
    let map = ExteriorMap::deltoid();
    let ns = [100usize, 200, 400];
    let pts = profile_points(&map);
    let corners = pts.iter().filter(|p| p.1).count();
    let smooth = pts.len() - corners;
    let mut ok = corners == 3 && smooth == 10;
    let mut cusp_400 = Vec::new();
    let mut smooth_400 = 0.0f64;
    for &(theta, corner) in &pts {
        let vals: Vec<_> = ns.iter().map(|&n| precise_value(&map, theta, n).unwrap().expect("Laurent map")).collect();
        ok &= vals.windows(2).all(|w| w[1].distance < w[0].distance);
        let last = vals[2];
        if corner {
            ok &= (1.8..=2.1).contains(&last.modulus);
            cusp_400.push(last.modulus);
        } else {
            ok &= last.distance < 0.1;
            smooth_400 = smooth_400.max(last.distance);
        }
    }
    // the tabulated profile must agree with the direct evaluation
    let (cfg, t) = table(r#"{"curve":{"kind":"deltoid"},"task":"pointwise_profile","n_list":[100,200,400]}"#);
    ok &= all_ok(&t) && verify_table(&cfg, &t).unwrap().iter().all(|c| c.pass);
    (
        ok,
        format!("cusp values at n=400 {cusp_400:?}, max mid-arc distance {smooth_400:.2e}, distances decrease over {ns:?}"),
    )
}

fn norm_ceiling() -> Outcome {
    let list = |a: usize, b: usize| (a..=b).map(|n| n.to_string()).collect::<Vec<_>>().join(",");
    let (_, d) = table(&format!(r#"{{"curve":{{"kind":"deltoid"}},"task":"faber_norms","n_list":[{}]}}"#, list(300, 400)));
    let (_, l) = table(&format!(r#"{{"curve":{{"kind":"lune"}},"task":"faber_norms","n_list":[{}]}}"#, list(300, 401)));
    let dmax = max(&col(&d, "faber_norm"));
    let lv = col(&l, "faber_norm");
    let lmax = max(&lv);
    let l401 = *lv.last().unwrap();
    let ok = all_ok(&d) && all_ok(&l) && d.rows.len() == 101 && l.rows.len() == 102 && dmax <= 2.05 && lmax <= 1.55 && l401 > 1.0;
    (ok, format!("deltoid max {dmax:.6}, lune max {lmax:.6}, lune ||F_401|| {l401:.6}"))
}

fn weighted_bound() -> Outcome {
    let list = (300..=400).map(|n| n.to_string()).collect::<Vec<_>>().join(",");
    let (_, t) = table(&format!(r#"{{"curve":{{"kind":"deltoid"}},"task":"weighted_norms","n_list":[{list}],"m":8}}"#));
    let f = col(&t, "faber_norm");
    let q = col(&t, "weighted_norm");
    let bound = 2f64.powf(3.0 / 8.0) + 0.25 + 0.1;
    let qmax = max(&q);
    let below = f.iter().zip(&q).all(|(f, q)| q < f);
    let gap = f.iter().zip(&q).map(|(f, q)| f - q).fold(f64::INFINITY, f64::min);
    let ok = all_ok(&t) && t.rows.len() == 101 && qmax <= bound && below;
    (ok, format!("max ||Q_n,8|| {qmax:.6} (bound {bound:.4}), min ||F_n|| - ||Q_n,8|| {gap:.4}"))
}

fn widom_sandwich() -> Outcome {
    let (cfg, t) = table(r#"{"curve":{"kind":"deltoid"},"task":"chebyshev_widom","n_list":[10,20,30],"m":2}"#);
    let (f, q, w) = (col(&t, "faber_norm"), col(&t, "weighted_norm"), col(&t, "widom"));
    let conv = t.cells("converged").iter().all(|c| **c == Cell::Bool(true));
    let eps = 1e-6;
    let chain = (0..3).all(|i| w[i] >= 1.0 - eps && w[i] <= q[i] + eps && w[i] <= f[i] + eps);
    let ok = all_ok(&t) && chain && w[2] < w[0] && conv && verify_table(&cfg, &t).unwrap().iter().all(|c| c.pass);
    (ok, format!("W {w:.6?}, ||Q_n,2|| {q:.4?}, ||F_n|| {f:.6?}, converged {conv}"))
}

fn lemma_suite() -> Outcome {
    let opts = QuadOptions::default();
    let ellipse = lemma_checks(&ExteriorMap::ellipse(0.5).unwrap(), &LEMMA_DELTAS, &opts).unwrap();
    let windows: Vec<_> = ellipse.iter().filter(|r| r.check == "window").collect();
    let mut thetas: Vec<f64> = windows.iter().map(|r| r.theta).collect();
    thetas.dedup();
    let mut ellipse_ok = !thetas.is_empty();
    let mut last_window = 0.0f64;
    for &th in &thetas {
        let lv: Vec<f64> = windows.iter().filter(|r| r.theta == th && r.param >= 0.1 - 1e-12).map(|r| r.lhs).collect();
        ellipse_ok &= lv.len() == 3 && lv.windows(2).all(|w| w[1] < w[0]) && lv.iter().all(|&v| v >= 1.0 - 1e-9);
        last_window = last_window.max(lv[2]);
    }

    let deltoid = ExteriorMap::deltoid();
    let rows = lemma_checks(&deltoid, &LEMMA_DELTAS, &opts).unwrap();
    let cusp = rows.iter().filter(|r| r.check == "corner_window").map(|r| r.lhs).fold(0.0, f64::max);
    let cusp_ok = rows.iter().any(|r| r.check == "corner_window") && cusp <= 2.1;
    let outside: Vec<_> = ellipse.iter().chain(&rows).filter(|r| r.check == "outside_point").collect();
    let outside_ok = !outside.is_empty() && outside.iter().all(|r| r.pass);
    let outside_small = outside.iter().filter(|r| r.param == 0.025).map(|r| r.lhs).fold(0.0, f64::max);
    let all_rows_ok = ellipse.iter().chain(&rows).all(|r| r.pass);

    let tail = riemann_lebesgue_rows(&deltoid, &[25, 50, 100, 200], 0.3, &opts).unwrap();
    let sups: Vec<f64> = tail.iter().map(|r| r.lhs).collect();
    let tail_ok = sups.windows(2).all(|w| w[1] < w[0]);

    let ok = ellipse_ok && cusp_ok && outside_ok && all_rows_ok && tail_ok;
    (
        ok,
        format!(
            "ellipse windows decrease to {last_window:.4} at delta 0.1, cusp windows <= {cusp:.4}, \
             off-arc variation at delta 0.025 <= {outside_small:.4} (pi + 0.05 = {:.4}), tail sup {sups:.4?}",
            PI + 0.05
        ),
    )
}

fn figures() -> Outcome {
    let (c1, f1) = table(r#"{"curve":{"kind":"lune"},"task":"figure1"}"#);
    let (c2, f2) = table(r#"{"curve":{"kind":"deltoid"},"task":"figure2"}"#);
    let m1 = max(&col(&f1, "abs_f"));
    let (mt, mf) = (max(&col(&f2, "abs_t")), max(&col(&f2, "abs_f")));
    let checks: Vec<_> = verify_table(&c1, &f1).unwrap().into_iter().chain(verify_table(&c2, &f2).unwrap()).collect();
    let lobes = checks.iter().find(|c| c.name.contains("lobe")).map(|c| c.detail.clone()).unwrap_or_default();
    let ok = m1 > 1.0 && m1 < 1.55 && mf > mt && checks.iter().all(|c| c.pass);
    (ok, format!("figure1 max {m1:.4}, {lobes}; figure2 max|F_30| {mf:.4} > max|T_30| {mt:.4}"))
}

fn minimality() -> Outcome {
    let s = TableSettings::default();
    let mut ok = true;
    let mut margin = f64::INFINITY;
    for map in [ExteriorMap::ellipse(0.5).unwrap(), ExteriorMap::deltoid()] {
        for n in [5usize, 10, 15] {
            let mesh = s.mesh_for(&map, n);
            let r = chebyshev_monic(&map, n, &mesh, &s.solver).unwrap();
            let tn = r.max_on(&mesh.thetas);
            let trials = random_monic_mesh_norms(&map, n, &mesh.thetas, 20, 0x5eed + n as u64);
            ok &= trials.len() == 20 && trials.iter().all(|&p| tn <= p + 1e-9);
            margin = margin.min(trials.iter().map(|p| p - tn).fold(f64::INFINITY, f64::min));
        }
    }
    (ok, format!("120 trials, smallest ||p||_mesh - ||T_n||_mesh {margin:.4}"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 circle exactness", 10, circle_exactness),
        ("2 ellipse closed form", 10, ellipse_closed_form),
        ("3 cross-oracle", 120, cross_oracle),
        ("4 pointwise limits", 120, pointwise_limits),
        ("5 Faber norm ceiling", 300, norm_ceiling),
        ("6 weighted Faber bound", 300, weighted_bound),
        ("7 Widom sandwich", 600, widom_sandwich),
        ("8 variation suite", 300, lemma_suite),
        ("9 figures", 300, figures),
        ("10 minimality", 60, minimality),
    ];
    let mut failed = 0;
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let (ok, detail) = run();
        let took = start.elapsed();
        let in_time = took < Duration::from_secs(budget);
        let pass = ok && in_time;
        failed += usize::from(!pass);
        println!(
            "{} [{name}] {detail} ({:.2}s, budget {budget}s{})",
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            if in_time { "" } else { ", over budget" }
        );
    }
    if failed > 0 {
        println!("{failed} of 10 criteria failed");
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}
