//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line is printed. Set
//! `ACCEPTANCE_ONLY=<substring>` to run a subset. Exits non-zero if any criterion fails.

use std::collections::HashMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use bhchaos::classical::sampling::seeded_rng;
use bhchaos::classical::{
    classical_energy, classical_energy_bounds, dnls_rhs, ftle_max, integrate, sample_uniform_sphere, variational_rhs,
    BoundsOptions, FtleOptions, ToleranceSpec,
};
use bhchaos::metrics::{
    eev_sigma, fit_scaling_exponent, kl_divergence, reference_pdf, spacing_ratios_with_width, window_kurtosis,
    KurtosisPooling, RatioSample, Reference,
};
use bhchaos::quantum::{build_hamiltonian, eev_hopping, spectrum, FockBasis};
use bhchaos::sweep::{run_classical_sweep, run_quantum_sweep, LambdaGrid, SweepConfig};
use bhchaos::{ChainParams, WindowGrid};
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn random_unit(len: usize, rng: &mut impl Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

// ---------------------------------------------------------------- classical

/// Worst norm and relative energy drift over the 100 conservation states.
fn drifts(tol: ToleranceSpec) -> (f64, f64) {
    let lambdas = [0.0, 1.0, 2.48, 12.33];
    let mut rng = seeded_rng(2024);
    let (mut worst_n, mut worst_e) = (0.0f64, 0.0f64);
    for i in 0..100 {
        let p = ChainParams::three_site(lambdas[i % 4], 1).unwrap();
        let s0 = sample_uniform_sphere(3, &mut rng);
        let e0 = classical_energy(&s0.coords, &p);
        let s1 = integrate(&s0, &p, 1e3, tol).unwrap();
        let e1 = classical_energy(&s1.coords, &p);
        worst_n = worst_n.max((s1.norm_sq() - s0.norm_sq()).abs());
        worst_e = worst_e.max((e1 - e0).abs() / e0.abs().max(1.0));
    }
    (worst_n, worst_e)
}

fn conservation() -> Verdict {
    let tol = 1e-8;
    let (n, e) = drifts(ToleranceSpec::default());
    verdict(
        n < tol && e < tol,
        format!("rtol=atol=1e-10: max norm drift {n:.2e}, max relative energy drift {e:.2e} (< {tol:.0e})"),
    )
}

/// Not a criterion: the same states at a tighter tolerance.
fn conservation_note() -> String {
    let tight = ToleranceSpec {
        rtol: 1e-13,
        atol: 1e-13,
        ..ToleranceSpec::default()
    };
    let (n, e) = drifts(tight);
    format!("rtol=atol=1e-13: max norm drift {n:.2e}, max relative energy drift {e:.2e}")
}

fn tangent_oracle() -> Verdict {
    let mut rng = seeded_rng(77);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..100 {
        let lambda = [0.0, 1.0, 2.48, 12.33, 50.0][i % 5];
        let p = ChainParams::three_site(lambda, 1).unwrap();
        let x = sample_uniform_sphere(3, &mut rng).coords;
        let d = random_unit(6, &mut rng);
        let mut jd = vec![0.0; 6];
        variational_rhs(&x, &d, &p, &mut jd);
        let shifted = |sign: f64| {
            let y: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + sign * h * b).collect();
            let mut f = vec![0.0; 6];
            dnls_rhs(&y, &p, &mut f);
            f
        };
        let (fp, fm) = (shifted(1.0), shifted(-1.0));
        let fd: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let err: Vec<f64> = fd.iter().zip(&jd).map(|(a, b)| a - b).collect();
        worst = worst.max((norm_sq(&err) / norm_sq(&jd)).sqrt());
    }
    verdict(worst < 1e-6, format!("max relative error {worst:.2e} (< 1e-6)"))
}

fn integrable_ftle() -> Verdict {
    let opts = FtleOptions {
        t_total: 1e4,
        ..FtleOptions::default()
    };
    let cases = [(3usize, 0.0), (2, 1.0), (2, 5.0), (2, 20.0)];
    let mut parts = Vec::new();
    let mut pass = true;
    for (ci, &(sites, lambda)) in cases.iter().enumerate() {
        let p = ChainParams::new(sites, None, lambda, 1).unwrap();
        let mut rng = seeded_rng(500 + ci as u64);
        let mut worst = f64::NEG_INFINITY;
        for s in 0..50 {
            let state = sample_uniform_sphere(sites, &mut rng);
            let r = ftle_max(&state, &p, &opts, 9000 + s);
            pass &= r.valid;
            worst = worst.max(r.lyapunov);
        }
        pass &= worst <= 1e-3;
        parts.push(format!("L={sites} lambda={lambda}: max {worst:.2e}"));
    }
    verdict(pass, format!("{} (<= 1e-3)", parts.join("; ")))
}

fn mixed_phase() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut c = SweepConfig::default();
    c.lambdas = LambdaGrid::Values(vec![2.48]);
    c.samples_per_window = 50;
    c.t_total = 1e5;
    c.window_subset = Some(vec![0, 6, 12, 15, 45, 50, 85]);
    c.workers = workers();
    c.seed = 1;
    let out = run_classical_sweep(&c, dir.path()).unwrap();
    let frac = |w: usize| out.positive_fraction.get(0, w).value;
    let mut lines = Vec::new();
    let (mut i_ok, mut ii_ok, mut iii_ok) = (false, false, false);
    for &w in c.window_subset.as_ref().unwrap() {
        let e_rel = (w + 1) as f64 / c.windows as f64;
        let f = frac(w);
        let ls: Vec<f64> = out
            .records(0, w)
            .iter()
            .filter(|r| r.record.valid)
            .map(|r| r.record.lyapunov)
            .collect();
        let both = ls.iter().any(|&l| l <= 1e-4) && ls.iter().any(|&l| l >= 1e-2);
        if let Some(f) = f {
            i_ok |= (0.25..=0.75).contains(&e_rel) && f >= 0.9;
            ii_ok |= e_rel < 0.15 && f <= 0.1;
        }
        iii_ok |= both;
        lines.push(format!(
            "w{w}(E~{e_rel:.2}) f={}{}",
            f.map_or("null".into(), |f| format!("{f:.2}")),
            if both { "*" } else { "" }
        ));
    }
    verdict(
        i_ok && ii_ok && iii_ok,
        format!(
            "(i) {} (ii) {} (iii) {} | {} [* = both <=1e-4 and >=1e-2]",
            ok(i_ok),
            ok(ii_ok),
            ok(iii_ok),
            lines.join(", ")
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "no"
    }
}

fn bounds_oracle() -> Verdict {
    let p0 = ChainParams::three_site(0.0, 1).unwrap();
    let b0 = classical_energy_bounds(&p0, &BoundsOptions::default(), 3);
    // One-particle matrix with off-diagonals -J/2 on the open chain; its extremes
    // are the roots of the cubic characteristic polynomial, +-sqrt(J12^2 + J23^2)/2.
    let (j12, j23) = (p0.couplings()[0] / 2.0, p0.couplings()[1] / 2.0);
    let mu = (j12 * j12 + j23 * j23).sqrt();
    let charpoly = |x: f64| x * (x * x - j12 * j12 - j23 * j23);
    let oracle_ok = charpoly(mu).abs() < 1e-14 && (mu - 0.90139).abs() < 5e-6;
    let lo_ok = (b0.e_min + mu).abs() < 1e-6;
    let hi_ok = (b0.e_max - mu).abs() < 1e-6;
    let p100 = ChainParams::three_site(100.0, 1).unwrap();
    let b100 = classical_energy_bounds(&p100, &BoundsOptions::default(), 3);
    verdict(
        oracle_ok && lo_ok && hi_ok && b100.e_max >= 49.5,
        format!(
            "lambda=0: [{:.9}, {:.9}] vs +-{mu:.9}; lambda=100: E_max={:.6} (>= 49.5)",
            b0.e_min, b0.e_max, b100.e_max
        ),
    )
}

// ---------------------------------------------------------------- quantum

/// Occupation vectors of `n` bosons on `l` sites, in any order.
fn all_kets(n: u32, l: usize) -> Vec<Vec<u32>> {
    if l == 1 {
        return vec![vec![n]];
    }
    (0..=n)
        .flat_map(|first| {
            all_kets(n - first, l - 1).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

/// Dense Hamiltonian by applying each operator term to each ket.
fn brute_force_matrix(p: &ChainParams) -> (Vec<Vec<u32>>, Vec<Vec<f64>>) {
    let kets = all_kets(p.bosons(), p.sites());
    let index: HashMap<Vec<u32>, usize> = kets.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
    let u = p.lambda() / f64::from(p.bosons());
    let d = kets.len();
    let mut h = vec![vec![0.0; d]; d];
    for (col, ket) in kets.iter().enumerate() {
        for &n in ket.iter() {
            // (U/2) a_i^dag a_i^dag a_i a_i
            h[col][col] += 0.5 * u * f64::from(n) * (f64::from(n) - 1.0);
        }
        for (b, &j) in p.couplings().iter().enumerate() {
            for (to, from) in [(b, b + 1), (b + 1, b)] {
                if ket[from] == 0 {
                    continue;
                }
                let amp = (f64::from(ket[from]) * f64::from(ket[to] + 1)).sqrt();
                let mut out = ket.clone();
                out[from] -= 1;
                out[to] += 1;
                h[index[&out]][col] += -0.5 * j * amp;
            }
        }
    }
    (kets, h)
}

fn quantum_construction() -> Verdict {
    let mut worst_entry = 0.0f64;
    for n in 1..=4u32 {
        for lambda in [0.0, 2.48, 12.33] {
            let p = ChainParams::three_site(lambda, n).unwrap();
            let basis = FockBasis::new(n, 3).unwrap();
            let h = build_hamiltonian(&basis, &p).unwrap();
            let (kets, bf) = brute_force_matrix(&p);
            assert_eq!(kets.len(), basis.dim());
            let pos: Vec<usize> = kets.iter().map(|k| basis.index_of(k).unwrap()).collect();
            for (a, row) in bf.iter().enumerate() {
                for (b, &v) in row.iter().enumerate() {
                    worst_entry = worst_entry.max((h.get(pos[a], pos[b]) - v).abs());
                }
            }
        }
    }

    let mut worst_trace = 0.0f64;
    for (lambda, n) in [(0.0, 10), (2.48, 20), (12.33, 25)] {
        let p = ChainParams::three_site(lambda, n).unwrap();
        let h = build_hamiltonian(&FockBasis::new(n, 3).unwrap(), &p).unwrap();
        let s = spectrum(&p, false).unwrap();
        let tr = h.trace();
        worst_trace = worst_trace.max((s.eigenvalues.iter().sum::<f64>() - tr).abs() / tr.abs().max(1.0));
    }

    // Free bosons: every level is a sum of N one-particle energies.
    let mu = ((0.75f64).powi(2) + 0.25).sqrt();
    let eps = [-mu, 0.0, mu];
    let mut worst_free = 0.0f64;
    for n in 1..=6u32 {
        let mut levels: Vec<f64> = all_kets(n, 3)
            .iter()
            .map(|occ| occ.iter().zip(&eps).map(|(&k, e)| f64::from(k) * e).sum())
            .collect();
        levels.sort_by(f64::total_cmp);
        let s = spectrum(&ChainParams::three_site(0.0, n).unwrap(), false).unwrap();
        for (a, b) in levels.iter().zip(&s.eigenvalues) {
            worst_free = worst_free.max((a - b).abs());
        }
    }
    verdict(
        worst_entry < 1e-14 && worst_trace < 1e-10 && worst_free < 1e-10,
        format!(
            "entrywise N<=4 max diff {worst_entry:.1e}; |sum E - tr H| / max(1, |tr H|) {worst_trace:.1e} (< 1e-10); free-boson N<=6 max diff {worst_free:.1e}"
        ),
    )
}

/// Composite Simpson rule, independent of the library's quadrature.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn level_constants() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (kind, want) in [(Reference::Goe, 0.53590), (Reference::Poisson, 0.38629)] {
        let mass = simpson(|r| reference_pdf(kind, r), 0.0, 1.0, 200_000);
        let mean = simpson(|r| r * reference_pdf(kind, r), 0.0, 1.0, 200_000);
        pass &= (mass - 1.0).abs() < 1e-9 && (mean - want).abs() < 1e-5;
        parts.push(format!(
            "{}: mass {mass:.12}, mean {mean:.6} (want {want})",
            kind.name()
        ));
    }
    verdict(pass, parts.join("; "))
}

struct LevelStats {
    mean: f64,
    kl_goe: f64,
    kl_poi: f64,
    ratios: usize,
    windows: usize,
}

/// Pooled spacing ratios over the windows whose upper relative edge is in `[lo, hi]`.
fn level_stats(lambda: f64, n: u32, lo: f64, hi: f64) -> LevelStats {
    let s = spectrum(&ChainParams::three_site(lambda, n).unwrap(), false).unwrap();
    let e = &s.eigenvalues;
    let grid = WindowGrid::new(e[0], e[e.len() - 1], 100).unwrap();
    let idx = grid.indices_with_upper_edge_in(lo, hi);
    let mut pooled = Vec::new();
    for &i in &idx {
        let w = &grid.windows[i];
        let levels: Vec<f64> = e.iter().copied().filter(|&x| w.contains(x)).collect();
        pooled.extend(spacing_ratios_with_width(&levels, grid.e_max - grid.e_min).values);
    }
    let sample = RatioSample {
        values: pooled,
        ..RatioSample::default()
    };
    LevelStats {
        mean: sample.mean().unwrap(),
        kl_goe: kl_divergence(&sample, Reference::Goe, 20).unwrap(),
        kl_poi: kl_divergence(&sample, Reference::Poisson, 20).unwrap(),
        ratios: sample.len(),
        windows: idx.len(),
    }
}

fn describe(tag: &str, s: &LevelStats) -> String {
    format!(
        "{tag}: mean r {:.4}, D_goe {:.3}, D_poi {:.3} ({} ratios in {} windows)",
        s.mean, s.kl_goe, s.kl_poi, s.ratios, s.windows
    )
}

fn level_statistics() -> Verdict {
    let chaotic = level_stats(2.48, 60, 0.3, 0.5);
    let regular = level_stats(0.28, 60, 0.2, 0.3);
    let a = (0.50..=0.545).contains(&chaotic.mean) && chaotic.kl_goe < chaotic.kl_poi;
    let b = (0.36..=0.42).contains(&regular.mean) && regular.kl_goe > regular.kl_poi;
    verdict(
        a && b,
        format!(
            "{} [{}]; {} [{}]",
            describe("lambda=2.48 E in [0.3,0.5]", &chaotic),
            ok(a),
            describe("lambda=0.28 E in [0.2,0.3]", &regular),
            ok(b)
        ),
    )
}

fn kurtosis_ordering() -> Verdict {
    let mut k = Vec::new();
    for (lambda, e_rel) in [(2.48, 0.4), (0.28, 0.25), (12.33, 0.65)] {
        let s = spectrum(&ChainParams::three_site(lambda, 100).unwrap(), true).unwrap();
        let e = &s.eigenvalues;
        let grid = WindowGrid::new(e[0], e[e.len() - 1], 100).unwrap();
        let w = &grid.windows[grid.nearest_upper_edge(e_rel)];
        let (kappa, states) = window_kurtosis(s.eigenvectors.as_ref().unwrap(), e, w, KurtosisPooling::PerState);
        k.push((lambda, e_rel, kappa.unwrap_or(f64::NAN), states));
    }
    let pass = k[0].2 < k[1].2 && k[1].2 < k[2].2 && k[2].2 > 16.0;
    verdict(
        pass,
        k.iter()
            .map(|(l, e, v, n)| format!("kappa1(lambda={l}, E={e}) = {v:.3} [{n} states]"))
            .collect::<Vec<_>>()
            .join(" < ")
            + " ; third > 16",
    )
}

fn eev_scaling() -> Verdict {
    let exponent = |lambda: f64, e_rel: f64| {
        let mut pts = Vec::new();
        for n in [30u32, 40, 50, 60, 70] {
            let s = spectrum(&ChainParams::three_site(lambda, n).unwrap(), true).unwrap();
            let eev = eev_hopping(&s, &FockBasis::new(n, 3).unwrap()).unwrap();
            let e = &s.eigenvalues;
            let grid = WindowGrid::new(e[0], e[e.len() - 1], 100).unwrap();
            let (sigma, _) = eev_sigma(&eev, e, &grid.windows[grid.nearest_upper_edge(e_rel)]);
            pts.push((s.dim() as f64, sigma.unwrap()));
        }
        fit_scaling_exponent(&pts).unwrap().unwrap()
    };
    let chaotic = exponent(2.48, 0.4);
    let regular = exponent(0.28, 0.25);

    let dims = [496.0, 861.0, 1326.0, 1891.0, 2556.0];
    let mut planted = 0.0f64;
    for e in [0.0, 0.1, 0.25, 0.5] {
        for c in [0.03, 1.0, 7.0] {
            let pts: Vec<(f64, f64)> = dims.iter().map(|&d: &f64| (d, c * d.powf(-e))).collect();
            planted = planted.max((fit_scaling_exponent(&pts).unwrap().unwrap() - e).abs());
        }
    }
    verdict(
        chaotic > 0.1 && regular < 0.1 && planted < 1e-10,
        format!("e(2.48, 0.4) = {chaotic:.4} (> 0.1); e(0.28, 0.25) = {regular:.4} (< 0.1); planted recovery error {planted:.1e}"),
    )
}

// ---------------------------------------------------------------- harness

fn csv_bodies(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

fn determinism_and_resumption() -> Verdict {
    let mut c = SweepConfig::default();
    c.lambdas = LambdaGrid::Values(vec![0.5, 2.48, 12.33]);
    c.windows = 8;
    c.samples_per_window = 3;
    c.t_total = 200.0;
    c.n_list = vec![10, 14, 18];
    c.seed = 5;
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_classical_sweep(&c, a.path()).unwrap();
    run_quantum_sweep(&c, a.path()).unwrap();
    let mut c2 = c.clone();
    c2.workers = 3;
    run_classical_sweep(&c2, b.path()).unwrap();
    run_quantum_sweep(&c2, b.path()).unwrap();
    let reference = csv_bodies(a.path());
    let identical = reference == csv_bodies(b.path());

    let lost = ["l000_w003.json", "l002_w007.json", "l001_w000.json"];
    for f in lost {
        fs::remove_file(a.path().join("cells/classical").join(f)).unwrap();
    }
    fs::remove_file(a.path().join("cells/quantum/l001_n0014.json")).unwrap();
    let classical = run_classical_sweep(&c, a.path()).unwrap();
    let quantum = run_quantum_sweep(&c, a.path()).unwrap();
    let resumed = classical.manifest.computed == lost.len()
        && classical.manifest.reused == 24 - lost.len()
        && quantum.manifest.computed == 1
        && csv_bodies(a.path()) == reference;
    verdict(
        identical && resumed,
        format!(
            "1 vs 3 workers bit-identical: {}; resume recomputed {} of 24 classical and {} of 9 quantum cells, outputs identical: {}",
            identical,
            classical.manifest.computed,
            quantum.manifest.computed,
            csv_bodies(a.path()) == reference
        ),
    )
}

/// Not a criterion: the regular-cell level statistics at a larger N.
fn level_statistics_n100_note() -> String {
    describe("lambda=0.28 E in [0.2,0.3] at N=100", &level_stats(0.28, 100, 0.2, 0.3))
}

fn main() {
    let only = std::env::var("ACCEPTANCE_ONLY").ok();
    let notes: [(&str, fn() -> String); 2] = [
        ("conservation", conservation_note),
        ("level statistics at N=60", level_statistics_n100_note),
    ];
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("conservation", conservation),
        ("tangent-map oracle", tangent_oracle),
        ("integrable-limit FTLE", integrable_ftle),
        ("mixed phase space", mixed_phase),
        ("classical bounds oracle", bounds_oracle),
        ("quantum construction oracle", quantum_construction),
        ("level-statistics constants", level_constants),
        ("level statistics at N=60", level_statistics),
        ("kurtosis ordering at N=100", kurtosis_ordering),
        ("EEV scaling", eev_scaling),
        ("determinism and resumption", determinism_and_resumption),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (name, f) in criteria {
        if only.as_deref().is_some_and(|o| !name.contains(o)) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| verdict(false, "panicked"));
        if !v.pass {
            failed += 1;
        }
        println!(
            "{} {name}: {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
        if !v.pass {
            for (_, note) in notes.iter().filter(|n| n.0 == name) {
                println!("     note: {}", note());
            }
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
