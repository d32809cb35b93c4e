//! One line per acceptance criterion, run as a plain binary so the lines
//! stay visible in `cargo test` output.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use quasisym::config::Fixture;
use quasisym::imaging::cyclic_shift;
use quasisym::pipeline::{analyze, AnalysisRequest, Session};
use quasisym::spectral::{dft_at, fft_grid};
use quasisym::symmetry::{fundamental_phases, module_holohedry, mod1_distance, overall_deviation, DeviationReport, PointGroup};
use quasisym::symmorphism::{apply_gauge_fundamentals, chi_r_fundamentals};
use quasisym::zmodule::{matrix_in_basis, IntMatrix, ModuleBasis, TOL_INT};
use quasisym::{Freq, Image, Mat2};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

type Check = fn() -> Result<Outcome, String>;

fn fixture(name: &str) -> Fixture {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", &format!("{name}.toml")]
        .iter()
        .collect();
    Fixture::load(&path).unwrap_or_else(|e| panic!("{e}"))
}

fn run(f: &Fixture) -> Result<(Session<f64>, Duration), String> {
    let img: Image = f.render().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let s = analyze(&img, &f.name, &f.analysis).map_err(|e| e.to_string())?;
    Ok((s, start.elapsed()))
}

fn report<'a>(s: &'a Session<f64>, label: &str) -> Option<&'a DeviationReport<f64>> {
    s.point_group
        .reports
        .iter()
        .chain(&s.point_group.rejected)
        .find(|r| r.label == label)
}

fn max_of(s: &Session<f64>, label: &str) -> f64 {
    report(s, label).map_or(f64::NAN, |r| r.max())
}

fn fraction_of(s: &Session<f64>, label: &str) -> f64 {
    report(s, label).map_or(f64::NAN, |r| r.stats.fraction_below)
}

fn shift_robustness() -> Result<Outcome, String> {
    let (centred, t0) = run(&fixture("p4mm"))?;
    let (shifted, t1) = run(&fixture("p4mm_shifted"))?;
    let d4 = PointGroup::Dihedral(4);
    let (r4, h) = (max_of(&shifted, "r4"), max_of(&shifted, "h"));
    let slowest = t0.max(t1);
    let pass = centred.point_group.group == d4
        && shifted.point_group.group == d4
        && r4 <= 1e-2
        && h <= 1e-3
        && slowest < Duration::from_secs(60);
    Ok(Outcome::new(
        pass,
        format!(
            "centred {}, shifted {}; shifted max r4 {r4:.3e} (<= 1e-2), h {h:.3e} (<= 1e-3); {:.1}s (< 60s)",
            centred.point_group.group,
            shifted.point_group.group,
            slowest.as_secs_f64()
        ),
    ))
}

fn square_lattice_trio() -> Result<Outcome, String> {
    let (p4, _) = run(&fixture("p4"))?;
    let (p4m, _) = run(&fixture("p4mm"))?;
    let (p4g, _) = run(&fixture("p4g"))?;
    let mirror_rejected = p4
        .point_group
        .candidates
        .iter()
        .any(|c| c.group == PointGroup::Dihedral(4) && !c.accepted);
    let pass = p4.point_group.group == PointGroup::Cyclic(4)
        && mirror_rejected
        && p4m.verdict() == "D4, symmorphic"
        && p4g.verdict() == "D4, non-symmorphic";
    Ok(Outcome::new(
        pass,
        format!(
            "p4 {} (h fraction {:.3}), p4m {}, p4g {}",
            p4.verdict(),
            fraction_of(&p4, "h"),
            p4m.verdict(),
            p4g.verdict()
        ),
    ))
}

fn appendix_exactness() -> Result<Outcome, String> {
    let f = fixture("p4g");
    let img: Image = f.render().map_err(|e| e.to_string())?;
    let f = Fixture {
        analysis: AnalysisRequest {
            basis: vec![[10.0, 10.0], [20.0, 10.0]],
            ..f.analysis.clone()
        },
        ..f
    };
    let (session, _) = run(&f)?;
    let basis = session.basis().map_err(|e| e.to_string())?;
    let h = Mat2::mirror(0.0);
    let map = matrix_in_basis(&h, &basis, TOL_INT).map_err(|e| e.to_string())?;
    let expected = IntMatrix::from_rows(&[vec![-3, -4], vec![2, 3]]).map_err(|e| e.to_string())?;
    let phases = fundamental_phases(&img, &h, &basis, session.noise_floor).map_err(|e| e.to_string())?;
    let phase_ok = mod1_distance(phases[0], 0.0) < 0.02 && mod1_distance(phases[1], 0.5) < 0.02;
    let trace = session.symmorphism.trace.as_ref();
    let candidates = trace.map_or(0, |t| t.candidates.len());
    let all_fail = trace.is_some_and(|t| t.candidates.iter().all(|c| !c.accepted));
    let pass = map.matrix == expected
        && map.residual < 1e-6
        && phase_ok
        && candidates == 4
        && all_fail
        && !session.symmorphism.symmorphic;
    Ok(Outcome::new(
        pass,
        format!(
            "M(h) = {} (residual {:.1e}); phases ({:.4}, {:.4}); {candidates} gauge candidates, all failed: {all_fail}; {}",
            map.matrix,
            map.residual,
            phases[0],
            phases[1],
            session.verdict()
        ),
    ))
}

fn threshold_calibration() -> Result<Outcome, String> {
    let degraded = fixture("p4mm_degraded");
    let mut clean = degraded.clone();
    clean.degrade = Default::default();
    let (d, _) = run(&degraded)?;
    let (c, _) = run(&clean)?;
    let (mirror, rotation) = (max_of(&d, "h"), max_of(&d, "r4"));
    let (clean_mirror, clean_rotation) = (max_of(&c, "h"), max_of(&c, "r4"));
    let pass = (0.005..=0.1).contains(&mirror)
        && (0.03..=0.3).contains(&rotation)
        && mirror >= 10.0 * clean_mirror
        && rotation >= 10.0 * clean_rotation;
    Ok(Outcome::new(
        pass,
        format!(
            "degraded max h {mirror:.4} (in [0.005, 0.1]), r4 {rotation:.4} (in [0.03, 0.3]); clean max h {clean_mirror:.1e}, r4 {clean_rotation:.1e}"
        ),
    ))
}

fn penrose() -> Result<Outcome, String> {
    let f = fixture("penrose");
    let (s, t) = run(&f)?;
    let (r10, h) = (fraction_of(&s, "r10"), fraction_of(&s, "h"));
    let pass = s.holohedry.group == PointGroup::Dihedral(10)
        && r10 >= 0.85
        && h >= 0.85
        && s.verdict() == "D10, symmorphic"
        && f.analysis.fl <= 6
        && t < Duration::from_secs(300);
    Ok(Outcome::new(
        pass,
        format!(
            "holohedry {}; fraction r10 {r10:.3}, h {h:.3} (>= 0.85); {}; fl {}; {:.1}s (< 300s)",
            s.holohedry.group,
            s.verdict(),
            f.analysis.fl,
            t.as_secs_f64()
        ),
    ))
}

fn generalized_penrose() -> Result<Outcome, String> {
    let (s, _) = run(&fixture("penrose_gamma07"))?;
    let (r10, r5, h) = (fraction_of(&s, "r10"), fraction_of(&s, "r5"), fraction_of(&s, "h"));
    let pass = r10 < 0.5 && r5 >= 0.85 && h >= 0.85 && s.verdict() == "D5, symmorphic";
    Ok(Outcome::new(
        pass,
        format!("fraction r10 {r10:.3} (< 0.5), r5 {r5:.3}, h {h:.3} (>= 0.85); {}", s.verdict()),
    ))
}

fn other_quasiperiodic() -> Result<Outcome, String> {
    let (ab, _) = run(&fixture("ammann_beenker"))?;
    let (fib, _) = run(&fixture("fibonacci_squares"))?;
    let pass = ab.verdict() == "D8, symmorphic" && fib.verdict() == "D4, symmorphic";
    Ok(Outcome::new(
        pass,
        format!("Ammann-Beenker {}, Fibonacci squares {}", ab.verdict(), fib.verdict()),
    ))
}

fn random_image(n: usize, rng: &mut ChaCha8Rng) -> Image {
    Image::from_fn(n, |_, _| rng.random::<f64>()).expect("valid image")
}

fn relative_error(a: Complex<f64>, b: Complex<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-12)
}

fn property_suites() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut notes = Vec::new();
    let mut pass = true;
    let mut record = |name: &str, ok: bool, value: String| {
        pass &= ok;
        notes.push(format!("({name}) {value}"));
    };

    let img = random_image(48, &mut rng);
    let grid = fft_grid(&img);
    let (lo, hi) = grid.range();
    let worst = (0..1000)
        .map(|_| {
            let (kx, ky) = (rng.random_range(lo..=hi), rng.random_range(lo..=hi));
            relative_error(dft_at(&img, Freq::new(kx as f64, ky as f64)).value, grid.value(kx, ky))
        })
        .fold(0.0, f64::max);
    record("a", worst < 1e-9, format!("{worst:.1e}"));

    let worst = (0..1000)
        .map(|_| {
            let k = Freq::new(rng.random_range(-24.0..24.0), rng.random_range(-24.0..24.0));
            let plus = dft_at(&img, k).value;
            let minus = dft_at(&img, Freq::new(-k.x, -k.y)).value;
            (plus.conj() - minus).norm()
        })
        .fold(0.0, f64::max);
    record("b", worst < 1e-10, format!("{worst:.1e}"));

    let n = img.n() as f64;
    let worst = (0..200)
        .map(|_| {
            let t = [rng.random_range(-60..60i64), rng.random_range(-60..60i64)];
            let k = Freq::new(rng.random_range(-24..=24) as f64, rng.random_range(-24..=24) as f64);
            let shifted = dft_at(&cyclic_shift(&img, t), k).value;
            let phase = -2.0 * PI * (k.x * t[0] as f64 + k.y * t[1] as f64) / n;
            (shifted - dft_at(&img, k).value * Complex::from_polar(1.0, phase)).norm()
        })
        .fold(0.0, f64::max);
    record("c", worst < 1e-12, format!("{worst:.1e}"));

    let mut metric_ok = true;
    for _ in 0..10_000 {
        let [x, y, z]: [f64; 3] = std::array::from_fn(|_| rng.random_range(-5.0..5.0));
        let shift = rng.random_range(-3..=3) as f64;
        let (dxy, dyz, dxz) = (mod1_distance(x, y), mod1_distance(y, z), mod1_distance(x, z));
        metric_ok &= (0.0..=0.5).contains(&dxy)
            && mod1_distance(x, x) == 0.0
            && (dxy - mod1_distance(y, x)).abs() < 1e-12
            && dxz <= dxy + dyz + 1e-12
            && (mod1_distance(x + shift, y) - dxy).abs() < 1e-12;
    }
    record("d", metric_ok, "10^4 triples".into());

    let mut boundary_ok = true;
    for i in 0..=100 {
        let a = i as f64 / 100.0;
        let p = a / 2.0;
        let d = |a, p| overall_deviation(a, p).unwrap_or(f64::NAN);
        boundary_ok &= d(0.0, 0.0) == 0.0
            && (d(1.0, p) - 1.0).abs() < 1e-15
            && (d(a, 0.5) - 1.0).abs() < 1e-15
            && (d(a, 0.0) - a).abs() < 1e-15
            && (d(0.0, p) - 2.0 * p).abs() < 1e-15;
    }
    boundary_ok &= overall_deviation(1.1, 0.0).is_err() && overall_deviation(0.0, 0.51).is_err();
    record("e", boundary_ok, "boundaries on a 101-point grid".into());

    let rotations = rotation_matrices().map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let (m, order) = &rotations[i % rotations.len()];
        let chi: Vec<f64> = (0..m.size()).map(|_| rng.random::<f64>()).collect();
        let phi: Vec<f64> = (0..m.size())
            .map(|c| quasisym::scalar::frac((0..m.size()).map(|r| (m.get(r, c) - i64::from(r == c)) as f64 * chi[r]).sum()))
            .collect();
        let chi_r = chi_r_fundamentals(&phi, m, *order).map_err(|e| e.to_string())?;
        let nulled = apply_gauge_fundamentals(&phi, &chi_r, m);
        worst = nulled.iter().fold(worst, |w, &v| w.max(mod1_distance(v, 0.0)));
    }
    record("f", worst < 1e-9, format!("{worst:.1e}"));

    let (ok, groups) = homomorphism_on_fixture_groups().map_err(|e| e.to_string())?;
    record("g", ok, groups);

    Ok(Outcome::new(pass, notes.join("; ")))
}

const FIXTURES: [&str; 6] = ["p4mm", "p4", "p4g", "penrose", "ammann_beenker", "fibonacci_squares"];

fn reference_basis(name: &str) -> quasisym::Result<ModuleBasis<f64>> {
    ModuleBasis::new(fixture(name).tiling.reference_fundamentals())
}

fn rotation_matrices() -> quasisym::Result<Vec<(IntMatrix, u32)>> {
    FIXTURES
        .iter()
        .map(|name| {
            let basis = reference_basis(name)?;
            let order = module_holohedry(&basis, &[], 12, TOL_INT).group.rotation_order();
            Ok((matrix_in_basis(&Mat2::rotation_of_order(order), &basis, TOL_INT)?.matrix, order))
        })
        .collect()
}

fn homomorphism_on_fixture_groups() -> quasisym::Result<(bool, String)> {
    let mut ok = true;
    let mut names = Vec::new();
    for name in FIXTURES {
        let basis = reference_basis(name)?;
        let holo = module_holohedry(&basis, basis.fundamentals(), 12, TOL_INT);
        let n = holo.group.rotation_order();
        let r = Mat2::rotation_of_order(n);
        let mut elements: Vec<Mat2> = (0..n).map(|p| r.pow(p)).collect();
        if let Some(axis) = holo.mirror_axis {
            let h = Mat2::mirror(axis);
            elements.extend((0..n).map(|p| r.pow(p) * h));
        }
        let matrices = elements
            .iter()
            .map(|q| matrix_in_basis(q, &basis, 1e-9).map(|m| m.matrix))
            .collect::<quasisym::Result<Vec<_>>>()?;
        for (a, ma) in elements.iter().zip(&matrices) {
            ok &= ma.order(2 * n).is_some_and(|o| n % o == 0 || o == 2);
            for (b, mb) in elements.iter().zip(&matrices) {
                ok &= matrix_in_basis(&(*a * *b), &basis, 1e-9)?.matrix == ma.mul(mb);
            }
        }
        names.push(format!("{name} {}", holo.group));
    }
    Ok((ok, names.join(", ")))
}

fn main() -> ExitCode {
    let checks: [(&str, Check); 8] = [
        ("shift robustness", shift_robustness),
        ("square-lattice trio", square_lattice_trio),
        ("appendix exactness", appendix_exactness),
        ("threshold calibration", threshold_calibration),
        ("penrose D10", penrose),
        ("generalized penrose D5", generalized_penrose),
        ("ammann-beenker and fibonacci squares", other_quasiperiodic),
        ("property suites", property_suites),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let outcome = check().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        failed += usize::from(!outcome.pass);
        println!("{} {name}: {}", if outcome.pass { "PASS" } else { "FAIL" }, outcome.detail);
    }
    println!("acceptance: {} of {} criteria passed", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
