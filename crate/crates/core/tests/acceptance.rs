//! Acceptance criteria 1 to 11. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use ghost_imaging::imaging::{analytic_image, ObjectMask};
use ghost_imaging::metrology::{detect_inversion, measure_contrast, measure_fov, measure_psf, Orientation};
use ghost_imaging::montecarlo::{empirical_ghost_image, moment_factoring_residual, scaling_exponent, FieldEnsemble};
use ghost_imaging::propagation::{propagate_closed_gsm, propagate_numeric, relay_image_map, source_kernel};
use ghost_imaging::source::{classicality_certify, Classicality, CorrSpectrumPair, SpectrumConfiguration};
use ghost_imaging::{
    Axis, Bucket, CorrelationKind, DetectorModel, Execution, GhostImage, GsmSource, OpticalPath, PlaneGrid,
    RelayLens, SourceClass,
};
use num_complex::Complex64;
use std::time::Instant;

const K: f64 = 1e7;
const A0: f64 = 1e-3;
const RHO0: f64 = 1e-4;
const T0: f64 = 1e-9;
/// D0 = 100.
const L_NEAR: f64 = 0.005;
/// D0 = 0.005 and k a0^2 / 2L = 0.05: far field for both correlation kinds.
const L_FAR: f64 = 100.0;

type Outcome = Result<Vec<String>, String>;

struct Check {
    lines: Vec<String>,
    ok: bool,
}

impl Check {
    fn new() -> Self {
        Self { lines: Vec::new(), ok: true }
    }

    fn rel(&mut self, label: &str, got: f64, want: f64, tol: f64) {
        let err = (got / want - 1.0).abs();
        let ok = err <= tol;
        self.ok &= ok;
        self.lines.push(format!("{label}: {got:.6e} vs {want:.6e} (rel err {err:.2e}, tol {tol:.0e}){}", flag(ok)));
    }

    fn that(&mut self, label: &str, ok: bool, detail: String) {
        self.ok &= ok;
        self.lines.push(format!("{label}: {detail}{}", flag(ok)));
    }

    fn done(self) -> Outcome {
        if self.ok {
            Ok(self.lines)
        } else {
            Err(self.lines.join("; "))
        }
    }
}

fn flag(ok: bool) -> &'static str {
    if ok {
        ""
    } else {
        " <-- out of tolerance"
    }
}

fn source(class: SourceClass) -> GsmSource {
    let p = if class == SourceClass::QuantumPhaseSensitive { 1e4 } else { 1e6 };
    GsmSource::new(p, A0, RHO0, T0, class).unwrap()
}

fn path(l: f64) -> OpticalPath {
    OpticalPath::free_space(l, K).unwrap()
}

fn square(n: usize, extent: f64) -> PlaneGrid {
    PlaneGrid::square(Axis::with_extent(n, extent).unwrap())
}

fn detector(scan: PlaneGrid, integration_time: f64) -> DetectorModel {
    DetectorModel::new(0.9, integration_time, scan, Bucket::Full).unwrap()
}

fn image(src: &GsmSource, l: f64, obj: &ObjectMask, integration_time: f64) -> GhostImage {
    analytic_image(src, &path(l), obj, &detector(obj.grid, integration_time), Execution::default()).unwrap()
}

fn point_psf(class: SourceClass, l: f64, grid: PlaneGrid) -> Result<f64, String> {
    let obj = ObjectMask::point(grid, [0.0, 0.0]).map_err(|e| e.to_string())?;
    let img = image(&source(class), l, &obj, 1e-12);
    Ok(measure_psf(&img).map_err(|e| e.to_string())?.radius)
}

fn uniform_fov(class: SourceClass, l: f64, grid: PlaneGrid) -> Result<f64, String> {
    let img = image(&source(class), l, &ObjectMask::uniform(grid), 1e-12);
    measure_fov(&img).map_err(|e| e.to_string())
}

fn near_psf_grid() -> PlaneGrid {
    square(121, 1.21e-3)
}

fn a_l() -> f64 {
    2.0 * L_FAR / (K * RHO0)
}

fn far_psf_grid() -> PlaneGrid {
    square(161, 0.161)
}

fn far_fov_grid() -> PlaneGrid {
    square(256, 12.0 * a_l())
}

fn criterion_1() -> Outcome {
    let mut c = Check::new();
    let w = point_psf(SourceClass::Thermal, L_NEAR, near_psf_grid())?;
    c.rel("thermal near-field PSF e^-2 radius", w, 2f64.sqrt() * RHO0, 0.03);
    c.done()
}

fn criterion_2() -> Outcome {
    let mut c = Check::new();
    let wq = point_psf(SourceClass::QuantumPhaseSensitive, L_NEAR, near_psf_grid())?;
    let wt = point_psf(SourceClass::Thermal, L_NEAR, near_psf_grid())?;
    c.rel("quantum near-field PSF e^-2 radius", wq, RHO0, 0.03);
    c.rel("quantum / thermal resolution", wq / wt, 1.0 / 2f64.sqrt(), 0.02);
    c.done()
}

fn criterion_3() -> Outcome {
    let mut c = Check::new();
    let fov = uniform_fov(SourceClass::Thermal, L_FAR, far_fov_grid())?;
    c.rel("thermal far-field FOV", fov, a_l(), 0.03);
    let w = point_psf(SourceClass::Thermal, L_FAR, far_psf_grid())?;
    c.rel("thermal far-field PSF", w, 2.0 * 2f64.sqrt() * L_FAR / (K * A0), 0.03);
    c.done()
}

fn criterion_4() -> Outcome {
    let mut c = Check::new();
    let fq = uniform_fov(SourceClass::QuantumPhaseSensitive, L_FAR, far_fov_grid())?;
    let ft = uniform_fov(SourceClass::Thermal, L_FAR, far_fov_grid())?;
    c.rel("quantum far-field FOV", fq, 2.0 * 2f64.sqrt() * L_FAR / (K * RHO0), 0.03);
    c.rel("quantum / classical FOV", fq / ft, 2f64.sqrt(), 0.03);
    let wq = point_psf(SourceClass::QuantumPhaseSensitive, L_FAR, far_psf_grid())?;
    let wc = point_psf(SourceClass::ClassicalPhaseSensitive, L_FAR, far_psf_grid())?;
    c.rel("quantum / classical far-field PSF", wq, wc, 0.02);
    c.done()
}

fn criterion_5() -> Outcome {
    let mut c = Check::new();
    let grid = square(128, 0.4);
    let obj = ObjectMask::double_slit(grid, 0.03, 0.12, 0.15).map_err(|e| e.to_string())?;
    for (class, want) in [
        (SourceClass::Thermal, Orientation::Erect),
        (SourceClass::ClassicalPhaseSensitive, Orientation::Inverted),
        (SourceClass::QuantumPhaseSensitive, Orientation::Inverted),
    ] {
        let img = image(&source(class), L_FAR, &obj, 1e-12);
        let r = detect_inversion(&img, &obj, None).map_err(|e| e.to_string())?;
        c.that(
            &format!("{class} far field"),
            r.orientation == want,
            format!("{:?} (erect {:.3}, inverted {:.3})", r.orientation, r.erect_score, r.inverted_score),
        );
    }
    c.done()
}

fn criterion_6() -> Outcome {
    let mut c = Check::new();
    let obj = ObjectMask::letter(square(128, 1.28e-3), 'F', 8e-4).map_err(|e| e.to_string())?;
    let th = image(&source(SourceClass::Thermal), L_NEAR, &obj, 1e-10);
    let ps = image(&source(SourceClass::ClassicalPhaseSensitive).with_phase(0.7), L_NEAR, &obj, 1e-10);
    let (a, b) = (th.values(), ps.values());
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale;
    let s_scale = th.signal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let s_err = th.signal.iter().zip(&ps.signal).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / s_scale;
    c.that("max |C_ps - C_th| / max C_th", err <= 1e-10, format!("{err:.2e} (tol 1e-10)"));
    c.that("max |S_ps - S_th| / max S_th", s_err <= 1e-10, format!("{s_err:.2e} (tol 1e-10)"));
    c.done()
}

fn criterion_7() -> Outcome {
    let mut c = Check::new();
    let src = GsmSource::new(1e8, A0, RHO0, T0, SourceClass::Thermal).unwrap();
    let boundary = CorrSpectrumPair::gsm(&src, SpectrumConfiguration::ClassicalMaximum, 33, 4.0)
        .map_err(|e| e.to_string())?;
    let got = classicality_certify(&boundary);
    c.that("classical-bound equality", got == Classicality::Classical, format!("{got:?}"));

    let n = 16;
    let gn: f64 = 0.01;
    let gp = (gn * (1.0 + gn)).sqrt();
    let quantum = CorrSpectrumPair::new(vec![n], vec![1.0], vec![gn; n], vec![Complex64::new(gp, 0.0); n])
        .map_err(|e| e.to_string())?;
    let got = classicality_certify(&quantum);
    c.that("quantum-bound equality at g~n = 0.01", got == Classicality::QuantumAdmissible, format!("{got:?}"));
    let got = classicality_certify(&quantum.scaled_gp(2.0));
    c.that("twice the quantum bound", got == Classicality::Unphysical, format!("{got:?}"));
    c.done()
}

fn criterion_8() -> Outcome {
    let mut c = Check::new();
    let ex = Execution::default();
    let mut compare = |label: &str, src: &GsmSource, p: &OpticalPath, kind, input: Axis, output: Axis| -> Result<(), String> {
        let k = source_kernel(src, kind).and_then(|k| k.sample_line(input)).map_err(|e| e.to_string())?;
        let num = propagate_numeric(&k, p, output, ex).map_err(|e| e.to_string())?;
        let closed = propagate_closed_gsm(src, p, kind)
            .and_then(|k| k.sample_line(output))
            .map_err(|e| e.to_string())?;
        let err = num.as_grid().unwrap().magnitude_l2_error(closed.as_grid().unwrap()).unwrap();
        c.that(label, err <= 0.02, format!("magnitude L2 error {err:.2e} (tol 2e-2)"));
        Ok(())
    };
    // Near field D0 = 100 with rho0 = 2 a0 keeps the Nyquist count at 2048.
    let s = GsmSource::new(1e6, A0, 2.0 * A0, T0, SourceClass::ClassicalPhaseSensitive).unwrap();
    let p = path(K * A0 * 2.0 * A0 / 200.0);
    let ax = Axis::with_extent(2048, 8.0 * A0).unwrap();
    compare("near field, phase-insensitive", &s, &p, CorrelationKind::PhaseInsensitive, ax, ax)?;
    compare("near field, phase-sensitive", &s, &p, CorrelationKind::PhaseSensitive, ax, ax)?;

    let s = source(SourceClass::ClassicalPhaseSensitive);
    let p = path(L_FAR);
    let input = Axis::with_extent(512, 8.0 * A0).unwrap();
    let output = Axis::with_extent(512, 8.0 * a_l()).unwrap();
    compare("far field, phase-insensitive", &s, &p, CorrelationKind::PhaseInsensitive, input, output)?;
    compare("far field, phase-sensitive", &s, &p, CorrelationKind::PhaseSensitive, input, output)?;
    c.done()
}

fn criterion_9() -> Outcome {
    let mut c = Check::new();
    let ex = Execution::default();
    // Thermal near field, D0 = 100.
    let rho = 2e-4;
    let src = GsmSource::new(1e6, A0, rho, T0, SourceClass::Thermal).unwrap();
    let p = path(K * A0 * rho / 200.0);
    let grid = PlaneGrid::line(Axis::with_extent(4096, 3e-3).unwrap());
    let obj = ObjectMask::double_slit(grid, 2e-4, 6e-4, 1.0).map_err(|e| e.to_string())?;
    let det = DetectorModel::new(0.9, 1e-14, PlaneGrid::line(Axis::new(61, 2e-5).unwrap()), Bucket::Full).unwrap();
    let analytic = analytic_image(&src, &p, &obj, &det, ex).map_err(|e| e.to_string())?.values();

    let n = 10_000;
    let ens = FieldEnsemble::new(&src, grid, n, 2024).map_err(|e| e.to_string())?;
    let emp = empirical_ghost_image(&ens, &p, &obj, &det, None, ex).map_err(|e| e.to_string())?;
    let got = emp.image.values();
    let inside = got
        .iter()
        .zip(&analytic)
        .zip(&emp.standard_error)
        .filter(|((g, a), se)| (*g - *a).abs() <= 3.0 * *se)
        .count();
    let frac = inside as f64 / got.len() as f64;
    c.that(
        "scan points within 3 SE of analytic (N = 1e4)",
        frac >= 0.95,
        format!("{inside}/{} = {:.1}% (need 95%)", got.len(), 100.0 * frac),
    );

    let mid = grid.x.samples / 2;
    let r = moment_factoring_residual(&ens, mid, mid + 40, 20, ex).map_err(|e| e.to_string())?;
    c.that(
        "moment-factoring residual",
        r.consistent_with_zero(3.0),
        format!("{:.3e} +- {:.3e} (|z| = {:.2})", r.value, r.standard_error, r.value.abs() / r.standard_error),
    );

    let counts = [625, 1250, 2500, 5000, 10_000];
    let mut errors = Vec::new();
    for &m in &counts {
        let sub = ens.truncated(m).map_err(|e| e.to_string())?;
        errors.push(empirical_ghost_image(&sub, &p, &obj, &det, None, ex).map_err(|e| e.to_string())?.mean_standard_error());
    }
    let slope = scaling_exponent(&counts, &errors);
    c.that("standard-error scaling exponent", (slope + 0.5).abs() <= 0.1, format!("{slope:.3} (want -0.5 +- 0.1)"));
    c.done()
}

fn criterion_10() -> Outcome {
    let mut c = Check::new();
    let src = source(SourceClass::Thermal);
    let grid = PlaneGrid::line(Axis::with_extent(801, 8.01e-3).unwrap());
    let obj = ObjectMask::double_slit(grid, 1e-4, 4e-4, 1.0).map_err(|e| e.to_string())?;
    let scan = PlaneGrid::line(Axis::new(201, 1e-5).unwrap());
    let f = 0.1;
    let unit = RelayLens::new(f, 2.0 * f, 2.0 * f).map_err(|e| e.to_string())?;
    c.that("d1 = d2 = 2f magnification", unit.magnification() == -1.0, format!("{}", unit.magnification()));

    for m in [-1.0, -2.0] {
        let lens = RelayLens::with_magnification(f, m).map_err(|e| e.to_string())?;
        let p = path(L_NEAR).with_lens(lens);
        let img = analytic_image(&src, &path(L_NEAR), &obj, &detector(scan, 1e-12), Execution::default())
            .map_err(|e| e.to_string())?;
        let relayed = relay_image_map(&p, &img, None).map_err(|e| e.to_string())?;
        // Direct evaluation of the object-plane image at M r1.
        let scaled = PlaneGrid::line(Axis::new(relayed.grid.x.samples, relayed.grid.x.spacing * m.abs()).unwrap());
        let direct = analytic_image(&src, &path(L_NEAR), &obj, &detector(scaled, 1e-12), Execution::default())
            .map_err(|e| e.to_string())?
            .values();
        let want: Vec<f64> = direct.iter().rev().map(|v| m * m * v).collect();
        let got = relayed.values();
        let scale = want.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let err = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
        c.that(&format!("C'(r) = M^2 C(M r), M = {m}"), err <= 1e-6, format!("max rel err {err:.2e} (tol 1e-6)"));
        if m == -1.0 {
            let r = detect_inversion(&relayed, &obj.resample(relayed.grid), None).map_err(|e| e.to_string())?;
            c.that("unit relay orientation", r.orientation == Orientation::Inverted, format!("{:?}", r.orientation));
        }
    }
    c.done()
}

fn criterion_11() -> Outcome {
    let mut c = Check::new();
    // Line slices carry the square root of the kernel amplitude, which would
    // halve the brightness exponent; the law is checked on a plane.
    let grid = square(41, 4.1e-4);
    let obj = ObjectMask::point(grid, [0.0, 0.0]).map_err(|e| e.to_string())?;
    let contrast = |src: &GsmSource, ratio: f64| -> Result<f64, String> {
        measure_contrast(&image(src, L_NEAR, &obj, ratio * T0)).map_err(|e| e.to_string())
    };
    let th = source(SourceClass::Thermal);
    let c0 = contrast(&th, 1e-4)?;
    for x in [0.1f64, 1.0, 2.0, 4.0] {
        let want = 1.0 / (1.0 + x * x / 4.0).sqrt();
        c.rel(&format!("classical contrast ratio, T_d/T0 = {x}"), contrast(&th, x)? / c0, want, 0.02);
    }
    // Brightness P T0 rho0^2 / a0^2 = 0.01 and 0.001.
    let q = |p: f64| GsmSource::new(p, A0, RHO0, T0, SourceClass::QuantumPhaseSensitive).unwrap();
    let (q_hi, q_lo) = (q(1e9), q(1e8));
    c.rel("brightness check", q_hi.brightness(), 0.01, 1e-12);
    c.rel("quantum contrast 0.001 / 0.01 at T_d = T0", contrast(&q_lo, 1.0)? / contrast(&q_hi, 1.0)?, 10.0, 0.05);
    let q0 = contrast(&q_lo, 1e-4)?;
    for x in [0.1f64, 1.0, 2.0, 4.0] {
        let want = 1.0 / (1.0 + x * x / 2.0).sqrt();
        c.rel(&format!("quantum contrast ratio, T_d/T0 = {x}"), contrast(&q_lo, x)? / q0, want, 0.02);
    }
    c.done()
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("near-field thermal resolution", criterion_1),
        ("quantum near-field resolution", criterion_2),
        ("far-field thermal FOV and resolution", criterion_3),
        ("quantum far-field FOV and resolution", criterion_4),
        ("far-field inversion", criterion_5),
        ("near-field classical PS equals thermal", criterion_6),
        ("classicality certifier", criterion_7),
        ("numeric vs closed-form propagation", criterion_8),
        ("Monte Carlo vs analytic", criterion_9),
        ("relay identity", criterion_10),
        ("contrast laws", criterion_11),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let out = run();
        let secs = t.elapsed().as_secs_f64();
        match out {
            Ok(lines) => {
                println!("criterion {:>2} PASS  {name} ({secs:.1}s)", i + 1);
                for l in lines {
                    println!("              {l}");
                }
            }
            Err(e) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({secs:.1}s): {e}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
