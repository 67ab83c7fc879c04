use ghost_imaging::imaging::{analytic_image, numeric_line_image, ObjectMask};
use ghost_imaging::io::GridFile;
use ghost_imaging::metrology::{detect_inversion, measure_contrast, measure_psf, ImageMetrics};
use ghost_imaging::propagation::{default_line_axis, PropagationError};
use ghost_imaging::{
    Axis, Bucket, DetectorModel, Execution, GsmSource, ImagingError, OpticalPath, PlaneGrid, Regime, SourceClass,
};

fn src(class: SourceClass, flux: f64) -> GsmSource {
    GsmSource::new(flux, 1e-3, 1e-4, 1e-9, class).unwrap()
}

fn det(scan: PlaneGrid, t: f64) -> DetectorModel {
    DetectorModel::new(1.0, t, scan, Bucket::Full).unwrap()
}

#[test]
fn quantum_contrast_beats_classical_at_matched_bandwidth() {
    // Brightness 0.01, T_d = T0.
    let grid = PlaneGrid::square(Axis::with_extent(41, 4.1e-4).unwrap());
    let obj = ObjectMask::point(grid, [0.0, 0.0]).unwrap();
    let path = OpticalPath::free_space(0.005, 1e7).unwrap();
    let contrast = |s: &GsmSource| {
        let img = analytic_image(s, &path, &obj, &det(grid, 1e-9), Execution::default()).unwrap();
        measure_contrast(&img).unwrap()
    };
    let q = src(SourceClass::QuantumPhaseSensitive, 1e9);
    assert!((q.brightness() - 0.01).abs() < 1e-12);
    let c = src(SourceClass::Thermal, 1e9);
    assert!(contrast(&q) > contrast(&c));
}

#[test]
fn far_field_psf_grows_linearly_with_distance() {
    let s = src(SourceClass::Thermal, 1e6);
    let mut last = 0.0;
    for l in [20.0, 40.0, 80.0] {
        let grid = PlaneGrid::square(Axis::with_extent(101, 0.06 * l / 40.0).unwrap());
        let obj = ObjectMask::point(grid, [0.0, 0.0]).unwrap();
        let path = OpticalPath::free_space(l, 1e7).unwrap();
        let img = analytic_image(&s, &path, &obj, &det(grid, 1e-12), Execution::default()).unwrap();
        assert_eq!(img.metadata.regime, Some(Regime::FarField));
        let w = measure_psf(&img).unwrap().radius;
        let want = 2.0 * 2f64.sqrt() * l / (1e7 * 1e-3);
        assert!((w / want - 1.0).abs() < 0.03, "L = {l}: {w} vs {want}");
        assert!(w > last);
        last = w;
    }
}

#[test]
fn inversion_is_invariant_under_rescaling() {
    let grid = PlaneGrid::square(Axis::with_extent(96, 0.4).unwrap());
    let obj = ObjectMask::letter(grid, 'R', 0.2).unwrap();
    let s = src(SourceClass::ClassicalPhaseSensitive, 1e6);
    let path = OpticalPath::free_space(100.0, 1e7).unwrap();
    let mut img = analytic_image(&s, &path, &obj, &det(grid, 1e-12), Execution::default()).unwrap();
    let a = detect_inversion(&img, &obj, None).unwrap();
    for v in img.signal.iter_mut() {
        *v *= 3.7e5;
    }
    let b = detect_inversion(&img, &obj, None).unwrap();
    assert_eq!(a.orientation, b.orientation);
    assert!((a.inverted_score - b.inverted_score).abs() < 1e-12);
}

#[test]
fn sequential_and_parallel_images_agree_bitwise() {
    let grid = PlaneGrid::square(Axis::with_extent(64, 1.2e-3).unwrap());
    let obj = ObjectMask::letter(grid, 'J', 9e-4).unwrap();
    let s = src(SourceClass::Thermal, 1e6);
    let path = OpticalPath::free_space(0.005, 1e7).unwrap();
    let a = analytic_image(&s, &path, &obj, &det(grid, 1e-10), Execution::Sequential).unwrap();
    let b = analytic_image(&s, &path, &obj, &det(grid, 1e-10), Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn intermediate_regime_needs_numeric_mode() {
    let s = src(SourceClass::Thermal, 1e6);
    let path = OpticalPath::free_space(0.5, 1e7).unwrap();
    let line = PlaneGrid::line(Axis::with_extent(256, 3e-3).unwrap());
    let obj = ObjectMask::disk(line, [0.0, 0.0], 5e-4);
    let d = det(PlaneGrid::line(Axis::new(21, 1e-4).unwrap()), 1e-10);
    let err = analytic_image(&s, &path, &obj, &d, Execution::default()).unwrap_err();
    assert!(matches!(err, ImagingError::Propagation(PropagationError::IntermediateRegime { .. })), "{err}");
    let input = default_line_axis(&s, &path).unwrap();
    let img = numeric_line_image(&s, &path, &obj, &d, input, Execution::default()).unwrap();
    assert!(img.invariant_holds());
    assert!(img.signal.iter().any(|v| *v > 0.0));
}

#[test]
fn image_and_metrics_survive_disk_round_trip() {
    let grid = PlaneGrid::square(Axis::with_extent(32, 1e-3).unwrap());
    let obj = ObjectMask::point(grid, [0.0, 0.0]).unwrap();
    let s = src(SourceClass::Thermal, 1e6);
    let path = OpticalPath::free_space(0.005, 1e7).unwrap();
    let img = analytic_image(&s, &path, &obj, &det(grid, 1e-10), Execution::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("c.grid");
    GridFile::real(&img.grid, &img.values()).save(&file).unwrap();
    let back = GridFile::load(&file).unwrap();
    assert_eq!(back.header.plane().unwrap(), img.grid);
    assert!(back.data.iter().zip(img.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    let m = ImageMetrics::collect(&img, None);
    let json = serde_json::to_string(&m).unwrap();
    assert_eq!(serde_json::from_str::<ImageMetrics>(&json).unwrap(), m);
}
