mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::lattice_overlap_max;
use fpm::cli::{
    covered_coordinates, gradient_check, gradient_floor, load_dataset, GRAD_CHECK_COORDS,
};
use fpm::io::{self, ManifestDoc, MeasurementEntry};
use fpm::objective::gradient;
use fpm::optics::{IlluminationGeometry, LedOffset};
use fpm::phantom::{smooth_image, DatasetManifest, GridSize, NoiseModel};
use fpm::{Field2D, Rng};

fn fpm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fpm"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn desk_doc() -> ManifestDoc {
    let mut doc = ManifestDoc::from(&DatasetManifest::desk_scale());
    doc.measurements.clear();
    doc
}

fn write_sources(dir: &Path) {
    let mut rng = Rng::new(5);
    io::write_image(
        dir.join("amp.fpmr"),
        &smooth_image(64, 64, 2, 4, 0.3, 1.0, &mut rng),
    )
    .unwrap();
    io::write_image(
        dir.join("phase.fpmr"),
        &smooth_image(64, 64, 2, 4, 0.0, 1.0, &mut rng),
    )
    .unwrap();
}

/// Simulates `doc` into `dir/<name>` and returns the dataset path.
fn simulate(dir: &Path, doc: &ManifestDoc, name: &str, extra: &[&str]) -> Output {
    write_sources(dir);
    let manifest = dir.join(format!("{name}.toml"));
    fs::write(&manifest, toml::to_string(doc).unwrap()).unwrap();
    let out = dir.join(name);
    let amp = dir.join("amp.fpmr");
    let phase = dir.join("phase.fpmr");
    let mut args = vec![
        "simulate",
        "--manifest",
        s(&manifest),
        "--amplitude",
        s(&amp),
        "--phase",
        s(&phase),
        "--out",
        s(&out),
    ];
    args.extend_from_slice(extra);
    fpm(&args)
}

#[test]
fn version_prints() {
    let o = fpm(&["version"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("fpm "));
}

#[test]
fn unknown_flag_is_rejected() {
    let o = fpm(&["overlap", "--dataset", "x", "--out", "y", "--colour"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn desk_scale_simulation_writes_nine_measurements() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate(dir.path(), &desk_doc(), "data", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let data = dir.path().join("data");
    for k in 0..9 {
        assert!(data.join(format!("y_{k:03}.fpmr")).exists());
    }
    assert!(!data.join("y_009.fpmr").exists());
    assert!(data.join("s_true.fpmc").exists());
    let resolved = io::read_manifest_doc(data.join("manifest.toml")).unwrap();
    assert_eq!(resolved.measurements.len(), 9);
}

#[test]
fn zero_noise_flag_matches_no_flag() {
    let dir = tempfile::tempdir().unwrap();
    assert!(simulate(dir.path(), &desk_doc(), "plain", &[])
        .status
        .success());
    assert!(
        simulate(dir.path(), &desk_doc(), "zero", &["--noise-sigma", "0"])
            .status
            .success()
    );
    for entry in fs::read_dir(dir.path().join("plain")).unwrap() {
        let name = entry.unwrap().file_name();
        let a = fs::read(dir.path().join("plain").join(&name)).unwrap();
        let b = fs::read(dir.path().join("zero").join(&name)).unwrap();
        assert_eq!(a, b, "{name:?}");
    }
}

#[test]
fn oversized_pupil_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = desk_doc();
    doc.geometry.numerical_aperture = 0.5;
    let o = simulate(dir.path(), &doc, "data", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("pupil exceeds measurement band"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn negative_noise_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate(dir.path(), &desk_doc(), "data", &["--noise-sigma", "-1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reconstruct_reports_analytical_step() {
    let dir = tempfile::tempdir().unwrap();
    assert!(simulate(dir.path(), &desk_doc(), "data", &[])
        .status
        .success());
    let data = dir.path().join("data");
    let out = dir.path().join("rec");
    let o = fpm(&[
        "reconstruct",
        "--dataset",
        s(&data),
        "--iters",
        "5",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = stdout(&o);
    let (_, meas) = load_dataset(&data).unwrap();
    let map = fpm::objective::overlap_map(meas.pupil(), meas.plan(), 64, 64).unwrap();
    assert!(
        summary.contains(&format!(
            "step_size={:.17e} (1/max_overlap)",
            1.0 / map.max_value
        )),
        "{summary}"
    );
    assert!(summary.contains("algorithm=awf iterations=5"), "{summary}");
    for f in ["s_hat.fpmc", "amplitude.fpmr", "phase.fpmr", "trace.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let rows = io::parse_trace_csv(&fs::read_to_string(out.join("trace.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 6);
}

#[test]
fn reconstruct_rejects_zero_step() {
    let dir = tempfile::tempdir().unwrap();
    assert!(simulate(dir.path(), &desk_doc(), "data", &[])
        .status
        .success());
    let data = dir.path().join("data");
    let o = fpm(&[
        "reconstruct",
        "--dataset",
        s(&data),
        "--step",
        "0",
        "--out",
        s(&dir.path().join("r")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--step"));
}

#[test]
fn inconsistent_datasets_fail() {
    let dir = tempfile::tempdir().unwrap();
    assert!(simulate(dir.path(), &desk_doc(), "data", &[])
        .status
        .success());
    let data = dir.path().join("data");
    let out = dir.path().join("r");

    let missing = fpm(&[
        "reconstruct",
        "--dataset",
        s(&dir.path().join("nowhere")),
        "--out",
        s(&out),
    ]);
    assert_eq!(missing.status.code(), Some(3));

    io::write_image(data.join("y_004.fpmr"), &fpm::RealImage2D::zeros(16, 16)).unwrap();
    let o = fpm(&["reconstruct", "--dataset", s(&data), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    fs::remove_file(data.join("y_004.fpmr")).unwrap();
    let o = fpm(&["reconstruct", "--dataset", s(&data), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    fs::write(data.join("y_004.fpmr"), b"FPMR").unwrap();
    let o = fpm(&["check-grad", "--dataset", s(&data)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("y_004.fpmr"));
}

#[test]
fn check_grad_passes_on_desk_dataset() {
    let dir = tempfile::tempdir().unwrap();
    assert!(simulate(dir.path(), &desk_doc(), "data", &[])
        .status
        .success());
    let data = dir.path().join("data");
    let o = fpm(&["check-grad", "--dataset", s(&data), "--seed", "3"]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("PASS"));
    assert!(stdout(&o).contains("coordinates=64"));
}

#[test]
fn gradient_check_at_truth_and_with_corrupted_gradient() {
    let dir = tempfile::tempdir().unwrap();
    assert!(simulate(dir.path(), &desk_doc(), "data", &[])
        .status
        .success());
    let data = dir.path().join("data");
    let (_, meas) = load_dataset(&data).unwrap();
    let truth = io::read_field(data.join("s_true.fpmc")).unwrap();
    let mut rng = Rng::new(1);
    let coords = covered_coordinates(&meas, GRAD_CHECK_COORDS, &mut rng).unwrap();
    let floor = gradient_floor(&meas).unwrap();

    let at_truth =
        gradient_check(&meas, &truth, &coords, 1e-6, floor, &|x| gradient(x, &meas)).unwrap();
    assert!(at_truth.passed(), "{at_truth:?}");
    assert!(at_truth.grad_norm < 1e-9 * truth.norm(), "{at_truth:?}");

    let point = fpm::cli::random_point(&meas, &mut rng);
    let corrupted = |x: &Field2D| -> fpm::Result<Field2D> {
        let mut g = gradient(x, &meas)?;
        for z in g.data_mut() {
            *z *= 1.01;
        }
        Ok(g)
    };
    let report = gradient_check(&meas, &point, &coords, 1e-6, floor, &corrupted).unwrap();
    assert!(!report.passed(), "{report:?}");
}

fn explicit_doc(sets: Vec<Vec<(usize, (i64, i64))>>) -> ManifestDoc {
    let mut doc = desk_doc();
    doc.measurements = sets
        .into_iter()
        .map(|set| MeasurementEntry {
            leds: set
                .into_iter()
                .map(|(id, off)| LedOffset::from_offset(id, off))
                .collect(),
        })
        .collect();
    doc
}

fn overlap(dir: &Path, doc: &ManifestDoc) -> (f64, f64) {
    let sim = simulate(dir, doc, "data", &[]);
    assert!(sim.status.success(), "{}", stderr(&sim));
    let map_path = dir.join("maps/overlap.fpmr");
    let o = fpm(&[
        "overlap",
        "--dataset",
        s(&dir.join("data")),
        "--out",
        s(&map_path),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let field = |key: &str| -> f64 {
        text.split_whitespace()
            .find_map(|t| t.strip_prefix(key))
            .unwrap()
            .parse()
            .unwrap()
    };
    let map = io::read_image(&map_path).unwrap();
    assert_eq!(map.max(), field("max_overlap="));
    (field("max_overlap="), field("step_size="))
}

#[test]
fn overlap_single_led() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        overlap(dir.path(), &explicit_doc(vec![vec![(4, (0, 0))]])),
        (1.0, 1.0)
    );
}

#[test]
fn overlap_duplicated_led() {
    let dir = tempfile::tempdir().unwrap();
    let doc = explicit_doc(vec![vec![(4, (3, 0))], vec![(4, (3, 0))]]);
    assert_eq!(overlap(dir.path(), &doc), (2.0, 0.5));
}

#[test]
fn overlap_desk_scale_matches_lattice() {
    let dir = tempfile::tempdir().unwrap();
    let (max, mu) = overlap(dir.path(), &desk_doc());
    let m = DatasetManifest::desk_scale();
    let offsets: Vec<_> = m
        .plan
        .sets()
        .iter()
        .flatten()
        .map(|l| l.pixel_offset)
        .collect();
    let radius = m.geometry.pupil_radius_px(32, 32).0;
    assert_eq!(max, lattice_overlap_max(radius, &offsets) as f64);
    assert_eq!(mu, 1.0 / max);
}

#[test]
fn phantom_and_template_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src");
    assert!(
        fpm(&["phantom", "--rows", "48", "--cols", "40", "--out", s(&src)])
            .status
            .success()
    );
    let amp = io::read_image(src.join("amplitude.fpmr")).unwrap();
    assert_eq!(amp.shape(), (48, 40));
    assert!(amp.min() >= 0.3 - 1e-12 && amp.max() <= 1.0 + 1e-12);

    let doc = ManifestDoc {
        seed: 9,
        multiplex_group: 4,
        geometry: IlluminationGeometry::reference(2),
        grid: GridSize {
            n1: 64,
            n2: 64,
            m1: 32,
            m2: 32,
        },
        noise: NoiseModel::Gaussian { sigma: 0.01 },
        measurements: Vec::new(),
    };
    let manifest = dir.path().join("m.toml");
    fs::write(&manifest, toml::to_string(&doc).unwrap()).unwrap();
    let out = dir.path().join("data");
    let o = fpm(&[
        "simulate",
        "--manifest",
        s(&manifest),
        "--amplitude",
        s(&src.join("amplitude.fpmr")),
        "--phase",
        s(&src.join("phase.fpmr")),
        "--out",
        s(&out),
        "--seed",
        "11",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let resolved = io::read_manifest(out.join("manifest.toml")).unwrap();
    assert_eq!(resolved.seed, 11);
    assert_eq!(resolved.plan.len(), 7);
    assert_eq!(resolved.plan.total_leds(), 25);
}
