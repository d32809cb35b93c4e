use std::path::Path;
use std::process::{Command, Output};

use quasisym::imaging::save_png;
use quasisym::pipeline::{load_session, Session};
use quasisym::Image;
use quasisym_cli::commands::PeakList;

fn quasisym(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quasisym"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn gen_p4g(dir: &Path) {
    let o = quasisym(dir, &["gen", "--tiling", "p4g", "--size", "120", "--period", "20", "--out", "g.png"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

const P4G_BASIS: &str = "6,6;12,6";

#[test]
fn gen_echoes_the_spec() {
    let dir = tempfile::tempdir().unwrap();
    let o = quasisym(
        dir.path(),
        &["gen", "--tiling", "p4mm", "--size", "96", "--shift", "-5,3", "--out", "s.png"],
    );
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("family = \"p4mm\""), "{text}");
    assert!(text.contains("shift = [-5, 3]"), "{text}");
    assert_eq!(quasisym::imaging::load_image::<f64>(dir.path().join("s.png")).unwrap().n(), 96);
}

#[test]
fn analyze_writes_session_and_csvs() {
    let dir = tempfile::tempdir().unwrap();
    gen_p4g(dir.path());
    let o = quasisym(
        dir.path(),
        &["analyze", "g.png", "--basis", P4G_BASIS, "--fl", "12", "--thd", "0.03", "--out-dir", "out"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("verdict: D4, non-symmorphic"));
    let out = dir.path().join("out");
    let session: Session<f64> = load_session(&out.join("g.session.json")).unwrap();
    assert_eq!(session.verdict(), "D4, non-symmorphic");
    for label in ["r4", "h"] {
        let dev = std::fs::read_to_string(out.join(format!("g.{label}.deviations.csv"))).unwrap();
        assert!(dev.starts_with("generator,alpha,kx,ky"));
        let hist = std::fs::read_to_string(out.join(format!("g.{label}.histogram.csv"))).unwrap();
        assert_eq!(hist.lines().filter(|l| l.starts_with("bin,")).count(), 50);
        assert_eq!(hist.lines().filter(|l| l.starts_with("threshold,")).count(), 2);
    }
}

#[test]
fn rerun_from_session_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    gen_p4g(dir.path());
    let first = quasisym(
        dir.path(),
        &["analyze", "g.png", "--basis", P4G_BASIS, "--fl", "12", "--thd", "0.03", "--name", "a"],
    );
    assert!(first.status.success());
    let second = quasisym(dir.path(), &["analyze", "g.png", "--session", "a.session.json", "--name", "b"]);
    assert!(second.status.success(), "{}", String::from_utf8_lossy(&second.stderr));
    let a: Session<f64> = load_session(&dir.path().join("a.session.json")).unwrap();
    let b: Session<f64> = load_session(&dir.path().join("b.session.json")).unwrap();
    assert_eq!(a.without_timestamps(), b.without_timestamps());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    gen_p4g(dir.path());
    let code = |args: &[&str]| quasisym(dir.path(), args).status.code();
    assert_eq!(code(&["analyze", "g.png", "--fl", "nope"]), Some(2));
    assert_eq!(code(&["analyze", "g.png"]), Some(2));
    assert_eq!(code(&["gen", "--tiling", "hexagonal", "--out", "x.png"]), Some(2));
    assert_eq!(code(&["analyze", "missing.png", "--basis", P4G_BASIS]), Some(3));
    assert_eq!(code(&["analyze", "g.png", "--basis", P4G_BASIS, "--fl", "4"]), Some(4));
}

#[test]
fn peaks_of_a_constant_image_are_dc_only() {
    let dir = tempfile::tempdir().unwrap();
    save_png(&Image::filled(64, 0.5).unwrap(), dir.path().join("c.png")).unwrap();
    let o = quasisym(dir.path(), &["peaks", "c.png"]);
    assert!(o.status.success());
    let list: PeakList = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(list.peaks.len(), 1);
    assert!(list.peaks[0].is_dc);
}

#[test]
fn peaks_refines_and_writes_heatmap() {
    let dir = tempfile::tempdir().unwrap();
    gen_p4g(dir.path());
    let o = quasisym(
        dir.path(),
        &["peaks", "g.png", "--refine", "6.3,5.8", "--radius", "1", "--heatmap", "h.png", "--out", "p.json"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let list: PeakList = serde_json::from_str(&std::fs::read_to_string(dir.path().join("p.json")).unwrap()).unwrap();
    assert_eq!(list.refined.len(), 1);
    let k = list.refined[0].k;
    assert!((k.x - 6.0).abs() < 1e-3 && (k.y - 6.0).abs() < 1e-3, "{k}");
    assert!(list.peaks.iter().any(|p| (p.k.x - 6.0).abs() < 1e-9 && (p.k.y - 6.0).abs() < 1e-9));
    assert_eq!(quasisym::imaging::load_image::<f64>(dir.path().join("h.png")).unwrap().n(), 120);
}
