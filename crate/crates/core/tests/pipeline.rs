use std::path::Path;

use quasisym::config::Fixture;
use quasisym::imaging::{generate_tiling, load_image, save_png, TilingFamily, TilingSpec};
use quasisym::pipeline::{analyze, load_session, save_session, session_from_json, session_to_json, AnalysisRequest};
use quasisym::{Error, Image};

fn configs() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

fn small(family: TilingFamily) -> Image {
    let spec = TilingSpec::new(family, 120).with_period(20.0);
    generate_tiling(&spec).unwrap()
}

fn request(basis: &[[f64; 2]]) -> AnalysisRequest {
    AnalysisRequest {
        thd: 0.03,
        ..AnalysisRequest::new(basis.to_vec(), 12)
    }
}

#[test]
fn small_square_lattices_get_their_groups() {
    let p4g = analyze(&small(TilingFamily::P4g), "g", &request(&[[6.0, 6.0], [12.0, 6.0]])).unwrap();
    assert_eq!(p4g.verdict(), "D4, non-symmorphic");
    assert!(p4g.basis.snapped);
    let p4 = analyze(&small(TilingFamily::P4), "p", &request(&[[6.0, 0.0], [0.0, 6.0]])).unwrap();
    assert!(p4.verdict().starts_with("Z4"), "{}", p4.verdict());
}

#[test]
fn sessions_survive_disk_and_text() {
    let dir = tempfile::tempdir().unwrap();
    let img = small(TilingFamily::P4mm);
    let session = analyze(&img, "m", &request(&[[6.0, 0.0], [0.0, 6.0]])).unwrap();
    let path = dir.path().join("m.session.json");
    save_session(&session, &path).unwrap();
    let back = load_session::<f64>(&path).unwrap();
    assert_eq!(back, session);
    let text = session_to_json(&session).unwrap();
    assert_eq!(session_to_json(&session_from_json::<f64>(&text).unwrap()).unwrap(), text);
}

#[test]
fn png_round_trip_keeps_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let png = dir.path().join("g.png");
    save_png(&small(TilingFamily::P4g), &png).unwrap();
    let img: Image = load_image(&png).unwrap();
    let session = analyze(&img, "g", &request(&[[6.0, 6.0], [12.0, 6.0]])).unwrap();
    assert_eq!(session.verdict(), "D4, non-symmorphic");
}

#[test]
fn too_few_orders_is_a_coverage_error() {
    let req = AnalysisRequest {
        fl: 4,
        ..request(&[[6.0, 6.0], [12.0, 6.0]])
    };
    let err = analyze(&small(TilingFamily::P4g), "g", &req).unwrap_err();
    assert!(matches!(err, Error::InsufficientCoverage { .. }), "{err}");
}

#[test]
fn shipped_configs_parse_and_round_trip() {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let fixture = Fixture::load(&path).unwrap();
        assert_eq!(Fixture::from_toml(&fixture.to_toml().unwrap()).unwrap(), fixture);
        assert_eq!(path.file_stem().unwrap().to_str().unwrap(), fixture.name);
        names.push(fixture.name);
    }
    names.sort();
    assert_eq!(names.len(), 9, "{names:?}");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let text = "name = \"x\"\n[tiling]\nfamily = \"p4mm\"\nsize = 64\ncolour = 1\n[analysis]\nbasis = [[4.0, 0.0], [0.0, 4.0]]\nfl = 4\n";
    assert!(matches!(Fixture::from_toml(text), Err(Error::Config(_))));
}
