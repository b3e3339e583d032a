use std::path::Path;

use funnel_mpc::{scenario, GroundTruthRoad, PlannerConfig, RoadKind};
use funnel_mpc_sim::schema::{load_dir, RoadSpec, ScenarioFile};

fn shipped() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios"))
}

fn minimal(road: &str) -> String {
    format!(
        r#"{{
            "version": 1,
            "id": "probe",
            "road": {road},
            "speed": {{"kind": "constant", "v": 20.0}},
            "perception": {{"sigma0": 0.0, "sigma_rate": 1e-4, "view_range": 130.0}}
        }}"#
    )
}

#[test]
fn shipped_files_are_the_builtin_library() {
    let loaded = load_dir(shipped()).unwrap();
    assert_eq!(loaded.len(), scenario::BUILTIN_IDS.len());
    for (file, sc) in loaded {
        assert_eq!(sc, scenario::builtin(&file.id).unwrap(), "{}", file.id);
    }
}

#[test]
fn json_round_trip_is_exact() {
    for sc in scenario::builtins() {
        let file = ScenarioFile::from_scenario(&sc);
        let back = ScenarioFile::from_json(&file.to_json()).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_scenario().unwrap(), sc);
    }
}

#[test]
fn omitted_fields_take_the_defaults() {
    let sc = ScenarioFile::from_json(&minimal(r#"{"kind": "straight", "length": 2000.0}"#)).unwrap().to_scenario().unwrap();
    let d = PlannerConfig::default();
    assert_eq!(sc.planner.horizon, 12);
    assert_eq!(sc.planner.ts, 0.5);
    assert_eq!(sc.planner.r, 100.0);
    assert_eq!(sc.planner.rho, 0.6);
    assert_eq!(sc.planner.q, d.q);
    assert_eq!(sc.planner.sets, d.sets);
    assert_eq!(sc.steps, 300);
    assert_eq!(sc.perception.temporal_corr, 0.9);
    assert_eq!(sc.perception.spacing, 5.0);
    assert!(!sc.perception.lateral_uncertainty);
    assert_eq!(sc.perception.seed, 0);
}

#[test]
fn every_road_kind_loads() {
    let cases = [
        (r#"{"kind": "straight", "length": 2000.0}"#, RoadKind::Straight),
        (r#"{"kind": "arc", "kappa": 0.004, "length": 2000.0}"#, RoadKind::Arc),
        (r#"{"kind": "clothoid", "rate": 1e-5, "length": 2000.0}"#, RoadKind::Clothoid),
        (
            r#"{"kind": "clothoid-entry", "lead_in": 100.0, "transition": 60.0, "kappa": 0.005, "arc_length": 200.0, "run_out": 1500.0}"#,
            RoadKind::ClothoidEntry,
        ),
        (
            r#"{"kind": "composite", "theta0": 0.1, "segments": [{"type": "straight", "length": 500.0},
                {"type": "transition", "length": 100.0, "from": 0.0, "to": 0.002}, {"type": "arc", "length": 1500.0, "kappa": 0.002}]}"#,
            RoadKind::Composite,
        ),
    ];
    for (road, kind) in cases {
        let file = ScenarioFile::from_json(&minimal(road)).unwrap();
        let sc = file.to_scenario().unwrap();
        assert_eq!(sc.road.kind(), kind);
        // Writing the scenario back gives the same road description.
        let again = ScenarioFile::from_scenario(&sc);
        match (&again.road, &file.road) {
            (RoadSpec::Clothoid { rate: a, .. }, RoadSpec::Clothoid { rate: b, .. }) => assert!((a - b).abs() <= 1e-15 * b.abs()),
            (a, b) => assert_eq!(a, b),
        }
    }
    let entry = ScenarioFile::from_json(&minimal(cases[3].0)).unwrap().to_scenario().unwrap();
    assert_eq!(entry.road, GroundTruthRoad::clothoid_entry(100.0, 60.0, 0.005, 200.0, 1500.0).unwrap());
}

#[test]
fn version_is_mandatory_and_checked() {
    let text = minimal(r#"{"kind": "straight", "length": 2000.0}"#);
    let missing = text.replace(r#""version": 1,"#, "");
    assert!(ScenarioFile::from_json(&missing).is_err());
    let future = text.replace(r#""version": 1"#, r#""version": 2"#);
    let err = ScenarioFile::from_json(&future).unwrap().to_scenario().unwrap_err();
    assert!(err.to_string().contains("version 2"), "{err}");
}

#[test]
fn malformed_files_are_rejected() {
    let ok = minimal(r#"{"kind": "straight", "length": 2000.0}"#);
    let typo = ok.replace("sigma_rate", "sigma_rat");
    assert!(ScenarioFile::from_json(&typo).is_err());
    let unknown_road = minimal(r#"{"kind": "spiral", "length": 2000.0}"#);
    assert!(ScenarioFile::from_json(&unknown_road).is_err());
    let short_view = ok.replace("130.0", "100.0");
    assert!(ScenarioFile::from_json(&short_view).unwrap().to_scenario().is_err());
    let bad_id = ok.replace(r#""probe""#, r#""a/b""#);
    assert!(ScenarioFile::from_json(&bad_id).unwrap().to_scenario().is_err());
    let negative_length = minimal(r#"{"kind": "straight", "length": -5.0}"#);
    assert!(ScenarioFile::from_json(&negative_length).unwrap().to_scenario().is_err());
}

#[test]
fn load_errors_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("broken.json"), "{ not json").unwrap();
    let err = load_dir(dir.path()).unwrap_err().to_string();
    assert!(err.contains("broken.json"), "{err}");
    let err = ScenarioFile::load(&dir.path().join("absent.json")).unwrap_err().to_string();
    assert!(err.contains("absent.json"), "{err}");
}

#[test]
fn duplicate_ids_in_a_directory_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = minimal(r#"{"kind": "straight", "length": 2000.0}"#);
    std::fs::write(dir.path().join("a.json"), &text).unwrap();
    std::fs::write(dir.path().join("b.json"), &text).unwrap();
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    assert!(load_dir(dir.path()).unwrap_err().to_string().contains("duplicate"));
}
