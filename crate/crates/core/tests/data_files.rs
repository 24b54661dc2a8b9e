use std::path::PathBuf;

use fcsd_core::desk;
use fcsd_core::horizon::HorizonConfig;
use fcsd_core::io;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

#[test]
fn bundled_case_matches_generator() {
    let text = std::fs::read_to_string(data("case24.json")).unwrap();
    assert_eq!(text, io::case_to_string(&desk::case24()).unwrap(), "run the write_desk_data example");
    let loaded = io::load_case(data("case24.json")).unwrap();
    assert!(loaded.warnings.is_empty(), "{:?}", loaded.warnings);
    let c = &loaded.case;
    assert_eq!(c.generators.len(), 23);
    assert_eq!(c.res.len(), 3);
    assert_eq!(c.network.lines.len(), 34);
    assert_eq!(c.res.iter().map(|r| r.cap).sum::<f64>(), 700.0);
    assert_eq!(c.ess.iter().map(|e| e.p_max).sum::<f64>(), 300.0);
    assert_eq!(c.ess.iter().map(|e| e.e_max).sum::<f64>(), 1200.0);
}

#[test]
fn bundled_scenario_matches_generator() {
    let case = desk::case24();
    let cfg = HorizonConfig::default();
    let text = std::fs::read_to_string(data("day1.json")).unwrap();
    let expected = desk::day1(&case, &cfg).unwrap();
    assert_eq!(text, io::scenario_to_string(&expected).unwrap(), "run the write_desk_data example");
    let loaded = io::load_scenario(data("day1.json"), &case, &cfg).unwrap();
    assert_eq!(loaded, expected);
    assert_eq!(loaded.solves.len(), 24);
}
