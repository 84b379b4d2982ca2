use std::path::PathBuf;

use fabtune::autotune::SearchSpace;
use fabtune::world::{presets, RobotModel, Scenario};

fn read<T: serde::de::DeserializeOwned>(name: &str) -> T {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn shipped_space_matches_default() {
    let space: SearchSpace = read("space.json");
    space.validate().unwrap();
    assert_eq!(space, SearchSpace::default_space());
}

#[test]
fn shipped_robots_and_scenarios_match_presets() {
    for robot in [presets::two_link(), presets::three_link()] {
        let shipped: RobotModel = read(&format!("robot_{}.json", robot.name));
        assert_eq!(shipped, robot);
        for (kind, preset) in [("ring", presets::ring(&robot)), ("empty", presets::empty(&robot))] {
            let sc: Scenario = read(&format!("{kind}_{}.json", robot.name));
            sc.validate(&robot).unwrap();
            assert_eq!(sc, preset, "{kind}_{}", robot.name);
        }
    }
}
