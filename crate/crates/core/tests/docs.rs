use std::path::PathBuf;

use chiralpoint::{config, presets};

fn repo_file(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn json_blocks(md: &str) -> Vec<String> {
    md.split("```json").skip(1).map(|b| b.split("```").next().unwrap().to_string()).collect()
}

#[test]
fn every_config_example_loads() {
    let blocks = json_blocks(&repo_file("CONFIG.md"));
    for b in &blocks {
        config::load_str(b).unwrap_or_else(|e| panic!("{e}\n{b}"));
    }
    for name in presets::NAMES {
        assert!(blocks.iter().any(|b| b.contains(&format!("\"preset\": \"{name}\""))), "no example for {name}");
    }
}

#[test]
fn every_preset_is_in_the_manifest() {
    let manifest = repo_file("PRESETS.md");
    for name in presets::NAMES {
        assert!(manifest.contains(&format!("| {name} |")), "{name} missing from PRESETS.md");
        config::load_preset(name).unwrap();
    }
}
