use std::path::PathBuf;

use warmsim::config::ExperimentConfig;

#[test]
fn every_sample_config_builds() {
    let dir: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs"].iter().collect();
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let exp = ExperimentConfig::from_path(&path).and_then(ExperimentConfig::build);
            assert!(exp.is_ok(), "{}: {:?}", path.display(), exp.err());
            seen += 1;
        }
    }
    assert!(seen >= 5);
}
