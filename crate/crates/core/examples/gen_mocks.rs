//! Regenerates the bundled mock models in `data/`.

use unidist::bundled;
use unidist::eulermock::generate_mock;

const SEED: u64 = 1;

fn main() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    for name in bundled::NAMES {
        let sc = bundled::scenario(name).unwrap();
        let model = generate_mock(&sc, name, SEED).expect("mock exists");
        assert!(model.validate(&sc).ok, "{name}");
        std::fs::write(dir.join(format!("mock_{name}.json")), model.to_json() + "\n").unwrap();
    }
}
