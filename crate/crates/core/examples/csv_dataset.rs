//! Loading a CSV with its schema, training the classifier and listing the
//! rejected test rows in their original units.

use std::path::PathBuf;

use recourse::bench::{prepare, DatasetRef, ExperimentConfig};
use recourse::data::accuracy;

fn main() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let cfg = ExperimentConfig {
        dataset: DatasetRef::Csv {
            path: dir.join("breast_cancer.csv"),
            schema: dir.join("breast_cancer.schema.json"),
        },
        ..ExperimentConfig::default()
    };
    let p = prepare(&cfg).unwrap();
    let test = p.data.test_indices();
    println!(
        "{} rows, {} encoded features, test accuracy {:.3}",
        p.data.len(),
        p.data.dim(),
        accuracy(p.classifier.as_ref(), &p.data, test)
    );
    println!("{} favorable candidates, {} rejected subjects", p.pool.len(), p.subjects.len());
    for x in p.subjects.iter().take(3) {
        let decoded = p.data.encoding().decode(x);
        println!("{}", serde_json::to_string(&decoded).unwrap());
    }
}
