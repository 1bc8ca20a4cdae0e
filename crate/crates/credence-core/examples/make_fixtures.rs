//! Writes a ready-to-run model/dataset pair for the command-line tool:
//! a 4-class 16-feature pattern task and a random-feature classifier
//! trained on it by ridge regression.
//!
//! Usage: cargo run -p credence-core --example make_fixtures [-- <out_dir>]

use std::fs;
use std::path::PathBuf;

use credence_core::instances::{model_accuracy, pattern_mixture, random_feature_classifier};
use credence_core::report::to_json_precise;

fn main() {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| PathBuf::from("fixtures"));
    fs::create_dir_all(&out).expect("create output directory");

    let data = pattern_mixture(4, 16, 60, 0.12, 31);
    let model = random_feature_classifier(&data, 4, 32, 1e-2, 32);

    data.write_csv(&out.join("data.csv")).expect("write dataset");
    fs::write(
        out.join("model.json"),
        to_json_precise(&model).expect("serialize model"),
    )
    .expect("write model");

    println!(
        "wrote {} samples and a classifier with training accuracy {:.3} to {}",
        data.len(),
        model_accuracy(&model, &data),
        out.display()
    );
}
