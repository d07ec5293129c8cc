#![allow(dead_code)]

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crsbias::corpus::{Corpus, Split};
use crsbias::fixture::{covering_pool, four_item_fixture, standard_fixture, synthetic_run};
use crsbias_cli::RunConfig;

pub const SEED: u64 = 42;

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) {
    let mut w = BufWriter::new(File::create(path).unwrap());
    f(&mut w).unwrap();
    w.flush().unwrap();
}

pub fn write_corpus(dir: &Path, corpus: &Corpus) {
    corpus.save(dir.join("corpus.jsonl")).unwrap();
    write_with(&dir.join("catalog.jsonl"), |w| corpus.catalog().write_jsonl(w));
}

/// Standard fixture, covering pool and two synthetic runs over the test split.
pub fn write_standard(dir: &Path) {
    let f = standard_fixture(SEED);
    write_corpus(dir, &f.corpus);
    f.pool.save(dir.join("pool.jsonl")).unwrap();
    for (name, seed, len) in [("model_a", 1, 20), ("model_b", 2, 60)] {
        let run = synthetic_run(&f.corpus, Split::Test, len, seed, name);
        write_with(&dir.join(format!("{name}.jsonl")), |w| run.write_jsonl(w));
    }
}

pub fn write_four_item(dir: &Path) {
    let corpus = four_item_fixture();
    write_corpus(dir, &corpus);
    covering_pool(corpus.catalog(), SEED).save(dir.join("pool.jsonl")).unwrap();
}

pub fn config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, body).unwrap();
    path
}

pub fn load(path: &Path) -> RunConfig {
    RunConfig::load(path).unwrap()
}

pub fn read(path: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

/// Every file in `dir`, name and bytes, sorted by name.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), read(&p)))
        .collect();
    out.sort();
    out
}

pub const STANDARD_CONFIG: &str = r#"
seed = 42

[paths]
corpus = "corpus.jsonl"
catalog = "catalog.jsonl"
pool = "pool.jsonl"
runs = ["model_a.jsonl", "model_b.jsonl"]
output_dir = "out"

[augment]
strategy = "pop_nudge"
k = 5
batch_size = 32
"#;
