//! Writes `monks-{1,2,3}.{train,test}.csv` into the directory given as the
//! first argument (default `data`).

use std::path::PathBuf;

use heretic_core::dataset::monks::{generate, to_csv, Problem};

/// Seed used for the bundled training samples.
const SEED: u64 = 1;

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    std::fs::create_dir_all(&dir)?;
    for p in Problem::all() {
        let split = generate(p, SEED);
        let n = p.number();
        std::fs::write(dir.join(format!("monks-{n}.train.csv")), to_csv(&split.train))?;
        std::fs::write(dir.join(format!("monks-{n}.test.csv")), to_csv(&split.test))?;
    }
    Ok(())
}
