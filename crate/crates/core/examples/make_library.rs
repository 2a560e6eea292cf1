//! Write a synthetic spectral library CSV, e.g. for trying out the CLI:
//!
//!     cargo run --example make_library -- 224 240 7 lib.csv

use std::path::PathBuf;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.len() != 5 {
        eprintln!("usage: make_library <bands> <count> <seed> <out.csv>");
        std::process::exit(2);
    }
    let bands: usize = args[1].parse().expect("bands");
    let count: usize = args[2].parse().expect("count");
    let seed: u64 = args[3].parse().expect("seed");
    let out = PathBuf::from(&args[4]);
    let lib = hmua_core::synth::generate_library(bands, count, seed);
    hmua_core::io::write_library(&lib, &out).expect("write library");
    println!("wrote {} x {} library to {}", bands, count, out.display());
}
