//! Fixed benchmark inputs shared by the criterion benches and their tests.

use steinerlab::harness::gen::{generate, Family, GenSpec};
use steinerlab::SteinerInstance;

/// A labelled family instance for benchmark size `n`.
pub fn fixture(family: &str, n: usize, seed: u64) -> SteinerInstance {
    let side = (n as f64).sqrt().round().max(2.0) as usize;
    let family = match family {
        "gnm" => Family::Gnm { n, m: 2 * n },
        "grid" => Family::Grid { rows: side, cols: side },
        "geometric" => Family::Geometric { n, radius: 250 },
        "path" => Family::WeightedPath { n },
        other => panic!("unknown bench family {other}"),
    };
    let spec = GenSpec {
        family,
        wmin: 1,
        wmax: 16,
        terminals: (n / 3).max(2),
        components: (n / 10).max(1),
        requests: false,
    };
    generate(&spec, seed).expect("bench specs are valid")
}

pub const FAMILIES: [&str; 4] = ["gnm", "grid", "geometric", "path"];
pub const SIZES: [usize; 3] = [16, 32, 64];
