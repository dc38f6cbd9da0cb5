//! Shared fixtures for the engine benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tagflow::{AesStandard, ConfigId, TagId, Workload};

/// `blocks` random blocks per tag, each tag with its own standard and
/// configuration (`None` on a single-application graph).
pub fn workload(
    threads: &[(TagId, AesStandard, Option<ConfigId>)],
    blocks: usize,
    seed: u64,
) -> Workload {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = Workload::new();
    for &(tag, std, cfg) in threads {
        let key: Vec<u8> = (0..std.key_bytes()).map(|_| rng.gen()).collect();
        let data: Vec<Vec<u8>> = (0..blocks)
            .map(|_| rng.gen::<[u8; 16]>().to_vec())
            .collect();
        w.add_blocks(tag, cfg, &key, data);
    }
    w
}
