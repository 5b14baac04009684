//! Shared fixtures for the benchmarks.

use netgm::sim::{draw_data, gen_truth, Informativeness, SimDesign};
use netgm::{sample_cov, DataMatrix, NetworkStack, SampleCov};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One data set from the strong simulation design with its network.
pub struct Fixture {
    pub data: DataMatrix,
    pub s: SampleCov,
    pub networks: NetworkStack,
}

pub fn strong_design(p: usize, n: usize, seed: u64) -> Fixture {
    let truth = gen_truth(&SimDesign {
        p,
        n,
        informativeness: Informativeness::Strong,
        seed,
    })
    .expect("valid design");
    let y = draw_data(&truth.theta, n, &mut ChaCha8Rng::seed_from_u64(seed)).expect("positive definite truth");
    let data = DataMatrix::from_matrix(y).expect("finite data");
    let s = sample_cov(&data);
    let networks = NetworkStack::new(vec![truth.network], vec!["A".into()]).expect("valid network");
    Fixture { data, s, networks }
}
