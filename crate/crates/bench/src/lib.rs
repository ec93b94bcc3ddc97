//! Seeded inputs shared by the benchmarks.

use engage_core::calllog::{SequenceFeatures, CALL_CHANNELS, STATIC_DIM, T_MAX};
use engage_core::rmab::MdpParams;
use engage_core::SeedTree;
use rand::Rng;

/// Random valid two-state MDPs.
pub fn random_mdps(n: usize, discount: f64, seed: u64) -> Vec<MdpParams> {
    let mut rng = SeedTree::new(seed).rng("mdps");
    (0..n)
        .map(|_| {
            let v = [0; 4].map(|_| rng.random_range(0.05..0.95));
            MdpParams::from_vector(v, discount).expect("probabilities in range")
        })
        .collect()
}

/// Labelled examples whose label follows the engagement share of the call rows.
pub fn random_examples(n: usize, seed: u64) -> (Vec<SequenceFeatures>, Vec<bool>) {
    let mut rng = SeedTree::new(seed).rng("examples");
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let valid_len = rng.random_range(1..=T_MAX);
        let engage_p: f64 = rng.random();
        let mut dynamic = vec![[0.0; CALL_CHANNELS]; T_MAX];
        let (mut conn, mut eng) = (0.0, 0.0);
        for (j, row) in dynamic.iter_mut().take(valid_len).enumerate() {
            let connected = rng.random_bool(0.7);
            let engaged = connected && rng.random_bool(engage_p);
            conn += f64::from(u8::from(connected));
            eng += f64::from(u8::from(engaged));
            let minutes = if engaged { rng.random_range(0.5..5.0) } else { rng.random_range(0.0..0.5) };
            *row = [minutes, f64::from(u8::from(connected)), f64::from(u8::from(engaged)), j as f64 / 30.0, 0.1];
        }
        let static_features = (0..STATIC_DIM).map(|_| f64::from(u8::from(rng.random_bool(0.3)))).collect();
        let ratio = if conn > 0.0 { eng / conn } else { 0.0 };
        features.push(SequenceFeatures {
            static_features,
            dynamic,
            valid_len,
            scalar_calls: [valid_len as f64, conn, eng, 1.0, 2.0, 3.0],
        });
        labels.push(ratio < 0.5);
    }
    (features, labels)
}
