use agrlab::agrlearn::{
    decision_agreement, error_rate, predict_batched, predict_contextual, predict_replicated_all, train_agrlearn,
    TrainConfig,
};
use agrlab::data::{synth_blobs, BlobSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = BlobSpec {
        classes: 2,
        per_class: 300,
        dim: 2,
        separation: 4.0,
        noise: 1.0,
    };
    let train = synth_blobs(&spec, 1)?;
    let test = synth_blobs(&spec, 2)?;
    let cfg = TrainConfig {
        fold: 3,
        epochs: 15,
        ..Default::default()
    };
    let model = train_agrlearn(&cfg, &train, None)?.model;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let replicated = predict_replicated_all(&model, &test);
    let contextual = (0..test.len())
        .map(|i| predict_contextual(&model, test.feature(i), &train, 32, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    let batched = predict_batched(&model, &test, 16, &mut rng)?;

    for (name, p) in [("replicated", &replicated), ("contextual", &contextual), ("batched", &batched)] {
        println!(
            "{name:<11} error {:.4} agreement with replicated {:.4}",
            error_rate(p, test.labels()),
            decision_agreement(p, &replicated)
        );
    }
    Ok(())
}
