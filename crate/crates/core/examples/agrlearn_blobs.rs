use agrlab::agrlearn::{train_agrlearn, TrainConfig};
use agrlab::data::{synth_blobs, two_blob_bayes_error, BlobSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = BlobSpec {
        classes: 2,
        per_class: 500,
        dim: 2,
        separation: 4.0,
        noise: 1.0,
    };
    let train = synth_blobs(&spec, 1)?;
    let test = synth_blobs(&spec, 2)?;
    let cfg = TrainConfig {
        fold: 2,
        alpha: 0.3,
        epochs: 20,
        ..Default::default()
    };
    let out = train_agrlearn(&cfg, &train, Some(&test))?;
    for e in out.log.iter().step_by(4) {
        println!(
            "epoch {:>2} lr {:.4} loss {:.4} J {:.4} test error {:.4}",
            e.epoch,
            e.learning_rate,
            e.loss_nats,
            e.j_nats,
            e.test_error.unwrap_or(f64::NAN)
        );
    }
    println!("Bayes error {:.4}", two_blob_bayes_error(4.0, 1.0));
    Ok(())
}
