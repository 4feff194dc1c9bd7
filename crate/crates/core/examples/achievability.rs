use agrlab::prob::{ConditionalDistribution, JointDistribution};
use agrlab::quantizer::achievability_experiment;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let j = JointDistribution::from_rows(&[vec![0.4, 0.1], vec![0.1, 0.4]])?;
    let enc = ConditionalDistribution::from_rows(&[vec![0.8, 0.2], vec![0.2, 0.8]])?;
    let report = achievability_experiment(&j, &enc, 0.25, &[1, 2, 4, 8, 12], 0.5, 500, 7)?;
    println!(
        "test channel: {:.4} bits, E d_IB {:.4} nats",
        report.test_channel_rate_bits, report.test_channel_distortion
    );
    for r in &report.rows {
        println!(
            "n={:>2} M={:>5} distortion {:.4} +- {:.4} typical {:.2}",
            r.n, r.codebook_size, r.mean_distortion, r.stderr, r.success_rate
        );
    }
    Ok(())
}
