use agrlab::prob::JointDistribution;
use agrlab::quantizer::{brute_force_optimal_code, code_expected_distortion, IbCode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let j = JointDistribution::from_rows(&[vec![0.45, 0.05], vec![0.15, 0.15], vec![0.02, 0.18]])?;
    let (single, d1) = brute_force_optimal_code(&j, 1, 2, 2)?;
    println!("n=1, M=2: distortion {d1:.6} nats, table {:?}", single.encoder_table());

    // the squared single-letter code is always available to the n=2 search
    let squared = single.product_square()?;
    println!("squared code: {:.6} nats", code_expected_distortion(&squared, &j)?);

    let (pair, d2) = brute_force_optimal_code(&j, 2, 2, 2)?;
    println!("n=2, M=2 ({:.2} bits/symbol): distortion {d2:.6} nats", pair.rate_bits());
    println!("codebook {:?}", pair.codebook());
    println!("identity code: {:.6} nats", code_expected_distortion(&IbCode::identity(3), &j)?);
    Ok(())
}
