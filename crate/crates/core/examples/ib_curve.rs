use agrlab::ib::solve_ib_curve;
use agrlab::prob::JointDistribution;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let j = JointDistribution::from_rows(&[vec![0.45, 0.05], vec![0.15, 0.15], vec![0.02, 0.18]])?;
    let betas: Vec<f64> = (0..=40).map(|k| k as f64 * 0.5).collect();
    let curve = solve_ib_curve(&j, &betas, 3, 5, 7)?;
    println!("I(X;Y) = {:.6} nats", curve.mutual_information);
    println!("{:>6} {:>10} {:>10} {:>10}", "beta", "I(X;T)", "I(T;Y)", "E d_IB");
    for p in curve.points.iter().step_by(4) {
        println!("{:>6.2} {:>10.6} {:>10.6} {:>10.6}", p.beta, p.rate, p.relevance, p.distortion);
    }
    let half = curve.mutual_information / 2.0;
    println!("R_IB at D = I/2: {:.6} nats", curve.rate_at_distortion(half));
    Ok(())
}
