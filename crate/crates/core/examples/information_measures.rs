use agrlab::prob::{conditional_y_given_x, entropy, kl_divergence, marginals, mutual_information, JointDistribution};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let j = JointDistribution::from_rows(&[vec![0.45, 0.05], vec![0.15, 0.15], vec![0.02, 0.18]])?;
    let (px, py) = marginals(&j);
    println!("p(x) = {px:?}");
    println!("p(y) = {py:?}");
    println!("H(X) = {:.6} nats", entropy(&px));
    println!("H(Y) = {:.6} nats", entropy(&py));
    println!("I(X;Y) = {:.6} nats", mutual_information(&j));

    let cond = conditional_y_given_x(&j);
    for x in 0..j.x_size() {
        let d = kl_divergence(cond.row(x), &py)?;
        println!("D(p(y|x={x}) || p(y)) = {d:.6}");
    }
    Ok(())
}
