use agrlab::harness::{parse_args, run};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("agrlab-fold-comparison");
    let out = dir.to_string_lossy().into_owned();
    let cli = parse_args(["agrlab", "compare", "--seeds", "3", "--epochs", "10", "--out", out.as_str()])?;
    let results = run(&cli)?;
    println!("{}", serde_json::to_string_pretty(&results)?);
    println!("summary written to {}", dir.join("summary.json").display());
    Ok(())
}
