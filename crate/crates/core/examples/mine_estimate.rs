use agrlab::mine::{population_j, train_mine, DiscretePairSampler, MineConfig, MineCritic};
use agrlab::nn::ParamStore;
use agrlab::seed::SeedStream;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sampler = DiscretePairSampler::named("bsc:0.1")?;
    let cfg = MineConfig {
        steps: 2000,
        ..Default::default()
    };
    let seeds = SeedStream::new(7);
    let mut store = ParamStore::new();
    let critic = MineCritic::new(&mut store, "critic", sampler.pair_width(), &cfg.hidden, &mut seeds.rng("init", 0));
    let est = train_mine(&mut store, &critic, &sampler, &cfg, seeds)?;
    let pop = population_j(&store, &critic, &sampler, 100_000, &mut seeds.rng("population", 0))?;
    println!("exact I     {:.4} nats", sampler.mutual_information());
    println!("estimate    {:.4} nats", est.estimate);
    println!("population  {:.4} nats", pop);
    Ok(())
}
