use nmp::config::RunConfig;
use nmp::sampler::sample_trajectories;
use nmp::scenario_gen::{generate_forced, ARCHETYPES};

fn main() {
    let cfg = RunConfig::desk();
    for &arch in ARCHETYPES.iter() {
        for n in [600usize, 3000] {
            let mut floors = Vec::new();
            for seed in 0..12u64 {
                let sc = match generate_forced(&cfg.gen, 40_000 + seed, arch) {
                    Ok(s) => s,
                    Err(_) => continue,
                };
                let mut sampler = cfg.sampler.clone();
                sampler.n_samples = n;
                sampler.seed = 99 + seed;
                let cands =
                    sample_trajectories::<f64>(&sc.sdv, &sampler, cfg.gen.t_steps, cfg.gen.dt)
                        .unwrap();
                let b = &sc.demonstration.waypoints[5].pose;
                let best = cands
                    .iter()
                    .map(|c| {
                        let a = &c.waypoints[5].pose;
                        ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt()
                    })
                    .fold(f64::INFINITY, f64::min);
                floors.push(best);
            }
            floors.sort_by(f64::total_cmp);
            let mean = floors.iter().sum::<f64>() / floors.len() as f64;
            println!(
                "{:?} n={n}: mean {mean:.3}  median {:.3}  worst {:.3}  ({} ok)",
                arch,
                floors[floors.len() / 2],
                floors.last().unwrap(),
                floors.len()
            );
        }
    }
}
