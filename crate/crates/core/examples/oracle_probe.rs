use iglu_core::agents::{Agent, GreedyOracle};
use iglu_core::{Env, EpisodeConfig, TaskLibrary};

fn main() {
    let lib = TaskLibrary::bundled();
    for t in lib.tasks() {
        let start = std::time::Instant::now();
        let mut env = Env::new(EpisodeConfig::new(&t.task_id), &lib).unwrap();
        let mut agent = GreedyOracle::new();
        while !env.is_done() {
            let a = agent.act(&env);
            env.step(a).unwrap();
        }
        println!(
            "{:20} success={} steps={} g={} M={}/{} built={} {:?}",
            t.task_id,
            env.is_success(),
            env.step_index(),
            env.episode_reward(),
            env.max_match(),
            t.target.len(),
            env.built().len(),
            start.elapsed()
        );
    }
}
