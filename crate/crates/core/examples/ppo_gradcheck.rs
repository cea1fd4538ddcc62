//! Compare analytic PPO loss gradients with central finite differences, then
//! take a few update steps on the same batch.
//!
//! `cargo run --example ppo_gradcheck [DIM] [SEED]`

use promptrl::ppo::{compute_gae, policy_forward, ppo_loss, ppo_loss_and_grad, ppo_update, Adam, Batch, PolicyParams, PpoConfig};
use promptrl::seeds::substream;
use promptrl::transforms::ActionId;
use rand::Rng as _;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dim: usize = args.next().map_or(Ok(8), |s| s.parse())?;
    let seed: u64 = args.next().map_or(Ok(3), |s| s.parse())?;
    let mut rng = substream(seed, "example-gradcheck", 0);
    let params = PolicyParams::init(dim, 8, &mut rng);
    let cfg = PpoConfig {
        minibatch_size: 4,
        ..PpoConfig::default()
    };

    // two 3-step episodes
    let mut batch = Batch::default();
    for _ in 0..2 {
        let mut rewards = Vec::new();
        let mut values = Vec::new();
        for step in 0..3 {
            let s: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (p, v) = policy_forward(&params, &s)?;
            let a = rng.random_range(0..3);
            batch.states.push(s);
            batch.actions.push(ActionId::from_index(a).expect("in range"));
            batch.old_log_probs.push(p[a].ln());
            batch.dones.push(step == 2);
            rewards.push(rng.random_range(-1.0..1.0));
            values.push(v);
        }
        let (adv, ret) = compute_gae(&rewards, &values, &[false, false, true], cfg.gamma, cfg.gae_lambda)?;
        batch.rewards.extend(rewards);
        batch.values.extend(values);
        batch.advantages.extend(adv);
        batch.returns.extend(ret);
    }

    let idx: Vec<usize> = (0..batch.len()).collect();
    let (_, grad) = ppo_loss_and_grad(&params, &batch, &idx, &cfg)?;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let n_policy = params.policy.params.len();
    for (k, a) in grad.iter().enumerate() {
        let shifted = |d: f64| {
            let mut p = params.clone();
            if k < n_policy {
                p.policy.params[k] += d;
            } else {
                p.value.params[k - n_policy] += d;
            }
            ppo_loss(&p, &batch, &cfg).map(|l| l.total)
        };
        let numeric = (shifted(h)? - shifted(-h)?) / (2.0 * h);
        worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
    }
    println!("{} parameters, worst relative gradient error {worst:.2e}", params.param_count());

    let mut current = params;
    let mut adam = Adam::new(&current);
    for round in 0..5 {
        let before = ppo_loss(&current, &batch, &cfg)?.total;
        let out = ppo_update(&current, &adam, &batch, &cfg, 1e-3, &mut rng)?;
        (current, adam) = (out.params, out.adam);
        println!("update {round}: loss {before:.4} -> {:.4}", ppo_loss(&current, &batch, &cfg)?.total);
    }
    Ok(())
}
