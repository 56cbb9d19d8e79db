//! Time forward and backward passes of the agent and discriminator networks.

use relmimic_core::gail::{discriminator_gradients, DiscBatch};
use relmimic_core::nn::{AgentConfig, DiscConfig, Discriminator, Policy, ValueNet, Variant};
use relmimic_core::rng;
use relmimic_core::{Graph, Tensor};
use std::time::Instant;

fn main() {
    let cfg = AgentConfig::new(4, 32, Variant::Local, 2);
    let pol = Policy::new(&cfg, 1).unwrap();
    let val = ValueNet::new(&cfg, 1).unwrap();
    let disc = Discriminator::new(&DiscConfig::new(4, 32, true), 1).unwrap();
    let mut r = rng::seeded(0);
    for &n in &[1usize, 2, 64, 256] {
        let x = Tensor::rand_uniform(&[n, 4, 32, 32], 0.0, 255.0, &mut r);
        let t = Instant::now();
        let reps = if n < 10 { 200 } else { 5 };
        for _ in 0..reps {
            pol.evaluate(&x).unwrap();
        }
        let f = t.elapsed().as_secs_f64() / reps as f64;
        let t = Instant::now();
        for _ in 0..reps {
            let mut g = Graph::new();
            let b = pol.params.bind(&mut g, true);
            let xv = g.constant(x.clone());
            let o = pol.forward(&mut g, &b, xv).unwrap();
            let s = g.sum(o.mean);
            pol.params.gradients(&mut g, s, &b).unwrap();
        }
        let fb = t.elapsed().as_secs_f64() / reps as f64;
        let t = Instant::now();
        for _ in 0..reps {
            disc.probability(&x).unwrap();
        }
        let df = t.elapsed().as_secs_f64() / reps as f64;
        let t = Instant::now();
        let batch = DiscBatch::new(x.clone(), x.clone()).unwrap();
        for _ in 0..reps.min(5) {
            discriminator_gradients(&disc, &batch, 10.0, &mut r).unwrap();
        }
        let db = t.elapsed().as_secs_f64() / reps.min(5) as f64;
        let _ = &val;
        println!("n={n}: pol fwd {:.2}ms fwd+bwd {:.2}ms | disc fwd {:.2}ms  gp-step {:.2}ms", f * 1e3, fb * 1e3, df * 1e3, db * 1e3);
    }
}
