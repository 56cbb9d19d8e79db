//! Print a few rendered frames of the scripted expert as ASCII art.

use relmimic_core::env::{render, scripted_expert, WalkerState};

fn main() {
    let mut s = WalkerState::reset(0);
    for t in 0..40 {
        let a = scripted_expert(&s);
        s.step(a);
        if t % 8 == 7 {
            let f = render(&s, 32);
            println!("t={} x={:.2}", s.t, s.x);
            for r in 0..32 {
                let line: String = (0..32)
                    .map(|c| match f.get(r, c) {
                        0 => '.',
                        96 => '-',
                        160 => '|',
                        200 => '#',
                        _ => '@',
                    })
                    .collect();
                println!("{line}");
            }
        }
    }
}
