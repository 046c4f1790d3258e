//! Runs one merge preset and prints who went through first.
//!
//! cargo run --release -p cei-core --example merge -- C

use cei_core::engine;
use cei_core::scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "A".to_string());
    let config = scenario::preset(&name)?;
    let run = engine::run(&config)?;
    let o = &run.outcome;
    println!("scenario {}: collided = {}", o.scenario, o.collided);
    match o.first_through_merge {
        Some(side) => println!("first through the merge: {side}"),
        None => println!("nobody reached the merge point"),
    }
    for r in &run.replans {
        println!(
            "t = {:5.2} s  {:5}  {:?}  risk {:.3} -> {:.3}",
            r.time, r.side, r.trigger, r.risk_before, r.risk_after
        );
    }
    Ok(())
}
