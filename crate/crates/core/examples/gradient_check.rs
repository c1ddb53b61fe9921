//! Finite-difference check of the hand-written backward pass for every
//! activation, plus a deliberately scaled gradient that must be caught.

use patchseg::nn::Activation;
use patchseg::selfcheck::GradientInstance;

fn main() -> patchseg::Result<()> {
    for act in Activation::ALL {
        let inst = GradientInstance::away_from_kinks(7, 12, 24, 32, 3, act)?;
        let report = inst.check(1.0, 0)?;
        println!(
            "{act:>4}: {} params, max rel err {:.2e} -> {}",
            report.checked,
            report.max_rel_err,
            if report.passed() { "ok" } else { "MISMATCH" }
        );
    }
    let inst = GradientInstance::new(7, 12, 2, Activation::Silu)?;
    let bad = inst.check(1.01, 0)?;
    println!("gradient scaled by 1.01: max rel err {:.2e}, passed = {}", bad.max_rel_err, bad.passed());
    Ok(())
}
