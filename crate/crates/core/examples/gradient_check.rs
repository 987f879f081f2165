//! Finite-difference check of every differentiable component, then the same
//! check against a deliberately broken backward pass.
//!
//! ```text
//! cargo run --release --example gradient_check
//! ```

use cloze_rank::verify::{check_component, run_gradcheck_suite, Component};

fn main() -> cloze_rank::Result<()> {
    let summary = run_gradcheck_suite(0, 3, None)?;
    print!("{summary}");
    println!("all passed: {}\n", summary.all_passed());

    let report = check_component(Component::Gru, 0, false)?;
    println!(
        "gru seed 0: {} entries checked, {} skipped at ReLU kinks, worst {:.2e} at {:?}",
        report.checked, report.skipped, report.max_rel_error, report.worst
    );

    let broken = run_gradcheck_suite(0, 1, Some(Component::Bilstm))?;
    println!("with a sign-flipped bilstm gradient, failing: {:?}", broken.failing());
    Ok(())
}
