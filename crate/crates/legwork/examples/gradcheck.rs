//! Checks the analytic gradients of both training losses against central
//! finite differences on a small random batch, one parameter element at a
//! time, and prints the worst relative error per loss.
//!
//! Run: cargo run -p legwork --release --example gradcheck

use legwork::model::gradcheck::grad_check;

fn main() -> legwork::Result<()> {
    let report = grad_check(0, 1e-5)?;
    println!("{} parameter elements perturbed per loss\n", report.n_params);
    for c in &report.checks {
        println!(
            "{:<6} max rel err {:.3e}  (worst at {}, {} elements compared)",
            c.loss, c.max_rel_err, c.worst_param, c.n_elements
        );
    }
    let tol = 1e-4;
    println!(
        "\noverall {:.3e} {} tolerance {tol:.0e}",
        report.max_rel_err(),
        if report.passed(tol) { "<" } else { ">=" }
    );
    std::process::exit(if report.passed(tol) { 0 } else { 1 });
}
