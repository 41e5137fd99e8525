//! Verify every hand-written backward pass against central finite
//! differences (f64, step 1e-5, threshold 1e-4 relative).
//!
//! Run with: `cargo run --release --example gradcheck_all`

use tcsr::verify::run_gradcheck;

fn main() {
    let reports = run_gradcheck(None, &[1]).unwrap();
    let mut pass = true;
    for r in &reports {
        print!("{}", r.to_text());
        pass &= r.pass();
    }
    println!("{}", if pass { "all gradients verified" } else { "FAILURES above" });
    std::process::exit(if pass { 0 } else { 1 });
}
