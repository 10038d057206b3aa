//! Tabulates the five exploration-exploitation schedules.

use xgwo_svm::optimizer::{regulation_value, Regulation};

fn main() -> xgwo_svm::Result<()> {
    let l = 100;
    print!("{:>4}", "t");
    for k in Regulation::ALL {
        print!("  {k:>7}");
    }
    println!();
    for t in (0..l).step_by(11) {
        print!("{t:>4}");
        for k in Regulation::ALL {
            print!("  {:>7.4}", regulation_value(k, t, l)?);
        }
        println!();
    }
    Ok(())
}
