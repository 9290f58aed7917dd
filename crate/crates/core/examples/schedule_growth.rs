//! Evaluates a schedule with a fast tail and runs the growth checks.

use noncon::schedule::{Schedule, TailFunction};

fn main() -> noncon::Result<()> {
    let good = Schedule::new(2, vec![TailFunction::Polynomial(vec![0, 0, 1])], None)?;
    println!("q(10) = {:?}", (1..=good.ell()).map(|i| good.evaluate(i, 10)).collect::<Result<Vec<_>, _>>()?);
    let report = good.validate_growth(1000, &[0.5, 0.1]);
    println!("n^2 tail passes: {}", report.pass);

    // 3n is linear: it does not outgrow the head
    let bad = Schedule::new(2, vec![TailFunction::Polynomial(vec![0, 3])], None)?;
    let report = bad.validate_growth(1000, &[0.5, 0.1]);
    if let Some(c) = report.first_failure() {
        println!("3n tail fails {}: {}", c.name, c.detail);
    }
    Ok(())
}
