//! Parse an integrand and read off exact partial derivatives.

use isodelay::expr::{parse_expression, EvalPoint, Mode, Slot};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let e = parse_expression("(qd[0] + qdtau[0])^3 - 2*lambda[0]*sin(t)*q[0]", 1, Mode::Lagrangian)?;
    println!("parsed: {e}");
    let x = EvalPoint {
        t: 0.5,
        q: &[1.5],
        qd: &[1.0],
        qtau: &[0.25],
        qdtau: &[0.5],
        lambda: &[2.0],
        ..Default::default()
    };
    let d = e.gradient(&x)?;
    println!("value = {:.6}", d.value);
    for slot in e.free_slots() {
        println!("  d/d{slot:<9} = {:.6}", d.get(*slot));
    }
    println!("d/dqd[0] again = {:.6}", e.partial(Slot::Qd(0), &x)?);
    Ok(())
}
