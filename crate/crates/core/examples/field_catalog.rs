// Every catalog field, its velocity at a sample point, and how far the RK4
// reference integrator lands from the closed form where one exists.

use abm_flow::flows::{by_name, evaluate, reference_solve, CATALOG};

/// Name, velocity at `(0.5, -0.25)` and `t = 0.3`, reference-vs-exact gap.
pub type Entry = (String, Vec<f64>, Option<f64>);

pub fn run() -> abm_flow::Result<Vec<Entry>> {
    let z = [0.5, -0.25];
    let mut out = Vec::new();
    for name in CATALOG {
        let field = by_name(name, 2)?;
        let v = evaluate(field.as_ref(), &z, 0.3)?;
        let gap = match field.exact(&z, 0.0, 1.0) {
            Some(exact) => {
                let approx = reference_solve(field.as_ref(), &z, 0.0, 1.0, 10_000)?;
                Some(abm_flow::l2_distance(&approx, &exact))
            }
            None => None,
        };
        out.push((name.to_string(), v, gap));
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> abm_flow::Result<()> {
    for (name, v, gap) in run()? {
        let gap = gap.map_or("no closed form".to_string(), |g| format!("rk4 gap {g:.2e}"));
        println!("{name:<10} v = {v:>24?}  {gap}");
    }
    Ok(())
}
