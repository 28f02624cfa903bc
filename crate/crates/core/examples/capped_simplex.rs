//! Closed-form maximizer over the capped simplex and the two search
//! directions used by the weight step.

use cskl::mkl::{descent_direction, lp_direction, max_step, pivot_index, topt_gamma, topt_value};

fn main() -> cskl::Result<()> {
    let d = [5.0, 3.0, 4.0, 1.0, 4.0];
    for t in 1..=d.len() {
        let w = topt_gamma(&d, t)?;
        println!(
            "t = {t}: g_t(d) = {:>4}, gamma = {:?}",
            topt_value(&d, t)?,
            w.gamma()
        );
    }

    // a step from an interior point, with gradient phi = -d / 2
    let gamma = [0.5, 0.3, 0.2];
    let phi = [-1.0, -2.0, -3.0];
    let mu = pivot_index(&gamma);
    let dir = descent_direction(&gamma, mu, &phi);
    let bound = max_step(&gamma, &dir).expect("non-zero direction");
    println!("pivot {mu}, reduced-gradient direction {dir:?}");
    println!(
        "max step {:.4} saturates coordinate {}",
        bound.s_max, bound.index
    );
    let moved: Vec<f64> = gamma
        .iter()
        .zip(&dir)
        .map(|(g, x)| g + bound.s_max * x)
        .collect();
    println!("gamma + S_max D = {moved:.4?}");

    let lp = lp_direction(&gamma, &phi);
    let value: f64 = phi.iter().zip(&lp).map(|(p, x)| p * x).sum();
    println!("LP direction {lp:?}, phi'D = {value}");
    Ok(())
}
