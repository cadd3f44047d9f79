//! Stable/sweeping regions of g = -ax, Q ≈ bx over a parameter grid.

use antibody_lab::stability::{classify_power_law, VerdictKind, DEFAULT_TOL};

fn main() -> antibody_lab::Result<()> {
    let lambda = 1.0;
    print!("{:>6}", "b \\ a");
    let a_values: Vec<f64> = (1..=20).map(|k| k as f64 * 0.1).collect();
    for a in &a_values {
        print!("{a:>5.1}");
    }
    println!();
    for b in [1.0, 1.5, 2.0, 3.0, 4.0, 6.0] {
        print!("{b:>6.1}");
        for &a in &a_values {
            let mark = match classify_power_law(a, b, lambda, DEFAULT_TOL)?.verdict {
                VerdictKind::Stable => "S",
                VerdictKind::Sweeping => "w",
                _ => "=",
            };
            print!("{mark:>5}");
        }
        println!();
    }
    println!("S: stable (a > Λ ln b), w: sweeping, =: boundary");
    Ok(())
}
