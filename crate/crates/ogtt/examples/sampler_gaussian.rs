//! Run the two-point MCMC kernel on a correlated Gaussian and check its
//! moments against the analytic target.
//!
//! ```bash
//! cargo run --example sampler_gaussian
//! ```

use ogtt::sampler::{integrated_autocorr_time, run_chain, SamplerConfig};

fn main() -> ogtt::Result<()> {
    // Zero-mean bivariate Gaussian with correlation 0.8.
    let rho: f64 = 0.8;
    let det = 1.0 - rho * rho;
    let target = move |v: &[f64]| {
        let (x, y) = (v[0], v[1]);
        -0.5 * (x * x - 2.0 * rho * x * y + y * y) / det
    };

    let cfg = SamplerConfig::new(100_000, 10_000, 42, (vec![1.0, 1.0], vec![-1.0, -0.5]));
    let chain = run_chain(target, &cfg)?;

    println!("iterations: {} (kept {})", cfg.n_iterations, chain.n_kept());
    println!("acceptance rate: {:.3}", chain.acceptance_rate());

    for j in 0..2 {
        let col = chain.column(j);
        let n = col.len() as f64;
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let iat = integrated_autocorr_time(&col);
        println!(
            "coord {j}: mean {mean:+.4} (target 0), var {var:.4} (target 1), IAT {iat:.1}, ESS {:.0}",
            n / iat
        );
    }

    let cross: f64 = (0..chain.n_kept())
        .map(|i| chain.draw(i)[0] * chain.draw(i)[1])
        .sum::<f64>()
        / chain.n_kept() as f64;
    println!("cross moment: {cross:.4} (target {rho})");
    Ok(())
}
