//! Mean squared error of conditioned sampling against the best
//! approximation of e^x in four Legendre dimensions.

use wlsq::{monte_carlo, FunctionSpace, Pipeline, PipelineOptions, RngStream};

fn main() -> wlsq::Result<()> {
    let space = FunctionSpace::legendre(4)?;
    let u = wlsq::targets::exp_target(&space);
    let m = wlsq::minimal_budget(space.dim(), 0.5)?;

    let report = monte_carlo(
        &space,
        &u,
        Pipeline::Conditioned,
        m,
        &PipelineOptions::default(),
        100,
        RngStream::new(1, 0),
    )?;
    println!("mean squared error  {:.3e}", report.mean_error_sq);
    println!("over best possible  x{:.4}", report.mean_ratio.unwrap());
    Ok(())
}
