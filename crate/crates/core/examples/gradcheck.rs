//! Runs the finite-difference suite on the default ledger, then again with
//! a corrupted sigmoid derivative to show the check catching it.

use pyric::autodiff::Fault;
use pyric::gradcheck::{run_suite, Graph, SuiteConfig};
use pyric::params::ParameterSet;

fn main() -> pyric::Result<()> {
    let params = ParameterSet::default();
    for fault in [None, Some(Fault::SigmoidGradScale(1.5))] {
        let cfg = SuiteConfig {
            points: 5,
            fault,
            ..Default::default()
        };
        let r = run_suite(&params, &cfg)?;
        println!(
            "fault {:?}: ignition max err {:.2e}, loss max err {:.2e}, passed {}",
            fault,
            r.max_error(Graph::Ignition),
            r.max_error(Graph::EdiLoss),
            r.passed()
        );
    }
    Ok(())
}
