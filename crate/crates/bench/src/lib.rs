//! Shared fixtures for the criterion benches.

use std::sync::Arc;

use akvf_core::fespace::FESpace;
use akvf_core::fields::DegeneracyPolicy;
use akvf_core::problems::ProblemSpec;
use akvf_core::saddle::Discretization;
use akvf_core::{generate_mesh, Mesh};

/// Problem, mesh and space at `level` refinements of the base mesh.
pub struct Fixture {
    pub problem: ProblemSpec,
    pub mesh: Arc<Mesh>,
    pub k: usize,
}

impl Fixture {
    pub fn new(name: &str, level: usize, k: usize) -> Self {
        let problem = ProblemSpec::by_name(name, DegeneracyPolicy::Fail).expect("known problem");
        let mesh = Arc::new(generate_mesh(&problem.domain, 1.0).expect("mesh").refined(level));
        Self { problem, mesh, k }
    }

    pub fn space(&self) -> FESpace {
        FESpace::new(self.mesh.clone(), self.k).expect("space")
    }

    pub fn discretization(&self) -> Discretization {
        Discretization::new(self.space(), 0).expect("discretization")
    }
}
