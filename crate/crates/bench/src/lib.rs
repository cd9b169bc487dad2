//! Fixtures shared by the benchmarks in `benches/`.

use qcav_core::{make_state, FockVector, JointDensity, StateSpec, C64};

pub const CUTOFF: usize = 32;

pub fn cat(cutoff: usize) -> FockVector {
    make_state(StateSpec::Cat(C64::new(1.5, 0.0)), cutoff).expect("cat:1.5 fits the bench cutoff")
}

/// Atom in `(|e> + |g>)/sqrt 2`, field a displaced cat.
pub fn joint_cat(cutoff: usize) -> JointDensity {
    qcav_core::oracle::joint_initial(&cat(cutoff), C64::new(0.5, 0.3))
}
