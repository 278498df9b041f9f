//! Hybrid Benders unit-commitment solver.
//!
//! The master problem over commitment binaries is posed as a QUBO and handed
//! to a sampler; dispatch subproblems are LPs whose duals produce integer
//! rounded optimality cuts.

pub mod formulation;
pub mod hybrid;
pub mod instance;
pub mod qubo;
pub mod sampler;

pub use instance::{load_instance, synth_instance, Bus, Generator, InstanceError, Line, Segment, UcInstance};
pub use formulation::{
    build_full_uc, build_max_eta, build_subproblem, commit_index, evaluate_schedule_cost, CommitAffine, CommitKind,
    CommitmentSchedule, DispatchSolution, DualGroup, FullUcModel, ScheduleCost, Subproblem,
};
pub use qubo::{
    build_master_qubo, decode_sample, eta_encoding_width, extract_raw_cut, round_cut, BendersCut, CutEncoding,
    EtaEncoding, MasterQubo, Penalties, Qubo, QuboError,
};
pub use sampler::{AnnealParams, Sample, SampleSet, Sampler, SamplerError, SamplerRegistry};
pub use hybrid::{
    detect_stall, exact_optimum, k_local_recovery, run_benders, run_gvns, run_qc4uc, BendersOutcome, IterationRecord,
    LoopConfig, LoopError, Qc4ucResult, Recovery, StopReason,
};
