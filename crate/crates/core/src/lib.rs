//! Simulation, instance generation and certification for online ad
//! allocation on (k,d)-bounded bipartite graphs.
//!
//! All money and dual quantities are exact rationals ([`rational::Q`]).

pub mod algorithms;
pub mod codec;
pub mod duals;
pub mod generators;
pub mod harness;
pub mod instance;
pub mod numeral;
pub mod oracle;
pub mod par;
pub mod rational;
pub mod trace;

pub use algorithms::{
    run, run_equal_bids, run_general_bids, run_greedy, run_high_degree, run_instance,
    run_random, run_ranking, Algo, AlgoError, AllocationResult, ArrivalSource, Params, Run,
    RunOptions, StaticSource, TieBreak,
};
pub use instance::{Instance, InstanceBuilder, InstanceMeta};
pub use rational::Q;
