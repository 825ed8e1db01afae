//! Model estimation from action–observation sequences.

pub mod em;
pub mod forward_backward;

pub use em::{
    em_fit, multi_restart_fit, multi_restart_fit_report, restart_init, FitConfig, FitResult, MultiFit,
    RestartSummary,
};
pub use forward_backward::{forward_backward, Posterior};
