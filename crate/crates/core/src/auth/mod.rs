//! Packet-by-packet spoofing detection.
//!
//! [`run_authentication`] forecasts Bob's next `N_f` CSI vectors and compares
//! each incoming packet with its forecast. An accepted packet ends the
//! iteration and its observed CSI enters the predictor window; a rejected one
//! is replaced in the window by its forecast, so the window keeps tracking the
//! legitimate channel across an attack. [`benchmark_authenticate`] is the
//! prediction-free baseline that compares against the last accepted packet.

mod benchmark;
mod pearson;
mod session;
mod trace;

pub use benchmark::{benchmark_authenticate, benchmark_with};
pub use pearson::{decide, pearson};
pub use session::{
    run_authentication, run_batch, run_with, AuthConfig, PredictorState, Session,
};
pub use trace::DecisionTrace;
