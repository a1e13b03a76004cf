//! Two-policy path, mixing of deterministic policies and derandomization of
//! stationary policies.

mod context;
mod mix;
mod mnp;

pub use context::{make_context, TwoPolicyContext};
pub use mix::{
    alpha_hat, caratheodory, derandomize, distance_to_performance_set, mix_pair, DistanceResult, MixCertificate,
    MixLevel,
};
