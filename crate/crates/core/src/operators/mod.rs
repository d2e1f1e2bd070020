//! The sixteen operators and their executable semantics.

mod config;
mod kind;

pub mod debug;
pub mod filter;
pub mod inference;
pub mod join;
pub mod media;
pub mod network;
pub mod provider;

pub use config::{
    AggregateConfig, AggregateFn, ConfigError, FilterConfig, InferenceConfig, InjectConfig,
    InjectMode, JoinConfig, JoinMode, NetworkConfig, NoisifyConfig, OperatorConfig, Protocol,
    ProviderConfig, RetrieveConfig, SelectConfig, SpoofConfig,
};
pub use debug::debug_tap;
pub use filter::{blur_radius, filter_apply, FilterError, SpoofBank};
pub use inference::{
    inference_apply, FixtureAnnotator, InferenceError, InferenceProvider, InferenceRequest,
    ProviderRegistry,
};
pub use join::{join_step, JoinState};
pub use kind::{Category, OperatorKind, UnknownKind};
pub use network::{
    network_egress, AllowAll, DenyAll, EgressEnv, EgressGuard, EgressOutcome, EgressQuery,
    EgressRecord, InterceptError, InterceptRule, OutboundRequest, RecordingTransport,
    RetryPolicy, Transport, TransportError,
};
pub use provider::{inject_tick, next_tick, provider_emit, DeviceDriver, DriverError, DriverMode};

/// Where and when an operator runs; recorded into provenance.
#[derive(Debug, Clone, Copy)]
pub struct OpContext<'a> {
    pub node: &'a str,
    pub ts: u64,
}
