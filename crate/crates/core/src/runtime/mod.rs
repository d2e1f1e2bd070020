//! Executes installed manifests against simulated devices and mediates
//! every outbound delivery.

mod clock;
mod drivers;
mod engine;
mod ledger;
mod transport;

pub use clock::{ClockMode, VirtualClock};
pub use drivers::{
    default_data_dir, ClockDriver, DriverCatalog, DriverFactory, DriverInfo, HumidityDriver,
    ReplayDriver, TvLogDriver, DAY_MS,
};
pub use engine::{
    AppStatus, EgressEvent, EmitEvent, ExecutionTrace, Runtime, RuntimeError, TraceEntry,
    DEFAULT_MAILBOX,
};
pub use ledger::{content_display, EgressFilter, EgressLedger, GroupBy, LedgerError, ReportRow, HOUR_MS};
pub use transport::{mqtt, NetTransport, APP_HEADER, CONTENT_HEADER};
