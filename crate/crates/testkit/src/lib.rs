//! Test support for alpha-audit.
//!
//! `oracle` is a deliberately naive day-loop simulator over plain integer-day
//! data. It shares no code with the engine in `alpha-audit-core`; tests convert
//! an [`Instance`] into the engine's domain types with [`bridge::to_engine`]
//! and compare the two outputs.

pub mod bridge;
pub mod gen;
pub mod oracle;

pub use gen::random_instance;
pub use oracle::{simulate, OracleRun};

#[derive(Debug, Clone, Copy)]
pub struct Bar {
    pub day: u32,
    pub open: f64,
    pub close: f64,
    pub spread: f64,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub ticker: String,
    pub bars: Vec<Bar>,
}

/// `target`: `None` is a hold, otherwise the sleeve weight to move to.
#[derive(Debug, Clone)]
pub struct Decision {
    pub day: u32,
    pub ticker: String,
    pub target: Option<f64>,
    pub tokens_in: u64,
    pub tokens_out: u64,
}

#[derive(Debug, Clone)]
pub struct Membership {
    pub ticker: String,
    pub intervals: Vec<(u32, u32)>,
    /// (delist day, recovery fraction of last close)
    pub delist: Option<(u32, f64)>,
}

#[derive(Debug, Clone, Copy)]
pub struct Costs {
    pub commission: f64,
    pub kappa: f64,
    pub beta: f64,
    pub token_price: f64,
    pub latency_bars: usize,
    pub borrow: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub series: Vec<Series>,
    pub decisions: Vec<Decision>,
    pub universe: Option<Vec<Membership>>,
    pub costs: Costs,
    pub capital: f64,
}
