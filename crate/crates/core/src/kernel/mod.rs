//! The two-element process: states, intensity field, switching delays,
//! event-by-event simulation and availability estimates.

pub mod availability;
pub mod field;
pub(crate) mod process;
pub mod state;
pub mod switching;
pub mod trajectory;

pub use availability::{transient_availability, AvailabilityCurve};
pub use field::{ElementSlots, IntensityField, IntensitySlot, Modulator};
pub use process::{advance, advance_within, simulate};
pub use state::{availability_indicator, ElementPhase, PhaseTag, SystemState};
pub use switching::SwitchingPolicy;
pub use trajectory::{status_index, Event, Trajectory};
