//! The drive pipeline (teleop mapping, bus frames), the vehicle support
//! system and run recording.

pub mod bus;
pub mod runlog;
pub mod teleop;
pub mod vss;

pub use bus::{decode_wheel_command, encode_wheel_command, BusFrame, WHEEL_COMMAND_ID};
pub use runlog::{read_run_log, LogHeader, Payload, RunLogWriter, RunRecord};
pub use teleop::{teleop_map, GainStep, TeleopConfig, TeleopInput, TeleopState};
pub use vss::{vss_step, RelayCommand, VssConfig, VssState};
