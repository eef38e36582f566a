//! Command-line front end: scenario runs, sizing, replay and metrics tools,
//! and the WebSocket service the web console talks to.

pub mod commands;
pub mod service;
pub mod wire;
