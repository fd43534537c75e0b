//! Websocket render service for a trained avatar.

pub mod bench;
pub mod protocol;
pub mod service;
pub mod session;
