//! Combinatorial parameter graphs and Morse graph databases for switching
//! system models of gene regulatory networks.

pub mod database;
pub mod factor;
pub mod hill;
pub mod lp;
pub mod morse;
pub mod network;
pub mod parameter;
pub mod phase;
pub mod witness;
