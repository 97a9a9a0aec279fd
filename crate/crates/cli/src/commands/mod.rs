pub mod analyze;
pub mod evaluate;
pub mod stats;
pub mod train;
