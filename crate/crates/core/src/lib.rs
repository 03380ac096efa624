pub mod error;
pub mod numerics;
pub mod model;
pub mod covariance;
pub mod objective;
pub mod selection;
pub mod certificates;
pub mod experiments;
