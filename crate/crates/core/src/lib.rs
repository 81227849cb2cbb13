pub mod attack;
pub mod case_studies;
pub mod experiments;
pub mod model;
pub mod parametric;
pub mod property;
pub mod threat;
