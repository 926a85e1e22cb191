pub mod commands;
pub mod mspec;
pub mod report;
