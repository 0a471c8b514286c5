pub mod corpus;
pub mod pipeline;
pub mod problem;
pub mod report;
