pub mod context;
pub mod exec;
pub mod graph;
pub mod prompt;
pub mod question;
pub mod stex;
pub mod survey;
pub mod validate;
