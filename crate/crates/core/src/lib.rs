pub mod catalog;
pub mod ingest;
pub mod ir;
pub mod dependency;
pub mod taint;
pub mod rules;
pub mod report;
pub mod pipeline;
pub mod cli;
