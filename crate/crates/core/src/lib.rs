pub mod catalog;
pub mod embedkit;
pub mod exec;
pub mod filters;
pub mod llmgate;
pub mod pipeline;
pub mod prompts;
pub mod ranker;
pub mod refinery;
pub mod rewriters;
pub mod sqlkit;
