//! Scene-localized frame grouping for long-video question answering.
//!
//! The pipeline densely samples a video's frame grid, aggregates consecutive
//! frames into fixed-size groups, abstracts each group into scene-level text
//! via model backends, and answers questions by ranking groups against the
//! question's scene description and reassembling the best groups into a
//! frame set that fits the answering model's context budget. The per-video
//! scene index is persisted, so each additional question on the same video
//! costs one query embedding and one answer call.

pub mod config;
pub mod error;
pub mod eval;
pub mod fixture;
pub mod frames;
pub mod gateway;
mod hashing;
pub mod indexing;
pub mod inference;
pub mod localization;
pub mod reorg;
pub mod sampling;
pub mod store;

pub use config::{EndpointsConfig, PipelineConfig};
pub use error::{Error, Result};
pub use eval::{load_dataset, run_eval, EvalRecord, EvalReport};
pub use gateway::http::HttpGateway;
pub use gateway::mock::MockGateway;
pub use gateway::prompts::{PromptPaths, PromptSet};
pub use gateway::{AnswerOption, CallLedger, EmbeddingVector, LedgerCounts, ModelGateway, ModelIds};
pub use indexing::{build_index, load_or_build_index, SceneIndex};
pub use inference::{ask, parse_choice, Answer, Choice};
pub use localization::{cosine, extract_query_scene, score_all, GroupScore, QueryScene};
pub use reorg::{plan_selection, SelectionConfig, SelectionPlan, SelectionStrategy};
pub use sampling::{Frame, FrameGroup, ImageRef, SamplingConfig};
pub use store::{load_index, save_index, IndexKey};
