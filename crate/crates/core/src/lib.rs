//! Gunshot source localization from audio and video.
//!
//! Stages, in data-flow order: [`audio`] features, [`scoring`] and
//! self-paced reranking, dense optical [`flow`], [`smoke`] blob detection,
//! [`shooter`] matching with muzzle localization, and [`eval`].

pub mod audio;
pub mod eval;
pub mod flow;
pub mod geometry;
pub mod scoring;
pub mod shooter;
pub mod smoke;
pub mod synthetic;
