//! Structural-capital analytics for directed blog recommendation networks.
//!
//! The crate covers the full desk pipeline for analysing a blogosphere:
//!
//! * [`graph`] — edge-list ingestion, egocentric (snowball) delineation and
//!   the immutable [`BlogNetwork`] data model.
//! * [`centrality`] — in/out-degree, closeness, betweenness and PageRank
//!   scores, plus the 0–10 toolbar-style PageRank scaling.
//! * [`features`] — attractiveness quintiles, profession dummies and the
//!   moderated design matrix fed to the regression.
//! * [`mnlogit`] — maximum-likelihood multinomial logistic regression with
//!   Wald inference and relative-risk ratios.
//! * [`netgen`] — seeded preferential-attachment networks and synthetic
//!   attribute/outcome data with known coefficients.
//! * [`report`] — fixed-width inference tables and JSON/CSV exports.
//!
//! All algorithms iterate nodes and observations in deterministic order, so
//! identical inputs produce bit-identical outputs regardless of the rayon
//! thread count.

pub mod centrality;
pub mod features;
pub mod graph;
pub mod mnlogit;
pub mod netgen;
pub mod report;

pub use centrality::{CentralityBundle, CentralityVector, Measure, PageRankParams};
pub use features::{
    AttractivenessClass, BlogAttributes, CentralityKind, DesignMatrix, Moderator, Profession, Term,
};
pub use graph::{BlogId, BlogNetwork};
pub use mnlogit::{FitOptions, InferenceRow, ModelFit, Stars};
pub use netgen::GenParams;
pub use report::ReportTable;
