//! Reconstructs runner timelines along a race course from camera footage
//! metadata, bib text reads and person re-identification embeddings.

pub mod dataset;
pub mod geo;
pub mod ident;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod sim;
pub mod timeline;
pub mod track;
pub mod types;
pub mod validate;

pub use dataset::Dataset;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Type(#[from] types::TypeError),
    #[error(transparent)]
    Track(#[from] track::TrackError),
    #[error(transparent)]
    Geo(#[from] geo::GeoError),
    #[error(transparent)]
    Timeline(#[from] timeline::TimelineError),
    #[error(transparent)]
    Ident(#[from] ident::IdentError),
    #[error(transparent)]
    Sim(#[from] sim::SimError),
    #[error(transparent)]
    Io(#[from] io::IoError),
    #[error("invalid configuration: {0}")]
    Config(String),
}
