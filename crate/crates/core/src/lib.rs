pub mod article_mapper;
pub mod corpus;
pub mod error;
pub mod features;
pub mod fixture;
pub mod layout;
pub mod ocr;
pub mod page_store;
pub mod pipeline;
pub mod raster;
pub mod sentence;

pub use error::{Error, Result};
