//! Spoken language identification toolkit: synthetic multi-domain corpus
//! generation, MFSC features, a convolutional LID model with
//! domain-adversarial training, evaluation metrics, and representation
//! analysis (prototypes, distance matrices, cluster trees, t-SNE).

pub mod error;
pub mod nn;
pub mod seed;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Scalar, Tensor};

pub mod corpus;
pub mod features;
pub mod analysis;
