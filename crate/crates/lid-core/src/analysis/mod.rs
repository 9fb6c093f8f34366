//! Representation analysis: embeddings, prototypes, distance matrices,
//! geographic correlation, Ward cluster trees, tree comparison, t-SNE.

pub mod cluster;
pub mod distance;
pub mod embeddings;
pub mod tree;
pub mod tsne;

pub use cluster::{random_distance_matrix, random_ward_tree, ward_cluster};
pub use distance::{
    cosine_distance_matrix, geo_distance_matrix, haversine_km, pearson, pearson_vec,
    DistanceMatrix, GeoTable, EARTH_RADIUS_KM,
};
pub use embeddings::{
    merge_languages, prototypes, restrict_languages, EmbeddingProvenance, EmbeddingSet,
    PrototypeSet,
};
pub use tree::{from_newick, to_newick, tree_distance, ClusterTree, TreeBuilder};
pub use tsne::{tsne, TsneConfig, TsneOutput};
