//! Reference learners: a nearest-centroid classifier (stateless) and an EWMA
//! anomaly detector (stateful).

mod centroid;
mod ewma;

pub use centroid::{
    decode_centroids, encode_centroids, features, CentroidLearner, CENTROID_OPTIMIZE_TOLERANCE,
    CENTROID_PAYLOAD,
};
pub use ewma::{EwmaLearner, ANOMALY, EWMA_PAYLOAD, NORMAL};
