//! Cluster validity indices and Mann-Whitney cluster characterization.

mod indices;
mod mann_whitney;
mod profile;

pub use indices::{
    calinski_harabasz, davies_bouldin, dunn, pbm, silhouette, silhouette_sampled, xie_beni, Membership,
    ValidityReport,
};
pub use mann_whitney::{mann_whitney_u, MannWhitney, EXACT_LIMIT};
pub use profile::{characterize_clusters, ClusterProfile, FeatureProfile};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidityError {
    #[error("need at least 2 clusters (and n > k), got {0}")]
    TooFewClusters(usize),
    #[error("two cluster centroids coincide")]
    CoincidentCentroids,
    #[error("two fuzzy centers coincide")]
    CoincidentCenters,
    #[error("empty sample")]
    EmptySample,
    #[error("row mismatch: {rows} rows but {labels} labels")]
    RowMismatch { rows: usize, labels: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, ValidityError>;

/// Serializes an optional index value; infinite values become the string
/// `"unbounded"`.
pub mod unbounded {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub const SENTINEL: &str = "unbounded";

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            None => s.serialize_none(),
            Some(x) if x.is_infinite() => s.serialize_str(SENTINEL),
            Some(x) => s.serialize_f64(*x),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Num(x)) => Ok(Some(x)),
            Some(Repr::Text(t)) if t == SENTINEL => Ok(Some(f64::INFINITY)),
            Some(Repr::Text(t)) => Err(de::Error::custom(format!("unexpected index value {t:?}"))),
        }
    }

    /// Text form used in CSV tables.
    pub fn format(v: Option<f64>) -> String {
        match v {
            None => "-".to_string(),
            Some(x) if x.is_infinite() => SENTINEL.to_string(),
            Some(x) => format!("{x}"),
        }
    }
}
