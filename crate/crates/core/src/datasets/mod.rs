//! Index-addressable datasets, two on-disk formats and a seeded splitter.

mod coco;
mod image_folder;
mod split;

pub use coco::{open_coco_subset, CocoSubset};
pub use image_folder::{open_image_folder, ImageFolder};
pub use split::{dataset_split, shuffled_indices, Subset};

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::engine::{Annotation, Data};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("EmptyDataset: {0}")]
    EmptyDataset(String),
    #[error("UnreadableImage: {}: {reason}", path.display())]
    UnreadableImage { path: PathBuf, reason: String },
    #[error("SchemaViolation: {0}")]
    SchemaViolation(String),
    #[error("DanglingReference: {0}")]
    DanglingReference(String),
    #[error("BadFractions: {0}")]
    BadFractions(String),
    #[error("IndexOutOfRange: {index} >= {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("UnknownDatasetType: {0}")]
    UnknownDatasetType(String),
    #[error("Io: {0}")]
    Io(#[from] std::io::Error),
}

/// A fixed-length, randomly accessible sequence of `(data, annotation)` pairs.
///
/// `get` is deterministic and safe to call from several threads at once.
pub trait DatasetIterator: Send + Sync {
    fn len(&self) -> usize;

    fn get(&self, index: usize) -> Result<(Data, Annotation), DatasetError>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every item in index order.
    fn iter(&self) -> Box<dyn Iterator<Item = Result<(Data, Annotation), DatasetError>> + '_> {
        Box::new((0..self.len()).map(move |i| self.get(i)))
    }
}

pub(crate) fn check_index(index: usize, len: usize) -> Result<(), DatasetError> {
    if index < len {
        Ok(())
    } else {
        Err(DatasetError::IndexOutOfRange { index, len })
    }
}

/// Items held in memory; handy for tests and programmatic pipelines.
#[derive(Debug, Clone, Default)]
pub struct InMemoryDataset {
    items: Vec<(Data, Annotation)>,
}

impl InMemoryDataset {
    pub fn new(items: Vec<(Data, Annotation)>) -> Self {
        Self { items }
    }

    pub fn push(&mut self, data: impl Into<Data>, annotation: impl Into<Annotation>) {
        self.items.push((data.into(), annotation.into()));
    }
}

impl DatasetIterator for InMemoryDataset {
    fn len(&self) -> usize {
        self.items.len()
    }

    fn get(&self, index: usize) -> Result<(Data, Annotation), DatasetError> {
        check_index(index, self.items.len())?;
        Ok(self.items[index].clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetType {
    /// One subdirectory per class, PPM/PGM files inside.
    ImageFolder,
    /// A minimal COCO detection JSON with images beside it.
    CocoSubset,
}

impl DatasetType {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetType::ImageFolder => "image_folder",
            DatasetType::CocoSubset => "coco_subset",
        }
    }
}

impl FromStr for DatasetType {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "image_folder" => Ok(DatasetType::ImageFolder),
            "coco_subset" => Ok(DatasetType::CocoSubset),
            other => Err(DatasetError::UnknownDatasetType(other.to_string())),
        }
    }
}

/// A well-known on-disk dataset format, opened without a custom loader.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalDataset {
    pub path: PathBuf,
    pub dataset_type: DatasetType,
}

/// Class (or category) table of an opened external dataset.
pub type ClassTable = Vec<(u32, String)>;

impl ExternalDataset {
    pub fn new(path: impl AsRef<Path>, dataset_type: DatasetType) -> Self {
        Self {
            path: path.as_ref().to_path_buf(),
            dataset_type,
        }
    }

    pub fn open(&self) -> Result<(Box<dyn DatasetIterator>, ClassTable), DatasetError> {
        Ok(match self.dataset_type {
            DatasetType::ImageFolder => {
                let ds = open_image_folder(&self.path)?;
                let table = ds.class_table();
                (Box::new(ds), table)
            }
            DatasetType::CocoSubset => {
                let ds = open_coco_subset(&self.path)?;
                let table = ds.class_table();
                (Box::new(ds), table)
            }
        })
    }
}
