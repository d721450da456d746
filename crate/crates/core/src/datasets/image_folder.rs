use std::fs;
use std::path::{Path, PathBuf};

use super::{check_index, ClassTable, DatasetError, DatasetIterator};
use crate::engine::{image_open, Annotation, Category, Data, Image, Target};

const EXTENSIONS: [&str; 3] = ["ppm", "pgm", "pnm"];

/// Directory-per-class image dataset.
///
/// Class `i` is the `i`-th subdirectory in byte-wise name order. Items are
/// ordered by class, then by file name. Only `.ppm`/`.pgm`/`.pnm` files are
/// considered; everything is decoded when the dataset is opened.
#[derive(Debug, Clone)]
pub struct ImageFolder {
    classes: Vec<String>,
    items: Vec<(PathBuf, Image, u32)>,
}

pub fn open_image_folder(root: impl AsRef<Path>) -> Result<ImageFolder, DatasetError> {
    let root = root.as_ref();
    let mut class_dirs: Vec<(Vec<u8>, String, PathBuf)> = Vec::new();
    for entry in fs::read_dir(root)? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            let name = entry.file_name();
            class_dirs.push((
                name.as_encoded_bytes().to_vec(),
                name.to_string_lossy().into_owned(),
                entry.path(),
            ));
        }
    }
    class_dirs.sort_by(|a, b| a.0.cmp(&b.0));

    let mut classes = Vec::with_capacity(class_dirs.len());
    let mut items = Vec::new();
    for (index, (_, name, dir)) in class_dirs.into_iter().enumerate() {
        let mut files: Vec<(Vec<u8>, PathBuf)> = fs::read_dir(&dir)?
            .filter_map(Result::ok)
            .filter(|e| e.file_type().is_ok_and(|t| t.is_file()))
            .map(|e| (e.file_name().as_encoded_bytes().to_vec(), e.path()))
            .filter(|(_, p)| {
                p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
            })
            .collect();
        files.sort_by(|a, b| a.0.cmp(&b.0));
        for (_, path) in files {
            let img = image_open(&path).map_err(|e| DatasetError::UnreadableImage {
                path: path.clone(),
                reason: e.to_string(),
            })?;
            items.push((path, img, index as u32));
        }
        classes.push(name);
    }
    if items.is_empty() {
        return Err(DatasetError::EmptyDataset(format!(
            "no images under {}",
            root.display()
        )));
    }
    Ok(ImageFolder { classes, items })
}

impl ImageFolder {
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn class_table(&self) -> ClassTable {
        self.classes
            .iter()
            .enumerate()
            .map(|(i, c)| (i as u32, c.clone()))
            .collect()
    }

    pub fn path(&self, index: usize) -> Option<&Path> {
        self.items.get(index).map(|(p, _, _)| p.as_path())
    }
}

impl DatasetIterator for ImageFolder {
    fn len(&self) -> usize {
        self.items.len()
    }

    fn get(&self, index: usize) -> Result<(Data, Annotation), DatasetError> {
        check_index(index, self.items.len())?;
        let (_, img, class) = &self.items[index];
        let category = Category::new(*class).with_description(self.classes[*class as usize].clone());
        Ok((Data::Image(img.clone()), Annotation::Target(Target::Category(category))))
    }
}
