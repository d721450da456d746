//! A deliberately small subset of the COCO detection format: images,
//! annotations with `bbox = [x, y, w, h]`, and categories. Segmentation,
//! crowd flags and licenses are ignored.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::{check_index, ClassTable, DatasetError, DatasetIterator};
use crate::engine::{image_open, Annotation, BoundingBox, Category, Data, Image};

#[derive(Debug, Deserialize)]
struct CocoFile {
    images: Vec<CocoImage>,
    annotations: Vec<CocoAnnotation>,
    categories: Vec<CocoCategory>,
}

#[derive(Debug, Deserialize)]
struct CocoImage {
    id: u64,
    file_name: String,
    width: usize,
    height: usize,
}

#[derive(Debug, Deserialize)]
struct CocoAnnotation {
    #[serde(default)]
    id: Option<u64>,
    image_id: u64,
    category_id: u32,
    bbox: [f64; 4],
}

#[derive(Debug, Deserialize)]
struct CocoCategory {
    id: u32,
    name: String,
}

#[derive(Debug, Clone)]
pub struct CocoSubset {
    categories: BTreeMap<u32, String>,
    items: Vec<(u64, Image, Vec<BoundingBox>)>,
}

/// Opens a COCO-subset JSON; image files are resolved relative to its directory.
///
/// Items are ordered by image id; the boxes of an image by annotation id
/// (file order when ids are absent).
pub fn open_coco_subset(json_path: impl AsRef<Path>) -> Result<CocoSubset, DatasetError> {
    let json_path = json_path.as_ref();
    let text = fs::read_to_string(json_path)?;
    let file: CocoFile =
        serde_json::from_str(&text).map_err(|e| DatasetError::SchemaViolation(e.to_string()))?;
    let base = json_path.parent().unwrap_or(Path::new("."));

    let mut categories = BTreeMap::new();
    for c in &file.categories {
        if categories.insert(c.id, c.name.clone()).is_some() {
            return Err(DatasetError::SchemaViolation(format!("duplicate category id {}", c.id)));
        }
    }

    let mut images: Vec<&CocoImage> = file.images.iter().collect();
    images.sort_by_key(|im| im.id);
    if let Some(w) = images.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(DatasetError::SchemaViolation(format!("duplicate image id {}", w[0].id)));
    }
    let slot: HashMap<u64, usize> = images.iter().enumerate().map(|(i, im)| (im.id, i)).collect();

    let mut per_image: Vec<Vec<(Option<u64>, BoundingBox)>> = vec![Vec::new(); images.len()];
    for (pos, a) in file.annotations.iter().enumerate() {
        let at = *slot.get(&a.image_id).ok_or_else(|| {
            DatasetError::DanglingReference(format!("annotation {pos} -> image_id {}", a.image_id))
        })?;
        let name = categories.get(&a.category_id).ok_or_else(|| {
            DatasetError::DanglingReference(format!(
                "annotation {pos} -> category_id {}",
                a.category_id
            ))
        })?;
        let [x, y, w, h] = a.bbox;
        if !(w >= 0.0 && h >= 0.0) || !a.bbox.iter().all(|v| v.is_finite()) {
            return Err(DatasetError::SchemaViolation(format!(
                "annotation {pos} has invalid bbox {:?}",
                a.bbox
            )));
        }
        let category = Category::new(a.category_id).with_description(name.clone());
        per_image[at].push((a.id, BoundingBox::new(category, x, y, w, h)));
    }

    let mut items = Vec::with_capacity(images.len());
    for (im, mut boxes) in images.into_iter().zip(per_image) {
        let path = base.join(&im.file_name);
        let img = image_open(&path).map_err(|e| DatasetError::UnreadableImage {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        if (img.width(), img.height()) != (im.width, im.height) {
            return Err(DatasetError::SchemaViolation(format!(
                "{} is {}x{}, JSON says {}x{}",
                im.file_name,
                img.width(),
                img.height(),
                im.width,
                im.height
            )));
        }
        boxes.sort_by_key(|(id, _)| *id);
        items.push((im.id, img, boxes.into_iter().map(|(_, b)| b).collect()));
    }
    if items.is_empty() {
        return Err(DatasetError::EmptyDataset(format!(
            "{} lists no images",
            json_path.display()
        )));
    }
    Ok(CocoSubset { categories, items })
}

impl CocoSubset {
    pub fn class_table(&self) -> ClassTable {
        self.categories
            .iter()
            .map(|(id, n)| (*id, n.clone()))
            .collect()
    }

    pub fn image_id(&self, index: usize) -> Option<u64> {
        self.items.get(index).map(|(id, _, _)| *id)
    }
}

impl DatasetIterator for CocoSubset {
    fn len(&self) -> usize {
        self.items.len()
    }

    fn get(&self, index: usize) -> Result<(Data, Annotation), DatasetError> {
        check_index(index, self.items.len())?;
        let (_, img, boxes) = &self.items[index];
        Ok((Data::Image(img.clone()), Annotation::Boxes(boxes.clone())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::image_save;

    fn fixture(json: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        for (name, w, h) in [("a.ppm", 4, 3), ("b.ppm", 2, 2)] {
            image_save(&Image::zeros(w, h, 3).unwrap(), dir.path().join(name)).unwrap();
        }
        let p = dir.path().join("ann.json");
        fs::write(&p, json).unwrap();
        (dir, p)
    }

    const CATS: &str = r#""categories": [{"id": 1, "name": "person"}, {"id": 3, "name": "car"}]"#;

    #[test]
    fn ordering_and_mapping() {
        let json = format!(
            r#"{{
            "images": [{{"id": 9, "file_name": "b.ppm", "width": 2, "height": 2}},
                       {{"id": 2, "file_name": "a.ppm", "width": 4, "height": 3}}],
            "annotations": [
                {{"id": 11, "image_id": 2, "category_id": 3, "bbox": [0, 0, 1, 1]}},
                {{"id": 10, "image_id": 2, "category_id": 1, "bbox": [1, 2, 3, 4]}}
            ],
            {CATS}
        }}"#
        );
        let (_dir, p) = fixture(&json);
        let ds = open_coco_subset(&p).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.image_id(0), Some(2));
        let (_, ann) = ds.get(0).unwrap();
        let Annotation::Boxes(boxes) = ann else { panic!() };
        assert_eq!(boxes.len(), 2);
        assert_eq!((boxes[0].x, boxes[0].y, boxes[0].w, boxes[0].h), (1.0, 2.0, 3.0, 4.0));
        assert_eq!(boxes[0].category.description.as_deref(), Some("person"));
        assert_eq!(boxes[1].category.index, 3);
        let (_, ann) = ds.get(1).unwrap();
        assert_eq!(ann, Annotation::Boxes(vec![]));
        assert_eq!(ds.class_table(), vec![(1, "person".into()), (3, "car".into())]);
    }

    #[test]
    fn dangling_references() {
        let json = format!(
            r#"{{"images": [{{"id": 1, "file_name": "a.ppm", "width": 4, "height": 3}}],
                "annotations": [{{"image_id": 99, "category_id": 1, "bbox": [0,0,1,1]}}], {CATS}}}"#
        );
        let (_d, p) = fixture(&json);
        assert!(matches!(open_coco_subset(&p), Err(DatasetError::DanglingReference(_))));

        let json = format!(
            r#"{{"images": [{{"id": 1, "file_name": "a.ppm", "width": 4, "height": 3}}],
                "annotations": [{{"image_id": 1, "category_id": 7, "bbox": [0,0,1,1]}}], {CATS}}}"#
        );
        let (_d, p) = fixture(&json);
        assert!(matches!(open_coco_subset(&p), Err(DatasetError::DanglingReference(_))));
    }

    #[test]
    fn schema_violations() {
        for json in [
            r#"{"images": []}"#.to_string(),
            format!(
                r#"{{"images": [{{"id": 1, "file_name": "a.ppm", "width": 5, "height": 3}}],
                    "annotations": [], {CATS}}}"#
            ),
            format!(
                r#"{{"images": [{{"id": 1, "file_name": "a.ppm", "width": 4, "height": 3}}],
                    "annotations": [{{"image_id": 1, "category_id": 1, "bbox": [0,0,-1,1]}}], {CATS}}}"#
            ),
            format!(
                r#"{{"images": [{{"id": 1, "file_name": "a.ppm", "width": 4, "height": 3}}],
                    "annotations": [{{"image_id": 1, "category_id": 1, "bbox": [0,0,1]}}], {CATS}}}"#
            ),
        ] {
            let (_d, p) = fixture(&json);
            assert!(
                matches!(open_coco_subset(&p), Err(DatasetError::SchemaViolation(_))),
                "{json}"
            );
        }
    }

    #[test]
    fn no_images_is_empty() {
        let (_d, p) = fixture(&format!(r#"{{"images": [], "annotations": [], {CATS}}}"#));
        assert!(matches!(open_coco_subset(&p), Err(DatasetError::EmptyDataset(_))));
    }
}
