//! Label maps and label spaces, including the Cityscapes definitions.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Reserved label marking void pixels, matching the Cityscapes convention.
pub const IGNORE_LABEL: u8 = 255;

/// W×H integer class map. Label 255 is reserved for void/ignore pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: u32,
    height: u32,
    labels: Vec<u8>,
}

impl LabelMap {
    pub const IGNORE: u8 = IGNORE_LABEL;

    pub fn new(width: u32, height: u32, labels: Vec<u8>) -> Result<Self> {
        let expected = width as usize * height as usize;
        if labels.len() != expected {
            return Err(Error::SizeMismatch {
                expected,
                actual: labels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Self {
        let mut labels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                labels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            labels,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, x: u32, y: u32) -> u8 {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    pub fn same_size(&self, other: &LabelMap) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Checks that every non-ignore label belongs to `space`.
    pub fn validate_against(&self, space: &LabelSpace) -> Result<()> {
        for &l in &self.labels {
            if l != Self::IGNORE && !space.contains(l) {
                return Err(Error::UnknownClass { id: l });
            }
        }
        Ok(())
    }
}

/// One class in a label space: id, human-readable name, and a display color
/// for visualization (not the evaluation palette).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDef {
    pub id: u8,
    pub name: String,
    pub display_color: [u8; 3],
}

/// Ordered set of classes, optionally with a grouping into super-categories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSpace {
    classes: Vec<ClassDef>,
    grouping: Option<BTreeMap<u8, u8>>,
}

impl LabelSpace {
    /// Validates unique ids, pairwise-distinct display colors, and (when
    /// present) a grouping that covers every class id.
    pub fn new(classes: Vec<ClassDef>, grouping: Option<BTreeMap<u8, u8>>) -> Result<Self> {
        for (i, a) in classes.iter().enumerate() {
            for b in classes.iter().skip(i + 1) {
                if a.id == b.id {
                    return Err(Error::LabelSpaceMismatch(format!(
                        "duplicate class id {}",
                        a.id
                    )));
                }
                if a.display_color == b.display_color {
                    return Err(Error::LabelSpaceMismatch(format!(
                        "classes {} and {} share display color {:?}",
                        a.id, b.id, a.display_color
                    )));
                }
            }
        }
        if let Some(map) = &grouping {
            for class in &classes {
                if !map.contains_key(&class.id) {
                    return Err(Error::UngroupedClass { id: class.id });
                }
            }
        }
        Ok(Self { classes, grouping })
    }

    pub fn classes(&self) -> &[ClassDef] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn contains(&self, id: u8) -> bool {
        self.classes.iter().any(|c| c.id == id)
    }

    pub fn class(&self, id: u8) -> Option<&ClassDef> {
        self.classes.iter().find(|c| c.id == id)
    }

    pub fn class_by_name(&self, name: &str) -> Option<&ClassDef> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn grouping(&self) -> Option<&BTreeMap<u8, u8>> {
        self.grouping.as_ref()
    }

    pub fn group_of(&self, id: u8) -> Option<u8> {
        self.grouping.as_ref().and_then(|m| m.get(&id)).copied()
    }

    /// The 19 Cityscapes train classes with the official display colors and
    /// the grouping into the 7 coarse categories of [`cityscapes_categories7`].
    pub fn cityscapes19() -> LabelSpace {
        let defs: [(&str, [u8; 3], u8); 19] = [
            ("road", [128, 64, 128], 0),
            ("sidewalk", [244, 35, 232], 0),
            ("building", [70, 70, 70], 1),
            ("wall", [102, 102, 156], 1),
            ("fence", [190, 153, 153], 1),
            ("pole", [153, 153, 153], 6),
            ("traffic light", [250, 170, 30], 6),
            ("traffic sign", [220, 220, 0], 6),
            ("vegetation", [107, 142, 35], 2),
            ("terrain", [152, 251, 152], 2),
            ("sky", [70, 130, 180], 3),
            ("person", [220, 20, 60], 4),
            ("rider", [255, 0, 0], 4),
            ("car", [0, 0, 142], 5),
            ("truck", [0, 0, 70], 5),
            ("bus", [0, 60, 100], 5),
            ("train", [0, 80, 100], 5),
            ("motorcycle", [0, 0, 230], 5),
            ("bicycle", [119, 11, 32], 5),
        ];
        let mut classes = Vec::new();
        let mut grouping = BTreeMap::new();
        for (id, (name, color, category)) in defs.iter().enumerate() {
            classes.push(ClassDef {
                id: id as u8,
                name: (*name).to_string(),
                display_color: *color,
            });
            grouping.insert(id as u8, *category);
        }
        LabelSpace::new(classes, Some(grouping)).expect("built-in space is valid")
    }

    /// The 7 coarse categories: flat, construction, nature, sky, human,
    /// vehicle, object.
    pub fn cityscapes_categories7() -> LabelSpace {
        let defs: [(&str, [u8; 3]); 7] = [
            ("flat", [128, 64, 128]),
            ("construction", [70, 70, 70]),
            ("nature", [107, 142, 35]),
            ("sky", [70, 130, 180]),
            ("human", [220, 20, 60]),
            ("vehicle", [0, 0, 142]),
            ("object", [250, 170, 30]),
        ];
        let classes = defs
            .iter()
            .enumerate()
            .map(|(id, (name, color))| ClassDef {
                id: id as u8,
                name: (*name).to_string(),
                display_color: *color,
            })
            .collect();
        LabelSpace::new(classes, None).expect("built-in space is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cityscapes19_shape() {
        let space = LabelSpace::cityscapes19();
        assert_eq!(space.len(), 19);
        assert_eq!(space.class(0).unwrap().name, "road");
        assert_eq!(space.class(13).unwrap().name, "car");
        // Grouping covers all 19 classes.
        assert_eq!(space.grouping().unwrap().len(), 19);
    }

    #[test]
    fn category_membership_follows_standard_definition() {
        let space = LabelSpace::cityscapes19();
        let cat7 = LabelSpace::cityscapes_categories7();
        let expect = [
            ("road", "flat"),
            ("sidewalk", "flat"),
            ("building", "construction"),
            ("wall", "construction"),
            ("fence", "construction"),
            ("pole", "object"),
            ("traffic light", "object"),
            ("traffic sign", "object"),
            ("vegetation", "nature"),
            ("terrain", "nature"),
            ("sky", "sky"),
            ("person", "human"),
            ("rider", "human"),
            ("car", "vehicle"),
            ("truck", "vehicle"),
            ("bus", "vehicle"),
            ("train", "vehicle"),
            ("motorcycle", "vehicle"),
            ("bicycle", "vehicle"),
        ];
        for (class_name, category_name) in expect {
            let class = space.class_by_name(class_name).unwrap();
            let group = space.group_of(class.id).unwrap();
            assert_eq!(
                cat7.class(group).unwrap().name,
                category_name,
                "class {class_name}"
            );
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let classes = vec![
            ClassDef {
                id: 0,
                name: "a".into(),
                display_color: [1, 2, 3],
            },
            ClassDef {
                id: 0,
                name: "b".into(),
                display_color: [4, 5, 6],
            },
        ];
        assert!(LabelSpace::new(classes, None).is_err());
    }

    #[test]
    fn partial_grouping_rejected() {
        let classes = vec![
            ClassDef {
                id: 0,
                name: "a".into(),
                display_color: [1, 2, 3],
            },
            ClassDef {
                id: 1,
                name: "b".into(),
                display_color: [4, 5, 6],
            },
        ];
        let mut grouping = BTreeMap::new();
        grouping.insert(0u8, 0u8);
        assert!(matches!(
            LabelSpace::new(classes, Some(grouping)),
            Err(Error::UngroupedClass { id: 1 })
        ));
    }

    #[test]
    fn label_map_validation() {
        let space = LabelSpace::cityscapes19();
        let ok = LabelMap::new(2, 1, vec![0, 255]).unwrap();
        ok.validate_against(&space).unwrap();
        let bad = LabelMap::new(2, 1, vec![0, 19]).unwrap();
        assert!(bad.validate_against(&space).is_err());
    }
}
