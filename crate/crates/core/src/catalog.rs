//! Component catalog and precedence graph.
//!
//! A catalog is the list of numbered components that make up one workpiece,
//! together with the set of components each one physically requires before
//! it can be attached.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CatalogError;

/// Identifier of a component within a catalog. Ids run `1..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ComponentId(pub u32);

impl ComponentId {
    pub fn get(self) -> u32 {
        self.0
    }
}

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for ComponentId {
    fn from(v: u32) -> Self {
        ComponentId(v)
    }
}

/// Ordered set of component ids.
pub type ComponentSet = BTreeSet<ComponentId>;

/// Builds a [`ComponentSet`] from raw ids.
pub fn set_of<I: IntoIterator<Item = u32>>(ids: I) -> ComponentSet {
    ids.into_iter().map(ComponentId).collect()
}

/// Renders a set as `1,2,3` (empty set renders as an empty string).
pub fn format_set(set: &ComponentSet) -> String {
    set.iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub id: ComponentId,
    pub name: String,
    pub description: String,
    pub prerequisites: ComponentSet,
    pub robot_deliverable: bool,
    pub magazine_slot: Option<u32>,
}

/// Raw JSON shape of one catalog entry.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentDoc {
    id: u32,
    name: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    prerequisites: Vec<u32>,
    #[serde(default = "default_true")]
    robot_deliverable: bool,
    #[serde(default)]
    magazine_slot: Option<u32>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogDoc {
    components: Vec<ComponentDoc>,
    #[serde(default)]
    catalog_image: Option<String>,
}

#[derive(Debug, Serialize)]
struct CatalogDocOut<'a> {
    components: Vec<ComponentDocOut<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    catalog_image: Option<&'a str>,
}

#[derive(Debug, Serialize)]
struct ComponentDocOut<'a> {
    id: u32,
    name: &'a str,
    description: &'a str,
    prerequisites: Vec<u32>,
    robot_deliverable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    magazine_slot: Option<u32>,
}

/// A validated component catalog.
///
/// Construction goes through [`ComponentCatalog::new`] or [`load_catalog`],
/// both of which enforce: ids are exactly `1..=n`, every prerequisite exists,
/// no component requires itself, and the precedence relation is acyclic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentCatalog {
    components: Vec<ComponentSpec>,
    catalog_image: Option<String>,
}

const DEFAULT_CATALOG: &str = include_str!("../../../data/catalog.json");

impl ComponentCatalog {
    pub fn new(
        mut components: Vec<ComponentSpec>,
        catalog_image: Option<String>,
    ) -> Result<Self, CatalogError> {
        if components.is_empty() {
            return Err(CatalogError::EmptyCatalog);
        }
        components.sort_by_key(|c| c.id);

        let mut seen = BTreeSet::new();
        let mut duplicates = BTreeSet::new();
        for c in &components {
            if !seen.insert(c.id) {
                duplicates.insert(c.id);
            }
        }
        if !duplicates.is_empty() {
            return Err(CatalogError::DuplicateId(duplicates));
        }

        let n = components.len() as u32;
        let out_of_range: ComponentSet = seen
            .iter()
            .copied()
            .filter(|id| id.0 == 0 || id.0 > n)
            .collect();
        if !out_of_range.is_empty() {
            return Err(CatalogError::NonContiguousIds(out_of_range));
        }

        for c in &components {
            if c.prerequisites.contains(&c.id) {
                return Err(CatalogError::CyclicPrecedence(BTreeSet::from([c.id])));
            }
            let unknown: ComponentSet = c
                .prerequisites
                .iter()
                .copied()
                .filter(|p| !seen.contains(p))
                .collect();
            if !unknown.is_empty() {
                return Err(CatalogError::UnknownPrerequisite {
                    component: c.id,
                    missing: unknown,
                });
            }
        }

        let catalog = Self {
            components,
            catalog_image,
        };
        if let Some(cycle) = catalog.find_cycle() {
            return Err(CatalogError::CyclicPrecedence(cycle));
        }
        Ok(catalog)
    }

    /// The 9-component aircraft toy catalog shipped in `data/catalog.json`.
    pub fn default_aircraft() -> Self {
        load_catalog(DEFAULT_CATALOG).expect("bundled catalog is valid")
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[ComponentSpec] {
        &self.components
    }

    pub fn catalog_image(&self) -> Option<&str> {
        self.catalog_image.as_deref()
    }

    pub fn ids(&self) -> impl Iterator<Item = ComponentId> + '_ {
        self.components.iter().map(|c| c.id)
    }

    pub fn all_ids(&self) -> ComponentSet {
        self.ids().collect()
    }

    pub fn contains(&self, id: ComponentId) -> bool {
        id.0 >= 1 && (id.0 as usize) <= self.components.len()
    }

    pub fn get(&self, id: ComponentId) -> Option<&ComponentSpec> {
        if self.contains(id) {
            Some(&self.components[id.0 as usize - 1])
        } else {
            None
        }
    }

    /// Panicking lookup for ids already known to be in the catalog.
    pub fn spec(&self, id: ComponentId) -> &ComponentSpec {
        self.get(id)
            .unwrap_or_else(|| panic!("component {id} not in catalog"))
    }

    pub fn prerequisites(&self, id: ComponentId) -> &ComponentSet {
        &self.spec(id).prerequisites
    }

    pub fn name(&self, id: ComponentId) -> &str {
        &self.spec(id).name
    }

    /// Components the robot can fetch from the magazine.
    pub fn deliverable_ids(&self) -> ComponentSet {
        self.components
            .iter()
            .filter(|c| c.robot_deliverable)
            .map(|c| c.id)
            .collect()
    }

    /// Components the operator handles from the start (not robot-deliverable).
    pub fn operator_start_ids(&self) -> ComponentSet {
        self.components
            .iter()
            .filter(|c| !c.robot_deliverable)
            .map(|c| c.id)
            .collect()
    }

    /// Component whose magazine slot is `slot`, if any.
    pub fn component_in_slot(&self, slot: u32) -> Option<ComponentId> {
        self.components
            .iter()
            .find(|c| c.magazine_slot == Some(slot))
            .map(|c| c.id)
    }

    /// Looks a component up by case-insensitive name.
    pub fn find_by_name(&self, name: &str) -> Option<ComponentId> {
        let needle = name.trim().to_lowercase();
        self.components
            .iter()
            .find(|c| c.name.to_lowercase() == needle)
            .map(|c| c.id)
    }

    pub fn check_ids<'a, I>(&self, ids: I) -> Result<(), CatalogError>
    where
        I: IntoIterator<Item = &'a ComponentId>,
    {
        let unknown: ComponentSet = ids
            .into_iter()
            .copied()
            .filter(|id| !self.contains(*id))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CatalogError::UnknownComponent(unknown))
        }
    }

    /// Serializes back into the catalog document format.
    pub fn to_json(&self) -> String {
        let doc = CatalogDocOut {
            components: self
                .components
                .iter()
                .map(|c| ComponentDocOut {
                    id: c.id.0,
                    name: &c.name,
                    description: &c.description,
                    prerequisites: c.prerequisites.iter().map(|p| p.0).collect(),
                    robot_deliverable: c.robot_deliverable,
                    magazine_slot: c.magazine_slot,
                })
                .collect(),
            catalog_image: self.catalog_image.as_deref(),
        };
        serde_json::to_string_pretty(&doc).expect("catalog serializes")
    }

    /// Returns the members of one cycle in the precedence graph, if any.
    fn find_cycle(&self) -> Option<ComponentSet> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Active,
            Done,
        }
        let n = self.components.len();
        let mut marks = vec![Mark::New; n + 1];
        let mut path: Vec<ComponentId> = Vec::new();

        fn visit(
            cat: &ComponentCatalog,
            id: ComponentId,
            marks: &mut [Mark],
            path: &mut Vec<ComponentId>,
        ) -> Option<ComponentSet> {
            let idx = id.0 as usize;
            match marks[idx] {
                Mark::Done => return None,
                Mark::Active => {
                    let start = path.iter().position(|p| *p == id).unwrap_or(0);
                    return Some(path[start..].iter().copied().collect());
                }
                Mark::New => {}
            }
            marks[idx] = Mark::Active;
            path.push(id);
            for p in cat.prerequisites(id) {
                if let Some(cycle) = visit(cat, *p, marks, path) {
                    return Some(cycle);
                }
            }
            path.pop();
            marks[idx] = Mark::Done;
            None
        }

        for id in self.ids() {
            if let Some(cycle) = visit(self, id, &mut marks, &mut path) {
                return Some(cycle);
            }
        }
        None
    }
}

/// Parses and validates a catalog JSON document.
pub fn load_catalog(document: &str) -> Result<ComponentCatalog, CatalogError> {
    let doc: CatalogDoc =
        serde_json::from_str(document).map_err(|e| CatalogError::Schema(e.to_string()))?;
    let components = doc
        .components
        .into_iter()
        .map(|c| ComponentSpec {
            id: ComponentId(c.id),
            name: c.name,
            description: c.description,
            prerequisites: c.prerequisites.into_iter().map(ComponentId).collect(),
            robot_deliverable: c.robot_deliverable,
            magazine_slot: c.magazine_slot,
        })
        .collect();
    ComponentCatalog::new(components, doc.catalog_image)
}

pub fn load_catalog_file(path: &Path) -> Result<ComponentCatalog, CatalogError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CatalogError::Io(format!("{}: {e}", path.display())))?;
    load_catalog(&text)
}

/// Every unassembled component whose prerequisites are all in `assembled`.
pub fn feasible_set(
    assembled: &ComponentSet,
    catalog: &ComponentCatalog,
) -> Result<ComponentSet, CatalogError> {
    catalog.check_ids(assembled)?;
    Ok(catalog
        .components()
        .iter()
        .filter(|c| !assembled.contains(&c.id) && c.prerequisites.is_subset(assembled))
        .map(|c| c.id)
        .collect())
}

/// Prerequisites of `id` that are not in `assembled`.
pub fn missing_prerequisites(
    id: ComponentId,
    assembled: &ComponentSet,
    catalog: &ComponentCatalog,
) -> ComponentSet {
    catalog
        .prerequisites(id)
        .difference(assembled)
        .copied()
        .collect()
}

/// Count of prerequisites per component, handy for reports.
pub fn prerequisite_counts(catalog: &ComponentCatalog) -> BTreeMap<ComponentId, usize> {
    catalog
        .components()
        .iter()
        .map(|c| (c.id, c.prerequisites.len()))
        .collect()
}
