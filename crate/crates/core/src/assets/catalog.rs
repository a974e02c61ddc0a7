use std::collections::BTreeMap;
use std::path::Path;

use super::record::AssetRecord;
use super::select::search;

/// Searchable source of model records.
pub trait Repository: Send + Sync {
    fn search(&self, query: &str) -> Vec<AssetRecord>;
    fn get(&self, id: &str) -> Option<AssetRecord>;
}

const BUNDLED: &str = include_str!("../../data/mock_catalog.json");

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("catalog is not a JSON array of records: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cannot read catalog: {0}")]
    Io(#[from] std::io::Error),
    #[error("record {id}: {problem}")]
    Invalid { id: String, problem: String },
}

/// In-memory repository loaded from a JSON array of records.
#[derive(Debug, Clone)]
pub struct MockCatalog {
    records: BTreeMap<String, AssetRecord>,
}

impl MockCatalog {
    /// The catalog shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED).expect("bundled catalog is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        let list: Vec<AssetRecord> = serde_json::from_str(text)?;
        Self::from_records(list)
    }

    pub fn from_path(path: &Path) -> Result<Self, CatalogError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_records(list: Vec<AssetRecord>) -> Result<Self, CatalogError> {
        let mut records = BTreeMap::new();
        let mut urls = std::collections::BTreeSet::new();
        for r in list {
            let bad = |problem: &str| CatalogError::Invalid {
                id: r.id.clone(),
                problem: problem.into(),
            };
            if r.vertex_count == 0 {
                return Err(bad("vertex_count must be positive"));
            }
            if !urls.insert(r.download_url.clone()) {
                return Err(bad("download_url is shared with another record"));
            }
            if records.contains_key(&r.id) {
                return Err(bad("duplicate id"));
            }
            records.insert(r.id.clone(), r);
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> impl Iterator<Item = &AssetRecord> {
        self.records.values()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl Repository for MockCatalog {
    fn search(&self, query: &str) -> Vec<AssetRecord> {
        search(self.records.values(), query)
    }

    fn get(&self, id: &str) -> Option<AssetRecord> {
        self.records.get(id).cloned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_catalog_covers_examples() {
        let cat = MockCatalog::bundled();
        assert!(cat.len() >= 190, "{}", cat.len());
        for name in [
            "salmon",
            "knife",
            "fire",
            "ice",
            "computer desk",
            "flashlight",
            "egg",
            "clock",
            "medical saw",
        ] {
            assert!(!cat.search(name).is_empty(), "{name}");
        }
    }

    #[test]
    fn knife_search_matches_linear_scan() {
        let cat = MockCatalog::bundled();
        let mut got: Vec<_> = cat.search("knife").into_iter().map(|r| r.id).collect();
        got.sort();
        let mut want: Vec<_> = cat
            .records()
            .filter(|r| r.name.to_lowercase().contains("knife") || r.tags.iter().any(|t| t.to_lowercase().contains("knife")))
            .map(|r| r.id.clone())
            .collect();
        want.sort();
        assert!(!want.is_empty());
        assert_eq!(got, want);
    }

    #[test]
    fn rejects_zero_vertices() {
        let text = r#"[{"id":"a","name":"a","tags":[],"likes":0,"vertex_count":0,"size_bytes":1,
            "download_url":"u","base_extents":{"x":1,"y":1,"z":1}}]"#;
        assert!(matches!(MockCatalog::from_json(text), Err(CatalogError::Invalid { .. })));
    }
}
