use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::record::AssetRecord;
use super::AssetError;

/// Size of the like-ranked pool selection draws from.
pub const DEFAULT_TOP_K: usize = 10;

/// Records whose name or tags contain `query`, case-insensitively.
pub fn search<'a>(records: impl IntoIterator<Item = &'a AssetRecord>, query: &str) -> Vec<AssetRecord> {
    let needle = query.trim().to_lowercase();
    if needle.is_empty() {
        return Vec::new();
    }
    records.into_iter().filter(|r| r.matches(&needle)).cloned().collect()
}

/// Keep the `k` most-liked records (ties by id), then take the lowest vertex
/// count among them. Ties on vertex count are broken by a seeded draw over
/// the id-sorted tie set, so the result does not depend on input order.
pub fn select(records: &[AssetRecord], seed: u64, k: usize) -> Result<&AssetRecord, AssetError> {
    if records.is_empty() {
        return Err(AssetError::NotFound { query: String::new() });
    }
    let mut ranked: Vec<&AssetRecord> = records.iter().collect();
    ranked.sort_by(|a, b| b.likes.cmp(&a.likes).then_with(|| a.id.cmp(&b.id)));
    ranked.truncate(k.max(1));

    let min_verts = ranked.iter().map(|r| r.vertex_count).min().expect("nonempty pool");
    let mut ties: Vec<&AssetRecord> = ranked.into_iter().filter(|r| r.vertex_count == min_verts).collect();
    ties.sort_by(|a, b| a.id.cmp(&b.id));
    let pick = if ties.len() == 1 {
        0
    } else {
        ChaCha8Rng::seed_from_u64(seed).random_range(0..ties.len())
    };
    Ok(ties[pick])
}
