use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MedoidIndex, Neighbourhood};
use crate::error::{Error, Result};

pub const INDEX_FORMAT: &str = "relexplain-medoid-index";
pub const INDEX_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct IndexDoc {
    format: String,
    version: u32,
    #[serde(flatten)]
    index: MedoidIndex,
}

pub fn save_index(path: &Path, index: &MedoidIndex) -> Result<()> {
    let doc = IndexDoc {
        format: INDEX_FORMAT.into(),
        version: INDEX_VERSION,
        index: index.clone(),
    };
    let text = serde_json::to_string_pretty(&doc).expect("index document serializes");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_index(path: &Path) -> Result<MedoidIndex> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let corrupt = |reason: String| Error::Corrupt {
        path: path.to_path_buf(),
        reason,
    };
    let doc: IndexDoc = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
    if doc.format != INDEX_FORMAT {
        return Err(corrupt(format!("unexpected format tag '{}'", doc.format)));
    }
    if doc.version != INDEX_VERSION {
        return Err(Error::VersionMismatch {
            expected: INDEX_VERSION,
            found: doc.version,
        });
    }
    doc.index.validate().map_err(|e| corrupt(e.to_string()))?;
    Ok(doc.index)
}

/// One row per member: anchor id, member index, generator, distance, features.
pub fn write_neighbourhoods<'a>(
    path: &Path,
    feature_names: &[String],
    items: impl IntoIterator<Item = (usize, &'a Neighbourhood)>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![
        "anchor_id".to_string(),
        "member_idx".into(),
        "generator".into(),
        "distance".into(),
    ];
    header.extend(feature_names.iter().cloned());
    w.write_record(&header)?;
    for (id, n) in items {
        for (k, m) in n.members.iter().enumerate() {
            let mut rec = vec![
                id.to_string(),
                k.to_string(),
                n.generator.tag().to_string(),
                m.distance.to_string(),
            ];
            rec.extend(m.point.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
