//! Loading curve vertices from CSV (`x,y,z` per row, optional header) and
//! JSON (`{"vertices": [[x, y, z], ...]}`).

use super::Point3;
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("CSV line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("no vertices found")]
    Empty,
}

/// Parse `x,y,z` rows. A first row that does not parse as numbers is treated
/// as a header; blank lines are skipped.
pub fn vertices_from_csv(text: &str) -> Result<Vec<Point3<f64>>, LoadError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(LoadError::Csv {
                line: idx + 1,
                msg: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let parsed: Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) => out.push(Point3::new(v[0], v[1], v[2])),
            Err(e) => {
                if out.is_empty() && idx == 0 {
                    continue; // header row
                }
                return Err(LoadError::Csv {
                    line: idx + 1,
                    msg: e.to_string(),
                });
            }
        }
    }
    if out.is_empty() {
        return Err(LoadError::Empty);
    }
    Ok(out)
}

#[derive(Deserialize)]
struct CurveJson {
    vertices: Vec<[f64; 3]>,
}

pub fn vertices_from_json(text: &str) -> Result<Vec<Point3<f64>>, LoadError> {
    let parsed: CurveJson = serde_json::from_str(text)?;
    if parsed.vertices.is_empty() {
        return Err(LoadError::Empty);
    }
    Ok(parsed
        .vertices
        .into_iter()
        .map(|[x, y, z]| Point3::new(x, y, z))
        .collect())
}

/// Dispatch on file extension: `.json` goes through the JSON reader,
/// everything else through the CSV reader.
pub fn vertices_from_path(path: &Path) -> Result<Vec<Point3<f64>>, LoadError> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().and_then(|e| e.to_str()) == Some("json") {
        vertices_from_json(&text)
    } else {
        vertices_from_csv(&text)
    }
}
