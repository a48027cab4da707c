//! `map_server`-style map pairs: a binary PGM image plus YAML metadata.
//!
//! Pixel semantics (negate = 0): 0 occupied, 254 free, 205 unknown. Image
//! row 0 is the top of the map, so rows are flipped relative to the grid.

use std::fs;
use std::path::{Path, PathBuf};

use serde_yaml::Value;
use thiserror::Error;

use crate::geometry::GridMeta;
use crate::slam::{CellClass, TrinaryGrid, FREE_THRESH, OCCUPIED_THRESH};

pub const PIXEL_OCCUPIED: u8 = 0;
pub const PIXEL_FREE: u8 = 254;
pub const PIXEL_UNKNOWN: u8 = 205;

#[derive(Debug, Error)]
pub enum MapFormatError {
    #[error("malformed PGM at byte {offset}: {reason}")]
    Pgm { offset: usize, reason: String },
    #[error("map metadata is missing key `{0}`")]
    MissingKey(String),
    #[error("map metadata key `{key}`: {reason}")]
    BadValue { key: String, reason: String },
    #[error("map metadata is not valid YAML: {0}")]
    Yaml(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// PGM bytes plus YAML text describing one map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapFilePair {
    pub image: Vec<u8>,
    pub metadata: String,
}

fn pixel_for(class: CellClass) -> u8 {
    match class {
        CellClass::Occupied => PIXEL_OCCUPIED,
        CellClass::Free => PIXEL_FREE,
        CellClass::Unknown => PIXEL_UNKNOWN,
    }
}

fn class_for(pixel: u8, occupied_thresh: f64, free_thresh: f64) -> CellClass {
    match pixel {
        PIXEL_OCCUPIED => CellClass::Occupied,
        PIXEL_FREE => CellClass::Free,
        PIXEL_UNKNOWN => CellClass::Unknown,
        _ => {
            let p = (255.0 - pixel as f64) / 255.0;
            if p >= occupied_thresh {
                CellClass::Occupied
            } else if p <= free_thresh {
                CellClass::Free
            } else {
                CellClass::Unknown
            }
        }
    }
}

/// Encodes a map as a PGM/YAML pair. `name` is the image file stem the YAML
/// refers to.
pub fn export_map(grid: &TrinaryGrid, name: &str) -> MapFilePair {
    let meta = &grid.meta;
    let mut image = format!("P5\n{} {}\n255\n", meta.width, meta.height).into_bytes();
    image.reserve(meta.len());
    for row in (0..meta.height).rev() {
        let start = row * meta.width;
        image.extend(grid.cells[start..start + meta.width].iter().map(|c| pixel_for(*c)));
    }
    let metadata = format!(
        "image: {name}.pgm\nresolution: {:?}\norigin: [{:?}, {:?}, 0.0]\nnegate: 0\noccupied_thresh: {:?}\nfree_thresh: {:?}\n",
        meta.resolution, meta.origin_x, meta.origin_y, OCCUPIED_THRESH, FREE_THRESH
    );
    MapFilePair { image, metadata }
}

struct PgmHeader {
    width: usize,
    height: usize,
    data_offset: usize,
}

fn parse_pgm_header(bytes: &[u8]) -> Result<PgmHeader, MapFormatError> {
    let err = |offset: usize, reason: &str| MapFormatError::Pgm {
        offset,
        reason: reason.to_string(),
    };
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(err(0, "expected magic `P5`"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for (i, field) in fields.iter_mut().enumerate() {
        // Whitespace and comments before each field; at least one separator.
        let sep_start = pos;
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|b| *b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        if pos == sep_start {
            return Err(err(pos, "expected whitespace in header"));
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(err(pos, ["expected width", "expected height", "expected maxval"][i]));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = text.parse().map_err(|_| err(start, "header number out of range"))?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(err(2, "zero image dimension"));
    }
    if maxval != 255 {
        return Err(err(pos, "maxval must be 255"));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(err(pos, "expected single whitespace after maxval")),
    }
    Ok(PgmHeader {
        width,
        height,
        data_offset: pos,
    })
}

struct MapMetadata {
    resolution: f64,
    origin: (f64, f64),
    occupied_thresh: f64,
    free_thresh: f64,
}

fn parse_metadata(text: &str) -> Result<MapMetadata, MapFormatError> {
    let doc: Value = serde_yaml::from_str(text).map_err(|e| MapFormatError::Yaml(e.to_string()))?;
    let map = doc
        .as_mapping()
        .ok_or_else(|| MapFormatError::Yaml("top level must be a mapping".into()))?;
    let get = |key: &str| map.get(key).ok_or_else(|| MapFormatError::MissingKey(key.to_string()));
    let bad = |key: &str, reason: &str| MapFormatError::BadValue {
        key: key.to_string(),
        reason: reason.to_string(),
    };
    let num = |key: &str| -> Result<f64, MapFormatError> {
        get(key)?.as_f64().ok_or_else(|| bad(key, "expected a number"))
    };
    get("image")?.as_str().ok_or_else(|| bad("image", "expected a string"))?;
    let resolution = num("resolution")?;
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(bad("resolution", "must be positive"));
    }
    let origin = get("origin")?
        .as_sequence()
        .filter(|s| s.len() == 3)
        .ok_or_else(|| bad("origin", "expected [x, y, yaw]"))?;
    let o: Vec<f64> = origin
        .iter()
        .map(|v| v.as_f64().ok_or_else(|| bad("origin", "expected numbers")))
        .collect::<Result<_, _>>()?;
    if o[2] != 0.0 {
        return Err(bad("origin", "only yaw 0 is supported"));
    }
    let negate = get("negate")?.as_i64().ok_or_else(|| bad("negate", "expected 0 or 1"))?;
    if negate != 0 {
        return Err(bad("negate", "only negate 0 is supported"));
    }
    Ok(MapMetadata {
        resolution,
        origin: (o[0], o[1]),
        occupied_thresh: num("occupied_thresh")?,
        free_thresh: num("free_thresh")?,
    })
}

/// Decodes a map pair. Any malformation is an error; nothing is returned
/// from a partially valid input.
pub fn import_map(pair: &MapFilePair) -> Result<TrinaryGrid, MapFormatError> {
    let md = parse_metadata(&pair.metadata)?;
    let header = parse_pgm_header(&pair.image)?;
    let n = header.width * header.height;
    let payload = &pair.image[header.data_offset..];
    if payload.len() != n {
        return Err(MapFormatError::Pgm {
            offset: header.data_offset + payload.len().min(n),
            reason: format!(
                "payload has {} bytes, header declares {}x{} = {n}",
                payload.len(),
                header.width,
                header.height
            ),
        });
    }
    let meta = GridMeta::new(md.resolution, header.width, header.height, md.origin.0, md.origin.1)
        .map_err(|e| MapFormatError::BadValue {
            key: "origin".into(),
            reason: e.to_string(),
        })?;
    let mut cells = vec![CellClass::Unknown; n];
    for (img_row, chunk) in payload.chunks(header.width).enumerate() {
        let row = header.height - 1 - img_row;
        for (col, px) in chunk.iter().enumerate() {
            cells[row * header.width + col] = class_for(*px, md.occupied_thresh, md.free_thresh);
        }
    }
    Ok(TrinaryGrid { meta, cells })
}

/// Writes `<stem>.pgm` and `<stem>.yaml`; returns the YAML path.
pub fn write_map_files(grid: &TrinaryGrid, stem: &Path) -> Result<PathBuf, MapFormatError> {
    let name = stem
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "map".into());
    let pair = export_map(grid, &name);
    let pgm = stem.with_file_name(format!("{name}.pgm"));
    let yaml = stem.with_file_name(format!("{name}.yaml"));
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| MapFormatError::Io { path, source }
    };
    fs::write(&pgm, &pair.image).map_err(io(&pgm))?;
    fs::write(&yaml, &pair.metadata).map_err(io(&yaml))?;
    Ok(yaml)
}

/// Loads a map from its YAML file; the image path is resolved relative to it.
pub fn read_map_files(yaml_path: &Path) -> Result<TrinaryGrid, MapFormatError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| MapFormatError::Io { path, source }
    };
    let metadata = fs::read_to_string(yaml_path).map_err(io(yaml_path))?;
    let doc: Value = serde_yaml::from_str(&metadata).map_err(|e| MapFormatError::Yaml(e.to_string()))?;
    let image_name = doc
        .get("image")
        .and_then(Value::as_str)
        .ok_or_else(|| MapFormatError::MissingKey("image".into()))?;
    let image_path = yaml_path
        .parent()
        .map(|p| p.join(image_name))
        .unwrap_or_else(|| PathBuf::from(image_name));
    let image = fs::read(&image_path).map_err(io(&image_path))?;
    import_map(&MapFilePair { image, metadata })
}
