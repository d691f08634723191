//! Checkpoints: a JSON manifest naming parameters, shapes and byte
//! offsets, next to a raw little-endian f32 blob.
//!
//! Parameter values live on the f32 grid throughout training, so a
//! save/load round trip reproduces inference bit-exactly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DiffTensor, RecModel, RegModel};
use crate::error::{Error, Result};

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ManifestParam {
    name: String,
    shape: Vec<usize>,
    /// Byte offset into the blob.
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: u32,
    kind: String,
    arch: serde_json::Value,
    blob: String,
    blob_bytes: usize,
    params: Vec<ManifestParam>,
}

fn blob_path(stem: &Path) -> PathBuf {
    stem.with_extension("bin")
}

fn manifest_path(stem: &Path) -> PathBuf {
    stem.with_extension("json")
}

fn save(stem: &Path, kind: &str, arch: serde_json::Value, named: &[(String, &DiffTensor)]) -> Result<()> {
    let mut blob: Vec<u8> = Vec::new();
    let mut params = Vec::with_capacity(named.len());
    for (name, p) in named {
        params.push(ManifestParam { name: name.clone(), shape: p.shape.clone(), offset: blob.len() });
        for v in &p.values {
            blob.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    let blob_file = blob_path(stem);
    let manifest = Manifest {
        format: FORMAT_VERSION,
        kind: kind.to_string(),
        arch,
        blob: blob_file
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::Param("checkpoint stem has no file name".into()))?
            .to_string(),
        blob_bytes: blob.len(),
        params,
    };
    fs::write(&blob_file, &blob)?;
    let mut text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Format(format!("manifest encode: {e}")))?;
    text.push('\n');
    fs::write(manifest_path(stem), text)?;
    Ok(())
}

fn load(stem: &Path, expect_kind: &str) -> Result<(serde_json::Value, Vec<(String, Vec<usize>, Vec<f64>)>)> {
    let mpath = manifest_path(stem);
    let manifest: Manifest = serde_json::from_slice(&fs::read(&mpath)?)
        .map_err(|e| Error::Format(format!("{}: {e}", mpath.display())))?;
    if manifest.format != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint format {}", manifest.format)));
    }
    if manifest.kind != expect_kind {
        return Err(Error::Model(format!(
            "checkpoint holds a '{}' model, expected '{expect_kind}'",
            manifest.kind
        )));
    }
    let bpath = mpath
        .parent()
        .map(|d| d.join(&manifest.blob))
        .ok_or_else(|| Error::Param("checkpoint path has no parent".into()))?;
    let blob = fs::read(&bpath)?;
    if blob.len() != manifest.blob_bytes {
        return Err(Error::Format(format!(
            "{}: blob is {} bytes, manifest says {}",
            bpath.display(),
            blob.len(),
            manifest.blob_bytes
        )));
    }
    let mut out = Vec::with_capacity(manifest.params.len());
    for p in &manifest.params {
        let count: usize = p.shape.iter().product();
        let end = p.offset + 4 * count;
        if end > blob.len() {
            return Err(Error::Format(format!("parameter '{}' overruns blob", p.name)));
        }
        let values = blob[p.offset..end]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        out.push((p.name.clone(), p.shape.clone(), values));
    }
    Ok((manifest.arch, out))
}

fn fill_by_names(params: Vec<&mut DiffTensor>, names: &[String], loaded: Vec<(String, Vec<usize>, Vec<f64>)>) -> Result<()> {
    if loaded.len() != names.len() {
        return Err(Error::Format(format!(
            "checkpoint has {} parameters, model has {}",
            loaded.len(),
            names.len()
        )));
    }
    for (dst, (name, (lname, lshape, lvalues))) in params.into_iter().zip(names.iter().zip(loaded)) {
        if *name != lname {
            return Err(Error::Format(format!("parameter order mismatch: '{lname}' vs '{name}'")));
        }
        if dst.shape != lshape {
            return Err(Error::Format(format!(
                "parameter '{name}' shape {:?} != checkpoint {:?}",
                dst.shape, lshape
            )));
        }
        dst.values = lvalues;
        dst.zero_grad();
    }
    Ok(())
}

/// Write a reconstructor checkpoint as `<stem>.json` + `<stem>.bin`.
pub fn save_rec_model(stem: &Path, model: &RecModel) -> Result<()> {
    save(stem, "rec", serde_json::json!({}), &model.named_params())
}

/// Load a reconstructor checkpoint saved by [`save_rec_model`].
pub fn load_rec_model(stem: &Path) -> Result<RecModel> {
    let (_, loaded) = load(stem, "rec")?;
    let mut model = RecModel::new(0);
    let names: Vec<String> = model.named_params().into_iter().map(|(n, _)| n).collect();
    fill_by_names(model.params_mut(), &names, loaded)?;
    Ok(model)
}

/// Write a regressor checkpoint as `<stem>.json` + `<stem>.bin`.
pub fn save_reg_model(stem: &Path, model: &RegModel) -> Result<()> {
    save(
        stem,
        "reg",
        serde_json::json!({ "image_size": model.image_size() }),
        &model.named_params(),
    )
}

/// Load a regressor checkpoint saved by [`save_reg_model`].
pub fn load_reg_model(stem: &Path) -> Result<RegModel> {
    let (arch, loaded) = load(stem, "reg")?;
    let image_size = arch
        .get("image_size")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Format("regressor checkpoint lacks image_size".into()))? as usize;
    let mut model = RegModel::new(0, image_size)?;
    let names: Vec<String> = model.named_params().into_iter().map(|(n, _)| n).collect();
    fill_by_names(model.params_mut(), &names, loaded)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{Image, Mask};
    use crate::nnet::{generate, predict_dsc};

    #[test]
    fn rec_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("rec");
        let model = RecModel::new(21);
        save_rec_model(&stem, &model).unwrap();
        let loaded = load_rec_model(&stem).unwrap();

        let img = Image::from_fn(16, 16, |y, x| ((y * 16 + x) % 11) as f64 / 10.0).unwrap();
        let strip = Mask::from_fn(16, 16, |y, _| (5..9).contains(&y));
        let a = generate(&model, &img, &strip).unwrap();
        let b = generate(&loaded, &img, &strip).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }

        // Saving the loaded model again produces identical bytes.
        let stem2 = dir.path().join("rec2");
        save_rec_model(&stem2, &loaded).unwrap();
        assert_eq!(
            std::fs::read(stem.with_extension("bin")).unwrap(),
            std::fs::read(stem2.with_extension("bin")).unwrap()
        );
    }

    #[test]
    fn reg_roundtrip_and_kind_check() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("reg");
        let model = RegModel::new(9, 32).unwrap();
        save_reg_model(&stem, &model).unwrap();
        let loaded = load_reg_model(&stem).unwrap();
        let img = Image::from_fn(32, 32, |y, x| ((y + 2 * x) % 13) as f64 / 12.0).unwrap();
        let seg = Mask::from_fn(32, 32, |y, _| y > 10 && y < 20);
        assert_eq!(
            predict_dsc(&model, &img, &seg).unwrap().to_bits(),
            predict_dsc(&loaded, &img, &seg).unwrap().to_bits()
        );

        assert!(matches!(load_rec_model(&stem), Err(Error::Model(_))));
    }
}
