//! Saving and loading trained models with their codebooks.
//!
//! The on-disk format is a single JSON document. Floats survive the round
//! trip bit-exactly, and the byte output is a pure function of the model,
//! so re-runs with the same inputs produce identical files.

use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoding::{ItemCodebook, UserCodebook};
use crate::error::{Error, Result};
use crate::fm::FmModel;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct UserSection {
    n_bits: usize,
    ids: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct ItemSection {
    n_bits: usize,
    ids: Vec<u64>,
    rank_to_item: Vec<u32>,
}

/// Serialized layout. The latent matrix is stored row major,
/// `latent_dim` rows by `num_features` columns.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    latent_dim: usize,
    user_bits: usize,
    item_bits: usize,
    w0: f64,
    w: Vec<f64>,
    v_row_major: Vec<f64>,
    users: UserSection,
    items: ItemSection,
}

/// A model together with the codebooks it was trained against.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub model: FmModel,
    pub users: UserCodebook,
    pub items: ItemCodebook,
}

pub fn save_model(
    path: impl AsRef<Path>,
    model: &FmModel,
    users: &UserCodebook,
    items: &ItemCodebook,
) -> Result<()> {
    let path = path.as_ref();
    let d = model.num_features();
    let k = model.latent_dim();
    let mut v_row_major = vec![0.0; d * k];
    for j in 0..d {
        let latent = model.latent(j);
        for f in 0..k {
            v_row_major[f * d + j] = latent[f];
        }
    }
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        latent_dim: k,
        user_bits: model.user_bits(),
        item_bits: model.item_bits(),
        w0: model.w0(),
        w: model.linear_weights().to_vec(),
        v_row_major,
        users: UserSection {
            n_bits: users.n_bits(),
            ids: users.user_ids().to_vec(),
        },
        items: ItemSection {
            n_bits: items.n_bits(),
            ids: items.item_ids().to_vec(),
            rank_to_item: items.rank_to_item().to_vec(),
        },
    };
    let out = std::fs::File::create(path)
        .map_err(|e| Error::io(format!("create {}", path.display()), e))?;
    serde_json::to_writer(BufWriter::new(out), &file)
        .map_err(|e| Error::json(format!("write {}", path.display()), e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelBundle> {
    let path = path.as_ref();
    let input = std::fs::File::open(path)
        .map_err(|e| Error::io(format!("open {}", path.display()), e))?;
    let file: ModelFile = serde_json::from_reader(BufReader::new(input))
        .map_err(|e| Error::json(format!("read {}", path.display()), e))?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::FormatVersion {
            got: file.format_version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let d = file.user_bits + file.item_bits;
    let k = file.latent_dim;
    if file.v_row_major.len() != d * k {
        return Err(Error::DimensionMismatch {
            expected: d * k,
            got: file.v_row_major.len(),
        });
    }
    let mut v = vec![0.0; d * k];
    for j in 0..d {
        for f in 0..k {
            v[j * k + f] = file.v_row_major[f * d + j];
        }
    }
    let model = FmModel::from_parts(file.w0, file.w, v, file.user_bits, file.item_bits, k)?;
    let users = UserCodebook::build(file.users.ids)?;
    let items = ItemCodebook::from_parts(file.items.ids, file.items.rank_to_item)?;
    let consistent = users.n_bits() == file.users.n_bits
        && items.n_bits() == file.items.n_bits
        && users.n_bits() == model.user_bits()
        && items.n_bits() == model.item_bits();
    if !consistent {
        return Err(Error::InvalidConfig(format!(
            "codebook widths in {} do not match the model shape",
            path.display()
        )));
    }
    Ok(ModelBundle {
        model,
        users,
        items,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn bundle(seed: u64) -> (FmModel, UserCodebook, ItemCodebook) {
        let mut rng = crate::rng::seeded_rng(seed, 99, 0);
        let users = UserCodebook::build(vec![7, 3, 11, 20, 5]).unwrap();
        let item_ids: Vec<u64> = (0..11).map(|i| 1000 + i).collect();
        let means: Vec<f64> = (0..11).map(|_| rng.random_range(0.5..5.0)).collect();
        let items = ItemCodebook::build(item_ids, &means).unwrap();
        let d = users.n_bits() + items.n_bits();
        let k = 4;
        let model = FmModel::from_parts(
            rng.random_range(-1.0..1.0),
            (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
            (0..d * k).map(|_| rng.random_range(-1.0..1.0)).collect(),
            users.n_bits(),
            items.n_bits(),
            k,
        )
        .unwrap();
        (model, users, items)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.fmq");
        let (model, users, items) = bundle(1);
        save_model(&path, &model, &users, &items).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back.model.w0().to_bits(), model.w0().to_bits());
        assert_eq!(back.model.linear_weights().len(), model.linear_weights().len());
        for (a, b) in back
            .model
            .linear_weights()
            .iter()
            .zip(model.linear_weights())
        {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for j in 0..model.num_features() {
            for (a, b) in back.model.latent(j).iter().zip(model.latent(j)) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
        assert_eq!(back.users.user_ids(), users.user_ids());
        assert_eq!(back.items.item_ids(), items.item_ids());
        assert_eq!(back.items.rank_to_item(), items.rank_to_item());
    }

    #[test]
    fn saving_twice_yields_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let (model, users, items) = bundle(2);
        let a = dir.path().join("a.fmq");
        let b = dir.path().join("b.fmq");
        save_model(&a, &model, &users, &items).unwrap();
        save_model(&b, &model, &users, &items).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn unknown_versions_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.fmq");
        let (model, users, items) = bundle(3);
        save_model(&path, &model, &users, &items).unwrap();
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"format_version\":1", "\"format_version\":2");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(
            load_model(&path),
            Err(Error::FormatVersion {
                got: 2,
                expected: 1
            })
        ));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.fmq");
        std::fs::write(&path, "{not json").unwrap();
        assert!(matches!(load_model(&path), Err(Error::Json { .. })));
        assert!(matches!(
            load_model(dir.path().join("missing.fmq")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn predictions_survive_the_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.fmq");
        let (model, users, items) = bundle(4);
        save_model(&path, &model, &users, &items).unwrap();
        let back = load_model(&path).unwrap();
        let mut x = users.encode(2).unwrap();
        x.extend(items.primary_code(5).unwrap());
        assert_eq!(
            back.model.predict(&x).unwrap().to_bits(),
            model.predict(&x).unwrap().to_bits()
        );
    }
}
