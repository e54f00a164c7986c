//! Ratings ingestion: MovieLens-format CSV, row limits, and holdout splits.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{seeded_rng, PURPOSE_INGEST_SAMPLE, PURPOSE_SPLIT};

/// One observed rating, with user and item as contiguous indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub user: u32,
    pub item: u32,
    pub value: f64,
}

/// A set of ratings over contiguously indexed users and items.
///
/// `user_ids[i]` / `item_ids[i]` hold the raw id behind index `i`. Duplicate
/// (user, item) pairs are kept as distinct observations.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingsDataset {
    ratings: Vec<Rating>,
    user_ids: Vec<u64>,
    item_ids: Vec<u64>,
}

impl RatingsDataset {
    pub fn from_parts(
        ratings: Vec<Rating>,
        user_ids: Vec<u64>,
        item_ids: Vec<u64>,
    ) -> Result<Self> {
        for r in &ratings {
            if r.user as usize >= user_ids.len() {
                return Err(Error::IndexOutOfRange {
                    what: "users",
                    index: r.user as usize,
                    size: user_ids.len(),
                });
            }
            if r.item as usize >= item_ids.len() {
                return Err(Error::IndexOutOfRange {
                    what: "items",
                    index: r.item as usize,
                    size: item_ids.len(),
                });
            }
        }
        Ok(RatingsDataset {
            ratings,
            user_ids,
            item_ids,
        })
    }

    /// Builds a dataset from raw (user id, item id, rating) triples,
    /// assigning contiguous indices in order of first appearance.
    pub fn from_raw_triples(triples: impl IntoIterator<Item = (u64, u64, f64)>) -> Result<Self> {
        let mut user_map: HashMap<u64, u32> = HashMap::new();
        let mut item_map: HashMap<u64, u32> = HashMap::new();
        let mut user_ids = Vec::new();
        let mut item_ids = Vec::new();
        let mut ratings = Vec::new();
        for (user_id, item_id, value) in triples {
            let user = *user_map.entry(user_id).or_insert_with(|| {
                user_ids.push(user_id);
                (user_ids.len() - 1) as u32
            });
            let item = *item_map.entry(item_id).or_insert_with(|| {
                item_ids.push(item_id);
                (item_ids.len() - 1) as u32
            });
            ratings.push(Rating { user, item, value });
        }
        if ratings.is_empty() {
            return Err(Error::Empty { what: "ratings" });
        }
        Ok(RatingsDataset {
            ratings,
            user_ids,
            item_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn ratings(&self) -> &[Rating] {
        &self.ratings
    }

    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn user_ids(&self) -> &[u64] {
        &self.user_ids
    }

    pub fn item_ids(&self) -> &[u64] {
        &self.item_ids
    }

    /// Mean rating per item index; items without ratings get 0.
    pub fn mean_item_ratings(&self) -> Vec<f64> {
        let mut sums = vec![0.0f64; self.item_ids.len()];
        let mut counts = vec![0u64; self.item_ids.len()];
        for r in &self.ratings {
            sums[r.item as usize] += r.value;
            counts[r.item as usize] += 1;
        }
        sums.iter()
            .zip(&counts)
            .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
            .collect()
    }
}

/// How many input rows to keep when ingesting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowLimit {
    /// Keep every row.
    All,
    /// Keep the first N rows in file order.
    FirstN(usize),
    /// Keep a seeded uniform sample of the given fraction of rows,
    /// preserving file order among the kept rows.
    SampleFraction(f64),
}

/// Reads a MovieLens-format ratings CSV (`userId,movieId,rating,timestamp`;
/// the timestamp column is ignored and may be absent).
pub fn ingest(path: impl AsRef<Path>, limit: RowLimit, seed: u64) -> Result<RatingsDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::io(format!("open {}", path.display()), e))?;
    ingest_reader(BufReader::new(file), &path.display().to_string(), limit, seed)
}

/// Same as [`ingest`] but over any buffered reader; `label` names the source
/// in error messages.
pub fn ingest_reader(
    reader: impl BufRead,
    label: &str,
    limit: RowLimit,
    seed: u64,
) -> Result<RatingsDataset> {
    if let RowLimit::SampleFraction(f) = limit {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "sample fraction must be in (0, 1], got {f}"
            )));
        }
    }
    let parse_err = |line: usize, message: String| Error::Parse {
        path: label.to_string(),
        line,
        message,
    };

    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".to_string()))?;
    let header = header.map_err(|e| Error::io(format!("read {label}"), e))?;
    let fields: Vec<&str> = header.trim_end().split(',').collect();
    if fields.len() < 3 || fields[0] != "userId" || fields[1] != "movieId" || fields[2] != "rating"
    {
        return Err(parse_err(
            1,
            format!("expected header starting with userId,movieId,rating, got {header:?}"),
        ));
    }

    let mut rows: Vec<(u64, u64, f64)> = Vec::new();
    for (index, line) in lines {
        let line_no = index + 1;
        let line = line.map_err(|e| Error::io(format!("read {label}"), e))?;
        let trimmed = line.trim_end();
        if trimmed.is_empty() {
            continue;
        }
        let mut cols = trimmed.split(',');
        let user: u64 = cols
            .next()
            .ok_or_else(|| parse_err(line_no, "missing userId".into()))?
            .parse()
            .map_err(|e| parse_err(line_no, format!("bad userId: {e}")))?;
        let item: u64 = cols
            .next()
            .ok_or_else(|| parse_err(line_no, "missing movieId".into()))?
            .parse()
            .map_err(|e| parse_err(line_no, format!("bad movieId: {e}")))?;
        let rating: f64 = cols
            .next()
            .ok_or_else(|| parse_err(line_no, "missing rating".into()))?
            .parse()
            .map_err(|e| parse_err(line_no, format!("bad rating: {e}")))?;
        if !rating.is_finite() {
            return Err(parse_err(line_no, format!("non-finite rating {rating}")));
        }
        rows.push((user, item, rating));
        if let RowLimit::FirstN(n) = limit {
            if rows.len() >= n {
                break;
            }
        }
    }

    if let RowLimit::SampleFraction(f) = limit {
        let keep = (rows.len() as f64 * f).round() as usize;
        if keep == 0 {
            return Err(Error::Empty {
                what: "sampled rows",
            });
        }
        if keep < rows.len() {
            let mut rng = seeded_rng(seed, PURPOSE_INGEST_SAMPLE, 0);
            let mut picked = rand::seq::index::sample(&mut rng, rows.len(), keep).into_vec();
            picked.sort_unstable();
            rows = picked.into_iter().map(|i| rows[i]).collect();
        }
    }

    RatingsDataset::from_raw_triples(rows)
}

/// Writes a dataset back out in MovieLens CSV format (timestamps written as 0).
pub fn write_ratings_csv(path: impl AsRef<Path>, data: &RatingsDataset) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path)
        .map_err(|e| Error::io(format!("create {}", path.display()), e))?;
    let mut w = std::io::BufWriter::new(file);
    let emit = |e: std::io::Error| Error::io(format!("write {}", path.display()), e);
    writeln!(w, "userId,movieId,rating,timestamp").map_err(emit)?;
    for r in data.ratings() {
        writeln!(
            w,
            "{},{},{},0",
            data.user_ids()[r.user as usize],
            data.item_ids()[r.item as usize],
            r.value
        )
        .map_err(emit)?;
    }
    w.flush().map_err(emit)
}

/// Splits a dataset into disjoint, exhaustive (train, holdout) parts.
///
/// The holdout size is `len * holdout_fraction` rounded to nearest, clamped
/// so both sides stay non-empty. Index maps are shared by both parts.
pub fn split(
    data: &RatingsDataset,
    holdout_fraction: f64,
    seed: u64,
) -> Result<(RatingsDataset, RatingsDataset)> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "holdout fraction must be in (0, 1), got {holdout_fraction}"
        )));
    }
    let n = data.len();
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "cannot split {n} rating(s) into two non-empty parts"
        )));
    }
    let holdout_len = ((n as f64 * holdout_fraction).round() as usize).clamp(1, n - 1);
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = seeded_rng(seed, PURPOSE_SPLIT, 0);
    indices.shuffle(&mut rng);
    let mut holdout_idx = indices[..holdout_len].to_vec();
    let mut train_idx = indices[holdout_len..].to_vec();
    holdout_idx.sort_unstable();
    train_idx.sort_unstable();
    let pick = |idx: &[usize]| RatingsDataset {
        ratings: idx.iter().map(|&i| data.ratings[i]).collect(),
        user_ids: data.user_ids.clone(),
        item_ids: data.item_ids.clone(),
    };
    Ok((pick(&train_idx), pick(&holdout_idx)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    const SMALL: &str = "userId,movieId,rating,timestamp\n\
                         1,100,3.5,123\n\
                         2,100,4.0,124\n\
                         1,200,2.0,125\n";

    fn ingest_str(s: &str, limit: RowLimit, seed: u64) -> Result<RatingsDataset> {
        ingest_reader(Cursor::new(s), "<test>", limit, seed)
    }

    #[test]
    fn ingest_reindexes_contiguously() {
        let d = ingest_str(SMALL, RowLimit::All, 0).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.n_users(), 2);
        assert_eq!(d.n_items(), 2);
        assert_eq!(d.user_ids(), &[1, 2]);
        assert_eq!(d.item_ids(), &[100, 200]);
        assert_eq!(
            d.ratings()[0],
            Rating {
                user: 0,
                item: 0,
                value: 3.5
            }
        );
    }

    #[test]
    fn ingest_keeps_duplicates() {
        let s = "userId,movieId,rating,timestamp\n1,100,3.0,0\n1,100,4.0,0\n";
        let d = ingest_str(s, RowLimit::All, 0).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.n_users(), 1);
        assert_eq!(d.n_items(), 1);
    }

    #[test]
    fn ingest_first_n_stops_early() {
        let d = ingest_str(SMALL, RowLimit::FirstN(2), 0).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.n_items(), 1);
    }

    #[test]
    fn ingest_without_timestamp_column() {
        let s = "userId,movieId,rating\n1,100,3.0\n";
        let d = ingest_str(s, RowLimit::All, 0).unwrap();
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn ingest_rejects_bad_header() {
        let s = "user,movie,rating\n1,100,3.0\n";
        let err = ingest_str(s, RowLimit::All, 0).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn ingest_reports_malformed_row_line() {
        let s = "userId,movieId,rating,timestamp\n1,100,3.0,0\n1,abc,3.0,0\n";
        let err = ingest_str(s, RowLimit::All, 0).unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("movieId"), "{message}");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn ingest_rejects_empty_input() {
        let err = ingest_str("userId,movieId,rating,timestamp\n", RowLimit::All, 0).unwrap_err();
        assert!(matches!(err, Error::Empty { .. }), "{err}");
    }

    #[test]
    fn sampled_ingest_is_seeded_and_ordered() {
        let mut rows = String::from("userId,movieId,rating,timestamp\n");
        for i in 0..100 {
            rows.push_str(&format!("{},{},3.0,0\n", i + 1, 1000 + i));
        }
        let a = ingest_str(&rows, RowLimit::SampleFraction(0.25), 7).unwrap();
        let b = ingest_str(&rows, RowLimit::SampleFraction(0.25), 7).unwrap();
        let c = ingest_str(&rows, RowLimit::SampleFraction(0.25), 8).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 25);
        assert_ne!(a, c);
        // Kept rows preserve file order: raw user ids strictly increase.
        let raw: Vec<u64> = a.ratings().iter().map(|r| a.user_ids()[r.user as usize]).collect();
        assert!(raw.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn mean_item_ratings_average_per_item() {
        let d = ingest_str(SMALL, RowLimit::All, 0).unwrap();
        let means = d.mean_item_ratings();
        assert_eq!(means, vec![3.75, 2.0]);
    }

    #[test]
    fn split_sizes_and_partition() {
        let rows: Vec<(u64, u64, f64)> =
            (0..10).map(|i| (i as u64, 100 + i as u64, 3.0)).collect();
        let d = RatingsDataset::from_raw_triples(rows).unwrap();
        let (train, test) = split(&d, 0.2, 42).unwrap();
        assert_eq!(train.len(), 8);
        assert_eq!(test.len(), 2);
        assert_eq!(train.n_users(), d.n_users());
        assert_eq!(test.n_items(), d.n_items());
        let mut all: Vec<Rating> = train.ratings().to_vec();
        all.extend_from_slice(test.ratings());
        all.sort_by_key(|r| (r.user, r.item));
        let mut orig = d.ratings().to_vec();
        orig.sort_by_key(|r| (r.user, r.item));
        assert_eq!(all, orig);
    }

    #[test]
    fn split_is_deterministic_per_seed() {
        let rows: Vec<(u64, u64, f64)> =
            (0..50).map(|i| (i as u64, 100 + i as u64, 2.5)).collect();
        let d = RatingsDataset::from_raw_triples(rows).unwrap();
        let (a_train, a_test) = split(&d, 0.3, 1).unwrap();
        let (b_train, b_test) = split(&d, 0.3, 1).unwrap();
        let (c_train, _) = split(&d, 0.3, 2).unwrap();
        assert_eq!(a_train, b_train);
        assert_eq!(a_test, b_test);
        assert_ne!(a_train, c_train);
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let d = RatingsDataset::from_raw_triples(vec![(1, 2, 3.0), (2, 3, 4.0)]).unwrap();
        assert!(split(&d, 0.0, 0).is_err());
        assert!(split(&d, 1.0, 0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let d = ingest_str(SMALL, RowLimit::All, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ratings.csv");
        write_ratings_csv(&path, &d).unwrap();
        let back = ingest(&path, RowLimit::All, 0).unwrap();
        assert_eq!(back, d);
    }
}
