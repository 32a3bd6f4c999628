//! Rating-file ingestion and train/test splitting.

use std::collections::HashMap;
use std::io::BufRead;
use std::str::FromStr;

use schatten_core::metrics::Rating;
use schatten_core::rng::{derive_seed, keys};
use schatten_core::sparse::sample_mask;
use schatten_core::SparseObservations;

pub use schatten_core::synthetic::{default_rank_bound, gen_synthetic, SyntheticInstance};

use crate::error::{McError, Result};

/// Line layouts of MovieLens-style rating dumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatingFormat {
    /// `user::item::rating::timestamp` (`ratings.dat` of the 1M and 10M sets).
    DoubleColon,
    /// Tab-separated (`u.data` of the 100K set).
    Tab,
    /// Comma-separated with an optional header row.
    Csv,
}

impl RatingFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            RatingFormat::DoubleColon => "dat",
            RatingFormat::Tab => "tab",
            RatingFormat::Csv => "csv",
        }
    }
}

impl FromStr for RatingFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "dat" | "doublecolon" | "::" => Ok(RatingFormat::DoubleColon),
            "tab" | "tsv" => Ok(RatingFormat::Tab),
            "csv" => Ok(RatingFormat::Csv),
            other => Err(format!("unknown rating format {other:?} (expected dat, tab or csv)")),
        }
    }
}

/// Ratings with users and items remapped to dense zero-based indices in
/// order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingSet {
    pub m: usize,
    pub n: usize,
    pub ratings: Vec<Rating>,
    /// Original user ID of each dense index.
    pub user_ids: Vec<String>,
    pub item_ids: Vec<String>,
    pub min_value: f64,
    pub max_value: f64,
    /// Repeated `(user, item)` pairs overwritten by a later line.
    pub duplicates: usize,
}

impl RatingSet {
    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    /// A set over the same index space holding `ratings`.
    fn with_ratings(&self, ratings: Vec<Rating>) -> RatingSet {
        let (min_value, max_value) = value_range(&ratings);
        RatingSet {
            m: self.m,
            n: self.n,
            ratings,
            user_ids: self.user_ids.clone(),
            item_ids: self.item_ids.clone(),
            min_value,
            max_value,
            duplicates: 0,
        }
    }
}

fn value_range(ratings: &[Rating]) -> (f64, f64) {
    ratings.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
        (lo.min(r.value), hi.max(r.value))
    })
}

#[derive(Default)]
struct Builder {
    users: HashMap<String, usize>,
    items: HashMap<String, usize>,
    user_ids: Vec<String>,
    item_ids: Vec<String>,
    position: HashMap<(usize, usize), usize>,
    ratings: Vec<Rating>,
    duplicates: usize,
}

impl Builder {
    fn intern(map: &mut HashMap<String, usize>, ids: &mut Vec<String>, id: &str) -> usize {
        if let Some(&k) = map.get(id) {
            return k;
        }
        let k = ids.len();
        map.insert(id.to_owned(), k);
        ids.push(id.to_owned());
        k
    }

    fn push(&mut self, fields: &[&str], line: usize) -> Result<()> {
        let parse_err = |message: String| McError::Parse {
            file: None,
            line,
            message,
        };
        if fields.len() != 3 && fields.len() != 4 {
            return Err(parse_err(format!(
                "expected user, item, rating[, timestamp], found {} field(s)",
                fields.len()
            )));
        }
        let (user, item) = (fields[0].trim(), fields[1].trim());
        if user.is_empty() || item.is_empty() {
            return Err(parse_err("empty user or item ID".into()));
        }
        let value: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("rating {:?} is not a number", fields[2].trim())))?;
        if !value.is_finite() {
            return Err(parse_err(format!("rating {value} is not finite")));
        }
        let u = Self::intern(&mut self.users, &mut self.user_ids, user);
        let i = Self::intern(&mut self.items, &mut self.item_ids, item);
        match self.position.get(&(u, i)) {
            Some(&k) => {
                self.ratings[k].value = value;
                self.duplicates += 1;
            }
            None => {
                self.position.insert((u, i), self.ratings.len());
                self.ratings.push(Rating { user: u, item: i, value });
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<RatingSet> {
        if self.ratings.is_empty() {
            return Err(McError::Input("rating input contains no ratings".into()));
        }
        let (min_value, max_value) = value_range(&self.ratings);
        Ok(RatingSet {
            m: self.user_ids.len(),
            n: self.item_ids.len(),
            ratings: self.ratings,
            user_ids: self.user_ids,
            item_ids: self.item_ids,
            min_value,
            max_value,
            duplicates: self.duplicates,
        })
    }
}

/// Parses `user<sep>item<sep>rating[<sep>timestamp]` lines. Blank lines are
/// skipped; for CSV a first row whose rating column is not numeric is taken
/// as a header. A repeated `(user, item)` pair keeps the last value.
pub fn parse_movielens<R: BufRead>(reader: R, format: RatingFormat) -> Result<RatingSet> {
    let mut b = Builder::default();
    match format {
        RatingFormat::DoubleColon => {
            for (k, line) in reader.lines().enumerate() {
                let line = line.map_err(|e| McError::Parse {
                    file: None,
                    line: k + 1,
                    message: e.to_string(),
                })?;
                if line.trim().is_empty() {
                    continue;
                }
                let fields: Vec<&str> = line.split("::").collect();
                b.push(&fields, k + 1)?;
            }
        }
        RatingFormat::Tab | RatingFormat::Csv => {
            let delimiter = if format == RatingFormat::Tab { b'\t' } else { b',' };
            let mut rdr = csv::ReaderBuilder::new()
                .delimiter(delimiter)
                .has_headers(false)
                .flexible(true)
                .from_reader(reader);
            let mut first = true;
            for rec in rdr.records() {
                let rec = rec.map_err(|e| McError::Parse {
                    file: None,
                    line: e.position().map_or(0, |p| p.line() as usize),
                    message: e.to_string(),
                })?;
                let line = rec.position().map_or(0, |p| p.line() as usize);
                let fields: Vec<&str> = rec.iter().collect();
                if fields.iter().all(|f| f.trim().is_empty()) {
                    continue;
                }
                let header = first
                    && format == RatingFormat::Csv
                    && fields.len() >= 3
                    && fields[2].trim().parse::<f64>().is_err();
                first = false;
                if !header {
                    b.push(&fields, line)?;
                }
            }
        }
    }
    b.finish()
}

/// Seeded uniform split by rating record: `⌊train_fraction · |ratings|⌋`
/// records train, the rest test.
pub fn split_train_test(rs: &RatingSet, train_fraction: f64, seed: u64) -> Result<(SparseObservations, RatingSet)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(McError::Input(format!(
            "train fraction must lie strictly between 0 and 1, got {train_fraction}"
        )));
    }
    let chosen = sample_mask(1, rs.len(), train_fraction, derive_seed(seed, keys::SPLIT))?;
    if chosen.is_empty() {
        return Err(McError::Input("training set is empty".into()));
    }
    if chosen.len() == rs.len() {
        return Err(McError::Input("test set is empty".into()));
    }
    let mut in_train = vec![false; rs.len()];
    for &(_, k) in &chosen {
        in_train[k] = true;
    }
    let mut train = Vec::with_capacity(chosen.len());
    let mut test = Vec::with_capacity(rs.len() - chosen.len());
    for (r, &t) in rs.ratings.iter().zip(&in_train) {
        if t {
            train.push((r.user, r.item, r.value));
        } else {
            test.push(*r);
        }
    }
    let obs = SparseObservations::new(rs.m, rs.n, train)?;
    Ok((obs, rs.with_ratings(test)))
}

/// Per-user means of the training values; users without training ratings
/// get the global training mean.
pub fn user_means(train: &SparseObservations) -> Vec<f64> {
    let mut sum = vec![0.0; train.rows()];
    let mut count = vec![0usize; train.rows()];
    for (i, _, v) in train.iter() {
        sum[i] += v;
        count[i] += 1;
    }
    let global = if train.is_empty() {
        0.0
    } else {
        train.values().iter().sum::<f64>() / train.len() as f64
    };
    sum.iter()
        .zip(&count)
        .map(|(&s, &c)| if c > 0 { s / c as f64 } else { global })
        .collect()
}

/// Subtracts each row's offset from the observed values.
pub fn center_rows(obs: &SparseObservations, offsets: &[f64]) -> Result<SparseObservations> {
    let values = obs.iter().map(|(i, _, v)| v - offsets[i]).collect();
    Ok(obs.with_values(values)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_double_colon_line() {
        let rs = parse_movielens("1::10::4.5::978300760\n".as_bytes(), RatingFormat::DoubleColon).unwrap();
        assert_eq!(rs.ratings, vec![Rating { user: 0, item: 0, value: 4.5 }]);
        assert_eq!(rs.user_ids, vec!["1"]);
        assert_eq!(rs.item_ids, vec!["10"]);
        assert_eq!((rs.m, rs.n, rs.duplicates), (1, 1, 0));
    }

    #[test]
    fn duplicates_keep_last_value() {
        let rs = parse_movielens("1::2::3\n5::2::1\n1::2::5\n".as_bytes(), RatingFormat::DoubleColon).unwrap();
        assert_eq!(rs.duplicates, 1);
        assert_eq!(rs.len(), 2);
        assert_eq!(rs.ratings[0], Rating { user: 0, item: 0, value: 5.0 });
        assert_eq!((rs.min_value, rs.max_value), (1.0, 5.0));
    }

    #[test]
    fn formats_and_header() {
        let tab = parse_movielens("7\t3\t2\t881250949\n8\t3\t4\t1\n".as_bytes(), RatingFormat::Tab).unwrap();
        assert_eq!(tab.len(), 2);
        assert_eq!(tab.ratings[1], Rating { user: 1, item: 0, value: 4.0 });
        let csv = "userId,movieId,rating,timestamp\n1,31,2.5,1260759144\n\n1,1029,3.0,1260759179\n";
        let rs = parse_movielens(csv.as_bytes(), RatingFormat::Csv).unwrap();
        assert_eq!(rs.len(), 2);
        assert_eq!(rs.item_ids, vec!["31", "1029"]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_movielens("1::2::3\n1::x\n".as_bytes(), RatingFormat::DoubleColon).unwrap_err();
        assert!(matches!(err, McError::Parse { line: 2, .. }), "{err}");
        let err = parse_movielens("1::2::3\n".as_bytes(), RatingFormat::Csv).unwrap_err();
        assert!(matches!(err, McError::Parse { line: 1, .. }), "{err}");
        let err = parse_movielens("1,2,3\n1,2,abc\n".as_bytes(), RatingFormat::Csv).unwrap_err();
        assert!(matches!(err, McError::Parse { line: 2, .. }), "{err}");
        assert!(matches!(
            parse_movielens("\n\n".as_bytes(), RatingFormat::DoubleColon),
            Err(McError::Input(_))
        ));
    }

    fn hundred() -> RatingSet {
        let text: String = (0..100).map(|k| format!("{}::{}::{}\n", k % 13, k, k % 5 + 1)).collect();
        parse_movielens(text.as_bytes(), RatingFormat::DoubleColon).unwrap()
    }

    #[test]
    fn split_counts_and_partition() {
        let rs = hundred();
        let (train, test) = split_train_test(&rs, 0.7, 4).unwrap();
        assert_eq!((train.len(), test.len()), (70, 30));
        let mut all: Vec<(usize, usize, f64)> = train.iter().collect();
        all.extend(test.ratings.iter().map(|r| (r.user, r.item, r.value)));
        all.sort_by_key(|a| (a.0, a.1));
        let mut orig: Vec<_> = rs.ratings.iter().map(|r| (r.user, r.item, r.value)).collect();
        orig.sort_by_key(|a| (a.0, a.1));
        assert_eq!(all, orig);
        let (train2, test2) = split_train_test(&rs, 0.7, 4).unwrap();
        assert_eq!((train, test), (train2, test2));
        assert!(split_train_test(&rs, 1.0, 4).is_err());
        assert!(split_train_test(&rs, 0.0, 4).is_err());
    }

    #[test]
    fn centering() {
        let obs = SparseObservations::new(3, 2, vec![(0, 0, 1.0), (0, 1, 3.0), (1, 0, 5.0)]).unwrap();
        let means = user_means(&obs);
        assert_eq!(means, vec![2.0, 5.0, 3.0]);
        let c = center_rows(&obs, &means).unwrap();
        assert_eq!(c.values(), &[-1.0, 1.0, 0.0]);
    }
}
