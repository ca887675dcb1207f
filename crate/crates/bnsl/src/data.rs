//! Dataset loading and sufficient statistics.
//!
//! The input format is deliberately strict: UTF-8 CSV, comma separated,
//! header row required, every data cell a literal `0` or `1`. Anything else
//! is a hard error naming the offending row and column, since downstream
//! scoring assumes complete binary data.

use crate::error::{Error, Result};
use crate::model::{CountVector, Dataset, ParentSet};
use std::fs;
use std::path::Path;

/// Loads a binary CSV dataset from disk. LF and CRLF line endings are both
/// accepted.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_csv(&text)
}

/// Parses CSV text into a [`Dataset`]. Row numbers in errors are 1-based and
/// count the header as row 1.
pub fn parse_csv(text: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "-", "empty input"))?;
    let names: Vec<String> = header
        .trim_end_matches('\r')
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    if names.iter().any(|s| s.is_empty()) {
        return Err(Error::parse(1, "-", "empty variable name in header"));
    }
    for (i, a) in names.iter().enumerate() {
        if names[..i].contains(a) {
            return Err(Error::parse(1, a.clone(), "duplicate variable name"));
        }
    }
    let n = names.len();
    if n > 64 {
        return Err(Error::parse(
            1,
            "-",
            format!("{n} variables exceed the 64-variable limit"),
        ));
    }

    let mut rows: Vec<u64> = Vec::new();
    for (idx, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let row_no = idx + 1;
        let mut bits = 0u64;
        let mut cells = 0usize;
        for (v, cell) in line.split(',').enumerate() {
            if v >= n {
                return Err(Error::parse(
                    row_no,
                    format!("#{}", v + 1),
                    format!("row has more than {n} fields"),
                ));
            }
            match cell.trim() {
                "0" => {}
                "1" => bits |= 1 << v,
                other => {
                    return Err(Error::parse(
                        row_no,
                        names[v].clone(),
                        format!("expected 0 or 1, got {other:?}"),
                    ))
                }
            }
            cells += 1;
        }
        if cells != n {
            return Err(Error::parse(
                row_no,
                names[cells].clone(),
                format!("row has {cells} fields, expected {n}"),
            ));
        }
        rows.push(bits);
    }
    if rows.is_empty() {
        return Err(Error::parse(1, "-", "no instances"));
    }
    Ok(Dataset::from_packed(names, rows))
}

/// Counts `n_jk`: the number of rows where the child equals `k` and the
/// parents jointly realize configuration `j`. One pass over the data per
/// query; pure, so repeated calls agree bit-exactly.
pub fn counts(dataset: &Dataset, child: usize, parents: ParentSet) -> Result<CountVector> {
    let n = dataset.num_vars();
    if child >= n {
        return Err(Error::invalid(format!(
            "child index {child} out of range for {n} variables"
        )));
    }
    if let Some(v) = parents.members().into_iter().find(|&v| v >= n) {
        return Err(Error::invalid(format!(
            "parent index {v} out of range for {n} variables"
        )));
    }
    if parents.contains(child) {
        return Err(Error::invalid(format!(
            "child {child} cannot be its own parent"
        )));
    }
    let mut table = vec![[0u64; 2]; parents.num_configs()];
    for &bits in dataset.packed_rows() {
        let j = parents.config_of_row(bits);
        let k = ((bits >> child) & 1) as usize;
        table[j][k] += 1;
    }
    Ok(CountVector::new(child, parents, table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_simple_csv() {
        let ds = parse_csv("A,B\n0,1\n1,1\n").unwrap();
        assert_eq!(ds.num_vars(), 2);
        assert_eq!(ds.num_rows(), 2);
        assert_eq!(ds.names(), &["A".to_string(), "B".to_string()]);
    }

    #[test]
    fn accepts_crlf() {
        let ds = parse_csv("A,B\r\n0,0\r\n1,0\r\n").unwrap();
        assert_eq!(ds.num_rows(), 2);
        assert_eq!(ds.value(1, 0), 1);
    }

    #[test]
    fn rejects_non_binary_cell_with_position() {
        // Header is row 1, so the bad cell sits at row 3, column B.
        let err = parse_csv("A,B\n0,0\n0,2\n").unwrap_err();
        match err {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "B");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_header_only() {
        let err = parse_csv("A,B\n").unwrap_err();
        assert!(err.to_string().contains("no instances"));
    }

    #[test]
    fn rejects_ragged_and_duplicate() {
        assert!(parse_csv("A,B\n0\n").is_err());
        assert!(parse_csv("A,B\n0,1,1\n").is_err());
        assert!(parse_csv("A,A\n0,0\n").is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        match load_csv("/nonexistent/definitely-not-here.csv") {
            Err(Error::Io { .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn counts_by_hand() {
        // rows {(A=0,B=0),(A=1,B=1),(A=1,B=1)}, child B, parents {A}
        let ds = parse_csv("A,B\n0,0\n1,1\n1,1\n").unwrap();
        let cv = counts(&ds, 1, ParentSet::from_members(&[0])).unwrap();
        assert_eq!(cv.count(0, 0), 1);
        assert_eq!(cv.count(0, 1), 0);
        assert_eq!(cv.count(1, 0), 0);
        assert_eq!(cv.count(1, 1), 2);
        assert_eq!(cv.total(), 3);
    }

    #[test]
    fn empty_parent_set_gives_marginals() {
        let ds = parse_csv("A,B\n0,0\n1,1\n1,1\n0,1\n").unwrap();
        let cv = counts(&ds, 1, ParentSet::EMPTY).unwrap();
        assert_eq!(cv.num_configs(), 1);
        assert_eq!(cv.count(0, 0), 1);
        assert_eq!(cv.count(0, 1), 3);
    }

    #[test]
    fn child_in_parents_rejected() {
        let ds = parse_csv("A,B\n0,0\n").unwrap();
        assert!(counts(&ds, 0, ParentSet::from_members(&[0])).is_err());
    }

    /// Naive per-row oracle for n_jk, decoding each parent individually.
    fn counts_oracle(ds: &Dataset, child: usize, parents: ParentSet) -> Vec<[u64; 2]> {
        let members = parents.members();
        let mut table = vec![[0u64; 2]; parents.num_configs()];
        for r in 0..ds.num_rows() {
            let mut j = 0usize;
            for (p, &v) in members.iter().enumerate() {
                j |= (ds.value(r, v) as usize) << p;
            }
            table[j][ds.value(r, child) as usize] += 1;
        }
        table
    }

    proptest! {
        #[test]
        fn counts_match_naive_oracle(
            rows in proptest::collection::vec(proptest::collection::vec(0u8..2, 4), 1..50),
        ) {
            let names = (0..4).map(|i| format!("V{i}")).collect();
            let ds = Dataset::from_rows(names, &rows).unwrap();
            for child in 0..4usize {
                let others: Vec<usize> = (0..4).filter(|&v| v != child).collect();
                for mask in 0u64..(1 << others.len()) {
                    let members: Vec<usize> = others
                        .iter()
                        .enumerate()
                        .filter(|(p, _)| (mask >> p) & 1 == 1)
                        .map(|(_, &v)| v)
                        .collect();
                    let ps = ParentSet::from_members(&members);
                    let cv = counts(&ds, child, ps).unwrap();
                    let oracle = counts_oracle(&ds, child, ps);
                    for j in 0..ps.num_configs() {
                        prop_assert_eq!(cv.count(j, 0), oracle[j][0]);
                        prop_assert_eq!(cv.count(j, 1), oracle[j][1]);
                    }
                    prop_assert_eq!(cv.total(), ds.num_rows() as u64);
                }
            }
        }

        #[test]
        fn config_indexing_round_trips(mask in 0u64..(1u64 << 20)) {
            let ps = ParentSet::from_mask(mask);
            if ps.len() <= 20 {
                for j in [0usize, 1, ps.num_configs() / 2, ps.num_configs() - 1] {
                    let bits = ps.row_of_config(j);
                    prop_assert_eq!(ps.config_of_row(bits), j);
                }
            }
        }
    }
}
