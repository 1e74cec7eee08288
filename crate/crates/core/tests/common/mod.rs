//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use coinet::{IncidenceMatrix, ScenarioRecord};
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Dense 0/1 matrix, scenarios by events.
pub fn random_dense<R: Rng>(rng: &mut R, n: usize, m: usize, density: f64) -> Vec<Vec<u8>> {
    (0..n)
        .map(|_| (0..m).map(|_| rng.gen_bool(density) as u8).collect())
        .collect()
}

pub fn to_incidence(dense: &[Vec<u8>], m: usize) -> IncidenceMatrix {
    let rows = dense
        .iter()
        .map(|r| (0..m as u32).filter(|&j| r[j as usize] == 1).collect())
        .collect();
    let ids = (0..dense.len()).map(|i| format!("s{i}")).collect();
    IncidenceMatrix::from_rows(ids, rows, m).unwrap()
}

/// Textbook triple loop for XᵀX.
pub fn dense_gram(dense: &[Vec<u8>], m: usize) -> Vec<Vec<u64>> {
    let mut c = vec![vec![0u64; m]; m];
    for i in 0..m {
        for j in 0..m {
            c[i][j] = dense.iter().map(|r| (r[i] * r[j]) as u64).sum();
        }
    }
    c
}

/// Residuals straight from the closed forms, in floating point.
pub fn oracle_e(c: f64, cii: f64, cjj: f64, n: f64) -> f64 {
    let expect = cii * cjj / n;
    (c - expect) / expect.sqrt()
}

pub fn oracle_d(c: f64, cii: f64, cjj: f64, n: f64) -> f64 {
    oracle_e(c, cii, cjj, n) / ((1.0 - cii / n) * (1.0 - cjj / n)).sqrt()
}

/// Minimal reader for the `;`/`|` fixture files: (id, year, events).
pub fn read_fixture(name: &str) -> Vec<(String, Option<i64>, BTreeSet<String>)> {
    let text = std::fs::read_to_string(fixture(name)).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(';').collect();
    let year_col = header.iter().position(|h| *h == "year").unwrap();
    let subj_col = header.iter().position(|h| *h == "subjects").unwrap();
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(';').collect();
            let events = f[subj_col]
                .split('|')
                .filter(|s| !s.is_empty())
                .map(str::to_owned)
                .collect();
            (f[0].to_owned(), f[year_col].parse().ok(), events)
        })
        .collect()
}

pub fn records(rows: &[(&str, &[&str])]) -> Vec<coinet::Result<ScenarioRecord>> {
    rows.iter()
        .map(|(id, ev)| Ok(ScenarioRecord::new(*id, ev.iter().copied())))
        .collect()
}

/// Peak resident set of this process in bytes (Linux).
pub fn peak_rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}
