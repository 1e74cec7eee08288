//! Coincidence counts, residuals and adjacency.
//!
//! For events `i` and `j` observed over `N` scenarios, with frequencies
//! `c_ii`, `c_jj` and joint count `c_ij`:
//!
//! ```text
//! expected  = c_ii c_jj / N
//! e_ij      = (c_ij - expected) / sqrt(expected)
//! d_ij      = e_ij / sqrt((1 - c_ii/N) (1 - c_jj/N))
//! ```
//!
//! `d_ij` is approximately standard normal under independence. In
//! population mode an edge exists iff `d_ij > 0`; in sample mode iff the
//! one-sided upper-tail p-value of `d_ij` is below `alpha`.

use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::incidence::{EventCatalog, IncidenceMatrix};
use crate::normal::upper_tail;

/// Symmetric event × event count matrix. Only pairs `i < j` with a nonzero
/// joint count are stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoincidenceMatrix {
    n_scenarios: u64,
    diagonal: Vec<u64>,
    pairs: Vec<(u32, u32, u64)>,
}

impl CoincidenceMatrix {
    pub fn n_scenarios(&self) -> u64 {
        self.n_scenarios
    }

    pub fn n_events(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[u64] {
        &self.diagonal
    }

    /// Nonzero off-diagonal counts as `(i, j, c_ij)`, `i < j`, sorted.
    pub fn pairs(&self) -> &[(u32, u32, u64)] {
        &self.pairs
    }

    pub fn get(&self, i: u32, j: u32) -> u64 {
        match i.cmp(&j) {
            Ordering::Equal => self.diagonal[i as usize],
            Ordering::Greater => self.get(j, i),
            Ordering::Less => self
                .pairs
                .binary_search_by(|&(a, b, _)| (a, b).cmp(&(i, j)))
                .map(|k| self.pairs[k].2)
                .unwrap_or(0),
        }
    }

    /// Dense copy; only sensible for small `M`.
    pub fn to_dense(&self) -> Vec<Vec<u64>> {
        let m = self.n_events();
        let mut out = vec![vec![0u64; m]; m];
        for (i, &c) in self.diagonal.iter().enumerate() {
            out[i][i] = c;
        }
        for &(i, j, c) in &self.pairs {
            out[i as usize][j as usize] = c;
            out[j as usize][i as usize] = c;
        }
        out
    }
}

/// Count joint occurrences `C = XᵀX`.
///
/// Work is split by first event: for each event `i`, the scenarios holding
/// it are scanned and every later event `j > i` in those rows is tallied.
/// Each pair is owned by exactly one task, so the result is independent of
/// the thread count.
pub fn coincidence(x: &IncidenceMatrix) -> CoincidenceMatrix {
    let m = x.n_events();
    let columns = x.columns();
    let per_event: Vec<Vec<(u32, u32, u64)>> = (0..m as u32)
        .into_par_iter()
        .map_init(
            || (vec![0u64; m], Vec::<u32>::new()),
            |(counts, touched), i| {
                for &s in &columns[i as usize] {
                    let row = x.row(s as usize);
                    let after = row.partition_point(|&j| j <= i);
                    for &j in &row[after..] {
                        if counts[j as usize] == 0 {
                            touched.push(j);
                        }
                        counts[j as usize] += 1;
                    }
                }
                touched.sort_unstable();
                let out = touched
                    .iter()
                    .map(|&j| (i, j, std::mem::take(&mut counts[j as usize])))
                    .collect();
                touched.clear();
                out
            },
        )
        .collect();
    CoincidenceMatrix {
        n_scenarios: x.n_scenarios() as u64,
        diagonal: columns.iter().map(|c| c.len() as u64).collect(),
        pairs: per_event.into_iter().flatten().collect(),
    }
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        Err(Error::Domain("number of scenarios is zero".into()))
    } else {
        Ok(())
    }
}

/// Independence expectation `c_ii c_jj / N`.
pub fn expected_count(c_ii: u64, c_jj: u64, n: u64) -> Result<f64> {
    check_n(n)?;
    Ok((c_ii as f64 * c_jj as f64) / n as f64)
}

/// `c_ij > c_ii c_jj / N`, evaluated exactly in integers.
pub fn coincide_in_probability(c_ij: u64, c_ii: u64, c_jj: u64, n: u64) -> Result<bool> {
    check_n(n)?;
    if c_ij > c_ii.min(c_jj) || c_ii > n || c_jj > n {
        return Err(Error::Domain(format!(
            "inconsistent counts c_ij={c_ij}, c_ii={c_ii}, c_jj={c_jj}, N={n}"
        )));
    }
    Ok(c_ij as u128 * n as u128 > c_ii as u128 * c_jj as u128)
}

/// Pearson residual of the joint count.
///
/// The numerator `c_ij N - c_ii c_jj` is formed in exact integer arithmetic
/// so the sign of the residual matches [`coincide_in_probability`].
pub fn pearson_residual(c_ij: u64, c_ii: u64, c_jj: u64, n: u64) -> Result<f64> {
    check_n(n)?;
    if c_ii == 0 || c_jj == 0 {
        return Err(Error::Domain("zero expected count".into()));
    }
    let diff = c_ij as i128 * n as i128 - c_ii as i128 * c_jj as i128;
    let expected = expected_count(c_ii, c_jj, n)?;
    Ok((diff as f64 / n as f64) / expected.sqrt())
}

/// Haberman adjusted residual.
pub fn haberman_residual(e_ij: f64, c_ii: u64, c_jj: u64, n: u64) -> Result<f64> {
    check_n(n)?;
    for c in [c_ii, c_jj] {
        if c >= n {
            return Err(Error::Saturated { frequency: c });
        }
    }
    let denom = ((n - c_ii) as f64 * (n - c_jj) as f64).sqrt() / n as f64;
    Ok(e_ij / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AnalysisMode {
    /// The data is the whole population: adjacent iff `d > 0`.
    #[default]
    Population,
    /// Adjacent iff `P(Z > d) < alpha`.
    Sample { alpha: f64 },
}

impl AnalysisMode {
    pub const DEFAULT_ALPHA: f64 = 0.05;

    pub fn sample(alpha: f64) -> Result<Self> {
        let mode = AnalysisMode::Sample { alpha };
        mode.validate()?;
        Ok(mode)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AnalysisMode::Sample { alpha } if !(alpha > 0.0 && alpha < 1.0) => Err(
                Error::Parameter(format!("significance level {alpha} outside (0, 1)")),
            ),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AnalysisMode::Population => "population",
            AnalysisMode::Sample { .. } => "sample",
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match *self {
            AnalysisMode::Population => None,
            AnalysisMode::Sample { alpha } => Some(alpha),
        }
    }
}

/// Adjacency decision for one pair, with the p-value in sample mode.
///
/// With `alpha = 0.5` the sample rule coincides with the population rule.
pub fn adjacency(haberman_d: f64, mode: AnalysisMode) -> Result<(bool, Option<f64>)> {
    if !haberman_d.is_finite() {
        return Err(Error::Domain(format!("non-finite residual {haberman_d}")));
    }
    mode.validate()?;
    Ok(match mode {
        AnalysisMode::Population => (haberman_d > 0.0, None),
        AnalysisMode::Sample { alpha } => {
            let p = upper_tail(haberman_d);
            (p < alpha, Some(p))
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeStatistics {
    pub i: u32,
    pub j: u32,
    pub c: u64,
    pub expected: f64,
    pub pearson_e: f64,
    pub haberman_d: f64,
    pub p_value: Option<f64>,
    pub adjacent: bool,
}

impl EdgeStatistics {
    /// Statistics for one pair. Fails for saturated events.
    pub fn compute(i: u32, j: u32, c_ij: u64, c_ii: u64, c_jj: u64, n: u64, mode: AnalysisMode) -> Result<Self> {
        let expected = expected_count(c_ii, c_jj, n)?;
        let pearson_e = pearson_residual(c_ij, c_ii, c_jj, n)?;
        let haberman_d = haberman_residual(pearson_e, c_ii, c_jj, n)?;
        let (adjacent, p_value) = adjacency(haberman_d, mode)?;
        Ok(Self {
            i,
            j,
            c: c_ij,
            expected,
            pearson_e,
            haberman_d,
            p_value,
            adjacent,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub n_scenarios: u64,
    pub mode: AnalysisMode,
    /// One entry per pair with a nonzero joint count, ordered by `(i, j)`.
    pub edges: Vec<EdgeStatistics>,
    /// Events present in every scenario; left out of `edges`.
    pub saturated: Vec<u32>,
}

impl Analysis {
    /// Dense 0/1 adjacency matrix with a zero diagonal.
    pub fn adjacency_matrix(&self, m: usize) -> Vec<Vec<u8>> {
        let mut a = vec![vec![0u8; m]; m];
        for e in self.edges.iter().filter(|e| e.adjacent) {
            a[e.i as usize][e.j as usize] = 1;
            a[e.j as usize][e.i as usize] = 1;
        }
        a
    }
}

/// Edge statistics for every co-occurring pair.
///
/// Pairs that never co-occur have a negative residual and are not
/// materialized. Saturated events are skipped and listed in the result.
pub fn analyze(x: &IncidenceMatrix, mode: AnalysisMode) -> Result<Analysis> {
    mode.validate()?;
    analyze_counts(&coincidence(x), mode)
}

/// Like [`analyze`] on a precomputed coincidence matrix.
pub fn analyze_counts(c: &CoincidenceMatrix, mode: AnalysisMode) -> Result<Analysis> {
    mode.validate()?;
    let n = c.n_scenarios();
    let diag = c.diagonal();
    let saturated: Vec<u32> = (0..diag.len() as u32)
        .filter(|&i| n > 0 && diag[i as usize] == n)
        .collect();
    if !saturated.is_empty() {
        log::warn!(
            "{} event(s) occur in every scenario and are excluded from edges",
            saturated.len()
        );
    }
    let edges = c
        .pairs()
        .par_iter()
        .filter(|&&(i, j, _)| diag[i as usize] < n && diag[j as usize] < n)
        .map(|&(i, j, cij)| EdgeStatistics::compute(i, j, cij, diag[i as usize], diag[j as usize], n, mode))
        .collect::<Result<Vec<_>>>()?;
    Ok(Analysis {
        n_scenarios: n,
        mode,
        edges,
        saturated,
    })
}

/// Keep adjacent edges with `d >= min_d`. Edges with `d <= 0` are always
/// dropped.
pub fn prune_edges(edges: &[EdgeStatistics], min_d: f64) -> Result<Vec<EdgeStatistics>> {
    if min_d.is_nan() || min_d < 0.0 {
        return Err(Error::Parameter(format!("min_d {min_d} must be >= 0")));
    }
    Ok(edges
        .iter()
        .filter(|e| e.adjacent && e.haberman_d > 0.0 && e.haberman_d >= min_d)
        .cloned()
        .collect())
}

/// Descending `d`, then by label pair.
pub fn sort_for_report(edges: &mut [EdgeStatistics], catalog: &EventCatalog) {
    edges.sort_by(|a, b| {
        b.haberman_d
            .total_cmp(&a.haberman_d)
            .then_with(|| catalog.label(a.i).cmp(catalog.label(b.i)))
            .then_with(|| catalog.label(a.j).cmp(catalog.label(b.j)))
    });
}

/// Tab-separated edge table with columns
/// `i_label j_label c_ij expected e d p adjacent`, sorted by descending `d`.
/// A missing p-value is written as `NA`.
pub fn write_edge_table<W: Write>(
    mut out: W,
    edges: &[EdgeStatistics],
    catalog: &EventCatalog,
) -> Result<()> {
    let mut sorted = edges.to_vec();
    sort_for_report(&mut sorted, catalog);
    writeln!(out, "i_label\tj_label\tc_ij\texpected\te\td\tp\tadjacent")?;
    for e in &sorted {
        let p = e.p_value.map_or_else(|| "NA".to_owned(), |p| p.to_string());
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            crate::incidence::escape_field(catalog.label(e.i)),
            crate::incidence::escape_field(catalog.label(e.j)),
            e.c,
            e.expected,
            e.pearson_e,
            e.haberman_d,
            p,
            e.adjacent
        )?;
    }
    Ok(())
}
