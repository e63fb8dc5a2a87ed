//! AUROC, forgetting and per-sequence summaries.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::{Error, Result};

/// Evaluation snapshot taken right after learning the task at `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskRecord {
    pub task_id: String,
    /// 1-based position in the sequence.
    pub step: usize,
    /// `accuracies[i]` is the accuracy on the `i`-th task of the sequence
    /// (0-based) after learning this one; length equals `step`.
    pub accuracies: Vec<f64>,
    /// AUROC of every seen task at this step, same indexing as `accuracies`.
    pub aurocs: Vec<f64>,
    /// AUROC of the current task when first learned.
    pub auroc: f64,
    pub chosen_expert: Option<usize>,
}

/// Which AUROC of each task enters A-AUROC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AurocTiming {
    /// Measured right after the task is learned.
    #[default]
    Diagonal,
    /// Measured after the whole sequence.
    Final,
}

/// Rank-based AUROC (Mann-Whitney U / (n_pos * n_neg)); ties count one half.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape("auroc", &[labels.len()], &[scores.len()]));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("auroc scores"));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.iter().filter(|&&l| l == 0).count();
    if positives + negatives != labels.len() {
        return Err(Error::invalid("auroc labels must be 0 or 1"));
    }
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass { positives, negatives });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("no NaN"));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j share their average
        let avg = (i + 1 + j) as f64 / 2.0;
        let pos_in_group = order[i..j].iter().filter(|&&k| labels[k] == 1).count();
        rank_sum_pos += avg * pos_in_group as f64;
        i = j;
    }
    let p = positives as f64;
    let u = rank_sum_pos - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}

/// Fraction of `probs` on the correct side of 0.5.
pub fn accuracy(probs: &[f64], labels: &[u8]) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::shape("accuracy", &[labels.len()], &[probs.len()]));
    }
    if probs.is_empty() {
        return Err(Error::Empty("accuracy inputs"));
    }
    let correct = probs
        .iter()
        .zip(labels)
        .filter(|(&p, &y)| (p >= 0.5) == (y == 1))
        .count();
    Ok(correct as f64 / probs.len() as f64)
}

/// `max(history) - last(history)`.
pub fn forgetting(history: &[f64]) -> Result<f64> {
    let last = *history.last().ok_or(Error::Empty("accuracy history"))?;
    let max = history.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(max - last)
}

/// Mean forgetting over all tasks but the newest, from lower-triangular
/// accuracy rows (`rows[k][i]` = accuracy on task `i` after learning task `k`).
pub fn average_forgetting(rows: &[Vec<f64>]) -> Result<f64> {
    let t = rows.len();
    if t < 2 {
        return Err(Error::InsufficientData(format!("average forgetting needs t >= 2, got {t}")));
    }
    for (k, row) in rows.iter().enumerate() {
        if row.len() != k + 1 {
            return Err(Error::shape("accuracy row", &[k + 1], &[row.len()]));
        }
    }
    let mut total = 0.0;
    for i in 0..t - 1 {
        let history: Vec<f64> = rows[i..].iter().map(|r| r[i]).collect();
        total += forgetting(&history)?;
    }
    Ok(total / (t - 1) as f64)
}

pub fn accuracy_rows(records: &[TaskRecord]) -> Vec<Vec<f64>> {
    records.iter().map(|r| r.accuracies.clone()).collect()
}

pub fn average_auroc(records: &[TaskRecord]) -> Result<f64> {
    average_auroc_with(records, AurocTiming::Diagonal)
}

pub fn average_auroc_with(records: &[TaskRecord], timing: AurocTiming) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Empty("task records"));
    }
    let values: Vec<f64> = match timing {
        AurocTiming::Diagonal => records.iter().map(|r| r.auroc).collect(),
        AurocTiming::Final => records.last().map(|r| r.aurocs.clone()).unwrap_or_default(),
    };
    if values.is_empty() {
        return Err(Error::Empty("auroc values"));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSummary {
    pub sequence_id: String,
    pub average_forgetting: f64,
    pub average_auroc: f64,
}

pub fn summarize(sequence_id: &str, records: &[TaskRecord], timing: AurocTiming) -> Result<SequenceSummary> {
    Ok(SequenceSummary {
        sequence_id: sequence_id.into(),
        average_forgetting: average_forgetting(&accuracy_rows(records))?,
        average_auroc: average_auroc_with(records, timing)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub sequence_id: String,
    /// `(AF, A-AUROC)` per mode, in the table's mode order.
    pub cells: Vec<(f64, f64)>,
    /// Modes achieving the lowest AF in this row.
    pub best_forgetting: Vec<usize>,
    /// Modes achieving the highest A-AUROC in this row.
    pub best_auroc: Vec<usize>,
}

/// Per-sequence comparison of several modes (AF and A-AUROC columns per mode).
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub modes: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

pub fn build_comparison(tables: &[(String, Vec<SequenceSummary>)]) -> Result<ComparisonTable> {
    let (_, first) = tables.first().ok_or(Error::Empty("comparison tables"))?;
    for (mode, t) in tables {
        let aligned = t.len() == first.len() && t.iter().zip(first).all(|(a, b)| a.sequence_id == b.sequence_id);
        if !aligned {
            return Err(Error::invalid(format!("sequence ids of mode {mode} do not align")));
        }
    }
    let rows = first
        .iter()
        .enumerate()
        .map(|(r, s)| {
            let cells: Vec<(f64, f64)> = tables
                .iter()
                .map(|(_, t)| (t[r].average_forgetting, t[r].average_auroc))
                .collect();
            let min_af = cells.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
            let max_auc = cells.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
            ComparisonRow {
                sequence_id: s.sequence_id.clone(),
                best_forgetting: (0..cells.len()).filter(|&i| cells[i].0 == min_af).collect(),
                best_auroc: (0..cells.len()).filter(|&i| cells[i].1 == max_auc).collect(),
                cells,
            }
        })
        .collect();
    Ok(ComparisonTable {
        modes: tables.iter().map(|(m, _)| m.clone()).collect(),
        rows,
    })
}

impl ComparisonTable {
    /// Number of metric cells per row (two per mode).
    pub fn metric_columns(&self) -> usize {
        2 * self.modes.len()
    }

    /// CSV with `sequence`, then `<mode>_af,<mode>_a_auroc` per mode. Values
    /// use six decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sequence");
        for m in &self.modes {
            let _ = write!(out, ",{m}_af,{m}_a_auroc");
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.sequence_id);
            for (af, auc) in &row.cells {
                let _ = write!(out, ",{}", format_metric(*af));
                let _ = write!(out, ",{}", format_metric(*auc));
            }
            out.push('\n');
        }
        out
    }
}

/// Fixed six-decimal rendering used by every exported metric.
pub fn format_metric(v: f64) -> String {
    format!("{v:.6}")
}
