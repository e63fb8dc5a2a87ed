//! JSON-lines events and the CSV summaries derived from them.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use tame_core::engine::{Mode, StepOutcome};
use tame_core::metrics::{build_comparison, format_metric, summarize, AurocTiming, ComparisonTable, SequenceSummary, TaskRecord};

use crate::error::{Error, Result};

/// Identifies one (seed, sequence, mode, metric) run.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId {
    pub seed: u64,
    pub sequence_id: String,
    pub mode: String,
    /// `None` for Shared-Bottom, which does not route.
    pub metric: Option<String>,
}

impl CellId {
    pub fn file_stem(&self) -> String {
        format!(
            "seed{}-{}-{}-{}",
            self.seed,
            self.sequence_id,
            self.mode,
            self.metric.as_deref().unwrap_or("none")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEvent {
    #[serde(flatten)]
    pub cell: CellId,
    pub step: usize,
    pub task_id: String,
    pub chosen_expert: Option<usize>,
    pub scores: Vec<f64>,
    pub current_rows: usize,
    pub replay_rows: usize,
    pub attention_weights: Vec<f64>,
    /// Accuracy on each seen task, oldest first.
    pub accuracies: Vec<f64>,
    pub aurocs: Vec<f64>,
    pub epoch_losses: Vec<f64>,
    pub evicted: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEvent {
    #[serde(flatten)]
    pub cell: CellId,
    pub auroc_timing: String,
    pub average_forgetting: f64,
    pub average_auroc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Step(StepEvent),
    Summary(SummaryEvent),
}

pub fn timing_name(t: AurocTiming) -> &'static str {
    match t {
        AurocTiming::Diagonal => "diagonal",
        AurocTiming::Final => "final",
    }
}

pub fn step_event(cell: &CellId, out: &StepOutcome) -> StepEvent {
    StepEvent {
        cell: cell.clone(),
        step: out.record.step,
        task_id: out.record.task_id.clone(),
        chosen_expert: out.record.chosen_expert,
        scores: out.scores.clone(),
        current_rows: out.current_rows,
        replay_rows: out.replay_rows,
        attention_weights: out.attention_weights.clone(),
        accuracies: out.record.accuracies.clone(),
        aurocs: out.record.aurocs.clone(),
        epoch_losses: out.epoch_losses.clone(),
        evicted: out.evicted.clone(),
    }
}

/// Rebuilds the per-step records carried by step events.
pub fn records_from_events(steps: &[&StepEvent]) -> Vec<TaskRecord> {
    steps
        .iter()
        .map(|e| TaskRecord {
            task_id: e.task_id.clone(),
            step: e.step,
            accuracies: e.accuracies.clone(),
            aurocs: e.aurocs.clone(),
            auroc: e.aurocs[e.step - 1],
            chosen_expert: e.chosen_expert,
        })
        .collect()
}

/// Events of one finished cell: its steps followed by the terminal summary.
pub fn cell_events(cell: &CellId, outcomes: &[StepOutcome], timing: AurocTiming) -> Result<Vec<Event>> {
    let steps: Vec<StepEvent> = outcomes.iter().map(|o| step_event(cell, o)).collect();
    let summary = summarize(&cell.sequence_id, &records_from_events(&steps.iter().collect::<Vec<_>>()), timing)?;
    let mut events: Vec<Event> = steps.into_iter().map(Event::Step).collect();
    events.push(Event::Summary(SummaryEvent {
        cell: cell.clone(),
        auroc_timing: timing_name(timing).into(),
        average_forgetting: summary.average_forgetting,
        average_auroc: summary.average_auroc,
    }));
    Ok(events)
}

pub fn to_jsonl(events: &[Event]) -> String {
    events
        .iter()
        .map(|e| serde_json::to_string(e).expect("events serialize") + "\n")
        .collect()
}

pub fn parse_jsonl(text: &str) -> Result<Vec<Event>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Runtime(format!("event line {}: {e}", i + 1))))
        .collect()
}

/// Row label of a sequence; seeds are appended when a run covers several.
pub fn row_label(sequence_id: &str, seed: u64, multi_seed: bool) -> String {
    if multi_seed {
        format!("{sequence_id}@seed{seed}")
    } else {
        sequence_id.to_string()
    }
}

/// Table-layout comparison for one metric: one row per (seed, sequence), an
/// (AF, A-AUROC) cell pair per mode. Shared-Bottom summaries (metric-free)
/// appear in every metric's table.
pub fn comparison_for_metric(events: &[Event], modes: &[Mode], metric: &str, multi_seed: bool) -> Result<ComparisonTable> {
    let summaries: Vec<&SummaryEvent> = events
        .iter()
        .filter_map(|e| match e {
            Event::Summary(s) => Some(s),
            _ => None,
        })
        .collect();
    let columns = modes
        .iter()
        .map(|m| {
            let rows: Vec<SequenceSummary> = summaries
                .iter()
                .filter(|s| s.cell.mode == m.name() && (s.cell.metric.is_none() || s.cell.metric.as_deref() == Some(metric)))
                .map(|s| SequenceSummary {
                    sequence_id: row_label(&s.cell.sequence_id, s.cell.seed, multi_seed),
                    average_forgetting: s.average_forgetting,
                    average_auroc: s.average_auroc,
                })
                .collect();
            (m.name().to_string(), rows)
        })
        .collect::<Vec<_>>();
    Ok(build_comparison(&columns)?)
}

/// Accuracy-vs-step curves: one row per (cell, step, evaluated task).
pub fn curves_csv(events: &[Event], metric: &str, multi_seed: bool) -> String {
    let mut out = String::from("sequence,mode,step,task,task_id,accuracy,auroc\n");
    let steps: Vec<&StepEvent> = events
        .iter()
        .filter_map(|e| match e {
            Event::Step(s) if s.cell.metric.is_none() || s.cell.metric.as_deref() == Some(metric) => Some(s),
            _ => None,
        })
        .collect();
    for s in &steps {
        for (j, (acc, auc)) in s.accuracies.iter().zip(&s.aurocs).enumerate() {
            let task_id = steps
                .iter()
                .find(|o| o.cell == s.cell && o.step == j + 1)
                .map_or("", |o| o.task_id.as_str());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                row_label(&s.cell.sequence_id, s.cell.seed, multi_seed),
                s.cell.mode,
                s.step,
                j + 1,
                task_id,
                format_metric(*acc),
                format_metric(*auc)
            );
        }
    }
    out
}
