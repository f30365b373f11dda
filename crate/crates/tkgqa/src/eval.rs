//! Batch evaluation: run a JSONL question file and report Hits@1 with a
//! per-type breakdown. A question scores a hit when its normalized top
//! answer matches any gold answer; per-question failures count as misses.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::controller::{Engine, SharedPool};
use crate::reasoner::{RawBackend, Reasoner};
use crate::trace::build_trace;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("questions file line {line}: {message}")]
    BadQuestion { line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One question: `{"id": .., "question": .., "answers": [..], "type": ..}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalQuestion {
    pub id: String,
    pub question: String,
    pub answers: Vec<String>,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub qtype: Option<String>,
}

pub fn load_questions<R: BufRead>(source: R) -> Result<Vec<EvalQuestion>, EvalError> {
    let mut out = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let q: EvalQuestion = serde_json::from_str(&line).map_err(|e| EvalError::BadQuestion {
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(q);
    }
    Ok(out)
}

/// Answer normalization for exact matching: lowercase, trim, underscores
/// and runs of whitespace collapse to single spaces.
pub fn normalize_answer(text: &str) -> String {
    text.to_lowercase()
        .replace('_', " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Serialize)]
pub struct QuestionOutcome {
    pub id: String,
    pub question: String,
    pub gold: Vec<String>,
    pub qtype: String,
    pub predicted: Option<String>,
    pub hit: bool,
    pub error: Option<String>,
    /// Trace document (timing stripped) for this run.
    pub trace: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub questions: usize,
    pub hits: usize,
    pub hits_at_1: f64,
    pub per_type: BTreeMap<String, TypeStats>,
    pub outcomes: Vec<QuestionOutcome>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TypeStats {
    pub questions: usize,
    pub hits: usize,
}

impl EvalReport {
    /// The printable report: one line per question plus the summary, no
    /// timing content, so consecutive runs are byte-identical.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for o in &self.outcomes {
            let mark = if o.hit { "HIT " } else { "MISS" };
            let predicted = o.predicted.as_deref().unwrap_or("-");
            out.push_str(&format!(
                "{mark} [{}] {} -> {} (gold: {})\n",
                o.id,
                o.question,
                predicted,
                o.gold.join(" | ")
            ));
            if let Some(e) = &o.error {
                out.push_str(&format!("      error: {e}\n"));
            }
        }
        out.push_str(&format!(
            "Hits@1: {:.4} ({}/{})\n",
            self.hits_at_1, self.hits, self.questions
        ));
        for (t, s) in &self.per_type {
            out.push_str(&format!(
                "  {t}: {:.4} ({}/{})\n",
                if s.questions == 0 { 0.0 } else { s.hits as f64 / s.questions as f64 },
                s.hits,
                s.questions
            ));
        }
        out
    }
}

/// Run every question against the engine. `jobs` bounds worker threads;
/// results aggregate in question order regardless of completion order, and
/// each question gets a fresh reasoner over the shared backend so call
/// logs never interleave.
pub fn run_eval(
    engine: &Engine,
    backend: Arc<dyn RawBackend>,
    pool: &SharedPool,
    questions: &[EvalQuestion],
    jobs: usize,
) -> EvalReport {
    let jobs = jobs.max(1);
    let mut outcomes: Vec<Option<QuestionOutcome>> = vec![None; questions.len()];
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<QuestionOutcome>>> =
        (0..questions.len()).map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(questions.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= questions.len() {
                    break;
                }
                let outcome = run_one(engine, backend.clone(), pool, &questions[i]);
                *slots[i].lock().expect("slot lock") = Some(outcome);
            });
        }
    });
    for (i, slot) in slots.into_iter().enumerate() {
        outcomes[i] = slot.into_inner().expect("slot lock");
    }

    let mut report = EvalReport {
        questions: questions.len(),
        hits: 0,
        hits_at_1: 0.0,
        per_type: BTreeMap::new(),
        outcomes: outcomes.into_iter().flatten().collect(),
    };
    for o in &report.outcomes {
        let stats = report.per_type.entry(o.qtype.clone()).or_default();
        stats.questions += 1;
        if o.hit {
            stats.hits += 1;
            report.hits += 1;
        }
    }
    report.hits_at_1 = if report.questions == 0 {
        0.0
    } else {
        report.hits as f64 / report.questions as f64
    };
    report
}

fn run_one(
    engine: &Engine,
    backend: Arc<dyn RawBackend>,
    pool: &SharedPool,
    q: &EvalQuestion,
) -> QuestionOutcome {
    let reasoner = Reasoner::new(backend);
    let ablations = engine.config().ablations;
    match engine.answer_question(&q.question, pool, &reasoner) {
        Ok((answer, trajectory)) => {
            let predicted = answer.top();
            let hit = predicted.as_deref().is_some_and(|p| {
                let norm = normalize_answer(p);
                q.answers.iter().any(|g| normalize_answer(g) == norm)
            });
            let qtype = q
                .qtype
                .clone()
                .unwrap_or_else(|| trajectory.temporal_type.label().to_string());
            QuestionOutcome {
                id: q.id.clone(),
                question: q.question.clone(),
                gold: q.answers.clone(),
                qtype,
                predicted,
                hit,
                error: None,
                trace: build_trace(&trajectory, reasoner.backend_name(), ablations, None),
            }
        }
        Err(e) => QuestionOutcome {
            id: q.id.clone(),
            question: q.question.clone(),
            gold: q.answers.clone(),
            qtype: q.qtype.clone().unwrap_or_else(|| "unknown".to_string()),
            predicted: None,
            hit: false,
            error: Some(e.to_string()),
            trace: Value::Null,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_rules() {
        assert_eq!(normalize_answer("  Barack_Obama "), "barack obama");
        assert_eq!(normalize_answer("JAPAN"), "japan");
        assert_eq!(normalize_answer("New   York"), "new york");
    }

    #[test]
    fn questions_file_parses_and_reports_lines() {
        let good = "{\"id\": \"q1\", \"question\": \"Q?\", \"answers\": [\"A\"]}\n";
        assert_eq!(load_questions(std::io::Cursor::new(good)).unwrap().len(), 1);
        let bad = "{\"id\": \"q1\"}\n";
        assert!(matches!(
            load_questions(std::io::Cursor::new(bad)),
            Err(EvalError::BadQuestion { line: 1, .. })
        ));
    }
}
