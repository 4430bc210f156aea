//! Generation, scoring and regeneration prompts.
//!
//! Each prompt has an instruction, an input segment and an output indicator.
//! The template text lives in `prompts/<version>/` so runs can pin a revision.

use std::fmt::Write as _;

use super::{ScoreReport, Task};

pub const PROMPT_VERSION: &str = "v1";

const QAG_GENERATE: &str = include_str!("../../prompts/v1/qag_generate.txt");
const EE_GENERATE: &str = include_str!("../../prompts/v1/ee_generate.txt");
const SCORE: &str = include_str!("../../prompts/v1/score.txt");
const QAG_REGENERATE: &str = include_str!("../../prompts/v1/qag_regenerate.txt");
const EE_REGENERATE: &str = include_str!("../../prompts/v1/ee_regenerate.txt");

/// Single-pass `{{name}}` substitution; substituted values are never rescanned.
fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + vars.iter().map(|(_, v)| v.len()).sum::<usize>());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        match after.find("}}") {
            Some(end) => {
                let name = &after[..end];
                match vars.iter().find(|(k, _)| *k == name) {
                    Some((_, v)) => out.push_str(v),
                    None => {
                        out.push_str("{{");
                        out.push_str(name);
                        out.push_str("}}");
                    }
                }
                rest = &after[end + 2..];
            }
            None => {
                out.push_str(&rest[start..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

pub fn build_qag_prompt(document_text: &str) -> String {
    render(QAG_GENERATE, &[("document", document_text)])
}

pub fn build_ee_prompt(document_text: &str) -> String {
    render(EE_GENERATE, &[("document", document_text)])
}

pub fn build_generate_prompt(task: Task, document_text: &str) -> String {
    match task {
        Task::Qag => build_qag_prompt(document_text),
        Task::Ee => build_ee_prompt(document_text),
    }
}

fn artifact_name(task: Task) -> &'static str {
    match task {
        Task::Qag => "question-answer pairs",
        Task::Ee => "events",
    }
}

/// The evaluator sees the original passage so it can judge relevance.
pub fn build_score_prompt(generated_raw: &str, original_text: &str, task: Task) -> String {
    render(
        SCORE,
        &[
            ("artifact", artifact_name(task)),
            ("document", original_text),
            ("generated", generated_raw),
        ],
    )
}

pub fn render_deductions(report: &ScoreReport) -> String {
    if report.deductions.is_empty() {
        return format!("(none; total score {})", report.total_score);
    }
    let mut out = format!("Total score: {}\n", report.total_score);
    for d in &report.deductions {
        let _ = writeln!(
            out,
            "- {} (-{}); related content: {}",
            d.deduction_reason, d.deduction_score, d.related_content
        );
    }
    out.truncate(out.trim_end().len());
    out
}

pub fn build_regen_prompt(original_text: &str, generated_raw: &str, report: &ScoreReport, task: Task) -> String {
    let template = match task {
        Task::Qag => QAG_REGENERATE,
        Task::Ee => EE_REGENERATE,
    };
    let deductions = render_deductions(report);
    render(
        template,
        &[
            ("document", original_text),
            ("generated", generated_raw),
            ("deductions", &deductions),
        ],
    )
}
