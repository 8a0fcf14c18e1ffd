// SPDX-License-Identifier: MIT OR Apache-2.0

//! Statement templates and context perturbations.

mod render;
mod templates;

pub use render::{
    read_prompts, render, render_all, select_few_shot, statement_question, write_prompts, FewShotMode,
    PerturbationKind, RenderedPrompt, FEW_SHOT_COUNT, RANDOM_SENTENCE,
};
pub use templates::{TemplateEntry, TemplateId, TemplateSet};
