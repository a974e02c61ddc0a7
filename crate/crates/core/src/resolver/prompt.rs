//! Prompt construction and completion normalization.

use super::ResolverError;

/// Few-shot collision context, shipped exactly as published.
pub const COLLISION_CONTEXT: &str = include_str!("../../data/prompts/collision_context.txt");
/// Unity holodeck context, shipped as published.
pub const HOLODECK_CONTEXT: &str = include_str!("../../data/prompts/holodeck_context.txt");
/// Unity hand-joint tool context, shipped as published.
pub const HAND_TOOLS_CONTEXT: &str = include_str!("../../data/prompts/hand_tools_context.txt");
/// The holodeck context rewritten for the scene-command language.
pub const DSL_CONTEXT: &str = include_str!("../../data/prompts/dsl_context.txt");

const MAX_LABEL_WORDS: usize = 5;
const ARTICLES: [&str; 3] = ["a", "an", "the"];

pub fn collision_query(ball: &str, paddle: &str) -> String {
    format!("When {ball} collides with {paddle}, it spawns")
}

pub fn build_collision_prompt(ball: &str, paddle: &str) -> Result<String, ResolverError> {
    let (ball, paddle) = (ball.trim(), paddle.trim());
    if ball.is_empty() || paddle.is_empty() {
        return Err(ResolverError::EmptyLabel);
    }
    Ok(format!("{COLLISION_CONTEXT}{}", collision_query(ball, paddle)))
}

/// Recover `(ball, paddle)` from the last line of a collision prompt.
pub fn parse_collision_query(prompt: &str) -> Option<(String, String)> {
    let last = prompt.lines().rev().find(|l| !l.trim().is_empty())?.trim();
    let body = last.strip_prefix("When ")?.strip_suffix(", it spawns")?;
    let (ball, paddle) = body.rsplit_once(" collides with ")?;
    Some((ball.trim().to_owned(), paddle.trim().to_owned()))
}

pub fn build_codegen_prompt(instruction: &str) -> String {
    let one_line = instruction.split_whitespace().collect::<Vec<_>>().join(" ");
    format!("{DSL_CONTEXT}# {one_line}\n")
}

/// The instruction embedded in a codegen prompt.
pub fn parse_codegen_instruction(prompt: &str) -> Option<String> {
    let last = prompt.lines().rev().find(|l| !l.trim().is_empty())?;
    last.trim().strip_prefix('#').map(|s| s.trim().to_owned())
}

pub fn build_elaboration_prompt(user_prompt: &str) -> String {
    format!(
        "The following is a request for a scene in an empty 10x10x10 room. Rewrite it as a detailed step-by-step \
         instruction naming every object to add, where to place it and how large it is.\n\nRequest: {}\n\nInstructions:",
        user_prompt.trim()
    )
}

pub fn parse_elaboration_request(prompt: &str) -> Option<String> {
    prompt
        .lines()
        .find_map(|l| l.strip_prefix("Request: "))
        .map(|s| s.trim().to_owned())
}

fn normalize_once(raw: &str) -> String {
    let text = raw.trim_start();
    let cut = text.find(['.', '!', '?', '\n', '\r']).unwrap_or(text.len());
    let mut words: Vec<String> = text[..cut]
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect();
    while words.first().is_some_and(|w| ARTICLES.contains(&w.as_str())) {
        words.remove(0);
    }
    if words.len() > 1 && words.last().is_some_and(|w| w == "object") {
        words.pop();
    }
    words.truncate(MAX_LABEL_WORDS);
    words.join(" ")
}

/// Turn a raw completion into an object label: first clause, lowercase, no
/// leading article or trailing "object", at most five words.
pub fn parse_completion(raw: &str) -> Result<String, ResolverError> {
    let mut label = normalize_once(raw);
    for _ in 0..8 {
        let next = normalize_once(&label);
        if next == label {
            break;
        }
        label = next;
    }
    if label.is_empty() {
        Err(ResolverError::EmptyCompletion)
    } else {
        Ok(label)
    }
}

/// Normalize a user-supplied object name the same way completions are.
pub fn normalize_label(raw: &str) -> Option<String> {
    parse_completion(raw).ok()
}
