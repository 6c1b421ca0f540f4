//! Model-driven mutation: the model returns SEARCH/REPLACE edits against the
//! parent's serialized text.

use std::sync::Arc;

use civitas_core::constitution::{parse_constitution, serialize_constitution, validate_constitution};
use civitas_core::evolution::{Mutation, Mutator};
use civitas_core::rng::UniformSource;
use civitas_core::Constitution;

use crate::client::{complete, ChatMessage, Transport};
use crate::config::GatewayConfig;
use crate::template::TemplateId;

const SEARCH: &str = "<<<<<<< SEARCH";
const DIVIDER: &str = "=======";
const REPLACE: &str = ">>>>>>> REPLACE";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffBlock {
    pub search: String,
    pub replace: String,
}

/// Pulls every SEARCH/REPLACE block out of a model answer.
pub fn parse_diff(text: &str) -> Vec<DiffBlock> {
    let mut out = Vec::new();
    let mut lines = text.lines();
    while let Some(l) = lines.next() {
        if l.trim_end() != SEARCH {
            continue;
        }
        let mut search = Vec::new();
        let mut replace = Vec::new();
        let mut in_replace = false;
        let mut closed = false;
        for l in lines.by_ref() {
            match l.trim_end() {
                DIVIDER if !in_replace => in_replace = true,
                REPLACE if in_replace => {
                    closed = true;
                    break;
                }
                _ if in_replace => replace.push(l),
                _ => search.push(l),
            }
        }
        if closed {
            out.push(DiffBlock {
                search: search.join("\n"),
                replace: replace.join("\n"),
            });
        }
    }
    out
}

/// Applies blocks in order; each search text must occur in the current text.
pub fn apply_diff(text: &str, blocks: &[DiffBlock]) -> Result<String, String> {
    let mut cur = text.to_string();
    for (i, b) in blocks.iter().enumerate() {
        if b.search.is_empty() || !cur.contains(&b.search) {
            return Err(format!("block {i}: search text not found"));
        }
        cur = cur.replacen(&b.search, &b.replace, 1);
    }
    Ok(cur)
}

pub fn mutation_request(parent: &Constitution) -> Vec<ChatMessage> {
    let user = format!(
        "Current constitution, serialized as JSON:\n```json\n{}```\n\n\
         Suggest an improvement as one or more edits in this exact format:\n\
         {SEARCH}\n<exact lines to replace>\n{DIVIDER}\n<new lines>\n{REPLACE}\n\n\
         Each rule object has the keys name, guidance, summary, priority and an optional directive. \
         The result must remain valid JSON.",
        serialize_constitution(parent)
    );
    vec![ChatMessage::system(TemplateId::EvolveSystem.text()), ChatMessage::user(user)]
}

/// Falls back to copying the parent whenever the answer cannot be used.
pub struct ModelMutator {
    config: GatewayConfig,
    transport: Arc<dyn Transport>,
    pub diagnostics: Vec<String>,
}

impl ModelMutator {
    pub fn new(config: GatewayConfig, transport: Arc<dyn Transport>) -> Self {
        Self {
            config,
            transport,
            diagnostics: Vec::new(),
        }
    }

    fn try_mutate(&self, parent: &Constitution) -> Result<Constitution, String> {
        let out = complete(&self.config, self.transport.as_ref(), &mutation_request(parent), &[])
            .map_err(|e| e.to_string())?;
        let content = out.content.ok_or_else(|| out.diagnostic.unwrap_or_else(|| "empty answer".into()))?;
        let blocks = parse_diff(&content);
        if blocks.is_empty() {
            return Err("answer contains no SEARCH/REPLACE block".into());
        }
        let text = apply_diff(&serialize_constitution(parent), &blocks)?;
        let mut child = parse_constitution(&text).map_err(|e| format!("edited text does not parse: {}", e.message))?;
        child.version = u64::from(!child.rules.is_empty());
        let violations = validate_constitution(&child);
        if !violations.is_empty() {
            return Err(format!("edited constitution is invalid: {violations:?}"));
        }
        Ok(child)
    }
}

impl Mutator for ModelMutator {
    fn mutate(&mut self, parent: &Constitution, _rng: &mut dyn UniformSource) -> Mutation {
        match self.try_mutate(parent) {
            Ok(child) => Mutation { child, op: "diff".into() },
            Err(e) => {
                self.diagnostics.push(e);
                Mutation {
                    child: parent.clone(),
                    op: "copy".into(),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_apply() {
        let answer = "Try this:\n<<<<<<< SEARCH\n  \"rules\": [],\n=======\n  \"rules\": [{\"name\": \"A\", \"guidance\": \"g\", \"summary\": \"s\", \"priority\": 1}],\n>>>>>>> REPLACE\nDone.";
        let blocks = parse_diff(answer);
        assert_eq!(blocks.len(), 1);
        let parent = serialize_constitution(&Constitution::blank());
        let child = parse_constitution(&apply_diff(&parent, &blocks).unwrap()).unwrap();
        assert_eq!(child.rules[0].name, "A");
    }

    #[test]
    fn unmatched_search_is_an_error() {
        let b = DiffBlock {
            search: "nope".into(),
            replace: "x".into(),
        };
        assert!(apply_diff("text", &[b]).is_err());
    }

    #[test]
    fn unterminated_block_is_ignored() {
        assert!(parse_diff("<<<<<<< SEARCH\na\n=======\nb\n").is_empty());
    }
}
