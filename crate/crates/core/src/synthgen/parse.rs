//! Conversion of raw generated text into corpus dialogues.

use thiserror::Error;

use super::template::ItemRef;
use crate::corpus::{accept_boundary_indices, Dialogue, Provenance, Speaker, Split, Turn};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Rejection {
    #[error("empty text")]
    Empty,
    #[error("no recognizable speaker prefixes")]
    NoSpeakers,
    #[error("item name `{0}` never appears")]
    ItemNotFound(String),
    #[error("no recommender turn mentions the item")]
    NoRecommenderMention,
}

const SEEKER_LABELS: [&str; 3] = ["user", "seeker", "用户"];
const RECOMMENDER_LABELS: [&str; 3] = ["system", "recommender", "系统"];

/// Splits `Label: text` into a speaker and the utterance.
fn speaker_line(line: &str) -> Option<(Speaker, &str)> {
    let line = line.trim_start_matches(['*', '-', ' ']);
    let (label, rest) = line
        .split_once(':')
        .into_iter()
        .chain(line.split_once('：'))
        .min_by_key(|(l, _)| l.len())?;
    let label = label.trim_matches(['*', ' ']).to_lowercase();
    let speaker = if SEEKER_LABELS.contains(&label.as_str()) {
        Speaker::Seeker
    } else if RECOMMENDER_LABELS.contains(&label.as_str()) {
        Speaker::Recommender
    } else {
        return None;
    };
    Some((speaker, rest.trim_start_matches(['*', ' '])))
}

/// Parses generated text into a synthetic training dialogue.
///
/// Lines opening with `User:`/`Seeker:` or `System:`/`Recommender:` start
/// turns (Chinese `用户：`/`系统：` also work); other lines continue the
/// current turn, and anything before the first labelled line is dropped.
/// Exact occurrences of the item name become `@<item_id>` and the final
/// recommender turn that mentions the item carries it as the target.
pub fn parse_generated(raw: &str, item: &ItemRef, dialogue_id: &str) -> Result<Dialogue, Rejection> {
    if raw.trim().is_empty() {
        return Err(Rejection::Empty);
    }
    let mut turns: Vec<Turn> = Vec::new();
    for line in raw.lines().map(str::trim).filter(|l| !l.is_empty()) {
        match speaker_line(line) {
            Some((speaker, text)) => turns.push(Turn::new(speaker, text.trim())),
            None => {
                if let Some(last) = turns.last_mut() {
                    if !last.text.is_empty() {
                        last.text.push(' ');
                    }
                    last.text.push_str(line);
                }
            }
        }
    }
    if turns.is_empty() {
        return Err(Rejection::NoSpeakers);
    }

    let token = format!("@{}", item.id);
    let mut mentioned = false;
    for turn in &mut turns {
        if turn.text.contains(&item.name) {
            turn.text = turn.text.replace(&item.name, &token);
            turn.mentioned_item_ids = vec![item.id.clone()];
            mentioned = true;
        }
    }
    if !mentioned {
        return Err(Rejection::ItemNotFound(item.name.clone()));
    }
    let last_rec = turns
        .iter()
        .rposition(|t| t.speaker == Speaker::Recommender && !t.mentioned_item_ids.is_empty())
        .ok_or(Rejection::NoRecommenderMention)?;
    turns[last_rec].target_item_ids = vec![item.id.clone()];

    let episodes = accept_boundary_indices(&turns);
    Ok(Dialogue {
        dialogue_id: dialogue_id.to_string(),
        split: Split::Train,
        turns,
        episodes: Some(episodes),
        provenance: Provenance::Synthetic,
    })
}
