//! Comment threads anchored to a block or a suggested edit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::doc::DocumentTree;
use crate::ids::{Actor, ActorId, BlockId, EditId, Role, ThreadId};
use crate::suggest::SuggestionEngine;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CommentError {
    #[error("anchor does not resolve")]
    UnknownAnchor,
    #[error("comment text is empty")]
    EmptyText,
    #[error("unknown thread {0}")]
    UnknownThread(ThreadId),
    #[error("thread {0} is resolved")]
    ThreadResolved(ThreadId),
    #[error("only the author may resolve threads")]
    NotAuthor,
    #[error("thread id {0} is already in use")]
    DuplicateThread(ThreadId),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    Block(BlockId),
    Edit(EditId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub author_id: ActorId,
    pub role: Role,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_token: Option<String>,
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentThread {
    pub id: ThreadId,
    pub anchor: Anchor,
    pub messages: Vec<Message>,
    pub resolved: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CommentBook {
    threads: BTreeMap<ThreadId, CommentThread>,
}

impl CommentBook {
    pub fn get(&self, id: &ThreadId) -> Option<&CommentThread> {
        self.threads.get(id)
    }

    pub fn threads(&self) -> impl Iterator<Item = &CommentThread> {
        self.threads.values()
    }

    pub fn open_thread(
        &mut self,
        id: ThreadId,
        anchor: Anchor,
        anchors: (&DocumentTree, &SuggestionEngine),
        actor: &Actor,
        text: &str,
        raw_token: Option<String>,
    ) -> Result<&CommentThread, CommentError> {
        let (doc, edits) = anchors;
        let resolves = match &anchor {
            Anchor::Block(b) => doc.contains(b),
            Anchor::Edit(e) => edits.get(e).is_some(),
        };
        if !resolves {
            return Err(CommentError::UnknownAnchor);
        }
        if text.trim().is_empty() {
            return Err(CommentError::EmptyText);
        }
        if self.threads.contains_key(&id) {
            return Err(CommentError::DuplicateThread(id));
        }
        let thread = CommentThread {
            id: id.clone(),
            anchor,
            messages: vec![Message {
                author_id: actor.id.clone(),
                role: actor.role,
                text: text.to_owned(),
                raw_token,
                seq: 1,
            }],
            resolved: false,
        };
        Ok(self.threads.entry(id).or_insert(thread))
    }

    pub fn reply(
        &mut self,
        thread_id: &ThreadId,
        actor: &Actor,
        text: &str,
        raw_token: Option<String>,
    ) -> Result<&Message, CommentError> {
        let thread = self
            .threads
            .get_mut(thread_id)
            .ok_or_else(|| CommentError::UnknownThread(thread_id.clone()))?;
        if thread.resolved {
            return Err(CommentError::ThreadResolved(thread_id.clone()));
        }
        if text.trim().is_empty() {
            return Err(CommentError::EmptyText);
        }
        let seq = thread.messages.len() as u64 + 1;
        thread.messages.push(Message {
            author_id: actor.id.clone(),
            role: actor.role,
            text: text.to_owned(),
            raw_token,
            seq,
        });
        Ok(thread.messages.last().expect("just pushed"))
    }

    /// Author-only. Resolving an already resolved thread is a no-op.
    pub fn resolve_thread(&mut self, thread_id: &ThreadId, actor: &Actor) -> Result<(), CommentError> {
        let thread = self
            .threads
            .get_mut(thread_id)
            .ok_or_else(|| CommentError::UnknownThread(thread_id.clone()))?;
        if actor.role != Role::Author {
            return Err(CommentError::NotAuthor);
        }
        thread.resolved = true;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc::parse_seed_outline;

    fn fixture() -> (DocumentTree, SuggestionEngine, CommentBook) {
        let doc = parse_seed_outline("d".into(), "# S\n- a").unwrap();
        (doc, SuggestionEngine::default(), CommentBook::default())
    }

    #[test]
    fn worker_opens_thread_on_bullet() {
        let (doc, edits, mut book) = fixture();
        let t = book
            .open_thread("t1".into(), Anchor::Block("s2".into()), (&doc, &edits), &Actor::worker("w"), "why?", None)
            .unwrap();
        assert_eq!(t.messages.len(), 1);
        assert_eq!(t.messages[0].role, Role::Worker);
        assert_eq!(t.messages[0].seq, 1);
    }

    #[test]
    fn deleted_block_is_not_an_anchor() {
        let (mut doc, edits, mut book) = fixture();
        doc.delete_block(&"s2".into()).unwrap();
        let err = book
            .open_thread("t1".into(), Anchor::Block("s2".into()), (&doc, &edits), &Actor::worker("w"), "x", None)
            .unwrap_err();
        assert_eq!(err, CommentError::UnknownAnchor);
        let err = book
            .open_thread("t1".into(), Anchor::Edit("e1".into()), (&doc, &edits), &Actor::worker("w"), "x", None)
            .unwrap_err();
        assert_eq!(err, CommentError::UnknownAnchor);
    }

    #[test]
    fn author_message_keeps_raw_token() {
        let (doc, edits, mut book) = fixture();
        let t = book
            .open_thread(
                "t1".into(),
                Anchor::Block("s1".into()),
                (&doc, &edits),
                &Actor::author("a"),
                "expand this",
                Some("audio-17".into()),
            )
            .unwrap();
        assert_eq!(t.messages[0].raw_token.as_deref(), Some("audio-17"));
    }

    #[test]
    fn replies_are_numbered_in_order() {
        let (doc, edits, mut book) = fixture();
        let id = ThreadId::from("t1");
        book.open_thread(id.clone(), Anchor::Block("s1".into()), (&doc, &edits), &Actor::worker("w"), "q", None)
            .unwrap();
        let mut seqs = Vec::new();
        for (i, actor) in [Actor::author("a"), Actor::worker("w"), Actor::author("a")].iter().enumerate() {
            seqs.push(book.reply(&id, actor, &format!("m{i}"), None).unwrap().seq);
        }
        assert_eq!(seqs, [2, 3, 4]);
        assert_eq!(book.reply(&id, &Actor::author("a"), "  ", None).unwrap_err(), CommentError::EmptyText);
    }

    #[test]
    fn resolve_lifecycle() {
        let (doc, edits, mut book) = fixture();
        let id = ThreadId::from("t1");
        book.open_thread(id.clone(), Anchor::Block("s1".into()), (&doc, &edits), &Actor::worker("w"), "q", None)
            .unwrap();
        assert_eq!(book.resolve_thread(&id, &Actor::worker("w")).unwrap_err(), CommentError::NotAuthor);
        book.resolve_thread(&id, &Actor::author("a")).unwrap();
        book.resolve_thread(&id, &Actor::author("a")).unwrap();
        assert!(book.get(&id).unwrap().resolved);
        assert_eq!(
            book.reply(&id, &Actor::worker("w"), "more", None).unwrap_err(),
            CommentError::ThreadResolved(id.clone())
        );
        assert_eq!(book.get(&id).unwrap().messages.len(), 1);
        assert_eq!(
            book.reply(&"nope".into(), &Actor::worker("w"), "x", None).unwrap_err(),
            CommentError::UnknownThread("nope".into())
        );
    }
}
