//! Identifier newtypes and actor roles.

use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                $name(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(s)
            }
        }
    };
}

string_id!(
    /// Identifier of a block inside a document tree.
    BlockId
);
string_id!(DocId);
string_id!(EditId);
string_id!(ThreadId);
string_id!(TaskId);
string_id!(
    /// A person acting on the system: the author or one crowd worker.
    ActorId
);
string_id!(
    /// Groups the edits one worker saved together.
    SubmissionId
);

impl BlockId {
    /// Sentinel parent of every section.
    pub fn root() -> Self {
        BlockId("root".to_owned())
    }

    pub fn is_root(&self) -> bool {
        self.0 == "root"
    }

    /// Id of the block created when an insert edit is accepted.
    pub fn for_edit(edit: &EditId) -> Self {
        BlockId(format!("blk-{edit}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Author,
    Worker,
}

impl Role {
    pub fn opposite(self) -> Role {
        match self {
            Role::Author => Role::Worker,
            Role::Worker => Role::Author,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Author => f.write_str("author"),
            Role::Worker => f.write_str("worker"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Actor {
    pub id: ActorId,
    pub role: Role,
}

impl Actor {
    pub fn author(id: impl Into<ActorId>) -> Self {
        Actor { id: id.into(), role: Role::Author }
    }

    pub fn worker(id: impl Into<ActorId>) -> Self {
        Actor { id: id.into(), role: Role::Worker }
    }
}
