//! Chat ingestion: IRC wire parsing, the local room protocol, and the merge
//! point that turns several sources into one time-ordered stream.

mod irc;
mod merge;
mod message;
mod source;

pub use irc::{
    frame_to_message, keepalive_response, login_lines, parse_irc_line, privmsg_line, IrcFrame,
    MAX_LINE_CHARS,
};
pub use merge::{merge_sources, MergedStream};
pub use message::{ChatMessage, SessionClock, Source};
pub use source::{parse_room_line, Backoff, RoomPost, SourceConfig, SourceMode};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum IngestError {
    #[error("malformed IRC frame: {0:?}")]
    MalformedFrame(String),
    #[error("IRC line too long ({len} chars)")]
    OversizedLine { len: usize },
    #[error("malformed room post: {0}")]
    MalformedRoomPost(String),
    #[error("invalid source config: {0}")]
    InvalidSource(String),
    #[error("source closed")]
    SourceClosed,
}
