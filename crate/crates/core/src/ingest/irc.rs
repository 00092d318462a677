//! IRC line grammar, the subset Twitch chat speaks.
//!
//! ```text
//! [@tags SPACE] [:prefix SPACE] command *(SPACE param) [SPACE :trailing]
//! ```
//!
//! Tags are kept verbatim as opaque key/value text; nothing downstream reads them.

use std::collections::BTreeMap;
use std::fmt;

use super::message::{ChatMessage, SessionClock, Source};
use super::IngestError;

/// Longest accepted line, in characters, excluding CR/LF.
pub const MAX_LINE_CHARS: usize = 4096;

/// A parsed IRC line.
///
/// Equality ignores `raw`: two frames are equal when they carry the same
/// tags, prefix, command, params and trailing text.
#[derive(Debug, Clone, Default)]
pub struct IrcFrame {
    pub raw: String,
    pub tags: BTreeMap<String, String>,
    pub prefix: Option<String>,
    pub command: String,
    pub params: Vec<String>,
    pub trailing: Option<String>,
}

impl PartialEq for IrcFrame {
    fn eq(&self, other: &Self) -> bool {
        self.tags == other.tags
            && self.prefix == other.prefix
            && self.command == other.command
            && self.params == other.params
            && self.trailing == other.trailing
    }
}

impl Eq for IrcFrame {}

impl IrcFrame {
    pub fn is_command(&self, command: &str) -> bool {
        self.command.eq_ignore_ascii_case(command)
    }

    /// Nick portion of a `nick!user@host` prefix.
    pub fn nick(&self) -> Option<&str> {
        let prefix = self.prefix.as_deref()?;
        let end = prefix.find(['!', '@']).unwrap_or(prefix.len());
        Some(&prefix[..end])
    }

    /// Canonical wire form, without CR/LF.
    pub fn serialize(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for IrcFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.tags.is_empty() {
            f.write_str("@")?;
            for (i, (k, v)) in self.tags.iter().enumerate() {
                if i > 0 {
                    f.write_str(";")?;
                }
                f.write_str(k)?;
                if !v.is_empty() {
                    write!(f, "={v}")?;
                }
            }
            f.write_str(" ")?;
        }
        if let Some(prefix) = &self.prefix {
            write!(f, ":{prefix} ")?;
        }
        f.write_str(&self.command)?;
        for p in &self.params {
            write!(f, " {p}")?;
        }
        if let Some(t) = &self.trailing {
            write!(f, " :{t}")?;
        }
        Ok(())
    }
}

fn split_token(s: &str) -> (&str, &str) {
    match s.find(' ') {
        Some(i) => (&s[..i], &s[i + 1..]),
        None => (s, ""),
    }
}

fn parse_tags(s: &str) -> BTreeMap<String, String> {
    s.split(';')
        .filter(|kv| !kv.is_empty())
        .map(|kv| match kv.split_once('=') {
            Some((k, v)) => (k.to_owned(), v.to_owned()),
            None => (kv.to_owned(), String::new()),
        })
        .filter(|(k, _)| !k.is_empty())
        .collect()
}

pub fn parse_irc_line(raw: &str) -> Result<IrcFrame, IngestError> {
    let line = raw.trim_end_matches(['\r', '\n']);
    let len = line.chars().count();
    if len > MAX_LINE_CHARS {
        return Err(IngestError::OversizedLine { len });
    }

    let mut rest = line;
    let mut tags = BTreeMap::new();
    if let Some(stripped) = rest.strip_prefix('@') {
        let (tag_str, after) = split_token(stripped);
        tags = parse_tags(tag_str);
        rest = after;
    }

    rest = rest.trim_start_matches(' ');
    let mut prefix = None;
    if let Some(stripped) = rest.strip_prefix(':') {
        let (p, after) = split_token(stripped);
        prefix = Some(p.to_owned());
        rest = after;
    }

    rest = rest.trim_start_matches(' ');
    let (command, mut rest) = split_token(rest);
    if command.is_empty() {
        return Err(IngestError::MalformedFrame(line.to_owned()));
    }

    let mut params = Vec::new();
    let mut trailing = None;
    loop {
        rest = rest.trim_start_matches(' ');
        if rest.is_empty() {
            break;
        }
        if let Some(t) = rest.strip_prefix(':') {
            trailing = Some(t.to_owned());
            break;
        }
        let (p, after) = split_token(rest);
        params.push(p.to_owned());
        rest = after;
    }

    Ok(IrcFrame {
        raw: line.to_owned(),
        tags,
        prefix,
        command: command.to_owned(),
        params,
        trailing,
    })
}

/// Maps a PRIVMSG frame onto a [`ChatMessage`] stamped by `clock`.
///
/// Every other command, and a PRIVMSG whose body is blank, yields nothing.
pub fn frame_to_message(
    frame: &IrcFrame,
    source: Source,
    clock: &SessionClock,
) -> Option<ChatMessage> {
    if !frame.is_command("PRIVMSG") {
        return None;
    }
    let channel = frame.params.first().map(String::as_str).unwrap_or("");
    let body = frame
        .trailing
        .as_deref()
        .or_else(|| frame.params.get(1).map(String::as_str))?;
    if body.trim().is_empty() {
        return None;
    }
    ChatMessage::new(
        clock.next_message_id(source),
        channel,
        frame.nick().unwrap_or(""),
        body,
        clock.now_ms(),
        source,
    )
}

/// `PONG :<payload>` for a PING, echoing its trailing text (or its first param).
pub fn keepalive_response(frame: &IrcFrame) -> Option<String> {
    if !frame.is_command("PING") {
        return None;
    }
    let payload = frame
        .trailing
        .as_deref()
        .or_else(|| frame.params.first().map(String::as_str))
        .unwrap_or("");
    Some(format!("PONG :{payload}"))
}

/// Outbound chat line for `channel` (with or without the leading `#`).
pub fn privmsg_line(channel: &str, text: &str) -> String {
    format!("PRIVMSG #{} :{}", channel.trim_start_matches('#'), text)
}

/// Lines sent right after connecting: tag capability request, then
/// `PASS`/`NICK`/`JOIN`. Without a token the connection is anonymous and
/// `PASS` is skipped.
pub fn login_lines(token: Option<&str>, nick: &str, channel: &str) -> Vec<String> {
    let mut lines = vec!["CAP REQ :twitch.tv/tags".to_owned()];
    if let Some(token) = token {
        lines.push(format!("PASS {token}"));
    }
    lines.push(format!("NICK {nick}"));
    lines.push(format!("JOIN #{}", channel.trim_start_matches('#')));
    lines
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ping_with_trailing() {
        let f = parse_irc_line("PING :tmi.twitch.tv").unwrap();
        assert_eq!(f.command, "PING");
        assert_eq!(f.trailing.as_deref(), Some("tmi.twitch.tv"));
        assert!(f.params.is_empty());
        assert!(f.prefix.is_none());
    }

    #[test]
    fn privmsg_fields() {
        let f = parse_irc_line(":nick!nick@host PRIVMSG #chan :hello").unwrap();
        assert_eq!(f.command, "PRIVMSG");
        assert_eq!(f.params, vec!["#chan"]);
        assert_eq!(f.trailing.as_deref(), Some("hello"));
        assert_eq!(f.prefix.as_deref(), Some("nick!nick@host"));
        assert_eq!(f.nick(), Some("nick"));
    }

    #[test]
    fn tagged_privmsg() {
        let line = "@badge-info=;color=#FF0000;display-name=Nick;emotes= :nick!nick@nick.tmi.twitch.tv PRIVMSG #chan :hi there :)";
        let f = parse_irc_line(line).unwrap();
        assert_eq!(f.tags.get("color").map(String::as_str), Some("#FF0000"));
        assert_eq!(f.tags.get("badge-info").map(String::as_str), Some(""));
        assert_eq!(f.trailing.as_deref(), Some("hi there :)"));
    }

    #[test]
    fn numeric_reply_with_params() {
        let f = parse_irc_line(":tmi.twitch.tv 001 justinfan123 :Welcome, GLHF!").unwrap();
        assert_eq!(f.command, "001");
        assert_eq!(f.params, vec!["justinfan123"]);
    }

    #[test]
    fn empty_line_is_malformed() {
        assert!(matches!(
            parse_irc_line(""),
            Err(IngestError::MalformedFrame(_))
        ));
        assert!(matches!(
            parse_irc_line(":prefixonly"),
            Err(IngestError::MalformedFrame(_))
        ));
        assert!(matches!(
            parse_irc_line("@a=b"),
            Err(IngestError::MalformedFrame(_))
        ));
    }

    #[test]
    fn oversized_line_rejected() {
        let line = format!("PRIVMSG #c :{}", "x".repeat(MAX_LINE_CHARS));
        assert!(matches!(
            parse_irc_line(&line),
            Err(IngestError::OversizedLine { .. })
        ));
        let ok = format!("PRIVMSG #c :{}", "x".repeat(MAX_LINE_CHARS - 12));
        assert!(parse_irc_line(&ok).is_ok());
    }

    #[test]
    fn privmsg_maps_to_message() {
        let clock = SessionClock::manual(1234);
        let f = parse_irc_line(":nick!nick@host PRIVMSG #chan :hello").unwrap();
        let m = frame_to_message(&f, Source::External, &clock).unwrap();
        assert_eq!(m.author, "nick");
        assert_eq!(m.channel, "#chan");
        assert_eq!(m.body, "hello");
        assert_eq!(m.timestamp_ms, 1234);
        assert_eq!(m.source, Source::External);
    }

    #[test]
    fn control_and_empty_frames_yield_nothing() {
        let clock = SessionClock::manual(0);
        let ping = parse_irc_line("PING :tmi.twitch.tv").unwrap();
        assert!(frame_to_message(&ping, Source::External, &clock).is_none());
        let empty = parse_irc_line(":nick!nick@host PRIVMSG #chan :").unwrap();
        assert!(frame_to_message(&empty, Source::External, &clock).is_none());
    }

    #[test]
    fn pong_responses() {
        let ping = parse_irc_line("PING :tmi.twitch.tv").unwrap();
        assert_eq!(
            keepalive_response(&ping).as_deref(),
            Some("PONG :tmi.twitch.tv")
        );
        let bare = parse_irc_line("PING").unwrap();
        assert_eq!(keepalive_response(&bare).as_deref(), Some("PONG :"));
        let msg = parse_irc_line(":n!n@h PRIVMSG #c :x").unwrap();
        assert_eq!(keepalive_response(&msg), None);
    }

    #[test]
    fn login_sequence() {
        let lines = login_lines(Some("oauth:abc"), "bot", "#chan");
        assert_eq!(
            lines,
            vec![
                "CAP REQ :twitch.tv/tags",
                "PASS oauth:abc",
                "NICK bot",
                "JOIN #chan"
            ]
        );
        assert_eq!(privmsg_line("chan", "hi"), "PRIVMSG #chan :hi");
    }

    const FIXTURE: &[&str] = &[
        "PING :tmi.twitch.tv",
        ":nick!nick@host PRIVMSG #chan :hello",
        ":tmi.twitch.tv 001 justinfan123 :Welcome, GLHF!",
        ":tmi.twitch.tv CAP * ACK :twitch.tv/tags",
        "@id=abc;mod=0 :a!a@a.tmi.twitch.tv PRIVMSG #chan :Kappa Kappa",
        ":justinfan1!justinfan1@justinfan1.tmi.twitch.tv JOIN #chan",
        "PRIVMSG #chan no-colon",
        ":srv NOTICE * :",
    ];

    #[test]
    fn fixture_round_trip() {
        for line in FIXTURE {
            let f = parse_irc_line(line).unwrap();
            let again = parse_irc_line(&f.serialize()).unwrap();
            assert_eq!(f, again, "{line}");
        }
    }

    fn arb_frame() -> impl Strategy<Value = IrcFrame> {
        let word = "[A-Za-z0-9#!@._-]{1,12}";
        (
            proptest::collection::btree_map("[a-z][a-z-]{0,8}", "[A-Za-z0-9#,/-]{0,8}", 0..4),
            proptest::option::of(word),
            "([A-Z]{3,8}|[0-9]{3})",
            proptest::collection::vec(word, 0..4),
            proptest::option::of("[ -~]{0,40}"),
        )
            .prop_map(|(tags, prefix, command, params, trailing)| IrcFrame {
                raw: String::new(),
                tags,
                prefix,
                command,
                params,
                trailing,
            })
    }

    proptest! {
        #[test]
        fn serialize_parse_round_trip(frame in arb_frame()) {
            let parsed = parse_irc_line(&frame.serialize()).unwrap();
            prop_assert_eq!(parsed, frame);
        }
    }
}
