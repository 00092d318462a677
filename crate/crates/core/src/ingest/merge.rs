use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::message::ChatMessage;

struct Head {
    msg: ChatMessage,
    source_idx: usize,
}

impl PartialEq for Head {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Head {}

impl PartialOrd for Head {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Head {
    fn cmp(&self, other: &Self) -> Ordering {
        self.msg
            .order_key()
            .cmp(&other.msg.order_key())
            .then(self.source_idx.cmp(&other.source_idx))
    }
}

/// K-way merge of individually time-ordered message streams.
///
/// Output is ordered by `(timestamp_ms, source rank, id)`. A stream that runs
/// dry simply drops out; the others keep flowing.
pub struct MergedStream<I> {
    sources: Vec<I>,
    heap: BinaryHeap<Reverse<Head>>,
}

impl<I> MergedStream<I>
where
    I: Iterator<Item = ChatMessage>,
{
    fn refill(&mut self, idx: usize) {
        if let Some(msg) = self.sources[idx].next() {
            self.heap.push(Reverse(Head {
                msg,
                source_idx: idx,
            }));
        }
    }
}

impl<I> Iterator for MergedStream<I>
where
    I: Iterator<Item = ChatMessage>,
{
    type Item = ChatMessage;

    fn next(&mut self) -> Option<ChatMessage> {
        let Reverse(head) = self.heap.pop()?;
        self.refill(head.source_idx);
        Some(head.msg)
    }
}

pub fn merge_sources<S>(sources: Vec<S>) -> MergedStream<S::IntoIter>
where
    S: IntoIterator<Item = ChatMessage>,
{
    let sources: Vec<_> = sources.into_iter().map(IntoIterator::into_iter).collect();
    let mut merged = MergedStream {
        heap: BinaryHeap::with_capacity(sources.len()),
        sources,
    };
    for idx in 0..merged.sources.len() {
        merged.refill(idx);
    }
    merged
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Source;
    use proptest::prelude::*;

    fn msg(id: &str, ts: u64, source: Source) -> ChatMessage {
        ChatMessage::new(id, "#c", "a", "body", ts, source).unwrap()
    }

    #[test]
    fn interleaved_sources() {
        let a = vec![
            msg("a1", 0, Source::External),
            msg("a2", 20, Source::External),
        ];
        let b = vec![
            msg("b1", 10, Source::Participant),
            msg("b2", 30, Source::Participant),
        ];
        let out: Vec<_> = merge_sources(vec![a, b]).map(|m| m.id).collect();
        assert_eq!(out, vec!["a1", "b1", "a2", "b2"]);
    }

    #[test]
    fn participant_wins_ties() {
        let ext = vec![msg("e", 100, Source::External)];
        let par = vec![msg("p", 100, Source::Participant)];
        let out: Vec<_> = merge_sources(vec![ext, par]).map(|m| m.id).collect();
        assert_eq!(out, vec!["p", "e"]);
    }

    #[test]
    fn single_source_passthrough() {
        let a = vec![
            msg("x", 5, Source::Replay),
            msg("y", 5, Source::Replay),
            msg("z", 9, Source::Replay),
        ];
        let out: Vec<_> = merge_sources(vec![a.clone()]).collect();
        assert_eq!(out, a);
    }

    const SOURCES: [Source; 4] = [
        Source::Participant,
        Source::External,
        Source::Replay,
        Source::Synthetic,
    ];

    proptest! {
        #[test]
        fn merged_is_monotone_and_lossless(
            gaps in proptest::collection::vec(proptest::collection::vec(0u64..50, 0..30), 1..5)
        ) {
            let mut expected = 0;
            let streams: Vec<Vec<ChatMessage>> = gaps
                .iter()
                .enumerate()
                .map(|(s, g)| {
                    let mut t = 0;
                    g.iter()
                        .enumerate()
                        .map(|(i, d)| {
                            t += d;
                            expected += 1;
                            msg(&format!("s{s}-{i:03}"), t, SOURCES[s % 4])
                        })
                        .collect()
                })
                .collect();
            let out: Vec<_> = merge_sources(streams).collect();
            prop_assert_eq!(out.len(), expected);
            for w in out.windows(2) {
                prop_assert!(w[0].order_key() <= w[1].order_key());
            }
        }
    }
}
