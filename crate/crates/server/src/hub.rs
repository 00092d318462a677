//! The pipeline owner: one task that serializes chat, admin requests and
//! clock ticks into the engine, writes the session log and fans updates out.

use std::fs::File;
use std::io::BufWriter;
use std::sync::Arc;
use std::time::Duration;

use storychat_core::engine::{AdminChange, AdminError, EngineSnapshot, Pipeline, UpdatePayload};
use storychat_core::ingest::{ChatMessage, SessionClock};
use storychat_core::session_log::{LogError, LogRecord, ReplayItem, SessionWriter};
use tokio::sync::{broadcast, mpsc, oneshot};

/// Per-connection buffer; a client this far behind is dropped.
pub const CLIENT_BUFFER: usize = 1000;

const COMMAND_QUEUE: usize = 8192;
const TICK: Duration = Duration::from_millis(50);

/// How session time moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Timing {
    /// Follows the wall clock; windows close on a ticker.
    Live,
    /// Moves only with replayed items.
    Logical,
}

#[derive(Debug)]
pub enum AdminRequest {
    Change(AdminChange),
    Notice(String),
}

enum Command {
    Chat(ChatMessage),
    Replay(ReplayItem),
    Admin(AdminRequest, oneshot::Sender<Result<u64, AdminError>>),
    Snapshot(oneshot::Sender<EngineSnapshot>),
    Finish(Option<u64>, oneshot::Sender<EngineSnapshot>),
}

#[derive(Debug, thiserror::Error)]
#[error("engine has stopped")]
pub struct EngineGone;

/// Cheap, cloneable way into the pipeline owner.
#[derive(Clone)]
pub struct Hub {
    tx: mpsc::Sender<Command>,
    updates: broadcast::Sender<Arc<UpdatePayload>>,
    clock: Arc<SessionClock>,
    timing: Timing,
}

impl Hub {
    /// Starts the pipeline owner on the current runtime.
    pub fn spawn(
        pipeline: Pipeline,
        writer: Option<SessionWriter<BufWriter<File>>>,
        clock: Arc<SessionClock>,
        timing: Timing,
    ) -> (Hub, tokio::task::JoinHandle<()>) {
        let (tx, rx) = mpsc::channel(COMMAND_QUEUE);
        let (updates, _) = broadcast::channel(CLIENT_BUFFER);
        let owner = Owner {
            pipeline,
            writer,
            updates: updates.clone(),
            clock: clock.clone(),
            timing,
        };
        let task = tokio::spawn(owner.run(rx));
        (
            Hub {
                tx,
                updates,
                clock,
                timing,
            },
            task,
        )
    }

    pub fn clock(&self) -> &SessionClock {
        &self.clock
    }

    pub fn timing(&self) -> Timing {
        self.timing
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Arc<UpdatePayload>> {
        self.updates.subscribe()
    }

    pub async fn submit(&self, message: ChatMessage) -> Result<(), EngineGone> {
        self.tx
            .send(Command::Chat(message))
            .await
            .map_err(|_| EngineGone)
    }

    pub async fn replay(&self, item: ReplayItem) -> Result<(), EngineGone> {
        self.tx
            .send(Command::Replay(item))
            .await
            .map_err(|_| EngineGone)
    }

    /// Applies an admin request; the reply is the seq of the logged record.
    pub async fn admin(
        &self,
        request: AdminRequest,
    ) -> Result<Result<u64, AdminError>, EngineGone> {
        let (reply, rx) = oneshot::channel();
        self.tx
            .send(Command::Admin(request, reply))
            .await
            .map_err(|_| EngineGone)?;
        rx.await.map_err(|_| EngineGone)
    }

    pub async fn snapshot(&self) -> Result<EngineSnapshot, EngineGone> {
        let (reply, rx) = oneshot::channel();
        self.tx
            .send(Command::Snapshot(reply))
            .await
            .map_err(|_| EngineGone)?;
        rx.await.map_err(|_| EngineGone)
    }

    /// Closes the remaining windows up to `end_ms` (the clock by default)
    /// and flushes the log. The engine keeps serving afterwards.
    pub async fn finish(&self, end_ms: Option<u64>) -> Result<EngineSnapshot, EngineGone> {
        let (reply, rx) = oneshot::channel();
        self.tx
            .send(Command::Finish(end_ms, reply))
            .await
            .map_err(|_| EngineGone)?;
        rx.await.map_err(|_| EngineGone)
    }
}

struct Owner {
    pipeline: Pipeline,
    writer: Option<SessionWriter<BufWriter<File>>>,
    updates: broadcast::Sender<Arc<UpdatePayload>>,
    clock: Arc<SessionClock>,
    timing: Timing,
}

impl Owner {
    async fn run(mut self, mut rx: mpsc::Receiver<Command>) {
        let mut ticker = tokio::time::interval(TICK);
        ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
        loop {
            tokio::select! {
                biased;
                cmd = rx.recv() => match cmd {
                    Some(cmd) => self.handle(cmd),
                    None => break,
                },
                _ = ticker.tick() => self.tick(),
            }
        }
        let end = (self.timing == Timing::Live).then(|| self.clock.now_ms());
        self.finish(end);
    }

    fn handle(&mut self, cmd: Command) {
        match cmd {
            Command::Chat(mut message) => {
                if self.timing == Timing::Logical {
                    message.timestamp_ms = self.pipeline.now_ms();
                }
                let records = self.pipeline.ingest(message);
                self.emit(records);
            }
            Command::Replay(item) => {
                let records = self.pipeline.apply_replay(item);
                self.emit(records);
            }
            Command::Admin(request, reply) => {
                if self.timing == Timing::Live {
                    let records = self.pipeline.advance_to(self.clock.now_ms());
                    self.emit(records);
                }
                let result = match request {
                    AdminRequest::Change(change) => self.pipeline.apply_admin(change),
                    AdminRequest::Notice(text) => self.pipeline.notice(&text),
                };
                let ack = result.map(|records| {
                    let seq = records.last().map_or(self.pipeline.last_seq(), |r| r.seq);
                    self.emit(records);
                    seq
                });
                let _ = reply.send(ack);
            }
            Command::Snapshot(reply) => {
                let _ = reply.send(self.pipeline.snapshot());
            }
            Command::Finish(end, reply) => {
                self.finish(end);
                let _ = reply.send(self.pipeline.snapshot());
            }
        }
    }

    fn tick(&mut self) {
        if self.timing == Timing::Live {
            let records = self.pipeline.advance_to(self.clock.now_ms());
            self.emit(records);
        }
        if let Some(writer) = &mut self.writer {
            if let Err(e) = writer.flush_if_due() {
                tracing::error!("flushing session log: {e}");
            }
        }
    }

    fn finish(&mut self, end_ms: Option<u64>) {
        let end = end_ms.unwrap_or_else(|| self.pipeline.now_ms());
        let records = self.pipeline.finish(end);
        self.emit(records);
        if let Some(writer) = &mut self.writer {
            if let Err(e) = writer.flush() {
                tracing::error!("flushing session log: {e}");
            }
        }
    }

    /// Log first, then broadcast, so clients never see what the log lacks.
    fn emit(&mut self, records: Vec<LogRecord>) {
        for record in records {
            if let Some(writer) = &mut self.writer {
                match writer.append(&record) {
                    Ok(()) => {}
                    Err(LogError::StorageFull) => {
                        tracing::error!("disk full; session log disabled from seq {}", record.seq);
                        self.writer = None;
                    }
                    Err(e) => tracing::error!("writing record {}: {e}", record.seq),
                }
            }
            if let Some(payload) = self.pipeline.payload_for(&record) {
                // no subscribers is fine
                let _ = self.updates.send(Arc::new(payload));
            }
        }
    }
}
