//! Append-only JSON-lines log of completed games, written by one task that
//! drains a queue.

use std::path::PathBuf;

use serde::Serialize;
use tokio::io::AsyncWriteExt;
use tokio::sync::mpsc;
use tokio::task::JoinHandle;

use crate::session::{GameConfig, TranscriptEntry};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GameLogRecord {
    pub session_id: String,
    pub config: GameConfig,
    pub seed: u64,
    pub transcript: Vec<TranscriptEntry>,
    pub score: usize,
    pub hints: usize,
    pub created_ms: u64,
    pub finished_ms: u64,
    pub wall_clock_ms: u64,
}

pub type LogSender = mpsc::UnboundedSender<GameLogRecord>;

/// Starts the writer. It stops once every sender is dropped.
pub fn spawn_writer(path: PathBuf) -> (LogSender, JoinHandle<std::io::Result<()>>) {
    let (tx, mut rx) = mpsc::unbounded_channel::<GameLogRecord>();
    let handle = tokio::spawn(async move {
        let mut file = tokio::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .await?;
        while let Some(record) = rx.recv().await {
            let mut line = serde_json::to_vec(&record).map_err(std::io::Error::other)?;
            line.push(b'\n');
            file.write_all(&line).await?;
            file.flush().await?;
        }
        Ok(())
    });
    (tx, handle)
}
