//! Study state: sessions, the presentation state machine and export.
//!
//! All mutations go through the study's lock and are journaled before they
//! take effect in memory, so a restart replays to exactly the acknowledged
//! state.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::config::{valid_id, ConditionSpec, Presentation, StudyConfig, Timing, SCALE};
use crate::journal::{Event, Journal, Role};
use crate::playlist::{build_playlist, Playlist};
use crate::{Result, SessionError};

pub const STUDY_FILE: &str = "study.json";
pub const JOURNAL_FILE: &str = "journal.jsonl";

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

#[derive(Debug, Clone)]
struct SessionState {
    playlist: Playlist,
    started_ms: u64,
    cursor: usize,
    /// Stimuli of the current item already delivered.
    served: Vec<Role>,
    scores: Vec<u8>,
}

impl SessionState {
    fn complete(&self) -> bool {
        self.cursor == self.playlist.len()
    }

    /// Next stimulus the protocol allows, or `None` when the item may be scored.
    fn pending(&self, presentation: Presentation) -> Vec<Role> {
        let missing = |r: Role| !self.served.contains(&r);
        match presentation {
            Presentation::Sequential => [Role::Reference, Role::Impaired].into_iter().filter(|&r| missing(r)).take(1).collect(),
            Presentation::SideBySide => {
                if missing(Role::Reference) || missing(Role::Impaired) {
                    vec![Role::Reference, Role::Impaired]
                } else {
                    Vec::new()
                }
            }
        }
    }

    fn may_serve(&self, role: Role, presentation: Presentation) -> bool {
        if self.complete() {
            return false;
        }
        match presentation {
            // re-serving is fine (page refresh), impaired only after reference
            Presentation::Sequential => role == Role::Reference || self.served.contains(&Role::Reference),
            Presentation::SideBySide => true,
        }
    }

    fn apply(&mut self, event: &Event) {
        match *event {
            Event::Served { item, role, .. } if item == self.cursor && !self.served.contains(&role) => {
                self.served.push(role)
            }
            Event::Scored { item, score, .. } if item == self.cursor && !self.complete() => {
                self.scores.push(score);
                self.cursor += 1;
                self.served.clear();
            }
            // duplicates from replay are ignored
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StimulusLink {
    pub role: Role,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Advisory {
    pub elapsed_s: f64,
    pub over_time: bool,
    pub item_limit_reached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    /// Show these stimuli (in order) and fetch them.
    Present,
    /// Both stimuli were delivered; collect the score for `item`.
    Score,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Next {
    pub step: Step,
    pub item: usize,
    pub total: usize,
    pub presentation: Presentation,
    pub stimuli: Vec<StimulusLink>,
    pub timing: Timing,
    pub scale: Vec<ScaleLevel>,
    pub advisory: Advisory,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleLevel {
    pub score: u8,
    pub label: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionStatus {
    pub subject_id: String,
    pub scored: usize,
    pub total: usize,
    pub complete: bool,
    pub advisory: Advisory,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ack {
    pub item: usize,
    pub score: u8,
    pub scored: usize,
    pub complete: bool,
}

struct Inner {
    journal: Journal,
    sessions: BTreeMap<String, SessionState>,
}

pub struct Study {
    config: StudyConfig,
    dir: PathBuf,
    inner: Mutex<Inner>,
}

impl Study {
    /// Creates the study directory under `data_dir`, or reopens it when a
    /// study with the same name and identical configuration exists.
    pub fn create(data_dir: &Path, config: StudyConfig) -> Result<Study> {
        config.validate()?;
        let dir = data_dir.join(&config.name);
        let file = dir.join(STUDY_FILE);
        if file.exists() {
            let study = Study::open(&dir)?;
            if study.config != config {
                return Err(SessionError::Conflict(format!("study `{}` exists with a different configuration", config.name)));
            }
            return Ok(study);
        }
        fs::create_dir_all(&dir).map_err(|source| SessionError::Io { path: dir.clone(), source })?;
        let json = serde_json::to_vec_pretty(&config).expect("config serializes");
        fs::write(&file, json).map_err(|source| SessionError::Io { path: file.clone(), source })?;
        Study::open(&dir)
    }

    pub fn open(dir: &Path) -> Result<Study> {
        let file = dir.join(STUDY_FILE);
        let text = fs::read(&file).map_err(|source| SessionError::Io { path: file.clone(), source })?;
        let config: StudyConfig = serde_json::from_slice(&text)
            .map_err(|e| SessionError::Invalid(format!("{}: {e}", file.display())))?;
        let (journal, events) = Journal::open(&dir.join(JOURNAL_FILE))?;
        let mut sessions: BTreeMap<String, SessionState> = BTreeMap::new();
        for ev in &events {
            match ev {
                Event::SessionStarted { subject, at_ms, .. } => {
                    if !sessions.contains_key(subject) {
                        let playlist = build_playlist(&config.conditions, subject, config.seed)?;
                        sessions.insert(subject.clone(), SessionState {
                            playlist,
                            started_ms: *at_ms,
                            cursor: 0,
                            served: Vec::new(),
                            scores: Vec::new(),
                        });
                    }
                }
                Event::Served { subject, .. } | Event::Scored { subject, .. } => {
                    if let Some(s) = sessions.get_mut(subject) {
                        s.apply(ev);
                    }
                }
            }
        }
        Ok(Study { config, dir: dir.to_path_buf(), inner: Mutex::new(Inner { journal, sessions }) })
    }

    pub fn id(&self) -> &str {
        &self.config.name
    }

    pub fn config(&self) -> &StudyConfig {
        &self.config
    }

    pub fn journal_path(&self) -> PathBuf {
        self.dir.join(JOURNAL_FILE)
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        // a panicked request cannot leave state half-applied: events are
        // journaled first and applied in one step
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn advisory(&self, s: &SessionState) -> Advisory {
        let elapsed_s = now_ms().saturating_sub(s.started_ms) as f64 / 1000.0;
        Advisory {
            elapsed_s,
            over_time: elapsed_s > self.config.limits.max_minutes * 60.0,
            item_limit_reached: self.config.limits.max_items.is_some_and(|m| s.cursor >= m),
        }
    }

    fn status_of(&self, subject: &str, s: &SessionState) -> SessionStatus {
        SessionStatus {
            subject_id: subject.to_string(),
            scored: s.cursor,
            total: s.playlist.len(),
            complete: s.complete(),
            advisory: self.advisory(s),
        }
    }

    /// Starts a session for `subject`, or returns the existing one (resume).
    pub fn start_session(&self, subject: &str) -> Result<SessionStatus> {
        if !valid_id(subject) {
            return Err(SessionError::Invalid(format!(
                "subject id `{subject}` must be 1-64 characters of [A-Za-z0-9_-]"
            )));
        }
        let mut inner = self.lock();
        if let Some(s) = inner.sessions.get(subject) {
            return Ok(self.status_of(subject, s));
        }
        let playlist = build_playlist(&self.config.conditions, subject, self.config.seed)?;
        let at_ms = now_ms();
        inner.journal.append(&Event::SessionStarted { subject: subject.to_string(), seed: playlist.seed, at_ms })?;
        let state = SessionState { playlist, started_ms: at_ms, cursor: 0, served: Vec::new(), scores: Vec::new() };
        let status = self.status_of(subject, &state);
        inner.sessions.insert(subject.to_string(), state);
        Ok(status)
    }

    pub fn status(&self, subject: &str) -> Result<SessionStatus> {
        let inner = self.lock();
        let s = session(&inner, subject)?;
        Ok(self.status_of(subject, s))
    }

    /// Opaque token naming one stimulus of one item of one session; reveals
    /// nothing about the condition.
    fn token(&self, subject: &str, item: usize, role: Role) -> String {
        let mut h = Sha256::new();
        h.update(self.config.seed.to_le_bytes());
        h.update(subject.as_bytes());
        h.update((item as u64).to_le_bytes());
        h.update([role as u8]);
        h.finalize()[..12].iter().map(|b| format!("{b:02x}")).collect()
    }

    fn link(&self, subject: &str, item: usize, role: Role) -> StimulusLink {
        StimulusLink {
            role,
            url: format!(
                "/api/studies/{}/sessions/{subject}/stimuli/{}",
                self.config.name,
                self.token(subject, item, role)
            ),
        }
    }

    pub fn next(&self, subject: &str) -> Result<Next> {
        let inner = self.lock();
        let s = session(&inner, subject)?;
        let pending = if s.complete() { Vec::new() } else { s.pending(self.config.presentation) };
        let step = if s.complete() {
            Step::Complete
        } else if pending.is_empty() {
            Step::Score
        } else {
            Step::Present
        };
        Ok(Next {
            step,
            item: s.cursor,
            total: s.playlist.len(),
            presentation: self.config.presentation,
            stimuli: pending.iter().map(|&r| self.link(subject, s.cursor, r)).collect(),
            timing: self.config.timing,
            scale: SCALE.iter().map(|&(score, label)| ScaleLevel { score, label }).collect(),
            advisory: self.advisory(s),
        })
    }

    fn condition_at(&self, s: &SessionState, item: usize) -> &ConditionSpec {
        &self.config.conditions[s.playlist.order[item]]
    }

    /// Resolves a stimulus token for the current item and records delivery.
    pub fn serve(&self, subject: &str, token: &str) -> Result<PathBuf> {
        let mut inner = self.lock();
        let s = session(&inner, subject)?;
        if s.complete() {
            return Err(SessionError::Conflict("session is complete".into()));
        }
        let item = s.cursor;
        let role = [Role::Reference, Role::Impaired]
            .into_iter()
            .find(|&r| self.token(subject, item, r) == token)
            .ok_or_else(|| SessionError::NotFound("stimulus is not part of the current item".into()))?;
        if !s.may_serve(role, self.config.presentation) {
            return Err(SessionError::Conflict("the reference must be shown before the impaired stimulus".into()));
        }
        let cond = self.condition_at(s, item);
        let path = self.config.stimulus_root.join(match role {
            Role::Reference => &cond.reference,
            Role::Impaired => &cond.impaired,
        });
        if !s.served.contains(&role) {
            let ev = Event::Served { subject: subject.to_string(), item, role, at_ms: now_ms() };
            inner.journal.append(&ev)?;
            inner.sessions.get_mut(subject).expect("session exists").apply(&ev);
        }
        Ok(path)
    }

    pub fn submit(&self, subject: &str, item: usize, score: i64) -> Result<Ack> {
        if !(1..=5).contains(&score) {
            return Err(SessionError::Invalid(format!("score {score} is outside 1..=5")));
        }
        let mut inner = self.lock();
        let s = session(&inner, subject)?;
        if s.complete() {
            return Err(SessionError::Conflict("session is complete".into()));
        }
        if item < s.cursor {
            return Err(SessionError::Conflict(format!("item {item} was already scored")));
        }
        if item > s.cursor || !s.pending(self.config.presentation).is_empty() {
            return Err(SessionError::Conflict(format!("item {item} has not been presented")));
        }
        let ev = Event::Scored {
            subject: subject.to_string(),
            item,
            condition: self.condition_at(s, item).id.clone(),
            score: score as u8,
            at_ms: now_ms(),
        };
        inner.journal.append(&ev)?;
        let s = inner.sessions.get_mut(subject).expect("session exists");
        s.apply(&ev);
        Ok(Ack { item, score: score as u8, scored: s.cursor, complete: s.complete() })
    }

    /// Scores of every session in the statistics CSV schema, plus a `partial`
    /// column for unfinished sessions. Sessions by subject, items in
    /// presentation order.
    pub fn export_csv(&self) -> String {
        let inner = self.lock();
        let mut out = String::from("subject_id,setup,hologram,codec,bpp,perspective,focus,score,partial\n");
        for (subject, s) in &inner.sessions {
            for (item, score) in s.scores.iter().enumerate() {
                let c = self.condition_at(s, item);
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    subject,
                    self.config.setup,
                    csv_field(&c.hologram),
                    csv_field(&c.codec),
                    c.bpp,
                    c.perspective,
                    c.focus,
                    score,
                    !s.complete()
                ));
            }
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn session<'a>(inner: &'a Inner, subject: &str) -> Result<&'a SessionState> {
    inner
        .sessions
        .get(subject)
        .ok_or_else(|| SessionError::NotFound(format!("no session for subject `{subject}`")))
}
