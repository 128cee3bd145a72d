//! Adapters from raw harness logs (JSON lines) to normalized `RunTrace`s.
//!
//! Both dialects share `meta`, `error` and `rate_limit` lines. Timestamps
//! (`ts`) may be seconds or RFC 3339 strings; if any line lacks one, every
//! event falls back to its index.
//!
//! `batched_mutations`: `file_change` lines carry a `changes` array of
//! `{path, kind: add|overwrite|update|delete, ...}` entries, `exec` lines
//! carry `command` and `exit_code`, `web_search` / `tool_search` lines are
//! searches.
//!
//! `per_file_tools`: `tool_use` lines carry `tool`, `input` and `is_error`;
//! `Write`, `Edit`, `MultiEdit`, `NotebookEdit` and `Delete` mutate one file.

use std::collections::BTreeMap;
use std::str::FromStr;

use regex::RegexSet;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::TraceError;
use crate::model::{normalize_mutation, EventCategory, MutationAction, MutationKind, RunTrace, TraceEvent, FORMAT_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dialect {
    BatchedMutations,
    PerFileTools,
}

impl FromStr for Dialect {
    type Err = TraceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "batched_mutations" | "batched" => Ok(Dialect::BatchedMutations),
            "per_file_tools" | "per_file" => Ok(Dialect::PerFileTools),
            other => Err(TraceError::UnknownDialect(other.to_string())),
        }
    }
}

/// Command-text classification tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    /// Case-insensitive regexes marking build, test, lint, probe and
    /// container-startup commands.
    pub verify_patterns: Vec<String>,
    /// Programs whose invocation only reads.
    pub read_only_commands: Vec<String>,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        let verify = [
            r"\brun\s+(build|test|tests|lint|typecheck|check|e2e|preview|dev|start)\b",
            r"\b(npm|pnpm|yarn|bun)\s+(test|t)\b",
            r"\b(pytest|jest|vitest|mocha|playwright|cypress|puppeteer|lighthouse)\b",
            r"\bpython3?\s+-m\s+(pytest|unittest)\b",
            r"\bcargo\s+(build|test|check|clippy|run)\b",
            r"\bgo\s+(build|test|vet)\b",
            r"\b(eslint|tsc|ruff|flake8|mypy|pylint|prettier\s+--check)\b",
            r"\b(next|vite|webpack|ng)\s+build\b",
            r"\bcompose\s+up\b",
            r"\bdocker(-compose)?\s+(run|build|up)\b",
            r"\b(curl|wget|httpie)\b",
            r"\b(make|mvn|gradle|gradlew)\b",
        ];
        let read_only = [
            "cat", "ls", "find", "rg", "grep", "egrep", "head", "tail", "less", "more", "tree", "wc", "pwd", "stat",
            "file", "du", "which", "echo", "sed", "awk", "diff", "sort", "uniq", "cut", "basename", "dirname",
            "realpath", "readlink", "fd", "jq", "xxd", "od",
        ];
        ClassifierConfig {
            verify_patterns: verify.iter().map(|s| s.to_string()).collect(),
            read_only_commands: read_only.iter().map(|s| s.to_string()).collect(),
        }
    }
}

pub struct CommandClassifier {
    verify: RegexSet,
    read_only: Vec<String>,
}

impl CommandClassifier {
    pub fn new(config: &ClassifierConfig) -> Result<Self, TraceError> {
        let patterns: Vec<String> = config.verify_patterns.iter().map(|p| format!("(?i){p}")).collect();
        let verify = RegexSet::new(&patterns).map_err(|e| TraceError::Config(e.to_string()))?;
        Ok(CommandClassifier { verify, read_only: config.read_only_commands.clone() })
    }

    fn segment_is_read_only(&self, segment: &str) -> bool {
        let mut words = segment.split_whitespace().skip_while(|w| w.contains('=') && !w.starts_with('-'));
        let Some(program) = words.next() else {
            return true;
        };
        let program = program.rsplit('/').next().unwrap_or(program);
        if program == "cd" {
            return true;
        }
        if program == "sed" && segment.split_whitespace().any(|w| w.starts_with("-i") || w == "--in-place") {
            return false;
        }
        if program == "find" && segment.split_whitespace().any(|w| w == "-delete" || w == "-exec") {
            return false;
        }
        self.read_only.iter().any(|r| r == program)
    }

    /// Category of a shell command from its text and failure flag. Failure
    /// wins over verify.
    pub fn classify(&self, command: &str, failed: bool) -> EventCategory {
        if failed {
            return EventCategory::Failure;
        }
        if self.verify.is_match(command) {
            return EventCategory::Verify;
        }
        let stripped = command
            .replace("2>&1", "")
            .replace("2>/dev/null", "")
            .replace(">/dev/null", "")
            .replace("> /dev/null", "");
        if stripped.contains('>') {
            return EventCategory::Other;
        }
        let segments: Vec<&str> = stripped
            .split(['|', ';', '&', '\n'])
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        if !segments.is_empty() && segments.iter().all(|s| self.segment_is_read_only(s)) {
            EventCategory::Inspect
        } else {
            EventCategory::Other
        }
    }
}

/// Labels applied to a parsed run, overriding its `meta` line.
#[derive(Debug, Clone, Default)]
pub struct RunLabels {
    pub run_id: Option<String>,
    pub model_label: Option<String>,
    pub condition_label: Option<String>,
    pub task_label: Option<String>,
    pub pick_label: Option<String>,
    pub score: Option<f64>,
}

struct Builder<'a> {
    classifier: &'a CommandClassifier,
    sizes: BTreeMap<String, u64>,
    cwd: Option<String>,
    events: Vec<(Option<f64>, TraceEvent)>,
    mutations: Vec<(usize, MutationAction)>,
    meta: BTreeMap<String, Value>,
    scaffold: BTreeMap<String, u64>,
}

fn malformed(line: usize, message: impl Into<String>) -> TraceError {
    TraceError::MalformedEvent { line, message: message.into() }
}

fn timestamp(v: &Value, line: usize) -> Result<Option<f64>, TraceError> {
    match v.get("ts").or_else(|| v.get("timestamp")) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Number(n)) => Ok(n.as_f64()),
        Some(Value::String(s)) => chrono::DateTime::parse_from_rfc3339(s)
            .map(|d| Some(d.timestamp_micros() as f64 / 1e6))
            .map_err(|e| malformed(line, format!("bad timestamp `{s}`: {e}"))),
        Some(other) => Err(malformed(line, format!("bad timestamp {other}"))),
    }
}

fn text_len(v: Option<&Value>) -> Option<i64> {
    v.and_then(Value::as_str).map(|s| s.len() as i64)
}

fn int(v: Option<&Value>) -> Option<i64> {
    v.and_then(Value::as_i64)
}

/// Bytes removed and added by a unified diff body.
fn diff_bytes(diff: &str) -> (i64, i64) {
    let (mut old, mut new) = (0i64, 0i64);
    for line in diff.lines() {
        if line.starts_with("---") || line.starts_with("+++") {
            continue;
        }
        if let Some(rest) = line.strip_prefix('-') {
            old += rest.len() as i64 + 1;
        } else if let Some(rest) = line.strip_prefix('+') {
            new += rest.len() as i64 + 1;
        }
    }
    (old, new)
}

impl<'a> Builder<'a> {
    fn path(&self, raw: &str) -> String {
        let mut p = raw;
        if let Some(cwd) = &self.cwd {
            if let Some(rest) = p.strip_prefix(cwd.as_str()) {
                p = rest.trim_start_matches('/');
            }
        }
        p.trim_start_matches("./").to_string()
    }

    fn push_event(&mut self, ts: Option<f64>, category: EventCategory, raw_kind: &str, files: u32, search: bool, command: Option<String>) {
        self.events.push((
            ts,
            TraceEvent {
                timestamp: 0.0,
                category,
                search_flag: search,
                files_touched: files,
                raw_kind: raw_kind.to_string(),
                command_text: command,
            },
        ));
    }

    fn mutate(&mut self, line: usize, kind: MutationKind, path: &str, old: i64, new: i64) -> Result<(), TraceError> {
        let path = self.path(path);
        let before = self.sizes.get(&path).copied().unwrap_or(0) as i64;
        let action = normalize_mutation(kind, &path, before, old, new).map_err(|e| malformed(line, e.to_string()))?;
        match kind {
            MutationKind::Delete => {
                self.sizes.remove(&path);
            }
            _ => {
                self.sizes.insert(path, action.after_bytes);
            }
        }
        self.mutations.push((self.events.len(), action));
        Ok(())
    }

    fn common(&mut self, line: usize, kind: &str, v: &Value, ts: Option<f64>) -> Result<bool, TraceError> {
        match kind {
            "meta" => {
                if let Some(obj) = v.as_object() {
                    for (k, val) in obj {
                        self.meta.insert(k.clone(), val.clone());
                    }
                }
                if let Some(cwd) = v.get("cwd").and_then(Value::as_str) {
                    self.cwd = Some(cwd.trim_end_matches('/').to_string());
                }
                if let Some(m) = v.get("scaffold_manifest") {
                    let m: BTreeMap<String, u64> =
                        serde_json::from_value(m.clone()).map_err(|e| malformed(line, format!("scaffold_manifest: {e}")))?;
                    for (k, b) in m {
                        self.scaffold.insert(k.clone(), b);
                        self.sizes.entry(k).or_insert(b);
                    }
                }
                Ok(true)
            }
            "error" => {
                self.push_event(ts, EventCategory::Failure, kind, 1, false, None);
                Ok(true)
            }
            "rate_limit" => {
                let rejected = v.get("rejected").and_then(Value::as_bool).unwrap_or(false);
                let cat = if rejected { EventCategory::Failure } else { EventCategory::Other };
                self.push_event(ts, cat, kind, 1, false, None);
                Ok(true)
            }
            _ => Ok(false),
        }
    }

    fn batched(&mut self, line: usize, v: &Value) -> Result<(), TraceError> {
        let kind = v.get("type").and_then(Value::as_str).ok_or_else(|| malformed(line, "missing `type`"))?;
        let ts = timestamp(v, line)?;
        if self.common(line, kind, v, ts)? {
            return Ok(());
        }
        match kind {
            "file_change" => {
                if v.get("error").is_some_and(|e| !e.is_null()) {
                    self.push_event(ts, EventCategory::Failure, kind, 1, false, None);
                    return Ok(());
                }
                let changes = v
                    .get("changes")
                    .and_then(Value::as_array)
                    .ok_or_else(|| malformed(line, "file_change without `changes` array"))?;
                if changes.is_empty() {
                    return Err(malformed(line, "file_change with no changes"));
                }
                let n = changes.len() as u32;
                for c in changes {
                    let path = c.get("path").and_then(Value::as_str).ok_or_else(|| malformed(line, "change without `path`"))?;
                    match c.get("kind").and_then(Value::as_str) {
                        Some("add") | Some("overwrite") | Some("write") => {
                            let new = int(c.get("new_bytes"))
                                .or_else(|| int(c.get("bytes")))
                                .or_else(|| text_len(c.get("content")))
                                .ok_or_else(|| malformed(line, "write change without size"))?;
                            self.mutate(line, MutationKind::Write, path, 0, new)?;
                        }
                        Some("update") | Some("edit") => {
                            let (old, new) = match c.get("diff").and_then(Value::as_str) {
                                Some(d) => diff_bytes(d),
                                None => (
                                    int(c.get("old_bytes")).ok_or_else(|| malformed(line, "update without `old_bytes` or `diff`"))?,
                                    int(c.get("new_bytes")).ok_or_else(|| malformed(line, "update without `new_bytes` or `diff`"))?,
                                ),
                            };
                            self.mutate(line, MutationKind::Edit, path, old, new)?;
                        }
                        Some("delete") => self.mutate(line, MutationKind::Delete, path, 0, 0)?,
                        other => return Err(malformed(line, format!("unknown change kind {other:?}"))),
                    }
                }
                self.push_event(ts, EventCategory::Write, kind, n, false, None);
            }
            "exec" | "shell" => {
                let command = match v.get("command") {
                    Some(Value::String(s)) => s.clone(),
                    Some(Value::Array(a)) => a.iter().filter_map(Value::as_str).collect::<Vec<_>>().join(" "),
                    _ => return Err(malformed(line, "exec without `command`")),
                };
                let failed = int(v.get("exit_code")).is_some_and(|c| c != 0)
                    || v.get("error").is_some_and(|e| !e.is_null());
                let cat = self.classifier.classify(&command, failed);
                self.push_event(ts, cat, kind, 1, false, Some(command));
            }
            "web_search" | "tool_search" => self.push_event(ts, EventCategory::Inspect, kind, 1, true, None),
            "read" | "list" => self.push_event(ts, EventCategory::Inspect, kind, 1, false, None),
            other => self.push_event(ts, EventCategory::Other, other, 1, false, None),
        }
        Ok(())
    }

    fn per_file(&mut self, line: usize, v: &Value) -> Result<(), TraceError> {
        let kind = v.get("type").and_then(Value::as_str).ok_or_else(|| malformed(line, "missing `type`"))?;
        let ts = timestamp(v, line)?;
        if self.common(line, kind, v, ts)? {
            return Ok(());
        }
        if kind != "tool_use" {
            self.push_event(ts, EventCategory::Other, kind, 1, false, None);
            return Ok(());
        }
        let tool = v.get("tool").and_then(Value::as_str).ok_or_else(|| malformed(line, "tool_use without `tool`"))?;
        let input = v.get("input").cloned().unwrap_or(Value::Null);
        let failed = v.get("is_error").and_then(Value::as_bool).unwrap_or(false);
        let file = || {
            input
                .get("file_path")
                .or_else(|| input.get("notebook_path"))
                .or_else(|| input.get("path"))
                .and_then(Value::as_str)
                .map(String::from)
                .ok_or_else(|| malformed(line, format!("{tool} without file path")))
        };
        match tool {
            "Write" | "Edit" | "MultiEdit" | "NotebookEdit" | "Delete" if failed => {
                self.push_event(ts, EventCategory::Failure, tool, 1, false, None);
            }
            "Write" => {
                let new = text_len(input.get("content"))
                    .or_else(|| int(input.get("new_bytes")))
                    .ok_or_else(|| malformed(line, "Write without content"))?;
                self.mutate(line, MutationKind::Write, &file()?, 0, new)?;
                self.push_event(ts, EventCategory::Write, tool, 1, false, None);
            }
            "Edit" | "NotebookEdit" => {
                let old = text_len(input.get("old_string"))
                    .or_else(|| text_len(input.get("old_source")))
                    .or_else(|| int(input.get("old_bytes")))
                    .unwrap_or(0);
                let new = text_len(input.get("new_string"))
                    .or_else(|| text_len(input.get("new_source")))
                    .or_else(|| int(input.get("new_bytes")))
                    .ok_or_else(|| malformed(line, format!("{tool} without new text")))?;
                self.mutate(line, MutationKind::Edit, &file()?, old, new)?;
                self.push_event(ts, EventCategory::Write, tool, 1, false, None);
            }
            "MultiEdit" => {
                let edits = input
                    .get("edits")
                    .and_then(Value::as_array)
                    .ok_or_else(|| malformed(line, "MultiEdit without `edits`"))?;
                let old: i64 = edits.iter().filter_map(|e| text_len(e.get("old_string")).or_else(|| int(e.get("old_bytes")))).sum();
                let new: i64 = edits.iter().filter_map(|e| text_len(e.get("new_string")).or_else(|| int(e.get("new_bytes")))).sum();
                self.mutate(line, MutationKind::Edit, &file()?, old, new)?;
                self.push_event(ts, EventCategory::Write, tool, 1, false, None);
            }
            "Delete" => {
                self.mutate(line, MutationKind::Delete, &file()?, 0, 0)?;
                self.push_event(ts, EventCategory::Write, tool, 1, false, None);
            }
            "Bash" => {
                let command = input
                    .get("command")
                    .and_then(Value::as_str)
                    .ok_or_else(|| malformed(line, "Bash without command"))?
                    .to_string();
                let failed = failed || int(v.get("exit_code")).is_some_and(|c| c != 0);
                let cat = self.classifier.classify(&command, failed);
                self.push_event(ts, cat, tool, 1, false, Some(command));
            }
            _ if failed => self.push_event(ts, EventCategory::Failure, tool, 1, false, None),
            "Read" | "Grep" | "Glob" | "LS" | "NotebookRead" | "WebFetch" => {
                self.push_event(ts, EventCategory::Inspect, tool, 1, false, None)
            }
            "WebSearch" | "ToolSearch" => self.push_event(ts, EventCategory::Inspect, tool, 1, true, None),
            other => self.push_event(ts, EventCategory::Other, other, 1, false, None),
        }
        Ok(())
    }
}

fn meta_str(meta: &BTreeMap<String, Value>, keys: &[&str]) -> Option<String> {
    keys.iter().find_map(|k| meta.get(*k).and_then(Value::as_str).map(String::from))
}

/// Parses one JSON-lines log of the given dialect.
pub fn parse_trace(
    text: &str,
    dialect: Dialect,
    scaffold: &BTreeMap<String, u64>,
    labels: &RunLabels,
    classifier: &CommandClassifier,
) -> Result<RunTrace, TraceError> {
    let mut b = Builder {
        classifier,
        sizes: scaffold.clone(),
        cwd: None,
        events: Vec::new(),
        mutations: Vec::new(),
        meta: BTreeMap::new(),
        scaffold: scaffold.clone(),
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(raw).map_err(|e| malformed(line, e.to_string()))?;
        if !v.is_object() {
            return Err(malformed(line, "expected a JSON object"));
        }
        match dialect {
            Dialect::BatchedMutations => b.batched(line, &v)?,
            Dialect::PerFileTools => b.per_file(line, &v)?,
        }
    }

    let indexed = b.events.iter().any(|(ts, _)| ts.is_none());
    let mut events: Vec<TraceEvent> = b
        .events
        .into_iter()
        .enumerate()
        .map(|(i, (ts, mut e))| {
            e.timestamp = if indexed { i as f64 } else { ts.unwrap_or(0.0) };
            e
        })
        .collect();
    let mut mutations: Vec<MutationAction> = b
        .mutations
        .into_iter()
        .map(|(event_index, mut m)| {
            m.timestamp = events.get(event_index).map(|e| e.timestamp).unwrap_or(0.0);
            m
        })
        .collect();
    events.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    mutations.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));

    let meta = &b.meta;
    let score = labels.score.or_else(|| meta.get("score").and_then(Value::as_f64));
    let trace = RunTrace {
        format_version: FORMAT_VERSION,
        run_id: labels.run_id.clone().or_else(|| meta_str(meta, &["run_id", "id"])).unwrap_or_else(|| "run".into()),
        model_label: labels.model_label.clone().or_else(|| meta_str(meta, &["model", "model_label"])).unwrap_or_else(|| "unknown".into()),
        condition_label: labels.condition_label.clone().or_else(|| meta_str(meta, &["condition", "condition_label"])).unwrap_or_default(),
        task_label: labels.task_label.clone().or_else(|| meta_str(meta, &["task", "task_label"])).unwrap_or_default(),
        pick_label: labels.pick_label.clone().or_else(|| meta_str(meta, &["pick", "pick_label"])),
        score,
        events,
        mutations,
        scaffold_manifest: b.scaffold,
    };
    trace.validated().map_err(|e| TraceError::Invalid(e.to_string()))
}
