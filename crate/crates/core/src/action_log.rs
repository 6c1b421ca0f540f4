//! Compact action-log notation.
//!
//! One event per line: `T{turn}:P{agent}-{CODE}:{arg}`, e.g. `T3:P1-CTB:10`.
//!
//! | code | arg |
//! |------|-----|
//! | CTB  | amount |
//! | PUN  | target,tokens |
//! | BRD  | text |
//! | PRV  | to,text |
//! | MOV  | N, S, E or W |
//! | GTH  | wood,stone,gems gathered |
//! | DEP  | wood,stone,gems deposited |
//! | GIV  | target,resource,units |
//! | ATK  | target,1 on success else 0 |
//! | STL  | target,resource,1 on success else 0 |
//! | PRO  | id,target,offer resource,offer units,request resource,request units |
//! | ACC  | id,1 if the swap happened else 0 |
//! | REJ  | id |
//! | HRD  | - |
//!
//! Message text escapes `\` as `\\`, newline as `\n` and carriage return as `\r`.
//! Encoded logs keep the earliest [`LOG_CAP`] events followed by one marker line.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::agents::AgentId;
use crate::env::gridworld::{Direction, Resource};
use crate::env::trading::Good;

pub const LOG_CAP: usize = 400;
const MARKER_PREFIX: &str = "... ";
const MARKER_SUFFIX: &str = " more events truncated";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    Contribute(u32),
    Punish { target: AgentId, tokens: u32 },
    Broadcast(String),
    Private { to: AgentId, text: String },
    Move(Direction),
    Gather([u32; 3]),
    Deposit([u32; 3]),
    Give { target: AgentId, resource: Resource, units: u32 },
    Attack { target: AgentId, success: bool },
    Steal { target: AgentId, resource: Resource, success: bool },
    Propose {
        id: u32,
        target: AgentId,
        offer: (Good, u32),
        request: (Good, u32),
    },
    Accept { id: u32, swapped: bool },
    Reject { id: u32 },
    Hoard,
}

impl EventKind {
    pub fn code(&self) -> &'static str {
        match self {
            EventKind::Contribute(_) => "CTB",
            EventKind::Punish { .. } => "PUN",
            EventKind::Broadcast(_) => "BRD",
            EventKind::Private { .. } => "PRV",
            EventKind::Move(_) => "MOV",
            EventKind::Gather(_) => "GTH",
            EventKind::Deposit(_) => "DEP",
            EventKind::Give { .. } => "GIV",
            EventKind::Attack { .. } => "ATK",
            EventKind::Steal { .. } => "STL",
            EventKind::Propose { .. } => "PRO",
            EventKind::Accept { .. } => "ACC",
            EventKind::Reject { .. } => "REJ",
            EventKind::Hoard => "HRD",
        }
    }

    pub fn is_communication(&self) -> bool {
        matches!(self, EventKind::Broadcast(_) | EventKind::Private { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub turn: u32,
    pub agent: AgentId,
    pub kind: EventKind,
}

impl Event {
    pub fn new(turn: u32, agent: AgentId, kind: EventKind) -> Self {
        Self { turn, agent, kind }
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(text: &str) -> Result<String, String> {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(ch) = chars.next() {
        if ch != '\\' {
            out.push(ch);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => return Err(format!("bad escape \\{}", other.map(String::from).unwrap_or_default())),
        }
    }
    Ok(out)
}

fn flag(b: bool) -> u8 {
    b as u8
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}:P{}-{}:", self.turn, self.agent.0, self.kind.code())?;
        match &self.kind {
            EventKind::Contribute(n) => write!(f, "{n}"),
            EventKind::Punish { target, tokens } => write!(f, "{},{tokens}", target.0),
            EventKind::Broadcast(text) => f.write_str(&escape(text)),
            EventKind::Private { to, text } => write!(f, "{},{}", to.0, escape(text)),
            EventKind::Move(d) => write!(f, "{d}"),
            EventKind::Gather(u) | EventKind::Deposit(u) => write!(f, "{},{},{}", u[0], u[1], u[2]),
            EventKind::Give {
                target,
                resource,
                units,
            } => write!(f, "{},{resource},{units}", target.0),
            EventKind::Attack { target, success } => write!(f, "{},{}", target.0, flag(*success)),
            EventKind::Steal {
                target,
                resource,
                success,
            } => write!(f, "{},{resource},{}", target.0, flag(*success)),
            EventKind::Propose {
                id,
                target,
                offer,
                request,
            } => write!(f, "{id},{},{},{},{},{}", target.0, offer.0, offer.1, request.0, request.1),
            EventKind::Accept { id, swapped } => write!(f, "{id},{}", flag(*swapped)),
            EventKind::Reject { id } => write!(f, "{id}"),
            EventKind::Hoard => f.write_str("-"),
        }
    }
}

fn parse_num<T: FromStr>(s: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("not a number: {s:?}"))
}

fn parse_agent(s: &str) -> Result<AgentId, String> {
    let n: u8 = parse_num(s)?;
    let a = AgentId(n);
    if a.is_valid() {
        Ok(a)
    } else {
        Err(format!("agent out of range: {n}"))
    }
}

fn parse_flag(s: &str) -> Result<bool, String> {
    match s {
        "1" => Ok(true),
        "0" => Ok(false),
        _ => Err(format!("expected 0 or 1, found {s:?}")),
    }
}

fn fields(arg: &str, n: usize) -> Result<Vec<&str>, String> {
    let parts: Vec<&str> = arg.split(',').collect();
    if parts.len() == n {
        Ok(parts)
    } else {
        Err(format!("expected {n} fields, found {}", parts.len()))
    }
}

fn triple(arg: &str) -> Result<[u32; 3], String> {
    let f = fields(arg, 3)?;
    Ok([parse_num(f[0])?, parse_num(f[1])?, parse_num(f[2])?])
}

impl FromStr for Event {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let rest = line.strip_prefix('T').ok_or("missing T prefix")?;
        let (turn, rest) = rest.split_once(":P").ok_or("missing :P separator")?;
        let (agent, rest) = rest.split_once('-').ok_or("missing - separator")?;
        let (code, arg) = rest.split_once(':').ok_or("missing code separator")?;
        let turn: u32 = parse_num(turn)?;
        let agent = parse_agent(agent)?;
        let kind = match code {
            "CTB" => EventKind::Contribute(parse_num(arg)?),
            "PUN" => {
                let f = fields(arg, 2)?;
                EventKind::Punish {
                    target: parse_agent(f[0])?,
                    tokens: parse_num(f[1])?,
                }
            }
            "BRD" => EventKind::Broadcast(unescape(arg)?),
            "PRV" => {
                let (to, text) = arg.split_once(',').ok_or("missing recipient")?;
                EventKind::Private {
                    to: parse_agent(to)?,
                    text: unescape(text)?,
                }
            }
            "MOV" => EventKind::Move(arg.parse()?),
            "GTH" => EventKind::Gather(triple(arg)?),
            "DEP" => EventKind::Deposit(triple(arg)?),
            "GIV" => {
                let f = fields(arg, 3)?;
                EventKind::Give {
                    target: parse_agent(f[0])?,
                    resource: f[1].parse()?,
                    units: parse_num(f[2])?,
                }
            }
            "ATK" => {
                let f = fields(arg, 2)?;
                EventKind::Attack {
                    target: parse_agent(f[0])?,
                    success: parse_flag(f[1])?,
                }
            }
            "STL" => {
                let f = fields(arg, 3)?;
                EventKind::Steal {
                    target: parse_agent(f[0])?,
                    resource: f[1].parse()?,
                    success: parse_flag(f[2])?,
                }
            }
            "PRO" => {
                let f = fields(arg, 6)?;
                EventKind::Propose {
                    id: parse_num(f[0])?,
                    target: parse_agent(f[1])?,
                    offer: (f[2].parse()?, parse_num(f[3])?),
                    request: (f[4].parse()?, parse_num(f[5])?),
                }
            }
            "ACC" => {
                let f = fields(arg, 2)?;
                EventKind::Accept {
                    id: parse_num(f[0])?,
                    swapped: parse_flag(f[1])?,
                }
            }
            "REJ" => EventKind::Reject { id: parse_num(arg)? },
            "HRD" if arg == "-" => EventKind::Hoard,
            other => return Err(format!("unknown event code {other:?}")),
        };
        Ok(Event { turn, agent, kind })
    }
}

impl Serialize for Event {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Event {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("action log line {line} (byte offset {offset}): {message}")]
pub struct DecodeError {
    pub line: usize,
    pub offset: usize,
    pub message: String,
}

/// Renders events one per line, keeping the earliest [`LOG_CAP`].
pub fn encode_action_log(events: &[Event]) -> String {
    let mut lines: Vec<String> = events.iter().take(LOG_CAP).map(|e| e.to_string()).collect();
    if events.len() > LOG_CAP {
        lines.push(format!("{MARKER_PREFIX}{}{MARKER_SUFFIX}", events.len() - LOG_CAP));
    }
    lines.join("\n")
}

fn truncation_marker(line: &str) -> Option<usize> {
    line.strip_prefix(MARKER_PREFIX)?
        .strip_suffix(MARKER_SUFFIX)?
        .parse()
        .ok()
}

/// Number of events dropped by truncation, zero for a complete log.
pub fn truncated_count(text: &str) -> usize {
    text.lines().last().and_then(truncation_marker).unwrap_or(0)
}

/// Parses a log back into events. A trailing truncation marker is skipped.
pub fn decode_action_log(text: &str) -> Result<Vec<Event>, DecodeError> {
    let mut out = Vec::new();
    let mut offset = 0;
    let lines: Vec<&str> = text.split('\n').collect();
    for (i, line) in lines.iter().enumerate() {
        let is_last = i + 1 == lines.len();
        if line.is_empty() && is_last {
            break;
        }
        if is_last && truncation_marker(line).is_some() {
            break;
        }
        let event = line.parse().map_err(|message| DecodeError {
            line: i + 1,
            offset,
            message,
        })?;
        out.push(event);
        offset += line.len() + 1;
    }
    Ok(out)
}
