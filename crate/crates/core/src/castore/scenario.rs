//! Line-oriented availability scenarios.
//!
//! One directive per line; `#` starts a comment. Durations use humantime
//! syntax (`30m`, `10s`, `1h 30m`).
//!
//! ```text
//! ttl <dur>                              default TTL for nodes declared after it
//! node <id> origin|gateway|pinner [ttl=<dur>]
//! add <node> <label> <content...>        content is the rest of the line
//! fetch <via> <label> expect ok|notfound|integrity|offline
//! offline <node>
//! online <node>
//! corrupt <node> <label>                 node serves tampered bytes for label
//! refresh every <dur> via <gw,...> <label,...>
//! sync <pinner>                          pin every label added so far
//! tick <dur>                             advance clock; refresh daemons and GC run
//! gc <node>
//! expect <label> available|unavailable   check the availability law directly
//! ```

use std::collections::HashMap;
use std::time::Duration;

use super::refresh::{advance_with_refresh, RefreshDaemon};
use super::{pin_all, CastoreError, ContentId, Network, NodeKind, SimClock};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expect {
    Ok,
    NotFound,
    Integrity,
    Offline,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Ttl(Duration),
    Node {
        id: String,
        kind: NodeKind,
        ttl: Option<Duration>,
    },
    Add {
        node: String,
        label: String,
        content: String,
    },
    Fetch {
        via: String,
        label: String,
        expect: Expect,
    },
    Offline(String),
    Online(String),
    Corrupt {
        node: String,
        label: String,
    },
    Refresh {
        period: Duration,
        gateways: Vec<String>,
        labels: Vec<String>,
    },
    Sync(String),
    Tick(Duration),
    Gc(String),
    Expect {
        label: String,
        available: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Line {
    pub number: usize,
    pub step: Step,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {source}")]
    Run { line: usize, source: CastoreError },
    #[error("line {line}: unknown label {label}")]
    UnknownLabel { line: usize, label: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub line: usize,
    pub description: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Outcome {
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn duration(line: usize, text: &str) -> Result<Duration, ScenarioError> {
    humantime::parse_duration(text).map_err(|e| ScenarioError::Parse {
        line,
        message: format!("bad duration {text:?}: {e}"),
    })
}

fn list(text: &str) -> Vec<String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

pub fn parse(text: &str) -> Result<Vec<Line>, ScenarioError> {
    let mut lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let number = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: &str| ScenarioError::Parse {
            line: number,
            message: message.to_string(),
        };
        let words: Vec<&str> = content.split_whitespace().collect();
        let step = match words.as_slice() {
            ["ttl", rest @ ..] if !rest.is_empty() => Step::Ttl(duration(number, &rest.join(" "))?),
            ["node", id, kind, extra @ ..] => {
                let kind = match *kind {
                    "origin" => NodeKind::Origin,
                    "gateway" => NodeKind::Gateway,
                    "pinner" => NodeKind::Pinner,
                    other => return Err(err(&format!("unknown node kind {other}"))),
                };
                let ttl = match extra {
                    [] => None,
                    [opt] => match opt.strip_prefix("ttl=") {
                        Some(d) => Some(duration(number, d)?),
                        None => return Err(err("expected ttl=<duration>")),
                    },
                    _ => return Err(err("too many node options")),
                };
                Step::Node {
                    id: id.to_string(),
                    kind,
                    ttl,
                }
            }
            ["add", node, label, ..] => {
                let content = content
                    .splitn(4, char::is_whitespace)
                    .nth(3)
                    .unwrap_or("")
                    .to_string();
                Step::Add {
                    node: node.to_string(),
                    label: label.to_string(),
                    content,
                }
            }
            ["fetch", via, label, "expect", expect] => Step::Fetch {
                via: via.to_string(),
                label: label.to_string(),
                expect: match *expect {
                    "ok" => Expect::Ok,
                    "notfound" => Expect::NotFound,
                    "integrity" => Expect::Integrity,
                    "offline" => Expect::Offline,
                    other => return Err(err(&format!("unknown expectation {other}"))),
                },
            },
            ["offline", node] => Step::Offline(node.to_string()),
            ["online", node] => Step::Online(node.to_string()),
            ["corrupt", node, label] => Step::Corrupt {
                node: node.to_string(),
                label: label.to_string(),
            },
            ["refresh", "every", period, "via", gateways, labels] => Step::Refresh {
                period: duration(number, period)?,
                gateways: list(gateways),
                labels: list(labels),
            },
            ["sync", pinner] => Step::Sync(pinner.to_string()),
            ["tick", rest @ ..] if !rest.is_empty() => Step::Tick(duration(number, &rest.join(" "))?),
            ["gc", node] => Step::Gc(node.to_string()),
            ["expect", label, state] => Step::Expect {
                label: label.to_string(),
                available: match *state {
                    "available" => true,
                    "unavailable" => false,
                    other => return Err(err(&format!("unknown availability {other}"))),
                },
            },
            _ => return Err(err(&format!("unrecognised directive: {content}"))),
        };
        lines.push(Line { number, step });
    }
    Ok(lines)
}

/// Runs a parsed scenario on a fresh network.
pub fn run(lines: &[Line]) -> Result<(Network, Outcome), ScenarioError> {
    let network = Network::new(SimClock::new());
    let mut default_ttl = Network::DEFAULT_TTL;
    let mut labels: HashMap<String, ContentId> = HashMap::new();
    let mut daemons: Vec<RefreshDaemon> = Vec::new();
    let mut outcome = Outcome::default();

    for Line { number, step } in lines {
        let line = *number;
        let run_err = |source| ScenarioError::Run { line, source };
        let lookup = |label: &str| {
            labels
                .get(label)
                .copied()
                .ok_or_else(|| ScenarioError::UnknownLabel {
                    line,
                    label: label.to_string(),
                })
        };
        match step {
            Step::Ttl(ttl) => default_ttl = *ttl,
            Step::Node { id, kind, ttl } => {
                network.add_node_with_ttl(id.clone(), *kind, ttl.unwrap_or(default_ttl));
            }
            Step::Add {
                node,
                label,
                content,
            } => {
                let cid = network.add(node, content.as_bytes()).map_err(run_err)?;
                labels.insert(label.clone(), cid);
            }
            Step::Fetch { via, label, expect } => {
                let cid = lookup(label)?;
                let result = network.fetch(&cid, via);
                let passed = matches!(
                    (&result, expect),
                    (Ok(_), Expect::Ok)
                        | (Err(CastoreError::NotFound(_)), Expect::NotFound)
                        | (Err(CastoreError::IntegrityMismatch(_)), Expect::Integrity)
                        | (Err(CastoreError::NodeOffline(_)), Expect::Offline)
                );
                outcome.checks.push(Check {
                    line,
                    description: format!("fetch {label} via {via} expect {expect:?}"),
                    passed,
                    detail: match &result {
                        Ok(bytes) => format!("ok ({} bytes)", bytes.len()),
                        Err(e) => e.to_string(),
                    },
                });
            }
            Step::Offline(node) => network.set_online(node, false).map_err(run_err)?,
            Step::Online(node) => network.set_online(node, true).map_err(run_err)?,
            Step::Corrupt { node, label } => {
                let cid = lookup(label)?;
                network.corrupt(node, cid).map_err(run_err)?;
            }
            Step::Refresh {
                period,
                gateways,
                labels: tracked,
            } => {
                let cids = tracked
                    .iter()
                    .map(|l| lookup(l))
                    .collect::<Result<Vec<_>, _>>()?;
                daemons.push(RefreshDaemon::new(cids, gateways.clone(), *period));
            }
            Step::Sync(pinner) => {
                let report = pin_all(&network, pinner, labels.values().copied());
                if let Some((cid, err)) = report.failures.first() {
                    outcome.checks.push(Check {
                        line,
                        description: format!("sync {pinner}"),
                        passed: false,
                        detail: format!("{cid}: {err}"),
                    });
                }
            }
            Step::Tick(span) => {
                advance_with_refresh(&network, &mut daemons, *span);
            }
            Step::Gc(node) => {
                network.gc(node).map_err(run_err)?;
            }
            Step::Expect { label, available } => {
                let cid = lookup(label)?;
                let actual = network.is_available(&cid);
                outcome.checks.push(Check {
                    line,
                    description: format!(
                        "{label} {}",
                        if *available { "available" } else { "unavailable" }
                    ),
                    passed: actual == *available,
                    detail: format!("available={actual}"),
                });
            }
        }
    }
    Ok((network, outcome))
}

pub fn run_text(text: &str) -> Result<Outcome, ScenarioError> {
    let lines = parse(text)?;
    run(&lines).map(|(_, outcome)| outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_directive() {
        let text = "\
ttl 30m
node o origin
node g gateway ttl=10m
node p pinner
add o app hello world   # trailing comment
fetch g app expect ok
offline o
online o
corrupt o app
refresh every 5m via g app
sync p
tick 1h 30m
gc g
expect app available
";
        let lines = parse(text).unwrap();
        assert_eq!(lines.len(), 14);
        assert_eq!(
            lines[4].step,
            Step::Add {
                node: "o".into(),
                label: "app".into(),
                content: "hello world".into()
            }
        );
        assert_eq!(lines[11].step, Step::Tick(Duration::from_secs(5400)));
        assert_eq!(lines[1].number, 2);
    }

    #[test]
    fn reports_parse_errors_with_line() {
        assert_eq!(
            parse("node a origin\nfrobnicate x").unwrap_err(),
            ScenarioError::Parse {
                line: 2,
                message: "unrecognised directive: frobnicate x".into()
            }
        );
        assert!(matches!(parse("tick soon"), Err(ScenarioError::Parse { line: 1, .. })));
        assert!(matches!(parse("node a teapot"), Err(ScenarioError::Parse { .. })));
    }

    #[test]
    fn unknown_label_is_an_error() {
        let err = run_text("node g gateway\nfetch g nope expect ok").unwrap_err();
        assert_eq!(
            err,
            ScenarioError::UnknownLabel {
                line: 2,
                label: "nope".into()
            }
        );
    }
}
