//! Demonstration files.
//!
//! UTF-8 text, one transition per line. A leading `#` header line carries
//! `env=<name> seed=<u64>` plus the dimensions (`n_states`/`n_actions` or
//! `state_dim`/`action_dim`). Tabular lines are `episode_id,t,s,a,s_next`;
//! continuous lines are `episode_id,t,x_0..x_{d-1},a_0..a_{k-1},x'_0..x'_{d-1}` with
//! floats written in shortest round-trip form.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn perr(line: usize, msg: impl Into<String>) -> DemoError {
    DemoError::Parse {
        line,
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemoHeader {
    pub env: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TabularTransition {
    pub episode: usize,
    pub t: usize,
    pub s: usize,
    pub a: usize,
    pub next: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousTransition {
    pub episode: usize,
    pub t: usize,
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub next: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Demonstrations {
    Tabular {
        header: DemoHeader,
        n_states: usize,
        n_actions: usize,
        transitions: Vec<TabularTransition>,
    },
    Continuous {
        header: DemoHeader,
        state_dim: usize,
        action_dim: usize,
        transitions: Vec<ContinuousTransition>,
    },
}

impl Demonstrations {
    pub fn header(&self) -> &DemoHeader {
        match self {
            Self::Tabular { header, .. } | Self::Continuous { header, .. } => header,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Tabular { transitions, .. } => transitions.len(),
            Self::Continuous { transitions, .. } => transitions.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_episodes(&self) -> usize {
        let mut ids: Vec<usize> = match self {
            Self::Tabular { transitions, .. } => transitions.iter().map(|t| t.episode).collect(),
            Self::Continuous { transitions, .. } => transitions.iter().map(|t| t.episode).collect(),
        };
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match self {
            Self::Tabular {
                header,
                n_states,
                n_actions,
                transitions,
            } => {
                let _ = writeln!(
                    out,
                    "# env={} seed={} n_states={} n_actions={}",
                    header.env, header.seed, n_states, n_actions
                );
                for tr in transitions {
                    let _ = writeln!(out, "{},{},{},{},{}", tr.episode, tr.t, tr.s, tr.a, tr.next);
                }
            }
            Self::Continuous {
                header,
                state_dim,
                action_dim,
                transitions,
            } => {
                let _ = writeln!(
                    out,
                    "# env={} seed={} state_dim={} action_dim={}",
                    header.env, header.seed, state_dim, action_dim
                );
                for tr in transitions {
                    let _ = write!(out, "{},{}", tr.episode, tr.t);
                    for x in tr.state.iter().chain(&tr.action).chain(&tr.next) {
                        let _ = write!(out, ",{x:?}");
                    }
                    out.push('\n');
                }
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, DemoError> {
        let mut lines = text.lines().enumerate();
        let (_, first) = lines.next().ok_or_else(|| perr(1, "empty file"))?;
        let header_body = first
            .strip_prefix('#')
            .ok_or_else(|| perr(1, "missing '#' header line"))?;
        let mut env = None;
        let mut seed = None;
        let mut dims = std::collections::BTreeMap::new();
        for token in header_body.split_whitespace() {
            let (k, v) = token
                .split_once('=')
                .ok_or_else(|| perr(1, format!("malformed header token '{token}'")))?;
            match k {
                "env" => env = Some(v.to_string()),
                "seed" => {
                    seed = Some(
                        v.parse::<u64>()
                            .map_err(|e| perr(1, format!("seed: {e}")))?,
                    )
                }
                _ => {
                    let n = v
                        .parse::<usize>()
                        .map_err(|e| perr(1, format!("{k}: {e}")))?;
                    dims.insert(k.to_string(), n);
                }
            }
        }
        let header = DemoHeader {
            env: env.ok_or_else(|| perr(1, "header lacks env="))?,
            seed: seed.ok_or_else(|| perr(1, "header lacks seed="))?,
        };
        let usize_field = |line: usize, f: &str| {
            f.trim()
                .parse::<usize>()
                .map_err(|e| perr(line, format!("'{f}': {e}")))
        };
        if let (Some(&ns), Some(&na)) = (dims.get("n_states"), dims.get("n_actions")) {
            let mut transitions = Vec::new();
            for (i, line) in lines {
                let ln = i + 1;
                if line.trim().is_empty() {
                    continue;
                }
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 5 {
                    return Err(perr(ln, format!("expected 5 fields, got {}", f.len())));
                }
                let tr = TabularTransition {
                    episode: usize_field(ln, f[0])?,
                    t: usize_field(ln, f[1])?,
                    s: usize_field(ln, f[2])?,
                    a: usize_field(ln, f[3])?,
                    next: usize_field(ln, f[4])?,
                };
                if tr.s >= ns || tr.next >= ns || tr.a >= na {
                    return Err(perr(ln, "index out of range"));
                }
                transitions.push(tr);
            }
            Ok(Self::Tabular {
                header,
                n_states: ns,
                n_actions: na,
                transitions,
            })
        } else if let (Some(&sd), Some(&ad)) = (dims.get("state_dim"), dims.get("action_dim")) {
            let mut transitions = Vec::new();
            let width = 2 + 2 * sd + ad;
            for (i, line) in lines {
                let ln = i + 1;
                if line.trim().is_empty() {
                    continue;
                }
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != width {
                    return Err(perr(
                        ln,
                        format!("expected {width} fields, got {}", f.len()),
                    ));
                }
                let floats = f[2..]
                    .iter()
                    .map(|x| {
                        x.trim()
                            .parse::<f64>()
                            .map_err(|e| perr(ln, format!("'{x}': {e}")))
                    })
                    .collect::<Result<Vec<f64>, _>>()?;
                transitions.push(ContinuousTransition {
                    episode: usize_field(ln, f[0])?,
                    t: usize_field(ln, f[1])?,
                    state: floats[..sd].to_vec(),
                    action: floats[sd..sd + ad].to_vec(),
                    next: floats[sd + ad..].to_vec(),
                });
            }
            Ok(Self::Continuous {
                header,
                state_dim: sd,
                action_dim: ad,
                transitions,
            })
        } else {
            Err(perr(1, "header lacks dimensions"))
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), DemoError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, DemoError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn continuous_round_trip_is_lossless() {
        let d = Demonstrations::Continuous {
            header: DemoHeader {
                env: "pointmass".into(),
                seed: 3,
            },
            state_dim: 1,
            action_dim: 1,
            transitions: vec![ContinuousTransition {
                episode: 0,
                t: 0,
                state: vec![0.1 + 0.2],
                action: vec![-1.0 / 3.0],
                next: vec![1e-300],
            }],
        };
        assert_eq!(Demonstrations::parse(&d.to_text()).unwrap(), d);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "# env=g seed=1 n_states=2 n_actions=2\n0,0,0,1,1\n0,1,5,0,0\n";
        match Demonstrations::parse(text) {
            Err(DemoError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(Demonstrations::parse("0,0,0,0,0\n").is_err());
        assert!(Demonstrations::parse("# env=g seed=1\n").is_err());
    }
}
