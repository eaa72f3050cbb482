//! Newick reader. Leaf names must be non-negative integers or empty (an
//! unlabelled leaf); internal names and branch lengths are skipped. A rooted
//! binary input has its degree-two root suppressed.

use super::{Cladogram, Label};
use crate::error::{Error, Result};

fn err(pos: usize, msg: impl Into<String>) -> Error {
    Error::Newick { pos, msg: msg.into() }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn name(&mut self) -> &str {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && !b"(),:;".contains(&self.bytes[self.pos]) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).unwrap_or("").trim()
    }

    fn branch_length(&mut self) -> Result<()> {
        if self.peek() == Some(b':') {
            self.pos += 1;
            let at = self.pos;
            let s = self.name();
            if s.parse::<f64>().is_err() {
                return Err(err(at, format!("bad branch length {s:?}")));
            }
        }
        Ok(())
    }
}

pub(super) fn parse(text: &str) -> Result<Cladogram> {
    let mut cur = Cursor { bytes: text.as_bytes(), pos: 0 };
    let mut adj: Vec<Vec<usize>> = Vec::new();
    let mut labels: Vec<Option<Label>> = Vec::new();
    let mut open: Vec<usize> = Vec::new();

    if cur.peek() == Some(b';') {
        cur.pos += 1;
        return finish(&mut cur, Cladogram::empty());
    }

    loop {
        // Expecting a subtree: either an opening bracket or a leaf name.
        match cur.peek() {
            Some(b'(') => {
                cur.pos += 1;
                let v = adj.len();
                adj.push(Vec::new());
                labels.push(None);
                if let Some(&p) = open.last() {
                    adj[p].push(v);
                    adj[v].push(p);
                }
                open.push(v);
                continue;
            }
            None => return Err(err(cur.pos, "unexpected end of input")),
            _ => {
                let at = cur.pos;
                let name = cur.name();
                let label = if name.is_empty() {
                    None
                } else {
                    Some(name.parse::<Label>().map_err(|_| err(at, format!("leaf name {name:?} is not a label")))?)
                };
                let v = adj.len();
                adj.push(Vec::new());
                labels.push(label);
                if let Some(&p) = open.last() {
                    adj[p].push(v);
                    adj[v].push(p);
                }
                cur.branch_length()?;
            }
        }
        // After a subtree: commas, closing brackets, or the terminator.
        loop {
            match cur.peek() {
                Some(b',') => {
                    if open.is_empty() {
                        return Err(err(cur.pos, "comma outside brackets"));
                    }
                    cur.pos += 1;
                    break;
                }
                Some(b')') => {
                    if open.pop().is_none() {
                        return Err(err(cur.pos, "unbalanced ')'"));
                    }
                    cur.pos += 1;
                    cur.name();
                    cur.branch_length()?;
                }
                Some(b';') => {
                    if !open.is_empty() {
                        return Err(err(cur.pos, "unclosed '('"));
                    }
                    cur.pos += 1;
                    let tree = assemble(labels, adj).map_err(|e| err(cur.pos, e.to_string()))?;
                    return finish(&mut cur, tree);
                }
                Some(c) => return Err(err(cur.pos, format!("unexpected {:?}", c as char))),
                None => return Err(err(cur.pos, "missing ';'")),
            }
        }
    }
}

fn finish(cur: &mut Cursor<'_>, tree: Cladogram) -> Result<Cladogram> {
    if cur.peek().is_some() {
        return Err(err(cur.pos, "trailing input after ';'"));
    }
    Ok(tree)
}

fn assemble(mut labels: Vec<Option<Label>>, mut adj: Vec<Vec<usize>>) -> Result<Cladogram> {
    if adj.len() > 2 && adj[0].len() == 2 && labels[0].is_none() {
        let (a, b) = (adj[0][0], adj[0][1]);
        for (x, y) in [(a, b), (b, a)] {
            let slot = adj[x].iter().position(|&z| z == 0).expect("root neighbour");
            adj[x][slot] = y;
        }
        adj[0].clear();
        labels.remove(0);
        adj.remove(0);
        for list in &mut adj {
            for v in list.iter_mut() {
                *v -= 1;
            }
        }
    }
    Cladogram::from_adjacency(labels, adj)
}
