//! Line-oriented text format for models and test cases.

use std::collections::BTreeMap;

use super::{is_identifier, Distribution, Label, Outcome, Pqts, Signature, Transition, Violation, DELTA};
use crate::rational::parse_rational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("line {line}, column {column}: unknown label `{label}`")]
    UnknownLabel { line: usize, column: usize, label: String },
    #[error("line {line}, column {column}: unknown state `{state}`")]
    UnknownState { line: usize, column: usize, state: String },
    #[error("line {line}, column {column}: duplicate state `{state}`")]
    DuplicateState { line: usize, column: usize, state: String },
    #[error("line {line}, column {column}: `{literal}` is not a rational literal (expected p/q or an integer)")]
    BadProbability { line: usize, column: usize, literal: String },
    #[error("invalid model: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum DocumentKind {
    Model,
    Test,
}

#[derive(Debug, Clone)]
pub(crate) struct Annotation {
    pub trace: Vec<Label>,
    pub pass: bool,
    pub line: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Document {
    pub kind: DocumentKind,
    pub model: Pqts,
    pub annotations: Vec<Annotation>,
}

/// Parses and validates a model file.
pub fn parse_pqts(text: &str) -> Result<Pqts, ParseError> {
    let p = parse_pqts_unchecked(text)?;
    let violations = p.validate();
    if violations.is_empty() {
        Ok(p)
    } else {
        Err(ParseError::Invalid(violations))
    }
}

/// Parses a model file without running [`Pqts::validate`].
pub fn parse_pqts_unchecked(text: &str) -> Result<Pqts, ParseError> {
    let doc = parse_document(text)?;
    if doc.kind != DocumentKind::Model {
        return Err(ParseError::Syntax {
            line: 1,
            column: 1,
            message: "expected a `pqts <name>` header, found a test".into(),
        });
    }
    Ok(doc.model)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tok<'a> {
    Word(&'a str),
    Punct(char),
    Arrow,
}

fn tokenize(line: &str) -> Vec<(Tok<'_>, usize)> {
    let mut out = Vec::new();
    let bytes: Vec<(usize, char)> = line.char_indices().collect();
    let mut i = 0;
    let column = |byte: usize| line[..byte].chars().count() + 1;
    while i < bytes.len() {
        let (pos, c) = bytes[i];
        if c.is_whitespace() {
            i += 1;
        } else if matches!(c, ':' | '{' | '}' | ',' | '=') {
            out.push((Tok::Punct(c), column(pos)));
            i += 1;
        } else if c == '-' && bytes.get(i + 1).map(|b| b.1) == Some('>') {
            out.push((Tok::Arrow, column(pos)));
            i += 2;
        } else {
            let start = i;
            while i < bytes.len() {
                let ch = bytes[i].1;
                if ch.is_whitespace() || matches!(ch, ':' | '{' | '}' | ',' | '=') {
                    break;
                }
                if ch == '-' && bytes.get(i + 1).map(|b| b.1) == Some('>') && i > start {
                    break;
                }
                i += 1;
            }
            let end = bytes.get(i).map(|b| b.0).unwrap_or(line.len());
            out.push((Tok::Word(&line[pos..end]), column(pos)));
        }
    }
    out
}

struct Cursor<'a> {
    toks: Vec<(Tok<'a>, usize)>,
    pos: usize,
    line: usize,
    end_column: usize,
}

impl<'a> Cursor<'a> {
    fn column(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.1).unwrap_or(self.end_column)
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax { line: self.line, column: self.column(), message: message.into() }
    }

    fn peek(&self) -> Option<Tok<'a>> {
        self.toks.get(self.pos).map(|t| t.0)
    }

    fn next(&mut self) -> Option<(Tok<'a>, usize)> {
        let t = self.toks.get(self.pos).copied();
        self.pos += 1;
        t
    }

    fn word(&mut self, what: &str) -> Result<(&'a str, usize), ParseError> {
        match self.peek() {
            Some(Tok::Word(w)) => {
                let col = self.column();
                self.pos += 1;
                Ok((w, col))
            }
            _ => Err(self.error(format!("expected {what}"))),
        }
    }

    fn punct(&mut self, c: char) -> Result<(), ParseError> {
        if self.peek() == Some(Tok::Punct(c)) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`")))
        }
    }

    fn done(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn expect_end(&self) -> Result<(), ParseError> {
        if self.done() {
            Ok(())
        } else {
            Err(self.error("unexpected trailing input"))
        }
    }
}

/// Comma-separated list of words, possibly empty.
fn word_list<'a>(cur: &mut Cursor<'a>) -> Result<Vec<Vec<(&'a str, usize)>>, ParseError> {
    let mut items = Vec::new();
    if cur.done() {
        return Ok(items);
    }
    loop {
        let mut item = Vec::new();
        while let Some(Tok::Word(_)) = cur.peek() {
            item.push(cur.word("a name")?);
        }
        if item.is_empty() {
            return Err(cur.error("expected a name"));
        }
        items.push(item);
        match cur.next() {
            None => return Ok(items),
            Some((Tok::Punct(','), _)) => {}
            Some(_) => {
                cur.pos -= 1;
                return Err(cur.error("expected `,`"));
            }
        }
    }
}

pub(crate) fn parse_document(text: &str) -> Result<Document, ParseError> {
    let mut kind = None;
    let mut name = String::new();
    let mut signature = Signature::default();
    let mut have_inputs = false;
    let mut have_outputs = false;
    let mut states: Vec<String> = Vec::new();
    let mut state_index: BTreeMap<String, usize> = BTreeMap::new();
    let mut initial = None;
    let mut have_states = false;
    let mut transitions = Vec::new();
    let mut annotations = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut cur = Cursor {
            toks: tokenize(content),
            pos: 0,
            line: line_no,
            end_column: content.chars().count() + 1,
        };
        if cur.done() {
            continue;
        }
        let (keyword, _) = cur.word("a keyword")?;
        if kind.is_none() {
            kind = Some(match keyword {
                "pqts" => DocumentKind::Model,
                "test" => DocumentKind::Test,
                _ => {
                    return Err(ParseError::Syntax {
                        line: line_no,
                        column: 1,
                        message: "expected a `pqts <name>` or `test <name>` header".into(),
                    })
                }
            });
            let (n, col) = cur.word("a model name")?;
            if !is_identifier(n) {
                return Err(ParseError::Syntax { line: line_no, column: col, message: "bad name".into() });
            }
            name = n.to_string();
            cur.expect_end()?;
            continue;
        }
        match keyword {
            "inputs" | "outputs" => {
                let is_inputs = keyword == "inputs";
                let seen = if is_inputs { &mut have_inputs } else { &mut have_outputs };
                if *seen {
                    return Err(ParseError::Syntax {
                        line: line_no,
                        column: 1,
                        message: format!("`{keyword}` declared twice"),
                    });
                }
                *seen = true;
                cur.punct(':')?;
                let suffix = if is_inputs { '?' } else { '!' };
                for item in word_list(&mut cur)? {
                    let (tok, col) = item[0];
                    if item.len() > 1 {
                        return Err(ParseError::Syntax {
                            line: line_no,
                            column: item[1].1,
                            message: "expected `,`".into(),
                        });
                    }
                    let label = match tok.strip_suffix(suffix) {
                        Some(n) if is_identifier(n) && n != DELTA => Label::parse_token(tok),
                        _ => None,
                    };
                    match label {
                        Some(l) => signature.insert(&l),
                        None => {
                            return Err(ParseError::Syntax {
                                line: line_no,
                                column: col,
                                message: format!("`{tok}` is not a valid {keyword} label (expected name{suffix})"),
                            })
                        }
                    }
                }
            }
            "states" => {
                if have_states {
                    return Err(ParseError::Syntax { line: line_no, column: 1, message: "`states` declared twice".into() });
                }
                have_states = true;
                cur.punct(':')?;
                for item in word_list(&mut cur)? {
                    let (s, col) = item[0];
                    if !is_identifier(s) {
                        return Err(ParseError::Syntax { line: line_no, column: col, message: format!("bad state name `{s}`") });
                    }
                    match item.get(1) {
                        None => {}
                        Some(&("init", icol)) if item.len() == 2 => {
                            if initial.is_some() {
                                return Err(ParseError::Syntax {
                                    line: line_no,
                                    column: icol,
                                    message: "more than one initial state".into(),
                                });
                            }
                            initial = Some(states.len());
                        }
                        Some(&(_, c)) => {
                            return Err(ParseError::Syntax { line: line_no, column: c, message: "expected `init` or `,`".into() })
                        }
                    }
                    if state_index.insert(s.to_string(), states.len()).is_some() {
                        return Err(ParseError::DuplicateState { line: line_no, column: col, state: s.to_string() });
                    }
                    states.push(s.to_string());
                }
            }
            "trans" => {
                let lookup = |s: &str, col: usize| {
                    state_index.get(s).copied().ok_or_else(|| ParseError::UnknownState {
                        line: line_no,
                        column: col,
                        state: s.to_string(),
                    })
                };
                let (src, col) = cur.word("a source state")?;
                let source = lookup(src, col)?;
                cur.punct(':')?;
                cur.punct('{')?;
                let mut outcomes = Vec::new();
                if cur.peek() == Some(Tok::Punct('}')) {
                    cur.pos += 1;
                } else {
                    loop {
                        let (tok, lcol) = cur.word("a label")?;
                        let label = match Label::parse_token(tok) {
                            Some(l) if signature.contains(&l) => l,
                            _ => {
                                return Err(ParseError::UnknownLabel { line: line_no, column: lcol, label: tok.to_string() })
                            }
                        };
                        let (lit, pcol) = cur.word("a probability")?;
                        let prob = parse_rational(lit).map_err(|_| ParseError::BadProbability {
                            line: line_no,
                            column: pcol,
                            literal: lit.to_string(),
                        })?;
                        if cur.next().map(|t| t.0) != Some(Tok::Arrow) {
                            cur.pos -= 1;
                            return Err(cur.error("expected `->`"));
                        }
                        let (tgt, tcol) = cur.word("a target state")?;
                        let target = lookup(tgt, tcol)?;
                        outcomes.push(Outcome { label, target, prob });
                        match cur.next() {
                            Some((Tok::Punct(','), _)) => {}
                            Some((Tok::Punct('}'), _)) => break,
                            _ => {
                                cur.pos -= 1;
                                return Err(cur.error("expected `,` or `}`"));
                            }
                        }
                    }
                }
                cur.expect_end()?;
                transitions.push(Transition { source, dist: Distribution::new(outcomes) });
            }
            "annot" if kind == Some(DocumentKind::Test) => {
                let mut trace = Vec::new();
                while let Some(Tok::Word(tok)) = cur.peek() {
                    let col = cur.column();
                    cur.pos += 1;
                    match Label::parse_token(tok) {
                        Some(l) if signature.contains(&l) => trace.push(l),
                        _ => return Err(ParseError::UnknownLabel { line: line_no, column: col, label: tok.to_string() }),
                    }
                }
                cur.punct('=')?;
                let (verdict, vcol) = cur.word("`pass` or `fail`")?;
                let pass = match verdict {
                    "pass" => true,
                    "fail" => false,
                    _ => {
                        return Err(ParseError::Syntax {
                            line: line_no,
                            column: vcol,
                            message: "expected `pass` or `fail`".into(),
                        })
                    }
                };
                cur.expect_end()?;
                annotations.push(Annotation { trace, pass, line: line_no });
            }
            other => {
                return Err(ParseError::Syntax {
                    line: line_no,
                    column: 1,
                    message: format!("unknown keyword `{other}`"),
                })
            }
        }
    }

    let kind = kind.ok_or(ParseError::Syntax { line: 1, column: 1, message: "empty document".into() })?;
    if !have_states || states.is_empty() {
        return Err(ParseError::Syntax {
            line: text.lines().count().max(1),
            column: 1,
            message: "no `states:` declaration".into(),
        });
    }
    let model = Pqts::new(name, states, initial.unwrap_or(0), signature, transitions);
    Ok(Document { kind, model, annotations })
}
