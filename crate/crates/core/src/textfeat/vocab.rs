use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::corpus::Repository;
use crate::{Error, Result};

pub const PAD_ID: usize = 0;
pub const OOV_ID: usize = 1;
const PAD_TOKEN: &str = "<pad>";
const OOV_TOKEN: &str = "<unk>";

/// Token to id mapping; ids 0 and 1 are reserved for padding and unknown tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Vocab {
    /// Ids are assigned by descending frequency, ties by token.
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in tokens {
            *counts.entry(t).or_default() += 1;
        }
        let mut sorted: Vec<(&str, usize)> = counts.into_iter().collect();
        sorted.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        Self::from_tokens(sorted.into_iter().map(|(t, _)| t.to_string()))
    }

    fn from_tokens(tokens: impl Iterator<Item = String>) -> Self {
        let mut all = vec![PAD_TOKEN.to_string(), OOV_TOKEN.to_string()];
        all.extend(tokens);
        let ids = all.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens: all, ids }
    }

    /// Vocabulary over all service text and the text of the given (training)
    /// mashups: description tokens and whole tags.
    pub fn from_repository(repo: &Repository, mashups: &[usize]) -> Self {
        let mut toks: Vec<&str> = Vec::new();
        for s in repo.services() {
            toks.extend(s.description.iter().map(String::as_str));
            toks.extend(s.tags.iter().map(String::as_str));
        }
        for &m in mashups {
            let m = repo.mashup(m);
            toks.extend(m.description.iter().map(String::as_str));
            toks.extend(m.tags.iter().map(String::as_str));
        }
        Self::build(toks)
    }

    pub fn id(&self, token: &str) -> usize {
        self.ids.get(token).copied().unwrap_or(OOV_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// Number of ids including the two reserved ones.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 2
    }

    /// `token<TAB>id` per line, sorted by id.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        for (i, t) in self.tokens.iter().enumerate() {
            writeln!(w, "{t}\t{i}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_tsv(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut tokens = Vec::new();
        for (n, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let parse_err = |message: &str| Error::Parse {
                file: path.display().to_string(),
                line: n + 1,
                message: message.to_string(),
            };
            let (tok, id) = line.rsplit_once('\t').ok_or_else(|| parse_err("expected token<TAB>id"))?;
            let id: usize = id.parse().map_err(|_| parse_err("bad id"))?;
            if id != n {
                return Err(parse_err("ids must be dense and sorted"));
            }
            tokens.push(tok.to_string());
        }
        if tokens.len() < 2 || tokens[0] != PAD_TOKEN || tokens[1] != OOV_TOKEN {
            return Err(Error::Parse {
                file: path.display().to_string(),
                line: 1,
                message: "missing reserved tokens".into(),
            });
        }
        Ok(Self::from_tokens(tokens.into_iter().skip(2)))
    }
}

/// Fixed-length id sequence: real tokens first, padding after.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedText {
    pub ids: Vec<usize>,
    /// Number of leading non-padding positions.
    pub n_real: usize,
}

impl EncodedText {
    pub fn mask(&self) -> Vec<bool> {
        (0..self.ids.len()).map(|i| i < self.n_real).collect()
    }
}

/// Maps the first `len` tokens to ids (unknown tokens to [`OOV_ID`]) and pads
/// with [`PAD_ID`].
pub fn encode_sequence(tokens: &[String], vocab: &Vocab, len: usize) -> EncodedText {
    let mut ids: Vec<usize> = tokens.iter().take(len).map(|t| vocab.id(t)).collect();
    let n_real = ids.len();
    ids.resize(len, PAD_ID);
    EncodedText { ids, n_real }
}
