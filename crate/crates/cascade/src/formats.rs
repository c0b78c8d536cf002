//! Line-oriented file formats: comment and essay JSONL, vocabulary files,
//! embedding tables and entity documents.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use cascade_core::corpus::{CommentRecord, EntityDocument, Label, Vocabulary};
use cascade_core::embedding::EmbeddingTable;
use cascade_core::personality::{EssayRecord, TRAITS};
use serde_json::{Map, Value};

use crate::error::{CliError, Result};

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(path, e))
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Non-blank lines with their 1-based numbers, each parsed as a JSON object.
fn json_objects(reader: impl Read, path: &Path) -> Result<Vec<(usize, Map<String, Value>)>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Value>(&line) {
            Ok(Value::Object(map)) => out.push((i + 1, map)),
            Ok(_) => return Err(parse_error(path, i + 1, "expected a JSON object")),
            Err(e) => return Err(parse_error(path, i + 1, format!("invalid JSON: {e}"))),
        }
    }
    Ok(out)
}

fn string_field(map: &Map<String, Value>, key: &str, path: &Path, line: usize) -> Result<String> {
    match map.get(key) {
        None => Err(parse_error(path, line, format!("missing key `{key}`"))),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(other) => Err(parse_error(path, line, format!("key `{key}` must be a string, got {other}"))),
    }
}

fn binary_field(value: &Value, key: &str, path: &Path, line: usize) -> Result<bool> {
    let v = match value {
        Value::Bool(b) => return Ok(*b),
        Value::Number(n) => n.as_i64(),
        _ => None,
    };
    match v {
        Some(0) => Ok(false),
        Some(1) => Ok(true),
        _ => Err(parse_error(path, line, format!("key `{key}` must be 0 or 1, got {value}"))),
    }
}

/// Parses comment JSONL with keys `id`, `user`, `forum`, `text` and an
/// optional `label` (0, 1 or null).
pub fn parse_comments(reader: impl Read, path: &Path) -> Result<Vec<CommentRecord>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, map) in json_objects(reader, path)? {
        let id = string_field(&map, "id", path, line)?;
        let user_id = string_field(&map, "user", path, line)?;
        let forum_id = string_field(&map, "forum", path, line)?;
        let text = string_field(&map, "text", path, line)?;
        for (key, v) in [("id", &id), ("user", &user_id), ("forum", &forum_id)] {
            if v.trim().is_empty() {
                return Err(parse_error(path, line, format!("key `{key}` is empty")));
            }
        }
        let label = match map.get("label") {
            None | Some(Value::Null) => None,
            Some(v) => Some(if binary_field(v, "label", path, line)? {
                Label::Sarcastic
            } else {
                Label::NonSarcastic
            }),
        };
        if !seen.insert(id.clone()) {
            return Err(parse_error(path, line, format!("duplicate id `{id}`")));
        }
        out.push(CommentRecord {
            id,
            user_id,
            forum_id,
            text,
            label,
        });
    }
    Ok(out)
}

pub fn load_comments(path: &Path) -> Result<Vec<CommentRecord>> {
    parse_comments(open(path)?, path)
}

pub fn comment_to_json(c: &CommentRecord) -> String {
    let mut map = Map::new();
    map.insert("id".into(), c.id.clone().into());
    map.insert("user".into(), c.user_id.clone().into());
    map.insert("forum".into(), c.forum_id.clone().into());
    map.insert("text".into(), c.text.clone().into());
    map.insert(
        "label".into(),
        c.label.map_or(Value::Null, |l| Value::from(l.index())),
    );
    Value::Object(map).to_string()
}

pub fn save_comments(path: &Path, comments: &[CommentRecord]) -> Result<()> {
    let mut out = String::new();
    for c in comments {
        out.push_str(&comment_to_json(c));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

/// Parses essay JSONL with keys `text` and one 0/1 flag per trait.
pub fn parse_essays(reader: impl Read, path: &Path) -> Result<Vec<EssayRecord>> {
    let mut out = Vec::new();
    for (line, map) in json_objects(reader, path)? {
        let text = string_field(&map, "text", path, line)?;
        let mut traits = [false; 5];
        for (t, key) in TRAITS.iter().enumerate() {
            let v = map
                .get(*key)
                .ok_or_else(|| parse_error(path, line, format!("missing key `{key}`")))?;
            traits[t] = binary_field(v, key, path, line)?;
        }
        out.push(EssayRecord { text, traits });
    }
    Ok(out)
}

pub fn load_essays(path: &Path) -> Result<Vec<EssayRecord>> {
    parse_essays(open(path)?, path)
}

pub fn save_essays(path: &Path, essays: &[EssayRecord]) -> Result<()> {
    let mut out = String::new();
    for e in essays {
        let mut map = Map::new();
        map.insert("text".into(), e.text.clone().into());
        for (t, key) in TRAITS.iter().enumerate() {
            map.insert((*key).into(), Value::from(e.traits[t] as u8));
        }
        out.push_str(&Value::Object(map).to_string());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

/// `<size> <min_count>` header, then one `token<TAB>count` line per entry.
pub fn vocabulary_to_string(vocab: &Vocabulary) -> String {
    let mut out = format!("{} {}\n", vocab.len(), vocab.min_count());
    for (t, c) in vocab.tokens().iter().zip(vocab.counts()) {
        writeln!(out, "{t}\t{c}").unwrap();
    }
    out
}

pub fn save_vocabulary(path: &Path, vocab: &Vocabulary) -> Result<()> {
    fs::write(path, vocabulary_to_string(vocab)).map_err(|e| CliError::io(path, e))
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    open(path)?
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| CliError::io(path, e))
}

fn header(lines: &[String], path: &Path) -> Result<(usize, u64)> {
    let first = lines.first().ok_or_else(|| parse_error(path, 1, "empty file"))?;
    let parts: Vec<&str> = first.split_whitespace().collect();
    let parsed = match parts.as_slice() {
        [a, b] => a.parse::<usize>().ok().zip(b.parse::<u64>().ok()),
        _ => None,
    };
    parsed.ok_or_else(|| parse_error(path, 1, format!("expected a two-number header, got `{first}`")))
}

pub fn load_vocabulary(path: &Path) -> Result<Vocabulary> {
    let lines = read_lines(path)?;
    let (n, min_count) = header(&lines, path)?;
    if lines.len() - 1 != n {
        return Err(parse_error(path, 1, format!("header announces {n} entries, file has {}", lines.len() - 1)));
    }
    let mut tokens = Vec::with_capacity(n);
    let mut counts = Vec::with_capacity(n);
    for (i, line) in lines.iter().enumerate().skip(1) {
        let (tok, count) = line
            .split_once('\t')
            .and_then(|(t, c)| Some((t, c.parse::<u64>().ok()?)))
            .ok_or_else(|| parse_error(path, i + 1, "expected `token<TAB>count`"))?;
        tokens.push(tok.to_string());
        counts.push(count);
    }
    Vocabulary::from_parts(tokens, counts, min_count).map_err(|e| parse_error(path, 1, e.to_string()))
}

/// `<rows> <dim>` header, then `id v1 … v_dim` per row. Values are written
/// in shortest round-trip form, so a save/load cycle is exact.
pub fn embeddings_to_string(table: &EmbeddingTable) -> String {
    let mut out = format!("{} {}\n", table.len(), table.dim());
    for (id, v) in table.iter() {
        out.push_str(id);
        for x in v {
            write!(out, " {x}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn save_embeddings(path: &Path, table: &EmbeddingTable) -> Result<()> {
    if let Some(bad) = table.ids().iter().find(|id| id.is_empty() || id.contains(char::is_whitespace)) {
        return Err(CliError::Config(format!(
            "embedding id `{bad}` cannot be written: ids must be non-empty and free of whitespace"
        )));
    }
    fs::write(path, embeddings_to_string(table)).map_err(|e| CliError::io(path, e))
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let lines = read_lines(path)?;
    let (n, dim) = header(&lines, path)?;
    let mut table = EmbeddingTable::new(dim as usize);
    for (i, line) in lines.iter().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let id = parts.next().unwrap();
        let values = parts
            .map(str::parse::<f32>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_error(path, i + 1, format!("bad value: {e}")))?;
        if values.len() != dim as usize {
            return Err(parse_error(path, i + 1, format!("expected {dim} values, got {}", values.len())));
        }
        table
            .push(id, &values)
            .map_err(|e| parse_error(path, i + 1, e.to_string()))?;
    }
    if table.len() != n {
        return Err(parse_error(path, 1, format!("header announces {n} rows, file has {}", table.len())));
    }
    Ok(table)
}

/// One `entity<TAB>tokens…` line per document, tokens spelled out.
pub fn save_documents(path: &Path, docs: &[EntityDocument], vocab: &Vocabulary) -> Result<()> {
    let mut out = String::new();
    for d in docs {
        out.push_str(&d.entity_id);
        out.push('\t');
        let words: Vec<&str> = d.tokens.iter().map(|&t| vocab.token(t)).collect();
        out.push_str(&words.join(" "));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

pub fn ensure_dir(path: &Path) -> Result<PathBuf> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))?;
    Ok(path.to_path_buf())
}
