//! Text files of zero-based index pairs, one "row col" pair per line,
//! with `#` comments. Used for ground-truth matches and exported matches.

use std::path::Path;

use crate::error::{Error, Result};

pub fn pairs_from_str(text: &str) -> Result<Vec<(usize, usize)>> {
    let mut pairs = Vec::new();
    let mut offset = 0usize;
    for line in text.split_inclusive('\n') {
        let content = line.split('#').next().unwrap_or("").trim();
        if !content.is_empty() {
            let mut fields = content.split_whitespace();
            let parse = |field: Option<&str>| -> Result<usize> {
                field
                    .ok_or_else(|| Error::format(offset, "expected 'row col' pair"))?
                    .parse::<usize>()
                    .map_err(|_| Error::format(offset, format!("bad index in '{content}'")))
            };
            let row = parse(fields.next())?;
            let col = parse(fields.next())?;
            if fields.next().is_some() {
                return Err(Error::format(
                    offset,
                    format!("trailing fields in '{content}'"),
                ));
            }
            pairs.push((row, col));
        }
        offset += line.len();
    }
    Ok(pairs)
}

pub fn pairs_to_string(pairs: &[(usize, usize)]) -> String {
    let mut out = String::new();
    for (row, col) in pairs {
        out.push_str(&format!("{row} {col}\n"));
    }
    out
}

pub fn read_pairs(path: impl AsRef<Path>) -> Result<Vec<(usize, usize)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    pairs_from_str(&text)
}

pub fn write_pairs(pairs: &[(usize, usize)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, pairs_to_string(pairs)).map_err(|e| Error::io(path, e))
}

/// Place-id lists for synthetic traverses: one integer per line, -1 for
/// frames that do not map to any place.
pub fn place_ids_to_string(ids: &[Option<usize>]) -> String {
    let mut out = String::new();
    for id in ids {
        match id {
            Some(p) => out.push_str(&format!("{p}\n")),
            None => out.push_str("-1\n"),
        }
    }
    out
}

pub fn place_ids_from_str(text: &str) -> Result<Vec<Option<usize>>> {
    let mut ids = Vec::new();
    let mut offset = 0usize;
    for line in text.split_inclusive('\n') {
        let content = line.split('#').next().unwrap_or("").trim();
        if !content.is_empty() {
            if content == "-1" {
                ids.push(None);
            } else {
                let p = content
                    .parse::<usize>()
                    .map_err(|_| Error::format(offset, format!("bad place id '{content}'")))?;
                ids.push(Some(p));
            }
        }
        offset += line.len();
    }
    Ok(ids)
}
