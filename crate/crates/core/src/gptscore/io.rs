use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CellKey, ContrastiveCell, GptScore};
use crate::corpus::{preprocess, PreprocessConfig};
use crate::error::{Error, Result};

/// A cell that could not be loaded.
#[derive(Debug)]
pub struct CellLoadError {
    pub cell: String,
    pub error: Error,
}

enum Format {
    /// Raw text, preprocessed on load.
    Text,
    /// Whitespace-separated stems, used verbatim.
    Stems,
}

fn parse_name(name: &str) -> Option<(CellKey, Format)> {
    let (stem, format) = match name.strip_suffix(".human.txt") {
        Some(s) => (s, Format::Text),
        None => (name.strip_suffix(".human.stems")?, Format::Stems),
    };
    let parts: Vec<&str> = stem.split("__").collect();
    match parts.as_slice() {
        [d, m, p] if !d.is_empty() && !m.is_empty() && !p.is_empty() => {
            Some((CellKey::new(*d, *m, *p), format))
        }
        _ => None,
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    std::io::BufReader::new(f)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(path, e))
}

fn load_cell(
    dir: &Path,
    key: CellKey,
    format: &Format,
    cfg: &PreprocessConfig,
) -> Result<ContrastiveCell> {
    let ext = match format {
        Format::Text => "txt",
        Format::Stems => "stems",
    };
    let human_path = dir.join(format!("{key}.human.{ext}"));
    let edited_path: PathBuf = dir.join(format!("{key}.edited.{ext}"));
    let human = read_lines(&human_path)?;
    let edited = read_lines(&edited_path)?;
    if human.len() != edited.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} human lines vs {} edited lines",
            human.len(),
            edited.len()
        )));
    }
    let parse = |line: &str| -> Option<BTreeSet<String>> {
        if line.trim().is_empty() {
            return None;
        }
        Some(match format {
            Format::Text => preprocess(line, cfg),
            Format::Stems => line.split_whitespace().map(str::to_string).collect(),
        })
    };
    let pairs = human.iter().zip(&edited).map(|(h, e)| (parse(h), parse(e)));
    ContrastiveCell::from_pairs(key, pairs)
}

/// Loads every `<dataset>__<model>__<prompt>.human.txt` / `.edited.txt` pair
/// (or `.human.stems` / `.edited.stems`) in `dir`. One document per line;
/// an empty line on either side marks a failed edit and drops the pair.
pub fn load_contrastive_dir(
    dir: &Path,
    cfg: &PreprocessConfig,
) -> Result<(Vec<ContrastiveCell>, Vec<CellLoadError>)> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .collect();
    names.sort();
    let mut cells = Vec::new();
    let mut errors = Vec::new();
    for name in names {
        let Some((key, format)) = parse_name(&name) else {
            continue;
        };
        match load_cell(dir, key.clone(), &format, cfg) {
            Ok(c) => cells.push(c),
            Err(error) => errors.push(CellLoadError {
                cell: key.to_string(),
                error,
            }),
        }
    }
    Ok((cells, errors))
}

#[derive(Serialize, Deserialize)]
struct ScoreRow {
    word: String,
    score: f64,
    lo95: f64,
    hi95: f64,
    n_cells: usize,
}

/// Writes `word,score,lo95,hi95,n_cells` in the given order.
pub fn write_score_csv<W: Write>(out: W, scores: &[GptScore]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    for s in scores {
        w.serialize(ScoreRow {
            word: s.word.clone(),
            score: s.score,
            lo95: s.interval.0,
            hi95: s.interval.1,
            n_cells: s.n_cells,
        })?;
    }
    w.flush().map_err(|e| Error::io("<score csv>", e))?;
    Ok(())
}

/// Reads a score CSV. The sample count is not stored, so it is reported as 0.
pub fn read_score_csv(path: &Path) -> Result<BTreeMap<String, GptScore>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = BTreeMap::new();
    for row in rdr.deserialize::<ScoreRow>() {
        let r = row?;
        out.insert(
            r.word.clone(),
            GptScore {
                word: r.word,
                score: r.score,
                interval: (r.lo95, r.hi95),
                n_samples: 0,
                n_cells: r.n_cells,
            },
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_pairs_and_reports_bad_cells() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path();
        std::fs::write(
            p.join("arxiv__gpt4__p1.human.txt"),
            "We study cats.\n\nDogs run.\n",
        )
        .unwrap();
        std::fs::write(
            p.join("arxiv__gpt4__p1.edited.txt"),
            "We delve into cats.\nOrphan edit\n\n",
        )
        .unwrap();
        std::fs::write(p.join("arxiv__gpt35__p1.human.txt"), "one\ntwo\n").unwrap();
        std::fs::write(p.join("arxiv__gpt35__p1.edited.txt"), "one\n").unwrap();
        std::fs::write(p.join("nature__gpt4__p2.human.txt"), "alone\n").unwrap();
        std::fs::write(p.join("bio__gpt4o__p3.human.stems"), "delv realm\nrealm\n").unwrap();
        std::fs::write(p.join("bio__gpt4o__p3.edited.stems"), "delv\ndelv realm\n").unwrap();
        std::fs::write(p.join("README"), "ignored").unwrap();

        let (cells, errors) = load_contrastive_dir(p, &PreprocessConfig::default()).unwrap();
        let keys: Vec<String> = cells.iter().map(|c| c.key.to_string()).collect();
        assert_eq!(keys, ["arxiv__gpt4__p1", "bio__gpt4o__p3"]);
        assert_eq!(cells[0].len(), 1);
        assert!(cells[0].edited_docs()[0].contains("delv"));
        assert_eq!(cells[1].len(), 2);
        let bad: Vec<&str> = errors.iter().map(|e| e.cell.as_str()).collect();
        assert_eq!(bad, ["arxiv__gpt35__p1", "nature__gpt4__p2"]);
    }

    #[test]
    fn score_csv_roundtrip() {
        let s = vec![GptScore {
            word: "delv".into(),
            score: 4.5,
            interval: (4.0, 5.25),
            n_samples: 1000,
            n_cells: 3,
        }];
        let mut buf = Vec::new();
        write_score_csv(&mut buf, &s).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "word,score,lo95,hi95,n_cells\ndelv,4.5,4.0,5.25,3\n"
        );
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), buf).unwrap();
        let back = read_score_csv(f.path()).unwrap();
        assert_eq!(back["delv"].interval, (4.0, 5.25));
    }
}
