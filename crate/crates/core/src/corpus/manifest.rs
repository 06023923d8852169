//! Directory ingestion driven by a manifest.
//!
//! A manifest is a text file with one rule per line, three tab-separated
//! fields `glob`, `format`, `bpw`:
//!
//! ```text
//! # glob<TAB>format<TAB>bpw
//! news/cover*.txt<TAB>news<TAB>0
//! news/bpw3/*.txt<TAB>news<TAB>3
//! ```
//!
//! Globs are matched against paths relative to the corpus root, with `/`
//! separators. The first matching rule wins. Blank lines and lines starting
//! with `#` are ignored. Every data file holds one sentence per line.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use glob::Pattern;

use super::dataset::{TextCorpus, MAX_BPW};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct ManifestRule {
    pub pattern: Pattern,
    pub format: String,
    pub bpw: u8,
}

#[derive(Clone, Debug, Default)]
pub struct Manifest {
    pub rules: Vec<ManifestRule>,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        let mut rules = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::data(format!(
                    "manifest line {}: expected glob<TAB>format<TAB>bpw, got {} field(s)",
                    n + 1,
                    fields.len()
                )));
            }
            let pattern = Pattern::new(fields[0].trim())
                .map_err(|e| Error::data(format!("manifest line {}: bad glob: {e}", n + 1)))?;
            let bpw: u8 = fields[2]
                .trim()
                .parse()
                .map_err(|_| Error::data(format!("manifest line {}: bpw {:?} is not a number", n + 1, fields[2])))?;
            if bpw > MAX_BPW {
                return Err(Error::data(format!(
                    "manifest line {}: bpw {bpw} exceeds {MAX_BPW}",
                    n + 1
                )));
            }
            rules.push(ManifestRule {
                pattern,
                format: fields[1].trim().to_string(),
                bpw,
            });
        }
        Ok(Manifest { rules })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# glob\tformat\tbpw\n");
        for r in &self.rules {
            out.push_str(&format!("{}\t{}\t{}\n", r.pattern.as_str(), r.format, r.bpw));
        }
        out
    }

    pub fn rule_for(&self, relative: &str) -> Option<&ManifestRule> {
        self.rules.iter().find(|r| r.pattern.matches(relative))
    }
}

/// Result of ingesting a corpus directory.
#[derive(Clone, Debug, Default)]
pub struct IngestReport {
    pub corpus: TextCorpus,
    /// Files found under the root that no rule mapped.
    pub unmapped: Vec<PathBuf>,
    /// Non-empty lines per (format, bpw).
    pub counts: BTreeMap<(String, u8), usize>,
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            walk(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

/// Reads every manifest-mapped file under `root`; each non-blank line is
/// one sample carrying its rule's bpw. Files are visited in sorted path
/// order. Unmapped files are reported, not read.
pub fn load_tsteg_layout(root: &Path, manifest: &Manifest) -> Result<IngestReport> {
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "corpus root is not a directory"),
        ));
    }
    let mut files = Vec::new();
    walk(root, &mut files)?;
    let mut report = IngestReport::default();
    for file in files {
        let rel = file
            .strip_prefix(root)
            .unwrap_or(&file)
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        let Some(rule) = manifest.rule_for(&rel) else {
            report.unmapped.push(file);
            continue;
        };
        let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        let source = format!("{}:{}", rule.format, rel);
        let mut kept = 0;
        for line in text.lines() {
            if report.corpus.push_line(line, rule.bpw, &source) {
                kept += 1;
            }
        }
        *report.counts.entry((rule.format.clone(), rule.bpw)).or_default() += kept;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_rules() {
        let m = Manifest::parse("# comment\n\nnews/*.txt\tnews\t2\ntweets/b5.txt\ttwitter\t5\n").unwrap();
        assert_eq!(m.rules.len(), 2);
        assert_eq!(m.rule_for("news/a.txt").unwrap().bpw, 2);
        assert!(m.rule_for("imdb/a.txt").is_none());
        assert!(Manifest::parse("a\tb\n").is_err());
        assert!(Manifest::parse("a\tb\tx\n").is_err());
        assert!(Manifest::parse("a\tb\t9\n").is_err());
        let again = Manifest::parse(&m.to_text()).unwrap();
        assert_eq!(again.rules.len(), 2);
    }

    #[test]
    fn ingest_directory() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        fs::create_dir_all(root.join("news")).unwrap();
        fs::write(root.join("news/cover.txt"), "one line\n\ntwo line\n   \n").unwrap();
        fs::write(root.join("news/b2.txt"), "a\nb\nc\n").unwrap();
        fs::write(root.join("README"), "not data\n").unwrap();
        let m = Manifest::parse("news/cover.txt\tnews\t0\nnews/b*.txt\tnews\t2\n").unwrap();
        let report = load_tsteg_layout(root, &m).unwrap();
        assert_eq!(report.corpus.len(), 5);
        let h = report.corpus.histogram();
        assert_eq!(h[&0], 2);
        assert_eq!(h[&2], 3);
        assert_eq!(report.unmapped.len(), 1);
        assert!(load_tsteg_layout(&root.join("missing"), &m).is_err());
    }
}
