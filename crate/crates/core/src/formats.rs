//! Reading and writing the pipeline's text formats.
//!
//! | file               | layout                                                          |
//! |--------------------|-----------------------------------------------------------------|
//! | events.tsv         | `filename\tonset\toffset\tevent_label`                          |
//! | weak.tsv           | `filename\tevent_labels` (labels comma separated)               |
//! | grids.jsonl        | `{"clip_id","hop_seconds","classes","posteriors"}` per line     |
//! | tags.jsonl         | `{"source_id","parent_clip_id","probs":{class: p, .., other: p}}` |
//! | sep_manifest.jsonl | `{"mixture_id","sources":[..]}`                                 |
//!
//! Every reader has a `*_str` twin that parses from memory; the path-based
//! versions only add file access and error context. Writers go through
//! [`write_atomic`].

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{
    ClassVocabulary, Event, EventList, FrameGrid, SeparationManifest, TagPrediction, WeakLabelSet,
};

pub const EVENTS_HEADER: &str = "filename\tonset\toffset\tevent_label";
pub const WEAK_HEADER: &str = "filename\tevent_labels";

/// Writes `contents` to a temporary file next to `path` and renames it into
/// place.
pub fn write_atomic(path: impl AsRef<Path>, contents: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn read_to_string(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn display_name(path: &Path) -> String {
    path.display().to_string()
}

/// Shortest round-trip representation with at least three decimals.
pub fn format_seconds(x: f64) -> String {
    let s = format!("{x}");
    let decimals = s.split_once('.').map_or(0, |(_, frac)| frac.len());
    if decimals >= 3 {
        s
    } else {
        format!("{x:.3}")
    }
}

/// Yields `(1-based line number, content)` for non-blank lines, with a
/// trailing `\r` removed.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn expect_header<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    header: &str,
    file: &str,
) -> Result<()> {
    match lines.next() {
        None => Err(Error::parse(file, 1, format!("missing header '{header}'"))),
        Some((n, line)) if line.trim_end() != header => Err(Error::parse(
            file,
            n,
            format!("expected header '{}', found '{line}'", header.replace('\t', "\\t")),
        )),
        Some(_) => Ok(()),
    }
}

// ---------------------------------------------------------------------------
// events.tsv

pub fn parse_events(path: impl AsRef<Path>, vocab: &ClassVocabulary) -> Result<EventList> {
    let path = path.as_ref();
    parse_events_str(&read_to_string(path)?, vocab, &display_name(path))
}

pub fn parse_events_str(text: &str, vocab: &ClassVocabulary, file: &str) -> Result<EventList> {
    let mut lines = content_lines(text);
    expect_header(&mut lines, EVENTS_HEADER, file)?;
    let mut events = Vec::new();
    for (n, line) in lines {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::parse(
                file,
                n,
                format!("expected 4 tab-separated columns, found {}", cols.len()),
            ));
        }
        let time = |s: &str, what: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(file, n, format!("non-numeric {what} '{s}'")))
        };
        let event = Event::new(cols[0], time(cols[1], "onset")?, time(cols[2], "offset")?, cols[3]);
        if event.clip_id.is_empty() {
            return Err(Error::parse(file, n, "empty filename"));
        }
        event.check_times().map_err(|m| Error::parse(file, n, m))?;
        if !vocab.contains(&event.class) {
            return Err(Error::Vocabulary {
                location: format!("{file}:{n}"),
                class: event.class,
            });
        }
        events.push(event);
    }
    Ok(EventList::from_trusted(events))
}

pub fn events_to_string(events: &EventList) -> String {
    let mut out = String::with_capacity(32 * (events.len() + 1));
    out.push_str(EVENTS_HEADER);
    out.push('\n');
    for e in events {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            e.clip_id,
            format_seconds(e.onset),
            format_seconds(e.offset),
            e.class
        );
    }
    out
}

pub fn write_events(events: &EventList, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, events_to_string(events).as_bytes())
}

// ---------------------------------------------------------------------------
// grids.jsonl

#[derive(Debug, Serialize, Deserialize)]
struct GridRecord {
    clip_id: String,
    hop_seconds: f64,
    classes: Vec<String>,
    posteriors: Vec<Vec<f64>>,
}

pub fn parse_framegrids(path: impl AsRef<Path>, vocab: &ClassVocabulary) -> Result<Vec<FrameGrid>> {
    let path = path.as_ref();
    parse_framegrids_str(&read_to_string(path)?, vocab, &display_name(path))
}

pub fn parse_framegrids_str(
    text: &str,
    vocab: &ClassVocabulary,
    file: &str,
) -> Result<Vec<FrameGrid>> {
    let mut grids = Vec::new();
    for (n, line) in content_lines(text) {
        let rec: GridRecord = serde_json::from_str(line)
            .map_err(|e| Error::parse(file, n, format!("invalid grid record: {e}")))?;
        grids.push(grid_from_record(rec, vocab, file, n)?);
    }
    Ok(grids)
}

fn grid_from_record(rec: GridRecord, vocab: &ClassVocabulary, file: &str, line: usize) -> Result<FrameGrid> {
    let clip = rec.clip_id;
    let c = vocab.len();
    if rec.classes.len() != c {
        return Err(Error::validation(
            &clip,
            format!("{file}:{line}"),
            format!("{} classes in record, vocabulary has {c}", rec.classes.len()),
        ));
    }
    // order[j] = record column holding vocabulary class j
    let mut order = vec![usize::MAX; c];
    for (col, name) in rec.classes.iter().enumerate() {
        match vocab.index_of(name) {
            Some(j) if order[j] == usize::MAX => order[j] = col,
            Some(_) => {
                return Err(Error::validation(
                    &clip,
                    format!("{file}:{line}"),
                    format!("class '{name}' listed twice"),
                ))
            }
            None => {
                return Err(Error::Vocabulary {
                    location: format!("{file}:{line} clip '{clip}'"),
                    class: name.clone(),
                })
            }
        }
    }
    let mut values = Vec::with_capacity(rec.posteriors.len() * c);
    for (t, row) in rec.posteriors.iter().enumerate() {
        if row.len() != c {
            return Err(Error::validation(
                &clip,
                format!("{file}:{line} frame {t}"),
                format!("row has {} values, expected {c}", row.len()),
            ));
        }
        for (j, &col) in order.iter().enumerate() {
            let v = row[col];
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(
                    &clip,
                    format!("{file}:{line} frame {t}"),
                    format!("posterior {v} for class '{}' outside [0, 1]", vocab.name(j)),
                ));
            }
            values.push(v);
        }
    }
    FrameGrid::new(clip, rec.hop_seconds, c, values)
}

pub fn framegrids_to_string(grids: &[FrameGrid], vocab: &ClassVocabulary) -> Result<String> {
    let mut out = String::new();
    for g in grids {
        if g.n_classes() != vocab.len() {
            return Err(Error::Shape(format!(
                "grid '{}' has {} classes, vocabulary has {}",
                g.clip_id(),
                g.n_classes(),
                vocab.len()
            )));
        }
        let rec = GridRecord {
            clip_id: g.clip_id().to_string(),
            hop_seconds: g.hop_seconds(),
            classes: vocab.classes().to_vec(),
            posteriors: (0..g.n_frames()).map(|t| g.row(t).to_vec()).collect(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("grid record serializes"));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_framegrids(
    grids: &[FrameGrid],
    vocab: &ClassVocabulary,
    path: impl AsRef<Path>,
) -> Result<()> {
    write_atomic(path, framegrids_to_string(grids, vocab)?.as_bytes())
}

/// Class list of the first record, used when no vocabulary is given.
pub fn infer_vocab_from_grids(path: impl AsRef<Path>) -> Result<ClassVocabulary> {
    let path = path.as_ref();
    let file = display_name(path);
    let text = read_to_string(path)?;
    let (n, line) = content_lines(&text)
        .next()
        .ok_or_else(|| Error::parse(&file, 1, "empty grid file; cannot infer classes"))?;
    let rec: GridRecord = serde_json::from_str(line)
        .map_err(|e| Error::parse(&file, n, format!("invalid grid record: {e}")))?;
    ClassVocabulary::new(rec.classes)
}

// ---------------------------------------------------------------------------
// weak.tsv

pub fn parse_weak_labels(path: impl AsRef<Path>, vocab: &ClassVocabulary) -> Result<WeakLabelSet> {
    let path = path.as_ref();
    parse_weak_labels_str(&read_to_string(path)?, vocab, &display_name(path))
}

pub fn parse_weak_labels_str(text: &str, vocab: &ClassVocabulary, file: &str) -> Result<WeakLabelSet> {
    let mut lines = content_lines(text);
    expect_header(&mut lines, WEAK_HEADER, file)?;
    let mut labels: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (n, line) in lines {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 2 {
            return Err(Error::parse(
                file,
                n,
                format!("expected 2 tab-separated columns, found {}", cols.len()),
            ));
        }
        let clip = cols[0];
        if clip.is_empty() {
            return Err(Error::parse(file, n, "empty filename"));
        }
        let mut set = BTreeSet::new();
        for name in cols[1].split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if !vocab.contains(name) {
                return Err(Error::Vocabulary {
                    location: format!("{file}:{n}"),
                    class: name.to_string(),
                });
            }
            set.insert(name.to_string());
        }
        if set.is_empty() {
            return Err(Error::parse(file, n, format!("clip '{clip}' has no labels")));
        }
        if labels.insert(clip.to_string(), set).is_some() {
            return Err(Error::parse(file, n, format!("duplicate row for clip '{clip}'")));
        }
    }
    WeakLabelSet::new(labels, vocab)
}

pub fn weak_labels_to_string(weak: &WeakLabelSet, vocab: &ClassVocabulary) -> String {
    let mut out = String::new();
    out.push_str(WEAK_HEADER);
    out.push('\n');
    for (clip, set) in weak.iter() {
        // vocabulary order, so output is independent of name collation
        let names: Vec<&str> = vocab
            .classes()
            .iter()
            .filter(|c| set.contains(*c))
            .map(String::as_str)
            .collect();
        let _ = writeln!(out, "{clip}\t{}", names.join(","));
    }
    out
}

pub fn write_weak_labels(
    weak: &WeakLabelSet,
    vocab: &ClassVocabulary,
    path: impl AsRef<Path>,
) -> Result<()> {
    write_atomic(path, weak_labels_to_string(weak, vocab).as_bytes())
}

// ---------------------------------------------------------------------------
// tags.jsonl

#[derive(Debug, Serialize, Deserialize)]
struct TagRecord {
    source_id: String,
    parent_clip_id: String,
    probs: serde_json::Map<String, serde_json::Value>,
}

pub fn parse_tags(path: impl AsRef<Path>, vocab: &ClassVocabulary) -> Result<Vec<TagPrediction>> {
    let path = path.as_ref();
    parse_tags_str(&read_to_string(path)?, vocab, &display_name(path))
}

pub fn parse_tags_str(text: &str, vocab: &ClassVocabulary, file: &str) -> Result<Vec<TagPrediction>> {
    let mut out = Vec::new();
    for (n, line) in content_lines(text) {
        let rec: TagRecord = serde_json::from_str(line)
            .map_err(|e| Error::parse(file, n, format!("invalid tag record: {e}")))?;
        let mut target = vec![f64::NAN; vocab.len()];
        let mut other = None;
        for (name, value) in &rec.probs {
            let p = value.as_f64().ok_or_else(|| {
                Error::parse(file, n, format!("probability for '{name}' is not a number"))
            })?;
            if name == vocab.other_label() {
                other = Some(p);
            } else if let Some(j) = vocab.index_of(name) {
                target[j] = p;
            } else {
                return Err(Error::Vocabulary {
                    location: format!("{file}:{n} source '{}'", rec.source_id),
                    class: name.clone(),
                });
            }
        }
        if let Some(j) = target.iter().position(|p| p.is_nan()) {
            return Err(Error::validation(
                &rec.source_id,
                format!("{file}:{n}"),
                format!("missing probability for class '{}'", vocab.name(j)),
            ));
        }
        let other = other.ok_or_else(|| {
            Error::validation(
                &rec.source_id,
                format!("{file}:{n}"),
                format!("missing probability for '{}'", vocab.other_label()),
            )
        })?;
        out.push(TagPrediction::new(
            rec.source_id,
            rec.parent_clip_id,
            target,
            other,
            vocab,
        )?);
    }
    Ok(out)
}

pub fn tags_to_string(tags: &[TagPrediction], vocab: &ClassVocabulary) -> String {
    let mut out = String::new();
    for tag in tags {
        let mut probs = serde_json::Map::new();
        for (name, &p) in vocab.classes().iter().zip(&tag.target) {
            probs.insert(name.clone(), p.into());
        }
        probs.insert(vocab.other_label().to_string(), tag.other.into());
        let rec = TagRecord {
            source_id: tag.source_id.clone(),
            parent_clip_id: tag.parent_clip_id.clone(),
            probs,
        };
        out.push_str(&serde_json::to_string(&rec).expect("tag record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_tags(tags: &[TagPrediction], vocab: &ClassVocabulary, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, tags_to_string(tags, vocab).as_bytes())
}

/// Target classes of the first tag record, in key order.
pub fn infer_vocab_from_tags(path: impl AsRef<Path>, other_label: &str) -> Result<ClassVocabulary> {
    let path = path.as_ref();
    let file = display_name(path);
    let text = read_to_string(path)?;
    let (n, line) = content_lines(&text)
        .next()
        .ok_or_else(|| Error::parse(&file, 1, "empty tag file; cannot infer classes"))?;
    let rec: TagRecord = serde_json::from_str(line)
        .map_err(|e| Error::parse(&file, n, format!("invalid tag record: {e}")))?;
    ClassVocabulary::with_other_label(
        rec.probs.keys().filter(|k| *k != other_label).cloned(),
        other_label,
    )
}

// ---------------------------------------------------------------------------
// sep_manifest.jsonl

#[derive(Debug, Serialize, Deserialize)]
struct ManifestRecord {
    mixture_id: String,
    sources: Vec<String>,
}

pub fn parse_manifest(path: impl AsRef<Path>) -> Result<SeparationManifest> {
    let path = path.as_ref();
    parse_manifest_str(&read_to_string(path)?, &display_name(path))
}

pub fn parse_manifest_str(text: &str, file: &str) -> Result<SeparationManifest> {
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in content_lines(text) {
        let rec: ManifestRecord = serde_json::from_str(line)
            .map_err(|e| Error::parse(file, n, format!("invalid manifest record: {e}")))?;
        if !seen.insert(rec.mixture_id.clone()) {
            return Err(Error::parse(
                file,
                n,
                format!("duplicate mixture '{}'", rec.mixture_id),
            ));
        }
        entries.push((rec.mixture_id, rec.sources));
    }
    SeparationManifest::new(entries)
}

pub fn manifest_to_string(manifest: &SeparationManifest) -> String {
    let mut out = String::new();
    for (mix, sources) in manifest.entries() {
        let rec = ManifestRecord {
            mixture_id: mix.clone(),
            sources: sources.clone(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("manifest record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_manifest(manifest: &SeparationManifest, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, manifest_to_string(manifest).as_bytes())
}

/// Serializes any value as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Input(format!("cannot serialize JSON: {e}")))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| {
        Error::parse(display_name(path), e.line(), format!("invalid JSON: {e}"))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> ClassVocabulary {
        ClassVocabulary::desed(10).unwrap()
    }

    #[test]
    fn single_event_row() {
        let text = format!("{EVENTS_HEADER}\nclip1\t1.000\t2.000\tSpeech\n");
        let ev = parse_events_str(&text, &vocab(), "t").unwrap();
        assert_eq!(ev.events(), &[Event::new("clip1", 1.0, 2.0, "Speech")]);
    }

    #[test]
    fn header_only_is_empty() {
        let ev = parse_events_str(&format!("{EVENTS_HEADER}\n"), &vocab(), "t").unwrap();
        assert!(ev.is_empty());
    }

    #[test]
    fn reversed_interval_names_line() {
        let text = format!("{EVENTS_HEADER}\nclip0\t0.0\t1.0\tDog\nclip1\t2.0\t1.0\tSpeech\n");
        match parse_events_str(&text, &vocab(), "ev.tsv").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn malformed_rows() {
        let v = vocab();
        let bad_cols = format!("{EVENTS_HEADER}\nclip1\t1.0\t2.0\n");
        assert!(matches!(
            parse_events_str(&bad_cols, &v, "t"),
            Err(Error::Parse { line: 2, .. })
        ));
        let bad_num = format!("{EVENTS_HEADER}\nclip1\tabc\t2.0\tSpeech\n");
        assert!(matches!(
            parse_events_str(&bad_num, &v, "t"),
            Err(Error::Parse { line: 2, .. })
        ));
        let unknown = format!("{EVENTS_HEADER}\nclip1\t1.0\t2.0\tUnicorn\n");
        assert!(matches!(
            parse_events_str(&unknown, &v, "t"),
            Err(Error::Vocabulary { .. })
        ));
        assert!(parse_events_str("a\tb\n", &v, "t").is_err());
    }

    #[test]
    fn written_times_keep_three_decimals() {
        assert_eq!(format_seconds(1.0), "1.000");
        assert_eq!(format_seconds(0.25), "0.250");
        assert_eq!(format_seconds(0.123456), "0.123456");
        let ev = EventList::new(vec![Event::new("c", 0.123456, 1.0, "Cat")], &vocab()).unwrap();
        let text = events_to_string(&ev);
        assert!(text.contains("0.123456\t1.000\tCat"));
        let back = parse_events_str(&text, &vocab(), "t").unwrap();
        assert!((back.events()[0].onset - 0.123456).abs() < 1e-9);
        assert_eq!(back, ev);
    }

    #[test]
    fn empty_list_writes_header_only() {
        assert_eq!(events_to_string(&EventList::empty()), format!("{EVENTS_HEADER}\n"));
    }

    #[test]
    fn weak_labels_example_rows() {
        let v = vocab();
        let w = parse_weak_labels_str(
            &format!("{WEAK_HEADER}\nm1\tCat,Dog,Dishes,Speech\nm2\tCat,Cat\n"),
            &v,
            "w",
        )
        .unwrap();
        assert_eq!(w.get("m1").unwrap().len(), 4);
        assert_eq!(
            w.get("m2").unwrap().iter().collect::<Vec<_>>(),
            vec!["Cat"]
        );
        assert!(matches!(
            parse_weak_labels_str(&format!("{WEAK_HEADER}\nm3\tUnicorn\n"), &v, "w"),
            Err(Error::Vocabulary { .. })
        ));
        assert!(matches!(
            parse_weak_labels_str(&format!("{WEAK_HEADER}\nm1\tCat\nm1\tDog\n"), &v, "w"),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn grid_records_reorder_and_validate() {
        let v = ClassVocabulary::new(["A", "B"]).unwrap();
        let text = r#"{"clip_id":"x","hop_seconds":0.5,"classes":["B","A"],"posteriors":[[0.1,0.9],[0.2,0.8]]}"#;
        let g = &parse_framegrids_str(text, &v, "g").unwrap()[0];
        assert_eq!(g.row(0), &[0.9, 0.1]);
        let bad = r#"{"clip_id":"x","hop_seconds":0.5,"classes":["A","B"],"posteriors":[[0.1,1.2]]}"#;
        let msg = parse_framegrids_str(bad, &v, "g").unwrap_err().to_string();
        assert!(msg.contains("'x'") && msg.contains("frame 0"), "{msg}");
        let wrong = r#"{"clip_id":"x","hop_seconds":0.5,"classes":["A","C"],"posteriors":[[0.1,0.2]]}"#;
        assert!(parse_framegrids_str(wrong, &v, "g").is_err());
    }

    #[test]
    fn constant_grid_and_order() {
        let v = vocab();
        let g1 = FrameGrid::new("a", 10.0 / 512.0, 10, vec![0.5; 5120]).unwrap();
        let g2 = FrameGrid::new("b", 10.0 / 512.0, 10, vec![0.25; 5120]).unwrap();
        let text = framegrids_to_string(&[g1.clone(), g2.clone()], &v).unwrap();
        let back = parse_framegrids_str(&text, &v, "g").unwrap();
        assert_eq!(back, vec![g1, g2]);
        assert_eq!(back[0].n_frames(), 512);
    }

    #[test]
    fn tags_and_manifest_round_trip() {
        let v = ClassVocabulary::new(["Cat", "Speech"]).unwrap();
        let tags = vec![TagPrediction::new("s1", "m1", vec![0.9, 0.1], 0.05, &v).unwrap()];
        let text = tags_to_string(&tags, &v);
        assert!(text.starts_with(r#"{"source_id":"s1","parent_clip_id":"m1","probs":{"Cat":0.9"#));
        assert_eq!(parse_tags_str(&text, &v, "t").unwrap(), tags);
        let missing = r#"{"source_id":"s","parent_clip_id":"m","probs":{"Cat":0.5,"other":0.1}}"#;
        assert!(parse_tags_str(missing, &v, "t").is_err());

        let m = SeparationManifest::new(vec![("m1".into(), vec!["a".into(), "b".into()])]).unwrap();
        assert_eq!(parse_manifest_str(&manifest_to_string(&m), "m").unwrap(), m);
    }
}
