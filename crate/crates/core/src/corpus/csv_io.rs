use std::collections::HashSet;
use std::path::Path;

use super::{ClozeItem, FiveSentenceStory};
use crate::error::{Error, Result};

pub const TRAINING_HEADER: [&str; 7] = [
    "storyid",
    "storytitle",
    "sentence1",
    "sentence2",
    "sentence3",
    "sentence4",
    "sentence5",
];

pub const CLOZE_HEADER: [&str; 8] = [
    "InputStoryid",
    "InputSentence1",
    "InputSentence2",
    "InputSentence3",
    "InputSentence4",
    "RandomFifthSentenceQuiz1",
    "RandomFifthSentenceQuiz2",
    "AnswerRightEnding",
];

pub const CLOZE_HEADER_UNLABELED: [&str; 7] = [
    "InputStoryid",
    "InputSentence1",
    "InputSentence2",
    "InputSentence3",
    "InputSentence4",
    "RandomFifthSentenceQuiz1",
    "RandomFifthSentenceQuiz2",
];

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file))
}

fn csv_error(path: &Path, row: usize, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::MalformedRow {
            path: path.to_path_buf(),
            row,
            message: format!("{other:?}"),
        },
    }
}

fn header_of(path: &Path, reader: &mut csv::Reader<std::fs::File>) -> Result<Vec<String>> {
    Ok(reader
        .headers()
        .map_err(|e| csv_error(path, 0, e))?
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').to_string())
        .collect())
}

fn header_mismatch(path: &Path, expected: &[&str], found: &[String]) -> Error {
    Error::BadHeader {
        path: path.to_path_buf(),
        expected: expected.join(","),
        found: found.join(","),
    }
}

/// Returns the trimmed field, rejecting empty text.
fn sentence_field<'r>(path: &Path, row: usize, record: &'r csv::StringRecord, col: usize, name: &str) -> Result<&'r str> {
    let text = record[col].trim();
    if text.is_empty() {
        return Err(Error::EmptySentence {
            path: path.to_path_buf(),
            row,
            column: name.to_string(),
        });
    }
    Ok(text)
}

fn check_width(path: &Path, row: usize, record: &csv::StringRecord, want: usize) -> Result<()> {
    if record.len() != want {
        return Err(Error::MalformedRow {
            path: path.to_path_buf(),
            row,
            message: format!("expected {want} columns, found {}", record.len()),
        });
    }
    Ok(())
}

fn check_unique(path: &Path, row: usize, seen: &mut HashSet<String>, id: &str) -> Result<()> {
    if id.is_empty() {
        return Err(Error::MalformedRow {
            path: path.to_path_buf(),
            row,
            message: "empty id".into(),
        });
    }
    if !seen.insert(id.to_string()) {
        return Err(Error::DuplicateKey(id.to_string()));
    }
    Ok(())
}

/// Loads `storyid,storytitle,sentence1..sentence5`. Rows are numbered from 1
/// (the first data row) in error messages.
pub fn load_training_corpus(path: impl AsRef<Path>) -> Result<Vec<FiveSentenceStory>> {
    let path = path.as_ref();
    let mut reader = open(path)?;
    let header = header_of(path, &mut reader)?;
    if header != TRAINING_HEADER {
        return Err(header_mismatch(path, &TRAINING_HEADER, &header));
    }
    let mut stories = Vec::new();
    let mut seen = HashSet::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| csv_error(path, row, e))?;
        check_width(path, row, &record, TRAINING_HEADER.len())?;
        let id = record[0].trim();
        check_unique(path, row, &mut seen, id)?;
        let mut texts = [""; 5];
        for (k, t) in texts.iter_mut().enumerate() {
            *t = sentence_field(path, row, &record, k + 2, TRAINING_HEADER[k + 2])?;
        }
        stories.push(FiveSentenceStory::from_texts(id, record[1].trim(), texts));
    }
    Ok(stories)
}

/// Loads a validation/test file. With `labeled`, the `AnswerRightEnding`
/// column is required and mapped from `{1,2}` to gold index `{0,1}`; without
/// it, the column is optional and ignored.
pub fn load_cloze_set(path: impl AsRef<Path>, labeled: bool) -> Result<Vec<ClozeItem>> {
    let path = path.as_ref();
    let mut reader = open(path)?;
    let header = header_of(path, &mut reader)?;
    let width = if header == CLOZE_HEADER {
        CLOZE_HEADER.len()
    } else if !labeled && header == CLOZE_HEADER_UNLABELED {
        CLOZE_HEADER_UNLABELED.len()
    } else {
        return Err(header_mismatch(path, &CLOZE_HEADER, &header));
    };
    let mut items = Vec::new();
    let mut seen = HashSet::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| csv_error(path, row, e))?;
        check_width(path, row, &record, width)?;
        let id = record[0].trim();
        check_unique(path, row, &mut seen, id)?;
        let mut texts = [""; 6];
        for (k, t) in texts.iter_mut().enumerate() {
            *t = sentence_field(path, row, &record, k + 1, CLOZE_HEADER[k + 1])?;
        }
        let gold_index = if labeled {
            match record[7].trim() {
                "1" => Some(0),
                "2" => Some(1),
                other => {
                    return Err(Error::BadAnswer {
                        path: path.to_path_buf(),
                        row,
                        value: other.to_string(),
                    })
                }
            }
        } else {
            None
        };
        items.push(ClozeItem::from_texts(
            id,
            [texts[0], texts[1], texts[2], texts[3]],
            [texts[4], texts[5]],
            gold_index,
        ));
    }
    Ok(items)
}

pub fn write_training_corpus(path: impl AsRef<Path>, stories: &[FiveSentenceStory]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, 0, e))?;
    w.write_record(TRAINING_HEADER).map_err(|e| csv_error(path, 0, e))?;
    for (i, s) in stories.iter().enumerate() {
        let mut rec = vec![s.story_id.as_str(), s.title.as_str()];
        rec.extend(s.sentences.iter().map(|x| x.text.as_str()));
        w.write_record(&rec).map_err(|e| csv_error(path, i + 1, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the labeled layout; unlabeled items get the 7-column layout only if
/// every item is unlabeled.
pub fn write_cloze_set(path: impl AsRef<Path>, items: &[ClozeItem]) -> Result<()> {
    let path = path.as_ref();
    let labeled = items.iter().any(|it| it.gold_index.is_some());
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, 0, e))?;
    if labeled {
        w.write_record(CLOZE_HEADER).map_err(|e| csv_error(path, 0, e))?;
    } else {
        w.write_record(CLOZE_HEADER_UNLABELED)
            .map_err(|e| csv_error(path, 0, e))?;
    }
    for (i, it) in items.iter().enumerate() {
        let mut rec: Vec<String> = vec![it.item_id.clone()];
        rec.extend(it.prompt.iter().map(|s| s.text.clone()));
        rec.extend(it.endings.iter().map(|s| s.text.clone()));
        if labeled {
            let gold = it
                .gold_index
                .ok_or_else(|| Error::UnlabeledItem(it.item_id.clone()))?;
            rec.push((gold + 1).to_string());
        }
        w.write_record(&rec).map_err(|e| csv_error(path, i + 1, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file_with(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    const TRAIN_HEAD: &str = "storyid,storytitle,sentence1,sentence2,sentence3,sentence4,sentence5\n";
    const CLOZE_HEAD: &str = "InputStoryid,InputSentence1,InputSentence2,InputSentence3,InputSentence4,RandomFifthSentenceQuiz1,RandomFifthSentenceQuiz2,AnswerRightEnding\n";

    #[test]
    fn empty_training_file() {
        let f = file_with(TRAIN_HEAD);
        assert!(load_training_corpus(f.path()).unwrap().is_empty());
    }

    #[test]
    fn two_training_rows() {
        let f = file_with(&format!(
            "{TRAIN_HEAD}a1,Movies,Bob loved movies.,He planned.,He invited friends.,They watched.,Bob had fun.\n\
             b2,Rain,It rained.,\"Sam, wet, ran.\",He slipped.,He got up.,He went home.\n"
        ));
        let s = load_training_corpus(f.path()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].story_id, "a1");
        assert_eq!(s[0].sentences[4].text, "Bob had fun.");
        assert_eq!(s[0].sentences[4].key, "a1#s5");
        assert_eq!(s[1].sentences[1].text, "Sam, wet, ran.");
    }

    #[test]
    fn training_errors_name_the_row() {
        let f = file_with(&format!("{TRAIN_HEAD}a,t,1,2,3,4,5\nb,t,1,2,3\n"));
        match load_training_corpus(f.path()) {
            Err(Error::MalformedRow { row, .. }) => assert_eq!(row, 2),
            other => panic!("{other:?}"),
        }
        let f = file_with(&format!("{TRAIN_HEAD}a,t,1,2, ,4,5\n"));
        match load_training_corpus(f.path()) {
            Err(Error::EmptySentence { row, column, .. }) => {
                assert_eq!(row, 1);
                assert_eq!(column, "sentence3");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            load_training_corpus("/definitely/not/here.csv"),
            Err(Error::Io { .. })
        ));
        let f = file_with("id,title\n");
        assert!(matches!(load_training_corpus(f.path()), Err(Error::BadHeader { .. })));
        let f = file_with(&format!("{TRAIN_HEAD}a,t,1,2,3,4,5\na,t,1,2,3,4,5\n"));
        assert!(matches!(load_training_corpus(f.path()), Err(Error::DuplicateKey(_))));
    }

    #[test]
    fn answers_map_to_zero_based_gold() {
        let f = file_with(&format!("{CLOZE_HEAD}x,a,b,c,d,e1,e2,1\ny,a,b,c,d,e1,e2,2\n"));
        let items = load_cloze_set(f.path(), true).unwrap();
        assert_eq!(items[0].gold_index, Some(0));
        assert_eq!(items[1].gold_index, Some(1));
        assert_eq!(items[1].endings[1].key, "y#e2");
        assert_eq!(items[1].prompt[3].key, "y#s4");
    }

    #[test]
    fn bad_answer_is_rejected() {
        let f = file_with(&format!("{CLOZE_HEAD}x,a,b,c,d,e1,e2,3\n"));
        assert!(matches!(load_cloze_set(f.path(), true), Err(Error::BadAnswer { row: 1, .. })));
    }

    #[test]
    fn unlabeled_layout() {
        let f = file_with("InputStoryid,InputSentence1,InputSentence2,InputSentence3,InputSentence4,RandomFifthSentenceQuiz1,RandomFifthSentenceQuiz2\nx,a,b,c,d,e,f\n");
        let items = load_cloze_set(f.path(), false).unwrap();
        assert_eq!(items[0].gold_index, None);
        assert!(load_cloze_set(f.path(), true).is_err());
    }

    #[test]
    fn written_files_load_back() {
        let dir = tempfile::tempdir().unwrap();
        let stories = vec![FiveSentenceStory::from_texts("s", "T", ["a", "b, c", "d \"q\"", "e", "f"])];
        write_training_corpus(dir.path().join("t.csv"), &stories).unwrap();
        assert_eq!(load_training_corpus(dir.path().join("t.csv")).unwrap(), stories);
        let items = vec![ClozeItem::from_texts("i", ["a", "b", "c", "d"], ["e", "f"], Some(1))];
        write_cloze_set(dir.path().join("c.csv"), &items).unwrap();
        assert_eq!(load_cloze_set(dir.path().join("c.csv"), true).unwrap(), items);
    }
}
