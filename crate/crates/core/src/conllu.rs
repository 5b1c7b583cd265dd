//! CONLL-U ingestion: parsing, cleaning into directed trees, and per-language
//! filtering and sampling.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::DirectedTree;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TokenId {
    Word(usize),
    /// Multiword token `a-b`.
    Range(usize, usize),
    /// Empty node `a.b`.
    Empty(usize, usize),
}

impl FromStr for TokenId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let num = |x: &str| x.parse::<usize>().map_err(|_| format!("bad token id {s:?}"));
        if let Some((a, b)) = s.split_once('-') {
            Ok(TokenId::Range(num(a)?, num(b)?))
        } else if let Some((a, b)) = s.split_once('.') {
            Ok(TokenId::Empty(num(a)?, num(b)?))
        } else {
            match num(s)? {
                0 => Err("token id 0 is reserved for the root".into()),
                id => Ok(TokenId::Word(id)),
            }
        }
    }
}

/// One CONLL-U token line. Only `id`, `head` and `upos` are used downstream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenRecord {
    pub id: TokenId,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    pub feats: String,
    /// `Some(0)` marks the sentence root; ranges and empty nodes carry `None`.
    pub head: Option<usize>,
    pub deprel: String,
    pub deps: String,
    pub misc: String,
}

impl TokenRecord {
    /// Range and empty-node lines never become vertices.
    pub fn is_skipped(&self) -> bool {
        !matches!(self.id, TokenId::Word(_))
    }

    pub fn is_punct(&self) -> bool {
        self.upos == "PUNCT"
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawSentence {
    /// 1-based line number of the first token.
    pub line: usize,
    pub tokens: Vec<TokenRecord>,
}

fn parse_token(line: &str, line_no: usize) -> Result<TokenRecord> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 10 {
        return Err(Error::Parse { line: line_no, message: format!("expected 10 columns, found {}", cols.len()) });
    }
    let id: TokenId = cols[0].parse().map_err(|message| Error::Parse { line: line_no, message })?;
    let head = match (id, cols[6]) {
        (TokenId::Word(_), h) => {
            Some(h.parse::<usize>().map_err(|_| Error::Parse { line: line_no, message: format!("bad head {h:?}") })?)
        }
        (_, _) => None,
    };
    Ok(TokenRecord {
        id,
        form: cols[1].into(),
        lemma: cols[2].into(),
        upos: cols[3].into(),
        xpos: cols[4].into(),
        feats: cols[5].into(),
        head,
        deprel: cols[7].into(),
        deps: cols[8].into(),
        misc: cols[9].into(),
    })
}

/// Splits a CONLL-U stream into sentences. Blocks with no token lines are
/// dropped.
pub fn parse_conllu<R: Read>(input: R) -> Result<Vec<RawSentence>> {
    let mut sentences = Vec::new();
    let mut current = RawSentence { line: 0, tokens: Vec::new() };
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            if !current.tokens.is_empty() {
                sentences.push(std::mem::replace(&mut current, RawSentence { line: 0, tokens: Vec::new() }));
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        if current.tokens.is_empty() {
            current.line = line_no;
        }
        current.tokens.push(parse_token(line, line_no)?);
    }
    if !current.tokens.is_empty() {
        sentences.push(current);
    }
    Ok(sentences)
}

/// What to do with the dependents of a deleted punctuation token.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PunctPolicy {
    /// Attach them to the nearest non-punctuation ancestor.
    #[default]
    Reattach,
    /// Reject the sentence.
    Discard,
}

impl FromStr for PunctPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reattach" => Ok(Self::Reattach),
            "discard" => Ok(Self::Discard),
            other => Err(Error::Config(format!("unknown punctuation policy {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rejection {
    Empty,
    MultipleRoots,
    NotATree,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rejection::Empty => "empty",
            Rejection::MultipleRoots => "multiple-roots",
            Rejection::NotATree => "not-a-tree",
        })
    }
}

/// Cleans one sentence into a directed tree over its non-punctuation words,
/// re-indexed densely in surface order.
pub fn to_tree(sentence: &RawSentence, policy: PunctPolicy) -> std::result::Result<DirectedTree, Rejection> {
    let words: Vec<&TokenRecord> = sentence.tokens.iter().filter(|t| !t.is_skipped()).collect();
    let position: HashMap<usize, usize> = words
        .iter()
        .enumerate()
        .map(|(i, t)| match t.id {
            TokenId::Word(id) => (id, i),
            _ => unreachable!("skipped tokens filtered"),
        })
        .collect();
    // head as a position in `words`, None for the root
    let mut heads = Vec::with_capacity(words.len());
    for t in &words {
        heads.push(match t.head.expect("words carry heads") {
            0 => None,
            h => Some(*position.get(&h).ok_or(Rejection::NotATree)?),
        });
    }

    let mut new_index = vec![usize::MAX; words.len()];
    let mut kept = 0;
    for (i, t) in words.iter().enumerate() {
        if !t.is_punct() {
            new_index[i] = kept;
            kept += 1;
        }
    }
    if kept == 0 {
        return Err(Rejection::Empty);
    }

    let mut parents = vec![None; kept];
    let mut roots = 0;
    for (i, t) in words.iter().enumerate() {
        if t.is_punct() {
            continue;
        }
        let mut head = heads[i];
        let mut steps = 0;
        while let Some(h) = head {
            if !words[h].is_punct() {
                break;
            }
            if policy == PunctPolicy::Discard {
                return Err(Rejection::NotATree);
            }
            steps += 1;
            if steps > words.len() {
                return Err(Rejection::NotATree);
            }
            head = heads[h];
        }
        match head {
            Some(h) => parents[new_index[i]] = Some(new_index[h]),
            None => roots += 1,
        }
    }
    match roots {
        0 => Err(Rejection::NotATree),
        1 => DirectedTree::from_parents(parents).map_err(|_| Rejection::NotATree),
        _ => Err(Rejection::MultipleRoots),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SentenceTree {
    pub tree: DirectedTree,
    pub language: String,
    /// Position of the sentence in the language's concatenated treebanks.
    pub source_index: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusFilter {
    pub min_len: usize,
    pub max_len: usize,
    pub min_sentences: usize,
    pub cap: usize,
}

impl Default for CorpusFilter {
    fn default() -> Self {
        Self { min_len: 4, max_len: 50, min_sentences: 50, cap: 1000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSample {
    pub language: String,
    pub sentences: Vec<SentenceTree>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LanguageRejection {
    pub language: String,
    pub eligible: usize,
    pub required: usize,
}

impl fmt::Display for LanguageRejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: only {} eligible sentences (need {})", self.language, self.eligible, self.required)
    }
}

/// Keeps trees within the size bounds and samples at most `cap` of them
/// without replacement. The sample is returned in corpus order.
pub fn filter_and_sample(
    language: &str,
    trees: Vec<SentenceTree>,
    seed: u64,
    filter: &CorpusFilter,
) -> std::result::Result<CorpusSample, LanguageRejection> {
    let eligible: Vec<SentenceTree> =
        trees.into_iter().filter(|s| (filter.min_len..=filter.max_len).contains(&s.tree.n())).collect();
    if eligible.len() < filter.min_sentences {
        return Err(LanguageRejection {
            language: language.to_string(),
            eligible: eligible.len(),
            required: filter.min_sentences,
        });
    }
    let take = eligible.len().min(filter.cap);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = index::sample(&mut rng, eligible.len(), take).into_vec();
    chosen.sort_unstable();
    let mut slots: Vec<Option<SentenceTree>> = eligible.into_iter().map(Some).collect();
    let sentences = chosen.into_iter().map(|i| slots[i].take().expect("distinct indices")).collect();
    Ok(CorpusSample { language: language.to_string(), sentences, seed })
}

/// Counts from turning one language's files into trees.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    pub sentences: usize,
    pub trees: usize,
    pub rejected: BTreeMap<String, usize>,
}

/// Parses and cleans every file of one language, in order.
pub fn load_language(
    language: &str,
    paths: &[PathBuf],
    policy: PunctPolicy,
) -> Result<(Vec<SentenceTree>, IngestStats)> {
    let mut trees = Vec::new();
    let mut stats = IngestStats::default();
    for path in paths {
        let sentences = parse_conllu(crate::io::open(path)?).map_err(|e| match e {
            Error::Parse { line, message } => Error::Parse { line, message: format!("{}: {message}", path.display()) },
            other => other,
        })?;
        for sentence in &sentences {
            let source_index = stats.sentences;
            stats.sentences += 1;
            match to_tree(sentence, policy) {
                Ok(tree) => trees.push(SentenceTree { tree, language: language.to_string(), source_index }),
                Err(reason) => *stats.rejected.entry(reason.to_string()).or_insert(0) += 1,
            }
        }
    }
    stats.trees = trees.len();
    Ok((trees, stats))
}

/// Language id → CONLL-U files.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    pub languages: BTreeMap<String, Vec<PathBuf>>,
}

impl Manifest {
    /// Reads lines of `language<TAB>path[<TAB>path…]`. Blank lines and `#`
    /// comments are ignored; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut languages: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields: Vec<&str> = if line.contains('\t') {
                line.split('\t').map(str::trim).filter(|f| !f.is_empty()).collect()
            } else {
                line.split_whitespace().collect()
            };
            if fields.len() < 2 {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "expected a language id and at least one path".into(),
                });
            }
            let language = fields.remove(0).to_string();
            let entry = languages.entry(language).or_default();
            entry.extend(fields.into_iter().map(|f| base.join(f)));
        }
        Ok(Self { languages })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Builds a manifest from a Universal Dependencies release directory:
    /// every `UD_<Language>-<Treebank>` folder contributes its `.conllu` files.
    pub fn from_ud_root(root: &Path) -> Result<Self> {
        let mut languages: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
        let mut dirs: Vec<PathBuf> =
            std::fs::read_dir(root)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_dir()).collect();
        dirs.sort();
        for dir in dirs {
            let name = dir.file_name().and_then(|s| s.to_str()).unwrap_or_default();
            let Some(rest) = name.strip_prefix("UD_") else { continue };
            let language = rest.split('-').next().unwrap_or(rest).to_string();
            let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "conllu"))
                .collect();
            files.sort();
            if !files.is_empty() {
                languages.entry(language).or_default().extend(files);
            }
        }
        Ok(Self { languages })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# deptopo manifest v1: language<TAB>path...\n");
        for (language, paths) in &self.languages {
            s.push_str(language);
            for p in paths {
                s.push('\t');
                s.push_str(&p.to_string_lossy());
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn token(id: &str, upos: &str, head: &str) -> String {
        format!("{id}\tw{id}\tw\t{upos}\t_\t_\t{head}\tdep\t_\t_")
    }

    fn parse_one(lines: &[String]) -> RawSentence {
        let text = format!("# text = x\n{}\n\n", lines.join("\n"));
        let mut s = parse_conllu(text.as_bytes()).unwrap();
        assert_eq!(s.len(), 1);
        s.pop().unwrap()
    }

    #[test]
    fn four_token_block() {
        let s = parse_one(&[
            token("1", "NOUN", "2"),
            token("2", "VERB", "0"),
            token("3", "DET", "4"),
            token("4", "NOUN", "2"),
        ]);
        assert_eq!(s.tokens.len(), 4);
        assert_eq!(s.tokens[1].head, Some(0));
        assert_eq!(s.line, 2);
    }

    #[test]
    fn range_and_empty_lines_are_flagged() {
        let s = parse_one(&[
            token("1", "NOUN", "2"),
            token("2", "VERB", "0"),
            "3-4\tdel\t_\t_\t_\t_\t_\t_\t_\t_".into(),
            token("3", "ADP", "4"),
            token("4", "DET", "2"),
            "4.1\tx\t_\tX\t_\t_\t_\t_\t2:dep\t_".into(),
        ]);
        assert_eq!(s.tokens.len(), 6);
        assert!(s.tokens[2].is_skipped() && s.tokens[5].is_skipped());
        let t = to_tree(&s, PunctPolicy::Reattach).unwrap();
        assert_eq!(t.n(), 4);
        assert_eq!(t.edges().collect::<Vec<_>>(), vec![(1, 0), (3, 2), (1, 3)]);
    }

    #[test]
    fn comment_only_block() {
        let text = "# sent_id = 1\n# text = nothing\n\n# another\n";
        assert!(parse_conllu(text.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = format!("{}\n1\tonly\tthree\n", token("1", "NOUN", "0"));
        match parse_conllu(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let bad_head = token("1", "NOUN", "x");
        assert!(matches!(parse_conllu(bad_head.as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn punct_leaf_is_removed() {
        let s = parse_one(&[
            token("1", "PRON", "2"),
            token("2", "VERB", "0"),
            token("3", "DET", "4"),
            token("4", "NOUN", "2"),
            token("5", "PUNCT", "2"),
        ]);
        let t = to_tree(&s, PunctPolicy::Reattach).unwrap();
        assert_eq!(t.n(), 4);
        assert_eq!(t.root(), 1);
    }

    #[test]
    fn punct_dependents_are_reattached() {
        // 4 hangs off the punctuation token 3, whose head is 2
        let s = parse_one(&[
            token("1", "PRON", "2"),
            token("2", "VERB", "0"),
            token("3", "PUNCT", "2"),
            token("4", "NOUN", "3"),
            token("5", "PUNCT", "3"),
            token("6", "ADJ", "5"),
        ]);
        let t = to_tree(&s, PunctPolicy::Reattach).unwrap();
        assert_eq!(t.n(), 4);
        assert_eq!(t.edges().collect::<Vec<_>>(), vec![(1, 0), (1, 2), (1, 3)]);
        assert_eq!(to_tree(&s, PunctPolicy::Discard), Err(Rejection::NotATree));
    }

    #[test]
    fn rejections() {
        let cyclic = parse_one(&[token("1", "NOUN", "2"), token("2", "VERB", "1"), token("3", "X", "0")]);
        assert_eq!(to_tree(&cyclic, PunctPolicy::Reattach), Err(Rejection::NotATree));
        let two_roots = parse_one(&[token("1", "NOUN", "0"), token("2", "VERB", "0")]);
        assert_eq!(to_tree(&two_roots, PunctPolicy::Reattach), Err(Rejection::MultipleRoots));
        let only_punct = parse_one(&[token("1", "PUNCT", "0")]);
        assert_eq!(to_tree(&only_punct, PunctPolicy::Reattach), Err(Rejection::Empty));
        let dangling = parse_one(&[token("1", "NOUN", "7"), token("2", "VERB", "0")]);
        assert_eq!(to_tree(&dangling, PunctPolicy::Reattach), Err(Rejection::NotATree));
    }

    fn sentences(sizes: impl IntoIterator<Item = usize>) -> Vec<SentenceTree> {
        sizes
            .into_iter()
            .enumerate()
            .map(|(i, n)| SentenceTree { tree: DirectedTree::path(n), language: "xx".into(), source_index: i })
            .collect()
    }

    #[test]
    fn too_few_sentences() {
        let r = filter_and_sample("xx", sentences(vec![5; 49]), 1, &CorpusFilter::default());
        assert_eq!(r.unwrap_err().eligible, 49);
    }

    #[test]
    fn size_bounds_apply_before_counting() {
        let mut sizes = vec![5; 49];
        sizes.extend([3, 51, 2]);
        assert!(filter_and_sample("xx", sentences(sizes.clone()), 1, &CorpusFilter::default()).is_err());
        sizes.push(50);
        let s = filter_and_sample("xx", sentences(sizes), 1, &CorpusFilter::default()).unwrap();
        assert_eq!(s.sentences.len(), 50);
        assert!(s.sentences.iter().all(|t| (4..=50).contains(&t.tree.n())));
    }

    #[test]
    fn cap_and_determinism() {
        let a = filter_and_sample("xx", sentences(vec![6; 2500]), 9, &CorpusFilter::default()).unwrap();
        assert_eq!(a.sentences.len(), 1000);
        let idx: Vec<usize> = a.sentences.iter().map(|s| s.source_index).collect();
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        let b = filter_and_sample("xx", sentences(vec![6; 2500]), 9, &CorpusFilter::default()).unwrap();
        assert_eq!(a, b);
        let c = filter_and_sample("xx", sentences(vec![6; 2500]), 10, &CorpusFilter::default()).unwrap();
        assert_ne!(a.sentences, c.sentences);
    }

    #[test]
    fn manifest_parsing() {
        let text = "# comment\nEnglish\ten/a.conllu\ten/b.conllu\nGerman de.conllu\nEnglish\t/abs/c.conllu\n";
        let m = Manifest::parse(text, Path::new("/data")).unwrap();
        assert_eq!(
            m.languages["English"],
            vec![
                PathBuf::from("/data/en/a.conllu"),
                PathBuf::from("/data/en/b.conllu"),
                PathBuf::from("/abs/c.conllu")
            ]
        );
        assert_eq!(m.languages["German"], vec![PathBuf::from("/data/de.conllu")]);
        assert!(Manifest::parse("English\n", Path::new(".")).is_err());
    }

    #[test]
    fn ud_root_scan() {
        let dir = tempfile::tempdir().unwrap();
        for (d, f) in
            [("UD_English-EWT", "a.conllu"), ("UD_English-GUM", "b.conllu"), ("UD_Old_French-SRCMF", "c.conllu")]
        {
            std::fs::create_dir_all(dir.path().join(d)).unwrap();
            std::fs::write(dir.path().join(d).join(f), "").unwrap();
            std::fs::write(dir.path().join(d).join("README.md"), "").unwrap();
        }
        let m = Manifest::from_ud_root(dir.path()).unwrap();
        assert_eq!(m.languages.len(), 2);
        assert_eq!(m.languages["English"].len(), 2);
        assert!(m.languages.contains_key("Old_French"));
        let again = Manifest::parse(&m.to_text(), Path::new("/")).unwrap();
        assert_eq!(again, m);
    }
}
