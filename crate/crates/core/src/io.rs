//! Delimited text formats shared by the pipeline stages.
//!
//! Every file starts with a `#` comment line naming its schema, followed by
//! a column header row. Numbers are written with 12 significant digits.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::DirectedTree;

/// Formats `x` with 12 significant digits, `%g` style.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Writes a schema comment, a header row and the given records.
pub fn write_table<W, I>(out: W, kind: &str, header: &[&str], records: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = Vec<String>>,
{
    let mut out = BufWriter::new(out);
    writeln!(out, "# deptopo {kind} v1: {}", header.join(","))?;
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(header)?;
    for record in records {
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_table<T, R>(input: R) -> Result<Vec<T>>
where
    T: for<'de> Deserialize<'de>,
    R: Read,
{
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn create(path: &Path) -> Result<File> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(File::create(path)?)
}

pub fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Per-tree measures as written by the pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureRow {
    pub language: String,
    pub sentence_index: usize,
    pub n: usize,
    pub h_ks: f64,
    pub h_deg: f64,
    #[serde(rename = "H_ks")]
    pub norm_h_ks: f64,
    #[serde(rename = "H_deg")]
    pub norm_h_deg: f64,
    pub alpha_hat: f64,
}

impl MeasureRow {
    pub const HEADER: [&'static str; 8] =
        ["language", "sentence_index", "n", "h_ks", "h_deg", "H_ks", "H_deg", "alpha_hat"];

    pub fn cost(&self) -> crate::measures::CostPair {
        crate::measures::CostPair::new(self.h_ks, self.h_deg)
    }

    pub fn normalized(&self) -> [f64; 2] {
        [self.norm_h_ks, self.norm_h_deg]
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.language.clone(),
            self.sentence_index.to_string(),
            self.n.to_string(),
            fmt_sig(self.h_ks),
            fmt_sig(self.h_deg),
            fmt_sig(self.norm_h_ks),
            fmt_sig(self.norm_h_deg),
            fmt_sig(self.alpha_hat),
        ]
    }
}

pub fn write_measures<W: Write>(out: W, rows: &[MeasureRow]) -> Result<()> {
    write_table(out, "measures", &MeasureRow::HEADER, rows.iter().map(MeasureRow::record))
}

pub fn read_measures<R: Read>(input: R) -> Result<Vec<MeasureRow>> {
    read_table(input)
}

/// A tree tagged with its language and the corpus sentence it stands for.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeRow {
    pub language: String,
    pub sentence_index: usize,
    pub tree: DirectedTree,
}

#[derive(Deserialize)]
struct RawTreeRow {
    language: String,
    sentence_index: usize,
    n: usize,
    edges: String,
}

/// Space-separated `parent>child` pairs.
pub fn format_edges(tree: &DirectedTree) -> String {
    tree.edges().map(|(p, c)| format!("{p}>{c}")).collect::<Vec<_>>().join(" ")
}

pub fn parse_edges(n: usize, text: &str) -> Result<DirectedTree> {
    let edges = text
        .split_whitespace()
        .map(|pair| {
            let (p, c) = pair.split_once('>').ok_or_else(|| Error::Format(format!("bad edge {pair:?}")))?;
            let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad edge {pair:?}")));
            Ok((parse(p)?, parse(c)?))
        })
        .collect::<Result<Vec<_>>>()?;
    DirectedTree::from_edges(n, edges)
}

pub fn write_trees<W: Write>(out: W, rows: &[TreeRow]) -> Result<()> {
    write_table(
        out,
        "trees",
        &["language", "sentence_index", "n", "edges"],
        rows.iter().map(|r| {
            vec![r.language.clone(), r.sentence_index.to_string(), r.tree.n().to_string(), format_edges(&r.tree)]
        }),
    )
}

pub fn read_trees<R: Read>(input: R) -> Result<Vec<TreeRow>> {
    read_table::<RawTreeRow, _>(input)?
        .into_iter()
        .map(|r| {
            Ok(TreeRow { tree: parse_edges(r.n, &r.edges)?, language: r.language, sentence_index: r.sentence_index })
        })
        .collect()
}
