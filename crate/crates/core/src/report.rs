//! Aggregation of reduction traces into per-example records, the
//! removed-fraction histogram and root-question categories, plus JSON, CSV
//! and SVG rendering.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::baseline;
use crate::reducer::{ReductionTrace, RootQuestion};
use crate::surrogate::SurrogateConfig;

pub const WH_WORDS: [&str; 9] = [
    "what", "which", "who", "whom", "whose", "when", "where", "why", "how",
];

pub const CAT_WH_ANY: &str = "wh-word + 0 or more words (any)";
pub const CAT_ONE_WORD: &str = "1 word (any)";
pub const CAT_ONE_NOUN: &str = "1 noun";
pub const CAT_WHO: &str = "who";
pub const CAT_WH_PLUS_ONE: &str = "wh-word + 1 word (any)";
pub const CAT_WHAT: &str = "what";
pub const CAT_SEVEN_PLUS: &str = "7 and more words";

/// Category rows in reporting order.
pub const CATEGORIES: [&str; 7] = [
    CAT_WH_ANY,
    CAT_ONE_WORD,
    CAT_ONE_NOUN,
    CAT_WHO,
    CAT_WH_PLUS_ONE,
    CAT_WHAT,
    CAT_SEVEN_PLUS,
];

pub const DEFAULT_BINS: usize = 10;

fn is_wh(word: &str) -> bool {
    WH_WORDS.contains(&word.to_lowercase().as_str())
}

fn is_noun_tag(tag: &str) -> bool {
    let t = tag.to_ascii_uppercase();
    t.starts_with("NN") || t == "NOUN" || t == "PROPN"
}

/// Multi-label categories of a root question. `pos_tags`, when given, holds
/// one tag per root word; without tags the noun row is never assigned.
pub fn categorize_root(root: &RootQuestion, pos_tags: Option<&[String]>) -> BTreeSet<&'static str> {
    let mut cats = BTreeSet::new();
    let Some(first) = root.words.first() else {
        return cats;
    };
    let n = root.word_count;
    if is_wh(first) {
        cats.insert(CAT_WH_ANY);
        if n == 2 {
            cats.insert(CAT_WH_PLUS_ONE);
        }
    }
    if n == 1 {
        cats.insert(CAT_ONE_WORD);
        match first.to_lowercase().as_str() {
            "who" => {
                cats.insert(CAT_WHO);
            }
            "what" => {
                cats.insert(CAT_WHAT);
            }
            _ => {}
        }
        if pos_tags
            .and_then(|t| t.first())
            .is_some_and(|t| is_noun_tag(t))
        {
            cats.insert(CAT_ONE_NOUN);
        }
    }
    if n >= 7 {
        cats.insert(CAT_SEVEN_PLUS);
    }
    cats
}

/// Where part-of-speech tags come from.
#[derive(Debug, Clone, PartialEq)]
pub enum PosTagger {
    /// Word → tag map loaded from a sidecar JSON file (case-insensitive keys).
    Sidecar(HashMap<String, String>),
    /// Crude fallback: a single non-wh, non-stopword word that does not end
    /// in "-ing"/"-ed" is a noun.
    Heuristic,
}

impl PosTagger {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let map: HashMap<String, String> =
            serde_json::from_str(&raw).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        Ok(PosTagger::Sidecar(
            map.into_iter()
                .map(|(k, v)| (k.to_lowercase(), v))
                .collect(),
        ))
    }

    pub fn source(&self) -> &'static str {
        match self {
            PosTagger::Sidecar(_) => "sidecar",
            PosTagger::Heuristic => {
                "heuristic (single non-wh, non-stopword, non -ing/-ed word = noun)"
            }
        }
    }

    pub fn tag(&self, words: &[String]) -> Vec<String> {
        match self {
            PosTagger::Sidecar(map) => words
                .iter()
                .map(|w| {
                    map.get(&w.to_lowercase())
                        .cloned()
                        .unwrap_or_else(|| "X".into())
                })
                .collect(),
            PosTagger::Heuristic => words
                .iter()
                .map(|w| {
                    let lw = w.to_lowercase();
                    let noun = words.len() == 1
                        && !is_wh(&lw)
                        && !baseline::is_stopword(&lw)
                        && !lw.ends_with("ing")
                        && !lw.ends_with("ed");
                    if noun { "NOUN" } else { "X" }.to_string()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramReport {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl HistogramReport {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Equal-width bins over [0, 1], half-open except the last.
pub fn build_histogram(percents: &[f64], n_bins: usize) -> Result<HistogramReport> {
    if n_bins == 0 {
        return Err(Error::Contract("histogram needs at least one bin".into()));
    }
    let bin_edges: Vec<f64> = (0..=n_bins).map(|i| i as f64 / n_bins as f64).collect();
    let mut counts = vec![0; n_bins];
    for &v in percents {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Contract(format!("value {v} outside [0, 1]")));
        }
        let bin = bin_edges[1..n_bins]
            .iter()
            .position(|&hi| v < hi)
            .unwrap_or(n_bins - 1);
        counts[bin] += 1;
    }
    Ok(HistogramReport { bin_edges, counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub name: String,
    pub count: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub categories: Vec<CategoryCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub id: String,
    pub question: String,
    pub root: String,
    pub root_words: Vec<String>,
    pub word_count: usize,
    pub n_original: usize,
    pub percent_removed: f64,
    pub matched_word_counts: Vec<usize>,
    pub categories: Vec<String>,
    pub words: Vec<String>,
    pub coefficients: Vec<f64>,
}

/// Everything needed to reproduce a report. Kept free of timestamps and
/// worker counts so reports are byte-identical across reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub tool_version: String,
    pub model: String,
    pub model_kind: String,
    pub dataset: Option<String>,
    pub surrogate: SurrogateConfig,
    pub recompute_coefficients: bool,
    pub limit: Option<usize>,
    pub n_bins: usize,
    pub pos_tags: String,
    pub examples_loaded: usize,
    pub examples_kept: usize,
    /// `(example id, reason)` for examples that were dropped or failed.
    pub skipped: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub metadata: ReportMetadata,
    pub per_example: Vec<ExampleRecord>,
    pub histogram: HistogramReport,
    pub categories: CategoryStats,
    /// Full trace, present for single-example reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<ReductionTrace>,
}

pub fn aggregate(
    traces: &[ReductionTrace],
    tagger: &PosTagger,
    metadata: ReportMetadata,
) -> Result<AnalysisReport> {
    let mut per_example = Vec::with_capacity(traces.len());
    let mut counts: HashMap<&'static str, usize> = HashMap::new();
    for trace in traces {
        let root = trace.root()?;
        let tags = tagger.tag(&root.words);
        let cats = categorize_root(&root, Some(&tags));
        for c in &cats {
            *counts.entry(c).or_default() += 1;
        }
        per_example.push(ExampleRecord {
            id: trace.example_id.clone(),
            question: trace.question.clone(),
            root: root.text(),
            root_words: root.words.clone(),
            word_count: root.word_count,
            n_original: root.n_original,
            percent_removed: root.percent_removed,
            matched_word_counts: trace.matched_word_counts(),
            // reporting order rather than alphabetical
            categories: CATEGORIES
                .iter()
                .filter(|c| cats.contains(*c))
                .map(|c| c.to_string())
                .collect(),
            words: trace.explanation.words.clone(),
            coefficients: trace.explanation.coefficients.clone(),
        });
    }
    let percents: Vec<f64> = per_example.iter().map(|r| r.percent_removed).collect();
    let histogram = build_histogram(&percents, metadata.n_bins)?;
    let total = traces.len();
    let categories = CategoryStats {
        categories: CATEGORIES
            .iter()
            .map(|&name| {
                let count = counts.get(name).copied().unwrap_or(0);
                CategoryCount {
                    name: name.to_string(),
                    count,
                    fraction: if total == 0 {
                        0.0
                    } else {
                        count as f64 / total as f64
                    },
                }
            })
            .collect(),
    };
    Ok(AnalysisReport {
        metadata,
        per_example,
        histogram,
        categories,
        trace: (traces.len() == 1).then(|| traces[0].clone()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Svg,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "svg" => Ok(Format::Svg),
            other => Err(Error::Config(format!("unknown format {other:?}"))),
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<PathBuf> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

/// Writes the report in one format under `out_dir`; returns the files written.
pub fn emit(report: &AnalysisReport, format: Format, out_dir: &Path) -> Result<Vec<PathBuf>> {
    match format {
        Format::Json => {
            let mut body = serde_json::to_vec_pretty(report)?;
            body.push(b'\n');
            Ok(vec![write_file(&out_dir.join("report.json"), &body)?])
        }
        Format::Csv => Ok(vec![
            write_file(&out_dir.join("report.csv"), &examples_csv(report)?)?,
            write_file(&out_dir.join("categories.csv"), &categories_csv(report)?)?,
        ]),
        Format::Svg => {
            let mut written = vec![write_file(
                &out_dir.join("histogram.svg"),
                histogram_svg(&report.histogram).as_bytes(),
            )?];
            if let [only] = report.per_example.as_slice() {
                written.push(write_file(
                    &out_dir.join("coefficients.svg"),
                    coefficients_svg(&only.words, &only.coefficients).as_bytes(),
                )?);
            }
            Ok(written)
        }
    }
}

fn examples_csv(report: &AnalysisReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "root", "word_count", "percent_removed", "categories"])?;
    for r in &report.per_example {
        w.write_record([
            r.id.as_str(),
            r.root.as_str(),
            &r.word_count.to_string(),
            &r.percent_removed.to_string(),
            &r.categories.join(";"),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Config(e.to_string()))
}

fn categories_csv(report: &AnalysisReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["category", "count", "fraction"])?;
    for c in &report.categories.categories {
        w.write_record([
            c.name.as_str(),
            &c.count.to_string(),
            &c.fraction.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Config(e.to_string()))
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Bar chart of the removed-fraction histogram.
pub fn histogram_svg(h: &HistogramReport) -> String {
    let (w, ht, pad) = (640.0, 360.0, 50.0);
    let n = h.counts.len().max(1);
    let max = h.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let bar_w = (w - 2.0 * pad) / n as f64;
    let plot_h = ht - 2.0 * pad;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{ht}" viewBox="0 0 {w} {ht}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{ht}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="13">Fraction of question words removed (root question)</text>"#,
        w / 2.0
    );
    for (i, &c) in h.counts.iter().enumerate() {
        let bh = plot_h * c as f64 / max;
        let x = pad + i as f64 * bar_w;
        let y = ht - pad - bh;
        let _ = writeln!(
            s,
            r##"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{bh:.2}" fill="#4a78b5" stroke="white"/>"##,
            bar_w
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{c}</text>"#,
            x + bar_w / 2.0,
            y - 4.0
        );
    }
    for (i, e) in h.bin_edges.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{e:.1}</text>"#,
            pad + i as f64 * bar_w,
            ht - pad + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{pad}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#,
        ht - pad,
        w - pad
    );
    s.push_str("</svg>\n");
    s
}

/// Horizontal bar chart of per-word surrogate coefficients.
pub fn coefficients_svg(words: &[String], coefficients: &[f64]) -> String {
    let row = 22.0;
    let (w, pad, label_w) = (640.0, 30.0, 140.0);
    let ht = 2.0 * pad + row * words.len() as f64 + 20.0;
    let max = coefficients
        .iter()
        .fold(0.0f64, |m, c| m.max(c.abs()))
        .max(1e-12);
    let half = (w - label_w - 2.0 * pad) / 2.0;
    let zero_x = label_w + pad + half;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{ht}" viewBox="0 0 {w} {ht}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{ht}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="13">Surrogate coefficient per question word</text>"#,
        w / 2.0
    );
    for (i, (word, &c)) in words.iter().zip(coefficients).enumerate() {
        let y = pad + 10.0 + i as f64 * row;
        let len = half * c.abs() / max;
        let x = if c >= 0.0 { zero_x } else { zero_x - len };
        let fill = if c >= 0.0 { "#3a9b5c" } else { "#c0504d" };
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            label_w,
            y + 14.0,
            escape_xml(word)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{x:.2}" y="{:.2}" width="{len:.2}" height="{:.2}" fill="{fill}"/>"#,
            y + 3.0,
            row - 6.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" fill="gray">{c:.4}</text>"#,
            w - pad - 40.0,
            y + 14.0
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{zero_x:.2}" y1="{pad}" x2="{zero_x:.2}" y2="{:.2}" stroke="black"/>"#,
        ht - pad
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn root(words: &[&str], n_original: usize) -> RootQuestion {
        RootQuestion {
            words: words.iter().map(|w| w.to_string()).collect(),
            word_count: words.len(),
            n_original,
            percent_removed: (n_original - words.len()) as f64 / n_original as f64,
        }
    }

    fn set(items: &[&'static str]) -> BTreeSet<&'static str> {
        items.iter().copied().collect()
    }

    #[test]
    fn categorize_examples() {
        let noun = vec!["NN".to_string()];
        assert_eq!(
            categorize_root(&root(&["type"], 10), Some(&noun)),
            set(&[CAT_ONE_WORD, CAT_ONE_NOUN])
        );
        let who = categorize_root(&root(&["who"], 6), None);
        assert_eq!(who, set(&[CAT_WH_ANY, CAT_ONE_WORD, CAT_WHO]));
        assert_eq!(who.len(), 3);
        assert_eq!(
            categorize_root(&root(&["what", "did", "Luther", "remove"], 9), None),
            set(&[CAT_WH_ANY])
        );
    }

    #[test]
    fn categorize_edges() {
        assert_eq!(
            categorize_root(&root(&["type"], 10), None),
            set(&[CAT_ONE_WORD])
        );
        assert_eq!(
            categorize_root(&root(&["When", "born"], 5), None),
            set(&[CAT_WH_ANY, CAT_WH_PLUS_ONE])
        );
        assert_eq!(
            categorize_root(&root(&["a", "b", "c", "d", "e", "f", "g"], 9), None),
            set(&[CAT_SEVEN_PLUS])
        );
        assert_eq!(
            categorize_root(&root(&["WHAT"], 3), None),
            set(&[CAT_WH_ANY, CAT_ONE_WORD, CAT_WHAT])
        );
    }

    #[test]
    fn heuristic_tagger() {
        let t = PosTagger::Heuristic;
        let tag = |w: &str| t.tag(&[w.to_string()])[0].clone();
        assert_eq!(tag("type"), "NOUN");
        assert_eq!(tag("who"), "X");
        assert_eq!(tag("running"), "X");
        assert_eq!(tag("founded"), "X");
        assert_eq!(tag("the"), "X");
        assert_eq!(t.tag(&["rock".into(), "type".into()]), vec!["X", "X"]);
    }

    #[test]
    fn sidecar_tagger() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tags.json");
        std::fs::write(&p, r#"{"Type": "NN", "found": "VBN"}"#).unwrap();
        let t = PosTagger::load(&p).unwrap();
        assert_eq!(
            t.tag(&["TYPE".into(), "found".into(), "zzz".into()]),
            vec!["NN", "VBN", "X"]
        );
        assert_eq!(t.source(), "sidecar");
    }

    #[test]
    fn histogram_examples() {
        let h = build_histogram(&[0.9, 0.5, 0.9], 10).unwrap();
        let mut expected = vec![0; 10];
        expected[9] = 2;
        expected[5] = 1;
        assert_eq!(h.counts, expected);
        assert_eq!(h.bin_edges.len(), 11);
        assert_eq!(build_histogram(&[], 10).unwrap().counts, vec![0; 10]);
        assert_eq!(
            build_histogram(&[1.0, 1.0], 4).unwrap().counts,
            vec![0, 0, 0, 2]
        );
        assert_eq!(
            build_histogram(&[0.0, 0.25], 4).unwrap().counts,
            vec![1, 1, 0, 0]
        );
        assert!(build_histogram(&[1.01], 4).is_err());
        assert!(build_histogram(&[-0.1], 4).is_err());
        assert!(build_histogram(&[0.5], 0).is_err());
    }

    #[test]
    fn exact_fractions_land_in_their_own_bin() {
        // (n - k) / n on a boundary belongs to the upper bin
        for n in 1..=20usize {
            for k in 1..=n {
                let v = (n - k) as f64 / n as f64;
                let h = build_histogram(&[v], 10).unwrap();
                let bin = h.counts.iter().position(|&c| c == 1).unwrap();
                let lo = h.bin_edges[bin];
                let hi = h.bin_edges[bin + 1];
                assert!(
                    lo <= v && (v < hi || (bin == 9 && v <= hi)),
                    "{v} in bin {bin}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn histogram_total_matches_input(values in proptest::collection::vec(0.0f64..=1.0, 0..200), bins in 1usize..30) {
            let h = build_histogram(&values, bins).unwrap();
            prop_assert_eq!(h.total(), values.len());
            prop_assert_eq!(h.counts.len(), bins);
        }

        #[test]
        fn categories_ignore_case(words in proptest::collection::vec("(who|what|when|[a-z]{1,6})", 1..9)) {
            let lower: Vec<&str> = words.iter().map(String::as_str).collect();
            let upper: Vec<String> = words.iter().map(|w| w.to_uppercase()).collect();
            let upper: Vec<&str> = upper.iter().map(String::as_str).collect();
            let tags: Vec<String> = vec!["NN".into(); words.len()];
            prop_assert_eq!(
                categorize_root(&root(&lower, 10), Some(&tags)),
                categorize_root(&root(&upper, 10), Some(&tags))
            );
        }
    }
}
