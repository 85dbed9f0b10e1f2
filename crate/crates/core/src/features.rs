//! Outcome classes, moderator variables and the moderated design matrix.
//!
//! Attractiveness is the six-month visit count binned into five quintile
//! classes. Moderators are blogger characteristics (experience, profession
//! dummies) and managerial actions (posting volume, audience communication)
//! interacted with the four centrality measures.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::centrality::CentralityBundle;
use crate::graph::BlogId;

/// Expected header of an attributes CSV.
pub const ATTRIBUTES_HEADER: &str =
    "blog_id,visits_6mo,experience_years,profession,posts_7d,replied_to_readers";

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("malformed row at line {0}")]
    MalformedRow(u64),
    #[error("unknown profession {0:?} at line {1}")]
    UnknownProfession(String, u64),
    #[error("duplicate blog id {0:?} at line {1}")]
    DuplicateBlogId(String, u64),
    #[error("missing column {0:?} in attributes header")]
    MissingColumn(&'static str),
    #[error("need at least 5 blogs to form quintile classes, got {0}")]
    TooFewObservations(usize),
    #[error("blog {0:?} is missing from the attribute records")]
    MissingBlog(String),
    #[error("unknown term {0:?}")]
    UnknownTerm(String),
    #[error("duplicate term {0:?} in term list")]
    DuplicateTerm(String),
    #[error("column {0:?} is constant zero; the coefficient would be unidentified")]
    ConstantZeroColumn(String),
    #[error("i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),
}

/// Declared predominant profession of a blogger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profession {
    Teacher,
    Economist,
    BusinessmanCeo,
    Journalist,
    ConsultantInvestor,
    Other,
}

impl Profession {
    pub const ALL: [Profession; 6] = [
        Profession::Teacher,
        Profession::Economist,
        Profession::BusinessmanCeo,
        Profession::Journalist,
        Profession::ConsultantInvestor,
        Profession::Other,
    ];

    /// Canonical token used in CSV files.
    pub fn token(self) -> &'static str {
        match self {
            Profession::Teacher => "teacher",
            Profession::Economist => "economist",
            Profession::BusinessmanCeo => "businessman_ceo",
            Profession::Journalist => "journalist",
            Profession::ConsultantInvestor => "consultant_investor",
            Profession::Other => "other",
        }
    }

    /// Case-insensitive parse; `/` is accepted in place of `_`.
    pub fn parse(raw: &str) -> Option<Profession> {
        let norm = raw.trim().to_ascii_lowercase().replace('/', "_");
        Profession::ALL.iter().copied().find(|p| p.token() == norm)
    }
}

impl fmt::Display for Profession {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Per-blog covariates read from the attributes CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlogAttributes {
    pub blog_id: BlogId,
    /// Visits attracted over six months; the attractiveness proxy.
    pub visits_6mo: u64,
    /// Years of work experience (TE).
    pub experience_years: f64,
    pub profession: Profession,
    /// Publications during a seven-day window (CP).
    pub posts_7d: u32,
    /// Whether at least one reply was sent to readers (CA).
    pub replied_to_readers: bool,
}

/// Five-way attractiveness quintile. `VeryLow` is the model baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttractivenessClass {
    VeryLow = 0,
    Low = 1,
    Average = 2,
    ModeratelyHigh = 3,
    High = 4,
}

impl AttractivenessClass {
    pub const ALL: [AttractivenessClass; 5] = [
        AttractivenessClass::VeryLow,
        AttractivenessClass::Low,
        AttractivenessClass::Average,
        AttractivenessClass::ModeratelyHigh,
        AttractivenessClass::High,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(ix: usize) -> Option<AttractivenessClass> {
        Self::ALL.get(ix).copied()
    }

    pub fn token(self) -> &'static str {
        match self {
            AttractivenessClass::VeryLow => "very_low",
            AttractivenessClass::Low => "low",
            AttractivenessClass::Average => "average",
            AttractivenessClass::ModeratelyHigh => "moderately_high",
            AttractivenessClass::High => "high",
        }
    }
}

impl fmt::Display for AttractivenessClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// A centrality entering the model as a main effect or interaction parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentralityKind {
    /// In-degree (CE).
    InDegree,
    /// Closeness (CC).
    Closeness,
    /// Betweenness (CI).
    Betweenness,
    /// PageRank on the 0–10 scale (PR).
    PageRank,
}

impl CentralityKind {
    pub const ALL: [CentralityKind; 4] = [
        CentralityKind::InDegree,
        CentralityKind::Closeness,
        CentralityKind::Betweenness,
        CentralityKind::PageRank,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CentralityKind::InDegree => "CE",
            CentralityKind::Closeness => "CC",
            CentralityKind::Betweenness => "CI",
            CentralityKind::PageRank => "PR",
        }
    }
}

/// A blogger characteristic or managerial action moderating a centrality.
///
/// `Ap1`/`Ap2`/`Ap3` are the profession dummies entering the standard term
/// list: teacher, economist and consultant/investor respectively.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Moderator {
    /// Years of experience (TE).
    Experience,
    /// Teacher dummy (AP1).
    Ap1,
    /// Economist dummy (AP2).
    Ap2,
    /// Consultant/investor dummy (AP3).
    Ap3,
    /// Posts in the seven-day window (CP).
    ContentPublication,
    /// Replied-to-readers flag (CA).
    AudienceCommunication,
}

impl Moderator {
    pub const ALL: [Moderator; 6] = [
        Moderator::Experience,
        Moderator::Ap1,
        Moderator::Ap2,
        Moderator::Ap3,
        Moderator::ContentPublication,
        Moderator::AudienceCommunication,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Moderator::Experience => "TE",
            Moderator::Ap1 => "AP1",
            Moderator::Ap2 => "AP2",
            Moderator::Ap3 => "AP3",
            Moderator::ContentPublication => "CP",
            Moderator::AudienceCommunication => "CA",
        }
    }

    /// Numeric value of the moderator for one blog.
    pub fn value(self, attrs: &BlogAttributes) -> f64 {
        match self {
            Moderator::Experience => attrs.experience_years,
            Moderator::Ap1 => encode_profession(attrs)[0] as f64,
            Moderator::Ap2 => encode_profession(attrs)[1] as f64,
            Moderator::Ap3 => encode_profession(attrs)[4] as f64,
            Moderator::ContentPublication => attrs.posts_7d as f64,
            Moderator::AudienceCommunication => {
                if attrs.replied_to_readers {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// One design-matrix column: the intercept, a main effect or an interaction.
/// Serialises as its label (`"CE"`, `"TE_x_PR"`, …).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Term {
    Intercept,
    Centrality(CentralityKind),
    Moderator(Moderator),
    Interaction(Moderator, CentralityKind),
}

impl Serialize for Term {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for Term {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Term, D::Error> {
        let label = String::deserialize(deserializer)?;
        label.parse().map_err(serde::de::Error::custom)
    }
}

impl Term {
    pub fn label(self) -> String {
        match self {
            Term::Intercept => "Intercept".to_owned(),
            Term::Centrality(c) => c.label().to_owned(),
            Term::Moderator(m) => m.label().to_owned(),
            Term::Interaction(m, c) => format!("{}_x_{}", m.label(), c.label()),
        }
    }

    /// The standard 29-term list: intercept, the four centrality main
    /// effects, then each of the six moderators crossed with each
    /// centrality. Moderator main effects are deliberately absent; add them
    /// through an explicit term list if needed.
    pub fn table2_terms() -> Vec<Term> {
        let mut terms = vec![Term::Intercept];
        terms.extend(CentralityKind::ALL.map(Term::Centrality));
        for m in Moderator::ALL {
            for c in CentralityKind::ALL {
                terms.push(Term::Interaction(m, c));
            }
        }
        terms
    }

    /// Parses a term list: the preset name `table2` or a comma-separated
    /// list of tokens (`intercept`, `ce`, `cc`, `ci`, `pr`, `te`, `ap1`…
    /// `ca`, and interactions like `te_x_ce`). The intercept is prepended
    /// when absent; it is always the first column.
    pub fn parse_list(spec: &str) -> Result<Vec<Term>, FeatureError> {
        if spec.trim().eq_ignore_ascii_case("table2") {
            return Ok(Term::table2_terms());
        }
        let mut terms = Vec::new();
        for token in spec.split(',') {
            let token = token.trim();
            if token.is_empty() {
                continue;
            }
            terms.push(token.parse::<Term>()?);
        }
        if !terms.contains(&Term::Intercept) {
            terms.insert(0, Term::Intercept);
        }
        Ok(terms)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Term {
    type Err = FeatureError;

    fn from_str(raw: &str) -> Result<Term, FeatureError> {
        fn centrality(tok: &str) -> Option<CentralityKind> {
            CentralityKind::ALL
                .iter()
                .copied()
                .find(|c| c.label().eq_ignore_ascii_case(tok))
        }
        fn moderator(tok: &str) -> Option<Moderator> {
            Moderator::ALL
                .iter()
                .copied()
                .find(|m| m.label().eq_ignore_ascii_case(tok))
        }

        let tok = raw.trim();
        if tok.eq_ignore_ascii_case("intercept") {
            return Ok(Term::Intercept);
        }
        let lower = tok.to_ascii_lowercase();
        if let Some((m, c)) = lower.split_once("_x_") {
            match (moderator(m), centrality(c)) {
                (Some(m), Some(c)) => return Ok(Term::Interaction(m, c)),
                _ => return Err(FeatureError::UnknownTerm(raw.to_owned())),
            }
        }
        if let Some(c) = centrality(tok) {
            return Ok(Term::Centrality(c));
        }
        if let Some(m) = moderator(tok) {
            return Ok(Term::Moderator(m));
        }
        Err(FeatureError::UnknownTerm(raw.to_owned()))
    }
}

/// Row-major regression design: one row per blog in network order.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    blog_ids: Vec<BlogId>,
    terms: Vec<Term>,
    /// `rows × terms`, row-major.
    x: Vec<f64>,
    y: Vec<AttractivenessClass>,
}

impl DesignMatrix {
    pub fn n_rows(&self) -> usize {
        self.blog_ids.len()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn blog_ids(&self) -> &[BlogId] {
        &self.blog_ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_terms();
        &self.x[i * p..(i + 1) * p]
    }

    pub fn outcome(&self) -> &[AttractivenessClass] {
        &self.y
    }

    /// Assembles a matrix directly from parts; rows must match `terms` in
    /// length and the first term must be the intercept.
    pub fn from_parts(
        blog_ids: Vec<BlogId>,
        terms: Vec<Term>,
        x: Vec<f64>,
        y: Vec<AttractivenessClass>,
    ) -> DesignMatrix {
        assert_eq!(x.len(), blog_ids.len() * terms.len());
        assert_eq!(y.len(), blog_ids.len());
        assert_eq!(terms.first(), Some(&Term::Intercept));
        DesignMatrix { blog_ids, terms, x, y }
    }

    /// Z-scores every non-intercept column in place. Columns with zero
    /// spread are left untouched. Off by default in the pipeline because
    /// relative-risk ratios are read per raw unit.
    pub fn zscore(&mut self) {
        let n = self.n_rows();
        let p = self.n_terms();
        if n == 0 {
            return;
        }
        for col in 1..p {
            let mean = (0..n).map(|i| self.x[i * p + col]).sum::<f64>() / n as f64;
            let var = (0..n)
                .map(|i| {
                    let d = self.x[i * p + col] - mean;
                    d * d
                })
                .sum::<f64>()
                / n as f64;
            let sd = var.sqrt();
            if sd > 0.0 {
                for i in 0..n {
                    self.x[i * p + col] = (self.x[i * p + col] - mean) / sd;
                }
            }
        }
    }

    /// Writes the matrix as CSV with a term-descriptor header row, plus the
    /// blog id and outcome class.
    pub fn write_csv(&self, mut out: impl Write) -> Result<(), FeatureError> {
        let header: Vec<String> = std::iter::once("blog_id".to_owned())
            .chain(self.terms.iter().map(|t| t.label()))
            .chain(std::iter::once("class".to_owned()))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.n_rows() {
            let mut fields = vec![self.blog_ids[i].to_string()];
            fields.extend(self.row(i).iter().map(|v| v.to_string()));
            fields.push(self.y[i].to_string());
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

/// Loads the attributes CSV. Columns are located by name in the header, so
/// column order is free; all six are required. Booleans are `0`/`1` and
/// professions match case-insensitively.
pub fn load_attributes(
    path: impl AsRef<Path>,
) -> Result<Vec<BlogAttributes>, FeatureError> {
    let mut text = String::new();
    BufReader::new(File::open(path)?).read_to_string(&mut text)?;
    parse_attributes(&text)
}

/// Parses attributes CSV text. See [`load_attributes`].
pub fn parse_attributes(text: &str) -> Result<Vec<BlogAttributes>, FeatureError> {
    const COLUMNS: [&str; 6] = [
        "blog_id",
        "visits_6mo",
        "experience_years",
        "profession",
        "posts_7d",
        "replied_to_readers",
    ];

    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(FeatureError::MalformedRow(1))?;
    let names: Vec<&str> = header.trim_end_matches('\r').split(',').map(str::trim).collect();
    let mut col = [0usize; 6];
    for (slot, want) in COLUMNS.iter().enumerate() {
        col[slot] = names
            .iter()
            .position(|n| n == want)
            .ok_or(FeatureError::MissingColumn(COLUMNS[slot]))?;
    }

    let mut records = Vec::new();
    let mut seen: HashMap<String, ()> = HashMap::new();
    for (ix, raw_line) in lines {
        let line_no = ix as u64 + 1;
        let line = raw_line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != names.len() {
            return Err(FeatureError::MalformedRow(line_no));
        }
        let field = |slot: usize| fields[col[slot]];

        let blog_id =
            BlogId::new(field(0)).map_err(|_| FeatureError::MalformedRow(line_no))?;
        if seen.insert(blog_id.as_str().to_owned(), ()).is_some() {
            return Err(FeatureError::DuplicateBlogId(blog_id.to_string(), line_no));
        }
        let visits_6mo: u64 =
            field(1).parse().map_err(|_| FeatureError::MalformedRow(line_no))?;
        let experience_years: f64 =
            field(2).parse().map_err(|_| FeatureError::MalformedRow(line_no))?;
        if !experience_years.is_finite() || experience_years < 0.0 {
            return Err(FeatureError::MalformedRow(line_no));
        }
        let profession = Profession::parse(field(3))
            .ok_or_else(|| FeatureError::UnknownProfession(field(3).to_owned(), line_no))?;
        let posts_7d: u32 =
            field(4).parse().map_err(|_| FeatureError::MalformedRow(line_no))?;
        let replied_to_readers = match field(5) {
            "0" => false,
            "1" => true,
            _ => return Err(FeatureError::MalformedRow(line_no)),
        };
        records.push(BlogAttributes {
            blog_id,
            visits_6mo,
            experience_years,
            profession,
            posts_7d,
            replied_to_readers,
        });
    }
    Ok(records)
}

/// Writes attribute records in the attributes CSV format.
pub fn write_attributes(
    records: &[BlogAttributes],
    mut out: impl Write,
) -> Result<(), FeatureError> {
    writeln!(out, "{ATTRIBUTES_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.blog_id,
            r.visits_6mo,
            r.experience_years,
            r.profession,
            r.posts_7d,
            u8::from(r.replied_to_readers),
        )?;
    }
    Ok(())
}

/// One-hot profession encoding in the order teacher, economist,
/// businessman/CEO, journalist, consultant/investor, other.
pub fn encode_profession(attrs: &BlogAttributes) -> [u8; 6] {
    let mut out = [0u8; 6];
    let slot = Profession::ALL
        .iter()
        .position(|&p| p == attrs.profession)
        .expect("profession is one of the six categories");
    out[slot] = 1;
    out
}

/// Bins visit counts into the five quintile classes.
///
/// Blogs are sorted ascending by `(visits, blog_id)` — the id breaks ties
/// deterministically — and rank `r` of `N` maps to class `⌊5r/N⌋`, so class
/// sizes differ by at most one. Output order mirrors input order.
pub fn classify_attractiveness(
    visits: &[(BlogId, u64)],
) -> Result<Vec<(BlogId, AttractivenessClass)>, FeatureError> {
    let n = visits.len();
    if n < 5 {
        return Err(FeatureError::TooFewObservations(n));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        visits[a]
            .1
            .cmp(&visits[b].1)
            .then_with(|| visits[a].0.cmp(&visits[b].0))
    });
    let mut classes = vec![AttractivenessClass::VeryLow; n];
    for (rank, &ix) in order.iter().enumerate() {
        let class_ix = rank * 5 / n;
        classes[ix] = AttractivenessClass::from_index(class_ix).expect("rank*5/n < 5");
    }
    Ok(visits
        .iter()
        .zip(classes)
        .map(|((id, _), class)| (id.clone(), class))
        .collect())
}

/// Quota of each class under the quintile rule, in class order. Class `k`
/// receives `⌈(k+1)N/5⌉ − ⌈kN/5⌉` members.
pub fn quintile_quotas(n: usize) -> [usize; 5] {
    let cut = |k: usize| (k * n).div_ceil(5);
    let mut quotas = [0usize; 5];
    for (k, q) in quotas.iter_mut().enumerate() {
        *q = cut(k + 1) - cut(k);
    }
    quotas
}

/// Regressor value of one term for the blog at network position `ix`.
/// PageRank terms use the 0–10 scaled score.
pub fn term_value(
    term: Term,
    centralities: &CentralityBundle,
    ix: usize,
    attrs: &BlogAttributes,
) -> f64 {
    let centrality = |kind: CentralityKind| -> f64 {
        match kind {
            CentralityKind::InDegree => centralities.in_degree.values()[ix],
            CentralityKind::Closeness => centralities.closeness.values()[ix],
            CentralityKind::Betweenness => centralities.betweenness.values()[ix],
            CentralityKind::PageRank => centralities.pagerank_scaled.values()[ix],
        }
    };
    match term {
        Term::Intercept => 1.0,
        Term::Centrality(kind) => centrality(kind),
        Term::Moderator(m) => m.value(attrs),
        Term::Interaction(m, kind) => m.value(attrs) * centrality(kind),
    }
}

/// Builds the design matrix for every blog in the centrality bundle's
/// network, in network order.
///
/// Every network blog must appear in `attrs`; interaction columns are
/// elementwise products of the moderator and centrality values. The outcome
/// is the attractiveness quintile of `visits_6mo`. Columns that come out
/// constant zero are rejected because their coefficients would be
/// unidentified.
pub fn build_design_matrix(
    centralities: &CentralityBundle,
    attrs: &[BlogAttributes],
    terms: &[Term],
) -> Result<DesignMatrix, FeatureError> {
    let mut terms = terms.to_vec();
    if !terms.contains(&Term::Intercept) {
        terms.insert(0, Term::Intercept);
    }
    let mut seen = std::collections::HashSet::new();
    for t in &terms {
        if !seen.insert(*t) {
            return Err(FeatureError::DuplicateTerm(t.label()));
        }
    }
    // The intercept leads; remaining terms keep their given order.
    terms.retain(|t| *t != Term::Intercept);
    terms.insert(0, Term::Intercept);

    let by_id: HashMap<&BlogId, &BlogAttributes> =
        attrs.iter().map(|a| (&a.blog_id, a)).collect();

    let ids = centralities.ids().to_vec();
    let n = ids.len();
    let p = terms.len();

    let mut rows: Vec<&BlogAttributes> = Vec::with_capacity(n);
    for id in &ids {
        rows.push(
            by_id
                .get(id)
                .copied()
                .ok_or_else(|| FeatureError::MissingBlog(id.to_string()))?,
        );
    }

    let mut x = vec![0.0f64; n * p];
    for (i, attrs_i) in rows.iter().enumerate() {
        for (j, term) in terms.iter().enumerate() {
            x[i * p + j] = term_value(*term, centralities, i, attrs_i);
        }
    }

    for (j, term) in terms.iter().enumerate() {
        if (0..n).all(|i| x[i * p + j] == 0.0) {
            return Err(FeatureError::ConstantZeroColumn(term.label()));
        }
    }

    let visits: Vec<(BlogId, u64)> = rows
        .iter()
        .map(|a| (a.blog_id.clone(), a.visits_6mo))
        .collect();
    let y = classify_attractiveness(&visits)?
        .into_iter()
        .map(|(_, class)| class)
        .collect();

    Ok(DesignMatrix { blog_ids: ids, terms, x, y })
}
