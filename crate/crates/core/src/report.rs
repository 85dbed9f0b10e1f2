//! Inference-table rendering and machine-readable exports.
//!
//! The plain-text table has one row per term and one (β, RRR) cell per
//! non-baseline category, significance stars appended to β. Rounding
//! happens only at print time; JSON and CSV exports carry full-precision
//! values, always with point decimals.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{AttractivenessClass, Term};
use crate::mnlogit::{InferenceRow, ModelFit, Stars};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("inference rows do not cover every (term, category) pair exactly once: {0}")]
    IncompleteRows(String),
    #[error("i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),
    #[error("malformed fit file: {0}")]
    MalformedFit(String),
}

/// Decimal separator for the plain-text table. CSV and JSON always use
/// points so they stay machine-parseable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Locale {
    #[default]
    Point,
    Comma,
}

/// One rendered cell: β with stars, and the relative-risk ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub category: AttractivenessClass,
    pub beta: f64,
    pub rrr: f64,
    pub stars: Stars,
}

/// One table row: a term and its per-category cells in category order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub term: Term,
    pub cells: Vec<ReportCell>,
}

/// Table-shaped view of the inference rows, term order preserved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub baseline: AttractivenessClass,
    pub categories: Vec<AttractivenessClass>,
    pub rows: Vec<ReportRow>,
    pub footnote: String,
}

fn format_number(value: f64, decimals: usize, locale: Locale) -> String {
    let text = format!("{value:.decimals$}");
    match locale {
        Locale::Point => text,
        Locale::Comma => text.replace('.', ","),
    }
}

/// Formats one cell the way the table prints it: β to two decimals with
/// stars in parentheses (omitted when starless), then RRR to two decimals.
pub fn format_cell(cell: &ReportCell, locale: Locale) -> String {
    let beta = format_number(cell.beta, 2, locale);
    let rrr = format_number(cell.rrr, 2, locale);
    match cell.stars {
        Stars::None => format!("{beta} {rrr}"),
        s => format!("{beta}({}) {rrr}", s.as_str()),
    }
}

/// Folds term-major inference rows into a [`ReportTable`].
///
/// `terms` fixes the row order; every (term, non-baseline category) pair
/// must appear exactly once.
pub fn build_table(
    fit: &ModelFit,
    rows: &[InferenceRow],
) -> Result<ReportTable, ReportError> {
    let free = fit.free_categories();
    let mut table_rows: Vec<ReportRow> = fit
        .terms
        .iter()
        .map(|&term| ReportRow { term, cells: Vec::with_capacity(free.len()) })
        .collect();

    for row in rows {
        let t_ix = fit
            .terms
            .iter()
            .position(|&t| t == row.term)
            .ok_or_else(|| ReportError::IncompleteRows(format!("unexpected term {}", row.term)))?;
        if !free.contains(&row.category) {
            return Err(ReportError::IncompleteRows(format!(
                "unexpected category {}",
                row.category
            )));
        }
        if table_rows[t_ix].cells.iter().any(|c| c.category == row.category) {
            return Err(ReportError::IncompleteRows(format!(
                "duplicate cell {} × {}",
                row.term, row.category
            )));
        }
        table_rows[t_ix].cells.push(ReportCell {
            category: row.category,
            beta: row.beta,
            rrr: row.rrr,
            stars: row.stars,
        });
    }

    for row in &mut table_rows {
        if row.cells.len() != free.len() {
            return Err(ReportError::IncompleteRows(format!(
                "term {} has {} of {} cells",
                row.term,
                row.cells.len(),
                free.len()
            )));
        }
        row.cells.sort_by_key(|c| c.category.index());
    }

    Ok(ReportTable {
        baseline: fit.baseline,
        categories: free,
        rows: table_rows,
        footnote: "***p<0.001, **p<0.01, *p<0.05".to_owned(),
    })
}

/// Renders the table as fixed-width plain text.
pub fn render_table(table: &ReportTable, locale: Locale) -> String {
    let header_of = |c: AttractivenessClass| match c {
        AttractivenessClass::VeryLow => "Very low",
        AttractivenessClass::Low => "Low",
        AttractivenessClass::Average => "Average",
        AttractivenessClass::ModeratelyHigh => "Mod. high",
        AttractivenessClass::High => "High",
    };

    let mut cells: Vec<Vec<String>> = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        cells.push(row.cells.iter().map(|c| format_cell(c, locale)).collect());
    }

    let term_width = table
        .rows
        .iter()
        .map(|r| r.term.label().len())
        .chain(std::iter::once("term".len()))
        .max()
        .unwrap_or(4);
    let mut col_widths: Vec<usize> = table
        .categories
        .iter()
        .map(|&c| header_of(c).len())
        .collect();
    for row in &cells {
        for (w, cell) in col_widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }

    let mut out = String::new();
    let _ = write!(out, "{:<term_width$}", "term");
    for (&cat, &w) in table.categories.iter().zip(&col_widths) {
        let _ = write!(out, "  {:<w$}", header_of(cat));
    }
    out.push('\n');
    let total = term_width + col_widths.iter().map(|w| w + 2).sum::<usize>();
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for (row, row_cells) in table.rows.iter().zip(&cells) {
        let _ = write!(out, "{:<term_width$}", row.term.label());
        for (cell, &w) in row_cells.iter().zip(&col_widths) {
            let _ = write!(out, "  {cell:<w$}");
        }
        out.push('\n');
    }
    let _ = write!(
        out,
        "baseline: {} attractiveness; cells show beta(stars) RRR\n{}\n",
        table.baseline, table.footnote
    );
    out
}

/// Full fit export: the model plus its inference rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitExport {
    pub fit: ModelFit,
    pub inference: Vec<InferenceRow>,
}

/// Serialises the fit and inference rows as pretty JSON. Numbers round-trip
/// exactly.
pub fn export_json(
    fit: &ModelFit,
    rows: &[InferenceRow],
    mut out: impl Write,
) -> Result<(), ReportError> {
    let export = FitExport { fit: fit.clone(), inference: rows.to_vec() };
    let text = serde_json::to_string_pretty(&export).expect("fit export serialises");
    out.write_all(text.as_bytes())?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Reads a JSON fit export back.
pub fn import_json(text: &str) -> Result<FitExport, ReportError> {
    serde_json::from_str(text).map_err(|e| ReportError::MalformedFit(e.to_string()))
}

/// Writes inference rows as CSV, one row per (term, category), full
/// precision, point decimals.
pub fn export_csv(rows: &[InferenceRow], mut out: impl Write) -> Result<(), ReportError> {
    writeln!(out, "term,category,beta,rrr,se,p_value,stars")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.term,
            row.category,
            row.beta,
            row.rrr,
            row.se,
            row.p_value,
            row.stars.as_str(),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{CentralityKind, DesignMatrix, Moderator};
    use crate::graph::BlogId;
    use crate::mnlogit::{fit, inference, FitOptions};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn sample_fit() -> (ModelFit, Vec<InferenceRow>) {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let terms = vec![
            Term::Intercept,
            Term::Centrality(CentralityKind::PageRank),
            Term::Moderator(Moderator::Experience),
        ];
        let n = 200;
        let p = terms.len();
        let mut x = Vec::with_capacity(n * p);
        let mut y = Vec::with_capacity(n);
        let mut ids = Vec::with_capacity(n);
        for i in 0..n {
            ids.push(BlogId::new(format!("b{i}")).unwrap());
            x.push(1.0);
            let pr = rng.gen_range(0.0..10.0);
            let te = rng.gen_range(0.0..14.0);
            x.push(pr);
            x.push(te);
            let score = 0.2 * pr - 0.1 * te;
            let class = if score + rng.gen_range(-2.0..2.0) > 1.0 {
                (rng.gen_range(1..5)) as usize
            } else {
                rng.gen_range(0..5)
            };
            y.push(AttractivenessClass::from_index(class).unwrap());
        }
        for i in 0..5 {
            y[i] = AttractivenessClass::from_index(i).unwrap();
        }
        let dm = DesignMatrix::from_parts(ids, terms, x, y);
        let fitted = fit(&dm, AttractivenessClass::VeryLow, &FitOptions::default()).unwrap();
        let rows = inference(&fitted).unwrap();
        (fitted, rows)
    }

    #[test]
    fn cell_formatting_matches_table_style() {
        let cell = ReportCell {
            category: AttractivenessClass::Low,
            beta: 0.19,
            rrr: 0.19f64.exp(),
            stars: Stars::Three,
        };
        assert_eq!(format_cell(&cell, Locale::Point), "0.19(***) 1.21");

        let plain = ReportCell {
            category: AttractivenessClass::Low,
            beta: 0.0,
            rrr: 1.0,
            stars: Stars::None,
        };
        assert_eq!(format_cell(&plain, Locale::Point), "0.00 1.00");
        assert_eq!(format_cell(&cell, Locale::Comma), "0,19(***) 1,21");
    }

    #[test]
    fn table_covers_every_pair_in_term_order() {
        let (fitted, rows) = sample_fit();
        let table = build_table(&fitted, &rows).unwrap();
        assert_eq!(table.rows.len(), fitted.terms.len());
        for (row, term) in table.rows.iter().zip(&fitted.terms) {
            assert_eq!(row.term, *term);
            assert_eq!(row.cells.len(), 4);
        }
        let text = render_table(&table, Locale::Point);
        assert!(text.contains("***p<0.001, **p<0.01, *p<0.05"));
        assert!(text.lines().count() >= fitted.terms.len() + 3);
    }

    #[test]
    fn incomplete_rows_are_rejected() {
        let (fitted, mut rows) = sample_fit();
        rows.pop();
        assert!(matches!(
            build_table(&fitted, &rows),
            Err(ReportError::IncompleteRows(_))
        ));

        let (fitted, mut rows) = sample_fit();
        let dup = rows[0].clone();
        rows.push(dup);
        assert!(matches!(
            build_table(&fitted, &rows),
            Err(ReportError::IncompleteRows(_))
        ));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let (fitted, rows) = sample_fit();
        let mut buf = Vec::new();
        export_json(&fitted, &rows, &mut buf).unwrap();
        let reread = import_json(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(reread.fit.coefficients, fitted.coefficients);
        assert_eq!(reread.fit.covariance, fitted.covariance);
        assert_eq!(reread.fit.log_likelihood.to_bits(), fitted.log_likelihood.to_bits());
        assert_eq!(reread.inference.len(), rows.len());
        for (a, b) in reread.inference.iter().zip(&rows) {
            assert_eq!(a.beta.to_bits(), b.beta.to_bits());
            assert_eq!(a.rrr.to_bits(), b.rrr.to_bits());
        }
    }

    #[test]
    fn csv_export_shape_and_precision() {
        let (fitted, rows) = sample_fit();
        let mut buf = Vec::new();
        export_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "term,category,beta,rrr,se,p_value,stars");
        assert_eq!(lines.len() - 1, fitted.terms.len() * 4);
        // Full-precision round trip: rrr column equals exp(beta column).
        for line in &lines[1..] {
            let fields: Vec<&str> = line.split(',').collect();
            let beta: f64 = fields[2].parse().unwrap();
            let rrr: f64 = fields[3].parse().unwrap();
            assert_eq!(rrr.to_bits(), beta.exp().to_bits());
        }
    }

    #[test]
    fn rendering_does_not_mutate_values() {
        let (fitted, rows) = sample_fit();
        let table = build_table(&fitted, &rows).unwrap();
        let _ = render_table(&table, Locale::Comma);
        for (row, orig) in table.rows.iter().flat_map(|r| &r.cells).zip(&rows) {
            // build_table sorts cells by category, matching the term-major
            // inference order within each term.
            assert_eq!(row.beta.to_bits(), orig.beta.to_bits());
            assert_eq!(row.rrr.to_bits(), orig.rrr.to_bits());
        }
    }
}
