//! Accuracy tables, per-cell CSVs and occurrence-histogram charts.
//!
//! Markdown tables use the column scheme `Task Type | Task# | Feature Type`
//! followed by one accuracy column per classifier. The flagged best cell of
//! each row group is bold, and every table ends with a config digest footer.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::{Error, Result};
use crate::evaluation::{Cell, CellOutcome, EvalReport, Mode};
use crate::features::FeatureGroup;
use crate::ink_model::Category;
use crate::learners::ModelKind;
use crate::selection::OccurrenceHistogram;

/// Which results table is being rendered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    Single,
    Merged,
    Selected,
}

impl TableKind {
    pub fn caption(self) -> &'static str {
        match self {
            TableKind::Single => "Single task accuracies. For each task the best result is in bold.",
            TableKind::Merged => "Merged task accuracies. For each group, the best result is in bold.",
            TableKind::Selected => "Classification results with feature selection. For each task, the best result is in bold.",
        }
    }

    pub fn for_mode(mode: Mode) -> Self {
        match mode {
            Mode::Single => TableKind::Single,
            Mode::Merged => TableKind::Merged,
        }
    }
}

pub fn category_title(c: Category) -> &'static str {
    match c {
        Category::Rw => "Regular words",
        Category::Nrw => "Non-regular words",
        Category::Nw => "Non-words",
    }
}

/// Classifier columns in first-appearance order.
fn classifier_columns(report: &EvalReport) -> Vec<ModelKind> {
    let mut cols = Vec::new();
    for c in &report.cells {
        if !cols.contains(&c.classifier) {
            cols.push(c.classifier);
        }
    }
    cols
}

fn format_cell(cell: Option<&Cell>) -> String {
    let Some(cell) = cell else { return "n/a".into() };
    let mut text = match cell.accuracy() {
        Some(a) => format!("{a:.2}"),
        None => "n/a".into(),
    };
    if let CellOutcome::Evaluated(r) = &cell.outcome {
        if r.failed_folds() > 0 {
            text.push('*');
        }
    }
    if cell.best {
        text = format!("**{text}**");
    }
    text
}

pub fn render_markdown(report: &EvalReport, kind: TableKind) -> String {
    let cols = classifier_columns(report);
    let mut sets = Vec::new();
    for c in &report.cells {
        if !sets.contains(&c.set) {
            sets.push(c.set);
        }
    }
    let mut out = String::new();
    writeln!(out, "Table: {}", kind.caption()).unwrap();
    writeln!(out).unwrap();
    write!(out, "| Task Type | Task# | Feature Type |").unwrap();
    for k in &cols {
        write!(out, " {k} |").unwrap();
    }
    writeln!(out).unwrap();
    write!(out, "|---|---|---|").unwrap();
    for _ in &cols {
        write!(out, "---:|").unwrap();
    }
    writeln!(out).unwrap();

    let mut last_category = None;
    for group in report.groups() {
        for (i, &set) in sets.iter().enumerate() {
            let category = group.category();
            let type_col = if i == 0 && last_category != Some(category) {
                category.as_str().to_string()
            } else {
                String::new()
            };
            let task_col = if i == 0 { group.task_label() } else { String::new() };
            write!(out, "| {type_col} | {task_col} | {set} |").unwrap();
            for &k in &cols {
                write!(out, " {} |", format_cell(report.cell(group, set, k))).unwrap();
            }
            writeln!(out).unwrap();
        }
        last_category = Some(group.category());
    }
    writeln!(out).unwrap();
    let failed = report.cells.iter().any(|c| matches!(&c.outcome, CellOutcome::Evaluated(r) if r.failed_folds() > 0));
    if failed {
        writeln!(out, "\\* mean over the folds that trained; see the CSV for failed folds.").unwrap();
        writeln!(out).unwrap();
    }
    writeln!(
        out,
        "Accuracy (%), mean over cross-validation folds. Config digest `{}`, seed {}.",
        report.config_digest, report.seed
    )
    .unwrap();
    out
}

/// One row per cell with per-fold detail.
pub fn write_cells_csv<W: Write>(report: &EvalReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Validation(format!("csv write failed: {e}"));
    w.write_record([
        "mode",
        "task_type",
        "task",
        "feature_set",
        "classifier",
        "accuracy",
        "best",
        "fold_accuracies",
        "failed_folds",
        "tp",
        "tn",
        "fp",
        "fn",
        "status",
        "seed",
        "config_digest",
    ])
    .map_err(err)?;
    for c in &report.cells {
        let accuracy = c.accuracy().map(|a| a.to_string()).unwrap_or_default();
        let (folds, failed, conf, status) = match &c.outcome {
            CellOutcome::Evaluated(r) => {
                let folds: Vec<String> = r
                    .folds
                    .iter()
                    .map(|f| f.accuracy.map(|a| a.to_string()).unwrap_or_else(|| "failed".into()))
                    .collect();
                (folds.join(";"), r.failed_folds(), r.confusion(), "ok".to_string())
            }
            CellOutcome::Absent(msg) => (String::new(), 0, Default::default(), format!("absent: {msg}")),
        };
        w.write_record([
            report.mode.as_str(),
            c.group.category().as_str(),
            &c.group.task_label(),
            c.set.as_str(),
            c.classifier.as_str(),
            &accuracy,
            if c.best { "true" } else { "false" },
            &folds,
            &failed.to_string(),
            &conf.tp.to_string(),
            &conf.tn.to_string(),
            &conf.fp.to_string(),
            &conf.fn_.to_string(),
            &status,
            &report.seed.to_string(),
            &report.config_digest,
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Validation(format!("csv write failed: {e}")))
}

const BAR_WIDTH: f64 = 14.0;
const BAR_GAP: f64 = 4.0;
const PANEL_GAP: f64 = 28.0;
const PLOT_HEIGHT: f64 = 160.0;
const MARGIN_LEFT: f64 = 48.0;
const MARGIN_TOP: f64 = 44.0;
const LABEL_SPACE: f64 = 190.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Bar chart of one category's counts, with the A_, P_ and personal features
/// in three adjacent panels. The y axis spans 0 to 2 selections.
pub fn histogram_svg(hist: &OccurrenceHistogram) -> String {
    let groups = [FeatureGroup::InAir, FeatureGroup::OnPaper, FeatureGroup::Personal];
    let n_bars = hist.bars.len() as f64;
    let width = MARGIN_LEFT + n_bars * (BAR_WIDTH + BAR_GAP) + 2.0 * PANEL_GAP + 20.0;
    let height = MARGIN_TOP + PLOT_HEIGHT + LABEL_SPACE;
    let base = MARGIN_TOP + PLOT_HEIGHT;
    let unit = PLOT_HEIGHT / 2.0;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="10">"#
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{MARGIN_LEFT}" y="18" font-size="13">Occurrence of features for the AL feature set: {} ({})</text>"#,
        category_title(hist.category),
        hist.category
    )
    .unwrap();
    for level in 0..=2 {
        let y = base - level as f64 * unit;
        writeln!(
            s,
            r##"<line x1="{MARGIN_LEFT}" y1="{y}" x2="{:.1}" y2="{y}" stroke="#ccc"/><text x="{}" y="{}" text-anchor="end">{level}</text>"##,
            width - 10.0,
            MARGIN_LEFT - 6.0,
            y + 3.0
        )
        .unwrap();
    }
    let mut x = MARGIN_LEFT + 8.0;
    for (gi, g) in groups.into_iter().enumerate() {
        let bars: Vec<_> = hist.group(g).collect();
        if bars.is_empty() {
            continue;
        }
        let start = x;
        let fill = ["#4c72b0", "#dd8452", "#55a868"][gi];
        for b in bars {
            let h = f64::from(b.count) * unit;
            writeln!(
                s,
                r#"<rect x="{x:.1}" y="{:.1}" width="{BAR_WIDTH}" height="{h:.1}" fill="{fill}"><title>{}: {}</title></rect>"#,
                base - h,
                escape(&b.feature),
                b.count
            )
            .unwrap();
            let lx = x + BAR_WIDTH / 2.0 + 3.0;
            let ly = base + 8.0;
            writeln!(
                s,
                r#"<text x="{lx:.1}" y="{ly:.1}" transform="rotate(60 {lx:.1} {ly:.1})">{}</text>"#,
                escape(&b.feature)
            )
            .unwrap();
            x += BAR_WIDTH + BAR_GAP;
        }
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"#,
            (start + x - BAR_GAP) / 2.0,
            MARGIN_TOP - 8.0,
            g.label()
        )
        .unwrap();
        x += PANEL_GAP;
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{flag_best, Confusion, CvResult, FoldOutcome, RowGroup};
    use crate::features::FeatureSet;
    use crate::selection::HistogramBar;

    fn evaluated(kind: ModelKind, accs: &[f64]) -> CellOutcome {
        CellOutcome::Evaluated(CvResult {
            kind,
            folds: accs
                .iter()
                .enumerate()
                .map(|(i, &a)| FoldOutcome {
                    fold: i,
                    confusion: Confusion::default(),
                    accuracy: Some(a),
                    failure: None,
                })
                .collect(),
        })
    }

    fn report() -> EvalReport {
        let mut cells = Vec::new();
        for group in [RowGroup::Task(1), RowGroup::Task(2)] {
            for set in FeatureSet::ALL {
                for (i, kind) in ModelKind::CLASSIFIERS.into_iter().enumerate() {
                    let acc = 50.0 + i as f64 + if set == FeatureSet::P && group == RowGroup::Task(2) { 20.0 } else { 0.0 };
                    cells.push(Cell {
                        group,
                        set,
                        classifier: kind,
                        outcome: evaluated(kind, &[acc, acc]),
                        best: false,
                    });
                }
            }
        }
        flag_best(&mut cells);
        EvalReport {
            mode: Mode::Single,
            seed: 3,
            config_digest: "0123456789abcdef".into(),
            cells,
        }
    }

    #[test]
    fn table_layout() {
        let md = render_markdown(&report(), TableKind::Single);
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines[0], format!("Table: {}", TableKind::Single.caption()));
        assert_eq!(lines[2], "| Task Type | Task# | Feature Type | DT | RF | SVM | MLP |");
        assert_eq!(lines[4], "| RW | 1 | A | 50.00 | 51.00 | 52.00 | **53.00** |");
        assert_eq!(lines[5], "|  |  | P | 50.00 | 51.00 | 52.00 | 53.00 |");
        assert_eq!(lines[7], "|  | 2 | A | 50.00 | 51.00 | 52.00 | 53.00 |");
        assert_eq!(lines[8], "|  |  | P | 70.00 | 71.00 | 72.00 | **73.00** |");
        assert_eq!(md.matches("**").count(), 4);
        assert!(md.trim_end().ends_with("Config digest `0123456789abcdef`, seed 3."));
    }

    #[test]
    fn csv_has_one_row_per_cell() {
        let mut buf = Vec::new();
        write_cells_csv(&report(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 24);
        assert!(text.lines().nth(1).unwrap().starts_with("single,RW,1,A,DT,50,false,50;50,0,"));
    }

    #[test]
    fn svg_has_a_bar_per_feature() {
        let hist = OccurrenceHistogram {
            category: Category::Nw,
            bars: FeatureSet::AL
                .names()
                .into_iter()
                .enumerate()
                .map(|(i, feature)| HistogramBar { feature, count: (i % 3) as u8 })
                .collect(),
        };
        let svg = histogram_svg(&hist);
        assert_eq!(svg.matches("<rect").count(), 47);
        for label in ["in-air", "on-paper", "personal", "Non-words (NW)"] {
            assert!(svg.contains(label), "{label}");
        }
        assert_eq!(svg, histogram_svg(&hist));
    }
}
