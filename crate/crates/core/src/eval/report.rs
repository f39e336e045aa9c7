use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::matching::{count_fields, match_records, Field, GroundTruthRecord, Matching};
use super::metrics::{compute_metrics, exact_string, Exact, FieldCounts, MetricRow, Percent2};
use crate::par::Executor;
use crate::reactions::ReactionRecord;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PaperInput {
    pub paper_id: String,
    pub extracted: Vec<ReactionRecord>,
    pub truth: Vec<GroundTruthRecord>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalOptions {
    pub score_catalyst: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Rounded {
    pub efficiency: Percent2,
    pub precision: Percent2,
    pub recall: Percent2,
    pub f1: Percent2,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExactRow {
    pub efficiency: String,
    pub precision: String,
    pub recall: String,
    pub f1: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FieldReport {
    pub field: Field,
    pub counts: FieldCounts,
    pub percent: Rounded,
    pub exact: ExactRow,
}

impl FieldReport {
    fn new(field: Field, counts: FieldCounts, m: MetricRow) -> Self {
        Self {
            field,
            counts,
            percent: Rounded {
                efficiency: Percent2::of(m.efficiency),
                precision: Percent2::of(m.precision),
                recall: Percent2::of(m.recall),
                f1: Percent2::of(m.f1),
            },
            exact: ExactRow {
                efficiency: exact_string(m.efficiency),
                precision: exact_string(m.precision),
                recall: exact_string(m.recall),
                f1: exact_string(m.f1),
            },
        }
    }
}

/// Unweighted means over the scored fields. `percent` averages the rounded
/// per-field values, which is how the published averages come out;
/// `exact` averages the exact ratios.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MacroAverage {
    pub fields: usize,
    pub percent: Rounded,
    pub exact: ExactRow,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub paper_id: String,
    pub seconds: f64,
    #[serde(default)]
    pub usd: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostTime {
    /// Product-field precision, the figure the cost comparison reports.
    pub precision: Percent2,
    pub reactions: u64,
    pub seconds_per_reaction: f64,
    pub usd_per_reaction: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PaperMatching {
    pub paper_id: String,
    #[serde(flatten)]
    pub matching: Matching,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub fields: Vec<FieldReport>,
    /// Fields without annotated truth, left out of the table.
    pub undefined_fields: Vec<Field>,
    pub macro_average: Option<MacroAverage>,
    pub matching_log: Vec<PaperMatching>,
    pub cost_time: Option<CostTime>,
}

fn fields_for(opts: EvalOptions) -> Vec<Field> {
    let mut f = Field::SCORED.to_vec();
    if opts.score_catalyst {
        f.push(Field::Catalyst);
    }
    f
}

/// Report from already aggregated counts.
pub fn report_from_counts(counts: &BTreeMap<Field, FieldCounts>) -> EvalReport {
    let mut fields = Vec::new();
    let mut undefined_fields = Vec::new();
    let mut order: Vec<Field> = Field::SCORED.to_vec();
    order.extend(counts.keys().filter(|f| !Field::SCORED.contains(f)));
    let mut scored_rows = Vec::new();
    for f in order {
        let Some(&c) = counts.get(&f) else { continue };
        match compute_metrics(c) {
            Ok(m) => {
                if Field::SCORED.contains(&f) {
                    scored_rows.push(m);
                }
                fields.push(FieldReport::new(f, c, m));
            }
            Err(_) => undefined_fields.push(f),
        }
    }
    let scored: Vec<&FieldReport> = fields.iter().filter(|r| Field::SCORED.contains(&r.field)).collect();
    let macro_average = (!scored.is_empty()).then(|| {
        let mean = |pick: fn(&Rounded) -> Percent2| {
            Percent2::mean(&scored.iter().map(|r| pick(&r.percent)).collect::<Vec<_>>()).expect("non-empty")
        };
        let n = Exact::from_integer(scored_rows.len() as u128);
        let exact_mean = |pick: fn(&MetricRow) -> Exact| exact_string(scored_rows.iter().map(pick).sum::<Exact>() / n);
        MacroAverage {
            fields: scored.len(),
            percent: Rounded {
                efficiency: mean(|r| r.efficiency),
                precision: mean(|r| r.precision),
                recall: mean(|r| r.recall),
                f1: mean(|r| r.f1),
            },
            exact: ExactRow {
                efficiency: exact_mean(|m| m.efficiency),
                precision: exact_mean(|m| m.precision),
                recall: exact_mean(|m| m.recall),
                f1: exact_mean(|m| m.f1),
            },
        }
    });
    EvalReport {
        fields,
        undefined_fields,
        macro_average,
        matching_log: Vec::new(),
        cost_time: None,
    }
}

/// Scores each paper on `exec`, sums counts across papers, then computes
/// metrics once from the sums.
pub fn build_report(papers: &[PaperInput], opts: EvalOptions, timing: Option<&[TimingRow]>, exec: &Executor) -> EvalReport {
    let fields = fields_for(opts);
    let per_paper = exec.map(papers, |p| {
        let m = match_records(&p.extracted, &p.truth);
        let counts = count_fields(&m, &p.extracted, &p.truth, &fields);
        (m, counts)
    });
    let mut totals: BTreeMap<Field, FieldCounts> = BTreeMap::new();
    let mut log = Vec::new();
    for (p, (m, counts)) in papers.iter().zip(per_paper) {
        for (f, c) in counts {
            *totals.entry(f).or_default() += c;
        }
        log.push(PaperMatching {
            paper_id: p.paper_id.clone(),
            matching: m,
        });
    }
    let mut report = report_from_counts(&totals);
    report.matching_log = log;
    if let Some(rows) = timing {
        let reactions: u64 = papers.iter().map(|p| p.extracted.len() as u64).sum();
        let precision = report
            .fields
            .iter()
            .find(|r| r.field == Field::Product)
            .map_or(Percent2(0), |r| r.percent.precision);
        let seconds: f64 = rows.iter().map(|r| r.seconds).sum();
        let usd: Option<f64> = rows.iter().map(|r| r.usd).sum();
        let per = |x: f64| if reactions == 0 { 0.0 } else { x / reactions as f64 };
        report.cost_time = Some(CostTime {
            precision,
            reactions,
            seconds_per_reaction: per(seconds),
            usd_per_reaction: usd.map(per),
        });
    }
    report
}

pub fn read_timing(path: &Path) -> io::Result<Vec<TimingRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(io::Error::other)?;
    rdr.deserialize().collect::<Result<_, _>>().map_err(io::Error::other)
}

pub fn write_timing(path: &Path, rows: &[TimingRow]) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(io::Error::other)?;
    for r in rows {
        w.serialize(r).map_err(io::Error::other)?;
    }
    w.flush()
}

impl EvalReport {
    /// Plain-text tables: counts, ratios, and the optional cost block.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:>8} {:>10} {:>8}", "", "Correct", "Extracted", "Total");
        for r in &self.fields {
            let c = r.counts;
            let _ = writeln!(out, "{:<10} {:>8} {:>10} {:>8}", r.field.label(), c.correct, c.extracted, c.total);
        }
        out.push('\n');
        let _ = writeln!(
            out,
            "{:<10} {:>10} {:>10} {:>10} {:>11}",
            "", "Precision", "Recall", "F1-score", "Efficiency"
        );
        let row = |out: &mut String, name: &str, p: &Rounded| {
            let _ = writeln!(
                out,
                "{:<10} {:>9}% {:>9}% {:>9}% {:>10}%",
                name, p.precision, p.recall, p.f1, p.efficiency
            );
        };
        for r in &self.fields {
            row(&mut out, r.field.label(), &r.percent);
        }
        if let Some(m) = &self.macro_average {
            row(&mut out, "Average", &m.percent);
        }
        if let Some(ct) = &self.cost_time {
            out.push('\n');
            let _ = writeln!(
                out,
                "{:<10} {:>10} {:>24} {:>24}",
                "", "Precision", "Time per Reaction (s)", "Cost per Reaction (USD)"
            );
            let usd = ct.usd_per_reaction.map_or("n/a".to_string(), |u| format!("{u:.4}"));
            let _ = writeln!(
                out,
                "{:<10} {:>9}% {:>24.2} {:>24}",
                "AI Agent", ct.precision, ct.seconds_per_reaction, usd
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn published() -> BTreeMap<Field, FieldCounts> {
        BTreeMap::from([
            (Field::Yield, FieldCounts::new(236, 256, 326)),
            (Field::Reactant, FieldCounts::new(203, 228, 300)),
            (Field::Solvent, FieldCounts::new(227, 247, 326)),
            (Field::Product, FieldCounts::new(223, 255, 326)),
        ])
    }

    #[test]
    fn macro_average_of_published_rows() {
        let r = report_from_counts(&published());
        let m = r.macro_average.unwrap();
        assert_eq!(
            [m.percent.precision.to_string(), m.percent.recall.to_string(), m.percent.f1.to_string()],
            ["90.15", "77.13", "83.11"]
        );
    }

    #[test]
    fn single_field_row_equals_compute_metrics() {
        let c = FieldCounts::new(3, 4, 5);
        let r = report_from_counts(&BTreeMap::from([(Field::Solvent, c)]));
        assert_eq!(r.fields.len(), 1);
        assert_eq!(r.fields[0], FieldReport::new(Field::Solvent, c, compute_metrics(c).unwrap()));
    }

    #[test]
    fn zero_total_field_is_omitted() {
        let r = report_from_counts(&BTreeMap::from([(Field::Yield, FieldCounts::new(0, 0, 0))]));
        assert!(r.fields.is_empty());
        assert_eq!(r.undefined_fields, [Field::Yield]);
        assert!(r.macro_average.is_none());
    }

    #[test]
    fn text_table_has_all_rows() {
        let text = report_from_counts(&published()).to_text();
        assert!(text.contains("Product         223        255      326"));
        assert!(text.contains("Average"));
        assert!(text.contains("90.15%"));
    }

    #[test]
    fn timing_round_trip_and_cost_block() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let rows = vec![
            TimingRow { paper_id: "a".into(), seconds: 1.0, usd: Some(0.01) },
            TimingRow { paper_id: "b".into(), seconds: 3.0, usd: Some(0.03) },
        ];
        write_timing(&p, &rows).unwrap();
        assert_eq!(read_timing(&p).unwrap(), rows);
        let paper = PaperInput::default();
        let r = build_report(&[paper], EvalOptions::default(), Some(&rows), &Executor::sequential());
        assert_eq!(r.cost_time.unwrap().reactions, 0);
    }
}
