//! Text, JSON and CSV rendering of predictions and evaluation reports.

use serde::Serialize;

use crate::error::Violation;
use crate::eval::{CurvePoint, EvalReport, NoisePoint};
use crate::types::{PredictionResult, Scope, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Text,
    Json,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = Violation;

    fn from_str(s: &str) -> Result<Self, Violation> {
        match s {
            "text" => Ok(Self::Text),
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(Violation::Parameter(format!("unknown format {other:?}"))),
        }
    }
}

/// A rectangular table rendered either as aligned text or as CSV.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Self {
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_text(&self) -> String {
        let mut widths: Vec<usize> = self.headers.iter().map(|h| h.len()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let line = |cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, &w)| format!("{c:<w$}"))
                .collect();
            parts.join("  ").trim_end().to_owned() + "\n"
        };
        let mut out = line(&self.headers);
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        out += &line(&rule);
        for row in &self.rows {
            out += &line(row);
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers).expect("write to memory");
        for row in &self.rows {
            w.write_record(row).expect("write to memory");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 input")
    }
}

fn num(v: f64) -> String {
    format!("{v:.4}")
}

fn json<T: Serialize + ?Sized>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize") + "\n"
}

#[derive(Serialize)]
struct PredictionView<'a> {
    task_kind: TaskKind,
    scope: Scope,
    top_label: &'a str,
    ranking: Vec<&'a str>,
    posteriors: Vec<LabelScore<'a>>,
    contributing_images: Vec<ImageWeight<'a>>,
}

#[derive(Serialize)]
struct LabelScore<'a> {
    label: &'a str,
    posterior: f64,
}

#[derive(Serialize)]
struct ImageWeight<'a> {
    image_id: &'a str,
    weight: f64,
}

fn prediction_view(p: &PredictionResult) -> PredictionView<'_> {
    PredictionView {
        task_kind: p.kind(),
        scope: p.scope(),
        top_label: p.top_label(),
        ranking: p.ranked_labels().collect(),
        posteriors: p
            .ranking()
            .iter()
            .map(|&i| LabelScore {
                label: &p.labels()[i],
                posterior: p.posteriors()[i],
            })
            .collect(),
        contributing_images: p
            .contributing_images()
            .iter()
            .map(|(id, w)| ImageWeight {
                image_id: id,
                weight: *w,
            })
            .collect(),
    }
}

/// JSON value of a prediction, as embedded in sidecar files.
pub fn prediction_json(p: &PredictionResult) -> serde_json::Value {
    serde_json::to_value(prediction_view(p)).expect("prediction serializes")
}

/// Ranked labels with posteriors, then the contributing images.
pub fn render_prediction(p: &PredictionResult, format: OutputFormat) -> String {
    let mut ranked = Table::new(["rank", "label", "posterior"]);
    for (rank, &i) in p.ranking().iter().enumerate() {
        ranked.push(vec![(rank + 1).to_string(), p.labels()[i].clone(), format!("{:.6}", p.posteriors()[i])]);
    }
    match format {
        OutputFormat::Json => json(&prediction_view(p)),
        OutputFormat::Csv => ranked.to_csv(),
        OutputFormat::Text => {
            let mut images = Table::new(["image", "weight"]);
            for (id, w) in p.contributing_images() {
                images.push(vec![id.clone(), format!("{w:.6}")]);
            }
            format!(
                "prediction: {} ({} task, {} scope)\n\n{}\n{}",
                p.top_label(),
                p.kind(),
                match p.scope() {
                    Scope::SingleImage => "single-image",
                    Scope::Collage => "collage",
                },
                ranked.to_text(),
                images.to_text()
            )
        }
    }
}

fn summary_table(reports: &[EvalReport]) -> Table {
    let ns: Vec<usize> = reports.first().map_or(Vec::new(), |r| r.accuracy.iter().map(|a| a.n).collect());
    let mut headers: Vec<String> = [
        "condition",
        "task_kind",
        "sigma_fix",
        "fixation_pooling",
        "noise_px",
        "max_fixations",
    ]
    .map(String::from)
    .to_vec();
    for n in &ns {
        headers.push(format!("top{n}_mean"));
        headers.push(format!("top{n}_std"));
    }
    headers.extend(["participants", "trials", "unpredicted"].map(String::from));
    let mut t = Table::new(headers);
    for r in reports {
        let c = &r.condition;
        let mut row = vec![
            c.label.clone(),
            r.task_kind.to_string(),
            format!("{:.2}", c.sigma_fix),
            c.fixation_pooling.to_string(),
            format!("{}", c.noise_px),
            c.max_fixations.map_or("all".into(), |m| m.to_string()),
        ];
        for a in &r.accuracy {
            row.push(num(a.mean));
            row.push(num(a.std));
        }
        row.extend([
            r.per_participant.len().to_string(),
            r.trial_count.to_string(),
            r.unpredicted_trials.to_string(),
        ]);
        t.push(row);
    }
    t
}

fn participant_table(reports: &[EvalReport]) -> Table {
    let ns: Vec<usize> = reports.first().map_or(Vec::new(), |r| r.accuracy.iter().map(|a| a.n).collect());
    let mut headers: Vec<String> = ["condition", "participant", "trials"].map(String::from).to_vec();
    headers.extend(ns.iter().map(|n| format!("top{n}")));
    let mut t = Table::new(headers);
    for r in reports {
        for p in &r.per_participant {
            let mut row = vec![r.condition.label.clone(), p.participant_id.clone(), p.trials.to_string()];
            row.extend(p.accuracy.iter().map(|&a| num(a)));
            t.push(row);
        }
    }
    t
}

/// Summary rows per condition; text output also lists every participant.
pub fn render_reports(reports: &[EvalReport], format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => json(reports),
        OutputFormat::Csv => summary_table(reports).to_csv(),
        OutputFormat::Text => format!(
            "{}\nper participant\n{}",
            summary_table(reports).to_text(),
            participant_table(reports).to_text()
        ),
    }
}

/// Per-participant breakdown as its own table.
pub fn render_participants(reports: &[EvalReport], format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => json(&reports.iter().map(|r| &r.per_participant).collect::<Vec<_>>()),
        OutputFormat::Csv => participant_table(reports).to_csv(),
        OutputFormat::Text => participant_table(reports).to_text(),
    }
}

pub fn render_noise(points: &[NoisePoint], format: OutputFormat) -> String {
    if format == OutputFormat::Json {
        return json(points);
    }
    let ns: Vec<usize> = points.first().map_or(Vec::new(), |p| p.top_n.clone());
    let mut headers: Vec<String> = ["condition", "noise_px", "replications"].map(String::from).to_vec();
    for n in &ns {
        headers.push(format!("top{n}_mean"));
        headers.push(format!("top{n}_std"));
    }
    let mut t = Table::new(headers);
    for p in points {
        let mut row = vec![p.condition.clone(), format!("{}", p.noise_px), p.replications.to_string()];
        for (m, s) in p.mean.iter().zip(&p.std) {
            row.push(num(*m));
            row.push(num(*s));
        }
        t.push(row);
    }
    if format == OutputFormat::Csv {
        t.to_csv()
    } else {
        t.to_text()
    }
}

pub fn render_curve(points: &[CurvePoint], format: OutputFormat) -> String {
    if format == OutputFormat::Json {
        return json(points);
    }
    let ns: Vec<usize> = points
        .first()
        .map_or(Vec::new(), |p| p.report.accuracy.iter().map(|a| a.n).collect());
    let mut headers: Vec<String> = vec!["fixations".into()];
    for n in &ns {
        headers.push(format!("top{n}_mean"));
        headers.push(format!("top{n}_std"));
    }
    headers.push("unpredicted".into());
    let mut t = Table::new(headers);
    for p in points {
        let mut row = vec![p.fixations.to_string()];
        for a in &p.report.accuracy {
            row.push(num(a.mean));
            row.push(num(a.std));
        }
        row.push(p.report.unpredicted_trials.to_string());
        t.push(row);
    }
    if format == OutputFormat::Csv {
        t.to_csv()
    } else {
        t.to_text()
    }
}
