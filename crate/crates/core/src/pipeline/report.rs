use std::collections::BTreeMap;
use std::fmt::Write;

use super::{
    counts, read_rows, summarize, timed, Exclusion, F1Row, RunConfig, ScoreRow, Stage, SummaryRow,
    TuningRow, EXCLUSIONS_FILE, F1_FILE, REPORT_FILE, SCORES_FILE, TUNING_FILE,
};
use crate::error::{Error, Result};
use crate::neighbourhood::Generator;

fn optional<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<Option<Vec<T>>> {
    match read_rows(path) {
        Ok(rows) => Ok(Some(rows)),
        Err(Error::MissingFile(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Renders `report.md` from the run directory's CSV outputs.
pub fn report(cfg: &RunConfig) -> Result<String> {
    timed(cfg, Stage::Report, |paths| {
        let scores: Vec<ScoreRow> = read_rows(&paths.file(SCORES_FILE))?;
        let summary = summarize(&scores);
        let f1: Vec<F1Row> = read_rows(&paths.file(F1_FILE))?;
        let tuning: Option<Vec<TuningRow>> = optional(&paths.file(TUNING_FILE))?;
        let exclusions: Option<Vec<Exclusion>> = optional(&paths.file(EXCLUSIONS_FILE))?;
        let text = render(&summary, &f1, tuning.as_deref(), exclusions.as_deref());
        let path = paths.file(REPORT_FILE);
        std::fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
        let c = counts([("summary_rows", summary.len())]);
        Ok((text, vec![REPORT_FILE], c))
    })
}

pub(crate) fn render(
    summary: &[SummaryRow],
    f1: &[F1Row],
    tuning: Option<&[TuningRow]>,
    exclusions: Option<&[Exclusion]>,
) -> String {
    let mut out = String::from("# Attribution reliability report\n\n## Classifier F1\n\n");
    out.push_str(
        "| split | class | F1 | precision | recall | support |\n|---|---|---|---|---|---|\n",
    );
    for r in f1 {
        let _ = writeln!(
            out,
            "| {} | {} | {:.2} | {:.2} | {:.2} | {} |",
            r.split, r.class, r.f1, r.precision, r.recall, r.support
        );
    }

    for g in [Generator::Medoid, Generator::Gaussian] {
        let rows: Vec<&SummaryRow> = summary.iter().filter(|r| r.generator == g).collect();
        if rows.is_empty() {
            continue;
        }
        let _ = write!(
            out,
            "\n## Scores, {g} neighbourhoods\n\n| method | class | n | robustness | consistency |\n|---|---|---|---|---|\n"
        );
        for r in rows {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} |",
                r.method.display_name(),
                r.class,
                r.n,
                r.robustness_pct,
                r.consistency_pct
            );
        }
    }

    let mut pairs: BTreeMap<_, [Option<&SummaryRow>; 2]> = BTreeMap::new();
    for r in summary {
        let slot = usize::from(r.generator == Generator::Gaussian);
        pairs.entry((r.class, r.method)).or_insert([None, None])[slot] = Some(r);
    }
    let deltas: Vec<_> = pairs
        .into_iter()
        .filter_map(|(k, [a, b])| Some((k, a?, b?)))
        .collect();
    if !deltas.is_empty() {
        out.push_str(
            "\n## Medoid minus Gaussian\n\n| method | class | robustness (pp) | consistency (pp) |\n|---|---|---|---|\n",
        );
        for ((class, method), m, g) in deltas {
            let _ = writeln!(
                out,
                "| {} | {} | {:+.2} | {:+.2} |",
                method.display_name(),
                class,
                100.0 * (m.robustness_mean - g.robustness_mean),
                100.0 * (m.consistency_mean - g.consistency_mean)
            );
        }
    }

    if let Some(rows) = tuning {
        out.push_str("\n## Lambda tuning\n\n| lambda | acceptance | chosen |\n|---|---|---|\n");
        for r in rows {
            let _ = writeln!(
                out,
                "| {} | {:.4} | {} |",
                r.lambda,
                r.rate,
                if r.chosen { "yes" } else { "" }
            );
        }
        if !rows.iter().any(|r| r.chosen) {
            out.push_str("\nNo lambda reached the acceptance threshold.\n");
        }
    }

    if let Some(ex) = exclusions {
        let _ = writeln!(
            out,
            "\n## Exclusions\n\n{} (point, generator, method) combinations excluded.",
            ex.len()
        );
    }
    out
}
