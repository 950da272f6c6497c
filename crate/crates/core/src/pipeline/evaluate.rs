use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    counts, load_or_build_index, load_trained, timed, write_rows, ClassFilter, GeneratorChoice,
    RunConfig, Stage, ATTRIBUTION_FILE, ATTRIBUTION_META_FILE, EXCLUSIONS_FILE, HISTOGRAM_FILE,
    NEIGHBOURHOOD_FILE, SCORES_FILE, SUMMARY_FILE,
};
use crate::attribution::{explain, Attribution, Method};
use crate::error::{Error, Result};
use crate::metrics::score_point;
use crate::neighbourhood::{
    generate_gaussian_neighbourhood, generate_neighbourhood, write_neighbourhoods, Generator,
    Neighbourhood,
};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub point_id: usize,
    pub class: u8,
    pub predicted: u8,
    pub method: Method,
    pub generator: Generator,
    pub robustness: f64,
    pub consistency: f64,
    pub n_members: usize,
    pub flags: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub point_id: usize,
    pub class: u8,
    pub generator: Generator,
    pub method: Method,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub generator: Generator,
    pub class: u8,
    pub method: Method,
    pub n: usize,
    pub n_flagged: usize,
    pub robustness_mean: f64,
    pub robustness_std: f64,
    pub consistency_mean: f64,
    pub consistency_std: f64,
    pub robustness_pct: String,
    pub consistency_pct: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct HistogramRow {
    generator: Generator,
    class: u8,
    method: Method,
    metric: &'static str,
    bin: usize,
    lower: f64,
    upper: f64,
    count: usize,
}

#[derive(Debug, Clone, Serialize)]
struct AttributionRow<'a> {
    point_id: usize,
    method: Method,
    feature_name: &'a str,
    value: f64,
}

#[derive(Debug, Clone)]
pub struct EvaluateOutcome {
    pub n_points: usize,
    pub scores: Vec<ScoreRow>,
    pub exclusions: Vec<Exclusion>,
    pub summary: Vec<SummaryRow>,
}

#[derive(Default)]
struct PointResult {
    scores: Vec<ScoreRow>,
    exclusions: Vec<Exclusion>,
    neighbourhoods: Vec<Neighbourhood>,
    attributions: Vec<Attribution>,
}

fn generators(choice: GeneratorChoice) -> Vec<Generator> {
    match choice {
        GeneratorChoice::Medoid => vec![Generator::Medoid],
        GeneratorChoice::Gaussian => vec![Generator::Gaussian],
        GeneratorChoice::Both => vec![Generator::Medoid, Generator::Gaussian],
    }
}

/// Test rows passing the class filter, ascending, capped per class.
fn select_points(cfg: &RunConfig, test: &[usize], labels: &[u8]) -> Vec<usize> {
    let classes: &[u8] = match cfg.evaluate.classes {
        ClassFilter::Minority => &[1],
        ClassFilter::Both => &[0, 1],
    };
    let mut out = Vec::new();
    for &c in classes {
        let rows = test.iter().copied().filter(|&r| labels[r] == c);
        match cfg.evaluate.max_points {
            Some(k) => out.extend(rows.take(k)),
            None => out.extend(rows),
        }
    }
    out.sort_unstable();
    out
}

/// Population mean and standard deviation.
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub(crate) fn percent(mean: f64, std: f64) -> String {
    format!("{:.2} (± {:.2}) %", 100.0 * mean, 100.0 * std)
}

/// Mean and standard deviation of both scores per (generator, class, method).
pub fn summarize(scores: &[ScoreRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Generator, u8, Method), Vec<&ScoreRow>> = BTreeMap::new();
    for s in scores {
        groups
            .entry((s.generator, s.class, s.method))
            .or_default()
            .push(s);
    }
    groups
        .into_iter()
        .map(|((generator, class, method), rows)| {
            let rob: Vec<f64> = rows.iter().map(|r| r.robustness).collect();
            let con: Vec<f64> = rows.iter().map(|r| r.consistency).collect();
            let (rm, rs) = mean_std(&rob);
            let (cm, cs) = mean_std(&con);
            SummaryRow {
                generator,
                class,
                method,
                n: rows.len(),
                n_flagged: rows.iter().filter(|r| !r.flags.is_empty()).count(),
                robustness_mean: rm,
                robustness_std: rs,
                consistency_mean: cm,
                consistency_std: cs,
                robustness_pct: percent(rm, rs),
                consistency_pct: percent(cm, cs),
            }
        })
        .collect()
}

fn histograms(scores: &[ScoreRow], bins: usize) -> Vec<HistogramRow> {
    let mut groups: BTreeMap<(Generator, u8, Method), Vec<&ScoreRow>> = BTreeMap::new();
    for s in scores {
        groups
            .entry((s.generator, s.class, s.method))
            .or_default()
            .push(s);
    }
    let width = 2.0 / bins as f64;
    let mut out = Vec::new();
    for ((generator, class, method), rows) in groups {
        for metric in ["robustness", "consistency"] {
            let mut hist = vec![0usize; bins];
            for r in &rows {
                let v = if metric == "robustness" {
                    r.robustness
                } else {
                    r.consistency
                };
                let b = (((v + 1.0) / width).floor() as usize).min(bins - 1);
                hist[b] += 1;
            }
            for (bin, count) in hist.into_iter().enumerate() {
                out.push(HistogramRow {
                    generator,
                    class,
                    method,
                    metric,
                    bin,
                    lower: -1.0 + bin as f64 * width,
                    upper: -1.0 + (bin + 1) as f64 * width,
                    count,
                });
            }
        }
    }
    out
}

/// Scores the filtered test points for every configured method and generator.
pub fn evaluate(cfg: &RunConfig) -> Result<EvaluateOutcome> {
    timed(cfg, Stage::Evaluate, |paths| {
        let methods = cfg.methods()?;
        let t = load_trained(paths)?;
        let index = load_or_build_index(cfg, paths, &t)?;
        let points = select_points(cfg, &t.split.test, t.z.labels());
        if points.is_empty() {
            return Err(Error::NoPointsToEvaluate);
        }
        let m = t.z.n_features();
        let specs: Vec<_> = methods
            .iter()
            .map(|&meth| cfg.explain_spec(meth, m))
            .collect();
        let gens = generators(cfg.evaluate.generator);
        let model = &t.bundle.model;
        let threshold = cfg.model.threshold;
        let dump_nb = cfg.evaluate.dump_neighbourhoods;
        let dump_attr = cfg.evaluate.dump_attributions;

        let results: Vec<PointResult> = points
            .par_iter()
            .map(|&id| -> Result<PointResult> {
                let x = t.z.row(id);
                let class = t.z.label(id);
                let predicted = model.predict_class(x, threshold)?;
                let mut out = PointResult::default();
                if dump_attr {
                    for spec in &specs {
                        if let Ok(a) = explain(model, x, spec) {
                            out.attributions.push(a);
                        }
                    }
                }
                for &g in &gens {
                    let seed = derive_seed(cfg.seed, id as u64, g.tag());
                    let nb = match g {
                        Generator::Medoid => {
                            generate_neighbourhood(model, x, &index, &cfg.perturb_config(seed))
                        }
                        Generator::Gaussian => {
                            generate_gaussian_neighbourhood(model, x, &cfg.gaussian_config(seed))
                        }
                    };
                    let nb = match nb {
                        Ok(nb) => nb,
                        Err(e) => {
                            out.exclusions
                                .extend(methods.iter().map(|&method| Exclusion {
                                    point_id: id,
                                    class,
                                    generator: g,
                                    method,
                                    reason: e.to_string(),
                                }));
                            continue;
                        }
                    };
                    for (spec, &method) in specs.iter().zip(&methods) {
                        match score_point(model, id, x, spec, &nb) {
                            Ok(s) => out.scores.push(ScoreRow {
                                point_id: id,
                                class,
                                predicted,
                                method,
                                generator: g,
                                robustness: s.robustness,
                                consistency: s.consistency,
                                n_members: s.n_members,
                                flags: s.flags.to_string(),
                            }),
                            Err(e) => out.exclusions.push(Exclusion {
                                point_id: id,
                                class,
                                generator: g,
                                method,
                                reason: e.to_string(),
                            }),
                        }
                    }
                    if dump_nb {
                        out.neighbourhoods.push(nb);
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;

        let mut scores = Vec::new();
        let mut exclusions = Vec::new();
        for r in &results {
            scores.extend(r.scores.iter().cloned());
            exclusions.extend(r.exclusions.iter().cloned());
        }
        let summary = summarize(&scores);
        write_rows(&paths.file(SCORES_FILE), &scores)?;
        write_rows(&paths.file(SUMMARY_FILE), &summary)?;
        write_rows(
            &paths.file(HISTOGRAM_FILE),
            &histograms(&scores, cfg.evaluate.histogram_bins),
        )?;
        write_exclusions(&paths.file(EXCLUSIONS_FILE), &exclusions)?;
        let mut artifacts = vec![SCORES_FILE, SUMMARY_FILE, HISTOGRAM_FILE, EXCLUSIONS_FILE];

        if dump_nb {
            let items = points
                .iter()
                .zip(&results)
                .flat_map(|(&id, r)| r.neighbourhoods.iter().map(move |n| (id, n)));
            write_neighbourhoods(
                &paths.file(NEIGHBOURHOOD_FILE),
                t.data.feature_names(),
                items,
            )?;
            artifacts.push(NEIGHBOURHOOD_FILE);
        }
        if dump_attr {
            write_attributions(paths, &points, &results, t.data.feature_names())?;
            artifacts.extend([ATTRIBUTION_FILE, ATTRIBUTION_META_FILE]);
        }

        let c = counts([
            ("points", points.len()),
            ("scores", scores.len()),
            ("exclusions", exclusions.len()),
        ]);
        Ok((
            EvaluateOutcome {
                n_points: points.len(),
                scores,
                exclusions,
                summary,
            },
            artifacts,
            c,
        ))
    })
}

/// Header is written even when nothing was excluded.
fn write_exclusions(path: &std::path::Path, rows: &[Exclusion]) -> Result<()> {
    if rows.is_empty() {
        std::fs::write(path, "point_id,class,generator,method,reason\n")
            .map_err(|e| Error::io(path, e))
    } else {
        write_rows(path, rows)
    }
}

fn write_attributions(
    paths: &super::RunPaths,
    points: &[usize],
    results: &[PointResult],
    names: &[String],
) -> Result<()> {
    let mut rows = Vec::new();
    let mut meta: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    for (&id, r) in points.iter().zip(results) {
        for a in &r.attributions {
            meta.entry(a.method.tag().to_string()).or_insert_with(|| {
                let mut m = a.meta.clone();
                if let Some(b) = &a.baseline {
                    m.insert("baseline".into(), format!("{b:?}"));
                }
                m
            });
            for (name, &value) in names.iter().zip(&a.values) {
                rows.push(AttributionRow {
                    point_id: id,
                    method: a.method,
                    feature_name: name,
                    value,
                });
            }
        }
    }
    write_rows(&paths.file(ATTRIBUTION_FILE), &rows)?;
    let path = paths.file(ATTRIBUTION_META_FILE);
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}
