//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::json;
use trendbreak::grid::{
    self, read_binary, read_csv, read_daily_csv, read_results, write_results, BatchConfig, BatchOutput, CellResult,
    GridDataset, IngestReport, LoadedGrid, Significance,
};
use trendbreak::scan::CurvePoint;
use trendbreak::sigtest::{null_ensemble, test_against, test_change_point, NullNoise, SigConfig, SignificanceResult};
use trendbreak::stochastic::{ensemble_experiment, synth_series, EnsembleOptions, EnsembleSummary, NoiseKind, SynthConfig};
use trendbreak::{fit_single, ModelSelection, read_series_csv, scan_change_point, select_model, write_series_csv, ScanConfig, Series};

use crate::heatmap::{self, Axes, Field, Raster};
use crate::output::{num, read_input, to_json, usage, InputDigest, Metadata, OutDir};
use crate::{
    BatchArgs, Common, EnsembleArgs, FitArgs, GlobalMeanArgs, GridFormatArg, GridInput, MapArgs, McTestArgs, NoiseArg,
    NullArgs, OutFormat, ScanArgs, SeriesModel, SignificanceArg, SynthArgs,
};

const PER_CENTURY: f64 = 100.0;

fn formats(common: &Common, allowed: &[OutFormat], default: &[OutFormat]) -> Result<Vec<OutFormat>> {
    if let Some(f) = common.format.iter().find(|f| !allowed.contains(f)) {
        return Err(usage(format!("format {f:?} not available for this command (allowed: {allowed:?})")));
    }
    Ok(if common.format.is_empty() { default.to_vec() } else { common.format.clone() })
}

fn check_workers(common: &Common) -> Result<()> {
    if common.workers == Some(0) {
        return Err(usage("--workers must be at least 1"));
    }
    Ok(())
}

fn validated<T>(r: trendbreak::Result<T>) -> Result<T> {
    r.map_err(|e| usage(e.to_string()))
}

fn scan_config(margin: usize, diagnostic: bool, closeness: f64) -> Result<ScanConfig> {
    let c = ScanConfig { margin, diagnostic, closeness_factor: closeness, ..ScanConfig::default() };
    validated(c.validate())?;
    Ok(c)
}

fn sig_config(null: &NullArgs, common: &Common, scan: ScanConfig) -> Result<SigConfig> {
    let noise = match (null.noise, null.d) {
        (NoiseArg::White, None) => NullNoise::White,
        (NoiseArg::White, Some(_)) => return Err(usage("--d requires --noise arfima")),
        (NoiseArg::Arfima, d) => NullNoise::Arfima { d },
    };
    let c = SigConfig {
        ensemble_size: null.ensemble_size,
        noise,
        seed: common.seed,
        confidence: null.confidence,
        scan,
        workers: common.workers,
        ..SigConfig::default()
    };
    validated(c.validate())?;
    Ok(c)
}

fn synth_config(m: &SeriesModel, seed: u64) -> Result<SynthConfig> {
    let noise = match (m.noise, m.d) {
        (NoiseArg::White, None) => NoiseKind::White,
        (NoiseArg::White, Some(_)) => return Err(usage("--d requires --noise arfima")),
        (NoiseArg::Arfima, Some(d)) => NoiseKind::Arfima { d },
        (NoiseArg::Arfima, None) => return Err(usage("--noise arfima needs --d")),
    };
    let c = SynthConfig {
        start_year: m.start_year,
        n_years: m.years,
        change_index: (!m.no_change).then_some(m.change_index),
        slope1: m.slope1,
        slope2: if m.no_change { m.slope1 } else { m.slope2 },
        sigma: m.sigma,
        noise,
        seed,
    };
    validated(c.validate())?;
    Ok(c)
}

fn load_series(path: &Path, from: Option<i32>, to: Option<i32>) -> Result<(Series, InputDigest)> {
    let (data, digest) = read_input(path)?;
    let series = read_series_csv(data.as_slice()).with_context(|| format!("reading {}", path.display()))?;
    let series = match (from, to) {
        (None, None) => series,
        (f, t) => series.window(f.unwrap_or(series.start_year()), t.unwrap_or(series.end_year()))?,
    };
    Ok((series, digest))
}

fn load_grid(input: &GridInput) -> Result<(LoadedGrid, InputDigest)> {
    let (data, digest) = read_input(&input.grid)?;
    let format = match input.grid_format {
        GridFormatArg::Auto if data.starts_with(grid::MAGIC) => GridFormatArg::Binary,
        GridFormatArg::Auto => {
            let first = data.split(|&b| b == b'\n').next().unwrap_or_default();
            if String::from_utf8_lossy(first).split(',').any(|f| f.trim() == "date") {
                GridFormatArg::Daily
            } else {
                GridFormatArg::Csv
            }
        }
        f => f,
    };
    let loaded = match format {
        GridFormatArg::Binary => {
            let dataset = read_binary(data.as_slice())?;
            let report = dataset.report(dataset.n_cells() * dataset.n_years());
            LoadedGrid { dataset, report }
        }
        GridFormatArg::Daily => read_daily_csv(data.as_slice(), input.min_days)?,
        _ => read_csv(data.as_slice())?,
    };
    Ok((loaded, digest))
}

/// Output of a command with one main result: written into `--out` when
/// given, else the single requested format goes to stdout.
fn emit(common: &Common, formats: &[OutFormat], meta: &Metadata, json_name: &str, json_value: impl Serialize, csv: Option<(&str, String)>) -> Result<()> {
    let json_text = to_json(meta, json_value)?;
    match &common.out {
        Some(dir) => {
            let mut out = OutDir::create(dir)?;
            if formats.contains(&OutFormat::Json) {
                out.write(json_name, json_text.as_bytes())?;
            }
            if let (true, Some((name, text))) = (formats.contains(&OutFormat::Csv), &csv) {
                out.write(name, text.as_bytes())?;
            }
            out.finish(meta)
        }
        None => {
            if formats.len() != 1 {
                return Err(usage("several output formats need --out"));
            }
            match (formats[0], csv) {
                (OutFormat::Csv, Some((_, text))) => print!("{text}"),
                _ => print!("{json_text}"),
            }
            Ok(())
        }
    }
}

fn require_out(common: &Common) -> Result<&Path> {
    common.out.as_deref().ok_or_else(|| usage("this command needs --out <dir>"))
}

fn curve_csv(curve: &[CurvePoint<f64>]) -> String {
    let mut s = String::from("change_year,change_index,rmse\n");
    for p in curve {
        let _ = writeln!(s, "{},{},{}", p.change_year, p.change_index, num(p.rmse));
    }
    s
}

#[derive(Serialize)]
struct SlopeReport {
    slope: f64,
    slope_per_century: f64,
    intercept: f64,
    rss: f64,
    rmse: f64,
}

#[derive(Serialize)]
struct DualReport {
    change_year: i32,
    change_index: usize,
    a1: f64,
    b1: f64,
    a2: f64,
    b2: f64,
    a1_per_century: f64,
    a2_per_century: f64,
    rss: f64,
    rmse: f64,
    continuity_residual: f64,
}

#[derive(Serialize)]
struct FitReport {
    start_year: i32,
    end_year: i32,
    n: usize,
    single: SlopeReport,
    dual: DualReport,
    /// `delta_bic` is `BIC_dual − BIC_single`.
    criteria: ModelSelection,
    candidates: Vec<CurvePoint<f64>>,
    rmse_curve: Vec<CurvePoint<f64>>,
    significance: Option<SignificanceResult>,
}

pub fn fit(a: &FitArgs) -> Result<()> {
    check_workers(&a.common)?;
    let formats = formats(&a.common, &[OutFormat::Json, OutFormat::Csv], &[OutFormat::Json])?;
    let scan_cfg = scan_config(a.common.margin, false, ScanConfig::DEFAULT_CLOSENESS)?;
    let sig = if a.no_test { None } else { Some(sig_config(&a.null, &a.common, scan_cfg)?) };
    let (series, digest) = load_series(&a.input, a.from_year, a.to_year)?;

    let single = fit_single(&series)?;
    let scan = scan_change_point(&series, &scan_cfg)?;
    let criteria = select_model(&series, &scan)?;
    let significance = sig.as_ref().map(|c| test_change_point(&series, c)).transpose()?;
    let b = scan.best;
    let report = FitReport {
        start_year: series.start_year(),
        end_year: series.end_year(),
        n: series.len(),
        single: SlopeReport {
            slope: single.slope,
            slope_per_century: single.slope * PER_CENTURY,
            intercept: single.intercept,
            rss: single.rss,
            rmse: single.rmse,
        },
        dual: DualReport {
            change_year: b.change_year,
            change_index: b.change_index,
            a1: b.a1,
            b1: b.b1,
            a2: b.a2,
            b2: b.b2,
            a1_per_century: b.a1 * PER_CENTURY,
            a2_per_century: b.a2 * PER_CENTURY,
            rss: b.rss,
            rmse: b.rmse,
            continuity_residual: b.continuity_residual(),
        },
        criteria,
        candidates: scan.candidates.clone(),
        rmse_curve: scan.rmse_curve.clone(),
        significance,
    };
    let config = json!({ "args": a, "scan": scan_cfg, "significance": sig });
    let meta = Metadata::new("fit", Some(a.common.seed), config)?.with_input(digest);
    emit(&a.common, &formats, &meta, "fit.json", &report, Some(("rmse_curve.csv", curve_csv(&scan.rmse_curve))))
}

pub fn scan(a: &ScanArgs) -> Result<()> {
    let formats = formats(&a.common, &[OutFormat::Csv, OutFormat::Json], &[OutFormat::Csv])?;
    let scan_cfg = scan_config(a.common.margin, a.diagnostic, a.closeness)?;
    let (series, digest) = load_series(&a.input, None, None)?;
    let scan = scan_change_point(&series, &scan_cfg)?;
    let meta = Metadata::new("scan", None, json!({ "args": a, "scan": scan_cfg }))?.with_input(digest);
    let csv = curve_csv(&scan.rmse_curve);
    emit(&a.common, &formats, &meta, "scan.json", &scan, Some(("rmse_curve.csv", csv)))
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let formats = formats(&a.common, &[OutFormat::Csv, OutFormat::Json], &[OutFormat::Csv])?;
    let cfg = synth_config(&a.model, a.common.seed)?;
    let series = synth_series(&cfg)?;
    let mut csv = Vec::new();
    write_series_csv(&series, &mut csv)?;
    let meta = Metadata::new("synth", Some(cfg.seed), json!({ "args": a, "synth": cfg }))?;
    let result = json!({ "change_year": cfg.change_year(), "series": series });
    emit(&a.common, &formats, &meta, "series.json", result, Some(("series.csv", String::from_utf8(csv)?)))
}

#[derive(Serialize)]
struct EnsembleStats {
    label: String,
    noise: NoiseKind,
    change_year: Option<i32>,
    members: usize,
    within_5: Option<f64>,
    within_8: Option<f64>,
    dual_fraction: f64,
    selection_accuracy: f64,
    aic_dual_fraction: f64,
    rejection_fraction: Option<f64>,
    /// Detected change points in the outermost three scanned years at
    /// either end.
    edge_fraction: f64,
}

impl EnsembleStats {
    fn new(label: String, s: &EnsembleSummary) -> Self {
        let years: Vec<i32> = s.histogram.keys().copied().collect();
        let edge: usize = years
            .iter()
            .enumerate()
            .filter(|(i, _)| *i < 3 || *i + 3 >= years.len())
            .map(|(_, y)| s.histogram[y])
            .sum();
        Self {
            label,
            noise: s.config.noise,
            change_year: s.config.change_year(),
            members: s.members,
            within_5: s.within_5,
            within_8: s.within_8,
            dual_fraction: s.dual_fraction,
            selection_accuracy: s.selection_accuracy,
            aic_dual_fraction: s.aic_dual_fraction,
            rejection_fraction: s.rejection_fraction,
            edge_fraction: edge as f64 / s.members as f64,
        }
    }
}

fn histogram_csv(s: &EnsembleSummary) -> String {
    let mut out = String::from("change_year,count,fraction\n");
    for (y, c) in &s.histogram {
        let _ = writeln!(out, "{y},{c},{}", num(*c as f64 / s.members as f64));
    }
    out
}

fn members_csv(s: &EnsembleSummary) -> String {
    let mut out = String::from("member,change_year,a1,a2,rmse_dual,delta_bic,preferred,reject\n");
    for o in &s.outcomes {
        let reject = o.reject_null.map(|r| r.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            o.member,
            o.change_year,
            num(o.a1),
            num(o.a2),
            num(o.rmse_dual),
            num(-o.delta_bic_single_minus_dual),
            o.preferred.as_str(),
            reject
        );
    }
    out
}

pub fn ensemble(a: &EnsembleArgs) -> Result<()> {
    check_workers(&a.common)?;
    let formats = formats(&a.common, &[OutFormat::Csv, OutFormat::Json], &[OutFormat::Csv, OutFormat::Json])?;
    let dir = require_out(&a.common)?;
    let scan_cfg = scan_config(a.common.margin, a.diagnostic, ScanConfig::DEFAULT_CLOSENESS)?;
    if a.members == 0 {
        return Err(usage("--members must be at least 1"));
    }
    let significance = if a.test {
        let null = NullArgs { ensemble_size: a.ensemble_size, noise: NoiseArg::White, d: None, confidence: 0.95 };
        Some(sig_config(&null, &a.common, scan_cfg)?)
    } else {
        None
    };
    let options = EnsembleOptions { members: a.members, scan: scan_cfg, significance, workers: a.common.workers };

    let runs: Vec<(String, SynthConfig)> = if a.sweep {
        if a.model.d.is_some() || a.model.noise != NoiseArg::White {
            return Err(usage("--sweep sets the noise itself; drop --noise/--d"));
        }
        let base = synth_config(&SeriesModel { no_change: false, ..a.model.clone() }, a.common.seed)?;
        let mut runs = Vec::new();
        for (tag, noise) in [
            ("white", NoiseKind::White),
            ("h065", NoiseKind::Arfima { d: 0.15 }),
            ("h080", NoiseKind::Arfima { d: 0.3 }),
        ] {
            runs.push((format!("{tag}_break"), SynthConfig { noise, ..base }));
            let flat = SynthConfig { noise, change_index: None, slope2: base.slope1, ..base };
            runs.push((format!("{tag}_nobreak"), flat));
        }
        runs
    } else {
        vec![(String::new(), synth_config(&a.model, a.common.seed)?)]
    };

    let mut out = OutDir::create(dir)?;
    let mut stats = Vec::new();
    for (label, cfg) in &runs {
        let summary = ensemble_experiment(cfg, &options)?;
        let prefix = if label.is_empty() { String::new() } else { format!("{label}_") };
        if formats.contains(&OutFormat::Csv) {
            if a.sweep {
                let mut s = String::from("member,delta_bic,preferred,change_year\n");
                for o in &summary.outcomes {
                    let _ = writeln!(s, "{},{},{},{}", o.member, num(-o.delta_bic_single_minus_dual), o.preferred.as_str(), o.change_year);
                }
                out.write(&format!("delta_bic_{label}.csv"), s.as_bytes())?;
            } else {
                out.write("members.csv", members_csv(&summary).as_bytes())?;
            }
            out.write(&format!("{prefix}histogram.csv"), histogram_csv(&summary).as_bytes())?;
        }
        let label = if label.is_empty() { "ensemble".to_string() } else { label.clone() };
        stats.push(EnsembleStats::new(label, &summary));
    }
    let configs: BTreeMap<&str, &SynthConfig> = runs.iter().map(|(l, c)| (l.as_str(), c)).collect();
    let meta = Metadata::new("ensemble", Some(a.common.seed), json!({ "args": a, "runs": configs, "options": options }))?;
    if formats.contains(&OutFormat::Json) {
        out.write("summary.json", to_json(&meta, &stats)?.as_bytes())?;
    }
    for s in &stats {
        eprintln!(
            "{}: dual {:.3}, within ±5 {}, within ±8 {}",
            s.label,
            s.dual_fraction,
            s.within_5.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into()),
            s.within_8.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into())
        );
    }
    out.finish(&meta)
}

pub fn mc_test(a: &McTestArgs) -> Result<()> {
    check_workers(&a.common)?;
    let formats = formats(&a.common, &[OutFormat::Json, OutFormat::Csv], &[OutFormat::Json])?;
    let scan_cfg = scan_config(a.common.margin, false, ScanConfig::DEFAULT_CLOSENESS)?;
    let cfg = sig_config(&a.null, &a.common, scan_cfg)?;
    let (series, digest) = load_series(&a.input, None, None)?;
    let null = null_ensemble(&series, &cfg)?;
    let result = test_against(&series, &null, &cfg)?;
    let mut csv = String::from("surrogate,change_year,s\n");
    for (i, s) in null.samples.iter().enumerate() {
        let _ = writeln!(csv, "{i},{},{}", s.change_year, num(s.s));
    }
    let meta = Metadata::new("mc-test", Some(cfg.seed), json!({ "args": a, "significance": cfg }))?.with_input(digest);
    emit(&a.common, &formats, &meta, "mc_test.json", &result, Some(("null_samples.csv", csv)))
}

pub fn global_mean(a: &GlobalMeanArgs) -> Result<()> {
    let formats = formats(&a.common, &[OutFormat::Csv, OutFormat::Json], &[OutFormat::Csv])?;
    let (loaded, digest) = load_grid(&a.input)?;
    let series = grid::global_mean_series(&loaded.dataset)?;
    let mut csv = Vec::new();
    write_series_csv(&series, &mut csv)?;
    let meta = Metadata::new("global-mean", None, json!({ "args": a }))?.with_input(digest);
    let result = json!({ "ingest": loaded.report, "series": series });
    emit(&a.common, &formats, &meta, "global_mean.json", result, Some(("global_mean.csv", String::from_utf8(csv)?)))
}

/// Change years the scan can report for this dataset.
fn year_span(dataset: &GridDataset, scan: &ScanConfig) -> Result<(i32, i32)> {
    let r = scan.change_range(dataset.n_years())?;
    Ok((dataset.start_year() + *r.start() as i32 - 1, dataset.start_year() + *r.end() as i32 - 1))
}

fn write_maps(out: &mut OutDir, meta: &Metadata, axes: &Axes, results: &[CellResult], years: (i32, i32)) -> Result<()> {
    for field in Field::ALL {
        let raster = Raster::build(field, axes, results);
        out.write(&format!("{}.ppm", field.name()), &heatmap::render_ppm(field, &raster, years))?;
        out.write(&format!("{}.grid.csv", field.name()), heatmap::grid_csv(axes, &raster).as_bytes())?;
        let legend = to_json(meta, heatmap::legend(field, &raster, years))?;
        out.write(&format!("{}.legend.json", field.name()), legend.as_bytes())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct BatchSummary<'a> {
    ingest: &'a IngestReport,
    attempted: usize,
    analysed: usize,
    failed: usize,
    area: grid::AreaSummary,
}

pub fn batch(a: &BatchArgs) -> Result<()> {
    check_workers(&a.common)?;
    let all = [OutFormat::Csv, OutFormat::Json, OutFormat::Ppm];
    let formats = formats(&a.common, &all, &[OutFormat::Csv, OutFormat::Json])?;
    let dir = require_out(&a.common)?;
    let scan_cfg = scan_config(a.common.margin, false, ScanConfig::DEFAULT_CLOSENESS)?;
    let significance = match a.significance {
        SignificanceArg::Off => Significance::Off,
        SignificanceArg::Shared => {
            if a.null.noise != NoiseArg::White {
                return Err(usage("--significance shared supports white noise only; use per-cell"));
            }
            Significance::WhiteShared(sig_config(&a.null, &a.common, scan_cfg)?)
        }
        SignificanceArg::PerCell => Significance::PerCell(sig_config(&a.null, &a.common, scan_cfg)?),
    };
    let config = BatchConfig { scan: scan_cfg, significance, workers: a.common.workers };

    let (loaded, digest) = load_grid(&a.input)?;
    let dataset = &loaded.dataset;
    let years = year_span(dataset, &scan_cfg)?;
    let BatchOutput { results, failures, attempted } = trendbreak::batch_analyze(dataset, &config)?;
    for f in &failures {
        eprintln!("cell ({}, {}) failed: {}", f.lat, f.lon, f.message);
    }
    eprintln!("analysed {} of {attempted} valid land cells, {} failed", results.len(), failures.len());

    // the worker count does not change the output, so it stays out of the metadata
    let mut args = a.clone();
    args.common.workers = None;
    let meta = Metadata::new("batch", Some(a.common.seed), json!({ "args": args, "batch": BatchConfig { workers: None, ..config } }))?
        .with_input(digest);
    let mut out = OutDir::create(dir)?;
    if formats.contains(&OutFormat::Csv) {
        let mut buf = Vec::new();
        write_results(&results, &mut buf)?;
        out.write("results.csv", &buf)?;
        let mut f = String::from("lat,lon,message\n");
        for x in &failures {
            let _ = writeln!(f, "{},{},\"{}\"", x.lat, x.lon, x.message.replace('"', "'"));
        }
        out.write("failures.csv", f.as_bytes())?;
    }
    if formats.contains(&OutFormat::Json) {
        let summary = BatchSummary {
            ingest: &loaded.report,
            attempted,
            analysed: results.len(),
            failed: failures.len(),
            area: grid::summarize_area(&results, dataset),
        };
        out.write("summary.json", to_json(&meta, summary)?.as_bytes())?;
    }
    if formats.contains(&OutFormat::Ppm) {
        let axes = Axes { lats: dataset.lats().to_vec(), lons: dataset.lons().to_vec() };
        write_maps(&mut out, &meta, &axes, &results, years)?;
    }
    out.finish(&meta)
}

pub fn map(a: &MapArgs) -> Result<()> {
    formats(&a.common, &[OutFormat::Ppm], &[OutFormat::Ppm])?;
    let dir = require_out(&a.common)?;
    let (data, digest) = read_input(&a.results)?;
    let results = read_results(data.as_slice()).with_context(|| format!("reading {}", a.results.display()))?;
    let mut meta = Metadata::new("map", None, json!({ "args": a }))?.with_input(digest);
    let (axes, years) = match &a.grid {
        Some(path) => {
            let input = GridInput { grid: path.clone(), grid_format: GridFormatArg::Auto, min_days: 300 };
            let (loaded, digest) = load_grid(&input)?;
            meta = meta.with_input(digest);
            let scan_cfg = scan_config(a.common.margin, false, ScanConfig::DEFAULT_CLOSENESS)?;
            let d = &loaded.dataset;
            (Axes { lats: d.lats().to_vec(), lons: d.lons().to_vec() }, year_span(d, &scan_cfg)?)
        }
        None => {
            let lo = results.iter().map(|r| r.change_year).min().unwrap_or(0);
            let hi = results.iter().map(|r| r.change_year).max().unwrap_or(0);
            (Axes::from_results(&results), (lo, hi))
        }
    };
    let mut out = OutDir::create(dir)?;
    write_maps(&mut out, &meta, &axes, &results, years)?;
    out.finish(&meta)
}
