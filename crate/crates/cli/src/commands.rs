//! The nine pipeline subcommands. Each command validates the config,
//! acquires the output-directory lock, consults the manifest cache, does
//! its work through the core library, and records its artifacts.

use crate::config::RunConfig;
use crate::manifest::{ArtifactWriter, CommandRecord, DirLock, RunManifest};
use anyhow::{anyhow, bail, Context, Result};
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;
use triplei_core::backtest::{
    compare_universes, histogram, run_backtest, write_decile_csv, write_histogram_csv,
    write_histogram_svg, write_report_csv, BacktestReport, RiskFree,
};
use triplei_core::chart::{write_overlay_png, write_png, ChartImage};
use triplei_core::io::TensorHeader;
use triplei_core::market::{self, PricePanel};
use triplei_core::nn::checkpoint;
use triplei_core::nn::model::ResNetModel;
use triplei_core::pipeline::{
    build_dataset, compute_weight_panel, transfer_weight_panel, Ensemble,
};
use triplei_core::saliency::{localization_map, localize_raw, SaliencyParams};
use triplei_core::signals::{
    aggregate_signal, eval_alpha_grid, eval_rule, mom, parse_alpha, rank_normalize_series,
    rule_universe, str_signal, trend_features, wstr, AggregateMethod, AggregateParams,
    RuleGrid, SignalSeries,
};
use triplei_core::triple_i::{twma, WeightPanel};

/// Errors that mean "fix your config or run order", not "the run blew up".
#[derive(Debug)]
pub struct ValidationError(pub anyhow::Error);

impl std::fmt::Display for ValidationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ValidationError {}

fn validation(err: anyhow::Error) -> anyhow::Error {
    anyhow::Error::new(ValidationError(err))
}

pub const PANEL_FILE: &str = "panel.csv";

struct Ctx {
    config: RunConfig,
    hash: String,
    _lock: DirLock,
    manifest: RunManifest,
}

impl Ctx {
    fn open(config: RunConfig) -> Result<Self> {
        config.validate().map_err(validation)?;
        let hash = config.hash();
        let dir = config.output.dir.clone();
        let lock = DirLock::acquire(&dir)?;
        let manifest = RunManifest::load_or_new(&dir, &hash)?;
        Ok(Self { config, hash, _lock: lock, manifest })
    }

    fn dir(&self) -> &Path {
        &self.config.output.dir
    }

    fn cached(&self, command: &str) -> bool {
        self.manifest.is_cached(self.dir(), command, &self.hash)
    }

    fn finish(
        mut self,
        command: &str,
        writer: ArtifactWriter,
        started: Instant,
    ) -> Result<()> {
        let record = CommandRecord {
            config_hash: self.hash.clone(),
            artifacts: writer.into_artifacts(),
            wall_ms: started.elapsed().as_millis(),
        };
        self.manifest.record(command, record);
        self.manifest.save(self.dir())
    }

    fn require_artifact(&self, command: &str, producer: &str) -> Result<()> {
        if !self.cached(command) {
            bail!(validation(anyhow!(
                "missing upstream artifacts of `{command}`: run `triplei {producer}` first"
            )));
        }
        Ok(())
    }

    fn load_panel(&self) -> Result<PricePanel> {
        let path = self.dir().join(PANEL_FILE);
        market::load_panel(&path, None)
            .with_context(|| format!("loading {}", path.display()))
    }

    fn load_ensemble(&self) -> Result<Ensemble> {
        let mut models = Vec::new();
        let mut sigma = None;
        for seed in &self.config.model.seeds {
            let json = self.dir().join(format!("ckpt_s{seed}.json"));
            let bin = self.dir().join(format!("ckpt_s{seed}.bin"));
            let (model, manifest) = checkpoint::load(&json, &bin)
                .with_context(|| format!("loading checkpoint {}", json.display()))?;
            if sigma.is_none() {
                sigma = manifest.noise_sigma;
            }
            models.push(model);
        }
        let sigma = self
            .config
            .saliency
            .sigma_override
            .or(sigma)
            .unwrap_or([0.15, 0.15, 0.15]);
        Ok(Ensemble {
            models,
            saliency_b: self.config.saliency.b,
            saliency_sigma: sigma,
            seed: self.config.data.seed,
        })
    }

    fn risk_free(&self, panel: &PricePanel) -> Result<RiskFree> {
        match &self.config.backtest.risk_free_csv {
            None => Ok(RiskFree::Constant(self.config.backtest.risk_free)),
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                let mut by_date = std::collections::BTreeMap::new();
                for (i, line) in text.lines().enumerate() {
                    if i == 0 || line.trim().is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let (date, rate) = line
                        .split_once(',')
                        .ok_or_else(|| anyhow!("bad risk-free row {}", i + 1))?;
                    by_date.insert(
                        date.trim().parse::<chrono::NaiveDate>()?,
                        rate.trim().parse::<f64>()?,
                    );
                }
                let series: Vec<f64> = panel
                    .calendar()
                    .iter()
                    .map(|d| by_date.get(d).copied().unwrap_or(0.0))
                    .collect();
                Ok(RiskFree::Series(series))
            }
        }
    }

    /// Weight range: warm-up before the test window plus the window itself.
    fn weight_days(&self) -> std::ops::Range<usize> {
        let [lo, hi] = self.config.backtest.test_days;
        lo.saturating_sub(self.config.saliency.warmup_days)..hi + 1
    }
}

fn stamp(hash: &str) -> String {
    format!("# config_hash={hash}\n")
}

// ---------------------------------------------------------------- synth

pub fn cmd_synth(config: RunConfig) -> Result<()> {
    let started = Instant::now();
    let ctx = Ctx::open(config)?;
    if ctx.cached("synth") {
        println!("synth: cached");
        return Ok(());
    }
    let panel = match ctx.config.data.source.as_str() {
        "synth" => {
            let panel = market::synth_panel(
                ctx.config.data.n_stocks,
                ctx.config.data.n_days,
                ctx.config.data.seed,
                &ctx.config.regime().map_err(validation)?,
            );
            if ctx.config.data.size_filter > 0 {
                market::apply_size_filter(&panel, ctx.config.data.size_filter)?
            } else {
                panel
            }
        }
        _ => {
            let path = ctx.config.data.csv_path.clone().expect("validated");
            let (panel, summary) = market::load_panel_lenient(&path)?;
            summary.emit_stderr();
            if ctx.config.data.size_filter > 0 {
                market::apply_size_filter(&panel, ctx.config.data.size_filter)?
            } else {
                panel
            }
        }
    };
    let mut writer = ArtifactWriter::new(ctx.dir())?;
    let mut file = writer.create(PANEL_FILE)?;
    file.write_all(stamp(&ctx.hash).as_bytes())?;
    market::save_panel(&panel, &mut file)?;
    println!(
        "synth: {} stocks x {} days ({} bars)",
        panel.n_stocks(),
        panel.n_days(),
        panel.n_bars()
    );
    ctx.finish("synth", writer, started)
}

// --------------------------------------------------------------- render

pub fn cmd_render(config: RunConfig) -> Result<()> {
    let started = Instant::now();
    let ctx = Ctx::open(config)?;
    if ctx.cached("render") {
        println!("render: cached");
        return Ok(());
    }
    ctx.require_artifact("synth", "synth")?;
    let panel = ctx.load_panel()?;
    let render = ctx.config.render_spec().map_err(validation)?;
    let d = ctx.config.chart.window_d;

    let mut writer = ArtifactWriter::new(ctx.dir())?;
    let mut renderable = 0usize;
    let mut skipped = 0usize;
    for t in d - 1..panel.n_days() {
        for s in 0..panel.n_stocks() {
            if panel.window(s, t, d).is_some() {
                renderable += 1;
            } else {
                skipped += 1;
            }
        }
    }
    // sample charts from spread-out grid points
    let mut samples = 0;
    let mut t = d - 1;
    while samples < 3 && t < panel.n_days() {
        if let Ok(native) = triplei_core::chart::render_window(&panel, 0, t, &render.chart) {
            let img = ChartImage::from_native(
                &native,
                panel.stocks()[0].clone(),
                panel.calendar()[t],
                render.chart,
            );
            let file = writer.create(&format!("chart_sample_{samples}.png"))?;
            write_png(file, &native.data, native.height, native.width, &[(
                "config_hash",
                &ctx.hash,
            )])?;
            let blob = writer.create(&format!("chart_sample_{samples}.tensor"))?;
            let header = TensorHeader::f32_row_major(vec![224, 224, 3])
                .with_meta("stock", serde_json::json!(panel.stocks()[0]))
                .with_meta("end_day", serde_json::json!(panel.calendar()[t].to_string()))
                .with_meta("config_hash", serde_json::json!(ctx.hash));
            triplei_core::io::write_tensor(blob, &header, &img.tensor)?;
            samples += 1;
        }
        t += panel.n_days() / 4 + 1;
    }

    let summary = serde_json::json!({
        "config_hash": ctx.hash,
        "window_d": d,
        "structure": ctx.config.chart.structure,
        "renderable_windows": renderable,
        "skipped_windows": skipped,
        "model_side": ctx.config.chart.model_side,
    });
    writer.write_bytes("render_summary.json", serde_json::to_string_pretty(&summary)?.as_bytes())?;
    println!("render: {renderable} renderable windows, {skipped} skipped");
    ctx.finish("render", writer, started)
}

// ---------------------------------------------------------------- train

pub fn cmd_train(config: RunConfig) -> Result<()> {
    let started = Instant::now();
    let ctx = Ctx::open(config)?;
    if ctx.cached("train") {
        println!("train: cached");
        return Ok(());
    }
    ctx.require_artifact("synth", "synth")?;
    let panel = ctx.load_panel()?;
    let render = ctx.config.render_spec().map_err(validation)?;
    let [lo, hi] = ctx.config.model.train_days;
    let built = build_dataset(
        &panel,
        &render,
        ctx.config.model.horizon_r,
        lo..hi,
        ctx.config.model.stride,
    );
    if built.dataset.is_empty() {
        bail!(validation(anyhow!("no renderable training windows in days {lo}..{hi}")));
    }
    println!("train: {} images ({} skipped)", built.dataset.len(), built.skipped);

    let model_config = ctx.config.model_config().map_err(validation)?;
    let mut writer = ArtifactWriter::new(ctx.dir())?;
    for &seed in &ctx.config.model.seeds {
        let t0 = Instant::now();
        let (model, history) = train(
            &model_config,
            &built.dataset,
            &ctx.config.train_params(seed),
        )?;
        let meta = history.train_meta();
        let (json, blob) = checkpoint::encode(
            &model,
            Some(history.noise_sigma),
            &meta,
            Some(&ctx.hash),
        )?;
        writer.write_bytes(&format!("ckpt_s{seed}.json"), &json)?;
        writer.write_bytes(&format!("ckpt_s{seed}.bin"), &blob)?;
        let mut hist = writer.create(&format!("history_s{seed}.csv"))?;
        hist.write_all(stamp(&ctx.hash).as_bytes())?;
        history.write_csv(&mut hist)?;
        println!(
            "train: seed {seed}: best epoch {} val_acc {:.3} ({:.1?})",
            history.best_epoch,
            history.best_val_acc,
            t0.elapsed()
        );
    }
    ctx.finish("train", writer, started)
}

fn train(
    config: &triplei_core::nn::model::ResNetConfig,
    dataset: &triplei_core::nn::train::Dataset,
    params: &triplei_core::nn::train::TrainParams,
) -> Result<(ResNetModel<f32>, triplei_core::nn::train::TrainHistory)> {
    Ok(triplei_core::nn::train::train(config.clone(), dataset, params)?)
}

// -------------------------------------------------------------- explain

pub fn cmd_explain(config: RunConfig) -> Result<()> {
    let started = Instant::now();
    let ctx = Ctx::open(config)?;
    if ctx.cached("explain") {
        println!("explain: cached");
        return Ok(());
    }
    ctx.require_artifact("synth", "synth")?;
    ctx.require_artifact("train", "train")?;
    let panel = ctx.load_panel()?;
    let render = ctx.config.render_spec().map_err(validation)?;
    let ensemble = ctx.load_ensemble()?;

    let weights = compute_weight_panel(&ensemble, &panel, &render, ctx.weight_days())?;
    println!("explain: {} weight entries", weights.n_entries());

    let mut writer = ArtifactWriter::new(ctx.dir())?;
    let mut csv = writer.create("weights.csv")?;
    csv.write_all(stamp(&ctx.hash).as_bytes())?;
    weights.write_csv(&panel, &mut csv)?;
    let mut blob = writer.create("weights.bin")?;
    weights.write_blob(&mut blob)?;

    // heat overlays for one sample point, both classes
    let [test_lo, _] = ctx.config.backtest.test_days;
    'outer: for t in test_lo..panel.n_days() {
        for s in 0..panel.n_stocks() {
            let Ok(native) = triplei_core::chart::render_window(&panel, s, t, &render.chart)
            else {
                continue;
            };
            let Ok(raw) = render.render(&panel, s, t) else { continue };
            let params = SaliencyParams {
                b: ensemble.saliency_b,
                sigma: ensemble.saliency_sigma,
                seed: ctx.config.data.seed,
            };
            let loc = localize_raw(&ensemble.models[0], &raw, &params)?;
            let chart224 = ChartImage::from_native(
                &native,
                panel.stocks()[s].clone(),
                panel.calendar()[t],
                render.chart,
            );
            for (j, name) in [(0usize, "overlay_down.png"), (1, "overlay_up.png")] {
                let map = localization_map(&loc.matrix[j]);
                let map64: Vec<f64> = map.data.iter().map(|&v| v as f64).collect();
                let file = writer.create(name)?;
                write_overlay_png(file, &chart224.tensor, &map64, 224, 224, &[(
                    "config_hash",
                    &ctx.hash,
                )])?;
            }
            break 'outer;
        }
    }
    ctx.finish("explain", writer, started)
}

// ----------------------------------------------------- signal building

struct SignalSet {
    /// (name, original, enhanced)
    pairs: Vec<(String, SignalSeries, SignalSeries)>,
}

fn alphas_from_config(config: &RunConfig) -> Result<Vec<(String, String)>> {
    match &config.signals.alphas_file {
        None => Ok(triplei_core::signals::default_alphas()
            .into_iter()
            .map(|(n, s)| (n.to_string(), s.to_string()))
            .collect()),
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let table: std::collections::BTreeMap<String, String> =
                toml::from_str(&text).context("alphas file must be `name = \"expr\"` pairs")?;
            Ok(table.into_iter().collect())
        }
    }
}

/// Build each configured signal and its TWMA counterpart. For TREND and
/// ALPHA the regressors are enhanced and the aggregation re-run, mirroring
/// the direct enhancement of MOM/STR/WSTR.
fn build_signal_pairs(
    config: &RunConfig,
    panel: &PricePanel,
    weights: &WeightPanel,
    horizon_r: usize,
) -> Result<SignalSet> {
    let mut pairs = Vec::new();
    for name in &config.signals.list {
        match name.as_str() {
            "mom" | "str" | "wstr" => {
                let base = match name.as_str() {
                    "mom" => mom(panel),
                    "str" => str_signal(panel),
                    _ => wstr(panel),
                };
                let enhanced = twma(&base, weights);
                pairs.push((base.name.clone(), base, enhanced));
            }
            "trend" => {
                let feats = trend_features(panel, &config.signals.trend_lags);
                let params = AggregateParams {
                    smoothing: config.signals.smoothing,
                    ..AggregateParams::new(AggregateMethod::Ols, horizon_r)
                };
                let (orig, _) = aggregate_signal(panel, &feats, "TREND", &params)?;
                let enhanced_feats: Vec<SignalSeries> =
                    feats.iter().map(|f| twma(f, weights)).collect();
                let (enh, _) =
                    aggregate_signal(panel, &enhanced_feats, "twma(TREND)", &params)?;
                pairs.push(("TREND".to_string(), orig, enh));
            }
            "alpha" => {
                let defs = alphas_from_config(config)?;
                let mut feats = Vec::new();
                for (alpha_name, text) in &defs {
                    let expr = parse_alpha(text)
                        .with_context(|| format!("alpha `{alpha_name}`"))?;
                    let grid = eval_alpha_grid(&expr, panel, alpha_name);
                    feats.push(rank_normalize_series(&grid));
                }
                let params = AggregateParams {
                    smoothing: config.signals.smoothing,
                    ..AggregateParams::new(AggregateMethod::AdaptiveLasso, horizon_r)
                };
                let (orig, _) = aggregate_signal(panel, &feats, "ALPHA", &params)?;
                let enhanced_feats: Vec<SignalSeries> =
                    feats.iter().map(|f| twma(f, weights)).collect();
                let (enh, _) =
                    aggregate_signal(panel, &enhanced_feats, "twma(ALPHA)", &params)?;
                pairs.push(("ALPHA".to_string(), orig, enh));
            }
            other => bail!("unknown signal `{other}`"),
        }
    }
    Ok(SignalSet { pairs })
}

fn load_weights(ctx: &Ctx, file: &str) -> Result<WeightPanel> {
    let path = ctx.dir().join(file);
    let reader = std::fs::File::open(&path)
        .with_context(|| format!("opening {}", path.display()))?;
    Ok(WeightPanel::read_blob(reader)?)
}

// -------------------------------------------------------------- enhance

pub fn cmd_enhance(config: RunConfig) -> Result<()> {
    let started = Instant::now();
    let ctx = Ctx::open(config)?;
    if ctx.cached("enhance") {
        println!("enhance: cached");
        return Ok(());
    }
    ctx.require_artifact("synth", "synth")?;
    ctx.require_artifact("explain", "explain")?;
    let panel = ctx.load_panel()?;
    let weights = load_weights(&ctx, "weights.bin")?;
    let set = build_signal_pairs(&ctx.config, &panel, &weights, ctx.config.backtest.holding_r)?;

    let mut writer = ArtifactWriter::new(ctx.dir())?;
    for (name, original, enhanced) in &set.pairs {
        let slug = name.to_lowercase().replace(['(', ')'], "");
        for (kind, series) in [("original", original), ("twma", enhanced)] {
            let mut file = writer.create(&format!("signals/{kind}_{slug}.csv"))?;
            file.write_all(stamp(&ctx.hash).as_bytes())?;
            series.write_csv(&panel, &mut file)?;
        }
        println!(
            "enhance: {name}: original {} values, twma {} values",
            original.n_defined(),
            enhanced.n_defined()
        );
    }
    ctx.finish("enhance", writer, started)
}

// ------------------------------------------------------------- backtest

pub fn cmd_backtest(config: RunConfig) -> Result<()> {
    let started = Instant::now();
    let ctx = Ctx::open(config)?;
    if ctx.cached("backtest") {
        println!("backtest: cached");
        return Ok(());
    }
    ctx.require_artifact("synth", "synth")?;
    ctx.require_artifact("explain", "explain")?;
    let panel = ctx.load_panel()?;
    let weights = load_weights(&ctx, "weights.bin")?;
    let set = build_signal_pairs(&ctx.config, &panel, &weights, ctx.config.backtest.holding_r)?;
    let rf = ctx.risk_free(&panel)?;
    let [lo, hi] = ctx.config.backtest.test_days;

    let mut reports: Vec<BacktestReport> = Vec::new();
    for (name, original, enhanced) in &set.pairs {
        let r = ctx.config.backtest.holding_r;
        match run_backtest(original, &panel, r, &rf, (lo, hi)) {
            Ok(rep) => reports.push(rep),
            Err(e) => eprintln!("backtest: {name} original skipped: {e}"),
        }
        match run_backtest(enhanced, &panel, r, &rf, (lo, hi)) {
            Ok(mut rep) => {
                rep.strategy = format!("{}:{}", ctx.config.strategy_tag(), rep.strategy);
                reports.push(rep);
            }
            Err(e) => eprintln!("backtest: {name} twma skipped: {e}"),
        }
    }
    if reports.is_empty() {
        bail!("no strategy produced a backtest");
    }

    let mut writer = ArtifactWriter::new(ctx.dir())?;
    let mut csv = writer.create("backtest_reports.csv")?;
    csv.write_all(stamp(&ctx.hash).as_bytes())?;
    write_report_csv(&reports, &mut csv)?;
    let mut deciles = writer.create("decile_table.csv")?;
    deciles.write_all(stamp(&ctx.hash).as_bytes())?;
    write_decile_csv(&reports, &mut deciles)?;
    let json = serde_json::json!({
        "config_hash": ctx.hash,
        "strategy_tag": ctx.config.strategy_tag(),
        "reports": reports,
    });
    writer.write_bytes("backtest_reports.json", serde_json::to_string_pretty(&json)?.as_bytes())?;
    for r in &reports {
        println!(
            "backtest: {:<28} ret {:+.3} sharpe {} turnover {}",
            r.strategy,
            r.annualized_return,
            r.sharpe.map(|v| format!("{v:+.2}")).unwrap_or_else(|| "NA".into()),
            r.monthly_turnover
                .map(|v| format!("{:.0}%", v * 100.0))
                .unwrap_or_else(|| "NA".into()),
        );
    }
    ctx.finish("backtest", writer, started)
}

// ---------------------------------------------------------------- rules

pub fn cmd_rules(config: RunConfig) -> Result<()> {
    let started = Instant::now();
    let ctx = Ctx::open(config)?;
    if ctx.cached("rules") {
        println!("rules: cached");
        return Ok(());
    }
    ctx.require_artifact("synth", "synth")?;
    ctx.require_artifact("explain", "explain")?;
    let panel = ctx.load_panel()?;
    let weights = load_weights(&ctx, "weights.bin")?;
    let rf = ctx.risk_free(&panel)?;
    let [lo, hi] = ctx.config.backtest.test_days;
    let r = ctx.config.backtest.holding_r;

    let grid = match ctx.config.rules.grid.as_str() {
        "full" => RuleGrid::full(),
        _ => RuleGrid::desk(),
    };
    let mut rules = rule_universe(&grid)?;
    if ctx.config.rules.max_rules > 0 {
        rules.truncate(ctx.config.rules.max_rules);
    }

    let mut original_sr: Vec<(String, f64)> = Vec::new();
    let mut twma_sr: Vec<(String, f64)> = Vec::new();
    let mut skipped = 0usize;
    for rule in &rules {
        let base = eval_rule(rule, &panel);
        let enhanced = twma(&base, &weights);
        let a = run_backtest(&base, &panel, r, &rf, (lo, hi));
        let b = run_backtest(&enhanced, &panel, r, &rf, (lo, hi));
        match (a, b) {
            (Ok(ra), Ok(rb)) => match (ra.sharpe, rb.sharpe) {
                (Some(sa), Some(sb)) => {
                    original_sr.push((rule.id.clone(), sa));
                    twma_sr.push((rule.id.clone(), sb));
                }
                _ => skipped += 1,
            },
            _ => skipped += 1,
        }
    }
    if original_sr.len() < 2 {
        bail!("fewer than two rules produced paired Sharpe ratios");
    }
    let comparison = compare_universes(&twma_sr, &original_sr)?;
    println!(
        "rules: {} paired ({} skipped): mean SR twma {:+.3} vs original {:+.3}, p {:?}",
        original_sr.len(),
        skipped,
        comparison.mean_a,
        comparison.mean_b,
        comparison.p_value
    );

    let mut writer = ArtifactWriter::new(ctx.dir())?;
    let mut csv = writer.create("rules_sr.csv")?;
    csv.write_all(stamp(&ctx.hash).as_bytes())?;
    writeln!(csv, "rule_id,original_sr,twma_sr")?;
    for ((id, a), (_, b)) in original_sr.iter().zip(&twma_sr) {
        writeln!(csv, "{id},{a},{b}")?;
    }
    for (name, values) in [
        ("original", original_sr.iter().map(|(_, v)| *v).collect::<Vec<f64>>()),
        ("twma", twma_sr.iter().map(|(_, v)| *v).collect::<Vec<f64>>()),
    ] {
        let bins = histogram(&values, 24);
        let mut hist_csv = writer.create(&format!("rules_hist_{name}.csv"))?;
        hist_csv.write_all(stamp(&ctx.hash).as_bytes())?;
        write_histogram_csv(&bins, &mut hist_csv)?;
        let mut svg = writer.create(&format!("rules_hist_{name}.svg"))?;
        writeln!(svg, "<!-- config_hash={} -->", ctx.hash)?;
        write_histogram_svg(&bins, &format!("{name} rule Sharpe ratios"), &mut svg)?;
    }
    let json = serde_json::json!({
        "config_hash": ctx.hash,
        "n_rules": original_sr.len(),
        "skipped": skipped,
        "comparison": comparison,
    });
    writer.write_bytes("rules_ttest.json", serde_json::to_string_pretty(&json)?.as_bytes())?;
    ctx.finish("rules", writer, started)
}

// ------------------------------------------------------------- transfer

pub fn cmd_transfer(config: RunConfig) -> Result<()> {
    let started = Instant::now();
    let ctx = Ctx::open(config)?;
    if ctx.cached("transfer") {
        println!("transfer: cached");
        return Ok(());
    }
    ctx.require_artifact("synth", "synth")?;
    ctx.require_artifact("train", "train")?;
    let panel = ctx.load_panel()?;
    let render = ctx.config.render_spec().map_err(validation)?;
    let ensemble = ctx.load_ensemble()?;
    let period = ctx.config.transfer.period;
    let holding = ctx.config.chart.window_d * period;

    let weights = transfer_weight_panel(&ensemble, &panel, &render, period, ctx.weight_days())?;
    println!("transfer: {} weight entries over {period}-day periods", weights.n_entries());

    let set = build_signal_pairs(&ctx.config, &panel, &weights, holding)?;
    let rf = ctx.risk_free(&panel)?;
    let [lo, hi] = ctx.config.backtest.test_days;
    let mut reports = Vec::new();
    for (name, original, enhanced) in &set.pairs {
        match run_backtest(original, &panel, holding, &rf, (lo, hi)) {
            Ok(rep) => reports.push(rep),
            Err(e) => eprintln!("transfer: {name} original skipped: {e}"),
        }
        match run_backtest(enhanced, &panel, holding, &rf, (lo, hi)) {
            Ok(mut rep) => {
                rep.strategy = format!("transfer:{}", rep.strategy);
                reports.push(rep);
            }
            Err(e) => eprintln!("transfer: {name} twma skipped: {e}"),
        }
    }
    if reports.is_empty() {
        bail!("no transfer strategy produced a backtest");
    }

    let mut writer = ArtifactWriter::new(ctx.dir())?;
    let mut blob = writer.create("transfer_weights.bin")?;
    weights.write_blob(&mut blob)?;
    let mut csv = writer.create("transfer_report.csv")?;
    csv.write_all(stamp(&ctx.hash).as_bytes())?;
    write_report_csv(&reports, &mut csv)?;
    for r in &reports {
        println!(
            "transfer: {:<28} ret {:+.3} sharpe {}",
            r.strategy,
            r.annualized_return,
            r.sharpe.map(|v| format!("{v:+.2}")).unwrap_or_else(|| "NA".into()),
        );
    }
    ctx.finish("transfer", writer, started)
}

// --------------------------------------------------------------- report

pub fn cmd_report(config: RunConfig) -> Result<()> {
    let started = Instant::now();
    let ctx = Ctx::open(config)?;
    if ctx.cached("report") {
        println!("report: cached");
        return Ok(());
    }
    ctx.require_artifact("backtest", "backtest")?;

    let mut sections: Vec<(String, Vec<(String, String, String, String)>)> = Vec::new();
    let parse_report_csv = |path: &Path| -> Result<Vec<(String, String, String, String)>> {
        let text = std::fs::read_to_string(path)?;
        let mut rows = Vec::new();
        for line in text.lines().skip_while(|l| l.starts_with('#')).skip(1) {
            let mut parts = line.split(',');
            let (Some(name), Some(ret), Some(sr), Some(to)) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                continue;
            };
            rows.push((name.into(), ret.into(), sr.into(), to.into()));
        }
        Ok(rows)
    };
    sections.push((
        format!("holding period R={}", ctx.config.backtest.holding_r),
        parse_report_csv(&ctx.dir().join("backtest_reports.csv"))?,
    ));
    let transfer_path = ctx.dir().join("transfer_report.csv");
    if transfer_path.exists() {
        sections.push((
            format!(
                "time-scale transfer (R={})",
                ctx.config.chart.window_d * ctx.config.transfer.period
            ),
            parse_report_csv(&transfer_path)?,
        ));
    }

    let mut writer = ArtifactWriter::new(ctx.dir())?;
    let mut csv = writer.create("report.csv")?;
    csv.write_all(stamp(&ctx.hash).as_bytes())?;
    writeln!(csv, "section,strategy,annualized_return,sharpe,monthly_turnover")?;
    for (section, rows) in &sections {
        for (name, ret, sr, to) in rows {
            writeln!(csv, "{section},{name},{ret},{sr},{to}")?;
        }
    }

    let mut txt = writer.create("report.txt")?;
    writeln!(txt, "run {}  config {}", ctx.config.strategy_tag(), ctx.hash)?;
    for (section, rows) in &sections {
        writeln!(txt, "\n== {section} ==")?;
        writeln!(txt, "{:<34} {:>10} {:>8} {:>10}", "strategy", "Ret", "SR", "TO")?;
        for (name, ret, sr, to) in rows {
            let fmt_num = |s: &str, pct: bool| -> String {
                s.parse::<f64>()
                    .map(|v| {
                        if pct {
                            format!("{:.0}%", v * 100.0)
                        } else {
                            format!("{v:+.2}")
                        }
                    })
                    .unwrap_or_else(|_| s.to_string())
            };
            writeln!(
                txt,
                "{:<34} {:>10} {:>8} {:>10}",
                name,
                fmt_num(ret, false),
                fmt_num(sr, false),
                fmt_num(to, true)
            )?;
        }
    }
    if let Ok(ttest) = std::fs::read_to_string(ctx.dir().join("rules_ttest.json")) {
        writeln!(txt, "\n== trading-rule universe ==")?;
        writeln!(txt, "{ttest}")?;
    }
    println!("report: written");
    ctx.finish("report", writer, started)
}
