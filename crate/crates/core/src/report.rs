//! Corpus-pair comparison: per-session metrics, descriptive statistics,
//! split-half stability, Mann-Whitney U tests and feature importance,
//! assembled into one report and rendered as JSON, CSV or Markdown.

use std::fmt::Write as _;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::MetricConfig;
use crate::embed::HashingEmbedder;
use crate::error::{Error, Result};
use crate::fidelity::{adherence_summary, violation_summary, AdherenceSummary, FidelityAnnotation, ViolationSummary};
use crate::lm::{self, NGramModel};
use crate::pe::{compute_pe_metrics, EmotionLexicon, PEMetricVector, PatternRuleSet, PeResources, RuleGroup, Stopwords};
use crate::stats::correlation::{split_half_correlation, split_half_sessions};
use crate::stats::importance::{feature_importance, ImportanceResult};
use crate::stats::mwu::{mann_whitney_u_with, TestMethod, DEFAULT_EXACT_THRESHOLD};
use crate::structural::{compute_metric_vector, mean_sd, MetricVector};
use crate::transcript::{Corpus, CorpusLabel, CueLexicon, Session};

pub const MIN_CORPUS_SESSIONS: usize = 3;

/// Lexical resources shared by every session computation.
#[derive(Debug, Clone, Default)]
pub struct Resources {
    pub lexicon: EmotionLexicon,
    pub rules: PatternRuleSet,
    pub stopwords: Stopwords,
    pub cues: CueLexicon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub metrics: MetricConfig,
    pub seed: u64,
    pub exact_threshold: usize,
    /// Worker threads for per-session computation; `None` uses all cores.
    #[serde(skip)]
    pub workers: Option<usize>,
    pub importance: bool,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            metrics: MetricConfig::default(),
            seed: 0,
            exact_threshold: DEFAULT_EXACT_THRESHOLD,
            workers: None,
            importance: true,
        }
    }
}

/// Metrics for one normalized session and its two exchange halves.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionMetrics {
    pub session_id: String,
    pub corpus_label: CorpusLabel,
    pub system: Option<MetricVector>,
    pub system_error: Option<String>,
    pub pe: PEMetricVector,
    halves: Option<(Option<MetricVector>, Option<MetricVector>, PEMetricVector, PEMetricVector)>,
}

impl SessionMetrics {
    pub fn system_value(&self, name: &str) -> Option<f64> {
        self.system.as_ref().and_then(|v| v.get(name)).filter(|x| x.is_finite())
    }

    pub fn pe_value(&self, name: &str) -> Option<f64> {
        self.pe.get(name).flatten().filter(|x| x.is_finite())
    }
}

struct Engine<'a> {
    model: &'a NGramModel,
    embedder: HashingEmbedder,
    resources: &'a Resources,
    config: &'a MetricConfig,
}

impl Engine<'_> {
    fn pe(&self, s: &Session) -> PEMetricVector {
        let res = PeResources {
            lexicon: &self.resources.lexicon,
            rules: &self.resources.rules,
            stopwords: &self.resources.stopwords,
            embedder: &self.embedder,
            engagement_threshold: self.config.engagement_threshold,
        };
        compute_pe_metrics(s, &res)
    }

    fn session(&self, s: &Session, with_halves: bool) -> SessionMetrics {
        let system = compute_metric_vector(s, self.model, &self.embedder, self.config);
        let halves = with_halves.then(|| {
            let (a, b) = split_half_sessions(s);
            let sys = |h: &Session| compute_metric_vector(h, self.model, &self.embedder, self.config).ok();
            (sys(&a), sys(&b), self.pe(&a), self.pe(&b))
        });
        SessionMetrics {
            session_id: s.session_id.clone(),
            corpus_label: s.corpus_label,
            system_error: system.as_ref().err().map(ToString::to_string),
            system: system.ok(),
            pe: self.pe(s),
            halves,
        }
    }
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(Error::InvalidParameter("workers must be positive".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Invariant(format!("thread pool: {e}")))
}

fn normalize_all(corpus: &Corpus, cues: &CueLexicon) -> Result<Corpus> {
    let sessions = corpus
        .sessions
        .par_iter()
        .map(|s| crate::transcript::normalize_session(s, cues))
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus { label: corpus.label, sessions })
}

fn compute_all(engine: &Engine<'_>, corpus: &Corpus, with_halves: bool) -> Vec<SessionMetrics> {
    corpus.sessions.par_iter().map(|s| engine.session(s, with_halves)).collect()
}

/// Per-session metrics for one corpus, scored against a model trained on
/// the corpus itself. Results follow corpus order.
pub fn analyze_corpus(corpus: &Corpus, resources: &Resources, config: &ReportConfig) -> Result<Vec<SessionMetrics>> {
    config.metrics.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    pool(config.workers)?.install(|| {
        let corpus = normalize_all(corpus, &resources.cues)?;
        let model = lm::train(&corpus, config.metrics.lm_order, config.metrics.lm_alpha)?;
        let engine = Engine {
            model: &model,
            embedder: HashingEmbedder::new(config.metrics.embedder_dimension, config.metrics.embedder_seed),
            resources,
            config: &config.metrics,
        };
        Ok(compute_all(&engine, &corpus, false))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricBlock {
    pub metric_name: String,
    pub real_mean: Option<f64>,
    pub real_sd: Option<f64>,
    pub synth_mean: Option<f64>,
    pub synth_sd: Option<f64>,
    pub real_rho: Option<f64>,
    pub synth_rho: Option<f64>,
    pub u_statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub method: Option<TestMethod>,
    /// Sessions with the metric defined.
    pub n_real: usize,
    pub n_synth: usize,
    /// Why the block carries no test, when it does not.
    pub skipped: Option<String>,
    /// Why a split-half correlation is undefined, per corpus.
    pub rho_note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceSection {
    pub result: Option<ImportanceResult>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelitySection {
    pub adherence: AdherenceSummary,
    pub violations: ViolationSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub real_sessions: usize,
    pub synth_sessions: usize,
    pub tool_version: String,
    pub exact_threshold: usize,
    pub lexicon: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub metric_blocks: Vec<MetricBlock>,
    pub pe_blocks: Vec<MetricBlock>,
    pub importance: ImportanceSection,
    pub fidelity: Option<FidelitySection>,
    /// Sessions whose system metrics are undefined, with the reason.
    pub excluded_sessions: Vec<(String, String)>,
    pub provenance: Provenance,
}

fn config_hash(config: &ReportConfig, resources: &Resources) -> Result<String> {
    let mut lexicon: Vec<(&str, f64)> =
        resources.lexicon.words().map(|w| (w, resources.lexicon.weight(w).unwrap_or(0.0))).collect();
    lexicon.sort_by(|a, b| a.0.cmp(b.0));
    let rules: Vec<(&str, &[String])> =
        RuleGroup::ALL.iter().map(|&g| (g.key(), resources.rules.patterns(g))).collect();
    let fingerprint = serde_json::json!({
        "config": config,
        "lexicon": lexicon,
        "rules": rules,
        "redirection_window": resources.rules.redirection_window,
        "cues": resources.cues,
    });
    let bytes = serde_json::to_vec(&fingerprint)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn block(
    name: &str,
    real: &[SessionMetrics],
    synth: &[SessionMetrics],
    value: impl Fn(&SessionMetrics) -> Option<f64>,
    halves: impl Fn(&SessionMetrics) -> (Option<f64>, Option<f64>),
    exact_threshold: usize,
) -> Result<MetricBlock> {
    let rv: Vec<f64> = real.iter().filter_map(&value).collect();
    let sv: Vec<f64> = synth.iter().filter_map(&value).collect();
    let (rm, rs) = mean_sd(&rv).unzip();
    let (sm, ss) = mean_sd(&sv).unzip();
    let rh: Vec<_> = real.iter().map(&halves).collect();
    let sh: Vec<_> = synth.iter().map(&halves).collect();
    let rc = split_half_correlation(name, CorpusLabel::Real, &rh);
    let sc = split_half_correlation(name, CorpusLabel::Synthetic, &sh);
    let rho_note = match (&rc.note, &sc.note) {
        (None, None) => None,
        (r, s) => Some(
            [r.as_ref().map(|n| format!("real: {n}")), s.as_ref().map(|n| format!("synthetic: {n}"))]
                .into_iter()
                .flatten()
                .collect::<Vec<_>>()
                .join("; "),
        ),
    };
    let mut b = MetricBlock {
        metric_name: name.to_string(),
        real_mean: rm,
        real_sd: rs,
        synth_mean: sm,
        synth_sd: ss,
        real_rho: rc.rho,
        synth_rho: sc.rho,
        u_statistic: None,
        p_value: None,
        method: None,
        n_real: rv.len(),
        n_synth: sv.len(),
        skipped: None,
        rho_note,
    };
    if rv.is_empty() || sv.is_empty() {
        let which = match (rv.is_empty(), sv.is_empty()) {
            (true, true) => "both corpora",
            (true, false) => "the real corpus",
            _ => "the synthetic corpus",
        };
        b.skipped = Some(format!("metric undefined for every session in {which}"));
    } else {
        let t = mann_whitney_u_with(&rv, &sv, exact_threshold)?;
        b.u_statistic = Some(t.u_statistic);
        b.p_value = Some(t.p_value);
        b.method = Some(t.method);
    }
    Ok(b)
}

fn finite(x: Option<f64>) -> Option<f64> {
    x.filter(|v| v.is_finite())
}

/// Full comparison of a real and a synthetic corpus. Deterministic for a
/// fixed configuration (including seed), whatever the worker count.
pub fn build_report(
    real: &Corpus,
    synth: &Corpus,
    resources: &Resources,
    config: &ReportConfig,
    annotations: Option<&[FidelityAnnotation]>,
) -> Result<ComparisonReport> {
    config.metrics.validate()?;
    for (name, c) in [("real", real), ("synthetic", synth)] {
        if c.len() < MIN_CORPUS_SESSIONS {
            return Err(Error::CorpusTooSmall(format!(
                "the {name} corpus has {} sessions; at least {MIN_CORPUS_SESSIONS} are required",
                c.len()
            )));
        }
    }
    let m = &config.metrics;
    let (real_m, synth_m) = pool(config.workers)?.install(|| -> Result<_> {
        let real = normalize_all(real, &resources.cues)?;
        let synth = normalize_all(synth, &resources.cues)?;
        let model = lm::train_reference(&real, &synth, m.lm_order, m.lm_alpha, config.seed)?;
        let engine = Engine {
            model: &model,
            embedder: HashingEmbedder::new(m.embedder_dimension, m.embedder_seed),
            resources,
            config: m,
        };
        Ok((compute_all(&engine, &real, true), compute_all(&engine, &synth, true)))
    })?;

    let mut metric_blocks = Vec::with_capacity(MetricVector::NAMES.len());
    for &name in MetricVector::NAMES {
        let sys_half = |h: &Option<MetricVector>| finite(h.as_ref().and_then(|v| v.get(name)));
        metric_blocks.push(block(
            name,
            &real_m,
            &synth_m,
            |s| s.system_value(name),
            |s| s.halves.as_ref().map_or((None, None), |h| (sys_half(&h.0), sys_half(&h.1))),
            config.exact_threshold,
        )?);
    }
    let mut pe_blocks = Vec::with_capacity(PEMetricVector::NAMES.len());
    for &name in PEMetricVector::NAMES {
        let pe_half = |v: &PEMetricVector| finite(v.get(name).flatten());
        pe_blocks.push(block(
            name,
            &real_m,
            &synth_m,
            |s| s.pe_value(name),
            |s| s.halves.as_ref().map_or((None, None), |h| (pe_half(&h.2), pe_half(&h.3))),
            config.exact_threshold,
        )?);
    }

    let importance = if !config.importance {
        ImportanceSection { result: None, skipped: Some("disabled by configuration".into()) }
    } else {
        let rows = |ms: &[SessionMetrics]| -> Vec<Vec<f64>> {
            ms.iter().filter_map(|s| s.system.as_ref().map(MetricVector::values)).collect()
        };
        match feature_importance(MetricVector::NAMES, &rows(&real_m), &rows(&synth_m), config.seed) {
            Ok(r) => ImportanceSection { result: Some(r), skipped: None },
            Err(e @ Error::CorpusTooSmall(_)) => ImportanceSection { result: None, skipped: Some(e.to_string()) },
            Err(e) => return Err(e),
        }
    };

    let fidelity = annotations.map(|a| FidelitySection {
        adherence: adherence_summary(a),
        violations: violation_summary(a),
    });
    let excluded_sessions = real_m
        .iter()
        .chain(&synth_m)
        .filter_map(|s| s.system_error.as_ref().map(|e| (s.session_id.clone(), e.clone())))
        .collect();

    Ok(ComparisonReport {
        metric_blocks,
        pe_blocks,
        importance,
        fidelity,
        excluded_sessions,
        provenance: Provenance {
            config_hash: config_hash(config, resources)?,
            seed: config.seed,
            real_sessions: real.len(),
            synth_sessions: synth.len(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            exact_threshold: config.exact_threshold,
            lexicon: format!("{}@{}", resources.lexicon.name, resources.lexicon.version),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Markdown,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "md" | "markdown" => Ok(Format::Markdown),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

impl Format {
    /// Infer the format from a file extension.
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        path.extension()
            .and_then(|e| e.to_str())
            .ok_or_else(|| Error::UnknownFormat(path.display().to_string()))?
            .parse()
    }
}

pub fn render(report: &ComparisonReport, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => Ok(canonical_json(&serde_json::to_value(report)?).into_bytes()),
        Format::Csv => render_csv(report),
        Format::Markdown => Ok(render_markdown(report).into_bytes()),
    }
}

/// Six significant digits, shortest form: plain decimals for magnitudes in
/// [1e-4, 1e6), exponent form otherwise. Rendering the parsed output again
/// gives the same text.
pub fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return "null".into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let rounded: f64 = sci.parse().expect("valid float");
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{rounded:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Pretty-printed JSON with sorted keys, two-space indent, fixed float
/// formatting and a trailing newline.
pub fn canonical_json(value: &Value) -> String {
    fn write(v: &Value, indent: usize, out: &mut String) {
        let pad = |n: usize| "  ".repeat(n);
        match v {
            Value::Null => out.push_str("null"),
            Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Value::Number(n) => {
                if n.is_u64() || n.is_i64() {
                    out.push_str(&n.to_string());
                } else {
                    out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
                }
            }
            Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
            Value::Array(items) => {
                if items.is_empty() {
                    out.push_str("[]");
                    return;
                }
                out.push_str("[\n");
                for (i, item) in items.iter().enumerate() {
                    out.push_str(&pad(indent + 1));
                    write(item, indent + 1, out);
                    out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
                }
                out.push_str(&pad(indent));
                out.push(']');
            }
            Value::Object(map) => {
                if map.is_empty() {
                    out.push_str("{}");
                    return;
                }
                let mut keys: Vec<&String> = map.keys().collect();
                keys.sort();
                out.push_str("{\n");
                for (i, k) in keys.iter().enumerate() {
                    out.push_str(&pad(indent + 1));
                    out.push_str(&Value::String((*k).clone()).to_string());
                    out.push_str(": ");
                    write(&map[*k], indent + 1, out);
                    out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
                }
                out.push_str(&pad(indent));
                out.push('}');
            }
        }
    }
    let mut out = String::new();
    write(value, 0, &mut out);
    out.push('\n');
    out
}

fn opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

fn method_key(m: Option<TestMethod>) -> &'static str {
    match m {
        Some(TestMethod::Exact) => "exact",
        Some(TestMethod::NormalApprox) => "normal_approx",
        None => "",
    }
}

fn render_csv(report: &ComparisonReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "section", "metric_name", "real_mean", "real_sd", "synth_mean", "synth_sd", "real_rho",
        "synth_rho", "u_statistic", "p_value", "method", "n_real", "n_synth", "skipped",
    ])?;
    let sections = [("system", &report.metric_blocks), ("pe", &report.pe_blocks)];
    for (section, blocks) in sections {
        for b in blocks {
            w.write_record([
                section.to_string(),
                b.metric_name.clone(),
                opt(b.real_mean),
                opt(b.real_sd),
                opt(b.synth_mean),
                opt(b.synth_sd),
                opt(b.real_rho),
                opt(b.synth_rho),
                opt(b.u_statistic),
                opt(b.p_value),
                method_key(b.method).to_string(),
                b.n_real.to_string(),
                b.n_synth.to_string(),
                b.skipped.clone().unwrap_or_default(),
            ])?;
        }
    }
    w.into_inner().map_err(|e| Error::Invariant(format!("csv buffer: {e}")))
}

/// p-values below 1e-10 print as "p < 0.001" (see the table footnote);
/// other small values use exponent form.
pub fn format_p(p: f64) -> String {
    if p < 1e-10 {
        "p < 0.001".into()
    } else if p < 0.001 {
        format!("{p:.2e}")
    } else {
        format!("{p:.3}")
    }
}

fn format_u(u: f64) -> String {
    if u.abs() >= 1000.0 {
        let exp = u.abs().log10().floor() as i32;
        format!("{:.2} × 10^{exp}", u / 10f64.powi(exp))
    } else {
        format!("{u:.2}")
    }
}

fn mean_pm_sd(mean: Option<f64>, sd: Option<f64>) -> String {
    match (mean, sd) {
        (Some(m), Some(s)) => format!("{m:.2} ± {s:.2}"),
        _ => "—".into(),
    }
}

fn rho(r: Option<f64>) -> String {
    r.map_or("—".into(), |r| format!("{r:.2}"))
}

fn render_markdown(report: &ComparisonReport) -> String {
    let mut md = String::new();
    let p = &report.provenance;
    let _ = writeln!(md, "# Real vs. synthetic corpus comparison\n");
    let _ = writeln!(
        md,
        "Real sessions: {} · Synthetic sessions: {} · Seed: {} · Config: `{}` · pebench {}\n",
        p.real_sessions,
        p.synth_sessions,
        p.seed,
        &p.config_hash[..12.min(p.config_hash.len())],
        p.tool_version
    );

    let _ = writeln!(md, "## System-level metrics\n");
    let _ = writeln!(md, "| Metric | Real | Synthetic | Real ρ | Synth. ρ |");
    let _ = writeln!(md, "|---|---|---|---|---|");
    for b in &report.metric_blocks {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} |",
            b.metric_name,
            mean_pm_sd(b.real_mean, b.real_sd),
            mean_pm_sd(b.synth_mean, b.synth_sd),
            rho(b.real_rho),
            rho(b.synth_rho)
        );
    }
    let _ = writeln!(md, "\nValues are mean ± population standard deviation; ρ is split-half Spearman stability.\n");

    let tests = |md: &mut String, title: &str, blocks: &[MetricBlock]| {
        let _ = writeln!(md, "## {title}\n");
        let _ = writeln!(md, "| Metric | U statistic | p-value |");
        let _ = writeln!(md, "|---|---|---|");
        for b in blocks {
            let (u, pv) = match (b.u_statistic, b.p_value) {
                (Some(u), Some(pv)) => {
                    let shown = format_p(pv);
                    let shown = if pv < 0.05 { format!("**{shown}**") } else { shown };
                    (format_u(u), shown)
                }
                _ => ("—".into(), format!("skipped: {}", b.skipped.as_deref().unwrap_or("undefined"))),
            };
            let _ = writeln!(md, "| {} | {u} | {pv} |", b.metric_name);
        }
        let _ = writeln!(md, "\nTwo-sided Mann-Whitney U. p < 0.001 indicates p < 10^-10.\n");
    };
    tests(&mut md, "Mann-Whitney U tests: system-level metrics", &report.metric_blocks);

    let _ = writeln!(md, "## PE fidelity metrics\n");
    let _ = writeln!(md, "| Metric | Real | Synthetic |");
    let _ = writeln!(md, "|---|---|---|");
    for b in &report.pe_blocks {
        let _ = writeln!(
            md,
            "| {} | {} | {} |",
            b.metric_name,
            mean_pm_sd(b.real_mean, b.real_sd),
            mean_pm_sd(b.synth_mean, b.synth_sd)
        );
    }
    md.push('\n');
    tests(&mut md, "Mann-Whitney U tests: PE fidelity metrics", &report.pe_blocks);

    let _ = writeln!(md, "## Feature importance\n");
    match (&report.importance.result, &report.importance.skipped) {
        (Some(r), _) => {
            let _ = writeln!(md, "| Feature | Importance score (%) |");
            let _ = writeln!(md, "|---|---|");
            for e in &r.entries {
                let _ = writeln!(md, "| {} | {:.2} |", e.feature_name, e.importance_pct);
            }
            let _ = writeln!(
                md,
                "\nOut-of-bag permutation importance of a bagged decision-tree classifier (OOB accuracy {:.3}).",
                r.oob_accuracy
            );
            if r.degenerate {
                let _ = writeln!(md, "\n**Warning:** every feature scored zero; attribution is uniform.");
            }
            md.push('\n');
        }
        (None, reason) => {
            let _ = writeln!(md, "Skipped: {}\n", reason.as_deref().unwrap_or("not computed"));
        }
    }

    if let Some(f) = &report.fidelity {
        let _ = writeln!(md, "## Clinician fidelity annotations\n");
        let a = &f.adherence;
        let _ = writeln!(
            md,
            "Annotations: {} · scored: {} · mean adherence: {}\n",
            a.annotations,
            a.scored,
            a.mean.map_or("—".into(), |m| format!("{m:.2}"))
        );
        let _ = writeln!(md, "| Category | Count | Session rate |");
        let _ = writeln!(md, "|---|---|---|");
        for (cat, s) in f.violations.violations.iter().chain(&f.violations.adherent) {
            let _ = writeln!(md, "| {} | {} | {:.2} |", cat.key(), s.count, s.session_rate);
        }
        md.push('\n');
    }

    if !report.excluded_sessions.is_empty() {
        let _ = writeln!(md, "## Excluded sessions\n");
        for (id, why) in &report.excluded_sessions {
            let _ = writeln!(md, "- `{id}`: {why}");
        }
        md.push('\n');
    }
    md
}

/// Per-session metric rows: identifiers, the system metrics, then the PE
/// metrics. Undefined values are empty cells.
pub fn write_session_csv<W: Write>(rows: &[SessionMetrics], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["session_id", "corpus_label"];
    header.extend(MetricVector::NAMES);
    header.extend(PEMetricVector::NAMES);
    header.push("error");
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.session_id.clone(), r.corpus_label.to_string()];
        for &n in MetricVector::NAMES {
            rec.push(opt(r.system_value(n)));
        }
        for &n in PEMetricVector::NAMES {
            rec.push(opt(r.pe_value(n)));
        }
        rec.push(r.system_error.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{generate_corpus, SimParams};

    #[test]
    fn float_format_is_stable() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (800.0, "800"),
            (0.123456789, "0.123457"),
            (123456.7, "123457"),
            (999999.7, "1e6"),
            (0.0001, "0.0001"),
            (0.00001234567, "1.23457e-5"),
            (3e-12, "3e-12"),
            (-2.5, "-2.5"),
            (1.8267179e-4, "0.000182672"),
        ];
        for (x, s) in cases {
            assert_eq!(format_float(x), s, "{x}");
            let back: f64 = s.parse().unwrap();
            assert_eq!(format_float(back), s);
        }
    }

    #[test]
    fn p_display_convention() {
        assert_eq!(format_p(3e-12), "p < 0.001");
        assert_eq!(format_p(0.0732), "0.073");
        assert_eq!(format_p(2e-5), "2.00e-5");
    }

    #[test]
    fn format_parsing() {
        assert_eq!("JSON".parse::<Format>().unwrap(), Format::Json);
        assert_eq!(Format::from_path(std::path::Path::new("r.md")).unwrap(), Format::Markdown);
        assert!(matches!("xml".parse::<Format>(), Err(Error::UnknownFormat(_))));
    }

    #[test]
    fn small_self_comparison() {
        let c = generate_corpus(&SimParams { session_count: 12, ..SimParams::default() }).unwrap();
        let cfg = ReportConfig { workers: Some(2), ..ReportConfig::default() };
        let r = build_report(&c, &c, &Resources::default(), &cfg, None).unwrap();
        assert_eq!(r.metric_blocks.len(), 21);
        assert_eq!(r.pe_blocks.len(), 10);
        for b in r.metric_blocks.iter().chain(&r.pe_blocks) {
            if let Some(p) = b.p_value {
                assert!(p >= 0.99, "{}: {p}", b.metric_name);
                assert_eq!(b.real_mean, b.synth_mean);
            }
        }
        let json = render(&r, Format::Json).unwrap();
        let reparsed: Value = serde_json::from_slice(&json).unwrap();
        assert_eq!(canonical_json(&reparsed).into_bytes(), json);
        let csv = String::from_utf8(render(&r, Format::Csv).unwrap()).unwrap();
        assert_eq!(csv.lines().count(), 32);
    }

    #[test]
    fn too_small_corpus() {
        let c = generate_corpus(&SimParams { session_count: 2, ..SimParams::default() }).unwrap();
        let big = generate_corpus(&SimParams { session_count: 5, ..SimParams::default() }).unwrap();
        assert!(matches!(
            build_report(&c, &big, &Resources::default(), &ReportConfig::default(), None),
            Err(Error::CorpusTooSmall(_))
        ));
    }
}
