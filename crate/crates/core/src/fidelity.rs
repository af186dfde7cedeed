//! Clinician fidelity annotations: the imaginal-exposure checklist, turn-level
//! violation spans, scoring, and a file-backed store with optimistic locking.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChecklistEntry {
    pub item_id: &'static str,
    pub text: &'static str,
}

/// The fixed eleven-item imaginal-exposure checklist, in display order.
pub const CHECKLIST: [ChecklistEntry; 11] = [
    ChecklistEntry { item_id: "rationale_explained", text: "Therapist explained rationale for imaginal?" },
    ChecklistEntry { item_id: "imaginal_instructions", text: "Therapist gave client instructions to carry out imaginal?" },
    ChecklistEntry { item_id: "hotspots_introduced", text: "Hotspots procedure and rationale introduced?" },
    ChecklistEntry { item_id: "hotspots_identified", text: "Therapist helped patient to identify hotspots?" },
    ChecklistEntry { item_id: "oriented_to_imaginal", text: "Therapist oriented the client to imaginal planned for that session?" },
    ChecklistEntry { item_id: "suds_monitored_5min", text: "Therapist monitored SUDS ratings about every 5 minutes?" },
    ChecklistEntry { item_id: "reinforcing_comments", text: "Therapist used appropriate reinforcing comments during imaginal?" },
    ChecklistEntry { item_id: "elicited_thoughts_feelings", text: "Therapist elicited thoughts and feelings as appropriate?" },
    ChecklistEntry { item_id: "present_tense_closed_eyes", text: "Therapist prompted for present tense, closed eyes?" },
    ChecklistEntry { item_id: "imaginal_duration_ok", text: "Imaginal lasted about 30-45 minutes (or about 15 for final imaginal)?" },
    ChecklistEntry { item_id: "imaginal_processed", text: "Therapist processed the imaginal with client?" },
];

pub fn checklist_item(item_id: &str) -> Option<&'static ChecklistEntry> {
    CHECKLIST.iter().find(|e| e.item_id == item_id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    Yes,
    No,
    #[serde(rename = "na")]
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecklistItem {
    pub item_id: String,
    pub answer: Answer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationCategory {
    RoleDrift,
    GenericAffirmation,
    ReflectionDuringExposure,
    TraumaAnchoringAdherent,
    NoIssue,
}

impl ViolationCategory {
    pub const ALL: [ViolationCategory; 5] = [
        ViolationCategory::RoleDrift,
        ViolationCategory::GenericAffirmation,
        ViolationCategory::ReflectionDuringExposure,
        ViolationCategory::TraumaAnchoringAdherent,
        ViolationCategory::NoIssue,
    ];

    /// Categories that record protocol-adherent behaviour rather than a lapse.
    pub fn is_adherent(self) -> bool {
        matches!(self, ViolationCategory::TraumaAnchoringAdherent | ViolationCategory::NoIssue)
    }

    pub fn key(self) -> &'static str {
        match self {
            ViolationCategory::RoleDrift => "role_drift",
            ViolationCategory::GenericAffirmation => "generic_affirmation",
            ViolationCategory::ReflectionDuringExposure => "reflection_during_exposure",
            ViolationCategory::TraumaAnchoringAdherent => "trauma_anchoring_adherent",
            ViolationCategory::NoIssue => "no_issue",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViolationSpan {
    pub turn_index: usize,
    pub category: ViolationCategory,
    #[serde(default)]
    pub note: String,
    /// Filled from the enclosing annotation when left empty.
    #[serde(default)]
    pub annotator_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FidelityAnnotation {
    pub session_id: String,
    pub annotator_id: String,
    pub items: Vec<ChecklistItem>,
    #[serde(default)]
    pub spans: Vec<ViolationSpan>,
    /// On write: the version the edit was based on (0 for a new annotation).
    /// As stored: the number of successful writes.
    #[serde(default)]
    pub version: u64,
    #[serde(default)]
    pub updated_at: Option<DateTime<Utc>>,
}

impl FidelityAnnotation {
    /// A new annotation with every item answered `answer`.
    pub fn uniform(session_id: impl Into<String>, annotator_id: impl Into<String>, answer: Answer) -> Self {
        FidelityAnnotation {
            session_id: session_id.into(),
            annotator_id: annotator_id.into(),
            items: CHECKLIST
                .iter()
                .map(|e| ChecklistItem { item_id: e.item_id.to_string(), answer })
                .collect(),
            spans: Vec::new(),
            version: 0,
            updated_at: None,
        }
    }

    pub fn answer(&self, item_id: &str) -> Option<Answer> {
        self.items.iter().find(|i| i.item_id == item_id).map(|i| i.answer)
    }

    pub fn set_answer(&mut self, item_id: &str, answer: Answer) {
        if let Some(item) = self.items.iter_mut().find(|i| i.item_id == item_id) {
            item.answer = answer;
        }
    }

    /// Checks the registry invariant and, when `turn_count` is given, that
    /// every span points at an existing turn.
    pub fn validate(&self, turn_count: Option<usize>) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidAnnotation(m));
        if self.session_id.trim().is_empty() {
            return bad("session_id is empty".into());
        }
        if self.annotator_id.trim().is_empty() {
            return bad("annotator_id is empty".into());
        }
        if self.items.len() != CHECKLIST.len() {
            return bad(format!(
                "expected {} checklist items, got {}",
                CHECKLIST.len(),
                self.items.len()
            ));
        }
        let mut seen = BTreeSet::new();
        for item in &self.items {
            if checklist_item(&item.item_id).is_none() {
                return bad(format!("unknown checklist item {:?}", item.item_id));
            }
            if !seen.insert(item.item_id.as_str()) {
                return bad(format!("duplicate checklist item {:?}", item.item_id));
            }
        }
        if let Some(n) = turn_count {
            if let Some(span) = self.spans.iter().find(|s| s.turn_index >= n) {
                return bad(format!(
                    "span turn_index {} out of range for a {n}-turn session",
                    span.turn_index
                ));
            }
        }
        Ok(())
    }
}

/// Yes / (Yes + No); `None` when every item is not applicable.
pub fn adherence_score(annotation: &FidelityAnnotation) -> Option<f64> {
    let yes = annotation.items.iter().filter(|i| i.answer == Answer::Yes).count();
    let no = annotation.items.iter().filter(|i| i.answer == Answer::No).count();
    (yes + no > 0).then(|| yes as f64 / (yes + no) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryStat {
    pub count: usize,
    /// Share of annotated sessions with at least one span of the category.
    pub session_rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ViolationSummary {
    pub annotated_sessions: usize,
    pub violations: BTreeMap<ViolationCategory, CategoryStat>,
    pub adherent: BTreeMap<ViolationCategory, CategoryStat>,
}

pub fn violation_summary(annotations: &[FidelityAnnotation]) -> ViolationSummary {
    let sessions: BTreeSet<&str> = annotations.iter().map(|a| a.session_id.as_str()).collect();
    if sessions.is_empty() {
        return ViolationSummary::default();
    }
    let mut summary = ViolationSummary { annotated_sessions: sessions.len(), ..Default::default() };
    for cat in ViolationCategory::ALL {
        let mut count = 0;
        let mut with: BTreeSet<&str> = BTreeSet::new();
        for a in annotations {
            let n = a.spans.iter().filter(|s| s.category == cat).count();
            count += n;
            if n > 0 {
                with.insert(&a.session_id);
            }
        }
        let stat = CategoryStat { count, session_rate: with.len() as f64 / sessions.len() as f64 };
        if cat.is_adherent() {
            summary.adherent.insert(cat, stat);
        } else {
            summary.violations.insert(cat, stat);
        }
    }
    summary
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdherenceSummary {
    pub annotations: usize,
    /// Annotations with at least one applicable item.
    pub scored: usize,
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    /// Counts in the bins [0, 0.2), [0.2, 0.4), [0.4, 0.6), [0.6, 0.8), [0.8, 1].
    pub histogram: [usize; 5],
}

pub fn adherence_summary(annotations: &[FidelityAnnotation]) -> AdherenceSummary {
    let scores: Vec<f64> = annotations.iter().filter_map(adherence_score).collect();
    let mut histogram = [0usize; 5];
    for &s in &scores {
        histogram[((s * 5.0) as usize).min(4)] += 1;
    }
    let fold = |f: fn(f64, f64) -> f64| scores.iter().copied().reduce(f);
    AdherenceSummary {
        annotations: annotations.len(),
        scored: scores.len(),
        mean: (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64),
        min: fold(f64::min),
        max: fold(f64::max),
        histogram,
    }
}

/// (session_id, annotator_id)
type AnnotationKey = (String, String);

/// One JSON file per (session, annotator) under a directory. Reads are
/// lock-free; writes to the same key are serialized and version-checked.
pub struct AnnotationStore {
    dir: PathBuf,
    locks: Mutex<HashMap<AnnotationKey, Arc<Mutex<()>>>>,
    tmp_counter: AtomicU64,
}

/// Percent-encode everything except ASCII alphanumerics and '-', so the
/// "__" separator below cannot occur inside an encoded component.
fn encode_component(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        if b.is_ascii_alphanumeric() || b == b'-' {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

impl AnnotationStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(AnnotationStore { dir, locks: Mutex::new(HashMap::new()), tmp_counter: AtomicU64::new(0) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, session_id: &str, annotator_id: &str) -> PathBuf {
        self.dir.join(format!(
            "{}__{}.json",
            encode_component(session_id),
            encode_component(annotator_id)
        ))
    }

    pub fn get(&self, session_id: &str, annotator_id: &str) -> Result<Option<FidelityAnnotation>> {
        let path = self.path_for(session_id, annotator_id);
        match fs::read(&path) {
            Ok(bytes) => Ok(Some(serde_json::from_slice(&bytes)?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    /// All stored annotations, ordered by (session_id, annotator_id).
    pub fn list(&self) -> Result<Vec<FidelityAnnotation>> {
        let mut out = Vec::new();
        let entries = fs::read_dir(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(&self.dir, e))?.path();
            if path.extension().is_some_and(|x| x == "json") {
                let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
                out.push(serde_json::from_slice::<FidelityAnnotation>(&bytes)?);
            }
        }
        out.sort_by(|a, b| (&a.session_id, &a.annotator_id).cmp(&(&b.session_id, &b.annotator_id)));
        Ok(out)
    }

    pub fn save(&self, annotation: FidelityAnnotation, turn_count: Option<usize>) -> Result<FidelityAnnotation> {
        self.save_at(annotation, turn_count, Utc::now())
    }

    /// Stores `annotation` if its version equals the stored one (0 when
    /// absent) and returns the stored copy with the version advanced by one.
    pub fn save_at(
        &self,
        mut annotation: FidelityAnnotation,
        turn_count: Option<usize>,
        now: DateTime<Utc>,
    ) -> Result<FidelityAnnotation> {
        annotation.validate(turn_count)?;
        let key = (annotation.session_id.clone(), annotation.annotator_id.clone());
        let lock = self.locks.lock().entry(key).or_default().clone();
        let _guard = lock.lock();

        let current = self
            .get(&annotation.session_id, &annotation.annotator_id)?
            .map_or(0, |a| a.version);
        if annotation.version != current {
            return Err(Error::VersionConflict { current, requested: annotation.version });
        }
        annotation.version = current + 1;
        annotation.updated_at = Some(now);
        for span in &mut annotation.spans {
            if span.annotator_id.is_empty() {
                span.annotator_id = annotation.annotator_id.clone();
            }
        }

        let path = self.path_for(&annotation.session_id, &annotation.annotator_id);
        let tmp = self.dir.join(format!(
            ".tmp-{}-{}",
            std::process::id(),
            self.tmp_counter.fetch_add(1, Ordering::Relaxed)
        ));
        let mut bytes = serde_json::to_vec_pretty(&annotation)?;
        bytes.push(b'\n');
        let write = || -> std::io::Result<()> {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
            fs::rename(&tmp, &path)
        };
        if let Err(e) = write() {
            let _ = fs::remove_file(&tmp);
            return Err(Error::io(path, e));
        }
        Ok(annotation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_answers(yes: usize, no: usize) -> FidelityAnnotation {
        let mut a = FidelityAnnotation::uniform("s1", "ann", Answer::NotApplicable);
        for (i, item) in a.items.iter_mut().enumerate() {
            if i < yes {
                item.answer = Answer::Yes;
            } else if i < yes + no {
                item.answer = Answer::No;
            }
        }
        a
    }

    #[test]
    fn registry_shape() {
        assert_eq!(CHECKLIST.len(), 11);
        assert_eq!(CHECKLIST[0].text, "Therapist explained rationale for imaginal?");
        let ids: BTreeSet<_> = CHECKLIST.iter().map(|e| e.item_id).collect();
        assert_eq!(ids.len(), 11);
    }

    #[test]
    fn adherence_examples() {
        assert_eq!(adherence_score(&with_answers(11, 0)), Some(1.0));
        assert_eq!(adherence_score(&with_answers(5, 5)), Some(0.5));
        assert_eq!(adherence_score(&with_answers(0, 0)), None);
        let mut reversed = with_answers(3, 6);
        let before = adherence_score(&reversed);
        reversed.items.reverse();
        assert_eq!(adherence_score(&reversed), before);
    }

    #[test]
    fn validation_rejects_bad_items_and_spans() {
        let mut a = with_answers(11, 0);
        a.items.pop();
        assert!(a.validate(None).is_err());
        let mut a = with_answers(11, 0);
        a.items[1].item_id = a.items[0].item_id.clone();
        assert!(a.validate(None).is_err());
        let mut a = with_answers(11, 0);
        a.spans.push(ViolationSpan {
            turn_index: 4,
            category: ViolationCategory::RoleDrift,
            note: String::new(),
            annotator_id: String::new(),
        });
        assert!(a.validate(Some(5)).is_ok());
        assert!(a.validate(Some(4)).is_err());
    }

    #[test]
    fn wire_format() {
        let json = serde_json::to_value(with_answers(1, 1)).unwrap();
        assert_eq!(json["items"][0]["answer"], "yes");
        assert_eq!(json["items"][2]["answer"], "na");
        let span: ViolationSpan =
            serde_json::from_str(r#"{"turn_index":3,"category":"reflection_during_exposure"}"#).unwrap();
        assert_eq!(span.category, ViolationCategory::ReflectionDuringExposure);
    }

    #[test]
    fn summary_counts() {
        let span = |cat| ViolationSpan { turn_index: 0, category: cat, note: String::new(), annotator_id: String::new() };
        let mut a = with_answers(11, 0);
        a.spans.push(span(ViolationCategory::RoleDrift));
        let mut b = a.clone();
        b.session_id = "s2".into();
        let s = violation_summary(&[a, b]);
        assert_eq!(s.annotated_sessions, 2);
        let rd = &s.violations[&ViolationCategory::RoleDrift];
        assert_eq!((rd.count, rd.session_rate), (2, 1.0));
        assert_eq!(s.adherent[&ViolationCategory::NoIssue].count, 0);
        assert!(!s.violations.contains_key(&ViolationCategory::NoIssue));
        assert_eq!(violation_summary(&[]), ViolationSummary::default());
    }

    #[test]
    fn store_versions_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = AnnotationStore::open(dir.path()).unwrap();
        let mut a = with_answers(6, 2);
        a.session_id = "sess/1 x".into();
        a.annotator_id = "dr_a".into();
        let saved = store.save(a.clone(), None).unwrap();
        assert_eq!(saved.version, 1);
        let loaded = store.get("sess/1 x", "dr_a").unwrap().unwrap();
        assert_eq!(loaded, saved);

        // resubmitting the same base version is stale
        assert!(matches!(
            store.save(a.clone(), None),
            Err(Error::VersionConflict { current: 1, requested: 0 })
        ));
        let again = store.save(loaded, None).unwrap();
        assert_eq!(again.version, 2);
        assert_eq!(store.list().unwrap().len(), 1);
        assert!(store.get("sess/1 x", "other").unwrap().is_none());
    }

    #[test]
    fn file_names_do_not_collide() {
        let store = AnnotationStore::open(tempfile::tempdir().unwrap().keep()).unwrap();
        assert_ne!(store.path_for("a__b", "c"), store.path_for("a", "b__c"));
        assert_ne!(store.path_for("../x", "y"), store.path_for("..%2Fx", "y"));
        let name = store.path_for("../../etc", "passwd");
        assert_eq!(name.parent().unwrap(), store.dir());
    }
}
