//! Brute-force ground-truth scans compared against the noiseless simulators.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use star_core::frames::VisibleFrameDictionary;
use star_core::generate::{GenerationProfile, OBJECT_LABELS};
use star_core::model::{QAInstance, SyntheticVideo};
use star_core::sim::NoiseModel;
use star_core::suite::Suite;

use super::invoke_with;

fn words(s: &str) -> BTreeSet<String> {
    const SKIP: &[&str] = &["a", "an", "the", "of", "to", "in", "on", "and", "is", "at"];
    s.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty() && !SKIP.contains(w))
        .map(String::from)
        .collect()
}

fn scan_boxes(v: &SyntheticVideo, frame: usize, label: &str) -> Value {
    json!(v.frames[frame].objects.iter().filter(|o| o.label == label).map(|o| o.bbox).collect::<Vec<_>>())
}

fn scan_texts(v: &SyntheticVideo, frame: usize) -> Vec<String> {
    v.frames[frame].texts.iter().map(|t| t.content.clone()).collect()
}

fn scan_event(v: &SyntheticVideo, desc: &str) -> Option<[usize; 2]> {
    let q = words(desc);
    let mut best: Option<(usize, [usize; 2])> = None;
    for e in &v.events {
        let score = words(&e.label).intersection(&q).count();
        if score > 0 && best.is_none_or(|(b, _)| score > b) {
            best = Some((score, [e.span.start, e.span.end]));
        }
    }
    best.map(|(_, s)| s)
}

fn scan_instances(v: &SyntheticVideo, a: usize, b: usize, label: &str) -> usize {
    (a..=b).flat_map(|f| v.frames[f].objects.iter()).filter(|o| o.label == label).map(|o| o.instance_id).collect::<BTreeSet<_>>().len()
}

/// Runs `n` random queries and returns `(checked, mismatches)`.
pub fn zero_noise_mismatches(n: usize, seed: u64) -> (usize, Vec<String>) {
    let suite = Suite::generate(seed, 20, &GenerationProfile::default()).expect("suite");
    let noise = NoiseModel { seed, ..NoiseModel::noiseless() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = Vec::new();
    for i in 0..n {
        let k = rng.random_range(0..suite.videos.len());
        let (v, q): (&SyntheticVideo, &QAInstance) = (&suite.videos[k], &suite.questions[k]);
        let count = v.frame_count();
        let frame = rng.random_range(0..count);
        let d = VisibleFrameDictionary::with_keys(&v.video_id, count, vec![frame]);
        let label = OBJECT_LABELS[rng.random_range(0..OBJECT_LABELS.len())];
        let ordinal = i as u32;
        let mut check = |what: String, got: Value, want: Value| {
            if got != want {
                bad.push(format!("{what}: got {got}, want {want}"));
            }
        };
        match i % 5 {
            0 => {
                let r = invoke_with(&noise, "object_detector", &json!({"label": label, "frames": [frame]}), v, q, &d, ordinal).unwrap();
                check(format!("detector {label}@{frame}"), r.payload["frames"][0]["boxes"].clone(), scan_boxes(v, frame, label));
            }
            1 => {
                let r = invoke_with(&noise, "text_detector", &json!({"frames": [frame]}), v, q, &d, ordinal).unwrap();
                let got: Vec<Value> = r.payload["frames"][0]["texts"].as_array().unwrap().iter().map(|t| t["content"].clone()).collect();
                check(format!("ocr@{frame}"), json!(got), json!(scan_texts(v, frame)));
            }
            2 => {
                let e = &v.events[rng.random_range(0..v.events.len())];
                let r = invoke_with(&noise, "temporal_grounding", &json!({"description": e.label}), v, q, &d, ordinal);
                let got = r.map(|r| r.payload["span"].clone()).unwrap_or(Value::Null);
                check(format!("grounding '{}'", e.label), got, json!(scan_event(v, &e.label)));
            }
            3 => {
                let a = rng.random_range(0..count);
                let b = rng.random_range(a..count);
                let r = invoke_with(&noise, "object_tracker", &json!({"label": label, "span": [a, b]}), v, q, &d, ordinal).unwrap();
                check(format!("tracker {label} [{a},{b}]"), r.payload["count"].clone(), json!(scan_instances(v, a, b, label)));
            }
            _ => {
                let keys: Vec<usize> = (0..count).filter(|_| rng.random_bool(0.2)).chain([frame]).collect::<BTreeSet<_>>().into_iter().collect();
                let d = VisibleFrameDictionary::with_keys(&v.video_id, count, keys.clone());
                let e = &v.events[rng.random_range(0..v.events.len())];
                let r = invoke_with(&noise, "action_localization", &json!({"action": e.label}), v, q, &d, ordinal).unwrap();
                let span = scan_event(v, &e.label).unwrap();
                let want: Vec<usize> = keys.into_iter().filter(|k| span[0] <= *k && *k <= span[1]).collect();
                check(format!("localize '{}'", e.label), r.payload["frames"].clone(), json!(want));
            }
        }
    }
    (n, bad)
}
