//! Seeded generation of synthetic videos and question instances.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{
    frame_count_for, BBox, EventGT, FrameIndex, FrameRecord, ModelError, ObjectGT, QAInstance,
    QuestionKind, Roi3D, Span, SyntheticVideo, TextGT,
};
use crate::rng::{mix_seed, seeded, StreamRng};
use crate::text::plural;

pub const OBJECT_LABELS: &[&str] = &[
    "person", "cat", "dog", "car", "bicycle", "cup", "bottle", "chair", "laptop", "umbrella",
    "ball", "book", "phone", "bag", "horse", "bird",
];

pub const COLORS: &[&str] = &["red", "blue", "green", "yellow", "black", "white", "orange", "purple"];

pub const EVENT_LABELS: &[&str] = &[
    "pour water", "open door", "ride bicycle", "throw ball", "wave hand", "read book",
    "drink coffee", "cut bread", "play guitar", "walk dog", "answer phone", "climb stairs",
    "wash dishes", "kick ball", "pick flower", "feed bird",
];

pub const TEXT_CONTENTS: &[&str] = &[
    "STOP", "EXIT", "OPEN", "SALE", "HOTEL", "CAFE", "PARKING", "DANGER", "WELCOME", "PHARMACY",
    "BAKERY", "TAXI", "BUS 42", "ROUTE 9", "LIBRARY", "MUSEUM",
];

/// Knobs for [`generate_video`]. Densities are means; counts are drawn as
/// `floor(d)` plus a Bernoulli on the fractional part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationProfile {
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    pub fps: f64,
    pub min_scenes: usize,
    pub max_scenes: usize,
    pub objects_per_scene: f64,
    pub events_per_scene: f64,
    pub texts_per_minute: f64,
    pub max_text_frames: usize,
    pub n_options: usize,
}

impl Default for GenerationProfile {
    fn default() -> Self {
        GenerationProfile {
            min_duration_s: 60.0,
            max_duration_s: 300.0,
            fps: 1.0,
            min_scenes: 3,
            max_scenes: 6,
            objects_per_scene: 2.5,
            events_per_scene: 1.2,
            texts_per_minute: 0.8,
            max_text_frames: 4,
            n_options: 4,
        }
    }
}

impl GenerationProfile {
    /// Fixed-duration profile, otherwise default.
    pub fn fixed_duration(duration_s: f64, fps: f64) -> Self {
        GenerationProfile {
            min_duration_s: duration_s,
            max_duration_s: duration_s,
            fps,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidProfile(m.to_string()));
        if !(self.min_duration_s > 0.0) || !(self.max_duration_s >= self.min_duration_s) {
            return bad("duration range must be positive and ordered");
        }
        if !(self.fps > 0.0) || !self.fps.is_finite() {
            return bad("fps must be positive");
        }
        if frame_count_for(self.min_duration_s, self.fps) == 0 {
            return bad("minimum duration yields zero frames");
        }
        for (name, d) in [
            ("objects_per_scene", self.objects_per_scene),
            ("events_per_scene", self.events_per_scene),
            ("texts_per_minute", self.texts_per_minute),
        ] {
            if !(d >= 0.0) || !d.is_finite() {
                return Err(ModelError::InvalidProfile(format!("{name} must be non-negative")));
            }
        }
        if self.min_scenes == 0 || self.max_scenes < self.min_scenes {
            return bad("scene range must be at least 1 and ordered");
        }
        if self.max_text_frames == 0 {
            return bad("max_text_frames must be at least 1");
        }
        if self.n_options < 2 {
            return bad("n_options must be at least 2");
        }
        Ok(())
    }
}

fn draw_count(rng: &mut StreamRng, density: f64) -> usize {
    let base = density.floor();
    let extra = if rng.random::<f64>() < density - base { 1 } else { 0 };
    base as usize + extra
}

fn random_bbox(rng: &mut StreamRng, min_side: f64, max_side: f64) -> BBox {
    let w = rng.random_range(min_side..=max_side);
    let h = rng.random_range(min_side..=max_side);
    let x0 = rng.random_range(0.0..=(1.0 - w));
    let y0 = rng.random_range(0.0..=(1.0 - h));
    // Two decimals keep fixtures readable; result stays strictly positive.
    let r = |v: f64| (v * 100.0).round() / 100.0;
    let (x0, y0) = (r(x0), r(y0));
    let (x1, y1) = (r(x0 + w).min(1.0), r(y0 + h).min(1.0));
    BBox::new(x0, y0, x1.max(x0 + 0.01), y1.max(y0 + 0.01))
}

fn sub_interval(rng: &mut StreamRng, scene: Span, min_len: usize, max_len: usize) -> Span {
    let len = rng.random_range(min_len.max(1)..=max_len.max(min_len).max(1)).min(scene.len());
    let start = rng.random_range(scene.start..=scene.end + 1 - len);
    Span::new(start, start + len - 1)
}

struct Placed {
    label: String,
    instance_id: u32,
    color: String,
    bbox: BBox,
    span: Span,
}

/// Deterministic synthetic video for `(seed, profile)`.
pub fn generate_video(seed: u64, profile: &GenerationProfile) -> Result<SyntheticVideo, ModelError> {
    generate_video_with_id(seed, profile, &format!("vid-{seed}"))
}

pub fn generate_video_with_id(
    seed: u64,
    profile: &GenerationProfile,
    video_id: &str,
) -> Result<SyntheticVideo, ModelError> {
    profile.validate()?;
    let mut rng = seeded(mix_seed(&[b"video", &seed.to_le_bytes()]));
    let duration_s = if profile.max_duration_s > profile.min_duration_s {
        rng.random_range(profile.min_duration_s..=profile.max_duration_s).floor()
            .max(profile.min_duration_s)
    } else {
        profile.min_duration_s
    };
    let n = frame_count_for(duration_s, profile.fps);
    if n == 0 {
        return Err(ModelError::InvalidProfile("duration yields zero frames".into()));
    }

    // Scene boundaries: distinct cut points.
    let n_scenes = rng
        .random_range(profile.min_scenes..=profile.max_scenes)
        .min(n);
    let mut cuts: BTreeSet<usize> = BTreeSet::new();
    let mut candidates: Vec<usize> = (1..n).collect();
    candidates.shuffle(&mut rng);
    cuts.extend(candidates.into_iter().take(n_scenes - 1));
    let mut bounds = vec![0];
    bounds.extend(cuts.iter().copied());
    bounds.push(n);
    let scenes: Vec<Span> = bounds.windows(2).map(|w| Span::new(w[0], w[1] - 1)).collect();

    let mut next_id = 1u32;
    let mut persons: Vec<(u32, String)> = Vec::new();
    let mut placed: Vec<Placed> = Vec::new();
    let mut events: Vec<EventGT> = Vec::new();
    let mut used_events: BTreeSet<&str> = BTreeSet::new();

    for scene in &scenes {
        let k = draw_count(&mut rng, profile.objects_per_scene);
        let start_idx = placed.len();
        for _ in 0..k {
            let label = *OBJECT_LABELS.choose(&mut rng).expect("non-empty");
            let (instance_id, color) = if label == "person" && !persons.is_empty() && rng.random_bool(0.4) {
                persons.choose(&mut rng).cloned().expect("non-empty")
            } else {
                let id = next_id;
                next_id += 1;
                let color = COLORS.choose(&mut rng).expect("non-empty").to_string();
                if label == "person" {
                    persons.push((id, color.clone()));
                }
                (id, color)
            };
            if placed[start_idx..].iter().any(|p| p.instance_id == instance_id) {
                continue;
            }
            let min_len = scene.len().div_ceil(2);
            placed.push(Placed {
                label: label.to_string(),
                instance_id,
                color,
                bbox: random_bbox(&mut rng, 0.1, 0.45),
                span: sub_interval(&mut rng, *scene, min_len, scene.len()),
            });
        }
        let scene_objs: Vec<usize> = (start_idx..placed.len()).collect();
        let e = draw_count(&mut rng, profile.events_per_scene);
        for _ in 0..e {
            let free: Vec<&str> = EVENT_LABELS.iter().copied().filter(|l| !used_events.contains(l)).collect();
            let Some(label) = free.choose(&mut rng).copied() else { break };
            used_events.insert(label);
            let max_len = (scene.len() / 2).max(3);
            let span = sub_interval(&mut rng, *scene, 3.min(scene.len()), max_len);
            let region = scene_objs.choose(&mut rng).map(|&i| placed[i].bbox);
            events.push(EventGT { label: label.to_string(), span, region });
        }
    }

    if placed.is_empty() {
        let scene = scenes[0];
        placed.push(Placed {
            label: OBJECT_LABELS.choose(&mut rng).expect("non-empty").to_string(),
            instance_id: next_id,
            color: COLORS.choose(&mut rng).expect("non-empty").to_string(),
            bbox: random_bbox(&mut rng, 0.1, 0.45),
            span: scene,
        });
    }
    if events.is_empty() {
        let scene = scenes[0];
        let label = EVENT_LABELS.choose(&mut rng).expect("non-empty");
        let span = sub_interval(&mut rng, scene, 3.min(scene.len()), (scene.len() / 2).max(3));
        events.push(EventGT { label: label.to_string(), span, region: Some(placed[0].bbox) });
    }
    events.sort_by(|a, b| (a.span.start, a.span.end, &a.label).cmp(&(b.span.start, b.span.end, &b.label)));

    let mut frames: Vec<FrameRecord> = (0..n).map(FrameRecord::empty).collect();
    for p in &placed {
        for f in p.span.frames() {
            frames[f].objects.push(ObjectGT {
                label: p.label.clone(),
                instance_id: p.instance_id,
                bbox: p.bbox,
                color: Some(p.color.clone()),
            });
        }
    }

    let n_texts = draw_count(&mut rng, profile.texts_per_minute * duration_s / 60.0);
    let mut contents: Vec<&str> = TEXT_CONTENTS.to_vec();
    contents.shuffle(&mut rng);
    for content in contents.into_iter().take(n_texts) {
        let scene = *scenes.choose(&mut rng).expect("non-empty");
        let span = sub_interval(&mut rng, scene, 1, profile.max_text_frames);
        let bbox = random_bbox(&mut rng, 0.05, 0.2);
        for f in span.frames() {
            frames[f].texts.push(TextGT { content: content.to_string(), bbox });
        }
    }

    let video = SyntheticVideo {
        video_id: video_id.to_string(),
        duration_s,
        fps: profile.fps,
        frames,
        events,
    };
    video.validate()?;
    Ok(video)
}

/// Distractor pool: ground-truth alternatives first, then the vocabulary.
fn fill_options(
    rng: &mut StreamRng,
    correct: &str,
    from_gt: impl IntoIterator<Item = String>,
    vocab: &[&str],
    n_options: usize,
) -> (Vec<String>, usize) {
    let mut seen: BTreeSet<String> = BTreeSet::new();
    seen.insert(correct.to_string());
    let mut gt: Vec<String> = from_gt.into_iter().filter(|s| seen.insert(s.clone())).collect();
    gt.shuffle(rng);
    let mut pool: Vec<String> = vocab.iter().map(|s| s.to_string()).filter(|s| !seen.contains(s)).collect();
    pool.shuffle(rng);
    let mut options: Vec<String> = gt.into_iter().chain(pool).take(n_options - 1).collect();
    let at = rng.random_range(0..=options.len());
    options.insert(at, correct.to_string());
    (options, at)
}

/// Deterministic question of `kind` answerable from its region of interest.
pub fn generate_qa(video: &SyntheticVideo, seed: u64, kind: QuestionKind) -> Result<QAInstance, ModelError> {
    generate_qa_with(video, seed, kind, GenerationProfile::default().n_options)
}

pub fn generate_qa_with(
    video: &SyntheticVideo,
    seed: u64,
    kind: QuestionKind,
    n_options: usize,
) -> Result<QAInstance, ModelError> {
    let mut rng = seeded(mix_seed(&[
        b"qa",
        video.video_id.as_bytes(),
        &seed.to_le_bytes(),
        kind.as_str().as_bytes(),
    ]));
    let unsat = || ModelError::Unsatisfiable { kind, video_id: video.video_id.clone() };
    let n = video.frame_count();
    let full = video.full_span().ok_or_else(unsat)?;

    let (question, correct, options_from_gt, vocab, roi): (String, String, Vec<String>, &[&str], Roi3D) = match kind {
        QuestionKind::LocateText => {
            // Group text sightings by content.
            let mut tracks: BTreeMap<&str, (Span, BBox)> = BTreeMap::new();
            for f in &video.frames {
                for t in &f.texts {
                    tracks
                        .entry(t.content.as_str())
                        .and_modify(|(s, b)| {
                            s.end = s.end.max(f.index);
                            *b = b.union(&t.bbox);
                        })
                        .or_insert((Span::new(f.index, f.index), t.bbox));
                }
            }
            let keys: Vec<&str> = tracks.keys().copied().collect();
            let content = *keys.choose(&mut rng).ok_or_else(unsat)?;
            let (span, bbox) = tracks[content];
            let events: Vec<&EventGT> = video.events_overlapping(&span).collect();
            let mut anchors: BTreeSet<&str> = BTreeSet::new();
            for f in span.frames() {
                for o in &video.frames[f].objects {
                    anchors.insert(o.label.as_str());
                }
            }
            let anchors: Vec<&str> = anchors.into_iter().collect();
            let question = if let (true, Some(e)) = (rng.random_bool(0.5), events.choose(&mut rng)) {
                format!("What does the sign read during '{}'?", e.label)
            } else if let Some(a) = anchors.choose(&mut rng) {
                format!("What does the sign near the {a} read?")
            } else if let Some(e) = events.first() {
                format!("What does the sign read during '{}'?", e.label)
            } else {
                "What does the sign read?".to_string()
            };
            let others = keys.iter().filter(|k| **k != content).map(|s| s.to_string()).collect();
            (question, content.to_string(), others, TEXT_CONTENTS, Roi3D { span, bbox })
        }
        QuestionKind::CountObjects => {
            let mut by_label: BTreeMap<&str, (BTreeSet<u32>, Span, BBox)> = BTreeMap::new();
            for f in &video.frames {
                for o in &f.objects {
                    by_label
                        .entry(o.label.as_str())
                        .and_modify(|(ids, s, b)| {
                            ids.insert(o.instance_id);
                            s.end = s.end.max(f.index);
                            *b = b.union(&o.bbox);
                        })
                        .or_insert((BTreeSet::from([o.instance_id]), Span::new(f.index, f.index), o.bbox));
                }
            }
            let labels: Vec<&str> = by_label.keys().copied().collect();
            let label = *labels.choose(&mut rng).ok_or_else(unsat)?;
            let (ids, span, bbox) = &by_label[label];
            let count = ids.len();
            let mut nums: Vec<String> = Vec::new();
            let mut delta = 1i64;
            while nums.len() < 8 {
                for cand in [count as i64 + delta, count as i64 - delta] {
                    if cand >= 1 {
                        nums.push(cand.to_string());
                    }
                }
                delta += 1;
            }
            nums.truncate(n_options - 1);
            (
                format!("How many different {} appear in the video?", plural(label)),
                count.to_string(),
                nums,
                &[],
                Roi3D { span: *span, bbox: *bbox },
            )
        }
        QuestionKind::EventOrder => {
            let evs = &video.events;
            let mut pairs: Vec<(usize, usize)> = Vec::new();
            for (i, e1) in evs.iter().enumerate() {
                let later: Vec<usize> = (0..evs.len()).filter(|&j| evs[j].span.start > e1.span.start).collect();
                let Some(min_start) = later.iter().map(|&j| evs[j].span.start).min() else { continue };
                let next: Vec<usize> = later.into_iter().filter(|&j| evs[j].span.start == min_start).collect();
                if next.len() == 1 {
                    pairs.push((i, next[0]));
                }
            }
            let &(i, j) = pairs.choose(&mut rng).ok_or_else(unsat)?;
            let (e1, e2) = (&evs[i], &evs[j]);
            let span = Span::new(e1.span.start, e1.span.end.max(e2.span.end));
            let others: Vec<String> = evs
                .iter()
                .filter(|e| e.label != e1.label && e.label != e2.label)
                .map(|e| e.label.clone())
                .collect();
            let vocab_ex: Vec<&str> = EVENT_LABELS.iter().copied().filter(|l| *l != e1.label).collect();
            let (options, at) = fill_options(&mut rng, &e2.label, others, &vocab_ex, n_options);
            return Ok(QAInstance {
                question_id: format!("{}-{}-{seed}", video.video_id, kind.as_str()),
                video_id: video.video_id.clone(),
                question: format!("Which event happens right after '{}'?", e1.label),
                options,
                correct_index: at,
                roi: Roi3D { span, bbox: BBox::UNIT },
                question_kind: kind,
            });
        }
        QuestionKind::AttributeInEvent => {
            let mut cands: Vec<(&EventGT, ObjectGT)> = Vec::new();
            for e in video.events.iter().filter(|e| e.region.is_some()) {
                let region = e.region.expect("filtered");
                let mut seen: BTreeMap<&str, Vec<&ObjectGT>> = BTreeMap::new();
                for f in e.span.frames() {
                    for o in &video.frames[f].objects {
                        let v = seen.entry(o.label.as_str()).or_default();
                        if !v.iter().any(|p| p.instance_id == o.instance_id) {
                            v.push(o);
                        }
                    }
                }
                for objs in seen.values() {
                    // Unambiguous: exactly one instance of that label in the event.
                    if let [o] = objs.as_slice() {
                        if o.color.is_some() && o.bbox.intersects(&region) {
                            cands.push((e, (*o).clone()));
                        }
                    }
                }
            }
            let (e, o) = cands.choose(&mut rng).cloned().ok_or_else(unsat)?;
            let color = o.color.clone().expect("filtered");
            let others: Vec<String> = video
                .frames
                .iter()
                .flat_map(|f| f.objects.iter().filter_map(|o| o.color.clone()))
                .collect();
            (
                format!("What color is the {} during '{}'?", o.label, e.label),
                color,
                others,
                COLORS,
                Roi3D { span: e.span, bbox: o.bbox },
            )
        }
        QuestionKind::GlobalTheme => {
            let best = video
                .events
                .iter()
                .max_by(|a, b| a.span.len().cmp(&b.span.len()).then(b.span.start.cmp(&a.span.start)))
                .ok_or_else(unsat)?;
            let top_len = best.span.len();
            let others: Vec<String> = video
                .events
                .iter()
                .filter(|e| e.span.len() < top_len)
                .map(|e| e.label.clone())
                .collect();
            let vocab_ex: Vec<&str> = EVENT_LABELS
                .iter()
                .copied()
                .filter(|l| !video.events.iter().any(|e| e.label == *l))
                .collect();
            let (options, at) = fill_options(&mut rng, &best.label, others, &vocab_ex, n_options);
            return Ok(QAInstance {
                question_id: format!("{}-{}-{seed}", video.video_id, kind.as_str()),
                video_id: video.video_id.clone(),
                question: "What is this video mainly about?".to_string(),
                options,
                correct_index: at,
                roi: Roi3D { span: full, bbox: BBox::UNIT },
                question_kind: kind,
            });
        }
    };
    debug_assert!(roi.span.end < n);
    let (options, at) = if kind == QuestionKind::CountObjects {
        let mut opts = options_from_gt;
        let at = rng.random_range(0..=opts.len());
        opts.insert(at, correct.clone());
        // Numeric options read best in ascending order.
        opts.sort_by_key(|s| s.parse::<i64>().unwrap_or(i64::MAX));
        let at = opts.iter().position(|o| *o == correct).expect("inserted");
        (opts, at)
    } else {
        fill_options(&mut rng, &correct, options_from_gt, vocab, n_options)
    };
    Ok(QAInstance {
        question_id: format!("{}-{}-{seed}", video.video_id, kind.as_str()),
        video_id: video.video_id.clone(),
        question,
        options,
        correct_index: at,
        roi,
        question_kind: kind,
    })
}

/// Evidence tokens: the ground-truth content inside a region of interest.
///
/// An annotation "derives from roi content" when it sits on a frame inside
/// the roi span and mentions one of these.
pub fn roi_evidence(video: &SyntheticVideo, qa: &QAInstance) -> BTreeSet<String> {
    use crate::text::content_tokens;
    let mut out = BTreeSet::new();
    let span = qa.roi.span;
    for f in span.frames().filter(|&f| f < video.frame_count()) {
        let rec = &video.frames[f];
        for o in rec.objects.iter().filter(|o| o.bbox.intersects(&qa.roi.bbox)) {
            out.extend(content_tokens(&o.label));
            if let Some(c) = &o.color {
                out.extend(content_tokens(c));
            }
        }
        for t in rec.texts.iter().filter(|t| t.bbox.intersects(&qa.roi.bbox)) {
            out.extend(content_tokens(&t.content));
        }
    }
    for e in video.events_overlapping(&span) {
        out.extend(content_tokens(&e.label));
    }
    // Only evidence that bears on the answer counts.
    let answer = content_tokens(qa.correct_option());
    if answer.iter().any(|t| out.contains(t)) {
        answer
    } else {
        out
    }
}

/// Frames in `span` whose ground truth contains a label.
pub fn label_frames(video: &SyntheticVideo, label: &str) -> Vec<FrameIndex> {
    video
        .frames
        .iter()
        .filter(|f| f.objects.iter().any(|o| o.label == label))
        .map(|f| f.index)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn text_video() -> SyntheticVideo {
        let mut frames: Vec<FrameRecord> = (0..120).map(FrameRecord::empty).collect();
        frames[42].texts.push(TextGT { content: "STOP".into(), bbox: BBox::new(0.4, 0.4, 0.6, 0.5) });
        SyntheticVideo {
            video_id: "sign".into(),
            duration_s: 120.0,
            fps: 1.0,
            frames,
            events: vec![EventGT { label: "pour water".into(), span: Span::new(40, 55), region: None }],
        }
    }

    #[test]
    fn same_seed_same_video() {
        let p = GenerationProfile::default();
        assert_eq!(generate_video(0, &p).unwrap(), generate_video(0, &p).unwrap());
    }

    #[test]
    fn different_seed_different_video() {
        let p = GenerationProfile::default();
        assert_ne!(generate_video(0, &p).unwrap(), generate_video(1, &p).unwrap());
    }

    #[test]
    fn fixed_duration_frame_count() {
        let v = generate_video(7, &GenerationProfile::fixed_duration(120.0, 1.0)).unwrap();
        assert_eq!(v.frame_count(), 120);
        assert!(!v.events.is_empty());
        assert!(v.frames.iter().any(|f| !f.objects.is_empty()));
    }

    #[test]
    fn invalid_profiles_rejected() {
        let p = GenerationProfile { min_duration_s: 0.0, max_duration_s: 0.0, ..Default::default() };
        assert!(matches!(generate_video(0, &p), Err(ModelError::InvalidProfile(_))));
        let p = GenerationProfile { events_per_scene: -1.0, ..Default::default() };
        assert!(matches!(generate_video(0, &p), Err(ModelError::InvalidProfile(_))));
    }

    #[test]
    fn locate_text_single_sign() {
        let v = text_video();
        let qa = generate_qa(&v, 3, QuestionKind::LocateText).unwrap();
        assert!(qa.question.starts_with("What does the sign read"));
        assert_eq!(qa.roi.span, Span::new(42, 42));
        assert_eq!(qa.correct_option(), "STOP");
        assert_eq!(qa.options.len(), 4);
        qa.validate(&v).unwrap();
    }

    #[test]
    fn count_three_people() {
        let mut v = text_video();
        for (id, f) in [(1u32, 3usize), (2, 10), (3, 60), (1, 61)] {
            v.frames[f].objects.push(ObjectGT {
                label: "person".into(),
                instance_id: id,
                bbox: BBox::new(0.1, 0.1, 0.3, 0.5),
                color: Some("red".into()),
            });
        }
        let qa = generate_qa(&v, 0, QuestionKind::CountObjects).unwrap();
        assert_eq!(qa.correct_option(), "3");
        assert_eq!(qa.roi.span, Span::new(3, 61));
    }

    #[test]
    fn qa_deterministic() {
        let v = generate_video(5, &GenerationProfile::default()).unwrap();
        for k in QuestionKind::ALL {
            let a = generate_qa(&v, 9, k);
            let b = generate_qa(&v, 9, k);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn unsatisfiable_without_text() {
        let mut v = text_video();
        v.frames[42].texts.clear();
        assert!(matches!(
            generate_qa(&v, 0, QuestionKind::LocateText),
            Err(ModelError::Unsatisfiable { .. })
        ));
    }
}
