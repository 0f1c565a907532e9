use std::collections::BTreeSet;

use proptest::prelude::*;
use star_core::frames::{
    uniform_sample_keys, Annotation, AnnotationKind, FrameSelection, Payload, TemporalUpdate, UpdateMode,
    VisibleFrameDictionary, TRUNCATION_MARKER,
};
use star_core::model::{frame_count_for, FrameRecord, Span, SyntheticVideo};

fn video(duration_s: f64, fps: f64) -> SyntheticVideo {
    let n = frame_count_for(duration_s, fps);
    SyntheticVideo { video_id: "v".into(), duration_s, fps, frames: (0..n).map(FrameRecord::empty).collect(), events: vec![] }
}

fn keys_of(duration_s: f64, fps: f64) -> usize {
    VisibleFrameDictionary::init_uniform_sample(&video(duration_s, fps)).unwrap().len()
}

#[test]
fn initial_sample_sizes() {
    assert_eq!(keys_of(3600.0, 1.0), 16);
    assert_eq!(keys_of(16.0, 1.0), 16);
    assert_eq!(keys_of(10.0, 1.0), 10);
}

#[test]
fn long_video_sample_spans_the_video() {
    let keys = uniform_sample_keys(3600, 3600.0, 1.0);
    assert_eq!(keys.first(), Some(&0));
    assert_eq!(keys.last(), Some(&3599));
}

#[test]
fn empty_video_is_rejected() {
    assert!(VisibleFrameDictionary::init_uniform_sample(&video(0.0, 1.0)).is_err());
}

fn update_strategy(n: usize) -> impl Strategy<Value = TemporalUpdate> {
    let sel = prop_oneof![
        (0..n).prop_map(|f| FrameSelection::Single { frame: f }),
        (0..n, 0..n).prop_map(|(a, b)| FrameSelection::Segment { span: Span::new(a.min(b), a.max(b)) }),
        prop::collection::btree_set(0..n, 0..8).prop_map(|frames| FrameSelection::Set { frames }),
    ];
    let mode = prop_oneof![Just(UpdateMode::Add), Just(UpdateMode::Remove), Just(UpdateMode::Retain)];
    (sel, mode).prop_map(|(selection, mode)| TemporalUpdate { selection, mode })
}

#[derive(Debug, Clone)]
enum Op {
    Update(TemporalUpdate),
    Note(usize, String),
}

fn ops(n: usize) -> impl Strategy<Value = Vec<Op>> {
    prop::collection::vec(
        prop_oneof![update_strategy(n).prop_map(Op::Update), (0..n, "[a-z]{1,8}").prop_map(|(f, t)| Op::Note(f, t))],
        0..30,
    )
}

proptest! {
    #[test]
    fn sample_size_follows_the_duration_rule(d in 0.5f64..5000.0) {
        let v = video(d, 1.0);
        prop_assume!(v.frame_count() > 0);
        let keys = uniform_sample_keys(v.frame_count(), d, 1.0);
        let want = if d > 16.0 { 16 } else { (d.ceil() as usize).min(v.frame_count()) };
        prop_assert_eq!(keys.len(), want);
        prop_assert!(keys.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(keys.iter().all(|&k| k < v.frame_count()));
    }

    #[test]
    fn sample_at_higher_fps_is_one_key_per_second(d in 1.0f64..16.0, fps in 1u32..30) {
        let v = video(d, fps as f64);
        let keys = uniform_sample_keys(v.frame_count(), d, fps as f64);
        prop_assert!(keys.len() <= 16 && keys.len() as f64 <= d.ceil());
        prop_assert_eq!(keys[0], 0);
        prop_assert!(keys.windows(2).all(|w| w[1] - w[0] == fps as usize));
        prop_assert!(*keys.last().unwrap() + fps as usize >= v.frame_count());
    }

    #[test]
    fn updates_keep_the_dictionary_consistent(n in 1usize..200, script in ops(200)) {
        let v = video(n as f64, 1.0);
        let mut d = VisibleFrameDictionary::init_uniform_sample(&v).unwrap();
        let mut written = 0usize;
        for (step, op) in script.into_iter().enumerate() {
            let step = step as u32;
            match op {
                Op::Update(u) => {
                    let before = d.key_set();
                    match d.apply_temporal_update(&u, step, "t") {
                        Ok(delta) => {
                            let after = d.key_set();
                            let sel = u.selection.frames();
                            match u.mode {
                                UpdateMode::Add => prop_assert_eq!(&after, &before.union(&sel).copied().collect::<BTreeSet<_>>()),
                                UpdateMode::Remove => prop_assert_eq!(&after, &before.difference(&sel).copied().collect::<BTreeSet<_>>()),
                                UpdateMode::Retain => prop_assert_eq!(&after, &sel),
                            }
                            prop_assert_eq!(delta.added, after.difference(&before).copied().collect::<Vec<_>>());
                            prop_assert_eq!(delta.removed, before.difference(&after).copied().collect::<Vec<_>>());
                        }
                        Err(_) => prop_assert_eq!(d.key_set(), before),
                    }
                }
                Op::Note(f, text) => {
                    let ann = Annotation { source_tool: "s".into(), kind: AnnotationKind::Caption, payload: Payload::Text(text), step };
                    if d.annotate(f, ann).is_ok() {
                        written += 1;
                    } else {
                        prop_assert!(!d.contains(f) || f >= n);
                    }
                }
            }
            prop_assert!(!d.is_empty());
            prop_assert!(d.keys().all(|k| k < n));
            prop_assert!(d.focus_frames().iter().all(|f| d.contains(*f)));
        }
        prop_assert_eq!(d.all_annotations_ever().len(), written);
        prop_assert_eq!(d.annotation_count() + d.archived_annotations().len(), written);
        let back = VisibleFrameDictionary::replay(&d.video_ref, d.frame_count, d.history()).unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn rendered_context_fits_the_budget(notes in prop::collection::vec((0usize..16, "[a-z ]{1,40}"), 0..60), budget in 1usize..2000) {
        let v = video(200.0, 1.0);
        let mut d = VisibleFrameDictionary::init_uniform_sample(&v).unwrap();
        let keys: Vec<usize> = d.keys().collect();
        for (step, (i, t)) in notes.into_iter().enumerate() {
            let ann = Annotation { source_tool: "s".into(), kind: AnnotationKind::Caption, payload: Payload::Text(t), step: step as u32 };
            d.annotate(keys[i], ann).unwrap();
        }
        let text = d.render_context(budget);
        prop_assert!(text.len() <= budget.max(TRUNCATION_MARKER.len()), "{} > {}", text.len(), budget);
    }
}

#[test]
fn out_of_range_update_is_rejected_without_change() {
    let v = video(50.0, 1.0);
    let mut d = VisibleFrameDictionary::init_uniform_sample(&v).unwrap();
    let before = d.clone();
    let u = TemporalUpdate { selection: FrameSelection::Single { frame: 50 }, mode: UpdateMode::Add };
    assert!(d.apply_temporal_update(&u, 1, "t").is_err());
    assert_eq!(d, before);
}

#[test]
fn emptying_update_is_rejected() {
    let v = video(50.0, 1.0);
    let mut d = VisibleFrameDictionary::init_uniform_sample(&v).unwrap();
    let all = FrameSelection::Segment { span: Span::new(0, 49) };
    assert!(d.apply_temporal_update(&TemporalUpdate { selection: all, mode: UpdateMode::Remove }, 1, "t").is_err());
    assert_eq!(d.len(), 16);
}
