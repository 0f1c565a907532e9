mod common;

use common::*;
use rand::Rng;
use serde_json::json;
use star_core::frames::{AnnotationKind, FrameSelection, Payload, TemporalUpdate, UpdateMode};
use star_core::model::{BBox, QuestionKind, Span};
use star_core::rng::StreamKey;
use star_core::sim::ops::{self, grid_layout, SelectorVariant};
use star_core::sim::NoiseModel;
use star_core::tool::{DictionaryEffect, ToolError};

fn cat_video() -> star_core::model::SyntheticVideo {
    let mut v = video(120, &[("pour water", 40, 55)]);
    put_object(&mut v, 48, "cat", 1, [0.1, 0.2, 0.5, 0.6], Some("black"));
    put_text(&mut v, 48, "STOP", [0.6, 0.1, 0.9, 0.3]);
    v
}

#[test]
fn detector_returns_ground_truth_boxes() {
    let v = cat_video();
    let q = qa(&v, "q", &["a", "b"], 0, (40, 55), QuestionKind::CountObjects);
    let d = dict(&v, &[16, 48, 64]);
    let r = invoke("object_detector", &json!({"label": "cat", "frames": [48]}), &v, &q, &d).unwrap();
    assert_eq!(r.payload["frames"][0]["boxes"], json!([[0.1, 0.2, 0.5, 0.6]]));
    assert_eq!(r.frames_touched, vec![48]);
    let DictionaryEffect::Annotation { annotations } = &r.dictionary_effect else { panic!("expected annotations") };
    assert_eq!(annotations[0].kind, AnnotationKind::Detection);

    let dog = invoke("object_detector", &json!({"label": "dog", "frames": [48]}), &v, &q, &d).unwrap();
    assert_eq!(dog.payload["frames"][0]["boxes"], json!([]));
    assert_eq!(dog.dictionary_effect, DictionaryEffect::None);
}

#[test]
fn invisible_frame_is_rejected() {
    let v = cat_video();
    let q = qa(&v, "q", &["a", "b"], 0, (40, 55), QuestionKind::CountObjects);
    let d = dict(&v, &[16, 64]);
    let e = invoke("object_detector", &json!({"label": "cat", "frames": [48]}), &v, &q, &d).unwrap_err();
    assert_eq!(e, ToolError::FrameNotVisible(48));
}

#[test]
fn seeded_miss_rate_matches_an_independent_replay() {
    let mut v = video(1, &[]);
    for i in 0..100 {
        let x = (i % 10) as f64 * 0.09;
        let y = (i / 10) as f64 * 0.09;
        put_object(&mut v, 0, "cat", i, [x, y, x + 0.05, y + 0.05], None);
    }
    let q = qa(&v, "q", &["a", "b"], 0, (0, 0), QuestionKind::CountObjects);
    let d = dict(&v, &[0]);
    let noise = NoiseModel { seed: 3, p_miss: 0.5, ..NoiseModel::noiseless() };
    let args = json!({"label": "cat", "frames": [0]});
    let a = invoke_with(&noise, "object_detector", &args, &v, &q, &d, 0).unwrap();
    let b = invoke_with(&noise, "object_detector", &args, &v, &q, &d, 0).unwrap();
    assert_eq!(a, b);

    let mut rng = StreamKey::new(3, "q", "object_detector", 0).rng();
    let kept: Vec<BBox> = v.frames[0].objects.iter().filter(|_| !rng.random_bool(0.5)).map(|o| o.bbox).collect();
    assert_eq!(a.payload["frames"][0]["boxes"], json!(kept));
    assert!((30..=70).contains(&kept.len()), "kept {}", kept.len());
}

#[test]
fn grounding_matches_tokens_in_any_order() {
    let v = cat_video();
    let q = qa(&v, "q", &["a", "b"], 0, (40, 55), QuestionKind::EventOrder);
    let d = dict(&v, &[0, 60]);
    for desc in ["pour water", "water pour"] {
        let r = invoke("temporal_grounding", &json!({"description": desc}), &v, &q, &d).unwrap();
        assert_eq!(r.payload["span"], json!([40, 55]));
    }
    let e = invoke("temporal_grounding", &json!({"description": "juggling"}), &v, &q, &d).unwrap_err();
    assert!(matches!(e, ToolError::EventNotFound(_)));
}

#[test]
fn jitter_stays_in_bounds() {
    let v = video(30, &[("wave", 0, 29)]);
    let q = qa(&v, "q", &["a", "b"], 0, (0, 29), QuestionKind::EventOrder);
    let d = dict(&v, &[0]);
    let noise = NoiseModel { jitter_frames: 5, ..NoiseModel::noiseless() };
    for o in 0..50 {
        let r = invoke_with(&noise, "temporal_grounding", &json!({"description": "wave"}), &v, &q, &d, o).unwrap();
        let s: Span = serde_json::from_value(r.payload["span"].clone()).unwrap();
        assert!(s.start <= s.end && s.end <= 29);
    }
}

#[test]
fn referring_lists_events() {
    let v = video(120, &[("pour water", 40, 55), ("open door", 70, 80)]);
    assert_eq!(ops::refer_interval(&v, Span::new(40, 50)), "events: pour water");
    assert_eq!(ops::refer_interval(&v, Span::new(0, 10)), "no salient events");
    assert_eq!(ops::refer_interval(&v, Span::new(0, 119)), "events: pour water, open door");
}

#[test]
fn trimmer_keeps_the_span_only() {
    let v = video(120, &[]);
    let q = qa(&v, "q", &["a", "b"], 0, (40, 55), QuestionKind::EventOrder);
    let d = dict(&v, &[0, 40, 48, 90]);
    let r = invoke("video_trimmer", &json!({"span": [40, 55]}), &v, &q, &d).unwrap();
    let DictionaryEffect::TemporalUpdate { update } = &r.dictionary_effect else { panic!() };
    assert!(update.selection.frames().iter().all(|f| (40..=55).contains(f)));
    assert!(update.selection.frames().contains(&48));

    let (full, _) = ops::trim_video(&d, Span::new(0, 119));
    let kept = full.selection.frames();
    assert!([0, 40, 48, 90].iter().all(|k| kept.contains(k)));

    let e = invoke("video_trimmer", &json!({"span": [-5, 10]}), &v, &q, &d).unwrap_err();
    assert!(matches!(e, ToolError::IndexOutOfRange { index: -5, .. }));
}

fn annotated(v: &star_core::model::SyntheticVideo, notes: &[(usize, AnnotationKind, &str)], keys: &[usize]) -> star_core::frames::VisibleFrameDictionary {
    let mut d = dict(v, keys);
    for (f, kind, text) in notes {
        d.annotate(
            *f,
            star_core::frames::Annotation { source_tool: "fixture".into(), kind: *kind, payload: Payload::Text(text.to_string()), step: 0 },
        )
        .unwrap();
    }
    d
}

#[test]
fn vanilla_selection_keeps_matching_frames() {
    let v = video(100, &[]);
    let d = annotated(&v, &[(42, AnnotationKind::Ocr, "STOP")], &[0, 42, 80]);
    let (sel, fallback) = ops::select_frames(SelectorVariant::Vanilla, &v, &d, "stop sign");
    assert_eq!(sel.into_iter().collect::<Vec<_>>(), vec![42]);
    assert!(!fallback);

    let (all, fallback) = ops::select_frames(SelectorVariant::Vanilla, &v, &d, "red balloon");
    assert!(fallback);
    assert_eq!(all, d.key_set());
}

#[test]
fn akeys_adds_transition_frames() {
    let v = video(40, &[]);
    let c = AnnotationKind::Caption;
    let d = annotated(&v, &[(0, c, "kitchen"), (10, c, "kitchen"), (20, c, "garden"), (30, c, "garden")], &[0, 10, 20, 30]);
    let (sel, _) = ops::select_frames(SelectorVariant::AKeys, &v, &d, "unrelated");
    assert!(sel.contains(&10) && sel.contains(&20));
    assert!(!sel.contains(&0));
}

#[test]
fn selector_fallback_leaves_the_dictionary_alone() {
    let v = video(100, &[]);
    let q = qa(&v, "q", &["a", "b"], 0, (0, 9), QuestionKind::LocateText);
    let d = dict(&v, &[0, 50]);
    let r = invoke("frame_selector", &json!({"query": "nothing here"}), &v, &q, &d).unwrap();
    assert_eq!(r.payload["fallback"], json!(true));
    assert_eq!(r.dictionary_effect, DictionaryEffect::None);
}

#[test]
fn action_localization_returns_visible_frames_in_span() {
    let v = video(120, &[("pour water", 40, 55)]);
    let d = dict(&v, &[16, 48, 64]);
    assert_eq!(ops::localize_action(&v, &d, "pour water"), vec![48]);
    assert!(ops::localize_action(&v, &d, "juggle").is_empty());
    let inside = dict(&v, &[41, 50]);
    assert_eq!(ops::localize_action(&v, &inside, "pour"), vec![41, 50]);
}

#[test]
fn captions_follow_the_template() {
    let mut v = cat_video();
    put_object(&mut v, 10, "cat", 2, [0.1, 0.1, 0.2, 0.2], None);
    put_text(&mut v, 10, "STOP", [0.5, 0.5, 0.6, 0.6]);
    let d = dict(&v, &[0, 10, 48]);
    assert_eq!(ops::caption_frame(&v, &d, 10).unwrap(), "objects: cat; text: STOP; events: –");
    assert_eq!(ops::caption_frame(&v, &d, 0).unwrap(), "objects: –; text: –; events: –");
    assert_eq!(ops::caption_frame(&v, &d, 48).unwrap(), "objects: cat; text: STOP; events: pour water");
}

#[test]
fn image_qa_rule_table() {
    let mut v = cat_video();
    put_object(&mut v, 48, "cat", 2, [0.5, 0.6, 0.7, 0.9], Some("white"));
    let d = dict(&v, &[48]);
    assert_eq!(ops::answer_image_question(&v, &d, 48, "what does the sign say").unwrap(), "STOP");
    assert_eq!(ops::answer_image_question(&v, &d, 48, "how many cats are there").unwrap(), "2");
    assert_eq!(ops::answer_image_question(&v, &d, 48, "what color is the cat").unwrap(), "black, white");
    assert_eq!(ops::answer_image_question(&v, &d, 48, "why is she sad").unwrap(), "unknown");
}

#[test]
fn text_detector_reads_ground_truth() {
    let v = cat_video();
    let q = qa(&v, "q", &["a", "b"], 0, (48, 48), QuestionKind::LocateText);
    let d = dict(&v, &[0, 48]);
    let r = invoke("text_detector", &json!({"frames": [0, 48]}), &v, &q, &d).unwrap();
    assert_eq!(r.payload["frames"][0]["texts"], json!([]));
    assert_eq!(r.payload["frames"][1]["texts"][0]["content"], json!("STOP"));
}

#[test]
fn zoom_crops_later_queries() {
    let v = cat_video();
    let q = qa(&v, "q", &["a", "b"], 0, (48, 48), QuestionKind::CountObjects);
    let mut d = dict(&v, &[48]);
    let r = invoke("patch_zoomer", &json!({"frame": 48, "bbox": [0.0, 0.0, 1.0, 1.0]}), &v, &q, &d).unwrap();
    assert_eq!(r.payload["crop"], json!([0.0, 0.0, 1.0, 1.0]));

    let ann = |bbox: [f64; 4]| star_core::frames::Annotation {
        source_tool: "patch_zoomer".into(),
        kind: AnnotationKind::ZoomRef,
        payload: Payload::Record(json!({"crop": bbox})),
        step: 1,
    };
    d.annotate(48, ann([0.6, 0.7, 1.0, 1.0])).unwrap();
    let after = invoke("object_detector", &json!({"label": "cat", "frames": [48]}), &v, &q, &d).unwrap();
    assert_eq!(after.payload["frames"][0]["boxes"], json!([]));

    let e = invoke("patch_zoomer", &json!({"frame": 48, "bbox": [0.9, 0.9, 0.9, 0.95]}), &v, &q, &d).unwrap_err();
    assert!(matches!(e, ToolError::InvalidRegion(_)));
}

#[test]
fn marker_numbers_distinct_boxes() {
    let a = BBox::new(0.1, 0.1, 0.2, 0.2);
    let b = BBox::new(0.3, 0.3, 0.4, 0.4);
    let marks = ops::mark_bboxes(&[a, b, a]).unwrap();
    assert_eq!(marks.iter().map(|(m, _)| *m).collect::<Vec<_>>(), vec![1, 2]);
    assert!(ops::mark_bboxes(&[]).unwrap().is_empty());
}

#[test]
fn grid_shapes() {
    // rows = ceil(sqrt(k)), cols = ceil(k / rows)
    assert_eq!(grid_layout(9), (3, 3));
    assert_eq!(grid_layout(10), (4, 3));
    assert_eq!(grid_layout(1), (1, 1));
    assert_eq!(grid_layout(16), (4, 4));
    assert_eq!(grid_layout(17), (5, 4));
}

#[test]
fn tracker_counts_distinct_instances() {
    let mut v = video(20, &[]);
    for (f, id) in [(1, 1), (2, 1), (3, 2), (9, 3), (12, 3)] {
        put_object(&mut v, f, "person", id, [0.1, 0.1, 0.3, 0.3], None);
    }
    let mut rng = StreamKey::new(0, "e", "object_tracker", 0).rng();
    assert_eq!(ops::track_objects(&v, Span::new(0, 19), "person", 0.0, &mut rng), 3);
    assert_eq!(ops::track_objects(&v, Span::new(0, 5), "people", 0.0, &mut rng), 2);
    assert_eq!(ops::track_objects(&v, Span::new(0, 19), "dog", 0.0, &mut rng), 0);
}

#[test]
fn general_answers_at_the_limits() {
    let v = cat_video();
    let q = qa(&v, "what does the sign say", &["GO", "STOP", "EXIT"], 1, (48, 48), QuestionKind::LocateText);
    let mut d = dict(&v, &[48]);
    d.annotate(
        48,
        star_core::frames::Annotation { source_tool: "text_detector".into(), kind: AnnotationKind::Ocr, payload: Payload::Text("STOP".into()), step: 0 },
    )
    .unwrap();
    let sure = NoiseModel { p_roi_correct: 1.0, ..NoiseModel::noiseless() };
    for o in 0..20 {
        let r = invoke_with(&sure, "text_summarizer", &json!({}), &v, &q, &d, o).unwrap();
        assert_eq!(r.payload["answer"], json!("STOP"));
        assert_eq!(r.payload["covered"], json!(true));
    }
    let never = NoiseModel { p_general_correct: 0.0, ..NoiseModel::noiseless() };
    let a = invoke_with(&never, "video_qa", &json!({}), &v, &q, &d, 0).unwrap();
    let b = invoke_with(&never, "video_qa", &json!({}), &v, &q, &d, 0).unwrap();
    assert_ne!(a.payload["answer"], json!("STOP"));
    assert_eq!(a, b);
    assert_eq!(a.frames_touched.len(), 120);
}

#[test]
fn stubs_are_deterministic() {
    let v = video(120, &[("pour water", 40, 55)]);
    let mut v2 = v.clone();
    put_object(&mut v2, 3, "cat", 1, [0.1, 0.1, 0.2, 0.2], None);
    assert_eq!(ops::identify_objects(&v2, "how many cats appear"), vec!["cat".to_string()]);
    assert_eq!(ops::recognize_actions(&v, Span::new(40, 55)), vec!["pour water".to_string()]);
    let a = ops::canned("google_search", &json!({"query": "capital of France"})).unwrap();
    assert_eq!(a, ops::canned("google_search", &json!({"query": "capital of France"})).unwrap());
    assert!(matches!(ops::canned("nope", &json!({})), Err(ToolError::ToolNotFound(_))));
}

#[test]
fn frames_touched_are_in_range_for_every_tool() {
    let v = cat_video();
    let q = qa(&v, "how many cats", &["1", "2"], 0, (40, 55), QuestionKind::CountObjects);
    let d = dict(&v, &[0, 16, 48, 64]);
    let calls = [
        ("object_detector", json!({"label": "cat"})),
        ("image_captioner", json!({})),
        ("image_qa", json!({"question": "how many cats"})),
        ("text_detector", json!({})),
        ("object_tracker", json!({"label": "cat"})),
        ("temporal_referring", json!({"span": [30, 60]})),
        ("action_localization", json!({"action": "pour"})),
        ("video_qa", json!({})),
    ];
    for (tool, args) in calls {
        let r = invoke(tool, &args, &v, &q, &d).unwrap();
        assert!(r.frames_touched.iter().all(|&f| f < 120), "{tool}");
        assert_eq!(r.tool_name, tool);
    }
}

#[test]
fn replays_are_identical() {
    let suite = star_core::suite::Suite::generate(5, 10, &Default::default()).unwrap();
    let noise = NoiseModel::default();
    for (v, q) in suite.videos.iter().zip(&suite.questions) {
        let d = star_core::frames::VisibleFrameDictionary::init_uniform_sample(v).unwrap();
        for tool in ["object_detector", "text_detector", "image_captioner", "text_summarizer"] {
            let args = json!({"label": "person"});
            let first = invoke_with(&noise, tool, &args, v, q, &d, 0);
            for _ in 0..10 {
                assert_eq!(invoke_with(&noise, tool, &args, v, q, &d, 0), first);
            }
        }
    }
}

#[test]
fn set_selection_helper_sorts() {
    let s = FrameSelection::set([5, 1, 3]);
    assert_eq!(s.frames().into_iter().collect::<Vec<_>>(), vec![1, 3, 5]);
    let _ = TemporalUpdate { selection: s, mode: UpdateMode::Add };
}
