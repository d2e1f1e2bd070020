mod common;

use privhub::analyzer::analyze;
use privhub::fixtures::MANIFESTS;
use privhub::manifest::validate_manifest;

fn sentences(name: &str) -> Vec<String> {
    analyze(&common::fixture(name)).sentences().into_iter().map(str::to_string).collect()
}

#[test]
fn fixtures_validate_without_warnings() {
    for name in MANIFESTS {
        let m = common::fixture(name);
        let r = validate_manifest(&m);
        assert!(r.is_installable(), "{name}: {:?}", r.errors);
        assert!(analyze(&m).warnings.is_empty(), "{name}");
    }
}

#[test]
fn weekly_tv_summary() {
    assert_eq!(
        sentences("tv_summary"),
        ["For every week, the app sends duration data aggregated by content category to www.abc.com."]
    );
}

#[test]
fn voice_assistant() {
    assert_eq!(
        sentences("voice_assistant"),
        ["When the microphone detects a trigger phrase, the app sends anonymized speech audios to www.abc.com."]
    );
}

#[test]
fn productivity_has_conditional_fallback() {
    assert_eq!(
        sentences("productivity"),
        [
            "For every 30 minutes, the app sends extracted poses to www.abc.com.",
            "For every 30 minutes, the app sends cropped person images to www.abc.com if the app cannot recognize poses from the raw image.",
        ]
    );
}

#[test]
fn hello_visitor() {
    assert_eq!(
        sentences("hello_visitor"),
        ["When the doorbell camera detects a motion, the app sends cropped face images to HelloVisitor.com."]
    );
}

#[test]
fn baby_monitor_condition_comes_from_the_join() {
    assert_eq!(
        sentences("baby_monitor"),
        ["When the microphone detects a sound, the app sends raw audio to www.abc.com if the app recognizes crying sounds from the raw audio."]
    );
}

#[test]
fn permissions_per_fixture() {
    let expect: [(&str, &[&str]); 6] = [
        ("hello_visitor", &["face image → HelloVisitor.com"]),
        ("baby_monitor", &["raw audio → www.abc.com"]),
        ("tv_summary", &["aggregated raw tabular → www.abc.com"]),
        ("voice_assistant", &["anonymized speech audio → www.abc.com"]),
        ("productivity", &["pose tabular → www.abc.com", "person image → www.abc.com"]),
        ("water_leak", &["raw scalar → broker.abc.com:1883"]),
    ];
    for (name, perms) in expect {
        assert_eq!(analyze(&common::fixture(name)).permission_summaries(), perms, "{name}");
    }
}

#[test]
fn schedule_adds_a_condition() {
    let m = privhub::rewriter::insert_time_schedule(&common::fixture("hello_visitor"), "post-faces", &[(61_200_000, 68_400_000)]).unwrap();
    let a = analyze(&m);
    assert_eq!(
        a.sentences(),
        ["When the doorbell camera detects a motion, the app sends cropped face images to HelloVisitor.com if the time is classified as allowed."]
    );
    assert_eq!(a.permission_summaries(), ["face image → HelloVisitor.com"]);
}

#[test]
fn cyclic_manifests_still_analyze() {
    let mut m = common::fixture("baby_monitor");
    m.graph.iter_mut().find(|n| n.id == "post-audio").unwrap().wires.push("mic".into());
    assert!(!validate_manifest(&m).is_installable());
    let _ = analyze(&m);
}
