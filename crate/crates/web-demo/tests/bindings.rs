use iglu_web_demo::{action_names, task_ids, try_explore_match, try_score_text, Playground};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn playground_places_a_block() {
    let mut p = Playground::try_new("L5", 0).unwrap();
    let s = parse(&p.state());
    assert_eq!(s["layers"].as_array().unwrap().len(), 9);
    assert_eq!(s["max_match"], 0);
    assert_eq!(s["target_blocks"], 5);
    // tilt down once to aim at the floor cell ahead, pick red, place
    p.try_step(6).unwrap();
    p.try_step(14).unwrap();
    let step = parse(&p.try_step(11).unwrap());
    assert_eq!(step["action"], "place_block");
    let s = parse(&p.state());
    assert_eq!(s["step_index"], 3);
    let layer0 = s["layers"][0].as_str().unwrap();
    assert_eq!(layer0.bytes().filter(|b| b.is_ascii_digit() && *b != b'0').count(), 1);
    assert_eq!(s["max_match"], 1);
    assert_eq!(s["matched"].as_array().unwrap().len(), 1);
    assert!(p.try_step(99).is_err());
}

#[test]
fn unknown_task_rejected() {
    assert!(Playground::try_new("nope", 0).is_err());
    let ids = parse(&task_ids());
    assert!(ids.as_array().unwrap().iter().any(|v| v == "L5"));
    assert_eq!(parse(&action_names()).as_array().unwrap().len(), 18);
}

#[test]
fn explore_rotated_copy() {
    let target = r#"[[3,0,3,"red"],[4,0,3,"red"],[4,0,4,"blue"]]"#;
    // quarter turn about the zone center: (u, w) -> (w, -u) around (5, 5)
    let built = r#"[[3,0,7,"red"],[3,0,6,"red"],[4,0,6,"blue"]]"#;
    let out = parse(&try_explore_match(built, target).unwrap());
    assert_eq!(out["max_match"], 3);
    assert_eq!(out["matched"].as_array().unwrap().len(), 3);
    assert!(try_explore_match("[", target).unwrap_err().starts_with("built:"));
}

#[test]
fn score_identical_text() {
    let out = parse(&try_score_text("put a red block on the left", "put a red block on the left").unwrap());
    assert_eq!(out["bleu"][3], 1.0);
    assert_eq!(out["keywords"]["colors"]["precision"], 1.0);
}
