use mallnav_demo::Demo;
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

fn demo() -> Demo {
    Demo::new(3, 8).unwrap()
}

#[test]
fn images_match_dimensions() {
    let d = demo();
    assert_eq!(d.map_rgba().len(), (d.width() * d.height() * 4) as usize);
    assert_eq!(d.directory_rgba().len(), (d.directory_width() * d.directory_height() * 4) as usize);
    assert_eq!(parse(&d.stores()).as_array().unwrap().len(), 8);
}

#[test]
fn playback_ends_on_targets() {
    let d = demo();
    let v = parse(&d.registration("nonrigid").unwrap());
    let frames = v["frames"].as_array().unwrap();
    assert!(frames.len() > 2);
    assert!(v["overlap_percent"].as_f64().unwrap() >= 90.0);
    // every map store centroid ends near some moved directory centroid
    let last: Vec<[f64; 2]> = serde_json::from_value(frames.last().unwrap()["points"].clone()).unwrap();
    let targets: Vec<[f64; 2]> = serde_json::from_value(v["targets"].clone()).unwrap();
    for t in targets {
        let d = last.iter().map(|p| (p[0] - t[0]).hypot(p[1] - t[1])).fold(f64::INFINITY, f64::min);
        assert!(d < 3.0, "{t:?} {d}");
    }
    assert!(d.registration("projective").is_err());
}

#[test]
fn heavier_parking_never_adds_parking() {
    let d = demo();
    let light = parse(&d.route(1, 8, 1.0).unwrap());
    let heavy = parse(&d.route(1, 8, 50.0).unwrap());
    let f = |v: &Value| v["walkway_fraction"].as_f64().unwrap();
    assert!(f(&heavy) >= f(&light) - 1e-12);
    assert!(!heavy["sentences"].as_array().unwrap().is_empty());
    assert!(d.route(1, 99, 10.0).is_err());
    assert!(d.route(1, 2, 0.5).is_err());
}

#[test]
fn where_am_i_speaks() {
    let d = demo();
    let v = parse(&d.where_am_i(d.start_x(), d.start_y(), 90.0).unwrap());
    let s = v["sentences"].as_array().unwrap();
    assert!(s.iter().any(|x| x.as_str().unwrap().contains("feet")), "{v}");
}
