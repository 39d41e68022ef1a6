use std::path::{Path, PathBuf};

use palmkey_core::engine::ActionType;
use palmkey_core::interface::ClickEdge;
use palmkey_core::mapping::MappingMode;
use palmkey_pipeline::config::BackendChoice;
use palmkey_pipeline::model_file::{load_model, save_model};
use palmkey_pipeline::source::save_image;
use palmkey_pipeline::{
    run_calibration, run_loop, GestureScript, ImageSequence, NoObserver, Pipeline, PipelineConfig, ReportLog,
    ScriptSource,
};

fn fox_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scripts/fox.gesture")
}

fn run_fox(backend: BackendChoice) -> (palmkey_pipeline::RunSummary, ReportLog) {
    let mut source = ScriptSource::load(&fox_path()).unwrap();
    let config = PipelineConfig {
        backend,
        ..PipelineConfig::default()
    };
    let mut pipeline = Pipeline::new(config, (640, 480), 30.0).unwrap();
    let mut log = ReportLog::default();
    let summary = run_loop(&mut pipeline, &mut source, &mut log).unwrap();
    (summary, log)
}

#[test]
fn fox_types_fox_with_interface_control() {
    let (summary, log) = run_fox(BackendChoice::InterfaceControl);
    assert_eq!(summary.text_buffer.as_deref(), Some("fox"));
    let triples: Vec<[i32; 3]> = summary.orders.iter().map(|o| o.triple()).collect();
    assert_eq!(triples, vec![[1, 102, 0], [1, 111, 0], [1, 120, 0]]);
    assert_eq!(summary.stage_errors, 0);
    let pages: Vec<&str> = log.reports.iter().filter_map(|r| r.page_changed.as_deref()).collect();
    assert_eq!(pages, vec!["letters_nz"]);

    // Four presses: f, the page tab, o, x; edges alternate.
    let edges: Vec<ClickEdge> = log
        .reports
        .iter()
        .map(|r| r.edge)
        .filter(|e| *e != ClickEdge::None)
        .collect();
    assert_eq!(edges.len(), 8);
    assert!(edges.chunks(2).all(|c| c == [ClickEdge::Down, ClickEdge::Up]));
}

#[test]
fn fox_recorder_log_is_reproducible() {
    let (a, _) = run_fox(BackendChoice::Record);
    let (b, _) = run_fox(BackendChoice::Record);
    let lines = a.log_lines.clone().unwrap();
    assert_eq!(a.log_lines, b.log_lines);
    assert_eq!(lines.len(), 3);
    let fields: Vec<Vec<&str>> = lines.iter().map(|l| l.split('\t').collect()).collect();
    for (i, (f, p1)) in fields.iter().zip(["102", "111", "120"]).enumerate() {
        assert_eq!(f[0], (i + 1).to_string());
        assert_eq!(&f[2..], &["1", p1, "0"]);
    }
}

#[test]
fn scripted_press_over_f_reports_order() {
    let (_, log) = run_fox(BackendChoice::InterfaceControl);
    let first = log.reports.iter().find(|r| !r.orders.is_empty()).unwrap();
    assert_eq!(first.orders[0].order.triple(), [1, 102, 0]);
    assert_eq!(first.zone.as_deref(), Some("key_f"));
    assert_eq!(first.page, "letters_am");
}

#[test]
fn image_sequence_matches_script() {
    let script = GestureScript::parse(
        "size 96 72\nbackground 40 70 120\nnone\nnone\nnone\n48 36 12 16 open\n48 36 12 16 open\n",
        None,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    for i in 0..script.len() {
        let ext = if i % 2 == 0 { "png" } else { "ppm" };
        save_image(&script.render(i), &dir.path().join(format!("f{i:03}.{ext}"))).unwrap();
    }
    let config = PipelineConfig {
        calibration_frames: 3,
        ..PipelineConfig::default()
    };
    let mut seq = ImageSequence::open(dir.path(), 30.0).unwrap();
    assert_eq!(seq.len(), 5);
    let mut p1 = Pipeline::new(config.clone(), (96, 72), 30.0).unwrap();
    let mut a = ReportLog::default();
    run_loop(&mut p1, &mut seq, &mut a).unwrap();

    let mut p2 = Pipeline::new(config, (96, 72), 30.0).unwrap();
    let mut b = ReportLog::default();
    run_loop(&mut p2, &mut ScriptSource::new(script), &mut b).unwrap();
    let strip = |r: &palmkey_pipeline::FrameReport| (r.frame_index, r.mask_pixels, r.hand.map(|h| h.area), r.cursor);
    assert_eq!(
        a.reports.iter().map(strip).collect::<Vec<_>>(),
        b.reports.iter().map(strip).collect::<Vec<_>>()
    );
    assert!(a.reports.last().unwrap().hand.is_some());
}

#[test]
fn saved_model_replaces_calibration() {
    let mut source = ScriptSource::load(&fox_path()).unwrap();
    let model = run_calibration(&mut source, 30, 2.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bg.model");
    save_model(&model, &path).unwrap();
    assert_eq!(load_model(&path).unwrap(), model);

    // The remaining frames alone still type "fox".
    let config = PipelineConfig {
        background_model: Some(path),
        ..PipelineConfig::default()
    };
    let mut pipeline = Pipeline::new(config, (640, 480), 30.0).unwrap();
    assert!(!pipeline.is_calibrating());
    let summary = run_loop(&mut pipeline, &mut source, &mut NoObserver).unwrap();
    assert_eq!(summary.text_buffer.as_deref(), Some("fox"));
}

#[test]
fn relative_modes_move_without_jumping() {
    for mode in [MappingMode::LinearRelative, MappingMode::NonlinearRelative] {
        let mut source = ScriptSource::load(&fox_path()).unwrap();
        let mut config = PipelineConfig::default();
        config.mapping.mode = mode;
        let mut pipeline = Pipeline::new(config, (640, 480), 30.0).unwrap();
        let mut log = ReportLog::default();
        run_loop(&mut pipeline, &mut source, &mut log).unwrap();
        // The first frame with a hand only sets the reference position.
        let first = log.reports.iter().position(|r| r.hand.is_some()).unwrap();
        assert_eq!(log.reports[first].cursor, (320.0, 240.0));
        assert!(log.reports.iter().all(|r| r.mode == mode));
    }
}

#[test]
fn mouse_pad_double_click() {
    // Two quick presses on the left button give a left click and a double.
    let mut text = String::from("size 320 240\nnone\nnone\nnone\n");
    // Center of the left button (165, 120) seen through the 10% margin.
    let (x, y) = (32.0 + 165.0 * 0.4, 24.0 + 120.0 * 0.4);
    for state in ["open"; 6]
        .iter()
        .chain(&["closed"; 3])
        .chain(&["open"; 2])
        .chain(&["closed"; 3])
        .chain(&["open"; 2])
    {
        text.push_str(&format!("{x} {y} 18 24 {state}\n"));
    }
    let script = GestureScript::parse(&text, None).unwrap();
    let mut config = PipelineConfig {
        calibration_frames: 3,
        ..PipelineConfig::default()
    };
    config.set("interface.path", "builtin:mouse").unwrap();
    let mut pipeline = Pipeline::new(config, (320, 240), 30.0).unwrap();
    let summary = run_loop(&mut pipeline, &mut ScriptSource::new(script), &mut NoObserver).unwrap();
    let actions: Vec<ActionType> = summary.orders.iter().map(|o| o.action).collect();
    assert_eq!(actions, vec![ActionType::MouseLeft, ActionType::MouseDouble]);
}
