use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use vcolor::colorizer::{colorize_frame, ColorizeRequest, Colorizer, ExternalColorizer, ExternalSpec};
use vcolor::flow::PyramidalLucasKanade;
use vcolor::pipeline::{propagate, PropagationOptions, Sequence};
use vcolor::plane::Plane;
use vcolor::prompt::PromptSchedule;
use vcolor::{Error, ProviderError};

fn mock(kind: &str) -> ExternalSpec {
    ExternalSpec::new(env!("CARGO_BIN_EXE_vcolor"))
        .arg("mock-provider")
        .arg("--kind")
        .arg(kind)
        .timeout(Duration::from_secs(20))
}

fn request(frame: usize, w: usize, h: usize) -> ColorizeRequest {
    let luma = Plane::from_fn(w, h, |x, y| (x * 7 + y * 3) as f32 % 100.0).unwrap();
    let prompt = PromptSchedule::generic().prompt_for_frame(frame, &BTreeSet::new());
    ColorizeRequest::new(frame, luma, None, prompt).unwrap()
}

fn provider_kind(e: Error) -> ProviderError {
    match e {
        Error::Provider { kind, .. } => kind,
        other => panic!("expected a provider error, got {other}"),
    }
}

#[test]
fn sepia_round_trip() {
    let mut p = ExternalColorizer::launch(&mock("sepia")).unwrap();
    assert_eq!(p.name(), "mock-sepia");
    for t in 0..3 {
        let req = request(t, 9, 5);
        let frame = colorize_frame(&mut p, &req).unwrap();
        assert_eq!(frame.l, req.luma);
        // 16-bit chroma codes resolve to within 255/65535/2 of the sent value.
        assert!(frame.a.as_slice().iter().all(|&a| (a - 12.0).abs() < 2e-3));
        assert!(frame.b.as_slice().iter().all(|&b| (b - 24.0).abs() < 2e-3));
    }
    assert!(p.workdir().join("luma_000002.png").exists());
    p.shutdown().unwrap();
}

#[test]
fn sends_masks_when_present() {
    let mut p = ExternalColorizer::launch(&mock("echo-gray")).unwrap();
    let mut req = request(4, 6, 6);
    req.masks = Some(Plane::filled(6, 6, 3u16).unwrap());
    let frame = colorize_frame(&mut p, &req).unwrap();
    assert!(frame.a.as_slice().iter().all(|&a| a.abs() < 2e-3));
    assert!(p.workdir().join("masks_000004.png").exists());
    p.shutdown().unwrap();
}

#[test]
fn wrong_dimensions_are_rejected() {
    let mut p = ExternalColorizer::launch(&mock("wrong-dims")).unwrap();
    let err = colorize_frame(&mut p, &request(0, 8, 4)).unwrap_err();
    match provider_kind(err) {
        ProviderError::DimensionMismatch {
            expected_width,
            actual_width,
            ..
        } => assert_eq!((expected_width, actual_width), (8, 9)),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn malformed_reply_is_rejected() {
    let mut p = ExternalColorizer::launch(&mock("malformed")).unwrap();
    let err = p.colorize(&request(0, 4, 4)).unwrap_err();
    assert!(matches!(provider_kind(err), ProviderError::Malformed(_)));
    // The provider is dropped after a protocol violation.
    assert!(p.colorize(&request(1, 4, 4)).is_err());
}

#[test]
fn reported_errors_surface_the_message() {
    let mut p = ExternalColorizer::launch(&mock("report-error")).unwrap();
    match provider_kind(p.colorize(&request(2, 4, 4)).unwrap_err()) {
        ProviderError::Reported(m) => assert_eq!(m, "model failed"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn missing_ready_fails_handshake() {
    let err = ExternalColorizer::launch(&mock("no-ready")).unwrap_err();
    assert!(matches!(provider_kind(err), ProviderError::Handshake(_)));
}

#[test]
fn missing_program_fails_launch() {
    let err = ExternalColorizer::launch(&ExternalSpec::new("/nonexistent/provider")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(matches!(provider_kind(err), ProviderError::Launch(_)));
}

#[test]
fn hung_provider_times_out() {
    let spec = mock("hang").timeout(Duration::from_millis(400));
    let mut p = ExternalColorizer::launch(&spec).unwrap();
    let started = Instant::now();
    let err = p.colorize(&request(0, 4, 4)).unwrap_err();
    assert!(matches!(provider_kind(err), ProviderError::Timeout(_)));
    assert!(started.elapsed() < Duration::from_secs(10));
}

#[test]
fn crash_mid_run_aborts_with_partial_manifest() {
    let spec = mock("die-after").arg("--after").arg("3");
    let mut p = ExternalColorizer::launch(&spec).unwrap();
    let lumas: Vec<_> = (0..6).map(|t| Plane::from_fn(16, 16, |x, y| ((x + y + t) % 50) as f32 + 20.0).unwrap()).collect();
    let cuts = BTreeSet::new();
    let schedule = PromptSchedule::generic();
    let seq = Sequence {
        lumas: &lumas,
        masks: None,
        scene_cuts: &cuts,
        schedule: &schedule,
    };
    let failure = propagate(&seq, PropagationOptions::default(), &mut p, &mut PyramidalLucasKanade::default()).unwrap_err();
    assert!(matches!(
        failure.error,
        Error::Provider {
            frame: 3,
            kind: ProviderError::Exited(_)
        }
    ));
    assert_eq!(failure.partial.frames.len(), 3);
    assert_eq!(failure.partial.manifest.frames.len(), 3);
    assert!(!failure.partial.manifest.completed);
}
