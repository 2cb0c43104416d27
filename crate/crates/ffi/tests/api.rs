use std::ffi::{CStr, CString};
use std::ptr;

use vcolor_ffi::*;

fn last_error() -> String {
    let p = vc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn gradient_rgb(w: usize, h: usize) -> Vec<u8> {
    (0..w * h)
        .flat_map(|i| {
            let (x, y) = (i % w, i / w);
            [(x * 255 / w) as u8, (y * 255 / h) as u8, 128]
        })
        .collect()
}

fn lab(rgb: &[u8], w: usize, h: usize) -> *mut VcLabFrame {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { vc_lab_from_rgb(rgb.as_ptr(), w, h, &mut out) }, VcStatus::Ok);
    out
}

fn zero_flow(w: usize, h: usize) -> *mut VcFlow {
    let z = vec![0.0f32; w * h];
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { vc_flow_from_planes(z.as_ptr(), z.as_ptr(), w, h, &mut out) }, VcStatus::Ok);
    out
}

#[test]
fn rgb_lab_round_trip() {
    let (w, h) = (12, 7);
    let rgb = gradient_rgb(w, h);
    let frame = lab(&rgb, w, h);
    let (mut fw, mut fh) = (0, 0);
    unsafe {
        assert_eq!(vc_lab_dims(frame, &mut fw, &mut fh), VcStatus::Ok);
        assert_eq!((fw, fh), (w, h));
        let mut back = vec![0u8; w * h * 3];
        assert_eq!(vc_lab_to_rgb(frame, back.as_mut_ptr(), back.len()), VcStatus::Ok);
        assert!(rgb.iter().zip(&back).all(|(a, b)| a.abs_diff(*b) <= 1));
        let mut l = vec![0.0f32; w * h];
        assert_eq!(vc_lab_channel(frame, 0, l.as_mut_ptr(), l.len()), VcStatus::Ok);
        assert!(l.iter().all(|v| (0.0..=100.0).contains(v)));
        vc_lab_free(frame);
    }
}

#[test]
fn zero_flow_step_keeps_the_previous_frame() {
    let (w, h) = (10, 10);
    let prev = lab(&gradient_rgb(w, h), w, h);
    let flow = zero_flow(w, h);
    let mut next = ptr::null_mut();
    let mut fraction = -1.0;
    unsafe {
        assert_eq!(vc_propagate_step(prev, prev, flow, 25.0, &mut next, &mut fraction), VcStatus::Ok);
        assert_eq!(fraction, 0.0);
        for ch in 0..3 {
            let mut a = vec![0.0f32; w * h];
            let mut b = vec![0.0f32; w * h];
            vc_lab_channel(prev, ch, a.as_mut_ptr(), a.len());
            vc_lab_channel(next, ch, b.as_mut_ptr(), b.len());
            assert_eq!(a, b, "channel {ch}");
        }
        assert_eq!(vc_propagate_step(prev, prev, flow, 25.0, &mut next, ptr::null_mut()), VcStatus::Ok);
        vc_lab_free(next);
        vc_lab_free(prev);
        vc_flow_free(flow);
    }
}

#[test]
fn flow_estimate_write_and_load() {
    let (w, h) = (40, 40);
    let tex = |x: f32, y: f32| 50.0 + 20.0 * (x * 0.4).sin() * (y * 0.3).cos() + 10.0 * (x * 0.13 + y * 0.21).sin();
    let src: Vec<f32> = (0..w * h).map(|i| tex((i % w) as f32, (i / w) as f32)).collect();
    let tgt: Vec<f32> = (0..w * h).map(|i| tex((i % w) as f32 + 1.0, (i / w) as f32)).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("f.flo").to_str().unwrap()).unwrap();
    unsafe {
        let mut flow = ptr::null_mut();
        assert_eq!(vc_flow_estimate(tgt.as_ptr(), src.as_ptr(), w, h, 0, 0, 0, &mut flow), VcStatus::Ok);
        let mut u = vec![0.0f32; w * h];
        let mut v = vec![0.0f32; w * h];
        assert_eq!(vc_flow_planes(flow, u.as_mut_ptr(), v.as_mut_ptr(), w * h), VcStatus::Ok);
        let centre = 20 * w + 20;
        assert!((u[centre] - 1.0).abs() < 0.1 && v[centre].abs() < 0.1, "{} {}", u[centre], v[centre]);

        assert_eq!(vc_flow_write(flow, path.as_ptr()), VcStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(vc_flow_load(path.as_ptr(), &mut loaded), VcStatus::Ok);
        let mut u2 = vec![0.0f32; w * h];
        let mut v2 = vec![0.0f32; w * h];
        vc_flow_planes(loaded, u2.as_mut_ptr(), v2.as_mut_ptr(), w * h);
        assert_eq!((u, v), (u2, v2));
        vc_flow_free(flow);
        vc_flow_free(loaded);

        let missing = CString::new(dir.path().join("none.flo").to_str().unwrap()).unwrap();
        assert_eq!(vc_flow_load(missing.as_ptr(), &mut loaded), VcStatus::Io);
        std::fs::write(dir.path().join("bad.flo"), b"nope").unwrap();
        let bad = CString::new(dir.path().join("bad.flo").to_str().unwrap()).unwrap();
        assert_eq!(vc_flow_load(bad.as_ptr(), &mut loaded), VcStatus::Format);
    }
}

#[test]
fn metrics() {
    let (w, h) = (4, 4);
    let red: Vec<u8> = [255u8, 0, 0].repeat(w * h);
    let mut value = 0.0;
    unsafe {
        assert_eq!(vc_colorfulness(red.as_ptr(), w, h, &mut value), VcStatus::Ok);
        assert!((value - 85.53).abs() < 0.01, "{value}");
        assert_eq!(vc_psnr(red.as_ptr(), red.as_ptr(), w, h, &mut value), VcStatus::Ok);
        assert_eq!(value, 99.0, "identical images hit the cap");
        let video = red.repeat(8);
        assert_eq!(vc_cdc(video.as_ptr(), 8, w, h, &mut value), VcStatus::Ok);
        assert_eq!(value, 0.0);
        assert_eq!(vc_cdc(video.as_ptr(), 2, w, h, &mut value), VcStatus::InvalidArgument);
    }
}

#[test]
fn errors_are_reported() {
    let rgb = gradient_rgb(4, 4);
    let mut frame = ptr::null_mut();
    unsafe {
        assert_eq!(vc_lab_from_rgb(ptr::null(), 4, 4, &mut frame), VcStatus::NullPointer);
        assert!(last_error().contains("rgb"));
        assert_eq!(vc_lab_from_rgb(rgb.as_ptr(), 0, 4, &mut frame), VcStatus::InvalidArgument);

        let ok = lab(&rgb, 4, 4);
        assert!(vc_last_error_message().is_null(), "success clears the message");
        let mut small = vec![0u8; 10];
        assert_eq!(vc_lab_to_rgb(ok, small.as_mut_ptr(), small.len()), VcStatus::InvalidArgument);
        let mut plane = vec![0.0f32; 16];
        assert_eq!(vc_lab_channel(ok, 3, plane.as_mut_ptr(), 16), VcStatus::InvalidArgument);

        let other = lab(&gradient_rgb(5, 4), 5, 4);
        let flow = zero_flow(4, 4);
        let mut next = ptr::null_mut();
        assert_eq!(vc_propagate_step(ok, other, flow, 25.0, &mut next, ptr::null_mut()), VcStatus::DimensionMismatch);
        assert!(!last_error().is_empty());
        assert!(next.is_null());

        vc_lab_free(ok);
        vc_lab_free(other);
        vc_flow_free(flow);
        vc_lab_free(ptr::null_mut());
        vc_flow_free(ptr::null_mut());
    }
    let version = unsafe { CStr::from_ptr(vc_version()) }.to_str().unwrap();
    assert_eq!(version, env!("CARGO_PKG_VERSION"));
}
