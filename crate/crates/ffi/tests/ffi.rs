use std::ffi::{CStr, CString};
use std::ptr;

use plc_capacity_ffi::*;

fn awgn(snr: f64) -> f64 {
    0.5 * (1.0 + snr).log2()
}

fn last_error() -> String {
    let p = plc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn channel(taps: &[f64], period: usize, noise: &[f64], noise_period: usize) -> *mut PlcChannel {
    let mut ch = ptr::null_mut();
    let status = unsafe {
        plc_channel_new(
            taps.as_ptr(),
            period,
            taps.len() / period,
            noise.as_ptr(),
            noise_period,
            noise.len() / noise_period,
            &mut ch,
        )
    };
    assert_eq!(status, PlcStatus::Ok);
    assert!(!ch.is_null());
    ch
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(plc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_arguments_are_reported() {
    let mut out = PlcCapacity::default();
    let status = unsafe { plc_capacity_thm2(ptr::null(), 1.0, 64, &mut out) };
    assert_eq!(status, PlcStatus::NullPointer);
    assert!(last_error().contains("channel"));

    let noise = [1.0];
    let mut ch = ptr::null_mut();
    let status = unsafe { plc_channel_new(ptr::null(), 1, 1, noise.as_ptr(), 1, 1, &mut ch) };
    assert_eq!(status, PlcStatus::NullPointer);
    assert!(ch.is_null());
    assert!(last_error().contains("taps"));

    let ch = channel(&[1.0], 1, &[1.0], 1);
    let status = unsafe { plc_capacity_thm1(ch, 1.0, 2, ptr::null_mut()) };
    assert_eq!(status, PlcStatus::NullPointer);
    unsafe { plc_channel_free(ch) };
    unsafe { plc_channel_free(ptr::null_mut()) };
}

#[test]
fn awgn_rates_through_every_solver() {
    let ch = channel(&[2.0], 1, &[0.5], 1);
    let rho = 1.5;
    let expected = awgn(rho * 4.0 / 0.5);

    let mut out = PlcCapacity::default();
    assert_eq!(unsafe { plc_capacity_thm1(ch, rho, 3, &mut out) }, PlcStatus::Ok);
    assert!((out.rate - expected).abs() < 1e-12);
    assert_eq!(out.block, 3);

    assert_eq!(
        unsafe { plc_capacity_thm1_converged(ch, rho, 1e-6, 16, &mut out) },
        PlcStatus::Ok
    );
    assert!((out.rate - expected).abs() < 1e-9);
    assert!(out.converged);

    assert_eq!(unsafe { plc_capacity_thm2(ch, rho, 64, &mut out) }, PlcStatus::Ok);
    assert!((out.rate - expected).abs() < 1e-12);
    assert_eq!(out.block, 64);

    let mut rate = 0.0;
    assert_eq!(unsafe { plc_tf_ofdm_rate(ch, rho, 2, 0, &mut rate) }, PlcStatus::Ok);
    assert!(rate <= expected + 1e-9 && rate > 0.0, "{rate}");
    unsafe { plc_channel_free(ch) };
}

#[test]
fn channel_info_reports_the_geometry() {
    let taps = [1.0, 0.5, 0.8, -0.2];
    let noise = [1.0, 1.2, 0.9];
    let ch = channel(&taps, 2, &noise, 3);
    let mut info = PlcChannelInfo::default();
    assert_eq!(unsafe { plc_channel_info(ch, &mut info) }, PlcStatus::Ok);
    assert_eq!(info.channel_period, 2);
    assert_eq!(info.noise_period, 3);
    assert_eq!(info.lcm, 6);
    assert_eq!(info.memory, 2);
    assert_eq!(info.block, info.k_min * info.lcm);
    unsafe { plc_channel_free(ch) };
}

#[test]
fn singular_noise_spectrum_is_degenerate() {
    // c(0) = 2, c(1) = 1 has a spectral null at pi.
    let ch = channel(&[1.0], 1, &[2.0, 1.0], 1);
    let mut out = PlcCapacity::default();
    let status = unsafe { plc_capacity_thm2(ch, 1.0, 64, &mut out) };
    assert_eq!(status, PlcStatus::Degenerate);
    assert!(!last_error().is_empty());
    unsafe { plc_channel_free(ch) };
}

#[test]
fn invalid_arguments_are_rejected() {
    let ch = channel(&[1.0], 1, &[1.0], 1);
    let mut out = PlcCapacity::default();
    assert_eq!(
        unsafe { plc_capacity_thm2(ch, 1.0, 15, &mut out) },
        PlcStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { plc_capacity_thm1(ch, -1.0, 2, &mut out) },
        PlcStatus::InvalidArgument
    );
    // success clears the message
    assert_eq!(unsafe { plc_capacity_thm2(ch, 1.0, 16, &mut out) }, PlcStatus::Ok);
    assert!(plc_last_error().is_null());
    unsafe { plc_channel_free(ch) };
}

#[test]
fn waterfill_matches_the_hand_solve() {
    let lambdas = [1.0, 2.0];
    let mut powers = [0.0; 2];
    let mut level = 0.0;
    let status = unsafe { plc_waterfill(lambdas.as_ptr(), 2, 1.75, powers.as_mut_ptr(), &mut level) };
    assert_eq!(status, PlcStatus::Ok);
    assert!((level - 1.625).abs() < 1e-12);
    assert!((powers[0] - 0.625).abs() < 1e-12);
    assert!((powers[1] - 1.125).abs() < 1e-12);

    let zeros = [0.0, 0.0];
    let status = unsafe { plc_waterfill(zeros.as_ptr(), 2, 1.0, powers.as_mut_ptr(), &mut level) };
    assert_eq!(status, PlcStatus::Degenerate);
}

#[test]
fn load_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ch.csv");
    std::fs::write(&path, "n_ch,l_isi\n2,1\n1.0\n0.5\n").unwrap();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let noise = [1.0];
    let mut ch = ptr::null_mut();
    assert_eq!(
        unsafe { plc_channel_load(cpath.as_ptr(), noise.as_ptr(), 1, 1, &mut ch) },
        PlcStatus::Ok
    );
    let mut info = PlcChannelInfo::default();
    assert_eq!(unsafe { plc_channel_info(ch, &mut info) }, PlcStatus::Ok);
    assert_eq!(info.channel_period, 2);
    unsafe { plc_channel_free(ch) };

    let missing = CString::new(dir.path().join("none.csv").to_str().unwrap()).unwrap();
    let mut ch = ptr::null_mut();
    assert_eq!(
        unsafe { plc_channel_load(missing.as_ptr(), noise.as_ptr(), 1, 1, &mut ch) },
        PlcStatus::Io
    );
    assert!(last_error().contains("none.csv"));
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/plc_capacity.h")).unwrap();
    for name in [
        "plc_version",
        "plc_last_error",
        "plc_channel_new",
        "plc_channel_load",
        "plc_channel_free",
        "plc_channel_info",
        "plc_capacity_thm1",
        "plc_capacity_thm1_converged",
        "plc_capacity_thm2",
        "plc_tf_ofdm_rate",
        "plc_waterfill",
        "PLC_STATUS_DEGENERATE",
        "typedef struct PlcChannel PlcChannel",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
