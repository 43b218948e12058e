use sdgan::dirac::{routh_hurwitz, DiracParams};
use sdgan_web_demo::{flow, play, spectrum, stability_map, SPECTRUM_LEN, TRAJECTORY_STRIDE};

#[test]
fn play_with_teacher_converges_and_without_does_not() {
    let sd = play(0.1, 1.0, 0.99, 2000, 1.0, 0.0).unwrap();
    assert_eq!(sd.len() % TRAJECTORY_STRIDE, 0);
    let last = &sd[sd.len() - TRAJECTORY_STRIDE..];
    assert!(last[1].abs() + last[2].abs() < 1e-2);

    let plain = play(0.1, 0.0, 0.0, 2000, 1.0, 0.0).unwrap();
    let last = &plain[plain.len() - TRAJECTORY_STRIDE..];
    assert!(last[1].hypot(last[2]) > 1.0);
}

#[test]
fn play_rejects_bad_beta() {
    assert!(play(0.1, 1.0, 1.0, 10, 1.0, 0.0).is_err());
}

#[test]
fn flow_is_thinned_and_keeps_endpoints() {
    let p = DiracParams::default();
    let out = flow(&p, 10.0, 1e-3, 1.0, 0.0, 500).unwrap();
    let n = out.len() / TRAJECTORY_STRIDE;
    assert!(n <= 502, "{n} points");
    assert_eq!(out[0], 0.0);
    assert!((out[(n - 1) * TRAJECTORY_STRIDE] - 10.0).abs() < 1e-9);
}

#[test]
fn spectrum_matches_core_report() {
    let p = DiracParams::new(1.0, 2.0, 0.05, 0.3, -1.5).unwrap();
    let s = spectrum(&p).unwrap();
    let r = routh_hurwitz(&p);
    assert_eq!(s.len(), SPECTRUM_LEN);
    assert_eq!(s[6], r.margin);
    assert_eq!(s[7], 1.0);
    assert_eq!(s[8], r.max_real_part);
}

#[test]
fn map_first_row_is_marginal() {
    let n = 8;
    let m = stability_map(1.0, 1.0, 1.0, 2.0, 0.2, n).unwrap();
    assert_eq!(m.len(), n * n);
    assert!(m[..n].iter().all(|v| v.abs() < 1e-9));
    assert!(m[n..].iter().all(|v| *v < 0.0));
    assert!(stability_map(1.0, 1.0, 1.0, 2.0, 0.2, 1).is_err());
}
