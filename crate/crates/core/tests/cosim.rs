//! Compiles emitted C++ with the system compiler and runs the testbench.
//! Skipped (with a note) when no compiler is on PATH.

use std::path::Path;
use std::process::Command;

use chaosnet::ann::{Activation, AnnModel, Arch};
use chaosnet::codegen::{generate_bundle, render_testbench, CodegenRequest};
use chaosnet::dse::{mac_count, p_max, CandidateDesign, DspMode};
use chaosnet::oscillator;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn compiler() -> Option<&'static str> {
    ["c++", "g++", "clang++"].into_iter().find(|c| {
        Command::new(c)
            .arg("--version")
            .output()
            .map(|o| o.status.success())
            .unwrap_or(false)
    })
}

fn model(arch: Arch, act: Activation, seed: u64) -> AnnModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = AnnModel::zeros(arch, act);
    let scale = 1.5 / (arch.hidden as f32).sqrt();
    for v in
        m.w1.iter_mut()
            .chain(m.b1.iter_mut())
            .chain(m.w2.iter_mut())
            .chain(m.b2.iter_mut())
    {
        *v = rng.gen_range(-scale..scale);
    }
    m
}

fn design(p: u32, i: usize) -> CandidateDesign {
    let (mul, add) = mac_count(p, i);
    CandidateDesign {
        p,
        mode: DspMode::WithDsp,
        multipliers: mul,
        adders: add,
        est_latency_cycles: 0.0,
        est_lut: 0.0,
        est_dsp: mul,
    }
}

fn build_and_run(cxx: &str, dir: &Path, core: &str) -> std::process::Output {
    let exe = dir.join("tb");
    let status = Command::new(cxx)
        .args(["-std=c++11", "-O2", "-ffp-contract=off", "-o"])
        .arg(&exe)
        .arg(dir.join(format!("{core}.cpp")))
        .arg(dir.join(format!("{core}_tb.cpp")))
        .status()
        .expect("compiler runs");
    assert!(status.success(), "compilation failed in {}", dir.display());
    Command::new(&exe).output().expect("testbench runs")
}

#[test]
fn emitted_core_matches_simulator_at_every_parallelism() {
    let Some(cxx) = compiler() else {
        eprintln!("no C++ compiler found; skipping");
        return;
    };
    let m = model(Arch::new(3, 8, 3), Activation::Relu, 9);
    let seed = vec![0.3, 0.6, 0.45];
    for p in 0..=p_max(8) {
        let req = CodegenRequest::new(&m, design(p, 3), "osc", seed.clone(), 1000);
        let dir = tempfile::tempdir().unwrap();
        generate_bundle(&req)
            .unwrap()
            .write_to(dir.path(), false)
            .unwrap();
        let out = build_and_run(cxx, dir.path(), "osc");
        assert!(
            out.status.success(),
            "P={p}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(String::from_utf8_lossy(&out.stdout).contains("PASS: 1000"));
    }
}

#[test]
fn zero_weight_model_is_a_fixed_point_in_cpp() {
    let Some(cxx) = compiler() else {
        eprintln!("no C++ compiler found; skipping");
        return;
    };
    let mut m = AnnModel::zeros(Arch::new(3, 4, 3), Activation::Relu);
    m.b2 = vec![0.25, 0.5, 0.75];
    let req = CodegenRequest::new(&m, design(1, 3), "fixed", m.b2.clone(), 50);
    let dir = tempfile::tempdir().unwrap();
    generate_bundle(&req)
        .unwrap()
        .write_to(dir.path(), false)
        .unwrap();
    let out = build_and_run(cxx, dir.path(), "fixed");
    assert!(out.status.success());
}

#[test]
fn corrupted_vector_fails_naming_the_iteration() {
    let Some(cxx) = compiler() else {
        eprintln!("no C++ compiler found; skipping");
        return;
    };
    let m = model(Arch::new(3, 4, 3), Activation::Relu, 2);
    let req = CodegenRequest::new(&m, design(0, 3), "osc", vec![0.2, 0.4, 0.6], 20);
    let bundle = generate_bundle(&req).unwrap();
    let mut expected = oscillator::generate(&m, &req.seed, 20).unwrap();
    expected[3 * 6 + 1] = f32::from_bits(expected[3 * 6 + 1].to_bits() ^ 1);
    let dir = tempfile::tempdir().unwrap();
    bundle.write_to(dir.path(), false).unwrap();
    std::fs::write(
        dir.path().join("osc_tb.cpp"),
        render_testbench(&req, &expected).unwrap(),
    )
    .unwrap();
    let out = build_and_run(cxx, dir.path(), "osc");
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("iteration 7, dimension 1"), "{err}");
}

#[test]
fn transcendental_activations_match_in_cpp() {
    let Some(cxx) = compiler() else {
        eprintln!("no C++ compiler found; skipping");
        return;
    };
    for act in [Activation::Tanh, Activation::Sigmoid] {
        let m = model(Arch::new(2, 4, 2), act, 4);
        let req = CodegenRequest::new(&m, design(2, 2), "osc", vec![0.5, 0.5], 200);
        let dir = tempfile::tempdir().unwrap();
        generate_bundle(&req)
            .unwrap()
            .write_to(dir.path(), false)
            .unwrap();
        let out = build_and_run(cxx, dir.path(), "osc");
        assert!(
            out.status.success(),
            "{act}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}
