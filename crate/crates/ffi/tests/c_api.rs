use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use rgnet::dataset::TemporalDataset;
use rgnet::pipeline::{Paths, PipelineConfig};
use rgnet_ffi::*;
use tempfile::TempDir;

fn last_error() -> String {
    let p = rg_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn desk_json(dir: &Path) -> CString {
    let data = dir.join("data");
    let cfg = PipelineConfig {
        paths: Paths {
            corpus: data.join("corpus.jsonl"),
            words: Some(data.join("words.txt")),
            sentiment: Some(data.join("sentiment.txt")),
            stopwords: Some(data.join("stopwords.txt")),
            work_dir: dir.join("work"),
        },
        ..PipelineConfig::desk()
    };
    CString::new(cfg.to_json().unwrap()).unwrap()
}

fn run(p: *const RgPipeline, stages: &[&str]) {
    for s in stages {
        let name = CString::new(*s).unwrap();
        let status = unsafe { rg_pipeline_run_stage(p, name.as_ptr()) };
        assert_eq!(status, RgStatus::Ok, "{s}: {}", last_error());
    }
}

/// Runs the desk pipeline through training on the synthetic corpus.
fn trained() -> TempDir {
    let dir = TempDir::new().unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { rg_pipeline_new(desk_json(dir.path()).as_ptr(), &mut p) }, RgStatus::Ok);
    run(p, &["synth", "ingest", "cooccur", "embed", "cluster", "featurize", "train"]);
    unsafe { rg_pipeline_free(p) };
    dir
}

fn load(path: &Path) -> *mut RgModel {
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { rg_model_load(c.as_ptr(), &mut m) }, RgStatus::Ok, "{}", last_error());
    m
}

#[test]
fn predictions_match_the_library() {
    let dir = trained();
    let work = dir.path().join("work");
    let m = load(&work.join("model_rgnet_temporal.ckpt"));
    let (mut kind, mut clusters) = (RgModelKind::Logreg, 0usize);
    assert_eq!(unsafe { rg_model_info(m, &mut kind, &mut clusters) }, RgStatus::Ok);
    assert_eq!((kind, clusters), (RgModelKind::Rgnet, 3));

    let data: TemporalDataset = serde_json::from_str(&std::fs::read_to_string(work.join("dataset_temporal.json")).unwrap()).unwrap();
    let text = std::fs::read_to_string(work.join("model_rgnet_temporal.ckpt")).unwrap();
    let (lib, _) = rgnet::pipeline::TrainedModel::from_checkpoint(&text).unwrap();
    let centers: Vec<f64> = data.centers.iter().flatten().copied().collect();
    let dim = data.centers[0].len();
    for s in data.test.iter().take(3) {
        let expected = lib.predict_sample(s, &data.centers).unwrap();
        for (i, want) in expected.iter().enumerate() {
            let seen = i.min(s.windows.len());
            let windows: Vec<f64> = s.windows[..seen].iter().flatten().copied().collect();
            let (mut y1, mut y2) = (vec![0.0; clusters], 0.0);
            let status = unsafe {
                rg_predict_temporal(
                    m,
                    s.post.as_ptr(),
                    s.post.len(),
                    windows.as_ptr(),
                    seen,
                    s.windows.first().map_or(0, Vec::len),
                    s.taus[i],
                    centers.as_ptr(),
                    clusters,
                    dim,
                    y1.as_mut_ptr(),
                    &mut y2,
                )
            };
            assert_eq!(status, RgStatus::Ok, "{}", last_error());
            assert_eq!(y1, want.y1);
            assert_eq!(y2, want.y2);
        }
    }

    // Wrong center count is a shape error, not a crash.
    let (mut y1, mut y2) = (vec![0.0; 3], 0.0);
    let s = &data.test[0];
    let status = unsafe {
        rg_predict_temporal(m, s.post.as_ptr(), s.post.len(), ptr::null(), 0, 0, 0.0, centers.as_ptr(), 2, dim, y1.as_mut_ptr(), &mut y2)
    };
    assert_eq!(status, RgStatus::ShapeMismatch);
    assert!(last_error().contains("clusters"));

    let (mut y3, mut attract) = (0.0, -1);
    let status = unsafe { rg_predict_nontemporal(m, s.post.as_ptr(), s.post.len(), centers.as_ptr(), clusters, dim, &mut y3, &mut attract) };
    assert_eq!(status, RgStatus::Ok);
    assert!(y3 > 0.0 && y3 < 1.0);
    assert_eq!(attract, i32::from(y3 > 0.5));
    unsafe { rg_model_free(m) };
}

#[test]
fn errors_are_reported_not_raised() {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { rg_model_load(ptr::null(), &mut m) }, RgStatus::NullPointer);
    assert!(m.is_null());
    let missing = CString::new("/nonexistent/model.ckpt").unwrap();
    assert_eq!(unsafe { rg_model_load(missing.as_ptr(), &mut m) }, RgStatus::Io);
    assert!(last_error().contains("/nonexistent/model.ckpt"));

    let mut p = ptr::null_mut();
    let bad = CString::new(r#"{"dim": 0}"#).unwrap();
    assert_eq!(unsafe { rg_pipeline_new(bad.as_ptr(), &mut p) }, RgStatus::InvalidArgument);
    let junk = CString::new("{").unwrap();
    assert_eq!(unsafe { rg_pipeline_new(junk.as_ptr(), &mut p) }, RgStatus::Parse);

    let dir = TempDir::new().unwrap();
    assert_eq!(unsafe { rg_pipeline_new(desk_json(dir.path()).as_ptr(), &mut p) }, RgStatus::Ok);
    let stage = CString::new("polish").unwrap();
    assert_eq!(unsafe { rg_pipeline_run_stage(p, stage.as_ptr()) }, RgStatus::InvalidArgument);
    let train = CString::new("train").unwrap();
    assert_eq!(unsafe { rg_pipeline_run_stage(p, train.as_ptr()) }, RgStatus::MissingArtifact);
    assert!(last_error().contains("run `featurize` first"));
    unsafe { rg_pipeline_free(p) };

    let (g, x, y) = ([0.25, 0.5], [1.0, 0.0], [0.0, 0.0]);
    let mut d = 0.0;
    assert_eq!(unsafe { rg_metric_distance(g.as_ptr(), x.as_ptr(), y.as_ptr(), 2, &mut d) }, RgStatus::Ok);
    assert!((d - 2.0).abs() < 1e-15);
    assert!(rg_last_error().is_null());
    let g = [0.0, 0.5];
    assert_eq!(unsafe { rg_metric_distance(g.as_ptr(), x.as_ptr(), y.as_ptr(), 2, &mut d) }, RgStatus::InvalidArgument);

    unsafe {
        rg_model_free(ptr::null_mut());
        rg_pipeline_free(ptr::null_mut());
    }
    let v = unsafe { CStr::from_ptr(rg_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn baseline_checkpoints_refuse_rgnet_calls() {
    let dir = trained();
    let cfg = std::fs::read_to_string(dir.path().join("work/manifest.json")).unwrap();
    assert!(cfg.contains("train"));
    let mut json: serde_json::Value = serde_json::from_str(desk_json(dir.path()).to_str().unwrap()).unwrap();
    json["model"] = "newtonian".into();
    let mut p = ptr::null_mut();
    let c = CString::new(json.to_string()).unwrap();
    assert_eq!(unsafe { rg_pipeline_new(c.as_ptr(), &mut p) }, RgStatus::Ok);
    run(p, &["train"]);
    unsafe { rg_pipeline_free(p) };

    let m = load(&dir.path().join("work/model_newtonian_temporal.ckpt"));
    let (mut kind, mut clusters) = (RgModelKind::Rgnet, 0usize);
    assert_eq!(unsafe { rg_model_info(m, &mut kind, &mut clusters) }, RgStatus::Ok);
    assert_eq!(kind, RgModelKind::Newtonian);
    let (mut y3, mut a) = (0.0, 0);
    let post = [0.0; 4];
    let status = unsafe { rg_predict_nontemporal(m, post.as_ptr(), 4, ptr::null(), 0, 0, &mut y3, &mut a) };
    assert_eq!(status, RgStatus::Unsupported);
    unsafe { rg_model_free(m) };
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

/// Directory holding the built shared library (`target/<profile>`).
fn lib_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = crate_dir().join("include/rgnet.h");
    for (lang, std) in [("c", "-std=c99"), ("c++", "-std=c++17")] {
        let out = Command::new("cc")
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, std])
            .arg(&header)
            .output()
            .expect("running cc");
        assert!(out.status.success(), "{lang}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn c_program_links_and_runs() {
    let tmp = TempDir::new().unwrap();
    let src = tmp.path().join("probe.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "rgnet.h"

int main(void) {
    double g[3] = {0.25, 1.0, 0.5}, x[3] = {1.0, 2.0, 0.0}, y[3] = {0.0, 2.0, 0.0}, d = 0.0;
    if (rg_metric_distance(g, x, y, 3, &d) != RG_STATUS_OK) return 1;
    RgModel *m = 0;
    if (rg_model_load("/nonexistent.ckpt", &m) != RG_STATUS_IO || m != 0) return 2;
    if (rg_last_error() == 0) return 3;
    printf("%s %.3f\n", rg_version(), d);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = tmp.path().join("probe");
    let lib = lib_dir();
    let out = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg("-L")
        .arg(&lib)
        .arg("-lrgnet_ffi")
        .arg("-o")
        .arg(&exe)
        .output()
        .expect("running cc");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).env("LD_LIBRARY_PATH", &lib).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), format!("{} 2.000", env!("CARGO_PKG_VERSION")));
}
