// SPDX-License-Identifier: Apache-2.0

use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use minimalist_ffi::*;

const GOLDEN_LOGITS: [[f64; 2]; 3] = [
    [-0.24806803178265377, 0.7500675743785706],
    [-0.022639004432709164, 0.9967855796627103],
    [-0.24784260550241713, 0.75007141680027],
];

fn core_data() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data")
}

fn golden_path() -> CString {
    CString::new(core_data().join("golden_1_4_2.mgru.json").to_str().unwrap()).unwrap()
}

/// Golden sequences as step-major input bytes.
fn golden_inputs() -> Vec<Vec<u8>> {
    let text = std::fs::read_to_string(core_data().join("golden_sequences.csv")).unwrap();
    let mut seqs: Vec<Vec<u8>> = Vec::new();
    for line in text.lines().skip(1) {
        let f: Vec<usize> = line.split(',').map(|v| v.parse().unwrap()).collect();
        if f[0] == seqs.len() {
            seqs.push(Vec::new());
        }
        seqs[f[0]].push(f[3] as u8);
    }
    seqs
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(mg_last_error_message()) }
        .to_str()
        .unwrap()
        .to_owned()
}

struct Handle(*mut MgModel);

impl Drop for Handle {
    fn drop(&mut self) {
        unsafe { mg_model_free(self.0) }
    }
}

fn load() -> Handle {
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { mg_model_load_file(golden_path().as_ptr(), &mut m) },
        MgStatus::Ok
    );
    assert!(!m.is_null());
    Handle(m)
}

#[test]
fn sizes() {
    let m = load();
    unsafe {
        assert_eq!(mg_model_n_in(m.0), 1);
        assert_eq!(mg_model_n_out(m.0), 2);
        assert_eq!(mg_model_n_layers(m.0), 2);
        assert_eq!(mg_model_n_out(ptr::null()), 0);
    }
}

#[test]
fn forward_matches_golden_on_both_engines() {
    let m = load();
    for engine in [MgEngine::Ideal, MgEngine::Circuit] {
        for (seq, want) in golden_inputs().iter().zip(GOLDEN_LOGITS) {
            let mut logits = [0.0f64; 2];
            let mut class = usize::MAX;
            let s = unsafe {
                mg_forward(
                    m.0,
                    engine as u32,
                    seq.as_ptr(),
                    seq.len(),
                    logits.as_mut_ptr(),
                    2,
                    &mut class,
                )
            };
            assert_eq!(s, MgStatus::Ok, "{}", last_error());
            assert_eq!(class, 1);
            for (a, b) in logits.iter().zip(want) {
                assert!((a - b).abs() <= 1e-12, "{engine:?}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn json_round_trip() {
    let m = load();
    let mut needed = 0usize;
    let s = unsafe { mg_model_to_json(m.0, ptr::null_mut(), 0, &mut needed) };
    assert_eq!(s, MgStatus::BufferTooSmall);
    assert!(last_error().contains("bytes"));
    let mut buf = vec![0u8; needed];
    let s = unsafe { mg_model_to_json(m.0, buf.as_mut_ptr().cast(), buf.len(), &mut needed) };
    assert_eq!(s, MgStatus::Ok);
    assert_eq!(last_error(), "");
    let text = CStr::from_bytes_with_nul(&buf).unwrap();
    let file = std::fs::read_to_string(core_data().join("golden_1_4_2.mgru.json")).unwrap();
    assert_eq!(text.to_str().unwrap(), file);

    let mut again = ptr::null_mut();
    assert_eq!(
        unsafe { mg_model_load_json(text.as_ptr(), &mut again) },
        MgStatus::Ok
    );
    let again = Handle(again);
    assert_eq!(unsafe { mg_model_n_layers(again.0) }, 2);
}

#[test]
fn load_errors() {
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(
            mg_model_load_json(ptr::null(), &mut m),
            MgStatus::NullArgument
        );
        assert!(m.is_null());
        assert_eq!(mg_model_load_json(c"{".as_ptr(), &mut m), MgStatus::Parse);
        assert!(!last_error().is_empty());
        assert_eq!(
            mg_model_load_file(c"/nonexistent/model.json".as_ptr(), &mut m),
            MgStatus::Io
        );
        assert_eq!(
            mg_model_load_file(golden_path().as_ptr(), ptr::null_mut()),
            MgStatus::NullArgument
        );
    }
    let bad = std::fs::read_to_string(core_data().join("golden_1_4_2.mgru.json"))
        .unwrap()
        .replace("\"b_z\": [34,", "\"b_z\": [99,");
    let bad = CString::new(bad).unwrap();
    assert_eq!(
        unsafe { mg_model_load_json(bad.as_ptr(), &mut m) },
        MgStatus::InvalidModel
    );
    assert!(last_error().contains("99"), "{}", last_error());
}

#[test]
fn forward_errors() {
    let m = load();
    let input = [1u8, 0, 1];
    let mut logits = [0.0f64; 2];
    unsafe {
        let run = |engine: u32, steps: usize, len: usize, logits: *mut f64| {
            mg_forward(
                m.0,
                engine,
                input.as_ptr(),
                steps,
                logits,
                len,
                ptr::null_mut(),
            )
        };
        assert_eq!(run(7, 3, 2, logits.as_mut_ptr()), MgStatus::InvalidEngine);
        assert_eq!(run(0, 0, 2, logits.as_mut_ptr()), MgStatus::InvalidInput);
        assert_eq!(run(0, 3, 1, logits.as_mut_ptr()), MgStatus::BufferTooSmall);
        assert_eq!(run(0, 3, 2, ptr::null_mut()), MgStatus::NullArgument);
        assert_eq!(run(1, 3, 2, logits.as_mut_ptr()), MgStatus::Ok);
        assert_eq!(
            mg_forward(
                ptr::null_mut(),
                0,
                input.as_ptr(),
                3,
                logits.as_mut_ptr(),
                2,
                ptr::null_mut()
            ),
            MgStatus::NullArgument
        );
    }
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(mg_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/minimalist.h")
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(header()).unwrap();
    assert!(h.starts_with("/* SPDX-License-Identifier: Apache-2.0 */"));
    for f in [
        "mg_model_load_file",
        "mg_model_load_json",
        "mg_model_free",
        "mg_model_n_in",
        "mg_model_n_out",
        "mg_model_n_layers",
        "mg_model_to_json",
        "mg_forward",
        "mg_last_error_message",
        "mg_version",
        "MG_STATUS_BUFFER_TOO_SMALL",
        "MG_ENGINE_CIRCUIT",
    ] {
        assert!(h.contains(f), "{f} missing from header");
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "minimalist.h"

int main(int argc, char **argv) {
    MgModel *m = NULL;
    if (mg_model_load_file(argv[1], &m) != MG_STATUS_OK) {
        fprintf(stderr, "%s\n", mg_last_error_message());
        return 1;
    }
    unsigned char x[12] = {1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 1, 0};
    double logits[2];
    size_t cls = 99;
    MgStatus s = mg_forward(m, MG_ENGINE_CIRCUIT, x, 12, logits, 2, &cls);
    mg_model_free(m);
    if (s != MG_STATUS_OK) return 2;
    printf("%zu %.17g %.17g\n", cls, logits[0], logits[1]);
    return 0;
}
"#;

/// Builds a C program against the header and the shared library when a C
/// compiler is available.
#[test]
fn c_program_links_against_header() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().unwrap().parent().unwrap();
    if !lib_dir.join("libminimalist_ffi.so").is_file() {
        eprintln!(
            "shared library not found in {}; skipping",
            lib_dir.display()
        );
        return;
    }
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("capi");
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("main.c");
    let bin = dir.join("main");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let out = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg("-L")
        .arg(lib_dir)
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .args(["-lminimalist_ffi", "-Wall", "-Werror", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = Command::new(&bin)
        .arg(core_data().join("golden_1_4_2.mgru.json"))
        .output()
        .unwrap();
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let text = String::from_utf8(run.stdout).unwrap();
    let f: Vec<&str> = text.split_whitespace().collect();
    assert_eq!(f[0], "1");
    let l0: f64 = f[1].parse().unwrap();
    assert!((l0 - GOLDEN_LOGITS[0][0]).abs() <= 1e-12);
}
