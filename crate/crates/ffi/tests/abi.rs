use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use bidomain_ffi::*;

const CONFIG: &str = "\
[grid]
extents = 1.0
counts = 17
[conductivity]
sigma_i = 1.0
sigma_e = 2.0
[model]
variant = fitzhugh-nagumo
a = 0.1
k = 1.0
eps = 0.05
[forcing]
period = 2.0
amplitude = 0.1
profile = mode
mode = 1
shape = sin
[solver]
order = 4
";

fn last_error() -> String {
    unsafe { CStr::from_ptr(bidomain_last_error()) }.to_string_lossy().into_owned()
}

fn new_problem(text: &str) -> (BidomainStatus, *mut BidomainProblem) {
    let text = CString::new(text).unwrap();
    let mut h = ptr::null_mut();
    let status = unsafe { bidomain_problem_new(text.as_ptr(), ptr::null(), 1, &mut h) };
    (status, h)
}

#[test]
fn solve_through_handle() {
    let (status, h) = new_problem(CONFIG);
    assert_eq!(status, BidomainStatus::Ok, "{}", last_error());
    unsafe {
        let mut modes = 0;
        assert_eq!(bidomain_problem_modes(h, &mut modes), BidomainStatus::Ok);
        assert_eq!(modes, 5);
        let mut nodes = 0;
        assert_eq!(bidomain_problem_nodes(h, &mut nodes), BidomainStatus::Ok);
        assert_eq!(nodes, 17);

        let mut eig = vec![0.0; modes];
        assert_eq!(bidomain_problem_eigenvalues(h, eig.as_mut_ptr(), 2), BidomainStatus::BufferTooSmall);
        assert!(last_error().contains("5 required"));
        assert_eq!(bidomain_problem_eigenvalues(h, eig.as_mut_ptr(), modes), BidomainStatus::Ok);
        assert!(eig[0].abs() < 1e-8 && eig.windows(2).all(|w| w[0] <= w[1]));

        let (mut r, mut lip) = (0.0, 0.0);
        assert_eq!(bidomain_problem_radius(h, &mut r), BidomainStatus::Ok);
        assert_eq!(bidomain_problem_lipschitz(h, &mut lip), BidomainStatus::Ok);
        assert!(r > 0.0 && (lip - (1.21 / 3.0 - 0.1)).abs() < 1e-12);

        let (mut a, mut b) = (vec![0.0; modes], vec![0.0; modes]);
        assert_eq!(bidomain_problem_fixed_point(h, a.as_mut_ptr(), b.as_mut_ptr(), modes), BidomainStatus::NotSolved);
        let (mut res, mut iters) = (0.0, 0);
        assert_eq!(bidomain_problem_solve_periodic(h, &mut res, &mut iters), BidomainStatus::Ok, "{}", last_error());
        assert!(res <= 1e-8 && iters > 0);
        assert_eq!(last_error(), "");
        assert_eq!(bidomain_problem_fixed_point(h, a.as_mut_ptr(), b.as_mut_ptr(), modes), BidomainStatus::Ok);
        assert!(a[1].abs() > 1e-4);
        bidomain_problem_free(h);
    }
}

#[test]
fn error_codes() {
    let (status, h) = new_problem(&CONFIG.replace("a = 0.1", "a = 1.5"));
    assert_eq!(status, BidomainStatus::Config);
    assert!(h.is_null());
    assert!(last_error().contains("model.a"), "{}", last_error());

    let (status, _) = new_problem(&CONFIG.replace("sigma_e = 2.0", "sigma_e = -2.0"));
    assert!(matches!(status, BidomainStatus::Config | BidomainStatus::InvalidInput), "{status:?} {}", last_error());

    let ap = CONFIG.replace(
        "variant = fitzhugh-nagumo\na = 0.1\nk = 1.0\neps = 0.05",
        "variant = aliev-panfilov\na = 0.15\nk = 2.0\nb = 8.0\neps = 0.01\nd = 0.2",
    );
    let (status, h) = new_problem(&ap);
    assert_eq!(status, BidomainStatus::Ok, "{}", last_error());
    let mut lip = 0.0;
    assert_eq!(unsafe { bidomain_problem_lipschitz(h, &mut lip) }, BidomainStatus::InvalidInput);
    unsafe { bidomain_problem_free(h) };

    let mut h = ptr::null_mut();
    assert_eq!(unsafe { bidomain_problem_new(ptr::null(), ptr::null(), 1, &mut h) }, BidomainStatus::NullPointer);
    let mut modes = 0;
    assert_eq!(unsafe { bidomain_problem_modes(ptr::null(), &mut modes) }, BidomainStatus::NullPointer);
    unsafe { bidomain_problem_free(ptr::null_mut()) };

    let bad = [0x66u8, 0xff, 0];
    let status = unsafe { bidomain_problem_new(bad.as_ptr().cast(), ptr::null(), 1, &mut h) };
    assert_eq!(status, BidomainStatus::InvalidUtf8);
}

#[test]
fn run_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.ini");
    std::fs::write(&cfg, CONFIG).unwrap();
    let out = dir.path().join("out");
    let c = |s: &str| CString::new(s).unwrap();
    let (cfg, out_c) = (c(cfg.to_str().unwrap()), c(out.to_str().unwrap()));
    let mut passed = 0;
    let status = unsafe { bidomain_run(c("eigens").as_ptr(), cfg.as_ptr(), out_c.as_ptr(), 1, &mut passed) };
    assert_eq!(status, BidomainStatus::Ok, "{}", last_error());
    assert_eq!(passed, 1);
    assert!(out.join("eigenvalues.csv").exists());
    let status = unsafe { bidomain_run(c("no-such").as_ptr(), cfg.as_ptr(), out_c.as_ptr(), 1, &mut passed) };
    assert_eq!(status, BidomainStatus::Config);
}

/// Compiles a C program against the generated header and the static library.
#[test]
fn c_program_links_against_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let lib = deps.parent().unwrap().join("libbidomain_ffi.a");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    let config = CONFIG.replace('\n', "\\n");
    std::fs::write(
        &src,
        format!(
            r#"#include <stdio.h>
#include "bidomain.h"
int main(void) {{
    BidomainProblem *p = NULL;
    if (bidomain_problem_new("{config}", NULL, 1, &p) != BIDOMAIN_STATUS_OK) {{
        fprintf(stderr, "%s\n", bidomain_last_error());
        return 1;
    }}
    size_t modes = 0;
    bidomain_problem_modes(p, &modes);
    double eig[8];
    if (bidomain_problem_eigenvalues(p, eig, 8) != BIDOMAIN_STATUS_OK) return 2;
    printf("%zu %.6f\n", modes, eig[1]);
    bidomain_problem_free(p);
    return 0;
}}
"#
        ),
    )
    .unwrap();
    let exe = dir.path().join("smoke");
    let built = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .expect("C compiler available");
    assert!(built.status.success(), "{}", String::from_utf8_lossy(&built.stderr));
    let ran = Command::new(&exe).output().unwrap();
    assert!(ran.status.success(), "{}", String::from_utf8_lossy(&ran.stderr));
    let line = String::from_utf8(ran.stdout).unwrap();
    let mut parts = line.split_whitespace();
    assert_eq!(parts.next(), Some("5"));
    let lam1: f64 = parts.next().unwrap().parse().unwrap();
    assert!((lam1 - 2.0 / 3.0 * std::f64::consts::PI.powi(2)).abs() < 0.1, "{lam1}");
}
