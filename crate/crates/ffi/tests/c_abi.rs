use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use ptpinn_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(ptpinn_last_error()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn network_round_trip_and_scores() {
    unsafe {
        let mut net = ptr::null_mut();
        assert_eq!(ptpinn_network_new_mlp(2, 2, 8, 7, &mut net), PtStatus::Ok);
        assert_eq!(ptpinn_network_input_dim(net), 2);
        assert_eq!(ptpinn_network_param_count(net), 2 * 8 + 8 + 8 * 8 + 8 + 8 + 1);

        let pts = [0.5, 0.25, 1.0, 0.75, 3.0, 1.0];
        let mut a = [0.0; 3];
        assert_eq!(
            ptpinn_network_predict(net, pts.as_ptr(), 3, a.as_mut_ptr()),
            PtStatus::Ok
        );

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("n.ckpt").to_str().unwrap()).unwrap();
        assert_eq!(ptpinn_network_save(net, path.as_ptr()), PtStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(ptpinn_network_load(path.as_ptr(), &mut back), PtStatus::Ok);
        let mut b = [0.0; 3];
        assert_eq!(
            ptpinn_network_predict(back, pts.as_ptr(), 3, b.as_mut_ptr()),
            PtStatus::Ok
        );
        assert_eq!(a, b);

        let mut problem = ptr::null_mut();
        let name = CString::new("reaction").unwrap();
        assert_eq!(
            ptpinn_problem_new(name.as_ptr(), 5.0, ptr::null(), &mut problem),
            PtStatus::Ok
        );
        assert_eq!(ptpinn_problem_input_dim(problem), 2);
        let mut s = PtScores::default();
        assert_eq!(ptpinn_score(net, problem, 500, 3, &mut s), PtStatus::Ok);
        assert!(s.l2_rel > 0.0 && s.linf_abs >= s.l1_abs);

        ptpinn_network_free(net);
        ptpinn_network_free(back);
        ptpinn_problem_free(problem);
    }
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let mut net = ptr::null_mut();
        assert_eq!(ptpinn_network_new_mlp(2, 0, 8, 1, &mut net), PtStatus::InvalidArgument);
        assert!(!last_error().is_empty());
        assert!(net.is_null());

        let missing = CString::new("/nonexistent/n.ckpt").unwrap();
        assert_eq!(ptpinn_network_load(missing.as_ptr(), &mut net), PtStatus::Io);
        assert!(last_error().contains("/nonexistent/n.ckpt"));

        let dir = tempfile::tempdir().unwrap();
        let junk = dir.path().join("junk.ckpt");
        std::fs::write(&junk, "not a checkpoint\n").unwrap();
        let junk = CString::new(junk.to_str().unwrap()).unwrap();
        assert_eq!(ptpinn_network_load(junk.as_ptr(), &mut net), PtStatus::Format);

        let name = CString::new("nope").unwrap();
        let mut p = ptr::null_mut();
        assert_eq!(
            ptpinn_problem_new(name.as_ptr(), 0.0, ptr::null(), &mut p),
            PtStatus::InvalidArgument
        );
        let ac = CString::new("allen_cahn").unwrap();
        assert_eq!(
            ptpinn_problem_new(ac.as_ptr(), 0.0, ptr::null(), &mut p),
            PtStatus::NullPointer
        );
        assert_eq!(
            ptpinn_network_predict(ptr::null(), ptr::null(), 1, ptr::null_mut()),
            PtStatus::NullPointer
        );

        let mut ok = ptr::null_mut();
        assert_eq!(ptpinn_network_new_mlp(2, 1, 3, 1, &mut ok), PtStatus::Ok);
        assert_eq!(last_error(), "");
        ptpinn_network_free(ok);
        ptpinn_network_free(ptr::null_mut());
    }
}

#[test]
fn run_experiment_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.conf");
    std::fs::write(
        &cfg,
        "benchmark = reaction\nbenchmark.rho = 1\nmethod = standard\nnetwork.hidden_layers = 1\n\
         network.width = 4\ndata.n_i = 10\ndata.n_b = 10\ndata.n_r = 20\nadam.steps = 5\n\
         lbfgs.max_iter = 5\nrun.repeats = 2\nrun.test_size = 50\noutput.dir = out\n",
    )
    .unwrap();
    let cfg = CString::new(cfg.to_str().unwrap()).unwrap();
    let root = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut summary = PtRunSummary::default();
    let status = unsafe { ptpinn_run_experiment(cfg.as_ptr(), root.as_ptr(), &mut summary) };
    assert_eq!(status, PtStatus::Ok, "{}", last_error());
    assert_eq!(summary.replicates, 2);
    assert!(summary.mean.l2_rel.is_finite());
    assert!(dir.path().join("out/results.csv").exists());
}

fn find_static_lib() -> Option<PathBuf> {
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().ok()?;
    let profile_dir = exe.parent()?.parent()?;
    let lib = profile_dir.join("libptpinn_ffi.a");
    lib.exists().then_some(lib)
}

#[test]
fn c_program_links_against_header() {
    let Some(lib) = find_static_lib() else {
        eprintln!("static library not built; skipping the C compile check");
        return;
    };
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let out = Command::new("cc")
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .output();
    let Ok(out) = out else {
        eprintln!("no C compiler; skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).current_dir(dir.path()).output().unwrap();
    assert!(
        run.status.success(),
        "{}{}",
        String::from_utf8_lossy(&run.stdout),
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(String::from_utf8_lossy(&run.stdout).contains("ok"));
}
