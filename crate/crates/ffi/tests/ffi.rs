use std::ffi::{CStr, CString};
use std::ptr;

use tangent_mor_ffi::*;

fn last_error() -> String {
    let p = tm_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn fdm(n0: usize, p: usize) -> *mut TmSystem {
    let mut sys = ptr::null_mut();
    assert_eq!(unsafe { tm_system_generate_fdm(n0, p, 42, &mut sys) }, TmStatus::Ok);
    sys
}

#[test]
fn reduce_and_query() {
    unsafe {
        let sys = fdm(10, 2);
        assert_eq!(tm_system_order(sys), 100);
        assert_eq!(tm_system_ports(sys), 2);

        let mut model = ptr::null_mut();
        assert_eq!(tm_reduce(sys, 2, 8, 0.0, &mut model), TmStatus::Ok);
        let order = tm_model_order(model);
        assert!(order > 0 && order <= 16 && order.is_multiple_of(2));
        let len = tm_model_history_len(model);
        assert_eq!(len, order / 2);

        let mut rec = TmIterationRecord::default();
        assert_eq!(tm_model_history(model, 0, &mut rec), TmStatus::Ok);
        assert_eq!(rec.iteration, 1);
        assert_eq!((rec.sigma.re, rec.sigma.im), (1.0, 0.0));
        assert_eq!(tm_model_history(model, len, &mut rec), TmStatus::InvalidArgument);
        assert!(last_error().contains("out of range"));

        let w = TmComplex { re: 0.0, im: 5.0 };
        let mut h = [TmComplex::default(); 4];
        let mut hm = [TmComplex::default(); 4];
        assert_eq!(tm_system_transfer(sys, w, h.as_mut_ptr()), TmStatus::Ok);
        assert_eq!(tm_model_transfer(model, w, hm.as_mut_ptr()), TmStatus::Ok);
        let scale = h.iter().map(|z| z.re.hypot(z.im)).fold(0.0, f64::max);
        let diff = h
            .iter()
            .zip(&hm)
            .map(|(a, b)| (a.re - b.re).hypot(a.im - b.im))
            .fold(0.0, f64::max);
        assert!(diff <= 1e-3 * scale, "{diff} vs {scale}");

        let mut err = f64::NAN;
        assert_eq!(tm_sampled_hinf_error(sys, model, 1e-2, 1e4, 50, &mut err), TmStatus::Ok);
        assert!(err.is_finite() && err >= 0.0);

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().to_str().unwrap()).unwrap();
        assert_eq!(tm_model_save(model, path.as_ptr()), TmStatus::Ok);
        assert!(dir.path().join("am.mtx").exists());
        assert!(dir.path().join("metadata.json").exists());

        tm_model_free(model);
        tm_system_free(sys);
    }
}

#[test]
fn dense_system_matches_scalar_formula() {
    // diagonal A, single port: H(w) = sum c_i b_i / (w - a_i)
    let a = [-1.0, 0.0, 0.0, -3.0];
    let b = [1.0, 2.0];
    let c = [0.5, -1.0];
    unsafe {
        let mut sys = ptr::null_mut();
        assert_eq!(
            tm_system_new_dense(2, 1, a.as_ptr(), b.as_ptr(), c.as_ptr(), &mut sys),
            TmStatus::Ok
        );
        let mut h = TmComplex::default();
        assert_eq!(tm_system_transfer(sys, TmComplex { re: 1.0, im: 0.0 }, &mut h), TmStatus::Ok);
        let expect = 0.5 / 2.0 - 2.0 / 4.0;
        assert!((h.re - expect).abs() < 1e-14 && h.im.abs() < 1e-14);
        tm_system_free(sys);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        assert_eq!(tm_system_generate_fdm(4, 1, 0, ptr::null_mut()), TmStatus::NullPointer);
        assert!(last_error().contains("null"));

        let mut model = ptr::null_mut();
        assert_eq!(tm_reduce(ptr::null(), 1, 2, 0.0, &mut model), TmStatus::NullPointer);
        assert!(model.is_null());

        let sys = fdm(4, 1);
        assert_eq!(tm_reduce(sys, 0, 2, 0.0, &mut model), TmStatus::InvalidArgument);

        let a = [0.0; 4];
        let b = [1.0, 1.0];
        let mut sing = ptr::null_mut();
        assert_eq!(tm_system_new_dense(2, 1, a.as_ptr(), b.as_ptr(), b.as_ptr(), &mut sing), TmStatus::Ok);
        let mut h = TmComplex::default();
        assert_eq!(tm_system_transfer(sing, TmComplex::default(), &mut h), TmStatus::SingularShift);

        let missing = CString::new("/nonexistent/a.mtx").unwrap();
        let mut loaded = ptr::null_mut();
        assert_eq!(
            tm_system_load(missing.as_ptr(), ptr::null(), ptr::null(), 1, 0, &mut loaded),
            TmStatus::Io
        );

        // success clears the message
        assert_eq!(tm_system_ports(sys), 1);
        let mut h1 = TmComplex::default();
        assert_eq!(tm_system_transfer(sys, TmComplex { re: 0.0, im: 1.0 }, &mut h1), TmStatus::Ok);
        assert!(tm_last_error().is_null());

        tm_system_free(sing);
        tm_system_free(sys);
        tm_system_free(ptr::null_mut());
        tm_model_free(ptr::null_mut());
        assert_eq!(tm_system_order(ptr::null()), 0);
    }
}

#[test]
fn load_from_matrix_market() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.mtx");
    std::fs::write(
        &a,
        "%%MatrixMarket matrix coordinate real general\n3 3 4\n1 1 -2\n2 2 -3\n3 3 -4\n1 2 0.5\n",
    )
    .unwrap();
    let path = CString::new(a.to_str().unwrap()).unwrap();
    unsafe {
        let mut sys = ptr::null_mut();
        assert_eq!(tm_system_load(path.as_ptr(), ptr::null(), ptr::null(), 2, 7, &mut sys), TmStatus::Ok);
        assert_eq!(tm_system_order(sys), 3);
        assert_eq!(tm_system_ports(sys), 2);
        tm_system_free(sys);
    }
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/tangent_mor.h")).unwrap();
    for name in [
        "tm_last_error",
        "tm_system_generate_fdm",
        "tm_system_new_dense",
        "tm_system_load",
        "tm_system_free",
        "tm_system_order",
        "tm_system_ports",
        "tm_system_transfer",
        "tm_reduce",
        "tm_model_free",
        "tm_model_order",
        "tm_model_history_len",
        "tm_model_converged",
        "tm_model_history",
        "tm_model_transfer",
        "tm_model_save",
        "tm_sampled_hinf_error",
        "typedef struct TmSystem TmSystem",
        "TM_STATUS_SINGULAR_SHIFT",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = std::env::var("CC").or_else(|_| which("cc")) else {
        eprintln!("no C compiler, skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"tangent_mor.h\"\n\
         int main(void) {\n\
           TmSystem *sys = 0;\n\
           if (tm_system_generate_fdm(4, 1, 0, &sys) != TM_STATUS_OK) return 1;\n\
           TmComplex h; TmComplex w = {0.0, 1.0};\n\
           tm_system_transfer(sys, w, &h);\n\
           tm_system_free(sys);\n\
           return 0;\n\
         }\n",
    )
    .unwrap();
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which(name: &str) -> Result<String, ()> {
    std::env::var_os("PATH")
        .into_iter()
        .flat_map(|p| std::env::split_paths(&p).collect::<Vec<_>>())
        .map(|d| d.join(name))
        .find(|p| p.is_file())
        .map(|p| p.to_string_lossy().into_owned())
        .ok_or(())
}
