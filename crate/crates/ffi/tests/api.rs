use std::ffi::{c_void, CStr, CString};
use std::ptr;

use hpsg_ffi::*;

fn last_error() -> String {
    let p = hpsg_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe extern "C" fn quadratic(x: *const f64, dim: usize, user: *mut c_void, out: *mut f64) -> i32 {
    let x = std::slice::from_raw_parts(x, dim);
    *(user as *mut usize) += 1;
    *out = x[0] * x[0] + 0.5 * x[1];
    0
}

unsafe extern "C" fn failing(_: *const f64, _: usize, _: *mut c_void, _: *mut f64) -> i32 {
    7
}

fn options(strategy: HpsgStrategy) -> HpsgBuildOptions {
    let mut o = hpsg_default_options();
    o.strategy = strategy as i32;
    o.w_max = 1e-6;
    o.q_max = 8;
    o
}

#[test]
fn callback_build_interpolates() {
    let lo = [0.0, -2.0];
    let hi = [1.0, 2.0];
    let mut calls = 0usize;
    let mut grid = ptr::null_mut();
    let opts = options(HpsgStrategy::Highest);
    let st = unsafe {
        hpsg_build(
            2,
            lo.as_ptr(),
            hi.as_ptr(),
            &opts,
            Some(quadratic),
            &mut calls as *mut usize as *mut c_void,
            &mut grid,
        )
    };
    assert_eq!(st, HpsgStatus::Ok);
    assert!(calls > 0);
    unsafe {
        assert_eq!(hpsg_grid_dim(grid), 2);
        let n = hpsg_grid_num_nodes(grid);
        assert!(n > 1 && n <= calls);

        // quadratic in x0, linear in x1: reproduced exactly by degree 2
        let pts = [0.3, 1.1, 0.9, -1.7, 0.0, 0.0];
        let mut vals = [0.0; 3];
        assert_eq!(hpsg_grid_evaluate_many(grid, pts.as_ptr(), 3, 2, vals.as_mut_ptr()), HpsgStatus::Ok);
        for (p, v) in pts.chunks(2).zip(vals) {
            assert!((v - (p[0] * p[0] + 0.5 * p[1])).abs() < 1e-12, "{p:?} {v}");
        }

        let mut v = 0.0;
        let outside = [1.5, 0.0];
        assert_eq!(hpsg_grid_evaluate(grid, outside.as_ptr(), 2, &mut v), HpsgStatus::OutOfDomain);
        assert!(last_error().contains("outside"));
        assert_eq!(hpsg_grid_evaluate(grid, outside.as_ptr(), 1, &mut v), HpsgStatus::OutOfDomain);
        hpsg_grid_free(grid);
    }
}

#[test]
fn callback_failure_is_reported() {
    let lo = [0.0];
    let hi = [1.0];
    let mut grid = ptr::null_mut();
    let st = unsafe {
        hpsg_build(1, lo.as_ptr(), hi.as_ptr(), ptr::null(), Some(failing), ptr::null_mut(), &mut grid)
    };
    assert_eq!(st, HpsgStatus::CallbackFailed);
    assert!(grid.is_null());
    assert!(last_error().contains("callback returned 7"));
}

#[test]
fn argument_errors() {
    let lo = [0.0];
    let hi = [1.0];
    let mut grid = ptr::null_mut();
    unsafe {
        let st = hpsg_build(1, lo.as_ptr(), hi.as_ptr(), ptr::null(), None, ptr::null_mut(), &mut grid);
        assert_eq!(st, HpsgStatus::NullPointer);
        let st = hpsg_build(0, lo.as_ptr(), hi.as_ptr(), ptr::null(), Some(failing), ptr::null_mut(), &mut grid);
        assert_eq!(st, HpsgStatus::InvalidArgument);
        let st = hpsg_build(1, hi.as_ptr(), lo.as_ptr(), ptr::null(), Some(failing), ptr::null_mut(), &mut grid);
        assert_eq!(st, HpsgStatus::InvalidArgument);

        let mut bad = hpsg_default_options();
        bad.strategy = 9;
        let name = CString::new("genz-c").unwrap();
        assert_eq!(hpsg_build_benchmark(name.as_ptr(), 2, &bad, &mut grid), HpsgStatus::InvalidArgument);
        assert!(last_error().contains("strategy"));
        bad = hpsg_default_options();
        bad.w_max = -1.0;
        assert_eq!(hpsg_build_benchmark(name.as_ptr(), 2, &bad, &mut grid), HpsgStatus::InvalidArgument);

        let unknown = CString::new("rosenbrock").unwrap();
        assert_eq!(hpsg_build_benchmark(unknown.as_ptr(), 2, ptr::null(), &mut grid), HpsgStatus::InvalidArgument);
        let curve = CString::new("curve2d").unwrap();
        assert_eq!(hpsg_build_benchmark(curve.as_ptr(), 3, ptr::null(), &mut grid), HpsgStatus::InvalidArgument);
        assert_eq!(hpsg_build_benchmark(ptr::null(), 2, ptr::null(), &mut grid), HpsgStatus::NullPointer);
        assert!(grid.is_null());

        assert_eq!(hpsg_grid_num_nodes(ptr::null()), 0);
        let mut v = 0.0;
        assert_eq!(hpsg_grid_evaluate(ptr::null(), lo.as_ptr(), 1, &mut v), HpsgStatus::NullPointer);
        hpsg_grid_free(ptr::null_mut());
    }
}

#[test]
fn errors_are_cleared_by_success() {
    let x = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let f = [1.0, 0.5, 0.0, 0.5, 1.0];
    let mut out = 0.0;
    unsafe {
        assert_eq!(hpsg_jump_estimate(x.as_ptr(), f.as_ptr(), 1, 0.0, &mut out), HpsgStatus::NotAvailable);
        assert!(!hpsg_last_error_message().is_null());
        assert_eq!(hpsg_jump_estimate(x.as_ptr(), f.as_ptr(), 5, 0.0, &mut out), HpsgStatus::Ok);
        assert!(hpsg_last_error_message().is_null());
    }
    assert!((out - 2.0).abs() < 1e-12);
}

#[test]
fn benchmark_dump_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("g.txt").to_str().unwrap()).unwrap();
    let name = CString::new("genz-c").unwrap();
    let mut opts = options(HpsgStrategy::Kink);
    opts.w_max = 1e-3;
    let mut grid = ptr::null_mut();
    let mut back = ptr::null_mut();
    unsafe {
        assert_eq!(hpsg_build_benchmark(name.as_ptr(), 2, &opts, &mut grid), HpsgStatus::Ok);
        assert_eq!(hpsg_grid_write_dump(grid, path.as_ptr()), HpsgStatus::Ok);
        assert_eq!(hpsg_grid_read_dump(path.as_ptr(), &mut back), HpsgStatus::Ok);
        assert_eq!(hpsg_grid_num_nodes(grid), hpsg_grid_num_nodes(back));
        let x = [0.37, 0.81];
        let (mut a, mut b) = (0.0, 0.0);
        hpsg_grid_evaluate(grid, x.as_ptr(), 2, &mut a);
        hpsg_grid_evaluate(back, x.as_ptr(), 2, &mut b);
        assert_eq!(a.to_bits(), b.to_bits());

        let missing = CString::new(dir.path().join("none.txt").to_str().unwrap()).unwrap();
        let mut g = ptr::null_mut();
        assert_eq!(hpsg_grid_read_dump(missing.as_ptr(), &mut g), HpsgStatus::Io);
        std::fs::write(dir.path().join("bad.txt"), "hpsg-grid 1\ndim x\n").unwrap();
        let bad = CString::new(dir.path().join("bad.txt").to_str().unwrap()).unwrap();
        assert_eq!(hpsg_grid_read_dump(bad.as_ptr(), &mut g), HpsgStatus::Parse);
        assert!(last_error().contains("line 2"));

        hpsg_grid_free(grid);
        hpsg_grid_free(back);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(hpsg_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
