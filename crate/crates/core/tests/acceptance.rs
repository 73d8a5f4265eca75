//! Acceptance suite. Runs without the libtest harness so that every criterion
//! prints exactly one PASS/FAIL line. Exits nonzero on failures only when
//! `ACCEPTANCE_STRICT` is set.

use std::cell::RefCell;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tangent_mor::adaptive::{
    direct_residuals, factored_residuals, initial_directions, run_abtl, select_next, AbtlOptions, AbtlOutput,
    ResidualEvaluator, ResidualMode,
};
use tangent_mor::btl::{ReductionState, Shift};
use tangent_mor::evaluation::{compare_with_full, log_grid, sample_full, FrequencyGrid};
use tangent_mor::linalg::sparse::CscMatrix;
use tangent_mor::linalg::{spectral_norm, CMat};
use tangent_mor::problems::fdm::{uniform, uniform_matrix};
use tangent_mor::problems::{generate_fdm, FdmSpec};
use tangent_mor::second_order::{eval_second_order_transfer, reduce_second_order, SecondOrderSystem};
use tangent_mor::solver::SolverCache;
use tangent_mor::system::{eval_reduced_transfer, eval_transfer, FirstOrderSystem, StateSpace, TransferFunction};

type Outcome = Result<String, String>;

thread_local! {
    /// worst biorthogonality seen in any run, and the number of states checked
    static BIORTHOGONALITY: RefCell<(f64, usize)> = const { RefCell::new((0.0, 0)) };
}

fn note_state(state: &ReductionState) {
    let e = state.biorthogonality_error();
    BIORTHOGONALITY.with(|b| {
        let mut b = b.borrow_mut();
        b.0 = b.0.max(e);
        b.1 += 1;
    });
}

fn note_run(out: &AbtlOutput) {
    BIORTHOGONALITY.with(|b| {
        let mut b = b.borrow_mut();
        for r in &out.history {
            b.0 = b.0.max(r.biorthogonality);
            b.1 += 1;
        }
    });
    note_state(&out.state);
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rel(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm() / b.norm()
}

fn dense(a: &CscMatrix) -> CMat {
    a.to_dense().map(|x| c(x, 0.0))
}

/// Sparse system with a Gershgorin-stable matrix: diagonal in [-10, -2],
/// at most four off-diagonal entries of modulus <= 0.4 per row.
fn random_stable(n: usize, p: usize, seed: u64) -> FirstOrderSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, -(2.0 + 8.0 * uniform(&mut rng))));
        for _ in 0..4 {
            let j = (uniform(&mut rng) * n as f64) as usize % n;
            let v = (uniform(&mut rng) - 0.5) * 0.8;
            if j != i {
                t.push((i, j, v));
            }
        }
    }
    let a = CscMatrix::from_triplets(n, n, &t);
    let b = uniform_matrix(&mut rng, n, p).map(|x| x - 0.5);
    let cm = uniform_matrix(&mut rng, p, n).map(|x| x - 0.5);
    FirstOrderSystem::new(a, b, cm).unwrap()
}

fn random_unit(rng: &mut ChaCha8Rng, p: usize) -> CMat {
    let v = CMat::from_fn(p, 1, |_, _| c(uniform(rng) - 0.5, uniform(rng) - 0.5));
    let norm = v.norm();
    v / c(norm, 0.0)
}

fn fdm(n0: usize) -> FirstOrderSystem {
    generate_fdm(&FdmSpec::new(n0, 6, 42)).unwrap()
}

fn interpolation() -> Outcome {
    let started = Instant::now();
    let sys = fdm(20);
    let out = run_abtl(&sys, &AbtlOptions::new(3, 10)).map_err(|e| e.to_string())?;
    note_run(&out);
    let st = &out.state;
    let (mut right, mut left) = (0.0f64, 0.0f64);
    for i in 0..st.iterations() {
        let (sigma, mu) = (st.shifts_right()[i].finite().unwrap(), st.shifts_left()[i].finite().unwrap());
        let r = &st.dirs_right()[i];
        let l = &st.dirs_left()[i];
        let h = eval_transfer(&sys, sigma).unwrap() * r;
        let hm = eval_reduced_transfer(&out.model, sigma).unwrap() * r;
        right = right.max(spectral_norm(&(&hm - &h)) / spectral_norm(&h));
        let h = l.transpose() * eval_transfer(&sys, mu).unwrap();
        let hm = l.transpose() * eval_reduced_transfer(&out.model, mu).unwrap();
        left = left.max(spectral_norm(&(&hm - &h)) / spectral_norm(&h));
    }
    let secs = started.elapsed().as_secs_f64();
    let msg = format!(
        "FDM400, {} blocks: right {right:.2e}, left {left:.2e} (<= 1e-6), {secs:.2} s (< 10 s)",
        st.iterations()
    );
    if st.iterations() == 10 && right <= 1e-6 && left <= 1e-6 && secs < 10.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn hermite() -> Outcome {
    let sys = random_stable(50, 3, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let shifts = [c(1.0, 0.0), c(0.5, 2.0), c(3.0, 0.0), c(1.5, -1.0), c(0.2, 0.7)];
    let dirs: Vec<CMat> = shifts.iter().map(|_| random_unit(&mut rng, 3)).collect();
    let cache = SolverCache::new(8);
    let mut st = ReductionState::init(&sys, &cache, Shift::Finite(shifts[0]), Shift::Finite(shifts[0]), &dirs[0], &dirs[0])
        .map_err(|e| e.to_string())?;
    note_state(&st);
    for (z, d) in shifts.iter().zip(&dirs).skip(1) {
        st.extend(&sys, &cache, Shift::Finite(*z), Shift::Finite(*z), d, d)
            .map_err(|e| e.to_string())?;
        note_state(&st);
    }
    let rm = st.reduced();
    let mut worst = 0.0f64;
    for (z, d) in shifts.iter().zip(&dirs) {
        // H'(z) = -C (zI - A)^{-2} B
        let full = (d.transpose() * tangent_mor::system::moment(&sys, *z, 1).unwrap() * d)[(0, 0)] * -1.0;
        let red = (d.transpose() * rm.moment(*z, 1).unwrap() * d)[(0, 0)] * -1.0;
        worst = worst.max((full - red).norm() / full.norm());
    }
    let msg = format!("n=50, 5 points: worst relative derivative mismatch {worst:.2e} (<= 1e-5)");
    if worst <= 1e-5 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn biorthogonality() -> Outcome {
    let (worst, states) = BIORTHOGONALITY.with(|b| *b.borrow());
    let msg = format!("{states} states checked, worst max|W^T V - I| = {worst:.2e} (<= 1e-10)");
    if states > 0 && worst <= 1e-10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn recurrence_relations() -> Outcome {
    let mut worst = [0.0f64; 3];
    for seed in [1, 2, 3] {
        let sys = random_stable(50, 3, seed);
        let out = run_abtl(&sys, &AbtlOptions::new(2, 5)).map_err(|e| e.to_string())?;
        note_run(&out);
        let st = &out.state;
        let asm = st.assemble().map_err(|e| e.to_string())?;
        let a = dense(sys.a());
        let b = sys.input();
        let ct = sys.output_transposed();
        let vg = st.v() * &asm.g;
        let avg = &a * &vg;
        let right = &vg * &asm.d1 - b * st.stacked_dirs_right();
        worst[0] = worst[0].max(rel(&right, &avg));
        let wq = st.w() * &asm.q;
        let atwq = a.transpose() * &wq;
        let left = &wq * &asm.d2 - ct * st.stacked_dirs_left();
        worst[1] = worst[1].max(rel(&left, &atwq));
        // re-solve every block with an independent dense LU
        let n = sys.order();
        let s = st.s();
        let mut t = CMat::zeros(n, st.dim());
        for (j, (sh, r)) in st.shifts_right().iter().zip(st.dirs_right()).enumerate() {
            let z = sh.finite().unwrap();
            let shifted = CMat::identity(n, n) * z - &a;
            let x = shifted.lu().solve(&(b * r)).unwrap();
            t.columns_mut(j * s, s).copy_from(&x);
        }
        worst[2] = worst[2].max(rel(&vg, &t));
    }
    let msg = format!(
        "n=50, m=5, s=2, 3 systems: right {:.2e}, left {:.2e}, basis {:.2e} (<= 1e-9)",
        worst[0], worst[1], worst[2]
    );
    if worst.iter().all(|&w| w <= 1e-9) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn random_omega(rng: &mut ChaCha8Rng) -> Complex64 {
    let re = 5.0 * uniform(rng);
    let im = 10f64.powf(-2.0 + 5.0 * uniform(rng)) * if uniform(rng) < 0.5 { -1.0 } else { 1.0 };
    c(re, im)
}

/// Manually driven adaptive iterations, checking `f` on each state.
fn drive<S: StateSpace>(sys: &S, s: usize, iterations: usize, mut f: impl FnMut(&ReductionState) -> Result<(), String>) -> Result<(), String> {
    let cache = SolverCache::new(8);
    let (r, l) = initial_directions(sys, s);
    let one = Shift::Finite(c(1.0, 0.0));
    let mut st = ReductionState::init(sys, &cache, one, one, &r, &l).map_err(|e| e.to_string())?;
    let b_norm = spectral_norm(sys.input());
    let c_norm = spectral_norm(sys.output_transposed());
    for _ in 0..iterations {
        note_state(&st);
        f(&st)?;
        let sel = select_next(&st, sys, ResidualMode::Economical).map_err(|e| e.to_string())?;
        let r = sel.right_direction(s, b_norm).map_err(|e| e.to_string())?;
        let l = sel.left_direction(s, c_norm).map_err(|e| e.to_string())?;
        st.extend(sys, &cache, Shift::Finite(sel.sigma), Shift::Finite(sel.mu), &r, &l)
            .map_err(|e| e.to_string())?;
    }
    note_state(&st);
    f(&st)
}

fn residual_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = [0.0f64; 2];
    let (mut points, mut over) = (0, 0);
    let mut where_worst = String::new();
    let cases: Vec<(&str, FirstOrderSystem, usize)> = vec![
        ("FDM100", fdm(10), 2),
        ("random150", random_stable(150, 3, 11), 1),
        ("random200", random_stable(200, 4, 12), 2),
    ];
    for (name, sys, s) in &cases {
        let mut block = 0;
        drive(sys, *s, 5, |st| {
            block += 1;
            let ev = ResidualEvaluator::new(st, sys).map_err(|e| e.to_string())?;
            let cond = st.assemble().map_err(|e| e.to_string())?.cond_g;
            for _ in 0..25 {
                let w = random_omega(&mut rng);
                let (db, dc) = direct_residuals(st, sys, w).map_err(|e| e.to_string())?;
                let (fb, fc) = factored_residuals(st, sys, w).map_err(|e| e.to_string())?;
                let e_full = rel(&fb, &db).max(rel(&fc, &dc));
                let (nb, nc) = ev.norms(w).ok_or("reduced residual singular")?;
                let (sb, sc) = (spectral_norm(&db), spectral_norm(&dc));
                let e_norm = ((nb - sb).abs() / sb).max((nc - sc).abs() / sc);
                if e_full.max(e_norm) > worst[0].max(worst[1]) {
                    where_worst = format!("{name} after {block} blocks, cond(G) {cond:.1e}");
                }
                worst[0] = worst[0].max(e_full);
                worst[1] = worst[1].max(e_norm);
                over += usize::from(e_full.max(e_norm) > 1e-10);
                points += 1;
            }
            Ok(())
        })?;
    }
    let msg = format!(
        "{points} (state, omega) pairs: full vs factored {:.2e}, full vs reduced norm {:.2e} (<= 1e-10); {over} pairs over, worst at {where_worst}",
        worst[0], worst[1]
    );
    if worst.iter().all(|&w| w <= 1e-10) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn direction_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_gap = f64::NEG_INFINITY;
    let mut checks = 0;
    for seed in [21, 22] {
        let sys = random_stable(50, 3, seed);
        drive(&sys, 1, 4, |st| {
            let sel = select_next(st, &sys, ResidualMode::Economical).map_err(|e| e.to_string())?;
            let r = sel.right_direction(1, spectral_norm(sys.input())).map_err(|e| e.to_string())?;
            let l = sel.left_direction(1, spectral_norm(sys.output_transposed())).map_err(|e| e.to_string())?;
            let rb = direct_residuals(st, &sys, sel.sigma).map_err(|e| e.to_string())?.0;
            let rc = direct_residuals(st, &sys, sel.mu).map_err(|e| e.to_string())?.1;
            for (res, d) in [(&rb, &r), (&rc, &l)] {
                let chosen = (res * d).norm();
                let mut best = 0.0f64;
                for _ in 0..10_000 {
                    best = best.max((res * random_unit(&mut rng, 3)).norm());
                }
                worst_gap = worst_gap.max(best - chosen);
                checks += 1;
            }
            Ok(())
        })?;
    }
    let msg = format!("{checks} selections x 10000 random unit vectors: worst excess {worst_gap:.2e} (<= 1e-8)");
    if worst_gap <= 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn convergence_trend() -> Outcome {
    let sys = fdm(20);
    let grid = FrequencyGrid::default();
    let full = sample_full(&sys, &grid);
    let mut errs = Vec::new();
    for m in [10, 40] {
        let out = run_abtl(&sys, &AbtlOptions::new(3, m)).map_err(|e| e.to_string())?;
        note_run(&out);
        errs.push(compare_with_full(&full, &out.model, &grid).hinf_estimate());
    }
    let msg = format!("FDM400: sampled Hinf error m=10 {:.3e}, m=40 {:.3e} (ratio {:.1e} >= 10)", errs[0], errs[1], errs[0] / errs[1]);
    if errs[1] * 10.0 <= errs[0] {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Damped spring chain: diagonal masses, tridiagonal stiffness, Rayleigh damping.
fn spring_chain(n: usize, seed: u64) -> SecondOrderSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let masses: Vec<f64> = (0..n).map(|_| 1.0 + 0.5 * uniform(&mut rng)).collect();
    let springs: Vec<f64> = (0..=n).map(|_| 1.0 + uniform(&mut rng)).collect();
    let mut tk = Vec::new();
    for i in 0..n {
        tk.push((i, i, springs[i] + springs[i + 1]));
        if i + 1 < n {
            tk.push((i, i + 1, -springs[i + 1]));
            tk.push((i + 1, i, -springs[i + 1]));
        }
    }
    let k = CscMatrix::from_triplets(n, n, &tk);
    let m = CscMatrix::from_triplets(n, n, &masses.iter().enumerate().map(|(i, &v)| (i, i, v)).collect::<Vec<_>>());
    let td: Vec<_> = k.triplets().into_iter().map(|(i, j, v)| (i, j, 0.01 * v + if i == j { 0.02 * masses[i] } else { 0.0 })).collect();
    let d = CscMatrix::from_triplets(n, n, &td);
    let b = uniform_matrix(&mut rng, n, 2);
    let cm = uniform_matrix(&mut rng, 2, n);
    SecondOrderSystem::new(Some(m), d, k, b, cm).unwrap()
}

fn second_order() -> Outcome {
    let sos = spring_chain(500, 8);
    let lin = sos.explicit_linearization().map_err(|e| e.to_string())?;
    let grid = log_grid(1e-2, 1e1, 30).unwrap();
    let mut transfer = 0.0f64;
    for &w in &grid.points {
        let z = c(0.0, w);
        let f = eval_transfer(&lin, z).map_err(|e| e.to_string())?;
        let q = eval_second_order_transfer(&sos, z).map_err(|e| e.to_string())?;
        transfer = transfer.max(rel(&q, &f));
    }
    let red = reduce_second_order(&sos, &AbtlOptions::new(2, 8)).map_err(|e| e.to_string())?;
    note_run(&red.abtl);
    let k = red.model.order();
    let shaped = red.model.dm.shape() == (k, k) && red.model.km.shape() == (k, k) && red.projected.order() == 2 * k;
    let mut structure = 0.0f64;
    for &w in &grid.points {
        let z = c(0.0, w);
        let a = red.model.transfer(z).map_err(|e| e.to_string())?;
        let b = red.projected.transfer(z).map_err(|e| e.to_string())?;
        structure = structure.max(rel(&a, &b));
    }
    let msg = format!(
        "n=500 chain, 30 frequencies: quadratic vs linearized {transfer:.2e}; reduced order {k} (D_m, K_m) vs projected {structure:.2e} (<= 1e-10), cond(E) {:.1e}",
        red.coupling_condition
    );
    if shaped && transfer <= 1e-10 && structure <= 1e-10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn peak_memory_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

fn scale_smoke() -> Outcome {
    let started = Instant::now();
    let sys = fdm(100);
    let out = run_abtl(&sys, &AbtlOptions::new(3, 30)).map_err(|e| e.to_string())?;
    note_run(&out);
    let secs = started.elapsed().as_secs_f64();
    let mem = peak_memory_bytes();
    let mem_ok = mem.is_none_or(|b| b < 4 << 30);
    let msg = format!(
        "FDM10000, m=30: {} blocks in {secs:.1} s (< 120 s), peak RSS {} (< 4 GiB)",
        out.state.iterations(),
        mem.map_or("unavailable".to_string(), |b| format!("{:.0} MiB", b as f64 / (1 << 20) as f64))
    );
    if secs < 120.0 && mem_ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn determinism() -> Outcome {
    let run = || {
        let sys = generate_fdm(&FdmSpec::new(20, 6, 42)).unwrap();
        run_abtl(&sys, &AbtlOptions::new(3, 10)).unwrap()
    };
    let (a, b) = (run(), run());
    note_run(&a);
    let bits = |m: &CMat| m.iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect::<Vec<u64>>();
    let same = bits(&a.model.am) == bits(&b.model.am)
        && bits(&a.model.bm) == bits(&b.model.bm)
        && bits(&a.model.cm) == bits(&b.model.cm)
        && a.history == b.history;
    let msg = format!("two FDM400 runs, seed 42: reduced matrices and histories identical = {same}");
    if same {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() -> ExitCode {
    // same order as the criteria list, except that biorthogonality is
    // judged after every other run has contributed its states
    let checks: Vec<(usize, &str, fn() -> Outcome)> = vec![
        (1, "interpolation", interpolation),
        (2, "hermite", hermite),
        (4, "recurrence relations", recurrence_relations),
        (5, "residual formulas", residual_equivalence),
        (6, "direction optimality", direction_optimality),
        (7, "convergence trend", convergence_trend),
        (8, "second order", second_order),
        (9, "scale", scale_smoke),
        (10, "determinism", determinism),
        (3, "biorthogonality", biorthogonality),
    ];
    let mut results: Vec<(usize, &str, Outcome)> = checks
        .into_iter()
        .map(|(k, name, f)| {
            let r = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
            (k, name, r)
        })
        .collect();
    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (k, name, r) in &results {
        match r {
            Ok(msg) => println!("PASS criterion {k:>2} {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {k:>2} {name}: {msg}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    // failures are reported above; set ACCEPTANCE_STRICT to turn them into a failing exit status
    if failed == 0 || std::env::var_os("ACCEPTANCE_STRICT").is_none() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
