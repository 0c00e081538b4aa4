use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::index::{gradient_at, potential_value_at};
use super::*;
use crate::model::{BlockVector, SystemConfig, ZeroPotential};
use crate::problem::seven_frequency_problem;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn context(eps: f64, a: f64, order: usize) -> (MfeContext, ResonanceData, State) {
    let (sys, state) = seven_frequency_problem(eps, a).unwrap();
    let res = ResonanceData::analyze(sys.omega(), eps, order).unwrap();
    (MfeContext::new(&sys, &res, DEFAULT_DEGREE).unwrap(), res, state)
}

/// Three non-resonant oscillators without coupling.
fn free_context(eps: f64) -> (MfeContext, State) {
    let omega = vec![1.0 / eps, 2f64.sqrt() / eps, 3f64.sqrt() / eps];
    let sys = SystemConfig::new(eps, omega, Arc::new(ZeroPotential::new(vec![1, 1, 2, 1])), 10.0).unwrap();
    let dims = sys.dims().to_vec();
    let state = State::new(
        BlockVector::from_flat(&dims, vec![0.3, 0.5, -0.7, 0.2, 0.9]).unwrap(),
        BlockVector::from_flat(&dims, vec![1.0, 0.01, 0.02, -0.01, 0.005]).unwrap(),
    )
    .unwrap();
    (MfeContext::for_system(&sys, 1, DEFAULT_DEGREE).unwrap(), state)
}

fn random_values(idx: &ExpansionIndex, rng: &mut ChaCha8Rng) -> Vec<Vec<Complex64>> {
    (0..idx.num_entries())
        .map(|e| {
            (0..idx.dim(e))
                .map(|_| if e == 0 { c(rng.gen_range(-1.0..1.0), 0.0) } else { c(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)) })
                .collect()
        })
        .collect()
}

fn refs(v: &[Vec<Complex64>]) -> Vec<&[Complex64]> {
    v.iter().map(|x| x.as_slice()).collect()
}

#[test]
fn gradient_matches_finite_differences_of_potential() {
    let (ctx, res, _) = context(0.01, 0.5, 1);
    let idx = &ctx.index;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let values = random_values(idx, &mut rng);
    let eta = 1e-6;
    let mut worst: f64 = 0.0;
    for target in 0..idx.num_entries() {
        let mut grad = vec![c(0.0, 0.0); idx.dim(target)];
        gradient_at(idx, &ctx.sys, &refs(&values), target, &mut grad);
        // ∇_j^{-k} is the derivative with respect to z_j^{-k}
        let wrt = idx.conjugate_entry(target);
        let directions: &[Complex64] = if wrt == 0 { &[c(1.0, 0.0)] } else { &[c(1.0, 0.0), c(0.0, 1.0)] };
        for comp in 0..idx.dim(target) {
            for &dir in directions {
                let mut plus = values.clone();
                let mut minus = values.clone();
                plus[wrt][comp] += dir * eta;
                minus[wrt][comp] -= dir * eta;
                let up = potential_value_at(idx, &res, &ctx.sys, &refs(&plus)).unwrap();
                let down = potential_value_at(idx, &res, &ctx.sys, &refs(&minus)).unwrap();
                let fd = (up - down) / (2.0 * eta);
                let expected = grad[comp] * dir;
                let rel = (fd - expected).norm() / expected.norm().max(1e-300);
                assert!(rel <= 1e-6, "entry {target} comp {comp}: fd {fd} vs {expected}");
                worst = worst.max(rel);
            }
        }
    }
    assert!(worst.is_finite());
}

#[test]
fn gradient_matches_finite_differences_at_order_two() {
    let eps = 0.02;
    let (ctx, res, _) = context(eps, 0.5, 2);
    let idx = &ctx.index;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let values = random_values(idx, &mut rng);
    let eta = 1e-6;
    for target in (0..idx.num_entries()).step_by(37).chain([0]) {
        let mut grad = vec![c(0.0, 0.0)];
        gradient_at(idx, &ctx.sys, &refs(&values), target, &mut grad);
        let wrt = idx.conjugate_entry(target);
        let mut plus = values.clone();
        let mut minus = values.clone();
        plus[wrt][0] += eta;
        minus[wrt][0] -= eta;
        let fd = (potential_value_at(idx, &res, &ctx.sys, &refs(&plus)).unwrap()
            - potential_value_at(idx, &res, &ctx.sys, &refs(&minus)).unwrap())
            / (2.0 * eta);
        let rel = (fd - grad[0]).norm() / grad[0].norm();
        assert!(rel <= 1e-6, "entry {target}: {fd} vs {}", grad[0]);
    }
}

#[test]
fn only_slow_coefficient_gives_slow_gradient() {
    let (ctx, _, _) = context(0.01, 0.5, 1);
    let idx = &ctx.index;
    let mut values: Vec<Vec<Complex64>> = (0..idx.num_entries()).map(|e| vec![c(0.0, 0.0); idx.dim(e)]).collect();
    values[0][0] = c(0.8, 0.0);
    let mut g = vec![c(0.0, 0.0)];
    gradient_at(idx, &ctx.sys, &refs(&values), 0, &mut g);
    let mut q = vec![0.0; 8];
    q[0] = 0.8;
    let mut full = vec![0.0; 8];
    ctx.sys.potential().gradient(&q, &mut full);
    assert!((g[0] - c(full[0], 0.0)).norm() < 1e-14);
}

#[test]
fn conjugate_symmetric_input_gives_conjugate_gradients() {
    let (ctx, _, _) = context(0.01, 0.5, 1);
    let idx = &ctx.index;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut values = random_values(idx, &mut rng);
    for e in 0..idx.num_entries() {
        let ce = idx.conjugate_entry(e);
        if ce == e {
            for z in values[e].iter_mut() {
                z.im = 0.0;
            }
        } else if ce > e {
            values[ce] = values[e].iter().map(|z| z.conj()).collect();
        }
    }
    for e in 0..idx.num_entries() {
        let mut g = vec![c(0.0, 0.0)];
        let mut h = vec![c(0.0, 0.0)];
        gradient_at(idx, &ctx.sys, &refs(&values), e, &mut g);
        gradient_at(idx, &ctx.sys, &refs(&values), idx.conjugate_entry(e), &mut h);
        assert!((g[0] - h[0].conj()).norm() <= 1e-14 * g[0].norm().max(1.0));
    }
}

#[test]
fn diagonal_entries_use_class_representatives() {
    let (ctx, _, _) = context(0.01, 0.5, 1);
    let idx = &ctx.index;
    // modes 1, 2, 3 share the class of e1
    let e1 = MultiIndex::unit(7, 1);
    for j in 1..=3 {
        assert_eq!(idx.reps[idx.diagonal[j - 1].0], e1);
        assert!((idx.kdot[idx.diagonal[j - 1].0] - idx.varpi[j]).abs() < 1e-9 * idx.varpi[j]);
    }
    for j in 4..=7 {
        assert_eq!(idx.reps[idx.diagonal[j - 1].0], MultiIndex::unit(7, j));
    }
    assert_eq!(idx.num_reps(), 11);
}

#[test]
fn starting_iterate_reproduces_initial_data() {
    let (ctx, _, state) = context(0.01, 0.5, 1);
    let z = ctx.starting_iterate(&state, 0.0).unwrap();
    let r = z.reconstruct(0.0).unwrap();
    for (a, b) in r.q.as_slice().iter().zip(state.q.as_slice()) {
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }
    for (a, b) in r.p.as_slice().iter().zip(state.p.as_slice()) {
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }
    // hand check on mode 4: a = (q + p/(iϖ))/2
    let idx = z.index();
    let (ip, _) = idx.diagonal[3];
    let a = z.get(4, ip).eval(0.3)[0];
    let (q, p, w) = (state.q.block(4)[0], state.p.block(4)[0], idx.varpi[4]);
    assert!((a - c(q / 2.0, -p / (2.0 * w))).norm() < 1e-15);
    assert!(a.norm() <= q.abs() + p.abs() / w);
}

#[test]
fn slow_start_is_constant_at_critical_point() {
    let (ctx, _, mut state) = context(0.01, 0.0, 1);
    // U(q_0, 0, .., 0) = q_0²/2 for a = 0, critical at 0
    state.q.block_mut(0)[0] = 0.0;
    state.p.block_mut(0)[0] = 0.0;
    let z = ctx.starting_iterate(&state, 0.0).unwrap();
    assert!(z.get(0, 0).coeffs()[0].iter().all(|x| x.norm() < 1e-15));
}

#[test]
fn free_oscillators_are_a_fixed_point() {
    let (ctx, state) = free_context(0.01);
    let z0 = ctx.starting_iterate(&state, 0.0).unwrap();
    let z1 = ctx.iterate(&z0).unwrap();
    let report = ctx.defect(&z0, &z1);
    assert!(report.sup < 1e-13, "defect {}", report.sup);
    let (z, report) = ctx.construct(&state, 0.0, ConstructOptions::default()).unwrap();
    assert_eq!(report.history.len(), 1);
    assert_eq!(report.stop_reason, StopReason::Converged);
    // ℰ is constant across the window and equals 2Σϖ²|z^{⟨j⟩}|²
    let e0 = z.almost_invariant(0.0).unwrap();
    let e1 = z.almost_invariant(0.5 * z.window()).unwrap();
    let e2 = z.almost_invariant(z.window()).unwrap();
    assert!((e0 - e1).abs() <= 1e-13 * e0 && (e0 - e2).abs() <= 1e-13 * e0);
    let idx = z.index();
    let mut expected = 0.0;
    for j in 1..idx.dims.len() {
        let w = idx.varpi[j];
        let y = z.get(j, idx.diagonal[j - 1].0).eval(0.2);
        expected += 2.0 * w * w * y.iter().map(|v| v.norm_sqr()).sum::<f64>();
    }
    assert!((e0 - expected).abs() <= 1e-12 * expected);
}

#[test]
fn zero_expansion_has_zero_invariant() {
    let (ctx, mut state) = free_context(0.01);
    state.p = BlockVector::zeros(&[1, 1, 2, 1]);
    state.q = BlockVector::zeros(&[1, 1, 2, 1]);
    let z = ctx.starting_iterate(&state, 0.0).unwrap();
    assert_eq!(z.almost_invariant(0.5).unwrap(), 0.0);
}

#[test]
fn free_oscillators_track_without_drift_or_jumps() {
    let (ctx, state) = free_context(0.01);
    let mut source = ReferenceSource::new(state, ctx.sys.clone());
    let series = track_invariant(&ctx, &mut source, &TrackOptions::new(4)).unwrap();
    for s in &series {
        assert!(s.drift <= 1e-12 * s.e_start, "drift {}", s.drift);
        if let Some(j) = s.jump_to_next {
            assert!(j <= 1e-9 * s.e_start, "jump {j}");
        }
        assert!(s.reconstruction_error < 1e-8, "{}", s.reconstruction_error);
    }
}

#[test]
fn resonant_free_oscillators_conserve_the_invariant() {
    // ω_1 = ω_2 + ε² forces ϑ ≠ 0; ℰ must still be exactly conserved once
    // the defect is gone
    let eps = 0.01;
    let omega = vec![1.0 / eps, 1.0 / eps + eps];
    let sys = SystemConfig::new(eps, omega, Arc::new(ZeroPotential::new(vec![1, 1, 1])), 10.0).unwrap();
    let state = State::new(
        BlockVector::from_flat(&[1, 1, 1], vec![0.1, 0.4, -0.8]).unwrap(),
        BlockVector::from_flat(&[1, 1, 1], vec![0.5, 0.003, 0.004]).unwrap(),
    )
    .unwrap();
    let ctx = MfeContext::for_system(&sys, 1, DEFAULT_DEGREE).unwrap();
    assert!(ctx.index.beta[1] != 0.0);
    let opts = ConstructOptions { max_sweeps: Some(60), target_defect: Some(1e-13) };
    let (z, report) = ctx.construct(&state, 0.0, opts).unwrap();
    assert!(report.sup <= 1e-12, "defect {}", report.sup);
    let e0 = z.almost_invariant(0.0).unwrap();
    let e1 = z.almost_invariant(z.window()).unwrap();
    assert!((e0 - e1).abs() <= 1e-11 * e0, "{e0} vs {e1}");
}

#[test]
fn identical_iterates_have_zero_defect() {
    let (ctx, _, state) = context(0.01, 0.5, 1);
    let z = ctx.starting_iterate(&state, 0.0).unwrap();
    let report = ctx.defect(&z, &z);
    assert_eq!(report.sup, 0.0);
    assert_eq!(report.lambda_c2, 0.0);
}

#[test]
fn residual_identity_holds_for_consecutive_iterates() {
    let (ctx, _, state) = context(0.01, 0.5, 1);
    let mut z = ctx.starting_iterate(&state, 0.0).unwrap();
    for _ in 0..4 {
        let z1 = ctx.iterate(&z).unwrap();
        let closed = ctx.defect_nodal(&z, &z1);
        let direct = ctx.residual_nodal(&z);
        for (a, b) in closed.iter().flatten().zip(direct.iter().flatten()) {
            assert!((a - b).norm() <= 1e-9, "{a} vs {b}");
        }
        z = z1;
    }
}

#[test]
fn defect_decreases_over_first_sweeps() {
    let (ctx, _, state) = context(0.01, 0.5, 1);
    let opts = ConstructOptions { max_sweeps: Some(10), target_defect: Some(0.0) };
    let (_, report) = ctx.construct(&state, 0.0, opts).unwrap();
    let d: Vec<f64> = report.history.iter().map(|h| h.sup_defect).collect();
    for w in d.windows(2) {
        // once at roundoff level the sequence is noise
        if w[0] > 1e-11 {
            assert!(w[1] <= 1.1 * w[0], "defects {d:?}");
        }
    }
}

#[test]
fn constructed_expansion_properties() {
    let eps = 0.01;
    let (ctx, _, state) = context(eps, eps, 1);
    let (z, report) = ctx.construct(&state, 0.0, ConstructOptions::default()).unwrap();
    assert!(report.sup <= 10.0 * eps * eps, "defect {}", report.sup);
    assert!(z.conjugate_symmetry_error() <= 1e-12);
    assert!(z.resolution() < 1e-10, "tail {}", z.resolution());
    let r = z.reconstruct(0.0).unwrap();
    let err = remainder_norm(&state, &r, &ctx.sys) / ctx.sys.omega()[6];
    assert!(err <= 1e-10, "{err}");
    for (a, b) in r.q.as_slice().iter().zip(state.q.as_slice()) {
        assert!((a - b).abs() <= 1e-10);
    }
    for (a, b) in r.p.as_slice().iter().zip(state.p.as_slice()) {
        assert!((a - b).abs() <= 1e-10);
    }
    let e = z.almost_invariant_complex(0.5 * z.window()).unwrap();
    assert!(e.im.abs() <= 1e-10 * e.re.abs());
    assert!(z.coefficient_sizes().iter().all(|s| s.constant.is_finite()));
}

#[test]
fn doubling_degree_does_not_change_the_expansion() {
    let eps = 0.01;
    let (sys, state) = seven_frequency_problem(eps, 0.5).unwrap();
    let res = ResonanceData::analyze(sys.omega(), eps, 1).unwrap();
    let opts = ConstructOptions { max_sweeps: Some(6), target_defect: Some(0.0) };
    let run = |deg| {
        let ctx = MfeContext::new(&sys, &res, deg).unwrap();
        let (z, rep) = ctx.construct(&state, 0.0, opts).unwrap();
        let e = z.almost_invariant(z.window()).unwrap();
        let q = z.reconstruct(0.7 * z.window()).unwrap();
        (rep.history.iter().map(|h| h.sup_defect).collect::<Vec<_>>(), e, q)
    };
    let (d1, e1, q1) = run(24);
    let (d2, e2, q2) = run(48);
    assert!((e1 - e2).abs() <= 1e-8 * e1.abs());
    for (a, b) in q1.q.as_slice().iter().zip(q2.q.as_slice()) {
        assert!((a - b).abs() <= 1e-8 * a.abs().max(1e-2));
    }
    // defects above the roundoff floor agree
    for (a, b) in d1.iter().zip(&d2) {
        if *a > 1e-9 {
            assert!((a - b).abs() <= 1e-8 * a, "{a} vs {b}");
        }
    }
}

#[test]
fn evaluation_outside_window_is_rejected() {
    let (ctx, _, state) = context(0.01, 0.5, 1);
    let z = ctx.starting_iterate(&state, 2.0).unwrap();
    assert!(matches!(z.reconstruct(1.0), Err(Error::OutsideWindow { .. })));
    assert!(z.almost_invariant(2.0 + 2.0 * z.window()).is_err());
    assert!(z.reconstruct(2.0 + z.window()).is_ok());
}
