use std::f64::consts::PI;

use koplab::lp::{self, phi_lp, BlockHistory, DyadicPartition, FieldSelector, NormKind, NormRow, TimeNorm, Trajectory};
use koplab::model::{FluidParams, State};
use koplab::spectral::{Fourier, GridSpec, SpectralField};
use koplab::Error;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params() -> FluidParams {
    FluidParams::new(0.7, 0.4, 1.3, 1.0, 1.4).unwrap()
}

fn random_field(f: &Fourier, rng: &mut ChaCha8Rng, ncomp: usize) -> SpectralField {
    let samples: Vec<Vec<f64>> =
        (0..ncomp).map(|_| (0..f.grid().len()).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    f.dealias(&f.forward(&samples).unwrap())
}

fn random_state(f: &Fourier, rng: &mut ChaCha8Rng, with_c: bool) -> State {
    let d = f.grid().d;
    let q = random_field(f, rng, 1).scale(0.1);
    let u = random_field(f, rng, d);
    let c = with_c.then(|| random_field(f, rng, 1));
    State::perturbation(f, q, u, c).unwrap()
}

/// Direct `‖Δ_j f‖_{L²}` from the profile, independent of the partition tables.
fn block_oracle(f: &Fourier, field: &SpectralField, j: i32) -> f64 {
    let g = f.grid();
    let mut s = 0.0;
    for c in field.components() {
        for (i, z) in c.iter().enumerate().skip(1) {
            let w = phi_lp(f.xi_norm2(i).sqrt() * 2f64.powi(-j));
            s += w * w * z.norm_sqr();
        }
    }
    (s * g.volume()).sqrt()
}

#[test]
fn blocks_match_direct_profile_sums() {
    let f = Fourier::new(GridSpec::new(2, 32, 8.0 * PI).unwrap());
    let part = DyadicPartition::new(&f);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = random_field(&f, &mut rng, 2);
    let bn = part.block_norms(&x);
    let (lo, hi) = part.j_range();
    for j in lo..=hi {
        let o = block_oracle(&f, &x, j);
        assert!((bn.get(j) - o).abs() <= 1e-12 * o.max(1e-300), "j {j}");
        assert!((part.dyadic_block(&x, j).l2_norm() - o).abs() <= 1e-12 * o.max(1e-300));
    }
}

#[test]
fn unit_frequency_touches_three_blocks_at_most() {
    let f = Fourier::new(GridSpec::new(1, 64, 2.0 * PI).unwrap());
    let part = DyadicPartition::new(&f);
    let x = f.sample(|p| p[0].cos());
    let (lo, hi) = part.j_range();
    for j in lo..=hi {
        let n = part.dyadic_block(&x, j).l2_norm();
        if !(-1..=1).contains(&j) {
            assert!(n < 1e-14, "block {j} = {n}");
        }
    }
    assert!(part.dyadic_block(&x, 0).l2_norm() > 0.5);
}

#[test]
fn partition_of_unity_and_constants() {
    for (d, n) in [(1, 128), (2, 32), (3, 16)] {
        let f = Fourier::new(GridSpec::with_default_length(d, n).unwrap());
        let part = DyadicPartition::new(&f);
        let mut rng = ChaCha8Rng::seed_from_u64(d as u64);
        let x = random_field(&f, &mut rng, 1);
        let (lo, hi) = part.j_range();
        let mut acc = SpectralField::zeros(*f.grid(), 1);
        acc.component_mut(0)[0] = Complex64::new(x.mean()[0], 0.0);
        for j in lo..=hi {
            acc = acc.add(&part.dyadic_block(&x, j)).unwrap();
        }
        assert!(acc.sub(&x).unwrap().l2_norm() <= 1e-10 * x.l2_norm());
        let c = f.sample(|_| 3.0);
        assert!((lo..=hi).all(|j| part.dyadic_block(&c, j).l2_norm() == 0.0));
    }
}

#[test]
fn l2_block_equivalence_and_homogeneity() {
    let f = Fourier::new(GridSpec::with_default_length(1, 256).unwrap());
    let part = DyadicPartition::new(&f);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let x = random_field(&f, &mut rng, 1);
        let sq: f64 = part.block_norms(&x).iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        let full = x.without_mean().l2_norm();
        assert!(sq >= full / 3f64.sqrt() * (1.0 - 1e-12) && sq <= full * (1.0 + 1e-12));
        let s = rng.random_range(-2.0..2.0);
        let b = lp::besov_norm(&f, &x, s);
        assert!((lp::besov_norm(&f, &x.scale(2.0), s) - 2.0 * b).abs() <= 1e-12 * b);
    }
}

#[test]
fn hybrid_limits() {
    let f = Fourier::new(GridSpec::with_default_length(1, 256).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = random_field(&f, &mut rng, 1);
    let max_xi = f.norm2_table().iter().cloned().fold(0.0, f64::max).sqrt();
    for s in [-1.0, 0.0, 0.5] {
        let big = 8.0 * max_xi;
        let h = lp::hybrid_norm(&f, &x, s, big);
        let b = lp::besov_norm(&f, &x, s + 2.0);
        assert!((h - b).abs() <= 1e-12 * b);
        let small = 1e-4;
        let h = lp::hybrid_norm(&f, &x, s, small) / (small * small);
        let b = lp::besov_norm(&f, &x, s);
        assert!((h - b).abs() <= 1e-12 * b);
    }
}

fn trajectory(f: &Fourier, rng: &mut ChaCha8Rng, n: usize, with_c: bool) -> Trajectory {
    let times: Vec<f64> = (0..n).map(|k| k as f64 * 0.25 + rng.random_range(0.0..0.1)).collect();
    let states = (0..n).map(|_| random_state(f, rng, with_c)).collect();
    Trajectory::new(times, states).unwrap()
}

#[test]
fn tilde_norm_examples() {
    let f = Fourier::new(GridSpec::new(1, 64, 8.0 * PI).unwrap());
    let part = DyadicPartition::new(&f);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let one = trajectory(&f, &mut rng, 1, false);
    let spatial = lp::besov_norm(&f, &one.states()[0].q, 0.5);
    let t = lp::tilde_norm(&part, &one, FieldSelector::Q, 0.5, TimeNorm::Sup, NormKind::Besov).unwrap();
    assert!((t - spatial).abs() <= 1e-14 * spatial);

    // Constant in time on [0, 2]: L¹ norm is 2 × spatial.
    let s0 = random_state(&f, &mut rng, false);
    let flat = Trajectory::new(vec![0.0, 0.3, 1.1, 2.0], vec![s0.clone(), s0.clone(), s0.clone(), s0.clone()]).unwrap();
    let kind = NormKind::Hybrid { alpha: 3.0 };
    let t = lp::tilde_norm(&part, &flat, FieldSelector::U, 0.0, TimeNorm::Integral, kind).unwrap();
    let spatial = part.block_norms(&s0.u).weighted(0.0, kind);
    assert!((t - 2.0 * spatial).abs() <= 1e-13 * spatial);

    // Minkowski: tilde ≥ plain for both time norms.
    for _ in 0..20 {
        let tr = trajectory(&f, &mut rng, 6, false);
        let h = BlockHistory::new(&part, &tr, FieldSelector::Q).unwrap();
        for rho in [TimeNorm::Sup, TimeNorm::Integral] {
            let (a, b) = (h.tilde(-0.5, rho, NormKind::Besov), h.plain(-0.5, rho, NormKind::Besov));
            assert!(a >= b * (1.0 - 1e-14));
        }
    }
}

#[test]
fn trajectory_errors() {
    let f = Fourier::new(GridSpec::new(1, 16, 2.0 * PI).unwrap());
    let part = DyadicPartition::new(&f);
    let empty = Trajectory::empty();
    assert!(matches!(BlockHistory::new(&part, &empty, FieldSelector::Q), Err(Error::EmptyTrajectory)));
    let z = State::zero(&f);
    let tr = Trajectory::new(vec![0.0], vec![z.clone()]).unwrap();
    assert!(matches!(lp::f_norm(&part, &tr, 0.5, 1.0, &params()), Err(Error::MissingComponent("c"))));
    assert!(Trajectory::new(vec![1.0, 1.0], vec![z.clone(), z.clone()]).is_err());
    let mut t2 = Trajectory::empty();
    t2.push(0.0, z.clone()).unwrap();
    assert!(t2.push(0.0, z).is_err());
    assert_eq!(tr.weights(), vec![0.0]);
}

#[test]
fn energy_norms_zero_scaling_and_extra_terms() {
    let f = Fourier::new(GridSpec::new(2, 16, 8.0 * PI).unwrap());
    let part = DyadicPartition::new(&f);
    let p = params();
    let zero = Trajectory::new(vec![0.0, 1.0], vec![State::zero(&f), State::zero(&f)]).unwrap();
    assert_eq!(lp::e_norm(&part, &zero, 1.0, 2.0, &p).unwrap(), 0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let tr = trajectory(&f, &mut rng, 5, true);
    let scaled = tr.map_states(|s| Ok(s.scale(3.0))).unwrap();
    for (s, alpha) in [(1.0, 2.0), (0.5, 16.0)] {
        let (e, f0) = (lp::e_norm(&part, &tr, s, alpha, &p).unwrap(), lp::f_norm(&part, &tr, s, alpha, &p).unwrap());
        assert!((lp::e_norm(&part, &scaled, s, alpha, &p).unwrap() - 3.0 * e).abs() <= 1e-12 * e);
        assert!((lp::f_norm(&part, &scaled, s, alpha, &p).unwrap() - 3.0 * f0).abs() <= 1e-12 * f0);

        // The four c-terms recomputed from per-frame block oracles.
        let w = tr.weights();
        let (lo, hi) = part.j_range();
        let (mut sup_a, mut sup_b, mut int_a, mut int_b) = (0.0, 0.0, 0.0, 0.0);
        for j in lo..=hi {
            let norms: Vec<f64> = tr.states().iter().map(|st| block_oracle(&f, st.c.as_ref().unwrap(), j)).collect();
            let sup = norms.iter().cloned().fold(0.0, f64::max);
            let int: f64 = norms.iter().zip(&w).map(|(a, b)| a * b).sum();
            let m = (alpha * alpha).min(4f64.powi(j));
            sup_a += 2f64.powf(j as f64 * (s - 1.0)) * sup;
            sup_b += 2f64.powf(j as f64 * s) * sup;
            int_a += m * 2f64.powf(j as f64 * (s - 1.0)) * int;
            int_b += m * 2f64.powf(j as f64 * s) * int;
        }
        let extra = sup_a + p.nu * sup_b + p.nu * int_a + p.nu * p.nu * int_b;
        assert!((f0 - e - extra).abs() <= 1e-11 * f0, "s {s}: {} vs {extra}", f0 - e);
    }
}

#[test]
fn norm_csv_layout() {
    let rows = vec![
        NormRow { t: Some(0.5), kind: "besov_21".into(), s: -0.5, alpha: None, value: 2.0 },
        NormRow { t: None, kind: "F".into(), s: 0.0, alpha: Some(8.0), value: 0.25 },
    ];
    let mut buf = Vec::new();
    lp::write_norm_csv(&mut buf, &rows).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines, ["# schema: norm_report,1", "t,norm_kind,s,alpha,value", "0.5,besov_21,-0.5,,2e0", "traj,F,0,8,2.5e-1"]);
}
