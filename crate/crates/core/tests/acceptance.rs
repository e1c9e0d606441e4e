//! One line per acceptance criterion, `PASS` or `FAIL` with the measured
//! quantities. Exits non-zero if any criterion fails.

use std::fs;
use std::path::Path;

use divimark::bloch::{
    apply_map, bloch_operator, dual_map, trace_pairing, QubitEffect, QubitState,
};
use divimark::dynmap::{
    cp_divisibility, p_divisibility, DynamicalModel, Grid, MapTrajectory, Picture, Side,
};
use divimark::models::{
    builtin, classical_divisibility, classical_norm_monotonicity, classical_rate_table,
    phase_covariant_rates, rate_conversion_check, ClassicalMap, DephRot, GklsRates, PhaseCovariant,
    BUILTIN_MODELS,
};
use divimark::povm::{incompat_p, resource_trajectory, sharpness, BinaryPovm, Resource};
use divimark::witness::{
    dilation_bound_check, dinf, distance_trajectory, heisenberg_revival_pair, nm_measure,
    p_guess_effect_bruteforce, random_dilation, revival_intervals, DistancePair,
};
use divimark::{cli, random, Tolerances};
use nalgebra::{Matrix4, Vector2, Vector3};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn phcov_grid() -> Grid {
    Grid::new(0.0, 5.0, 1001).unwrap()
}

/// Linearly interpolated first time where `f` changes sign from + to −.
fn first_sign_change(times: &[f64], values: &[f64]) -> Option<f64> {
    (0..values.len() - 1)
        .find(|&i| values[i] >= 0.0 && values[i + 1] < 0.0)
        .map(|i| times[i] + (times[i + 1] - times[i]) * values[i] / (values[i] - values[i + 1]))
}

fn criterion_1() -> Outcome {
    let model = PhaseCovariant::counterexample();
    let grid = phcov_grid();
    let times = grid.times();
    let (mut min_gamma, mut max_gz) = (f64::INFINITY, 0.0f64);
    let mut xi_plus = Vec::new();
    for &t in &times {
        let g = phase_covariant_rates(&model.params, t, Side::Left).map_err(|e| e.to_string())?;
        let x = phase_covariant_rates(&model.params, t, Side::Right).map_err(|e| e.to_string())?;
        min_gamma = min_gamma.min(g.plus).min(g.minus);
        max_gz = max_gz.max(g.z.abs());
        xi_plus.push(x.plus);
    }
    let crossing = first_sign_change(&times, &xi_plus).ok_or("xi_plus never changes sign")?;
    let traj = MapTrajectory::from_model(&model, &grid).map_err(|e| e.to_string())?;
    let tol = Tolerances::default();
    let cp_s = cp_divisibility(&traj, Picture::Schrodinger, &tol).map_err(|e| e.to_string())?;
    let p_h = p_divisibility(&traj, Picture::Heisenberg, &tol).map_err(|e| e.to_string())?;
    let first = p_h.first_violation_time.unwrap_or(f64::NAN);
    check(
        min_gamma >= 0.0
            && max_gz <= 1e-10
            && (crossing - 1.88).abs() <= 0.02
            && cp_s.divisible
            && !p_h.divisible
            && (first - crossing).abs() <= grid.dt() + 1e-12,
        format!(
            "min gamma_pm = {min_gamma:.4}, max |gamma_z| = {max_gz:.1e}, xi_+ crossing t = {crossing:.4}, \
             S-CP divisible = {}, H-P first violation t = {first:.4}",
            cp_s.divisible
        ),
    )
}

fn criterion_2() -> Outcome {
    let model = PhaseCovariant::counterexample();
    let grid = phcov_grid();
    let traj = MapTrajectory::from_model(&model, &grid).map_err(|e| e.to_string())?;
    let times = grid.times();
    let xi: Vec<f64> = times
        .iter()
        .map(|&t| {
            phase_covariant_rates(&model.params, t, Side::Right)
                .unwrap()
                .plus
        })
        .collect();
    let crossing = first_sign_change(&times, &xi).ok_or("xi_plus never changes sign")?;
    let (e, f) = heisenberg_revival_pair(&traj, &Tolerances::default())
        .map_err(|e| e.to_string())?
        .ok_or("no Heisenberg P violation to build a pair from")?;
    let curve = distance_trajectory(&traj, &DistancePair::Effects(e, f));
    let onset = revival_intervals(&curve, 1e-9)
        .first()
        .map(|r| r.t_start)
        .unwrap_or(f64::NAN);

    let witness = nm_measure(&traj, Picture::Schrodinger).witness;
    let mut directions = vec![Vector3::new(witness[1], witness[2], witness[3])];
    directions.extend(divimark::bloch::fibonacci_sphere(200));
    let mut worst_rate = f64::NEG_INFINITY;
    for n in directions {
        let pair = DistancePair::States(
            QubitState::pure(n).map_err(|e| e.to_string())?,
            QubitState::pure(-n).map_err(|e| e.to_string())?,
        );
        worst_rate = worst_rate.max(distance_trajectory(&traj, &pair).max_increase_rate());
    }
    check(
        (onset - crossing).abs() <= 2.0 * grid.dt() + 1e-12 && worst_rate <= 1e-6,
        format!(
            "D_inf revival onset t = {onset:.4} vs xi_+ crossing {crossing:.4}; max dD1/dt over 201 optimizer pairs = {worst_rate:.2e}"
        ),
    )
}

fn criterion_3() -> Outcome {
    let grid = Grid::default();
    let t1 = MapTrajectory::from_model(&DephRot::variant1(), &grid).map_err(|e| e.to_string())?;
    let t2 = MapTrajectory::from_model(&DephRot::variant2(), &grid).map_err(|e| e.to_string())?;
    let ns1 = nm_measure(&t1, Picture::Schrodinger).value;
    let nh1 = nm_measure(&t1, Picture::Heisenberg).value;
    let ns2 = nm_measure(&t2, Picture::Schrodinger).value;
    let nh2 = nm_measure(&t2, Picture::Heisenberg).value;

    let m = BinaryPovm::projective(Vector3::y()).map_err(|e| e.to_string())?;
    let n = BinaryPovm::projective(Vector3::x()).map_err(|e| e.to_string())?;
    let sh =
        resource_trajectory(&t1, Resource::Sharpness, &m, None, 20).map_err(|e| e.to_string())?;
    let inc = resource_trajectory(&t1, Resource::IncompatP { p: (0.5, 0.5) }, &m, Some(&n), 20)
        .map_err(|e| e.to_string())?;
    let sh_min = sh.values.iter().copied().fold(f64::INFINITY, f64::min);
    let sh_end = *sh.values.last().unwrap();
    let inc0 = inc.values[0];
    let (imin, inc_min) =
        inc.values
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (i, v)| if v < acc.1 { (i, v) } else { acc },
            );
    let inc_after = inc.values[imin..]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    check(
        ns1 < 1e-6
            && nh1 > 1e-3
            && ns2 > 1e-3
            && nh2 < 1e-6
            && sh_min < 1.0 - 1e-3
            && (sh_end - 1.0).abs() <= 1e-3
            && inc_after > inc_min + 1e-3
            && inc.values.iter().skip(imin).all(|&v| v < inc0),
        format!(
            "N_S(1) = {ns1:.1e}, N_H(1) = {nh1:.4}, N_S(2) = {ns2:.4}, N_H(2) = {nh2:.1e}; \
             sharpness min {sh_min:.4} -> final {sh_end:.6}; incompatibility {inc0:.4} -> min {inc_min:.4} -> revives to {inc_after:.4}"
        ),
    )
}

fn criterion_4() -> Outcome {
    let grid = Grid::default();
    let tol = 1e-9;
    let mut rng = random::seeded(4);
    let xs: Vec<Vector2<f64>> = (0..100)
        .map(|_| Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let mut summary = Vec::new();
    let mut ok = true;
    for (k, c) in [
        (1, ClassicalMap::scenario1()),
        (2, ClassicalMap::scenario2()),
    ] {
        let l = classical_divisibility(&c, Side::Left, &grid, tol).map_err(|e| e.to_string())?;
        let r = classical_divisibility(&c, Side::Right, &grid, tol).map_err(|e| e.to_string())?;
        let mut increases = 0;
        for x in &xs {
            let d = classical_norm_monotonicity(&c, Side::Right, x, &grid)
                .map_err(|e| e.to_string())?;
            if d.iter().any(|p| p.1 > 1e-9) {
                increases += 1;
            }
        }
        ok &= l.worst_value >= -1e-9;
        ok &= if k == 1 {
            r.worst_value >= -1e-9 && increases == 0
        } else {
            r.worst_value <= -1e-3 && increases > 0
        };
        summary.push(format!(
            "ab{k}: min ell = {:.4}, min r = {:.4}, sup-norm increases for {increases}/100 x",
            l.worst_value, r.worst_value
        ));
    }
    check(ok, summary.join("; "))
}

fn criterion_5() -> Outcome {
    let grid = Grid::default();
    let mut rng = random::seeded(5);
    let (mut min_r, mut min_l) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..100 {
        let c = divimark::models::random_heisenberg_divisible(&mut rng);
        for (_, r) in classical_rate_table(&c, &grid).map_err(|e| e.to_string())? {
            min_r = min_r.min(r.r1).min(r.r2);
            min_l = min_l.min(r.l1).min(r.l2);
        }
    }
    check(
        min_r >= -1e-9 && min_l >= -1e-9,
        format!("100 models: min r = {min_r:.3e}, min ell = {min_l:.3e}"),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = random::seeded(6);
    let mut worst = 0.0f64;
    let mut exact = true;
    for name in BUILTIN_MODELS {
        let model = builtin(name).map_err(|e| e.to_string())?;
        for _ in 0..1000 {
            let t = rng.random_range(0.0..10.0);
            let map = model.map_at(t).map_err(|e| e.to_string())?;
            let rho = random::state(&mut rng);
            let e = random::effect(&mut rng);
            let evolved_state = bloch_operator(&apply_map(&map, &rho.r4()));
            let evolved_effect = bloch_operator(&map.apply_dual(&e));
            let lhs = trace_pairing(&e.matrix(), &evolved_state);
            let rhs = trace_pairing(&evolved_effect, &rho.matrix());
            worst = worst.max((lhs - rhs).abs());
            let m = map.matrix();
            exact &= dual_map(&m) == m.transpose() && map.apply_dual(&e) == m.transpose() * e.a4();
        }
    }
    check(
        worst < 1e-12 && exact,
        format!("5 models x 1000 triples: max |tr(E Phi[rho]) - tr(Phi*[E] rho)| = {worst:.1e}, dual matrix = transpose exactly: {exact}"),
    )
}

/// Midpoint-stencil residuals of `Ṁ = 𝓛M = M𝓡`, of `𝓡 = M⁻¹𝓛M` with the
/// numerical `𝓛`, and of the right rates recovered from the numerical
/// generator against the closed form through the left rates. The last two
/// are relative to the size of `𝓡` and of the rates, which grow like `eᵗ`.
fn generator_residuals(model: &PhaseCovariant, grid: &Grid) -> [f64; 3] {
    let times = grid.times();
    let h = grid.dt();
    let basis: Vec<Matrix4<f64>> = [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)]
        .iter()
        .map(|&(plus, minus, z)| GklsRates { plus, minus, z }.generator_matrix())
        .collect();
    let gram = nalgebra::Matrix3::from_fn(|r, c| basis[r].dot(&basis[c]));
    let mut res = [0.0f64; 3];
    for i in 0..times.len() - 1 {
        let tm = 0.5 * (times[i] + times[i + 1]);
        let m0 = model.map_at(times[i]).unwrap().matrix();
        let m1 = model.map_at(times[i + 1]).unwrap().matrix();
        let mm = model.map_at(tm).unwrap().matrix();
        let dm = model.derivative_at(tm).unwrap();
        let inv = mm.try_inverse().unwrap();
        let (left, right) = (dm * inv, inv * dm);
        let fd = (m1 - m0) / h;
        res[0] = res[0]
            .max((fd - left * mm).amax())
            .max((fd - mm * right).amax());
        res[1] = res[1].max((right - inv * (fd * inv) * mm).amax() / right.amax());

        let right_fd = inv * fd;
        let rhs = nalgebra::Vector3::from_fn(|r, _| basis[r].dot(&right_fd));
        let xi_fd = gram.lu().solve(&rhs).unwrap();
        let g = phase_covariant_rates(&model.params, tm, Side::Left).unwrap();
        let lt = model.params.lambda_t.value(tm);
        let lz = model.params.lambda_z.value(tm);
        let xi_plus = (g.plus * (lz - lt + 1.0) + g.minus * (lz - lt - 1.0)) / (2.0 * lz);
        let xi_minus = (g.plus * (lz + lt - 1.0) + g.minus * (lz + lt + 1.0)) / (2.0 * lz);
        let scale = xi_plus.abs().max(xi_minus.abs()).max(1.0);
        let dev = (xi_fd[0] - xi_plus)
            .abs()
            .max((xi_fd[1] - xi_minus).abs())
            .max((xi_fd[2] - g.z).abs());
        res[2] = res[2].max(dev / scale);
    }
    res
}

/// The same identities with analytic derivatives only: round-off level.
fn analytic_identity_residual(model: &PhaseCovariant, grid: &Grid) -> f64 {
    grid.times()
        .into_iter()
        .map(|t| {
            let m = model.map_at(t).unwrap().matrix();
            let dm = model.derivative_at(t).unwrap();
            let inv = m.try_inverse().unwrap();
            let conv = (inv * dm - inv * (dm * inv) * m).amax();
            conv.max(rate_conversion_check(&model.params, t).unwrap())
        })
        .fold(0.0, f64::max)
}

fn criterion_7() -> Outcome {
    let model = PhaseCovariant::counterexample();
    let grid = Grid::default();
    let coarse = generator_residuals(&model, &grid);
    let fine = generator_residuals(&model, &grid.refined());
    let ratios: Vec<f64> = (0..3).map(|k| coarse[k] / fine[k]).collect();
    let exact = analytic_identity_residual(&model, &grid);
    check(
        coarse.iter().all(|&r| r < 1e-6) && ratios.iter().all(|r| (3.5..=4.5).contains(r)),
        format!(
            "phcov, dt = {}: stencil residuals {:.3e} / {:.3e} / {:.3e} (bound 1e-6), halving ratios {:.2} / {:.2} / {:.2}; \
             analytic identities {exact:.1e}",
            grid.dt(),
            coarse[0],
            coarse[1],
            coarse[2],
            ratios[0],
            ratios[1],
            ratios[2]
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = random::seeded(8);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (e, f) = (random::effect(&mut rng), random::effect(&mut rng));
        let brute = p_guess_effect_bruteforce(&e, &f, 200);
        worst = worst.max((brute - (1.0 + dinf(&e, &f)) / 2.0).abs());
    }
    check(
        worst <= 1e-6,
        format!("100 effect pairs: max |brute force - (1 + D_inf)/2| = {worst:.1e}"),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = random::seeded(9);
    let (mut td, mut od) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut violations = 0;
    for _ in 0..200 {
        let m = random_dilation(&mut rng);
        let s = rng.random_range(0.0..3.0);
        let t = s + rng.random_range(0.0..3.0);
        let b = dilation_bound_check(&m, s, t).map_err(|e| e.to_string())?;
        td = td.max(b.schrodinger.lhs - b.schrodinger.rhs);
        od = od.max(b.heisenberg.lhs - b.heisenberg.rhs);
        violations += usize::from(b.schrodinger.lhs > b.schrodinger.rhs + 1e-9);
        violations += usize::from(b.heisenberg.lhs > b.heisenberg.rhs + 1e-9);
    }
    check(
        violations == 0,
        format!(
            "200 dilations: max(lhs - rhs) trace distance {td:.3e}, operator distance {od:.3e}"
        ),
    )
}

fn criterion_10() -> Outcome {
    let x = BinaryPovm::projective(Vector3::x()).map_err(|e| e.to_string())?;
    let y = BinaryPovm::projective(Vector3::y()).map_err(|e| e.to_string())?;
    let ixy = incompat_p(&x, &y, (0.5, 0.5)).map_err(|e| e.to_string())?;
    // Unbiased pairs m, n become compatible once ‖m+n‖+‖m−n‖ ≤ 2 after scaling by 1−λ.
    let (a, b): (Vector3<f64>, Vector3<f64>) = (Vector3::x(), Vector3::y());
    let oracle = 1.0 - 2.0 / ((a + b).norm() + (a - b).norm());
    let mut rng = random::seeded(10);
    let (mut worst, mut incompatible) = (f64::NEG_INFINITY, 0);
    for _ in 0..50 {
        let map = random::channel(&mut rng);
        let m = BinaryPovm::projective(random::unit_vector(&mut rng)).map_err(|e| e.to_string())?;
        let n = BinaryPovm::projective(random::unit_vector(&mut rng)).map_err(|e| e.to_string())?;
        let before = incompat_p(&m, &n, (0.5, 0.5)).map_err(|e| e.to_string())?;
        let after = incompat_p(
            &m.evolve(&map.matrix()).map_err(|e| e.to_string())?,
            &n.evolve(&map.matrix()).map_err(|e| e.to_string())?,
            (0.5, 0.5),
        )
        .map_err(|e| e.to_string())?;
        worst = worst.max(after - before);
        incompatible += usize::from(before > 0.0);
    }
    let sp = sharpness(&QubitEffect::projector(Vector3::z()).map_err(|e| e.to_string())?);
    let sh = sharpness(&QubitEffect::new(1.0, Vector3::zeros()).map_err(|e| e.to_string())?);
    check(
        (ixy - oracle).abs() <= 1e-3 && (ixy - (1.0 - 1.0 / 2f64.sqrt())).abs() <= 1e-3 && worst <= 2e-3 && sp == 1.0 && sh == 0.0,
        format!(
            "I_p(x, y) = {ixy:.5} (oracle {oracle:.5}); max I(after) - I(before) over 50 maps = {worst:.1e} ({incompatible} inputs incompatible); \
             sharpness(projector) = {sp}, sharpness(1/2) = {sh}"
        ),
    )
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn criterion_11() -> Outcome {
    let runs: Vec<_> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let out = dir.path().to_str().unwrap().to_string();
            let args = [
                "divimark",
                "reproduce",
                "all",
                "--seed",
                "11",
                "--out",
                &out,
            ];
            let code = cli::run_with(args, &mut std::io::sink(), &mut std::io::sink());
            (code, read_dir_bytes(dir.path()))
        })
        .collect();
    let same = runs[0].1 == runs[1].1;
    check(
        runs.iter().all(|r| r.0 == 0) && same && !runs[0].1.is_empty(),
        format!(
            "exit codes {} / {}, {} files, byte-identical: {same}",
            runs[0].0,
            runs[1].0,
            runs[0].1.len()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("phase-covariant counterexample", criterion_1),
        ("D_inf revival and D1 contraction", criterion_2),
        ("dephasing+rotation measures and resources", criterion_3),
        ("classical scenarios", criterion_4),
        ("Heisenberg implies Schrodinger, classical", criterion_5),
        ("duality", criterion_6),
        ("generator residuals", criterion_7),
        ("effect-guessing oracle", criterion_8),
        ("dilation revival bounds", criterion_9),
        ("POVM monotones", criterion_10),
        ("determinism", criterion_11),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", k + 1)
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
