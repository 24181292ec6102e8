//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs without the libtest harness so the lines always print.

use std::fs;
use std::path::Path;
use std::time::Instant;

use bohrlab::almost_periodicity::{
    cauchy_product_check, certify_bohr, epsilon_period_set, equicontinuity_modulus, CertificateStatus,
    CertifyOptions,
};
use bohrlab::ergodic::{
    folner_ratio, haar_solve_finite, jr_sequence, random_start, shulman_constant, uniform_convergence_probe,
    unique_ergodicity_probe, FolnerSequence, HaarOptions, Normalization, TestFamily, TestFunction,
};
use bohrlab::experiment::{run, ExperimentConfig};
use bohrlab::orbit_algebra::{algebra_check, build_orbit_net, diamond_table};
use bohrlab::semigroup::{translate_preimage_mass, Element, FiniteTable, QuasiHaar, Semigroup, WindowSpec, ZBar};
use bohrlab::space::{binary_point, epsilon_net, orbit, ActionSystem, Point, Space};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e<T: std::fmt::Debug>(x: T) -> String {
    format!("{x:?}")
}

const GOLDEN: f64 = 0.6180339887498949;

fn golden() -> ActionSystem {
    ActionSystem::from_tags("zplus:d=1", "torus:k=1,alpha=golden").unwrap().0
}

fn boxes(exps: std::ops::RangeInclusive<u32>) -> Vec<WindowSpec> {
    exps.map(|k| WindowSpec::Box { width: 1 << k }).collect()
}

fn criterion_1() -> Check {
    let sys = golden();
    let x = Point::circle(0.0);
    let schedule = boxes(10..=14);
    let mut gauges = Vec::new();
    for eps in [0.2, 0.1, 0.05] {
        let cert = certify_bohr(&sys, &x, eps, &schedule, &CertifyOptions::default()).map_err(e)?;
        ensure(
            cert.status == CertificateStatus::CertifiedAtResolution,
            format!("eps {eps}: {:?} ({})", cert.status, cert.reason),
        )?;
        ensure(
            cert.gauge_history.windows(2).all(|w| w[0] == w[1]),
            format!("eps {eps}: gauge moved {:?}", cert.gauge_history),
        )?;
        gauges.push(serde_json::to_string(&cert.gauge_history[0]).map_err(e)?);
    }
    // Brute force: for a rotation the defect of tau is ||tau alpha||.
    let pinned: Vec<u64> = vec![0, 1, 2, 3, 5, 6, 7, 8, 10, 11, 13];
    let brute: Vec<u64> = (0..14u64)
        .filter(|&t| {
            let f = (t as f64 * GOLDEN).fract();
            f.min(1.0 - f) < 0.4
        })
        .collect();
    ensure(brute == pinned, format!("brute force table {brute:?}"))?;
    let pset = epsilon_period_set(&sys, &x, 0.4, &WindowSpec::Box { width: 1024 }, &WindowSpec::Box { width: 14 })
        .map_err(e)?;
    let got: Vec<u64> = pset.members.iter().map(|g| g.sup_norm().unwrap()).collect();
    ensure(got == pinned, format!("eps 0.4 members {got:?}"))?;
    Ok(format!("gauges {} over 2^10..2^14; eps 0.4 members {got:?}", gauges.join("/")))
}

fn criterion_2() -> Check {
    let finite = ActionSystem::finite_map(vec![1, 2, 3, 0]).map_err(e)?;
    let torus2 = ActionSystem::from_tags("zplus:d=1", "torus:k=2").map_err(e)?.0;
    let systems: Vec<(&str, ActionSystem, Point, bool)> = vec![
        ("golden", golden(), Point::circle(0.0), false),
        ("torus2", torus2, Point::torus([0.2, 0.4]), false),
        ("zbar", ActionSystem::zbar_self(), Point::ZBar(ZBar::Fin(0)), true),
        ("cycle4", finite, Point::Finite(0), false),
    ];
    let mut certified = 0;
    for (name, sys, x, cutoff) in systems {
        let win = |k: u32| {
            if cutoff {
                WindowSpec::Cutoff { n: 1 << k }
            } else {
                WindowSpec::Box { width: 1 << k }
            }
        };
        // The 2-torus at eps 0.1 returns with gaps near 94, beyond the default gauge bound.
        let opts = CertifyOptions {
            max_gauge: 512,
            ..CertifyOptions::default()
        };
        let cert = certify_bohr(&sys, &x, 0.1, &[win(11), win(12), win(13)], &opts).map_err(e)?;
        if cert.status != CertificateStatus::CertifiedAtResolution {
            continue;
        }
        certified += 1;
        for eps in [0.2, 0.1, 0.05] {
            let mut prev = 0.0;
            for k in 10..=13 {
                let w = win(k);
                let pts = orbit(&sys, &x, &w).map_err(e)?.points();
                let net = epsilon_net(&sys.space, &pts, eps).map_err(e)?;
                let d = equicontinuity_modulus(&sys, &net, eps, &w, 60).map_err(e)?.delta_hat;
                ensure(d >= prev, format!("{name} eps {eps}: delta_hat shrank to {d} at 2^{k}"))?;
                if matches!(sys.space, Space::Torus { .. }) {
                    ensure(d == eps, format!("{name} eps {eps}: delta_hat {d} != eps"))?;
                }
                prev = d;
            }
        }
    }
    ensure(certified == 4, format!("only {certified} of 4 shipped systems certified"))?;
    let sys = ActionSystem::doubling();
    let x = Space::BinaryCircle.sample(&mut ChaCha8Rng::seed_from_u64(11));
    let d = equicontinuity_modulus(&sys, &[x], 0.1, &WindowSpec::Box { width: 20 }, 60)
        .map_err(e)?
        .delta_hat;
    ensure(d < 1e-3, format!("doubling delta_hat {d}"))?;
    Ok(format!("4 certified systems nonshrinking over 2^10..2^13; torus delta_hat = eps; doubling delta_hat {d:e}"))
}

fn criterion_3() -> Check {
    let mut f = vec![0u64, 1];
    while f.len() < 42 {
        f.push(f[f.len() - 1] + f[f.len() - 2]);
    }
    let t: Vec<Element> = f[..40].iter().map(|&n| Element::n(n)).collect();
    let s: Vec<Element> = f[1..41].iter().map(|&n| Element::n(n)).collect();
    let r = cauchy_product_check(&golden(), &Point::circle(0.0), &t, &s, 20, 1e-3).map_err(e)?;
    ensure(r.product_defect <= 1e-3, format!("product defect {}", r.product_defect))?;
    Ok(format!("product defect {:e} at tail 20", r.product_defect))
}

fn criterion_4() -> Check {
    let sys = golden();
    let net = build_orbit_net(&sys, &Point::circle(0.0), 0.1, &WindowSpec::Box { width: 10_000 }).map_err(e)?;
    let table = diamond_table(&sys, net).map_err(e)?;
    let rep = algebra_check(&table).map_err(e)?;
    ensure(rep.lifted.max() <= 1e-12, format!("torus defects {:?}", rep.lifted))?;
    let frac = |k: f64| (k * GOLDEN).fract();
    let prod = table
        .diamond(&Point::circle(frac(2.0)), &Point::circle(frac(3.0)))
        .map_err(e)?;
    let got = prod.coordinates()[0];
    ensure((got - frac(5.0)).abs() <= 1e-12, format!("diamond gave {got}, want {}", frac(5.0)))?;

    let zsys = ActionSystem::zbar_self();
    let eps = 0.05;
    let window = WindowSpec::Cutoff { n: 1000 };
    let znet = build_orbit_net(&zsys, &Point::ZBar(ZBar::Fin(0)), eps, &window).map_err(e)?;
    let ztable = diamond_table(&zsys, znet).map_err(e)?;
    let mut worst: f64 = 0.0;
    for g in zsys.semigroup.enumerate_window(&WindowSpec::Cutoff { n: 200 }).map_err(e)? {
        for x in &ztable.net.points {
            worst = worst.max(ztable.translation_consistency(&g, x).map_err(e)?);
        }
    }
    ensure(worst <= 2.0 * eps, format!("zbar translation consistency {worst}"))?;
    Ok(format!(
        "torus defect {:e}; zbar consistency {worst:.4} <= {}; diamond gap {:e}",
        rep.lifted.max(),
        2.0 * eps,
        (got - frac(5.0)).abs()
    ))
}

fn criterion_5() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let point_mass = |n: usize, at: usize| {
        let mut v = vec![0.0; n];
        v[at] = 1.0;
        v
    };
    let cases = vec![
        (FiniteTable::cyclic(5), vec![0.2; 5]),
        (FiniteTable::truncated_addition(4), point_mass(5, 4)),
        (FiniteTable::truncated_zbar(8), point_mass(10, 9)),
    ];
    let mut worst: f64 = 0.0;
    for (table, expected) in cases {
        let sol = haar_solve_finite(&table, &HaarOptions::default()).map_err(e)?;
        ensure(sol.oracle_gap <= 1e-10, format!("{}: oracle gap {}", table.name(), sol.oracle_gap))?;
        for (a, b) in sol.weights.iter().zip(&expected) {
            ensure((a - b).abs() <= 1e-10, format!("{}: weights {:?}", table.name(), sol.weights))?;
        }
        for _ in 0..5 {
            let opts = HaarOptions {
                start: Some(random_start(table.len(), &mut rng)),
                ..HaarOptions::default()
            };
            let other = haar_solve_finite(&table, &opts).map_err(e)?;
            for (a, b) in other.weights.iter().zip(&sol.weights) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    ensure(worst <= 1e-10, format!("start dependence {worst}"))?;
    Ok(format!("Z_5 uniform, truncadd4 -> delta_4, trunczbar8 -> delta_inf; start spread {worst:e}"))
}

fn criterion_6() -> Check {
    let mu = QuasiHaar::Counting;
    let folner = FolnerSequence::Cube { dim: 1 };
    let fam = TestFamily::characters(1, 8);
    let schedule = [100, 1000, 10_000];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let circle = Space::Torus { k: 1 };
    let pts: Vec<Point> = (0..10).map(|_| circle.sample(&mut rng)).collect();
    let rep = unique_ergodicity_probe(&golden(), &pts, &folner, &fam, &schedule, &mu, Normalization::Sup, 1e-2)
        .map_err(e)?;
    ensure(rep.final_diameter < 1e-2, format!("golden diameter {}", rep.final_diameter))?;

    let mut pts = vec![binary_point(0.0)];
    pts.extend((0..9).map(|_| Space::BinaryCircle.sample(&mut rng)));
    let ctrl = unique_ergodicity_probe(
        &ActionSystem::doubling(),
        &pts,
        &folner,
        &fam,
        &schedule,
        &mu,
        Normalization::Sup,
        1e-2,
    )
    .map_err(e)?;
    let low = ctrl.rows.iter().map(|r| r.diameter).fold(f64::INFINITY, f64::min);
    ensure(low > 0.5, format!("doubling diameter fell to {low}"))?;
    Ok(format!("golden diameter {:e} at n=1e4; doubling stays >= {low:.3}", rep.final_diameter))
}

fn criterion_7() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let circle = Space::Torus { k: 1 };
    let pts: Vec<Point> = (0..100).map(|_| circle.sample(&mut rng)).collect();
    let phi = TestFunction::Cos { k: vec![1] };
    let schedule = [100, 1000, 10_000];
    let mut notes = Vec::new();
    for folner in [FolnerSequence::Cube { dim: 1 }, FolnerSequence::Jr] {
        let rows = uniform_convergence_probe(&golden(), &pts, &folner, &phi, 0.0, &schedule, &QuasiHaar::Counting)
            .map_err(e)?;
        let dev: Vec<f64> = rows.iter().map(|r| r.deviation).collect();
        ensure(dev.windows(2).all(|w| w[1] <= w[0]), format!("{}: not nonincreasing {dev:?}", folner.name()))?;
        ensure(dev[2] <= 1e-3, format!("{}: deviation {}", folner.name(), dev[2]))?;
        notes.push(format!("{} {:e}", folner.name(), dev[2]));
    }
    Ok(format!("max deviation at n=1e4: {}", notes.join(", ")))
}

fn criterion_8() -> Check {
    let sg = Semigroup::ZPlus { dim: 1 };
    let one = Element::n(1);
    for n in 1..=1000u64 {
        let r = folner_ratio(&sg, &QuasiHaar::Counting, &jr_sequence(n).map_err(e)?, &one).map_err(e)?;
        ensure(r == 2.0 / (n as f64 + 1.0), format!("JR ratio at n={n}: {r}"))?;
    }
    let cube_max = shulman_constant(&FolnerSequence::Cube { dim: 1 }, 200).map_err(e)?.max_constant;
    ensure(cube_max <= 2.0 + 1e-12, format!("cube constant {cube_max}"))?;
    let jr = shulman_constant(&FolnerSequence::Jr, 50).map_err(e)?;
    let c50 = jr.constants.last().unwrap().1;
    // Enumeration oracle: the union of differences has n^2 elements and F_n has n + 1.
    ensure(c50 == 2500.0 / 51.0 && c50 > 10.0, format!("JR c_50 = {c50}"))?;
    Ok(format!("JR ratio = 2/(n+1) for n <= 1000; cube max c_n {cube_max}; JR c_50 = {c50:.4}"))
}

fn criterion_9() -> Check {
    let sg = Semigroup::ZPlus { dim: 1 };
    let mu = QuasiHaar::Counting;
    let set: Vec<Element> = (0..3).map(Element::n).collect();
    let m = mu.mass(&set).map_err(e)?;
    let pre = translate_preimage_mass(&sg, &mu, &Element::n(1), &set).map_err(e)?;
    ensure(m == 3.0 && pre == 2.0, format!("mass {m}, preimage mass {pre}"))?;
    Ok("lambda({0,1,2}) = 3, lambda((1+)^-1 {0,1,2}) = 2".into())
}

fn compare_dirs(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<String> = fs::read_dir(a)
        .map_err(e)?
        .map(|d| d.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "timings.json")
        .collect();
    names.sort();
    for n in &names {
        let x = fs::read(a.join(n)).map_err(e)?;
        let y = fs::read(b.join(n)).map_err(e)?;
        ensure(x == y, format!("{} differs", a.join(n).display()))?;
    }
    Ok(names.len())
}

fn criterion_10() -> Check {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut paths: Vec<_> = fs::read_dir(&configs)
        .map_err(e)?
        .map(|d| d.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    let tmp = tempfile::tempdir().map_err(e)?;
    let mut kinds = std::collections::BTreeSet::new();
    let mut files = 0;
    for p in &paths {
        let cfg = ExperimentConfig::load(p).map_err(e)?;
        kinds.insert(cfg.experiment.name());
        let stem = p.file_stem().unwrap().to_string_lossy().to_string();
        let (a, b) = (tmp.path().join(format!("{stem}-a")), tmp.path().join(format!("{stem}-b")));
        run(&cfg, &a).map_err(|err| format!("{stem}: {err}"))?;
        run(&cfg, &b).map_err(|err| format!("{stem}: {err}"))?;
        files += compare_dirs(&a, &b)?;
    }
    ensure(kinds.len() == 7, format!("only {kinds:?} covered"))?;
    Ok(format!("{} configs, all 7 experiments, {files} files byte-identical", paths.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("certification of the golden rotation", criterion_1),
        ("equicontinuity modulus", criterion_2),
        ("Cauchy products", criterion_3),
        ("orbit-closure algebra", criterion_4),
        ("Haar measure of finite tables", criterion_5),
        ("unique ergodicity", criterion_6),
        ("uniform Følner averages", criterion_7),
        ("Følner diagnostics", criterion_8),
        ("quasi-Haar counting measure", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let r = f();
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({secs:.1} s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} ({secs:.1} s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
