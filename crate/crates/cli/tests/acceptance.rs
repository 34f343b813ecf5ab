//! Acceptance suite: one PASS/FAIL line per criterion.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use sinrlab::estimators::{
    estimate_lambda_c_gilbert, shifted_mass, theorem1_experiment, theorem2_experiment, theorem3_experiment, ModelSpec,
};
use sinrlab::geometry::Cube;
use sinrlab::graph::degree_stats;
use sinrlab::pointproc::{
    build_directing_measure, empirical_intensity, mark_powers, sample_cox, sample_ppp, thin_by_power, Kernel,
    KernelProfile,
};
use sinrlab::renorm::{gamma_prime, interference_split, nice_site_scan, scan_margin, RenormParams, ScanVariant};
use sinrlab::rng::{derive_seed, stream};
use sinrlab::sinr::{
    build_gilbert_graph, build_minus_graph, build_sinr_graph, interference_at, sinr_radii, Radii, RadiusRule,
    SinrParams,
};
use sinrlab::{DirectingMeasureSpec, MarkedConfiguration, MeasureKind, PathLoss, PowerDistribution, Window};

const REPLICAS: usize = 200;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn criterion(id: u32, name: &str, budget_s: f64, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        verdict(false, format!("panicked: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    let in_time = secs < budget_s;
    let pass = v.pass && in_time;
    let budget = if in_time { String::new() } else { format!(" over budget {budget_s:.0}s;") };
    println!(
        "{} {id:>2}. {name}: {}{budget} [{secs:.1}s]",
        if pass { "PASS" } else { "FAIL" },
        v.detail
    );
    pass
}

fn ppp(seed: u64, lambda: f64, side: f64, margin: f64) -> MarkedConfiguration {
    sample_ppp(lambda, &Window::centered(2, side, margin).unwrap(), seed).unwrap()
}

fn marked(seed: u64, lambda: f64, side: f64, margin: f64, law: &PowerDistribution) -> MarkedConfiguration {
    mark_powers(&ppp(seed, lambda, side, margin), law, derive_seed(seed, "powers", 0)).unwrap()
}

fn exp1() -> PowerDistribution {
    PowerDistribution::Exponential { mean: 1.0 }
}

fn subset(a: &[(usize, usize)], b: &[(usize, usize)]) -> bool {
    a.iter().all(|e| b.binary_search(e).is_ok())
}

fn c1_gamma_zero_oracle() -> Verdict {
    let model = PathLoss::power_law(1.0, 4.0, 2).unwrap();
    let params = SinrParams::new(0.5, 0.1, 0.0).unwrap();
    let threshold = params.tau * params.noise;
    let mut edges = 0;
    for seed in 0..100u64 {
        let cfg = ppp(derive_seed(1, "c1", seed), 2.0, 10.0, 0.0);
        let mut rng = stream(seed, "mixed", 0);
        let powers: Vec<f64> = (0..cfg.len())
            .map(|_| if rng.random::<bool>() { 1.0 } else { exp1().sample(&mut rng) })
            .collect();
        let cfg = cfg.with_powers(powers.clone()).unwrap();
        let sinr = build_sinr_graph(&cfg, &params, &model).unwrap().source_edges();
        let radii = sinr_radii(&cfg, &params, &model).unwrap();
        let gilbert = build_gilbert_graph(&cfg, &Radii::PerPoint(radii, RadiusRule::Min))
            .unwrap()
            .source_edges();
        // closed-form radii of min(1, r^-4)
        let r: Vec<f64> = powers
            .iter()
            .map(|&p| if p > threshold { (p / threshold).powf(0.25) } else { 0.0 })
            .collect();
        let mut direct = Vec::new();
        for i in 0..cfg.len() {
            for j in i + 1..cfg.len() {
                let (a, b) = (cfg.point(i), cfg.point(j));
                let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                if d < r[i].min(r[j]) {
                    direct.push((i, j));
                }
            }
        }
        if sinr != gilbert || sinr != direct {
            return verdict(false, format!("seed {seed}: {} sinr vs {} gilbert vs {} direct edges", sinr.len(), gilbert.len(), direct.len()));
        }
        edges += sinr.len();
    }
    verdict(true, format!("100 seeds edge-identical ({edges} edges)"))
}

fn c2_degree_bound() -> Verdict {
    let model = PathLoss::power_law(0.5, 4.0, 2).unwrap();
    let taus = [0.25, 0.5, 1.0, 2.0, 4.0];
    let products = [0.25, 0.5, 1.0];
    let (mut violations, mut max_seen) = (0, [0usize; 3]);
    for seed in 0..500u64 {
        let tau = taus[(seed as usize / 3) % taus.len()];
        let k = seed as usize % 3;
        let gamma = products[k] / tau;
        let cfg = marked(derive_seed(2, "c2", seed), 4.0, 6.0, 0.0, &exp1());
        let g = build_sinr_graph(&cfg, &SinrParams::new(tau, 0.05, gamma).unwrap(), &model).unwrap();
        let max = degree_stats(&g).max_degree;
        max_seen[k] = max_seen[k].max(max);
        let tg = tau * gamma;
        let ok = (max as f64) < 1.0 + 1.0 / tg && (tg < 0.5 || max <= 2) && (tg < 1.0 || max <= 1);
        violations += !ok as usize;
    }
    verdict(
        violations == 0,
        format!("{violations} violations; max degree at tau*gamma = 0.25/0.5/1: {max_seen:?}"),
    )
}

fn c3_gamma_monotone() -> Verdict {
    let model = PathLoss::power_law(0.5, 4.0, 2).unwrap();
    let pairs = [(0.0, 0.01), (0.01, 0.1), (0.1, 0.5)];
    let mut bad = 0;
    for seed in 0..100u64 {
        let cfg = marked(derive_seed(3, "c3", seed), 3.0, 8.0, 0.0, &exp1());
        for &(g, gp) in &pairs {
            let lo = build_sinr_graph(&cfg, &SinrParams::new(0.5, 0.1, g).unwrap(), &model).unwrap();
            let hi = build_sinr_graph(&cfg, &SinrParams::new(0.5, 0.1, gp).unwrap(), &model).unwrap();
            bad += !subset(&hi.source_edges(), &lo.source_edges()) as usize;
        }
    }
    verdict(bad == 0, format!("{bad} of 300 containments violated"))
}

fn c4_minus_subgraph() -> Verdict {
    let model = PathLoss::power_law(0.5, 4.0, 2).unwrap();
    let (mut bad, mut edges) = (0, 0);
    for seed in 0..100u64 {
        let cfg = marked(derive_seed(4, "c4", seed), 3.0, 8.0, 0.0, &exp1());
        let gamma = [0.0, 0.02, 0.1][seed as usize % 3];
        let p = SinrParams::new(0.5, 0.1, gamma).unwrap();
        let full = build_sinr_graph(&cfg, &p, &model).unwrap().source_edges();
        let minus = build_minus_graph(&cfg, &p, &model, 1.0).unwrap().source_edges();
        edges += minus.len();
        bad += !subset(&minus, &full) as usize;
    }
    verdict(bad == 0 && edges > 0, format!("{bad} of 100 seeds violate containment ({edges} minus-graph edges)"))
}

fn c5_interference() -> Verdict {
    let model = PathLoss::power_law(0.5, 4.0, 2).unwrap();
    let (r, n) = (1.0, 2.0);
    let a = 6.0 * r * n;
    let (mut worst, mut dominated) = (0.0f64, 0);
    for seed in 0..100u64 {
        let cfg = marked(derive_seed(5, "c5", seed), 1.0, 12.0, 6.0, &exp1());
        let mut rng = stream(seed, "site", 0);
        let x = [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)];
        let (i_in, i_out) = interference_split(&cfg, &x, a / 2.0, &model, a).unwrap();
        let total = interference_at(&cfg, &x, &[], &model, a).unwrap();
        worst = worst.max((i_in + i_out - total).abs() / total);
        let side = rng.random_range(0.2..4.0);
        let y = [x[0] + side * rng.random_range(-0.5..0.5), x[1] + side * rng.random_range(-0.5..0.5)];
        let iy = interference_at(&cfg, &y, &[], &model, 0.0).unwrap();
        let iz = interference_at(&cfg, &x, &[], &model, side).unwrap();
        dominated += (iy <= iz) as usize;
    }
    verdict(
        worst <= 1e-12 && dominated == 100,
        format!("max relative split error {worst:.1e}; I(x) <= I_a(z) on {dominated}/100"),
    )
}

fn c6_gamma_prime() -> Verdict {
    let mut rng = stream(6, "draws", 0);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let d_o = rng.random_range(0.2..2.0);
        let model = if rng.random::<bool>() {
            PathLoss::power_law(d_o, rng.random_range(2.5..6.0), 2).unwrap()
        } else {
            PathLoss::cone(d_o, d_o * rng.random_range(1.5..4.0), 1.0, 2).unwrap()
        };
        let top = model.support_sup().unwrap_or(4.0 * d_o);
        let r = d_o + rng.random_range(0.05..0.9) * (top - d_o);
        let r_o = r + rng.random_range(0.05..0.95) * (top - r);
        let (tau, noise, m) = (rng.random_range(0.1..4.0), rng.random_range(0.01..2.0), rng.random_range(0.1..100.0));
        let sinr = SinrParams::new(tau, noise, 0.0).unwrap();
        let gp = gamma_prime(r, r_o, m, &sinr, &model).unwrap();
        let p = tau * noise / model.eval(r_o);
        let lhs = p * model.eval(r) / (noise + gp * p * m);
        worst = worst.max((lhs - tau).abs() / tau);
    }
    // edge preservation needs p(r) >= gamma / gamma' = 1/2; tau N_o = 1 >= ell(r_o)
    let model = PathLoss::power_law(1.0, 4.0, 2).unwrap();
    let sinr = SinrParams::new(1.0, 1.0, 0.0).unwrap();
    let (n, r, r_o, lambda, p0) = (2usize, 1.2, 1.5, 3.0, 6.0);
    let m_cap = 1.5 * lambda * p0 * shifted_mass(&model, 6.0 * r * n as f64);
    let params = RenormParams { n, r, r_o, m_cap };
    let gp = gamma_prime(r, r_o, m_cap, &sinr, &model).unwrap();
    let margin = scan_margin(&params, ScanVariant::Thinned);
    let (mut violations, mut checked, mut nice) = (0, 0, 0.0);
    for seed in 0..100u64 {
        let cfg = marked(derive_seed(6, "c6", seed), lambda, 12.0, margin, &PowerDistribution::Dirac { p: p0 });
        let lat = nice_site_scan(&params, &cfg, &sinr, &model, gp / 2.0, Some(0.0), ScanVariant::Thinned).unwrap();
        violations += lat.edge_preservation.violations;
        checked += lat.edge_preservation.checked_pairs;
        nice += lat.nice_fraction / 100.0;
    }
    verdict(
        worst <= 1e-12 && violations == 0 && checked > 0,
        format!(
            "identity max relative error {worst:.1e}; {violations} missing of {checked} nice-block edges (mean nice fraction {nice:.2})"
        ),
    )
}

/// Constant-power model with `r_B = 1`.
fn dirac_model() -> ModelSpec {
    ModelSpec {
        dim: 2,
        measure: DirectingMeasureSpec::lebesgue(),
        powers: PowerDistribution::Dirac { p: 1.0 },
        pathloss: PathLoss::power_law(0.5, 4.0, 2).unwrap(),
        tau: 0.5,
        noise: 0.125,
    }
}

fn c7_theorem2() -> Verdict {
    let model = dirac_model();
    let r_b = model.typical_radius();
    let lc = estimate_lambda_c_gilbert(r_b, 2, &[100.0], REPLICAS, 70).unwrap().estimate;
    let rep = match theorem2_experiment(&model, lc, &[0.5, 1.0, 2.0, 4.0], &[25.0, 50.0, 100.0], REPLICAS, 71) {
        Ok(r) => r,
        Err(e) => return verdict(false, format!("{e}")),
    };
    let ok = rep.checks.len() == 4 && rep.checks.iter().all(|c| c.crossing_not_increasing && c.sublinear);
    let parts: Vec<String> = rep
        .checks
        .iter()
        .map(|c| {
            format!(
                "{}x: cp {:.3}->{:.3}, cluster ratio {:.2}",
                c.multiplier, c.crossing_small.estimate, c.crossing_large.estimate, c.largest_cluster_ratio
            )
        })
        .collect();
    verdict(ok, format!("lambda_c = {lc:.4}, max degree {}; {}", rep.max_degree, parts.join("; ")))
}

fn c8_theorem3() -> Verdict {
    let rep = theorem3_experiment(&dirac_model(), &[32.0, 64.0, 128.0], &[0.8, 0.95, 1.05, 1.2, 1.5], REPLICAS, 80)
        .unwrap();
    let row = |m: f64| rep.rows.iter().find(|r| r.multiplier == m).unwrap();
    let stable = rep.lambda_c.relative_spread <= 0.05;
    let witnesses = [1.2, 1.5].iter().all(|&m| row(m).witness.gamma.is_some());
    let below = row(0.8).witness.crossing_at_zero.estimate < 0.5;
    let bracket = rep.bracket_rel_dev.is_some_and(|d| d <= 0.10);
    let w = |m: f64| {
        let w = &row(m).witness;
        match (w.gamma, w.attempts.last()) {
            (Some(g), Some((_, p))) => format!("gamma {g:.4} cp {:.3}", p.estimate),
            _ => "none".into(),
        }
    };
    verdict(
        stable && witnesses && below && bracket,
        format!(
            "(a) lambda_c {:.4}, spread {:.2}%; (b) 1.2x {}, 1.5x {}; (c) cp0 at 0.8x {:.3}; bracket [{:.4}, {:.4}] dev {:.1}%",
            rep.lambda_c.estimate,
            100.0 * rep.lambda_c.relative_spread,
            w(1.2),
            w(1.5),
            row(0.8).witness.crossing_at_zero.estimate,
            rep.bracket_lo.unwrap_or(f64::NAN),
            rep.bracket_hi.unwrap_or(f64::NAN),
            100.0 * rep.bracket_rel_dev.unwrap_or(f64::NAN),
        ),
    )
}

fn theorem1_case(model: ModelSpec, condition: &str, seed: u64) -> Verdict {
    let side = 64.0;
    let rep = theorem1_experiment(&model, side, None, REPLICAS, seed).unwrap();
    let flagged = rep.conditions.iter().any(|c| c.name == condition && c.holds == Some(true));
    let detail = match rep.witness.as_ref().and_then(|w| w.gamma.map(|g| (w, g))) {
        Some((w, g)) => {
            let cp = w.attempts.last().map(|a| a.1.estimate).unwrap_or(f64::NAN);
            format!("witness lambda {:.4}, gamma {g:.4}, cp {cp:.3} at L = {side}", w.lambda)
        }
        None => "no witness".into(),
    };
    let violations = if rep.assumption_violations.is_empty() {
        String::new()
    } else {
        format!("; assumptions: {}", rep.assumption_violations.join(", "))
    };
    verdict(rep.found() && flagged, format!("{detail}; condition {condition} flagged {flagged}{violations}"))
}

fn c9a_theorem1_unbounded() -> Verdict {
    let model = ModelSpec {
        powers: exp1(),
        ..dirac_model()
    };
    theorem1_case(model, "unbounded-support", 90)
}

fn c9b_theorem1_connected() -> Verdict {
    let kind = MeasureKind::VoronoiEdge { nucleus_intensity: 1.0 };
    let model = ModelSpec {
        dim: 2,
        measure: DirectingMeasureSpec::normalized(kind, 2, 91).unwrap(),
        powers: exp1(),
        pathloss: PathLoss::cone(0.5, 4.0, 1.0, 2).unwrap(),
        tau: 1.0,
        noise: 0.5,
    };
    theorem1_case(model, "connected-support", 92)
}

fn c10_normalization() -> Verdict {
    let kinds = [
        MeasureKind::Lebesgue,
        MeasureKind::Modulated {
            lambda_in: 4.0,
            lambda_out: 0.25,
            nucleus_intensity: 0.3,
            ball_radius: 0.8,
        },
        MeasureKind::ShotNoise {
            nucleus_intensity: 0.4,
            kernel: Kernel {
                radius: 1.5,
                height: 2.0,
                profile: KernelProfile::Flat,
            },
        },
        MeasureKind::VoronoiEdge { nucleus_intensity: 0.5 },
    ];
    let (lambda, side) = (4.0, 12.0);
    let window = Window::centered(2, side, 0.0).unwrap();
    let region = Cube::new(vec![0.0, 0.0], side);
    let stats = |xs: &[f64]| {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let se = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        (m, se)
    };
    let mut ok = true;
    let mut parts = Vec::new();
    let law = exp1();
    let threshold = 0.8;
    let survival = law.survival(threshold);
    for (k, kind) in kinds.iter().enumerate() {
        let spec = DirectingMeasureSpec::normalized(kind.clone(), 2, derive_seed(10, "cal", k as u64)).unwrap();
        let (mut mass, mut thinned) = (Vec::new(), Vec::new());
        for s in 0..100u64 {
            let seed = derive_seed(10, "c10", 1000 * k as u64 + s);
            let m = build_directing_measure(&spec, &window, derive_seed(seed, "m", 0)).unwrap();
            let cfg = sample_cox(&m, lambda, derive_seed(seed, "c", 0)).unwrap();
            let cfg = mark_powers(&cfg, &law, derive_seed(seed, "p", 0)).unwrap();
            mass.push(empirical_intensity(&cfg, &region).unwrap() / lambda);
            let thin = thin_by_power(&cfg, threshold).unwrap();
            thinned.push(empirical_intensity(&thin, &region).unwrap() / (lambda * survival));
        }
        let (m1, se1) = stats(&mass);
        let (m2, se2) = stats(&thinned);
        let pass = (m1 - 1.0).abs() <= 3.0 * se1 && (m2 - 1.0).abs() <= 3.0 * se2;
        ok &= pass;
        let name = format!("{kind:?}");
        let name = name.split([' ', '{']).next().unwrap_or("").to_string();
        parts.push(format!("{name} {:.2}/{:.2} sd", (m1 - 1.0) / se1, (m2 - 1.0) / se2));
    }
    verdict(ok, format!("deviation of E[Lambda(Q_1)] and thinned intensity: {}", parts.join(", ")))
}

const DET_MODEL: &str = r#"
[model]
dim = 2
tau = 0.5
noise = 0.125
measure = { kind = "lebesgue" }
powers = { kind = "dirac", p = 1.0 }
pathloss = { kind = "truncated-power-law", d_o = 0.5, alpha = 4.0 }
"#;

const DET_EXPONENTIAL: &str = r#"
[model]
dim = 2
tau = 0.5
noise = 0.125
measure = { kind = "modulated", lambda_in = 3.0, lambda_out = 0.5, nucleus_intensity = 0.2, ball_radius = 1.0 }
powers = { kind = "exponential", mean = 1.0 }
pathloss = { kind = "truncated-power-law", d_o = 0.5, alpha = 4.0 }
"#;

fn c11_determinism() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_sinrlab");
    let root: PathBuf = std::env::temp_dir().join(format!("sinrlab-acceptance-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&root);
    let cases = [
        ("graph-sample", DET_EXPONENTIAL, "lambda = 1.5\nside = 12.0\ngamma = 0.01"),
        ("degree-sweep", DET_EXPONENTIAL, "lambda = 3.0\nside = 10.0\ntaus = [0.5, 1.0]\ngammas = [0.5, 1.0]"),
        ("crossing-sweep", DET_EXPONENTIAL, "lambdas = [1.0, 3.0]\ngammas = [0.0, 0.02]\nwindows = [10.0, 14.0]"),
        ("lambda-c", DET_MODEL, "r = 1.0\nwindows = [16.0, 24.0]"),
        ("gamma-star", DET_EXPONENTIAL, "lambda = 3.0\nwindows = [12.0]"),
        ("theorem1", DET_EXPONENTIAL, "side = 16.0"),
        ("theorem2", DET_MODEL, "multipliers = [1.0, 2.0]\nwindows = [10.0, 20.0]\nlambda_c_windows = [20.0]"),
        ("theorem3", DET_MODEL, "windows = [16.0, 24.0]\nmultipliers = [0.8, 1.2]"),
        ("renorm-scan", DET_MODEL, "lambda = 3.0\nside = 12.0\nn = 2\nr = 1.0\nr_o = 1.2\nm_cap = 5000.0"),
    ];
    let mut mismatched = Vec::new();
    let mut failed = Vec::new();
    for (kind, model, exp) in cases {
        let dir = root.join(kind);
        std::fs::create_dir_all(&dir).unwrap();
        let cfg = dir.join("config.toml");
        std::fs::write(&cfg, format!("kind = \"{kind}\"\nseed = 5\nreplicas = 16\n{model}\n[experiment]\n{exp}\n")).unwrap();
        let mut files = Vec::new();
        for workers in ["1", "4"] {
            let out = dir.join(format!("w{workers}"));
            let status = Command::new(bin)
                .args(["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", workers])
                .output()
                .unwrap();
            if !status.status.success() {
                failed.push(format!("{kind}: {}", String::from_utf8_lossy(&status.stderr).trim()));
            }
            let read = |ext: &str| std::fs::read(out.join(format!("{kind}.{ext}"))).unwrap_or_default();
            files.push((read("results.jsonl"), read("tsv")));
        }
        if files[0] != files[1] || files[0].0.is_empty() {
            mismatched.push(kind);
        }
    }
    let _ = std::fs::remove_dir_all(&root);
    verdict(
        mismatched.is_empty() && failed.is_empty(),
        format!(
            "9 kinds x (1, 4 workers): {} mismatched {:?}, {} failed runs {:?}",
            mismatched.len(),
            mismatched,
            failed.len(),
            failed
        ),
    )
}

fn main() {
    let all = [
        criterion(1, "gamma = 0 oracle equivalence", 60.0, c1_gamma_zero_oracle),
        criterion(2, "degree bound", 300.0, c2_degree_bound),
        criterion(3, "gamma monotonicity", 60.0, c3_gamma_monotone),
        criterion(4, "minus-graph containment", 60.0, c4_minus_subgraph),
        criterion(5, "interference identities", 60.0, c5_interference),
        criterion(6, "gamma' identity and edge preservation", 120.0, c6_gamma_prime),
        criterion(7, "non-percolation at gamma = 1/(2 tau)", 1800.0, c7_theorem2),
        criterion(8, "lambda_SINR against lambda_c(r_B)", 7200.0, c8_theorem3),
        criterion(9, "witness, unbounded-support path loss", 7200.0, c9a_theorem1_unbounded),
        criterion(9, "witness, Voronoi measure and bounded cone", 7200.0, c9b_theorem1_connected),
        criterion(10, "normalization and thinning intensity", 600.0, c10_normalization),
        criterion(11, "determinism across worker counts", 300.0, c11_determinism),
    ];
    let failed = all.iter().filter(|&&p| !p).count();
    println!("{} passed, {failed} failed", all.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
