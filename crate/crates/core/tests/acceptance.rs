//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any criterion fails.

mod common;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use toprel::gradcheck::{
    check_grouping, check_score_loss, random_grouping_instance, random_scores, CheckOutcome, ScoreLoss, ScoreLossConfig,
};
use toprel::grouping::{PASCAL_VOC_GROUPS, ZERO_SPREAD};
use toprel::losses::tcl_terms;
use toprel::numerics::DEFAULT_FEATURE_DIM;
use toprel::simlab::{run_descent, SimConfig};
use toprel::{
    group_loss, pairwise_term, re_meta_loss, tcl2_loss, ClassScores, GroupStats, GroupingParams, GroupingTable,
    LossWeights, MetaFeatureSet, Strategy, TclParams,
};

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn toprel(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_toprel"))
        .args(args)
        .output()
        .expect("spawn toprel")
}

fn gradient_fidelity() -> Verdict {
    const INSTANCES: usize = 50;
    const LIMIT: Duration = Duration::from_secs(60);
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let base = ScoreLossConfig {
        tcl: TclParams::new(0.9, vec![0.5, 0.4, 0.3], 1.0, 1.0, 4).unwrap(),
        ..ScoreLossConfig::default()
    };
    let tcl2 = ScoreLossConfig {
        tcl: TclParams::default(),
        ..ScoreLossConfig::default()
    };
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut skipped = 0;
    let mut failures = Vec::new();
    let mut record = |label: String, o: CheckOutcome| match o {
        CheckOutcome::Checked { max_rel_error } => {
            checked += 1;
            worst = worst.max(max_rel_error);
            if max_rel_error >= 1e-5 {
                failures.push(format!("{label}: {max_rel_error:e}"));
            }
        }
        CheckOutcome::Skipped { .. } => skipped += 1,
    };
    for i in 0..INSTANCES {
        let s = random_scores(&mut rng, 20).unwrap();
        for kind in ScoreLoss::ALL {
            let cfg = if kind == ScoreLoss::Tcl2 { &tcl2 } else { &base };
            record(format!("{kind}#{i}"), check_score_loss(kind, &s, cfg, false).unwrap());
        }
        let (x, t) = random_grouping_instance(&mut rng, 20, 64, 6).unwrap();
        for strategy in Strategy::ALL {
            let o = check_grouping(&x, &t, GroupingParams::with_strategy(strategy), false).unwrap();
            record(format!("{strategy}#{i}"), o);
        }
    }
    let elapsed = start.elapsed();
    Verdict::new(
        failures.is_empty() && elapsed < LIMIT && checked > 0,
        format!(
            "max rel err {worst:.2e} over {checked} checks ({skipped} singular skipped), {:.1}s{}",
            elapsed.as_secs_f64(),
            if failures.is_empty() {
                String::new()
            } else {
                format!(", failing: {failures:?}")
            }
        ),
    )
}

fn oracle_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=8);
        let dim = rng.random_range(1..=16);
        let k = rng.random_range(1..=n.min(4));
        let scale = rng.random_range(0.1..2.0);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-scale..scale)).collect())
            .collect();
        let groups = common::random_partition(&mut rng, n, k);
        let names = common::names(n);
        let x = MetaFeatureSet::new(names.clone(), rows.clone()).unwrap();
        let t = GroupingTable::new(
            groups
                .iter()
                .map(|g| g.iter().map(|&i| names[i].clone()).collect())
                .collect(),
        )
        .unwrap();
        let tau = 1.0 + rng.random_range(0.0..0.5);
        let p = GroupingParams::new(tau, 0.00005, Strategy::Best).unwrap();
        let ours = re_meta_loss(&x, &t, &p).unwrap().value;
        let oracle = common::straight_line_loss(&rows, &groups, tau, 0.00005);
        worst = worst.max((ours - oracle).abs());
    }
    Verdict::new(worst <= 1e-12, format!("max |diff| {worst:.2e} over 100 instances"))
}

fn closed_form_spot_values() -> Verdict {
    let s = ClassScores::new(vec![1.0, 0.5, 0.2], 0).unwrap();
    let tcl = tcl2_loss(&s, &TclParams::default()).unwrap().value;
    let d1 = (tcl - 2.0 * 2f64.ln()).abs();

    let g = GroupStats {
        size: 3,
        u_group: 0.4,
        delta_group: 1.2,
        w_mean: 0.4,
        w_std: 0.7,
        w_mean_std: 0.1,
    };
    let d2 = (pairwise_term(&g, &g) - 2.0).abs();

    let names: Vec<String> = PASCAL_VOC_GROUPS
        .iter()
        .flat_map(|g| g.iter().map(|s| s.to_string()))
        .collect();
    let zeros = MetaFeatureSet::new(names, vec![vec![0.0; 16]; 20]).unwrap();
    let d3 = re_meta_loss(&zeros, &GroupingTable::pascal_voc(), &GroupingParams::default())
        .unwrap()
        .value
        .abs();
    Verdict::new(
        d1 <= 1e-12 && d2 <= 1e-12 && d3 <= 1e-12,
        format!("|tcl2 - 2ln2| {d1:.1e}, |L(g,g) - 2| {d2:.1e}, |L_re-meta(0)| {d3:.1e}"),
    )
}

fn published_defaults() -> Verdict {
    let gp = GroupingParams::default();
    let w = LossWeights::default();
    let tp = TclParams::with_c(5).unwrap();
    let expected: Vec<Vec<String>> = [
        vec!["aero", "bird"],
        vec!["cow", "horse", "cat", "sheep", "dog"],
        vec!["sofa", "chair"],
        vec!["tv", "plant", "table"],
        vec!["boat", "bicycle", "train", "car", "bus", "mbike"],
        vec!["bottle", "person"],
    ]
    .iter()
    .map(|g| g.iter().map(|s| s.to_string()).collect())
    .collect();
    let table = GroupingTable::default();
    let shipped = GroupingTable::parse(&std::fs::read_to_string(data("voc_groups.txt")).unwrap()).unwrap();
    let checks = [
        ("tau", gp.tau() == 1.0),
        ("epsilon", gp.epsilon() == 0.00005),
        ("strategy", gp.strategy() == Strategy::Best),
        ("weights", (w.alpha, w.omega, w.lambda) == (1.0, 6.0, 1.0)),
        (
            "beta-minus",
            tp.beta_minus().iter().all(|b| *b == 0.5) && TclParams::default().beta_minus() == [0.5],
        ),
        ("K", table.num_groups() == 6),
        ("partition", table.groups() == expected.as_slice() && shipped == table),
        ("|F|", DEFAULT_FEATURE_DIM == 1024),
    ];
    let bad: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    Verdict::new(
        bad.is_empty(),
        if bad.is_empty() {
            "tau=1, eps=5e-5, (1,6,1), beta-=0.5, K=6 Pascal VOC table, |F|=1024".to_string()
        } else {
            format!("mismatched: {bad:?}")
        },
    )
}

fn descent_dynamics() -> Verdict {
    const LIMIT: Duration = Duration::from_secs(120);
    let start = Instant::now();
    let cfg = SimConfig {
        n_categories: 20,
        feature_dim: 64,
        grouping: GroupingTable::pascal_voc(),
        grouping_params: GroupingParams::default(),
        step_size: 1e-2,
        iterations: 500,
        seed: 7,
        init_sigma: 1.0,
    };
    let trace = run_descent(&cfg).unwrap();
    let first = &trace[0];
    let last = trace.last().unwrap();
    let a = last.loss < first.loss;
    let ratio = last.mean_w_mean_std() / first.mean_w_mean_std();
    let b = ratio < 0.5;

    let small = SimConfig {
        step_size: 1e-3,
        iterations: 200,
        ..cfg
    };
    let trace = run_descent(&small).unwrap();
    let worst_rise = trace
        .windows(2)
        .map(|w| w[1].loss - w[0].loss)
        .fold(f64::NEG_INFINITY, f64::max);
    let c = worst_rise <= 0.0;
    let elapsed = start.elapsed();
    Verdict::new(
        a && b && c && elapsed < LIMIT,
        format!(
            "(a) loss {:.6} -> {:.6} {}; (b) mean W_mean-std ratio {ratio:.4} (need < 0.5) {}; \
             (c) max consecutive change at step 1e-3 {worst_rise:.2e} {}; {:.1}s",
            first.loss,
            last.loss,
            if a { "ok" } else { "FAIL" },
            if b { "ok" } else { "FAIL" },
            if c { "ok" } else { "FAIL" },
            elapsed.as_secs_f64()
        ),
    )
}

fn monotonicity_suite() -> Verdict {
    let sweep = |lo: f64, hi: f64| (0..100).map(move |i| lo + (hi - lo) * i as f64 / 99.0);
    let p = TclParams::new(0.9, vec![0.5, 0.4], 1.3, 2.5, 3).unwrap();
    let mut failures = Vec::new();

    // positive term over P_t
    let pos: Vec<f64> = sweep(0.0, 1.0)
        .map(|pt| {
            tcl_terms(&ClassScores::new(vec![pt, 0.6, 0.3, 0.1], 0).unwrap(), &p)
                .unwrap()
                .positive
        })
        .collect();
    if !pos.windows(2).all(|w| w[1] < w[0]) {
        failures.push("positive term");
    }
    // rank-1 negative term, swept inside the band that keeps the ranking
    let neg1: Vec<f64> = sweep(0.45, 0.95)
        .map(|f| {
            tcl_terms(&ClassScores::new(vec![0.7, f, 0.3, 0.1], 0).unwrap(), &p)
                .unwrap()
                .negative[0]
        })
        .collect();
    if !neg1.windows(2).all(|w| w[1] > w[0]) {
        failures.push("rank-1 negative term");
    }
    let neg2: Vec<f64> = sweep(0.15, 0.55)
        .map(|f| {
            tcl_terms(&ClassScores::new(vec![0.7, 0.6, f, 0.1], 0).unwrap(), &p)
                .unwrap()
                .negative[1]
        })
        .collect();
    if !neg2.windows(2).all(|w| w[1] > w[0]) {
        failures.push("rank-2 negative term");
    }

    // group term over W_mean-std with the pairwise sum pinned by the other groups
    let gp = GroupingParams::default();
    let other = GroupStats {
        size: 2,
        u_group: 0.3,
        delta_group: 0.9,
        w_mean: 0.3,
        w_std: 0.2,
        w_mean_std: 0.05,
    };
    let terms: Vec<f64> = sweep(1e-3, 5.0)
        .map(|w| {
            let g = GroupStats {
                w_mean_std: w,
                ..GroupStats {
                    size: 3,
                    u_group: -0.1,
                    delta_group: 1.1,
                    w_mean: -0.1,
                    w_std: 0.4,
                    w_mean_std: 0.0,
                }
            };
            group_loss(0, &[g, other], &gp).unwrap()
        })
        .collect();
    if !terms.windows(2).all(|w| w[1] > w[0]) || terms[0] <= ZERO_SPREAD {
        failures.push("group term");
    }
    Verdict::new(
        failures.is_empty(),
        if failures.is_empty() {
            "4 sweeps x 100 points strictly monotone".to_string()
        } else {
            format!("not monotone: {failures:?}")
        },
    )
}

fn dispersion_sanity() -> Verdict {
    let out = toprel(&[
        "dispersion",
        data("ap_ours_1shot_novel1.csv").to_str().unwrap(),
        "--metric",
        "all",
    ]);
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    let field = |name: &str| -> Option<f64> {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{name}=")))
            .and_then(|v| v.parse().ok())
    };
    let mean = field("mean");
    let metrics: Vec<Option<f64>> = ["std", "cv", "range"].iter().map(|m| field(m)).collect();
    let ok = out.status.success()
        && mean.is_some_and(|m| (m - 54.10).abs() <= 0.05 && (m - 54.1).abs() <= 0.05)
        && metrics.iter().all(Option::is_some);
    Verdict::new(
        ok,
        format!(
            "mean {:?} (reference 54.1); std {:?}, cv {:?}, range {:?} (logged only)",
            mean, metrics[0], metrics[1], metrics[2]
        ),
    )
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let scores = data("scores_tcl2.txt");
    let groups = data("voc_groups.txt");
    let ap = data("ap_ours_1shot_novel1.csv");
    let cfg = data("sim_acceptance.toml");
    let run_all = |tag: &str| -> Vec<Vec<u8>> {
        let out_dir = dir.path().join(tag);
        let o = out_dir.to_str().unwrap();
        let mut outputs = Vec::new();
        let sim = toprel(&["simulate", cfg.to_str().unwrap(), "--out", o, "--steps", "50"]);
        outputs.push(sim.stdout);
        for f in [
            "trace.csv",
            "features_initial.csv",
            "features_final.csv",
            "hist_initial.csv",
            "hist_final.csv",
        ] {
            outputs.push(std::fs::read(out_dir.join(f)).unwrap_or_default());
        }
        let feats = out_dir.join("features_final.csv");
        let f = feats.to_str().unwrap();
        for args in [
            vec!["loss", "tcl2", scores.to_str().unwrap(), "--grad"],
            vec![
                "grouping",
                f,
                "--grouping",
                groups.to_str().unwrap(),
                "--all-strategies",
            ],
            vec!["gradcheck", "--seed", "3", "--instances", "1"],
            vec!["dispersion", ap.to_str().unwrap(), "--metric", "all"],
            vec!["hist", f, "--bins", "8", "--range", "-3,3"],
        ] {
            let o = toprel(&args);
            outputs.push(o.stdout);
            outputs.push(o.stderr);
        }
        outputs
    };
    let a = run_all("a");
    let b = run_all("b");
    let non_empty = a.iter().filter(|o| !o.is_empty()).count();
    Verdict::new(
        a == b && non_empty >= 11,
        format!(
            "{} captured outputs across simulate/loss/grouping/gradcheck/dispersion/hist, byte-identical: {}",
            a.len(),
            a == b
        ),
    )
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 8] = [
        ("gradient fidelity", gradient_fidelity),
        ("straight-line oracle equivalence", oracle_equivalence),
        ("closed-form spot values", closed_form_spot_values),
        ("published default constants", published_defaults),
        ("descent dynamics", descent_dynamics),
        ("monotonicity suite", monotonicity_suite),
        ("dispersion sanity", dispersion_sanity),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!(
            "[{}] {}. {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
