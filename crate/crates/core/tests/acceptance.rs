//! Acceptance criteria, run in order with one PASS/FAIL line each.
//! The process exits nonzero if any criterion fails.

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use dfcn::cli::{cmd_synth, cmd_train, SynthArgs, TrainArgs, LOSSES, PREDICTIONS};
use dfcn::cluster_eval::{accuracy, ari, best_mapping, kuhn_munkres, macro_f1, nmi};
use dfcn::graph::{sbm_synthesize, GraphData, SbmConfig};
use dfcn::igae::ReconMode;
use dfcn::model::{Architecture, ModelParams, ModelVars};
use dfcn::numcore::{finite_diff_check, Matrix, Tape, Var, DEFAULT_EPSILON};
use dfcn::saif::{saif_forward, self_correlate};
use dfcn::selfsup::{soft_assign, target_distribution, triplet_kl, Centers};
use dfcn::trainer::{
    ae_pretrain_objective, igae_pretrain_objective, init_centers, joint_objective_on, train, train_igae_only,
    Supervision, Target, TrainConfig, TrainInputs,
};
use dfcn::{kmeans, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

type Outcome = std::result::Result<String, String>;

fn fail<T>(msg: impl Into<String>) -> std::result::Result<T, String> {
    Err(msg.into())
}

fn lib<T>(r: Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| format!("library error: {e}"))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Final ACC of full runs, shared between criteria 7 and 8.
#[derive(Default)]
struct RunCache {
    acc: HashMap<(u64, &'static str), (f64, Duration)>,
}

impl RunCache {
    fn full_run(&mut self, seed: u64, variant: &'static str) -> std::result::Result<(f64, Duration), String> {
        if let Some(hit) = self.acc.get(&(seed, variant)) {
            return Ok(*hit);
        }
        let data = lib(sbm_synthesize(&SbmConfig::standard(seed)))?;
        let mut cfg = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        match variant {
            "triplet" => {}
            "single" => cfg.supervision = Supervision::Single,
            "no-fusion" => cfg.fusion = false,
            other => return fail(format!("unknown variant {other}")),
        }
        let start = Instant::now();
        let out = lib(train(&data, &cfg))?;
        let hit = (out.report.metrics.unwrap().acc, start.elapsed());
        self.acc.insert((seed, variant), hit);
        Ok(hit)
    }
}

// ---------------------------------------------------------------- criterion 1

fn small_instance() -> (GraphData, TrainConfig) {
    let data = sbm_synthesize(&SbmConfig {
        sizes: vec![6, 6],
        p_in: 0.6,
        p_out: 0.1,
        attr_dim: 4,
        attr_sep: 3.0,
        seed: 11,
    })
    .unwrap();
    let cfg = TrainConfig {
        architecture: Architecture {
            ae_hidden: vec![6, 5],
            igae_hidden: vec![5],
            latent_dim: 3,
            ..Architecture::default()
        },
        ..TrainConfig::default()
    };
    (data, cfg)
}

fn gradient_integrity() -> Outcome {
    let start = Instant::now();
    let (data, cfg) = small_instance();
    let mut params = ModelParams::init(&mut ChaCha8Rng::seed_from_u64(3), data.dim(), &cfg.architecture);
    // move off the initial alpha/beta so every fusion branch carries gradient
    params.fusion.alpha = 0.4;
    params.fusion.beta = 0.3;
    let z = lib(saif_forward(&data, &params, cfg.forward_options()))?.z_tilde;
    params.centers = Some(lib(init_centers(&z, data.k, &cfg))?);
    let inputs = lib(TrainInputs::new(&data))?;

    // fixed target from the starting point
    let p = {
        let mut tape = Tape::new();
        let vars = params.bind(&mut tape);
        let iv = inputs.bind(&mut tape);
        let obj = lib(joint_objective_on(&mut tape, &iv, &inputs.adj_norm, &vars, &cfg, Target::Refresh))?;
        obj.target.unwrap()
    };

    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for supervision in [Supervision::Triplet, Supervision::Single] {
        let cfg = TrainConfig {
            supervision,
            ..cfg.clone()
        };
        let f = |tape: &mut Tape, leaves: &[Var]| -> Result<Var> {
            let vars = ModelVars::from_flat(&params, leaves)?;
            let iv = inputs.bind(tape);
            Ok(joint_objective_on(tape, &iv, &inputs.adj_norm, &vars, &cfg, Target::Fixed(&p))?.loss.total)
        };
        let r = lib(finite_diff_check(f, &params.tensors(), DEFAULT_EPSILON))?;
        parts.push(format!("{supervision:?} {:.2e} over {} coords", r.max_rel_error, r.coordinates));
        worst = worst.max(r.max_rel_error);
    }

    let ae_tensors: Vec<Matrix> = params.ae.tensors().into_iter().map(|(_, m)| m.clone()).collect();
    let n_enc = params.ae.encoder.len();
    let act = params.ae.activation;
    let r = lib(finite_diff_check(
        |tape, leaves| {
            let pairs = |vs: &[Var]| vs.chunks(2).map(|c| (c[0], c[1])).collect::<Vec<_>>();
            let ae = dfcn::ae::AeVars {
                encoder: pairs(&leaves[..2 * n_enc]),
                decoder: pairs(&leaves[2 * n_enc..]),
                activation: act,
            };
            let iv = inputs.bind(tape);
            Ok(ae_pretrain_objective(tape, &iv, &ae, &cfg)?.total)
        },
        &ae_tensors,
        DEFAULT_EPSILON,
    ))?;
    parts.push(format!("ae pretrain {:.2e}", r.max_rel_error));
    worst = worst.max(r.max_rel_error);

    let ig_tensors: Vec<Matrix> = params.igae.tensors().into_iter().map(|(_, m)| m.clone()).collect();
    let n_ig = params.igae.encoder.len();
    let ig_act = params.igae.activation;
    for recon in [ReconMode::Both, ReconMode::WeightedAttr, ReconMode::Adjacency] {
        let cfg = TrainConfig { recon, ..cfg.clone() };
        let r = lib(finite_diff_check(
            |tape, leaves| {
                let igae = dfcn::igae::IgaeVars {
                    encoder: leaves[..n_ig].to_vec(),
                    decoder: leaves[n_ig..].to_vec(),
                    activation: ig_act,
                };
                let iv = inputs.bind(tape);
                Ok(igae_pretrain_objective(tape, &iv, &inputs.adj_norm, &igae, &cfg)?.total)
            },
            &ig_tensors,
            DEFAULT_EPSILON,
        ))?;
        parts.push(format!("igae {recon:?} {:.2e}", r.max_rel_error));
        worst = worst.max(r.max_rel_error);
    }

    let elapsed = start.elapsed();
    let detail = format!("max rel error {worst:.2e} [{}], {:.1}s", parts.join("; "), elapsed.as_secs_f64());
    if worst < 1e-4 && elapsed < Duration::from_secs(30) {
        Ok(detail)
    } else {
        fail(detail)
    }
}

// ---------------------------------------------------------------- criterion 2

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

fn distribution_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_row = 0.0f64;
    let mut min_kl = f64::INFINITY;
    let mut worst_self_kl = 0.0f64;
    for trial in 0..1000 {
        let n = rng.random_range(2..=12);
        let d = rng.random_range(1..=6);
        let k = rng.random_range(2..=5);
        let scale = [0.1, 1.0, 10.0, 60.0][trial % 4];
        let centers = Centers::new(random_matrix(&mut rng, k, d, scale), 1.0).unwrap();
        let zs: Vec<Matrix> = (0..3).map(|_| random_matrix(&mut rng, n, d, scale)).collect();
        let q = soft_assign(&zs[0], &centers).unwrap();
        let q1 = soft_assign(&zs[1], &centers).unwrap();
        let q2 = soft_assign(&zs[2], &centers).unwrap();
        let p = target_distribution(&q);
        let s = self_correlate(&random_matrix(&mut rng, n, d, scale));
        for m in [&s, &q, &q1, &q2, &p] {
            for r in m.row_sums() {
                worst_row = worst_row.max((r - 1.0).abs());
            }
        }
        min_kl = min_kl.min(triplet_kl(&p, &q, &q1, &q2).unwrap());
        worst_self_kl = worst_self_kl.max(triplet_kl(&q, &q, &q, &q).unwrap().abs());
    }
    let detail = format!(
        "1000 trials: max |row sum - 1| {worst_row:.1e}, min triplet KL {min_kl:.2e}, max |KL| on identical tables {worst_self_kl:.1e}"
    );
    if worst_row <= 1e-9 && min_kl >= -1e-12 && worst_self_kl <= 1e-12 {
        Ok(detail)
    } else {
        fail(detail)
    }
}

// ---------------------------------------------------------------- criterion 3

fn target_worked_values() -> Outcome {
    let p = target_distribution(&Matrix::from_rows(&[[0.9, 0.1], [0.6, 0.4]]));
    // f = (1.5, 0.5); rows 0.54:0.02 and 0.24:0.32 renormalized
    let expect = Matrix::from_rows(&[[0.54 / 0.56, 0.02 / 0.56], [0.24 / 0.56, 0.32 / 0.56]]);
    let stated = Matrix::from_rows(&[[0.9643, 0.0357], [0.4286, 0.5714]]);
    let oracle_err = p.max_abs_diff(&expect).unwrap();
    let stated_err = p.max_abs_diff(&stated).unwrap();
    let detail = format!("P = {p:?}; |P - hand oracle| {oracle_err:.1e}, |P - stated| {stated_err:.1e}");
    if oracle_err < 1e-12 && stated_err <= 1e-4 {
        Ok(detail)
    } else {
        fail(detail)
    }
}

// ---------------------------------------------------------------- criterion 4

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

fn kuhn_munkres_exhaustive() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let perms: Vec<Vec<Vec<usize>>> = (0..=7).map(permutations).collect();
    for trial in 0..200 {
        let k = rng.random_range(1..=7);
        // integer costs make the optimum exactly representable
        let cost = Matrix::from_fn(k, k, |_, _| rng.random_range(0..50) as f64);
        let brute = perms[k]
            .iter()
            .map(|p| p.iter().enumerate().map(|(i, &j)| cost.get(i, j)).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        let a = lib(kuhn_munkres(&cost))?;
        let mut seen = vec![false; k];
        for &j in &a.row_to_col {
            if seen[j] {
                return fail(format!("trial {trial}: assignment is not a bijection"));
            }
            seen[j] = true;
        }
        let recomputed: f64 = a.row_to_col.iter().enumerate().map(|(i, &j)| cost.get(i, j)).sum();
        if recomputed != brute || a.cost != brute {
            return fail(format!("trial {trial} (K={k}): got {} / {recomputed}, brute force {brute}", a.cost));
        }
    }
    let elapsed = start.elapsed();
    let detail = format!("200 random matrices, K <= 7, all optimal; {:.2}s", elapsed.as_secs_f64());
    if elapsed < Duration::from_secs(5) {
        Ok(detail)
    } else {
        fail(detail)
    }
}

// ---------------------------------------------------------------- criterion 5

fn brute_accuracy(y: &[usize], c: &[usize], perms: &[Vec<usize>]) -> f64 {
    let best = perms
        .iter()
        .map(|p| y.iter().zip(c).filter(|(&t, &q)| p[q] == t).count())
        .max()
        .unwrap();
    best as f64 / y.len() as f64
}

/// Per-class F1 by direct counting over nodes, for a given cluster-to-class map.
fn counted_f1(y: &[usize], c: &[usize], k: usize, map: &[usize]) -> f64 {
    let mut total = 0.0;
    for class in 0..k {
        let tp = y.iter().zip(c).filter(|(&t, &q)| t == class && map[q] == class).count();
        let pred = c.iter().filter(|&&q| map[q] == class).count();
        let actual = y.iter().filter(|&&t| t == class).count();
        if pred + actual > 0 {
            total += 2.0 * tp as f64 / (pred + actual) as f64;
        }
    }
    total / k as f64
}

fn counted_nmi(y: &[usize], c: &[usize]) -> f64 {
    let n = y.len() as f64;
    let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
    let mut py: HashMap<usize, f64> = HashMap::new();
    let mut pc: HashMap<usize, f64> = HashMap::new();
    for (&a, &b) in y.iter().zip(c) {
        *joint.entry((a, b)).or_default() += 1.0 / n;
        *py.entry(a).or_default() += 1.0 / n;
        *pc.entry(b).or_default() += 1.0 / n;
    }
    let h = |m: &HashMap<usize, f64>| -m.values().map(|p| p * p.ln()).sum::<f64>();
    let (hy, hc) = (h(&py), h(&pc));
    if py.len() == 1 && pc.len() == 1 {
        return 1.0;
    }
    if py.len() == 1 || pc.len() == 1 {
        return 0.0;
    }
    let mi: f64 = joint.iter().map(|(&(a, b), &p)| p * (p / (py[&a] * pc[&b])).ln()).sum();
    mi / ((hy + hc) / 2.0)
}

/// ARI from an explicit enumeration of node pairs.
fn pair_ari(y: &[usize], c: &[usize]) -> f64 {
    let (mut n11, mut n10, mut n01, mut n00) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..y.len() {
        for j in i + 1..y.len() {
            match (y[i] == y[j], c[i] == c[j]) {
                (true, true) => n11 += 1.0,
                (true, false) => n10 += 1.0,
                (false, true) => n01 += 1.0,
                (false, false) => n00 += 1.0,
            }
        }
    }
    let denom = (n00 + n01) * (n01 + n11) + (n00 + n10) * (n10 + n11);
    if denom == 0.0 {
        return 1.0;
    }
    2.0 * (n00 * n11 - n01 * n10) / denom
}

fn labelings(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..k).map(move |l| {
                    let mut w = v.clone();
                    w.push(l);
                    w
                })
            })
            .collect();
    }
    out
}

/// Labelings whose first occurrences are in increasing order.
fn canonical(v: &[usize]) -> bool {
    let mut next = 0;
    for &l in v {
        if l > next {
            return false;
        }
        if l == next {
            next += 1;
        }
    }
    true
}

fn metric_oracles() -> Outcome {
    let start = Instant::now();
    let mut pairs = 0usize;
    let mut worst = 0.0f64;
    for k in 2..=3 {
        let perms = permutations(k);
        for n in 1..=8 {
            let all = labelings(n, k);
            // every metric is invariant under relabeling the truth, so beyond
            // N = 5 one representative per truth partition suffices
            let truths: Vec<&Vec<usize>> = all.iter().filter(|y| n <= 5 || canonical(y)).collect();
            for y in truths {
                for c in &all {
                    pairs += 1;
                    let acc = accuracy(y, c, k).unwrap();
                    let acc_oracle = brute_accuracy(y, c, &perms);
                    if acc != acc_oracle {
                        return fail(format!("accuracy {y:?} {c:?}: {acc} vs {acc_oracle}"));
                    }
                    let map = best_mapping(y, c, k).unwrap();
                    let matched = y.iter().zip(c).filter(|(&t, &q)| map[q] == t).count() as f64;
                    if matched / n as f64 != acc_oracle {
                        return fail(format!("mapping {map:?} is not optimal for {y:?} {c:?}"));
                    }
                    let errs = [
                        (macro_f1(y, c, k).unwrap() - counted_f1(y, c, k, &map)).abs(),
                        (nmi(y, c).unwrap() - counted_nmi(y, c)).abs(),
                        (ari(y, c).unwrap() - pair_ari(y, c)).abs(),
                    ];
                    let e = errs.iter().cloned().fold(0.0, f64::max);
                    if e > 1e-12 {
                        return fail(format!("{y:?} {c:?}: metric errors {errs:?}"));
                    }
                    worst = worst.max(e);
                }
            }
        }
    }
    let acc = accuracy(&[0, 0, 1, 1], &[1, 1, 1, 0], 2).unwrap();
    let detail = format!(
        "{pairs} labeling pairs (N <= 8, K <= 3): ACC exact, max F1/NMI/ARI deviation {worst:.1e}; worked example ACC {acc}; {:.1}s",
        start.elapsed().as_secs_f64()
    );
    if acc == 0.75 {
        Ok(detail)
    } else {
        fail(detail)
    }
}

fn worked_macro_f1() -> Outcome {
    let f1 = macro_f1(&[0, 0, 1, 1], &[1, 1, 1, 0], 2).unwrap();
    let detail = format!("macro-F1 of y=[0,0,1,1], pred=[1,1,1,0] is {f1:.6}; stated value 0.65");
    if f1 == 0.65 {
        Ok(detail)
    } else {
        fail(detail)
    }
}

// ---------------------------------------------------------------- criterion 6

fn igae_ablation_ordering() -> Outcome {
    let start = Instant::now();
    let mut means = Vec::new();
    for recon in [ReconMode::WeightedAttr, ReconMode::Adjacency, ReconMode::Both] {
        let mut accs = Vec::new();
        for seed in SEEDS {
            let data = lib(sbm_synthesize(&SbmConfig::standard(seed)))?;
            let cfg = TrainConfig {
                seed,
                recon,
                ..TrainConfig::default()
            };
            accs.push(lib(train_igae_only(&data, &cfg))?.metrics.unwrap().acc);
        }
        means.push(mean(&accs));
    }
    let elapsed = start.elapsed();
    let (lw, la, both) = (means[0], means[1], means[2]);
    let detail = format!(
        "mean ACC L_w-only {lw:.4}, L_a-only {la:.4}, both {both:.4} (need L_w > L_a and both >= L_a); {:.1}s",
        elapsed.as_secs_f64()
    );
    if lw > la && both >= la && elapsed < Duration::from_secs(180) {
        Ok(detail)
    } else {
        fail(detail)
    }
}

// ---------------------------------------------------------------- criterion 7

fn end_to_end(cache: &mut RunCache) -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in SEEDS {
        let data = lib(sbm_synthesize(&SbmConfig::standard(seed)))?;
        let truth = data.labels.clone().unwrap();
        let raw = lib(kmeans(&data.x, data.k, 20, seed))?;
        let raw_acc = lib(accuracy(&truth, &raw.labels, data.k))?;
        let (acc, took) = cache.full_run(seed, "triplet")?;
        ok &= acc >= 0.95 && acc >= raw_acc && took < Duration::from_secs(120);
        lines.push(format!("seed {seed}: {acc:.4} vs raw {raw_acc:.4} in {:.1}s", took.as_secs_f64()));
    }
    let detail = lines.join("; ");
    if ok {
        Ok(detail)
    } else {
        fail(detail)
    }
}

// ---------------------------------------------------------------- criterion 8

fn saif_ablation_ordering(cache: &mut RunCache) -> Outcome {
    let mut means = Vec::new();
    for variant in ["triplet", "single", "no-fusion"] {
        let accs = SEEDS
            .iter()
            .map(|&s| cache.full_run(s, variant).map(|r| r.0))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        means.push(mean(&accs));
    }
    let (t, s, nf) = (means[0], means[1], means[2]);
    let detail = format!("mean ACC triplet {t:.4}, single {s:.4}, no-fusion {nf:.4} (gaps must be >= -0.01)");
    if t - s >= -0.01 && s - nf >= -0.01 {
        Ok(detail)
    } else {
        fail(detail)
    }
}

// ---------------------------------------------------------------- criterion 9

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bundle = dir.path().join("bundle");
    let standard = SbmConfig::standard(7);
    lib(cmd_synth(
        &SynthArgs {
            blocks: 3,
            sizes: standard.sizes,
            p_in: standard.p_in,
            p_out: standard.p_out,
            attr_dim: standard.attr_dim,
            sep: standard.attr_sep,
            seed: 7,
        },
        &bundle,
    ))?;
    let run = |name: &str| -> std::result::Result<(Vec<u8>, Vec<u8>), String> {
        let out = dir.path().join(name);
        lib(cmd_train(&TrainArgs {
            bundle: bundle.clone(),
            config: None,
            out: out.clone(),
            ablations: vec![],
            seed_override: Some(7),
        }))?;
        let read = |f: &str| std::fs::read(out.join(f)).map_err(|e| e.to_string());
        Ok((read(LOSSES)?, read(PREDICTIONS)?))
    };
    let a = run("first")?;
    let b = run("second")?;
    let detail = format!("loss CSV {} bytes, labels {} bytes", a.0.len(), a.1.len());
    if a == b {
        Ok(format!("{detail}, byte-identical"))
    } else {
        fail(format!("{detail}, outputs differ"))
    }
}

fn main() -> ExitCode {
    let mut cache = RunCache::default();
    let mut failed = 0;
    let mut report = |id: &str, name: &str, outcome: Outcome| {
        match outcome {
            Ok(detail) => println!("PASS  criterion {id:<3} {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {id:<3} {name}: {detail}");
            }
        }
    };
    report("1", "gradient integrity", gradient_integrity());
    report("2", "distribution invariants", distribution_invariants());
    report("3", "target distribution worked values", target_worked_values());
    report("4", "Kuhn-Munkres vs exhaustive search", kuhn_munkres_exhaustive());
    report("5a", "metric oracles", metric_oracles());
    report("5b", "worked macro-F1 value", worked_macro_f1());
    report("6", "graph autoencoder loss ablation", igae_ablation_ordering());
    report("7", "end-to-end clustering", end_to_end(&mut cache));
    report("8", "fusion / supervision ablation", saif_ablation_ordering(&mut cache));
    report("9", "training determinism", cli_determinism());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion line(s) failed");
        ExitCode::FAILURE
    }
}
