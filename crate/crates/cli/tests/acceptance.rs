//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Every expected value comes from an oracle written here, independently of
//! the library: literal transcriptions of the published matrices, a plain
//! scalar MLP with its own Adam, complex and hyperbolic arithmetic.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use abip::tasks::{run_denoise_experiment, DenoiseConfig, Method};
use abip::train::{adam_step, backward, batch_gradient, grad_check, sample_gradient, AdamConfig, AdamState};
use abip::{Activation, BilinearProduct, Network, ProductRegistry, Sample};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(elapsed: Duration, secs: f64) -> bool {
    elapsed.as_secs_f64() < secs
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn random_sample(rng: &mut ChaCha8Rng, rows_in: usize, rows_out: usize, dim: usize) -> Sample {
    Sample {
        input: Array2::from_shape_simple_fn((rows_in, dim), || rng.random_range(-1.0..1.0)),
        target: Array2::from_shape_simple_fn((rows_out, dim), || rng.random_range(0.0..1.0)),
    }
}

/// The seven builtins with the size used throughout.
fn builtins() -> Vec<BilinearProduct> {
    [
        ("scalar", 1),
        ("circular", 5),
        ("skew_circular", 5),
        ("reverse_time_circular", 5),
        ("vector3", 3),
        ("quaternion", 4),
        ("seven_dim_vector", 7),
    ]
    .iter()
    .map(|&(name, n)| BilinearProduct::builtin(name, n).unwrap())
    .collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for p in builtins() {
        let n = p.dim();
        for _ in 0..1000 {
            let a = uniform(&mut rng, n, -10.0, 10.0);
            let b = uniform(&mut rng, n, -10.0, 10.0);
            let direct = p.product(&a, &b).unwrap();
            let via_m = p.matrix_rep(&a).unwrap().dot(&ndarray::arr1(&b));
            let via_t = p.transmuted_rep(&b).unwrap().dot(&ndarray::arr1(&a));
            for k in 0..n {
                worst = worst.max((via_m[k] - direct[k]).abs()).max((via_t[k] - direct[k]).abs());
            }
        }
    }
    let t = start.elapsed();
    outcome(worst < 1e-12 && within(t, 5.0), format!("max |err| {worst:.2e} over 7×1000 pairs, {t:.2?}"))
}

/// Parses a row of `0`, `wK` or `-wK` tokens (1-based K).
fn parse_table(rows: &[&str]) -> Vec<Vec<(f64, usize)>> {
    rows.iter()
        .map(|r| {
            r.split_whitespace()
                .map(|tok| match tok {
                    "0" => (0.0, 0),
                    t if t.starts_with("-w") => (-1.0, t[2..].parse().unwrap()),
                    t => (1.0, t[1..].parse().unwrap()),
                })
                .collect()
        })
        .collect()
}

fn table_mismatches(p: &BilinearProduct, rows: &[&str], w: &[f64]) -> usize {
    let m = p.matrix_rep(w).unwrap();
    let mut bad = 0;
    for (r, row) in parse_table(rows).iter().enumerate() {
        assert_eq!(row.len(), p.dim());
        for (c, &(sign, idx)) in row.iter().enumerate() {
            let want = if idx == 0 { 0.0 } else { sign * w[idx - 1] };
            if m[[r, c]] != want {
                bad += 1;
            }
        }
    }
    bad
}

/// Circulant family patterns as displayed for general `N` (0-based row/col).
fn pattern_entry(kind: &str, n: usize, r: usize, c: usize) -> (f64, usize) {
    match kind {
        "circular" => (1.0, (r + n - c) % n + 1),
        "skew_circular" if r >= c => (1.0, r - c + 1),
        "skew_circular" => (-1.0, n + r - c + 1),
        "reverse_time_circular" => (1.0, (2 * n - 1 - r - c) % n + 1),
        _ => unreachable!(),
    }
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let tables: [(&str, usize, &[&str]); 6] = [
        ("vector3", 3, &["0 -w3 w2", "w3 0 -w1", "-w2 w1 0"]),
        ("quaternion", 4, &["w1 -w2 -w3 -w4", "w2 w1 -w4 w3", "w3 w4 w1 -w2", "w4 -w3 w2 w1"]),
        (
            "seven_dim_vector",
            7,
            &[
                "0 -w4 -w7 w2 -w6 w5 w3",
                "w4 0 -w5 -w1 w3 -w7 w6",
                "w7 w5 0 -w6 -w2 w4 -w1",
                "-w2 w1 w6 0 -w7 -w3 w5",
                "w6 -w3 w2 w7 0 -w1 -w4",
                "-w5 w7 -w4 w3 w1 0 -w2",
                "-w3 -w6 w1 -w5 w4 w2 0",
            ],
        ),
        ("circular", 5, &["w1 w5 w4 w3 w2", "w2 w1 w5 w4 w3", "w3 w2 w1 w5 w4", "w4 w3 w2 w1 w5", "w5 w4 w3 w2 w1"]),
        (
            "skew_circular",
            5,
            &["w1 -w5 -w4 -w3 -w2", "w2 w1 -w5 -w4 -w3", "w3 w2 w1 -w5 -w4", "w4 w3 w2 w1 -w5", "w5 w4 w3 w2 w1"],
        ),
        (
            "reverse_time_circular",
            5,
            &["w5 w4 w3 w2 w1", "w4 w3 w2 w1 w5", "w3 w2 w1 w5 w4", "w2 w1 w5 w4 w3", "w1 w5 w4 w3 w2"],
        ),
    ];
    // Distinct primes so any swapped or mis-signed entry shows.
    let w = [2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0];
    let mut bad = 0;
    for (name, n, rows) in tables {
        bad += table_mismatches(&BilinearProduct::builtin(name, n).unwrap(), rows, &w[..n]);
    }
    let primes = [2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0, 23.0, 29.0, 31.0, 37.0];
    for kind in ["circular", "skew_circular", "reverse_time_circular"] {
        for n in 2..=12 {
            let m = BilinearProduct::builtin(kind, n).unwrap().matrix_rep(&primes[..n]).unwrap();
            for r in 0..n {
                for c in 0..n {
                    let (sign, idx) = pattern_entry(kind, n, r, c);
                    if m[[r, c]] != sign * primes[idx - 1] {
                        bad += 1;
                    }
                }
            }
        }
    }
    let t = start.elapsed();
    outcome(bad == 0 && within(t, 1.0), format!("{bad} mismatched entries (6 literal tables + N=2..12 patterns), {t:.2?}"))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut worst: (f64, String) = (0.0, String::new());
    for p in builtins() {
        for seed in 0..10 {
            let n = p.dim();
            let net = Network::init(&[3, 5, 5, 2], p.clone(), Activation::Sigmoid, Activation::Sigmoid, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let sample = random_sample(&mut rng, 3, 2, n);
            let r = grad_check(&net, &sample, 1e-5).unwrap();
            if r.max_rel_err >= worst.0 {
                worst = (r.max_rel_err, format!("{}({n}) seed {seed}", p.name()));
            }
        }
    }
    let t = start.elapsed();
    outcome(
        worst.0 < 1e-4 && within(t, 60.0),
        format!("max rel err {:.2e} ({}), 70 checks, {t:.2?}", worst.0, worst.1),
    )
}

fn bits_equal(a: &Array2<f64>, b: &Array2<f64>) -> bool {
    a.shape() == b.shape() && a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn criterion_4() -> Outcome {
    let mut calls = 0;
    let mut bad = 0;
    for p in builtins() {
        for seed in 0..5 {
            let net = Network::init(&[4, 6, 3], p.clone(), Activation::Sigmoid, Activation::Identity, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let samples: Vec<Sample> = (0..40).map(|_| random_sample(&mut rng, 4, 3, p.dim())).collect();
            for s in &samples {
                let trace = net.forward(s.input.view()).unwrap();
                let g = backward(&net, &trace, s.target.view()).unwrap();
                calls += 1;
                bad += g.d_biases.iter().zip(&g.deltas).filter(|(b, d)| !bits_equal(b, d)).count();
            }
            let refs: Vec<&Sample> = samples.iter().collect();
            let (_, g) = batch_gradient(&net, &refs).unwrap();
            calls += 1;
            bad += g.d_biases.iter().zip(&g.deltas).filter(|(b, d)| !bits_equal(b, d)).count();
        }
    }
    let guard = if cfg!(debug_assertions) { "; also asserted inside every backward call of this build" } else { "" };
    outcome(bad == 0, format!("{calls} backward calls, {bad} layers differing{guard}"))
}

type Pair = (f64, f64);
/// Loss, weight gradients `[l][i][j]`, bias gradients `[l][i]`.
type ScalarGrads = (f64, Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>);

/// Plain scalar MLP: weights `w[l][i][j]`, biases `b[l][i]`.
#[derive(Clone)]
struct ScalarMlp {
    w: Vec<Vec<Vec<f64>>>,
    b: Vec<Vec<f64>>,
    out_identity: bool,
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl ScalarMlp {
    fn from_network(net: &Network) -> Self {
        let w = net
            .layers
            .iter()
            .map(|l| (0..l.outputs()).map(|i| (0..l.inputs()).map(|j| l.weights[[i, j, 0]]).collect()).collect())
            .collect();
        let b = net.layers.iter().map(|l| (0..l.outputs()).map(|i| l.biases[[i, 0]]).collect()).collect();
        Self { w, b, out_identity: net.output_activation() == Activation::Identity }
    }

    /// Pre-activations and activations of every layer.
    fn forward(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut a = vec![x.to_vec()];
        let mut zs = Vec::new();
        let last = self.w.len() - 1;
        for (l, (w, b)) in self.w.iter().zip(&self.b).enumerate() {
            let z: Vec<f64> = w
                .iter()
                .zip(b)
                .map(|(row, bi)| row.iter().zip(&a[l]).map(|(wij, aj)| wij * aj).sum::<f64>() + bi)
                .collect();
            let act = if l == last && self.out_identity { z.clone() } else { z.iter().map(|&v| sig(v)).collect() };
            zs.push(z);
            a.push(act);
        }
        (zs, a)
    }

    fn loss_and_grad(&self, x: &[f64], t: &[f64]) -> ScalarGrads {
        let (zs, a) = self.forward(x);
        let y = a.last().unwrap();
        let g = y.len() as f64;
        let loss = y.iter().zip(t).map(|(y, t)| (y - t) * (y - t)).sum::<f64>() / g;
        let last = self.w.len() - 1;
        let dphi = |l: usize, z: f64| if l == last && self.out_identity { 1.0 } else { sig(z) * (1.0 - sig(z)) };
        let mut delta: Vec<f64> = (0..y.len()).map(|k| 2.0 * (y[k] - t[k]) / g * dphi(last, zs[last][k])).collect();
        let mut gw = vec![Vec::new(); self.w.len()];
        let mut gb = vec![Vec::new(); self.w.len()];
        for l in (0..self.w.len()).rev() {
            gw[l] = delta.iter().map(|d| a[l].iter().map(|aj| d * aj).collect()).collect();
            gb[l] = delta.clone();
            if l > 0 {
                delta = (0..a[l].len())
                    .map(|j| (0..delta.len()).map(|i| delta[i] * self.w[l][i][j]).sum::<f64>() * dphi(l - 1, zs[l - 1][j]))
                    .collect();
            }
        }
        (loss, gw, gb)
    }
}

struct OracleAdam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl OracleAdam {
    fn step(&mut self, params: &mut [f64], grads: &[f64], cfg: &AdamConfig) {
        self.t += 1;
        for i in 0..params.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grads[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
            let mh = self.m[i] / (1.0 - cfg.beta1.powi(self.t));
            let vh = self.v[i] / (1.0 - cfg.beta2.powi(self.t));
            params[i] -= cfg.learning_rate * mh / (vh.sqrt() + cfg.epsilon);
        }
    }
}

fn flatten(w: &[Vec<Vec<f64>>], b: &[Vec<f64>]) -> Vec<f64> {
    let mut out = Vec::new();
    for (wl, bl) in w.iter().zip(b) {
        out.extend(wl.iter().flatten());
        out.extend(bl);
    }
    out
}

fn unflatten(mlp: &mut ScalarMlp, flat: &[f64]) {
    let mut it = flat.iter();
    for (wl, bl) in mlp.w.iter_mut().zip(mlp.b.iter_mut()) {
        for v in wl.iter_mut().flatten() {
            *v = *it.next().unwrap();
        }
        for v in bl.iter_mut() {
            *v = *it.next().unwrap();
        }
    }
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let scalar = BilinearProduct::builtin("scalar", 1).unwrap();
    let mut worst_fwd: f64 = 0.0;
    let mut worst_grad: f64 = 0.0;
    for (seed, out) in [(0, Activation::Sigmoid), (1, Activation::Identity), (2, Activation::Sigmoid)] {
        let net = Network::init(&[6, 9, 7, 4], scalar.clone(), Activation::Sigmoid, out, seed).unwrap();
        let oracle = ScalarMlp::from_network(&net);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 50);
        for _ in 0..20 {
            let s = random_sample(&mut rng, 6, 4, 1);
            let (lib_loss, g) = sample_gradient(&net, &s).unwrap();
            let x: Vec<f64> = s.input.iter().copied().collect();
            let t: Vec<f64> = s.target.iter().copied().collect();
            let (_, a) = oracle.forward(&x);
            let y = net.predict(s.input.view()).unwrap();
            for (p, q) in y.iter().zip(a.last().unwrap()) {
                worst_fwd = worst_fwd.max((p - q).abs());
            }
            let (loss, gw, gb) = oracle.loss_and_grad(&x, &t);
            worst_grad = worst_grad.max((loss - lib_loss).abs());
            for l in 0..gw.len() {
                for (i, row) in gw[l].iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        worst_grad = worst_grad.max((g.d_weights[l][[i, j, 0]] - v).abs());
                    }
                    worst_grad = worst_grad.max((g.d_biases[l][[i, 0]] - gb[l][i]).abs());
                }
            }
        }
    }

    // 100 full-batch Adam steps from the same initialization.
    let mut net = Network::init(&[5, 8, 3], scalar, Activation::Sigmoid, Activation::Sigmoid, 9).unwrap();
    let mut oracle = ScalarMlp::from_network(&net);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let data: Vec<Sample> = (0..16).map(|_| random_sample(&mut rng, 5, 3, 1)).collect();
    let refs: Vec<&Sample> = data.iter().collect();
    let cfg = AdamConfig::default();
    let mut state = AdamState::new(&net, cfg);
    let mut params = flatten(&oracle.w, &oracle.b);
    let mut opt = OracleAdam { m: vec![0.0; params.len()], v: vec![0.0; params.len()], t: 0 };
    let mut worst_curve: f64 = 0.0;
    for _ in 0..100 {
        let (lib_loss, g) = batch_gradient(&net, &refs).unwrap();
        let mut loss = 0.0;
        let mut sum = vec![0.0; params.len()];
        for s in &data {
            let x: Vec<f64> = s.input.iter().copied().collect();
            let t: Vec<f64> = s.target.iter().copied().collect();
            let (l, gw, gb) = oracle.loss_and_grad(&x, &t);
            loss += l;
            for (acc, v) in sum.iter_mut().zip(flatten(&gw, &gb)) {
                *acc += v;
            }
        }
        let m = data.len() as f64;
        worst_curve = worst_curve.max((loss / m - lib_loss).abs());
        let grads: Vec<f64> = sum.iter().map(|v| v / m).collect();
        adam_step(&mut net, &g, &mut state).unwrap();
        opt.step(&mut params, &grads, &cfg);
        unflatten(&mut oracle, &params);
    }
    let t = start.elapsed();
    let pass = worst_fwd < 1e-10 && worst_grad < 1e-10 && worst_curve < 1e-10 && within(t, 30.0);
    outcome(
        pass,
        format!("forward {worst_fwd:.1e}, gradient {worst_grad:.1e}, 100-step Adam loss curve {worst_curve:.1e}, {t:.2?}"),
    )
}

/// One layer `[R, G]` with `N = 2` against a scalar-pair arithmetic oracle.
fn two_dim_oracle_error(product: &str, mul: fn(Pair, Pair) -> Pair) -> f64 {
    let p = BilinearProduct::builtin(product, 2).unwrap();
    let mut worst: f64 = 0.0;
    for (seed, out) in [(0u64, Activation::Identity), (1, Activation::Sigmoid), (2, Activation::Identity)] {
        let mut net = Network::init(&[3, 4], p.clone(), Activation::Sigmoid, out, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 10);
        net.layers[0].biases.mapv_inplace(|_| rng.random_range(-1.0..1.0));
        for _ in 0..50 {
            let x = Array2::from_shape_simple_fn((3, 2), || rng.random_range(-2.0..2.0));
            let y = net.predict(x.view()).unwrap();
            let layer = &net.layers[0];
            for i in 0..4 {
                let mut z = (layer.biases[[i, 0]], layer.biases[[i, 1]]);
                for j in 0..3 {
                    let prod = mul((layer.weights[[i, j, 0]], layer.weights[[i, j, 1]]), (x[[j, 0]], x[[j, 1]]));
                    z = (z.0 + prod.0, z.1 + prod.1);
                }
                let f = |v: f64| if out == Activation::Identity { v } else { sig(v) };
                worst = worst.max((y[[i, 0]] - f(z.0)).abs()).max((y[[i, 1]] - f(z.1)).abs());
            }
        }
    }
    worst
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let complex = two_dim_oracle_error("skew_circular", |(a, b), (c, d)| (a * c - b * d, a * d + b * c));
    let hyperbolic = two_dim_oracle_error("circular", |(a, b), (c, d)| (a * c + b * d, a * d + b * c));
    let t = start.elapsed();
    outcome(
        complex < 1e-12 && hyperbolic < 1e-12 && within(t, 5.0),
        format!("complex {complex:.1e}, hyperbolic {hyperbolic:.1e}, {t:.2?}"),
    )
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Runs the desk experiment once; criteria 7 and 8 both read it.
fn criteria_7_and_8() -> (Outcome, Outcome) {
    let cfg = DenoiseConfig::desk_scale();
    let shipped: DenoiseConfig =
        serde_json::from_str(&std::fs::read_to_string(repo_root().join("configs/desk_denoise.json")).unwrap()).unwrap();
    assert_eq!(shipped, cfg, "configs/desk_denoise.json must match the built-in desk-scale config");
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let report = pool.install(|| run_denoise_experiment(&cfg, &ProductRegistry::new())).unwrap().report;
    let t = start.elapsed();

    let db = |m: Method| report.methods.iter().find(|r| r.method == m).and_then(|r| r.psnr.decibels());
    let noisy = report.psnr_noisy.decibels().unwrap_or(f64::INFINITY);
    let abip = db(Method::Abipnn).unwrap_or(f64::NEG_INFINITY);
    let concat = db(Method::DnnConcat).unwrap_or(f64::INFINITY);
    let parallel = db(Method::DnnParallel);
    let abip_row = report.methods.iter().find(|r| r.method == Method::Abipnn).unwrap();
    let c7 = outcome(
        abip >= noisy + 3.0 && abip >= concat && abip_row.epochs_run <= 500 && within(t, 900.0) && !abip_row.diverged,
        format!(
            "noisy {noisy:.2} dB, ABIPNN {abip:.2} dB (+{:.2}), DNN-concat {concat:.2} dB, DNN-parallel {} dB, \
             {} ABIPNN epochs, params {} vs {}, {t:.1?} single-threaded",
            abip - noisy,
            parallel.map_or("n/a".into(), |v| format!("{v:.2}")),
            abip_row.epochs_run,
            abip_row.param_count,
            report.methods.iter().find(|r| r.method == Method::DnnConcat).unwrap().param_count,
        ),
    );

    let history = &abip_row.histories[0];
    let train: Vec<f64> = history.iter().map(|r| r.train_mse).collect();
    let val: Vec<f64> = history.iter().map(|r| r.val_mse).collect();
    let block_means = |v: &[f64]| -> Vec<f64> { v.chunks(20).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect() };
    let rises = |v: &[f64]| v.windows(2).filter(|w| w[1] > w[0]).count();
    let rolling: Vec<f64> = train.windows(20).map(|w| w.iter().sum::<f64>() / 20.0).collect();
    let worst_roll = rolling
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let (bt, bv) = (block_means(&train), block_means(&val));
    let c8 = outcome(
        rises(&bt) == 0 && rises(&bv) == 0,
        format!(
            "20-epoch window means over {} epochs: train {:.3e} → {:.3e} ({} rises), val {:.3e} → {:.3e} ({} rises); \
             sliding-window mean largest relative uptick {:.1e}",
            history.len(),
            bt[0],
            bt[bt.len() - 1],
            rises(&bt),
            bv[0],
            bv[bv.len() - 1],
            rises(&bv),
            worst_roll.max(0.0),
        ),
    );
    (c7, c8)
}

fn abip(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_abip"))
        .args(args)
        .arg("--output-dir")
        .arg(out)
        .output()
        .expect("run abip")
}

fn same_files(a: &Path, b: &Path, names: &[String]) -> Result<usize, String> {
    for n in names {
        let (x, y) = (std::fs::read(a.join(n)), std::fs::read(b.join(n)));
        match (x, y) {
            (Ok(x), Ok(y)) if x == y => {}
            _ => return Err(format!("{n} differs")),
        }
    }
    Ok(names.len())
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let root = repo_root();
    let mut checked = 0;
    let mut failures = Vec::new();
    let mut run = |label: &str, args: Vec<String>, replay_cmd: &str, files: &dyn Fn(&Path) -> Vec<String>| {
        let first = dir.path().join(format!("{label}-1"));
        let second = dir.path().join(format!("{label}-2"));
        let argv: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = abip(&argv, &first);
        if !o.status.success() {
            failures.push(format!("{label}: {}", String::from_utf8_lossy(&o.stderr).trim()));
            return;
        }
        let manifest = first.join("manifest.json");
        let o = abip(&[replay_cmd, "--config", manifest.to_str().unwrap(), "--threads", "3"], &second);
        if !o.status.success() {
            failures.push(format!("{label} replay: {}", String::from_utf8_lossy(&o.stderr).trim()));
            return;
        }
        match same_files(&first, &second, &files(&first)) {
            Ok(n) => checked += n,
            Err(e) => failures.push(format!("{label}: {e}")),
        }
    };

    let train_files = |_: &Path| vec!["checkpoint.abip".to_string(), "history.csv".to_string()];
    let one = root.join("configs/one_sample.json");
    run(
        "one-sample",
        vec!["train".into(), "--config".into(), one.display().to_string(), "--set".into(), "train.seed=7".into()],
        "train",
        &train_files,
    );

    // Tensor dataset written to ABTN files.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let xs = ndarray::ArrayD::from_shape_simple_fn(ndarray::IxDyn(&[40, 3, 4]), || rng.random_range(-1.0..1.0));
    let ys = ndarray::ArrayD::from_shape_simple_fn(ndarray::IxDyn(&[40, 2, 4]), || rng.random_range(0.0..1.0));
    abip::io::save_tensor(&xs, &dir.path().join("x.abtn")).unwrap();
    abip::io::save_tensor(&ys, &dir.path().join("y.abtn")).unwrap();
    let cfg = serde_json::json!({
        "net": {"topology": [3, 6, 2], "product": "quaternion", "dim": 4, "init_seed": 2},
        "data": {"kind": "tensors", "inputs": "x.abtn", "targets": "y.abtn"},
        "train": {"max_epochs": 40, "patience": 10, "minibatch_size": 8, "seed": 5}
    });
    let cfg_path = dir.path().join("tensors.json");
    std::fs::write(&cfg_path, cfg.to_string()).unwrap();
    run(
        "tensors",
        vec!["train".into(), "--config".into(), cfg_path.display().to_string(), "--threads".into(), "2".into()],
        "train",
        &train_files,
    );

    // A small denoising run; every checkpoint and history it writes is compared.
    let mut small = DenoiseConfig::desk_scale();
    small.image.h = 20;
    small.image.w = 20;
    small.image.bands = 3;
    small.net.topology = vec![16, 8, 16];
    small.patches.size = 4;
    small.patches.train_count = 60;
    small.train.max_epochs = 5;
    small.train.patience = 5;
    let small_path = dir.path().join("small_denoise.json");
    std::fs::write(&small_path, serde_json::to_string(&small).unwrap()).unwrap();
    let denoise_files = |d: &Path| {
        let mut v: Vec<String> = std::fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".abip") || n.starts_with("history_"))
            .collect();
        v.sort();
        v
    };
    run(
        "denoise",
        vec!["denoise".into(), "--config".into(), small_path.display().to_string()],
        "denoise",
        &denoise_files,
    );

    outcome(
        failures.is_empty() && checked == 2 + 2 + 10,
        if failures.is_empty() {
            format!("{checked} files byte-identical after replaying train, tensor-train and denoise manifests")
        } else {
            failures.join("; ")
        },
    )
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "representation identities", criterion_1()),
        (2, "published matrix fidelity", criterion_2()),
        (3, "gradient checks", criterion_3()),
        (4, "bias gradient equals local gradient", criterion_4()),
        (5, "N=1 matches a scalar network", criterion_5()),
        (6, "complex and hyperbolic degenerations", criterion_6()),
    ];
    let (c7, c8) = criteria_7_and_8();
    results.push((7, "desk-scale denoising", c7));
    results.push((8, "training convergence", c8));
    results.push((9, "reproducibility from manifests", criterion_9()));

    let mut failed = 0;
    for (n, name, o) in &results {
        println!("criterion {n} [{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
