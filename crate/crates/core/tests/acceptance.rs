//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL line; exits non-zero on any failure.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use qmsvm::eval::{self, blobs, BenchmarkConfig, BenchmarkSource, BlobsConfig, Phase};
use qmsvm::model::{combine, CombineConfig};
use qmsvm::pipeline::{self, PipelineConfig, SamplerChoice};
use qmsvm::qubo::{build_qubo, decode_bits, objective, penalty};
use qmsvm::sampler::{AnnealConfig, ExactSolver, SimulatedAnnealing};
use qmsvm::selection::SelectionConfig;
use qmsvm::{Dataset, Kernel, KernelParams, Matrix, QmsvmParams, QuboMeta, SolutionMatrix, TrainedModel};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    Matrix::new(rows, cols, data).unwrap()
}

/// Random instance: Gaussian features, random labels, its kernel matrix.
fn instance(rng: &mut ChaCha8Rng, m: usize, c: usize, gamma: f64) -> (Dataset, Matrix) {
    let x = gaussian_matrix(rng, m, 2);
    let labels = (0..m).map(|_| rng.random_range(0..c)).collect();
    let d = Dataset::new(x, labels, c).unwrap();
    let k = Kernel::new(KernelParams::new(gamma).unwrap()).matrix(d.features(), d.features()).unwrap();
    (d, k)
}

fn random_bits(rng: &mut ChaCha8Rng, dim: usize) -> Vec<u8> {
    (0..dim).map(|_| rng.random_range(0..2u8)).collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let m = rng.random_range(1..=6);
        let c = rng.random_range(2..=3);
        let b = rng.random_range(1..=3);
        let p = QmsvmParams {
            bits: b as u32,
            beta: rng.random_range(0.1..5.0),
            mu: rng.random_range(0.0..5.0),
            max_min_ratio: None,
        };
        let gamma = rng.random_range(0.1..2.0);
        let (d, k) = instance(&mut rng, m, c, gamma);
        let q = build_qubo(&d, &k, &p).unwrap();
        let meta = q.meta();
        let lagrangian = |bits: &[u8]| {
            let t = decode_bits(bits, meta).unwrap();
            objective(&t, &k, d.labels(), p.beta).unwrap() + p.mu * penalty(&t, d.labels()).unwrap()
        };
        for _ in 0..1000 {
            let (x1, x2) = (random_bits(&mut rng, meta.dim()), random_bits(&mut rng, meta.dim()));
            let de = q.energy(&x1).unwrap() - q.energy(&x2).unwrap();
            let dl = lagrangian(&x1) - lagrangian(&x2);
            worst = worst.max((de - dl).abs() / dl.abs().max(1.0));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("max scaled |dE - dL| = {worst:.2e}, {secs:.1}s");
    if worst <= 1e-9 && secs < 30.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_2() -> Outcome {
    for b in 1..=4usize {
        let levels = (1u64 << b) - 1;
        let meta = QuboMeta { m: 1, c: 1, b };
        let mut seen = Vec::new();
        for sigma in 0..=levels {
            let bits: Vec<u8> = (0..b).map(|k| ((sigma >> k) & 1) as u8).collect();
            let v = decode_bits(&bits, meta).unwrap().tau().get(0, 0);
            // nearest grid numerator k in -1 + 2k/levels
            let k = ((v + 1.0) * levels as f64 / 2.0).round() as i64;
            let grid = -1.0 + 2.0 * k as f64 / levels as f64;
            if (v - grid).abs() > 1e-15 {
                return Err(format!("B={b}: {v} is off the grid"));
            }
            seen.push(k);
        }
        seen.sort_unstable();
        if seen != (0..=levels as i64).collect::<Vec<_>>() {
            return Err(format!("B={b}: grid points {seen:?}"));
        }
    }
    let meta = QuboMeta { m: 1, c: 1, b: 2 };
    let two: Vec<f64> =
        [[0, 0], [1, 0], [0, 1], [1, 1]].iter().map(|bits| decode_bits(bits, meta).unwrap().tau().get(0, 0)).collect();
    let expect = [-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0];
    if two.iter().zip(&expect).all(|(a, b)| (a - b).abs() <= 1e-15) {
        Ok(format!("B=1..4 uniform; B=2 gives {two:?}"))
    } else {
        Err(format!("B=2 gives {two:?}"))
    }
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut hits = 0;
    for i in 0..20u64 {
        let (d, k) = instance(&mut rng, 3, 3, 1.0);
        let q = build_qubo(&d, &k, &QmsvmParams::default()).unwrap();
        assert_eq!(q.dim(), 18);
        let exact = ExactSolver.solve(&q).unwrap();
        let sa = SimulatedAnnealing::new(AnnealConfig { num_reads: 1000, sweeps: 100, seed: i, ..Default::default() })
            .solve(&q)
            .unwrap();
        if exact.samples().iter().any(|g| sa.contains(&g.bits)) {
            hits += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("ground state found in {hits}/20 instances, {secs:.1}s");
    if hits >= 19 && secs < 60.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut states = 0;
    for _ in 0..20 {
        let m = rng.random_range(1..=4);
        let gamma = rng.random_range(0.2..2.0);
        let (d, k) = instance(&mut rng, m, 2, gamma);
        let max_k = k.as_slice().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let p = QmsvmParams { bits: 2, beta: 1.0, mu: 100.0 * max_k, max_min_ratio: None };
        let q = build_qubo(&d, &k, &p).unwrap();
        for g in ExactSolver.solve(&q).unwrap().samples() {
            states += 1;
            let t = decode_bits(&g.bits, q.meta()).unwrap();
            let bad = t.tau().iter_rows().find(|r| r.iter().sum::<f64>() != 0.0).map(|r| r.to_vec());
            if let Some(row) = bad {
                return Err(format!("ground state row {row:?} does not sum to zero"));
            }
        }
    }
    Ok(format!("{states} ground states over 20 instances, all rows sum to 0"))
}

fn desk_config(seed: u64) -> PipelineConfig {
    PipelineConfig {
        selection: SelectionConfig { size: 60, seed, ..Default::default() },
        sampler: SamplerChoice::Anneal(AnnealConfig { seed, ..Default::default() }),
        ..Default::default()
    }
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let cfg = BlobsConfig::default();
    let mut accs = Vec::new();
    for seed in 0..5u64 {
        let train = blobs(3000, &cfg, 100 + seed).unwrap();
        let test = blobs(1000, &cfg, 200 + seed).unwrap();
        let out = pipeline::train(&train, None, &desk_config(seed)).unwrap();
        let pred = out.model.predict(test.features()).unwrap();
        accs.push(eval::accuracy(&pred, test.labels()).unwrap());
    }
    let mut sorted = accs.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[2];
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("median test accuracy {median:.4} over {accs:.4?}, {secs:.1}s");
    if median >= 0.95 && secs < 120.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let bench = BenchmarkConfig {
        sizes: vec![1000, 2000, 4000],
        test_size: 500,
        repeats: 3,
        seed: 6,
        source: BenchmarkSource::Synthetic(BlobsConfig::default()),
        pipeline: desk_config(6),
    };
    let reports = eval::benchmark(&bench).unwrap();
    let inf: Vec<_> = reports.iter().map(|r| r.phase(Phase::Inference)).collect();
    let comb: Vec<_> = reports.iter().map(|r| r.phase(Phase::Combination)).collect();

    let same_inference = inf.iter().all(|p| p.kernel_evals == 500 * 60);
    let exact_combination = reports.iter().zip(&comb).all(|(r, p)| p.kernel_evals == (r.n * 60) as u64);
    let t: Vec<f64> = inf.iter().map(|p| p.seconds).collect();
    let (lo, hi) = t.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    let spread = (hi - lo) / lo;
    let rising = comb.windows(2).all(|w| w[1].seconds > w[0].seconds);
    let secs = start.elapsed().as_secs_f64();
    let msg = format!(
        "(a) inference evals {:?} (b) combination evals {:?} (c) inference s {t:.5?} spread {:.1}%, combination s {:?}; {secs:.1}s",
        inf.iter().map(|p| p.kernel_evals).collect::<Vec<_>>(),
        comb.iter().map(|p| p.kernel_evals).collect::<Vec<_>>(),
        100.0 * spread,
        comb.iter().map(|p| format!("{:.4}", p.seconds)).collect::<Vec<_>>(),
    );
    if same_inference && exact_combination && spread < 0.25 && rising && secs < 180.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_7() -> Outcome {
    let (truth, pred) = ([0, 0, 1, 1], [0, 1, 1, 1]);
    let f1 = eval::macro_f1(&pred, &truth, 2).unwrap();
    let acc = eval::accuracy(&pred, &truth).unwrap();
    let msg = format!("macro-F1 {f1}, accuracy {acc}");
    if (f1 - 11.0 / 15.0).abs() <= 1e-12 && acc == 0.75 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (m, c) = (4, 3);
    let grid = |rng: &mut ChaCha8Rng| {
        let data = (0..m * c).map(|_| [-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0][rng.random_range(0..4)]).collect();
        SolutionMatrix::new(Matrix::new(m, c, data).unwrap()).unwrap()
    };
    let (t1, t2) = (grid(&mut rng), grid(&mut rng));
    let combo = combine(&[t1, t2.clone()], &[0.5, 0.9], &CombineConfig::default()).unwrap();
    if combo.weights != [0.0, 1.0] {
        return Err(format!("weights {:?}", combo.weights));
    }
    let expect = t2.tau().scaled(0.5);
    if combo.tau_bar != expect {
        return Err("tau_bar differs from T2 / S".into());
    }
    let support = gaussian_matrix(&mut rng, m, 2);
    let model = TrainedModel::new(support, combo.tau_bar, 1.0, c).unwrap();
    let x = gaussian_matrix(&mut rng, 200, 2);
    let base = model.predict(&x).unwrap();
    for lambda in [0.1, 1.0, 10.0] {
        if model.scaled(lambda).predict(&x).unwrap() != base {
            return Err(format!("predictions change under scaling by {lambda}"));
        }
    }
    Ok(format!("weights {:?}, tau_bar = T2/2, argmax invariant for 0.1, 1, 10", combo.weights))
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.csv");
    qmsvm::data::write_csv(&blobs(600, &BlobsConfig::default(), 9).unwrap(), &data).unwrap();
    let run = |name: &str| {
        let model = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_qmsvm"))
            .args(["train", data.to_str().unwrap(), "--model", model.to_str().unwrap()])
            .args(["--m", "30", "--seed", "42", "--sampler", "sa"])
            .env_remove("QMSVM_CONFIG")
            .output()
            .unwrap();
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        Ok(std::fs::read(model).unwrap())
    };
    let (a, b) = (run("a.model")?, run("b.model")?);
    if a == b {
        Ok(format!("two seeded runs wrote identical {}-byte model files", a.len()))
    } else {
        Err("model files differ".into())
    }
}

fn main() -> ExitCode {
    // `cargo test -- <filter>` passes arguments through; run everything regardless
    let criteria: [Criterion; 9] = [
        ("QUBO energy matches objective plus penalty", criterion_1),
        ("binary encoding grid", criterion_2),
        ("annealer finds exact ground state", criterion_3),
        ("large penalty enforces row sums", criterion_4),
        ("desk-scale blobs accuracy", criterion_5),
        ("scaling counters and timing", criterion_6),
        ("metric oracles", criterion_7),
        ("combination semantics", criterion_8),
        ("deterministic training", criterion_9),
    ];
    let mut failed = 0;
    let total = Instant::now();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(msg) => println!("criterion {}: PASS  {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {msg}", i + 1)
            }
        }
    }
    let elapsed: Duration = total.elapsed();
    println!("acceptance: {} passed, {failed} failed in {:.1}s", criteria.len() - failed, elapsed.as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
