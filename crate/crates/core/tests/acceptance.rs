//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero when any
//! criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;

use gfmfr_core::client::{
    dis_loss, rec_loss, ClientState, ClientUpdate, KlDirection, PredictorParams, PreferenceSignal,
    SharedParams, UserInit,
};
use gfmfr_core::dataio::{generate_synthetic, leave_one_out_split, ModalityFeatures, SplitDataset, SyntheticSpec};
use gfmfr_core::engine::{output, run_experiment, ExperimentConfig, ExperimentReport, Grouping, Method};
use gfmfr_core::evalreport::{account_efficiency, hr_at_k, ndcg_at_k, rank_from_scores};
use gfmfr_core::numerics::{finite_diff_grad, max_relative_error, xavier_init, Matrix, ParamSet};
use gfmfr_core::rng::rng_from_seed;
use gfmfr_core::server::{agg_loss, aggregate, aggregation_weights, cluster_clients, FusionModule, KMeansParams};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn random_client(seed: u64, m: usize, d: usize, h: usize) -> ClientState {
    let mut rng = rng_from_seed(seed);
    let mut shared = SharedParams::init(m, d, h, seed).unwrap();
    shared.item_embeddings.scale(4.0);
    shared.predictor.w1.scale(2.0);
    for b in &mut shared.predictor.b1 {
        *b = rng.random_range(-0.3..0.3);
    }
    shared.predictor.b2 = rng.random_range(-0.5..0.5);
    let mut st = ClientState::with_init(0, &shared, vec![0, 1, 2], UserInit::Xavier, seed ^ 7).unwrap();
    for u in &mut st.user_embedding {
        *u = rng.random_range(-1.5..1.5);
    }
    st.group_id = Some(0);
    st
}

fn client_grad_error<F>(st: &ClientState, f: F) -> f64
where
    F: Fn(&ClientState) -> (f64, ParamSet),
{
    let (_, analytic) = f(st);
    let numeric = finite_diff_grad(
        |p: &ParamSet| {
            let mut s = st.clone();
            s.load_param_set(p);
            f(&s).0
        },
        &st.to_param_set(),
        1e-5,
    )
    .unwrap();
    max_relative_error(&analytic, &numeric)
}

fn random_features(seed: u64, k: usize, m: usize, d1: usize) -> ModalityFeatures {
    let mods = (0..k).map(|i| xavier_init(m, d1, seed * 31 + i as u64).unwrap()).collect();
    ModalityFeatures::new(mods).unwrap()
}

fn criterion_1() -> Outcome {
    let (m, d, h, k) = (10, 8, 4, 2);
    let start = Instant::now();
    let mut worst = [0.0f64; 3];
    for seed in 0..20u64 {
        let mut rng = rng_from_seed(1000 + seed);
        let st = random_client(seed, m, d, h);
        let pos: Vec<usize> = (0..3).map(|_| rng.random_range(0..m)).collect();
        let neg: Vec<usize> = (0..4).map(|_| rng.random_range(0..m)).collect();
        let e = client_grad_error(&st, |s| {
            let l = rec_loss(s, &pos, &neg).unwrap();
            (l.loss, l.grads.to_param_set())
        });
        worst[0] = worst[0].max(e);

        let probs: Vec<f64> = (0..m).map(|_| rng.random_range(0.02..0.98)).collect();
        let sig = PreferenceSignal::from_probs(&probs);
        let dir = if seed % 2 == 0 { KlDirection::GroupToLocal } else { KlDirection::LocalToGroup };
        let batch: Vec<usize> = (0..5).map(|_| rng.random_range(0..m)).collect();
        let e = client_grad_error(&st, |s| {
            let l = dis_loss(s, &sig, &batch, dir).unwrap();
            (l.loss, l.grads.to_param_set())
        });
        worst[1] = worst[1].max(e);

        let f = random_features(seed, k, m, 6);
        let heads = 1 + (seed as usize % 2);
        let module = FusionModule::init(&f, d, 3, heads, seed + 50).unwrap();
        let eg = xavier_init(2, 3, seed + 60).unwrap();
        let targets = vec![xavier_init(m, d, seed + 70).unwrap(), xavier_init(m, d, seed + 80).unwrap()];
        let (_, analytic) = agg_loss(&module, &eg, &f, &targets).unwrap();
        let numeric = finite_diff_grad(
            |p| {
                let (md, e) = module.from_param_set(p);
                agg_loss(&md, &e, &f, &targets).unwrap().0
            },
            &module.to_param_set(&eg),
            1e-5,
        )
        .unwrap();
        worst[2] = worst[2].max(max_relative_error(&analytic, &numeric));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst.iter().all(|&e| e < 1e-4) && secs < 30.0;
    outcome(
        pass,
        format!(
            "20 instances each, max rel err rec {:.2e} dis {:.2e} agg {:.2e}, {secs:.2}s",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut worst_value = 0.0f64;
    let mut worst_sum = 0.0f64;
    for seed in 0..100u64 {
        let mut rng = rng_from_seed(seed);
        let (m, d, h) = (rng.random_range(1..8), rng.random_range(1..5), rng.random_range(1..4));
        let n = rng.random_range(1..10);
        let updates: Vec<ClientUpdate> = (0..n)
            .map(|u| {
                let item_embeddings =
                    Matrix::from_vec(m, d, (0..m * d).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
                let flat: Vec<f64> = (0..d * h + 2 * h + 1).map(|_| rng.random_range(-2.0..2.0)).collect();
                ClientUpdate {
                    user_id: u,
                    item_embeddings,
                    predictor: PredictorParams::from_flat(d, h, &flat).unwrap(),
                    sample_count: rng.random_range(1..50),
                }
            })
            .collect();
        let got = aggregate(&updates).unwrap();
        let alpha = aggregation_weights(&updates).unwrap();
        worst_sum = worst_sum.max((alpha.iter().sum::<f64>() - 1.0).abs());

        let total: f64 = updates.iter().map(|u| u.sample_count as f64).sum();
        let mut e = vec![0.0; m * d];
        let mut p = vec![0.0; d * h + 2 * h + 1];
        for u in &updates {
            let w = u.sample_count as f64 / total;
            for (acc, x) in e.iter_mut().zip(u.item_embeddings.as_slice()) {
                *acc += w * x;
            }
            for (acc, x) in p.iter_mut().zip(u.predictor.flatten()) {
                *acc += w * x;
            }
        }
        for (a, b) in got.item_embeddings.as_slice().iter().zip(&e) {
            worst_value = worst_value.max((a - b).abs());
        }
        for (a, b) in got.predictor.flatten().iter().zip(&p) {
            worst_value = worst_value.max((a - b).abs());
        }
    }
    outcome(
        worst_value < 1e-12 && worst_sum < 1e-12,
        format!("100 sets, max |diff| {worst_value:.2e}, max |sum alpha - 1| {worst_sum:.2e}"),
    )
}

fn sse(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for c in 0..2 {
        let members: Vec<&Vec<f64>> = points.iter().zip(labels).filter(|(_, &l)| l == c).map(|(p, _)| p).collect();
        if members.is_empty() {
            continue;
        }
        let dim = members[0].len();
        let centroid: Vec<f64> =
            (0..dim).map(|j| members.iter().map(|p| p[j]).sum::<f64>() / members.len() as f64).collect();
        for p in members {
            total += p.iter().zip(&centroid).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
    }
    total
}

fn same_partition(a: &[usize], b: &[usize]) -> bool {
    (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

fn criterion_3() -> Outcome {
    let mut recovered = 0;
    for seed in 0..50u64 {
        let mut rng = rng_from_seed(5000 + seed);
        let predictors: Vec<PredictorParams> = (0..4)
            .map(|_| {
                let flat: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
                PredictorParams::from_flat(1, 1, &flat).unwrap()
            })
            .collect();
        let points: Vec<Vec<f64>> = predictors.iter().map(|p| p.flatten()).collect();
        let mut best: Option<(f64, Vec<usize>)> = None;
        // Point 0 stays in cluster 0; the other three enumerate every split.
        for mask in 0..8usize {
            let labels: Vec<usize> = std::iter::once(0).chain((0..3).map(|i| (mask >> i) & 1)).collect();
            if !labels.contains(&1) {
                continue;
            }
            let s = sse(&points, &labels);
            if best.as_ref().is_none_or(|(b, _)| s < *b) {
                best = Some((s, labels));
            }
        }
        let refs: Vec<&PredictorParams> = predictors.iter().collect();
        let out = cluster_clients(&refs, 2, None, &KMeansParams::default(), seed).unwrap();
        if same_partition(&out.labels, &best.unwrap().1) {
            recovered += 1;
        }
    }
    outcome(recovered == 50, format!("{recovered}/50 optimal partitions recovered"))
}

struct Plant {
    split: SplitDataset,
    features: ModalityFeatures,
}

fn plant(seed: u64) -> Plant {
    let spec = SyntheticSpec { seed, ..SyntheticSpec::default() };
    let data = generate_synthetic(&spec).unwrap();
    Plant {
        split: leave_one_out_split(&data.store).unwrap(),
        features: data.features,
    }
}

fn plant_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        rounds: 100,
        groups: 4,
        local_epochs: 5,
        sample_ratio: 0.2,
        top_k: 50,
        eval_every: 100,
        seed,
        ..ExperimentConfig::default()
    }
}

fn run(p: &Plant, cfg: &ExperimentConfig) -> ExperimentReport {
    run_experiment(cfg, &p.split, &p.features).unwrap()
}

fn criterion_4() -> Outcome {
    let p = plant(1);
    let mut cfg = plant_config(1);
    cfg.rounds = 30;
    cfg.eval_every = 1;
    cfg.lambda_base = 0.0;
    cfg.ldp_delta = 0.0;
    let g = run(&p, &cfg);
    cfg.method = Method::Backbone;
    let b = run(&p, &cfg);
    let bits = |r: &ExperimentReport| -> Vec<(u64, u64)> {
        r.metrics.rows.iter().map(|m| (m.hr_at_k.to_bits(), m.ndcg_at_k.to_bits())).collect()
    };
    let identical = bits(&g) == bits(&b) && g.metrics.rows.len() == 30;
    outcome(identical, format!("30 rounds, trajectories bit-identical: {identical}"))
}

fn mean_churn(r: &ExperimentReport, rounds: std::ops::RangeInclusive<usize>) -> f64 {
    let v: Vec<f64> = r.traces.iter().filter(|t| rounds.contains(&t.round)).filter_map(|t| t.churn_rate()).collect();
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

fn criteria_5_6_7() -> [Outcome; 3] {
    let mut lift_ok = 0;
    let mut order_ok = 0;
    let mut churn_ok = 0;
    let mut timed = 0.0;
    let mut lift_detail = Vec::new();
    let mut order_detail = Vec::new();
    let mut churn_detail = Vec::new();
    for seed in 1..=3u64 {
        let p = plant(seed);
        let cfg = plant_config(seed);
        let start = Instant::now();
        let g = run(&p, &cfg);
        let b = run(&p, &ExperimentConfig { method: Method::Backbone, ..cfg.clone() });
        timed += start.elapsed().as_secs_f64();
        let random = run(&p, &ExperimentConfig { grouping: Grouping::Random, ..cfg.clone() });
        let single = run(&p, &ExperimentConfig { grouping: Grouping::Single, ..cfg.clone() });

        let lift = g.final_hr() / b.final_hr() - 1.0;
        if lift >= 0.10 {
            lift_ok += 1;
        }
        lift_detail.push(format!("s{seed} {:.3}/{:.3} ({:+.1}%)", g.final_hr(), b.final_hr(), 100.0 * lift));

        if g.final_hr() >= random.final_hr() && g.final_hr() >= single.final_hr() {
            order_ok += 1;
        }
        order_detail.push(format!(
            "s{seed} km {:.3} rnd {:.3} one {:.3}",
            g.final_hr(),
            random.final_hr(),
            single.final_hr()
        ));

        let (early, late) = (mean_churn(&g, 1..=10), mean_churn(&g, 91..=100));
        if late < early {
            churn_ok += 1;
        }
        churn_detail.push(format!("s{seed} {early:.3}->{late:.3}"));
    }
    [
        outcome(
            lift_ok == 3 && timed < 300.0,
            format!("HR@50 gfmfr/backbone {}, paired runs {timed:.0}s", lift_detail.join(", ")),
        ),
        outcome(order_ok >= 2, format!("{order_ok}/3 seeds ordered: {}", order_detail.join(", "))),
        outcome(
            churn_ok == 3,
            format!("mean churn rounds 1-10 -> 91-100: {}", churn_detail.join(", ")),
        ),
    ]
}

fn criterion_8() -> Outcome {
    let p = plant(1);
    let hr: Vec<f64> = (0..=5)
        .map(|d| run(&p, &ExperimentConfig { ldp_delta: d as f64, ..plant_config(1) }).final_hr())
        .collect();
    let inversions = hr.windows(2).filter(|w| w[1] > w[0]).count();
    let pass = hr[5] < hr[0] && inversions <= 1;
    let seq: Vec<String> = hr.iter().map(|h| format!("{h:.3}")).collect();
    outcome(pass, format!("HR@50 over delta 0..5: {} ({inversions} inversions)", seq.join(" ")))
}

fn oracle_rank(scores: &[f64], test: usize, excluded: &[usize]) -> usize {
    let mut candidates: Vec<usize> = (0..scores.len()).filter(|i| *i == test || !excluded.contains(i)).collect();
    candidates.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    1 + candidates.iter().position(|&i| i == test).unwrap()
}

fn criterion_9() -> Outcome {
    let mut mismatches = 0;
    for seed in 0..1000u64 {
        let mut rng = rng_from_seed(90_000 + seed);
        let m = rng.random_range(1..60);
        // Coarse scores so ties occur.
        let scores: Vec<f64> = (0..m).map(|_| rng.random_range(0..8) as f64 / 4.0).collect();
        let test = rng.random_range(0..m);
        let excluded: Vec<usize> = (0..m).filter(|&i| i != test && rng.random_bool(0.3)).collect();
        let k = rng.random_range(1..20);
        let rank = rank_from_scores(&scores, test, &excluded);
        let expect = oracle_rank(&scores, test, &excluded);
        let hr = if expect <= k { 1.0 } else { 0.0 };
        let ndcg = if expect <= k { 1.0 / ((expect + 1) as f64).log2() } else { 0.0 };
        if rank != expect || hr_at_k(rank, k) != hr || (ndcg_at_k(rank, k) - ndcg).abs() > 1e-15 {
            mismatches += 1;
        }
    }
    let exact = ndcg_at_k(1, 10) == 1.0 && ndcg_at_k(3, 10) == 0.5;
    outcome(
        mismatches == 0 && exact,
        format!("1000 instances, {mismatches} mismatches, NDCG(1)=1 and NDCG(3)=0.5 exact: {exact}"),
    )
}

fn criterion_10() -> Outcome {
    let m = 500;
    let base = ExperimentConfig::default();
    let g = account_efficiency(&base, m, &[16, 16], &[]);
    let b = account_efficiency(&ExperimentConfig { method: Method::Backbone, ..base.clone() }, m, &[16, 16], &[]);
    let overhead = g.download_bytes_per_client - b.download_bytes_per_client;
    let overhead_ok = overhead == m * 2 * 4 && g.upload_bytes_per_client == b.upload_bytes_per_client;

    let mut storage = Vec::new();
    for k in 1..=4 {
        for d1 in [4, 16, 128] {
            let cfg = ExperimentConfig { groups: k, ..base.clone() };
            storage.push(account_efficiency(&cfg, m, &vec![d1; k], &[]).client_storage_bytes);
        }
    }
    let invariant = storage.iter().all(|&s| s == storage[0]);
    outcome(
        overhead_ok && invariant,
        format!(
            "download overhead {overhead} bytes (expected {}), storage {} bytes invariant over k and d1: {invariant}",
            m * 8,
            storage[0]
        ),
    )
}

fn outputs_with_threads(threads: usize, cfg: &ExperimentConfig, p: &Plant) -> Vec<Vec<u8>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let report = pool.install(|| run(p, cfg));
    let dir = tempfile::tempdir().unwrap();
    output::write_outputs(dir.path(), &report).unwrap();
    ["metrics.csv", "trace.csv", "groups.csv", "efficiency.csv"]
        .iter()
        .map(|f| std::fs::read(dir.path().join(f)).unwrap())
        .collect()
}

fn criterion_11() -> Outcome {
    let p = plant(2);
    let cfg = ExperimentConfig { rounds: 15, eval_every: 5, ldp_delta: 1.0, ..plant_config(2) };
    let replay = ExperimentConfig::from_text(&cfg.to_text()).unwrap();
    let a = outputs_with_threads(1, &cfg, &p);
    let b = outputs_with_threads(4, &replay, &p);
    let c = outputs_with_threads(1, &replay, &p);
    let same = a == b && a == c;
    outcome(same, format!("4 CSVs byte-identical across 1/4/1 threads: {same}"))
}

fn main() -> ExitCode {
    let mut passed = 0;
    let mut failed = 0;
    let mut report = |n: usize, o: Outcome| {
        println!("criterion {n:>2}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if o.pass {
            passed += 1;
        } else {
            failed += 1;
        }
    };
    report(1, criterion_1());
    report(2, criterion_2());
    report(3, criterion_3());
    report(4, criterion_4());
    for (i, o) in criteria_5_6_7().into_iter().enumerate() {
        report(5 + i, o);
    }
    report(8, criterion_8());
    report(9, criterion_9());
    report(10, criterion_10());
    report(11, criterion_11());

    println!("{passed} passed, {failed} failed");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
