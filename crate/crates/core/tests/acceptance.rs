//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::Instant;

use homctx::geometry::{generate_candidates, CandidateGrid, ProbabilityMap};
use homctx::harness::instances::{random_instance, random_training_frame, InstanceSizes};
use homctx::harness::{
    downsizing_curve, evaluate, fit_mode, run_oracle_suite, synth_generate, to_training_set,
    AblationSpec, Mode, OracleConfig, SynthConfig, Task,
};
use homctx::inference::FrameInference;
use homctx::learning::{
    argmax_labels, gradient, log_likelihood, marginalize_context, most_probable_combinations,
    ContextAxis, LearningConfig, ReduceMode,
};
use homctx::potentials::{assignment_potential, PotentialTerms};
use homctx::{
    apply_offsets, compute_offsets, iou, total_potential, BoundingBox, Dims, InferenceConfig,
    ModelParams, OffsetVector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

// 1 -------------------------------------------------------------------------

fn potential_additivity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let sizes = InstanceSizes::default();
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..10_000 {
        let inst = random_instance(&mut rng, &sizes, false);
        let a = inst.random_assignment(&mut rng);
        let s = a.to_state(&inst.evidence);
        let t = PotentialTerms::evaluate(&inst.params, &s, &inst.evidence).unwrap();
        let sum = t.functional + t.physical + t.spatial + t.grasp + t.object + t.action;
        let total = total_potential(&inst.params, &s, &inst.evidence).unwrap();
        let fast = assignment_potential(&inst.params, &inst.evidence, &a);
        for v in [sum, fast] {
            let rel = (v - total).abs() / total.abs().max(f64::MIN_POSITIVE);
            worst = worst.max(if v == total { 0.0 } else { rel });
            if !rel_close(v, total, 1e-12) {
                failures += 1;
            }
        }
    }
    outcome(
        failures == 0,
        format!("10000 trials, {failures} failures, worst relative diff {worst:.1e}"),
    )
}

// 2 -------------------------------------------------------------------------

fn raster_ellipse(map: &mut ProbabilityMap, c: (f64, f64), a: f64, b: f64, angle: f64) {
    let (cs, sn) = (angle.cos(), angle.sin());
    for y in 0..map.height() {
        for x in 0..map.width() {
            let dx = x as f64 + 0.5 - c.0;
            let dy = y as f64 + 0.5 - c.1;
            let u = dx * cs + dy * sn;
            let v = -dx * sn + dy * cs;
            if (u / a).powi(2) + (v / b).powi(2) <= 1.0 {
                map.set(x, y, 1.0);
            }
        }
    }
}

/// Bounding box of the part of the continuous ellipse within `1.5·2b` of the
/// major-axis end that is higher in the image, by dense sampling.
fn truncated_ellipse_box(c: (f64, f64), a: f64, b: f64, angle: f64) -> (f64, f64, f64, f64) {
    let (cs, sn) = (angle.cos(), angle.sin());
    // the end with smaller y
    let sign = if sn * a > 0.0 { -1.0 } else { 1.0 };
    let keep_from = a - 1.5 * 2.0 * b;
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    let n = 2000;
    for i in 0..=n {
        let u = -a + 2.0 * a * i as f64 / n as f64;
        if u < keep_from {
            continue;
        }
        let half = b * (1.0 - (u / a).powi(2)).max(0.0).sqrt();
        for v in [-half, half] {
            let (uu, vv) = (sign * u, v);
            let x = c.0 + uu * cs - vv * sn;
            let y = c.1 + uu * sn + vv * cs;
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    (x0, y0, x1, y1)
}

fn geometry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut round_trip_worst: f64 = 0.0;
    let mut iou_ok = true;
    for _ in 0..10_000 {
        let mut bx = || BoundingBox {
            cx: rng.random_range(-500.0..500.0),
            cy: rng.random_range(-500.0..500.0),
            w: rng.random_range(1.0..300.0),
            h: rng.random_range(1.0..300.0),
        };
        let (hand, obj, other) = (bx(), bx(), bx());
        let back = apply_offsets(&hand, &compute_offsets(&hand, &obj));
        for (p, q) in [
            (back.cx, obj.cx),
            (back.cy, obj.cy),
            (back.w, obj.w),
            (back.h, obj.h),
        ] {
            round_trip_worst = round_trip_worst.max((p - q).abs() / q.abs().max(1.0));
        }
        let off = OffsetVector {
            nx: rng.random_range(-2.0..2.0),
            ny: rng.random_range(-2.0..2.0),
            nw: rng.random_range(0.1..3.0),
            nh: rng.random_range(0.1..3.0),
        };
        let o2 = compute_offsets(&hand, &apply_offsets(&hand, &off));
        for (p, q) in [
            (o2.nx, off.nx),
            (o2.ny, off.ny),
            (o2.nw, off.nw),
            (o2.nh, off.nh),
        ] {
            round_trip_worst = round_trip_worst.max((p - q).abs() / q.abs().max(1.0));
        }
        let (ab, ba) = (iou(&hand, &other), iou(&other, &hand));
        iou_ok &= ab == ba && (0.0..=1.0).contains(&ab) && iou(&hand, &hand) == 1.0;
    }
    let reference = BoundingBox {
        cx: 100.0,
        cy: 80.0,
        w: 40.0,
        h: 60.0,
    };
    let grid_count = generate_candidates(&reference, &CandidateGrid::default()).len();

    let mut ellipse_worst: f64 = 0.0;
    let cases = [
        ((100.0, 130.0), 60.0, 20.0, std::f64::consts::FRAC_PI_2),
        ((120.0, 110.0), 45.0, 15.0, std::f64::consts::FRAC_PI_2),
        ((100.0, 100.0), 60.0, 20.0, 1.2),
        ((110.0, 100.0), 54.0, 18.0, 2.0),
        ((90.0, 120.0), 48.0, 16.0, 1.4),
    ];
    for (c, a, b, angle) in cases {
        let mut map = ProbabilityMap::zeros(220, 220).unwrap();
        raster_ellipse(&mut map, c, a, b, angle);
        let boxes = homctx::geometry::extract_reference_hand_boxes(&map, 0.5, 0.001, 0.5).unwrap();
        if boxes.len() != 1 {
            ellipse_worst = f64::INFINITY;
            continue;
        }
        let got = boxes[0].corners();
        let want = truncated_ellipse_box(c, a, b, angle);
        for (p, q) in [
            (got.0, want.0),
            (got.1, want.1),
            (got.2, want.2),
            (got.3, want.3),
        ] {
            ellipse_worst = ellipse_worst.max((p - q).abs());
        }
    }
    let pass = round_trip_worst <= 1e-9 && iou_ok && grid_count == 27 && ellipse_worst <= 2.0;
    outcome(
        pass,
        format!(
            "offset round trip {round_trip_worst:.1e}, IoU symmetric/bounded {iou_ok}, \
             grid {grid_count} boxes, ellipse max corner error {ellipse_worst:.2} px"
        ),
    )
}

// 3 -------------------------------------------------------------------------

fn inference_oracle() -> Outcome {
    let report = run_oracle_suite(&OracleConfig {
        count: 200,
        sizes: InstanceSizes::default(),
        seed: 3,
        ..OracleConfig::default()
    })
    .unwrap();
    outcome(
        report.match_fraction >= 0.95 && report.monotone_violations == 0,
        format!(
            "{}/200 within 1% ({} exact), max gap {:.3}, monotone violations {}",
            report.matched, report.exact, report.max_relative_gap, report.monotone_violations
        ),
    )
}

// 4 -------------------------------------------------------------------------

fn learning() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let config = LearningConfig {
        l2_strength: 0.05,
        alpha_smoothing: 0.5,
        ..LearningConfig::default()
    };
    let mut fd_worst: f64 = 0.0;
    let mut monotone = true;
    for _ in 0..50 {
        let dims = Dims {
            actions: rng.random_range(1..=3),
            grasps: rng.random_range(1..=3),
            attributes: rng.random_range(1..=3),
        };
        let frames: Vec<_> = (0..6)
            .map(|_| random_training_frame(&mut rng, dims))
            .collect();
        let mut p = ModelParams::zeros(dims);
        for v in p.values_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let (_, grad) = gradient(&p, &frames, &config).unwrap();
        let h = 1e-5;
        for i in 0..p.values().len() {
            let mut plus = p.clone();
            plus.values_mut()[i] += h;
            let mut minus = p.clone();
            minus.values_mut()[i] -= h;
            let num = (log_likelihood(&plus, &frames, &config).unwrap()
                - log_likelihood(&minus, &frames, &config).unwrap())
                / (2.0 * h);
            let denom = grad[i].abs().max(num.abs()).max(1.0);
            fd_worst = fd_worst.max((num - grad[i]).abs() / denom);
        }
        let fitted = homctx::learning::fit(&frames, dims, &config).unwrap();
        monotone &= fitted.trace.windows(2).all(|w| w[1] >= w[0]);
    }

    let synth = SynthConfig {
        sharpness: 5.0,
        evidence_noise: 0.1,
        train_frames: 2500,
        test_frames: 0,
        seed: 4,
        ..SynthConfig::default()
    };
    let data = synth_generate(&synth).unwrap();
    let all = to_training_set(&data.train).unwrap();
    let (train, held_out) = all.split_at(2000);
    let fitted = fit_mode(
        train,
        data.label_space.dims(),
        Mode::Full,
        &LearningConfig::default(),
    )
    .unwrap();
    let agree = held_out
        .iter()
        .filter(|f| {
            argmax_labels(&fitted.params, f).unwrap() == argmax_labels(&data.generating, f).unwrap()
        })
        .count();
    let agreement = agree as f64 / held_out.len() as f64;
    outcome(
        fd_worst <= 1e-5 && monotone && agreement >= 0.90,
        format!(
            "FD worst relative {fd_worst:.1e}, traces monotone {monotone}, \
             argmax agreement {:.1}% ({agree}/{})",
            100.0 * agreement,
            held_out.len()
        ),
    )
}

// 5 and 6 -------------------------------------------------------------------

const SEEDS: [u64; 5] = [101, 102, 103, 104, 105];
/// One-sided 95% Student t critical value for 4 degrees of freedom.
const T_CRIT_DF4: f64 = 2.132;

/// Per seed: (full − evidence-only) accuracy for each task, per downsizing
/// fraction.
type Gaps = Vec<Vec<[f64; 3]>>;

fn gaps_at(fractions: &[f64]) -> Gaps {
    let spec = AblationSpec {
        modes: vec![Mode::EvidenceOnly, Mode::Full],
        fractions: fractions.to_vec(),
        ..AblationSpec::default()
    };
    SEEDS
        .iter()
        .map(|&seed| {
            let synth = SynthConfig {
                seed,
                ..SynthConfig::default()
            };
            downsizing_curve(
                &synth,
                &spec,
                &LearningConfig::default(),
                &InferenceConfig::default(),
            )
            .unwrap()
            .iter()
            .map(|p| Task::ALL.map(|t| p.gap(t).unwrap()))
            .collect()
        })
        .collect()
}

fn context_benefit(full_data: &mut Option<Gaps>) -> Outcome {
    let gaps = gaps_at(&[0.0]);
    let mut pass = true;
    let mut parts = Vec::new();
    for (ti, task) in Task::ALL.iter().enumerate() {
        let d: Vec<f64> = gaps.iter().map(|g| g[0][ti]).collect();
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let t = if var == 0.0 {
            if mean > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        } else {
            mean / (var / n).sqrt()
        };
        let min = d.iter().copied().fold(f64::INFINITY, f64::min);
        pass &= min >= 0.0 && t > T_CRIT_DF4;
        parts.push(format!(
            "{} mean gain {:+.2}pp (min {:+.2}pp) t={:.2}",
            task.name(),
            100.0 * mean,
            100.0 * min,
            t
        ));
    }
    *full_data = Some(gaps);
    outcome(pass, parts.join("; "))
}

/// Reuses the fraction-0 gaps of criterion 5, which used the same setup.
fn robustness_trend(full_data: &Gaps) -> Outcome {
    let reduced = gaps_at(&[0.2, 0.4, 0.6]);
    let gaps: Gaps = full_data
        .iter()
        .zip(reduced)
        .map(|(f, r)| std::iter::once(f[0]).chain(r).collect())
        .collect();
    let n = gaps.len() as f64;
    let mean_gap = |f: usize, t: usize| gaps.iter().map(|g| g[f][t]).sum::<f64>() / n;
    let mut pass = true;
    let mut parts = Vec::new();
    for task in [Task::Grasp, Task::Attribute] {
        let ti = Task::ALL.iter().position(|&t| t == task).unwrap();
        let curve: Vec<String> = (0..4)
            .map(|f| format!("{:+.2}", 100.0 * mean_gap(f, ti)))
            .collect();
        pass &= mean_gap(3, ti) >= mean_gap(0, ti);
        parts.push(format!(
            "{} mean gap pp at fractions 0/.2/.4/.6: {}",
            task.name(),
            curve.join(" ")
        ));
    }
    outcome(pass, parts.join("; "))
}

// 7 -------------------------------------------------------------------------

fn context_export() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut exact = true;
    let mut lse_worst: f64 = 0.0;
    for _ in 0..50 {
        let dims = Dims {
            actions: rng.random_range(1..=4),
            grasps: rng.random_range(1..=5),
            attributes: rng.random_range(1..=4),
        };
        let (g1, o1) = (dims.grasps + 1, dims.attributes + 1);
        let mut p = ModelParams::zeros(dims);
        for k in 0..dims.actions {
            for i in 0..g1 {
                for j in 0..g1 {
                    for m in 0..o1 {
                        for n in 0..o1 {
                            p.set_alpha(k, i, j, m, n, rng.random_range(-20..=20) as f64);
                        }
                    }
                }
            }
        }
        for axis in ContextAxis::ALL {
            let (rows, cols) = match axis {
                ContextAxis::ActionGrasp => (dims.actions, g1),
                ContextAxis::ActionAttribute => (dims.actions, o1),
                ContextAxis::GraspAttribute => (g1, o1),
            };
            let sum = marginalize_context(&p, axis, ReduceMode::Sum);
            let lse = marginalize_context(&p, axis, ReduceMode::LogSumExp);
            for r in 0..rows {
                for c in 0..cols {
                    // each side's label pair contributes half of every entry
                    let (mut s, mut e) = (0.0, 0.0);
                    for k in 0..dims.actions {
                        for i in 0..g1 {
                            for j in 0..g1 {
                                for m in 0..o1 {
                                    for n in 0..o1 {
                                        let v = p.alpha(k, i, j, m, n);
                                        let hits = [(k, i, m), (k, j, n)]
                                            .iter()
                                            .filter(|&&(kk, g, a)| match axis {
                                                ContextAxis::ActionGrasp => (kk, g) == (r, c),
                                                ContextAxis::ActionAttribute => (kk, a) == (r, c),
                                                ContextAxis::GraspAttribute => (g, a) == (r, c),
                                            })
                                            .count()
                                            as f64;
                                        s += 0.5 * hits * v;
                                        e += 0.5 * hits * v.exp();
                                    }
                                }
                            }
                        }
                    }
                    exact &= sum.get(r, c) == s;
                    let want = e.ln();
                    let got = lse.get(r, c);
                    let err = if want.is_infinite() && got == want {
                        0.0
                    } else {
                        (got - want).abs() / want.abs().max(1.0)
                    };
                    lse_worst = lse_worst.max(err);
                }
            }
        }
        for k in 0..dims.actions {
            let mut all = Vec::new();
            for i in 0..g1 {
                for j in 0..g1 {
                    for m in 0..o1 {
                        for n in 0..o1 {
                            all.push((p.alpha(k, i, j, m, n), [i, j], [m, n]));
                        }
                    }
                }
            }
            // descending by value, ties in enumeration order
            all.sort_by(|a, b| b.0.total_cmp(&a.0));
            let top = most_probable_combinations(&p, k, 7).unwrap();
            exact &= top.len() == 7.min(all.len());
            for (c, want) in top.iter().zip(&all) {
                exact &= (c.value, c.grasp, c.attribute) == *want;
            }
        }
    }
    outcome(
        exact && lse_worst <= 1e-12,
        format!("sum tables and top-k exact {exact}, log-sum-exp worst relative {lse_worst:.1e}"),
    )
}

// 8 -------------------------------------------------------------------------

fn performance() -> Outcome {
    let synth = SynthConfig {
        actions: 10,
        grasps: 13,
        attributes: 9,
        train_frames: 0,
        test_frames: 500,
        seed: 8,
        ..SynthConfig::default()
    };
    let data = synth_generate(&synth).unwrap();
    let config = InferenceConfig {
        max_iterations: 10,
        stop_on_convergence: false,
        ..InferenceConfig::default()
    };
    let params = &data.generating;
    let mut times = Vec::new();
    let mut sizes_ok = true;
    for r in data.test.iter().take(100) {
        sizes_ok &= r.evidence.left.len() == 27 || r.evidence.left.is_empty();
        let t = Instant::now();
        let fi = FrameInference::new(&r.evidence, params, &config).unwrap();
        let res = fi.run();
        times.push(t.elapsed().as_secs_f64());
        std::hint::black_box(res);
    }
    times.sort_by(f64::total_cmp);
    let median_ms = 1e3 * times[times.len() / 2];

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let t = Instant::now();
    let report = pool
        .install(|| {
            evaluate(
                params,
                &data.label_space,
                &data.test,
                &InferenceConfig::default(),
            )
        })
        .unwrap();
    let eval_s = t.elapsed().as_secs_f64();
    outcome(
        sizes_ok && median_ms < 50.0 && eval_s < 30.0 && report.predictions.len() == 500,
        format!("median single frame {median_ms:.2} ms (10 sweeps), 500-frame eval {eval_s:.2} s on 1 thread"),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, limit_s: f64, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        let pass = o.pass && secs < limit_s;
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {n} ({name}): {} [{secs:.1}s, limit {limit_s:.0}s]",
            if pass { "PASS" } else { "FAIL" },
            o.detail
        );
    };
    report(1, "potential additivity", 10.0, &mut potential_additivity);
    report(2, "geometry", 10.0, &mut geometry);
    report(3, "inference oracle", 120.0, &mut inference_oracle);
    report(4, "learning", 300.0, &mut learning);
    let mut full_data = None;
    let t5 = Instant::now();
    report(5, "context benefit", 600.0, &mut || {
        context_benefit(&mut full_data)
    });
    let t5 = t5.elapsed().as_secs_f64();
    // criterion 6 includes the time of the fraction-0 fits it reuses
    report(6, "robustness trend", 900.0 - t5, &mut || {
        robustness_trend(full_data.as_ref().expect("criterion 5 ran"))
    });
    report(7, "context export", 10.0, &mut context_export);
    report(8, "performance", f64::INFINITY, &mut performance);
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
