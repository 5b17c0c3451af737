//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Runs without the libtest harness so the summary is always printed.
//! Set `FER2013_CSV` to the full dataset file to include the real-data count.

#[path = "../../../service/tests/common/mod.rs"]
mod common;
mod service;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use fer_core::data::{
    examples_for, merge_labels, random_erase_region, read_fer2013, read_ferplus, class_histogram,
    Example, Usage, ERASE_AREA, ERASE_ASPECT,
};
use fer_core::detect::{
    detect_multiscale, evaluate_window, load_cascade_file, CascadeModel, DetectParams, IntegralImage, Rect,
};
use fer_core::model::{evaluate, loss_with_l2, ResNet, ResNetConfig, TrainConfig, Trainer};
use fer_core::pipeline::bilinear_resample;
use fer_core::tensor::{
    batchnorm_backward, batchnorm_forward, conv2d_backward, conv2d_forward, dense_backward, dense_forward,
    finite_diff_check, global_avg_pool, global_avg_pool_backward, maxpool2d, maxpool2d_backward, relu,
    relu_backward, softmax_cross_entropy, Mode,
};
use fer_core::{Rng, Tensor};

type Outcome = Result<String, String>;

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn random_tensor(shape: &[usize], rng: &mut Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.normal())
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn with_data(shape: &[usize], data: &[f64]) -> Tensor<f64> {
    Tensor::new(shape, data.to_vec()).unwrap()
}

/// Checks `d/dx <proj, f(x)>` against `analytic` by central differences.
fn layer_check(
    name: &str,
    x: &Tensor<f64>,
    analytic: &Tensor<f64>,
    f: impl Fn(&Tensor<f64>) -> f64,
    worst: &mut Vec<String>,
) -> Result<(), String> {
    let shape = x.shape().to_vec();
    let r = finite_diff_check(|p| f(&with_data(&shape, p)), x.data(), analytic.data(), 1e-5);
    worst.push(format!("{name} {:.1e}", r.max_rel_error));
    check(r.max_rel_error <= 1e-4, format!("{name}: rel err {:.2e}", r.max_rel_error))
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = Rng::new(20);
    let mut worst = Vec::new();

    for (stride, pad) in [(1, 1), (2, 1), (1, 0)] {
        let x = random_tensor(&[2, 3, 7, 6], &mut rng);
        let k = random_tensor(&[4, 3, 3, 3], &mut rng);
        let b = random_tensor(&[4], &mut rng);
        let out = conv2d_forward(&x, &k, Some(&b), stride, pad).unwrap();
        let proj = random_tensor(out.shape(), &mut rng);
        let g = conv2d_backward(&proj, &x, &k, stride, pad).unwrap();
        let tag = format!("conv s{stride}p{pad}");
        layer_check(&format!("{tag} input"), &x, &g.input, |t| dot(&proj, &conv2d_forward(t, &k, Some(&b), stride, pad).unwrap()), &mut worst)?;
        layer_check(&format!("{tag} kernel"), &k, &g.kernel, |t| dot(&proj, &conv2d_forward(&x, t, Some(&b), stride, pad).unwrap()), &mut worst)?;
        layer_check(&format!("{tag} bias"), &b, &g.bias, |t| dot(&proj, &conv2d_forward(&x, &k, Some(t), stride, pad).unwrap()), &mut worst)?;
    }

    {
        let x = random_tensor(&[3, 2, 4, 5], &mut rng);
        let gamma = Tensor::from_fn(&[2], |_| 1.0 + 0.3 * rng.normal());
        let beta = random_tensor(&[2], &mut rng);
        let bn = |x: &Tensor<f64>, g: &Tensor<f64>, b: &Tensor<f64>| {
            let (mut rm, mut rv) = (Tensor::zeros(&[2]), Tensor::full(&[2], 1.0));
            batchnorm_forward(x, g, b, &mut rm, &mut rv, Mode::Train, 0.9, 1e-5).unwrap()
        };
        let (out, cache) = bn(&x, &gamma, &beta);
        let proj = random_tensor(out.shape(), &mut rng);
        let g = batchnorm_backward(&proj, &cache, &gamma).unwrap();
        layer_check("batchnorm input", &x, &g.input, |t| dot(&proj, &bn(t, &gamma, &beta).0), &mut worst)?;
        layer_check("batchnorm gamma", &gamma, &g.gamma, |t| dot(&proj, &bn(&x, t, &beta).0), &mut worst)?;
        layer_check("batchnorm beta", &beta, &g.beta, |t| dot(&proj, &bn(&x, &gamma, t).0), &mut worst)?;
    }

    {
        // keep inputs away from the kink at 0
        let x = Tensor::from_fn(&[2, 3, 4, 4], |_| {
            let v = rng.normal();
            v + 0.1 * v.signum()
        });
        let proj = random_tensor(x.shape(), &mut rng);
        let g = relu_backward(&proj, &x).unwrap();
        layer_check("relu", &x, &g, |t| dot(&proj, &relu(t)), &mut worst)?;
    }

    {
        let x = random_tensor(&[2, 2, 6, 6], &mut rng);
        let (out, cache) = maxpool2d(&x).unwrap();
        let proj = random_tensor(out.shape(), &mut rng);
        let g = maxpool2d_backward(&proj, &cache).unwrap();
        layer_check("maxpool", &x, &g, |t| dot(&proj, &maxpool2d(t).unwrap().0), &mut worst)?;
    }

    {
        let x = random_tensor(&[2, 3, 5, 4], &mut rng);
        let proj = random_tensor(&[2, 3], &mut rng);
        let g = global_avg_pool_backward(&proj, x.shape()).unwrap();
        layer_check("global avg pool", &x, &g, |t| dot(&proj, &global_avg_pool(t).unwrap()), &mut worst)?;
    }

    {
        let x = random_tensor(&[3, 5], &mut rng);
        let w = random_tensor(&[5, 4], &mut rng);
        let b = random_tensor(&[4], &mut rng);
        let proj = random_tensor(&[3, 4], &mut rng);
        let g = dense_backward(&proj, &x, &w).unwrap();
        layer_check("dense input", &x, &g.input, |t| dot(&proj, &dense_forward(t, &w, &b).unwrap()), &mut worst)?;
        layer_check("dense weight", &w, &g.weight, |t| dot(&proj, &dense_forward(&x, t, &b).unwrap()), &mut worst)?;
        layer_check("dense bias", &b, &g.bias, |t| dot(&proj, &dense_forward(&x, &w, t).unwrap()), &mut worst)?;
    }

    for weights in [None, Some(vec![0.5, 2.0, 1.0, 1.5, 0.7, 1.1, 0.9, 3.0])] {
        let logits = random_tensor(&[5, 8], &mut rng);
        let labels = [0, 3, 7, 3, 1];
        let w = weights.as_deref();
        let g = softmax_cross_entropy(&logits, &labels, w).unwrap().grad_logits;
        let name = if w.is_some() { "weighted cross-entropy" } else { "cross-entropy" };
        layer_check(name, &logits, &g, |t| softmax_cross_entropy(t, &labels, w).unwrap().loss, &mut worst)?;
    }

    // Full-width network, train-mode batch norm, sampled parameters.
    let mut model = ResNet::<f64>::new(ResNetConfig::default(), &mut Rng::new(5)).unwrap();
    let x = Tensor::from_fn(&[2, 1, 48, 48], |_| rng.uniform());
    let labels = [2usize, 5];
    let analytic = loss_with_l2(&mut model, &x, &labels, None).unwrap();
    let wd = model.config().weight_decay as f64;
    let n_params = model.params_mut().len();
    let mut e2e_worst = 0.0f64;
    // Hundreds of thousands of ReLUs sit downstream of early parameters; a
    // larger step crosses some of their kinks and measures a different slope.
    let h = 1e-7;
    for _ in 0..20 {
        let (ti, ei, g) = {
            let params = model.params_mut();
            let ti = rng.below(n_params as u64) as usize;
            let ei = rng.below(params[ti].value.len() as u64) as usize;
            (ti, ei, params[ti].grad.data()[ei])
        };
        let loss_at = |delta: f64, model: &mut ResNet<f64>| {
            let orig = model.params_mut()[ti].value.data()[ei];
            model.params_mut()[ti].value.data_mut()[ei] = orig + delta;
            let logits = model.forward_train(&x).unwrap();
            let l = softmax_cross_entropy(&logits, &labels, None).unwrap().loss + 0.5 * wd * model.decayed_sum_squares();
            model.params_mut()[ti].value.data_mut()[ei] = orig;
            l
        };
        let numeric = (loss_at(h, &mut model) - loss_at(-h, &mut model)) / (2.0 * h);
        let rel = (g - numeric).abs() / (g.abs() + numeric.abs()).max(1e-8);
        e2e_worst = e2e_worst.max(rel);
    }
    check(e2e_worst <= 1e-3, format!("end-to-end rel err {e2e_worst:.2e}"))?;
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(120), format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} layer checks <= 1e-4, ResNet18 (loss {:.3}) 20 sampled params max rel err {e2e_worst:.1e}, {:.1}s",
        worst.len(),
        analytic.total,
        elapsed.as_secs_f64()
    ))
}

fn brute_conv(x: &Tensor<f64>, k: &Tensor<f64>, stride: usize, pad: usize) -> Vec<f64> {
    let (n, c, h, w) = x.dims4("x").unwrap();
    let (f, _, kh, kw) = k.dims4("k").unwrap();
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (w + 2 * pad - kw) / stride + 1;
    let mut out = vec![0.0; n * f * oh * ow];
    for ni in 0..n {
        for fi in 0..f {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0;
                    for ci in 0..c {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                    acc += x.data()[((ni * c + ci) * h + iy as usize) * w + ix as usize]
                                        * k.data()[((fi * c + ci) * kh + ky) * kw + kx];
                                }
                            }
                        }
                    }
                    out[((ni * f + fi) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    out
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn oracle_equivalence() -> Outcome {
    let mut rng = Rng::new(31);
    let cases = 120;
    let mut r = |lo: u64, hi: u64| lo + (rng.below(hi - lo + 1));
    let mut conv_err = 0.0f64;
    let mut pool_err = 0.0f64;
    let mut gap_err = 0.0f64;
    let mut bil_err = 0.0f64;
    for case in 0..cases {
        let mut trng = Rng::new(1000 + case);
        // conv
        let (n, c, f) = (r(1, 2) as usize, r(1, 3) as usize, r(1, 3) as usize);
        let (k, stride, pad) = (r(1, 3) as usize, r(1, 2) as usize, r(0, 1) as usize);
        let (h, w) = (r(k as u64, 9) as usize, r(k as u64, 9) as usize);
        let x = random_tensor(&[n, c, h, w], &mut trng);
        let kern = random_tensor(&[f, c, k, k], &mut trng);
        let got = conv2d_forward(&x, &kern, None, stride, pad).unwrap();
        conv_err = conv_err.max(max_abs_diff(got.data(), &brute_conv(&x, &kern, stride, pad)));

        // max pool and global average pool
        let (ph, pw) = (r(2, 9) as usize, r(2, 9) as usize);
        let x = random_tensor(&[n, c, ph, pw], &mut trng);
        let (got, _) = maxpool2d(&x).unwrap();
        let mut want = Vec::new();
        let mut means = Vec::new();
        for plane in x.data().chunks(ph * pw) {
            for oy in 0..ph / 2 {
                for ox in 0..pw / 2 {
                    let mut m = f64::NEG_INFINITY;
                    for dy in 0..2 {
                        for dx in 0..2 {
                            m = m.max(plane[(2 * oy + dy) * pw + 2 * ox + dx]);
                        }
                    }
                    want.push(m);
                }
            }
            means.push(plane.iter().sum::<f64>() / plane.len() as f64);
        }
        pool_err = pool_err.max(max_abs_diff(got.data(), &want));
        gap_err = gap_err.max(max_abs_diff(global_avg_pool(&x).unwrap().data(), &means));

        // bilinear resize against per-pixel tent-weight sums
        let (sw, sh) = (r(1, 40) as usize, r(1, 40) as usize);
        let (dw, dh) = (r(1, 48) as usize, r(1, 48) as usize);
        let src: Vec<u8> = (0..sw * sh).map(|_| trng.below(256) as u8).collect();
        let got = bilinear_resample(&src, sw, sh, dw, dh);
        let mut want = Vec::with_capacity(dw * dh);
        for oy in 0..dh {
            for ox in 0..dw {
                let sy = ((oy as f64 + 0.5) * sh as f64 / dh as f64 - 0.5).max(0.0).min(sh as f64 - 1.0);
                let sx = ((ox as f64 + 0.5) * sw as f64 / dw as f64 - 0.5).max(0.0).min(sw as f64 - 1.0);
                let mut acc = 0.0;
                for yy in 0..sh {
                    for xx in 0..sw {
                        let wt = (1.0 - (sy - yy as f64).abs()).max(0.0) * (1.0 - (sx - xx as f64).abs()).max(0.0);
                        acc += wt * src[yy * sw + xx] as f64;
                    }
                }
                want.push(acc);
            }
        }
        bil_err = bil_err.max(max_abs_diff(&got, &want));
    }

    // integral image rectangle sums, exact
    let mut rect_cases = 0;
    for case in 0..cases {
        let mut trng = Rng::new(5000 + case);
        let (w, h) = (1 + trng.below(30) as usize, 1 + trng.below(30) as usize);
        let px: Vec<u8> = (0..w * h).map(|_| trng.below(256) as u8).collect();
        let ii = IntegralImage::from_pixels(w, h, &px);
        let x = trng.below(w as u64 + 1) as usize;
        let y = trng.below(h as u64 + 1) as usize;
        let rw = trng.below((w - x) as u64 + 1) as usize;
        let rh = trng.below((h - y) as u64 + 1) as usize;
        let mut want = 0u64;
        for yy in y..y + rh {
            for xx in x..x + rw {
                want += px[yy * w + xx] as u64;
            }
        }
        check(ii.rect_sum(x, y, rw, rh) == want, format!("rect sum mismatch in case {case}"))?;
        rect_cases += 1;
    }
    for (name, e) in [("conv2d", conv_err), ("maxpool", pool_err), ("global avg pool", gap_err), ("bilinear", bil_err)] {
        check(e <= 1e-6, format!("{name} max abs err {e:.2e}"))?;
    }
    Ok(format!(
        "{cases} cases each: conv {conv_err:.1e}, maxpool {pool_err:.1e}, gap {gap_err:.1e}, bilinear {bil_err:.1e}; {rect_cases} rect sums exact"
    ))
}

fn fixture_training_set() -> Vec<Example> {
    let fer = read_fer2013(fixture("fer/fer2013.csv")).unwrap();
    let votes = read_ferplus(fixture("fer/fer2013new.csv")).unwrap();
    let merged = merge_labels(&fer, &votes).unwrap();
    examples_for(&merged.samples, Usage::Training).unwrap().into_iter().take(64).collect()
}

/// Width-divided network used for the overfit run on a single core.
const OVERFIT_NARROW: usize = 8;

fn overfit_run(data: &[Example], epochs: usize) -> (Option<usize>, f32, Vec<f32>) {
    let cfg = TrainConfig {
        lr: 0.01,
        batch_size: 16,
        epochs,
        seed: 7,
        augment: false,
        ..TrainConfig::default()
    };
    let model = ResNet::new(ResNetConfig::narrow(OVERFIT_NARROW), &mut Rng::new(7)).unwrap();
    let mut trainer = Trainer::new(model, cfg).unwrap();
    let mut acc = 0.0;
    for e in 1..=epochs {
        trainer.epoch(data, None).unwrap();
        acc = evaluate(trainer.model(), data).unwrap().accuracy;
        if acc >= 0.95 {
            return (Some(e), acc, trainer.metrics().train_losses());
        }
    }
    (None, acc, trainer.metrics().train_losses())
}

fn overfit_sanity() -> Outcome {
    let start = Instant::now();
    let data = fixture_training_set();
    check(data.len() == 64, format!("expected 64 samples, got {}", data.len()))?;
    let (reached, acc, losses) = overfit_run(&data, 200);
    let elapsed = start.elapsed();
    let epoch = reached.ok_or_else(|| format!("accuracy {acc:.3} after 200 epochs"))?;
    check(elapsed < Duration::from_secs(600), format!("took {elapsed:?}"))?;
    let (_, _, again) = overfit_run(&data, epoch);
    check(again == losses, "second run with the same seed diverged")?;
    Ok(format!(
        "64 samples, width/{OVERFIT_NARROW}: accuracy {acc:.3} (inference mode) at epoch {epoch}, {:.1}s; rerun bit-identical",
        elapsed.as_secs_f64()
    ))
}

fn dataset_contract() -> Outcome {
    let fer = read_fer2013(fixture("fer/fer2013.csv")).map_err(|e| e.to_string())?;
    let votes = read_ferplus(fixture("fer/fer2013new.csv")).map_err(|e| e.to_string())?;
    check(fer.len() == 100 && votes.len() == 100, "fixture row counts")?;
    let usage = |u| fer.iter().filter(|s| s.usage == u).count();
    check(
        (usage(Usage::Training), usage(Usage::PublicTest), usage(Usage::PrivateTest)) == (80, 10, 10),
        "usage counts",
    )?;
    let mut labels = [0usize; 7];
    for s in fer.iter().filter(|s| s.usage == Usage::Training) {
        labels[s.fer_label as usize] += 1;
    }
    check(labels == [20, 10, 9, 10, 10, 10, 11], format!("training label counts {labels:?}"))?;
    let merged = merge_labels(&fer, &votes).map_err(|e| e.to_string())?;
    check(
        (merged.all_zero, merged.unknown_or_not_face, merged.low_count, merged.samples.len()) == (1, 3, 1, 95),
        "merge exclusions",
    )?;
    check(class_histogram(&merged.samples, Usage::Training) == [11, 9, 10, 9, 10, 9, 9, 9], "training histogram")?;
    check(class_histogram(&merged.samples, Usage::PublicTest) == [2, 2, 1, 1, 1, 0, 1, 1], "public histogram")?;
    check(class_histogram(&merged.samples, Usage::PrivateTest) == [1, 1, 2, 2, 1, 1, 1, 1], "private histogram")?;
    let real = match std::env::var_os("FER2013_CSV") {
        Some(path) => {
            let rows = read_fer2013(&path).map_err(|e| e.to_string())?;
            let count = |u| rows.iter().filter(|s| s.usage == u).count();
            check(count(Usage::Training) == 28_709, format!("real Training count {}", count(Usage::Training)))?;
            format!(
                "; real FER2013: Training 28709, PublicTest {}, PrivateTest {} (reported, not asserted)",
                count(Usage::PublicTest),
                count(Usage::PrivateTest)
            )
        }
        None => "; real FER2013 not present (set FER2013_CSV), count check skipped".to_string(),
    };
    Ok(format!("fixture 100 rows = 80/10/10, merged 95 with 5 exclusions{real}"))
}

fn minimal_cascade(stage_threshold: f64, node_threshold: f64) -> CascadeModel {
    let xml = format!(
        r#"<opencv_storage><cascade>
  <featureType>HAAR</featureType><height>24</height><width>24</width><stageNum>1</stageNum>
  <stages><_><maxWeakCount>1</maxWeakCount><stageThreshold>{stage_threshold}</stageThreshold>
    <weakClassifiers><_><internalNodes>0 -1 0 {node_threshold}</internalNodes>
      <leafValues>-1. 1.</leafValues></_></weakClassifiers></_></stages>
  <features><_><rects><_>0 0 12 24 -1.</_><_>12 0 12 24 1.</_></rects></_></features>
</cascade></opencv_storage>"#
    );
    CascadeModel::from_xml(&xml).unwrap()
}

fn detector() -> Outcome {
    // Left half dark (a), right half bright (b): feature = 288*(b - a); the
    // inset 22x22 window has sigma (b - a)/2 and area 484. The stump goes left
    // (-1) when 288*(b-a) < t * 484 * max(1, (b-a)/2).
    let mut hand = 0;
    for (a, b) in [(0u8, 0u8), (10, 10), (0, 100), (50, 60), (100, 0), (30, 31)] {
        let px: Vec<u8> = (0..24 * 24).map(|i| if i % 24 < 12 { a } else { b }).collect();
        let ii = IntegralImage::from_pixels(24, 24, &px);
        for t in [-1.0, 0.0, 0.5, 1.0, 1.2, 2.0] {
            let diff = b as f64 - a as f64;
            let sigma = (diff.abs() / 2.0).max(1.0);
            let leaf = if 288.0 * diff < t * 484.0 * sigma { -1.0 } else { 1.0 };
            for stage in [-0.5, 0.5] {
                let want = leaf >= stage - 1e-5;
                let got = evaluate_window(&minimal_cascade(stage, t), &ii, 0, 0, 1.0).map_err(|e| e.to_string())?;
                check(got == want, format!("a={a} b={b} t={t} stage={stage}: got {got}"))?;
                hand += 1;
            }
        }
    }
    let path = fixture("cascades/haarcascade_frontalface_default.xml");
    if !path.exists() {
        return Ok(format!("{hand} hand-evaluated windows exact; frontal-face cascade absent, real-image checks skipped"));
    }
    let cascade = load_cascade_file(&path).map_err(|e| e.to_string())?;
    let ann: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("images/face.annotation.json")).unwrap()).unwrap();
    let f = &ann["faces"][0];
    let g = |k: &str| f[k].as_u64().unwrap() as usize;
    let truth = Rect::new(g("x"), g("y"), g("w"), g("h"));
    let face = image::open(fixture("images/face.png")).unwrap().to_luma8();
    let boxes = detect_multiscale(&cascade, &face, &DetectParams::default()).map_err(|e| e.to_string())?;
    check(boxes.len() == 1, format!("face fixture gave {} boxes", boxes.len()))?;
    let iou = boxes[0].rect().iou(&truth);
    check(iou >= 0.5, format!("IoU {iou:.3}"))?;
    let blank = image::open(fixture("images/blank.png")).unwrap().to_luma8();
    let none = detect_multiscale(&cascade, &blank, &DetectParams::default()).map_err(|e| e.to_string())?;
    check(none.is_empty(), format!("blank image gave {} boxes", none.len()))?;
    Ok(format!(
        "{hand} hand-evaluated windows exact; face fixture 1 box IoU {iou:.3}; blank 0 boxes"
    ))
}

fn augmentation_statistics() -> Outcome {
    let mut rng = Rng::new(2024);
    let image = Tensor::from_fn(&[1, 48, 48], |i| 2.0 + (i % 97) as f32);
    let trials = 10_000;
    let mut modified = 0;
    for _ in 0..trials {
        let (out, region) = random_erase_region(&image, &mut rng, 0.5, ERASE_AREA, ERASE_ASPECT).map_err(|e| e.to_string())?;
        let changed: Vec<usize> = (0..out.len()).filter(|&i| out.data()[i] != image.data()[i]).collect();
        match region {
            None => check(changed.is_empty(), "unreported modification")?,
            Some(r) => {
                modified += 1;
                let frac = r.area() as f64 / (48.0 * 48.0);
                check((0.02..=0.33).contains(&frac), format!("area fraction {frac}"))?;
                check(r.top + r.height <= 48 && r.left + r.width <= 48, "region out of bounds")?;
                check(changed.iter().all(|&i| r.contains(i / 48, i % 48)), "pixel changed outside region")?;
                check(changed.len() == r.area(), "region not fully erased")?;
            }
        }
    }
    let rate = modified as f64 / trials as f64;
    check((0.45..=0.55).contains(&rate), format!("modified fraction {rate}"))?;
    Ok(format!("{modified}/{trials} modified ({rate:.4}); all within in-bounds rectangles, area in [0.02, 0.33]"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("gradient correctness", gradient_correctness),
        ("oracle equivalence", oracle_equivalence),
        ("overfit sanity", overfit_sanity),
        ("dataset contract", dataset_contract),
        ("detector", detector),
        ("augmentation statistics", augmentation_statistics),
        ("service contract", service::service_contract),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!(
        "N/A   published accuracy (67.93% train / 65.15% test): needs multi-hour training on the full dataset; \
         not part of this suite (see README, extended run)"
    );
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
