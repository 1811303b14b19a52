//! One function per subcommand. Each returns a filled report; writing it and
//! mapping failures to exit codes happens in [`crate::run`].

use std::fs;
use std::path::Path;

use recos::cascade::{
    compare_paths, compare_paths_many_to_one, compound, linear_collapse_error, rectified_compound, write_matrix,
    AnchorMatrixPair,
};
use recos::container::sidecar_path;
use recos::data::{
    composite_background, grayscale_reverse, load_idx, prepare, split_paths, BackgroundBank, LabeledDataset, Split,
    PIXEL_MAX,
};
use recos::layers::Layer;
use recos::lenet::{
    build_lenet, dump_responses, evaluate, negate_first_layer, negate_first_layer_weights_only, predict_logits,
    train_with, ArchSpec, EvalReport, LeNetSpec, Network, TrainHistory,
};
use recos::numerics::{argmax, max_abs_diff};
use recos::{Rng, Tensor};

use crate::config::{EvalSet, RunConfig};
use crate::error::{CliError, CliResult};
use crate::report::ExperimentReport;

/// Pairings in the reversal study must agree this closely on every logit.
pub const SIGN_FLIP_TOL: f64 = 1e-9;
/// Offsets from `background_seed` for the texture draws of each split.
const TRAIN_COMPOSITE_OFFSET: u64 = 1;
const TEST_COMPOSITE_OFFSET: u64 = 2;

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))
}

fn load_split(cfg: &RunConfig, split: Split, rep: &mut ExperimentReport) -> CliResult<LabeledDataset> {
    let (images, labels) = split_paths(&cfg.data_dir, split)?;
    rep.input(&images)?;
    rep.input(&labels)?;
    let ds = prepare::<f64>(&load_idx(&images, &labels)?);
    let limit = match split {
        Split::Train => cfg.train_limit,
        Split::Test => cfg.test_limit,
    };
    Ok(match limit {
        Some(n) if n < ds.len() => ds.take(n),
        _ => ds,
    })
}

fn load_checkpoint(cfg: &RunConfig, rep: &mut ExperimentReport) -> CliResult<Network> {
    let path = cfg
        .checkpoint
        .as_ref()
        .ok_or_else(|| CliError::Config("--checkpoint is required".into()))?;
    rep.input(path)?;
    Ok(Network::load(path)?)
}

fn background_bank(cfg: &RunConfig) -> CliResult<BackgroundBank> {
    if cfg.textures == 0 {
        return Err(CliError::Config("background bank is empty (textures = 0)".into()));
    }
    let full = BackgroundBank::generate(cfg.background_seed);
    let textures = (0..cfg.textures.min(full.len()))
        .map(|i| full.texture(i).to_vec())
        .collect();
    Ok(BackgroundBank::new(full.side(), textures))
}

fn fit(
    cfg: &RunConfig,
    data: &LabeledDataset,
    validation: Option<&LabeledDataset>,
) -> CliResult<(Network, TrainHistory)> {
    let tc = cfg.train_config();
    let net = build_lenet(&LeNetSpec::table1(), &tc, &mut Rng::new(cfg.seed))?;
    let start = std::time::Instant::now();
    Ok(train_with(net, data, &tc, validation, |r| {
        let acc = r
            .validation_accuracy
            .map(|a| format!(", validation accuracy {a:.4}"))
            .unwrap_or_default();
        eprintln!(
            "epoch {}: mean loss {:.4}{acc} ({:.0}s)",
            r.epoch,
            r.mean_loss,
            start.elapsed().as_secs_f64()
        );
    })?)
}

fn record_history(rep: &mut ExperimentReport, prefix: &str, hist: &TrainHistory) {
    for r in &hist.epochs {
        rep.metric(format!("{prefix}epoch_{:02}_mean_loss", r.epoch), r.mean_loss);
        if let Some(a) = r.validation_accuracy {
            rep.metric(format!("{prefix}epoch_{:02}_test_accuracy", r.epoch), a);
        }
    }
}

fn record_eval(rep: &mut ExperimentReport, prefix: &str, e: &EvalReport) {
    rep.metric(format!("{prefix}count"), e.count as f64);
    rep.metric(format!("{prefix}correct"), e.correct as f64);
    rep.metric(format!("{prefix}accuracy"), e.accuracy);
}

fn accuracy_of(logits: &[Vec<f64>], labels: &[u8]) -> (Vec<usize>, f64) {
    let preds: Vec<usize> = logits.iter().map(|z| argmax(z).unwrap_or(0)).collect();
    let correct = preds.iter().zip(labels).filter(|(&p, &l)| p == l as usize).count();
    (preds, correct as f64 / labels.len().max(1) as f64)
}

fn max_logit_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| max_abs_diff(x, y)).fold(0.0, f64::max)
}

pub fn cmd_train(cfg: &RunConfig) -> CliResult<ExperimentReport> {
    let mut rep = ExperimentReport::new("train", cfg.echo());
    create_dir(&cfg.out_dir)?;
    let train = load_split(cfg, Split::Train, &mut rep)?;
    let test = load_split(cfg, Split::Test, &mut rep)?;
    let (net, hist) = fit(cfg, &train, Some(&test))?;
    rep.metric("train_samples", train.len() as f64);
    record_history(&mut rep, "", &hist);
    let e = evaluate(&net, &test, "test", !cfg.deterministic)?;
    record_eval(&mut rep, "test_", &e);
    for (d, r) in e.recalls().iter().enumerate() {
        if let Some(r) = r {
            rep.metric(format!("test_recall_class_{d}"), *r);
        }
    }
    let ckpt = cfg.checkpoint.clone().unwrap_or_else(|| cfg.out_dir.join("lenet.ckpt"));
    if let Some(parent) = ckpt.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    net.save(&ckpt)?;
    rep.artifact("checkpoint", &ckpt, &cfg.out_dir)?;
    rep.artifact("checkpoint_meta", &sidecar_path(&ckpt), &cfg.out_dir)?;
    Ok(rep)
}

pub fn cmd_eval(cfg: &RunConfig) -> CliResult<ExperimentReport> {
    let mut rep = ExperimentReport::new("eval", cfg.echo());
    let net = load_checkpoint(cfg, &mut rep)?;
    let clean = load_split(cfg, Split::Test, &mut rep)?;
    let data = match cfg.eval_set {
        EvalSet::Clean => clean,
        EvalSet::Reversed => grayscale_reverse(&clean, false)?,
        EvalSet::Background => composite_background(
            &clean,
            &background_bank(cfg)?,
            cfg.background_seed + TEST_COMPOSITE_OFFSET,
        )?,
    };
    let e = evaluate(&net, &data, &cfg.eval_set.to_string(), !cfg.deterministic)?;
    record_eval(&mut rep, "", &e);
    for (d, r) in e.recalls().iter().enumerate() {
        if let Some(r) = r {
            rep.metric(format!("recall_class_{d}"), *r);
        }
    }
    Ok(rep)
}

/// Scores the checkpoint and its sign-flipped twin on clean and reversed test
/// images, and checks that the two cross pairings agree on every logit.
pub fn cmd_reversal_study(cfg: &RunConfig) -> CliResult<ExperimentReport> {
    let mut rep = ExperimentReport::new("reversal-study", cfg.echo());
    create_dir(&cfg.out_dir)?;
    let net = load_checkpoint(cfg, &mut rep)?;
    let clean = load_split(cfg, Split::Test, &mut rep)?;
    let reversed = grayscale_reverse(&clean, false)?;
    let negated = negate_first_layer(&net, PIXEL_MAX)?;
    let loose = negate_first_layer_weights_only(&net)?;
    let par = !cfg.deterministic;

    let orig_clean = predict_logits(&net, &clean, par)?;
    let orig_rev = predict_logits(&net, &reversed, par)?;
    let neg_clean = predict_logits(&negated, &clean, par)?;
    let neg_rev = predict_logits(&negated, &reversed, par)?;
    let loose_rev = predict_logits(&loose, &reversed, par)?;

    let labels = clean.labels();
    let (p_oc, a_oc) = accuracy_of(&orig_clean, labels);
    let (p_or, a_or) = accuracy_of(&orig_rev, labels);
    let (p_nc, a_nc) = accuracy_of(&neg_clean, labels);
    let (p_nr, a_nr) = accuracy_of(&neg_rev, labels);
    let (_, a_loose) = accuracy_of(&loose_rev, labels);
    let d1 = max_logit_diff(&orig_clean, &neg_rev);
    let d2 = max_logit_diff(&orig_rev, &neg_clean);

    rep.metric("test_samples", clean.len() as f64);
    rep.metric("original_clean_accuracy", a_oc);
    rep.metric("original_reversed_accuracy", a_or);
    rep.metric("negated_clean_accuracy", a_nc);
    rep.metric("negated_reversed_accuracy", a_nr);
    rep.metric("weights_only_negated_reversed_accuracy", a_loose);
    rep.metric("max_logit_diff_original_clean_vs_negated_reversed", d1);
    rep.metric("max_logit_diff_original_reversed_vs_negated_clean", d2);
    rep.assertion(
        "negated_reversed_matches_original_clean",
        d1 < SIGN_FLIP_TOL && p_oc == p_nr && a_oc == a_nr,
    );
    rep.assertion(
        "negated_clean_matches_original_reversed",
        d2 < SIGN_FLIP_TOL && p_or == p_nc && a_or == a_nc,
    );

    let out = cfg.out_dir.join("negated.ckpt");
    negated.save(&out)?;
    rep.artifact("negated_checkpoint", &out, &cfg.out_dir)?;
    Ok(rep)
}

/// Phase 1 scores a clean-trained net on background-composited test images;
/// phase 2 retrains on composited training images and scores both test sets.
pub fn cmd_background_study(cfg: &RunConfig) -> CliResult<ExperimentReport> {
    let bank = background_bank(cfg)?;
    let mut rep = ExperimentReport::new("background-study", cfg.echo());
    create_dir(&cfg.out_dir)?;
    let train = load_split(cfg, Split::Train, &mut rep)?;
    let test = load_split(cfg, Split::Test, &mut rep)?;
    let bg_test = composite_background(&test, &bank, cfg.background_seed + TEST_COMPOSITE_OFFSET)?;
    let par = !cfg.deterministic;

    let baseline = match cfg.checkpoint {
        Some(_) => load_checkpoint(cfg, &mut rep)?,
        None => {
            eprintln!("training the clean baseline");
            let (net, hist) = fit(cfg, &train, None)?;
            record_history(&mut rep, "baseline_", &hist);
            let path = cfg.out_dir.join("baseline.ckpt");
            net.save(&path)?;
            rep.artifact("baseline_checkpoint", &path, &cfg.out_dir)?;
            net
        }
    };
    let clean_acc = evaluate(&baseline, &test, "clean", par)?.accuracy;
    let phase1 = evaluate(&baseline, &bg_test, "background", par)?.accuracy;
    rep.metric("baseline_clean_accuracy", clean_acc);
    rep.metric("phase1_background_accuracy", phase1);
    rep.metric("phase1_drop_points", 100.0 * (clean_acc - phase1));

    let bg_train = composite_background(&train, &bank, cfg.background_seed + TRAIN_COMPOSITE_OFFSET)?;
    eprintln!("retraining on composited images");
    let (net, hist) = fit(cfg, &bg_train, None)?;
    record_history(&mut rep, "phase2_", &hist);
    rep.metric("phase2_clean_accuracy", evaluate(&net, &test, "clean", par)?.accuracy);
    rep.metric(
        "phase2_background_accuracy",
        evaluate(&net, &bg_test, "background", par)?.accuracy,
    );
    rep.metric("textures", bank.len() as f64);
    let path = cfg.out_dir.join("background_retrained.ckpt");
    net.save(&path)?;
    rep.artifact("retrained_checkpoint", &path, &cfg.out_dir)?;
    Ok(rep)
}

/// First two conv layers as anchor matrices: `A` is `(h·w) × K1`, and `B`
/// stacks one `K1 × K2` block per second-layer kernel position.
pub fn anchor_matrices(net: &Network) -> CliResult<(Tensor, Tensor, usize, usize)> {
    let convs = net.conv_positions();
    let structure = |m: String| CliError::Data(format!("unexpected network structure: {m}"));
    if convs.len() < 2 {
        return Err(structure(format!("need two conv layers, found {}", convs.len())));
    }
    let (Layer::Conv(c1), Layer::Conv(c2)) = (&net.layers()[convs[0]], &net.layers()[convs[1]]) else {
        return Err(structure("conv positions do not hold conv layers".into()));
    };
    let (k1, ch1, h1, w1) = c1.kernel_dims();
    let (k2, ch2, h2, w2) = c2.kernel_dims();
    if ch1 != 1 || ch2 != k1 {
        return Err(structure(format!(
            "first conv takes {ch1} channels (expected 1), second takes {ch2} (expected {k1})"
        )));
    }
    let n = h1 * w1;
    let wa = c1.weights().values();
    let a: Vec<f64> = (0..n).flat_map(|r| (0..k1).map(move |k| wa[k * n + r])).collect();
    let p = h2 * w2;
    let wb = c2.weights().values();
    let mut b = vec![0.0; p * k1 * k2];
    for l in 0..k2 {
        for c in 0..k1 {
            for q in 0..p {
                b[(q * k1 + c) * k2 + l] = wb[(l * k1 + c) * p + q];
            }
        }
    }
    let stride = match net.layers().get(convs[0] + 1) {
        Some(Layer::Pool(pl)) => pl.window(),
        _ => 1,
    };
    Ok((Tensor::matrix(n, k1, a)?, Tensor::matrix(p * k1, k2, b)?, p, stride))
}

/// The `P` first-layer input patches seen by one second-layer unit at output
/// position `(oi, oj)`, taking the top-left sample of each pooling window.
fn patches_for_unit(
    image: &[f64],
    side: usize,
    kernel1: usize,
    kernel2: usize,
    stride: usize,
    oi: usize,
    oj: usize,
) -> Vec<Tensor> {
    let mut xs = Vec::with_capacity(kernel2 * kernel2);
    for ki in 0..kernel2 {
        for kj in 0..kernel2 {
            let (r0, c0) = (stride * (oi + ki), stride * (oj + kj));
            let patch: Vec<f64> = (0..kernel1 * kernel1)
                .map(|q| image[(r0 + q / kernel1) * side + c0 + q % kernel1])
                .collect();
            xs.push(Tensor::vector(patch).expect("non-empty patch"));
        }
    }
    xs
}

pub fn cmd_analyze_cascade(cfg: &RunConfig) -> CliResult<ExperimentReport> {
    let mut rep = ExperimentReport::new("analyze-cascade", cfg.echo());
    let dir = cfg.out_dir.join("cascade");
    create_dir(&dir)?;
    let write = |rep: &mut ExperimentReport, name: &str, m: &Tensor| -> CliResult<()> {
        let path = dir.join(format!("{name}.txt"));
        write_matrix(&path, m)?;
        rep.artifact(name, &path, &cfg.out_dir)
    };
    if cfg.synthetic || cfg.checkpoint.is_none() {
        let [n, k, l] = cfg.dims;
        let mut rng = Rng::new(cfg.seed);
        let a = if cfg.identity_a {
            if n != k {
                return Err(CliError::Config(format!("identity A needs N == K, got {n} and {k}")));
            }
            Tensor::identity(n)
        } else {
            Tensor::matrix(n, k, rng.uniform_vec(n * k, -1.0, 1.0))?
        };
        let b = Tensor::matrix(k, l, rng.uniform_vec(k * l, -1.0, 1.0))?;
        let pair = AnchorMatrixPair::one_to_one(a.clone(), b.clone())?;
        let c = compound(&pair)?;
        let cr = rectified_compound(&pair)?;
        let (mut agree, mut collapse, mut first) = (0.0, 0.0f64, None);
        for _ in 0..cfg.cascade_samples {
            let x = Tensor::vector(rng.uniform_vec(n, -1.0, 1.0))?;
            let r = compare_paths(&x, &pair, cfg.activation)?;
            agree += r.agreement_fraction();
            collapse = collapse.max(linear_collapse_error(&x, &pair)?);
            first.get_or_insert((x, r));
        }
        write(&mut rep, "A", &a)?;
        write(&mut rep, "B", &b)?;
        write(&mut rep, "C", &c)?;
        write(&mut rep, "C_rect", &cr)?;
        write(&mut rep, "anchor_positions", &a)?;
        if let Some((x, r)) = first {
            write(&mut rep, "x", &Tensor::matrix(1, n, x.into_values())?)?;
            let rows = vec![r.z.into_values(), r.z_prime.into_values(), r.z_dprime.into_values()];
            write(&mut rep, "z", &Tensor::from_rows(&rows)?)?;
        }
        rep.metric("n", n as f64);
        rep.metric("k", k as f64);
        rep.metric("l", l as f64);
        rep.metric("samples", cfg.cascade_samples as f64);
        rep.metric("compound_negative_fraction", negative_fraction(&c));
        rep.metric("linear_collapse_max_error", collapse);
        rep.metric("agreement_fraction", agree / cfg.cascade_samples.max(1) as f64);
        return Ok(rep);
    }

    let net = load_checkpoint(cfg, &mut rep)?;
    let (a, b, p, stride) = anchor_matrices(&net)?;
    let pair = AnchorMatrixPair::many_to_one(a.clone(), b.clone(), p)?;
    let test = load_split(cfg, Split::Test, &mut rep)?;
    let samples = cfg.cascade_samples.min(test.len());
    let k1 = a.cols();
    let kernel1 = (a.rows() as f64).sqrt().round() as usize;
    let kernel2 = (p as f64).sqrt().round() as usize;
    if kernel1 * kernel1 != a.rows() || kernel2 * kernel2 != p {
        return Err(CliError::Data("cascade analysis expects square kernels".into()));
    }
    let side = test.side();
    let span = stride * (kernel2 - 1) + kernel1;
    if span > side {
        return Err(CliError::Data(format!(
            "unit footprint {span} exceeds the {side}-pixel image"
        )));
    }
    let centre = (side - span) / 2 / stride;
    let mut agree = 0.0;
    for i in 0..samples {
        let xs = patches_for_unit(test.image(i), side, kernel1, kernel2, stride, centre, centre);
        agree += compare_paths_many_to_one(&xs, &pair, net.meta.activation)?.agreement_fraction();
    }

    let mut blocks = Vec::new();
    let mut rect = Vec::new();
    let mut negatives = 0.0;
    for q in 0..p {
        let block = pair.block(q)?;
        let c = compound(&block)?;
        negatives += negative_fraction(&c);
        blocks.extend(rows_of(&c));
        rect.extend(rows_of(&rectified_compound(&block)?));
    }
    write(&mut rep, "A", &a)?;
    write(&mut rep, "B", &b)?;
    write(&mut rep, "C_blocks", &Tensor::from_rows(&blocks)?)?;
    write(&mut rep, "C_rect_blocks", &Tensor::from_rows(&rect)?)?;
    write(&mut rep, "anchor_positions", &a)?;
    rep.metric("n", a.rows() as f64);
    rep.metric("k", k1 as f64);
    rep.metric("l", b.cols() as f64);
    rep.metric("p", p as f64);
    rep.metric("samples", samples as f64);
    rep.metric("compound_negative_fraction", negatives / p as f64);
    rep.metric(
        "agreement_fraction",
        if samples == 0 { 0.0 } else { agree / samples as f64 },
    );
    Ok(rep)
}

fn rows_of(m: &Tensor) -> Vec<Vec<f64>> {
    m.values().chunks(m.cols()).map(<[f64]>::to_vec).collect()
}

fn negative_fraction(m: &Tensor) -> f64 {
    m.values().iter().filter(|&&v| v < 0.0).count() as f64 / m.len() as f64
}

pub fn cmd_dump_responses(cfg: &RunConfig) -> CliResult<ExperimentReport> {
    let mut rep = ExperimentReport::new("dump-responses", cfg.echo());
    let net = load_checkpoint(cfg, &mut rep)?;
    let test = load_split(cfg, Split::Test, &mut rep)?;
    if cfg.image_index >= test.len() {
        return Err(recos::Error::Range {
            index: cfg.image_index,
            valid: format!("0..{}", test.len()),
        }
        .into());
    }
    let image = test.image(cfg.image_index);
    let dir = cfg.out_dir.join("dumps");
    create_dir(&dir)?;
    rep.metric("image_index", cfg.image_index as f64);
    rep.metric("label", test.label(cfg.image_index) as f64);
    rep.metric("predicted", argmax(&net.logits(image)?).unwrap_or(0) as f64);
    for layer in 1..=2 {
        let d = dump_responses(&net, image, layer, cfg.stage, &dir)?;
        rep.metric(format!("layer{layer}_channels"), d.files.len() as f64);
        rep.metric(format!("layer{layer}_height"), d.height as f64);
        rep.metric(format!("layer{layer}_width"), d.width as f64);
        for f in &d.files {
            rep.artifact(&format!("layer{layer}"), f, &cfg.out_dir)?;
        }
        rep.artifact(&format!("layer{layer}_scaling"), &d.sidecar, &cfg.out_dir)?;
    }
    Ok(rep)
}

pub fn cmd_alexnet_spec(cfg: &RunConfig) -> CliResult<ExperimentReport> {
    let mut rep = ExperimentReport::new("alexnet-spec", cfg.echo());
    let arch = ArchSpec::alexnet();
    arch.validate_chain()?;
    println!("{arch}");
    rep.metric("rows", arch.rows.len() as f64);
    for r in &arch.rows {
        rep.metric(format!("{}_params", r.name.replace('/', "_")), r.param_count() as f64);
    }
    rep.metric("total_params", arch.param_count() as f64);
    let path = cfg.out_dir.join("alexnet_spec.txt");
    create_dir(&cfg.out_dir)?;
    fs::write(&path, format!("{arch}\n")).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    rep.artifact("table", &path, &cfg.out_dir)?;
    Ok(rep)
}
