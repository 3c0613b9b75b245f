use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use diffgt::diffusion::NoiseMode;
use diffgt::eval::svg::{line_plot, scatter_plot, Series};
use diffgt::eval::{
    evaluate_embeddings, snr_csv, snr_curve, svd_export, timing_csv, timing_harness, variant_quality, MetricReport,
    TimingSetup, TimingVariant,
};
use diffgt::graph::{ingest, split};
use diffgt::model::{DiffGt, GraphContext};
use diffgt::numerics::{DenseMatrix, RandomSource};
use diffgt::training::{config_hash, final_embeddings, log_csv, training_graph, Checkpoint, TrainConfig, Trainer, Variant};

use crate::error::{CliError, CliResult};
use crate::io::{
    create_layout, read, record_run, write, Bundle, RunConfig, RunRecord, BUNDLE_FILE, BUNDLE_VERSION, CHECKPOINT_FILE,
    DUMP_FILE,
};

pub const SEED_ENV: &str = "DIFFGT_SEED";

pub struct IngestArgs {
    pub data: PathBuf,
    pub side: Option<PathBuf>,
    pub user_side: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn cmd_ingest(args: &IngestArgs) -> CliResult<()> {
    let (graph, side) = ingest(&args.data, args.side.as_deref(), args.user_side.as_deref())?;
    let split = split(&graph, args.seed);
    let stats = graph.stats();
    let bundle = Bundle {
        version: BUNDLE_VERSION,
        graph,
        side,
        split,
    };
    write(&args.out.join(BUNDLE_FILE), &to_json(&bundle)?)?;
    write(&args.out.join("stats.json"), &to_json(&stats)?)?;
    let mut record = RunRecord::new(bundle.hash()?, &args.out, vec![BUNDLE_FILE.into(), "stats.json".into()]);
    record.seed = Some(args.seed);
    record_run(&args.out, "ingest", record)?;
    println!(
        "users {}  items {}  interactions {}  density {}%",
        stats.num_users, stats.num_items, stats.num_edges, stats.density_percent
    );
    Ok(())
}

pub struct TrainArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub ablate: Option<String>,
}

/// Config after the seed override and the ablation switch.
pub fn effective_config(run: &RunConfig, ablate: Option<&str>) -> CliResult<(TrainConfig, Variant)> {
    let mut cfg = run.train.clone();
    if let Ok(raw) = std::env::var(SEED_ENV) {
        cfg.seed = raw
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}={raw:?} is not an unsigned integer")))?;
    }
    let variant = match ablate {
        Some(name) => name.parse::<Variant>()?,
        None => Variant::Full,
    };
    let cfg = variant.apply(&cfg);
    cfg.validate()?;
    Ok((cfg, variant))
}

pub fn cmd_train(args: &TrainArgs) -> CliResult<()> {
    let run = RunConfig::load(&args.config)?;
    let (cfg, variant) = effective_config(&run, args.ablate.as_deref())?;
    let bundle = Bundle::load(&run.data)?;
    let dataset_id = bundle.hash()?;
    create_layout(&args.out)?;

    let mut trainer = Trainer::new(&bundle.graph, &bundle.side, &bundle.split, cfg.clone())?;
    while !trainer.exhausted() {
        match trainer.run_epoch() {
            Ok(row) => log::info!(
                "epoch {:>4}  total {:.5}  bpr {:.5}  diff {:.5}  cl {:.5}  val {:.5}",
                row.epoch,
                row.total,
                row.bpr,
                row.diff,
                row.cl,
                row.val_loss
            ),
            Err(source @ diffgt::Error::Divergence { .. }) => {
                let dump = args.out.join(DUMP_FILE);
                let epoch = trainer.epoch().saturating_sub(1);
                let ckpt = Checkpoint::new(&cfg, trainer.last_finite(), dataset_id, epoch)?;
                write(&dump, &ckpt.to_json()?)?;
                write(&args.out.join("logs/train_log.csv"), &log_csv(trainer.log()))?;
                return Err(CliError::Diverged { source, dump });
            }
            Err(e) => return Err(e.into()),
        }
        if trainer.should_stop() {
            break;
        }
    }
    let outcome = trainer.finish();
    let ckpt = Checkpoint::new(&cfg, &outcome.model, dataset_id.clone(), outcome.best_epoch)?;
    write(&args.out.join(CHECKPOINT_FILE), &ckpt.to_json()?)?;
    write(&args.out.join("logs/train_log.csv"), &log_csv(&outcome.log))?;

    let mut record = RunRecord::new(
        dataset_id,
        &args.out,
        vec![CHECKPOINT_FILE.into(), "logs/train_log.csv".into()],
    );
    record.config_hash = Some(config_hash(&cfg)?);
    record.seed = Some(cfg.seed);
    record.variant = Some(variant.name().into());
    record.config = Some(cfg);
    record_run(&args.out, "train", record)?;
    println!(
        "trained {} epochs (best {}{}), checkpoint {}",
        outcome.log.len(),
        outcome.best_epoch,
        if outcome.stopped_early { ", stopped early" } else { "" },
        args.out.join(CHECKPOINT_FILE).display()
    );
    Ok(())
}

/// Checkpoint and bundle after the integrity checks.
struct Loaded {
    ckpt: Checkpoint,
    model: DiffGt,
    bundle: Bundle,
    ctx: GraphContext,
}

fn load(checkpoint: &Path, data: &Path) -> CliResult<Loaded> {
    let ckpt = Checkpoint::from_json(&read(checkpoint)?)?;
    let bundle = Bundle::load(data)?;
    ckpt.verify_dataset(&bundle.hash()?)?;
    let model = ckpt.model()?;
    let ctx = GraphContext::new(&training_graph(&bundle.graph, &bundle.side, &bundle.split, &ckpt.config)?);
    Ok(Loaded {
        ckpt,
        model,
        bundle,
        ctx,
    })
}

fn default_out(checkpoint: &Path) -> PathBuf {
    checkpoint
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf()
}

pub struct EvaluateArgs {
    pub checkpoint: PathBuf,
    pub data: PathBuf,
    pub k: usize,
    pub out: Option<PathBuf>,
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> CliResult<()> {
    if args.k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    let l = load(&args.checkpoint, &args.data)?;
    let out = args.out.clone().unwrap_or_else(|| default_out(&args.checkpoint));
    let x = final_embeddings(&l.model, &l.ctx, &l.ckpt.config)?;
    let report = evaluate_embeddings(&x, l.model.num_users(), &l.bundle.split, args.k);
    let per_set = "reports/metrics_per_set.csv";
    let summary = "reports/metrics_summary.csv";
    write(&out.join(per_set), &report.per_set_csv(&l.bundle.split.test_seeds))?;
    write(&out.join(summary), &report.summary_csv())?;
    let mut record = RunRecord::new(l.ckpt.dataset_hash.clone(), &out, vec![per_set.into(), summary.into()]);
    record.config_hash = Some(l.ckpt.config_hash.clone());
    record.seed = Some(l.ckpt.config.seed);
    record_run(&out, "evaluate", record)?;
    print!("{}", metric_table(&report));
    Ok(())
}

pub fn metric_table(r: &MetricReport) -> String {
    let k = r.k;
    let mut out = format!("{:<10}{:>8}{:>14}{:>14}\n", "test set", "users", format!("recall@{k}"), format!("ndcg@{k}"));
    for j in 0..r.recall.len() {
        let _ = writeln!(out, "{:<10}{:>8}{:>14.4}{:>14.4}", j, r.users[j], r.recall[j], r.ndcg[j]);
    }
    let _ = writeln!(
        out,
        "{:<10}{:>8}{:>14}{:>14}",
        "mean±std",
        "",
        format!("{:.4}±{:.4}", r.recall_mean, r.recall_std),
        format!("{:.4}±{:.4}", r.ndcg_mean, r.ndcg_std)
    );
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Snr,
    Svd,
    Timing,
}

pub struct DiagnoseArgs {
    pub checkpoint: PathBuf,
    pub data: PathBuf,
    pub mode: Mode,
    pub out: PathBuf,
    pub nodes: usize,
    pub repeats: usize,
    pub k: usize,
}

pub fn cmd_diagnose(args: &DiagnoseArgs) -> CliResult<()> {
    let l = load(&args.checkpoint, &args.data)?;
    create_layout(&args.out)?;
    let artifacts = match args.mode {
        Mode::Snr => diagnose_snr(&l, &args.out)?,
        Mode::Svd => diagnose_svd(&l, &args.out)?,
        Mode::Timing => diagnose_timing(&l, args)?,
    };
    let mut record = RunRecord::new(l.ckpt.dataset_hash.clone(), &args.out, artifacts);
    record.config_hash = Some(l.ckpt.config_hash.clone());
    record.seed = Some(l.ckpt.config.seed);
    let name = match args.mode {
        Mode::Snr => "diagnose-snr",
        Mode::Svd => "diagnose-svd",
        Mode::Timing => "diagnose-timing",
    };
    record_run(&args.out, name, record)?;
    Ok(())
}

/// Item rows of the encoder output with their dominant attribute; items
/// without one, and classes with fewer than two items, are left out.
fn labelled_items(l: &Loaded) -> CliResult<(DenseMatrix, Vec<usize>, Vec<String>)> {
    let table = l
        .bundle
        .side
        .items
        .as_ref()
        .ok_or_else(|| CliError::Usage("item side information is required for class labels".into()))?;
    let x_g = l.model.encode(&l.ctx)?;
    let nu = l.model.num_users();
    let dominant: Vec<Option<usize>> = (0..l.model.num_items()).map(|i| table.dominant(i)).collect();
    let mut counts = vec![0usize; table.dim()];
    for c in dominant.iter().flatten() {
        counts[*c] += 1;
    }
    let keep: Vec<usize> = (0..dominant.len())
        .filter(|&i| dominant[i].is_some_and(|c| counts[c] >= 2))
        .collect();
    let rows: Vec<usize> = keep.iter().map(|&i| nu + i).collect();
    let labels: Vec<usize> = keep.iter().map(|&i| dominant[i].expect("kept items are labelled")).collect();
    let names = labels.iter().map(|&c| table.attributes[c].clone()).collect();
    Ok((x_g.select_rows(&rows), labels, names))
}

fn diagnose_snr(l: &Loaded, out: &Path) -> CliResult<Vec<String>> {
    let (x, labels, _) = labelled_items(l)?;
    let sched = l.model.schedule();
    let steps: Vec<usize> = (1..=sched.steps()).collect();
    let seed = l.ckpt.config.seed;
    let mut curves = Vec::new();
    for mode in [NoiseMode::Isotropic, NoiseMode::Directional] {
        let mut rng = RandomSource::new(seed).derive(7);
        curves.push(snr_curve(&x, &labels, sched, mode, &steps, &mut rng)?);
    }
    let ridge: Vec<String> = curves
        .iter()
        .map(|c| {
            let at: Vec<String> = c.steps.iter().zip(&c.ridge).filter(|(_, r)| **r).map(|(t, _)| t.to_string()).collect();
            format!("{}=[{}]", c.mode.label(), at.join(" "))
        })
        .collect();
    let classes = labels.iter().collect::<std::collections::BTreeSet<_>>().len();
    let csv = format!(
        "# embeddings: item rows of this checkpoint's graph encoder (not a separately pre-trained recommender)\n\
         # items {} classes {}\n# ridge {}\n{}",
        x.rows(),
        classes,
        ridge.join(" "),
        snr_csv(&curves)
    );
    write(&out.join("reports/snr.csv"), &csv)?;
    let series: Vec<Series<'_>> = curves
        .iter()
        .map(|c| Series {
            label: c.mode.label(),
            points: c.steps.iter().zip(&c.snr).map(|(&t, &s)| (t as f64, s)).collect(),
        })
        .collect();
    write(&out.join("figures/snr.svg"), &line_plot("class separability of x_t", "step t", "Fisher ratio", &series))?;
    for c in &curves {
        println!(
            "{:<12} t=1 {:.4}  t={} {:.4}",
            c.mode.label(),
            c.snr[0],
            c.steps[c.steps.len() - 1],
            c.snr[c.snr.len() - 1]
        );
    }
    Ok(vec!["reports/snr.csv".into(), "figures/snr.svg".into()])
}

fn diagnose_svd(l: &Loaded, out: &Path) -> CliResult<Vec<String>> {
    let (x, _, names) = labelled_items(l)?;
    let export = svd_export(&x, &names)?;
    write(&out.join("reports/svd.csv"), &export.to_csv())?;
    let points: Vec<(f64, f64)> = (0..export.points.rows())
        .map(|r| (export.points.get(r, 0), export.points.get(r, 1)))
        .collect();
    let title = format!("item embeddings, σ1/σ2 = {:.3}", export.anisotropy);
    write(&out.join("figures/svd.svg"), &scatter_plot(&title, &points, &export.labels))?;
    println!(
        "sigma1 {:.4}  sigma2 {:.4}  anisotropy {:.4}",
        export.sigma[0], export.sigma[1], export.anisotropy
    );
    Ok(vec!["reports/svd.csv".into(), "figures/svd.svg".into()])
}

fn diagnose_timing(l: &Loaded, args: &DiagnoseArgs) -> CliResult<Vec<String>> {
    let cfg = l.model.config();
    let mut setup = TimingSetup::new(args.nodes, cfg.steps, cfg.reverse_samples);
    setup.model = cfg.clone();
    setup.repeats = args.repeats;
    setup.seed = l.ckpt.config.seed;
    let mut reports = timing_harness(&setup, &TimingVariant::ALL)?;
    for r in &mut reports {
        if let Some(q) = variant_quality(&l.model, &l.ctx, &l.bundle.split, r.variant, setup.seed, args.k)? {
            r.recall = Some(q.recall_mean);
            r.ndcg = Some(q.ndcg_mean);
        }
    }
    write(&args.out.join("reports/timing.csv"), &timing_csv(&reports))?;
    let k = args.k;
    println!(
        "{:<22}{:>12}{:>12}{:>12}{:>12}",
        "variant",
        "forward s",
        "reverse s",
        format!("recall@{k}"),
        format!("ndcg@{k}")
    );
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    for r in &reports {
        println!(
            "{:<22}{:>12.4}{:>12.4}{:>12}{:>12}",
            r.variant.name(),
            r.forward_secs,
            r.reverse_secs,
            opt(r.recall),
            opt(r.ndcg)
        );
    }
    Ok(vec!["reports/timing.csv".into()])
}

fn to_json<T: serde::Serialize>(value: &T) -> CliResult<String> {
    Ok(serde_json::to_string_pretty(value).map_err(diffgt::Error::from)?)
}
