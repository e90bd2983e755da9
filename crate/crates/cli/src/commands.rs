//! Command implementations.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use gnodeformer::fed::{
    comm_for_count, dirichlet_partition, federated_masks, label_histograms, max_class_shares,
    run_rounds_with, tv_distances, RoundRecord,
};
use gnodeformer::graph::{
    generate_sbm, load_dataset, split_masks, write_dataset, GraphDataset, LoadOptions,
    SplitFractions,
};
use gnodeformer::model::{write_filter_table, ModelConfig};
use gnodeformer::spectral::load_or_compute;
use gnodeformer::train::train_centralized;
use gnodeformer::Stopwatch;

use crate::args::{CommArgs, GenDataArgs, PartitionArgs, RerunArgs};
use crate::config::{DataSource, Mode, ModelSettings, RunConfig};
use crate::error::{CliError, CliResult};

pub const METRICS_HEADER: [&str; 6] = [
    "round",
    "client_id",
    "loss",
    "accuracy",
    "bytes_cum",
    "epoch_seconds",
];

/// Feature and class counts of the usual benchmark graphs.
pub const BUILTIN_DATASETS: [(&str, usize, usize); 6] = [
    ("cora", 1433, 7),
    ("citeseer", 3703, 6),
    ("photo", 745, 8),
    ("chameleon", 2325, 5),
    ("squirrel", 2089, 5),
    ("actor", 932, 5),
];

/// One line of `metrics.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub round: usize,
    /// Client id, or `global` for the aggregated model.
    pub client_id: String,
    pub loss: Option<f64>,
    pub accuracy: Option<f64>,
    pub bytes_cum: usize,
    pub epoch_seconds: f64,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

pub fn write_metrics(path: &Path, rows: &[MetricRow]) -> CliResult<()> {
    let fail = |e: csv::Error| CliError::output(path, e.into());
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    w.write_record(METRICS_HEADER).map_err(fail)?;
    for r in rows {
        w.write_record([
            r.round.to_string(),
            r.client_id.clone(),
            fmt_opt(r.loss),
            fmt_opt(r.accuracy),
            r.bytes_cum.to_string(),
            format!("{:?}", r.epoch_seconds),
        ])
        .map_err(fail)?;
    }
    w.flush().map_err(|e| CliError::output(path, e))
}

fn prepare_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))?;
    let probe = dir.join(".write-test");
    fs::write(&probe, b"").map_err(|e| CliError::output(dir, e))?;
    fs::remove_file(&probe).map_err(|e| CliError::output(dir, e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::output(path, e))
}

fn load_source(
    source: &DataSource,
    symmetrize: bool,
    split: SplitFractions,
    seed: u64,
) -> CliResult<GraphDataset> {
    Ok(match source {
        DataSource::Dir(dir) => load_dataset(
            dir,
            &LoadOptions {
                symmetrize,
                split,
                split_seed: seed,
            },
        )?,
        DataSource::Sbm(spec) => {
            let g = generate_sbm(spec)?;
            let masks = split_masks(g.labels(), split, seed)?;
            g.with_masks(masks)?
        }
    })
}

pub fn gen_data(args: &GenDataArgs) -> CliResult<()> {
    let g = generate_sbm(&args.sbm)?;
    prepare_out(&args.out)?;
    write_dataset(&args.out, &g)?;
    let homophily = g
        .homophily_ratio()
        .map_or_else(|| "nan".to_string(), |h| format!("{h:.4}"));
    println!(
        "n={} edges={} classes={} homophily={homophily}",
        g.num_nodes(),
        g.num_edges(),
        g.num_classes()
    );
    Ok(())
}

/// Runs a training command and writes manifest, metrics and checkpoints to `out`.
pub fn train(config: &RunConfig, out: &Path) -> CliResult<()> {
    config.validate()?;
    prepare_out(out)?;
    write_text(&out.join("manifest.txt"), &config.to_manifest())?;
    let dataset = load_source(&config.source, config.symmetrize, config.split, config.seed)?;
    let model = config
        .model
        .resolve(dataset.num_features(), dataset.num_classes())?;
    match config.mode {
        Mode::Centralized => centralized(config, dataset, model, out),
        Mode::Federated => federated(config, dataset, model, out),
    }
}

fn centralized(
    config: &RunConfig,
    dataset: GraphDataset,
    model: ModelConfig,
    out: &Path,
) -> CliResult<()> {
    let dataset = if config.federated_split {
        let masks = federated_masks(&dataset, &config.fed_config(model.clone()))?;
        dataset.with_masks(masks)?
    } else {
        dataset
    };
    let watch = Stopwatch::start();
    let basis = load_or_compute(&dataset.normalized_laplacian(), config.cache_dir.as_deref())?;
    let eig_seconds = watch.seconds();
    let outcome = train_centralized(&dataset, &basis, model, &config.train_config())?;

    let mut rows = Vec::with_capacity(2 * outcome.history.len());
    for rec in &outcome.history {
        rows.push(MetricRow {
            round: rec.epoch,
            client_id: "0".into(),
            loss: Some(rec.loss),
            accuracy: Some(rec.train_accuracy),
            bytes_cum: 0,
            epoch_seconds: rec.seconds,
        });
        rows.push(MetricRow {
            round: rec.epoch,
            client_id: "global".into(),
            loss: None,
            accuracy: rec.test_accuracy,
            bytes_cum: 0,
            epoch_seconds: rec.seconds,
        });
    }
    write_metrics(&out.join("metrics.csv"), &rows)?;
    outcome.state.params.save(&out.join("checkpoint.bin"))?;
    let (_, gamma) = outcome.state.predict(&basis, dataset.features())?;
    write_filter_table(&out.join("filters.txt"), basis.eigenvalues(), &gamma)?;

    let ev = &outcome.evaluation;
    let selected = outcome
        .selected_epoch
        .map_or_else(|| "none".to_string(), |e| e.to_string());
    println!("eig_seconds={eig_seconds:.3}");
    println!(
        "epochs_run={} selected_epoch={selected}",
        outcome.history.len()
    );
    let show = |a: Option<f64>| a.map_or_else(|| "none".to_string(), |v| format!("{v:.4}"));
    println!(
        "train_accuracy={} val_accuracy={} test_accuracy={}",
        show(ev.train),
        show(ev.val),
        show(ev.test)
    );
    log::info!("test accuracy {:?}", ev.test);
    Ok(())
}

fn round_rows(rec: &RoundRecord) -> Vec<MetricRow> {
    let mut rows: Vec<MetricRow> = rec
        .clients
        .iter()
        .map(|c| MetricRow {
            round: rec.round,
            client_id: c.client.to_string(),
            loss: c.loss,
            accuracy: c.accuracy,
            bytes_cum: rec.bytes_cum,
            epoch_seconds: c.epoch_seconds,
        })
        .collect();
    rows.push(MetricRow {
        round: rec.round,
        client_id: "global".into(),
        loss: rec.global_loss,
        accuracy: rec.global_accuracy,
        bytes_cum: rec.bytes_cum,
        epoch_seconds: rec.epoch_seconds,
    });
    rows
}

fn federated(
    config: &RunConfig,
    dataset: GraphDataset,
    model: ModelConfig,
    out: &Path,
) -> CliResult<()> {
    let fed = config.fed_config(model);
    let every = config.checkpoint_every;
    let outcome = run_rounds_with(&dataset, &fed, |rec, params| {
        if every > 0 && (rec.round + 1) % every == 0 {
            params.save(&out.join(format!("checkpoint_round{:04}.bin", rec.round + 1)))?;
        }
        Ok(())
    })?;
    let rows: Vec<MetricRow> = outcome.records.iter().flat_map(round_rows).collect();
    write_metrics(&out.join("metrics.csv"), &rows)?;
    outcome.params.save(&out.join("checkpoint.bin"))?;

    let sizes: Vec<String> = outcome.client_sizes.iter().map(|s| s.to_string()).collect();
    println!("client_sizes={}", sizes.join(","));
    println!("eig_seconds={:.3}", outcome.eig_seconds.iter().sum::<f64>());
    match outcome.records.last() {
        Some(last) => println!(
            "rounds={} bytes_total={} global_accuracy={}",
            outcome.records.len(),
            last.bytes_cum,
            last.global_accuracy
                .map_or_else(|| "none".into(), |a| format!("{a:.4}"))
        ),
        None => println!("rounds=0 bytes_total=0"),
    }
    Ok(())
}

pub fn rerun(args: &RerunArgs) -> CliResult<()> {
    let text = fs::read_to_string(&args.manifest).map_err(|e| CliError::Input {
        path: args.manifest.clone(),
        source: e,
    })?;
    let config = RunConfig::from_manifest(&text, &args.manifest)?;
    train(&config, &args.out)
}

pub fn partition_report(args: &PartitionArgs) -> CliResult<()> {
    if args.seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let source = DataSource::from_args(&args.source)?;
    let dataset = load_source(
        &source,
        args.symmetrize,
        SplitFractions::default(),
        args.seed,
    )?;
    let classes = dataset.num_classes();
    let mut header = vec!["seed".to_string(), "client_id".into(), "nodes".into()];
    header.extend((0..classes).map(|c| format!("class_{c}")));
    header.extend(["max_share".to_string(), "tv".into()]);

    let mut records: Vec<Vec<String>> = Vec::with_capacity(args.seeds * args.clients);
    let (mut share_sum, mut tv_sum, mut reassigned) = (0.0, 0.0, 0usize);
    for s in 0..args.seeds {
        let seed = args.seed + s as u64;
        let partition = dirichlet_partition(dataset.labels(), args.clients, args.alpha, seed)?;
        reassigned += partition.reassigned.len();
        let hist = label_histograms(dataset.labels(), &partition, classes);
        let shares = max_class_shares(&hist);
        let tvs = tv_distances(&hist);
        for (c, h) in hist.iter().enumerate() {
            let mut rec = vec![
                seed.to_string(),
                c.to_string(),
                h.iter().sum::<usize>().to_string(),
            ];
            rec.extend(h.iter().map(|v| v.to_string()));
            rec.push(format!("{:?}", shares[c]));
            rec.push(format!("{:?}", tvs[c]));
            records.push(rec);
            share_sum += shares[c];
            tv_sum += tvs[c];
        }
    }
    let rows = records.len();
    let summary = format!(
        "rows={rows} clients={} alpha={} seeds={} mean_max_class_share={:.4} mean_tv_skew={:.4} reassigned_nodes={reassigned}",
        args.clients,
        args.alpha,
        args.seeds,
        share_sum / rows as f64,
        tv_sum / rows as f64
    );

    match &args.out {
        Some(path) => {
            let fail = |e: csv::Error| CliError::output(path, e.into());
            let mut w = csv::Writer::from_path(path).map_err(fail)?;
            w.write_record(&header).map_err(fail)?;
            for r in &records {
                w.write_record(r).map_err(fail)?;
            }
            w.flush().map_err(|e| CliError::output(path, e))?;
            println!("{summary}");
        }
        None => {
            let stdout = std::io::stdout();
            let fail = |e: csv::Error| CliError::output("<stdout>", e.into());
            let mut w = csv::Writer::from_writer(stdout.lock());
            w.write_record(&header).map_err(fail)?;
            for r in &records {
                w.write_record(r).map_err(fail)?;
            }
            w.flush().map_err(|e| CliError::output("<stdout>", e))?;
            eprintln!("{summary}");
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommRow {
    pub name: String,
    pub features: usize,
    pub classes: usize,
    pub params: usize,
    pub bytes: usize,
}

/// `(name, features, classes)` entries, later ones replacing earlier ones of the same name.
pub fn comm_table(model: &ModelSettings, extra: &[String]) -> CliResult<Vec<CommRow>> {
    let mut table: BTreeMap<String, (usize, usize)> = BUILTIN_DATASETS
        .iter()
        .map(|&(n, f, c)| (n.to_string(), (f, c)))
        .collect();
    for entry in extra {
        let parts: Vec<&str> = entry.split(':').collect();
        let parsed = match parts[..] {
            [name, f, c] if !name.is_empty() => {
                f.parse().ok().zip(c.parse().ok()).map(|fc| (name, fc))
            }
            _ => None,
        };
        let (name, fc) =
            parsed.ok_or_else(|| CliError::Usage(format!("config {entry:?} is not NAME:F:C")))?;
        table.insert(name.to_string(), fc);
    }
    table
        .into_iter()
        .map(|(name, (f, c))| {
            let config = model.resolve(f, c)?;
            let stats = comm_for_count(config.param_count());
            Ok(CommRow {
                name,
                features: f,
                classes: c,
                params: stats.params,
                bytes: stats.bytes,
            })
        })
        .collect()
}

pub fn comm_report(args: &CommArgs) -> CliResult<()> {
    let rows = comm_table(&ModelSettings::from_args(&args.model), &args.configs)?;
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    let fail = |e: std::io::Error| CliError::output("<stdout>", e);
    writeln!(lock, "dataset,features,classes,params,bytes").map_err(fail)?;
    for r in rows {
        writeln!(
            lock,
            "{},{},{},{},{}",
            r.name, r.features, r.classes, r.params, r.bytes
        )
        .map_err(fail)?;
    }
    Ok(())
}
