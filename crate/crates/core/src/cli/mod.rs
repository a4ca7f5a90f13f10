//! `cpfilter` command-line front end.

mod scenario;

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cmr::FilterKind;
use crate::informativeness::{FeatureTuple, DEFAULT_TOP_L};
use crate::metric_learn::{
    learn_matrix_report, parse_dataset_csv, split_holdout, synthetic_heuristic_dataset, two_cluster_dataset,
    CategoryCode, FeatureRanges, FitnessMatrix, LabeledDataset, LearnConfig, MidpointClassifier,
};
use crate::netsim::{run_simulation, write_cdf_csv, write_metrics_csv, SimMetrics};
use crate::sorting::{radix_order, weighted_fitness_sort, QuantizedTuple};
use crate::vdu_codec::{
    decode_packet, decode_vdu, encode_packet, CmrPacket, DetectedObject, GpsFix, ImuBlock, MsgType, Vdu,
};

pub use scenario::{ScenarioError, ScenarioFile};

#[derive(Debug, Parser)]
#[command(name = "cpfilter", version, about = "Cooperative-perception filtering toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the broadcast simulation once per filter and write metrics CSVs.
    Simulate(SimulateArgs),
    /// Learn a fitness matrix from labeled tuples.
    Train(TrainArgs),
    /// Rank objects by informativeness and print the top L.
    Rank(RankArgs),
    /// Encode or decode wire frames.
    #[command(subcommand)]
    Packet(PacketCommand),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the scenario filter list; repeatable.
    #[arg(long = "filter")]
    pub filters: Vec<FilterKind>,
    /// Output directory; overrides `output_dir` in the scenario.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Generator {
    /// Street-scene mixture labeled by the attention heuristic.
    Heuristic,
    /// Two clusters separated by distance, `N` per class.
    TwoCluster,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["synthetic", "data"]))]
pub struct TrainArgs {
    /// Generate N synthetic tuples instead of reading a dataset.
    #[arg(long, value_name = "N")]
    pub synthetic: Option<usize>,
    #[arg(long, value_enum, default_value = "heuristic", requires = "synthetic")]
    pub generator: Generator,
    /// CSV of `d,v,r,c,label` rows.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = LearnConfig::default().iterations)]
    pub iterations: usize,
    /// Fraction held out for the accuracy check.
    #[arg(long, default_value_t = 0.2)]
    pub holdout: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RankAlgo {
    Fitness,
    Radix,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// CSV of `d,v,r,c` or `id,d,v,r,c` rows.
    #[arg(long)]
    pub data: PathBuf,
    /// Fitness matrix file; identity over default ranges when omitted.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TOP_L)]
    pub top: usize,
    #[arg(long, value_enum, default_value = "fitness")]
    pub algo: RankAlgo,
}

#[derive(Debug, Subcommand)]
pub enum PacketCommand {
    /// Encode a JSON packet description, or a synthetic sample, as hex.
    Encode {
        /// JSON file holding a packet (`ttl` plus `payload`).
        #[arg(long, conflicts_with = "sample")]
        json: Option<PathBuf>,
        /// Emit a deterministic sample packet with this many objects.
        #[arg(long, value_name = "OBJECTS")]
        sample: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Print the packet as JSON next to the hex.
        #[arg(long)]
        show_json: bool,
    },
    /// Decode a hex frame and list its fields.
    Decode {
        /// Hex string; read from stdin when omitted.
        hex: Option<String>,
        /// Input is a bare VDU without the TTL byte.
        #[arg(long)]
        vdu: bool,
        #[arg(long)]
        json: bool,
    },
}

/// Entry point used by the binary.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = std::io::stdout().lock();
    match run(cli, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

pub fn run(cli: Cli, out: &mut impl Write) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a, out),
        Command::Train(a) => cmd_train(&a, out),
        Command::Rank(a) => cmd_rank(&a, out),
        Command::Packet(p) => cmd_packet(&p, out),
    }
}

pub fn metrics_file_name(filter: FilterKind) -> String {
    format!("metrics_{}.csv", filter.name())
}

pub fn cdf_file_name(filter: FilterKind) -> String {
    format!("cdf_{}.csv", filter.name())
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    f(&mut w)
        .and_then(|_| w.flush())
        .with_context(|| format!("cannot write {}", path.display()))
}

pub fn cmd_simulate(a: &SimulateArgs, out: &mut impl Write) -> Result<()> {
    let mut scenario = ScenarioFile::load(&a.scenario)?;
    if let Some(seed) = a.seed {
        scenario.seed = seed;
    }
    let mut filters = if a.filters.is_empty() {
        scenario.filters.clone()
    } else {
        a.filters.clone()
    };
    filters.sort();
    filters.dedup();
    if filters.is_empty() {
        bail!("no filters to simulate");
    }
    let out_dir = match (&a.out, &scenario.output_dir) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) if d.is_relative() => a.scenario.parent().unwrap_or(Path::new(".")).join(d),
        (None, Some(d)) => d.clone(),
        (None, None) => PathBuf::from("."),
    };
    let configs: Vec<_> = filters.iter().map(|&f| scenario.sim_config(f)).collect();
    for c in &configs {
        c.validate()
            .with_context(|| format!("scenario {}", a.scenario.display()))?;
    }
    std::fs::create_dir_all(&out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;

    let results: Vec<SimMetrics> = std::thread::scope(|s| {
        let handles: Vec<_> = configs.iter().map(|c| s.spawn(move || run_simulation(c))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect::<Result<_, _>>()
    })?;

    for m in &results {
        write_file(&out_dir.join(metrics_file_name(m.filter)), |w| write_metrics_csv(m, w))?;
        write_file(&out_dir.join(cdf_file_name(m.filter)), |w| write_cdf_csv(m, w))?;
    }
    out.write_all(summary_table(&results).as_bytes())?;
    writeln!(out, "wrote {} file(s) to {}", results.len() * 2, out_dir.display())?;
    Ok(())
}

/// Filter comparison table; the last column is the change in received BSMs against `Hop`.
pub fn summary_table(results: &[SimMetrics]) -> String {
    let hop = results.iter().find(|m| m.filter == FilterKind::Hop).map(SimMetrics::mean_received);
    let mut s = format!(
        "{:<8} {:>8} {:>12} {:>12} {:>10} {:>10} {:>8} {:>8}\n",
        "filter", "vehicles", "generated", "received", "lost", "busy_s", "loss", "vs_hop"
    );
    for m in results {
        let rel = match hop {
            Some(h) if h > 0.0 => format!("{:+.1}%", 100.0 * (m.mean_received() / h - 1.0)),
            _ => "-".to_string(),
        };
        let _ = writeln!(
            s,
            "{:<8} {:>8} {:>12.1} {:>12.1} {:>10.1} {:>10.4} {:>8.4} {:>8}",
            m.filter.label(),
            m.vehicles.len(),
            m.mean_generated(),
            m.mean_received(),
            m.mean_lost(),
            m.mean_busy_time_s(),
            m.loss_ratio(),
            rel
        );
    }
    s
}

pub fn cmd_train(a: &TrainArgs, out: &mut impl Write) -> Result<()> {
    if !(0.0..1.0).contains(&a.holdout) {
        bail!("--holdout must be in [0, 1)");
    }
    let data: LabeledDataset = match (&a.data, a.synthetic) {
        (Some(path), _) => {
            let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
            parse_dataset_csv(f).with_context(|| format!("in {}", path.display()))?
        }
        (None, Some(n)) => match a.generator {
            Generator::Heuristic => synthetic_heuristic_dataset(n, a.seed),
            Generator::TwoCluster => two_cluster_dataset(n, a.seed),
        },
        (None, None) => bail!("either --synthetic or --data is required"),
    };
    let (train, test) = split_holdout(&data, a.holdout, a.seed);
    let cfg = LearnConfig {
        iterations: a.iterations,
        seed: a.seed,
        ..Default::default()
    };
    let report = learn_matrix_report(&train, &cfg)?;
    let fm = &report.matrix;
    fm.save(&a.out)?;
    let clf = MidpointClassifier::fit(fm, &train.tuples);
    writeln!(out, "tuples: {} train, {} holdout", train.len(), test.len())?;
    writeln!(out, "objective at identity: {:.6}", report.initial_objective)?;
    writeln!(out, "objective learned:     {:.6}", report.objective())?;
    if test.is_empty() {
        writeln!(out, "holdout accuracy: n/a")?;
    } else {
        writeln!(out, "holdout accuracy: {:.4}", clf.accuracy(fm, &test.tuples))?;
    }
    writeln!(out, "matrix written to {}", a.out.display())?;
    Ok(())
}

/// Objects to rank: `(id, features)`.
pub fn parse_objects_csv(input: impl Read) -> Result<Vec<(u64, FeatureTuple)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        if idx == 0 && record.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let nums: Vec<f64> = record
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| anyhow::anyhow!("line {line}: non-numeric field"))?;
        let (id, f) = match nums.as_slice() {
            [d, v, r, c] => (rows.len() as u64, [*d, *v, *r, *c]),
            [id, d, v, r, c] if *id >= 0.0 && id.fract() == 0.0 => (*id as u64, [*d, *v, *r, *c]),
            [_, _, _, _, _] => bail!("line {line}: id must be a nonnegative integer"),
            _ => bail!("line {line}: expected 4 or 5 fields, found {}", nums.len()),
        };
        let f = FeatureTuple::from_array(f);
        if !f.is_finite() {
            bail!("line {line}: non-finite feature");
        }
        rows.push((id, f));
    }
    Ok(rows)
}

pub fn cmd_rank(a: &RankArgs, out: &mut impl Write) -> Result<()> {
    let fm = match &a.matrix {
        Some(p) => FitnessMatrix::load(p)?,
        None => FitnessMatrix::identity(FeatureRanges::default()),
    };
    let f = File::open(&a.data).with_context(|| format!("cannot open {}", a.data.display()))?;
    let objects = parse_objects_csv(f).with_context(|| format!("in {}", a.data.display()))?;
    let features: Vec<FeatureTuple> = objects.iter().map(|(_, f)| *f).collect();

    let started = Instant::now();
    let order: Vec<usize> = match a.algo {
        RankAlgo::Fitness => weighted_fitness_sort(&features, &fm)?.into_iter().map(|r| r.index).collect(),
        RankAlgo::Radix => {
            let q: Vec<QuantizedTuple> = features
                .iter()
                .map(|f| QuantizedTuple::from_features(f, fm.normalization()))
                .collect();
            radix_order(&q)
        }
    };
    let elapsed = started.elapsed();

    writeln!(out, "{:>4} {:>8} {:>9} {:>9} {:>9} {:>6} {:>8}", "rank", "id", "d", "v", "r", "c", "score")?;
    for (rank, &i) in order.iter().take(a.top).enumerate() {
        let (id, t) = &objects[i];
        writeln!(
            out,
            "{:>4} {:>8} {:>9.2} {:>9.2} {:>9.2} {:>6.2} {:>8.4}",
            rank + 1,
            id,
            t.d,
            t.v,
            t.r,
            t.c,
            crate::metric_learn::fitness_score(t, &fm)
        )?;
    }
    writeln!(
        out,
        "ranked {} object(s) in {:.3} ms ({:?})",
        objects.len(),
        elapsed.as_secs_f64() * 1e3,
        a.algo
    )?;
    Ok(())
}

/// Deterministic packet with `objects` random objects.
pub fn sample_packet(objects: usize, seed: u64) -> CmrPacket {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let objects = (0..objects)
        .map(|i| DetectedObject {
            id: i as u16 + 1,
            position_x: rng.gen(),
            position_y: rng.gen(),
            velocity: rng.gen(),
            distance: rng.gen(),
            label: CategoryCode::from_code(rng.gen_range(0..9)).unwrap_or(CategoryCode::Car),
            confidence: rng.gen(),
        })
        .collect();
    CmrPacket {
        ttl: 2,
        payload: Vdu {
            msg_type: MsgType::Safety,
            timestamp: rng.gen(),
            gps: GpsFix::from_degrees(51.5 + rng.gen_range(-0.05..0.05), -0.12 + rng.gen_range(-0.05..0.05)),
            imu: ImuBlock {
                velocity: rng.gen_range(0..3000),
                direction: rng.gen_range(0..ImuBlock::DIRECTION_LIMIT),
                category: CategoryCode::Car.code(),
            },
            objects,
        },
    }
}

pub fn describe_vdu(v: &Vdu) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "msg_type: {:?}", v.msg_type);
    let _ = writeln!(s, "timestamp: {} ds", v.timestamp);
    let _ = writeln!(s, "gps: lat {:.5} deg, lon {:.5} deg", v.gps.lat_deg(), v.gps.lon_deg());
    let _ = writeln!(
        s,
        "imu: velocity {:.2} m/s, direction {:.2} deg, category {}",
        v.imu.speed_mps(),
        v.imu.heading_deg(),
        v.imu.category
    );
    let _ = writeln!(s, "objects: {}", v.objects.len());
    for o in &v.objects {
        let _ = writeln!(
            s,
            "  id {:>5}  pos ({:>3}, {:>3})  velocity {:.1} m/s  distance {:.0} m  label {}  confidence {:.3}",
            o.id,
            o.position_x,
            o.position_y,
            o.velocity_mps(),
            o.distance_m(),
            o.label.name(),
            o.confidence_unit()
        );
    }
    s
}

pub fn cmd_packet(p: &PacketCommand, out: &mut impl Write) -> Result<()> {
    match p {
        PacketCommand::Encode {
            json,
            sample,
            seed,
            show_json,
        } => {
            let packet = match (json, sample) {
                (Some(path), _) => {
                    let text =
                        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
                    serde_json::from_str(&text).with_context(|| format!("invalid packet JSON in {}", path.display()))?
                }
                (None, Some(n)) => sample_packet(*n, *seed),
                (None, None) => bail!("either --json or --sample is required"),
            };
            let bytes = encode_packet(&packet)?;
            if *show_json {
                writeln!(out, "{}", serde_json::to_string_pretty(&packet)?)?;
            }
            writeln!(out, "{}", hex::encode(&bytes))?;
            writeln!(out, "{} bytes", bytes.len())?;
        }
        PacketCommand::Decode { hex: text, vdu, json } => {
            let text = match text {
                Some(t) => t.clone(),
                None => {
                    let mut s = String::new();
                    std::io::stdin().read_to_string(&mut s)?;
                    s
                }
            };
            let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
            let bytes = hex::decode(&compact).context("input is not valid hex")?;
            if *vdu {
                let v = decode_vdu(&bytes)?;
                if *json {
                    writeln!(out, "{}", serde_json::to_string_pretty(&v)?)?;
                } else {
                    write!(out, "{}", describe_vdu(&v))?;
                }
            } else {
                let pkt = decode_packet(&bytes)?;
                if *json {
                    writeln!(out, "{}", serde_json::to_string_pretty(&pkt)?)?;
                } else {
                    writeln!(out, "ttl: {}", pkt.ttl)?;
                    write!(out, "{}", describe_vdu(&pkt.payload))?;
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn objects_csv_variants() {
        let rows = parse_objects_csv("d,v,r,c\n10,1,2,1\n20,0,0,3\n".as_bytes()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].0, 1);
        let rows = parse_objects_csv("7,10,1,2,1\n".as_bytes()).unwrap();
        assert_eq!(rows[0].0, 7);
        assert!(parse_objects_csv("1,2,3\n".as_bytes()).is_err());
        assert!(parse_objects_csv("1,2,x,4\n".as_bytes()).is_err());
    }

    #[test]
    fn sample_packet_is_deterministic_and_encodes() {
        let p = sample_packet(10, 3);
        assert_eq!(p, sample_packet(10, 3));
        assert_eq!(encode_packet(&p).unwrap().len(), 103);
    }

    #[test]
    fn packet_decode_reports_truncation() {
        let cmd = PacketCommand::Decode {
            hex: Some("02abcd".into()),
            vdu: false,
            json: false,
        };
        let err = cmd_packet(&cmd, &mut Vec::new()).unwrap_err();
        assert!(format!("{err:#}").to_lowercase().contains("truncated"), "{err:#}");
    }
}
