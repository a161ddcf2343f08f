//! Command-line front end: synthetic data generation, sequential or
//! partitioned cluster-finding runs, output comparison, benchmarking, and
//! randomized oracle checks.
//!
//! Exit codes: 0 success, 1 validation error, 2 comparison mismatch.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use maxbcg::catalog::{
    generate_synthetic_catalog, generate_synthetic_kcorr, load_kcorr, BCGParams, Galaxy,
    KCorrTable, PlantedCluster, RegionBounds,
};
use maxbcg::csvio;
use maxbcg::oracle::{brute_neighbors, brute_pipeline};
use maxbcg::partition::{run_partitioned, run_sequential, RunGeometry, RunResult};
use maxbcg::zone::{ZoneConfig, ZoneTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "maxbcg", about = "Zone-indexed maximum-likelihood galaxy cluster finder")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a seeded synthetic galaxy catalog and k-correction table
    Generate(GenerateArgs),
    /// Run the cluster-finding pipeline and write candidates/clusters/members
    FindClusters(FindArgs),
    /// Compare the output CSVs of two result directories
    Compare(CompareArgs),
    /// Run the pipeline at several partition counts and report timings
    Bench(BenchArgs),
    /// Randomized equivalence trials against the brute-force oracle
    OracleCheck(OracleArgs),
}

/// Key=value config file; explicit flags take precedence.
struct FileCfg(HashMap<String, String>);

impl FileCfg {
    fn load(path: Option<&Path>) -> Result<FileCfg> {
        let mut map = HashMap::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))?;
            for (ln, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .with_context(|| format!("config line {}: expected key=value", ln + 1))?;
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(FileCfg(map))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| anyhow::anyhow!("config key {key}: cannot parse {v:?}")),
        }
    }
}

fn resolve<T: FromStr>(flag: Option<T>, cfg: &FileCfg, key: &str, default: Option<T>) -> Result<T> {
    if let Some(v) = flag {
        return Ok(v);
    }
    if let Some(v) = cfg.get(key)? {
        return Ok(v);
    }
    default.with_context(|| format!("missing required option --{key}"))
}

fn parse_target(s: &str) -> Result<RegionBounds> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad --target {s:?}, expected MINRA,MAXRA,MINDEC,MAXDEC"))?;
    if parts.len() != 4 {
        bail!("bad --target {s:?}, expected 4 comma-separated values");
    }
    RegionBounds::new(parts[0], parts[1], parts[2], parts[3])
}

fn parse_cluster(s: &str) -> Result<PlantedCluster> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad --cluster {s:?}, expected RA,DEC,Z,MEMBERS"))?;
    if parts.len() != 4 {
        bail!("bad --cluster {s:?}, expected 4 comma-separated values");
    }
    Ok(PlantedCluster { ra: parts[0], dec: parts[1], z: parts[2], members: parts[3] as usize })
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Target region MINRA,MAXRA,MINDEC,MAXDEC; data is generated over the
    /// target expanded by two buffer widths
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    buffer: Option<f64>,
    /// RNG seed (mandatory: runs must be reproducible)
    #[arg(long)]
    seed: Option<u64>,
    /// Field galaxies to scatter uniformly
    #[arg(long)]
    n_field: Option<usize>,
    /// Planted cluster RA,DEC,Z,MEMBERS (repeatable)
    #[arg(long = "cluster")]
    clusters: Vec<String>,
    #[arg(long)]
    kcorr_steps: Option<u32>,
    #[arg(long)]
    radius_cap: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_generate(a: GenerateArgs) -> Result<i32> {
    let cfg = FileCfg::load(a.config.as_deref())?;
    let target = parse_target(&resolve(a.target, &cfg, "target", None::<String>)?)?;
    let buffer: f64 = resolve(a.buffer, &cfg, "buffer", Some(0.5))?;
    let seed: u64 = resolve(a.seed, &cfg, "seed", None)?;
    let n_field: usize = resolve(a.n_field, &cfg, "n-field", Some(0))?;
    let steps: u32 = resolve(a.kcorr_steps, &cfg, "kcorr-steps", Some(1000))?;
    let radius_cap: f64 = resolve(a.radius_cap, &cfg, "radius-cap", Some(0.5))?;
    let out: PathBuf = resolve(a.out, &cfg, "out", None)?;
    let clusters: Vec<PlantedCluster> =
        a.clusters.iter().map(|s| parse_cluster(s)).collect::<Result<_>>()?;

    let geometry = RunGeometry::new(target, buffer)?;
    let kcorr = generate_synthetic_kcorr(steps, radius_cap)?;
    let cat = generate_synthetic_catalog(&geometry.data_area, n_field, &clusters, &kcorr, seed)?;

    fs::create_dir_all(&out)?;
    let mut buf = Vec::new();
    csvio::write_galaxies(&mut buf, &cat.galaxies)?;
    fs::write(out.join("galaxies.csv"), buf)?;
    let mut buf = Vec::new();
    csvio::write_kcorr(&mut buf, &kcorr)?;
    fs::write(out.join("kcorr.csv"), buf)?;

    println!(
        "wrote {} galaxies ({} planted clusters, {} field) and {} k-correction rows to {}",
        cat.galaxies.len(),
        cat.planted.len(),
        n_field,
        kcorr.entries.len(),
        out.display()
    );
    Ok(0)
}

#[derive(Args)]
struct FindArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    galaxies: Option<PathBuf>,
    #[arg(long)]
    kcorr: Option<PathBuf>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    buffer: Option<f64>,
    #[arg(long)]
    partitions: Option<usize>,
    /// Zone height in arcseconds
    #[arg(long)]
    zone_height: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct RunSetup {
    galaxies: Vec<Galaxy>,
    kcorr: KCorrTable,
    geometry: RunGeometry,
    zone_config: ZoneConfig,
    partitions: usize,
    threads: usize,
}

/// Margin allowed between the data bounding box and the required data
/// area before coverage is declared deficient (absorbs the sampling gap
/// at the edges of a generated region).
const COVERAGE_SLACK_DEG: f64 = 0.05;

fn load_setup(a: &FindArgs) -> Result<RunSetup> {
    let cfg = FileCfg::load(a.config.as_deref())?;
    let galaxies_path: PathBuf = resolve(a.galaxies.clone(), &cfg, "galaxies", None)?;
    let kcorr_path: PathBuf = resolve(a.kcorr.clone(), &cfg, "kcorr", None)?;
    let target = parse_target(&resolve(a.target.clone(), &cfg, "target", None::<String>)?)?;
    let buffer: f64 = resolve(a.buffer, &cfg, "buffer", Some(0.5))?;
    let partitions: usize = resolve(a.partitions, &cfg, "partitions", Some(1))?;
    let zone_height_arcsec: f64 = resolve(a.zone_height, &cfg, "zone-height", Some(30.0))?;
    let threads: usize = resolve(a.threads, &cfg, "threads", Some(default_threads()))?;

    let text = fs::read_to_string(&galaxies_path)
        .with_context(|| format!("cannot read {}", galaxies_path.display()))?;
    let galaxies = csvio::read_galaxies_auto(&text)?;
    let kcorr_file = fs::File::open(&kcorr_path)
        .with_context(|| format!("cannot read {}", kcorr_path.display()))?;
    let kcorr = load_kcorr(kcorr_file)?;
    let geometry = RunGeometry::new(target, buffer)?;
    check_coverage(&galaxies, &geometry)?;

    Ok(RunSetup {
        galaxies,
        kcorr,
        geometry,
        zone_config: ZoneConfig { zone_height: zone_height_arcsec / 3600.0, epsilon: 1e-9 },
        partitions,
        threads,
    })
}

/// The candidate and data areas must be covered by the input catalog, or
/// border results would silently differ from a run with complete data.
fn check_coverage(galaxies: &[Galaxy], geometry: &RunGeometry) -> Result<()> {
    if galaxies.is_empty() {
        return Ok(());
    }
    let mut min_ra = f64::INFINITY;
    let mut max_ra = f64::NEG_INFINITY;
    let mut min_dec = f64::INFINITY;
    let mut max_dec = f64::NEG_INFINITY;
    for g in galaxies {
        min_ra = min_ra.min(g.ra);
        max_ra = max_ra.max(g.ra);
        min_dec = min_dec.min(g.dec);
        max_dec = max_dec.max(g.dec);
    }
    let p = &geometry.data_area;
    let checks = [
        ("min_ra", p.min_ra, min_ra, min_ra - p.min_ra),
        ("max_ra", p.max_ra, max_ra, p.max_ra - max_ra),
        ("min_dec", p.min_dec, min_dec, min_dec - p.min_dec),
        ("max_dec", p.max_dec, max_dec, p.max_dec - max_dec),
    ];
    for (name, needed, got, deficit) in checks {
        if deficit > COVERAGE_SLACK_DEG {
            bail!(
                "data does not cover the buffered data area at {name}: need {needed}, \
                 catalog reaches {got}"
            );
        }
    }
    Ok(())
}

fn execute(setup: &RunSetup) -> Result<RunResult> {
    let params = BCGParams::default();
    if setup.partitions == 1 {
        run_sequential(&setup.galaxies, &setup.geometry, &setup.kcorr, &params, &setup.zone_config)
    } else {
        run_partitioned(
            &setup.galaxies,
            &setup.geometry,
            &setup.kcorr,
            &params,
            &setup.zone_config,
            setup.partitions,
            setup.threads,
        )
    }
}

fn write_results(out: &Path, result: &RunResult) -> Result<()> {
    fs::create_dir_all(out)?;
    let mut buf = Vec::new();
    csvio::write_candidates(&mut buf, &result.candidates)?;
    fs::write(out.join("candidates.csv"), buf)?;
    let mut buf = Vec::new();
    csvio::write_candidates(&mut buf, &result.clusters)?;
    fs::write(out.join("clusters.csv"), buf)?;
    let mut buf = Vec::new();
    csvio::write_members(&mut buf, &result.members)?;
    fs::write(out.join("members.csv"), buf)?;
    let mut buf = Vec::new();
    csvio::write_metrics(&mut buf, result)?;
    fs::write(out.join("metrics.txt"), buf)?;
    Ok(())
}

fn cmd_find_clusters(a: FindArgs) -> Result<i32> {
    let cfg = FileCfg::load(a.config.as_deref())?;
    let out: PathBuf = resolve(a.out.clone(), &cfg, "out", None)?;
    let setup = load_setup(&a)?;
    let result = execute(&setup)?;
    write_results(&out, &result)?;
    println!(
        "{} candidates, {} clusters, {} members -> {}",
        result.candidates.len(),
        result.clusters.len(),
        result.members.len(),
        out.display()
    );
    Ok(0)
}

#[derive(Args)]
struct CompareArgs {
    dir_a: PathBuf,
    dir_b: PathBuf,
}

fn cmd_compare(a: CompareArgs) -> Result<i32> {
    let mut identical = true;
    for name in ["candidates.csv", "clusters.csv", "members.csv"] {
        let pa = a.dir_a.join(name);
        let pb = a.dir_b.join(name);
        let ta = fs::read_to_string(&pa).with_context(|| format!("missing {}", pa.display()))?;
        let tb = fs::read_to_string(&pb).with_context(|| format!("missing {}", pb.display()))?;
        if ta == tb {
            println!("{name}: identical ({} rows)", ta.lines().count().saturating_sub(1));
            continue;
        }
        identical = false;
        let mismatch = ta
            .lines()
            .zip(tb.lines())
            .position(|(la, lb)| la != lb)
            .map(|idx| idx + 1)
            .unwrap_or_else(|| ta.lines().count().min(tb.lines().count()) + 1);
        println!("{name}: DIFFERS at line {mismatch}");
    }
    Ok(if identical { 0 } else { 2 })
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    find: FindArgs,
    /// Comma-separated partition counts, e.g. 1,3
    #[arg(long, default_value = "1,3")]
    partition_counts: String,
}

fn cmd_bench(a: BenchArgs) -> Result<i32> {
    let counts: Vec<usize> = a
        .partition_counts
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .context("bad --partition-counts")?;
    let mut setup = load_setup(&a.find)?;
    let mut runs = Vec::new();
    for &n in &counts {
        setup.partitions = n;
        let t0 = Instant::now();
        let result = execute(&setup)?;
        runs.push((n, t0.elapsed().as_secs_f64(), result));
    }
    let mut buf = Vec::new();
    csvio::write_bench_report(&mut buf, &runs)?;
    print!("{}", String::from_utf8(buf)?);
    Ok(0)
}

#[derive(Args)]
struct OracleArgs {
    /// Randomized neighbor-search trials (plus trials/5 pipeline trials)
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long)]
    seed: u64,
}

fn cmd_oracle_check(a: OracleArgs) -> Result<i32> {
    let kcorr = generate_synthetic_kcorr(1000, 0.5)?;
    let params = BCGParams::default();
    let zcfg = ZoneConfig::default();
    let radii = [0.01, 0.05, 0.25, 0.5, 1.0];

    // neighbor-search trials
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    for trial in 0..a.trials {
        let trial_seed = rng.random::<u64>();
        let mut trng = ChaCha8Rng::seed_from_u64(trial_seed);
        let region = RegionBounds::new(5.0, 355.0, -85.0, 85.0)?;
        let galaxies = generate_synthetic_catalog(&region, 2000, &[], &kcorr, trial_seed)?.galaxies;
        let table = ZoneTable::build(galaxies.iter().map(|g| (g.objid, g.ra, g.dec)), zcfg);
        let ra = trng.random_range(7.0..353.0);
        let dec = trng.random_range(-83.0..83.0);
        let r = radii[trng.random_range(0..radii.len())];
        let mut fast = table.neighbors(ra, dec, r);
        let mut brute = brute_neighbors(&galaxies, ra, dec, r);
        fast.sort_by_key(|h| h.objid);
        brute.sort_by_key(|h| h.objid);
        let same = fast.len() == brute.len()
            && fast
                .iter()
                .zip(&brute)
                .all(|(x, y)| x.objid == y.objid && x.distance.to_bits() == y.distance.to_bits());
        if !same {
            println!(
                "FAIL neighbor trial {trial}: seed {trial_seed} query ({ra}, {dec}, {r}) \
                 zone={} brute={}",
                fast.len(),
                brute.len()
            );
            return Ok(2);
        }
    }

    // full-pipeline trials
    let pipeline_trials = a.trials.div_ceil(5).min(a.trials);
    for trial in 0..pipeline_trials {
        let trial_seed = rng.random::<u64>();
        let target = RegionBounds::new(20.0, 24.0, -1.5, 1.5)?;
        let geometry = RunGeometry::new(target, 0.5)?;
        let clusters = [PlantedCluster { ra: 22.0, dec: 0.0, z: 0.09, members: 4 }];
        let cat =
            generate_synthetic_catalog(&geometry.data_area, 300, &clusters, &kcorr, trial_seed)?;
        let brute = brute_pipeline(&cat.galaxies, &geometry, &kcorr, &params)?;
        let fast = run_sequential(&cat.galaxies, &geometry, &kcorr, &params, &zcfg)?;
        if brute.candidates != fast.candidates
            || brute.clusters != fast.clusters
            || brute.members != fast.members
        {
            println!("FAIL pipeline trial {trial}: seed {trial_seed}");
            return Ok(2);
        }
    }
    println!(
        "all {} neighbor trials and {} pipeline trials agree with the oracle",
        a.trials, pipeline_trials
    );
    Ok(0)
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Generate(a) => cmd_generate(a),
        Cmd::FindClusters(a) => cmd_find_clusters(a),
        Cmd::Compare(a) => cmd_compare(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::OracleCheck(a) => cmd_oracle_check(a),
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}
