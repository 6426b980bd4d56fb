//! Command-line front end: argument parsing, configuration layering, and
//! file emission around `spdense-core`.
//!
//! Exit codes: 0 success, 1 operational failure, 2 a run that completed but
//! found an uncertified energy or an insignificant separation, 64 usage error.

pub mod config;
pub mod output;
pub mod selftest;

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use spdense_core::{certify_energy, estimate_spectrum, generator_set, sweep, DensityCertificate};

use config::RunConfig;
use output::{certificate_table, interval_table, json_document, sweep_table, write_file, Header, LyapunovRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_FINDING: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(
    name = "spdense",
    version,
    about = "Density certificates and Lyapunov spectra for two-channel Bernoulli-Anderson transfer matrices"
)]
#[command(allow_negative_numbers = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Certify density of the generated group at one or more energies.
    Certify(CertifyArgs),
    /// Certify an energy grid and refine around uncertified points.
    Sweep(SweepArgs),
    /// Estimate the Lyapunov spectrum at one energy.
    Lyapunov(LyapunovArgs),
    /// Run the built-in invariant suite.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug, Default)]
struct CertOpts {
    /// Diophantine search horizon M
    #[arg(long)]
    big_m: Option<String>,
    /// Operator-norm radius of the identity neighborhood
    #[arg(long)]
    delta: Option<String>,
    /// Relative singular-value cutoff for rank decisions
    #[arg(long)]
    svd_tol: Option<String>,
    /// Number of M <- 4M retries
    #[arg(long)]
    retries: Option<String>,
}

#[derive(Args, Debug, Default)]
struct LyapOpts {
    /// Bernoulli parameter
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    replicas: Option<String>,
    #[arg(long)]
    burn_in: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    stream: Option<String>,
}

#[derive(Args, Debug, Default)]
struct OutOpts {
    /// Flat key = value file; flags override it
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Root for run directories [env: SPDENSE_OUTPUT_DIR]
    #[arg(long)]
    output_dir: Option<String>,
    /// Comma-separated subset of csv,json
    #[arg(long)]
    format: Option<String>,
    /// Worker thread cap
    #[arg(long)]
    jobs: Option<String>,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    /// Energy above 2; repeat or comma-separate for several
    #[arg(long, value_delimiter = ',')]
    energy: Vec<String>,
    #[command(flatten)]
    cert: CertOpts,
    #[command(flatten)]
    out: OutOpts,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    emin: Option<String>,
    #[arg(long)]
    emax: Option<String>,
    /// Number of grid points, endpoints included
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    refine_steps: Option<String>,
    #[arg(long)]
    margin_minima: Option<String>,
    /// Lyapunov cross-check on every Nth certified point; 0 disables
    #[arg(long)]
    lyapunov_every: Option<String>,
    #[command(flatten)]
    cert: CertOpts,
    #[command(flatten)]
    lyap: LyapOpts,
    #[command(flatten)]
    out: OutOpts,
}

#[derive(Args, Debug)]
struct LyapunovArgs {
    #[arg(long, value_delimiter = ',')]
    energy: Vec<String>,
    #[command(flatten)]
    lyap: LyapOpts,
    #[command(flatten)]
    out: OutOpts,
}

#[derive(Args, Debug)]
struct SelftestArgs {
    /// Print the results as JSON
    #[arg(long)]
    json: bool,
    #[arg(long, hide = true, default_value_t = 1.0)]
    tol_scale: f64,
}

type Pairs<'a> = Vec<(&'static str, &'a Option<String>)>;

impl CertOpts {
    fn pairs(&self) -> Pairs<'_> {
        vec![
            ("big-m", &self.big_m),
            ("delta", &self.delta),
            ("svd-tol", &self.svd_tol),
            ("retries", &self.retries),
        ]
    }
}

impl LyapOpts {
    fn pairs(&self) -> Pairs<'_> {
        vec![
            ("p", &self.p),
            ("steps", &self.steps),
            ("replicas", &self.replicas),
            ("burn-in", &self.burn_in),
            ("seed", &self.seed),
            ("stream", &self.stream),
        ]
    }
}

impl OutOpts {
    fn pairs(&self) -> Pairs<'_> {
        vec![
            ("output-dir", &self.output_dir),
            ("format", &self.format),
            ("jobs", &self.jobs),
        ]
    }
}

fn layered(out: &OutOpts, energy: &[String], flags: Pairs<'_>) -> Result<RunConfig, String> {
    let mut cfg = RunConfig::from_env();
    if let Some(path) = &out.config {
        cfg.apply_file(path)?;
    }
    if !energy.is_empty() {
        cfg.apply("energy", &energy.join(","))?;
    }
    for (k, v) in flags.into_iter().chain(out.pairs()) {
        if let Some(v) = v {
            cfg.apply(k, v)?;
        }
    }
    Ok(cfg)
}

fn usage(msg: &str) -> i32 {
    eprintln!("error: {msg}");
    eprintln!("run `spdense --help` for usage");
    EXIT_USAGE
}

fn set_jobs(cfg: &RunConfig) {
    if let Some(n) = cfg.jobs {
        // Fails only if the pool already exists, e.g. on a second call in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn emit(cfg: &RunConfig, header: &Header, csv: &[(&str, output::Table)], json: (&str, Vec<u8>)) -> Result<()> {
    let dir = header.run_dir(&cfg.output_dir);
    if cfg.formats.csv {
        for (name, table) in csv {
            let path = write_file(&dir, name, &table.render(header)?)?;
            println!("wrote {}", path.display());
        }
    }
    if cfg.formats.json {
        let path = write_file(&dir, json.0, &json.1)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn report_failure(err: impl std::fmt::Display) -> i32 {
    eprintln!("error: {err}");
    EXIT_FAILURE
}

fn cmd_certify(args: CertifyArgs) -> i32 {
    let cfg = match layered(&args.out, &args.energy, args.cert.pairs()) {
        Ok(c) => c,
        Err(e) => return usage(&e),
    };
    if let Err(e) = cfg.validate_certify() {
        return usage(&e);
    }
    set_jobs(&cfg);
    let ccfg = cfg.certify_config();
    let mut certs: Vec<DensityCertificate> = Vec::new();
    for &e in &cfg.energies {
        match certify_energy(e, &ccfg) {
            Ok(c) => certs.push(c),
            Err(err) => return report_failure(err),
        }
    }
    for c in &certs {
        match &c.diagnostic {
            Some(d) if !c.certified => println!("E = {}: uncertified (rank {}): {d}", c.e, c.rank),
            _ => println!(
                "E = {}: certified={} rank={} margin={:.3e} m={:?}",
                c.e,
                c.certified,
                c.rank,
                c.rank_margin,
                c.exponents()
            ),
        }
    }
    let header = Header::new("certify", cfg.header_config("certify"));
    let written = json_document(&header, "certificates", &certs).and_then(|j| {
        emit(
            &cfg,
            &header,
            &[("certificates.csv", certificate_table(&certs))],
            ("certificates.json", j),
        )
    });
    if let Err(e) = written {
        return report_failure(format!("{e:#}"));
    }
    if certs.iter().all(|c| c.certified) {
        EXIT_OK
    } else {
        EXIT_FINDING
    }
}

fn cmd_sweep(args: SweepArgs) -> i32 {
    let flags: Pairs<'_> = vec![
        ("emin", &args.emin),
        ("emax", &args.emax),
        ("grid", &args.grid),
        ("refine-steps", &args.refine_steps),
        ("margin-minima", &args.margin_minima),
        ("lyapunov-every", &args.lyapunov_every),
    ]
    .into_iter()
    .chain(args.cert.pairs())
    .chain(args.lyap.pairs())
    .collect();
    let cfg = match layered(&args.out, &[], flags) {
        Ok(c) => c,
        Err(e) => return usage(&e),
    };
    if let Err(e) = cfg.validate_sweep() {
        return usage(&e);
    }
    set_jobs(&cfg);
    let report = match sweep(&cfg.sweep_config()) {
        Ok(r) => r,
        Err(e) => return report_failure(e),
    };
    let n_unc = report.certificates.iter().filter(|c| !c.certified).count();
    let inconsistent = report.lyapunov_checks.iter().filter(|c| !c.check.consistent).count();
    println!(
        "{} grid points, {} uncertified, {} suspected intervals, {} refinement evaluations, {} Lyapunov checks ({} inconsistent)",
        report.certificates.len(),
        n_unc,
        report.suspected_exceptional.len(),
        report.refinements.len(),
        report.lyapunov_checks.len(),
        inconsistent
    );
    for s in &report.suspected_exceptional {
        println!(
            "suspected exceptional: [{}, {}] min rank {}",
            s.e_lo, s.e_hi, s.min_rank
        );
    }
    let header = Header::new("sweep", cfg.header_config("sweep"));
    let written = json_document(&header, "report", &report).and_then(|j| {
        emit(
            &cfg,
            &header,
            &[
                ("sweep.csv", sweep_table(&report)),
                ("intervals.csv", interval_table(&report)),
            ],
            ("sweep.json", j),
        )
    });
    if let Err(e) = written {
        return report_failure(format!("{e:#}"));
    }
    if n_unc == 0 && inconsistent == 0 {
        EXIT_OK
    } else {
        EXIT_FINDING
    }
}

fn cmd_lyapunov(args: LyapunovArgs) -> i32 {
    let cfg = match layered(&args.out, &args.energy, args.lyap.pairs()) {
        Ok(c) => c,
        Err(e) => return usage(&e),
    };
    if let Err(e) = cfg.validate_lyapunov() {
        return usage(&e);
    }
    set_jobs(&cfg);
    let estimate = match generator_set(cfg.energies[0], cfg.p)
        .and_then(|g| estimate_spectrum(&g, cfg.lyapunov_params(), cfg.seed))
    {
        Ok(est) => est,
        Err(e) => return report_failure(e),
    };
    let record = LyapunovRecord::new(estimate);
    println!(
        "E = {}: gamma = {:?} stderr = {:?} significant = {}",
        record.estimate.e, record.estimate.gammas, record.estimate.stderrs, record.significant
    );
    let header = Header::new("lyapunov", cfg.header_config("lyapunov"));
    let written = json_document(&header, "lyapunov", &record)
        .and_then(|j| emit(&cfg, &header, &[("lyapunov.csv", record.table())], ("lyapunov.json", j)));
    if let Err(e) = written {
        return report_failure(format!("{e:#}"));
    }
    if record.significant {
        EXIT_OK
    } else {
        EXIT_FINDING
    }
}

fn cmd_selftest(args: SelftestArgs) -> i32 {
    let results = selftest::run(args.tol_scale);
    if args.json {
        match serde_json::to_string_pretty(&results) {
            Ok(s) => println!("{s}"),
            Err(e) => return report_failure(e),
        }
    } else {
        for r in &results {
            let tag = if r.pass { "PASS" } else { "FAIL" };
            println!("{tag} {:<28} defect {:.3e} < {:.3e}", r.name, r.defect, r.tolerance);
        }
    }
    if results.iter().all(|r| r.pass) {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Certify(a) => cmd_certify(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Lyapunov(a) => cmd_lyapunov(a),
        Command::Selftest(a) => cmd_selftest(a),
    }
}
