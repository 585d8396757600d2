//! The five subcommands: sweeps, distances, finite-size tables, the
//! verification suite and Monte Carlo sampling reports.

use clap::Args;

use netkit::exec;
use netkit::gaussian::link_params;
use netkit::montecarlo;
use netkit::network::{
    network_conditional_cm, network_conditional_cm_oracle, pair_conditional_cm,
    secret_sharing_cm, squeezed_pair_cm, squeezed_ss_cm, NetworkConfig, OraclePath, SplitConfig,
};
use netkit::rates::{
    self, conferencing_holevo, conferencing_rate, eta_from_distance, finite_size_rate,
    max_distance, optimize_mu, plob_bound, secret_sharing_rate, DistanceMap, FiniteSizeParams,
    Protocol, Scenario, MU_RANGE,
};

use crate::output::{Cell, Table};
use crate::{load_common, write_table, CliError, CommonOpts};

// ---------------------------------------------------------------------------
// shared parsing

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError> {
    let items: Result<Vec<T>, _> = s.split(',').map(|t| t.trim().parse::<T>()).collect();
    items.map_err(|_| CliError::Usage(format!("cannot parse {what} list '{s}'")))
}

fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!(
            "distance grid must be start:stop:step, got '{s}'"
        )));
    }
    let nums: Result<Vec<f64>, _> = parts.iter().map(|p| p.trim().parse::<f64>()).collect();
    let nums = nums.map_err(|_| CliError::Usage(format!("cannot parse grid '{s}'")))?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if step <= 0.0 || stop < start {
        return Err(CliError::Usage(format!(
            "grid '{s}' must have stop >= start and step > 0"
        )));
    }
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let d = start + step * k as f64;
        if d > stop + 1e-9 {
            break;
        }
        out.push(d);
        k += 1;
    }
    Ok(out)
}

fn check_increasing(label: &str, xs: &[f64]) -> Result<(), CliError> {
    if xs.is_empty() {
        return Err(CliError::Usage(format!("{label} grid is empty")));
    }
    for w in xs.windows(2) {
        if w[1] <= w[0] {
            return Err(CliError::Usage(format!(
                "{label} grid must be strictly increasing"
            )));
        }
    }
    Ok(())
}

fn parse_split(s: &str) -> Result<(usize, usize), CliError> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::Usage(format!("split must be 'A,B', got '{s}'")));
    }
    let a = parts[0].trim().parse::<usize>();
    let b = parts[1].trim().parse::<usize>();
    match (a, b) {
        (Ok(a), Ok(b)) => Ok((a, b)),
        _ => Err(CliError::Usage(format!("split must be 'A,B', got '{s}'"))),
    }
}

fn parse_protocol(s: &str) -> Result<Protocol, CliError> {
    s.parse::<Protocol>()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn split_for(
    protocol: Protocol,
    n: usize,
    explicit: Option<(usize, usize)>,
    dummies: Option<u32>,
) -> Result<Option<(usize, usize)>, CliError> {
    if !protocol.is_secret_sharing() {
        return Ok(None);
    }
    if let Some(d) = dummies {
        if n % 2 != 0 {
            return Err(CliError::Usage(format!(
                "--dummies needs an even user count, got {n}"
            )));
        }
        let half = n / 2;
        return match d {
            0 => Ok(Some((half, half))),
            1 => Ok(Some((half - 1, half))),
            2 => Ok(Some((half - 1, half - 1))),
            other => Err(CliError::Usage(format!(
                "--dummies must be 0, 1 or 2, got {other}"
            ))),
        };
    }
    match explicit {
        Some(s) => Ok(Some(s)),
        // default full-house split, as balanced as the parity allows
        None => Ok(Some((n / 2, n - n / 2))),
    }
}

fn opt_cell(v: Option<(usize, usize)>) -> (Cell, Cell) {
    match v {
        Some((a, b)) => (Cell::I(a as i64), Cell::I(b as i64)),
        None => (Cell::Empty, Cell::Empty),
    }
}

// ---------------------------------------------------------------------------
// rate

#[derive(Debug, Args)]
pub struct RateArgs {
    #[command(flatten)]
    common: CommonOpts,

    /// conference | secret-sharing | squeezed-conference | squeezed-secret-sharing
    #[arg(long)]
    protocol: Option<String>,

    /// User counts, comma separated
    #[arg(long)]
    n: Option<String>,

    /// Ensemble sizes "A,B" for secret-sharing protocols
    #[arg(long)]
    split: Option<String>,

    /// Mean thermal photon numbers, comma separated
    #[arg(long)]
    nbar: Option<String>,

    /// Link distances in km, comma separated
    #[arg(long)]
    distance: Option<String>,

    /// Distance grid start:stop:step in km
    #[arg(long)]
    distance_grid: Option<String>,

    /// Fix the modulation instead of optimizing over [1, 1e6]
    #[arg(long)]
    mu: Option<f64>,

    /// Fiber attenuation in dB/km
    #[arg(long)]
    attenuation: Option<f64>,

    /// Append a composable finite-size rate column
    #[arg(long)]
    finite_size: bool,

    /// Block size n for the finite-size column
    #[arg(long)]
    block_size: Option<f64>,

    #[command(flatten)]
    fs: FsFlags,
}

#[derive(Debug, Clone, Args)]
pub struct FsFlags {
    /// Error-correction efficiency
    #[arg(long)]
    xi: Option<f64>,

    /// Discretization bits per quadrature
    #[arg(long)]
    bits: Option<u32>,

    #[arg(long)]
    delta_s: Option<f64>,

    #[arg(long)]
    delta_ec: Option<f64>,

    #[arg(long)]
    delta_pe: Option<f64>,

    /// Success (non-abort) probability
    #[arg(long)]
    p: Option<f64>,
}

impl FsFlags {
    /// Resolves the security parameters; the block size keeps its default
    /// and is overridden by each command's own flag.
    fn resolve(&self, cfg: &crate::config::FileConfig) -> Result<FiniteSizeParams, CliError> {
        let d = FiniteSizeParams::default();
        let get = |flag: &Option<f64>, key: &str, dflt: f64| -> Result<f64, CliError> {
            Ok(cfg.resolve(flag, key).map_err(CliError::Usage)?.unwrap_or(dflt))
        };
        let fs = FiniteSizeParams {
            ec_efficiency: get(&self.xi, "xi", d.ec_efficiency)?,
            block_size: d.block_size,
            bits_per_quadrature: cfg
                .resolve(&self.bits, "bits")
                .map_err(CliError::Usage)?
                .unwrap_or(d.bits_per_quadrature),
            delta_s: get(&self.delta_s, "delta-s", d.delta_s)?,
            delta_ec: get(&self.delta_ec, "delta-ec", d.delta_ec)?,
            delta_pe: get(&self.delta_pe, "delta-pe", d.delta_pe)?,
            success_prob: get(&self.p, "p", d.success_prob)?,
            aep_log_base: d.aep_log_base,
        };
        fs.validate().map_err(CliError::from)?;
        Ok(fs)
    }
}

pub fn cmd_rate(args: RateArgs) -> Result<(), CliError> {
    let (cfg, format, out) = load_common(&args.common)?;
    let protocol = parse_protocol(
        &cfg.resolve(&args.protocol, "protocol")
            .map_err(CliError::Usage)?
            .unwrap_or_else(|| "conference".to_string()),
    )?;
    let ns: Vec<usize> = parse_list(
        &cfg.resolve(&args.n, "n")
            .map_err(CliError::Usage)?
            .unwrap_or_else(|| "2,10,50".to_string()),
        "user count",
    )?;
    let nbars: Vec<f64> = parse_list(
        &cfg.resolve(&args.nbar, "nbar")
            .map_err(CliError::Usage)?
            .unwrap_or_else(|| "0,0.05".to_string()),
        "nbar",
    )?;
    let distance_flag = cfg
        .resolve(&args.distance, "distance")
        .map_err(CliError::Usage)?;
    let grid_flag = cfg
        .resolve(&args.distance_grid, "distance-grid")
        .map_err(CliError::Usage)?;
    let distances = match (distance_flag, grid_flag) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "--distance and --distance-grid are mutually exclusive".into(),
            ))
        }
        (Some(list), None) => parse_list(&list, "distance")?,
        (None, Some(grid)) => parse_grid(&grid)?,
        (None, None) => parse_grid("0:0.2:0.005")?,
    };
    check_increasing("distance", &distances)?;
    let attenuation = cfg
        .resolve(&args.attenuation, "attenuation")
        .map_err(CliError::Usage)?
        .unwrap_or(0.2);
    let mu_fixed = cfg.resolve(&args.mu, "mu").map_err(CliError::Usage)?;
    let explicit_split = match cfg.resolve(&args.split, "split").map_err(CliError::Usage)? {
        Some(s) => Some(parse_split(&s)?),
        None => None,
    };
    let fs = if args.finite_size {
        let mut fs = args.fs.resolve(&cfg)?;
        if let Some(b) = cfg
            .resolve(&args.block_size, "block-size")
            .map_err(CliError::Usage)?
        {
            fs.block_size = b;
        }
        fs.validate().map_err(CliError::from)?;
        Some(fs)
    } else {
        None
    };

    let mut params = Vec::new();
    for &n in &ns {
        let split = split_for(protocol, n, explicit_split, None)?;
        for &d in &distances {
            for &nbar in &nbars {
                params.push((n, split, d, nbar));
            }
        }
    }

    let rows: Vec<Result<Vec<Cell>, netkit::Error>> =
        exec::map(&params, |&(n, split, d, nbar)| {
            let sc = Scenario::new(protocol, n, split, nbar)?;
            let map = DistanceMap::with_attenuation(d, attenuation)?;
            let eta = eta_from_distance(&map);
            let rep = match mu_fixed {
                Some(mu) => sc.report(eta, mu)?,
                None => optimize_mu(&sc, eta, MU_RANGE)?.1,
            };
            let plob = plob_bound(eta)?;
            let (na, nb) = opt_cell(rep.split);
            let mut row = vec![
                Cell::S(protocol.as_str().to_string()),
                Cell::I(n as i64),
                na,
                nb,
                Cell::F(d),
                Cell::F(d * 1000.0),
                Cell::F(eta),
                Cell::F(nbar),
                Cell::F(rep.mu),
                Cell::F(rep.mutual_info),
                Cell::F(rep.holevo),
                Cell::F(rep.rate),
                Cell::F(plob),
            ];
            if let Some(fs) = &fs {
                row.push(Cell::F(finite_size_rate(rep.mutual_info, rep.holevo, fs)?));
                row.push(Cell::F(fs.block_size));
            }
            Ok(row)
        });
    let rows: Vec<Vec<Cell>> = rows.into_iter().collect::<Result<_, _>>()?;

    let mut columns = vec![
        "protocol", "n", "n_a", "n_b", "d_km", "d_m", "eta", "nbar", "mu", "mi_bits",
        "holevo_bits", "rate_bits", "plob_bits",
    ];
    let mut comments = vec![
        "netkit rate sweep".to_string(),
        "columns: protocol, user count n, ensemble sizes n_a/n_b (secret sharing), \
         link distance d_km/d_m, transmissivity eta, thermal photons nbar, modulation mu, \
         mutual information, Holevo bound and rate in bits per use, repeaterless bound plob_bits"
            .to_string(),
        format!(
            "mu: {} over [1, 1e6]; attenuation {attenuation} dB/km",
            if mu_fixed.is_some() { "fixed" } else { "optimized" }
        ),
    ];
    if fs.is_some() {
        columns.push("fs_rate_bits");
        columns.push("block_size");
        comments.push("fs_rate_bits: composable finite-size rate at block_size uses".to_string());
    }
    let table = Table {
        schema: "netkit.rate.v1",
        comments,
        columns,
        rows,
    };
    write_table(&table, format, &out)
}

// ---------------------------------------------------------------------------
// max-distance

#[derive(Debug, Args)]
pub struct MaxDistanceArgs {
    #[command(flatten)]
    common: CommonOpts,

    /// conference | secret-sharing | squeezed-conference | squeezed-secret-sharing
    #[arg(long)]
    protocol: Option<String>,

    /// User counts, comma separated
    #[arg(long)]
    n: Option<String>,

    /// Ensemble sizes "A,B" for secret-sharing protocols
    #[arg(long)]
    split: Option<String>,

    /// Derive the split from N: 0 = full house, 1 or 2 non-cooperating users
    #[arg(long)]
    dummies: Option<u32>,

    /// Mean thermal photon number
    #[arg(long)]
    nbar: Option<f64>,

    /// Fiber attenuation in dB/km
    #[arg(long)]
    attenuation: Option<f64>,
}

pub fn cmd_max_distance(args: MaxDistanceArgs) -> Result<(), CliError> {
    let (cfg, format, out) = load_common(&args.common)?;
    let protocol = parse_protocol(
        &cfg.resolve(&args.protocol, "protocol")
            .map_err(CliError::Usage)?
            .unwrap_or_else(|| "conference".to_string()),
    )?;
    let ns: Vec<usize> = parse_list(
        &cfg.resolve(&args.n, "n")
            .map_err(CliError::Usage)?
            .unwrap_or_else(|| "2,5,10,20,50".to_string()),
        "user count",
    )?;
    let nbar = cfg
        .resolve(&args.nbar, "nbar")
        .map_err(CliError::Usage)?
        .unwrap_or(0.0);
    let attenuation = cfg
        .resolve(&args.attenuation, "attenuation")
        .map_err(CliError::Usage)?
        .unwrap_or(0.2);
    let explicit_split = match cfg.resolve(&args.split, "split").map_err(CliError::Usage)? {
        Some(s) => Some(parse_split(&s)?),
        None => None,
    };
    let splits: Vec<Option<(usize, usize)>> = ns
        .iter()
        .map(|&n| split_for(protocol, n, explicit_split, args.dummies))
        .collect::<Result<_, _>>()?;

    let params: Vec<(usize, Option<(usize, usize)>)> =
        ns.iter().cloned().zip(splits).collect();
    let rows: Vec<Result<Vec<Cell>, netkit::Error>> = exec::map(&params, |&(n, split)| {
        let sc = Scenario::new(protocol, n, split, nbar)?;
        let d = max_distance(&sc, attenuation)?;
        let (na, nb) = opt_cell(split);
        Ok(vec![
            Cell::S(protocol.as_str().to_string()),
            Cell::I(n as i64),
            na,
            nb,
            Cell::F(nbar),
            Cell::F(d),
            Cell::F(d * 1000.0),
        ])
    });
    let rows: Vec<Vec<Cell>> = rows.into_iter().collect::<Result<_, _>>()?;

    let table = Table {
        schema: "netkit.max-distance.v1",
        comments: vec![
            "netkit maximum secure distance".to_string(),
            "columns: protocol, user count n, ensemble sizes n_a/n_b, thermal photons nbar, \
             largest link distance with positive mu-optimized rate in km and m"
                .to_string(),
            format!("attenuation {attenuation} dB/km; bisection to 1e-4 km"),
        ],
        columns: vec!["protocol", "n", "n_a", "n_b", "nbar", "d_max_km", "d_max_m"],
        rows,
    };
    write_table(&table, format, &out)
}

// ---------------------------------------------------------------------------
// finite-size

#[derive(Debug, Args)]
pub struct FiniteSizeArgs {
    #[command(flatten)]
    common: CommonOpts,

    /// conference | secret-sharing | squeezed-conference | squeezed-secret-sharing
    #[arg(long)]
    protocol: Option<String>,

    /// Number of users
    #[arg(long)]
    n: Option<usize>,

    /// Ensemble sizes "A,B" for secret-sharing protocols
    #[arg(long)]
    split: Option<String>,

    /// Mean thermal photon number
    #[arg(long)]
    nbar: Option<f64>,

    /// Link distance in km
    #[arg(long)]
    distance: Option<f64>,

    /// Fix the modulation instead of optimizing
    #[arg(long)]
    mu: Option<f64>,

    /// Fiber attenuation in dB/km
    #[arg(long)]
    attenuation: Option<f64>,

    /// Block sizes, comma separated (decade grid by default)
    #[arg(long)]
    block_size: Option<String>,

    /// Worst-case transmissivity offset for parameter estimation
    #[arg(long)]
    eta_offset: Option<f64>,

    /// Worst-case thermal-photon offset for parameter estimation
    #[arg(long)]
    nbar_offset: Option<f64>,

    #[command(flatten)]
    fs: FsFlags,
}

pub fn cmd_finite_size(args: FiniteSizeArgs) -> Result<(), CliError> {
    let (cfg, format, out) = load_common(&args.common)?;
    let protocol = parse_protocol(
        &cfg.resolve(&args.protocol, "protocol")
            .map_err(CliError::Usage)?
            .unwrap_or_else(|| "conference".to_string()),
    )?;
    let n = cfg
        .resolve(&args.n, "n")
        .map_err(CliError::Usage)?
        .unwrap_or(10);
    let nbar = cfg
        .resolve(&args.nbar, "nbar")
        .map_err(CliError::Usage)?
        .unwrap_or(0.05);
    let d = cfg
        .resolve(&args.distance, "distance")
        .map_err(CliError::Usage)?
        .unwrap_or(0.05);
    let attenuation = cfg
        .resolve(&args.attenuation, "attenuation")
        .map_err(CliError::Usage)?
        .unwrap_or(0.2);
    let blocks: Vec<f64> = parse_list(
        &cfg.resolve(&args.block_size, "block-size")
            .map_err(CliError::Usage)?
            .unwrap_or_else(|| "1e6,1e7,1e8,1e9,1e10,1e11,1e12".to_string()),
        "block size",
    )?;
    check_increasing("block size", &blocks)?;
    let eta_offset = cfg
        .resolve(&args.eta_offset, "eta-offset")
        .map_err(CliError::Usage)?
        .unwrap_or(0.0);
    let nbar_offset = cfg
        .resolve(&args.nbar_offset, "nbar-offset")
        .map_err(CliError::Usage)?
        .unwrap_or(0.0);
    let explicit_split = match cfg.resolve(&args.split, "split").map_err(CliError::Usage)? {
        Some(s) => Some(parse_split(&s)?),
        None => None,
    };
    let split = split_for(protocol, n, explicit_split, None)?;
    let fs_base = args.fs.resolve(&cfg)?;
    let mu_fixed = cfg.resolve(&args.mu, "mu").map_err(CliError::Usage)?;

    let sc = Scenario::new(protocol, n, split, nbar)?;
    let map = DistanceMap::with_attenuation(d, attenuation)?;
    let eta = eta_from_distance(&map);
    let rep = match mu_fixed {
        Some(mu) => sc.report(eta, mu)?,
        None => optimize_mu(&sc, eta, MU_RANGE)?.1,
    };
    // worst-case Holevo from the confidence-widened channel at the same mu
    let chi_worst = if eta_offset > 0.0 || nbar_offset > 0.0 {
        let widened = rates::widened_link(
            &link_params(rep.mu, eta, nbar).map_err(CliError::from)?,
            eta_offset,
            nbar_offset,
        )?;
        let sc_w = Scenario::new(protocol, n, split, widened.nbar)?;
        sc_w.report(widened.eta, rep.mu)?.holevo
    } else {
        rep.holevo
    };

    let asymptotic = fs_base.ec_efficiency * rep.mutual_info - chi_worst;
    let (na, nb) = opt_cell(rep.split);
    let base_row = |block: Cell, rate: f64| -> Vec<Cell> {
        vec![
            Cell::S(protocol.as_str().to_string()),
            Cell::I(n as i64),
            na.clone(),
            nb.clone(),
            Cell::F(d),
            Cell::F(eta),
            Cell::F(nbar),
            Cell::F(rep.mu),
            Cell::F(fs_base.ec_efficiency),
            Cell::F(rep.mutual_info),
            Cell::F(chi_worst),
            block,
            Cell::F(rate),
        ]
    };
    let mut rows = Vec::new();
    for &b in &blocks {
        let fs = FiniteSizeParams {
            block_size: b,
            ..fs_base
        };
        rows.push(base_row(Cell::F(b), finite_size_rate(rep.mutual_info, chi_worst, &fs)?));
    }
    rows.push(base_row(Cell::S("inf".to_string()), asymptotic));

    let table = Table {
        schema: "netkit.finite-size.v1",
        comments: vec![
            "netkit composable finite-size rates".to_string(),
            "columns: protocol and channel configuration, error-correction efficiency xi, \
             asymptotic mutual information and worst-case Holevo bound, block size n and \
             finite-size rate in bits per use; the final row is the asymptotic reference \
             xi*I - chi"
                .to_string(),
            format!(
                "delta_s={} delta_ec={} delta_pe={} p={} bits={}",
                fs_base.delta_s,
                fs_base.delta_ec,
                fs_base.delta_pe,
                fs_base.success_prob,
                fs_base.bits_per_quadrature
            ),
        ],
        columns: vec![
            "protocol", "n", "n_a", "n_b", "d_km", "eta", "nbar", "mu", "xi", "mi_bits",
            "chi_worst_bits", "block_size", "rate_bits",
        ],
        rows,
    };
    write_table(&table, format, &out)
}

// ---------------------------------------------------------------------------
// verify

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    common: CommonOpts,

    /// Monte Carlo shots for the statistical checks
    #[arg(long)]
    shots: Option<f64>,

    /// Monte Carlo seed
    #[arg(long)]
    seed: Option<u64>,

    /// Test mode: add this offset to the closed-form state before the oracle
    /// comparison to confirm the harness catches it
    #[arg(long)]
    perturb: Option<f64>,
}

struct Check {
    name: &'static str,
    pass: bool,
    measured: f64,
    threshold: f64,
    detail: String,
}

fn verify_grid() -> Vec<NetworkConfig> {
    let mut out = Vec::new();
    for n in 2..=8usize {
        for mu in [1.0, 2.0, 10.0, 100.0] {
            for eta in [0.1, 0.5, 0.9, 1.0] {
                for nbar in [0.0, 0.05, 1.0] {
                    out.push(
                        NetworkConfig::new(n, link_params(mu, eta, nbar).unwrap()).unwrap(),
                    );
                }
            }
        }
    }
    out
}

fn oracle_check(path: OraclePath, perturb: f64, name: &'static str) -> Check {
    let grid = verify_grid();
    let devs: Vec<f64> = exec::map(&grid, |cfg| {
        let closed = network_conditional_cm(cfg).unwrap();
        let oracle = network_conditional_cm_oracle(cfg, path).unwrap();
        let mut dev = closed.max_abs_diff(&oracle);
        if perturb != 0.0 {
            dev = dev.max((closed.entry(0, 0) + perturb - oracle.entry(0, 0)).abs());
        }
        dev
    });
    let max = devs.iter().cloned().fold(0.0f64, f64::max);
    Check {
        name,
        pass: max <= 1e-9,
        measured: max,
        threshold: 1e-9,
        detail: format!("{} configurations", grid.len()),
    }
}

fn holevo_check() -> Check {
    let grid = verify_grid();
    let devs: Vec<f64> = exec::map(&grid, |cfg| {
        let closed = conferencing_holevo(cfg).unwrap();
        let v = network_conditional_cm(cfg).unwrap();
        let oracle = v.von_neumann_entropy().unwrap()
            - v.heterodyne(0).unwrap().von_neumann_entropy().unwrap();
        (closed - oracle).abs()
    });
    let max = devs.iter().cloned().fold(0.0f64, f64::max);
    Check {
        name: "holevo-entropy-oracle",
        pass: max <= 1e-9,
        measured: max,
        threshold: 1e-9,
        detail: "closed form vs covariance-matrix entropies".into(),
    }
}

fn lossless_check() -> Check {
    let mut max = 0.0f64;
    for n in [2usize, 3, 5, 8] {
        for mu in [1.0, 2.0, 10.0, 100.0] {
            let cfg = NetworkConfig::new(n, link_params(mu, 1.0, 0.0).unwrap()).unwrap();
            max = max.max(conferencing_holevo(&cfg).unwrap().abs());
        }
    }
    Check {
        name: "lossless-chi-zero",
        pass: max <= 1e-9,
        measured: max,
        threshold: 1e-9,
        detail: "eta=1, nbar=0 line".into(),
    }
}

fn full_house_check() -> Check {
    let mut max = 0.0f64;
    for n in [4usize, 10, 100] {
        for mu in [2.0, 10.0, 50.0] {
            for nbar in [0.0, 0.05] {
                let link = link_params(mu, 0.9, nbar).unwrap();
                let parent = NetworkConfig::new(n, link).unwrap();
                let ss = secret_sharing_rate(&SplitConfig::new(n / 2, n / 2, parent).unwrap())
                    .unwrap();
                let conf =
                    conferencing_rate(&NetworkConfig::new(2, link).unwrap()).unwrap();
                max = max.max((ss.rate - conf.rate).abs());
            }
        }
    }
    Check {
        name: "full-house-identity",
        pass: max <= 1e-12,
        measured: max,
        threshold: 1e-12,
        detail: "symmetric full-house split vs two-user conference".into(),
    }
}

fn squeezed_spectrum_check() -> Check {
    let mut max = 0.0f64;
    for (n, mu, eta, nbar) in [(3usize, 20.0, 0.5, 0.05), (10, 5.0, 0.8, 0.0), (6, 50.0, 0.3, 1.0)]
    {
        let cfg = NetworkConfig::new(n, link_params(mu, eta, nbar).unwrap()).unwrap();
        let a = pair_conditional_cm(&cfg).unwrap().symplectic_spectrum().unwrap();
        let b = squeezed_pair_cm(&cfg).unwrap().symplectic_spectrum().unwrap();
        for (x, y) in a.iter().zip(&b) {
            max = max.max((x - y).abs());
        }
        let s = SplitConfig::new(n / 2, n - n / 2, cfg).unwrap();
        let a = secret_sharing_cm(&s).unwrap().symplectic_spectrum().unwrap();
        let b = squeezed_ss_cm(&s).unwrap().symplectic_spectrum().unwrap();
        for (x, y) in a.iter().zip(&b) {
            max = max.max((x - y).abs());
        }
    }
    Check {
        name: "squeezed-spectrum-equality",
        pass: max <= 1e-9,
        measured: max,
        threshold: 1e-9,
        detail: "local squeezing preserves symplectic spectra".into(),
    }
}

fn permutation_check() -> Check {
    let cfg = NetworkConfig::new(5, link_params(12.0, 0.55, 0.2).unwrap()).unwrap();
    let v = network_conditional_cm(&cfg).unwrap();
    let mut max = 0.0f64;
    for perm in [[4usize, 3, 2, 1, 0], [1, 0, 3, 4, 2], [2, 4, 0, 1, 3]] {
        max = max.max(v.max_abs_diff(&v.permute_modes(&perm).unwrap()));
    }
    Check {
        name: "permutation-invariance",
        pass: max <= 1e-12,
        measured: max,
        threshold: 1e-12,
        detail: "conditional state invariant under user relabeling".into(),
    }
}

fn epr_limit_check() -> Check {
    let mut max = 0.0f64;
    for mu in [1e2, 1e4] {
        let cfg = NetworkConfig::new(3, link_params(mu, 1.0, 0.0).unwrap()).unwrap();
        let v = network_conditional_cm(&cfg).unwrap();
        let var_qdiff = 2.0 * (v.entry(0, 0) - v.entry(0, 1));
        let mut var_psum = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                var_psum += v.entry(3 + i, 3 + j);
            }
        }
        max = max.max((var_qdiff - 2.0 / mu).abs() / (2.0 / mu));
        max = max.max((var_psum - 3.0 / mu).abs() / (3.0 / mu));
    }
    Check {
        name: "epr-limit",
        pass: max <= 1e-6,
        measured: max,
        threshold: 1e-6,
        detail: "difference and sum quadrature variances at eta=1".into(),
    }
}

fn mc_checks(shots: usize, seed: u64) -> Result<Vec<Check>, CliError> {
    let cfg = NetworkConfig::new(3, link_params(20.0, 0.8, 0.01).unwrap())?;
    // fewer shots widen the statistical acceptance bands
    let (se_limit, mi_limit) = if shots >= 100_000 { (5.0, 3.0) } else { (6.0, 4.0) };
    let stats = montecarlo::verify_conditional_cm(&cfg, shots, seed)?;
    let mut checks = vec![Check {
        name: "mc-conditional-covariance",
        pass: stats.max_dev_in_se <= se_limit,
        measured: stats.max_dev_in_se,
        threshold: se_limit,
        detail: format!("{} shots, worst entry in standard errors", stats.shots),
    }];

    if shots >= 100_000 {
        let levels = [shots / 100, shots / 10, shots];
        let slope = montecarlo::convergence_slope(&cfg, &levels, 3, seed)?;
        checks.push(Check {
            name: "mc-convergence",
            pass: (-0.65..=-0.35).contains(&slope),
            measured: slope,
            threshold: 0.15,
            detail: format!("deviation scaling exponent over {levels:?} (target -0.5)"),
        });
    } else {
        println!("skip mc-convergence — needs at least 1e5 shots for decade scaling");
    }

    let est = montecarlo::estimate_pair_mi(&cfg, shots, seed)?;
    let analytic = rates::conferencing_mi(&cfg);
    let dev_se = (est.bits - analytic).abs() / est.std_err;
    checks.push(Check {
        name: "mc-pair-mi",
        pass: dev_se <= mi_limit,
        measured: dev_se,
        threshold: mi_limit,
        detail: format!(
            "estimate {} +- {} vs analytic {analytic}",
            est.bits, est.std_err
        ),
    });
    Ok(checks)
}

pub fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    let (cfg, format, out) = load_common(&args.common)?;
    let shots = cfg
        .resolve(&args.shots, "shots")
        .map_err(CliError::Usage)?
        .unwrap_or(1e6) as usize;
    let seed = cfg
        .resolve(&args.seed, "seed")
        .map_err(CliError::Usage)?
        .unwrap_or(7);
    let perturb = args.perturb.unwrap_or(0.0);

    let mut checks = vec![
        oracle_check(OraclePath::Dual, perturb, "closed-vs-dual-oracle"),
        oracle_check(OraclePath::Direct, perturb, "closed-vs-direct-oracle"),
        holevo_check(),
        lossless_check(),
        full_house_check(),
        squeezed_spectrum_check(),
        permutation_check(),
        epr_limit_check(),
    ];
    checks.extend(mc_checks(shots, seed)?);

    let mut failed = Vec::new();
    for c in &checks {
        let status = if c.pass { "ok  " } else { "FAIL" };
        println!(
            "{status} {:<28} measured {:>12} (limit {}) — {}",
            c.name,
            crate::output::fmt_sig(c.measured),
            crate::output::fmt_sig(c.threshold),
            c.detail
        );
        if !c.pass {
            failed.push(c.name);
        }
    }

    if out.is_some() {
        let rows: Vec<Vec<Cell>> = checks
            .iter()
            .map(|c| {
                vec![
                    Cell::S(c.name.to_string()),
                    Cell::S(if c.pass { "pass" } else { "fail" }.to_string()),
                    Cell::F(c.measured),
                    Cell::F(c.threshold),
                    Cell::S(c.detail.clone()),
                ]
            })
            .collect();
        let table = Table {
            schema: "netkit.verify.v1",
            comments: vec![
                "netkit verification suite".to_string(),
                format!("shots={shots} seed={seed} rng={}", montecarlo::RNG_ALGORITHM),
            ],
            columns: vec!["check", "status", "measured", "threshold", "detail"],
            rows,
        };
        write_table(&table, format, &out)?;
    }

    if failed.is_empty() {
        println!("all checks passed");
        Ok(())
    } else {
        Err(CliError::Run(format!(
            "verification failed: {}",
            failed.join(", ")
        )))
    }
}

// ---------------------------------------------------------------------------
// mc-sample

#[derive(Debug, Args)]
pub struct McSampleArgs {
    #[command(flatten)]
    common: CommonOpts,

    /// Number of users
    #[arg(long)]
    n: Option<usize>,

    /// Modulation variance
    #[arg(long)]
    mu: Option<f64>,

    /// Link transmissivity (alternative to --distance)
    #[arg(long)]
    eta: Option<f64>,

    /// Link distance in km
    #[arg(long)]
    distance: Option<f64>,

    /// Mean thermal photon number
    #[arg(long)]
    nbar: Option<f64>,

    /// Number of protocol uses to simulate
    #[arg(long)]
    shots: Option<f64>,

    /// RNG seed
    #[arg(long)]
    seed: Option<u64>,
}

pub fn cmd_mc_sample(args: McSampleArgs) -> Result<(), CliError> {
    let (cfg, format, out) = load_common(&args.common)?;
    let n = cfg.resolve(&args.n, "n").map_err(CliError::Usage)?.unwrap_or(3);
    let mu = cfg.resolve(&args.mu, "mu").map_err(CliError::Usage)?.unwrap_or(20.0);
    let nbar = cfg
        .resolve(&args.nbar, "nbar")
        .map_err(CliError::Usage)?
        .unwrap_or(0.01);
    let eta_flag = cfg.resolve(&args.eta, "eta").map_err(CliError::Usage)?;
    let dist_flag = cfg
        .resolve(&args.distance, "distance")
        .map_err(CliError::Usage)?;
    let eta = match (eta_flag, dist_flag) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "--eta and --distance are mutually exclusive".into(),
            ))
        }
        (Some(e), None) => e,
        (None, Some(d)) => eta_from_distance(&DistanceMap::new(d)?),
        (None, None) => 0.8,
    };
    let shots = cfg
        .resolve(&args.shots, "shots")
        .map_err(CliError::Usage)?
        .unwrap_or(1e6) as usize;
    let seed = cfg
        .resolve(&args.seed, "seed")
        .map_err(CliError::Usage)?
        .unwrap_or(7);

    let network = NetworkConfig::new(n, link_params(mu, eta, nbar)?)?;
    let stats = montecarlo::verify_conditional_cm(&network, shots, seed)?;
    let mi = montecarlo::estimate_pair_mi(&network, shots, seed)?;
    let mi_analytic = rates::conferencing_mi(&network);

    let mut rows = vec![vec![
        Cell::S("meta".into()),
        Cell::Empty,
        Cell::Empty,
        Cell::Empty,
        Cell::Empty,
        Cell::Empty,
        Cell::Empty,
        Cell::S(format!(
            "rng={} seed={seed} shots={shots} n={n} mu={mu} eta={eta} nbar={nbar}",
            montecarlo::RNG_ALGORITHM
        )),
    ]];
    let dim = 2 * n;
    for i in 0..dim {
        for j in i..dim {
            let se = stats.std_errors[(i, j)];
            let dev = (stats.empirical_cov[(i, j)] - stats.analytic_cov[(i, j)]).abs();
            rows.push(vec![
                Cell::S("cov".into()),
                Cell::I(i as i64),
                Cell::I(j as i64),
                Cell::F(stats.empirical_cov[(i, j)]),
                Cell::F(stats.analytic_cov[(i, j)]),
                Cell::F(se),
                Cell::F(dev / se),
                Cell::Empty,
            ]);
        }
    }
    rows.push(vec![
        Cell::S("pair-mi".into()),
        Cell::I(0),
        Cell::I(1),
        Cell::F(mi.bits),
        Cell::F(mi_analytic),
        Cell::F(mi.std_err),
        Cell::F((mi.bits - mi_analytic).abs() / mi.std_err),
        Cell::Empty,
    ]);
    rows.push(vec![
        Cell::S("summary".into()),
        Cell::Empty,
        Cell::Empty,
        Cell::F(stats.max_abs_dev),
        Cell::Empty,
        Cell::Empty,
        Cell::F(stats.max_dev_in_se),
        Cell::S(format!("entries={}", dim * dim)),
    ]);

    let table = Table {
        schema: "netkit.mc.v1",
        comments: vec![
            "netkit Monte Carlo verification records".to_string(),
            "kinds: meta (run provenance), cov (empirical vs analytic conditional \
             covariance entry, quadrature ordering q1..qN,p1..pN), pair-mi (estimate vs \
             analytic), summary (worst deviations)"
                .to_string(),
        ],
        columns: vec!["kind", "i", "j", "value", "reference", "std_error", "dev_se", "note"],
        rows,
    };
    write_table(&table, format, &out)
}
