use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use entropy_gap::adapt::{Method, MethodConfig};
use entropy_gap::bench::{run_sweep, BenchRow, Layout, SweepConfig};
use entropy_gap::codec::{analyze, decode_instance, encode_instance, Analysis, EncodeOptions, HyperpriorInput, Instance};
use entropy_gap::container::ScaleDescriptor;
use entropy_gap::entropy::{load_tables, save_tables, ModelKind, PmfTable, ScaleTable};
use entropy_gap::gap::GapReport;
use entropy_gap::latent::{
    load_latents, save_latents, synthesize, synthesize_factorized, Distribution, LatentTensor, Shape,
    SideInfo, SynthSpec,
};

#[derive(Parser)]
#[command(name = "egap", version, about = "Amortization gap measurement and instance-adaptive entropy coding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic instance and its learned tables.
    Synth(SynthArgs),
    /// Report the amortization gap and the adaptation gain.
    Gap(GapArgs),
    /// Write an EGAP container.
    Encode(EncodeArgs),
    /// Decode an EGAP container back to LATB files.
    Decode(DecodeArgs),
    /// Sweep mismatch levels and methods on synthetic data.
    Bench(BenchArgs),
}

#[derive(Args)]
struct ScaleArgs {
    /// Number of hyperprior scales.
    #[arg(long, default_value_t = ScaleTable::DEFAULT_COUNT as u16)]
    scales: u16,
    #[arg(long, default_value_t = ScaleTable::DEFAULT_MIN)]
    sigma_min: f64,
    #[arg(long, default_value_t = ScaleTable::DEFAULT_MAX)]
    sigma_max: f64,
}

impl ScaleArgs {
    fn descriptor(&self) -> Result<ScaleDescriptor> {
        let d = ScaleDescriptor {
            count: self.scales,
            min: self.sigma_min,
            max: self.sigma_max,
        };
        d.table().context("invalid scale table")?;
        Ok(d)
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Main latent shape, HxWxC.
    #[arg(long)]
    shape: Shape,
    /// True distribution; repeat once per channel for per-channel values.
    #[arg(long = "true", required = true)]
    true_dist: Vec<Distribution>,
    /// Learned prior; repeat once per channel for per-channel values.
    #[arg(long, required = true)]
    learned: Vec<Distribution>,
    /// Side latent shape; defaults to a quarter of the main resolution.
    #[arg(long)]
    side_shape: Option<Shape>,
    #[arg(long)]
    side_true: Vec<Distribution>,
    #[arg(long)]
    side_learned: Vec<Distribution>,
    #[arg(long, default_value_t = 1.0)]
    scale_factor: f64,
    #[arg(long, default_value_t = 0.0)]
    mean_offset: f64,
    #[arg(long, default_value = "hyperprior")]
    layout: Layout,
    #[command(flatten)]
    scale_table: ScaleArgs,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct MethodArgs {
    /// Method for every entropy model: none, gmm, zero-mean-gaussian, center-bin.
    #[arg(long)]
    method: Option<Method>,
    /// Mixture components.
    #[arg(long = "K")]
    k: Option<u8>,
    /// Targeted tables per entropy model.
    #[arg(long = "T")]
    t: Option<u32>,
    /// Bits per quantized parameter.
    #[arg(long = "b")]
    b: Option<u8>,
    /// Method for the hyperprior model only.
    #[arg(long)]
    hyper_method: Option<Method>,
    #[arg(long = "hyper-K")]
    hyper_k: Option<u8>,
    #[arg(long = "hyper-T")]
    hyper_t: Option<u32>,
}

impl MethodArgs {
    fn options(&self, hyperprior: bool) -> Result<EncodeOptions> {
        let mut o = EncodeOptions::defaults(hyperprior);
        let apply = |c: &mut MethodConfig, method: Option<Method>, k: Option<u8>, t: Option<u32>| {
            if let Some(m) = method {
                c.method = m;
            }
            if let Some(k) = k {
                c.components = k;
            }
            if let Some(t) = t {
                c.targets = t;
            }
            if let Some(b) = self.b {
                c.bits = b;
            }
        };
        apply(&mut o.factorized, self.method, self.k, self.t);
        apply(&mut o.hyperprior, self.method, self.k, self.t);
        apply(&mut o.hyperprior, self.hyper_method, self.hyper_k, self.hyper_t);
        o.factorized.validate()?;
        o.hyperprior.validate()?;
        Ok(o)
    }
}

#[derive(Args)]
struct InputArgs {
    /// Main latent. A SIDE chunk selects the hyperprior layout.
    #[arg(long)]
    main: PathBuf,
    /// Side latent, required for the hyperprior layout.
    #[arg(long)]
    side: Option<PathBuf>,
    /// Learned factorized tables (PMFT).
    #[arg(long)]
    tables: PathBuf,
    #[command(flatten)]
    scale_table: ScaleArgs,
}

struct Loaded {
    main: LatentTensor,
    side: Option<(LatentTensor, SideInfo)>,
    tables: Vec<PmfTable>,
    scales: ScaleDescriptor,
}

impl Loaded {
    fn read(args: &InputArgs) -> Result<Self> {
        let (main, side_info) = load_latents(&args.main).with_context(|| format!("reading {}", args.main.display()))?;
        if main.is_empty() {
            bail!("{} holds no symbols", args.main.display());
        }
        let tables = load_tables(&args.tables).with_context(|| format!("reading {}", args.tables.display()))?;
        let side = match (side_info, &args.side) {
            (Some(info), Some(path)) => {
                let (side, _) = load_latents(path).with_context(|| format!("reading {}", path.display()))?;
                Some((side, info))
            }
            (Some(_), None) => bail!("{} carries side information; pass the side latent with --side", args.main.display()),
            (None, Some(_)) => bail!("--side given but {} has no side information", args.main.display()),
            (None, None) => None,
        };
        Ok(Loaded {
            main,
            side,
            tables,
            scales: args.scale_table.descriptor()?,
        })
    }

    fn instance(&self) -> Instance<'_> {
        Instance {
            main: &self.main,
            tables: &self.tables,
            hyperprior: self.side.as_ref().map(|(side, info)| HyperpriorInput {
                side,
                side_info: info,
                scales: self.scales,
            }),
        }
    }
}

#[derive(Args)]
struct GapArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    method: MethodArgs,
    /// Write the report as CSV to this path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    tables: PathBuf,
    /// LATB file whose SIDE chunk holds the side information.
    #[arg(long)]
    side_info: Option<PathBuf>,
    #[arg(long)]
    out_main: Option<PathBuf>,
    #[arg(long)]
    out_side: Option<PathBuf>,
    /// Compare the decoded main latent with this LATB file.
    #[arg(long)]
    verify: Option<PathBuf>,
    /// Compare the decoded side latent with this LATB file.
    #[arg(long)]
    verify_side: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// TOML sweep file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    shape: Option<Shape>,
    #[arg(long)]
    layout: Option<Layout>,
    #[arg(long = "true")]
    true_dist: Option<Distribution>,
    #[arg(long)]
    learned: Option<Distribution>,
    #[arg(long, value_delimiter = ',')]
    scale_factors: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    methods: Vec<Method>,
    #[arg(long = "K", value_delimiter = ',')]
    k: Vec<u8>,
    #[arg(long = "T", value_delimiter = ',')]
    t: Vec<u32>,
    #[arg(long = "b")]
    b: Option<u8>,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn synth(args: SynthArgs) -> Result<()> {
    let mut spec = SynthSpec::new(args.seed, args.shape, args.true_dist[0], args.learned[0]);
    spec.true_dist = args.true_dist;
    spec.learned = args.learned;
    if let Some(s) = args.side_shape {
        spec.side_shape = s;
    }
    if !args.side_true.is_empty() {
        spec.side_true = args.side_true;
    }
    if !args.side_learned.is_empty() {
        spec.side_learned = args.side_learned;
    }
    spec.scale_factor = args.scale_factor;
    spec.mean_offset = args.mean_offset;
    spec.scales = args.scale_table.descriptor()?.table()?;
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    let path = |name: &str| args.out_dir.join(name);
    match args.layout {
        Layout::Hyperprior => {
            let out = synthesize(&spec)?;
            save_latents(&out.main, Some(&out.side_info), path("main.latb"))?;
            save_latents(&out.side, None, path("side.latb"))?;
            save_tables(&out.tables, path("tables.pmft"))?;
            println!(
                "wrote main.latb ({}), side.latb ({}), tables.pmft ({} tables) to {}",
                out.main.shape(),
                out.side.shape(),
                out.tables.len(),
                args.out_dir.display()
            );
        }
        Layout::Factorized => {
            let (main, tables) = synthesize_factorized(&spec)?;
            save_latents(&main, None, path("main.latb"))?;
            save_tables(&tables, path("tables.pmft"))?;
            println!(
                "wrote main.latb ({}), tables.pmft ({} tables) to {}",
                main.shape(),
                tables.len(),
                args.out_dir.display()
            );
        }
    }
    Ok(())
}

fn print_selection(analysis: &Analysis) {
    for s in &analysis.streams {
        let name = match s.model {
            ModelKind::Factorized => "factorized",
            ModelKind::Hyperprior => "hyperprior",
        };
        println!(
            "{name}: {} | {} of {} targeted tables replaced",
            s.record.config,
            s.record.selected_count(),
            s.record.decisions.len()
        );
    }
}

fn gap(args: GapArgs) -> Result<()> {
    let loaded = Loaded::read(&args.input)?;
    let options = args.method.options(loaded.side.is_some())?;
    let analysis = analyze(&loaded.instance(), &options)?;
    print!("{}", analysis.report);
    print_selection(&analysis);
    if let Some(path) = args.csv {
        let text = format!("{}\n{}\n", GapReport::CSV_HEADER, analysis.report.csv_row());
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn encode(args: EncodeArgs) -> Result<()> {
    let loaded = Loaded::read(&args.input)?;
    let options = args.method.options(loaded.side.is_some())?;
    let encoded = encode_instance(&loaded.instance(), &options)?;
    fs::write(&args.output, &encoded.bytes).with_context(|| format!("writing {}", args.output.display()))?;
    println!("{}", encoded.breakdown);
    print!("{}", encoded.analysis.report);
    print_selection(&encoded.analysis);
    Ok(())
}

fn read_latents(path: &Path) -> Result<(LatentTensor, Option<SideInfo>)> {
    load_latents(path).with_context(|| format!("reading {}", path.display()))
}

fn decode(args: DecodeArgs) -> Result<()> {
    let bytes = fs::read(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let tables = load_tables(&args.tables).with_context(|| format!("reading {}", args.tables.display()))?;
    let side_info = match &args.side_info {
        Some(path) => match read_latents(path)? {
            (_, Some(info)) => Some(info),
            (_, None) => bail!("{} has no SIDE chunk", path.display()),
        },
        None => None,
    };
    let decoded = decode_instance(&bytes, &tables, side_info.as_ref())?;
    if let Some(path) = &args.out_main {
        save_latents(&decoded.main, side_info.as_ref(), path)?;
    }
    if let Some(path) = &args.out_side {
        let Some(side) = &decoded.side else {
            bail!("container has no side stream")
        };
        save_latents(side, None, path)?;
    }
    let mut verified = false;
    if let Some(path) = &args.verify {
        let (reference, _) = read_latents(path)?;
        if reference.shape() != decoded.main.shape() || reference.symbols() != decoded.main.symbols() {
            bail!("decoded main latent differs from {}", path.display());
        }
        verified = true;
    }
    if let Some(path) = &args.verify_side {
        let (reference, _) = read_latents(path)?;
        match &decoded.side {
            Some(side) if side.shape() == reference.shape() && side.symbols() == reference.symbols() => {}
            _ => bail!("decoded side latent differs from {}", path.display()),
        }
        verified = true;
    }
    if verified {
        println!("OK, lossless");
    } else {
        println!(
            "decoded {} main symbols{}",
            decoded.main.len(),
            match &decoded.side {
                Some(s) => format!(" and {} side symbols", s.len()),
                None => String::new(),
            }
        );
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let mut c = match &args.config {
        Some(path) => SweepConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
        None => SweepConfig::default(),
    };
    if let Some(v) = args.seed {
        c.seed = v;
    }
    if let Some(v) = args.shape {
        c.shape = v;
    }
    if let Some(v) = args.layout {
        c.layout = v;
    }
    if let Some(v) = args.true_dist {
        c.true_dist = v;
    }
    if let Some(v) = args.learned {
        c.learned = v;
    }
    if !args.scale_factors.is_empty() {
        c.scale_factors = args.scale_factors;
    }
    if !args.methods.is_empty() {
        c.methods = args.methods;
    }
    if !args.k.is_empty() {
        c.components = args.k;
    }
    if !args.t.is_empty() {
        c.targets = args.t;
    }
    if let Some(v) = args.b {
        c.bits = v;
    }
    let rows = run_sweep(&c)?;
    let mut text = String::from(BenchRow::CSV_HEADER);
    text.push('\n');
    for r in &rows {
        text.push_str(&r.csv_row());
        text.push('\n');
    }
    match &args.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Gap(a) => gap(a),
        Command::Encode(a) => encode(a),
        Command::Decode(a) => decode(a),
        Command::Bench(a) => bench(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
