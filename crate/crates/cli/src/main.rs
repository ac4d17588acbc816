use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dirmorph::image::{self, AnyImage, DirectionalImage, GridShape, Image, ImageError};
use dirmorph::pipeline::{self, DeviationMode, GfrpConfig, OpParams, Operation, PipelineError};
use dirmorph::sphere::UnitVector3;
use dirmorph::synth::{
    self, AngularBand, DisplacementSpec, FibreCompositeSpec, Magnitude, SynthError, TwoFibreSpec,
};

mod settings;

use settings::{Failure, MuChoice, Settings};

/// Morphological filtering of unit-vector images.
#[derive(Parser)]
#[command(name = "dirmorph", version)]
struct Cli {
    /// Worker threads; 0 uses one per core.
    #[arg(long, global = true, env = "DIRMORPH_THREADS")]
    threads: Option<usize>,

    /// File of key=value settings. Flags and environment take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Print the effective settings and exit.
    #[arg(long, global = true)]
    print_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Default)]
struct Knobs {
    /// Reference direction as x,y,z, or `auto` for the sample median.
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<String>,
    /// Structuring element, `box:AxB` or `box:AxBxC`.
    #[arg(long)]
    se: Option<String>,
    /// Scale of the multi-scale operators.
    #[arg(long, allow_hyphen_values = true)]
    t: Option<String>,
    /// Shock filter sign convention: paper or classical.
    #[arg(long)]
    convention: Option<String>,
    /// Seed for subsampling and synthesis.
    #[arg(long)]
    seed: Option<String>,
}

impl Knobs {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("mu", self.mu.clone()),
            ("se", self.se.clone()),
            ("t", self.t.clone()),
            ("convention", self.convention.clone()),
            ("seed", self.seed.clone()),
        ]
    }
}

#[derive(Subcommand)]
enum Command {
    /// Apply one operator to a directional image.
    Filter {
        /// erode, dilate, open, close, gradient, laplacian, shock, ms-erode,
        /// ms-dilate, ms-open, ms-close, ms-gradient, ms-shock, depth, median
        op: String,
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        knobs: Knobs,
    },
    /// Closing, deviation from mu and a threshold: 1 marks aligned fibres.
    GfrpSegment {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        knobs: Knobs,
        /// Deviation threshold in radians.
        #[arg(long, allow_hyphen_values = true)]
        threshold: Option<String>,
        /// Treat x and -x as the same fibre direction.
        #[arg(long, overrides_with = "no_axial")]
        axial: bool,
        /// Measure signed deviation from mu.
        #[arg(long)]
        no_axial: bool,
    },
    /// Filter the directions of a vector field, keeping its magnitudes.
    DisplaceEnhance {
        op: String,
        directions: PathBuf,
        magnitudes: PathBuf,
        output: PathBuf,
        /// Also write the magnitudes here.
        #[arg(long)]
        magnitudes_out: Option<PathBuf>,
        #[command(flatten)]
        knobs: Knobs,
    },
    /// Write a synthetic test image.
    Synth {
        kind: SynthKind,
        output: PathBuf,
        /// Grid as WxH or WxHxD.
        #[arg(long)]
        shape: Option<String>,
        /// Angular band lo,hi in radians (band-noise).
        #[arg(long)]
        band: Option<String>,
        /// Ground-truth labels as a 0/1 scalar image.
        #[arg(long)]
        labels_out: Option<PathBuf>,
        /// Magnitudes of the displacement field.
        #[arg(long)]
        magnitudes_out: Option<PathBuf>,
        #[command(flatten)]
        knobs: Knobs,
    },
    /// Write CSV tables for plotting.
    Plotdata {
        kind: PlotKind,
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        knobs: Knobs,
    },
    /// Convert between DVF and CSV, chosen by file extension.
    Convert { input: PathBuf, output: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    TwoFibre,
    BandNoise,
    Displacement,
    FibreComposite,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotKind {
    Quiver,
    Depth,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("dirmorph: {f}");
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let defaults: &[(&'static str, &str)] = match &cli.command {
        None | Some(Command::Filter { .. }) => &[
            ("mu", "0,0,1"),
            ("convention", "paper"),
            ("seed", "0"),
            ("t", "1.0"),
            ("threads", "0"),
        ],
        Some(Command::GfrpSegment { .. }) => &[
            ("mu", "0,1,0"),
            ("threshold", "1.5"),
            ("axial", "true"),
            ("seed", "0"),
            ("threads", "0"),
        ],
        Some(Command::DisplaceEnhance { .. }) => &[
            ("mu", "0,0,1"),
            ("convention", "paper"),
            ("seed", "0"),
            ("t", "1.0"),
            ("threads", "0"),
        ],
        Some(Command::Synth { .. }) => &[("seed", "0"), ("threads", "0")],
        Some(Command::Plotdata { .. }) => &[("mu", "0,0,1"), ("seed", "0"), ("threads", "0")],
        Some(Command::Convert { .. }) => &[("threads", "0")],
    };
    let mut s = Settings::with_defaults(defaults);
    if let Some(path) = &cli.config {
        let file = settings::read_config(path)?;
        s.layer(file.iter().map(|(k, v)| (k.as_str(), Some(v.clone()))));
    }
    s.layer([("threads", cli.threads.map(|n| n.to_string()))]);
    match &cli.command {
        Some(
            Command::Filter { knobs, .. }
            | Command::DisplaceEnhance { knobs, .. }
            | Command::Synth { knobs, .. }
            | Command::Plotdata { knobs, .. },
        ) => s.layer(knobs.pairs()),
        Some(Command::GfrpSegment {
            knobs,
            threshold,
            axial,
            no_axial,
            ..
        }) => {
            s.layer(knobs.pairs());
            let axial = match (axial, no_axial) {
                (true, _) => Some("true".to_string()),
                (_, true) => Some("false".to_string()),
                _ => None,
            };
            s.layer([("threshold", threshold.clone()), ("axial", axial)]);
        }
        Some(Command::Convert { .. }) | None => {}
    }

    if cli.print_config {
        print!("{}", s.render());
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(Failure::param("no command given; see --help"));
    };

    let threads = s.u64("threads")? as usize;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::param(format!("threads: {e}")))?;
    }

    match command {
        Command::Filter {
            op, input, output, ..
        } => {
            let op = parse_op(&op)?;
            let img = load_directional(&input)?;
            let p = op_params(&s, &img, op)?;
            let out = pipeline::apply(op, &img, &p).map_err(pipeline_failure)?;
            store(&output, &out)
        }
        Command::GfrpSegment { input, output, .. } => {
            let img = load_directional(&input)?;
            let ndim = img.shape().ndim();
            let cfg = GfrpConfig {
                mu: resolve_mu(&s, &img)?,
                se: s.se(ndim, GfrpConfig::DEFAULT_EDGE)?,
                threshold: s.f64("threshold")?,
                mode: if s.bool("axial")? {
                    DeviationMode::Axial
                } else {
                    DeviationMode::Signed
                },
            };
            let mask = pipeline::gfrp_segment(&img, &cfg).map_err(pipeline_failure)?;
            store(&output, &mask.into())
        }
        Command::DisplaceEnhance {
            op,
            directions,
            magnitudes,
            output,
            magnitudes_out,
            ..
        } => {
            let op = parse_op(&op)?;
            let dirs = load_directional(&directions)?;
            let mags = image::load(&magnitudes)
                .and_then(AnyImage::into_scalar)
                .map_err(|e| input_failure(&magnitudes, e))?;
            let p = op_params(&s, &dirs, op)?;
            let (out, mags) =
                pipeline::displacement_enhance(&dirs, &mags, op, &p).map_err(pipeline_failure)?;
            store(&output, &out)?;
            match magnitudes_out {
                Some(path) => store(&path, &mags.into()),
                None => Ok(()),
            }
        }
        Command::Synth {
            kind,
            output,
            shape,
            band,
            labels_out,
            magnitudes_out,
            ..
        } => {
            let seed = s.u64("seed")?;
            let shape = shape
                .map(|t| settings::parse_shape(&t).and_then(|d| grid(&d)))
                .transpose()?;
            let fixed_mu = |fallback: UnitVector3| -> Result<UnitVector3, Failure> {
                match s.raw("mu").map(settings::parse_mu).transpose()? {
                    None => Ok(fallback),
                    Some(MuChoice::Fixed(m)) => Ok(m),
                    Some(MuChoice::Auto) => Err(Failure::param("synth needs an explicit mu")),
                }
            };
            let (img, labels, mags): (DirectionalImage, Option<Vec<bool>>, _) = match kind {
                SynthKind::TwoFibre => {
                    let mut spec = TwoFibreSpec::canonical(seed);
                    spec.mu = fixed_mu(spec.mu)?;
                    if let Some(g) = shape {
                        spec.shape = g;
                    }
                    let img = synth::gen_two_fibre(&spec).map_err(synth_failure)?;
                    let labels = (0..spec.shape.len())
                        .map(|i| spec.is_foreground(spec.shape.position(i)))
                        .collect();
                    (img, Some(labels), None)
                }
                SynthKind::BandNoise => {
                    let (lo, hi) = match band {
                        Some(b) => settings::parse_band(&b)?,
                        None => (0.0, std::f64::consts::PI / 8.0),
                    };
                    let band = AngularBand::new(lo, hi).map_err(synth_failure)?;
                    let g = match shape {
                        Some(g) => g,
                        None => grid(&[32, 32])?,
                    };
                    let img = synth::gen_band_noise(g, &fixed_mu(UnitVector3::E_Z)?, &band, seed);
                    (img, None, None)
                }
                SynthKind::Displacement => {
                    let g = match shape {
                        Some(g) => g,
                        None => grid(&[64, 64])?,
                    };
                    let spec = DisplacementSpec {
                        magnitude: Magnitude::Uniform(0.5, 2.0),
                        ..DisplacementSpec::new(g, seed)
                    };
                    let fx = synth::gen_displacement_fixture(&spec).map_err(synth_failure)?;
                    (fx.directions, Some(fx.upper), Some(fx.magnitudes))
                }
                SynthKind::FibreComposite => {
                    let mut spec = FibreCompositeSpec::canonical(seed);
                    spec.mu = fixed_mu(spec.mu)?;
                    if let Some(g) = shape {
                        spec.slab_width = g.extents()[0] / 4;
                        spec.shape = g;
                    }
                    let img = synth::gen_fibre_composite(&spec).map_err(synth_failure)?;
                    let labels = (0..spec.shape.len())
                        .map(|i| spec.in_slab(spec.shape.position(i)))
                        .collect();
                    (img, Some(labels), None)
                }
            };
            let g = *img.shape();
            store(&output, &img.into())?;
            if let Some(path) = labels_out {
                let labels =
                    labels.ok_or_else(|| Failure::param("this synthetic image has no labels"))?;
                let values = labels.into_iter().map(|b| f64::from(u8::from(b))).collect();
                let labels = Image::from_vec(g, values).map_err(Failure::param)?;
                store(&path, &labels.into())?;
            }
            if let Some(path) = magnitudes_out {
                let mags =
                    mags.ok_or_else(|| Failure::param("only displacement fields have magnitudes"))?;
                store(&path, &mags.into())?;
            }
            Ok(())
        }
        Command::Plotdata {
            kind,
            input,
            output,
            ..
        } => {
            let img = load_directional(&input)?;
            let file = File::create(&output).map_err(|e| output_failure(&output, e.into()))?;
            let w = BufWriter::new(file);
            match kind {
                PlotKind::Quiver => image::write_csv(w, &AnyImage::Directional(img)),
                PlotKind::Depth => {
                    let mu = resolve_mu(&s, &img)?;
                    image::write_depth_csv(w, &img, &mu)
                }
            }
            .map_err(|e| output_failure(&output, e))
        }
        Command::Convert { input, output } => {
            let img = image::load(&input).map_err(|e| input_failure(&input, e))?;
            store(&output, &img)
        }
    }
}

fn parse_op(s: &str) -> Result<Operation, Failure> {
    s.parse().map_err(Failure::param)
}

fn grid(dims: &[usize]) -> Result<GridShape, Failure> {
    GridShape::new(dims).map_err(Failure::param)
}

fn resolve_mu(s: &Settings, img: &DirectionalImage) -> Result<UnitVector3, Failure> {
    match s.mu()? {
        MuChoice::Fixed(m) => Ok(m),
        MuChoice::Auto => pipeline::estimate_mu(img, s.u64("seed")?).map_err(pipeline_failure),
    }
}

fn op_params(s: &Settings, img: &DirectionalImage, op: Operation) -> Result<OpParams, Failure> {
    let mut p = OpParams::new(UnitVector3::E_Z);
    p.seed = s.u64("seed")?;
    p.convention = s.convention()?;
    if op != Operation::Median {
        p.mu = resolve_mu(s, img)?;
    }
    if op.needs_se() {
        p.se = Some(s.se(img.shape().ndim(), 3)?);
    }
    if op.needs_scale() {
        p.t = Some(s.f64("t")?);
    }
    Ok(p)
}

fn load_directional(path: &Path) -> Result<DirectionalImage, Failure> {
    image::load(path)
        .and_then(AnyImage::into_directional)
        .map_err(|e| input_failure(path, e))
}

fn store(path: &Path, img: &AnyImage) -> Result<(), Failure> {
    image::save(path, img).map_err(|e| output_failure(path, e))
}

fn input_failure(path: &Path, e: ImageError) -> Failure {
    Failure::input(format!("{}: {e}", path.display()))
}

fn output_failure(path: &Path, e: ImageError) -> Failure {
    Failure::input(format!("cannot write {}: {e}", path.display()))
}

fn pipeline_failure(e: PipelineError) -> Failure {
    match e {
        PipelineError::Sphere(e) => Failure::input(e),
        e => Failure::param(e),
    }
}

fn synth_failure(e: SynthError) -> Failure {
    Failure::param(e)
}
