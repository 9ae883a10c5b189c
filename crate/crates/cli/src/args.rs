use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Rotational wave packets: build, evolve, analyze revivals, emit carpets.
#[derive(Debug, Parser)]
#[command(name = "rotwave", version, about)]
pub struct Cli {
    /// Directory for every artifact written by the command.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,

    /// Artifact format version; only 1 exists.
    #[arg(long, global = true, default_value_t = 1)]
    pub format_version: u32,

    /// Worker threads for grid evaluation (0 = all cores). Does not change
    /// any output byte.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,

    /// Seed for the synthetic generators.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Expand an exponential squeezed packet in spherical harmonics.
    Build(BuildArgs),
    /// Angular-momentum expectation values of a coefficient file.
    Observe(ObserveArgs),
    /// Propagate a coefficient file in time.
    Evolve(EvolveArgs),
    /// Gauss-sum amplitudes of fractional revivals.
    Schedule(ScheduleArgs),
    /// Fractional waves at (m/n) T_rev and the clone scan.
    Fractions(FractionsArgs),
    /// Density over angle and time.
    Carpet(CarpetArgs),
    /// Density over theta and phi at one time.
    Snapshot(SnapshotArgs),
    /// Build a packet from Coulomb-excitation amplitudes.
    CeIngest(CeIngestArgs),
    /// Fit E_I = a I(I+1) + b [I(I+1)]^2 to a level scheme.
    FitLevels(FitLevelsArgs),
    /// Ring carpets under an ideal rigid rotor and a realistic band.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Localization parameter N.
    #[arg(long)]
    pub n: f64,

    /// Squeezing parameter in [0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,

    /// Add the antipodal copy (even I only).
    #[arg(long)]
    pub symmetric: bool,

    /// Symmetry-axis frame; defaults to z for eta = 0 and x otherwise.
    #[arg(long, value_enum)]
    pub frame: Option<FrameArg>,

    /// Allowed weight outside the truncated expansion.
    #[arg(long, default_value_t = 1e-12)]
    pub epsilon: f64,

    /// Largest I considered (default ceil(4N + 40)).
    #[arg(long)]
    pub i_cap: Option<u32>,

    #[arg(short, long, default_value = "coefficients.txt")]
    pub output: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FrameArg {
    X,
    Z,
}

#[derive(Debug, Args)]
pub struct ObserveArgs {
    /// Coefficient file.
    pub input: PathBuf,

    #[arg(short, long, default_value = "observables.txt")]
    pub output: String,
}

#[derive(Debug, Args, Clone)]
pub struct ModelArgs {
    /// Rigid-rotor frequency: E_I = omega0 I(I+1).
    #[arg(long, default_value_t = 1.0)]
    pub omega0: f64,

    /// Linear coefficient of the two-parameter band.
    #[arg(long, conflicts_with_all = ["levels", "u238"], allow_negative_numbers = true)]
    pub a: Option<f64>,

    /// Quadratic coefficient of the two-parameter band.
    #[arg(long, requires = "a", allow_negative_numbers = true)]
    pub b: Option<f64>,

    /// Level file with `I energy` rows.
    #[arg(long, conflicts_with = "u238")]
    pub levels: Option<PathBuf>,

    /// Use the bundled 238U ground band.
    #[arg(long)]
    pub u238: bool,
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    pub input: PathBuf,

    /// Time in units of T_rev (model time units with --absolute).
    #[arg(long, allow_negative_numbers = true)]
    pub t: f64,

    #[arg(long)]
    pub absolute: bool,

    #[command(flatten)]
    pub model: ModelArgs,

    #[arg(short, long, default_value = "evolved.txt")]
    pub output: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ParityArg {
    All,
    Even,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    #[arg(long, requires = "n")]
    pub m: Option<u32>,

    #[arg(long, requires = "m", conflicts_with = "n_max")]
    pub n: Option<u32>,

    /// Tabulate every coprime m/n with n <= N_MAX and m/n <= T_MAX instead.
    #[arg(long)]
    pub n_max: Option<u32>,

    #[arg(long, default_value_t = 0.5)]
    pub t_max: f64,

    #[arg(long, value_enum, default_value = "all")]
    pub parity: ParityArg,

    #[arg(short, long, default_value = "schedule.txt")]
    pub output: String,
}

#[derive(Debug, Args)]
pub struct FractionsArgs {
    pub input: PathBuf,

    #[arg(long)]
    pub m: u32,

    #[arg(long)]
    pub n: u32,

    /// Rigid-rotor frequency.
    #[arg(long, default_value_t = 1.0)]
    pub omega0: f64,

    /// Also write each fractional wave as a coefficient file.
    #[arg(long)]
    pub write_waves: bool,

    #[arg(short, long, default_value = "fractions.txt")]
    pub output: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CutArg {
    Equatorial,
    Ring,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Pgm,
    Ppm,
}

#[derive(Debug, Args, Clone)]
pub struct RenderArgs {
    /// Artifact formats to write.
    #[arg(long = "format", value_enum, value_delimiter = ',', default_values = ["csv", "pgm"])]
    pub formats: Vec<FormatArg>,

    /// Logarithmic intensity over this many decades (images only).
    #[arg(long)]
    pub log_decades: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CarpetArgs {
    pub input: PathBuf,

    #[arg(long, value_enum, default_value = "equatorial")]
    pub theta_cut: CutArg,

    #[arg(long, default_value_t = 512)]
    pub angle_samples: usize,

    #[arg(long, default_value_t = 512)]
    pub t_samples: usize,

    /// End of the time axis in units of T_rev.
    #[arg(long, default_value_t = 0.5)]
    pub t_max: f64,

    /// Also list the revival windows m/n <= t_max with n <= 24.
    #[arg(long)]
    pub annotate: bool,

    #[command(flatten)]
    pub model: ModelArgs,

    #[command(flatten)]
    pub render: RenderArgs,

    /// File stem for the artifacts.
    #[arg(short, long, default_value = "carpet")]
    pub output: String,
}

#[derive(Debug, Args)]
pub struct SnapshotArgs {
    pub input: PathBuf,

    /// Time in units of T_rev.
    #[arg(long, default_value_t = 0.0)]
    pub t: f64,

    #[arg(long, default_value_t = 128)]
    pub theta_samples: usize,

    #[arg(long, default_value_t = 256)]
    pub phi_samples: usize,

    /// Angle of the first phi column, radians.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub phi_offset: f64,

    #[command(flatten)]
    pub model: ModelArgs,

    #[command(flatten)]
    pub render: RenderArgs,

    #[arg(short, long, default_value = "snapshot")]
    pub output: String,
}

#[derive(Debug, Args)]
pub struct CeIngestArgs {
    /// Amplitude file with `I re im` rows.
    #[arg(required_unless_present = "synthetic")]
    pub input: Option<PathBuf>,

    /// Use the synthetic Gaussian profile instead of a file.
    #[arg(long, conflicts_with = "input")]
    pub synthetic: bool,

    #[arg(long, default_value_t = 10.0)]
    pub center: f64,

    #[arg(long, default_value_t = 3.0)]
    pub width: f64,

    #[arg(long, default_value_t = 30)]
    pub i_max: u32,

    /// Relative Gaussian jitter on synthetic amplitudes, drawn from --seed.
    #[arg(long, default_value_t = 0.0)]
    pub jitter: f64,

    /// Free-text source note (projectile, beam energy).
    #[arg(long)]
    pub source: Option<String>,

    #[arg(short, long, default_value = "ce_packet.txt")]
    pub output: String,
}

#[derive(Debug, Args)]
pub struct FitLevelsArgs {
    /// Level file with `I energy` rows.
    #[arg(required_unless_present_any = ["u238", "synthetic"])]
    pub levels: Option<PathBuf>,

    /// Fit the bundled 238U band.
    #[arg(long, conflicts_with_all = ["levels", "synthetic"])]
    pub u238: bool,

    /// Fit levels generated from --a/--b plus Gaussian noise from --seed.
    #[arg(long, conflicts_with = "levels", requires = "a")]
    pub synthetic: bool,

    #[arg(long)]
    pub a: Option<f64>,

    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub b: f64,

    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,

    #[arg(long, default_value_t = 30)]
    pub i_max: u32,

    #[arg(short, long, default_value = "fit.txt")]
    pub output: String,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Axial coefficient file, e.g. from ce-ingest.
    pub input: PathBuf,

    /// Rigid-rotor frequency of the ideal case; defaults to the realistic
    /// band's linear coefficient.
    #[arg(long)]
    pub ideal_omega0: Option<f64>,

    #[arg(long, default_value_t = 256)]
    pub angle_samples: usize,

    #[arg(long, default_value_t = 512)]
    pub t_samples: usize,

    #[arg(long, default_value_t = 1.0)]
    pub t_max: f64,

    #[command(flatten)]
    pub model: ModelArgs,

    #[command(flatten)]
    pub render: RenderArgs,

    #[arg(short, long, default_value = "replay")]
    pub output: String,
}
