use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "coarsekit",
    version,
    about = "Batch experiments on finite metric spaces, coverings, band operators and presentations"
)]
pub struct Cli {
    /// TOML file with `command = "..."` and a `[params]` table; flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Directory for report files; nothing is written without it.
    #[arg(long, global = true, env = "COARSEKIT_OUT", value_name = "DIR")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Girth, hyperbolicity and annuli of a finite space.
    #[command(subcommand)]
    Space(SpaceCmd),
    /// Injectivity radii of group coverings.
    #[command(subcommand)]
    Cover(CoverCmd),
    /// Lifting maps: norm profiles and multiplicativity.
    #[command(subcommand)]
    Lift(LiftCmd),
    /// Operator norm localisation estimates and control arithmetic.
    #[command(subcommand)]
    Onl(OnlCmd),
    /// Quasi-projection and quasi-unitary checks, index form, paths.
    #[command(subcommand)]
    Quantk(QuantkCmd),
    /// Sobolev norms and rapid-decay estimates.
    #[command(subcommand)]
    Rd(RdCmd),
    /// Pieces, small cancellation conditions and schedules.
    #[command(subcommand)]
    Sc(ScCmd),
}

/// A space given as a JSON file or as a generator spec
/// (`cycle:N`, `path:N`, `grid:AxB`, `cyclic:N`, `torus:N`).
#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct SpaceInput {
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    #[arg(long, value_name = "SPEC")]
    pub space: Option<String>,
}

/// Source ball and quotient of a group covering.
#[derive(Args, Debug)]
pub struct CoverInput {
    /// `z` or `free:K`.
    #[arg(long, default_value = "z")]
    pub source: String,
    /// `cyclic:N`, `torus:N`, or a quotient JSON file.
    #[arg(long)]
    pub target: String,
    /// Radius of the source ball (default: large enough to map onto).
    #[arg(long)]
    pub ball: Option<u32>,
}

#[derive(Subcommand, Debug)]
pub enum SpaceCmd {
    Girth {
        #[command(flatten)]
        space: SpaceInput,
    },
    Delta {
        #[command(flatten)]
        space: SpaceInput,
        #[arg(long, default_value_t = 160)]
        max_points: usize,
    },
    Annuli {
        #[command(flatten)]
        space: SpaceInput,
        #[arg(long)]
        width: u32,
    },
}

#[derive(Subcommand, Debug)]
pub enum CoverCmd {
    Radius {
        #[command(flatten)]
        cover: CoverInput,
    },
    Faithfulness {
        #[arg(long, default_value = "z")]
        source: String,
        #[arg(long, value_delimiter = ',', required = true)]
        targets: Vec<String>,
        #[arg(long)]
        ball: Option<u32>,
    },
}

#[derive(Subcommand, Debug)]
pub enum LiftCmd {
    /// Norms of a random element lifted through a family of quotients.
    Profile {
        #[arg(long, default_value = "z")]
        source: String,
        #[arg(long, value_delimiter = ',', required = true)]
        targets: Vec<String>,
        #[arg(long)]
        ball: Option<u32>,
        #[arg(long, default_value_t = 1)]
        support: u32,
        #[arg(long, default_value_t = 3)]
        terms: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        tail: Option<usize>,
        /// ONL constant for the continuity bound.
        #[arg(long)]
        c: Option<f64>,
    },
    /// Compares the lift of a product with the product of lifts.
    Mult {
        #[command(flatten)]
        cover: CoverInput,
        /// Lifting window (default: the injectivity radius).
        #[arg(long)]
        window: Option<u32>,
        #[arg(long, default_value_t = 20)]
        pairs: usize,
        #[arg(long)]
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Mode {
    Root,
    Verbatim,
}

#[derive(Subcommand, Debug)]
pub enum OnlCmd {
    Estimate {
        #[command(flatten)]
        space: SpaceInput,
        #[arg(long)]
        radius: u32,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        gaussian: usize,
        #[arg(long, default_value_t = 4)]
        permutations: usize,
        #[arg(long)]
        no_powers: bool,
        /// Largest support diameter to try.
        #[arg(long)]
        cap: Option<u32>,
    },
    Amplify {
        #[arg(long)]
        c: f64,
        #[arg(long)]
        target: f64,
        #[arg(long, value_enum, default_value_t = Mode::Root)]
        mode: Mode,
        /// `linear:A,B` or `step:K=V,K=V,...`; unspecified by default.
        #[arg(long)]
        f: Option<String>,
    },
    Lacunary {
        #[arg(long, value_delimiter = ',')]
        delta: Vec<u64>,
        #[arg(long, value_delimiter = ',')]
        r: Vec<u64>,
        /// Use `delta_m = m`, `r_m = 40 m^2` for `m = 1..=M`.
        #[arg(long, conflicts_with_all = ["delta", "r"])]
        sweep: Option<u64>,
    },
    Floor {
        #[arg(long)]
        degree: u64,
    },
}

#[derive(Subcommand, Debug)]
pub enum QuantkCmd {
    Check {
        #[command(flatten)]
        space: SpaceInput,
        /// Operator in `row col re im` lines.
        #[arg(long, value_name = "FILE")]
        operator: PathBuf,
        #[arg(long)]
        r: u32,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        unitary: bool,
    },
    Round {
        #[command(flatten)]
        space: SpaceInput,
        #[arg(long, value_name = "FILE")]
        operator: PathBuf,
        #[arg(long)]
        r: u32,
        #[arg(long)]
        eps: f64,
    },
    /// Index form of random permutation-with-phase unitaries.
    Index {
        #[command(flatten)]
        space: SpaceInput,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Lifts a random localisation path and checks evaluation commutes.
    Path {
        #[command(flatten)]
        cover: CoverInput,
        #[arg(long, default_value_t = 4)]
        samples: usize,
        #[arg(long)]
        seed: u64,
    },
    Records {
        #[arg(long, value_delimiter = ',', required = true)]
        d: Vec<u64>,
        #[arg(long, value_delimiter = ',', required = true)]
        r: Vec<u64>,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 2)]
        factor: u64,
        #[arg(long, default_value_t = 0.5)]
        eps_factor: f64,
        #[arg(long, value_delimiter = ',')]
        probe: Vec<u64>,
    },
}

#[derive(Subcommand, Debug)]
pub enum RdCmd {
    Estimate {
        #[arg(long)]
        group: String,
        #[arg(long)]
        radius: u32,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 4)]
        terms: usize,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        #[arg(long)]
        seed: u64,
    },
    Isometry {
        #[command(flatten)]
        cover: CoverInput,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        #[arg(long)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(long)]
    pub eps0: f64,
    #[arg(long, default_value_t = 4.0)]
    pub gap: f64,
    /// Stub oracle: `t = factor * r`.
    #[arg(long, default_value_t = 2)]
    pub factor: u64,
    /// Stub oracle: `eps' = eps_factor * eps`.
    #[arg(long, default_value_t = 0.5)]
    pub eps_factor: f64,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct ConditionChoice {
    /// Metric condition with this lambda.
    #[arg(long)]
    pub metric: Option<f64>,
    /// Piece-count condition with this p.
    #[arg(long)]
    pub pieces: Option<usize>,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct LengthSource {
    /// Whitespace-separated relator lengths, ascending.
    #[arg(long, value_name = "FILE")]
    pub lengths: Option<PathBuf>,
    /// Use the lengths `2^1, ..., 2^K`.
    #[arg(long)]
    pub powers: Option<u32>,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct GraphSource {
    #[arg(long, value_delimiter = ',', value_name = "FILES")]
    pub graphs: Vec<PathBuf>,
    /// Cycles of length `2^k` for each listed `k`, labelled `abab...`.
    #[arg(long, value_delimiter = ',')]
    pub cycle_powers: Vec<u32>,
}

#[derive(Subcommand, Debug)]
pub enum ScCmd {
    Pieces {
        /// Presentation: one relator per line.
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
    },
    Condition {
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        #[command(flatten)]
        which: ConditionChoice,
    },
    /// Relators read from the cycles of a labelled graph.
    Relators {
        #[arg(long, value_name = "FILE")]
        graph: PathBuf,
        /// Longest cycle to enumerate (default: the girth).
        #[arg(long)]
        cap: Option<u64>,
    },
    Schedule {
        #[command(flatten)]
        source: LengthSource,
        #[arg(long)]
        r0: u64,
        #[command(flatten)]
        oracle: OracleArgs,
        #[arg(long)]
        stages: Option<usize>,
    },
    Graphs {
        #[command(flatten)]
        source: GraphSource,
        #[command(flatten)]
        oracle: OracleArgs,
        /// Enumerate cycles up to girth plus this much.
        #[arg(long, default_value_t = 0)]
        extra: u64,
    },
    Lacunarity {
        #[arg(long, value_delimiter = ',', required = true)]
        profile: Vec<u64>,
        #[arg(long, value_delimiter = ',', required = true)]
        deltas: Vec<f64>,
    },
}
