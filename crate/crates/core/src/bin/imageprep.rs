use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hemobench::imageprep::{self, DEFAULT_CLIP_LIMIT, DEFAULT_TILES};

#[derive(Parser)]
#[command(name = "imageprep", version, about = "Histogram equalization and CLAHE for binary PGM images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Io {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Global histogram equalization.
    Equalize {
        #[command(flatten)]
        io: Io,
    },
    /// Contrast-limited adaptive histogram equalization.
    Clahe {
        #[command(flatten)]
        io: Io,
        /// Tile grid as TX,TY.
        #[arg(long, value_delimiter = ',', num_args = 1)]
        tiles: Option<Vec<usize>>,
        #[arg(long, default_value_t = DEFAULT_CLIP_LIMIT)]
        clip: f64,
    },
}

fn run(cli: Cli) -> Result<()> {
    let (io, out) = match &cli.command {
        Command::Equalize { io } => {
            let img = imageprep::load_pgm(&io.input)?;
            (io, imageprep::equalize(&img)?.0)
        }
        Command::Clahe { io, tiles, clip } => {
            let tiles = match tiles.as_deref() {
                None => DEFAULT_TILES,
                Some(&[tx, ty]) => (tx, ty),
                Some(_) => bail!("--tiles expects two values, e.g. 8,8"),
            };
            let img = imageprep::load_pgm(&io.input)?;
            (io, imageprep::clahe(&img, tiles, *clip)?)
        }
    };
    imageprep::save_pgm(&out, &io.out).with_context(|| format!("writing {}", io.out.display()))
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
