use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::rngs::OsRng;
use rand::RngCore;
use sha2::{Digest, Sha256};

use lsbmark::attack::{build_lut, Fill, ForgeryLut, Rect, TamperEdit};
use lsbmark::keyfile::{keygen, KeyFile};
use lsbmark::service::{remote_oracle, OracleServer, OracleService, DEFAULT_MAX_BODY};
use lsbmark::{
    apply_edit, decode_pgm, detect, embed, encode_pgm, forge, GrayImage, SchemeKey,
    WatermarkPattern,
};

const EXIT_TAMPERED: u8 = 2;

#[derive(Parser)]
#[command(
    name = "lsbmark",
    version,
    about = "LSB fragile watermarking and lookup-table forgery"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct KeyAndMark {
    /// Key file (TOML)
    #[arg(long)]
    key: PathBuf,
    /// Watermark picture (PGM, thresholded at 128)
    #[arg(long)]
    watermark: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a key file
    Keygen {
        #[arg(long)]
        seed: Option<String>,
        /// Output path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Watermark an image
    Embed {
        #[command(flatten)]
        secret: KeyAndMark,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check an image; exits 2 when tampering is found
    Detect {
        #[command(flatten)]
        secret: KeyAndMark,
        #[arg(long = "in")]
        input: PathBuf,
        /// Where to write the tamper map (255 = tampered)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the embedding oracle over HTTP
    ServeOracle {
        #[command(flatten)]
        secret: KeyAndMark,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
    },
    /// Query an oracle 128 times and store the forgery table
    BuildLut {
        #[arg(long)]
        oracle: String,
        #[arg(long)]
        lut: PathBuf,
        /// Image side; taken from --in when omitted
        #[arg(long)]
        side: Option<usize>,
        /// Any image of the target size
        #[arg(long = "in")]
        input: Option<PathBuf>,
    },
    /// Put a valid watermark on an image using a stored table
    Forge {
        #[arg(long)]
        lut: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Overwrite a rectangle with a constant or random bytes
    Tamper {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// x,y,w,h
        #[arg(long)]
        rect: Rect,
        /// Fill value; random bytes when omitted
        #[arg(long)]
        value: Option<u8>,
        /// Seed for the random fill
        #[arg(long)]
        seed: Option<String>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits with 2 on usage errors, which is reserved for tampering.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn read_image(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode_pgm(&bytes).with_context(|| format!("decoding {}", path.display()))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("writing {}", path.display()))?;
    tmp.write_all(bytes)?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn load_secret(s: &KeyAndMark) -> Result<(SchemeKey, WatermarkPattern)> {
    let text =
        fs::read_to_string(&s.key).with_context(|| format!("reading {}", s.key.display()))?;
    let key = KeyFile::parse(&text)
        .and_then(|f| f.to_key())
        .with_context(|| format!("parsing {}", s.key.display()))?;
    let wm = WatermarkPattern::from_image(&read_image(&s.watermark)?);
    Ok((key, wm))
}

fn seed_u64(seed: &str) -> u64 {
    let digest = Sha256::digest(seed.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Keygen { seed, out } => {
            let text = keygen(seed.as_deref().map(str::as_bytes)).to_toml();
            match out {
                Some(path) => write_atomic(&path, text.as_bytes())?,
                None => print!("{text}"),
            }
        }
        Command::Embed { secret, input, out } => {
            let (key, wm) = load_secret(&secret)?;
            let marked = embed(&key, &read_image(&input)?, &wm)?;
            write_atomic(&out, &encode_pgm(&marked))?;
        }
        Command::Detect { secret, input, out } => {
            let (key, wm) = load_secret(&secret)?;
            let map = detect(&key, &read_image(&input)?, &wm)?;
            if let Some(path) = out {
                write_atomic(&path, &encode_pgm(&map.to_image()))?;
            }
            let count = map.tampered_count();
            println!("tampered pixels: {count}");
            if count > 0 {
                return Ok(ExitCode::from(EXIT_TAMPERED));
            }
        }
        Command::ServeOracle { secret, bind } => {
            let (key, wm) = load_secret(&secret)?;
            let server = OracleServer::bind(OracleService::new(key, wm), &bind, DEFAULT_MAX_BODY)
                .with_context(|| format!("binding {bind}"))?;
            println!("listening on {}", server.url());
            std::io::stdout().flush()?;
            server.join();
        }
        Command::BuildLut {
            oracle,
            lut,
            side,
            input,
        } => {
            let side = match (side, input) {
                (Some(side), _) => side,
                (None, Some(path)) => read_image(&path)?.side(),
                (None, None) => bail!("build-lut needs --side or --in"),
            };
            let client = remote_oracle(&oracle);
            let table = build_lut(&client, side)?;
            write_atomic(&lut, &table.to_bytes())?;
            println!("lookup table for side {side} written to {}", lut.display());
        }
        Command::Forge { lut, input, out } => {
            let bytes = fs::read(&lut).with_context(|| format!("reading {}", lut.display()))?;
            let table = ForgeryLut::from_bytes(&bytes)?;
            let forged = forge(&table, &read_image(&input)?)?;
            write_atomic(&out, &encode_pgm(&forged))?;
        }
        Command::Tamper {
            input,
            out,
            rect,
            value,
            seed,
        } => {
            let fill = match (value, seed) {
                (Some(v), _) => Fill::Constant(v),
                (None, Some(s)) => Fill::Random { seed: seed_u64(&s) },
                (None, None) => Fill::Random {
                    seed: OsRng.next_u64(),
                },
            };
            let edited = apply_edit(&read_image(&input)?, &TamperEdit::Overwrite { rect, fill })?;
            write_atomic(&out, &encode_pgm(&edited))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
