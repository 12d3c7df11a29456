mod table;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sealkit::attack::{self, CorpusGrid, Rect};
use sealkit::image::{write_bytes, FileFormat};
use sealkit::svm::{self, ClassifierModel, DEFAULT_C, DEFAULT_GAMMA};
use sealkit::{authenticate, embed, read_image, write_image, QuantizerConfig, SecretKey};

use table::FeatureRow;

#[derive(Parser)]
#[command(
    name = "sealkit",
    version,
    about = "Semi-fragile watermarking, tamper maps and attack classification for grayscale images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Watermark an image.
    Embed {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        secret: Secret,
    },
    /// Extract the watermark, write the five error maps and report features.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        secret: Secret,
        /// Directory receiving xw1.png, xw2.png, vmap1.png, vmap2.png and xw_comb.png.
        #[arg(long)]
        maps_dir: PathBuf,
        /// CSV file to append the feature row to (created with a header if missing).
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Apply an attack to an image.
    #[command(subcommand)]
    Attack(AttackCommand),
    /// Peak signal-to-noise ratio between two images, in dB.
    Psnr { a: PathBuf, b: PathBuf },
    /// Build a labeled feature corpus from a directory of source images.
    Corpus {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        secret: Secret,
    },
    /// Train the four-class classifier.
    Train {
        #[arg(long)]
        features: PathBuf,
        /// CSV with `path` and `label` columns; may be the features file itself.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_C)]
        c: f64,
        #[arg(long, default_value_t = DEFAULT_GAMMA)]
        gamma: f64,
    },
    /// Print one predicted class label (1-4) per feature row.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
    },
}

#[derive(Subcommand)]
enum AttackCommand {
    /// JPEG recompression. A `.jpg`/`.jpeg` output keeps the compressed stream itself.
    Jpeg {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=100))]
        qf: u8,
    },
    /// Paste a rectangle of a donor image into the target.
    Insert {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        donor: PathBuf,
        #[arg(long)]
        rect: Rect,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Secret {
    /// Secret key, 48 hex digits.
    #[arg(long)]
    key: SecretKey,
    /// Quantization step.
    #[arg(long, default_value_t = QuantizerConfig::DEFAULT_STEP)]
    q: f64,
}

impl Secret {
    fn quantizer(&self) -> Result<QuantizerConfig, Failure> {
        Ok(QuantizerConfig::new(self.q)?)
    }
}

/// A failed command, carrying its exit status.
#[derive(Debug)]
enum Failure {
    Library(sealkit::Error),
    Invalid(String),
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    Malformed {
        path: PathBuf,
        reason: String,
    },
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Library(e) if e.is_io() => 2,
            Failure::Library(_) | Failure::Invalid(_) => 1,
            Failure::Io { .. } | Failure::Malformed { .. } => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Library(e) => write!(f, "{e}"),
            Failure::Invalid(msg) => write!(f, "{msg}"),
            Failure::Io { path, source } => write!(f, "{}: {source}", path.display()),
            Failure::Malformed { path, reason } => write!(f, "{}: {reason}", path.display()),
        }
    }
}

impl From<sealkit::Error> for Failure {
    fn from(e: sealkit::Error) -> Self {
        Failure::Library(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("sealkit: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Embed { input, out, secret } => {
            let quant = secret.quantizer()?;
            let img = read_image(&input)?;
            let marked = embed(&img, &secret.key, &quant)?;
            write_image(&out, &marked)?;
        }
        Command::Verify {
            input,
            secret,
            maps_dir,
            features,
        } => verify(&input, &secret, &maps_dir, features.as_deref())?,
        Command::Attack(AttackCommand::Jpeg { input, out, qf }) => {
            let img = read_image(&input)?;
            match FileFormat::from_path(&out) {
                FileFormat::Jpeg { .. } => write_bytes(&out, &attack::jpeg_encode(&img, qf)?)?,
                _ => write_image(&out, &attack::jpeg_roundtrip(&img, qf)?)?,
            }
        }
        Command::Attack(AttackCommand::Insert {
            input,
            donor,
            rect,
            out,
        }) => {
            let target = read_image(&input)?;
            let donor = read_image(&donor)?;
            write_image(&out, &attack::object_insert(&target, &donor, rect)?)?;
        }
        Command::Psnr { a, b } => {
            let db = attack::psnr(&read_image(&a)?, &read_image(&b)?)?;
            if db.is_infinite() {
                println!("inf");
            } else {
                println!("{db:.4}");
            }
        }
        Command::Corpus {
            images,
            out,
            secret,
        } => corpus(&images, &out, &secret)?,
        Command::Train {
            features,
            labels,
            out,
            c,
            gamma,
        } => train(&features, &labels, &out, c, gamma)?,
        Command::Classify { model, features } => {
            let text = std::fs::read_to_string(&model).map_err(|source| Failure::Io {
                path: model.clone(),
                source,
            })?;
            let model = ClassifierModel::from_text(&text).map_err(|e| Failure::Malformed {
                path: model,
                reason: e.to_string(),
            })?;
            let rows = table::read_features(&features)?;
            let mut out = String::new();
            for row in &rows {
                out.push_str(&format!(
                    "{}\n",
                    model.predict(&row.features.classifier_input())?
                ));
            }
            print!("{out}");
        }
    }
    Ok(())
}

fn verify(
    input: &Path,
    secret: &Secret,
    maps_dir: &Path,
    features: Option<&Path>,
) -> Result<(), Failure> {
    if !maps_dir.is_dir() {
        return Err(Failure::Io {
            path: maps_dir.to_path_buf(),
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "maps directory does not exist",
            ),
        });
    }
    let quant = secret.quantizer()?;
    let img = read_image(input)?;
    let auth = authenticate(&img, &secret.key, &quant)?;
    let row = FeatureRow {
        path: input.display().to_string(),
        features: sealkit::feature_vector(&auth.maps),
        label: None,
    };
    for (stem, map) in auth.maps.named() {
        write_image(maps_dir.join(format!("{stem}.png")), map)?;
    }
    if let Some(csv_path) = features {
        table::append_feature_row(csv_path, &row)?;
    }
    println!("{}", table::FEATURE_HEADER.join(","));
    println!("{}", row.fields().join(","));
    Ok(())
}

const IMAGE_EXTENSIONS: [&str; 5] = ["png", "pgm", "pnm", "jpg", "jpeg"];

fn corpus(dir: &Path, out: &Path, secret: &Secret) -> Result<(), Failure> {
    let quant = secret.quantizer()?;
    let entries = std::fs::read_dir(dir).map_err(|source| Failure::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|source| Failure::Io {
                path: dir.to_path_buf(),
                source,
            })?
            .path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        if path.is_file() && ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
            paths.push(path);
        }
    }
    paths.sort();
    let mut sources = Vec::with_capacity(paths.len());
    for p in &paths {
        let name = p
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        sources.push((name, read_image(p)?));
    }
    let rows = attack::build_corpus(&sources, &secret.key, &quant, &CorpusGrid::default())?;
    let rows: Vec<FeatureRow> = rows
        .into_iter()
        .map(|r| FeatureRow {
            path: r.path,
            features: r.features,
            label: Some(r.label),
        })
        .collect();
    table::write_corpus(out, &rows)
}

fn train(features: &Path, labels: &Path, out: &Path, c: f64, gamma: f64) -> Result<(), Failure> {
    let rows = table::read_features(features)?;
    let labels = table::read_labels(labels)?;
    let mut samples = Vec::with_capacity(rows.len());
    for row in rows {
        let label = labels
            .get(&row.path)
            .copied()
            .ok_or_else(|| Failure::Invalid(format!("no label for feature row {:?}", row.path)))?;
        samples.push((row.features.classifier_input().to_vec(), label));
    }
    let model = svm::train(&samples, c, gamma)?;
    write_bytes(out, model.to_text().as_bytes())?;
    Ok(())
}
