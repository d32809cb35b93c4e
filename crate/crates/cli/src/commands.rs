//! The `gen`, `peaks` and `analyze` subcommands.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use quasisym::config::{Degradation, Fixture};
use quasisym::imaging::{generate_tiling, load_image, save_png, TilingFamily, TilingSpec};
use quasisym::pipeline::{analyze, load_session, parse_basis, parse_pair, save_session, write_json, AnalysisRequest, Session};
use quasisym::spectral::{detect_peaks, fft_grid, refine_peak, render_heatmap, Peak, Taper, DEFAULT_RADIUS, DEFAULT_TOL};
use quasisym::symmetry::{histogram, write_deviation_csv, write_histogram_csv, PointGroup};
use quasisym::{Error, Image, Result};

/// Bins of the deviation histograms.
pub const HISTOGRAM_BINS: usize = 50;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn parse_shift(s: &str) -> Result<[i64; 2]> {
    let [x, y] = parse_pair(s)?;
    if x.fract() != 0.0 || y.fract() != 0.0 {
        return Err(Error::InvalidArgument(format!("shift `{s}` must be integral")));
    }
    Ok([x as i64, y as i64])
}

fn parse_taper(s: &str) -> Result<Taper> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| Error::InvalidArgument(format!("unknown taper `{s}` (auto, none, sine, hann)")))
}

#[derive(Args, Debug, Clone)]
pub struct GenArgs {
    /// One of p4, p4mm, p4g, penrose, ammann_beenker, fibonacci_squares.
    #[arg(long)]
    pub tiling: Option<String>,
    /// Fixture TOML; flags given alongside override its tiling.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub period: Option<f64>,
    #[arg(long)]
    pub edge_length: Option<f64>,
    #[arg(long)]
    pub line_width: Option<f64>,
    /// World position of the image centre, `x,y`.
    #[arg(long, allow_hyphen_values = true)]
    pub offset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cyclic shift in pixels, `x,y`.
    #[arg(long, allow_hyphen_values = true)]
    pub shift: Option<String>,
    /// Fraction of pixels inverted.
    #[arg(long)]
    pub flip: Option<f64>,
    #[arg(long)]
    pub flip_seed: Option<u64>,
    /// Keep the top-left square of this side.
    #[arg(long)]
    pub crop: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

impl GenArgs {
    pub fn spec(&self) -> Result<(TilingSpec, Degradation)> {
        let (mut spec, mut degrade) = match &self.config {
            Some(path) => {
                let f = Fixture::load(path)?;
                (f.tiling, f.degrade)
            }
            None => {
                let family = self
                    .tiling
                    .as_deref()
                    .ok_or_else(|| Error::InvalidArgument("--tiling or --config is required".into()))?;
                (TilingSpec::new(family.parse::<TilingFamily>()?, 600), Degradation::default())
            }
        };
        if self.config.is_some() {
            if let Some(family) = &self.tiling {
                spec.family = family.parse()?;
            }
        }
        if let Some(v) = self.gamma {
            spec.gamma = v;
        }
        if let Some(v) = self.size {
            spec.size = v;
        }
        if let Some(v) = self.period {
            spec.period = v;
        }
        if let Some(v) = self.edge_length {
            spec.edge_length = v;
        }
        if let Some(v) = self.line_width {
            spec.line_width = v;
        }
        if let Some(v) = &self.offset {
            spec.window_offset = Some(parse_pair(v)?);
        }
        if let Some(v) = self.seed {
            spec.seed = v;
        }
        if let Some(v) = &self.shift {
            degrade.shift = Some(parse_shift(v)?);
        }
        if let Some(v) = self.flip {
            degrade.flip_fraction = v;
        }
        if let Some(v) = self.flip_seed {
            degrade.flip_seed = v;
        }
        if let Some(v) = self.crop {
            degrade.crop = Some(v);
        }
        spec.validate()?;
        Ok((spec, degrade))
    }
}

#[derive(Serialize)]
struct GenEcho<'a> {
    tiling: &'a TilingSpec,
    #[serde(skip_serializing_if = "Degradation::is_identity")]
    degrade: &'a Degradation,
}

pub fn cmd_generate(args: &GenArgs, out: &mut impl Write) -> Result<()> {
    let (spec, degrade) = args.spec()?;
    let img: Image = degrade.apply(&generate_tiling(&spec)?)?;
    save_png(&img, &args.out)?;
    let echo = toml::to_string(&GenEcho {
        tiling: &spec,
        degrade: &degrade,
    })
    .map_err(|e| Error::Config(e.to_string()))?;
    write!(out, "{echo}").map_err(stdout_error)?;
    writeln!(out, "# wrote {} ({}x{})", args.out.display(), img.n(), img.n()).map_err(stdout_error)
}

fn stdout_error(source: std::io::Error) -> Error {
    Error::Io {
        path: "<stdout>".into(),
        source,
    }
}

#[derive(Args, Debug, Clone)]
pub struct PeaksArgs {
    pub image: PathBuf,
    /// Relative amplitude threshold.
    #[arg(long, default_value_t = quasisym::pipeline::DEFAULT_THD)]
    pub threshold: f64,
    /// Writes the diffraction diagram here.
    #[arg(long)]
    pub heatmap: Option<PathBuf>,
    /// Linear instead of `log(1 + |ρ̂|/thd)` scaling for the heatmap.
    #[arg(long)]
    pub linear: bool,
    /// Guess `kx,ky` to refine; repeatable.
    #[arg(long, allow_hyphen_values = true)]
    pub refine: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    pub radius: f64,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Peak JSON destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Output of `peaks`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakList {
    pub image_path: String,
    pub n: usize,
    pub thd: f64,
    pub peaks: Vec<Peak<f64>>,
    pub refined: Vec<Peak<f64>>,
}

pub fn peak_list(img: &Image, image_path: &str, args: &PeaksArgs) -> Result<PeakList> {
    let grid = fft_grid(img);
    let peaks = detect_peaks(&grid, args.threshold)?;
    if let Some(path) = &args.heatmap {
        save_png(&render_heatmap(&grid, args.threshold, !args.linear)?, path)?;
    }
    let refined = args
        .refine
        .iter()
        .map(|g| {
            let [x, y] = parse_pair(g)?;
            refine_peak(img, quasisym::Freq::new(x, y), args.radius, args.tol)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PeakList {
        image_path: image_path.to_string(),
        n: img.n(),
        thd: args.threshold,
        peaks,
        refined,
    })
}

pub fn cmd_peaks(args: &PeaksArgs, out: &mut impl Write) -> Result<()> {
    let img: Image = load_image(&args.image)?;
    let list = peak_list(&img, &args.image.to_string_lossy(), args)?;
    match &args.out {
        Some(path) => write_json(&list, create(path)?),
        None => {
            write_json(&list, &mut *out)?;
            writeln!(out).map_err(stdout_error)
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct AnalyzeArgs {
    /// Image to analyse; rendered from `--config` when absent.
    pub image: Option<PathBuf>,
    /// Fundamental guesses, `k1x,k1y;k2x,k2y;...`.
    #[arg(long, allow_hyphen_values = true)]
    pub basis: Option<String>,
    /// Reuses the request of a saved session.
    #[arg(long)]
    pub session: Option<PathBuf>,
    /// Fixture TOML supplying the request (and the image when none is given).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub fl: Option<u32>,
    #[arg(long)]
    pub thd: Option<f64>,
    #[arg(long)]
    pub noise_floor: Option<f64>,
    #[arg(long)]
    pub min_coverage: Option<f64>,
    /// auto, none, sine or hann.
    #[arg(long)]
    pub taper: Option<String>,
    /// Starts the descent at this group, e.g. `D4`.
    #[arg(long)]
    pub group: Option<String>,
    #[arg(long)]
    pub mirror_threshold: Option<f64>,
    #[arg(long)]
    pub rotation_threshold: Option<f64>,
    #[arg(long)]
    pub radius: Option<f64>,
    /// Directory for the session JSON and the CSVs.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// File stem of the outputs; defaults to the image stem.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long, default_value_t = HISTOGRAM_BINS)]
    pub bins: usize,
}

impl AnalyzeArgs {
    pub fn request(&self) -> Result<(AnalysisRequest, Option<Fixture>)> {
        if self.session.is_some() && (self.basis.is_some() || self.config.is_some()) {
            return Err(Error::InvalidArgument("--session cannot be combined with --basis or --config".into()));
        }
        let fixture = self.config.as_ref().map(Fixture::load).transpose()?;
        let mut req = if let Some(path) = &self.session {
            load_session::<f64>(path)?.request
        } else if let Some(f) = &fixture {
            f.analysis.clone()
        } else {
            AnalysisRequest::default()
        };
        if let Some(b) = &self.basis {
            req.basis = parse_basis(b)?;
        }
        if req.basis.is_empty() {
            return Err(Error::InvalidArgument("one of --basis, --session or --config is required".into()));
        }
        if let Some(v) = self.fl {
            req.fl = v;
        }
        if let Some(v) = self.thd {
            req.thd = v;
        }
        if let Some(v) = self.noise_floor {
            req.noise_floor = Some(v);
        }
        if let Some(v) = self.min_coverage {
            req.min_coverage = v;
        }
        if let Some(v) = &self.taper {
            req.taper = parse_taper(v)?;
        }
        if let Some(v) = &self.group {
            req.group = Some(v.parse::<PointGroup>()?);
        }
        if let Some(v) = self.mirror_threshold {
            req.thresholds.mirror = v;
        }
        if let Some(v) = self.rotation_threshold {
            req.thresholds.rotation = v;
        }
        if let Some(v) = self.radius {
            req.refine_radius = v;
        }
        req.validate()?;
        Ok((req, fixture))
    }
}

/// Paths written by `analyze`.
#[derive(Debug, Default)]
pub struct AnalyzeOutputs {
    pub session: PathBuf,
    pub deviations: Vec<PathBuf>,
    pub histograms: Vec<PathBuf>,
}

pub fn write_outputs(session: &Session<f64>, dir: &Path, stem: &str, bins: usize) -> Result<AnalyzeOutputs> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut outputs = AnalyzeOutputs {
        session: dir.join(format!("{stem}.session.json")),
        ..Default::default()
    };
    save_session(session, &outputs.session)?;
    let t = session.point_group.thresholds;
    let lines = [("mirror", t.mirror), ("rotation", t.rotation)];
    for report in session.point_group.reports.iter().chain(&session.point_group.rejected) {
        let dev = dir.join(format!("{stem}.{}.deviations.csv", report.label));
        write_deviation_csv(report, create(&dev)?)?;
        let hist = dir.join(format!("{stem}.{}.histogram.csv", report.label));
        write_histogram_csv(&report.label, &histogram(&report.overall_values(), bins), &lines, create(&hist)?)?;
        outputs.deviations.push(dev);
        outputs.histograms.push(hist);
    }
    Ok(outputs)
}

pub fn cmd_analyze(args: &AnalyzeArgs, out: &mut impl Write) -> Result<AnalyzeOutputs> {
    let (req, fixture) = args.request()?;
    let (img, image_path): (Image, String) = match (&args.image, &fixture) {
        (Some(path), _) => (load_image(path)?, path.to_string_lossy().into_owned()),
        (None, Some(f)) => (f.render()?, f.name.clone()),
        (None, None) => return Err(Error::InvalidArgument("an image or --config is required".into())),
    };
    let stem = args.name.clone().unwrap_or_else(|| {
        Path::new(&image_path)
            .file_stem()
            .map_or_else(|| "analysis".to_string(), |s| s.to_string_lossy().into_owned())
    });
    let session = analyze(&img, &image_path, &req)?;
    let outputs = write_outputs(&session, &args.out_dir, &stem, args.bins)?;
    let pg = &session.point_group;
    let mut w = |s: String| writeln!(out, "{s}").map_err(stdout_error);
    w(format!("verdict: {}", session.verdict()))?;
    w(format!(
        "holohedry {}, coverage {:.3}, {} elements",
        session.holohedry.group, session.indexing.coverage, session.mselect.elements
    ))?;
    for r in pg.reports.iter().chain(&pg.rejected) {
        w(format!(
            "  {:<4} fraction below {:.3} (threshold {}), max {:.3e}, median {:.3e}",
            r.label, r.stats.fraction_below, r.stats.threshold, r.stats.max, r.stats.median
        ))?;
    }
    w(session.proof_trace.clone())?;
    w(format!("session: {}", outputs.session.display()))?;
    Ok(outputs)
}
