//! `lagfilt`: design, analyse and run Laguerre-weighted least-squares
//! filters, estimate optical flow, and run the self-test suite.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lagfilt::acceptance::{self, Options, CRITERIA};
use lagfilt::design::{
    derive_causal_lde, derive_noncausal_pair, optimal_q, table_coefficients, ClosedForm,
    CoefficientDocument, DesignRecord, FilterCoefficients, FilterDesign,
};
use lagfilt::flow::{process_sequence, FlowConfig};
use lagfilt::response::{
    evaluate_response, flatness_report, format_significant, response_csv, uniform_grid,
    FrequencyResponse,
};
use lagfilt::runtime::io::{
    format_signal_csv, read_frames, read_pgm, read_signal_csv, write_pgm_preview, write_raw_stack,
};
use lagfilt::runtime::{
    filter_image_separable, filter_signal, filter_time_stack, Axis, Image, Priming,
};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(
    name = "lagfilt",
    version,
    about = "Laguerre least-squares filter design, analysis and optical flow"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Design a filter and print its coefficients.
    Design(DesignCmd),
    /// Tabulate the frequency response of a filter as CSV.
    Response(ResponseCmd),
    /// Run a filter over a signal, an image or a frame stream.
    Filter(FilterCmd),
    /// Estimate optical flow and background disparity for a frame stream.
    Flow(FlowCmd),
    /// Run the acceptance suite, one line per criterion.
    Selftest(SelftestCmd),
}

/// Delay in samples, or the zero-at-Nyquist delay of a tabulated design.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Delay {
    Samples(f64),
    Auto,
}

impl FromStr for Delay {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Delay::Auto);
        }
        s.parse::<f64>()
            .ok()
            .filter(|q| q.is_finite())
            .map(Delay::Samples)
            .ok_or_else(|| format!("expected a number or \"auto\", got {s:?}"))
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum CausalityArg {
    Causal,
    Noncausal,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    /// General least-squares derivation.
    Derive,
    /// Closed-form tables (B = 2 only).
    Table,
    /// Both, plus their largest discrepancy: coefficients for causal
    /// designs, combined response for two-sided pairs.
    BothCompare,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
struct DesignArgs {
    /// Polynomial degree B.
    #[arg(long = "B", id = "B", default_value_t = 2)]
    degree: usize,
    /// Derivative order D (0 smooths, 1 differentiates).
    #[arg(long = "D", id = "D", default_value_t = 0)]
    derivative: usize,
    /// Weight shape exponent kappa (causal designs only).
    #[arg(long, default_value_t = 0)]
    kappa: u32,
    /// Forgetting factor sigma < 0; the pole is exp(sigma).
    #[arg(long, default_value_t = -0.5, allow_negative_numbers = true)]
    sigma: f64,
    /// Pole in (0, 1), instead of --sigma [default: exp(sigma)].
    #[arg(long, conflicts_with = "sigma")]
    pole: Option<f64>,
    /// Delay in samples, or "auto" for the tabulated B = 2 designs.
    #[arg(long, default_value = "0", allow_negative_numbers = true)]
    q: Delay,
    /// One-sided recursion, or a forward/backward pair (kappa = 0, q = 0).
    #[arg(long, value_enum, default_value_t = CausalityArg::Causal)]
    causality: CausalityArg,
    /// Sample period T.
    #[arg(long = "T", id = "T", default_value_t = 1.0)]
    sample_period: f64,
}

#[derive(Args, Debug)]
struct DesignCmd {
    #[command(flatten)]
    design: DesignArgs,
    #[arg(long, value_enum, default_value_t = Source::Derive)]
    source: Source,
    /// Coefficient document format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ResponseCmd {
    /// Coefficient file (JSON, or CSV rows as written by `design --format csv`).
    /// Without it the inline design flags are used.
    #[arg(long, conflicts_with_all = ["B", "D", "kappa", "sigma", "pole", "q", "causality"])]
    coeff: Option<PathBuf>,
    #[command(flatten)]
    design: DesignArgs,
    /// Number of frequencies, evenly spaced over [0, pi].
    #[arg(long, default_value_t = 512)]
    points: usize,
    /// Append derivatives of |H|^2 at w = 0 as `#` comment lines.
    #[arg(long)]
    report_flatness: bool,
    /// Highest derivative order in the flatness report.
    #[arg(long, default_value_t = 3)]
    flatness_order: usize,
    /// Write here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum AxisArg {
    Rows,
    Cols,
    Time,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum PrimingArg {
    Zero,
    Hold,
}

#[derive(Args, Debug)]
struct FilterCmd {
    /// Coefficient file (JSON or CSV).
    #[arg(long)]
    coeff: PathBuf,
    /// Signal CSV (one value per line), PGM image, PGM frame directory, or
    /// raw `.f32` stack.
    #[arg(long)]
    input: PathBuf,
    /// Expected filter kind; defaults to whatever the coefficient file holds.
    #[arg(long, value_enum)]
    mode: Option<CausalityArg>,
    /// Filtering direction for images and stacks.
    #[arg(long, value_enum, default_value_t = AxisArg::Rows)]
    axis: AxisArg,
    #[arg(long, value_enum, default_value_t = PrimingArg::Hold)]
    priming: PrimingArg,
    /// Output path: CSV for signals (standard output if omitted), `.pgm`
    /// (normalized preview) or `.f32` for images, `.f32` for stacks.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Sample period for CSV coefficient files.
    #[arg(long = "T", id = "T", default_value_t = 1.0)]
    sample_period: f64,
}

#[derive(Args, Debug)]
struct FlowCmd {
    /// PGM frame directory or raw `.f32` stack.
    #[arg(long)]
    frames: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Spatial differentiator forgetting factor [default: -1].
    #[arg(long, allow_negative_numbers = true)]
    spatial_sigma: Option<f64>,
    /// Temporal differentiator forgetting factor [default: -1].
    #[arg(long, allow_negative_numbers = true)]
    temporal_sigma: Option<f64>,
    /// Temporal differentiator delay in whole frames [default: 4].
    #[arg(long)]
    temporal_q: Option<f64>,
    /// Temporal differentiator weight shape [default: 1].
    #[arg(long)]
    temporal_kappa: Option<u32>,
    /// Pole of the product smoothers [default: exp(-1/16)].
    #[arg(long)]
    smoothing_pole: Option<f64>,
    /// Unsolvable when det J < threshold * trace(J)^2 [default: 1e-6].
    #[arg(long)]
    det_threshold: Option<f64>,
    /// Pixel spacing [default: 1].
    #[arg(long = "T-space")]
    t_space: Option<f64>,
    /// Frame interval [default: 1].
    #[arg(long = "T-time")]
    t_time: Option<f64>,
    /// Fail (exit 4) when the stream does not outlast the warm-up span.
    #[arg(long)]
    strict: bool,
}

#[derive(Args, Debug)]
struct SelftestCmd {
    /// Run only these criteria (repeatable); all by default.
    #[arg(long)]
    only: Vec<usize>,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    AutoDelay(String),
    TooShort(String),
    SelftestFailed,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::SelftestFailed => 1,
            Failure::Input(_) => 2,
            Failure::AutoDelay(_) => 3,
            Failure::TooShort(_) => 4,
        }
    }
}

impl From<lagfilt::Error> for Failure {
    fn from(e: lagfilt::Error) -> Self {
        match e {
            lagfilt::Error::NoOptimalDelay(_) => Failure::AutoDelay(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Design(cmd) => run_design(cmd),
        Command::Response(cmd) => run_response(cmd),
        Command::Filter(cmd) => run_filter(cmd),
        Command::Flow(cmd) => run_flow(cmd),
        Command::Selftest(cmd) => run_selftest(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Input(msg) | Failure::AutoDelay(msg) | Failure::TooShort(msg) => {
                    eprintln!("lagfilt: {msg}")
                }
                Failure::SelftestFailed => eprintln!("lagfilt: self-test failed"),
            }
            ExitCode::from(failure.code())
        }
    }
}

fn emit(text: &str, output: Option<&Path>) -> Outcome {
    match output {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// A fully resolved design: parameters plus the tabulated form, if any.
struct Resolved {
    design: FilterDesign,
    form: Option<ClosedForm>,
}

fn resolve(args: &DesignArgs) -> Outcome<Resolved> {
    let pole = args.pole.unwrap_or_else(|| args.sigma.exp());
    let causal = args.causality == CausalityArg::Causal;
    let form = if args.degree == 2 {
        ClosedForm::lookup(args.kappa, args.derivative, causal)
    } else {
        None
    };
    let q = match args.q {
        Delay::Samples(q) => q,
        Delay::Auto => {
            let form = form.ok_or_else(|| {
                Failure::AutoDelay(format!(
                    "--q auto needs a tabulated design (B = 2, D <= 1, kappa <= 1); got B = {}, D = {}, kappa = {}",
                    args.degree, args.derivative, args.kappa
                ))
            })?;
            optimal_q(form, pole)?
        }
    };
    let design = if causal {
        FilterDesign::causal(args.degree, args.derivative, args.kappa, pole, q)?
    } else {
        if args.kappa != 0 {
            return Err(Failure::Input(
                "non-causal designs require kappa = 0".into(),
            ));
        }
        let mut design = FilterDesign::two_sided(args.degree, args.derivative, pole)?;
        design.delay = q;
        design.validate()?;
        design
    };
    Ok(Resolved {
        design: design.with_sample_period(args.sample_period)?,
        form,
    })
}

fn derive(design: &FilterDesign) -> Outcome<FilterCoefficients> {
    Ok(match design.weight.causality() {
        lagfilt::design::Causality::Causal => derive_causal_lde(design)?.into(),
        lagfilt::design::Causality::TwoSided => derive_noncausal_pair(design)?.into(),
    })
}

fn tabulated(resolved: &Resolved) -> Outcome<FilterCoefficients> {
    let form = resolved.form.ok_or_else(|| {
        Failure::Input(
            "no tabulated design for these parameters (tables cover B = 2, D <= 1, kappa <= 1)"
                .into(),
        )
    })?;
    let d = &resolved.design;
    Ok(table_coefficients(
        form,
        d.pole(),
        d.delay,
        d.sample_period,
    )?)
}

fn document(coefficients: &FilterCoefficients, design: &FilterDesign) -> CoefficientDocument {
    CoefficientDocument::new(coefficients, Some(DesignRecord::from(design)))
}

fn csv_with_header(doc: &CoefficientDocument) -> String {
    let mut out = String::new();
    if let Some(d) = &doc.design {
        let causality = serde_json::to_value(d.causality).ok();
        out.push_str(&format!(
            "# B={} D={} kappa={} sigma={} q={} causality={} T={}\n",
            d.degree,
            d.derivative,
            d.kappa,
            d.sigma,
            d.q,
            causality.as_ref().and_then(|v| v.as_str()).unwrap_or("?"),
            doc.sample_period
        ));
    }
    out.push_str(&doc.to_csv());
    out
}

/// Coefficient discrepancy for causal filters. A two-sided pair can split its
/// centre sample and cancel poles differently per direction, so pairs are
/// compared through their combined response on the default grid instead.
fn discrepancy(
    derived: &FilterCoefficients,
    table: &FilterCoefficients,
) -> Outcome<(&'static str, f64)> {
    match (derived, table) {
        (FilterCoefficients::Causal(_), FilterCoefficients::Causal(_)) => Ok((
            "coefficients",
            derived.max_abs_diff(table).unwrap_or(f64::INFINITY),
        )),
        (FilterCoefficients::NonCausal(_), FilterCoefficients::NonCausal(_)) => Ok((
            "response",
            uniform_grid(512)
                .into_iter()
                .map(|w| (derived.response(w) - table.response(w)).norm())
                .fold(0.0, f64::max),
        )),
        _ => Err(Failure::Input(
            "derived and tabulated filters differ in kind".into(),
        )),
    }
}

fn run_design(cmd: DesignCmd) -> Outcome {
    let resolved = resolve(&cmd.design)?;
    let design = &resolved.design;
    let text = match cmd.source {
        Source::Derive | Source::Table => {
            let coefficients = if cmd.source == Source::Derive {
                derive(design)?
            } else {
                tabulated(&resolved)?
            };
            let doc = document(&coefficients, design);
            match cmd.format {
                Format::Json => doc.to_json()? + "\n",
                Format::Csv => csv_with_header(&doc),
            }
        }
        Source::BothCompare => {
            let derived = derive(design)?;
            let table = tabulated(&resolved)?;
            let (kind, discrepancy) = discrepancy(&derived, &table)?;
            let (derived, table) = (document(&derived, design), document(&table, design));
            match cmd.format {
                Format::Json => {
                    let value = json!({
                        "derived": derived,
                        "table": table,
                        "discrepancy_kind": kind,
                        "max_abs_discrepancy": discrepancy,
                    });
                    serde_json::to_string_pretty(&value)
                        .map_err(|e| Failure::Input(e.to_string()))?
                        + "\n"
                }
                Format::Csv => format!(
                    "{}# table\n{}# max_abs_discrepancy={discrepancy:e} ({kind})\n",
                    csv_with_header(&derived),
                    table.to_csv()
                ),
            }
        }
    };
    emit(&text, cmd.output.as_deref())
}

fn load_coefficients(path: &Path, sample_period: f64) -> Outcome<FilterCoefficients> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let doc = if text.trim_start().starts_with('{') {
        CoefficientDocument::from_json(&text)
    } else {
        CoefficientDocument::from_csv(&text, sample_period)
    }
    .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    Ok(doc.coefficients()?)
}

fn run_response(cmd: ResponseCmd) -> Outcome {
    let filter = match &cmd.coeff {
        Some(path) => load_coefficients(path, cmd.design.sample_period)?,
        None => derive(&resolve(&cmd.design)?.design)?,
    };
    if cmd.points == 0 {
        return Err(Failure::Input("--points must be at least 1".into()));
    }
    let samples = evaluate_response(&filter, &uniform_grid(cmd.points))?;
    let mut text = response_csv(&samples);
    if cmd.report_flatness {
        for entry in flatness_report(&filter, cmd.flatness_order)? {
            text.push_str(&format!(
                "# flatness order={} derivative={} relative={} flat={}\n",
                entry.order,
                format_significant(entry.derivative, 6),
                format_significant(entry.relative, 6),
                entry.flat
            ));
        }
    }
    emit(&text, cmd.output.as_deref())
}

fn has_extension(path: &Path, ext: &str) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

fn write_image(path: &Path, img: &Image) -> Outcome {
    if has_extension(path, "f32") {
        write_raw_stack(path, std::slice::from_ref(img))?;
    } else if has_extension(path, "pgm") {
        write_pgm_preview(path, img)?;
    } else {
        return Err(Failure::Input(format!(
            "{}: image output must end in .pgm or .f32",
            path.display()
        )));
    }
    Ok(())
}

fn run_filter(cmd: FilterCmd) -> Outcome {
    let filter = load_coefficients(&cmd.coeff, cmd.sample_period)?;
    let kind = match filter {
        FilterCoefficients::Causal(_) => CausalityArg::Causal,
        FilterCoefficients::NonCausal(_) => CausalityArg::Noncausal,
    };
    if let Some(mode) = cmd.mode.filter(|&m| m != kind) {
        return Err(Failure::Input(format!(
            "--mode {} does not match the {} coefficients in {}",
            mode.to_possible_value()
                .map(|v| v.get_name().to_owned())
                .unwrap_or_default(),
            kind.to_possible_value()
                .map(|v| v.get_name().to_owned())
                .unwrap_or_default(),
            cmd.coeff.display()
        )));
    }
    let priming = match cmd.priming {
        PrimingArg::Zero => Priming::Zero,
        PrimingArg::Hold => Priming::HoldFirst,
    };
    let input = &cmd.input;

    if cmd.axis == AxisArg::Time {
        let FilterCoefficients::Causal(lde) = &filter else {
            return Err(Failure::Input(
                "filtering along time needs causal coefficients".into(),
            ));
        };
        let output = cmd
            .output
            .as_deref()
            .filter(|p| has_extension(p, "f32"))
            .ok_or_else(|| Failure::Input("--axis time needs an --output ending in .f32".into()))?;
        let stream = read_frames(input)?;
        let frames: Vec<Image> = filter_time_stack(lde, &stream, priming).collect();
        write_raw_stack(output, &frames)?;
        return Ok(());
    }

    if has_extension(input, "pgm") || has_extension(input, "f32") {
        let img = if has_extension(input, "pgm") {
            read_pgm(input)?
        } else {
            let stream = read_frames(input)?;
            if stream.len() != 1 {
                return Err(Failure::Input(format!(
                    "{}: holds {} frames; use --axis time for stacks",
                    input.display(),
                    stream.len()
                )));
            }
            stream.into_frames().remove(0)
        };
        let axis = if cmd.axis == AxisArg::Rows {
            Axis::Rows
        } else {
            Axis::Cols
        };
        let out = filter_image_separable(&filter, &img, axis, priming);
        let output = cmd
            .output
            .as_deref()
            .ok_or_else(|| Failure::Input("image filtering needs --output".into()))?;
        return write_image(output, &out);
    }

    let signal =
        read_signal_csv(input).map_err(|e| Failure::Input(format!("{}: {e}", input.display())))?;
    emit(
        &format_signal_csv(&filter_signal(&filter, &signal, priming)),
        cmd.output.as_deref(),
    )
}

fn flow_config(cmd: &FlowCmd) -> Outcome<FlowConfig> {
    let mut cfg = FlowConfig::default();
    let overrides: [(&mut f64, Option<f64>); 7] = [
        (&mut cfg.spatial_sigma, cmd.spatial_sigma),
        (&mut cfg.temporal_sigma, cmd.temporal_sigma),
        (&mut cfg.temporal_q, cmd.temporal_q),
        (&mut cfg.smoothing_pole, cmd.smoothing_pole),
        (&mut cfg.det_threshold, cmd.det_threshold),
        (&mut cfg.t_space, cmd.t_space),
        (&mut cfg.t_time, cmd.t_time),
    ];
    for (field, value) in overrides {
        if let Some(v) = value {
            *field = v;
        }
    }
    if let Some(kappa) = cmd.temporal_kappa {
        cfg.temporal_kappa = kappa;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_flow(cmd: FlowCmd) -> Outcome {
    let cfg = flow_config(&cmd)?;
    let stream = read_frames(&cmd.frames)
        .map_err(|e| Failure::Input(format!("{}: {e}", cmd.frames.display())))?;
    let warmup = cfg.warmup_frames();
    if stream.len() <= warmup {
        let msg = format!(
            "stream has {} frames but the warm-up span is {warmup}",
            stream.len()
        );
        if cmd.strict {
            return Err(Failure::TooShort(msg));
        }
        eprintln!("lagfilt: warning: {msg}; every output frame is flagged as warm-up");
    }
    let result = process_sequence(&stream, &cfg)?;
    fs::create_dir_all(&cmd.out)?;

    let (mut vx, mut vy, mut valid, mut dj) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut previews = Vec::new();
    for frame in &result.frames {
        let mask = frame
            .flow
            .valid
            .iter()
            .map(|&v| if v { 1.0 } else { 0.0 })
            .collect();
        valid.push(Image::new(stream.width(), stream.height(), mask)?);
        vx.push(frame.flow.vx.clone());
        vy.push(frame.flow.vy.clone());
        dj.push(frame.disparity.dj.clone());
        let name = format!("disparity_{:04}.pgm", frame.index);
        write_pgm_preview(&cmd.out.join(&name), &frame.disparity.dj)?;
        previews.push(name);
    }
    for (name, frames) in [
        ("vx.f32", &vx),
        ("vy.f32", &vy),
        ("valid.f32", &valid),
        ("disparity.f32", &dj),
    ] {
        write_raw_stack(&cmd.out.join(name), frames)?;
    }

    let manifest = json!({
        "input": cmd.frames.display().to_string(),
        "width": stream.width(),
        "height": stream.height(),
        "frames": stream.len(),
        "config": cfg,
        "delay_frames": cfg.delay_frames(),
        "warmup_frames": warmup,
        "warmup_span": [0, warmup.min(stream.len())],
        "outputs": {
            "vx": "vx.f32",
            "vy": "vy.f32",
            "valid": "valid.f32",
            "disparity": "disparity.f32",
            "disparity_previews": previews,
        },
    });
    let text =
        serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Input(e.to_string()))?;
    fs::write(cmd.out.join("manifest.json"), text + "\n")?;
    Ok(())
}

fn run_selftest(cmd: SelftestCmd) -> Outcome {
    let opts = Options::default();
    let reports = if cmd.only.is_empty() {
        acceptance::run_all(&opts)
    } else {
        cmd.only
            .iter()
            .map(|&id| {
                acceptance::run(id, &opts).ok_or_else(|| {
                    Failure::Input(format!(
                        "unknown criterion {id}; known: 1..={}",
                        CRITERIA.len()
                    ))
                })
            })
            .collect::<Outcome<Vec<_>>>()?
    };
    print!("{}", acceptance::render(&reports));
    if reports.iter().all(|r| r.passed) {
        Ok(())
    } else {
        Err(Failure::SelftestFailed)
    }
}
