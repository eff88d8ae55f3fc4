use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use clipscaffold::constraints::{compile_constraints, ConstraintConfig};
use clipscaffold::extrude::{solve, verify_constraints, ExtrusionSolution, SolveConfig};
use clipscaffold::mask::{rasterize_mask, DEFAULT_MASK_RESOLUTION};
use clipscaffold::model::{parse_annotations, parse_kind_overrides, Clipart, Rgba, Viewpoint};
use clipscaffold::render::{export_obj, render, RenderConfig};
use clipscaffold::shape::{load_shape, prepare_shape, GuidingShape, ShapeFormat};
use clipscaffold::svg::{parse_clipart, strip_fills, to_svg};
use clipscaffold::synthetic::{run_roundtrip, RoundtripConfig};
use clipscaffold::{Error, Result};
use clipscaffold_server::{path_table, App};

#[derive(Parser)]
#[command(name = "clipscaffold", version, about = "Extrude vector clipart into 3D scaffolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the path table of a clipart as JSON.
    Inspect {
        clipart: PathBuf,
        #[command(flatten)]
        kinds: Kinds,
        /// Print the normalized clipart as SVG instead.
        #[arg(long)]
        canonical: bool,
    },
    /// Rasterize the geometry mask to PNG.
    Mask {
        clipart: PathBuf,
        #[command(flatten)]
        kinds: Kinds,
        #[arg(long, default_value_t = DEFAULT_MASK_RESOLUTION)]
        resolution: usize,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Write the clipart outlines without fills.
    Outline {
        clipart: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Align a guiding shape to a clipart and drop vertices outside its mask.
    Filter {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value_t = DEFAULT_MASK_RESOLUTION)]
        resolution: usize,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Solve for extruded volumes and write the solution JSON.
    Solve {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Solver configuration JSON; flags below take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        omega: Option<f64>,
        #[arg(long)]
        margin: Option<f64>,
        /// Run the local refinement pass.
        #[arg(long)]
        refine: bool,
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Also write the prisms as a Wavefront OBJ mesh.
        #[arg(long)]
        obj: Option<PathBuf>,
    },
    /// Check a solution against the constraints of a clipart and annotations.
    Verify {
        #[arg(long)]
        clipart: PathBuf,
        #[command(flatten)]
        kinds: Kinds,
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long)]
        solution: PathBuf,
        /// Depth-order margin; defaults to the one stored in the solution.
        #[arg(long)]
        margin: Option<f64>,
    },
    /// Render a solution to a scaffold PNG.
    Render {
        #[arg(long)]
        solution: PathBuf,
        /// Preset (front, side, top, upper45) or `azimuth,elevation[,scale]`.
        #[arg(long, conflicts_with_all = ["azimuth", "elevation"])]
        view: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        azimuth: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        elevation: Option<f64>,
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long, default_value_t = 512)]
        width: usize,
        #[arg(long, default_value_t = 512)]
        height: usize,
        #[arg(long)]
        no_outline: bool,
        #[arg(long, default_value = "#ffffff")]
        bg: String,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Recover random box scenes from sampled points and report the errors.
    Roundtrip {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        scenes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        samples: Option<usize>,
        /// Print the report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Session directory; defaults to SCAFFOLD_DATA_DIR, else memory only.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Kinds {
    /// JSON object mapping path ids to "geometry" or "shading".
    #[arg(long)]
    kinds: Option<PathBuf>,
}

#[derive(Args)]
struct Inputs {
    #[arg(long)]
    clipart: PathBuf,
    #[arg(long)]
    shape: PathBuf,
    /// Shape format; guessed from the extension when omitted.
    #[arg(long)]
    format: Option<ShapeFormat>,
    #[command(flatten)]
    kinds: Kinds,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read(path)?).map_err(|_| Error::Io(format!("{}: not UTF-8", path.display())))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Error::Io(format!("stdout: {e}"))),
    }
}

fn load_clipart(path: &Path, kinds: &Kinds) -> Result<Clipart> {
    let mut clipart = parse_clipart(&read(path)?)?;
    if let Some(k) = &kinds.kinds {
        clipart.apply_kind_overrides(&parse_kind_overrides(&read_text(k)?)?)?;
    }
    Ok(clipart)
}

fn load_inputs(inputs: &Inputs) -> Result<(Clipart, GuidingShape)> {
    let clipart = load_clipart(&inputs.clipart, &inputs.kinds)?;
    let format = match inputs.format {
        Some(f) => f,
        None => ShapeFormat::from_path(&inputs.shape.to_string_lossy()).ok_or_else(|| {
            Error::Format(format!(
                "cannot tell the format of {}; pass --format",
                inputs.shape.display()
            ))
        })?,
    };
    let shape = load_shape(&read(&inputs.shape)?, format)?;
    Ok((clipart, shape))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Inspect {
            clipart,
            kinds,
            canonical,
        } => {
            let clipart = load_clipart(&clipart, &kinds)?;
            let text = if canonical {
                to_svg(&clipart)
            } else {
                serde_json::to_string_pretty(&path_table(&clipart)).expect("table serializes") + "\n"
            };
            emit(None, text.as_bytes())?;
        }
        Command::Mask {
            clipart,
            kinds,
            resolution,
            out,
        } => {
            let clipart = load_clipart(&clipart, &kinds)?;
            emit(out.as_deref(), &rasterize_mask(&clipart, resolution)?.to_png()?)?;
        }
        Command::Outline { clipart, out } => {
            let clipart = parse_clipart(&read(&clipart)?)?;
            emit(out.as_deref(), strip_fills(&clipart)?.as_bytes())?;
        }
        Command::Filter {
            inputs,
            resolution,
            out,
        } => {
            let (clipart, raw) = load_inputs(&inputs)?;
            let shape = prepare_shape(&raw, &clipart, resolution)?;
            log::info!("kept {} of {} vertices", shape.vertices.len(), raw.vertices.len());
            emit(out.as_deref(), shape.to_obj().as_bytes())?;
        }
        Command::Solve {
            inputs,
            annotations,
            config,
            omega,
            margin,
            refine,
            out,
            obj,
        } => {
            let mut cfg = match &config {
                Some(p) => SolveConfig::from_json(&read_text(p)?)?,
                None => SolveConfig::default(),
            };
            if let Some(w) = omega {
                cfg.omega = w;
            }
            if let Some(m) = margin {
                cfg.order_margin = m;
            }
            if refine {
                cfg.refine.enabled = true;
            }
            let (clipart, raw) = load_inputs(&inputs)?;
            let anns = match &annotations {
                Some(p) => parse_annotations(&read_text(p)?)?,
                None => Vec::new(),
            };
            let shape = prepare_shape(&raw, &clipart, DEFAULT_MASK_RESOLUTION)?;
            let solution = solve(&clipart, &shape, &anns, &cfg)?;
            log::info!(
                "{} prisms, total cost {:.6}",
                solution.prisms.len(),
                solution.total_cost
            );
            if let Some(p) = &obj {
                emit(Some(p), export_obj(&solution)?.as_bytes())?;
            }
            emit(out.as_deref(), (solution.to_json() + "\n").as_bytes())?;
        }
        Command::Verify {
            clipart,
            kinds,
            annotations,
            solution,
            margin,
        } => {
            let clipart = load_clipart(&clipart, &kinds)?;
            let solution = ExtrusionSolution::from_json(&read_text(&solution)?)?;
            let anns = match &annotations {
                Some(p) => parse_annotations(&read_text(p)?)?,
                None => Vec::new(),
            };
            let cfg = ConstraintConfig {
                order_margin: margin.unwrap_or(solution.order_margin),
                ..ConstraintConfig::default()
            };
            let constraints = compile_constraints(&clipart, &anns, &cfg)?;
            verify_constraints(&solution.prisms, &constraints)?;
            let report = serde_json::json!({
                "prisms": solution.prisms.len(),
                "depth_classes": constraints.depth_classes.len(),
                "thickness_classes": constraints.thickness_classes.len(),
                "order_edges": constraints.order_edges.len(),
                "total_cost": solution.total_cost,
            });
            emit(
                None,
                (serde_json::to_string_pretty(&report).expect("report serializes") + "\n").as_bytes(),
            )?;
        }
        Command::Render {
            solution,
            view,
            azimuth,
            elevation,
            scale,
            width,
            height,
            no_outline,
            bg,
            out,
        } => {
            let solution = ExtrusionSolution::from_json(&read_text(&solution)?)?;
            let mut v = match view {
                Some(name) => name.parse::<Viewpoint>()?,
                None => Viewpoint::new(azimuth.unwrap_or(0.0), elevation.unwrap_or(0.0)),
            };
            if let Some(s) = scale {
                v = v.with_scale(s);
            }
            v.validate()?;
            let hex = if bg.starts_with('#') { bg } else { format!("#{bg}") };
            let config = RenderConfig {
                width,
                height,
                outline: !no_outline,
                background: hex.parse::<Rgba>()?,
                ..RenderConfig::default()
            };
            emit(Some(&out), &render(&solution, &v, &config)?.to_png()?)?;
        }
        Command::Roundtrip {
            config,
            scenes,
            seed,
            samples,
            json,
        } => {
            let mut cfg: RoundtripConfig = match &config {
                Some(p) => serde_json::from_str(&read_text(p)?).map_err(|e| Error::Config(e.to_string()))?,
                None => RoundtripConfig::default(),
            };
            cfg.scenes = scenes.unwrap_or(cfg.scenes);
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.samples = samples.unwrap_or(cfg.samples);
            let report = run_roundtrip(&cfg)?;
            let text = if json {
                serde_json::to_string_pretty(&report).expect("report serializes") + "\n"
            } else {
                report.table()
            };
            emit(None, text.as_bytes())?;
            if !report.passed {
                eprintln!("error[ROUNDTRIP_FAILED]: recovered fraction below the required threshold");
                return Ok(false);
            }
        }
        Command::Serve { port, host, data_dir } => {
            let app = match data_dir {
                Some(d) => App::new(Some(d)),
                None => App::from_env(),
            }?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(clipscaffold_server::serve(SocketAddr::new(host, port), Arc::new(app)))?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SCAFFOLD_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(1)
        }
    }
}
