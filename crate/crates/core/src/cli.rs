//! Command-line front end. Exit codes: 0 success, 1 IO failure, 2 invalid
//! input (including bad flags).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::bundle::{frame_file_name, read_bundle, write_bundle};
use crate::chain::{chain_chunks, write_chain, DEFAULT_CHUNK_LEN, DEFAULT_OVERLAP};
use crate::codec::DEFAULT_K;
use crate::design::{parse_design, MotionDesign};
use crate::error::{Error, Result};
use crate::io::{encode_png, load_depth, load_mask, load_rgb};
use crate::pipeline::{resolve_scene, translate, TranslateOptions};
use crate::types::SceneContext;
use crate::verify::verify_bundle;
use crate::warp::{render_preview, DEFAULT_POINTS};

/// Environment variable capping worker threads (0 or unset = automatic).
pub const THREADS_ENV: &str = "MOTIONFORGE_THREADS";
pub const PREVIEW_DIR: &str = "preview_frames";

#[derive(Debug, Parser)]
#[command(
    name = "motionforge",
    version,
    about = "Translate motion designs into screen-space control signals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the signal bundle for a design.
    Translate(TranslateArgs),
    /// Like `translate`, plus depth-warped preview frames of the image.
    Preview(TranslateArgs),
    /// Write overlapping per-chunk bundles and chain_manifest.json.
    Chain {
        #[command(flatten)]
        args: TranslateArgs,
        #[arg(long, default_value_t = DEFAULT_CHUNK_LEN)]
        chunk_len: usize,
        #[arg(long, default_value_t = DEFAULT_OVERLAP)]
        overlap: usize,
    },
    /// Recover camera poses from a bundle and print metrics as JSON.
    Verify {
        #[arg(long)]
        bundle: PathBuf,
        #[command(flatten)]
        scene: SceneArgs,
    },
    /// Run the HTTP service.
    #[cfg(feature = "server")]
    Serve(crate::service::ServeArgs),
}

#[derive(Debug, Args)]
struct SceneArgs {
    /// Motion design JSON.
    #[arg(long)]
    design: PathBuf,
    /// Depth map: PFM, or 16-bit PNG with a scale.
    #[arg(long)]
    depth: PathBuf,
    /// Scale for 16-bit PNG depth; defaults to the `<depth>.scale` sidecar.
    #[arg(long)]
    depth_scale: Option<f64>,
    /// Object label mask (8- or 16-bit grayscale PNG, 0 = static).
    #[arg(long)]
    masks: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TranslateArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// Input image; required for `preview`, dimension-checked otherwise.
    #[arg(long)]
    image: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_POINTS)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// DCT slots per track.
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
}

impl TranslateArgs {
    fn options(&self) -> TranslateOptions {
        TranslateOptions {
            points: self.points,
            seed: self.seed,
            k: self.k,
        }
    }
}

/// A failure plus the file it concerns, when the error itself doesn't say.
struct Failure {
    file: Option<PathBuf>,
    error: Error,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure { file: None, error }
    }
}

fn in_file(file: &Path) -> impl FnOnce(Error) -> Failure + '_ {
    move |error| Failure {
        file: Some(file.to_path_buf()),
        error,
    }
}

fn load_design(path: &Path) -> std::result::Result<MotionDesign, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_design(&text).map_err(in_file(path))
}

fn load_scene(args: &SceneArgs) -> Result<SceneContext> {
    let depth = load_depth(&args.depth, args.depth_scale)?;
    let mask = args.masks.as_deref().map(load_mask).transpose()?;
    SceneContext::new(depth, mask, None)
}

fn load_image(path: &Path, ctx: &SceneContext) -> std::result::Result<image::RgbImage, Failure> {
    let img = load_rgb(path)?;
    if img.width() != ctx.width || img.height() != ctx.height {
        return Err(in_file(path)(Error::DimensionMismatch(format!(
            "image is {}x{} but depth is {}x{}",
            img.width(),
            img.height(),
            ctx.width,
            ctx.height
        ))));
    }
    Ok(img)
}

fn write_preview(dir: &Path, frames: &[image::RgbImage]) -> Result<()> {
    let dir = dir.join(PREVIEW_DIR);
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    frames.par_iter().enumerate().try_for_each(|(l, f)| {
        let p = dir.join(frame_file_name(l));
        fs::write(&p, encode_png(f)?).map_err(|e| Error::io(&p, e))
    })
}

fn configure_threads() {
    let n = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    if n > 0 {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn execute(cmd: Command, stdout: &mut dyn Write) -> std::result::Result<(), Failure> {
    match cmd {
        Command::Translate(args) => {
            let design = load_design(&args.scene.design)?;
            let ctx = load_scene(&args.scene)?;
            if let Some(p) = &args.image {
                load_image(p, &ctx)?;
            }
            let t = translate(&design, &ctx, &args.options()).map_err(in_file(&args.scene.design))?;
            write_bundle(&t.bundle, &args.out)?;
        }
        Command::Preview(args) => {
            let design = load_design(&args.scene.design)?;
            let ctx = load_scene(&args.scene)?;
            let image_path = args
                .image
                .as_ref()
                .ok_or_else(|| Error::Validation("preview needs --image".into()))?;
            let img = load_image(image_path, &ctx)?;
            let t = translate(&design, &ctx, &args.options()).map_err(in_file(&args.scene.design))?;
            let scene = resolve_scene(&design, &ctx)?;
            let frames = render_preview(&img, &scene, &t.path)?;
            write_bundle(&t.bundle, &args.out)?;
            write_preview(&args.out, &frames)?;
        }
        Command::Chain {
            args,
            chunk_len,
            overlap,
        } => {
            let design = load_design(&args.scene.design)?;
            let ctx = load_scene(&args.scene)?;
            let plan = chain_chunks(&design, &ctx, chunk_len, overlap, &args.options())
                .map_err(in_file(&args.scene.design))?;
            write_chain(&plan, &args.out)?;
        }
        Command::Verify { bundle, scene } => {
            let design = load_design(&scene.design)?;
            let ctx = load_scene(&scene)?;
            let b = read_bundle(&bundle)?;
            let report = verify_bundle(&b, &design, &ctx).map_err(in_file(&bundle))?;
            let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
            text.push('\n');
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| Error::io("<stdout>", e))?;
        }
        #[cfg(feature = "server")]
        Command::Serve(args) => crate::service::serve_blocking(args)?,
    }
    Ok(())
}

/// Run with explicit output streams; returns the process exit code.
pub fn run_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    configure_threads();
    match execute(cli.command, stdout) {
        Ok(()) => 0,
        Err(f) => {
            let _ = match &f.file {
                Some(p) => writeln!(stderr, "error: {}: {}", p.display(), f.error),
                None => writeln!(stderr, "error: {}", f.error),
            };
            f.error.exit_code()
        }
    }
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_with(args.iter().copied(), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn unknown_flag_exits_2() {
        let (code, _, err) = run_capture(&["motionforge", "translate", "--bogus"]);
        assert_eq!(code, 2);
        assert!(!err.is_empty());
    }

    #[test]
    fn help_exits_0() {
        let (code, out, _) = run_capture(&["motionforge", "--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("translate"));
    }

    #[test]
    fn missing_design_exits_1_naming_the_path() {
        let (code, _, err) = run_capture(&[
            "motionforge",
            "translate",
            "--design",
            "/nonexistent/d.json",
            "--depth",
            "/nonexistent/d.pfm",
            "--out",
            "/tmp/unused",
        ]);
        assert_eq!(code, 1);
        assert!(err.contains("/nonexistent/d.json"));
    }
}
